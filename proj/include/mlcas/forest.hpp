/*
 * Copyright 2026 The mlcas Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlcas/core.hpp"
#include "mlcas/matrix.hpp"

namespace mlcas {

enum class MaxFeatures { kAuto, kSqrt, kLog2 };

std::string_view to_string(MaxFeatures mode);
MaxFeatures parse_max_features(std::string_view text);

// Number of candidate features per split: AUTO -> d, SQRT -> ceil(sqrt d),
// LOG2 -> max(1, ceil(log2 d)), never more than d.
std::size_t candidate_feature_count(MaxFeatures mode, std::size_t d);

struct ForestParams {
  int n_estimators = 100;
  MaxFeatures max_features = MaxFeatures::kAuto;
  std::optional<int> max_depth;  // nullopt: unlimited
  int min_samples_split = 2;
  int min_samples_leaf = 1;

  // Throws Error(kInvalidArgument).
  void validate() const;
  // e.g. "n_estimators=50 max_features=sqrt max_depth=none min_samples_split=2 min_samples_leaf=1"
  std::string describe() const;
  static ForestParams parse(std::string_view text);

  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

// The 2 * 3 * 4 * 3 = 72 candidates, nested n_estimators > max_features >
// max_depth > min_samples_split in the listed value order.
std::vector<ForestParams> default_search_grid();

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  // Training rows reaching the node, counted with bootstrap multiplicity.
  std::size_t n_train = 0;

  bool is_leaf() const noexcept { return feature < 0; }

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

// Binary regression tree; node 0 is the root, nodes are stored in preorder.
// A sample goes left when x[feature] <= threshold.
struct RegressionTree {
  std::vector<TreeNode> nodes;
  // nodes.size() * n_targets node means, row-major by node.
  std::vector<double> values;
  std::size_t n_targets = 0;

  std::span<const double> value(std::size_t node) const { return {values.data() + node * n_targets, n_targets}; }
  std::size_t leaf_for(std::span<const double> x) const;
  std::span<const double> predict(std::span<const double> x) const { return value(leaf_for(x)); }
  // Depth of the deepest node, the root being depth 0.
  int depth() const;
  // Structural checks: proper binary tree and child counts summing to the
  // parent's. Throws Error(kMalformedModel).
  void validate() const;

  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;
};

struct RegressionForest {
  std::vector<RegressionTree> trees;
  ForestParams params;
  std::vector<std::string> feature_names;
  std::vector<std::string> target_names;
  std::uint64_t base_seed = 0;
  std::uint64_t task = 0;

  std::size_t n_features() const noexcept { return feature_names.size(); }
  std::size_t n_targets() const noexcept { return target_names.size(); }

  friend bool operator==(const RegressionForest&, const RegressionForest&) = default;
};

// Greedy CART on the listed rows (duplicates allowed, counted with
// multiplicity). Candidate features are drawn from `rng` at each node.
RegressionTree fit_tree_on(const Matrix& x, const Matrix& y, std::span<const std::size_t> rows,
                           const ForestParams& params, Rng& rng);

// Unbootstrapped tree on every row of (x, y).
RegressionTree fit_tree(const Matrix& x, const Matrix& y, const ForestParams& params, std::uint64_t rng_seed);

// n draws with replacement from [0, n).
std::vector<std::size_t> bootstrap_rows(std::size_t n, Rng& rng);

// Tree i is grown on a bootstrap sample driven by
// Rng(derive_seed(base_seed, task, i)); the same stream then drives feature
// subsampling. Names default to f0.. / t0.. when empty.
RegressionForest fit_forest(const Matrix& x, const Matrix& y, const ForestParams& params, std::uint64_t base_seed,
                            std::uint64_t task, std::vector<std::string> feature_names = {},
                            std::vector<std::string> target_names = {}, int jobs = 1);

// Mean of the trees' leaf vectors, accumulated in stored tree order.
std::vector<double> predict(const RegressionForest& forest, std::span<const double> x);

struct CvScore {
  ForestParams params;
  double mse = 0.0;
  std::vector<double> fold_mse;
};

struct CvReport {
  std::vector<CvScore> scores;  // in grid order
  std::size_t best_index = 0;
  std::vector<std::vector<std::size_t>> folds;  // held-out rows per fold
};

struct GridSearchResult {
  ForestParams best;
  CvReport report;
};

// Seeded shuffle of [0, n) cut into `folds` contiguous blocks; the first
// n % folds blocks hold one extra row.
std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t folds, std::uint64_t seed);

// k-fold CV over `grid`; score is mean over folds of held-out MSE (averaged
// over targets). Ties go to the earliest candidate.
GridSearchResult grid_search(const Matrix& x, const Matrix& y, std::span<const ForestParams> grid, std::size_t folds,
                             std::uint64_t base_seed, std::uint64_t task, int jobs = 1);

// Self-describing text format with 17-significant-digit numbers.
std::string serialize_forest(const RegressionForest& forest);
RegressionForest deserialize_forest(std::string_view text);

}  // namespace mlcas
