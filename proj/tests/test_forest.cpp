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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "mlcas/error.hpp"
#include "mlcas/forest.hpp"
#include "test_util.hpp"

namespace mlcas {
namespace {

using testing::random_matrix;

Matrix column(std::initializer_list<double> values) {
  Matrix m(values.size(), 1);
  std::size_t r = 0;
  for (double v : values) m(r++, 0) = v;
  return m;
}

ForestParams full_depth() {
  ForestParams p;
  p.n_estimators = 1;
  return p;
}

void expect_child_counts_sum(const RegressionTree& tree) {
  for (const auto& n : tree.nodes) {
    if (n.is_leaf()) continue;
    ASSERT_EQ(tree.nodes[static_cast<std::size_t>(n.left)].n_train +
                  tree.nodes[static_cast<std::size_t>(n.right)].n_train,
              n.n_train);
  }
}

TEST(ForestParams, DescribeParseRoundTrip) {
  for (const auto& p : default_search_grid()) EXPECT_EQ(ForestParams::parse(p.describe()), p);
  ForestParams p;
  p.min_samples_leaf = 3;
  EXPECT_EQ(ForestParams::parse(p.describe()), p);
}

TEST(ForestParams, ValidateRejectsNonsense) {
  ForestParams p;
  p.n_estimators = 0;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.min_samples_split = 1;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.max_depth = -1;
  EXPECT_THROW(p.validate(), Error);
  EXPECT_THROW(ForestParams::parse("n_estimators=10 bogus=1"), Error);
}

TEST(MaxFeatures, CandidateCounts) {
  EXPECT_EQ(candidate_feature_count(MaxFeatures::kAuto, 17), 17u);
  EXPECT_EQ(candidate_feature_count(MaxFeatures::kSqrt, 17), 5u);
  EXPECT_EQ(candidate_feature_count(MaxFeatures::kSqrt, 16), 4u);
  EXPECT_EQ(candidate_feature_count(MaxFeatures::kLog2, 17), 5u);
  EXPECT_EQ(candidate_feature_count(MaxFeatures::kLog2, 16), 4u);
  EXPECT_EQ(candidate_feature_count(MaxFeatures::kLog2, 1), 1u);
}

TEST(Grid, DefaultHas72CanonicalCandidates) {
  const auto grid = default_search_grid();
  ASSERT_EQ(grid.size(), 72u);
  EXPECT_EQ(grid.front().describe(),
            "n_estimators=50 max_features=auto max_depth=4 min_samples_split=2 min_samples_leaf=1");
  EXPECT_EQ(grid[1].min_samples_split, 5);
  EXPECT_EQ(grid[3].max_depth, 8);
  EXPECT_EQ(grid[9].max_depth, std::nullopt);
  EXPECT_EQ(grid[12].max_features, MaxFeatures::kSqrt);
  EXPECT_EQ(grid[36].n_estimators, 100);
  EXPECT_EQ(grid.back().describe(),
            "n_estimators=100 max_features=log2 max_depth=none min_samples_split=10 min_samples_leaf=1");
  std::set<std::string> unique;
  for (const auto& p : grid) unique.insert(p.describe());
  EXPECT_EQ(unique.size(), 72u);
}

TEST(FitTree, ConstantTargetIsOneLeaf) {
  const Matrix x = random_matrix(10, 3, 1);
  const Matrix y(10, 1, 0.25);
  const auto tree = fit_tree(x, y, full_depth(), 1);
  ASSERT_EQ(tree.nodes.size(), 1u);
  EXPECT_EQ(tree.depth(), 0u);
  EXPECT_EQ(tree.predict(x.row(3))[0], 0.25);
}

TEST(FitTree, StepFunction) {
  const auto tree = fit_tree(column({-2, -1, 1, 2}), column({1, 1, 3, 3}), full_depth(), 0);
  ASSERT_EQ(tree.nodes.size(), 3u);
  EXPECT_EQ(tree.nodes[0].feature, 0);
  // scikit-learn places the same split at 0.0 (tests/oracles).
  EXPECT_EQ(tree.nodes[0].threshold, 0.0);
  EXPECT_EQ(tree.predict(std::vector<double>{-5})[0], 1.0);
  EXPECT_EQ(tree.predict(std::vector<double>{5})[0], 3.0);
  EXPECT_EQ(tree.nodes[0].n_train, 4u);
}

TEST(FitTree, MatchesScikitLearnDepthTwo) {
  Matrix x(8, 2);
  const double data[8][2] = {{0.1, 5.0}, {0.4, 3.0}, {0.35, 1.0}, {0.8, 2.5},
                             {0.9, 4.5}, {0.6, 0.5}, {0.2, 2.0},  {0.7, 3.8}};
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < 2; ++c) x(r, c) = data[r][c];
  const Matrix y = column({1.0, 2.0, 2.2, 4.0, 5.5, 3.1, 1.4, 4.9});
  ForestParams p = full_depth();
  p.max_depth = 2;
  const auto tree = fit_tree(x, y, p, 0);
  EXPECT_EQ(tree.nodes[0].feature, 0);
  EXPECT_NEAR(tree.nodes[0].threshold, 0.65, 1e-6);  // float32 in scikit-learn
  const double probe[5][2] = {{0.15, 4.0}, {0.5, 1.5}, {0.85, 4.0}, {0.62, 0.2}, {0.3, 2.9}};
  const double expected[5] = {1.2, 2.4333333333333336, 5.2, 2.4333333333333336, 2.4333333333333336};
  for (int i = 0; i < 5; ++i)
    EXPECT_NEAR(tree.predict(std::vector<double>{probe[i][0], probe[i][1]})[0], expected[i], 1e-12) << i;
}

TEST(FitTree, DepthLimitHonoured) {
  const Matrix x = random_matrix(200, 4, 5);
  const Matrix y = random_matrix(200, 2, 6);
  ForestParams p = full_depth();
  p.max_depth = 4;
  const auto tree = fit_tree(x, y, p, 3);
  EXPECT_LE(tree.depth(), 4u);
  EXPECT_EQ(tree.depth(), 4u);
}

TEST(FitTree, MinSamplesRules) {
  const Matrix x = random_matrix(60, 3, 8);
  const Matrix y = random_matrix(60, 1, 9);
  ForestParams p = full_depth();
  p.min_samples_split = 10;
  p.min_samples_leaf = 4;
  const auto tree = fit_tree(x, y, p, 1);
  for (const auto& n : tree.nodes) {
    if (n.is_leaf()) {
      EXPECT_GE(n.n_train, 4u);
    } else {
      EXPECT_GE(n.n_train, 10u);
    }
  }
}

TEST(FitTree, InterpolatesUniqueTrainingRows) {
  for (unsigned seed = 0; seed < 10; ++seed) {
    const Matrix x = random_matrix(40, 3, seed);
    const Matrix y = random_matrix(40, 2, seed + 100);
    const auto tree = fit_tree(x, y, full_depth(), seed);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const auto pred = tree.predict(x.row(r));
      ASSERT_EQ(pred[0], y(r, 0));
      ASSERT_EQ(pred[1], y(r, 1));
    }
    expect_child_counts_sum(tree);
  }
}

TEST(FitTree, DeeperNeverWorseOnTraining) {
  const Matrix x = random_matrix(80, 4, 12);
  const Matrix y = random_matrix(80, 1, 13);
  double previous = std::numeric_limits<double>::infinity();
  for (int depth : {1, 2, 3, 4, 6, 8, 15}) {
    ForestParams p = full_depth();
    p.max_depth = depth;
    const auto tree = fit_tree(x, y, p, 0);
    double sse = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) sse += std::pow(tree.predict(x.row(r))[0] - y(r, 0), 2);
    EXPECT_LE(sse, previous + 1e-12) << depth;
    previous = sse;
  }
}

TEST(FitTree, EmptyTrainingSet) {
  try {
    fit_tree(Matrix(0, 2), Matrix(0, 1), full_depth(), 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyTrainingSet);
  }
}

TEST(FitForest, TreeCountAndDeterminism) {
  const Matrix x = random_matrix(30, 5, 1);
  const Matrix y = random_matrix(30, 2, 2);
  ForestParams p;
  p.n_estimators = 50;
  p.max_features = MaxFeatures::kSqrt;
  const auto a = fit_forest(x, y, p, 7, 11);
  const auto b = fit_forest(x, y, p, 7, 11, {}, {}, 4);
  EXPECT_EQ(a.trees.size(), 50u);
  EXPECT_EQ(a, b);
  for (const auto& t : a.trees) {
    EXPECT_NO_THROW(t.validate());
    expect_child_counts_sum(t);
    EXPECT_EQ(t.nodes[0].n_train, 30u);
  }
}

TEST(FitForest, DifferentTasksDrawDifferentBootstraps) {
  int differing = 0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    Rng a(derive_seed(5, 1, i)), b(derive_seed(5, 2, i));
    auto ra = bootstrap_rows(40, a), rb = bootstrap_rows(40, b);
    std::sort(ra.begin(), ra.end());
    std::sort(rb.begin(), rb.end());
    differing += ra != rb;
  }
  EXPECT_EQ(differing, 20);
}

TEST(Predict, AveragesIdenticalLeaves) {
  RegressionForest f;
  f.feature_names = {"a"};
  f.target_names = {"t"};
  RegressionTree leaf;
  leaf.nodes = {TreeNode{-1, 0.0, -1, -1, 4}};
  leaf.values = {0.75};
  leaf.n_targets = 1;
  f.trees.assign(3, leaf);
  EXPECT_EQ(predict(f, std::vector<double>{1.0})[0], 0.75);
  try {
    predict(f, std::vector<double>{1.0, 2.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(Predict, MultiTargetLength) {
  const Matrix x = random_matrix(20, 3, 4);
  const Matrix y = random_matrix(20, 6, 5);
  ForestParams p;
  p.n_estimators = 5;
  const auto f = fit_forest(x, y, p, 1, 1);
  EXPECT_EQ(predict(f, x.row(0)).size(), 6u);
}

TEST(Serialization, ExactRoundTrip) {
  const Matrix x = random_matrix(25, 4, 14);
  const Matrix y = random_matrix(25, 3, 15);
  ForestParams p;
  p.n_estimators = 7;
  p.max_depth = 3;
  const auto f = fit_forest(x, y, p, 123, 456, {"a", "b", "c", "d"}, {"u", "v", "w"});
  const auto back = deserialize_forest(serialize_forest(f));
  EXPECT_EQ(back, f);
  EXPECT_EQ(serialize_forest(back), serialize_forest(f));
}

TEST(Serialization, RejectsCorruptInput) {
  const Matrix x = random_matrix(10, 2, 1);
  const Matrix y = random_matrix(10, 1, 2);
  ForestParams p;
  p.n_estimators = 2;
  std::string text = serialize_forest(fit_forest(x, y, p, 1, 1));
  EXPECT_THROW(deserialize_forest(text.substr(0, text.size() / 2)), Error);
  EXPECT_THROW(deserialize_forest("mlcas-forest 9\n"), Error);
}

TEST(KFold, PartitionsAllRows) {
  const auto folds = kfold_split(23, 5, 99);
  ASSERT_EQ(folds.size(), 5u);
  std::vector<std::size_t> all;
  for (const auto& f : folds) {
    EXPECT_GE(f.size(), 4u);
    EXPECT_LE(f.size(), 5u);
    all.insert(all.end(), f.begin(), f.end());
  }
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
  EXPECT_EQ(kfold_split(23, 5, 99), folds);
}

TEST(KFold, TooFewSamples) {
  try {
    kfold_split(3, 5, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooFewSamplesForFolds);
  }
}

TEST(GridSearch, SingleCandidate) {
  const Matrix x = random_matrix(15, 2, 1);
  const Matrix y = random_matrix(15, 1, 2);
  ForestParams p;
  p.n_estimators = 3;
  const std::vector<ForestParams> grid{p};
  const auto r = grid_search(x, y, grid, 3, 0, 0);
  EXPECT_EQ(r.best, p);
  EXPECT_EQ(r.report.scores.size(), 1u);
}

TEST(GridSearch, FullGridReportsAll72) {
  const Matrix x = random_matrix(12, 3, 3);
  const Matrix y = random_matrix(12, 1, 4);
  const auto grid = default_search_grid();
  const auto r = grid_search(x, y, grid, 3, 1, 2);
  ASSERT_EQ(r.report.scores.size(), 72u);
  std::size_t argmin = 0;
  for (std::size_t i = 0; i < 72; ++i) {
    EXPECT_EQ(r.report.scores[i].params, grid[i]);
    if (r.report.scores[i].mse < r.report.scores[argmin].mse) argmin = i;
  }
  EXPECT_EQ(r.report.best_index, argmin);
  EXPECT_EQ(r.best, grid[argmin]);
}

TEST(GridSearch, DuplicatedCandidatesTieToTheEarlier) {
  const Matrix x = random_matrix(20, 3, 5);
  const Matrix y = random_matrix(20, 1, 6);
  ForestParams good, bad;
  good.n_estimators = bad.n_estimators = 5;
  bad.max_depth = 1;
  good.min_samples_leaf = 1;
  // The same candidate twice, with a worse one in between.
  const std::vector<ForestParams> grid{bad, good, bad, good};
  const auto r = grid_search(x, y, grid, 4, 3, 3);
  EXPECT_EQ(r.report.scores[1].mse, r.report.scores[3].mse);
  EXPECT_EQ(r.report.scores[0].mse, r.report.scores[2].mse);
  const std::size_t expected = r.report.scores[1].mse < r.report.scores[0].mse ? 1 : 0;
  EXPECT_EQ(r.report.best_index, expected);
}

TEST(GridSearch, ParallelMatchesSequential) {
  const Matrix x = random_matrix(18, 3, 7);
  const Matrix y = random_matrix(18, 2, 8);
  const auto full = default_search_grid();
  std::vector<ForestParams> grid(full.begin(), full.begin() + 6);
  for (auto& p : grid) p.n_estimators = 4;
  const auto a = grid_search(x, y, grid, 3, 9, 9, 1);
  const auto b = grid_search(x, y, grid, 3, 9, 9, 3);
  ASSERT_EQ(a.report.scores.size(), b.report.scores.size());
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_EQ(a.report.scores[i].fold_mse, b.report.scores[i].fold_mse);
}

}  // namespace
}  // namespace mlcas
