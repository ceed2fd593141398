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

#include "mlcas/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mlcas/error.hpp"
#include "mlcas/io.hpp"

namespace mlcas {

std::string_view to_string(MaxFeatures mode) {
  switch (mode) {
    case MaxFeatures::kAuto: return "auto";
    case MaxFeatures::kSqrt: return "sqrt";
    case MaxFeatures::kLog2: return "log2";
  }
  return "auto";
}

MaxFeatures parse_max_features(std::string_view text) {
  if (text == "auto") return MaxFeatures::kAuto;
  if (text == "sqrt") return MaxFeatures::kSqrt;
  if (text == "log2") return MaxFeatures::kLog2;
  throw Error(ErrorCode::kInvalidArgument, "max_features must be auto, sqrt or log2, got '" + std::string(text) + "'");
}

std::size_t candidate_feature_count(MaxFeatures mode, std::size_t d) {
  if (d == 0) return 0;
  std::size_t m = d;
  switch (mode) {
    case MaxFeatures::kAuto: m = d; break;
    case MaxFeatures::kSqrt: {
      m = 1;
      while (m * m < d) ++m;
      break;
    }
    case MaxFeatures::kLog2: {
      m = 0;
      while ((std::size_t{1} << m) < d) ++m;
      m = std::max<std::size_t>(m, 1);
      break;
    }
  }
  return std::min(m, d);
}

void ForestParams::validate() const {
  if (n_estimators < 1) throw Error(ErrorCode::kInvalidArgument, "n_estimators must be >= 1");
  if (max_depth && *max_depth < 0) throw Error(ErrorCode::kInvalidArgument, "max_depth must be >= 0");
  if (min_samples_split < 2) throw Error(ErrorCode::kInvalidArgument, "min_samples_split must be >= 2");
  if (min_samples_leaf < 1) throw Error(ErrorCode::kInvalidArgument, "min_samples_leaf must be >= 1");
}

std::string ForestParams::describe() const {
  std::ostringstream out;
  out << "n_estimators=" << n_estimators << " max_features=" << to_string(max_features)
      << " max_depth=" << (max_depth ? std::to_string(*max_depth) : std::string("none"))
      << " min_samples_split=" << min_samples_split << " min_samples_leaf=" << min_samples_leaf;
  return out.str();
}

ForestParams ForestParams::parse(std::string_view text) {
  ForestParams params;
  std::istringstream in{std::string(text)};
  std::string token;
  auto as_int = [](const std::string& key, const std::string& value) {
    try {
      std::size_t used = 0;
      int v = std::stoi(value, &used);
      if (used == value.size()) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::kMalformedModel, key + ": not an integer: '" + value + "'");
  };
  while (in >> token) {
    auto eq = token.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kMalformedModel, "bad parameter token '" + token + "'");
    std::string key = token.substr(0, eq);
    std::string value = token.substr(eq + 1);
    if (key == "n_estimators") params.n_estimators = as_int(key, value);
    else if (key == "max_features") params.max_features = parse_max_features(value);
    else if (key == "max_depth") params.max_depth = value == "none" ? std::nullopt : std::optional<int>(as_int(key, value));
    else if (key == "min_samples_split") params.min_samples_split = as_int(key, value);
    else if (key == "min_samples_leaf") params.min_samples_leaf = as_int(key, value);
    else throw Error(ErrorCode::kMalformedModel, "unknown parameter '" + key + "'");
  }
  params.validate();
  return params;
}

std::vector<ForestParams> default_search_grid() {
  std::vector<ForestParams> grid;
  for (int n_estimators : {50, 100})
    for (MaxFeatures mf : {MaxFeatures::kAuto, MaxFeatures::kSqrt, MaxFeatures::kLog2})
      for (std::optional<int> depth : {std::optional<int>(4), std::optional<int>(8), std::optional<int>(15),
                                       std::optional<int>()})
        for (int split : {2, 5, 10}) {
          ForestParams p;
          p.n_estimators = n_estimators;
          p.max_features = mf;
          p.max_depth = depth;
          p.min_samples_split = split;
          grid.push_back(p);
        }
  return grid;
}

std::size_t RegressionTree::leaf_for(std::span<const double> x) const {
  std::size_t node = 0;
  while (!nodes[node].is_leaf()) {
    const TreeNode& n = nodes[node];
    node = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return node;
}

int RegressionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> node_depth(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, node_depth[i]);
    if (!nodes[i].is_leaf()) {
      node_depth[static_cast<std::size_t>(nodes[i].left)] = node_depth[i] + 1;
      node_depth[static_cast<std::size_t>(nodes[i].right)] = node_depth[i] + 1;
    }
  }
  return deepest;
}

void RegressionTree::validate() const {
  if (nodes.empty()) throw Error(ErrorCode::kMalformedModel, "tree has no nodes");
  if (n_targets == 0 || values.size() != nodes.size() * n_targets)
    throw Error(ErrorCode::kMalformedModel, "tree value array does not match node count");
  std::vector<int> parents(nodes.size(), 0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const TreeNode& n = nodes[i];
    if (n.is_leaf()) {
      if (n.left != -1 || n.right != -1) throw Error(ErrorCode::kMalformedModel, "leaf with children");
      continue;
    }
    auto in_range = [&](int c) { return c > static_cast<int>(i) && c < static_cast<int>(nodes.size()); };
    if (!in_range(n.left) || !in_range(n.right) || n.left == n.right)
      throw Error(ErrorCode::kMalformedModel, "node " + std::to_string(i) + " has invalid children");
    ++parents[static_cast<std::size_t>(n.left)];
    ++parents[static_cast<std::size_t>(n.right)];
    if (nodes[static_cast<std::size_t>(n.left)].n_train + nodes[static_cast<std::size_t>(n.right)].n_train != n.n_train)
      throw Error(ErrorCode::kMalformedModel, "node " + std::to_string(i) + ": child counts do not sum to parent");
  }
  if (parents[0] != 0) throw Error(ErrorCode::kMalformedModel, "root has a parent");
  for (std::size_t i = 1; i < nodes.size(); ++i)
    if (parents[i] != 1) throw Error(ErrorCode::kMalformedModel, "node " + std::to_string(i) + " is not a tree node");
}

namespace {

// Presorted CART builder. Each node owns the same [begin, end) range in
// every feature's sorted order array; a split stable-partitions all of them,
// so no node ever re-sorts.
class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const Matrix& y, std::span<const std::size_t> rows, const ForestParams& params,
              Rng& rng)
      : params_(params),
        rng_(rng),
        m_(rows.size()),
        d_(x.cols()),
        t_(y.cols()),
        xs_(d_ * m_),
        ys_(m_ * t_),
        order_(d_ * m_),
        goes_left_(m_, 0),
        scratch_(m_),
        features_(d_),
        total_(t_),
        left_(t_) {
    for (std::size_t s = 0; s < m_; ++s) {
      const std::size_t r = rows[s];
      for (std::size_t f = 0; f < d_; ++f) xs_[f * m_ + s] = x(r, f);
      for (std::size_t k = 0; k < t_; ++k) ys_[s * t_ + k] = y(r, k);
    }
    for (std::size_t f = 0; f < d_; ++f) {
      std::uint32_t* ord = order_.data() + f * m_;
      const double* col = xs_.data() + f * m_;
      for (std::size_t s = 0; s < m_; ++s) ord[s] = static_cast<std::uint32_t>(s);
      std::sort(ord, ord + m_, [col](std::uint32_t a, std::uint32_t b) {
        return col[a] < col[b] || (col[a] == col[b] && a < b);
      });
    }
    n_candidates_ = candidate_feature_count(params.max_features, d_);
  }

  RegressionTree build() {
    tree_.n_targets = t_;
    grow(0, m_, 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    std::size_t feature = 0;
    double threshold = 0.0;
    std::size_t n_left = 0;
    double proxy = -std::numeric_limits<double>::infinity();
    bool found = false;
  };

  int grow(std::size_t begin, std::size_t end, int depth) {
    const int index = static_cast<int>(tree_.nodes.size());
    const std::size_t n = end - begin;
    tree_.nodes.push_back({});
    tree_.nodes.back().n_train = n;
    tree_.values.resize(tree_.nodes.size() * t_);

    // Any feature's order array lists the node's samples.
    const std::uint32_t* members = order_.data() + begin;
    const double* first = ys_.data() + static_cast<std::size_t>(members[0]) * t_;
    bool pure = true;
    std::fill(total_.begin(), total_.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* yrow = ys_.data() + static_cast<std::size_t>(members[i]) * t_;
      for (std::size_t k = 0; k < t_; ++k) {
        total_[k] += yrow[k];
        if (yrow[k] != first[k]) pure = false;
      }
    }
    double* value = tree_.values.data() + static_cast<std::size_t>(index) * t_;
    for (std::size_t k = 0; k < t_; ++k) value[k] = pure ? first[k] : total_[k] / static_cast<double>(n);

    const bool depth_reached = params_.max_depth && depth >= *params_.max_depth;
    if (pure || depth_reached || n < static_cast<std::size_t>(params_.min_samples_split) || d_ == 0) return index;

    Split best = find_split(begin, end);
    if (!best.found) return index;

    const std::uint32_t* chosen = order_.data() + best.feature * m_;
    for (std::size_t i = begin; i < end; ++i) goes_left_[chosen[i]] = i < begin + best.n_left ? 1 : 0;
    for (std::size_t f = 0; f < d_; ++f) {
      std::uint32_t* ord = order_.data() + f * m_;
      std::size_t l = begin;
      std::size_t r = 0;
      for (std::size_t i = begin; i < end; ++i) {
        if (goes_left_[ord[i]]) ord[l++] = ord[i];
        else scratch_[r++] = ord[i];
      }
      std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(r), ord + l);
    }

    const int left = grow(begin, begin + best.n_left, depth + 1);
    const int right = grow(begin + best.n_left, end, depth + 1);
    TreeNode& node = tree_.nodes[static_cast<std::size_t>(index)];
    node.feature = static_cast<int>(best.feature);
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    return index;
  }

  Split find_split(std::size_t begin, std::size_t end) {
    // total_ holds the node's per-target sums on entry.
    const std::size_t n = end - begin;
    const std::size_t min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);
    for (std::size_t f = 0; f < d_; ++f) features_[f] = f;
    if (n_candidates_ < d_) {
      for (std::size_t k = 0; k < n_candidates_; ++k) {
        std::size_t j = k + rng_.uniform_index(d_ - k);
        std::swap(features_[k], features_[j]);
      }
    }
    Split best;
    for (std::size_t c = 0; c < n_candidates_; ++c) {
      const std::size_t f = features_[c];
      const std::uint32_t* ord = order_.data() + f * m_;
      const double* col = xs_.data() + f * m_;
      if (col[ord[begin]] == col[ord[end - 1]]) continue;
      std::fill(left_.begin(), left_.end(), 0.0);
      for (std::size_t i = begin; i + 1 < end; ++i) {
        const double* yrow = ys_.data() + static_cast<std::size_t>(ord[i]) * t_;
        for (std::size_t k = 0; k < t_; ++k) left_[k] += yrow[k];
        const double xv = col[ord[i]];
        const double xn = col[ord[i + 1]];
        if (xv == xn) continue;
        const std::size_t n_left = i + 1 - begin;
        const std::size_t n_right = n - n_left;
        if (n_left < min_leaf || n_right < min_leaf) continue;
        // Maximizing this proxy minimizes the summed child SSE over targets.
        double proxy = 0.0;
        for (std::size_t k = 0; k < t_; ++k) {
          const double r = total_[k] - left_[k];
          proxy += left_[k] * left_[k] / static_cast<double>(n_left) + r * r / static_cast<double>(n_right);
        }
        if (proxy > best.proxy) {
          double mid = xv / 2.0 + xn / 2.0;
          if (!(mid < xn)) mid = xv;
          best = {f, mid, n_left, proxy, true};
        }
      }
    }
    return best;
  }

  const ForestParams& params_;
  Rng& rng_;
  std::size_t m_, d_, t_;
  std::size_t n_candidates_ = 0;
  std::vector<double> xs_;            // feature-major sample values
  std::vector<double> ys_;            // sample-major targets
  std::vector<std::uint32_t> order_;  // per feature, samples sorted by value
  std::vector<std::uint8_t> goes_left_;
  std::vector<std::uint32_t> scratch_;
  std::vector<std::size_t> features_;
  std::vector<double> total_;
  std::vector<double> left_;
  RegressionTree tree_;
};

void check_training_shapes(const Matrix& x, const Matrix& y) {
  if (x.rows() == 0 || y.rows() == 0) throw Error(ErrorCode::kEmptyTrainingSet, "no training rows");
  if (x.rows() != y.rows())
    throw Error(ErrorCode::kDimensionMismatch, "feature and target row counts differ");
  if (y.cols() == 0) throw Error(ErrorCode::kDimensionMismatch, "no targets");
}

}  // namespace

RegressionTree fit_tree_on(const Matrix& x, const Matrix& y, std::span<const std::size_t> rows,
                           const ForestParams& params, Rng& rng) {
  check_training_shapes(x, y);
  if (rows.empty()) throw Error(ErrorCode::kEmptyTrainingSet, "no training rows");
  params.validate();
  for (std::size_t r : rows)
    if (r >= x.rows()) throw Error(ErrorCode::kInvalidArgument, "training row out of range");
  return TreeBuilder(x, y, rows, params, rng).build();
}

RegressionTree fit_tree(const Matrix& x, const Matrix& y, const ForestParams& params, std::uint64_t rng_seed) {
  check_training_shapes(x, y);
  std::vector<std::size_t> rows(x.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  Rng rng(rng_seed);
  return fit_tree_on(x, y, rows, params, rng);
}

std::vector<std::size_t> bootstrap_rows(std::size_t n, Rng& rng) {
  std::vector<std::size_t> rows(n);
  for (auto& r : rows) r = rng.uniform_index(n);
  return rows;
}

RegressionForest fit_forest(const Matrix& x, const Matrix& y, const ForestParams& params, std::uint64_t base_seed,
                            std::uint64_t task, std::vector<std::string> feature_names,
                            std::vector<std::string> target_names, int jobs) {
  check_training_shapes(x, y);
  params.validate();
  if (feature_names.empty())
    for (std::size_t f = 0; f < x.cols(); ++f) feature_names.push_back("f" + std::to_string(f));
  if (target_names.empty())
    for (std::size_t k = 0; k < y.cols(); ++k) target_names.push_back("t" + std::to_string(k));
  if (feature_names.size() != x.cols() || target_names.size() != y.cols())
    throw Error(ErrorCode::kDimensionMismatch, "name lists do not match matrix shapes");

  RegressionForest forest;
  forest.params = params;
  forest.feature_names = std::move(feature_names);
  forest.target_names = std::move(target_names);
  forest.base_seed = base_seed;
  forest.task = task;
  forest.trees.resize(static_cast<std::size_t>(params.n_estimators));
  parallel_for(forest.trees.size(), jobs, [&](std::size_t i) {
    Rng rng(derive_seed(base_seed, task, i));
    auto rows = bootstrap_rows(x.rows(), rng);
    forest.trees[i] = fit_tree_on(x, y, rows, params, rng);
  });
  return forest;
}

std::vector<double> predict(const RegressionForest& forest, std::span<const double> x) {
  if (x.size() != forest.n_features())
    throw Error(ErrorCode::kDimensionMismatch, "expected " + std::to_string(forest.n_features()) +
                                                   " features, got " + std::to_string(x.size()));
  std::vector<double> out(forest.n_targets(), 0.0);
  for (const auto& tree : forest.trees) {
    auto leaf = tree.predict(x);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += leaf[k];
  }
  for (double& v : out) v /= static_cast<double>(forest.trees.size());
  return out;
}

std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorCode::kInvalidArgument, "need at least 2 folds");
  if (n < folds)
    throw Error(ErrorCode::kTooFewSamplesForFolds, std::to_string(n) + " rows cannot fill " + std::to_string(folds) +
                                                       " folds");
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  rng.shuffle(perm);
  std::vector<std::vector<std::size_t>> out(folds);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t size = n / folds + (f < n % folds ? 1 : 0);
    out[f].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos), perm.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return out;
}

GridSearchResult grid_search(const Matrix& x, const Matrix& y, std::span<const ForestParams> grid, std::size_t folds,
                             std::uint64_t base_seed, std::uint64_t task, int jobs) {
  if (grid.empty()) throw Error(ErrorCode::kInvalidArgument, "empty hyperparameter grid");
  check_training_shapes(x, y);
  for (const auto& p : grid) p.validate();

  GridSearchResult result;
  result.report.folds = kfold_split(x.rows(), folds, derive_seed(base_seed, task, 0x6b666f6c64ULL));
  const auto& split = result.report.folds;

  // Per-fold train/test matrices are shared by every candidate.
  std::vector<Matrix> train_x(folds), train_y(folds), test_x(folds), test_y(folds);
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train;
    for (std::size_t g = 0; g < folds; ++g)
      if (g != f) train.insert(train.end(), split[g].begin(), split[g].end());
    std::sort(train.begin(), train.end());
    std::vector<std::size_t> test = split[f];
    std::sort(test.begin(), test.end());
    train_x[f] = x.select_rows(train);
    train_y[f] = y.select_rows(train);
    test_x[f] = x.select_rows(test);
    test_y[f] = y.select_rows(test);
  }

  // Candidate streams are keyed by the hyperparameters, not the grid
  // position, so identical candidates score identically.
  std::vector<std::uint64_t> candidate_task(grid.size());
  for (std::size_t c = 0; c < grid.size(); ++c) candidate_task[c] = task_id(grid[c].describe());

  std::vector<std::vector<double>> fold_mse(grid.size(), std::vector<double>(folds, 0.0));
  parallel_for(grid.size() * folds, jobs, [&](std::size_t job) {
    const std::size_t c = job / folds;
    const std::size_t f = job % folds;
    RegressionForest forest =
        fit_forest(train_x[f], train_y[f], grid[c], base_seed, derive_seed(task, candidate_task[c], f + 1));
    double sse = 0.0;
    for (std::size_t r = 0; r < test_x[f].rows(); ++r) {
      auto pred = predict(forest, test_x[f].row(r));
      for (std::size_t k = 0; k < pred.size(); ++k) {
        const double diff = pred[k] - test_y[f](r, k);
        sse += diff * diff;
      }
    }
    fold_mse[c][f] = sse / static_cast<double>(test_x[f].rows() * y.cols());
  });

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < grid.size(); ++c) {
    CvScore score;
    score.params = grid[c];
    score.fold_mse = fold_mse[c];
    for (double v : score.fold_mse) score.mse += v;
    score.mse /= static_cast<double>(folds);
    if (score.mse < best) {
      best = score.mse;
      result.report.best_index = c;
    }
    result.report.scores.push_back(std::move(score));
  }
  result.best = grid[result.report.best_index];
  return result;
}

namespace {

constexpr std::string_view kForestMagic = "mlcas-forest 1";

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  std::string next() {
    if (pos_ >= text_.size()) throw Error(ErrorCode::kMalformedModel, "unexpected end of forest file");
    auto eol = text_.find('\n', pos_);
    std::string line(text_.substr(pos_, eol == std::string_view::npos ? std::string_view::npos : eol - pos_));
    pos_ = eol == std::string_view::npos ? text_.size() : eol + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  // "key rest" -> rest; throws unless the line starts with key.
  std::string expect(std::string_view key) {
    std::string line = next();
    if (line.rfind(std::string(key) + " ", 0) != 0 && line != key)
      throw Error(ErrorCode::kMalformedModel, "expected '" + std::string(key) + "', got '" + line + "'");
    return line.size() > key.size() ? line.substr(key.size() + 1) : std::string();
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

std::uint64_t parse_u64(const std::string& text) {
  try {
    std::size_t used = 0;
    unsigned long long v = std::stoull(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kMalformedModel, "not an unsigned integer: '" + text + "'");
}

double parse_real(const std::string& text) {
  auto v = io::parse_double(text);
  if (!v) throw Error(ErrorCode::kMalformedModel, "not a number: '" + text + "'");
  return *v;
}

}  // namespace

std::string serialize_forest(const RegressionForest& forest) {
  std::string out;
  out += std::string(kForestMagic) + "\n";
  out += "base_seed " + std::to_string(forest.base_seed) + "\n";
  out += "task " + std::to_string(forest.task) + "\n";
  out += "params " + forest.params.describe() + "\n";
  out += "features " + std::to_string(forest.feature_names.size()) + "\n";
  for (const auto& name : forest.feature_names) out += name + "\n";
  out += "targets " + std::to_string(forest.target_names.size()) + "\n";
  for (const auto& name : forest.target_names) out += name + "\n";
  out += "trees " + std::to_string(forest.trees.size()) + "\n";
  for (const auto& tree : forest.trees) {
    out += "tree " + std::to_string(tree.nodes.size()) + "\n";
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const TreeNode& n = tree.nodes[i];
      out += std::to_string(n.feature) + " " + io::format_double(n.threshold) + " " + std::to_string(n.left) + " " +
             std::to_string(n.right) + " " + std::to_string(n.n_train);
      for (double v : tree.value(i)) out += " " + io::format_double(v);
      out += "\n";
    }
  }
  out += "end\n";
  return out;
}

RegressionForest deserialize_forest(std::string_view text) {
  LineReader reader(text);
  if (reader.next() != kForestMagic) throw Error(ErrorCode::kMalformedModel, "not a forest file (bad header)");
  RegressionForest forest;
  forest.base_seed = parse_u64(reader.expect("base_seed"));
  forest.task = parse_u64(reader.expect("task"));
  forest.params = ForestParams::parse(reader.expect("params"));
  const std::uint64_t n_features = parse_u64(reader.expect("features"));
  for (std::uint64_t i = 0; i < n_features; ++i) forest.feature_names.push_back(reader.next());
  const std::uint64_t n_targets = parse_u64(reader.expect("targets"));
  if (n_targets == 0) throw Error(ErrorCode::kMalformedModel, "forest has no targets");
  for (std::uint64_t i = 0; i < n_targets; ++i) forest.target_names.push_back(reader.next());
  const std::uint64_t n_trees = parse_u64(reader.expect("trees"));
  for (std::uint64_t t = 0; t < n_trees; ++t) {
    RegressionTree tree;
    tree.n_targets = n_targets;
    const std::uint64_t n_nodes = parse_u64(reader.expect("tree"));
    for (std::uint64_t i = 0; i < n_nodes; ++i) {
      std::istringstream line(reader.next());
      std::string feature, threshold, left, right, n_train;
      if (!(line >> feature >> threshold >> left >> right >> n_train))
        throw Error(ErrorCode::kMalformedModel, "truncated node line");
      TreeNode node;
      node.feature = static_cast<int>(std::stol(feature));
      node.threshold = parse_real(threshold);
      node.left = static_cast<int>(std::stol(left));
      node.right = static_cast<int>(std::stol(right));
      node.n_train = parse_u64(n_train);
      if (!node.is_leaf() && static_cast<std::uint64_t>(node.feature) >= n_features)
        throw Error(ErrorCode::kMalformedModel, "split feature out of range");
      tree.nodes.push_back(node);
      std::string v;
      for (std::uint64_t k = 0; k < n_targets; ++k) {
        if (!(line >> v)) throw Error(ErrorCode::kMalformedModel, "missing node value");
        tree.values.push_back(parse_real(v));
      }
      if (line >> v) throw Error(ErrorCode::kMalformedModel, "trailing data on node line");
    }
    tree.validate();
    forest.trees.push_back(std::move(tree));
  }
  if (reader.next() != "end") throw Error(ErrorCode::kMalformedModel, "missing end marker");
  return forest;
}

}  // namespace mlcas
