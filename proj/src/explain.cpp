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

#include "mlcas/explain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <iterator>
#include <set>

#include "json.hpp"
#include "mlcas/error.hpp"
#include "mlcas/io.hpp"

namespace mlcas {

namespace {

struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double weight = 0.0;
};

using Path = std::vector<PathElement>;

// Appends a split to the unique path, updating the permutation weights of
// every subset size. `path` holds `depth` elements on entry.
void extend_path(Path& path, std::size_t depth, double zero_fraction, double one_fraction, int feature) {
  path.resize(depth + 1);
  path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  const double denom = static_cast<double>(depth + 1);
  for (std::size_t i = depth; i-- > 0;) {
    path[i + 1].weight += one_fraction * path[i].weight * static_cast<double>(i + 1) / denom;
    path[i].weight = zero_fraction * path[i].weight * static_cast<double>(depth - i) / denom;
  }
}

// Inverse of extend_path for element `index`; `depth` is the index of the
// last element. Leaves `depth` elements.
void unwind_path(Path& path, std::size_t depth, std::size_t index) {
  const double one_fraction = path[index].one_fraction;
  const double zero_fraction = path[index].zero_fraction;
  const double denom = static_cast<double>(depth + 1);
  double next_one_portion = path[depth].weight;
  for (std::size_t i = depth; i-- > 0;) {
    if (one_fraction != 0.0) {
      const double tmp = path[i].weight;
      path[i].weight = next_one_portion * denom / (static_cast<double>(i + 1) * one_fraction);
      next_one_portion = tmp - path[i].weight * zero_fraction * static_cast<double>(depth - i) / denom;
    } else {
      path[i].weight = path[i].weight * denom / (zero_fraction * static_cast<double>(depth - i));
    }
  }
  for (std::size_t i = index; i < depth; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
  path.resize(depth);
}

// Total permutation weight of the path with element `index` removed,
// without modifying the path.
double unwound_path_sum(const Path& path, std::size_t depth, std::size_t index) {
  const double one_fraction = path[index].one_fraction;
  const double zero_fraction = path[index].zero_fraction;
  const double denom = static_cast<double>(depth + 1);
  double next_one_portion = path[depth].weight;
  double total = 0.0;
  for (std::size_t i = depth; i-- > 0;) {
    if (one_fraction != 0.0) {
      const double tmp = next_one_portion * denom / (static_cast<double>(i + 1) * one_fraction);
      total += tmp;
      next_one_portion = path[i].weight - tmp * zero_fraction * (static_cast<double>(depth - i) / denom);
    } else {
      total += (path[i].weight / zero_fraction) / (static_cast<double>(depth - i) / denom);
    }
  }
  return total;
}

struct ShapWalk {
  const RegressionTree& tree;
  std::span<const double> x;
  std::size_t target;
  std::vector<double>& phi;

  void recurse(std::size_t node, const Path& parent, std::size_t depth, double zero_fraction, double one_fraction,
               int feature) {
    Path path(parent.begin(), parent.begin() + static_cast<std::ptrdiff_t>(depth));
    extend_path(path, depth, zero_fraction, one_fraction, feature);
    const TreeNode& n = tree.nodes[node];
    if (n.is_leaf()) {
      const double leaf = tree.value(node)[target];
      for (std::size_t i = 1; i <= depth; ++i) {
        const double w = unwound_path_sum(path, depth, i);
        const PathElement& el = path[i];
        phi[static_cast<std::size_t>(el.feature)] += w * (el.one_fraction - el.zero_fraction) * leaf;
      }
      return;
    }
    const auto split = static_cast<std::size_t>(n.feature);
    const std::size_t hot = static_cast<std::size_t>(x[split] <= n.threshold ? n.left : n.right);
    const std::size_t cold = static_cast<std::size_t>(x[split] <= n.threshold ? n.right : n.left);
    const double cover = static_cast<double>(n.n_train);
    const double hot_zero = static_cast<double>(tree.nodes[hot].n_train) / cover;
    const double cold_zero = static_cast<double>(tree.nodes[cold].n_train) / cover;

    double incoming_zero = 1.0;
    double incoming_one = 1.0;
    std::size_t index = 1;
    for (; index <= depth; ++index)
      if (path[index].feature == n.feature) break;
    if (index <= depth) {
      incoming_zero = path[index].zero_fraction;
      incoming_one = path[index].one_fraction;
      unwind_path(path, depth, index);
      depth -= 1;
    }
    recurse(hot, path, depth + 1, hot_zero * incoming_zero, incoming_one, n.feature);
    recurse(cold, path, depth + 1, cold_zero * incoming_zero, 0.0, n.feature);
  }
};

void check_node_statistics(const RegressionTree& tree, std::size_t n_features) {
  if (tree.nodes.empty()) throw Error(ErrorCode::kMissingNodeStatistics, "empty tree");
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const TreeNode& n = tree.nodes[i];
    if (n.n_train == 0)
      throw Error(ErrorCode::kMissingNodeStatistics, "node " + std::to_string(i) + " has no training count");
    if (n.is_leaf()) continue;
    if (static_cast<std::size_t>(n.feature) >= n_features)
      throw Error(ErrorCode::kDimensionMismatch, "split on feature " + std::to_string(n.feature) + " out of range");
    const auto& l = tree.nodes[static_cast<std::size_t>(n.left)];
    const auto& r = tree.nodes[static_cast<std::size_t>(n.right)];
    if (l.n_train + r.n_train != n.n_train)
      throw Error(ErrorCode::kMissingNodeStatistics, "node " + std::to_string(i) + ": child counts do not sum up");
  }
}

double expectation_at(const RegressionTree& tree, std::size_t node, std::span<const double> x, std::size_t target,
                      std::uint32_t coalition) {
  const TreeNode& n = tree.nodes[node];
  if (n.is_leaf()) return tree.value(node)[target];
  const auto left = static_cast<std::size_t>(n.left);
  const auto right = static_cast<std::size_t>(n.right);
  if (coalition & (std::uint32_t{1} << n.feature))
    return expectation_at(tree, x[static_cast<std::size_t>(n.feature)] <= n.threshold ? left : right, x, target,
                          coalition);
  const double wl = static_cast<double>(tree.nodes[left].n_train);
  const double wr = static_cast<double>(tree.nodes[right].n_train);
  return (wl * expectation_at(tree, left, x, target, coalition) + wr * expectation_at(tree, right, x, target, coalition)) /
         static_cast<double>(n.n_train);
}

}  // namespace

double path_expectation(const RegressionTree& tree, std::span<const double> x, std::size_t target,
                        std::uint32_t coalition) {
  return expectation_at(tree, 0, x, target, coalition);
}

ShapValues tree_shap(const RegressionTree& tree, std::span<const double> x, std::size_t target) {
  check_node_statistics(tree, x.size());
  if (target >= tree.n_targets) throw Error(ErrorCode::kDimensionMismatch, "target index out of range");
  ShapValues out;
  out.phi.assign(x.size(), 0.0);
  out.base_value = path_expectation(tree, x, target, 0);
  ShapWalk walk{tree, x, target, out.phi};
  walk.recurse(0, Path{}, 0, 1.0, 1.0, -1);
  return out;
}

ShapValues tree_shap(const RegressionForest& forest, std::span<const double> x, std::size_t target) {
  if (x.size() != forest.n_features())
    throw Error(ErrorCode::kDimensionMismatch, "expected " + std::to_string(forest.n_features()) + " features");
  if (target >= forest.n_targets()) throw Error(ErrorCode::kDimensionMismatch, "target index out of range");
  if (forest.trees.empty()) throw Error(ErrorCode::kMissingNodeStatistics, "forest has no trees");
  ShapValues out;
  out.phi.assign(x.size(), 0.0);
  for (const auto& tree : forest.trees) {
    ShapValues one = tree_shap(tree, x, target);
    for (std::size_t f = 0; f < x.size(); ++f) out.phi[f] += one.phi[f];
    out.base_value += one.base_value;
  }
  const double trees = static_cast<double>(forest.trees.size());
  for (double& v : out.phi) v /= trees;
  out.base_value /= trees;
  return out;
}

std::vector<double> brute_force_shap(const RegressionForest& forest, std::span<const double> x, std::size_t target) {
  const std::size_t d = forest.n_features();
  if (d > kBruteForceFeatureLimit)
    throw Error(ErrorCode::kTooManyFeatures, std::to_string(d) + " features exceed the brute-force limit of " +
                                                 std::to_string(kBruteForceFeatureLimit));
  if (x.size() != d) throw Error(ErrorCode::kDimensionMismatch, "expected " + std::to_string(d) + " features");
  if (target >= forest.n_targets()) throw Error(ErrorCode::kDimensionMismatch, "target index out of range");
  for (const auto& tree : forest.trees) check_node_statistics(tree, d);

  const std::uint32_t n_coalitions = std::uint32_t{1} << d;
  std::vector<double> value(n_coalitions, 0.0);
  for (std::uint32_t s = 0; s < n_coalitions; ++s) {
    double total = 0.0;
    for (const auto& tree : forest.trees) total += path_expectation(tree, x, target, s);
    value[s] = total / static_cast<double>(forest.trees.size());
  }
  // weight[k] = k! (d - k - 1)! / d!
  std::vector<double> weight(d, 0.0);
  for (std::size_t k = 0; k < d; ++k) {
    double w = 1.0 / static_cast<double>(d);
    // 1 / (d * C(d-1, k))
    double binom = 1.0;
    for (std::size_t j = 1; j <= k; ++j) binom = binom * static_cast<double>(d - 1 - k + j) / static_cast<double>(j);
    weight[k] = w / binom;
  }
  std::vector<double> phi(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    const std::uint32_t bit = std::uint32_t{1} << i;
    for (std::uint32_t s = 0; s < n_coalitions; ++s) {
      if (s & bit) continue;
      phi[i] += weight[static_cast<std::size_t>(std::popcount(s))] * (value[s | bit] - value[s]);
    }
  }
  return phi;
}

std::vector<ShapExplanation> selector_shap(const std::map<std::string, Assignment>& selections,
                                           const ModelStore& models, const MetaFeatureMatrix& features) {
  std::vector<ShapExplanation> out;
  for (const auto& [metric, assignment] : selections) {
    for (const auto& [dataset, algorithm] : assignment) {
      ModelStore::Ref ref = models.find(algorithm, metric, dataset);
      if (ref.forest->feature_names != features.cols)
        throw Error(ErrorCode::kDimensionMismatch, "model features differ from the feature matrix columns");
      auto row = features.data.row(features.row_index(dataset));
      ShapValues shap = tree_shap(*ref.forest, row, ref.target);
      ShapExplanation e;
      e.dataset_id = dataset;
      e.metric = metric;
      e.algorithm = algorithm;
      e.features = features.cols;
      e.phi = std::move(shap.phi);
      e.feature_values.assign(row.begin(), row.end());
      e.base_value = shap.base_value;
      e.prediction = predict(*ref.forest, row)[ref.target];
      out.push_back(std::move(e));
    }
  }
  return out;
}

namespace {

struct Scored {
  std::string feature;
  double score;
};

std::vector<Scored> rank_by_mean_abs(std::span<const ShapExplanation* const> group) {
  const auto& names = group.front()->features;
  std::vector<Scored> out;
  for (std::size_t f = 0; f < names.size(); ++f) {
    double total = 0.0;
    for (const auto* e : group) total += std::abs(e->phi[f]);
    out.push_back({names[f], total / static_cast<double>(group.size())});
  }
  std::sort(out.begin(), out.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.feature < b.feature;
  });
  return out;
}

void check_same_features(std::span<const ShapExplanation> explanations) {
  for (const auto& e : explanations)
    if (e.features != explanations.front().features || e.phi.size() != e.features.size())
      throw Error(ErrorCode::kDimensionMismatch, "explanations use different feature sets");
}

}  // namespace

std::vector<FeatureImportance> summary_ranking(std::span<const ShapExplanation> explanations) {
  if (explanations.empty()) throw Error(ErrorCode::kInvalidArgument, "no explanations to rank");
  check_same_features(explanations);
  std::vector<const ShapExplanation*> all;
  for (const auto& e : explanations) all.push_back(&e);
  const auto ranked = rank_by_mean_abs(all);
  const auto& names = explanations.front().features;
  std::vector<FeatureImportance> out;
  for (const auto& r : ranked) {
    const std::size_t f = static_cast<std::size_t>(std::find(names.begin(), names.end(), r.feature) - names.begin());
    FeatureImportance fi;
    fi.feature = r.feature;
    fi.mean_abs_phi = r.score;
    for (const auto& e : explanations) fi.points.push_back({e.dataset_id, e.phi[f], e.feature_values[f]});
    out.push_back(std::move(fi));
  }
  return out;
}

DomainAnalysis domain_topk(std::span<const ShapExplanation> explanations,
                           const std::map<std::string, std::string>& domain_of, std::size_t k) {
  DomainAnalysis out;
  if (explanations.empty()) return out;
  check_same_features(explanations);
  std::map<std::string, std::vector<const ShapExplanation*>> groups;
  for (const auto& e : explanations) {
    auto it = domain_of.find(e.dataset_id);
    if (it == domain_of.end() || it->second.empty())
      throw Error(ErrorCode::kInvalidArgument, "dataset '" + e.dataset_id + "' has no domain tag");
    groups[it->second].push_back(&e);
  }
  std::vector<std::set<std::string>> top_sets;
  for (const auto& [domain, members] : groups) {
    DomainTopK g;
    g.domain = domain;
    g.k = k;
    const auto ranked = rank_by_mean_abs(members);
    for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
      g.features.push_back(ranked[i].feature);
      g.scores.push_back(ranked[i].score);
    }
    top_sets.emplace_back(g.features.begin(), g.features.end());
    out.groups.push_back(std::move(g));
  }
  const std::size_t n = out.groups.size();
  auto intersect = [&](std::initializer_list<std::size_t> members) {
    DomainIntersection di;
    std::set<std::string> common = top_sets[*members.begin()];
    for (std::size_t m : members) {
      di.domains.push_back(out.groups[m].domain);
      std::set<std::string> next;
      std::set_intersection(common.begin(), common.end(), top_sets[m].begin(), top_sets[m].end(),
                            std::inserter(next, next.begin()));
      common = std::move(next);
    }
    di.features.assign(common.begin(), common.end());
    out.intersections.push_back(std::move(di));
  };
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) intersect({a, b});
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      for (std::size_t c = b + 1; c < n; ++c) intersect({a, b, c});
  return out;
}

std::string format_explanations(std::span<const ShapExplanation> explanations, std::string_view comment) {
  std::string out;
  if (!comment.empty()) out += "# " + std::string(comment) + "\n";
  out += "dataset,metric,algorithm,feature,phi,feature_value,base_value\n";
  for (const auto& e : explanations)
    for (std::size_t f = 0; f < e.features.size(); ++f)
      out += io::csv_row({e.dataset_id, e.metric, e.algorithm, e.features[f], io::format_double(e.phi[f]),
                          io::format_double(e.feature_values[f]), io::format_double(e.base_value)});
  return out;
}

std::string format_domain_analysis(const std::map<std::string, DomainAnalysis>& by_metric,
                                   std::string_view config_hash) {
  nlohmann::ordered_json root;
  root["config_hash"] = std::string(config_hash);
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  for (const auto& [metric, analysis] : by_metric) {
    nlohmann::ordered_json jm;
    nlohmann::ordered_json domains = nlohmann::ordered_json::object();
    nlohmann::ordered_json scores = nlohmann::ordered_json::object();
    for (const auto& g : analysis.groups) {
      domains[g.domain] = g.features;
      scores[g.domain] = g.scores;
    }
    nlohmann::ordered_json inter = nlohmann::ordered_json::object();
    for (const auto& i : analysis.intersections) {
      std::string key;
      for (std::size_t d = 0; d < i.domains.size(); ++d) key += (d ? "&" : "") + i.domains[d];
      inter[key] = i.features;
    }
    jm["k"] = analysis.groups.empty() ? 0 : analysis.groups.front().k;
    jm["domains"] = std::move(domains);
    jm["scores"] = std::move(scores);
    jm["intersections"] = std::move(inter);
    metrics[metric] = std::move(jm);
  }
  root["metrics"] = std::move(metrics);
  return root.dump(2) + "\n";
}

namespace {

std::string fixed(double v, int digits = 2) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string render_summary_svg(std::span<const FeatureImportance> ranking, std::string_view title,
                               std::string_view config_hash) {
  const double left = 230.0, right = 30.0, top = 50.0, row_height = 26.0, plot_width = 520.0;
  const double width = left + plot_width + right;
  const double height = top + row_height * static_cast<double>(ranking.size()) + 50.0;
  double extent = 0.0;
  for (const auto& f : ranking)
    for (const auto& p : f.points) extent = std::max(extent, std::abs(p.phi));
  if (extent == 0.0) extent = 1.0;
  const double zero_x = left + plot_width / 2.0;
  auto to_x = [&](double phi) { return zero_x + phi / extent * (plot_width / 2.0); };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(width, 0) + "\" height=\"" + fixed(height, 0) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<!-- config_hash=" + xml_escape(config_hash) + " -->\n";
  svg += "<text x=\"" + fixed(width / 2.0, 1) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" +
         xml_escape(title) + "</text>\n";
  svg += "<line x1=\"" + fixed(zero_x) + "\" y1=\"" + fixed(top - 10) + "\" x2=\"" + fixed(zero_x) + "\" y2=\"" +
         fixed(height - 40) + "\" stroke=\"#888\"/>\n";
  for (std::size_t r = 0; r < ranking.size(); ++r) {
    const auto& f = ranking[r];
    const double y = top + row_height * static_cast<double>(r) + row_height / 2.0;
    svg += "<text x=\"" + fixed(left - 8) + "\" y=\"" + fixed(y + 4) + "\" text-anchor=\"end\">" +
           xml_escape(f.feature) + "</text>\n";
    double lo = 0.0, hi = 0.0;
    if (!f.points.empty()) {
      lo = hi = f.points.front().value;
      for (const auto& p : f.points) {
        lo = std::min(lo, p.value);
        hi = std::max(hi, p.value);
      }
    }
    for (std::size_t i = 0; i < f.points.size(); ++i) {
      const auto& p = f.points[i];
      const double t = hi > lo ? (p.value - lo) / (hi - lo) : 0.5;
      const int red = static_cast<int>(std::lround(255.0 * t));
      const int blue = 255 - red;
      const double jitter = (static_cast<double>(i % 5) - 2.0) * 3.0;
      char colour[16];
      std::snprintf(colour, sizeof(colour), "#%02x30%02x", red, blue);
      svg += "<circle cx=\"" + fixed(to_x(p.phi)) + "\" cy=\"" + fixed(y + jitter) + "\" r=\"3\" fill=\"" + colour +
             "\"><title>" + xml_escape(p.dataset_id) + "</title></circle>\n";
    }
  }
  svg += "<text x=\"" + fixed(zero_x) + "\" y=\"" + fixed(height - 20) +
         "\" text-anchor=\"middle\">SHAP value (impact on predicted performance)</text>\n";
  svg += "<text x=\"" + fixed(left) + "\" y=\"" + fixed(height - 20) + "\">-" + fixed(extent, 3) + "</text>\n";
  svg += "<text x=\"" + fixed(left + plot_width) + "\" y=\"" + fixed(height - 20) + "\" text-anchor=\"end\">+" +
         fixed(extent, 3) + "</text>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace mlcas
