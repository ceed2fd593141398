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

#include <map>
#include <span>
#include <string>
#include <vector>

#include "mlcas/forest.hpp"
#include "mlcas/metafeatures.hpp"
#include "mlcas/selection.hpp"

namespace mlcas {

// Attributions of one scalar forest output.
//
// The game is the path-dependent expectation v(S): walk each tree from the
// root; at a split on a feature in S follow x, otherwise descend both
// children weighted by their share of the node's training rows. phi are the
// Shapley values of v, base_value = v(empty set), and by construction
// base_value + sum(phi) equals the prediction.
struct ShapValues {
  std::vector<double> phi;
  double base_value = 0.0;
};

// Exact polynomial-time attribution for one tree: the TreeSHAP recursion
// over unique feature paths, with cover = n_train.
ShapValues tree_shap(const RegressionTree& tree, std::span<const double> x, std::size_t target);

// Mean of per-tree attributions. Throws Error(kMissingNodeStatistics) when a
// node has no training count or child counts do not add up.
ShapValues tree_shap(const RegressionForest& forest, std::span<const double> x, std::size_t target);

// v(S) for one tree; bit i of `coalition` set means feature i is in S.
double path_expectation(const RegressionTree& tree, std::span<const double> x, std::size_t target,
                        std::uint32_t coalition);

inline constexpr std::size_t kBruteForceFeatureLimit = 15;

// Shapley values by enumerating all 2^d coalitions of the forest game.
// Throws Error(kTooManyFeatures) above kBruteForceFeatureLimit.
std::vector<double> brute_force_shap(const RegressionForest& forest, std::span<const double> x, std::size_t target);

struct ShapExplanation {
  std::string dataset_id;
  std::string metric;
  std::string algorithm;
  std::vector<std::string> features;
  std::vector<double> phi;
  std::vector<double> feature_values;
  double base_value = 0.0;
  double prediction = 0.0;
};

// One explanation per (metric, dataset) of `selections`, from the held-out
// model of the selected algorithm, ordered by (metric, dataset).
std::vector<ShapExplanation> selector_shap(const std::map<std::string, Assignment>& selections,
                                           const ModelStore& models, const MetaFeatureMatrix& features);

struct FeaturePoint {
  std::string dataset_id;
  double phi = 0.0;
  double value = 0.0;
};

struct FeatureImportance {
  std::string feature;
  double mean_abs_phi = 0.0;
  std::vector<FeaturePoint> points;
};

// Features by mean |phi| descending, ties by name.
std::vector<FeatureImportance> summary_ranking(std::span<const ShapExplanation> explanations);

struct DomainTopK {
  std::string domain;
  std::size_t k = 0;
  std::vector<std::string> features;  // by mean |phi| within the domain
  std::vector<double> scores;
};

struct DomainIntersection {
  std::vector<std::string> domains;
  std::vector<std::string> features;  // sorted by name
};

struct DomainAnalysis {
  std::vector<DomainTopK> groups;                 // sorted by domain
  std::vector<DomainIntersection> intersections;  // every pair, then every triple
};

// Groups explanations by the domain of their dataset; `domain_of` maps
// dataset id -> domain and must cover every explanation.
DomainAnalysis domain_topk(std::span<const ShapExplanation> explanations,
                           const std::map<std::string, std::string>& domain_of, std::size_t k = 5);

// CSV `dataset,metric,algorithm,feature,phi,feature_value,base_value`.
std::string format_explanations(std::span<const ShapExplanation> explanations, std::string_view comment = {});

// JSON {"<metric>": {"domains": {...}, "intersections": {"a&b": [...]}}}.
std::string format_domain_analysis(const std::map<std::string, DomainAnalysis>& by_metric,
                                   std::string_view config_hash);

// Beeswarm-style summary: one row per feature (ranking order), a dot per
// dataset at its phi, coloured by the min-max normalized feature value
// (blue low, red high).
std::string render_summary_svg(std::span<const FeatureImportance> ranking, std::string_view title,
                               std::string_view config_hash);

}  // namespace mlcas
