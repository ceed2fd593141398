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

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mlcas/core.hpp"
#include "mlcas/ingest.hpp"
#include "mlcas/matrix.hpp"

namespace mlcas {

enum class FeatureGroup { kDimensionality, kLabelDistribution, kLabelImbalance, kLabelRelationship, kAttributeMetrics };

std::string_view to_string(FeatureGroup group);

struct FeatureInfo {
  std::string name;
  FeatureGroup group;
};

// Names and groups of the catalogue, in canonical column order.
const std::vector<FeatureInfo>& metafeature_catalogue();

struct MetaFeatureVector {
  std::string dataset_id;
  std::vector<std::string> names;
  std::vector<FeatureGroup> groups;
  std::vector<double> values;
  // Non-fatal findings, e.g. labels with no positive instance.
  std::vector<std::string> warnings;

  // nullptr-free lookup; throws Error(kInvalidArgument) on unknown names.
  double value(std::string_view name) const;
};

MetaFeatureVector compute_metafeatures(const MLCDataset& dataset, const RunConfig& config);

// Fraction of unordered label pairs whose 2x2 co-occurrence table has a
// Pearson chi-square statistic above `critical`. No continuity correction;
// a pair with a zero marginal contributes chi-square 0.
double chi2_dependent_ratio(const LabelMatrix& labels, double critical);

// Chi-square statistic of the 2x2 co-occurrence table of labels a and b.
double pair_chi_square(const LabelMatrix& labels, std::size_t a, std::size_t b);

// Sample Pearson correlation; 0 when either input has zero variance.
// Throws Error(kLengthMismatch) for unequal or fewer than 2 samples.
double pearson(std::span<const double> x, std::span<const double> y);

struct DropRecord {
  std::string dropped;
  // The retained partner feature, or "zero-variance".
  std::string kept_or_reason;
  // |r| is above the threshold; the signed coefficient is stored. 0 for
  // zero-variance drops.
  double r = 0.0;

  friend bool operator==(const DropRecord&, const DropRecord&) = default;
};

inline constexpr std::string_view kZeroVarianceReason = "zero-variance";

struct MetaFeatureMatrix {
  std::vector<std::string> rows;  // dataset ids
  std::vector<std::string> cols;  // feature names
  Matrix data;
  std::vector<DropRecord> drop_log;

  std::size_t row_index(std::string_view id) const;  // throws kInvalidArgument
  std::size_t col_index(std::string_view name) const;

  friend bool operator==(const MetaFeatureMatrix&, const MetaFeatureMatrix&) = default;
};

// Stacks vectors in the given order. All vectors must share feature order.
MetaFeatureMatrix assemble_matrix(std::span<const MetaFeatureVector> vectors);

// Drops zero-variance columns, then scans pairs (i < j) in column order and
// drops column j whenever |r(i, j)| > threshold and both are still present.
MetaFeatureMatrix prune_correlated(const MetaFeatureMatrix& matrix, double threshold);

// Later-column greedy pruning over metrics, each metric's vector being its
// values over (dataset, algorithm) in table axis order. Returns retained
// metric names in table order.
std::vector<std::string> prune_metrics(const PerformanceTable& table, double threshold);

struct MetricCorrelation {
  std::string first;
  std::string second;
  double r;
};
// All pairwise metric correlations used by prune_metrics, in scan order.
std::vector<MetricCorrelation> metric_correlations(const PerformanceTable& table);

// CSV: header `dataset,<feature>...`, one row per dataset, 17 significant
// digits. Lines starting with '#' before the header are comments.
std::string format_feature_csv(const MetaFeatureMatrix& matrix, std::string_view comment = {});
MetaFeatureMatrix parse_feature_csv(std::string_view text, const std::string& source_name = "<memory>");
MetaFeatureMatrix load_feature_csv(const std::filesystem::path& path);

// CSV: header `dropped,kept_or_reason,r`.
std::string format_drop_log(std::span<const DropRecord> log, std::string_view comment = {});

}  // namespace mlcas
