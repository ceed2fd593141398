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

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mlcas/core.hpp"
#include "mlcas/forest.hpp"
#include "mlcas/ingest.hpp"
#include "mlcas/metafeatures.hpp"

namespace mlcas {

struct AlgorithmPortfolio {
  std::vector<std::string> algorithms;
  // (algorithm, metric) -> number of datasets on which it was (co-)best.
  std::map<std::pair<std::string, std::string>, int> win_counts;

  int wins(const std::string& algorithm, const std::string& metric) const;
};

// One win per (dataset, metric) to every algorithm tied for the best value;
// keeps algorithms reaching config.min_wins on at least one metric, in table
// order. Datasets lacking a value for some algorithm are skipped.
AlgorithmPortfolio build_portfolio(const PerformanceTable& table, std::span<const std::string> metrics,
                                   const MetricRegistry& registry, const RunConfig& config);

// (dataset, algorithm, metric) -> predicted value, sorted by key.
class PredictionsTable {
 public:
  using Key = std::array<std::string, 3>;

  explicit PredictionsTable(Mode mode = Mode::kStr) : mode_(mode) {}

  Mode mode() const noexcept { return mode_; }
  void set(const std::string& dataset, const std::string& algorithm, const std::string& metric, double value);
  std::optional<double> get(const std::string& dataset, const std::string& algorithm, const std::string& metric) const;
  const std::map<Key, double>& entries() const noexcept { return entries_; }
  std::vector<std::string> datasets() const;
  std::vector<std::string> metrics() const;

 private:
  Mode mode_;
  std::map<Key, double> entries_;
};

// CSV `dataset,algorithm,metric,predicted` in key order.
std::string format_predictions(const PredictionsTable& predictions, std::string_view comment = {});
PredictionsTable parse_predictions(std::string_view text, Mode mode, const std::string& source_name = "<memory>");

struct LooOptions {
  std::vector<ForestParams> grid = default_search_grid();
  int jobs = 1;
};

struct FoldRecord {
  std::string held_out;
  std::string algorithm;
  std::string metric;  // empty for multi-target folds
  std::vector<std::string> training_ids;
  ForestParams chosen;
  // Inner-CV score of `chosen`; unset when no search ran (one candidate or
  // too few training rows).
  std::optional<double> cv_mse;
};

struct FoldError {
  std::string dataset;
  std::string algorithm;
  std::string metric;
  double squared_error = 0.0;
};

// Forests of a LOO run, addressable by (algorithm, metric, held-out id).
class ModelStore {
 public:
  struct Ref {
    const RegressionForest* forest;
    std::size_t target;
  };

  explicit ModelStore(Mode mode = Mode::kStr) : mode_(mode) {}

  Mode mode() const noexcept { return mode_; }
  // For multi-target stores `metric` is ignored at insertion.
  void add(const std::string& algorithm, const std::string& metric, const std::string& held_out,
           RegressionForest forest);
  // Throws Error(kModelNotFound).
  Ref find(const std::string& algorithm, const std::string& metric, const std::string& held_out) const;
  std::size_t size() const noexcept { return models_.size(); }
  const std::map<std::array<std::string, 3>, RegressionForest>& models() const noexcept { return models_; }

 private:
  Mode mode_;
  std::map<std::array<std::string, 3>, RegressionForest> models_;
};

struct LooResult {
  PredictionsTable predictions;
  std::vector<FoldRecord> folds;
  std::vector<FoldError> errors;
  // (algorithm, metric) -> mean held-out squared error over datasets.
  std::map<std::pair<std::string, std::string>, double> mse;
  // metric -> datasets left out of that metric's experiment for lack of data.
  std::map<std::string, std::vector<std::string>> excluded;
  ModelStore models;
};

// Leave-one-dataset-out performance prediction. For every held-out dataset
// and portfolio algorithm: STR grid-searches and fits one single-target forest
// per metric, MTR one multi-target forest over all `metrics`. The held-out
// row never enters training or model selection.
LooResult loo_predictions(const MetaFeatureMatrix& features, const PerformanceTable& table,
                          const AlgorithmPortfolio& portfolio, std::span<const std::string> metrics, Mode mode,
                          const RunConfig& config, const LooOptions& options = {});

// dataset -> algorithm
using Assignment = std::map<std::string, std::string>;

// metric -> assignment. Per (dataset, metric) the algorithm with the best
// predicted value; ties go to the earlier portfolio member.
std::map<std::string, Assignment> select(const PredictionsTable& predictions, const MetricRegistry& registry,
                                         const AlgorithmPortfolio& portfolio);

// True best algorithm per dataset among `algorithms`; ties to the earlier one.
Assignment vbs(const PerformanceTable& table, const std::string& metric, const MetricRegistry& registry,
               std::span<const std::string> algorithms, std::span<const std::string> datasets);

// Algorithm with the best mean true value over `datasets`; ties to the
// earlier one.
std::string sbs(const PerformanceTable& table, const std::string& metric, const MetricRegistry& registry,
                std::span<const std::string> algorithms, std::span<const std::string> datasets);

// Macro-F1 of `selected` against `truth`, both keyed by dataset. Classes are
// the union of selected and true labels.
double selector_macro_f1(const Assignment& selected, const Assignment& truth);

struct BoxStats {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

// Linear-interpolation quantile (position p * (n - 1)) of unsorted values.
double quantile(std::vector<double> values, double p);
BoxStats box_stats(const std::vector<double>& values);

struct SelectionRow {
  std::string dataset;
  std::string selected;
  std::string vbs;
  std::string sbs;
  double y_selected = 0.0;
  double y_vbs = 0.0;
  double y_sbs = 0.0;
  double regret = 0.0;
  double sbs_regret = 0.0;
};

struct ConstantSelector {
  std::string algorithm;
  double macro_f1 = 0.0;
  BoxStats regret;
};

struct MetricSelection {
  std::string metric;
  std::string sbs;
  std::vector<SelectionRow> rows;  // in dataset order of `selected`
  double macro_f1 = 0.0;
  BoxStats regret;
  BoxStats sbs_regret;
  std::vector<ConstantSelector> constant_selectors;  // portfolio order
};

// Regret of `selected` against the VBS for every dataset it covers, the SBS
// baseline, macro-F1 scores, and boxplot summaries for the selector and for
// each algorithm used as a constant selector.
MetricSelection regret_table(const Assignment& selected, const PerformanceTable& table, const std::string& metric,
                             const MetricRegistry& registry, std::span<const std::string> algorithms);

struct SelectionReport {
  Mode mode = Mode::kStr;
  std::string config_hash;
  std::vector<std::string> portfolio;
  std::vector<MetricSelection> metrics;

  const MetricSelection& metric(std::string_view name) const;
};

std::string format_selection_report(const SelectionReport& report);
SelectionReport parse_selection_report(std::string_view text);

struct SelectionChange {
  std::string dataset;
  std::string before;
  std::string after;
};

struct MetricComparison {
  std::string metric;
  double macro_f1_before = 0.0;
  double macro_f1_after = 0.0;
  double macro_f1_delta = 0.0;  // after - before
  double mean_regret_delta = 0.0;
  std::vector<SelectionChange> changes;
};

// Throws Error(kMetricSetMismatch) unless both reports cover the same metrics.
std::vector<MetricComparison> compare_reports(const SelectionReport& before, const SelectionReport& after);
std::string format_comparison(const std::vector<MetricComparison>& comparison);

}  // namespace mlcas
