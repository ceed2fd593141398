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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mlcas/core.hpp"
#include "mlcas/error.hpp"
#include "mlcas/explain.hpp"
#include "mlcas/forest.hpp"
#include "mlcas/ingest.hpp"
#include "mlcas/metafeatures.hpp"
#include "mlcas/selection.hpp"

namespace mlcas {

// Inputs of one end-to-end run. Relative paths in the JSON file resolve
// against the file's directory.
//
//   {
//     "config": "run.cfg" | {"base_seed": 1, ...},   optional
//     "datasets": ["a.json", ...],                   or "features" + "domains"
//     "features": "features.csv",
//     "domains": {"<dataset id>": "<domain>", ...},
//     "performance": "performance.csv",
//     "mode": "str" | "mtr",                         optional, default str
//     "output": "out",                               optional
//     "grid": ["n_estimators=50 max_features=auto ...", ...]   optional
//   }
struct RunManifest {
  RunConfig config;
  std::vector<std::filesystem::path> dataset_manifests;
  std::filesystem::path features_csv;
  std::map<std::string, std::string> domains;
  std::filesystem::path performance_csv;
  Mode mode = Mode::kStr;
  std::filesystem::path output_dir;
  std::vector<ForestParams> grid = default_search_grid();
};

RunManifest parse_run_manifest(std::string_view text, const std::filesystem::path& base_dir);
RunManifest load_run_manifest(const std::filesystem::path& path);

// Flat config text from a JSON object of key -> number.
RunConfig config_from_json_text(std::string_view json_text);

// 16 hex digits of FNV-1a over the formatted config, the mode and the grid.
std::string config_hash(const RunConfig& config, Mode mode, std::span<const ForestParams> grid);

// Keeps only `ids` (in table order) of a performance table.
PerformanceTable restrict_table(const PerformanceTable& table, std::span<const std::string> ids);
// Keeps only rows `ids`, in the given order.
MetaFeatureMatrix restrict_rows(const MetaFeatureMatrix& matrix, std::span<const std::string> ids);

// portfolio.json
std::string format_portfolio(const AlgorithmPortfolio& portfolio, const RunConfig& config,
                             const PerformanceTable& table, std::string_view config_hash);
AlgorithmPortfolio parse_portfolio(std::string_view text);

// CSV `metric,dataset,algorithm`.
std::string format_selections(const std::map<std::string, Assignment>& selections, std::string_view comment = {});
std::map<std::string, Assignment> parse_selections(std::string_view text, const std::string& source_name = "<memory>");

// CSV `held_out,algorithm,metric,chosen,cv_mse,training_ids` with training
// ids joined by ';'.
std::string format_folds(std::span<const FoldRecord> folds, std::string_view comment = {});

// Every forest of a store, each preceded by a `model <tab> algorithm <tab>
// metric <tab> held_out` line.
std::string format_model_store(const ModelStore& store);
ModelStore parse_model_store(std::string_view text, Mode mode);

// One macro-F1 grid row per selector.
struct HeatmapRow {
  std::string selector;
  std::vector<double> macro_f1;  // aligned with the metric list
};
struct Heatmap {
  std::vector<std::string> metrics;
  std::vector<HeatmapRow> rows;
};

// Rows: each portfolio algorithm as constant selector, then one
// `AS(<MODE>)` row per report.
Heatmap build_heatmap(std::span<const SelectionReport* const> reports);
std::string format_heatmap(const Heatmap& heatmap, std::string_view comment = {});
std::string render_heatmap_svg(const Heatmap& heatmap, std::string_view config_hash);

// CSV `metric,selector,min,q1,median,q3,max,mean`; selectors are the
// constant algorithms, SBS and every AS(<MODE>).
std::string format_regret_boxplots(std::span<const SelectionReport* const> reports, std::string_view comment = {});

SelectionReport build_selection_report(const std::map<std::string, Assignment>& selections,
                                       const PerformanceTable& table, const MetricRegistry& registry,
                                       const AlgorithmPortfolio& portfolio, Mode mode,
                                       std::string_view config_hash);

// A stage failure: `stage` names the step, code() and what() come from the
// underlying error.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause);
  const std::string& stage() const noexcept { return stage_; }
  const char* what() const noexcept override { return message_.c_str(); }

 private:
  std::string stage_;
  std::string message_;
};

struct PipelineOptions {
  int jobs = 1;
  bool allow_missing = false;
  std::size_t top_k = 5;
};

struct PipelineSummary {
  std::string config_hash;
  std::vector<std::filesystem::path> written;  // in write order
};

// Runs ingest, features, validate, prune, portfolio, train, select, evaluate
// and explain, writing the report bundle into manifest.output_dir. Both STR
// and MTR selectors are trained for the heatmap; manifest.mode picks the one
// behind predictions.csv, selection_report.json and the SHAP outputs.
// Throws StageError.
PipelineSummary run_pipeline(const RunManifest& manifest, const PipelineOptions& options = {});

}  // namespace mlcas
