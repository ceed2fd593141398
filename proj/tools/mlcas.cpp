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

// mlcas: explainable algorithm selection for multi-label classification.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mlcas/core.hpp"
#include "mlcas/error.hpp"
#include "mlcas/explain.hpp"
#include "mlcas/forest.hpp"
#include "mlcas/ingest.hpp"
#include "mlcas/io.hpp"
#include "mlcas/metafeatures.hpp"
#include "mlcas/pipeline.hpp"
#include "mlcas/selection.hpp"

namespace fs = std::filesystem;
using namespace mlcas;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitStage = 3;

struct GlobalFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string mode = "str";
  bool mode_given = false;
  bool allow_missing = false;
  int jobs = 1;
  std::string out = ".";
};

// Input problems map to exit code 2, everything else to 3.
int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kInvalidConfig:
    case ErrorCode::kMissingFile:
    case ErrorCode::kMalformedManifest:
    case ErrorCode::kMalformedCsv:
    case ErrorCode::kLabelColumnNotFound:
    case ErrorCode::kNonBinaryLabelValue:
    case ErrorCode::kUnknownMetric:
    case ErrorCode::kDuplicateKey:
    case ErrorCode::kNonFiniteValue:
    case ErrorCode::kMalformedModel:
      return kExitUsage;
    default:
      return kExitStage;
  }
}

RunConfig resolve_config(const GlobalFlags& g) {
  RunConfig cfg = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
  if (g.seed) cfg.base_seed = *g.seed;
  cfg.validate();
  return cfg;
}

std::vector<ForestParams> load_grid(const std::string& path) {
  if (path.empty()) return default_search_grid();
  std::vector<ForestParams> grid;
  std::istringstream in(io::read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    grid.push_back(ForestParams::parse(line));
  }
  if (grid.empty()) throw Error(ErrorCode::kInvalidArgument, path + ": empty grid");
  return grid;
}

class Output {
 public:
  explicit Output(const std::string& dir) : dir_(dir) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir + ": " + ec.message());
  }
  void write(const std::string& name, std::string_view content) const {
    io::write_file_atomic(dir_ / name, content);
    std::cout << (dir_ / name).string() << '\n';
  }

 private:
  fs::path dir_;
};

std::map<std::string, std::string> load_domains(const std::string& domains_csv,
                                                const std::vector<std::string>& manifests) {
  std::map<std::string, std::string> out;
  if (!domains_csv.empty()) {
    io::CsvTable csv = io::read_csv(domains_csv);
    if (csv.header != std::vector<std::string>{"dataset", "domain"})
      throw Error(ErrorCode::kMalformedCsv, domains_csv + ": header must be dataset,domain");
    for (const auto& r : csv.rows) out[r[0]] = r[1];
  }
  for (const auto& m : manifests) {
    MLCDataset ds = load_dataset(m);
    out[ds.id] = ds.domain;
  }
  return out;
}

std::string safe_name(std::string_view name) {
  std::string out;
  for (char c : name) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ? c : '_');
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mlcas: explainable per-dataset algorithm selection for multi-label classification"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  GlobalFlags g;
  app.add_option("--config", g.config_path, "Run configuration file (key = value lines)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Base seed, overrides the configuration");
  app.add_option("--mode", g.mode, "Regression mode")->check(CLI::IsMember({"str", "mtr"}))->each([&](const std::string&) {
    g.mode_given = true;
  });
  app.add_flag("--allow-missing", g.allow_missing, "Drop incomplete datasets instead of failing");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output directory");
  app.fallthrough();

  std::vector<std::string> manifests;
  auto* features = app.add_subcommand("features", "Compute the meta-feature matrix of dataset manifests");
  features->add_option("manifests", manifests, "Dataset manifest files")->required();

  std::string features_csv;
  auto* prune = app.add_subcommand("prune", "Drop zero-variance and correlated meta-features");
  prune->add_option("--features", features_csv, "Meta-feature CSV")->required()->check(CLI::ExistingFile);

  std::string performance_csv;
  auto* portfolio_cmd = app.add_subcommand("portfolio", "Build the algorithm portfolio from performance data");
  portfolio_cmd->add_option("--performance", performance_csv, "Performance CSV")->required()->check(CLI::ExistingFile);
  portfolio_cmd->add_option("--features", features_csv, "Restrict to datasets of this meta-feature CSV");

  std::string portfolio_json, grid_path;
  auto* train = app.add_subcommand("train", "Leave-one-dataset-out training and performance prediction");
  train->add_option("--features", features_csv, "Meta-feature CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--performance", performance_csv, "Performance CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--portfolio", portfolio_json, "portfolio.json; built from the table when omitted");
  train->add_option("--grid", grid_path, "Hyperparameter candidates, one per line (default: 72-candidate grid)");

  std::string predictions_csv;
  auto* select_cmd = app.add_subcommand("select", "Pick the predicted-best algorithm per dataset and metric");
  select_cmd->add_option("--predictions", predictions_csv, "predictions.csv")->required()->check(CLI::ExistingFile);
  select_cmd->add_option("--portfolio", portfolio_json, "portfolio.json")->required()->check(CLI::ExistingFile);

  std::string selections_csv;
  auto* evaluate = app.add_subcommand("evaluate", "Regret and macro-F1 of a selection against SBS and VBS");
  evaluate->add_option("--selections", selections_csv, "selections.csv")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--performance", performance_csv, "Performance CSV")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--portfolio", portfolio_json, "portfolio.json")->required()->check(CLI::ExistingFile);

  std::string models_path, domains_csv;
  std::size_t top_k = 5;
  auto* explain = app.add_subcommand("explain", "Shapley attributions of the selection decisions");
  explain->add_option("--selections", selections_csv, "selections.csv")->required()->check(CLI::ExistingFile);
  explain->add_option("--models", models_path, "models.txt written by train")->required()->check(CLI::ExistingFile);
  explain->add_option("--features", features_csv, "Meta-feature CSV used for training")->required()->check(
      CLI::ExistingFile);
  explain->add_option("--domains", domains_csv, "CSV dataset,domain for the domain analysis");
  explain->add_option("--datasets", manifests, "Dataset manifests supplying domain tags");
  explain->add_option("--top-k", top_k, "Features per domain")->check(CLI::PositiveNumber);

  std::string run_manifest;
  auto* pipeline = app.add_subcommand("pipeline", "Run every stage and write the report bundle");
  pipeline->add_option("manifest", run_manifest, "Run manifest JSON")->required();

  std::string before_path, after_path;
  auto* compare = app.add_subcommand("compare", "Compare two selection reports");
  compare->add_option("before", before_path, "selection_report.json")->required()->check(CLI::ExistingFile);
  compare->add_option("after", after_path, "selection_report.json")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  const MetricRegistry registry = default_metric_registry();
  try {
    if (pipeline->parsed()) {
      RunManifest m;
      try {
        m = load_run_manifest(run_manifest);
        if (!g.config_path.empty()) m.config = load_config(g.config_path);
        if (g.seed) m.config.base_seed = *g.seed;
        if (g.mode_given) m.mode = parse_mode(g.mode);
        if (app.count("--out") || m.output_dir.empty()) m.output_dir = g.out;
      } catch (const Error& e) {
        std::cerr << "mlcas: stage 'manifest': " << e.what() << '\n';
        return kExitStage;
      }
      PipelineOptions opts;
      opts.jobs = g.jobs;
      opts.allow_missing = g.allow_missing;
      const PipelineSummary summary = run_pipeline(m, opts);
      for (const auto& p : summary.written) std::cout << p.string() << '\n';
      return 0;
    }

    const RunConfig cfg = resolve_config(g);
    const Mode mode = parse_mode(g.mode);
    const std::vector<ForestParams> grid = load_grid(grid_path);
    const std::string hash = config_hash(cfg, mode, grid);
    const std::string comment = "config_hash=" + hash;

    if (compare->parsed()) {
      const auto before = parse_selection_report(io::read_file(before_path));
      const auto after = parse_selection_report(io::read_file(after_path));
      const std::string text = format_comparison(compare_reports(before, after));
      if (app.count("--out")) {
        Output(g.out).write("comparison.json", text);
      } else {
        std::cout << text;
      }
      return 0;
    }

    Output out(g.out);
    if (features->parsed()) {
      std::vector<MetaFeatureVector> vectors(manifests.size());
      std::vector<MLCDataset> datasets;
      for (const auto& path : manifests) {
        try {
          datasets.push_back(load_dataset(path));
        } catch (const Error& e) {
          std::cerr << "mlcas: " << path << ": " << e.what() << '\n';
          return kExitUsage;
        }
      }
      parallel_for(datasets.size(), g.jobs, [&](std::size_t i) { vectors[i] = compute_metafeatures(datasets[i], cfg); });
      std::string log = "# " + comment + "\n";
      for (const auto& v : vectors)
        for (const auto& w : v.warnings) log += v.dataset_id + ": " + w + "\n";
      out.write("features.csv", format_feature_csv(assemble_matrix(vectors), comment));
      out.write("feature_warnings.txt", log);
    } else if (prune->parsed()) {
      const MetaFeatureMatrix pruned = prune_correlated(load_feature_csv(features_csv), cfg.correlation_threshold_features);
      out.write("features.csv", format_feature_csv(pruned, comment));
      out.write("drop_log.csv", format_drop_log(pruned.drop_log, comment));
    } else if (portfolio_cmd->parsed()) {
      PerformanceTable table = load_performance_table(performance_csv, registry);
      if (!features_csv.empty()) {
        const auto report = validate_join(load_feature_csv(features_csv).rows, table, g.allow_missing);
        table = restrict_table(table, report.common_ids);
      }
      const auto p = build_portfolio(table, table.metrics(), registry, cfg);
      out.write("portfolio.json", format_portfolio(p, cfg, table, hash));
    } else if (train->parsed()) {
      const MetaFeatureMatrix fm = load_feature_csv(features_csv);
      const PerformanceTable full = load_performance_table(performance_csv, registry);
      const auto report = validate_join(fm.rows, full, g.allow_missing);
      const PerformanceTable table = restrict_table(full, report.common_ids);
      const MetaFeatureMatrix rows = restrict_rows(fm, report.common_ids);
      const AlgorithmPortfolio p = portfolio_json.empty() ? build_portfolio(table, table.metrics(), registry, cfg)
                                                          : parse_portfolio(io::read_file(portfolio_json));
      const LooResult result = loo_predictions(rows, table, p, table.metrics(), mode, cfg, LooOptions{grid, g.jobs});
      out.write("predictions.csv", format_predictions(result.predictions, comment));
      out.write("folds.csv", format_folds(result.folds, comment));
      out.write("models.txt", format_model_store(result.models));
    } else if (select_cmd->parsed()) {
      const auto pred = parse_predictions(io::read_file(predictions_csv), mode, predictions_csv);
      const auto p = parse_portfolio(io::read_file(portfolio_json));
      out.write("selections.csv", format_selections(select(pred, registry, p), comment));
    } else if (evaluate->parsed()) {
      const auto sel = parse_selections(io::read_file(selections_csv), selections_csv);
      const auto table = load_performance_table(performance_csv, registry);
      const auto p = parse_portfolio(io::read_file(portfolio_json));
      const SelectionReport report = build_selection_report(sel, table, registry, p, mode, hash);
      const std::vector<const SelectionReport*> reports{&report};
      const Heatmap heatmap = build_heatmap(reports);
      out.write("selection_report.json", format_selection_report(report));
      out.write("macro_f1_heatmap.csv", format_heatmap(heatmap, comment));
      out.write("macro_f1_heatmap.svg", render_heatmap_svg(heatmap, hash));
      out.write("regret_boxplots.csv", format_regret_boxplots(reports, comment));
    } else if (explain->parsed()) {
      const auto sel = parse_selections(io::read_file(selections_csv), selections_csv);
      const ModelStore models = parse_model_store(io::read_file(models_path), mode);
      const MetaFeatureMatrix fm = load_feature_csv(features_csv);
      const auto explanations = selector_shap(sel, models, fm);
      out.write("shap.csv", format_explanations(explanations, comment));
      const auto domain_of = load_domains(domains_csv, manifests);
      std::map<std::string, std::vector<ShapExplanation>> by_metric;
      for (const auto& e : explanations) by_metric[e.metric].push_back(e);
      std::map<std::string, DomainAnalysis> analyses;
      for (const auto& [metric, group] : by_metric) {
        out.write("shap_summary_" + safe_name(metric) + ".svg",
                  render_summary_svg(summary_ranking(group), "SHAP summary: " + metric, hash));
        if (!domain_of.empty()) analyses[metric] = domain_topk(group, domain_of, top_k);
      }
      if (!domain_of.empty()) out.write("domain_topk.json", format_domain_analysis(analyses, hash));
    }
    return 0;
  } catch (const StageError& e) {
    std::cerr << "mlcas: " << e.what() << '\n';
    return kExitStage;
  } catch (const Error& e) {
    std::cerr << "mlcas: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "mlcas: " << e.what() << '\n';
    return kExitStage;
  }
}
