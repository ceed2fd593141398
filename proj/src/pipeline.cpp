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

#include "mlcas/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mlcas/io.hpp"

namespace mlcas {

using nlohmann::ordered_json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& rel) {
  std::filesystem::path p(rel);
  if (p.is_absolute() || base.empty()) return p.lexically_normal();
  return (base / p).lexically_normal();
}

std::string json_number_text(const ordered_json& v) {
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  return io::format_double(v.get<double>());
}

ordered_json config_json(const RunConfig& c) {
  ordered_json j;
  j["base_seed"] = c.base_seed;
  j["correlation_threshold_features"] = c.correlation_threshold_features;
  j["correlation_threshold_metrics"] = c.correlation_threshold_metrics;
  j["min_wins"] = c.min_wins;
  j["inner_cv_folds"] = c.inner_cv_folds;
  j["chi_square_critical"] = c.chi_square_critical;
  j["numeric_tolerance"] = c.numeric_tolerance;
  return j;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void check_id_field(const std::string& s, std::string_view what) {
  if (s.find_first_of("\t\n\r") != std::string::npos)
    throw Error(ErrorCode::kInvalidArgument, std::string(what) + " '" + s + "' contains a tab or newline");
}

}  // namespace

RunConfig config_from_json_text(std::string_view json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("config JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kInvalidConfig, "config must be a JSON object");
  std::string text;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_number()) throw Error(ErrorCode::kInvalidConfig, "config key '" + key + "' must be a number");
    text += key + " = " + json_number_text(value) + "\n";
  }
  return parse_config(text);
}

RunManifest parse_run_manifest(std::string_view text, const std::filesystem::path& base_dir) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedManifest, std::string("run manifest: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kMalformedManifest, "run manifest must be a JSON object");
  static const std::set<std::string> known = {"config", "datasets", "features", "domains",
                                              "performance", "mode", "output", "grid"};
  RunManifest m;
  try {
    for (const auto& [key, value] : j.items())
      if (!known.count(key)) throw Error(ErrorCode::kMalformedManifest, "unknown run manifest field '" + key + "'");
    if (j.contains("config")) {
      const auto& c = j["config"];
      if (c.is_string()) {
        m.config = load_config(resolve(base_dir, c.get<std::string>()));
      } else if (c.is_object()) {
        m.config = config_from_json_text(c.dump());
      } else {
        throw Error(ErrorCode::kMalformedManifest, "'config' must be a path or an object");
      }
    }
    if (j.contains("datasets") && j["datasets"].empty())
      throw Error(ErrorCode::kMalformedManifest, "'datasets' must not be empty");
    if (j.contains("datasets"))
      for (const auto& d : j["datasets"]) m.dataset_manifests.push_back(resolve(base_dir, d.get<std::string>()));
    if (j.contains("features")) m.features_csv = resolve(base_dir, j["features"].get<std::string>());
    if (j.contains("domains"))
      for (const auto& [id, domain] : j["domains"].items()) m.domains[id] = domain.get<std::string>();
    if (j.contains("datasets") == j.contains("features"))
      throw Error(ErrorCode::kMalformedManifest, "exactly one of 'datasets' and 'features' is required");
    if (!j.contains("performance")) throw Error(ErrorCode::kMalformedManifest, "'performance' is required");
    m.performance_csv = resolve(base_dir, j["performance"].get<std::string>());
    if (j.contains("mode")) m.mode = parse_mode(j["mode"].get<std::string>());
    if (j.contains("output")) m.output_dir = resolve(base_dir, j["output"].get<std::string>());
    if (j.contains("grid")) {
      m.grid.clear();
      for (const auto& g : j["grid"]) m.grid.push_back(ForestParams::parse(g.get<std::string>()));
      if (m.grid.empty()) throw Error(ErrorCode::kMalformedManifest, "'grid' must not be empty");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedManifest, std::string("run manifest: ") + e.what());
  }
  return m;
}

RunManifest load_run_manifest(const std::filesystem::path& path) {
  return parse_run_manifest(io::read_file(path), path.parent_path());
}

std::string config_hash(const RunConfig& config, Mode mode, std::span<const ForestParams> grid) {
  std::string text = format_config(config);
  text += "mode = ";
  text += to_string(mode);
  text += '\n';
  for (const auto& p : grid) text += "grid = " + p.describe() + "\n";
  return hex64(task_id(text));
}

PerformanceTable restrict_table(const PerformanceTable& table, std::span<const std::string> ids) {
  const std::set<std::string> keep(ids.begin(), ids.end());
  PerformanceTable out;
  for (const auto& d : table.datasets()) {
    if (!keep.count(d)) continue;
    for (const auto& a : table.algorithms())
      for (const auto& m : table.metrics())
        if (auto v = table.get(d, a, m)) out.set(d, a, m, *v);
  }
  return out;
}

MetaFeatureMatrix restrict_rows(const MetaFeatureMatrix& matrix, std::span<const std::string> ids) {
  std::vector<std::size_t> rows;
  for (const auto& id : ids) rows.push_back(matrix.row_index(id));
  MetaFeatureMatrix out;
  out.rows.assign(ids.begin(), ids.end());
  out.cols = matrix.cols;
  out.data = matrix.data.select_rows(rows);
  out.drop_log = matrix.drop_log;
  return out;
}

std::string format_portfolio(const AlgorithmPortfolio& portfolio, const RunConfig& config,
                             const PerformanceTable& table, std::string_view hash) {
  ordered_json root;
  root["config_hash"] = std::string(hash);
  root["min_wins"] = config.min_wins;
  root["algorithms"] = portfolio.algorithms;
  ordered_json wins = ordered_json::object();
  for (const auto& a : table.algorithms()) {
    ordered_json per = ordered_json::object();
    for (const auto& m : table.metrics()) per[m] = portfolio.wins(a, m);
    wins[a] = std::move(per);
  }
  root["win_counts"] = std::move(wins);

  // Informational: the metric set is fixed by the registry, so pruning only
  // reports which metrics would survive the threshold.
  ordered_json pruning;
  pruning["threshold"] = config.correlation_threshold_metrics;
  if (table.dense() && table.datasets().size() * table.algorithms().size() >= 2) {
    pruning["retained"] = prune_metrics(table, config.correlation_threshold_metrics);
    ordered_json pairs = ordered_json::array();
    for (const auto& c : metric_correlations(table)) {
      ordered_json p;
      p["first"] = c.first;
      p["second"] = c.second;
      p["r"] = c.r;
      pairs.push_back(std::move(p));
    }
    pruning["correlations"] = std::move(pairs);
  } else {
    pruning["skipped"] = "performance table is not dense";
  }
  root["metric_pruning"] = std::move(pruning);
  return root.dump(2) + "\n";
}

AlgorithmPortfolio parse_portfolio(std::string_view text) {
  try {
    ordered_json root = ordered_json::parse(text);
    AlgorithmPortfolio p;
    p.algorithms = root.at("algorithms").get<std::vector<std::string>>();
    for (const auto& [alg, per] : root.at("win_counts").items())
      for (const auto& [metric, n] : per.items()) p.win_counts[{alg, metric}] = n.get<int>();
    if (p.algorithms.empty()) throw Error(ErrorCode::kEmptyPortfolio, "portfolio file lists no algorithms");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedManifest, std::string("portfolio: ") + e.what());
  }
}

std::string format_selections(const std::map<std::string, Assignment>& selections, std::string_view comment) {
  std::string out;
  if (!comment.empty()) out += "# " + std::string(comment) + "\n";
  out += "metric,dataset,algorithm\n";
  for (const auto& [metric, assignment] : selections)
    for (const auto& [dataset, algorithm] : assignment) out += io::csv_row({metric, dataset, algorithm});
  return out;
}

std::map<std::string, Assignment> parse_selections(std::string_view text, const std::string& source_name) {
  io::CsvTable csv = io::parse_csv(text, source_name);
  if (csv.header != std::vector<std::string>{"metric", "dataset", "algorithm"})
    throw Error(ErrorCode::kMalformedCsv, source_name + ": header must be metric,dataset,algorithm");
  std::map<std::string, Assignment> out;
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    const auto& r = csv.rows[i];
    if (!out[r[0]].emplace(r[1], r[2]).second)
      throw Error(ErrorCode::kDuplicateKey,
                  source_name + ":" + std::to_string(csv.lines[i]) + ": repeated (" + r[0] + ", " + r[1] + ")");
  }
  return out;
}

std::string format_folds(std::span<const FoldRecord> folds, std::string_view comment) {
  std::string out;
  if (!comment.empty()) out += "# " + std::string(comment) + "\n";
  out += "held_out,algorithm,metric,chosen,cv_mse,training_ids\n";
  for (const auto& f : folds) {
    std::string ids;
    for (std::size_t i = 0; i < f.training_ids.size(); ++i) ids += (i ? ";" : "") + f.training_ids[i];
    out += io::csv_row({f.held_out, f.algorithm, f.metric, f.chosen.describe(),
                        f.cv_mse ? io::format_double(*f.cv_mse) : std::string(), ids});
  }
  return out;
}

std::string format_model_store(const ModelStore& store) {
  std::string out = "mlcas-models 1 ";
  out += to_string(store.mode());
  out += '\n';
  for (const auto& [key, forest] : store.models()) {
    for (const auto& k : key) check_id_field(k, "model key");
    out += "model\t" + key[0] + "\t" + key[1] + "\t" + key[2] + "\n";
    out += serialize_forest(forest);
  }
  return out;
}

ModelStore parse_model_store(std::string_view text, Mode mode) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line.rfind("mlcas-models 1 ", 0) != 0)
    throw Error(ErrorCode::kMalformedModel, "missing model store header");
  if (parse_mode(line.substr(15)) != mode)
    throw Error(ErrorCode::kMalformedModel, "model store was written for mode " + line.substr(15));
  ModelStore store(mode);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("model\t", 0) != 0) throw Error(ErrorCode::kMalformedModel, "expected a model line");
    std::vector<std::string> key;
    std::size_t start = 6;
    for (int i = 0; i < 2; ++i) {
      const std::size_t tab = line.find('\t', start);
      if (tab == std::string::npos) throw Error(ErrorCode::kMalformedModel, "short model line");
      key.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    key.push_back(line.substr(start));
    std::string body;
    bool ended = false;
    while (std::getline(in, line)) {
      body += line + "\n";
      if (line == "end") {
        ended = true;
        break;
      }
    }
    if (!ended) throw Error(ErrorCode::kMalformedModel, "model for '" + key[2] + "' is truncated");
    store.add(key[0], key[1], key[2], deserialize_forest(body));
  }
  return store;
}

SelectionReport build_selection_report(const std::map<std::string, Assignment>& selections,
                                       const PerformanceTable& table, const MetricRegistry& registry,
                                       const AlgorithmPortfolio& portfolio, Mode mode, std::string_view hash) {
  SelectionReport report;
  report.mode = mode;
  report.config_hash = std::string(hash);
  report.portfolio = portfolio.algorithms;
  for (const auto& metric : table.metrics()) {
    auto it = selections.find(metric);
    if (it == selections.end()) continue;
    report.metrics.push_back(regret_table(it->second, table, metric, registry, portfolio.algorithms));
  }
  for (const auto& [metric, assignment] : selections)
    if (std::find(table.metrics().begin(), table.metrics().end(), metric) == table.metrics().end())
      throw Error(ErrorCode::kUnknownMetric, "selections use metric '" + metric + "' absent from the table");
  return report;
}

namespace {

std::string as_label(Mode mode) {
  std::string m(to_string(mode));
  std::transform(m.begin(), m.end(), m.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return "AS(" + m + ")";
}

void check_compatible(std::span<const SelectionReport* const> reports) {
  if (reports.empty()) throw Error(ErrorCode::kInvalidArgument, "no selection reports");
  for (const auto* r : reports) {
    if (r->portfolio != reports.front()->portfolio)
      throw Error(ErrorCode::kInvalidArgument, "reports use different portfolios");
    if (r->metrics.size() != reports.front()->metrics.size())
      throw Error(ErrorCode::kMetricSetMismatch, "reports cover different metrics");
    for (std::size_t i = 0; i < r->metrics.size(); ++i)
      if (r->metrics[i].metric != reports.front()->metrics[i].metric)
        throw Error(ErrorCode::kMetricSetMismatch, "reports cover different metrics");
  }
}

}  // namespace

Heatmap build_heatmap(std::span<const SelectionReport* const> reports) {
  check_compatible(reports);
  const SelectionReport& first = *reports.front();
  Heatmap h;
  for (const auto& m : first.metrics) h.metrics.push_back(m.metric);
  for (std::size_t a = 0; a < first.portfolio.size(); ++a) {
    HeatmapRow row{first.portfolio[a], {}};
    for (const auto& m : first.metrics) row.macro_f1.push_back(m.constant_selectors[a].macro_f1);
    h.rows.push_back(std::move(row));
  }
  for (const auto* r : reports) {
    HeatmapRow row{as_label(r->mode), {}};
    for (const auto& m : r->metrics) row.macro_f1.push_back(m.macro_f1);
    h.rows.push_back(std::move(row));
  }
  return h;
}

std::string format_heatmap(const Heatmap& heatmap, std::string_view comment) {
  std::string out;
  if (!comment.empty()) out += "# " + std::string(comment) + "\n";
  std::vector<std::string> header{"selector"};
  header.insert(header.end(), heatmap.metrics.begin(), heatmap.metrics.end());
  out += io::csv_row(header);
  for (const auto& row : heatmap.rows) {
    std::vector<std::string> fields{row.selector};
    for (double v : row.macro_f1) fields.push_back(io::format_double(v));
    out += io::csv_row(fields);
  }
  return out;
}

namespace {

std::string xml_text(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '"') out += "&quot;";
    else out.push_back(c);
  }
  return out;
}

std::string num(double v, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string render_heatmap_svg(const Heatmap& heatmap, std::string_view hash) {
  const int label_width = 160, header_height = 90, cell_w = 110, cell_h = 30;
  const int width = label_width + cell_w * static_cast<int>(heatmap.metrics.size()) + 20;
  const int height = header_height + cell_h * static_cast<int>(heatmap.rows.size()) + 20;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
                    std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<!-- config_hash=" + xml_text(hash) + " -->\n";
  svg += "<text x=\"" + std::to_string(width / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
         "Selector macro-F1</text>\n";
  for (std::size_t c = 0; c < heatmap.metrics.size(); ++c) {
    const int x = label_width + cell_w * static_cast<int>(c) + cell_w / 2;
    svg += "<text x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(header_height - 10) +
           "\" text-anchor=\"middle\">" + xml_text(heatmap.metrics[c]) + "</text>\n";
  }
  for (std::size_t r = 0; r < heatmap.rows.size(); ++r) {
    const auto& row = heatmap.rows[r];
    const int y = header_height + cell_h * static_cast<int>(r);
    svg += "<text x=\"" + std::to_string(label_width - 8) + "\" y=\"" + std::to_string(y + cell_h / 2 + 4) +
           "\" text-anchor=\"end\">" + xml_text(row.selector) + "</text>\n";
    for (std::size_t c = 0; c < row.macro_f1.size(); ++c) {
      const double v = std::clamp(row.macro_f1[c], 0.0, 1.0);
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - v)));
      char fill[16];
      std::snprintf(fill, sizeof(fill), "#%02x%02xff", shade, shade);
      const int x = label_width + cell_w * static_cast<int>(c);
      svg += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" +
             std::to_string(cell_w) + "\" height=\"" + std::to_string(cell_h) + "\" fill=\"" + fill +
             "\" stroke=\"#fff\"/>\n";
      svg += "<text x=\"" + std::to_string(x + cell_w / 2) + "\" y=\"" + std::to_string(y + cell_h / 2 + 4) +
             "\" text-anchor=\"middle\" fill=\"" + (v > 0.6 ? "#fff" : "#000") + "\">" + num(row.macro_f1[c], 3) +
             "</text>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

std::string format_regret_boxplots(std::span<const SelectionReport* const> reports, std::string_view comment) {
  check_compatible(reports);
  std::string out;
  if (!comment.empty()) out += "# " + std::string(comment) + "\n";
  out += "metric,selector,min,q1,median,q3,max,mean\n";
  auto row = [&](const std::string& metric, const std::string& selector, const BoxStats& b) {
    out += io::csv_row({metric, selector, io::format_double(b.min), io::format_double(b.q1),
                        io::format_double(b.median), io::format_double(b.q3), io::format_double(b.max),
                        io::format_double(b.mean)});
  };
  const SelectionReport& first = *reports.front();
  for (std::size_t i = 0; i < first.metrics.size(); ++i) {
    const auto& m = first.metrics[i];
    for (const auto& c : m.constant_selectors) row(m.metric, c.algorithm, c.regret);
    row(m.metric, "SBS", m.sbs_regret);
    for (const auto* r : reports) row(m.metric, as_label(r->mode), r->metrics[i].regret);
  }
  return out;
}

StageError::StageError(std::string stage, const Error& cause)
    : Error(cause.code(), "stage"), stage_(std::move(stage)), message_("stage '" + stage_ + "': " + cause.what()) {}

namespace {

class BundleWriter {
 public:
  BundleWriter(std::filesystem::path dir, PipelineSummary& summary) : dir_(std::move(dir)), summary_(summary) {}

  void write(const std::string& name, std::string_view content) {
    const auto path = dir_ / name;
    io::write_file_atomic(path, content);
    summary_.written.push_back(path);
  }

 private:
  std::filesystem::path dir_;
  PipelineSummary& summary_;
};

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  } catch (const std::exception& e) {
    throw StageError(name, Error(ErrorCode::kIoError, e.what()));
  }
}

std::string safe_file_part(std::string_view name) {
  std::string out;
  for (char c : name) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ? c : '_');
  return out;
}

}  // namespace

PipelineSummary run_pipeline(const RunManifest& manifest, const PipelineOptions& options) {
  PipelineSummary summary;
  const RunConfig& cfg = manifest.config;
  const std::string hash = config_hash(cfg, manifest.mode, manifest.grid);
  summary.config_hash = hash;
  const std::string comment = "config_hash=" + hash;
  const MetricRegistry registry = default_metric_registry();

  stage("setup", [&] {
    cfg.validate();
    if (manifest.output_dir.empty()) throw Error(ErrorCode::kInvalidArgument, "no output directory");
    std::error_code ec;
    std::filesystem::create_directories(manifest.output_dir, ec);
    if (ec) throw Error(ErrorCode::kIoError, "cannot create " + manifest.output_dir.string() + ": " + ec.message());
    return 0;
  });
  BundleWriter out(manifest.output_dir, summary);

  stage("manifest", [&] {
    ordered_json root;
    root["tool_version"] = std::string(kToolVersion);
    root["config_hash"] = hash;
    root["mode"] = std::string(to_string(manifest.mode));
    root["config"] = config_json(cfg);
    ordered_json inputs;
    std::vector<std::string> datasets;
    for (const auto& p : manifest.dataset_manifests) datasets.push_back(p.generic_string());
    inputs["datasets"] = datasets;
    inputs["features"] = manifest.features_csv.generic_string();
    inputs["domains"] = manifest.domains;
    inputs["performance"] = manifest.performance_csv.generic_string();
    root["inputs"] = std::move(inputs);
    root["output_dir"] = manifest.output_dir.generic_string();
    std::vector<std::string> grid;
    for (const auto& g : manifest.grid) grid.push_back(g.describe());
    root["grid"] = grid;
    root["allow_missing"] = options.allow_missing;
    root["top_k"] = options.top_k;
    out.write("run_manifest.json", root.dump(2) + "\n");
    return 0;
  });

  // ingest
  std::vector<MLCDataset> datasets;
  std::map<std::string, std::string> domain_of = manifest.domains;
  MetaFeatureMatrix raw_features;
  std::vector<std::string> warnings;
  auto table = stage("ingest", [&] {
    PerformanceTable t = load_performance_table(manifest.performance_csv, registry);
    if (!manifest.dataset_manifests.empty()) {
      for (const auto& p : manifest.dataset_manifests) datasets.push_back(load_dataset(p));
      for (const auto& d : datasets) {
        auto [it, inserted] = domain_of.emplace(d.id, d.domain);
        if (!inserted && it->second != d.domain)
          throw Error(ErrorCode::kInvalidArgument, "conflicting domains for dataset '" + d.id + "'");
      }
    } else {
      raw_features = load_feature_csv(manifest.features_csv);
    }
    return t;
  });

  if (!datasets.empty()) {
    raw_features = stage("features", [&] {
      std::vector<MetaFeatureVector> vectors(datasets.size());
      parallel_for(datasets.size(), options.jobs,
                   [&](std::size_t i) { vectors[i] = compute_metafeatures(datasets[i], cfg); });
      for (const auto& v : vectors)
        for (const auto& w : v.warnings) warnings.push_back(v.dataset_id + ": " + w);
      return assemble_matrix(vectors);
    });
  }

  const ValidationReport join = stage("validate", [&] {
    ValidationReport report = validate_join(raw_features.rows, table, options.allow_missing);
    for (const auto& id : report.common_ids)
      if (auto it = domain_of.find(id); it == domain_of.end() || it->second.empty())
        throw Error(ErrorCode::kInvalidArgument, "dataset '" + id + "' has no domain tag");
    for (const auto& id : report.feature_only_ids) warnings.push_back(id + ": no performance rows, not used");
    for (const auto& id : report.performance_only_ids) warnings.push_back(id + ": no meta-features, not used");
    for (const auto& [metric, ids] : report.excluded)
      for (const auto& id : ids) warnings.push_back(id + ": incomplete performance for " + metric);
    return report;
  });
  const PerformanceTable corpus = restrict_table(table, join.common_ids);

  const MetaFeatureMatrix features = stage("prune", [&] {
    MetaFeatureMatrix pruned =
        prune_correlated(restrict_rows(raw_features, join.common_ids), cfg.correlation_threshold_features);
    out.write("features.csv", format_feature_csv(pruned, comment));
    out.write("drop_log.csv", format_drop_log(pruned.drop_log, comment));
    std::string log = "# " + comment + "\n";
    for (const auto& w : warnings) log += w + "\n";
    out.write("warnings.txt", log);
    return pruned;
  });

  const AlgorithmPortfolio portfolio = stage("portfolio", [&] {
    AlgorithmPortfolio p = build_portfolio(corpus, corpus.metrics(), registry, cfg);
    out.write("portfolio.json", format_portfolio(p, cfg, corpus, hash));
    return p;
  });

  const LooOptions loo_options{manifest.grid, options.jobs};
  std::map<Mode, LooResult> loo;
  stage("train", [&] {
    for (Mode mode : {Mode::kStr, Mode::kMtr})
      loo.emplace(mode, loo_predictions(features, corpus, portfolio, corpus.metrics(), mode, cfg, loo_options));
    const LooResult& primary = loo.at(manifest.mode);
    out.write("predictions.csv", format_predictions(primary.predictions, comment));
    out.write("folds.csv", format_folds(primary.folds, comment));
    return 0;
  });

  std::map<Mode, std::map<std::string, Assignment>> selections;
  std::map<Mode, SelectionReport> reports;
  stage("select", [&] {
    for (const auto& [mode, result] : loo) selections[mode] = select(result.predictions, registry, portfolio);
    return 0;
  });

  stage("evaluate", [&] {
    for (const auto& [mode, sel] : selections)
      reports[mode] = build_selection_report(sel, corpus, registry, portfolio, mode, hash);
    out.write("selection_report.json", format_selection_report(reports.at(manifest.mode)));
    const std::vector<const SelectionReport*> both{&reports.at(Mode::kStr), &reports.at(Mode::kMtr)};
    const Heatmap heatmap = build_heatmap(both);
    out.write("macro_f1_heatmap.csv", format_heatmap(heatmap, comment));
    out.write("macro_f1_heatmap.svg", render_heatmap_svg(heatmap, hash));
    out.write("regret_boxplots.csv", format_regret_boxplots(both, comment));
    return 0;
  });

  stage("explain", [&] {
    const auto explanations = selector_shap(selections.at(manifest.mode), loo.at(manifest.mode).models, features);
    out.write("shap.csv", format_explanations(explanations, comment));
    std::map<std::string, std::vector<ShapExplanation>> by_metric;
    for (const auto& e : explanations) by_metric[e.metric].push_back(e);
    std::map<std::string, DomainAnalysis> analyses;
    for (const auto& [metric, group] : by_metric) {
      const auto ranking = summary_ranking(group);
      out.write("shap_summary_" + safe_file_part(metric) + ".svg",
                render_summary_svg(ranking, "SHAP summary: " + metric, hash));
      analyses[metric] = domain_topk(group, domain_of, options.top_k);
    }
    out.write("domain_topk.json", format_domain_analysis(analyses, hash));
    return 0;
  });

  return summary;
}

}  // namespace mlcas
