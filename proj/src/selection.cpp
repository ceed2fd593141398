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

#include "mlcas/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "json.hpp"
#include "mlcas/error.hpp"
#include "mlcas/io.hpp"

namespace mlcas {

using ordered_json = nlohmann::ordered_json;

int AlgorithmPortfolio::wins(const std::string& algorithm, const std::string& metric) const {
  auto it = win_counts.find({algorithm, metric});
  return it == win_counts.end() ? 0 : it->second;
}

AlgorithmPortfolio build_portfolio(const PerformanceTable& table, std::span<const std::string> metrics,
                                   const MetricRegistry& registry, const RunConfig& config) {
  const auto& algorithms = table.algorithms();
  AlgorithmPortfolio counts;
  for (const auto& a : algorithms)
    for (const auto& m : metrics) counts.win_counts[{a, m}] = 0;

  for (const auto& m : metrics) {
    registry.at(m);
    for (const auto& d : table.datasets()) {
      if (!table.complete(d, m, algorithms)) continue;
      double best = table.at(d, algorithms.front(), m);
      for (const auto& a : algorithms) {
        const double v = table.at(d, a, m);
        if (registry.better(m, v, best)) best = v;
      }
      for (const auto& a : algorithms)
        if (table.at(d, a, m) == best) ++counts.win_counts[{a, m}];
    }
  }
  for (const auto& a : algorithms) {
    bool keep = std::any_of(metrics.begin(), metrics.end(),
                            [&](const std::string& m) { return counts.wins(a, m) >= config.min_wins; });
    if (keep) counts.algorithms.push_back(a);
  }
  if (counts.algorithms.empty())
    throw Error(ErrorCode::kEmptyPortfolio,
                "no algorithm is best on at least " + std::to_string(config.min_wins) + " datasets for any metric");
  return counts;
}

void PredictionsTable::set(const std::string& dataset, const std::string& algorithm, const std::string& metric,
                           double value) {
  if (!std::isfinite(value))
    throw Error(ErrorCode::kNonFiniteValue, "prediction for (" + dataset + ", " + algorithm + ", " + metric + ")");
  if (!entries_.emplace(Key{dataset, algorithm, metric}, value).second)
    throw Error(ErrorCode::kDuplicateKey, "prediction (" + dataset + ", " + algorithm + ", " + metric + ") given twice");
}

std::optional<double> PredictionsTable::get(const std::string& dataset, const std::string& algorithm,
                                            const std::string& metric) const {
  auto it = entries_.find(Key{dataset, algorithm, metric});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> PredictionsTable::datasets() const {
  std::set<std::string> out;
  for (const auto& [key, _] : entries_) out.insert(key[0]);
  return {out.begin(), out.end()};
}

std::vector<std::string> PredictionsTable::metrics() const {
  std::set<std::string> out;
  for (const auto& [key, _] : entries_) out.insert(key[2]);
  return {out.begin(), out.end()};
}

std::string format_predictions(const PredictionsTable& predictions, std::string_view comment) {
  std::string out;
  if (!comment.empty()) out += "# " + std::string(comment) + "\n";
  out += "dataset,algorithm,metric,predicted\n";
  for (const auto& [key, value] : predictions.entries())
    out += io::csv_row({key[0], key[1], key[2], io::format_double(value)});
  return out;
}

PredictionsTable parse_predictions(std::string_view text, Mode mode, const std::string& source_name) {
  io::CsvTable csv = io::parse_csv(text, source_name);
  if (csv.header != std::vector<std::string>{"dataset", "algorithm", "metric", "predicted"})
    throw Error(ErrorCode::kMalformedCsv, source_name + ": header must be dataset,algorithm,metric,predicted");
  PredictionsTable out(mode);
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    auto v = io::parse_double(row[3]);
    if (!v) throw Error(ErrorCode::kMalformedCsv, source_name + ":" + std::to_string(csv.lines[r]) + ": bad value");
    out.set(row[0], row[1], row[2], *v);
  }
  return out;
}

void ModelStore::add(const std::string& algorithm, const std::string& metric, const std::string& held_out,
                     RegressionForest forest) {
  std::array<std::string, 3> key{algorithm, mode_ == Mode::kMtr ? std::string() : metric, held_out};
  if (!models_.emplace(std::move(key), std::move(forest)).second)
    throw Error(ErrorCode::kDuplicateKey, "model for (" + algorithm + ", " + metric + ", " + held_out + ") exists");
}

ModelStore::Ref ModelStore::find(const std::string& algorithm, const std::string& metric,
                                 const std::string& held_out) const {
  std::array<std::string, 3> key{algorithm, mode_ == Mode::kMtr ? std::string() : metric, held_out};
  auto it = models_.find(key);
  if (it == models_.end())
    throw Error(ErrorCode::kModelNotFound, "no model for (" + algorithm + ", " + metric + ", held out " + held_out + ")");
  const auto& targets = it->second.target_names;
  auto t = std::find(targets.begin(), targets.end(), metric);
  if (t == targets.end())
    throw Error(ErrorCode::kModelNotFound, "model for " + algorithm + " does not predict " + metric);
  return {&it->second, static_cast<std::size_t>(t - targets.begin())};
}

namespace {

struct Experiment {
  std::vector<std::string> targets;  // one metric (STR) or all (MTR)
  std::vector<std::string> datasets;
};

struct LooTask {
  std::size_t experiment;
  std::size_t held_out;  // index into the experiment's datasets
  std::string algorithm;
};

struct LooTaskResult {
  FoldRecord record;
  RegressionForest forest;
  std::vector<double> predicted;
};

}  // namespace

LooResult loo_predictions(const MetaFeatureMatrix& features, const PerformanceTable& table,
                          const AlgorithmPortfolio& portfolio, std::span<const std::string> metrics, Mode mode,
                          const RunConfig& config, const LooOptions& options) {
  if (metrics.empty()) throw Error(ErrorCode::kInvalidArgument, "no metrics to predict");
  if (portfolio.algorithms.empty()) throw Error(ErrorCode::kEmptyPortfolio, "empty portfolio");
  if (options.grid.empty()) throw Error(ErrorCode::kInvalidArgument, "empty hyperparameter grid");

  LooResult result{PredictionsTable(mode), {}, {}, {}, {}, ModelStore(mode)};
  std::set<std::string> feature_ids(features.rows.begin(), features.rows.end());

  std::vector<Experiment> experiments;
  if (mode == Mode::kStr) {
    for (const auto& m : metrics) experiments.push_back({{m}, {}});
  } else {
    experiments.push_back({{metrics.begin(), metrics.end()}, {}});
  }
  for (auto& exp : experiments) {
    for (const auto& d : table.datasets()) {
      if (!feature_ids.count(d)) continue;
      bool complete = std::all_of(exp.targets.begin(), exp.targets.end(), [&](const std::string& m) {
        return table.complete(d, m, portfolio.algorithms);
      });
      if (complete) {
        exp.datasets.push_back(d);
      } else {
        for (const auto& m : exp.targets) result.excluded[m].push_back(d);
      }
    }
    if (exp.datasets.size() < 2)
      throw Error(ErrorCode::kEmptyTrainingSet, "fewer than 2 usable datasets for leave-one-out");
  }

  std::vector<LooTask> tasks;
  for (std::size_t e = 0; e < experiments.size(); ++e)
    for (std::size_t h = 0; h < experiments[e].datasets.size(); ++h)
      for (const auto& a : portfolio.algorithms) tasks.push_back({e, h, a});

  std::vector<LooTaskResult> outputs(tasks.size());
  parallel_for(tasks.size(), options.jobs, [&](std::size_t i) {
    const LooTask& task = tasks[i];
    const Experiment& exp = experiments[task.experiment];
    const std::string& held_out = exp.datasets[task.held_out];

    std::vector<std::string> training_ids;
    for (std::size_t k = 0; k < exp.datasets.size(); ++k)
      if (k != task.held_out) training_ids.push_back(exp.datasets[k]);

    std::vector<std::size_t> rows;
    for (const auto& id : training_ids) rows.push_back(features.row_index(id));
    Matrix x = features.data.select_rows(rows);
    Matrix y(training_ids.size(), exp.targets.size());
    for (std::size_t r = 0; r < training_ids.size(); ++r)
      for (std::size_t k = 0; k < exp.targets.size(); ++k)
        y(r, k) = table.at(training_ids[r], task.algorithm, exp.targets[k]);

    std::string label = std::string(to_string(mode)) + "|" + held_out + "|" + task.algorithm;
    if (mode == Mode::kStr) label += "|" + exp.targets.front();
    const std::uint64_t tid = mlcas::task_id(label);

    LooTaskResult& out = outputs[i];
    out.record.held_out = held_out;
    out.record.algorithm = task.algorithm;
    out.record.metric = mode == Mode::kStr ? exp.targets.front() : std::string();
    out.record.training_ids = training_ids;

    const std::size_t folds = std::min<std::size_t>(static_cast<std::size_t>(config.inner_cv_folds), training_ids.size());
    if (options.grid.size() == 1 || folds < 2) {
      out.record.chosen = options.grid.front();
    } else {
      GridSearchResult search = grid_search(x, y, options.grid, folds, config.base_seed, tid);
      out.record.chosen = search.best;
      out.record.cv_mse = search.report.scores[search.report.best_index].mse;
    }
    out.forest = fit_forest(x, y, out.record.chosen, config.base_seed, derive_seed(tid, 0, 0), features.cols,
                            exp.targets);
    out.predicted = predict(out.forest, features.data.row(features.row_index(held_out)));
  });

  std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> sums;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const Experiment& exp = experiments[tasks[i].experiment];
    LooTaskResult& out = outputs[i];
    for (std::size_t k = 0; k < exp.targets.size(); ++k) {
      const std::string& m = exp.targets[k];
      const double truth = table.at(out.record.held_out, out.record.algorithm, m);
      const double err = (out.predicted[k] - truth) * (out.predicted[k] - truth);
      result.predictions.set(out.record.held_out, out.record.algorithm, m, out.predicted[k]);
      result.errors.push_back({out.record.held_out, out.record.algorithm, m, err});
      auto& acc = sums[{out.record.algorithm, m}];
      acc.first += err;
      acc.second += 1;
    }
    result.models.add(out.record.algorithm, out.record.metric, out.record.held_out, std::move(out.forest));
    result.folds.push_back(std::move(out.record));
  }
  for (const auto& [key, acc] : sums) result.mse[key] = acc.first / static_cast<double>(acc.second);
  return result;
}

namespace {

std::size_t best_index(const std::vector<double>& values, const std::string& metric, const MetricRegistry& registry) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (registry.better(metric, values[i], values[best])) best = i;
  return best;
}

}  // namespace

std::map<std::string, Assignment> select(const PredictionsTable& predictions, const MetricRegistry& registry,
                                         const AlgorithmPortfolio& portfolio) {
  std::map<std::string, Assignment> out;
  std::map<std::string, std::set<std::string>> datasets_by_metric;
  for (const auto& [key, _] : predictions.entries()) datasets_by_metric[key[2]].insert(key[0]);
  for (const auto& [metric, datasets] : datasets_by_metric) {
    registry.at(metric);
    Assignment& chosen = out[metric];
    for (const auto& d : datasets) {
      std::vector<double> values;
      for (const auto& a : portfolio.algorithms) {
        auto v = predictions.get(d, a, metric);
        if (!v) throw Error(ErrorCode::kMissingPerformance, "no prediction for (" + d + ", " + a + ", " + metric + ")");
        values.push_back(*v);
      }
      chosen[d] = portfolio.algorithms[best_index(values, metric, registry)];
    }
  }
  return out;
}

Assignment vbs(const PerformanceTable& table, const std::string& metric, const MetricRegistry& registry,
               std::span<const std::string> algorithms, std::span<const std::string> datasets) {
  if (algorithms.empty()) throw Error(ErrorCode::kInvalidArgument, "no algorithms");
  Assignment out;
  for (const auto& d : datasets) {
    std::vector<double> values;
    for (const auto& a : algorithms) values.push_back(table.at(d, a, metric));
    out[d] = algorithms[best_index(values, metric, registry)];
  }
  return out;
}

std::string sbs(const PerformanceTable& table, const std::string& metric, const MetricRegistry& registry,
                std::span<const std::string> algorithms, std::span<const std::string> datasets) {
  if (algorithms.empty()) throw Error(ErrorCode::kInvalidArgument, "no algorithms");
  if (datasets.empty()) throw Error(ErrorCode::kInvalidArgument, "no datasets");
  std::vector<double> means;
  for (const auto& a : algorithms) {
    double total = 0.0;
    for (const auto& d : datasets) total += table.at(d, a, metric);
    means.push_back(total / static_cast<double>(datasets.size()));
  }
  return algorithms[best_index(means, metric, registry)];
}

double selector_macro_f1(const Assignment& selected, const Assignment& truth) {
  if (selected.size() != truth.size())
    throw Error(ErrorCode::kInvalidArgument, "selection and truth cover different datasets");
  std::set<std::string> classes;
  for (const auto& [d, a] : truth) {
    auto it = selected.find(d);
    if (it == selected.end()) throw Error(ErrorCode::kInvalidArgument, "dataset '" + d + "' has no selection");
    classes.insert(a);
    classes.insert(it->second);
  }
  if (classes.empty()) return 0.0;
  double total = 0.0;
  for (const auto& c : classes) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& [d, t] : truth) {
      const std::string& s = selected.at(d);
      if (s == c && t == c) ++tp;
      else if (s == c) ++fp;
      else if (t == c) ++fn;
    }
    total += 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  }
  return total / static_cast<double>(classes.size());
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw Error(ErrorCode::kInvalidArgument, "quantile of no values");
  std::sort(values.begin(), values.end());
  const double h = p * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

BoxStats box_stats(const std::vector<double>& values) {
  if (values.empty()) return {};
  BoxStats out;
  out.min = *std::min_element(values.begin(), values.end());
  out.max = *std::max_element(values.begin(), values.end());
  out.q1 = quantile(values, 0.25);
  out.median = quantile(values, 0.5);
  out.q3 = quantile(values, 0.75);
  double total = 0.0;
  for (double v : values) total += v;
  out.mean = total / static_cast<double>(values.size());
  return out;
}

MetricSelection regret_table(const Assignment& selected, const PerformanceTable& table, const std::string& metric,
                             const MetricRegistry& registry, std::span<const std::string> algorithms) {
  std::vector<std::string> datasets;
  for (const auto& [d, _] : selected) datasets.push_back(d);
  if (datasets.empty()) throw Error(ErrorCode::kInvalidArgument, "empty selection for metric " + metric);

  MetricSelection out;
  out.metric = metric;
  const Assignment truth = vbs(table, metric, registry, algorithms, datasets);
  out.sbs = sbs(table, metric, registry, algorithms, datasets);

  std::vector<double> regrets, sbs_regrets;
  for (const auto& d : datasets) {
    SelectionRow row;
    row.dataset = d;
    row.selected = selected.at(d);
    row.vbs = truth.at(d);
    row.sbs = out.sbs;
    row.y_selected = table.at(d, row.selected, metric);
    row.y_vbs = table.at(d, row.vbs, metric);
    row.y_sbs = table.at(d, row.sbs, metric);
    row.regret = std::abs(row.y_selected - row.y_vbs);
    row.sbs_regret = std::abs(row.y_sbs - row.y_vbs);
    regrets.push_back(row.regret);
    sbs_regrets.push_back(row.sbs_regret);
    out.rows.push_back(std::move(row));
  }
  out.macro_f1 = selector_macro_f1(selected, truth);
  out.regret = box_stats(regrets);
  out.sbs_regret = box_stats(sbs_regrets);

  for (const auto& a : algorithms) {
    ConstantSelector constant;
    constant.algorithm = a;
    Assignment always;
    std::vector<double> constant_regrets;
    for (const auto& d : datasets) {
      always[d] = a;
      constant_regrets.push_back(std::abs(table.at(d, a, metric) - table.at(d, truth.at(d), metric)));
    }
    constant.macro_f1 = selector_macro_f1(always, truth);
    constant.regret = box_stats(constant_regrets);
    out.constant_selectors.push_back(std::move(constant));
  }
  return out;
}

const MetricSelection& SelectionReport::metric(std::string_view name) const {
  for (const auto& m : metrics)
    if (m.metric == name) return m;
  throw Error(ErrorCode::kUnknownMetric, "report has no metric '" + std::string(name) + "'");
}

namespace {

ordered_json box_json(const BoxStats& box) {
  ordered_json j;
  j["min"] = box.min;
  j["q1"] = box.q1;
  j["median"] = box.median;
  j["q3"] = box.q3;
  j["max"] = box.max;
  j["mean"] = box.mean;
  return j;
}

BoxStats box_from_json(const ordered_json& j) {
  return {j.at("min").get<double>(), j.at("q1").get<double>(),  j.at("median").get<double>(),
          j.at("q3").get<double>(),  j.at("max").get<double>(), j.at("mean").get<double>()};
}

}  // namespace

std::string format_selection_report(const SelectionReport& report) {
  ordered_json root;
  root["mode"] = std::string(to_string(report.mode));
  root["config_hash"] = report.config_hash;
  root["portfolio"] = report.portfolio;
  ordered_json metrics = ordered_json::array();
  for (const auto& m : report.metrics) {
    ordered_json jm;
    jm["metric"] = m.metric;
    jm["sbs"] = m.sbs;
    jm["macro_f1"] = m.macro_f1;
    jm["regret"] = box_json(m.regret);
    jm["sbs_regret"] = box_json(m.sbs_regret);
    ordered_json constants = ordered_json::array();
    for (const auto& c : m.constant_selectors) {
      ordered_json jc;
      jc["algorithm"] = c.algorithm;
      jc["macro_f1"] = c.macro_f1;
      jc["regret"] = box_json(c.regret);
      constants.push_back(std::move(jc));
    }
    jm["constant_selectors"] = std::move(constants);
    ordered_json rows = ordered_json::array();
    for (const auto& r : m.rows) {
      ordered_json jr;
      jr["dataset"] = r.dataset;
      jr["selected"] = r.selected;
      jr["vbs"] = r.vbs;
      jr["sbs"] = r.sbs;
      jr["y_selected"] = r.y_selected;
      jr["y_vbs"] = r.y_vbs;
      jr["y_sbs"] = r.y_sbs;
      jr["regret"] = r.regret;
      jr["sbs_regret"] = r.sbs_regret;
      rows.push_back(std::move(jr));
    }
    jm["datasets"] = std::move(rows);
    metrics.push_back(std::move(jm));
  }
  root["metrics"] = std::move(metrics);
  return root.dump(2) + "\n";
}

SelectionReport parse_selection_report(std::string_view text) {
  try {
    ordered_json root = ordered_json::parse(text);
    SelectionReport report;
    report.mode = parse_mode(root.at("mode").get<std::string>());
    report.config_hash = root.value("config_hash", std::string());
    report.portfolio = root.at("portfolio").get<std::vector<std::string>>();
    for (const auto& jm : root.at("metrics")) {
      MetricSelection m;
      m.metric = jm.at("metric").get<std::string>();
      m.sbs = jm.at("sbs").get<std::string>();
      m.macro_f1 = jm.at("macro_f1").get<double>();
      m.regret = box_from_json(jm.at("regret"));
      m.sbs_regret = box_from_json(jm.at("sbs_regret"));
      for (const auto& jc : jm.at("constant_selectors"))
        m.constant_selectors.push_back(
            {jc.at("algorithm").get<std::string>(), jc.at("macro_f1").get<double>(), box_from_json(jc.at("regret"))});
      for (const auto& jr : jm.at("datasets")) {
        SelectionRow r;
        r.dataset = jr.at("dataset").get<std::string>();
        r.selected = jr.at("selected").get<std::string>();
        r.vbs = jr.at("vbs").get<std::string>();
        r.sbs = jr.at("sbs").get<std::string>();
        r.y_selected = jr.at("y_selected").get<double>();
        r.y_vbs = jr.at("y_vbs").get<double>();
        r.y_sbs = jr.at("y_sbs").get<double>();
        r.regret = jr.at("regret").get<double>();
        r.sbs_regret = jr.at("sbs_regret").get<double>();
        m.rows.push_back(std::move(r));
      }
      report.metrics.push_back(std::move(m));
    }
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedCsv, std::string("selection report: ") + e.what());
  }
}

std::vector<MetricComparison> compare_reports(const SelectionReport& before, const SelectionReport& after) {
  std::set<std::string> a, b;
  for (const auto& m : before.metrics) a.insert(m.metric);
  for (const auto& m : after.metrics) b.insert(m.metric);
  if (a != b) throw Error(ErrorCode::kMetricSetMismatch, "reports cover different metric sets");

  std::vector<MetricComparison> out;
  for (const auto& mb : before.metrics) {
    const MetricSelection& ma = after.metric(mb.metric);
    MetricComparison c;
    c.metric = mb.metric;
    c.macro_f1_before = mb.macro_f1;
    c.macro_f1_after = ma.macro_f1;
    c.macro_f1_delta = ma.macro_f1 - mb.macro_f1;
    c.mean_regret_delta = ma.regret.mean - mb.regret.mean;
    std::map<std::string, std::pair<std::string, std::string>> picks;
    for (const auto& r : mb.rows) picks[r.dataset].first = r.selected;
    for (const auto& r : ma.rows) picks[r.dataset].second = r.selected;
    for (const auto& [d, pair] : picks)
      if (pair.first != pair.second) c.changes.push_back({d, pair.first, pair.second});
    out.push_back(std::move(c));
  }
  return out;
}

std::string format_comparison(const std::vector<MetricComparison>& comparison) {
  ordered_json root = ordered_json::array();
  for (const auto& c : comparison) {
    ordered_json j;
    j["metric"] = c.metric;
    j["macro_f1_before"] = c.macro_f1_before;
    j["macro_f1_after"] = c.macro_f1_after;
    j["macro_f1_delta"] = c.macro_f1_delta;
    j["mean_regret_delta"] = c.mean_regret_delta;
    ordered_json changes = ordered_json::array();
    for (const auto& ch : c.changes) changes.push_back({{"dataset", ch.dataset}, {"before", ch.before}, {"after", ch.after}});
    j["changes"] = std::move(changes);
    root.push_back(std::move(j));
  }
  return root.dump(2) + "\n";
}

}  // namespace mlcas
