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
#include "mlcas/selection.hpp"
#include "test_util.hpp"

namespace mlcas {
namespace {

const MetricRegistry& registry() {
  static const MetricRegistry reg = default_metric_registry();
  return reg;
}

MetaFeatureMatrix features_for(const std::vector<std::string>& ids, std::size_t cols, unsigned seed) {
  MetaFeatureMatrix m;
  m.rows = ids;
  for (std::size_t c = 0; c < cols; ++c) m.cols.push_back("f" + std::to_string(c));
  m.data = testing::random_matrix(ids.size(), cols, seed);
  return m;
}

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("d" + std::to_string(i));
  return out;
}

LooOptions small_grid() {
  ForestParams p;
  p.n_estimators = 5;
  LooOptions o;
  o.grid = {p};
  return o;
}

TEST(Portfolio, CountsWinsPerMetric) {
  PerformanceTable t;
  for (int d = 0; d < 12; ++d) {
    const std::string id = "d" + std::to_string(d);
    t.set(id, "A", "auroc", d < 10 ? 0.9 : 0.5);
    t.set(id, "B", "auroc", d < 10 ? 0.5 : 0.9);
  }
  const auto p = build_portfolio(t, t.metrics(), registry(), RunConfig{});
  EXPECT_EQ(p.algorithms, (std::vector<std::string>{"A"}));
  EXPECT_EQ(p.wins("A", "auroc"), 10);
  EXPECT_EQ(p.wins("B", "auroc"), 2);
}

TEST(Portfolio, TiesAwardEveryTiedAlgorithm) {
  PerformanceTable t;
  for (int d = 0; d < 3; ++d) {
    t.set("d" + std::to_string(d), "A", "one_error", 0.2);
    t.set("d" + std::to_string(d), "B", "one_error", 0.2);
    t.set("d" + std::to_string(d), "C", "one_error", 0.3);
  }
  RunConfig cfg;
  cfg.min_wins = 3;
  const auto p = build_portfolio(t, t.metrics(), registry(), cfg);
  EXPECT_EQ(p.algorithms, (std::vector<std::string>{"A", "B"}));
}

TEST(Portfolio, EmptyPortfolio) {
  PerformanceTable t;
  t.set("d0", "A", "auroc", 0.9);
  t.set("d0", "B", "auroc", 0.5);
  try {
    build_portfolio(t, t.metrics(), registry(), RunConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyPortfolio);
  }
}

TEST(Loo, StrStructureAndHygiene) {
  const auto names = ids(3);
  PerformanceTable t;
  for (const auto& d : names) {
    t.set(d, "A", "auroc", 0.5 + 0.1 * static_cast<double>(d[1] - '0'));
    t.set(d, "B", "auroc", 0.9 - 0.1 * static_cast<double>(d[1] - '0'));
  }
  AlgorithmPortfolio p{{"A", "B"}, {}};
  const std::vector<std::string> metrics{"auroc"};
  const auto r = loo_predictions(features_for(names, 2, 1), t, p, metrics, Mode::kStr, RunConfig{}, small_grid());
  EXPECT_EQ(r.predictions.entries().size(), 6u);
  ASSERT_EQ(r.folds.size(), 6u);
  for (const auto& f : r.folds) {
    EXPECT_EQ(f.training_ids.size(), 2u);
    EXPECT_EQ(std::count(f.training_ids.begin(), f.training_ids.end(), f.held_out), 0);
  }
  EXPECT_EQ(r.models.size(), 6u);
  EXPECT_EQ(r.errors.size(), 6u);
}

TEST(Loo, MtrTrainsOneForestPerAlgorithmAndFold) {
  const auto names = ids(5);
  const auto& metrics = registry().specs();
  std::vector<std::string> metric_names;
  for (const auto& m : metrics) metric_names.push_back(m.name);
  PerformanceTable t;
  std::vector<std::string> algs;
  for (int a = 0; a < 8; ++a) algs.push_back("A" + std::to_string(a));
  std::mt19937_64 gen(3);
  for (const auto& d : names)
    for (const auto& a : algs)
      for (const auto& m : metric_names) t.set(d, a, m, static_cast<double>(gen() % 1000) / 1000.0);
  AlgorithmPortfolio p{algs, {}};
  const auto r =
      loo_predictions(features_for(names, 3, 2), t, p, metric_names, Mode::kMtr, RunConfig{}, small_grid());
  EXPECT_EQ(r.models.size(), 8u * names.size());
  EXPECT_EQ(r.folds.size(), 8u * names.size());
  EXPECT_EQ(r.predictions.entries().size(), names.size() * 8u * 6u);
  for (const auto& [key, forest] : r.models.models()) EXPECT_EQ(forest.n_targets(), 6u);
}

TEST(Loo, ConstantTargetPredictsConstant) {
  const auto names = ids(6);
  PerformanceTable t;
  for (const auto& d : names) {
    t.set(d, "A", "auroc", 0.5);
    t.set(d, "B", "auroc", 0.5);
  }
  AlgorithmPortfolio p{{"A", "B"}, {}};
  const std::vector<std::string> metrics{"auroc"};
  RunConfig cfg;
  cfg.inner_cv_folds = 2;
  LooOptions o = small_grid();
  o.grid.push_back(o.grid.front());
  o.grid.back().max_depth = 2;
  const auto r = loo_predictions(features_for(names, 2, 3), t, p, metrics, Mode::kStr, cfg, o);
  for (const auto& [key, v] : r.predictions.entries()) EXPECT_EQ(v, 0.5);
  for (const auto& [key, mse] : r.mse) EXPECT_EQ(mse, 0.0);
}

TEST(Loo, ParallelScheduleDoesNotMatter) {
  const auto names = ids(7);
  PerformanceTable t;
  std::mt19937_64 gen(4);
  for (const auto& d : names)
    for (const char* a : {"A", "B", "C"})
      for (const char* m : {"auroc", "one_error"}) t.set(d, a, m, static_cast<double>(gen() % 1000) / 1000.0);
  AlgorithmPortfolio p{{"A", "B", "C"}, {}};
  const std::vector<std::string> metrics{"auroc", "one_error"};
  LooOptions seq = small_grid();
  seq.grid.push_back(seq.grid.front());
  seq.grid.back().max_features = MaxFeatures::kSqrt;
  LooOptions par = seq;
  par.jobs = 3;
  const auto f = features_for(names, 4, 5);
  for (Mode mode : {Mode::kStr, Mode::kMtr}) {
    const auto a = loo_predictions(f, t, p, metrics, mode, RunConfig{}, seq);
    const auto b = loo_predictions(f, t, p, metrics, mode, RunConfig{}, par);
    EXPECT_EQ(a.predictions.entries(), b.predictions.entries());
    EXPECT_EQ(select(a.predictions, registry(), p), select(b.predictions, registry(), p));
  }
}

TEST(Loo, MissingCellsExcludePerMetric) {
  const auto names = ids(4);
  PerformanceTable t;
  for (const auto& d : names)
    for (const char* a : {"A", "B"}) {
      t.set(d, a, "auroc", 0.5);
      if (!(d == "d2" && std::string(a) == "B")) t.set(d, a, "one_error", 0.5);
    }
  AlgorithmPortfolio p{{"A", "B"}, {}};
  const std::vector<std::string> metrics{"auroc", "one_error"};
  const auto str = loo_predictions(features_for(names, 2, 6), t, p, metrics, Mode::kStr, RunConfig{}, small_grid());
  EXPECT_EQ(str.excluded.count("auroc"), 0u);
  EXPECT_EQ(str.excluded.at("one_error"), (std::vector<std::string>{"d2"}));
  EXPECT_TRUE(str.predictions.get("d2", "A", "auroc"));
  EXPECT_FALSE(str.predictions.get("d2", "A", "one_error"));
  const auto mtr = loo_predictions(features_for(names, 2, 6), t, p, metrics, Mode::kMtr, RunConfig{}, small_grid());
  EXPECT_FALSE(mtr.predictions.get("d2", "A", "auroc"));
}

PredictionsTable predictions(std::initializer_list<std::tuple<std::string, std::string, std::string, double>> rows) {
  PredictionsTable t;
  for (const auto& [d, a, m, v] : rows) t.set(d, a, m, v);
  return t;
}

TEST(Select, HigherIsBetter) {
  const AlgorithmPortfolio p{{"A", "B"}, {}};
  const auto s = select(predictions({{"d", "A", "auroc", 0.9}, {"d", "B", "auroc", 0.8}}), registry(), p);
  EXPECT_EQ(s.at("auroc").at("d"), "A");
}

TEST(Select, LowerIsBetter) {
  const AlgorithmPortfolio p{{"A", "B"}, {}};
  const auto s = select(predictions({{"d", "A", "one_error", 0.2}, {"d", "B", "one_error", 0.3}}), registry(), p);
  EXPECT_EQ(s.at("one_error").at("d"), "A");
}

TEST(Select, TiesGoToPortfolioOrder) {
  const AlgorithmPortfolio p{{"B", "A"}, {}};
  const auto s = select(predictions({{"d", "A", "auroc", 0.5}, {"d", "B", "auroc", 0.5}}), registry(), p);
  EXPECT_EQ(s.at("auroc").at("d"), "B");
}

TEST(Select, MonotoneTransformInvariance) {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const AlgorithmPortfolio p{{"A", "B", "C", "D"}, {}};
  PredictionsTable raw, warped;
  for (int d = 0; d < 40; ++d)
    for (const auto& a : p.algorithms) {
      const double v = u(gen);
      raw.set("d" + std::to_string(d), a, "auroc", v);
      warped.set("d" + std::to_string(d), a, "auroc", std::exp(3.0 * v) + std::pow(v, 3));
    }
  EXPECT_EQ(select(raw, registry(), p), select(warped, registry(), p));
}

TEST(Select, MissingPredictionThrows) {
  const AlgorithmPortfolio p{{"A", "B"}, {}};
  EXPECT_THROW(select(predictions({{"d", "A", "auroc", 0.9}}), registry(), p), Error);
}

TEST(Baselines, VbsAndSbs) {
  PerformanceTable t;
  t.set("d0", "A", "auroc", 0.7);
  t.set("d0", "B", "auroc", 0.6);
  t.set("d1", "A", "auroc", 0.7);
  t.set("d1", "B", "auroc", 0.6);
  t.set("d0", "A", "one_error", 0.2);
  t.set("d0", "B", "one_error", 0.3);
  t.set("d1", "A", "one_error", 0.2);
  t.set("d1", "B", "one_error", 0.3);
  const std::vector<std::string> algs{"A", "B"}, ds{"d0", "d1"};
  EXPECT_EQ(sbs(t, "auroc", registry(), algs, ds), "A");
  EXPECT_EQ(sbs(t, "one_error", registry(), algs, ds), "A");
  const auto v = vbs(t, "auroc", registry(), algs, ds);
  EXPECT_EQ(v.at("d0"), "A");
  EXPECT_EQ(v.at("d1"), "A");
  const std::vector<std::string> single{"B"};
  EXPECT_EQ(vbs(t, "auroc", registry(), single, ds).at("d0"), "B");
}

TEST(Baselines, TiesGoToTheEarlierAlgorithm) {
  PerformanceTable t;
  t.set("d0", "A", "auroc", 0.5);
  t.set("d0", "B", "auroc", 0.5);
  const std::vector<std::string> algs{"B", "A"}, ds{"d0"};
  EXPECT_EQ(vbs(t, "auroc", registry(), algs, ds).at("d0"), "B");
  EXPECT_EQ(sbs(t, "auroc", registry(), algs, ds), "B");
}

Assignment assign(const std::vector<std::string>& labels) {
  Assignment a;
  for (std::size_t i = 0; i < labels.size(); ++i) a["d" + std::to_string(i)] = labels[i];
  return a;
}

TEST(MacroF1, Examples) {
  EXPECT_EQ(selector_macro_f1(assign({"A", "B", "A"}), assign({"A", "B", "A"})), 1.0);
  // Oracle: scikit-learn f1_score(average="macro") over the union of labels.
  EXPECT_NEAR(selector_macro_f1(assign({"A", "A", "A", "A"}), assign({"A", "A", "A", "B"})), 3.0 / 7.0, 1e-15);
  EXPECT_EQ(selector_macro_f1(assign({"A", "A"}), assign({"A", "A"})), 1.0);
  EXPECT_NEAR(selector_macro_f1(assign({"A", "C", "C", "B", "B", "D", "A"}), assign({"A", "B", "C", "A", "B", "C", "A"})),
              0.45, 1e-15);
}

TEST(MacroF1, RelabelingInvariance) {
  std::mt19937_64 gen(10);
  const std::vector<std::string> names{"A", "B", "C", "D"}, renamed{"zeta", "alpha", "Q", "m"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> s, t, s2, t2;
    for (int i = 0; i < 15; ++i) {
      const std::size_t a = gen() % 4, b = gen() % 4;
      s.push_back(names[a]);
      t.push_back(names[b]);
      s2.push_back(renamed[a]);
      t2.push_back(renamed[b]);
    }
    EXPECT_DOUBLE_EQ(selector_macro_f1(assign(s), assign(t)), selector_macro_f1(assign(s2), assign(t2)));
  }
}

TEST(Quantile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(quantile({0.0, 0.1, 0.2, 0.3, 0.4}, 0.5), 0.2);
  // numpy.percentile(method="linear") reference.
  const std::vector<double> v{0.31, 0.02, 0.5, 0.11, 0.27, 0.08};
  const double expected[5] = {0.02, 0.0875, 0.19, 0.3, 0.5};
  const double p[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(quantile(v, p[i]), expected[i], 1e-15);
  const auto b = box_stats(v);
  EXPECT_NEAR(b.q1, 0.0875, 1e-15);
  EXPECT_NEAR(b.mean, (0.31 + 0.02 + 0.5 + 0.11 + 0.27 + 0.08) / 6.0, 1e-15);
}

TEST(Regret, DirectArithmetic) {
  PerformanceTable t;
  t.set("d0", "A", "auroc", 0.8);
  t.set("d0", "B", "auroc", 0.9);
  t.set("d1", "A", "auroc", 0.6);
  t.set("d1", "B", "auroc", 0.5);
  const std::vector<std::string> algs{"A", "B"};
  const auto r = regret_table(assign({"A", "A"}), t, "auroc", registry(), algs);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_NEAR(r.rows[0].regret, 0.1, 1e-15);
  EXPECT_EQ(r.rows[1].regret, 0.0);
  EXPECT_EQ(r.rows[0].vbs, "B");
}

TEST(Regret, VbsSelectionHasZeroRegret) {
  std::mt19937_64 gen(12);
  PerformanceTable t;
  const std::vector<std::string> algs{"A", "B", "C"};
  std::vector<std::string> ds;
  for (int d = 0; d < 20; ++d) {
    ds.push_back("d" + std::to_string(d));
    for (const auto& a : algs) t.set(ds.back(), a, "hamming_loss", static_cast<double>(gen() % 100) / 100.0);
  }
  const auto best = vbs(t, "hamming_loss", registry(), algs, ds);
  const auto r = regret_table(best, t, "hamming_loss", registry(), algs);
  for (const auto& row : r.rows) EXPECT_EQ(row.regret, 0.0);
  EXPECT_EQ(r.regret.max, 0.0);
  EXPECT_EQ(r.macro_f1, 1.0);
  // Any selection within the portfolio is bounded by the worst constant choice.
  Assignment random;
  for (const auto& d : ds) random[d] = algs[gen() % 3];
  const auto rr = regret_table(random, t, "hamming_loss", registry(), algs);
  for (const auto& row : rr.rows) {
    double worst = 0.0;
    for (const auto& a : algs) worst = std::max(worst, std::abs(t.at(row.dataset, a, "hamming_loss") - row.y_vbs));
    EXPECT_GE(row.regret, 0.0);
    EXPECT_LE(row.regret, worst);
  }
}

SelectionReport sample_report(const Assignment& chosen) {
  PerformanceTable t;
  const std::vector<std::string> algs{"A", "B"};
  for (int d = 0; d < 4; ++d)
    for (const char* m : {"auroc", "one_error"}) {
      t.set("d" + std::to_string(d), "A", m, 0.1 * d + 0.05);
      t.set("d" + std::to_string(d), "B", m, 0.4 - 0.1 * d);
    }
  SelectionReport r;
  r.config_hash = "h";
  r.portfolio = algs;
  for (const char* m : {"auroc", "one_error"}) r.metrics.push_back(regret_table(chosen, t, m, registry(), algs));
  return r;
}

TEST(Report, JsonRoundTrip) {
  const auto r = sample_report(assign({"A", "B", "A", "B"}));
  const std::string text = format_selection_report(r);
  EXPECT_EQ(format_selection_report(parse_selection_report(text)), text);
}

TEST(Compare, SelfHasZeroDeltas) {
  const auto r = sample_report(assign({"A", "B", "A", "B"}));
  for (const auto& c : compare_reports(r, r)) {
    EXPECT_EQ(c.macro_f1_delta, 0.0);
    EXPECT_EQ(c.mean_regret_delta, 0.0);
    EXPECT_TRUE(c.changes.empty());
  }
}

TEST(Compare, DeltasMatchRecomputation) {
  const auto a = sample_report(assign({"A", "B", "A", "B"}));
  const auto b = sample_report(assign({"B", "B", "B", "A"}));
  const auto diff = compare_reports(a, b);
  ASSERT_EQ(diff.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(diff[i].macro_f1_delta, b.metrics[i].macro_f1 - a.metrics[i].macro_f1);
    EXPECT_EQ(diff[i].mean_regret_delta, b.metrics[i].regret.mean - a.metrics[i].regret.mean);
    EXPECT_EQ(diff[i].changes.size(), 3u);
  }
}

TEST(Compare, MetricSetMismatch) {
  const auto a = sample_report(assign({"A", "B", "A", "B"}));
  auto b = a;
  b.metrics.pop_back();
  try {
    compare_reports(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMetricSetMismatch);
  }
}

TEST(Predictions, CsvRoundTrip) {
  const auto p = predictions({{"d1", "A", "auroc", 0.1 + 0.2}, {"d0", "B", "one_error", 1.0 / 3.0}});
  const auto back = parse_predictions(format_predictions(p, "config_hash=x"), Mode::kStr);
  EXPECT_EQ(back.entries(), p.entries());
}

TEST(ModelStore, MissingModel) {
  ModelStore s(Mode::kStr);
  try {
    s.find("A", "auroc", "d0");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kModelNotFound);
  }
}

}  // namespace
}  // namespace mlcas
