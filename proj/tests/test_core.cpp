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

#include <atomic>
#include <set>
#include <stdexcept>

#include "mlcas/core.hpp"
#include "mlcas/error.hpp"

namespace mlcas {
namespace {

TEST(MetricRegistry, DefaultHasSixMetrics) {
  const MetricRegistry reg = default_metric_registry();
  EXPECT_EQ(reg.size(), 6u);
}

TEST(MetricRegistry, DefaultOrientations) {
  const MetricRegistry reg = default_metric_registry();
  EXPECT_EQ(reg.at("hamming_loss").orientation, Orientation::kLowerIsBetter);
  EXPECT_EQ(reg.at("one_error").orientation, Orientation::kLowerIsBetter);
  for (const char* gain : {"average_precision", "macro_f1", "auroc", "micro_precision"})
    EXPECT_EQ(reg.at(gain).orientation, Orientation::kHigherIsBetter) << gain;
}

TEST(MetricRegistry, UnknownMetricThrows) {
  const MetricRegistry reg = default_metric_registry();
  EXPECT_EQ(reg.find("coverage"), nullptr);
  try {
    reg.at("coverage");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownMetric);
  }
}

TEST(MetricRegistry, RejectsDuplicateNames) {
  EXPECT_THROW(MetricRegistry({{"a", Orientation::kHigherIsBetter}, {"a", Orientation::kLowerIsBetter}}), Error);
  EXPECT_THROW(MetricRegistry({{"", Orientation::kHigherIsBetter}}), Error);
}

TEST(MetricRegistry, BetterIsStrictAndOriented) {
  const MetricRegistry reg = default_metric_registry();
  EXPECT_TRUE(reg.better("auroc", 0.9, 0.8));
  EXPECT_FALSE(reg.better("auroc", 0.8, 0.8));
  EXPECT_TRUE(reg.better("one_error", 0.2, 0.3));
  EXPECT_FALSE(reg.better("one_error", 0.3, 0.2));
}

TEST(Mode, ParseAndPrint) {
  EXPECT_EQ(parse_mode("str"), Mode::kStr);
  EXPECT_EQ(parse_mode("mtr"), Mode::kMtr);
  EXPECT_EQ(to_string(Mode::kMtr), "mtr");
  EXPECT_THROW(parse_mode("both"), Error);
}

TEST(RunConfig, Defaults) {
  const RunConfig c;
  EXPECT_EQ(c.correlation_threshold_features, 0.75);
  EXPECT_EQ(c.correlation_threshold_metrics, 0.90);
  EXPECT_EQ(c.min_wins, 8);
  EXPECT_EQ(c.inner_cv_folds, 5);
  EXPECT_EQ(c.chi_square_critical, 6.635);
  EXPECT_EQ(c.numeric_tolerance, 1e-9);
  EXPECT_NO_THROW(c.validate());
}

TEST(RunConfig, RoundTripsThroughText) {
  RunConfig c;
  c.base_seed = 18446744073709551615ULL;
  c.correlation_threshold_features = 0.1 + 0.2;
  c.correlation_threshold_metrics = 1.0;
  c.min_wins = 3;
  c.inner_cv_folds = 7;
  c.chi_square_critical = 3.841458820694124;
  c.numeric_tolerance = 1e-12;
  EXPECT_EQ(parse_config(format_config(c)), c);
}

TEST(RunConfig, ParsesCommentsAndPartialKeys) {
  const RunConfig c = parse_config("# comment\n\nmin_wins = 2\n  base_seed=42  \n");
  EXPECT_EQ(c.min_wins, 2);
  EXPECT_EQ(c.base_seed, 42u);
  EXPECT_EQ(c.inner_cv_folds, 5);
}

void expect_config_error(const std::string& text) {
  try {
    parse_config(text);
    FAIL() << "accepted: " << text;
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidConfig) << text;
  }
}

TEST(RunConfig, RejectsBadInput) {
  expect_config_error("no_such_key = 1\n");
  expect_config_error("min_wins = 2\nmin_wins = 3\n");
  expect_config_error("min_wins\n");
  expect_config_error("min_wins = 2.5\n");
  expect_config_error("min_wins = 0\n");
  expect_config_error("inner_cv_folds = 1\n");
  expect_config_error("correlation_threshold_features = 0\n");
  expect_config_error("correlation_threshold_features = 1.5\n");
  expect_config_error("correlation_threshold_metrics = nan\n");
  expect_config_error("base_seed = -1\n");
}

TEST(Seeding, TaskIdIsFnv1a) {
  // FNV-1a 64 reference values.
  EXPECT_EQ(task_id(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(task_id("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(task_id("foobar"), 0x85944171f73967e8ULL);
}

TEST(Seeding, DeriveSeedIsAPureFunctionOfTheTriple) {
  EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
  std::set<std::uint64_t> seen;
  for (std::uint64_t b = 0; b < 4; ++b)
    for (std::uint64_t t = 0; t < 4; ++t)
      for (std::uint64_t i = 0; i < 4; ++i) seen.insert(derive_seed(b, t, i));
  EXPECT_EQ(seen.size(), 64u);
}

TEST(Rng, StreamsAreReproducible) {
  Rng a(99), b(99);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next(), b.next());
}

TEST(Rng, UniformIndexStaysInRange) {
  Rng r(5);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const std::size_t k = r.uniform_index(7);
    ASSERT_LT(k, 7u);
    ++hits[k];
  }
  for (int h : hits) EXPECT_GT(h, 800);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, NormalHasRoughlyUnitMoments) {
  Rng r(11);
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.03);
  EXPECT_NEAR(sq / n, 1.0, 0.05);
}

TEST(Rng, ShuffleIsAPermutation) {
  Rng r(3);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  r.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  for (int jobs : {1, 2, 4}) {
    std::vector<std::atomic<int>> hits(257);
    parallel_for(hits.size(), jobs, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) ASSERT_EQ(h.load(), 1);
  }
}

TEST(ParallelFor, RethrowsWorkerErrors) {
  for (int jobs : {1, 3})
    EXPECT_THROW(parallel_for(50, jobs,
                              [](std::size_t i) {
                                if (i == 17) throw std::runtime_error("boom");
                              }),
                 std::runtime_error);
}

TEST(Error, MessageCarriesCodeName) {
  const Error e(ErrorCode::kDuplicateKey, "x");
  EXPECT_EQ(std::string(e.what()), "DuplicateKey: x");
  EXPECT_EQ(e.code(), ErrorCode::kDuplicateKey);
}

}  // namespace
}  // namespace mlcas
