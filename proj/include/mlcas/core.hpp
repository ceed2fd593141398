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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace mlcas {

inline constexpr std::string_view kToolVersion = "1.0.0";

enum class Orientation { kHigherIsBetter, kLowerIsBetter };

struct MetricSpec {
  std::string name;
  Orientation orientation = Orientation::kHigherIsBetter;

  friend bool operator==(const MetricSpec&, const MetricSpec&) = default;
};

// Ordered set of metrics with unique names. Immutable once built.
class MetricRegistry {
 public:
  explicit MetricRegistry(std::vector<MetricSpec> specs);

  const std::vector<MetricSpec>& specs() const noexcept { return specs_; }
  std::size_t size() const noexcept { return specs_.size(); }

  // nullptr when absent.
  const MetricSpec* find(std::string_view name) const;
  // Throws Error(kUnknownMetric) when absent.
  const MetricSpec& at(std::string_view name) const;

  // True when `a` is strictly better than `b` under the metric's orientation.
  bool better(std::string_view metric, double a, double b) const;

 private:
  std::vector<MetricSpec> specs_;
};

// The six retained MLC evaluation measures. Losses (one error, Hamming loss)
// are lower-is-better, the rest are gains.
MetricRegistry default_metric_registry();

enum class Mode { kStr, kMtr };

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);

struct RunConfig {
  std::uint64_t base_seed = 0;
  double correlation_threshold_features = 0.75;
  double correlation_threshold_metrics = 0.90;
  int min_wins = 8;
  int inner_cv_folds = 5;
  double chi_square_critical = 6.635;
  double numeric_tolerance = 1e-9;

  // Throws Error(kInvalidConfig).
  void validate() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Flat `key = value` text. Blank lines and `#` comments are ignored; unknown
// or repeated keys are errors. Missing keys keep their defaults.
RunConfig parse_config(std::string_view text);
std::string format_config(const RunConfig& config);
RunConfig load_config(const std::filesystem::path& path);

// 64-bit FNV-1a over the bytes of `label`. Used to name randomized tasks.
std::uint64_t task_id(std::string_view label);

// Seed for stream `index` of task `task` under `base_seed`. A splitmix64
// cascade, so the result depends only on the triple.
std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t task, std::uint64_t index);

// Deterministic random stream. Distributions are implemented here rather than
// taken from <random> so draws are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, bound), bound >= 1. Rejection sampling, no modulo bias.
  std::size_t uniform_index(std::size_t bound);
  // Uniform in [0, 1).
  double uniform();
  // Standard normal via Box-Muller.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Runs fn(i) for i in [0, count). With jobs > 1 the indices are claimed by a
// fixed pool of worker threads; callers write results by index so the outcome
// never depends on scheduling. The first exception thrown is rethrown.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace mlcas
