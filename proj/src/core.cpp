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

#include "mlcas/core.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "mlcas/error.hpp"
#include "mlcas/io.hpp"

namespace mlcas {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kMissingFile: return "MissingFile";
    case ErrorCode::kMalformedManifest: return "MalformedManifest";
    case ErrorCode::kMalformedCsv: return "MalformedCsv";
    case ErrorCode::kLabelColumnNotFound: return "LabelColumnNotFound";
    case ErrorCode::kNonBinaryLabelValue: return "NonBinaryLabelValue";
    case ErrorCode::kUnknownMetric: return "UnknownMetric";
    case ErrorCode::kDuplicateKey: return "DuplicateKey";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kMissingPerformance: return "MissingPerformance";
    case ErrorCode::kDisjointCorpora: return "DisjointCorpora";
    case ErrorCode::kDegenerateLabels: return "DegenerateLabels";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kAllColumnsDropped: return "AllColumnsDropped";
    case ErrorCode::kEmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kTooFewSamplesForFolds: return "TooFewSamplesForFolds";
    case ErrorCode::kMalformedModel: return "MalformedModel";
    case ErrorCode::kEmptyPortfolio: return "EmptyPortfolio";
    case ErrorCode::kModelNotFound: return "ModelNotFound";
    case ErrorCode::kMissingNodeStatistics: return "MissingNodeStatistics";
    case ErrorCode::kTooManyFeatures: return "TooManyFeatures";
    case ErrorCode::kMetricSetMismatch: return "MetricSetMismatch";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

MetricRegistry::MetricRegistry(std::vector<MetricSpec> specs) : specs_(std::move(specs)) {
  std::set<std::string> seen;
  for (const auto& spec : specs_) {
    if (spec.name.empty()) throw Error(ErrorCode::kInvalidArgument, "empty metric name");
    if (!seen.insert(spec.name).second)
      throw Error(ErrorCode::kDuplicateKey, "metric '" + spec.name + "' registered twice");
  }
}

const MetricSpec* MetricRegistry::find(std::string_view name) const {
  for (const auto& spec : specs_)
    if (spec.name == name) return &spec;
  return nullptr;
}

const MetricSpec& MetricRegistry::at(std::string_view name) const {
  if (const auto* spec = find(name)) return *spec;
  throw Error(ErrorCode::kUnknownMetric, "metric '" + std::string(name) + "' is not registered");
}

bool MetricRegistry::better(std::string_view metric, double a, double b) const {
  return at(metric).orientation == Orientation::kHigherIsBetter ? a > b : a < b;
}

MetricRegistry default_metric_registry() {
  return MetricRegistry({
      {"average_precision", Orientation::kHigherIsBetter},
      {"macro_f1", Orientation::kHigherIsBetter},
      {"one_error", Orientation::kLowerIsBetter},
      {"auroc", Orientation::kHigherIsBetter},
      {"hamming_loss", Orientation::kLowerIsBetter},
      {"micro_precision", Orientation::kHigherIsBetter},
  });
}

std::string_view to_string(Mode mode) { return mode == Mode::kStr ? "str" : "mtr"; }

Mode parse_mode(std::string_view text) {
  if (text == "str" || text == "STR") return Mode::kStr;
  if (text == "mtr" || text == "MTR") return Mode::kMtr;
  throw Error(ErrorCode::kInvalidArgument, "mode must be 'str' or 'mtr', got '" + std::string(text) + "'");
}

void RunConfig::validate() const {
  auto in_unit = [](double v) { return v > 0.0 && v <= 1.0; };
  if (!in_unit(correlation_threshold_features))
    throw Error(ErrorCode::kInvalidConfig, "correlation_threshold_features must be in (0,1]");
  if (!in_unit(correlation_threshold_metrics))
    throw Error(ErrorCode::kInvalidConfig, "correlation_threshold_metrics must be in (0,1]");
  if (min_wins < 1) throw Error(ErrorCode::kInvalidConfig, "min_wins must be >= 1");
  if (inner_cv_folds < 2) throw Error(ErrorCode::kInvalidConfig, "inner_cv_folds must be >= 2");
  if (!(chi_square_critical > 0.0) || !std::isfinite(chi_square_critical))
    throw Error(ErrorCode::kInvalidConfig, "chi_square_critical must be positive");
  if (!(numeric_tolerance >= 0.0) || !std::isfinite(numeric_tolerance))
    throw Error(ErrorCode::kInvalidConfig, "numeric_tolerance must be non-negative");
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double config_real(std::string_view key, std::string_view value) {
  auto parsed = io::parse_double(value);
  if (!parsed || !std::isfinite(*parsed))
    throw Error(ErrorCode::kInvalidConfig, std::string(key) + ": not a finite real: '" + std::string(value) + "'");
  return *parsed;
}

long long config_integer(std::string_view key, std::string_view value) {
  std::string text(value);
  std::size_t used = 0;
  long long parsed = 0;
  try {
    parsed = std::stoll(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size())
    throw Error(ErrorCode::kInvalidConfig, std::string(key) + ": not an integer: '" + text + "'");
  return parsed;
}

std::uint64_t config_seed(std::string_view key, std::string_view value) {
  std::uint64_t parsed = 0;
  const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
  if (value.empty() || ec != std::errc() || end != value.data() + value.size())
    throw Error(ErrorCode::kInvalidConfig,
                std::string(key) + ": not a non-negative 64-bit integer: '" + std::string(value) + "'");
  return parsed;
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  RunConfig config;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::kInvalidConfig, "line " + std::to_string(line_no) + ": expected key = value");
    std::string key(trim(line.substr(0, eq)));
    std::string_view value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second)
      throw Error(ErrorCode::kInvalidConfig, "line " + std::to_string(line_no) + ": repeated key '" + key + "'");

    if (key == "base_seed") {
      config.base_seed = config_seed(key, value);
    } else if (key == "correlation_threshold_features") {
      config.correlation_threshold_features = config_real(key, value);
    } else if (key == "correlation_threshold_metrics") {
      config.correlation_threshold_metrics = config_real(key, value);
    } else if (key == "min_wins") {
      config.min_wins = static_cast<int>(config_integer(key, value));
    } else if (key == "inner_cv_folds") {
      config.inner_cv_folds = static_cast<int>(config_integer(key, value));
    } else if (key == "chi_square_critical") {
      config.chi_square_critical = config_real(key, value);
    } else if (key == "numeric_tolerance") {
      config.numeric_tolerance = config_real(key, value);
    } else {
      throw Error(ErrorCode::kInvalidConfig, "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  config.validate();
  return config;
}

std::string format_config(const RunConfig& config) {
  std::ostringstream out;
  out << "base_seed = " << config.base_seed << '\n'
      << "correlation_threshold_features = " << io::format_double(config.correlation_threshold_features) << '\n'
      << "correlation_threshold_metrics = " << io::format_double(config.correlation_threshold_metrics) << '\n'
      << "min_wins = " << config.min_wins << '\n'
      << "inner_cv_folds = " << config.inner_cv_folds << '\n'
      << "chi_square_critical = " << io::format_double(config.chi_square_critical) << '\n'
      << "numeric_tolerance = " << io::format_double(config.numeric_tolerance) << '\n';
  return out.str();
}

RunConfig load_config(const std::filesystem::path& path) { return parse_config(io::read_file(path)); }

std::uint64_t task_id(std::string_view label) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t task, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(base_seed) ^ task) ^ index);
}

std::size_t Rng::uniform_index(std::size_t bound) {
  if (bound <= 1) return 0;
  const std::uint64_t b = bound;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % b;
  std::uint64_t draw;
  do {
    draw = engine_();
  } while (draw >= limit);
  return static_cast<std::size_t>(draw % b);
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      {
        std::lock_guard lock(failure_mutex);
        if (failure) return;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
  std::vector<std::jthread> pool;
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace mlcas
