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
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mlcas/core.hpp"

namespace mlcas {

enum class AttributeKind { kNumeric, kBinary, kNominal };

std::string_view to_string(AttributeKind kind);
AttributeKind parse_attribute_kind(std::string_view text);

struct AttributeColumn {
  std::string name;
  AttributeKind kind = AttributeKind::kNumeric;
  // Cell text as read; nominal columns are summarized from these.
  std::vector<std::string> raw;
  // Parsed values for numeric and binary columns, empty for nominal ones.
  std::vector<double> values;

  friend bool operator==(const AttributeColumn&, const AttributeColumn&) = default;
};

// n x q matrix of 0/1 label indicators.
class LabelMatrix {
 public:
  LabelMatrix() = default;
  LabelMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::uint8_t operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::uint8_t& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  std::span<const std::uint8_t> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  friend bool operator==(const LabelMatrix&, const LabelMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> data_;
};

struct MLCDataset {
  std::string id;
  std::string domain;
  std::vector<AttributeColumn> attributes;
  std::vector<std::string> label_names;
  LabelMatrix labels;

  std::size_t instances() const noexcept { return labels.rows(); }

  // n >= 1, d >= 1, q >= 2, consistent column lengths, binary columns in
  // {0,1}. Throws Error.
  void validate() const;

  friend bool operator==(const MLCDataset&, const MLCDataset&) = default;
};

// Reads a JSON manifest {id, domain, data, labels:[...], kinds:{col:kind}}.
// `data` is resolved relative to the manifest's directory. Attribute columns
// are the non-label CSV columns in header order; undeclared kinds are
// inferred (values in {0,1} -> binary, all reals -> numeric, else nominal).
MLCDataset load_dataset(const std::filesystem::path& manifest_path);

// Writes `<dir>/<id>.json` and `<dir>/<id>.csv`; returns the manifest path.
// Every attribute kind is written explicitly.
std::filesystem::path write_dataset(const MLCDataset& dataset, const std::filesystem::path& dir);

// (dataset, algorithm, metric) -> value with first-appearance axis order.
class PerformanceTable {
 public:
  // Throws Error(kDuplicateKey) on a repeated key, kNonFiniteValue on
  // NaN/inf.
  void set(const std::string& dataset, const std::string& algorithm, const std::string& metric, double value);

  std::optional<double> get(std::string_view dataset, std::string_view algorithm, std::string_view metric) const;
  // Throws Error(kMissingPerformance) when absent.
  double at(std::string_view dataset, std::string_view algorithm, std::string_view metric) const;
  bool contains(std::string_view dataset, std::string_view algorithm, std::string_view metric) const {
    return get(dataset, algorithm, metric).has_value();
  }

  const std::vector<std::string>& datasets() const noexcept { return datasets_; }
  const std::vector<std::string>& algorithms() const noexcept { return algorithms_; }
  const std::vector<std::string>& metrics() const noexcept { return metrics_; }
  std::size_t entry_count() const noexcept { return cells_.size(); }

  bool dense() const noexcept {
    return cells_.size() == datasets_.size() * algorithms_.size() * metrics_.size();
  }

  // Every listed algorithm has a value for (dataset, metric).
  bool complete(std::string_view dataset, std::string_view metric, std::span<const std::string> algorithms) const;

  friend bool operator==(const PerformanceTable&, const PerformanceTable&) = default;

 private:
  using Key = std::array<std::size_t, 3>;

  static std::optional<std::size_t> index_of(const std::unordered_map<std::string, std::size_t>& lookup,
                                             std::string_view name);

  std::vector<std::string> datasets_;
  std::vector<std::string> algorithms_;
  std::vector<std::string> metrics_;
  std::unordered_map<std::string, std::size_t> dataset_index_;
  std::unordered_map<std::string, std::size_t> algorithm_index_;
  std::unordered_map<std::string, std::size_t> metric_index_;
  std::map<Key, double> cells_;
};

// Long-format CSV with header exactly `dataset,algorithm,metric,value`.
PerformanceTable load_performance_table(const std::filesystem::path& csv_path, const MetricRegistry& registry);
PerformanceTable parse_performance_table(std::string_view csv_text, const MetricRegistry& registry,
                                         const std::string& source_name = "<memory>");
// Present cells in (dataset, algorithm, metric) axis order.
std::string format_performance_table(const PerformanceTable& table);

struct MissingCell {
  std::string dataset;
  std::string algorithm;
  std::string metric;

  friend bool operator==(const MissingCell&, const MissingCell&) = default;
};

struct ValidationReport {
  std::vector<std::string> common_ids;
  std::vector<std::string> feature_only_ids;
  std::vector<std::string> performance_only_ids;
  std::vector<MissingCell> missing_cells;
  // metric -> datasets dropped from that metric's experiment (allow_missing).
  std::map<std::string, std::vector<std::string>> excluded;

  bool clean() const {
    return feature_only_ids.empty() && performance_only_ids.empty() && missing_cells.empty();
  }
};

// Compares the feature-side ids with the table. Fails with kDisjointCorpora
// on an empty intersection, and with kMissingPerformance when the table is not
// dense over the intersection unless `allow_missing` is set.
ValidationReport validate_join(std::span<const std::string> feature_ids, const PerformanceTable& table,
                               bool allow_missing = false);
ValidationReport validate_join(std::span<const MLCDataset> datasets, const PerformanceTable& table,
                               bool allow_missing = false);

}  // namespace mlcas
