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

#include "mlcas/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"
#include "mlcas/error.hpp"
#include "mlcas/io.hpp"

namespace mlcas {

using nlohmann::json;

std::string_view to_string(AttributeKind kind) {
  switch (kind) {
    case AttributeKind::kNumeric: return "numeric";
    case AttributeKind::kBinary: return "binary";
    case AttributeKind::kNominal: return "nominal";
  }
  return "numeric";
}

AttributeKind parse_attribute_kind(std::string_view text) {
  if (text == "numeric") return AttributeKind::kNumeric;
  if (text == "binary") return AttributeKind::kBinary;
  if (text == "nominal") return AttributeKind::kNominal;
  throw Error(ErrorCode::kMalformedManifest, "unknown attribute kind '" + std::string(text) + "'");
}

void MLCDataset::validate() const {
  const std::size_t n = labels.rows();
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, id + ": dataset has no instances");
  if (attributes.empty()) throw Error(ErrorCode::kInvalidArgument, id + ": dataset has no attributes");
  if (labels.cols() < 2) throw Error(ErrorCode::kInvalidArgument, id + ": need at least 2 labels");
  if (label_names.size() != labels.cols())
    throw Error(ErrorCode::kInvalidArgument, id + ": label name count does not match label matrix");
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < labels.cols(); ++c)
      if (labels(r, c) > 1)
        throw Error(ErrorCode::kNonBinaryLabelValue, id + ": row " + std::to_string(r) + ", label '" +
                                                         label_names[c] + "'");
  for (const auto& column : attributes) {
    if (column.raw.size() != n)
      throw Error(ErrorCode::kInvalidArgument, id + ": attribute '" + column.name + "' has wrong length");
    if (column.kind == AttributeKind::kNominal) {
      if (!column.values.empty())
        throw Error(ErrorCode::kInvalidArgument, id + ": nominal attribute '" + column.name + "' carries values");
      continue;
    }
    if (column.values.size() != n)
      throw Error(ErrorCode::kInvalidArgument, id + ": attribute '" + column.name + "' has wrong length");
    for (double v : column.values) {
      if (!std::isfinite(v))
        throw Error(ErrorCode::kNonFiniteValue, id + ": attribute '" + column.name + "' has a non-finite value");
      if (column.kind == AttributeKind::kBinary && v != 0.0 && v != 1.0)
        throw Error(ErrorCode::kInvalidArgument,
                    id + ": binary attribute '" + column.name + "' has value outside {0,1}");
    }
  }
}

namespace {

json parse_manifest_json(const std::filesystem::path& path) {
  std::string text = io::read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedManifest, path.string() + ": " + e.what());
  }
}

std::string manifest_string(const json& manifest, const char* key, const std::filesystem::path& path) {
  auto it = manifest.find(key);
  if (it == manifest.end() || !it->is_string() || it->get<std::string>().empty())
    throw Error(ErrorCode::kMalformedManifest, path.string() + ": missing string field '" + key + "'");
  return it->get<std::string>();
}

AttributeKind infer_kind(const std::vector<std::string>& raw) {
  bool all_real = true;
  bool all_binary = true;
  for (const auto& cell : raw) {
    auto v = io::parse_double(cell);
    if (!v || !std::isfinite(*v)) {
      all_real = false;
      break;
    }
    if (*v != 0.0 && *v != 1.0) all_binary = false;
  }
  if (!all_real) return AttributeKind::kNominal;
  return all_binary ? AttributeKind::kBinary : AttributeKind::kNumeric;
}

}  // namespace

MLCDataset load_dataset(const std::filesystem::path& manifest_path) {
  json manifest = parse_manifest_json(manifest_path);
  if (!manifest.is_object()) throw Error(ErrorCode::kMalformedManifest, manifest_path.string() + ": not an object");
  for (const auto& [key, _] : manifest.items())
    if (key != "id" && key != "domain" && key != "data" && key != "labels" && key != "kinds")
      throw Error(ErrorCode::kMalformedManifest, manifest_path.string() + ": unknown field '" + key + "'");

  MLCDataset ds;
  ds.id = manifest_string(manifest, "id", manifest_path);
  ds.domain = manifest_string(manifest, "domain", manifest_path);
  std::filesystem::path data_path = manifest_string(manifest, "data", manifest_path);
  if (data_path.is_relative()) data_path = manifest_path.parent_path() / data_path;

  auto labels_it = manifest.find("labels");
  if (labels_it == manifest.end() || !labels_it->is_array() || labels_it->empty())
    throw Error(ErrorCode::kMalformedManifest, manifest_path.string() + ": 'labels' must be a non-empty array");
  std::vector<std::string> label_names;
  for (const auto& entry : *labels_it) {
    if (!entry.is_string()) throw Error(ErrorCode::kMalformedManifest, manifest_path.string() + ": label names must be strings");
    label_names.push_back(entry.get<std::string>());
  }
  std::map<std::string, AttributeKind> declared;
  if (auto kinds_it = manifest.find("kinds"); kinds_it != manifest.end()) {
    if (!kinds_it->is_object()) throw Error(ErrorCode::kMalformedManifest, manifest_path.string() + ": 'kinds' must be an object");
    for (const auto& [column, kind] : kinds_it->items()) {
      if (!kind.is_string()) throw Error(ErrorCode::kMalformedManifest, manifest_path.string() + ": kind of '" + column + "' must be a string");
      declared[column] = parse_attribute_kind(kind.get<std::string>());
    }
  }

  if (!std::filesystem::exists(data_path))
    throw Error(ErrorCode::kMissingFile, ds.id + ": data file '" + data_path.string() + "' not found");
  io::CsvTable csv = io::read_csv(data_path);

  std::vector<std::ptrdiff_t> label_column(label_names.size(), -1);
  for (std::size_t l = 0; l < label_names.size(); ++l) {
    auto it = std::find(csv.header.begin(), csv.header.end(), label_names[l]);
    if (it == csv.header.end())
      throw Error(ErrorCode::kLabelColumnNotFound, ds.id + ": label column '" + label_names[l] + "' not in header");
    label_column[l] = it - csv.header.begin();
  }
  std::set<std::string> label_set(label_names.begin(), label_names.end());
  if (label_set.size() != label_names.size())
    throw Error(ErrorCode::kMalformedManifest, ds.id + ": duplicate label column");
  for (const auto& [column, _] : declared)
    if (std::find(csv.header.begin(), csv.header.end(), column) == csv.header.end() || label_set.count(column))
      throw Error(ErrorCode::kMalformedManifest, ds.id + ": kind declared for unknown attribute '" + column + "'");

  const std::size_t n = csv.rows.size();
  ds.label_names = label_names;
  ds.labels = LabelMatrix(n, label_names.size());
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t l = 0; l < label_names.size(); ++l) {
      const std::string& cell = csv.rows[r][static_cast<std::size_t>(label_column[l])];
      auto v = io::parse_double(cell);
      if (!v || (*v != 0.0 && *v != 1.0))
        throw Error(ErrorCode::kNonBinaryLabelValue, ds.id + ": row " + std::to_string(csv.lines[r]) +
                                                         ", column '" + label_names[l] + "': value '" + cell + "'");
      ds.labels(r, l) = static_cast<std::uint8_t>(*v);
    }
  }

  for (std::size_t c = 0; c < csv.header.size(); ++c) {
    if (label_set.count(csv.header[c])) continue;
    AttributeColumn column;
    column.name = csv.header[c];
    column.raw.reserve(n);
    for (std::size_t r = 0; r < n; ++r) column.raw.push_back(csv.rows[r][c]);
    auto it = declared.find(column.name);
    column.kind = it != declared.end() ? it->second : infer_kind(column.raw);
    if (column.kind != AttributeKind::kNominal) {
      column.values.reserve(n);
      for (std::size_t r = 0; r < n; ++r) {
        auto v = io::parse_double(column.raw[r]);
        if (!v)
          throw Error(ErrorCode::kMalformedCsv, ds.id + ": row " + std::to_string(csv.lines[r]) + ", attribute '" +
                                                    column.name + "': '" + column.raw[r] + "' is not a number");
        column.values.push_back(*v);
      }
    }
    ds.attributes.push_back(std::move(column));
  }
  ds.validate();
  return ds;
}

std::filesystem::path write_dataset(const MLCDataset& dataset, const std::filesystem::path& dir) {
  dataset.validate();
  std::filesystem::create_directories(dir);
  const std::string data_name = dataset.id + ".csv";

  std::vector<std::string> header;
  for (const auto& column : dataset.attributes) header.push_back(column.name);
  for (const auto& label : dataset.label_names) header.push_back(label);
  std::string csv = io::csv_row(header);
  for (std::size_t r = 0; r < dataset.instances(); ++r) {
    std::vector<std::string> fields;
    for (const auto& column : dataset.attributes) fields.push_back(column.raw[r]);
    for (std::size_t l = 0; l < dataset.labels.cols(); ++l) fields.push_back(dataset.labels(r, l) ? "1" : "0");
    csv += io::csv_row(fields);
  }
  io::write_file_atomic(dir / data_name, csv);

  json manifest;
  manifest["id"] = dataset.id;
  manifest["domain"] = dataset.domain;
  manifest["data"] = data_name;
  manifest["labels"] = dataset.label_names;
  json kinds = json::object();
  for (const auto& column : dataset.attributes) kinds[column.name] = std::string(to_string(column.kind));
  manifest["kinds"] = kinds;
  auto manifest_path = dir / (dataset.id + ".json");
  io::write_file_atomic(manifest_path, manifest.dump(2) + "\n");
  return manifest_path;
}

std::optional<std::size_t> PerformanceTable::index_of(const std::unordered_map<std::string, std::size_t>& lookup,
                                                      std::string_view name) {
  auto it = lookup.find(std::string(name));
  if (it == lookup.end()) return std::nullopt;
  return it->second;
}

void PerformanceTable::set(const std::string& dataset, const std::string& algorithm, const std::string& metric,
                           double value) {
  if (!std::isfinite(value))
    throw Error(ErrorCode::kNonFiniteValue, "(" + dataset + ", " + algorithm + ", " + metric + ")");
  auto intern = [](std::vector<std::string>& axis, std::unordered_map<std::string, std::size_t>& lookup,
                   const std::string& name) {
    auto [it, inserted] = lookup.try_emplace(name, axis.size());
    if (inserted) axis.push_back(name);
    return it->second;
  };
  Key key{intern(datasets_, dataset_index_, dataset), intern(algorithms_, algorithm_index_, algorithm),
          intern(metrics_, metric_index_, metric)};
  if (!cells_.emplace(key, value).second)
    throw Error(ErrorCode::kDuplicateKey, "(" + dataset + ", " + algorithm + ", " + metric + ") given twice");
}

std::optional<double> PerformanceTable::get(std::string_view dataset, std::string_view algorithm,
                                            std::string_view metric) const {
  auto d = index_of(dataset_index_, dataset);
  auto a = index_of(algorithm_index_, algorithm);
  auto m = index_of(metric_index_, metric);
  if (!d || !a || !m) return std::nullopt;
  auto it = cells_.find(Key{*d, *a, *m});
  if (it == cells_.end()) return std::nullopt;
  return it->second;
}

double PerformanceTable::at(std::string_view dataset, std::string_view algorithm, std::string_view metric) const {
  if (auto v = get(dataset, algorithm, metric)) return *v;
  throw Error(ErrorCode::kMissingPerformance, "no value for (" + std::string(dataset) + ", " +
                                                  std::string(algorithm) + ", " + std::string(metric) + ")");
}

bool PerformanceTable::complete(std::string_view dataset, std::string_view metric,
                                std::span<const std::string> algorithms) const {
  return std::all_of(algorithms.begin(), algorithms.end(),
                     [&](const std::string& a) { return contains(dataset, a, metric); });
}

PerformanceTable parse_performance_table(std::string_view csv_text, const MetricRegistry& registry,
                                         const std::string& source_name) {
  io::CsvTable csv = io::parse_csv(csv_text, source_name);
  const std::vector<std::string> expected{"dataset", "algorithm", "metric", "value"};
  if (csv.header != expected)
    throw Error(ErrorCode::kMalformedCsv, source_name + ": header must be exactly dataset,algorithm,metric,value");
  PerformanceTable table;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const std::string where = source_name + ":" + std::to_string(csv.lines[r]);
    if (row[0].empty() || row[1].empty() || row[2].empty())
      throw Error(ErrorCode::kMalformedCsv, where + ": empty identifier");
    if (!registry.find(row[2]))
      throw Error(ErrorCode::kUnknownMetric, where + ": metric '" + row[2] + "' is not registered");
    auto value = io::parse_double(row[3]);
    if (!value) throw Error(ErrorCode::kMalformedCsv, where + ": value '" + row[3] + "' is not a number");
    if (!std::isfinite(*value)) throw Error(ErrorCode::kNonFiniteValue, where + ": value '" + row[3] + "'");
    try {
      table.set(row[0], row[1], row[2], *value);
    } catch (const Error& e) {
      throw Error(e.code(), where + ": " + std::string(e.what()));
    }
  }
  return table;
}

PerformanceTable load_performance_table(const std::filesystem::path& csv_path, const MetricRegistry& registry) {
  if (!std::filesystem::exists(csv_path))
    throw Error(ErrorCode::kMissingFile, "performance table '" + csv_path.string() + "' not found");
  return parse_performance_table(io::read_file(csv_path), registry, csv_path.string());
}

std::string format_performance_table(const PerformanceTable& table) {
  std::string out = "dataset,algorithm,metric,value\n";
  for (const auto& d : table.datasets())
    for (const auto& a : table.algorithms())
      for (const auto& m : table.metrics())
        if (auto v = table.get(d, a, m)) out += io::csv_row({d, a, m, io::format_double(*v)});
  return out;
}

ValidationReport validate_join(std::span<const std::string> feature_ids, const PerformanceTable& table,
                               bool allow_missing) {
  ValidationReport report;
  std::set<std::string> feature_set(feature_ids.begin(), feature_ids.end());
  std::set<std::string> table_set(table.datasets().begin(), table.datasets().end());
  for (const auto& id : feature_ids) {
    if (table_set.count(id)) {
      if (std::find(report.common_ids.begin(), report.common_ids.end(), id) == report.common_ids.end())
        report.common_ids.push_back(id);
    } else {
      report.feature_only_ids.push_back(id);
    }
  }
  for (const auto& id : table.datasets())
    if (!feature_set.count(id)) report.performance_only_ids.push_back(id);
  if (report.common_ids.empty())
    throw Error(ErrorCode::kDisjointCorpora, "feature and performance inputs share no dataset id");

  for (const auto& m : table.metrics()) {
    for (const auto& d : report.common_ids) {
      bool missing = false;
      for (const auto& a : table.algorithms()) {
        if (!table.contains(d, a, m)) {
          report.missing_cells.push_back({d, a, m});
          missing = true;
        }
      }
      if (missing) report.excluded[m].push_back(d);
    }
  }
  if (!allow_missing && !report.missing_cells.empty()) {
    const auto& first = report.missing_cells.front();
    throw Error(ErrorCode::kMissingPerformance, std::to_string(report.missing_cells.size()) +
                                                    " missing cells, first (" + first.dataset + ", " +
                                                    first.algorithm + ", " + first.metric + ")");
  }
  return report;
}

ValidationReport validate_join(std::span<const MLCDataset> datasets, const PerformanceTable& table,
                               bool allow_missing) {
  std::vector<std::string> ids;
  ids.reserve(datasets.size());
  for (const auto& ds : datasets) ids.push_back(ds.id);
  return validate_join(std::span<const std::string>(ids), table, allow_missing);
}

}  // namespace mlcas
