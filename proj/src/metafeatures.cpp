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

#include "mlcas/metafeatures.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "mlcas/error.hpp"
#include "mlcas/io.hpp"

namespace mlcas {

std::string_view to_string(FeatureGroup group) {
  switch (group) {
    case FeatureGroup::kDimensionality: return "dimensionality";
    case FeatureGroup::kLabelDistribution: return "label_distribution";
    case FeatureGroup::kLabelImbalance: return "label_imbalance";
    case FeatureGroup::kLabelRelationship: return "label_relationship";
    case FeatureGroup::kAttributeMetrics: return "attribute_metrics";
  }
  return "dimensionality";
}

const std::vector<FeatureInfo>& metafeature_catalogue() {
  static const std::vector<FeatureInfo> catalogue = {
      {"instances", FeatureGroup::kDimensionality},
      {"attributes", FeatureGroup::kDimensionality},
      {"labels", FeatureGroup::kDimensionality},
      {"instances_per_attribute", FeatureGroup::kDimensionality},
      {"cardinality", FeatureGroup::kLabelDistribution},
      {"density", FeatureGroup::kLabelDistribution},
      {"min_label_frequency", FeatureGroup::kLabelDistribution},
      {"mean_label_frequency", FeatureGroup::kLabelDistribution},
      {"max_label_frequency", FeatureGroup::kLabelDistribution},
      {"mean_ir", FeatureGroup::kLabelImbalance},
      {"max_ir", FeatureGroup::kLabelImbalance},
      {"cv_ir", FeatureGroup::kLabelImbalance},
      {"distinct_labelsets", FeatureGroup::kLabelRelationship},
      {"proportion_distinct_labelsets", FeatureGroup::kLabelRelationship},
      {"mean_examples_per_labelset", FeatureGroup::kLabelRelationship},
      {"chi2_dependent_ratio", FeatureGroup::kLabelRelationship},
      {"proportion_binary", FeatureGroup::kAttributeMetrics},
      {"proportion_numeric", FeatureGroup::kAttributeMetrics},
      {"proportion_nominal", FeatureGroup::kAttributeMetrics},
      {"mean_of_means", FeatureGroup::kAttributeMetrics},
      {"mean_of_stds", FeatureGroup::kAttributeMetrics},
  };
  return catalogue;
}

double MetaFeatureVector::value(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return values[i];
  throw Error(ErrorCode::kInvalidArgument, "no meta-feature '" + std::string(name) + "'");
}

namespace {

// Summing in sorted order makes the result independent of input order.
double order_free_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double total = 0.0;
  for (double v : values) total += v;
  return total;
}

struct MeanStd {
  double mean;
  double std;
};

// Population mean and standard deviation.
MeanStd order_free_moments(const std::vector<double>& values) {
  const double n = static_cast<double>(values.size());
  const double mean = order_free_sum(values) / n;
  std::vector<double> squares;
  squares.reserve(values.size());
  for (double v : values) squares.push_back((v - mean) * (v - mean));
  return {mean, std::sqrt(order_free_sum(std::move(squares)) / n)};
}

}  // namespace

double pair_chi_square(const LabelMatrix& labels, std::size_t a, std::size_t b) {
  const std::size_t n = labels.rows();
  double observed[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t r = 0; r < n; ++r) observed[labels(r, a)][labels(r, b)] += 1.0;
  const double row[2] = {observed[0][0] + observed[0][1], observed[1][0] + observed[1][1]};
  const double col[2] = {observed[0][0] + observed[1][0], observed[0][1] + observed[1][1]};
  if (row[0] == 0 || row[1] == 0 || col[0] == 0 || col[1] == 0) return 0.0;
  double chi2 = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double expected = row[i] * col[j] / static_cast<double>(n);
      const double diff = observed[i][j] - expected;
      chi2 += diff * diff / expected;
    }
  return chi2;
}

double chi2_dependent_ratio(const LabelMatrix& labels, double critical) {
  const std::size_t q = labels.cols();
  if (q < 2) throw Error(ErrorCode::kInvalidArgument, "chi-square dependence needs at least 2 labels");
  std::size_t dependent = 0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < q; ++a)
    for (std::size_t b = a + 1; b < q; ++b) {
      ++pairs;
      if (pair_chi_square(labels, a, b) > critical) ++dependent;
    }
  return static_cast<double>(dependent) / static_cast<double>(pairs);
}

MetaFeatureVector compute_metafeatures(const MLCDataset& dataset, const RunConfig& config) {
  dataset.validate();
  const LabelMatrix& y = dataset.labels;
  const std::size_t n = y.rows();
  const std::size_t q = y.cols();
  const std::size_t d = dataset.attributes.size();
  const double nd = static_cast<double>(n);
  const double qd = static_cast<double>(q);

  MetaFeatureVector out;
  out.dataset_id = dataset.id;

  std::vector<std::size_t> counts(q, 0);
  std::size_t label_total = 0;
  std::set<std::vector<std::uint8_t>> labelsets;
  for (std::size_t r = 0; r < n; ++r) {
    auto row = y.row(r);
    for (std::size_t l = 0; l < q; ++l) counts[l] += row[l];
    label_total += static_cast<std::size_t>(std::count(row.begin(), row.end(), 1));
    std::vector<std::uint8_t> key(row.begin(), row.end());
    labelsets.insert(std::move(key));
  }
  const std::size_t max_count = *std::max_element(counts.begin(), counts.end());
  if (max_count == 0) throw Error(ErrorCode::kDegenerateLabels, dataset.id + ": no label has a positive instance");

  std::vector<double> frequencies;
  std::vector<double> ir;
  for (std::size_t l = 0; l < q; ++l) {
    frequencies.push_back(static_cast<double>(counts[l]) / nd);
    if (counts[l] == 0) {
      out.warnings.push_back(dataset.id + ": label '" + dataset.label_names[l] +
                             "' has no positive instance; excluded from imbalance ratios");
      continue;
    }
    ir.push_back(static_cast<double>(max_count) / static_cast<double>(counts[l]));
  }
  const MeanStd ir_moments = order_free_moments(ir);

  std::size_t binary = 0, numeric = 0, nominal = 0;
  std::vector<double> means;
  std::vector<double> stds;
  for (const auto& column : dataset.attributes) {
    switch (column.kind) {
      case AttributeKind::kBinary: ++binary; break;
      case AttributeKind::kNominal: ++nominal; break;
      case AttributeKind::kNumeric: {
        ++numeric;
        const MeanStd m = order_free_moments(column.values);
        means.push_back(m.mean);
        stds.push_back(m.std);
        break;
      }
    }
  }
  const double dd = static_cast<double>(d);
  const double cardinality = static_cast<double>(label_total) / nd;
  const double distinct = static_cast<double>(labelsets.size());

  const std::vector<double> values = {
      nd,
      dd,
      qd,
      nd / dd,
      cardinality,
      cardinality / qd,
      *std::min_element(frequencies.begin(), frequencies.end()),
      order_free_sum(frequencies) / qd,
      *std::max_element(frequencies.begin(), frequencies.end()),
      ir_moments.mean,
      *std::max_element(ir.begin(), ir.end()),
      ir_moments.std / ir_moments.mean,
      distinct,
      distinct / nd,
      nd / distinct,
      chi2_dependent_ratio(y, config.chi_square_critical),
      static_cast<double>(binary) / dd,
      static_cast<double>(numeric) / dd,
      static_cast<double>(nominal) / dd,
      means.empty() ? 0.0 : order_free_sum(means) / static_cast<double>(means.size()),
      stds.empty() ? 0.0 : order_free_sum(stds) / static_cast<double>(stds.size()),
  };
  const auto& catalogue = metafeature_catalogue();
  for (std::size_t i = 0; i < catalogue.size(); ++i) {
    if (!std::isfinite(values[i]))
      throw Error(ErrorCode::kNonFiniteValue, dataset.id + ": meta-feature '" + catalogue[i].name + "' is not finite");
    out.names.push_back(catalogue[i].name);
    out.groups.push_back(catalogue[i].group);
    out.values.push_back(values[i]);
  }
  return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw Error(ErrorCode::kLengthMismatch, "pearson: lengths " + std::to_string(x.size()) + " and " +
                                                std::to_string(y.size()));
  if (x.size() < 2) throw Error(ErrorCode::kLengthMismatch, "pearson: need at least 2 samples");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  const bool x_constant = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
  const bool y_constant = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
  if (x_constant || y_constant || sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::size_t MetaFeatureMatrix::row_index(std::string_view id) const {
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i] == id) return i;
  throw Error(ErrorCode::kInvalidArgument, "no dataset '" + std::string(id) + "' in feature matrix");
}

std::size_t MetaFeatureMatrix::col_index(std::string_view name) const {
  for (std::size_t i = 0; i < cols.size(); ++i)
    if (cols[i] == name) return i;
  throw Error(ErrorCode::kInvalidArgument, "no feature '" + std::string(name) + "' in feature matrix");
}

MetaFeatureMatrix assemble_matrix(std::span<const MetaFeatureVector> vectors) {
  if (vectors.empty()) throw Error(ErrorCode::kInvalidArgument, "no meta-feature vectors to assemble");
  MetaFeatureMatrix out;
  out.cols = vectors.front().names;
  out.data = Matrix(vectors.size(), out.cols.size());
  std::set<std::string> seen;
  for (std::size_t r = 0; r < vectors.size(); ++r) {
    const auto& v = vectors[r];
    if (v.names != out.cols)
      throw Error(ErrorCode::kInvalidArgument, v.dataset_id + ": feature order differs from '" +
                                                   vectors.front().dataset_id + "'");
    if (!seen.insert(v.dataset_id).second)
      throw Error(ErrorCode::kDuplicateKey, "dataset '" + v.dataset_id + "' appears twice");
    out.rows.push_back(v.dataset_id);
    for (std::size_t c = 0; c < out.cols.size(); ++c) out.data(r, c) = v.values[c];
  }
  return out;
}

namespace {

struct GreedyResult {
  std::vector<std::size_t> kept;
  std::vector<DropRecord> log;
};

// Later-column rule shared by feature and metric pruning. Columns listed in
// `excluded` are treated as already gone.
GreedyResult greedy_prune(const std::vector<std::vector<double>>& columns, const std::vector<std::string>& names,
                          double threshold, std::vector<bool> dropped) {
  GreedyResult result;
  const std::size_t m = columns.size();
  for (std::size_t i = 0; i < m; ++i) {
    if (dropped[i]) continue;
    for (std::size_t j = i + 1; j < m; ++j) {
      if (dropped[j]) continue;
      const double r = pearson(columns[i], columns[j]);
      if (std::abs(r) > threshold) {
        dropped[j] = true;
        result.log.push_back({names[j], names[i], r});
      }
    }
  }
  for (std::size_t i = 0; i < m; ++i)
    if (!dropped[i]) result.kept.push_back(i);
  return result;
}

}  // namespace

MetaFeatureMatrix prune_correlated(const MetaFeatureMatrix& matrix, double threshold) {
  const std::size_t m = matrix.cols.size();
  if (m < 2) throw Error(ErrorCode::kInvalidArgument, "pruning needs at least 2 feature columns");
  if (matrix.rows.size() < 2) throw Error(ErrorCode::kInvalidArgument, "pruning needs at least 2 datasets");
  std::vector<std::vector<double>> columns;
  for (std::size_t c = 0; c < m; ++c) columns.push_back(matrix.data.column(c));

  MetaFeatureMatrix out;
  out.rows = matrix.rows;
  out.drop_log = matrix.drop_log;
  std::vector<bool> dropped(m, false);
  for (std::size_t c = 0; c < m; ++c) {
    const auto& col = columns[c];
    if (std::all_of(col.begin(), col.end(), [&](double v) { return v == col[0]; })) {
      dropped[c] = true;
      out.drop_log.push_back({matrix.cols[c], std::string(kZeroVarianceReason), 0.0});
    }
  }
  GreedyResult greedy = greedy_prune(columns, matrix.cols, threshold, dropped);
  if (greedy.kept.empty()) throw Error(ErrorCode::kAllColumnsDropped, "every feature column was dropped");
  out.drop_log.insert(out.drop_log.end(), greedy.log.begin(), greedy.log.end());
  for (std::size_t c : greedy.kept) out.cols.push_back(matrix.cols[c]);
  out.data = matrix.data.select_cols(greedy.kept);
  return out;
}

namespace {

std::vector<std::vector<double>> metric_columns(const PerformanceTable& table) {
  std::vector<std::vector<double>> columns;
  for (const auto& m : table.metrics()) {
    std::vector<double> col;
    for (const auto& d : table.datasets())
      for (const auto& a : table.algorithms()) col.push_back(table.at(d, a, m));
    columns.push_back(std::move(col));
  }
  return columns;
}

}  // namespace

std::vector<std::string> prune_metrics(const PerformanceTable& table, double threshold) {
  if (table.metrics().size() < 2) return table.metrics();
  auto columns = metric_columns(table);
  GreedyResult greedy = greedy_prune(columns, table.metrics(), threshold, std::vector<bool>(columns.size(), false));
  std::vector<std::string> kept;
  for (std::size_t c : greedy.kept) kept.push_back(table.metrics()[c]);
  return kept;
}

std::vector<MetricCorrelation> metric_correlations(const PerformanceTable& table) {
  std::vector<MetricCorrelation> out;
  if (table.metrics().size() < 2) return out;
  auto columns = metric_columns(table);
  for (std::size_t i = 0; i < columns.size(); ++i)
    for (std::size_t j = i + 1; j < columns.size(); ++j)
      out.push_back({table.metrics()[i], table.metrics()[j], pearson(columns[i], columns[j])});
  return out;
}

std::string format_feature_csv(const MetaFeatureMatrix& matrix, std::string_view comment) {
  std::string out;
  if (!comment.empty()) out += "# " + std::string(comment) + "\n";
  std::vector<std::string> header{"dataset"};
  header.insert(header.end(), matrix.cols.begin(), matrix.cols.end());
  out += io::csv_row(header);
  for (std::size_t r = 0; r < matrix.rows.size(); ++r) {
    std::vector<std::string> fields{matrix.rows[r]};
    for (std::size_t c = 0; c < matrix.cols.size(); ++c) fields.push_back(io::format_double(matrix.data(r, c)));
    out += io::csv_row(fields);
  }
  return out;
}

MetaFeatureMatrix parse_feature_csv(std::string_view text, const std::string& source_name) {
  io::CsvTable csv = io::parse_csv(text, source_name);
  if (csv.header.size() < 2 || csv.header.front() != "dataset")
    throw Error(ErrorCode::kMalformedCsv, source_name + ": header must start with 'dataset' followed by features");
  MetaFeatureMatrix out;
  out.cols.assign(csv.header.begin() + 1, csv.header.end());
  std::set<std::string> col_set(out.cols.begin(), out.cols.end());
  if (col_set.size() != out.cols.size()) throw Error(ErrorCode::kDuplicateKey, source_name + ": duplicate feature name");
  out.data = Matrix(csv.rows.size(), out.cols.size());
  std::set<std::string> seen;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const std::string where = source_name + ":" + std::to_string(csv.lines[r]);
    if (!seen.insert(row[0]).second) throw Error(ErrorCode::kDuplicateKey, where + ": dataset '" + row[0] + "' repeated");
    out.rows.push_back(row[0]);
    for (std::size_t c = 0; c < out.cols.size(); ++c) {
      auto v = io::parse_double(row[c + 1]);
      if (!v) throw Error(ErrorCode::kMalformedCsv, where + ": '" + row[c + 1] + "' is not a number");
      if (!std::isfinite(*v)) throw Error(ErrorCode::kNonFiniteValue, where + ": feature '" + out.cols[c] + "'");
      out.data(r, c) = *v;
    }
  }
  return out;
}

MetaFeatureMatrix load_feature_csv(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw Error(ErrorCode::kMissingFile, "feature table '" + path.string() + "' not found");
  return parse_feature_csv(io::read_file(path), path.string());
}

std::string format_drop_log(std::span<const DropRecord> log, std::string_view comment) {
  std::string out;
  if (!comment.empty()) out += "# " + std::string(comment) + "\n";
  out += "dropped,kept_or_reason,r\n";
  for (const auto& rec : log) out += io::csv_row({rec.dropped, rec.kept_or_reason, io::format_double(rec.r)});
  return out;
}

}  // namespace mlcas
