// Copyright 2026 The Gradleak Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gradleak/dataio/dataset.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <string_view>
#include <unordered_map>

#include "gradleak/errors.h"

namespace gradleak::dataio {

Schema Schema::Adult() {
  using enum ColumnKind;
  return Schema{
      {"age", "workclass", "fnlwgt", "education", "education-num",
       "marital-status", "occupation", "relationship", "race", "sex",
       "capital-gain", "capital-loss", "hours-per-week", "native-country"},
      {kNumeric, kCategorical, kNumeric, kCategorical, kNumeric, kCategorical,
       kCategorical, kCategorical, kCategorical, kCategorical, kNumeric,
       kNumeric, kNumeric, kCategorical}};
}

Schema Schema::AllNumeric(std::size_t num_features) {
  Schema schema;
  for (std::size_t i = 0; i < num_features; ++i) {
    schema.names.push_back("x" + std::to_string(i));
    schema.kinds.push_back(ColumnKind::kNumeric);
  }
  return schema;
}

namespace {

std::string_view Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::optional<double> ParseDouble(std::string_view s) {
  double value = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

double Median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

RawTable ParseAdult(std::istream& in, const Schema& schema) {
  if (schema.names.size() != schema.kinds.size()) {
    throw ContractError("schema names and kinds differ in length");
  }
  const std::size_t expected = schema.num_features() + 1;
  RawTable table;
  table.schema = schema;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string_view trimmed = Trim(line);
    if (trimmed.empty() || trimmed.front() == '|') continue;

    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = trimmed.find(',', start);
      fields.push_back(Trim(trimmed.substr(start, comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() != expected) {
      throw ParseError("line " + std::to_string(line_number) + ": expected " +
                       std::to_string(expected) + " columns, got " +
                       std::to_string(fields.size()));
    }

    std::vector<std::optional<std::string>> row;
    row.reserve(schema.num_features());
    for (std::size_t c = 0; c < schema.num_features(); ++c) {
      if (fields[c] == "?") {
        row.emplace_back(std::nullopt);
        continue;
      }
      if (schema.kinds[c] == ColumnKind::kNumeric &&
          !ParseDouble(fields[c]).has_value()) {
        throw ParseError("line " + std::to_string(line_number) + ": column '" +
                         schema.names[c] + "' is not numeric: '" +
                         std::string(fields[c]) + "'");
      }
      row.emplace_back(std::string(fields[c]));
    }

    std::string_view label = fields.back();
    if (!label.empty() && label.back() == '.') label.remove_suffix(1);
    label = Trim(label);
    int y;
    if (label == ">50K") {
      y = 1;
    } else if (label == "<=50K") {
      y = 0;
    } else {
      throw ParseError("line " + std::to_string(line_number) +
                       ": unknown label '" + std::string(fields.back()) + "'");
    }
    table.cells.push_back(std::move(row));
    table.labels.push_back(y);
  }
  return table;
}

RawTable LoadAdult(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  return ParseAdult(in, schema);
}

Dataset::Dataset(std::vector<ColumnInfo> columns,
                 std::vector<std::vector<double>> encoded,
                 std::vector<int> labels)
    : columns_(std::move(columns)),
      encoded_(std::move(encoded)),
      labels_(std::move(labels)) {
  if (encoded_.empty()) throw ContractError("a dataset needs >= 1 sample");
  if (encoded_.size() != labels_.size()) {
    throw ContractError("feature rows and labels differ in count");
  }
  const std::size_t d = columns_.size();
  const double n = static_cast<double>(encoded_.size());
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (const auto& row : encoded_) {
      if (row.size() != d) throw DimensionError("ragged feature rows");
      mean += row[c];
    }
    mean /= n;
    double var = 0.0;
    for (const auto& row : encoded_) var += (row[c] - mean) * (row[c] - mean);
    var /= n;
    columns_[c].mean = mean;
    // Round-off on a constant column must not yield a tiny positive spread.
    const double scale = std::max(1.0, std::abs(mean));
    columns_[c].stddev = std::sqrt(var) <= 1e-12 * scale ? 0.0 : std::sqrt(var);
  }
  samples_.reserve(encoded_.size());
  for (std::size_t i = 0; i < encoded_.size(); ++i) {
    if (labels_[i] != 0 && labels_[i] != 1) {
      throw ContractError("labels must be 0 or 1");
    }
    Sample s;
    s.label = labels_[i];
    s.features.resize(d);
    for (std::size_t c = 0; c < d; ++c) {
      const ColumnInfo& col = columns_[c];
      s.features[c] =
          col.stddev == 0.0 ? 0.0 : (encoded_[i][c] - col.mean) / col.stddev;
    }
    samples_.push_back(std::move(s));
  }
}

std::size_t Dataset::positives() const {
  return static_cast<std::size_t>(
      std::count(labels_.begin(), labels_.end(), 1));
}

Dataset Preprocess(const RawTable& table) {
  const Schema& schema = table.schema;
  const std::size_t d = schema.num_features();
  const std::size_t n = table.num_rows();
  if (n == 0) throw PreprocessError("table has no rows");

  std::vector<ColumnInfo> columns(d);
  std::vector<std::vector<double>> encoded(n, std::vector<double>(d, 0.0));
  for (std::size_t c = 0; c < d; ++c) {
    ColumnInfo& col = columns[c];
    col.name = schema.names[c];
    col.kind = schema.kinds[c];
    std::unordered_map<std::string, double> codes;
    std::vector<double> observed;
    std::vector<bool> missing(n, false);
    for (std::size_t r = 0; r < n; ++r) {
      const auto& cell = table.cells[r][c];
      if (!cell.has_value()) {
        missing[r] = true;
        continue;
      }
      double value;
      if (col.kind == ColumnKind::kNumeric) {
        const auto parsed = ParseDouble(*cell);
        if (!parsed) {
          throw PreprocessError("column '" + col.name + "' row " +
                                std::to_string(r) + " is not numeric");
        }
        value = *parsed;
      } else {
        auto [it, inserted] =
            codes.try_emplace(*cell, static_cast<double>(codes.size()));
        if (inserted) col.categories.push_back(*cell);
        value = it->second;
      }
      encoded[r][c] = value;
      observed.push_back(value);
    }
    if (observed.empty()) {
      throw PreprocessError("column '" + col.name + "' has no observed values");
    }
    col.median = Median(std::move(observed));
    if (col.kind == ColumnKind::kCategorical) {
      col.median = std::round(col.median);
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (missing[r]) encoded[r][c] = col.median;
    }
  }
  return Dataset(std::move(columns), std::move(encoded), table.labels);
}

}  // namespace gradleak::dataio
