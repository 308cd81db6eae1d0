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

#ifndef GRADLEAK_DATAIO_DATASET_H_
#define GRADLEAK_DATAIO_DATASET_H_

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace gradleak::dataio {

enum class ColumnKind { kNumeric, kCategorical };

// Feature columns of a labelled table. The label is always the column after
// the last feature.
struct Schema {
  std::vector<std::string> names;
  std::vector<ColumnKind> kinds;

  std::size_t num_features() const { return names.size(); }

  // The 14 census attributes, in file order.
  static Schema Adult();
  static Schema AllNumeric(std::size_t num_features);
};

// Parsed but unprocessed rows. A missing cell ("?") is std::nullopt.
struct RawTable {
  Schema schema;
  std::vector<std::vector<std::optional<std::string>>> cells;
  std::vector<int> labels;

  std::size_t num_rows() const { return labels.size(); }
};

// Comma-separated rows of num_features + 1 fields. Whitespace around fields
// is ignored, blank lines and lines starting with '|' are skipped, and the
// label tokens ">50K" / "<=50K" may carry a trailing '.'. Numeric cells are
// validated here so errors can name the line.
RawTable ParseAdult(std::istream& in, const Schema& schema = Schema::Adult());
RawTable LoadAdult(const std::filesystem::path& path,
                   const Schema& schema = Schema::Adult());

struct Sample {
  std::vector<double> features;  // standardized
  int label = 0;                 // 0 or 1

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct ColumnInfo {
  std::string name;
  ColumnKind kind = ColumnKind::kNumeric;
  // Category tokens in first-appearance order; code i is categories[i].
  std::vector<std::string> categories;
  double median = 0.0;  // imputation value, in encoded units
  double mean = 0.0;
  double stddev = 0.0;  // population; 0 marks a constant column

  friend bool operator==(const ColumnInfo&, const ColumnInfo&) = default;
};

// Immutable preprocessed dataset. Keeps the imputed, encoded (but not yet
// standardized) values so subsets can be re-standardized on their own.
class Dataset {
 public:
  // Standardizes `encoded` using statistics of these rows only.
  Dataset(std::vector<ColumnInfo> columns,
          std::vector<std::vector<double>> encoded, std::vector<int> labels);

  const std::vector<Sample>& samples() const { return samples_; }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  std::size_t size() const { return samples_.size(); }
  std::size_t num_features() const { return columns_.size(); }
  const std::vector<ColumnInfo>& columns() const { return columns_; }
  const std::vector<std::vector<double>>& encoded() const { return encoded_; }
  const std::vector<int>& labels() const { return labels_; }
  std::size_t positives() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::vector<ColumnInfo> columns_;
  std::vector<std::vector<double>> encoded_;
  std::vector<int> labels_;
  std::vector<Sample> samples_;
};

// Integer-encodes categoricals by first appearance, imputes missing cells with
// the column median (rounded to a valid code for categoricals) and
// standardizes every column. Throws PreprocessError when a column has no
// observed values.
Dataset Preprocess(const RawTable& table);

}  // namespace gradleak::dataio

#endif  // GRADLEAK_DATAIO_DATASET_H_
