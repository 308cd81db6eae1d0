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

#include <cmath>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include "gradleak/dataio/dataset.h"
#include "gradleak/dataio/sampling.h"
#include "gradleak/errors.h"
#include "gradleak/ndcore/rng.h"

namespace gradleak::dataio {
namespace {

using ndcore::Rng;

const char kAdultPath[] = GRADLEAK_DATA_DIR "/adult.data";

const Dataset& Adult() {
  static const Dataset* dataset = new Dataset(Preprocess(LoadAdult(kAdultPath)));
  return *dataset;
}

std::string AdultRow(const std::string& occupation = "Adm-clerical",
                     const std::string& label = "<=50K") {
  return "39, State-gov, 77516, Bachelors, 13, Never-married, " + occupation +
         ", Not-in-family, White, Male, 2174, 0, 40, United-States, " + label;
}

TEST(LoadAdultTest, ReferenceFileCounts) {
  const RawTable table = LoadAdult(kAdultPath);
  // The distributed file has one more negative row than the commonly quoted
  // 32,560 / 24,719.
  EXPECT_EQ(table.num_rows(), 32561u);
  std::size_t positives = 0;
  for (int y : table.labels) positives += y;
  EXPECT_EQ(positives, 7841u);
  EXPECT_EQ(table.num_rows() - positives, 24720u);
}

TEST(LoadAdultTest, FourteenFieldsIsParseErrorWithLineNumber) {
  std::istringstream in(AdultRow() + "\n" +
                        "39, State-gov, 77516, Bachelors, 13, Never-married, "
                        "Adm-clerical, Not-in-family, White, Male, 2174, 0, "
                        "40, United-States\n");
  try {
    ParseAdult(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(LoadAdultTest, UnknownLabelIsParseError) {
  std::istringstream in(AdultRow("Sales", "maybe"));
  EXPECT_THROW(ParseAdult(in), ParseError);
}

TEST(LoadAdultTest, MissingOccupationAndTestSplitLabel) {
  std::istringstream in("|1x3 Cross validator\n" + AdultRow("?", ">50K.") +
                        "\n\n" + AdultRow("Sales", " <=50K. ") + "\n");
  const RawTable table = ParseAdult(in);
  ASSERT_EQ(table.num_rows(), 2u);
  EXPECT_FALSE(table.cells[0][6].has_value());
  EXPECT_EQ(*table.cells[1][6], "Sales");
  EXPECT_EQ(table.labels, (std::vector<int>{1, 0}));
}

TEST(LoadAdultTest, NonNumericInNumericColumn) {
  std::istringstream in(
      "abc, State-gov, 77516, Bachelors, 13, Never-married, Sales, "
      "Not-in-family, White, Male, 2174, 0, 40, United-States, <=50K\n");
  EXPECT_THROW(ParseAdult(in), ParseError);
}

TEST(LoadAdultTest, LoadingIsOrderStable) {
  EXPECT_EQ(Preprocess(LoadAdult(kAdultPath)), Adult());
}

RawTable SingleColumn(ColumnKind kind,
                      std::vector<std::optional<std::string>> values) {
  RawTable table;
  table.schema = Schema{{"c"}, {kind}};
  for (auto& v : values) {
    table.cells.push_back({v});
    table.labels.push_back(0);
  }
  return table;
}

TEST(PreprocessTest, MedianImputation) {
  const Dataset ds =
      Preprocess(SingleColumn(ColumnKind::kNumeric, {"1", std::nullopt, "3"}));
  EXPECT_EQ(ds.encoded()[1][0], 2.0);
  EXPECT_EQ(ds.columns()[0].median, 2.0);
}

TEST(PreprocessTest, CategoricalMedianRoundsToValidCode) {
  // Codes a=0, b=1 observed as {0, 1}: median 0.5 rounds to code 1.
  const Dataset ds = Preprocess(
      SingleColumn(ColumnKind::kCategorical, {"a", std::nullopt, "b"}));
  EXPECT_EQ(ds.columns()[0].categories, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(ds.encoded()[1][0], 1.0);
}

TEST(PreprocessTest, ConstantColumnStandardizesToZero) {
  const Dataset ds =
      Preprocess(SingleColumn(ColumnKind::kNumeric, {"5", "5", "5"}));
  for (const Sample& s : ds.samples()) EXPECT_EQ(s.features[0], 0.0);
}

TEST(PreprocessTest, AllMissingColumnIsError) {
  EXPECT_THROW(Preprocess(SingleColumn(ColumnKind::kNumeric,
                                       {std::nullopt, std::nullopt})),
               PreprocessError);
}

TEST(PreprocessTest, AdultAgeIsStandardized) {
  const Dataset& ds = Adult();
  ASSERT_EQ(ds.num_features(), 14u);
  double mean = 0.0;
  for (const Sample& s : ds.samples()) mean += s.features[0];
  mean /= static_cast<double>(ds.size());
  double var = 0.0;
  for (const Sample& s : ds.samples()) {
    var += (s.features[0] - mean) * (s.features[0] - mean);
  }
  var /= static_cast<double>(ds.size());
  EXPECT_LT(std::abs(mean), 1e-10);
  EXPECT_NEAR(var, 1.0, 1e-10);
}

TEST(PreprocessTest, NoMissingValuesRemain) {
  const Dataset& ds = Adult();
  for (const Sample& s : ds.samples()) {
    for (double v : s.features) ASSERT_TRUE(std::isfinite(v));
    ASSERT_TRUE(s.label == 0 || s.label == 1);
  }
  // Adult has '?' in workclass, occupation and native-country.
  EXPECT_FALSE(ds.columns()[6].categories.empty());
}

TEST(PreprocessTest, IdempotentOnPreprocessedTable) {
  const Dataset& ds = Adult();
  RawTable again;
  again.schema = Schema::AllNumeric(ds.num_features());
  for (const Sample& s : ds.samples()) {
    std::vector<std::optional<std::string>> row;
    for (double v : s.features) {
      std::ostringstream out;
      out << std::setprecision(17) << v;
      row.emplace_back(out.str());
    }
    again.cells.push_back(std::move(row));
    again.labels.push_back(s.label);
  }
  const Dataset twice = Preprocess(again);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t c = 0; c < ds.num_features(); ++c) {
      ASSERT_NEAR(twice[i].features[c], ds[i].features[c], 1e-10);
    }
  }
}

TEST(SampleBatchTest, SingletonDataset) {
  const Dataset ds = Preprocess(SingleColumn(ColumnKind::kNumeric, {"4"}));
  Rng rng(1);
  const Batch batch = SampleBatch(ds, 1, rng);
  EXPECT_EQ(batch.indices, (std::vector<std::size_t>{0}));
  EXPECT_EQ(batch.samples[0], ds[0]);
}

TEST(SampleBatchTest, DeterministicUnderSeed) {
  Rng a(77), b(77);
  EXPECT_EQ(SampleBatch(Adult(), 8, a).indices,
            SampleBatch(Adult(), 8, b).indices);
}

TEST(SampleBatchTest, ZeroBatchIsContractError) {
  Rng rng(1);
  EXPECT_THROW(SampleBatch(Adult(), 0, rng), ContractError);
}

TEST(SampleBatchTest, IndicesAreUniform) {
  std::vector<std::optional<std::string>> values;
  for (int i = 0; i < 10; ++i) values.emplace_back(std::to_string(i));
  const Dataset ds = Preprocess(SingleColumn(ColumnKind::kNumeric, values));
  Rng rng(2026);
  const int draws = 100000;
  std::vector<int> counts(10, 0);
  for (int i = 0; i < draws; ++i) ++counts[SampleBatch(ds, 1, rng).indices[0]];
  const double sigma = std::sqrt(draws * 0.1 * 0.9);
  for (int c : counts) EXPECT_LT(std::abs(c - draws * 0.1), 3 * sigma);
}

TEST(ResampleImbalanceTest, HitsRequestedCounts) {
  Rng rng(5);
  for (double ratio : {0.5, 0.7, 0.9}) {
    const Dataset ds = ResampleImbalance(Adult(), ratio, 1000, rng);
    EXPECT_EQ(ds.size(), 1000u);
    EXPECT_EQ(ds.positives(), static_cast<std::size_t>(std::llround(1000 * ratio)));
  }
}

TEST(ResampleImbalanceTest, RestandardizesAndDefaultsToNaturalRatio) {
  Rng rng(6);
  const Dataset ds = ResampleImbalance(Adult(), std::nullopt, 32561, rng);
  EXPECT_EQ(ds.positives(), 7841u);
  EXPECT_NEAR(7841.0 / 32561.0, 0.2408, 1e-4);
  double mean = 0.0;
  for (const Sample& s : ds.samples()) mean += s.features[2];
  EXPECT_LT(std::abs(mean / static_cast<double>(ds.size())), 1e-10);
}

TEST(ResampleImbalanceTest, MissingClassIsContractError) {
  const Dataset ds = Preprocess(SingleColumn(ColumnKind::kNumeric, {"1", "2"}));
  Rng rng(1);
  EXPECT_THROW(ResampleImbalance(ds, 0.5, 10, rng), ContractError);
  EXPECT_THROW(ResampleImbalance(Adult(), 1.0, 10, rng), ContractError);
}

TEST(GaussianPairsTest, AnalyticMutualInformation) {
  EXPECT_EQ(GaussianMutualInformation(3, 0.0), 0.0);
  EXPECT_NEAR(GaussianMutualInformation(1, 0.9), -0.5 * std::log(0.19),
              1e-15);
  EXPECT_NEAR(GaussianMutualInformation(1, 0.9), 0.8304, 1e-4);
  EXPECT_THROW(GaussianMutualInformation(1, 1.0), ContractError);
}

TEST(GaussianPairsTest, EmpiricalCorrelation) {
  Rng rng(31);
  const std::size_t n = 100000;
  const GaussianPairs pairs = MakeGaussianPairs(2, 0.6, n, rng);
  for (std::size_t k = 0; k < 2; ++k) {
    double sx = 0, sg = 0, sxx = 0, sgg = 0, sxg = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = pairs.x(i, k), g = pairs.g(i, k);
      sx += x, sg += g, sxx += x * x, sgg += g * g, sxg += x * g;
    }
    const double m = static_cast<double>(n);
    const double cov = sxg / m - (sx / m) * (sg / m);
    const double corr = cov / std::sqrt((sxx / m - sx * sx / (m * m)) *
                                        (sgg / m - sg * sg / (m * m)));
    EXPECT_NEAR(corr, 0.6, 0.01);
  }
  EXPECT_THROW(MakeGaussianPairs(1, -1.0, 10, rng), ContractError);
}

}  // namespace
}  // namespace gradleak::dataio
