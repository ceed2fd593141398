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

#include <cmath>
#include <limits>
#include <random>

#include "mlcas/error.hpp"
#include "mlcas/io.hpp"
#include "test_util.hpp"

namespace mlcas {
namespace {

TEST(FormatDouble, SeventeenSignificantDigitsRoundTrip) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> dist(-1e6, 1e6);
  for (int i = 0; i < 2000; ++i) {
    const double v = dist(gen) * std::pow(10.0, static_cast<int>(gen() % 40) - 20);
    const auto parsed = io::parse_double(io::format_double(v));
    ASSERT_TRUE(parsed);
    ASSERT_EQ(*parsed, v);
  }
  EXPECT_EQ(io::format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(io::format_double(2.0), "2");
}

TEST(FormatDouble, NegativeZeroPrintsAsZero) { EXPECT_EQ(io::format_double(-0.0), "0"); }

TEST(ParseDouble, IsStrict) {
  EXPECT_EQ(io::parse_double("1.5"), 1.5);
  EXPECT_EQ(io::parse_double("-2e3"), -2000.0);
  EXPECT_FALSE(io::parse_double(""));
  EXPECT_FALSE(io::parse_double("1.5x"));
  EXPECT_FALSE(io::parse_double("abc"));
  EXPECT_FALSE(io::parse_double("1,5"));
}

TEST(Csv, ParsesQuotesAndComments) {
  const auto t = io::parse_csv("\xEF\xBB\xBF# comment\n\na,b\n\"x, y\",\"he said \"\"hi\"\"\"\n1,\"multi\nline\"\n", "t");
  ASSERT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][0], "x, y");
  EXPECT_EQ(t.rows[0][1], "he said \"hi\"");
  EXPECT_EQ(t.rows[1][1], "multi\nline");
}

TEST(Csv, HandlesCrLf) {
  const auto t = io::parse_csv("a,b\r\n1,2\r\n", "t");
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0][1], "2");
}

TEST(Csv, RejectsRaggedRows) {
  try {
    io::parse_csv("a,b\n1,2,3\n", "ragged");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedCsv);
  }
  EXPECT_THROW(io::parse_csv("a,b\n\"open,2\n", "t"), Error);
}

TEST(Csv, EscapeRoundTrips) {
  const std::vector<std::string> fields{"plain", "com,ma", "quo\"te", "new\nline", "#hash", ""};
  const auto t = io::parse_csv("h1,h2,h3,h4,h5,h6\n" + io::csv_row(fields), "t");
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0], fields);
}

TEST(Files, AtomicWriteReplacesContent) {
  testing::TempDir dir("io");
  const auto path = dir.path() / "out.txt";
  io::write_file_atomic(path, "first");
  io::write_file_atomic(path, "second");
  EXPECT_EQ(io::read_file(path), "second");
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "out.txt.tmp"));
}

TEST(Files, MissingFileHasCode) {
  try {
    io::read_file("/nonexistent/mlcas/file");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingFile);
  }
}

}  // namespace
}  // namespace mlcas
