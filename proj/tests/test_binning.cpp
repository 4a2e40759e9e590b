// tests/test_binning.cpp

// Copyright 2026 The kboost Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "kboost/binning.hpp"
#include "kboost/corpus.hpp"

using namespace kboost;

namespace {

std::vector<double> uniform_grid() {
  std::vector<double> v;
  for (int i = 0; i <= 100; ++i) v.push_back(i / 100.0);
  return v;
}

Partition with_nlls(const std::vector<double>& nlls) {
  std::vector<Utterance> u;
  for (std::size_t i = 0; i < nlls.size(); ++i)
    u.push_back({"u" + std::to_string(i), {"w"}, {}, nlls[i], {}});
  return Partition("p", std::move(u));
}

}  // namespace

TEST(MakeCutpoints, UniformGridGivesEqualThirds) {
  const auto spec = make_cutpoints(uniform_grid());
  const std::vector<double> want{0.05, 0.35, 0.65, 0.95};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(spec.cuts()[i], want[i], 1e-12);
  const auto& c = spec.cuts();
  EXPECT_NEAR(c[1] - c[0], c[2] - c[1], 1e-12);
  EXPECT_NEAR(c[2] - c[1], c[3] - c[2], 1e-12);
  EXPECT_EQ(spec.labels(), (std::vector<std::string>{"HP", "LP", "ZP"}));
  EXPECT_EQ(spec.reference_label(), "ZP");
}

TEST(MakeCutpoints, NoTrimExactThirds) {
  const auto spec = make_cutpoints(std::vector<double>{1, 1, 1, 2, 2, 3, 3, 4, 4, 4}, 3, 0.0);
  EXPECT_EQ(spec.cuts(), (std::vector<double>{1, 2, 3, 4}));
}

TEST(MakeCutpoints, Errors) {
  EXPECT_THROW(make_cutpoints(std::vector<double>{1, 2, 3, 4}, 3, 0.0), Error);
  EXPECT_THROW(make_cutpoints(std::vector<double>(20, 2.0)), Error);
  EXPECT_THROW(make_cutpoints(uniform_grid(), 3, 0.5), Error);
  EXPECT_THROW(make_cutpoints(uniform_grid(), 3, -0.1), Error);
  auto bad = uniform_grid();
  bad[3] = std::nan("");
  EXPECT_THROW(make_cutpoints(bad), Error);
}

TEST(MakeCutpoints, PermutationInvariant) {
  std::mt19937 g(5);
  std::normal_distribution<double> n(5.0, 1.0);
  std::vector<double> v(300);
  for (double& x : v) x = n(g);
  const auto ref = make_cutpoints(v);
  for (int r = 0; r < 20; ++r) {
    std::shuffle(v.begin(), v.end(), g);
    EXPECT_EQ(make_cutpoints(v).cuts(), ref.cuts());
  }
}

TEST(MakeCutpoints, EqualMassAndOtherBinCounts) {
  const auto mass = make_cutpoints(uniform_grid(), 3, 0.05, BinMode::EqualMass);
  EXPECT_NEAR(mass.cuts()[1], 0.35, 1e-12);
  const auto five = make_cutpoints(uniform_grid(), 5, 0.0);
  EXPECT_EQ(five.labels(), (std::vector<std::string>{"B1", "B2", "B3", "B4", "B5"}));
  EXPECT_NEAR(five.cuts()[1], 0.2, 1e-12);
}

TEST(Assign, HalfOpenIntervals) {
  const BinSpec spec({3.4, 4.5, 5.6, 6.8}, {"HP", "LP", "ZP"}, 0.05);
  EXPECT_EQ(spec.assign(4.0), "HP");
  EXPECT_EQ(spec.assign(4.5), "HP");
  EXPECT_EQ(spec.assign(4.5000001), "LP");
  EXPECT_EQ(spec.assign(5.6), "LP");
  EXPECT_EQ(spec.assign(6.8), "ZP");
  EXPECT_EQ(spec.assign(3.4), "OUT");
  EXPECT_EQ(spec.assign(7.2), "OUT");
  EXPECT_EQ(spec.assign(-1.0), "OUT");
  EXPECT_THROW(spec.assign(std::nan("")), Error);
}

TEST(Assign, TotalOverRandomValues) {
  const BinSpec spec({3.4, 4.5, 5.6, 6.8}, {"HP", "LP", "ZP"}, 0.05);
  std::mt19937 g(1);
  std::uniform_real_distribution<double> u(0, 10);
  for (int i = 0; i < 10000; ++i) {
    const double x = u(g);
    const auto label = spec.assign(x);
    const bool inside = x > 3.4 && x <= 6.8;
    EXPECT_EQ(label == "OUT", !inside);
    EXPECT_EQ(spec.assign(x), label);
  }
}

TEST(BinSpec, ValidatesAndRoundTripsJson) {
  EXPECT_THROW(BinSpec({1, 1, 2, 3}, {"HP", "LP", "ZP"}, 0), Error);
  EXPECT_THROW(BinSpec({1, 2, 3}, {"HP", "LP", "ZP"}, 0), Error);
  EXPECT_THROW(BinSpec({1, 2}, {"OUT"}, 0), Error);
  const auto spec = make_cutpoints(uniform_grid(), 3, 0.05, BinMode::EqualWidth, "dev");
  const auto back = BinSpec::from_json(nlohmann::json::parse(spec.to_json().dump()));
  EXPECT_EQ(back, spec);
  EXPECT_EQ(back.hash(), spec.hash());
  const auto other = make_cutpoints(uniform_grid(), 3, 0.1, BinMode::EqualWidth, "dev");
  EXPECT_NE(other.hash(), spec.hash());
  const auto path = std::filesystem::temp_directory_path() / "kboost_bins.json";
  save_bins(spec, path);
  EXPECT_EQ(load_bins(path), spec);
  EXPECT_THROW(BinSpec::from_json(nlohmann::json::parse(R"({"cuts":[1,2]})")), Error);
  EXPECT_THROW(BinSpec::from_json(nlohmann::json::parse(
                   R"({"mode":"odd","trim":0,"cuts":[1,2],"labels":["A"]})")),
               Error);
}

TEST(Proportions, CountsOutAndTotals) {
  const BinSpec spec({3.4, 4.5, 5.6, 6.8}, {"HP", "LP", "ZP"}, 0.05);
  const auto p = proportions(spec, with_nlls({4.0, 4.2, 5.0, 6.0, 7.0, 3.0, 6.8, 5.6, 4.5, 8.0}));
  EXPECT_EQ(p.fractions, (std::vector<double>{0.3, 0.2, 0.2}));
  EXPECT_DOUBLE_EQ(p.total, 0.7);
  EXPECT_EQ(p.n_utterances, 10u);
  const auto all_in = proportions(spec, with_nlls({4.0, 5.0, 6.0}));
  EXPECT_DOUBLE_EQ(all_in.total, 1.0);
  const auto empty_zp = proportions(spec, with_nlls({4.0, 5.0}));
  EXPECT_EQ(empty_zp.fractions[2], 0.0);
  Partition missing("m", {{"a", {"w"}, {}, 4.0, {}}, {"b", {"w"}, {}, {}, {}}});
  try {
    proportions(spec, missing);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(" b"), std::string::npos);
  }
}

TEST(MakeCutpoints, MatchesIndependentFixtureCuts) {
  const auto part = load_manifest(std::string(KBOOST_FIXTURES) + "/dev.tsv");
  std::vector<double> nlls;
  for (const auto& u : part.utterances()) nlls.push_back(*u.nll);
  const auto spec = make_cutpoints(nlls);
  std::ifstream f(std::string(KBOOST_FIXTURES) + "/golden_cuts.txt");
  for (double c : spec.cuts()) {
    double want = 0;
    ASSERT_TRUE(f >> want);
    EXPECT_NEAR(c, want, 1e-12);
  }
}
