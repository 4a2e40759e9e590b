// tests/test_common.cpp

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
#include <atomic>
#include <cmath>
#include <set>
#include <vector>

#include "kboost/common.hpp"
#include "kboost/parallel.hpp"
#include "kboost/rng.hpp"

using namespace kboost;

TEST(Snr, ParsesAndOrdersWithCleanLast) {
  EXPECT_EQ(Snr::parse("-10").db(), -10);
  EXPECT_EQ(Snr::parse("+5").db(), 5);
  EXPECT_TRUE(Snr::parse("clean").is_clean());
  EXPECT_THROW(Snr::parse("5.5"), Error);
  EXPECT_THROW(Snr::parse(""), Error);
  EXPECT_THROW(Snr::clean().db(), Error);
  std::vector<Snr> v{Snr::clean(), Snr(30), Snr(-10), Snr(0)};
  std::sort(v.begin(), v.end());
  EXPECT_EQ(v.front(), Snr(-10));
  EXPECT_TRUE(v.back().is_clean());
  EXPECT_EQ(Snr(-5).str(), "-5");
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Quantile, LinearInterpolationBetweenOrderStatistics) {
  const std::vector<double> x{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(quantile_sorted(x, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(x, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(x, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile_sorted(x, 0.25), 1.75);
  EXPECT_THROW(quantile_sorted(std::vector<double>{}, 0.5), Error);
  EXPECT_THROW(quantile_sorted(x, 1.5), Error);
}

TEST(Format, FixedRoundsHalfEvenOnExactTies) {
  EXPECT_EQ(format_fixed(0.125, 2), "0.12");
  EXPECT_EQ(format_fixed(0.375, 2), "0.38");
  EXPECT_EQ(format_fixed(2.5, 0), "2");
  EXPECT_EQ(format_fixed(-0.01, 1), "0.0");
  EXPECT_EQ(format_fixed(0.084 * 100.0, 1), "8.4");
}

TEST(Format, ExactRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 12345.678, -2.5}) {
    EXPECT_EQ(parse_double(format_exact(v), "v"), v);
  }
  EXPECT_THROW(parse_double("1.5x", "v"), Error);
  EXPECT_THROW(parse_double("", "v"), Error);
}

TEST(Split, KeepsEmptyFields) {
  const auto f = split_char("a\t\tb", '\t');
  ASSERT_EQ(f.size(), 3u);
  EXPECT_EQ(f[1], "");
  EXPECT_EQ(strip_cr("x\r"), "x");
}

TEST(CounterRng, StreamIsPureFunctionOfKey) {
  CounterRng a(derive_key(7, {1, 2})), b(derive_key(7, {1, 2})), c(derive_key(7, {2, 1}));
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a(), y = b(), z = c();
    EXPECT_EQ(x, y);
    differs |= x != z;
  }
  EXPECT_TRUE(differs);
}

TEST(CounterRng, NormalMoments) {
  CounterRng r(42);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double v = r.normal();
    s += v;
    s2 += v * v;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(CounterRng, UniformRanges) {
  CounterRng r(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform(), v = r.uniform_open0();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_GT(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_LT(r.below(7), 7u);
  }
}

TEST(ParallelFor, VisitsEveryIndexOnceAndRethrows) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 5) throw Error("boom");
               }),
               Error);
}
