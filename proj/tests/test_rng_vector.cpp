// Copyright 2026 The biasmom Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "biasmom/rng.hpp"
#include "biasmom/vector.hpp"

namespace biasmom {
namespace {

TEST(Rng, SplitMixReferenceValues) {
  // First outputs of SplitMix64 seeded with 1234567 (reference C code).
  Rng rng(1234567);
  EXPECT_EQ(rng.next_u64(), 6457827717110365317ULL);
  EXPECT_EQ(rng.next_u64(), 3203168211198807973ULL);
  EXPECT_EQ(rng.next_u64(), 9817491932198370423ULL);
}

TEST(Rng, SubstreamIsPureFunctionOfKey) {
  Rng a = Rng::substream(7, 3, 2, 11, StreamTag::noise);
  Rng b = Rng::substream(7, 3, 2, 11, StreamTag::noise);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, SubstreamKeysGiveDistinctStreams) {
  std::set<std::uint64_t> firsts;
  for (std::uint64_t seed = 0; seed < 3; ++seed)
    for (std::uint64_t trial = 0; trial < 3; ++trial)
      for (std::uint64_t worker = 0; worker < 3; ++worker)
        for (std::uint64_t k = 0; k < 3; ++k)
          for (StreamTag tag : {StreamTag::noise, StreamTag::sampling}) {
            firsts.insert(Rng::substream(seed, trial, worker, k, tag).next_u64());
          }
  EXPECT_EQ(firsts.size(), 3u * 3 * 3 * 3 * 2);
}

TEST(Rng, UniformStaysInUnitInterval) {
  Rng rng(5);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(Rng, UniformIndexCoversRangeEvenly) {
  Rng rng(9);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto j = rng.uniform_index(7);
    ASSERT_LT(j, 7u);
    ++counts[j];
  }
  const double p = 1.0 / 7.0;
  for (int c : counts) EXPECT_NEAR(c / double(n), p, 4.0 * std::sqrt(p * (1 - p) / n));
}

TEST(Rng, GaussianMoments) {
  Rng rng(42);
  const int n = 200000;
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.gaussian();
    s1 += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  EXPECT_NEAR(s1 / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(s4 / n, 3.0, 4.0 * std::sqrt(96.0 / n));
}

TEST(Average, PairwiseTreeOrder) {
  // ((a + b) + (c + (d + e))) for five parts.
  std::vector<Vector> parts;
  for (double v : {1e16, 1.0, -1e16, 1.0, 1.0}) parts.push_back(Vector::Constant(1, v));
  const double expect = ((1e16 + 1.0) + (-1e16 + (1.0 + 1.0))) / 5.0;
  EXPECT_EQ(average(std::span<const Vector>(parts))[0], expect);
}

TEST(Average, ScalarMatchesVectorPath) {
  std::vector<double> xs = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  std::vector<Vector> vs;
  for (double x : xs) vs.push_back(Vector::Constant(1, x));
  EXPECT_EQ(average(std::span<const double>(xs)), average(std::span<const Vector>(vs))[0]);
}

TEST(Average, EmptyThrows) {
  std::vector<Vector> none;
  EXPECT_THROW(average(std::span<const Vector>(none)), DimensionError);
}

TEST(VectorChecks, FiniteAndDimension) {
  Vector v = Vector::Ones(3);
  EXPECT_TRUE(all_finite(v));
  EXPECT_NO_THROW(require_dimension(v, 3, "v"));
  EXPECT_THROW(require_dimension(v, 4, "v"), DimensionError);
  v[1] = std::nan("");
  EXPECT_FALSE(all_finite(v));
  EXPECT_THROW(require_finite(v, "v"), DataError);
}

}  // namespace
}  // namespace biasmom
