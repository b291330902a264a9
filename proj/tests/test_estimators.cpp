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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "biasmom/composite.hpp"
#include "biasmom/estimators.hpp"
#include "biasmom/problems.hpp"
#include "biasmom/rng.hpp"
#include "biasmom/theory.hpp"

namespace biasmom {
namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Vector random_vector(Rng& rng, Eigen::Index d, double scale = 1.0) {
  Vector v(d);
  for (Eigen::Index c = 0; c < d; ++c) v[c] = scale * rng.gaussian();
  return v;
}

// Stable sort by decreasing magnitude, keep the first k.
Vector top_k_oracle(const Vector& g, std::size_t k) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(g.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&g](Eigen::Index a, Eigen::Index b) {
    return std::abs(g[a]) > std::abs(g[b]);
  });
  Vector out = Vector::Zero(g.size());
  for (std::size_t r = 0; r < k; ++r) out[idx[r]] = g[idx[r]];
  return out;
}

TEST(TopK, Examples) {
  EXPECT_EQ(top_k(vec({3, -1, 2}), 2), vec({3, 0, 2}));
  const Vector g = vec({0.5, -7, 2, 1});
  EXPECT_EQ(top_k(g, 4), g);
  EXPECT_EQ(*contraction_factor(EstimatorSpec::top_k(4), 4), 1.0);
  const Vector ones = vec({1, 1, 1, 1});
  const Vector q = top_k(ones, 2);
  EXPECT_EQ(q, vec({1, 1, 0, 0}));
  EXPECT_EQ((q - ones).squaredNorm(), 2.0);
  EXPECT_EQ((1.0 - 2.0 / 4.0) * ones.squaredNorm(), 2.0);
}

TEST(TopK, RangeErrors) {
  EXPECT_THROW(top_k(vec({1, 2}), 0), ConfigError);
  EXPECT_THROW(top_k(vec({1, 2}), 3), ConfigError);
  auto p = make_quadratic(Matrix::Identity(3, 3), 1);
  EXPECT_THROW(EstimatorSpec::top_k(4).validate(*p), ConfigError);
  EXPECT_NO_THROW(EstimatorSpec::top_k(3).validate(*p));
}

TEST(TopK, ExhaustiveTiePermutations) {
  for (std::vector<double> base : {std::vector<double>{2, 2, 1, 1, 0},
                                   std::vector<double>{1, 1, 1, 1, 1},
                                   std::vector<double>{3, 1, 1, 0, 0}}) {
    std::sort(base.begin(), base.end());
    do {
      for (int signs = 0; signs < 32; ++signs) {
        Vector g(5);
        for (int c = 0; c < 5; ++c) g[c] = ((signs >> c) & 1) ? -base[c] : base[c];
        for (std::size_t k = 1; k <= 5; ++k) {
          const Vector q = top_k(g, k);
          ASSERT_EQ(q, top_k_oracle(g, k));
          ASSERT_LE((q - g).squaredNorm(), (5.0 - k) * g.squaredNorm() / 5.0);
        }
      }
    } while (std::next_permutation(base.begin(), base.end()));
  }
}

TEST(TopK, RandomContraction) {
  Rng rng(21);
  for (int t = 0; t < 10000; ++t) {
    const auto d = static_cast<std::size_t>(1 + rng.uniform_index(20));
    const std::size_t k = 1 + rng.uniform_index(d);
    const Vector g = random_vector(rng, static_cast<Eigen::Index>(d));
    const double alpha = *contraction_factor(EstimatorSpec::top_k(k), d);
    ASSERT_LE((top_k(g, k) - g).squaredNorm(),
              (1.0 - alpha) * g.squaredNorm() * (1 + 1e-12));
    ASSERT_EQ(top_k(g, k), top_k_oracle(g, k));
  }
}

TEST(ScaledSign, Examples) {
  const Vector c = Vector::Constant(6, 0.75);
  EXPECT_EQ(scaled_sign(c), c);
  EXPECT_DOUBLE_EQ(scaled_sign_alpha(c), 1.0);
  const Vector e = vec({1, 0, 0, 0});
  const Vector q = scaled_sign(e);
  EXPECT_EQ(q, vec({0.25, 0, 0, 0}));
  EXPECT_DOUBLE_EQ((q - e).squaredNorm(), 0.5625);
  EXPECT_LE((q - e).squaredNorm(), (1.0 - 0.25) * 1.0);
  EXPECT_EQ(scaled_sign(Vector::Zero(3)), Vector::Zero(3));
  EXPECT_EQ(scaled_sign(vec({-2, 0, 4})), vec({-2, 0, 2}));
  EXPECT_EQ(*contraction_factor(EstimatorSpec::scaled_sign(), 8), 0.125);
}

TEST(ScaledSign, RandomContraction) {
  Rng rng(22);
  for (int t = 0; t < 10000; ++t) {
    const auto d = static_cast<Eigen::Index>(1 + rng.uniform_index(30));
    Vector g = random_vector(rng, d);
    if (t % 3 == 0) g[rng.uniform_index(d)] = 0.0;
    const double residual = (scaled_sign(g) - g).squaredNorm();
    const double per_input = scaled_sign_alpha(g);
    ASSERT_GE(per_input, 1.0 / static_cast<double>(d) * (1 - 1e-12));
    ASSERT_LE(residual, (1.0 - per_input) * g.squaredNorm() + 1e-12 * g.squaredNorm());
    ASSERT_LE(residual, (1.0 - 1.0 / static_cast<double>(d)) * g.squaredNorm() * (1 + 1e-12));
  }
}

TEST(Clip, Examples) {
  EXPECT_EQ(clip(vec({3, 4}), 10.0), vec({3, 4}));
  const Vector q = clip(vec({6, 8}), 5.0);
  EXPECT_EQ(q, vec({3, 4}));
  EXPECT_DOUBLE_EQ((q - vec({6, 8})).norm(), 5.0);
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_EQ(clip(vec({1e300, -1e300}), inf), vec({1e300, -1e300}));
  EXPECT_THROW(clip(vec({1}), 0.0), ConfigError);
  EXPECT_FALSE(contraction_factor(EstimatorSpec::clip(1.0), 3).has_value());
}

TEST(Clip, RandomDistanceIdentity) {
  Rng rng(23);
  for (int t = 0; t < 10000; ++t) {
    const auto d = static_cast<Eigen::Index>(1 + rng.uniform_index(10));
    const Vector g = random_vector(rng, d, std::exp(3.0 * rng.gaussian()));
    const double tau = std::exp(2.0 * rng.gaussian());
    const Vector q = clip(g, tau);
    const double dist = (q - g).norm();
    const double expect = std::max(g.norm() - tau, 0.0);
    ASSERT_NEAR(dist, expect, 1e-12 * std::max(1.0, g.norm()));
    ASSERT_LE(q.norm(), tau * (1 + 1e-15));
    if (g.norm() > 0) ASSERT_NEAR(q.dot(g), q.norm() * g.norm(), 1e-12 * g.squaredNorm());
  }
}

TEST(ApplyEstimator, DispatchAndMismatch) {
  const Vector raw = vec({0.1, -0.4, 0.3});
  EXPECT_EQ(apply_estimator(EstimatorSpec::identity(), raw), raw);
  EXPECT_EQ(apply_estimator(EstimatorSpec::top_k(3), raw), raw);
  EXPECT_EQ(apply_estimator(EstimatorSpec::clip(raw.norm()), raw), raw);
  EXPECT_EQ(apply_estimator(EstimatorSpec::top_k(1), raw), vec({0, -0.4, 0}));
  EXPECT_THROW(apply_estimator(EstimatorSpec::composite(1, 1), raw), ConfigError);
  auto p = make_quadratic(Matrix::Identity(3, 3), 1);
  EXPECT_THROW(EstimatorSpec::composite(1, 1).validate(*p), ConfigError);
  EXPECT_THROW(worker_estimate(*p, EstimatorSpec::composite(1, 1), NoiseSpec{}, 0,
                               raw, 1, 0, 0),
               ConfigError);
  EXPECT_THROW(EstimatorSpec::clip(-1.0).validate(*p), ConfigError);
}

TEST(Sampling, WithoutReplacementIsUniform) {
  Rng rng(5);
  std::vector<int> hits(6, 0);
  const int draws = 60000;
  for (int t = 0; t < draws; ++t) {
    const auto idx = sample_without_replacement(rng, 6, 2);
    ASSERT_EQ(idx.size(), 2u);
    ASSERT_LT(idx[0], idx[1]);
    for (std::size_t j : idx) ++hits[j];
  }
  // Each index appears with probability 1/3.
  for (int h : hits) EXPECT_NEAR(h / static_cast<double>(draws), 1.0 / 3.0, 0.01);
  EXPECT_THROW(sample_without_replacement(rng, 3, 4), ConfigError);
  EXPECT_THROW(sample_without_replacement(rng, 3, 0), ConfigError);
}

TEST(Composite, FullBatchEqualsWorkerGradient) {
  auto toy = make_toy_composite(2);
  auto maml = make_maml(make_classification_data(3, 4, 3, 5), 0.1);
  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    const Vector x = random_vector(rng, 2);
    for (std::size_t i = 0; i < 2; ++i) {
      Rng r(t);
      const Vector est = composite_estimate(*toy, i, x, 3, 3, r);
      const Vector exact = toy->worker_gradient(i, x);
      EXPECT_LE((est - exact).norm(), 1e-12 * std::max(1.0, exact.norm()));
    }
    const Vector y = random_vector(rng, 3);
    for (std::size_t i = 0; i < 3; ++i) {
      Rng r(t);
      const Vector est = composite_estimate(*maml, i, y, 4, 4, r);
      const Vector exact = maml->worker_gradient(i, y);
      EXPECT_LE((est - exact).norm(), 1e-12 * std::max(1.0, exact.norm()));
    }
  }
}

TEST(Composite, SubsetEnumerationOfInnerValue) {
  auto toy = make_toy_composite(1);
  const Vector x = vec({2, -3});
  std::vector<Vector> g;
  for (std::size_t j = 0; j < 3; ++j) g.push_back(toy->inner_component(0, j, x));
  const Vector total = g[0] + g[1] + g[2];
  const std::vector<std::size_t> all = {0, 1, 2};
  const Vector g_full = inner_value(*toy, 0, x, all);
  for (std::size_t s = 1; s <= 3; ++s) {
    // Integer bookkeeping: every index lies in C(2, s-1) of the C(3, s) subsets.
    Vector subset_sums = Vector::Zero(2);
    Vector mean = Vector::Zero(2);
    int subsets = 0;
    for (int mask = 1; mask < 8; ++mask) {
      if (static_cast<std::size_t>(__builtin_popcount(mask)) != s) continue;
      std::vector<std::size_t> idx;
      for (std::size_t j = 0; j < 3; ++j)
        if (mask & (1 << j)) idx.push_back(j);
      for (std::size_t j : idx) subset_sums += g[j];
      mean += inner_value(*toy, 0, x, idx);
      ++subsets;
    }
    const double ways = (s == 2) ? 2.0 : 1.0;  // C(2, s-1)
    EXPECT_EQ(subset_sums, ways * total);
    mean /= subsets;
    EXPECT_LE((mean - g_full).norm(), 1e-14 * g_full.norm());
  }
}

TEST(Composite, MamlWithoutInnerStepIsSubsampledGradient) {
  const ClassificationData data = make_classification_data(2, 6, 4, 13);
  auto maml = make_maml(data, 0.0);
  Rng prng(1);
  for (int t = 0; t < 50; ++t) {
    const Vector x = random_vector(prng, 4);
    const std::size_t s_g = 1 + t % 6, s_f = 1 + (t / 6) % 6;
    Rng r1(100 + t), r2(100 + t);
    const Vector est = composite_estimate(*maml, 1, x, s_g, s_f, r1);
    sample_without_replacement(r2, 6, s_g);
    const auto set_f = sample_without_replacement(r2, 6, s_f);
    Vector oracle = Vector::Zero(4);
    for (std::size_t j : set_f) {
      const Vector a = data[1].features.row(static_cast<Eigen::Index>(j)).transpose();
      const double b = data[1].labels[static_cast<Eigen::Index>(j)];
      oracle += -b * a / (1.0 + std::exp(b * a.dot(x)));
    }
    oracle /= static_cast<double>(s_f);
    EXPECT_LE((est - oracle).norm(), 1e-12 * std::max(1.0, oracle.norm()));
  }
}

TEST(Composite, RangeErrors) {
  auto toy = make_toy_composite(1);
  Rng rng(1);
  EXPECT_THROW(composite_estimate(*toy, 0, vec({0, 0}), 0, 1, rng), ConfigError);
  EXPECT_THROW(composite_estimate(*toy, 0, vec({0, 0}), 1, 4, rng), ConfigError);
  EXPECT_THROW(EstimatorSpec::composite(4, 1).validate(*toy), ConfigError);
  EXPECT_NO_THROW(EstimatorSpec::composite(3, 3).validate(*toy));
}

TEST(WorkerEstimate, DeterministicBits) {
  auto p = make_quadratic(random_gaussian_matrix(6, 6, 3), 2);
  NoiseSpec n;
  n.sigma2 = 0.3;
  const Vector x = Vector::Ones(6);
  for (const EstimatorSpec& s : {EstimatorSpec::identity(), EstimatorSpec::top_k(2),
                                 EstimatorSpec::scaled_sign(), EstimatorSpec::clip(0.5)}) {
    const Vector a = worker_estimate(*p, s, n, 1, x, 77, 3, 12);
    const Vector b = worker_estimate(*p, s, n, 1, x, 77, 3, 12);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, worker_estimate(*p, s, n, 1, x, 77, 3, 13));
  }
  auto toy = make_toy_composite(1);
  EXPECT_EQ(worker_estimate(*toy, EstimatorSpec::composite(1, 2), n, 0, vec({1, 1}), 5, 0, 4),
            worker_estimate(*toy, EstimatorSpec::composite(1, 2), n, 0, vec({1, 1}), 5, 0, 4));
}

TEST(MeasureEta, ExactIdentityIsZero) {
  auto p = make_quadratic(random_gaussian_matrix(5, 5, 3), 3);
  const EtaEstimate e = measure_eta(*p, Vector::Ones(5), EstimatorSpec::identity(),
                                    NoiseSpec{}, 50, 1);
  EXPECT_EQ(e.mean_sq, 0.0);
  EXPECT_EQ(e.std_error, 0.0);
  EXPECT_THROW(measure_eta(*p, Vector::Ones(5), EstimatorSpec::identity(), NoiseSpec{}, 0, 1),
               ConfigError);
}

TEST(MeasureEta, GaussianAveraging) {
  const std::size_t n = 4, d = 8;
  auto p = make_quadratic(random_gaussian_matrix(d, d, 3), n);
  NoiseSpec noise;
  noise.sigma2 = 0.2;
  const EtaEstimate e = measure_eta(*p, Vector::Ones(d), EstimatorSpec::identity(),
                                    noise, 20000, 4);
  const double expect = static_cast<double>(d) * noise.sigma2 / static_cast<double>(n);
  EXPECT_NEAR(e.mean_sq, expect, 4.0 * e.std_error);
  EXPECT_GT(e.std_error, 0.0);
}

TEST(MeasureEta, TopKWithinCompressionBound) {
  const std::vector<double> spec = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  auto p = make_quadratic(matrix_from_spectrum(spec, 2024), 1);
  NoiseSpec noise;
  noise.sigma2 = 0.01;
  noise.delta_offset = 0.001;
  const std::size_t d = 10, k = 5;
  const Vector x0 = Vector::Constant(10, 3.0);
  const EstimatorSpec est = EstimatorSpec::top_k(k);
  const EtaEstimate e = measure_eta(*p, x0, est, noise, 5000, 6);
  // Single worker: no heterogeneity; per-worker error moment d sigma2 + ||offset||^2.
  const AffineConstants bc = affine_constants_compression(
      *contraction_factor(est, d), noise.error_second_moment(d), 0.0);
  const double bound = bc.b * p->full_gradient(x0).squaredNorm() + bc.c;
  EXPECT_LE(e.mean_sq + 3.0 * e.std_error, bound);
}

}  // namespace
}  // namespace biasmom
