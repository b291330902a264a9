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

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <vector>

#include "biasmom/audit.hpp"
#include "biasmom/composite.hpp"
#include "biasmom/estimators.hpp"

namespace biasmom {
namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

Vector random_vector(Rng& rng, Eigen::Index d, double scale = 1.0) {
  Vector v(d);
  for (Eigen::Index c = 0; c < d; ++c) v[c] = scale * rng.gaussian();
  return v;
}

// Five integer inner maps and five targets for one worker.
std::shared_ptr<const ToyCompositeProblem> five_component_toy() {
  ToyWorker w;
  w.inner = {{mat2(1, 0, 2, 1), vec({0, 1})},  {mat2(-1, 3, 0, 2), vec({2, 0})},
             {mat2(0, 1, 1, 0), vec({-1, -1})}, {mat2(2, 2, -1, 1), vec({3, -2})},
             {mat2(1, -1, 1, 1), vec({0, 4})}};
  w.targets = {vec({0, 0}), vec({1, 2}), vec({-3, 1}), vec({2, -2}), vec({5, 0})};
  return std::make_shared<const ToyCompositeProblem>(std::vector<ToyWorker>{w});
}

std::vector<std::vector<std::size_t>> subsets_of_size(std::size_t m, std::size_t s) {
  std::vector<std::vector<std::size_t>> out;
  for (unsigned mask = 1; mask < (1u << m); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != s) continue;
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < m; ++j)
      if (mask & (1u << j)) idx.push_back(j);
    out.push_back(idx);
  }
  return out;
}

double binom(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t t = 1; t <= k; ++t) r = r * static_cast<double>(n - k + t) / static_cast<double>(t);
  return r;
}

Vector mean_of(const std::vector<Vector>& xs) {
  Vector s = Vector::Zero(xs.front().size());
  for (const Vector& x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

TEST(InnerValue, FullAndSingleton) {
  auto toy = make_toy_composite(2);
  const Vector x = vec({1.5, -2});
  const Vector g0 = toy->inner_component(1, 0, x);
  EXPECT_EQ(inner_value(*toy, 1, x, std::vector<std::size_t>{0}), g0);
  std::vector<Vector> parts;
  for (std::size_t j = 0; j < 3; ++j) parts.push_back(toy->inner_component(1, j, x));
  EXPECT_EQ(inner_value(*toy, 1, x, detail::full_index(3)),
            average(std::span<const Vector>(parts)));
  EXPECT_THROW(inner_value(*toy, 1, x, std::vector<std::size_t>{}), DimensionError);
  EXPECT_THROW(inner_value(*toy, 1, x, std::vector<std::size_t>{3}), DimensionError);
  EXPECT_THROW(inner_value(*toy, 1, x, std::vector<std::size_t>{1, 1}), DimensionError);
}

// For every subset size S: sum over the C(m, S) subsets of S * subset-mean
// equals C(m-1, S-1) * total. Power-of-two S divides exactly.
TEST(SubsetEnumeration, InnerValueJacobianActionAndOuterGradient) {
  auto toy = five_component_toy();
  const std::size_t m = 5;
  const Vector x = vec({2, -1});
  const Vector u = vec({3, -2});
  const Vector y = vec({1, 3});
  Vector total_g = Vector::Zero(2), total_j = Vector::Zero(2), total_f = Vector::Zero(2);
  for (std::size_t j = 0; j < m; ++j) {
    total_g += toy->inner_component(0, j, x);
    total_j += toy->inner_jtv(0, j, x, u);
    total_f += toy->outer_gradient(0, j, y);
  }
  for (std::size_t s = 1; s <= m; ++s) {
    Vector acc_g = Vector::Zero(2), acc_j = Vector::Zero(2), acc_f = Vector::Zero(2);
    std::vector<Vector> means;
    for (const auto& idx : subsets_of_size(m, s)) {
      const Vector gs = inner_value(*toy, 0, x, idx);
      means.push_back(gs);
      acc_g += static_cast<double>(s) * gs;
      Vector js = Vector::Zero(2), fs = Vector::Zero(2);
      for (std::size_t j : idx) {
        js += toy->inner_jtv(0, j, x, u);
        fs += toy->outer_gradient(0, j, y);
      }
      acc_j += js;
      acc_f += fs;
    }
    const double ways = binom(m - 1, s - 1);
    EXPECT_EQ(acc_j, ways * total_j) << "S=" << s;
    EXPECT_EQ(acc_f, ways * total_f) << "S=" << s;
    if (s == 1 || s == 2 || s == 4) {
      EXPECT_EQ(acc_g, ways * total_g) << "S=" << s;
    } else {
      EXPECT_LE((acc_g - ways * total_g).norm(), 1e-14 * total_g.norm()) << "S=" << s;
    }
    const Vector full = inner_value(*toy, 0, x, detail::full_index(m));
    EXPECT_LE((mean_of(means) - full).norm(), 1e-14 * full.norm());
  }
}

TEST(ChainedGradient, ToyClosedFormByHand) {
  // Mean map [[1,1],[2/3,1/3]], mean offset 0; at x = (3,0): y = (3,2),
  // f = (97 + 97 + 256) / 12 = 37.5, grad = (367/9, 332/9).
  auto toy = make_toy_composite(1);
  const Vector x = vec({3, 0});
  EXPECT_NEAR(toy->worker_value(0, x), 37.5, 1e-12 * 37.5);
  const Vector g = toy->worker_gradient(0, x);
  EXPECT_NEAR(g[0], 367.0 / 9.0, 1e-12 * 41.0);
  EXPECT_NEAR(g[1], 332.0 / 9.0, 1e-12 * 41.0);
}

TEST(ChainedGradient, ToyClosedFormRandomPoints) {
  auto toy = make_toy_composite(3);
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const Vector x = random_vector(rng, 2, 2.0);
    for (std::size_t i = 0; i < 3; ++i) {
      const ToyWorker& w = toy->workers()[i];
      Matrix mbar = Matrix::Zero(2, 2);
      Vector obar = Vector::Zero(2);
      for (const ToyInner& in : w.inner) {
        mbar += in.map;
        obar += in.offset;
      }
      mbar /= 3.0;
      obar /= 3.0;
      const Vector yy = mbar * x + obar;
      Vector u = Vector::Zero(2);
      for (const Vector& tgt : w.targets) u += (yy - tgt).array().cube().matrix();
      u /= 3.0;
      const Vector oracle = mbar.transpose() * u;
      const Vector got = toy->worker_gradient(i, x);
      EXPECT_LE((got - oracle).norm(), 1e-12 * std::max(1.0, oracle.norm()));
    }
  }
}

TEST(ChainedGradient, FiniteDifferences) {
  auto toy = make_toy_composite(2);
  EXPECT_TRUE(audit_gradients(*toy, 100, 1e-4, 1).passed());
  EXPECT_TRUE(audit_gradients(*five_component_toy(), 100, 1e-4, 2).passed());
  for (double gi : {0.0, 0.1, 0.5}) {
    auto maml = make_maml(make_classification_data(3, 4, 3, 7), gi);
    const AuditOutcome o = audit_gradients(*maml, 100, 1e-4, 3);
    EXPECT_TRUE(o.passed()) << gi << " " << o.worst_margin;
  }
}

TEST(ChainedGradient, MamlWithoutInnerStepIsBaseGradient) {
  const ClassificationData data = make_classification_data(2, 5, 3, 31);
  auto maml = make_maml(data, 0.0);
  auto base = make_logistic_l2(data, 1e-300);
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    const Vector x = random_vector(rng, 3);
    for (std::size_t i = 0; i < 2; ++i) {
      Vector oracle = Vector::Zero(3);
      for (Eigen::Index j = 0; j < 5; ++j) {
        const Vector a = data[i].features.row(j).transpose();
        const double b = data[i].labels[j];
        oracle += -b * a / (1.0 + std::exp(b * a.dot(x)));
      }
      oracle /= 5.0;
      EXPECT_LE((maml->worker_gradient(i, x) - oracle).norm(), 1e-12 * std::max(1.0, oracle.norm()));
      EXPECT_LE((base->worker_gradient(i, x) - oracle).norm(), 1e-12 * std::max(1.0, oracle.norm()));
    }
  }
}

TEST(ChainedGradient, SubsampledEstimatorIsBiased) {
  auto toy = make_toy_composite(1);
  const Vector x = vec({1, -1});
  std::vector<Vector> outs;
  for (const auto& sg : subsets_of_size(3, 1)) {
    outs.push_back(chained_gradient(*toy, 0, x, sg, detail::full_index(3)));
  }
  const Vector expectation = mean_of(outs);
  const Vector exact = toy->worker_gradient(0, x);
  EXPECT_GT((expectation - exact).norm(), 1e-3 * exact.norm());
  // Full inner set removes the bias.
  std::vector<Vector> full_g;
  for (const auto& sf : subsets_of_size(3, 1)) {
    full_g.push_back(chained_gradient(*toy, 0, x, detail::full_index(3), sf));
  }
  EXPECT_LE((mean_of(full_g) - exact).norm(), 1e-12 * exact.norm());
}

TEST(MamlConstants, StoredValuesFollowLossConstants) {
  const ClassificationData data = make_classification_data(3, 4, 3, 7);
  const double gi = 0.1;
  auto maml = make_maml(data, gi);
  double r2 = 0.0;
  for (const WorkerData& w : data)
    for (Eigen::Index j = 0; j < w.features.rows(); ++j) r2 = std::max(r2, w.features.row(j).squaredNorm());
  const double ll = r2 / 4.0;
  ASSERT_TRUE(maml->constants().has_value());
  const CompositeConstants& c = *maml->constants();
  EXPECT_DOUBLE_EQ(c.ell_g, 1.0 + gi * ll);
  EXPECT_DOUBLE_EQ(c.lip_grad_g, 2.0 * gi * ll);
  EXPECT_DOUBLE_EQ(c.ell_f, std::sqrt(r2));
  EXPECT_DOUBLE_EQ(c.lip_grad_f, ll);
  EXPECT_DOUBLE_EQ(maml->smoothness(), c.lip_grad_g * c.ell_f + c.ell_g * c.ell_g * c.lip_grad_f);
  EXPECT_THROW(make_maml(data, -0.1), ConfigError);
}

TEST(MamlConstants, InnerLipschitzBoundsOnSampledPairs) {
  const ClassificationData data = make_classification_data(3, 4, 3, 7);
  for (double gi : {0.1, 1.0}) {
    auto maml = make_maml(data, gi);
    const CompositeConstants& c = *maml->constants();
    Rng rng(17);
    double worst_value = 0.0, worst_jac = 0.0, worst_uniform = 0.0;
    for (int t = 0; t < 10000; ++t) {
      const std::size_t i = rng.uniform_index(3), j = rng.uniform_index(4);
      const Vector x = random_vector(rng, 3, 2.0);
      const Vector y = x + random_vector(rng, 3, std::pow(10.0, -static_cast<double>(t % 4)));
      const double dist = (x - y).norm();
      const double dv = (maml->inner_component(i, j, x) - maml->inner_component(i, j, y)).norm();
      const Matrix jx = detail::dense_inner_jacobian_t(*maml, i, j, x);
      const Matrix jy = detail::dense_inner_jacobian_t(*maml, i, j, y);
      const double dj = Eigen::JacobiSVD<Matrix>(jx - jy).singularValues()[0];
      worst_value = std::max(worst_value, dv / (c.ell_g * dist));
      worst_jac = std::max(worst_jac, dj / (c.lip_grad_g * dist));
      worst_uniform = std::max(worst_uniform, dj / c.lip_grad_g);
    }
    EXPECT_LE(worst_value, 1.0 + 1e-12) << gi;
    EXPECT_LE(worst_jac, 1.0 + 1e-12) << gi;
    EXPECT_LE(worst_uniform, 1.0 + 1e-12) << gi;
  }
}

TEST(CompositeSigmas, IdenticalComponentsGiveZero) {
  ToyWorker w;
  w.inner = {{mat2(1, 2, 3, 4), vec({1, 1})}, {mat2(1, 2, 3, 4), vec({1, 1})}};
  w.targets = {vec({0, 1}), vec({0, 1}), vec({0, 1})};
  auto cp = std::make_shared<const ToyCompositeProblem>(std::vector<ToyWorker>{w});
  const std::vector<Vector> pts = {vec({0, 0}), vec({1, -2})};
  const CompositeSigmas s = measure_composite_sigmas(*cp, pts, 1000, 1);
  EXPECT_EQ(s.sigma_g2, 0.0);
  EXPECT_EQ(s.sigma_dg2, 0.0);
  EXPECT_EQ(s.sigma_f2, 0.0);
}

TEST(CompositeSigmas, TwoPointVariance) {
  const Vector c = vec({3, -4});
  ToyWorker w;
  w.inner = {{mat2(1, 0, 0, 1), vec({0, 0})}, {mat2(1, 0, 0, 1), c}};
  w.targets = {vec({0, 0})};
  auto cp = std::make_shared<const ToyCompositeProblem>(std::vector<ToyWorker>{w});
  const std::vector<Vector> pts = {vec({0.5, 2})};
  const CompositeSigmas s = measure_composite_sigmas(*cp, pts, 1000, 2, 1.0);
  EXPECT_DOUBLE_EQ(s.sigma_g2, (c / 2.0).squaredNorm());
  EXPECT_EQ(s.sigma_dg2, 0.0);
  const CompositeSigmas safe = measure_composite_sigmas(*cp, pts, 1000, 2);
  EXPECT_DOUBLE_EQ(safe.sigma_g2, 1.1 * (c / 2.0).squaredNorm());
}

TEST(CompositeSigmas, MamlStableAcrossSeeds) {
  auto maml = make_maml(make_classification_data(3, 4, 3, 7), 0.1);
  Rng rng(3);
  std::vector<Vector> pts;
  for (int t = 0; t < 5; ++t) pts.push_back(random_vector(rng, 3));
  const CompositeSigmas a = measure_composite_sigmas(*maml, pts, 20000, 1);
  const CompositeSigmas b = measure_composite_sigmas(*maml, pts, 20000, 2);
  for (auto [x, y] : {std::pair{a.sigma_g2, b.sigma_g2}, std::pair{a.sigma_dg2, b.sigma_dg2},
                      std::pair{a.sigma_f2, b.sigma_f2}}) {
    EXPECT_TRUE(std::isfinite(x));
    EXPECT_GT(x, 0.0);
    EXPECT_NEAR(x / y, 1.0, 0.1);
  }
}

}  // namespace
}  // namespace biasmom
