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

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biasmom/error.hpp"
#include "biasmom/problems.hpp"
#include "biasmom/rng.hpp"
#include "biasmom/vector.hpp"

namespace biasmom {

// Lipschitz constants of the inner maps g_ij (value ell_g, gradient L_g) and
// outer functions F_ij (value ell_F, gradient L_F).
struct CompositeConstants {
  double ell_g = 0.0;
  double lip_grad_g = 0.0;
  double ell_f = 0.0;
  double lip_grad_f = 0.0;
};

/// f_i(x) = F_i(g_i(x)) with F_i = mean_j F_ij over m_F outer functions and
/// g_i = mean_j g_ij over m_g inner maps g_ij : R^d -> R^p.
///
/// Inner Jacobians are only available through transposed products
/// grad g_ij(x)^T u; no dense Jacobian is ever formed by the library.
class CompositeProblem : public Problem {
 public:
  virtual std::size_t inner_count(std::size_t i) const = 0;
  virtual std::size_t outer_count(std::size_t i) const = 0;
  virtual std::size_t inner_dimension() const = 0;

  virtual Vector inner_component(std::size_t i, std::size_t j,
                                 const Vector& x) const = 0;
  virtual Vector inner_jtv(std::size_t i, std::size_t j, const Vector& x,
                           const Vector& u) const = 0;
  virtual double outer_component(std::size_t i, std::size_t j,
                                 const Vector& y) const = 0;
  virtual Vector outer_gradient(std::size_t i, std::size_t j,
                                const Vector& y) const = 0;

  const std::optional<CompositeConstants>& constants() const {
    return constants_;
  }

  double worker_value(std::size_t i, const Vector& x) const override;
  Vector worker_gradient(std::size_t i, const Vector& x) const override;

 protected:
  CompositeProblem(ProblemKind kind, std::size_t dimension,
                   std::size_t n_workers)
      : Problem(kind, dimension, n_workers) {}

  void set_composite_constants(const CompositeConstants& c) { constants_ = c; }

 private:
  std::optional<CompositeConstants> constants_;
};

namespace detail {

inline void check_index_set(std::span<const std::size_t> idx,
                            std::size_t count, const char* what) {
  if (idx.empty()) throw DimensionError(std::string(what) + ": empty index set");
  std::vector<bool> seen(count, false);
  for (std::size_t j : idx) {
    if (j >= count) {
      throw DimensionError(std::string(what) + ": index " + std::to_string(j) +
                           " out of range [0, " + std::to_string(count) + ")");
    }
    if (seen[j]) {
      throw DimensionError(std::string(what) + ": duplicate index " +
                           std::to_string(j));
    }
    seen[j] = true;
  }
}

inline std::vector<std::size_t> full_index(std::size_t m) {
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

}  // namespace detail

// (1/|S|) sum_{j in S} g_ij(x).
inline Vector inner_value(const CompositeProblem& cp, std::size_t i,
                          const Vector& x, std::span<const std::size_t> idx) {
  cp.check_worker(i);
  cp.check_point(x);
  detail::check_index_set(idx, cp.inner_count(i), "inner_value");
  std::vector<Vector> parts;
  parts.reserve(idx.size());
  for (std::size_t j : idx) parts.push_back(cp.inner_component(i, j, x));
  return average(std::span<const Vector>(parts));
}

/// <grad g_{S_g}(x), (1/|S_F|) sum_{j in S_F} grad F_ij(g_{S_g}(x))>.
///
/// The inner value and the inner Jacobian are both averaged over `s_g`.
inline Vector chained_gradient(const CompositeProblem& cp, std::size_t i,
                               const Vector& x,
                               std::span<const std::size_t> s_g,
                               std::span<const std::size_t> s_f) {
  const Vector y = inner_value(cp, i, x, s_g);
  detail::check_index_set(s_f, cp.outer_count(i), "chained_gradient");
  std::vector<Vector> outer;
  outer.reserve(s_f.size());
  for (std::size_t j : s_f) outer.push_back(cp.outer_gradient(i, j, y));
  const Vector u = average(std::span<const Vector>(outer));
  std::vector<Vector> parts;
  parts.reserve(s_g.size());
  for (std::size_t j : s_g) parts.push_back(cp.inner_jtv(i, j, x, u));
  return average(std::span<const Vector>(parts));
}

inline double CompositeProblem::worker_value(std::size_t i,
                                             const Vector& x) const {
  const auto all_g = detail::full_index(inner_count(i));
  const Vector y = inner_value(*this, i, x, all_g);
  std::vector<double> parts(outer_count(i));
  for (std::size_t j = 0; j < parts.size(); ++j) {
    parts[j] = outer_component(i, j, y);
  }
  return average(std::span<const double>(parts));
}

inline Vector CompositeProblem::worker_gradient(std::size_t i,
                                                const Vector& x) const {
  const auto all_g = detail::full_index(inner_count(i));
  const auto all_f = detail::full_index(outer_count(i));
  return chained_gradient(*this, i, x, all_g, all_f);
}

// ---------------------------------------------------------------------------
// Distributed MAML: f_i(x) = F_i(x - gamma grad F_i(x)) with logistic F_ij.

/// One-step MAML over logistic losses l_ij(x) = log(1 + exp(-b_ij <a_ij, x>)).
///
/// F_ij = l_ij, g_ij(x) = x - gamma grad l_ij(x), m_F = m_g = m. With
/// ell_l = max ||a_ij|| and L_l = max ||a_ij||^2 / 4 the stored constants are
/// ell_F = ell_l, L_F = L_l, ell_g = 1 + gamma L_l, L_g = 2 gamma L_l, and
/// L = L_g ell_F + ell_g^2 L_F.
class MamlProblem final : public CompositeProblem {
 public:
  MamlProblem(ClassificationData data, double gamma_inner)
      : CompositeProblem(ProblemKind::maml,
                         data.empty() ? 0
                                      : static_cast<std::size_t>(
                                            data.front().features.cols()),
                         data.size()),
        data_(std::move(data)),
        gamma_inner_(gamma_inner) {
    detail::validate_classification(data_);
    m_ = static_cast<std::size_t>(data_.front().features.rows());
    const double r2 = detail::max_row_norm_sq(data_);
    loss_lipschitz_ = std::sqrt(r2);
    loss_smoothness_ = 0.25 * r2;
    CompositeConstants c;
    c.ell_f = loss_lipschitz_;
    c.lip_grad_f = loss_smoothness_;
    c.ell_g = 1.0 + gamma_inner_ * loss_smoothness_;
    c.lip_grad_g = 2.0 * gamma_inner_ * loss_smoothness_;
    set_composite_constants(c);
    const double l = c.lip_grad_g * c.ell_f + c.ell_g * c.ell_g * c.lip_grad_f;
    set_constants(l > 0.0 ? l : loss_smoothness_, l > 0.0 ? l : loss_smoothness_,
                  0.0, std::nullopt);
  }

  double gamma_inner() const { return gamma_inner_; }
  double loss_lipschitz() const { return loss_lipschitz_; }
  double loss_smoothness() const { return loss_smoothness_; }
  const ClassificationData& data() const { return data_; }

  std::size_t inner_count(std::size_t) const override { return m_; }
  std::size_t outer_count(std::size_t) const override { return m_; }
  std::size_t inner_dimension() const override { return dimension(); }

  // grad l_ij(x)
  Vector loss_gradient(std::size_t i, std::size_t j, const Vector& x) const {
    const WorkerData& w = data_[i];
    const auto r = static_cast<Eigen::Index>(j);
    const double b = w.labels[r];
    const double z = b * w.features.row(r).dot(x);
    return (-b * detail::sigmoid(-z)) * w.features.row(r).transpose();
  }

  Vector inner_component(std::size_t i, std::size_t j,
                         const Vector& x) const override {
    check_component(i, j);
    return x - gamma_inner_ * loss_gradient(i, j, x);
  }

  // (I - gamma Hess l_ij(x)) u, Hess l_ij = s(z) s(-z) a a^T.
  Vector inner_jtv(std::size_t i, std::size_t j, const Vector& x,
                   const Vector& u) const override {
    check_component(i, j);
    const WorkerData& w = data_[i];
    const auto r = static_cast<Eigen::Index>(j);
    const double z = w.labels[r] * w.features.row(r).dot(x);
    const double p = detail::sigmoid(z);
    const double curv = p * (1.0 - p);
    const double au = w.features.row(r).dot(u);
    return u - (gamma_inner_ * curv * au) * w.features.row(r).transpose();
  }

  double outer_component(std::size_t i, std::size_t j,
                         const Vector& y) const override {
    check_component(i, j);
    const WorkerData& w = data_[i];
    const auto r = static_cast<Eigen::Index>(j);
    return detail::softplus_neg(w.labels[r] * w.features.row(r).dot(y));
  }

  Vector outer_gradient(std::size_t i, std::size_t j,
                        const Vector& y) const override {
    check_component(i, j);
    return loss_gradient(i, j, y);
  }

 private:
  void check_component(std::size_t i, std::size_t j) const {
    check_worker(i);
    if (j >= m_) throw DimensionError("maml: component index out of range");
  }

  ClassificationData data_;
  double gamma_inner_;
  std::size_t m_ = 0;
  double loss_lipschitz_ = 0.0;
  double loss_smoothness_ = 0.0;
};

inline std::shared_ptr<const MamlProblem> make_maml(ClassificationData data,
                                                    double gamma_inner) {
  // gamma_inner = 0 is accepted: it degenerates to the plain finite sum.
  if (!(gamma_inner >= 0.0) || !std::isfinite(gamma_inner)) {
    throw ConfigError("maml: gamma_inner must be finite and >= 0");
  }
  return std::make_shared<const MamlProblem>(std::move(data), gamma_inner);
}

// ---------------------------------------------------------------------------
// Toy composite: affine inner maps, coordinate-wise quartic outer functions.

struct ToyInner {
  Matrix map;     // p x d
  Vector offset;  // p
};

struct ToyWorker {
  std::vector<ToyInner> inner;  // g_ij(x) = map x + offset
  std::vector<Vector> targets;  // F_ij(y) = 1/4 sum_c (y_c - t_c)^4
};

/// Hand-checkable composite used by the oracle tests. The quartic outer
/// functions are not globally smooth, so smoothness() reports +infinity and
/// no composite constants are stored.
class ToyCompositeProblem final : public CompositeProblem {
 public:
  explicit ToyCompositeProblem(std::vector<ToyWorker> workers)
      : CompositeProblem(ProblemKind::composite_finite_sum,
                         workers.empty() || workers.front().inner.empty()
                             ? 0
                             : static_cast<std::size_t>(
                                   workers.front().inner.front().map.cols()),
                         workers.size()),
        workers_(std::move(workers)) {
    p_ = static_cast<std::size_t>(workers_.front().inner.front().map.rows());
    for (const ToyWorker& w : workers_) {
      if (w.inner.empty() || w.targets.empty()) {
        throw ConfigError("composite toy: every worker needs >= 1 component");
      }
      for (const ToyInner& in : w.inner) {
        if (static_cast<std::size_t>(in.map.cols()) != dimension() ||
            static_cast<std::size_t>(in.map.rows()) != p_ ||
            static_cast<std::size_t>(in.offset.size()) != p_) {
          throw DimensionError("composite toy: inner map shape mismatch");
        }
      }
      for (const Vector& t : w.targets) {
        if (static_cast<std::size_t>(t.size()) != p_) {
          throw DimensionError("composite toy: target dimension mismatch");
        }
      }
    }
    set_constants(std::numeric_limits<double>::infinity(),
                  std::numeric_limits<double>::infinity(), 0.0, std::nullopt);
  }

  const std::vector<ToyWorker>& workers() const { return workers_; }

  std::size_t inner_count(std::size_t i) const override {
    return workers_.at(i).inner.size();
  }
  std::size_t outer_count(std::size_t i) const override {
    return workers_.at(i).targets.size();
  }
  std::size_t inner_dimension() const override { return p_; }

  Vector inner_component(std::size_t i, std::size_t j,
                         const Vector& x) const override {
    const ToyInner& in = workers_.at(i).inner.at(j);
    return in.map * x + in.offset;
  }

  Vector inner_jtv(std::size_t i, std::size_t j, const Vector&,
                   const Vector& u) const override {
    return workers_.at(i).inner.at(j).map.transpose() * u;
  }

  double outer_component(std::size_t i, std::size_t j,
                         const Vector& y) const override {
    const Vector diff = y - workers_.at(i).targets.at(j);
    return 0.25 * diff.array().pow(4).sum();
  }

  Vector outer_gradient(std::size_t i, std::size_t j,
                        const Vector& y) const override {
    const Vector diff = y - workers_.at(i).targets.at(j);
    return diff.array().cube().matrix();
  }

 private:
  std::vector<ToyWorker> workers_;
  std::size_t p_ = 0;
};

/// The repository's fixed toy instance: d = p = 2, m_g = m_F = 3, integer
/// coefficients. Worker i shifts every inner offset by (i, -i).
inline std::shared_ptr<const ToyCompositeProblem> make_toy_composite(
    std::size_t n_workers = 1) {
  if (n_workers == 0) throw ConfigError("composite toy: n_workers must be >= 1");
  auto mat = [](double a, double b, double c, double d) {
    Matrix m(2, 2);
    m << a, b, c, d;
    return m;
  };
  auto vec = [](double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
  };
  std::vector<ToyWorker> workers(n_workers);
  for (std::size_t i = 0; i < n_workers; ++i) {
    const double s = static_cast<double>(i);
    workers[i].inner = {
        {mat(1, 2, 0, 1), vec(1 + s, 0 - s)},
        {mat(2, 0, 1, 1), vec(0 + s, -1 - s)},
        {mat(0, 1, 1, -1), vec(-1 + s, 1 - s)},
    };
    workers[i].targets = {vec(0, 0), vec(1, -1), vec(-1, 2)};
  }
  return std::make_shared<const ToyCompositeProblem>(std::move(workers));
}

// ---------------------------------------------------------------------------

// Component variance bounds feeding the composite affine-variance constant.
struct CompositeSigmas {
  double sigma_g2 = 0.0;   // E||g_ij(x) - g_i(x)||^2
  double sigma_dg2 = 0.0;  // E||grad g_ij(x) - grad g_i(x)||^2 (Frobenius)
  double sigma_f2 = 0.0;   // E||grad F_ij(y) - grad F_i(y)||^2 at y = g_i(x)
};

namespace detail {

// Dense transposed Jacobian grad g_ij(x)^T (d x p), assembled column by
// column from the transposed-product oracle. Measurement-only helper.
inline Matrix dense_inner_jacobian_t(const CompositeProblem& cp, std::size_t i,
                                     std::size_t j, const Vector& x) {
  const auto p = static_cast<Eigen::Index>(cp.inner_dimension());
  Matrix jt(static_cast<Eigen::Index>(cp.dimension()), p);
  for (Eigen::Index c = 0; c < p; ++c) {
    jt.col(c) = cp.inner_jtv(i, j, x, Vector::Unit(p, c));
  }
  return jt;
}

}  // namespace detail

/// Monte-Carlo estimates of the three component variances: for every sample
/// point and worker, `draws` uniform component indices are drawn and the
/// squared deviations averaged; the reported value is the max over points
/// and workers times `safety`. Jacobian deviations use the Frobenius norm,
/// an upper bound on the operator norm.
inline CompositeSigmas measure_composite_sigmas(
    const CompositeProblem& cp, std::span<const Vector> points,
    std::size_t draws, std::uint64_t seed, double safety = 1.1) {
  if (points.empty()) throw ConfigError("measure_composite_sigmas: no points");
  if (draws == 0) throw ConfigError("measure_composite_sigmas: draws >= 1");
  CompositeSigmas out;
  for (std::size_t pt = 0; pt < points.size(); ++pt) {
    const Vector& x = points[pt];
    cp.check_point(x);
    for (std::size_t i = 0; i < cp.n_workers(); ++i) {
      const std::size_t mg = cp.inner_count(i);
      const std::size_t mf = cp.outer_count(i);
      std::vector<Vector> g_parts;
      std::vector<Matrix> jac_parts;
      for (std::size_t j = 0; j < mg; ++j) {
        g_parts.push_back(cp.inner_component(i, j, x));
        jac_parts.push_back(detail::dense_inner_jacobian_t(cp, i, j, x));
      }
      const Vector g_mean = average(std::span<const Vector>(g_parts));
      Matrix jac_mean = Matrix::Zero(jac_parts.front().rows(),
                                     jac_parts.front().cols());
      for (const Matrix& jm : jac_parts) jac_mean += jm;
      jac_mean /= static_cast<double>(mg);
      std::vector<Vector> f_parts;
      for (std::size_t j = 0; j < mf; ++j) {
        f_parts.push_back(cp.outer_gradient(i, j, g_mean));
      }
      const Vector f_mean = average(std::span<const Vector>(f_parts));

      Rng rng = Rng::substream(seed, pt, i, 0, StreamTag::measure);
      double sg = 0.0, sdg = 0.0, sf = 0.0;
      for (std::size_t t = 0; t < draws; ++t) {
        const std::size_t jg = rng.uniform_index(mg);
        const std::size_t jf = rng.uniform_index(mf);
        sg += (g_parts[jg] - g_mean).squaredNorm();
        sdg += (jac_parts[jg] - jac_mean).squaredNorm();
        sf += (f_parts[jf] - f_mean).squaredNorm();
      }
      const double inv = 1.0 / static_cast<double>(draws);
      out.sigma_g2 = std::max(out.sigma_g2, sg * inv);
      out.sigma_dg2 = std::max(out.sigma_dg2, sdg * inv);
      out.sigma_f2 = std::max(out.sigma_f2, sf * inv);
    }
  }
  out.sigma_g2 *= safety;
  out.sigma_dg2 *= safety;
  out.sigma_f2 *= safety;
  return out;
}

}  // namespace biasmom
