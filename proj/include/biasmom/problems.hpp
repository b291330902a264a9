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
#include <optional>
#include <string>
#include <vector>

#include "biasmom/error.hpp"
#include "biasmom/rng.hpp"
#include "biasmom/vector.hpp"

namespace biasmom {

enum class ProblemKind {
  quadratic,
  logistic_l2,
  nonconvex_reg_classification,
  composite_finite_sum,
  maml,
};

inline std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::quadratic: return "quadratic";
    case ProblemKind::logistic_l2: return "logistic_l2";
    case ProblemKind::nonconvex_reg_classification:
      return "nonconvex_reg_classification";
    case ProblemKind::composite_finite_sum: return "composite_finite_sum";
    case ProblemKind::maml: return "maml";
  }
  return "unknown";
}

/// Objective f(x) = (1/n) sum_i f_i(x) split over n simulated workers, with
/// its certified constants.
///
/// Instances are immutable after construction and may be shared across
/// concurrently running trials.
class Problem {
 public:
  virtual ~Problem() = default;

  ProblemKind kind() const { return kind_; }
  std::size_t dimension() const { return dimension_; }
  std::size_t n_workers() const { return n_workers_; }

  // Gradient Lipschitz constant L of f.
  double smoothness() const { return smoothness_; }
  // Largest gradient Lipschitz constant over the f_i.
  double worker_smoothness() const { return worker_smoothness_; }
  // PL constant mu; 0 means no PL certificate.
  double pl_constant() const { return pl_constant_; }
  // inf f, when known.
  std::optional<double> f_star() const { return f_star_; }

  virtual double worker_value(std::size_t i, const Vector& x) const = 0;
  virtual Vector worker_gradient(std::size_t i, const Vector& x) const = 0;

  virtual double value(const Vector& x) const {
    check_point(x);
    std::vector<double> parts(n_workers_);
    for (std::size_t i = 0; i < n_workers_; ++i) parts[i] = worker_value(i, x);
    return average(std::span<const double>(parts));
  }

  // Exact (1/n) sum_i grad f_i(x), aggregated exactly like the server does.
  Vector full_gradient(const Vector& x) const {
    check_point(x);
    std::vector<Vector> parts;
    parts.reserve(n_workers_);
    for (std::size_t i = 0; i < n_workers_; ++i) {
      parts.push_back(worker_gradient(i, x));
    }
    return average(std::span<const Vector>(parts));
  }

  void check_point(const Vector& x) const {
    require_dimension(x, dimension_, "point");
  }

  void check_worker(std::size_t i) const {
    if (i >= n_workers_) {
      throw DimensionError("worker index " + std::to_string(i) +
                           " out of range [0, " + std::to_string(n_workers_) +
                           ")");
    }
  }

 protected:
  Problem(ProblemKind kind, std::size_t dimension, std::size_t n_workers)
      : kind_(kind), dimension_(dimension), n_workers_(n_workers) {
    if (dimension == 0) throw ConfigError("problem dimension must be >= 1");
    if (n_workers == 0) throw ConfigError("n_workers must be >= 1");
  }

  void set_constants(double smoothness, double worker_smoothness, double mu,
                     std::optional<double> f_star) {
    if (!(smoothness > 0.0)) throw ConfigError("smoothness L must be > 0");
    if (mu < 0.0) throw ConfigError("PL constant must be >= 0");
    if (mu > 0.0 && mu > smoothness * (1.0 + 1e-12)) {
      throw ConfigError("PL constant exceeds smoothness constant");
    }
    smoothness_ = smoothness;
    worker_smoothness_ = worker_smoothness;
    pl_constant_ = mu;
    f_star_ = f_star;
  }

 private:
  ProblemKind kind_;
  std::size_t dimension_;
  std::size_t n_workers_;
  double smoothness_ = 1.0;
  double worker_smoothness_ = 1.0;
  double pl_constant_ = 0.0;
  std::optional<double> f_star_;
};

using ProblemPtr = std::shared_ptr<const Problem>;

/// Synthetic gradient perturbation g_i = grad f_i(x) + offset + N(0, sigma2 I).
struct NoiseSpec {
  double sigma2 = 0.0;
  // Constant added to every coordinate.
  double delta_offset = 0.0;
  // Per-coordinate offset; takes precedence over delta_offset when set.
  Vector delta_vector;

  bool exact() const {
    return sigma2 == 0.0 && delta_offset == 0.0 &&
           (delta_vector.size() == 0 || delta_vector.isZero(0.0));
  }

  Vector offset(std::size_t d) const {
    if (delta_vector.size() > 0) {
      require_dimension(delta_vector, d, "noise.delta_offset");
      return delta_vector;
    }
    return Vector::Constant(static_cast<Eigen::Index>(d), delta_offset);
  }

  // E||g_i - grad f_i(x)||^2 = d sigma2 + ||offset||^2.
  double error_second_moment(std::size_t d) const {
    return static_cast<double>(d) * sigma2 + offset(d).squaredNorm();
  }

  void validate() const {
    if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) {
      throw ConfigError("noise.sigma2 must be finite and >= 0");
    }
    if (!std::isfinite(delta_offset)) {
      throw ConfigError("noise.delta_offset must be finite");
    }
    require_finite(delta_vector, "noise.delta_offset");
  }
};

/// Worker i's raw stochastic gradient under `noise`. The generator is only
/// consumed when sigma2 > 0, so the noiseless case is exact and draw-free.
inline Vector noisy_worker_gradient(const Problem& p, std::size_t i,
                                    const Vector& x, const NoiseSpec& noise,
                                    Rng& rng) {
  p.check_worker(i);
  Vector g = p.worker_gradient(i, x);
  if (noise.delta_vector.size() > 0) {
    g += noise.offset(p.dimension());
  } else if (noise.delta_offset != 0.0) {
    g.array() += noise.delta_offset;
  }
  if (noise.sigma2 > 0.0) {
    const double sd = std::sqrt(noise.sigma2);
    for (Eigen::Index c = 0; c < g.size(); ++c) g[c] += sd * rng.gaussian();
  }
  return g;
}

// ---------------------------------------------------------------------------
// Quadratic f(x) = 1/2 ||A x||^2.

class QuadraticProblem final : public Problem {
 public:
  // Rows of A are split into n contiguous blocks (the first rows % n blocks
  // get one extra row); f_i(x) = (n/2) ||A_i x||^2 so that the average of the
  // f_i is 1/2 ||A x||^2.
  QuadraticProblem(Matrix a, std::size_t n_workers)
      : Problem(ProblemKind::quadratic, static_cast<std::size_t>(a.cols()),
                n_workers),
        a_(std::move(a)) {
    const auto rows = static_cast<std::size_t>(a_.rows());
    if (rows < n_workers) {
      throw ConfigError("quadratic: " + std::to_string(rows) +
                        " rows cannot be split over " +
                        std::to_string(n_workers) + " workers");
    }
    if (!a_.allFinite()) throw DataError("quadratic: non-finite matrix entry");
    std::size_t start = 0;
    for (std::size_t i = 0; i < n_workers; ++i) {
      const std::size_t len = rows / n_workers + (i < rows % n_workers ? 1 : 0);
      blocks_.push_back(a_.middleRows(static_cast<Eigen::Index>(start),
                                      static_cast<Eigen::Index>(len)));
      start += len;
    }
    const Matrix gram = a_.transpose() * a_;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
    const double l_max = eig.eigenvalues().maxCoeff();
    double l_min = eig.eigenvalues().minCoeff();
    if (!(l_max > 0.0)) throw ConfigError("quadratic: A must be nonzero");
    // Numerically singular Gram matrix: no PL certificate.
    if (l_min <= 1e-12 * l_max) l_min = 0.0;
    double worker_l = 0.0;
    const double n = static_cast<double>(n_workers);
    for (const Matrix& block : blocks_) {
      Eigen::SelfAdjointEigenSolver<Matrix> be(block.transpose() * block,
                                               Eigen::EigenvaluesOnly);
      worker_l = std::max(worker_l, n * be.eigenvalues().maxCoeff());
    }
    set_constants(l_max, worker_l, l_min, 0.0);
  }

  const Matrix& matrix() const { return a_; }
  const Matrix& block(std::size_t i) const { return blocks_.at(i); }

  double value(const Vector& x) const override {
    check_point(x);
    return 0.5 * (a_ * x).squaredNorm();
  }

  double worker_value(std::size_t i, const Vector& x) const override {
    check_worker(i);
    check_point(x);
    return 0.5 * static_cast<double>(n_workers()) *
           (blocks_[i] * x).squaredNorm();
  }

  Vector worker_gradient(std::size_t i, const Vector& x) const override {
    check_worker(i);
    check_point(x);
    const Matrix& b = blocks_[i];
    Vector g = b.transpose() * (b * x);
    g *= static_cast<double>(n_workers());
    return g;
  }

 private:
  Matrix a_;
  std::vector<Matrix> blocks_;
};

/// Builds f(x) = 1/2 ||A x||^2. A must be square unless `least_squares` is
/// set, in which case any A with at least n rows is accepted.
inline std::shared_ptr<const QuadraticProblem> make_quadratic(
    const Matrix& a, std::size_t n_workers, bool least_squares = false) {
  if (a.rows() != a.cols() && !least_squares) {
    throw ConfigError("quadratic: A is " + std::to_string(a.rows()) + "x" +
                      std::to_string(a.cols()) +
                      "; non-square A requires the least_squares flag");
  }
  return std::make_shared<const QuadraticProblem>(a, n_workers);
}

// Uniformly random orthogonal matrix (QR of a Gaussian matrix with the sign
// of R's diagonal folded into Q).
inline Matrix random_orthogonal(std::size_t d, std::uint64_t seed) {
  Rng rng = Rng::substream(seed, 0, 0, 0, StreamTag::init);
  Matrix g(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (Eigen::Index c = 0; c < g.cols(); ++c) {
    for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = rng.gaussian();
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < q.cols(); ++c) {
    if (r(c, c) < 0.0) q.col(c) = -q.col(c);
  }
  return q;
}

// Symmetric A = Q diag(sqrt(e)) Q^T, so that A^T A has eigenvalues e.
inline Matrix matrix_from_spectrum(const std::vector<double>& gram_eigenvalues,
                                   std::uint64_t seed) {
  if (gram_eigenvalues.empty()) throw ConfigError("spectrum: empty");
  Vector s(static_cast<Eigen::Index>(gram_eigenvalues.size()));
  for (std::size_t i = 0; i < gram_eigenvalues.size(); ++i) {
    if (!(gram_eigenvalues[i] >= 0.0) || !std::isfinite(gram_eigenvalues[i])) {
      throw ConfigError("spectrum: eigenvalues must be finite and >= 0");
    }
    s[static_cast<Eigen::Index>(i)] = std::sqrt(gram_eigenvalues[i]);
  }
  const Matrix q = random_orthogonal(gram_eigenvalues.size(), seed);
  return q * s.asDiagonal() * q.transpose();
}

// A with i.i.d. N(0, 1/cols) entries.
inline Matrix random_gaussian_matrix(std::size_t rows, std::size_t cols,
                                     std::uint64_t seed) {
  Rng rng = Rng::substream(seed, 0, 1, 0, StreamTag::init);
  Matrix a(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) a(r, c) = scale * rng.gaussian();
  }
  return a;
}

// ---------------------------------------------------------------------------
// Binary classification with logistic loss phi(t, b) = log(1 + exp(-t b)).

struct WorkerData {
  Matrix features;  // m x d, row j is a_{i,j}
  Vector labels;    // m entries in {-1, +1}
};

using ClassificationData = std::vector<WorkerData>;

namespace detail {

// log(1 + exp(-z)) without overflow.
inline double softplus_neg(double z) {
  return z > 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

inline void validate_classification(const ClassificationData& data) {
  if (data.empty()) throw ConfigError("classification: no workers");
  const Eigen::Index d = data.front().features.cols();
  const Eigen::Index m = data.front().features.rows();
  if (d == 0 || m == 0) throw ConfigError("classification: empty data");
  for (std::size_t i = 0; i < data.size(); ++i) {
    const WorkerData& w = data[i];
    if (w.features.cols() != d || w.features.rows() != m ||
        w.labels.size() != m) {
      throw DataError("classification: worker " + std::to_string(i) +
                      " must hold " + std::to_string(m) + " points of dim " +
                      std::to_string(d));
    }
    if (!w.features.allFinite()) {
      throw DataError("classification: non-finite feature");
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      if (w.labels[j] != 1.0 && w.labels[j] != -1.0) {
        throw DataError("classification: label " +
                        std::to_string(w.labels[j]) + " at worker " +
                        std::to_string(i) + " point " + std::to_string(j) +
                        " is not in {-1, +1}");
      }
    }
  }
}

inline double max_row_norm_sq(const ClassificationData& data) {
  double best = 0.0;
  for (const WorkerData& w : data) {
    best = std::max(best, w.features.rowwise().squaredNorm().maxCoeff());
  }
  return best;
}

}  // namespace detail

/// Gaussian features a ~ N(0, scale^2 I) and labels from a random hyperplane
/// with 10% label flips, regenerated from `seed`.
inline ClassificationData make_classification_data(std::size_t n_workers,
                                                   std::size_t m,
                                                   std::size_t d,
                                                   std::uint64_t seed,
                                                   double feature_scale = 1.0) {
  if (n_workers == 0 || m == 0 || d == 0) {
    throw ConfigError("classification data: n_workers, m, d must be >= 1");
  }
  Rng plane = Rng::substream(seed, 0, 0, 0, StreamTag::init);
  Vector w(static_cast<Eigen::Index>(d));
  for (Eigen::Index c = 0; c < w.size(); ++c) w[c] = plane.gaussian();
  ClassificationData data(n_workers);
  for (std::size_t i = 0; i < n_workers; ++i) {
    Rng rng = Rng::substream(seed, 1, i, 0, StreamTag::init);
    WorkerData& wd = data[i];
    wd.features.resize(static_cast<Eigen::Index>(m),
                       static_cast<Eigen::Index>(d));
    wd.labels.resize(static_cast<Eigen::Index>(m));
    for (Eigen::Index j = 0; j < wd.features.rows(); ++j) {
      for (Eigen::Index c = 0; c < wd.features.cols(); ++c) {
        wd.features(j, c) = feature_scale * rng.gaussian();
      }
      double b = wd.features.row(j).dot(w) >= 0.0 ? 1.0 : -1.0;
      if (rng.uniform() < 0.1) b = -b;
      wd.labels[j] = b;
    }
  }
  return data;
}

/// f_i(x) = (1/m) sum_j log(1 + exp(-b_ij <a_ij, x>)) + (lambda/2) ||x||^2
///          + lambda_nc sum_c x_c^2 / (1 + x_c^2).
///
/// Smoothness bound: L = lambda + max_ij ||a_ij||^2 / 4 + 2 lambda_nc, since
/// the logistic curvature is at most 1/4 and t^2/(1+t^2) has second
/// derivative bounded by 2 in magnitude.
class LogisticProblem final : public Problem {
 public:
  LogisticProblem(ProblemKind kind, ClassificationData data, double lambda,
                  double lambda_nc)
      : Problem(kind,
                data.empty() ? 0
                             : static_cast<std::size_t>(
                                   data.front().features.cols()),
                data.size()),
        data_(std::move(data)),
        lambda_(lambda),
        lambda_nc_(lambda_nc) {
    detail::validate_classification(data_);
    m_ = static_cast<std::size_t>(data_.front().features.rows());
    const double l =
        lambda_ + 0.25 * detail::max_row_norm_sq(data_) + 2.0 * lambda_nc_;
    std::optional<double> f_star;
    if (lambda_nc_ == 0.0) f_star = solve_minimum();
    set_constants(l, l, lambda_nc_ == 0.0 ? lambda_ : 0.0, f_star);
  }

  double lambda() const { return lambda_; }
  double lambda_nc() const { return lambda_nc_; }
  std::size_t points_per_worker() const { return m_; }
  const ClassificationData& data() const { return data_; }

  double worker_value(std::size_t i, const Vector& x) const override {
    check_worker(i);
    check_point(x);
    const WorkerData& w = data_[i];
    const Vector z = w.labels.cwiseProduct(w.features * x);
    double loss = 0.0;
    for (Eigen::Index j = 0; j < z.size(); ++j) loss += detail::softplus_neg(z[j]);
    loss /= static_cast<double>(m_);
    return loss + 0.5 * lambda_ * x.squaredNorm() + regularizer(x);
  }

  Vector worker_gradient(std::size_t i, const Vector& x) const override {
    check_worker(i);
    check_point(x);
    const WorkerData& w = data_[i];
    const Vector z = w.labels.cwiseProduct(w.features * x);
    Vector coeff(z.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) {
      coeff[j] = -w.labels[j] * detail::sigmoid(-z[j]);
    }
    Vector g = w.features.transpose() * coeff;
    g /= static_cast<double>(m_);
    g += lambda_ * x;
    if (lambda_nc_ != 0.0) g += regularizer_gradient(x);
    return g;
  }

  double regularizer(const Vector& x) const {
    if (lambda_nc_ == 0.0) return 0.0;
    double r = 0.0;
    for (Eigen::Index c = 0; c < x.size(); ++c) {
      const double t2 = x[c] * x[c];
      r += t2 / (1.0 + t2);
    }
    return lambda_nc_ * r;
  }

  Vector regularizer_gradient(const Vector& x) const {
    Vector g(x.size());
    for (Eigen::Index c = 0; c < x.size(); ++c) {
      const double s = 1.0 + x[c] * x[c];
      g[c] = lambda_nc_ * 2.0 * x[c] / (s * s);
    }
    return g;
  }

 private:
  // Damped Newton on the strongly convex objective; f* to machine precision.
  double solve_minimum() const {
    const auto d = static_cast<Eigen::Index>(dimension());
    Vector x = Vector::Zero(d);
    double fx = value(x);
    for (int it = 0; it < 100; ++it) {
      const Vector g = full_gradient(x);
      if (g.norm() <= 1e-15 * std::max(1.0, std::abs(fx))) break;
      Matrix h = Matrix::Zero(d, d);
      for (const WorkerData& w : data_) {
        const Vector z = w.labels.cwiseProduct(w.features * x);
        Vector s(z.size());
        for (Eigen::Index j = 0; j < z.size(); ++j) {
          const double p = detail::sigmoid(z[j]);
          s[j] = p * (1.0 - p);
        }
        h += w.features.transpose() * s.asDiagonal() * w.features;
      }
      h /= static_cast<double>(m_ * n_workers());
      h.diagonal().array() += lambda_;
      const Vector step = h.ldlt().solve(g);
      double t = 1.0;
      Vector trial = x - step;
      double ft = value(trial);
      while (ft > fx && t > 1e-10) {
        t *= 0.5;
        trial = x - t * step;
        ft = value(trial);
      }
      if (ft > fx) break;
      x = trial;
      fx = ft;
    }
    return fx;
  }

  ClassificationData data_;
  double lambda_;
  double lambda_nc_;
  std::size_t m_ = 0;
};

inline std::shared_ptr<const LogisticProblem> make_logistic_l2(
    ClassificationData data, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw ConfigError("logistic_l2: lambda must be > 0");
  }
  return std::make_shared<const LogisticProblem>(
      ProblemKind::logistic_l2, std::move(data), lambda, 0.0);
}

// Logistic loss plus lambda_nc sum_c x_c^2/(1+x_c^2), no l2 term; not PL.
inline std::shared_ptr<const LogisticProblem> make_nonconvex_reg(
    ClassificationData data, double lambda_nc) {
  if (!(lambda_nc > 0.0) || !std::isfinite(lambda_nc)) {
    throw ConfigError("nonconvex_reg: lambda_nc must be > 0");
  }
  return std::make_shared<const LogisticProblem>(
      ProblemKind::nonconvex_reg_classification, std::move(data), 0.0,
      lambda_nc);
}

}  // namespace biasmom
