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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biasmom/engine.hpp"
#include "biasmom/error.hpp"
#include "biasmom/estimators.hpp"
#include "biasmom/problems.hpp"
#include "biasmom/rng.hpp"
#include "biasmom/theory.hpp"
#include "biasmom/vector.hpp"

namespace biasmom {

enum class AuditStatus { passed, failed, skipped };

inline std::string to_string(AuditStatus s) {
  switch (s) {
    case AuditStatus::passed: return "passed";
    case AuditStatus::failed: return "failed";
    case AuditStatus::skipped: return "skipped";
  }
  return "unknown";
}

inline constexpr double kIdentityTolerance = 1e-9;
inline constexpr double kFiniteDifferenceTolerance = 1e-5;
inline constexpr double kStderrMultiplier = 3.0;

/// Result of one check. worst_margin is the smallest normalized slack seen
/// (negative means the inequality was violated); a non-skipped check passes
/// iff worst_margin >= -tolerance.
struct AuditOutcome {
  std::string check_name;
  AuditStatus status = AuditStatus::skipped;
  double worst_margin = std::numeric_limits<double>::infinity();
  std::optional<std::size_t> trial;
  std::optional<std::size_t> k;
  double tolerance = 0.0;
  std::size_t evaluated = 0;
  std::string detail;

  bool passed() const { return status == AuditStatus::passed; }
  bool failed() const { return status == AuditStatus::failed; }
  bool skipped() const { return status == AuditStatus::skipped; }
};

namespace detail {

inline AuditOutcome start(std::string name, double tolerance) {
  AuditOutcome o;
  o.check_name = std::move(name);
  o.tolerance = tolerance;
  return o;
}

inline AuditOutcome skip(std::string name, std::string why) {
  AuditOutcome o;
  o.check_name = std::move(name);
  o.status = AuditStatus::skipped;
  o.detail = std::move(why);
  return o;
}

inline void observe(AuditOutcome& o, double margin, std::optional<std::size_t> trial,
                    std::optional<std::size_t> k) {
  ++o.evaluated;
  if (std::isnan(margin)) margin = -std::numeric_limits<double>::infinity();
  if (margin < o.worst_margin) {
    o.worst_margin = margin;
    o.trial = trial;
    o.k = k;
  }
}

inline AuditOutcome& finish(AuditOutcome& o) {
  if (o.evaluated == 0) {
    o.status = AuditStatus::skipped;
    if (o.detail.empty()) o.detail = "nothing to evaluate";
    return o;
  }
  o.status = o.worst_margin >= -o.tolerance ? AuditStatus::passed : AuditStatus::failed;
  return o;
}

inline double safe_scale(double s) {
  return s > std::numeric_limits<double>::min() ? s : std::numeric_limits<double>::min();
}

inline Vector audit_point(std::size_t d, std::uint64_t seed, std::uint64_t index,
                          std::uint64_t slot, double scale) {
  Rng rng = Rng::substream(seed, index, slot, 0, StreamTag::audit);
  Vector x(static_cast<Eigen::Index>(d));
  for (Eigen::Index c = 0; c < x.size(); ++c) x[c] = scale * rng.gaussian();
  return x;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Trajectory checks.

/// One-step descent inequality on realized values, with A = a_ncvx:
///   phi^{k+1} <= f_k - f* - (gamma/2) G_k + B1 E_k - B2 S_k + B3 H_k
/// where G, E, S, H are the recorded grad_norm_sq, v_error_sq, step_norm_sq
/// and eta_norm_sq. The last step is closed with the terminal values.
/// Slack is normalized by the sum of term magnitudes.
inline AuditOutcome audit_descent(std::span<const Trajectory> runs,
                                  const TheoryReport& r) {
  const char* name = "descent";
  if (!r.inputs.f_star) return detail::skip(name, "f* unknown");
  if (!r.descent_applicable()) {
    return detail::skip(name, "B2 < 0 or gamma > 1/L: inequality not applicable");
  }
  AuditOutcome o = detail::start(name, kIdentityTolerance);
  const double fs = *r.inputs.f_star;
  const double g = r.inputs.gamma;
  const double a = r.a_ncvx;
  for (const Trajectory& t : runs) {
    const auto& rec = t.records;
    for (std::size_t k = 0; k < rec.size(); ++k) {
      double f_next = 0.0, e_next = 0.0;
      if (k + 1 < rec.size()) {
        f_next = rec[k + 1].f;
        e_next = rec[k + 1].v_error_sq;
      } else if (t.terminal) {
        f_next = t.terminal->f;
        e_next = t.terminal->v_error_sq;
      } else {
        continue;
      }
      const IterationRecord& q = rec[k];
      const double lhs = f_next - fs + a * e_next;
      const double rhs = q.f - fs - 0.5 * g * q.grad_norm_sq + r.b1 * q.v_error_sq -
                         r.b2 * q.step_norm_sq + r.b3 * q.eta_norm_sq;
      const double scale = std::abs(f_next - fs) + a * e_next + std::abs(q.f - fs) +
                           0.5 * g * q.grad_norm_sq + r.b1 * q.v_error_sq +
                           std::abs(r.b2) * q.step_norm_sq + r.b3 * q.eta_norm_sq;
      detail::observe(o, (rhs - lhs) / detail::safe_scale(scale), t.trial, k);
    }
  }
  return detail::finish(o);
}

/// min_{k<K} mean_k ||grad f||^2 <= Theta0/K + floor + 3 stderr for every
/// prefix K in [k_min, K_max] (all K >= 1 when the run is shorter).
inline AuditOutcome audit_theorem_ncvx(const TrialStats& st, const TheoryReport& r,
                                       std::size_t k_min = 10) {
  const char* name = "theorem_ncvx";
  if (!r.inputs.f_star) return detail::skip(name, "f* unknown");
  if (!r.ncvx_guaranteed()) {
    return detail::skip(name, "configuration outside the guaranteed regime");
  }
  if (st.diverged > 0) {
    AuditOutcome o = detail::start(name, kIdentityTolerance);
    detail::observe(o, -std::numeric_limits<double>::infinity(), std::nullopt, std::nullopt);
    o.detail = std::to_string(st.diverged) + " trial(s) diverged";
    return detail::finish(o);
  }
  const std::size_t len = st.length();
  if (len == 0) return detail::skip(name, "no iterations recorded");
  const std::size_t first = len < k_min ? 1 : k_min;
  double best = std::numeric_limits<double>::infinity();
  double best_se = 0.0;
  bool noisy = false;
  AuditOutcome o = detail::start(name, kIdentityTolerance);
  for (std::size_t K = 1; K <= len; ++K) {
    const std::size_t k = K - 1;
    const double m = st.mean_of(RecordField::grad_norm_sq, k);
    if (m < best) {
      best = m;
      best_se = st.stderr_of(RecordField::grad_norm_sq, k);
    }
    if (K < first) continue;
    const double bound = ncvx_rhs(r, K);
    if (best_se >= 0.05 * bound) noisy = true;
    const double margin = (bound + kStderrMultiplier * best_se - best) / detail::safe_scale(bound);
    detail::observe(o, margin, std::nullopt, K);
  }
  if (noisy) {
    return detail::skip(name, "stderr of the tracked minimum exceeds 5% of the bound");
  }
  return detail::finish(o);
}

// phi^k with A = a_pl for every recorded k plus the terminal iterate.
inline std::vector<double> pl_potential(const Trajectory& t, const TheoryReport& r) {
  std::vector<double> phi;
  const double fs = r.inputs.f_star.value_or(0.0);
  for (const IterationRecord& q : t.records) phi.push_back(q.f - fs + r.a_pl * q.v_error_sq);
  if (t.terminal) phi.push_back(t.terminal->f - fs + r.a_pl * t.terminal->v_error_sq);
  return phi;
}

/// mean_trials phi^k <= (1 - mu gamma/2)^k phi^0 + floor_pl + 3 stderr at
/// every k, relative tolerance 1e-9 of the bound.
inline AuditOutcome audit_theorem_pl(std::span<const Trajectory> runs,
                                     const TheoryReport& r) {
  const char* name = "theorem_pl";
  if (!(r.inputs.mu > 0.0)) return detail::skip(name, "mu = 0");
  if (!r.inputs.f_star) return detail::skip(name, "f* unknown");
  if (!r.pl_guaranteed()) {
    return detail::skip(name, "configuration outside the guaranteed regime");
  }
  AuditOutcome o = detail::start(name, kIdentityTolerance);
  std::vector<std::vector<double>> phis;
  std::size_t diverged = 0, len = 0;
  for (const Trajectory& t : runs) {
    if (t.diverged) ++diverged;
    phis.push_back(pl_potential(t, r));
    len = std::max(len, phis.back().size());
  }
  if (diverged > 0) {
    detail::observe(o, -std::numeric_limits<double>::infinity(), std::nullopt, std::nullopt);
    o.detail = std::to_string(diverged) + " trial(s) diverged";
    return detail::finish(o);
  }
  for (std::size_t k = 0; k < len; ++k) {
    double sum = 0.0;
    std::size_t c = 0;
    for (const auto& p : phis) {
      if (k < p.size()) {
        sum += p[k];
        ++c;
      }
    }
    const double mean = sum / static_cast<double>(c);
    double ss = 0.0;
    for (const auto& p : phis) {
      if (k < p.size()) ss += (p[k] - mean) * (p[k] - mean);
    }
    const double se = c > 1 ? std::sqrt(ss / static_cast<double>(c - 1)) /
                                  std::sqrt(static_cast<double>(c))
                            : 0.0;
    const double bound = pl_rhs(r, k);
    const double margin = (bound + kStderrMultiplier * se - mean) / detail::safe_scale(bound);
    detail::observe(o, margin, std::nullopt, k);
  }
  return detail::finish(o);
}

enum class AffineCheck {
  upper,  // mean + 3 stderr <= B ||grad f||^2 + C
  exact,  // |mean - (B ||grad f||^2 + C)| <= 4 stderr, for constants that are equalities
};

/// E||eta||^2 against B ||grad f(x)||^2 + C at each sample point from
/// `draws` Monte-Carlo draws of the aggregate error.
inline AuditOutcome audit_affine_variance(const Problem& p,
                                          std::span<const Vector> points,
                                          const EstimatorSpec& spec,
                                          const NoiseSpec& noise,
                                          const AffineConstants& bc,
                                          std::size_t draws, std::uint64_t seed,
                                          AffineCheck mode = AffineCheck::upper) {
  AuditOutcome o = detail::start("affine_variance", kIdentityTolerance);
  for (std::size_t pt = 0; pt < points.size(); ++pt) {
    const EtaEstimate e = measure_eta(p, points[pt], spec, noise, draws,
                                      Rng::mix(seed + pt));
    const double bound = bc.b * p.full_gradient(points[pt]).squaredNorm() + bc.c;
    double margin = 0.0;
    if (mode == AffineCheck::upper) {
      const double measured = e.mean_sq + kStderrMultiplier * e.std_error;
      margin = (bound - measured) / detail::safe_scale(std::max(bound, measured));
    } else {
      const double slack = 4.0 * e.std_error - std::abs(e.mean_sq - bound);
      margin = slack / detail::safe_scale(std::max(bound, e.mean_sq));
    }
    detail::observe(o, margin, std::nullopt, pt);
  }
  char buf[112];
  std::snprintf(buf, sizeof buf, "%s B=%.6g C=%.6g draws=%zu",
                mode == AffineCheck::upper ? "upper" : "exact", bc.b, bc.c, draws);
  o.detail = buf;
  return detail::finish(o);
}

// ---------------------------------------------------------------------------
// Problem certificates.

// Central-difference gradient of a scalar function.
template <class F>
Vector finite_difference_gradient(F&& fn, const Vector& x, double h) {
  Vector g(x.size());
  Vector xp = x, xm = x;
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    xp[c] = x[c] + h;
    xm[c] = x[c] - h;
    g[c] = (fn(xp) - fn(xm)) / (2.0 * h);
    xp[c] = x[c];
    xm[c] = x[c];
  }
  return g;
}

/// Analytic worker and full gradients against central differences with
/// h = 1e-6 max(1, ||x||) at `points` seeded points. The error is
/// ||fd - g|| / max(||g||, 1e-8 max(1, |f|)); the margin is its negation.
inline AuditOutcome audit_gradients(const Problem& p, std::size_t points = 100,
                                    double tolerance = kFiniteDifferenceTolerance,
                                    std::uint64_t seed = 0, double scale = 1.0) {
  AuditOutcome o = detail::start("gradients", tolerance);
  for (std::size_t pt = 0; pt < points; ++pt) {
    const Vector x = detail::audit_point(p.dimension(), seed, pt, 0, scale);
    const double h = 1e-6 * std::max(1.0, x.norm());
    auto check = [&](double fx, const Vector& g, const Vector& fd, std::optional<std::size_t> w) {
      const double denom = std::max(g.norm(), 1e-8 * std::max(1.0, std::abs(fx)));
      detail::observe(o, -(fd - g).norm() / denom, w, pt);
    };
    for (std::size_t i = 0; i < p.n_workers(); ++i) {
      auto fi = [&](const Vector& y) { return p.worker_value(i, y); };
      check(fi(x), p.worker_gradient(i, x), finite_difference_gradient(fi, x, h), i);
    }
    auto f = [&](const Vector& y) { return p.value(y); };
    check(f(x), p.full_gradient(x), finite_difference_gradient(f, x, h), std::nullopt);
  }
  return detail::finish(o);
}

/// ||grad f(x) - grad f(y)|| <= L ||x - y|| on random pairs, and the same for
/// every worker with the per-worker constant. Pairs mix far and near points.
inline AuditOutcome audit_smoothness(const Problem& p, std::size_t pairs = 10000,
                                     std::uint64_t seed = 0, double scale = 1.0) {
  const char* name = "smoothness";
  if (!std::isfinite(p.smoothness())) return detail::skip(name, "no finite L certified");
  AuditOutcome o = detail::start(name, kIdentityTolerance);
  for (std::size_t s = 0; s < pairs; ++s) {
    const Vector x = detail::audit_point(p.dimension(), seed, s, 0, scale);
    const double spread = std::pow(10.0, -static_cast<double>(s % 4));
    const Vector y = x + detail::audit_point(p.dimension(), seed, s, 1, scale * spread);
    const double dist = (x - y).norm();
    const double lhs = (p.full_gradient(x) - p.full_gradient(y)).norm();
    const double rhs = p.smoothness() * dist;
    detail::observe(o, (rhs - lhs) / detail::safe_scale(rhs), std::nullopt, s);
    if (s % 10 == 0) {
      for (std::size_t i = 0; i < p.n_workers(); ++i) {
        const double li = (p.worker_gradient(i, x) - p.worker_gradient(i, y)).norm();
        const double ri = p.worker_smoothness() * dist;
        detail::observe(o, (ri - li) / detail::safe_scale(ri), i, s);
      }
    }
  }
  return detail::finish(o);
}

/// ||grad f(x)||^2 >= 2 mu (f(x) - f*) on random points.
inline AuditOutcome audit_pl(const Problem& p, std::size_t samples = 10000,
                             std::uint64_t seed = 0, double scale = 1.0) {
  const char* name = "pl_certificate";
  if (!(p.pl_constant() > 0.0)) return detail::skip(name, "mu = 0");
  if (!p.f_star()) return detail::skip(name, "f* unknown");
  AuditOutcome o = detail::start(name, kIdentityTolerance);
  for (std::size_t s = 0; s < samples; ++s) {
    const Vector x = detail::audit_point(p.dimension(), seed, s, 2, scale);
    const double lhs = p.full_gradient(x).squaredNorm();
    const double rhs = 2.0 * p.pl_constant() * (p.value(x) - *p.f_star());
    const double sc = std::max(std::abs(lhs), std::abs(rhs));
    detail::observe(o, (lhs - rhs) / detail::safe_scale(sc), std::nullopt, s);
  }
  return detail::finish(o);
}

// ---------------------------------------------------------------------------
// Engine oracles.

/// Plain SGD x^{k+1} = x^k - gamma (1/n) sum_i g_i on std::vector storage
/// with its own pairwise reduction, sharing only the worker oracle (and
/// hence the generator substreams) with the engine.
inline std::vector<std::vector<double>> reference_sgd(const RunConfig& cfg,
                                                      std::uint64_t trial) {
  const Problem& p = *cfg.problem;
  const std::size_t d = p.dimension();
  const Vector start = cfg.x0 ? *cfg.x0 : default_x0(d, cfg.seed);
  std::vector<double> x(start.data(), start.data() + d);
  std::vector<std::vector<double>> path{x};
  const std::size_t n = p.n_workers();

  // Recursive halving over worker indices, same split as the engine's tree.
  std::vector<std::vector<double>> parts(n);
  auto tree = [&](auto&& self, std::size_t lo, std::size_t hi) -> std::vector<double> {
    if (hi - lo == 1) return parts[lo];
    const std::size_t mid = lo + (hi - lo) / 2;
    std::vector<double> left = self(self, lo, mid);
    const std::vector<double> right = self(self, mid, hi);
    for (std::size_t c = 0; c < d; ++c) left[c] = left[c] + right[c];
    return left;
  };
  for (std::size_t k = 0; k < cfg.iterations; ++k) {
    Vector xv(static_cast<Eigen::Index>(d));
    for (std::size_t c = 0; c < d; ++c) xv[static_cast<Eigen::Index>(c)] = x[c];
    for (std::size_t i = 0; i < n; ++i) {
      const Vector gi = worker_estimate(p, cfg.estimator, cfg.noise, i, xv, cfg.seed, trial, k);
      parts[i].assign(gi.data(), gi.data() + d);
    }
    const std::vector<double> sum = tree(tree, 0, n);
    for (std::size_t c = 0; c < d; ++c) {
      const double gc = sum[c] / static_cast<double>(n);
      x[c] = x[c] - cfg.gamma * gc;
    }
    path.push_back(x);
  }
  return path;
}

/// beta = 1 engine iterates versus reference_sgd, bit for bit. The margin is
/// minus the number of differing iterates.
inline AuditOutcome audit_reference_sgd(RunConfig cfg, std::uint64_t trial = 0) {
  cfg.beta = 1.0;
  AuditOutcome o = detail::start("reference_sgd", 0.0);
  const RunResult res = run(cfg, trial, true);
  if (res.trajectory.diverged) return detail::skip("reference_sgd", "run diverged");
  const auto ref = reference_sgd(cfg, trial);
  double mismatches = 0.0;
  std::optional<std::size_t> first_bad;
  for (std::size_t k = 0; k < ref.size(); ++k) {
    const Vector& e = res.iterates.at(k);
    const bool same = std::memcmp(e.data(), ref[k].data(), ref[k].size() * sizeof(double)) == 0;
    if (!same) {
      mismatches += 1.0;
      if (!first_bad) first_bad = k;
    }
  }
  detail::observe(o, -mismatches, trial, first_bad);
  o.detail = std::to_string(ref.size()) + " iterates compared";
  return detail::finish(o);
}

/// Per-step identities of the update: x^{k+1} == x^k - gamma v^k bit for bit,
/// v^k - v^{k-1} = beta (g^k - v^{k-1}) and g^k = grad f(x^k) + eta^k to
/// 1e-12 relative.
inline AuditOutcome audit_engine_identities(const RunConfig& cfg, std::uint64_t trial = 0) {
  cfg.validate();
  AuditOutcome o = detail::start("engine_identities", 1e-12);
  MomentumState s = init_state(cfg, trial);
  for (std::size_t k = 0; k < cfg.iterations; ++k) {
    const StepResult sr = step(s, *cfg.problem, cfg.estimator, cfg.noise, cfg.gamma,
                               cfg.beta, cfg.lyapunov_weight);
    if (sr.diverged) break;
    const Vector& v = sr.state.v_prev;
    const Vector expect_x = s.x - cfg.gamma * v;
    const bool bit = std::memcmp(expect_x.data(), sr.state.x.data(),
                                 static_cast<std::size_t>(v.size()) * sizeof(double)) == 0;
    detail::observe(o, bit ? 0.0 : -1.0, trial, k);
    const double vs = s.v_prev.norm() + sr.aggregate.norm();
    const double vres = ((v - s.v_prev) - cfg.beta * (sr.aggregate - s.v_prev)).norm();
    detail::observe(o, -vres / detail::safe_scale(vs), trial, k);
    const double es = sr.aggregate.norm() + sr.gradient.norm();
    const double eres = (sr.aggregate - (sr.gradient + sr.eta)).norm();
    detail::observe(o, -eres / detail::safe_scale(es), trial, k);
    s = sr.state;
  }
  return detail::finish(o);
}

// ---------------------------------------------------------------------------
// Sweep orderings.

struct SweepPoint {
  double axis_value = 0.0;
  double plateau_mean = 0.0;
  double plateau_std = 0.0;
  std::size_t trials = 1;
  long iters_to_threshold = -1;  // -1: never reached
  std::size_t diverged = 0;
};

/// Plateau nondecreasing in the axis value: for consecutive points,
/// plateau_{j+1} - plateau_j + 3 sqrt(se_j^2 + se_{j+1}^2) >= 0, normalized by
/// the larger plateau. Points with diverged trials are excluded.
inline AuditOutcome audit_plateau_nondecreasing(std::string name,
                                                std::vector<SweepPoint> pts) {
  std::sort(pts.begin(), pts.end(),
            [](const SweepPoint& a, const SweepPoint& b) { return a.axis_value < b.axis_value; });
  std::size_t excluded = 0;
  std::vector<SweepPoint> kept;
  for (const SweepPoint& p : pts) {
    if (p.diverged > 0) ++excluded;
    else kept.push_back(p);
  }
  AuditOutcome o = detail::start(std::move(name), kIdentityTolerance);
  for (std::size_t j = 0; j + 1 < kept.size(); ++j) {
    const SweepPoint& a = kept[j];
    const SweepPoint& b = kept[j + 1];
    const double se_a = a.plateau_std / std::sqrt(static_cast<double>(std::max<std::size_t>(a.trials, 1)));
    const double se_b = b.plateau_std / std::sqrt(static_cast<double>(std::max<std::size_t>(b.trials, 1)));
    const double slack = b.plateau_mean - a.plateau_mean +
                         kStderrMultiplier * std::sqrt(se_a * se_a + se_b * se_b);
    const double scale = std::max(std::abs(a.plateau_mean), std::abs(b.plateau_mean));
    detail::observe(o, slack / detail::safe_scale(scale), std::nullopt, j);
  }
  o.detail = std::to_string(excluded) + " diverged point(s) excluded";
  return detail::finish(o);
}

/// Iterations-to-threshold nonincreasing in the axis value; "never reached"
/// counts as infinitely many iterations. Fails when no point reaches the
/// threshold, since the ordering is then vacuous.
inline AuditOutcome audit_iters_nonincreasing(std::string name, std::vector<SweepPoint> pts) {
  std::sort(pts.begin(), pts.end(),
            [](const SweepPoint& a, const SweepPoint& b) { return a.axis_value < b.axis_value; });
  AuditOutcome o = detail::start(std::move(name), 0.0);
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::size_t excluded = 0, reached = 0;
  std::vector<double> it;
  for (const SweepPoint& p : pts) {
    if (p.diverged > 0) {
      ++excluded;
      continue;
    }
    if (p.iters_to_threshold >= 0) ++reached;
    it.push_back(p.iters_to_threshold < 0 ? inf : static_cast<double>(p.iters_to_threshold));
  }
  for (std::size_t j = 0; j + 1 < it.size(); ++j) {
    double m = 0.0;
    if (it[j + 1] > it[j]) m = std::isinf(it[j + 1]) ? -inf : it[j] - it[j + 1];
    detail::observe(o, m, std::nullopt, j);
  }
  if (reached == 0 && !it.empty()) {
    detail::observe(o, -inf, std::nullopt, std::nullopt);
    o.detail = "threshold never reached";
  } else {
    o.detail = std::to_string(excluded) + " diverged point(s) excluded";
  }
  return detail::finish(o);
}

}  // namespace biasmom
