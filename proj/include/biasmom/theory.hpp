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
#include <limits>
#include <optional>
#include <string>

#include "biasmom/error.hpp"

namespace biasmom {

// Weight on ||grad f - v||^2 in the Lyapunov function, general smooth case:
// A = gamma (1 - beta) / beta.
inline double lyapunov_weight_ncvx(double gamma, double beta) {
  return gamma * (1.0 - beta) / beta;
}

// PL case: A = 2 gamma (1 - beta) / beta.
inline double lyapunov_weight_pl(double gamma, double beta) {
  return 2.0 * gamma * (1.0 - beta) / beta;
}

inline double alpha_ncvx(double beta) {
  return 2.0 * (1.0 - beta) * (beta + 2.0) / (beta * beta);
}

inline double alpha_pl(double beta) {
  return 4.0 * (1.0 - beta) * (beta + 2.0) / (beta * beta);
}

struct Lemma1Constants {
  double b1 = 0.0;
  double b2 = 0.0;
  double b3 = 0.0;
};

/// Coefficients of the one-step descent inequality
///   phi^{k+1} <= f(x^k) - f* - (gamma/2)||grad f(x^k)||^2
///                + B1 ||grad f(x^k) - v^{k-1}||^2 - B2 ||x^{k+1} - x^k||^2
///                + B3 ||eta^k||^2
/// for phi^k = f(x^k) - f* + A ||grad f(x^k) - v^{k-1}||^2.
inline Lemma1Constants lemma1_constants(double gamma, double beta, double L,
                                        double a) {
  Lemma1Constants c;
  c.b1 = gamma * (1.0 - beta) / 2.0 + a * (1.0 - beta / 2.0);
  c.b2 = 1.0 / (2.0 * gamma) - L / 2.0 - a * (beta + 2.0) * L * L / beta;
  c.b3 = gamma * beta / 2.0 + a * beta * (1.0 + beta / 2.0);
  return c;
}

// Largest gamma with a/gamma - b - c gamma >= 0 guaranteed: (sqrt(c/a) + b/a)^-1.
inline double lemma3_bound(double a, double b, double c) {
  return 1.0 / (std::sqrt(c / a) + b / a);
}

inline double lemma3_slack(double a, double b, double c, double gamma) {
  return a / gamma - b - c * gamma;
}

// Relative slack allowed when a quantity sits exactly on a closed-form
// boundary and the evaluation carries rounding error.
inline constexpr double kBoundaryTolerance = 1e-12;

inline bool lemma3_holds(double a, double b, double c, double gamma) {
  return lemma3_slack(a, b, c, gamma) >= -kBoundaryTolerance * (a / gamma);
}

struct StepsizeBounds {
  double gamma_max_ncvx = 0.0;
  std::optional<double> gamma_max_pl;  // only when mu > 0
  bool lemma3_ncvx_ok = false;
  std::optional<bool> lemma3_pl_ok;
};

/// gamma_max_ncvx = 1 / (L (sqrt(alpha_ncvx) + 1)) and
/// gamma_max_pl = min(1 / (L sqrt(alpha_pl) + L), beta / (2 mu)), each checked
/// against the a/gamma - b - c gamma >= 0 condition it is derived from
/// (a = 1/2, b = L/2, c = (1-beta)(beta+2)L^2/beta^2, doubled for PL).
inline StepsizeBounds stepsize_bounds(double beta, double L, double mu) {
  if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in (0, 1]");
  if (!(L > 0.0)) throw ConfigError("L must be > 0");
  StepsizeBounds s;
  const double base = (1.0 - beta) * (beta + 2.0) * L * L / (beta * beta);
  s.gamma_max_ncvx = 1.0 / (L * (std::sqrt(alpha_ncvx(beta)) + 1.0));
  s.lemma3_ncvx_ok = lemma3_holds(0.5, L / 2.0, base, s.gamma_max_ncvx);
  if (mu > 0.0) {
    const double smooth_part = 1.0 / (L * std::sqrt(alpha_pl(beta)) + L);
    s.gamma_max_pl = std::min(smooth_part, beta / (2.0 * mu));
    s.lemma3_pl_ok = lemma3_holds(0.5, L / 2.0, 2.0 * base, *s.gamma_max_pl);
  }
  return s;
}

// Affine-variance pair: E||eta||^2 <= B E||grad f||^2 + C.
struct AffineConstants {
  double b = 0.0;
  double c = 0.0;
};

// alpha-contractive compression with per-worker error sigma2 and gradient
// heterogeneity delta2_het.
inline AffineConstants affine_constants_compression(double alpha_c,
                                                    double sigma2,
                                                    double delta2_het) {
  if (!(alpha_c > 0.0 && alpha_c <= 1.0)) {
    throw ConfigError("compression alpha must lie in (0, 1]");
  }
  if (sigma2 < 0.0 || delta2_het < 0.0) {
    throw ConfigError("sigma2 and delta2 must be >= 0");
  }
  const double a = alpha_c;
  AffineConstants out;
  out.b = 1.0 - a / 8.0;
  out.c = (1.0 - a / 4.0) * (1.0 + 8.0 / a) * delta2_het +
          ((1.0 - a / 2.0) * (1.0 + 4.0 / a) + (1.0 + 2.0 / a)) * sigma2;
  return out;
}

// Clipping with threshold tau; delta_subopt bounds f(x) - f* along the run.
inline AffineConstants affine_constants_clip(double sigma2, double L,
                                             double delta_subopt, double tau) {
  if (!(tau > 0.0)) throw ConfigError("clip tau must be > 0");
  if (sigma2 < 0.0 || L < 0.0 || delta_subopt < 0.0) {
    throw ConfigError("clip constants must be >= 0");
  }
  AffineConstants out;
  out.b = 0.0;
  out.c = std::max(2.0 * sigma2 + 4.0 * L * delta_subopt + tau * tau, 0.0) +
          2.0 * sigma2;
  return out;
}

struct CompositeAffine {
  AffineConstants affine;
  double smoothness = 0.0;  // L = L_g ell_F + ell_g^2 L_F
};

inline CompositeAffine affine_constants_composite(double ell_g, double ell_f,
                                                  double lip_grad_f,
                                                  double lip_grad_g,
                                                  double sigma_f2,
                                                  double sigma_dg2,
                                                  double sigma_g2,
                                                  std::size_t s_f,
                                                  std::size_t s_g) {
  if (s_f < 1 || s_g < 1) throw ConfigError("batch sizes must be >= 1");
  const double sf = static_cast<double>(s_f);
  const double sg = static_cast<double>(s_g);
  CompositeAffine out;
  out.affine.b = 0.0;
  out.affine.c = 3.0 * ell_g * ell_g * sigma_f2 / sf +
                 3.0 * ell_f * ell_f * sigma_dg2 / sg +
                 3.0 * ell_g * ell_g * lip_grad_f * lip_grad_f * sigma_g2 / sg;
  out.smoothness = lip_grad_g * ell_f + ell_g * ell_g * lip_grad_f;
  return out;
}

struct TheoryInputs {
  double gamma = 0.0;
  double beta = 1.0;
  double L = 1.0;
  double mu = 0.0;
  std::optional<double> f_star;
  double f0 = 0.0;           // f(x^0)
  double v0_error_sq = 0.0;  // ||grad f(x^0) - v^{-1}||^2
  AffineConstants variance;
  std::string variance_source;
};

/// Every closed-form constant and admissibility flag for one configuration.
struct TheoryReport {
  TheoryInputs inputs;

  double alpha_ncvx = 0.0;
  double alpha_pl = 0.0;
  double gamma_max_ncvx = 0.0;
  std::optional<double> gamma_max_pl;
  bool lemma3_ncvx_ok = false;
  std::optional<bool> lemma3_pl_ok;

  double a_ncvx = 0.0;
  double a_pl = 0.0;
  // Lemma 1 coefficients at A = a_ncvx (b*) and at A = a_pl (b*_pl).
  double b1 = 0.0, b2 = 0.0, b3 = 0.0;
  double b1_pl = 0.0, b2_pl = 0.0, b3_pl = 0.0;

  double b_var = 0.0;
  double c_var = 0.0;
  std::optional<double> theta0;
  std::optional<double> phi0;
  double floor_ncvx = 0.0;
  double floor_pl = std::numeric_limits<double>::infinity();

  bool cond_b_ncvx_ok = false;
  bool cond_b_pl_ok = false;
  bool gamma_ok_ncvx = false;
  bool gamma_ok_pl = false;

  // B2 >= 0 and gamma <= 1/L at A = a_ncvx: the one-step inequality applies.
  bool descent_applicable() const {
    return b2 >= -kBoundaryTolerance / (2.0 * inputs.gamma) &&
           inputs.gamma <= (1.0 + kBoundaryTolerance) / inputs.L;
  }
  bool ncvx_guaranteed() const {
    return cond_b_ncvx_ok && gamma_ok_ncvx && theta0.has_value();
  }
  bool pl_guaranteed() const {
    return inputs.mu > 0.0 && cond_b_pl_ok && gamma_ok_pl && phi0.has_value();
  }
};

inline TheoryReport make_theory_report(const TheoryInputs& in) {
  if (!(in.gamma > 0.0)) throw ConfigError("gamma must be > 0");
  TheoryReport r;
  r.inputs = in;
  const double g = in.gamma, b = in.beta;
  const StepsizeBounds sb = stepsize_bounds(b, in.L, in.mu);
  r.alpha_ncvx = alpha_ncvx(b);
  r.alpha_pl = alpha_pl(b);
  r.gamma_max_ncvx = sb.gamma_max_ncvx;
  r.gamma_max_pl = sb.gamma_max_pl;
  r.lemma3_ncvx_ok = sb.lemma3_ncvx_ok;
  r.lemma3_pl_ok = sb.lemma3_pl_ok;
  r.a_ncvx = lyapunov_weight_ncvx(g, b);
  r.a_pl = lyapunov_weight_pl(g, b);
  const Lemma1Constants l1 = lemma1_constants(g, b, in.L, r.a_ncvx);
  const Lemma1Constants l1p = lemma1_constants(g, b, in.L, r.a_pl);
  r.b1 = l1.b1;
  r.b2 = l1.b2;
  r.b3 = l1.b3;
  r.b1_pl = l1p.b1;
  r.b2_pl = l1p.b2;
  r.b3_pl = l1p.b3;
  r.b_var = in.variance.b;
  r.c_var = in.variance.c;
  r.floor_ncvx = 4.0 * (1.0 - b * b / 2.0) * r.c_var;
  if (in.mu > 0.0) r.floor_pl = (2.0 / in.mu) * (2.0 - b / 2.0 - b * b) * r.c_var;
  r.cond_b_ncvx_ok = (1.0 - b * b / 2.0) * r.b_var <= 0.25;
  r.cond_b_pl_ok = (2.0 - b / 2.0 - b * b) * r.b_var <= 0.25;
  r.gamma_ok_ncvx = g <= r.gamma_max_ncvx * (1.0 + kBoundaryTolerance);
  r.gamma_ok_pl =
      r.gamma_max_pl.has_value() && g <= *r.gamma_max_pl * (1.0 + kBoundaryTolerance);
  if (in.f_star) {
    const double gap = in.f0 - *in.f_star;
    r.theta0 = (4.0 / g) * gap + (4.0 * (1.0 - b) / b) * in.v0_error_sq;
    r.phi0 = gap + r.a_pl * in.v0_error_sq;
  }
  return r;
}

// Theta0 / K + 4 (1 - beta^2/2) C.
inline double ncvx_rhs(const TheoryReport& r, std::size_t K) {
  if (K == 0) throw ConfigError("ncvx bound needs K >= 1");
  if (!r.theta0) return std::numeric_limits<double>::quiet_NaN();
  return *r.theta0 / static_cast<double>(K) + r.floor_ncvx;
}

// (1 - mu gamma / 2)^K phi0 + (2/mu)(2 - beta/2 - beta^2) C.
inline double pl_rhs(const TheoryReport& r, std::size_t K) {
  if (!r.phi0 || !(r.inputs.mu > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double rate = 1.0 - r.inputs.mu * r.inputs.gamma / 2.0;
  return std::pow(rate, static_cast<double>(K)) * *r.phi0 + r.floor_pl;
}

// The admissibility flags re-derived from the Lemma 1 coefficients: with
// A = a_ncvx the coefficient B3 equals gamma (1 - beta^2/2), with A = a_pl
// it equals gamma (2 - beta/2 - beta^2), and B2 >= 0 is the step-size
// condition.
struct DerivedConditions {
  bool cond_b_ncvx_ok = false;
  bool cond_b_pl_ok = false;
  bool gamma_ok_ncvx = false;
  bool gamma_ok_pl = false;
};

inline DerivedConditions conditions_from_lemma1(const TheoryReport& r) {
  const double g = r.inputs.gamma;
  const double b2_tol = kBoundaryTolerance / (2.0 * g);
  DerivedConditions d;
  d.cond_b_ncvx_ok = (r.b3 / g) * r.b_var <= 0.25 * (1.0 + kBoundaryTolerance);
  d.cond_b_pl_ok = (r.b3_pl / g) * r.b_var <= 0.25 * (1.0 + kBoundaryTolerance);
  d.gamma_ok_ncvx = std::isfinite(r.b2) && r.b2 >= -b2_tol;
  d.gamma_ok_pl = r.inputs.mu > 0.0 && std::isfinite(r.b2_pl) && r.b2_pl >= -b2_tol &&
                  g <= (r.inputs.beta / (2.0 * r.inputs.mu)) * (1.0 + kBoundaryTolerance);
  return d;
}

}  // namespace biasmom
