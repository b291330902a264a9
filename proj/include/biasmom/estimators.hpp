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
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "biasmom/composite.hpp"
#include "biasmom/error.hpp"
#include "biasmom/problems.hpp"
#include "biasmom/rng.hpp"
#include "biasmom/vector.hpp"

namespace biasmom {

enum class EstimatorKind { identity, top_k, scaled_sign, clip, composite };

inline std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::identity: return "identity";
    case EstimatorKind::top_k: return "top_k";
    case EstimatorKind::scaled_sign: return "scaled_sign";
    case EstimatorKind::clip: return "clip";
    case EstimatorKind::composite: return "composite";
  }
  return "unknown";
}

// The biased transformer each worker applies before sending its gradient.
struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::identity;
  std::size_t k = 0;                                     // top_k
  double tau = std::numeric_limits<double>::infinity();  // clip
  std::size_t s_g = 0;                                   // composite
  std::size_t s_f = 0;                                   // composite

  static EstimatorSpec identity() { return {}; }
  static EstimatorSpec top_k(std::size_t k) {
    EstimatorSpec s;
    s.kind = EstimatorKind::top_k;
    s.k = k;
    return s;
  }
  static EstimatorSpec scaled_sign() {
    EstimatorSpec s;
    s.kind = EstimatorKind::scaled_sign;
    return s;
  }
  static EstimatorSpec clip(double tau) {
    EstimatorSpec s;
    s.kind = EstimatorKind::clip;
    s.tau = tau;
    return s;
  }
  static EstimatorSpec composite(std::size_t s_g, std::size_t s_f) {
    EstimatorSpec s;
    s.kind = EstimatorKind::composite;
    s.s_g = s_g;
    s.s_f = s_f;
    return s;
  }

  // Throws ConfigError if this estimator cannot be used with `p`.
  void validate(const Problem& p) const {
    switch (kind) {
      case EstimatorKind::identity:
      case EstimatorKind::scaled_sign:
        return;
      case EstimatorKind::top_k:
        if (k < 1 || k > p.dimension()) {
          throw ConfigError("estimator.k must lie in [1, " +
                            std::to_string(p.dimension()) + "], got " +
                            std::to_string(k));
        }
        return;
      case EstimatorKind::clip:
        if (!(tau > 0.0)) throw ConfigError("estimator.tau must be > 0");
        return;
      case EstimatorKind::composite: {
        const auto* cp = dynamic_cast<const CompositeProblem*>(&p);
        if (cp == nullptr) {
          throw ConfigError("composite estimator requires a composite problem, "
                            "got " + to_string(p.kind()));
        }
        for (std::size_t i = 0; i < cp->n_workers(); ++i) {
          if (s_g < 1 || s_g > cp->inner_count(i)) {
            throw ConfigError("estimator.S_g must lie in [1, " +
                              std::to_string(cp->inner_count(i)) + "]");
          }
          if (s_f < 1 || s_f > cp->outer_count(i)) {
            throw ConfigError("estimator.S_F must lie in [1, " +
                              std::to_string(cp->outer_count(i)) + "]");
          }
        }
        return;
      }
    }
  }
};

/// Keeps the k entries of largest magnitude; on ties the lower index wins.
inline Vector top_k(const Vector& g, std::size_t k) {
  const auto d = static_cast<std::size_t>(g.size());
  if (k < 1 || k > d) {
    throw ConfigError("top_k: k = " + std::to_string(k) + " outside [1, " +
                      std::to_string(d) + "]");
  }
  require_finite(g, "top_k input");
  if (k == d) return g;
  std::vector<Eigen::Index> order(d);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::nth_element(order.begin(), order.begin() + static_cast<long>(k) - 1,
                   order.end(), [&g](Eigen::Index a, Eigen::Index b) {
                     const double ma = std::abs(g[a]);
                     const double mb = std::abs(g[b]);
                     return ma > mb || (ma == mb && a < b);
                   });
  Vector out = Vector::Zero(g.size());
  for (std::size_t r = 0; r < k; ++r) out[order[r]] = g[order[r]];
  return out;
}

/// (||g||_1 / d) sign(g), with sign(0) = 0.
inline Vector scaled_sign(const Vector& g) {
  require_finite(g, "scaled_sign input");
  const double scale = g.lpNorm<1>() / static_cast<double>(g.size());
  Vector out(g.size());
  for (Eigen::Index c = 0; c < g.size(); ++c) {
    out[c] = g[c] > 0.0 ? scale : (g[c] < 0.0 ? -scale : 0.0);
  }
  return out;
}

// Input-dependent contraction ||g||_1^2 / (d ||g||^2) of scaled_sign; 1 for
// g = 0.
inline double scaled_sign_alpha(const Vector& g) {
  const double sq = g.squaredNorm();
  if (sq == 0.0) return 1.0;
  const double l1 = g.lpNorm<1>();
  return l1 * l1 / (static_cast<double>(g.size()) * sq);
}

/// min(1, tau / ||g||) g.
inline Vector clip(const Vector& g, double tau) {
  if (!(tau > 0.0)) throw ConfigError("clip: tau must be > 0");
  require_finite(g, "clip input");
  const double norm = g.norm();
  if (norm <= tau) return g;
  return g * (tau / norm);
}

// Worst-case alpha with ||Q(g) - g||^2 <= (1 - alpha) ||g||^2 for every g, or
// nullopt if the estimator is not a contraction.
inline std::optional<double> contraction_factor(const EstimatorSpec& spec,
                                                std::size_t d) {
  switch (spec.kind) {
    case EstimatorKind::identity: return 1.0;
    case EstimatorKind::top_k:
      return static_cast<double>(spec.k) / static_cast<double>(d);
    case EstimatorKind::scaled_sign: return 1.0 / static_cast<double>(d);
    case EstimatorKind::clip:
    case EstimatorKind::composite: return std::nullopt;
  }
  return std::nullopt;
}

// S distinct indices from {0..m-1}, uniformly, returned in ascending order.
inline std::vector<std::size_t> sample_without_replacement(Rng& rng,
                                                           std::size_t m,
                                                           std::size_t s) {
  if (s < 1 || s > m) throw ConfigError("sample size outside [1, m]");
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t r = 0; r < s; ++r) {
    const std::size_t pick = r + static_cast<std::size_t>(rng.uniform_index(m - r));
    std::swap(idx[r], idx[pick]);
  }
  idx.resize(s);
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Subsampled chained gradient of worker i: one S_g draw shared by the inner
/// value and inner Jacobian, one S_F draw for the outer gradients.
inline Vector composite_estimate(const CompositeProblem& cp, std::size_t i,
                                 const Vector& x, std::size_t s_g,
                                 std::size_t s_f, Rng& rng) {
  cp.check_worker(i);
  if (s_g < 1 || s_g > cp.inner_count(i)) {
    throw ConfigError("composite: S_g outside [1, m_g]");
  }
  if (s_f < 1 || s_f > cp.outer_count(i)) {
    throw ConfigError("composite: S_F outside [1, m_F]");
  }
  const auto set_g = sample_without_replacement(rng, cp.inner_count(i), s_g);
  const auto set_f = sample_without_replacement(rng, cp.outer_count(i), s_f);
  return chained_gradient(cp, i, x, set_g, set_f);
}

// Applies a non-composite estimator to a raw worker gradient.
inline Vector apply_estimator(const EstimatorSpec& spec, const Vector& raw) {
  switch (spec.kind) {
    case EstimatorKind::identity: return raw;
    case EstimatorKind::top_k: return top_k(raw, spec.k);
    case EstimatorKind::scaled_sign: return scaled_sign(raw);
    case EstimatorKind::clip: return clip(raw, spec.tau);
    case EstimatorKind::composite:
      throw ConfigError(
          "composite estimator needs a composite problem context, not a raw "
          "gradient");
  }
  throw ConfigError("unknown estimator kind");
}

/// What worker i sends to the server at iteration k of `trial`.
///
/// Non-composite: apply_estimator(spec, grad f_i(x) + offset + noise).
/// Composite: the subsampled chained gradient plus offset and noise.
/// Noise and subsampling use disjoint substreams of (seed, trial, i, k).
inline Vector worker_estimate(const Problem& p, const EstimatorSpec& spec,
                              const NoiseSpec& noise, std::size_t i,
                              const Vector& x, std::uint64_t seed,
                              std::uint64_t trial, std::uint64_t k) {
  Rng noise_rng = Rng::substream(seed, trial, i, k, StreamTag::noise);
  if (spec.kind != EstimatorKind::composite) {
    return apply_estimator(spec, noisy_worker_gradient(p, i, x, noise, noise_rng));
  }
  const auto* cp = dynamic_cast<const CompositeProblem*>(&p);
  if (cp == nullptr) {
    throw ConfigError("composite estimator requires a composite problem");
  }
  Rng sample_rng = Rng::substream(seed, trial, i, k, StreamTag::sampling);
  Vector g = composite_estimate(*cp, i, x, spec.s_g, spec.s_f, sample_rng);
  if (!noise.exact()) {
    if (noise.delta_vector.size() > 0) {
      g += noise.offset(p.dimension());
    } else {
      g.array() += noise.delta_offset;
    }
    if (noise.sigma2 > 0.0) {
      const double sd = std::sqrt(noise.sigma2);
      for (Eigen::Index c = 0; c < g.size(); ++c) g[c] += sd * noise_rng.gaussian();
    }
  }
  return g;
}

struct EtaEstimate {
  double mean_sq = 0.0;
  double std_error = 0.0;
};

/// Monte-Carlo estimate of E||eta||^2 at a fixed point x, where
/// eta = (1/n) sum_i worker_estimate_i - grad f(x). Draw s uses trial index s
/// of a seed derived from `seed`, so draws never coincide with run streams.
inline EtaEstimate measure_eta(const Problem& p, const Vector& x,
                               const EstimatorSpec& spec,
                               const NoiseSpec& noise, std::size_t samples,
                               std::uint64_t seed) {
  if (samples < 1) throw ConfigError("measure_eta: samples must be >= 1");
  spec.validate(p);
  const Vector grad = p.full_gradient(x);
  const std::uint64_t mseed = Rng::mix(seed ^ 0x6d65617375726531ULL);
  std::vector<double> values(samples);
  std::vector<Vector> outs(p.n_workers());
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t i = 0; i < p.n_workers(); ++i) {
      outs[i] = worker_estimate(p, spec, noise, i, x, mseed, s, 0);
    }
    values[s] = (average(std::span<const Vector>(outs)) - grad).squaredNorm();
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(samples);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  EtaEstimate e;
  e.mean_sq = mean;
  if (samples > 1) {
    e.std_error = std::sqrt(ss / static_cast<double>(samples - 1)) /
               std::sqrt(static_cast<double>(samples));
  }
  return e;
}

}  // namespace biasmom
