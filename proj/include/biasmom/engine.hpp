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
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "biasmom/error.hpp"
#include "biasmom/estimators.hpp"
#include "biasmom/problems.hpp"
#include "biasmom/rng.hpp"
#include "biasmom/vector.hpp"

namespace biasmom {

// A run is declared diverged once f(x^k) exceeds this value or any quantity
// becomes non-finite.
inline constexpr double kDivergenceThreshold = 1e12;

enum class VInit { zero, grad_at_x0 };

struct RunConfig {
  ProblemPtr problem;
  EstimatorSpec estimator;
  NoiseSpec noise;
  double gamma = 0.0;
  double beta = 1.0;
  std::size_t iterations = 0;
  std::size_t trials = 1;
  VInit v_init = VInit::grad_at_x0;
  std::optional<Vector> x0;  // default: seeded unit-norm Gaussian direction
  std::uint64_t seed = 0;
  double lyapunov_weight = 0.0;  // A in the recorded phi column

  void validate() const {
    if (!problem) throw ConfigError("run config: no problem");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
      throw ConfigError("gamma must be finite and > 0");
    }
    if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in (0, 1]");
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (!(lyapunov_weight >= 0.0)) throw ConfigError("lyapunov weight must be >= 0");
    noise.validate();
    estimator.validate(*problem);
    if (x0) {
      require_dimension(*x0, problem->dimension(), "x0");
      require_finite(*x0, "x0");
    }
  }
};

// Starting point used when the config gives none: a standard normal draw
// scaled to unit norm. Depends on the seed only, so all trials share it.
inline Vector default_x0(std::size_t d, std::uint64_t seed) {
  Rng rng = Rng::substream(seed, 0, std::numeric_limits<std::uint64_t>::max(),
                           0, StreamTag::init);
  Vector x(static_cast<Eigen::Index>(d));
  for (Eigen::Index c = 0; c < x.size(); ++c) x[c] = rng.gaussian();
  const double norm = x.norm();
  if (norm > 0.0) x /= norm;
  return x;
}

// (x^k, v^{k-1}, k). Randomness is keyed by (seed, trial, worker, k), so the
// pair (seed, trial) is the complete generator state.
struct MomentumState {
  Vector x;
  Vector v_prev;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::uint64_t trial = 0;
};

struct IterationRecord {
  std::size_t k = 0;
  double f = 0.0;             // f(x^k)
  double grad_norm_sq = 0.0;  // ||grad f(x^k)||^2
  double eta_norm_sq = 0.0;   // ||g^k - grad f(x^k)||^2
  double v_error_sq = 0.0;    // ||grad f(x^k) - v^{k-1}||^2
  double step_norm_sq = 0.0;  // ||x^{k+1} - x^k||^2
  double phi = 0.0;           // f(x^k) - f* + A ||grad f(x^k) - v^{k-1}||^2
};

enum class RecordField { f, grad_norm_sq, eta_norm_sq, v_error_sq, step_norm_sq, phi };
inline constexpr std::array<RecordField, 6> kRecordFields = {
    RecordField::f,          RecordField::grad_norm_sq, RecordField::eta_norm_sq,
    RecordField::v_error_sq, RecordField::step_norm_sq, RecordField::phi};

inline double field_value(const IterationRecord& r, RecordField f) {
  switch (f) {
    case RecordField::f: return r.f;
    case RecordField::grad_norm_sq: return r.grad_norm_sq;
    case RecordField::eta_norm_sq: return r.eta_norm_sq;
    case RecordField::v_error_sq: return r.v_error_sq;
    case RecordField::step_norm_sq: return r.step_norm_sq;
    case RecordField::phi: return r.phi;
  }
  return 0.0;
}

inline MomentumState init_state(const RunConfig& cfg, std::uint64_t trial = 0) {
  const Problem& p = *cfg.problem;
  MomentumState s;
  s.x = cfg.x0 ? *cfg.x0 : default_x0(p.dimension(), cfg.seed);
  require_dimension(s.x, p.dimension(), "x0");
  s.v_prev = cfg.v_init == VInit::grad_at_x0
                 ? p.full_gradient(s.x)
                 : Vector::Zero(static_cast<Eigen::Index>(p.dimension()));
  s.k = 0;
  s.seed = cfg.seed;
  s.trial = trial;
  return s;
}

struct StepResult {
  MomentumState state;  // (x^{k+1}, v^k, k+1); unchanged input when diverged
  IterationRecord record;
  Vector aggregate;     // g^k = (1/n) sum_i worker outputs
  Vector gradient;      // grad f(x^k)
  Vector eta;           // g^k - grad f(x^k)
  bool diverged = false;
};

/// One server round: every worker computes its estimate at x^k, the server
/// averages them to g^k, then v^k = (1 - beta) v^{k-1} + beta g^k and
/// x^{k+1} = x^k - gamma v^k.
///
/// The convex-combination form makes beta = 1 produce v^k == g^k bit for bit.
inline StepResult step(const MomentumState& state, const Problem& p,
                       const EstimatorSpec& estimator, const NoiseSpec& noise,
                       double gamma, double beta, double lyapunov_weight = 0.0) {
  StepResult out;
  out.state = state;
  const double f = std::isfinite(state.x.sum()) ? p.value(state.x)
                                                : std::numeric_limits<double>::infinity();
  if (!std::isfinite(f) || f > kDivergenceThreshold || !all_finite(state.x)) {
    out.diverged = true;
    return out;
  }
  out.gradient = p.full_gradient(state.x);
  std::vector<Vector> outputs(p.n_workers());
  for (std::size_t i = 0; i < p.n_workers(); ++i) {
    outputs[i] = worker_estimate(p, estimator, noise, i, state.x, state.seed,
                                 state.trial, state.k);
  }
  out.aggregate = average(std::span<const Vector>(outputs));
  if (!all_finite(out.aggregate) || !all_finite(out.gradient)) {
    out.diverged = true;
    return out;
  }
  out.eta = out.aggregate - out.gradient;
  Vector v = (1.0 - beta) * state.v_prev + beta * out.aggregate;
  Vector x_next = state.x - gamma * v;

  IterationRecord& r = out.record;
  r.k = state.k;
  r.f = f;
  r.grad_norm_sq = out.gradient.squaredNorm();
  r.eta_norm_sq = out.eta.squaredNorm();
  r.v_error_sq = (out.gradient - state.v_prev).squaredNorm();
  r.step_norm_sq = (x_next - state.x).squaredNorm();
  r.phi = f - p.f_star().value_or(0.0) + lyapunov_weight * r.v_error_sq;
  if (!all_finite(v) || !all_finite(x_next) || !std::isfinite(r.grad_norm_sq) ||
      !std::isfinite(r.eta_norm_sq) || !std::isfinite(r.v_error_sq) ||
      !std::isfinite(r.step_norm_sq) || !std::isfinite(r.phi)) {
    out.diverged = true;
    return out;
  }
  out.state.x = std::move(x_next);
  out.state.v_prev = std::move(v);
  out.state.k = state.k + 1;
  return out;
}

// Values at the final iterate x^K, needed to close the last descent step.
struct Terminal {
  double f = 0.0;
  double grad_norm_sq = 0.0;
  double v_error_sq = 0.0;  // ||grad f(x^K) - v^{K-1}||^2
};

struct Trajectory {
  std::size_t trial = 0;
  std::vector<IterationRecord> records;
  std::optional<Terminal> terminal;
  bool diverged = false;
};

struct RunResult {
  Trajectory trajectory;
  MomentumState final_state;
  std::vector<Vector> iterates;  // x^0..x^K, only when requested
};

/// K steps from init_state, or fewer if the run diverges. Divergence is a
/// flag on the result, never an exception.
inline RunResult run(const RunConfig& cfg, std::uint64_t trial = 0,
                     bool keep_iterates = false) {
  cfg.validate();
  const Problem& p = *cfg.problem;
  RunResult res;
  res.trajectory.trial = static_cast<std::size_t>(trial);
  MomentumState s = init_state(cfg, trial);
  res.trajectory.records.reserve(cfg.iterations);
  if (keep_iterates) res.iterates.push_back(s.x);
  for (std::size_t k = 0; k < cfg.iterations; ++k) {
    StepResult sr = step(s, p, cfg.estimator, cfg.noise, cfg.gamma, cfg.beta,
                         cfg.lyapunov_weight);
    if (sr.diverged) {
      res.trajectory.diverged = true;
      break;
    }
    res.trajectory.records.push_back(sr.record);
    s = std::move(sr.state);
    if (keep_iterates) res.iterates.push_back(s.x);
  }
  if (!res.trajectory.diverged) {
    const double f = all_finite(s.x) ? p.value(s.x)
                                     : std::numeric_limits<double>::infinity();
    if (std::isfinite(f) && f <= kDivergenceThreshold) {
      const Vector g = p.full_gradient(s.x);
      Terminal t;
      t.f = f;
      t.grad_norm_sq = g.squaredNorm();
      t.v_error_sq = (g - s.v_prev).squaredNorm();
      res.trajectory.terminal = t;
    } else {
      res.trajectory.diverged = true;
    }
  }
  res.final_state = std::move(s);
  return res;
}

/// Per-iteration mean and sample standard deviation of every record field
/// over the trials that reached that iteration. Reductions run in trial-id
/// order.
struct TrialStats {
  std::size_t trials = 0;
  std::size_t diverged = 0;
  std::vector<std::size_t> count;  // trials contributing to iteration k
  std::array<std::vector<double>, kRecordFields.size()> mean;
  std::array<std::vector<double>, kRecordFields.size()> std_dev;

  std::size_t length() const { return count.size(); }
  double mean_of(RecordField f, std::size_t k) const {
    return mean[static_cast<std::size_t>(f)].at(k);
  }
  double std_of(RecordField f, std::size_t k) const {
    return std_dev[static_cast<std::size_t>(f)].at(k);
  }
  double stderr_of(RecordField f, std::size_t k) const {
    return count.at(k) > 0 ? std_of(f, k) / std::sqrt(static_cast<double>(count[k]))
                           : 0.0;
  }
};

inline TrialStats aggregate_trials(std::span<const Trajectory> runs) {
  std::vector<const Trajectory*> sorted;
  for (const Trajectory& t : runs) sorted.push_back(&t);
  std::sort(sorted.begin(), sorted.end(),
            [](const Trajectory* a, const Trajectory* b) { return a->trial < b->trial; });
  TrialStats st;
  st.trials = runs.size();
  std::size_t len = 0;
  for (const Trajectory* t : sorted) {
    len = std::max(len, t->records.size());
    if (t->diverged) ++st.diverged;
  }
  st.count.assign(len, 0);
  for (auto& m : st.mean) m.assign(len, 0.0);
  for (auto& s : st.std_dev) s.assign(len, 0.0);
  for (std::size_t k = 0; k < len; ++k) {
    for (std::size_t fi = 0; fi < kRecordFields.size(); ++fi) {
      // Welford update: identical inputs give exactly zero spread.
      double mean = 0.0, ss = 0.0;
      std::size_t c = 0;
      for (const Trajectory* t : sorted) {
        if (k >= t->records.size()) continue;
        const double x = field_value(t->records[k], kRecordFields[fi]);
        ++c;
        const double delta = x - mean;
        mean += delta / static_cast<double>(c);
        ss += delta * (x - mean);
      }
      st.mean[fi][k] = mean;
      st.std_dev[fi][k] = c > 1 ? std::sqrt(std::max(ss, 0.0) / static_cast<double>(c - 1)) : 0.0;
      st.count[k] = c;
    }
  }
  return st;
}

struct TrialsResult {
  std::vector<RunResult> runs;  // indexed by trial id
  TrialStats stats;

  std::vector<Trajectory> trajectories() const {
    std::vector<Trajectory> out;
    out.reserve(runs.size());
    for (const RunResult& r : runs) out.push_back(r.trajectory);
    return out;
  }
};

/// cfg.trials independent runs (trial ids 0..T-1). Trials may execute on up
/// to `threads` threads; the result does not depend on the thread count.
inline TrialsResult run_trials(const RunConfig& cfg, std::size_t threads = 1,
                               bool keep_iterates = false) {
  cfg.validate();
  TrialsResult out;
  out.runs.resize(cfg.trials);
  if (threads <= 1 || cfg.trials == 1) {
    for (std::size_t t = 0; t < cfg.trials; ++t) out.runs[t] = run(cfg, t, keep_iterates);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const std::size_t n = std::min(threads, cfg.trials);
    for (std::size_t w = 0; w < n; ++w) {
      pool.emplace_back([&] {
        for (std::size_t t = next++; t < cfg.trials; t = next++) {
          out.runs[t] = run(cfg, t, keep_iterates);
        }
      });
    }
    for (std::thread& th : pool) th.join();
  }
  const auto traj = out.trajectories();
  out.stats = aggregate_trials(traj);
  return out;
}

}  // namespace biasmom
