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

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "biasmom/audit.hpp"
#include "biasmom/composite.hpp"
#include "biasmom/config.hpp"
#include "biasmom/engine.hpp"
#include "biasmom/error.hpp"
#include "biasmom/estimators.hpp"
#include "biasmom/io.hpp"
#include "biasmom/theory.hpp"

#ifndef BIASMOM_VERSION
#define BIASMOM_VERSION "0.1.0"
#endif

namespace biasmom {

inline constexpr double kCalibrationSafety = 1.1;

/// Quantities the affine-variance constants need but the problem does not
/// certify, measured along a pilot run (trial 0 of the configuration).
struct Calibration {
  double delta2_het = 0.0;     // max_k max_i ||grad f_i(x^k) - grad f(x^k)||^2, x safety
  double delta_subopt = 0.0;   // max_k (f(x^k) - f*), x safety
  std::optional<CompositeSigmas> sigmas;
  std::vector<Vector> sample_points;  // evenly spaced pilot iterates
  bool pilot_diverged = false;
};

inline Calibration calibrate(const RunConfig& cfg, std::size_t n_points = 20,
                             std::size_t sigma_draws = 1000) {
  const Problem& p = *cfg.problem;
  const RunResult pilot = run(cfg, 0, true);
  Calibration c;
  c.pilot_diverged = pilot.trajectory.diverged;
  const auto& xs = pilot.iterates;
  const double fs = p.f_star().value_or(0.0);
  for (const Vector& x : xs) {
    if (!all_finite(x)) continue;
    const Vector g = p.full_gradient(x);
    for (std::size_t i = 0; i < p.n_workers(); ++i) {
      c.delta2_het = std::max(c.delta2_het, (p.worker_gradient(i, x) - g).squaredNorm());
    }
    c.delta_subopt = std::max(c.delta_subopt, p.value(x) - fs);
  }
  c.delta2_het *= kCalibrationSafety;
  c.delta_subopt *= kCalibrationSafety;
  const std::size_t count = std::min(n_points, xs.size());
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t idx = count == 1 ? 0 : j * (xs.size() - 1) / (count - 1);
    c.sample_points.push_back(xs[idx]);
  }
  if (const auto* cp = dynamic_cast<const CompositeProblem*>(&p)) {
    if (cfg.estimator.kind == EstimatorKind::composite && !c.sample_points.empty()) {
      c.sigmas = measure_composite_sigmas(*cp, c.sample_points, sigma_draws,
                                          Rng::mix(cfg.seed ^ 0x7369676d61ULL), kCalibrationSafety);
    }
  }
  return c;
}

/// (B, C) for the configured estimator and noise.
///  identity:    B = 0, C = d sigma2 / n + ||offset||^2 (exact second moment)
///  compressors: the compression constants with alpha = k/d (Top-K) or 1/d
///               (scaled sign), sigma2 = d sigma2 + ||offset||^2 per worker
///  clip:        the clipping constant with the per-worker L and the measured
///               suboptimality
///  composite:   the compositional constant; with synthetic noise on top,
///               C = 2 C_comp + 2 C_noise
inline AffineConstants variance_constants(const RunConfig& cfg, const Calibration& cal,
                                          std::string* source = nullptr) {
  const Problem& p = *cfg.problem;
  const std::size_t d = p.dimension();
  const double n = static_cast<double>(p.n_workers());
  const Vector off = cfg.noise.offset(d);
  const double noise_c = static_cast<double>(d) * cfg.noise.sigma2 / n + off.squaredNorm();
  const double worker_sigma2 = cfg.noise.error_second_moment(d);
  AffineConstants out;
  std::string src;
  switch (cfg.estimator.kind) {
    case EstimatorKind::identity:
      out = {0.0, noise_c};
      src = "additive noise";
      break;
    case EstimatorKind::top_k:
    case EstimatorKind::scaled_sign:
      out = affine_constants_compression(*contraction_factor(cfg.estimator, d), worker_sigma2,
                                         cal.delta2_het);
      src = "compression";
      break;
    case EstimatorKind::clip:
      out = affine_constants_clip(worker_sigma2, p.worker_smoothness(), cal.delta_subopt,
                                  cfg.estimator.tau);
      src = "clipping";
      break;
    case EstimatorKind::composite: {
      const auto* cp = dynamic_cast<const CompositeProblem*>(&p);
      if (!cp->constants() || !cal.sigmas) {
        out = {0.0, std::numeric_limits<double>::infinity()};
        src = "composite (no certified constants)";
        break;
      }
      const CompositeConstants& k = *cp->constants();
      const CompositeAffine ca = affine_constants_composite(
          k.ell_g, k.ell_f, k.lip_grad_f, k.lip_grad_g, cal.sigmas->sigma_f2,
          cal.sigmas->sigma_dg2, cal.sigmas->sigma_g2, cfg.estimator.s_f, cfg.estimator.s_g);
      out = ca.affine;
      src = "composite";
      if (!cfg.noise.exact()) {
        out.c = 2.0 * out.c + 2.0 * noise_c;
        src = "composite + additive noise";
      }
      break;
    }
  }
  if (source) *source = src;
  return out;
}

inline TheoryReport theory_for(const RunConfig& cfg, const Calibration& cal) {
  const Problem& p = *cfg.problem;
  const MomentumState s0 = init_state(cfg, 0);
  TheoryInputs in;
  in.gamma = cfg.gamma;
  in.beta = cfg.beta;
  in.L = p.smoothness();
  in.mu = p.pl_constant();
  in.f_star = p.f_star();
  in.f0 = p.value(s0.x);
  in.v0_error_sq = (p.full_gradient(s0.x) - s0.v_prev).squaredNorm();
  in.variance = variance_constants(cfg, cal, &in.variance_source);
  return make_theory_report(in);
}

inline Json to_json(const Calibration& c) {
  Json j = {{"delta2_het", c.delta2_het},
            {"delta_subopt", c.delta_subopt},
            {"safety_factor", kCalibrationSafety},
            {"sample_points", c.sample_points.size()},
            {"pilot_diverged", c.pilot_diverged}};
  if (c.sigmas) {
    j["sigma_g2"] = c.sigmas->sigma_g2;
    j["sigma_dg2"] = c.sigmas->sigma_dg2;
    j["sigma_f2"] = c.sigmas->sigma_f2;
  }
  return j;
}

inline Json vector_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index c = 0; c < v.size(); ++c) a.push_back(v[c]);
  return a;
}

// ---------------------------------------------------------------------------
// Single runs.

struct RunArtifacts {
  TrialsResult trials;
  Calibration calibration;
  TheoryReport theory;
};

inline RunArtifacts execute(const ExperimentConfig& ec, std::size_t threads = 1) {
  RunArtifacts a;
  a.calibration = calibrate(ec.run);
  a.theory = theory_for(ec.run, a.calibration);
  a.trials = run_trials(ec.run, threads);
  return a;
}

inline Json sidecar_json(const ExperimentConfig& ec, const RunArtifacts& a) {
  Json trials = Json::array();
  for (const RunResult& r : a.trials.runs) {
    const Trajectory& t = r.trajectory;
    trials.push_back({{"trial", t.trial},
                      {"diverged", t.diverged},
                      {"records", t.records.size()},
                      {"terminal", t.terminal ? to_json(*t.terminal) : Json(nullptr)}});
  }
  const MomentumState s0 = init_state(ec.run, 0);
  return {{"schema_version", kSchemaVersion},
          {"version", BIASMOM_VERSION},
          {"seed", ec.run.seed},
          {"config", ec.source},
          {"resolved",
           {{"gamma", ec.run.gamma},
            {"beta", ec.run.beta},
            {"lyapunov_weight", ec.run.lyapunov_weight},
            {"problem_kind", to_string(ec.run.problem->kind())},
            {"estimator", to_string(ec.run.estimator.kind)},
            {"x0", vector_json(s0.x)}}},
          {"theory", to_json(a.theory)},
          {"calibration", to_json(a.calibration)},
          {"trials", trials}};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw ConfigError("write failed for '" + path.string() + "'");
}

/// run.csv and run.json under `dir`.
inline void write_run_outputs(const std::filesystem::path& dir, const ExperimentConfig& ec,
                              const RunArtifacts& a) {
  std::filesystem::create_directories(dir);
  const auto traj = a.trials.trajectories();
  write_text(dir / "run.csv", csv_string(traj));
  write_text(dir / "run.json", sidecar_json(ec, a).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Verification.

struct VerifyReport {
  TheoryReport theory;
  Calibration calibration;
  std::vector<AuditOutcome> outcomes;

  bool ok() const {
    return std::none_of(outcomes.begin(), outcomes.end(),
                        [](const AuditOutcome& o) { return o.failed(); });
  }
};

// Flags from the direct formulas against the ones re-derived from B1/B2/B3.
inline AuditOutcome audit_theory_consistency(const TheoryReport& r) {
  AuditOutcome o = detail::start("theory_consistency", 0.0);
  const DerivedConditions d = conditions_from_lemma1(r);
  detail::observe(o, d.cond_b_ncvx_ok == r.cond_b_ncvx_ok ? 0.0 : -1.0, std::nullopt, std::nullopt);
  detail::observe(o, d.cond_b_pl_ok == r.cond_b_pl_ok ? 0.0 : -1.0, std::nullopt, std::nullopt);
  detail::observe(o, d.gamma_ok_ncvx == r.gamma_ok_ncvx ? 0.0 : -1.0, std::nullopt, std::nullopt);
  detail::observe(o, d.gamma_ok_pl == r.gamma_ok_pl ? 0.0 : -1.0, std::nullopt, std::nullopt);
  return detail::finish(o);
}

// The recorded phi column against f - f* + A v_error_sq.
inline AuditOutcome audit_record_consistency(std::span<const Trajectory> runs,
                                             std::optional<double> f_star, double weight) {
  AuditOutcome o = detail::start("record_consistency", kIdentityTolerance);
  const double fs = f_star.value_or(0.0);
  for (const Trajectory& t : runs) {
    for (const IterationRecord& q : t.records) {
      const double expect = q.f - fs + weight * q.v_error_sq;
      const double scale = std::abs(q.f - fs) + weight * q.v_error_sq + std::abs(q.phi);
      const bool finite = std::isfinite(q.f) && std::isfinite(q.grad_norm_sq) &&
                          std::isfinite(q.eta_norm_sq) && q.grad_norm_sq >= 0.0 &&
                          q.eta_norm_sq >= 0.0 && q.v_error_sq >= 0.0 && q.step_norm_sq >= 0.0;
      const double m = finite ? -std::abs(q.phi - expect) / detail::safe_scale(scale)
                              : -std::numeric_limits<double>::infinity();
      detail::observe(o, m, t.trial, q.k);
    }
  }
  return detail::finish(o);
}

/// The trajectory-only checks: everything `report` can replay from disk.
inline std::vector<AuditOutcome> trajectory_audits(std::span<const Trajectory> runs,
                                                   const TheoryReport& r, double weight) {
  std::vector<AuditOutcome> out;
  out.push_back(audit_record_consistency(runs, r.inputs.f_star, weight));
  out.push_back(audit_descent(runs, r));
  out.push_back(audit_theorem_ncvx(aggregate_trials(runs), r));
  out.push_back(audit_theorem_pl(runs, r));
  return out;
}

/// Full battery: problem certificates, engine oracles, theory consistency,
/// trajectory checks and the affine-variance bound at pilot iterates.
inline VerifyReport verify(const ExperimentConfig& ec, std::size_t threads = 1,
                           RunArtifacts* keep = nullptr) {
  const RunConfig& cfg = ec.run;
  const Problem& p = *cfg.problem;
  RunArtifacts a = execute(ec, threads);
  VerifyReport rep;
  rep.theory = a.theory;
  rep.calibration = a.calibration;
  auto& out = rep.outcomes;

  const bool maml = p.kind() == ProblemKind::maml;
  out.push_back(audit_gradients(p, 100, maml ? 1e-4 : kFiniteDifferenceTolerance, cfg.seed));
  out.push_back(audit_smoothness(p, 10000, cfg.seed));
  out.push_back(audit_pl(p, 10000, cfg.seed));

  RunConfig short_cfg = cfg;
  short_cfg.iterations = std::min<std::size_t>(cfg.iterations, 100);
  out.push_back(audit_engine_identities(short_cfg));
  out.push_back(audit_reference_sgd(short_cfg));

  {
    AuditOutcome o = detail::start("determinism", 0.0);
    const RunResult again = run(cfg, 0);
    const std::vector<Trajectory> first{a.trials.runs.at(0).trajectory};
    const std::vector<Trajectory> second{again.trajectory};
    detail::observe(o, csv_string(first) == csv_string(second) ? 0.0 : -1.0, 0, std::nullopt);
    o.detail = "trial 0 re-run, CSV bytes compared";
    out.push_back(detail::finish(o));
  }
  out.push_back(audit_theory_consistency(a.theory));

  const auto traj = a.trials.trajectories();
  for (AuditOutcome& o : trajectory_audits(traj, a.theory, cfg.lyapunov_weight)) {
    out.push_back(std::move(o));
  }
  if (std::isfinite(a.theory.c_var) && !a.calibration.sample_points.empty()) {
    out.push_back(audit_affine_variance(p, a.calibration.sample_points, cfg.estimator, cfg.noise,
                                        {a.theory.b_var, a.theory.c_var}, 1000, cfg.seed,
                                        cfg.estimator.kind == EstimatorKind::identity
                                            ? AffineCheck::exact
                                            : AffineCheck::upper));
  } else {
    out.push_back(detail::skip("affine_variance", "no finite variance constant"));
  }
  if (keep) *keep = std::move(a);
  return rep;
}

inline Json to_json(const VerifyReport& v) {
  return {{"theory", to_json(v.theory)},
          {"calibration", to_json(v.calibration)},
          {"outcomes", to_json(std::span<const AuditOutcome>(v.outcomes))},
          {"ok", v.ok()}};
}

/// Loads run.csv and run.json from `dir` and replays the trajectory checks.
inline std::vector<AuditOutcome> replay(const std::filesystem::path& dir,
                                        TheoryReport* theory_out = nullptr) {
  std::ifstream csv(dir / "run.csv", std::ios::binary);
  if (!csv) throw DataError("cannot read '" + (dir / "run.csv").string() + "'");
  std::vector<Trajectory> runs = read_csv(csv);
  Json side;
  try {
    side = Json::parse(read_text_file((dir / "run.json").string()));
  } catch (const Json::exception& e) {
    throw DataError("run.json: " + std::string(e.what()));
  }
  const TheoryReport theory = theory_from_json(side.at("theory"));
  const double weight = side.at("resolved").at("lyapunov_weight").get<double>();
  std::vector<Trajectory> merged;
  for (const Json& tj : side.at("trials")) {
    Trajectory t;
    t.trial = tj.at("trial").get<std::size_t>();
    t.diverged = tj.at("diverged").get<bool>();
    if (!tj.at("terminal").is_null()) t.terminal = terminal_from_json(tj.at("terminal"));
    const std::size_t expect = tj.at("records").get<std::size_t>();
    auto it = std::find_if(runs.begin(), runs.end(),
                           [&](const Trajectory& r) { return r.trial == t.trial; });
    if (it != runs.end()) t.records = std::move(it->records);
    if (t.records.size() != expect) {
      throw DataError("run.csv: trial " + std::to_string(t.trial) + " has " +
                      std::to_string(t.records.size()) + " rows, sidecar says " +
                      std::to_string(expect));
    }
    merged.push_back(std::move(t));
  }
  if (theory_out) *theory_out = theory;
  return trajectory_audits(merged, theory, weight);
}

// ---------------------------------------------------------------------------
// Sweeps.

inline const std::set<std::string>& sweep_axes() {
  static const std::set<std::string> axes = {
      "estimator.k",      "estimator.tau",      "estimator.S_g", "estimator.S_F",
      "noise.sigma2",     "noise.delta_offset", "gamma",         "gamma_scale",
      "beta",             "iterations",         "problem.gamma_inner",
      "problem.lambda",   "problem.lambda_nc"};
  return axes;
}

struct SweepSpec {
  Json base;
  std::string axis;
  std::vector<Json> values;
  std::optional<std::size_t> trials;
  std::optional<double> threshold;  // loss level for iters_to_threshold
};

inline SweepSpec parse_sweep(const Json& doc) {
  using namespace detail;
  if (!doc.is_object()) throw ConfigError("sweep spec must be a JSON object");
  const Json& sv = require_key(doc, "", "schema_version");
  if (!sv.is_number_integer() || sv.get<int>() != kSchemaVersion) {
    throw ConfigError("unsupported 'schema_version'");
  }
  SweepSpec s;
  s.base = require_key(doc, "", "base");
  if (!s.base.is_object()) throw ConfigError("'base' must be an object");
  if (!s.base.contains("schema_version")) s.base["schema_version"] = kSchemaVersion;
  s.axis = as_string(require_key(doc, "", "axis"), "axis");
  if (!sweep_axes().count(s.axis)) throw ConfigError("'axis' \"" + s.axis + "\" is not a sweepable field");
  const Json& vals = require_key(doc, "", "values");
  if (!vals.is_array() || vals.empty()) throw ConfigError("'values' must be a nonempty array");
  for (const Json& v : vals) {
    if (!v.is_number()) throw ConfigError("'values' entries must be numbers");
    s.values.push_back(v);
  }
  if (const Json* t = optional_key(doc, "trials")) s.trials = as_size(*t, "trials");
  if (const Json* t = optional_key(doc, "threshold")) s.threshold = as_double(*t, "threshold");
  return s;
}

inline Json with_axis_value(Json base, const std::string& axis, const Json& value) {
  Json* node = &base;
  std::stringstream ss(axis);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    Json& child = (*node)[parts[i]];
    if (child.is_null()) child = Json::object();
    node = &child;
  }
  (*node)[parts.back()] = value;
  return base;
}

inline ExperimentConfig sweep_point_config(const SweepSpec& s, const Json& value) {
  Json doc = with_axis_value(s.base, s.axis, value);
  if (s.trials) doc["trials"] = *s.trials;
  try {
    return parse_config(doc);
  } catch (const ConfigError& e) {
    throw ConfigError(s.axis + "=" + value.dump() + ": " + e.what());
  }
}

/// Plateau = mean f over the last 10% of iterations (at least one) of each
/// non-diverged trial; iters_to_threshold = first k whose trial-mean f is
/// at or below the threshold.
inline SweepPoint summarize(double axis_value, const TrialsResult& tr,
                            std::optional<double> threshold) {
  SweepPoint pt;
  pt.axis_value = axis_value;
  std::vector<const Trajectory*> ok;
  for (const RunResult& r : tr.runs) {
    if (r.trajectory.diverged) ++pt.diverged;
    else ok.push_back(&r.trajectory);
  }
  pt.trials = ok.size();
  if (ok.empty()) {
    pt.plateau_mean = std::numeric_limits<double>::quiet_NaN();
    pt.plateau_std = std::numeric_limits<double>::quiet_NaN();
    return pt;
  }
  std::vector<double> plateaus;
  for (const Trajectory* t : ok) {
    const std::size_t K = t->records.size();
    const std::size_t tail = std::max<std::size_t>(1, (K + 9) / 10);
    double s = 0.0;
    for (std::size_t k = K - std::min(tail, K); k < K; ++k) s += t->records[k].f;
    plateaus.push_back(K > 0 ? s / static_cast<double>(std::min(tail, K)) : t->terminal->f);
  }
  double mean = 0.0;
  for (double v : plateaus) mean += v;
  mean /= static_cast<double>(plateaus.size());
  double ss = 0.0;
  for (double v : plateaus) ss += (v - mean) * (v - mean);
  pt.plateau_mean = mean;
  pt.plateau_std = plateaus.size() > 1 ? std::sqrt(ss / static_cast<double>(plateaus.size() - 1)) : 0.0;
  if (threshold) {
    const std::size_t K = ok.front()->records.size();
    for (std::size_t k = 0; k < K; ++k) {
      double s = 0.0;
      for (const Trajectory* t : ok) s += t->records[k].f;
      if (s / static_cast<double>(ok.size()) <= *threshold) {
        pt.iters_to_threshold = static_cast<long>(k);
        break;
      }
    }
  }
  return pt;
}

struct SweepResult {
  std::string axis;
  std::vector<Json> values;
  std::vector<SweepPoint> points;
};

inline std::string sweep_summary_csv(const SweepResult& r) {
  std::string s = "axis_value,final_plateau_mean,final_plateau_std,iters_to_threshold,diverged_count\n";
  for (std::size_t j = 0; j < r.points.size(); ++j) {
    const SweepPoint& p = r.points[j];
    s += r.values[j].dump() + "," + format_double(p.plateau_mean) + "," +
         format_double(p.plateau_std) + "," + std::to_string(p.iters_to_threshold) + "," +
         std::to_string(p.diverged) + "\n";
  }
  return s;
}

/// Runs every sweep point in value order. With `out_dir`, each point gets
/// `<axis>=<value>/run.{csv,json}` and the directory gets summary.csv.
inline SweepResult run_sweep(const SweepSpec& s, std::size_t threads = 1,
                             const std::optional<std::filesystem::path>& out_dir = std::nullopt) {
  SweepResult res;
  res.axis = s.axis;
  res.values = s.values;
  for (const Json& v : s.values) {
    const ExperimentConfig ec = sweep_point_config(s, v);
    RunArtifacts a;
    if (out_dir) {
      a = execute(ec, threads);
      write_run_outputs(*out_dir / (s.axis + "=" + v.dump()), ec, a);
    } else {
      a.trials = run_trials(ec.run, threads);
    }
    res.points.push_back(summarize(v.get<double>(), a.trials, s.threshold));
  }
  if (out_dir) write_text(*out_dir / "summary.csv", sweep_summary_csv(res));
  return res;
}

inline SweepSpec load_sweep(const std::string& path) {
  const Json doc = parse_json_text(read_text_file(path), path);
  try {
    return parse_sweep(doc);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace biasmom
