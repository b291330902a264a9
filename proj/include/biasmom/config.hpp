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

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "biasmom/composite.hpp"
#include "biasmom/engine.hpp"
#include "biasmom/error.hpp"
#include "biasmom/estimators.hpp"
#include "biasmom/problems.hpp"
#include "biasmom/theory.hpp"

namespace biasmom {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

enum class GammaRule { explicit_value, max_pl, max_ncvx };

/// A parsed run configuration together with the document it came from.
struct ExperimentConfig {
  Json source;
  RunConfig run;
  GammaRule gamma_rule = GammaRule::explicit_value;
  double gamma_scale = 1.0;
};

namespace detail {

inline std::string join_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

inline const Json& require_key(const Json& obj, const std::string& parent,
                               const std::string& key) {
  if (!obj.is_object()) throw ConfigError("'" + parent + "' must be an object");
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ConfigError("missing required key '" + join_path(parent, key) + "'");
  }
  return *it;
}

inline const Json* optional_key(const Json& obj, const std::string& key) {
  auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

inline double as_double(const Json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError("'" + path + "' must be a number");
  return v.get<double>();
}

inline std::uint64_t as_u64(const Json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  throw ConfigError("'" + path + "' must be a nonnegative integer");
}

inline std::size_t as_size(const Json& v, const std::string& path) {
  return static_cast<std::size_t>(as_u64(v, path));
}

inline std::string as_string(const Json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError("'" + path + "' must be a string");
  return v.get<std::string>();
}

inline Vector as_vector(const Json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ConfigError("'" + path + "' must be a nonempty array");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t c = 0; c < v.size(); ++c) {
    out[static_cast<Eigen::Index>(c)] = as_double(v[c], path + "[" + std::to_string(c) + "]");
  }
  return out;
}

inline Matrix as_matrix(const Json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ConfigError("'" + path + "' must be a nonempty array of rows");
  const std::size_t rows = v.size();
  const Vector first = as_vector(v[0], path + "[0]");
  Matrix m(static_cast<Eigen::Index>(rows), first.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const Vector row = as_vector(v[r], path + "[" + std::to_string(r) + "]");
    if (row.size() != first.size()) throw ConfigError("'" + path + "' rows differ in length");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

inline std::size_t size_or(const Json& obj, const std::string& parent,
                           const std::string& key, std::size_t fallback) {
  const Json* v = optional_key(obj, key);
  return v ? as_size(*v, join_path(parent, key)) : fallback;
}

inline double double_or(const Json& obj, const std::string& parent,
                        const std::string& key, double fallback) {
  const Json* v = optional_key(obj, key);
  return v ? as_double(*v, join_path(parent, key)) : fallback;
}

inline void check_dimension(const Json& pj, std::size_t actual) {
  if (const Json* d = optional_key(pj, "dimension")) {
    if (as_size(*d, "problem.dimension") != actual) {
      throw ConfigError("'problem.dimension' disagrees with the matrix size");
    }
  }
}

inline ProblemPtr parse_quadratic(const Json& pj, std::uint64_t seed) {
  const std::size_t n = size_or(pj, "problem", "n_workers", 1);
  const Json& mj = require_key(pj, "problem", "matrix");
  const std::string type = as_string(require_key(mj, "problem.matrix", "type"), "problem.matrix.type");
  const std::uint64_t mseed = optional_key(mj, "seed") ? as_u64(mj["seed"], "problem.matrix.seed") : seed;
  Matrix a;
  if (type == "spectrum") {
    const Vector e = as_vector(require_key(mj, "problem.matrix", "eigenvalues"),
                               "problem.matrix.eigenvalues");
    a = matrix_from_spectrum(std::vector<double>(e.data(), e.data() + e.size()), mseed);
  } else if (type == "diagonal") {
    a = as_vector(require_key(mj, "problem.matrix", "entries"), "problem.matrix.entries")
            .asDiagonal();
  } else if (type == "entries") {
    a = as_matrix(require_key(mj, "problem.matrix", "entries"), "problem.matrix.entries");
  } else if (type == "random") {
    const std::size_t d = as_size(require_key(pj, "problem", "dimension"), "problem.dimension");
    a = random_gaussian_matrix(size_or(mj, "problem.matrix", "rows", d), d, mseed);
  } else {
    throw ConfigError("unknown 'problem.matrix.type' \"" + type + "\"");
  }
  check_dimension(pj, static_cast<std::size_t>(a.cols()));
  bool least_squares = false;
  if (const Json* ls = optional_key(pj, "least_squares")) {
    if (!ls->is_boolean()) throw ConfigError("'problem.least_squares' must be a boolean");
    least_squares = ls->get<bool>();
  }
  return make_quadratic(a, n, least_squares);
}

inline ClassificationData parse_classification(const Json& pj, std::uint64_t seed) {
  const std::size_t n = size_or(pj, "problem", "n_workers", 1);
  const std::size_t d = as_size(require_key(pj, "problem", "dimension"), "problem.dimension");
  const std::size_t m = as_size(require_key(pj, "problem", "m"), "problem.m");
  const double scale = double_or(pj, "problem", "feature_scale", 1.0);
  return make_classification_data(n, m, d, seed, scale);
}

inline ProblemPtr parse_toy(const Json& pj) {
  const Json* wj = optional_key(pj, "workers");
  if (wj == nullptr) return make_toy_composite(size_or(pj, "problem", "n_workers", 1));
  if (!wj->is_array() || wj->empty()) throw ConfigError("'problem.workers' must be a nonempty array");
  std::vector<ToyWorker> workers;
  for (std::size_t i = 0; i < wj->size(); ++i) {
    const std::string wp = "problem.workers[" + std::to_string(i) + "]";
    const Json& w = (*wj)[i];
    ToyWorker tw;
    const Json& inner = require_key(w, wp, "inner");
    if (!inner.is_array()) throw ConfigError("'" + wp + ".inner' must be an array");
    for (std::size_t j = 0; j < inner.size(); ++j) {
      const std::string ip = wp + ".inner[" + std::to_string(j) + "]";
      ToyInner ti;
      ti.map = as_matrix(require_key(inner[j], ip, "map"), ip + ".map");
      ti.offset = as_vector(require_key(inner[j], ip, "offset"), ip + ".offset");
      tw.inner.push_back(std::move(ti));
    }
    const Json& targets = require_key(w, wp, "targets");
    if (!targets.is_array()) throw ConfigError("'" + wp + ".targets' must be an array");
    for (std::size_t j = 0; j < targets.size(); ++j) {
      tw.targets.push_back(as_vector(targets[j], wp + ".targets[" + std::to_string(j) + "]"));
    }
    workers.push_back(std::move(tw));
  }
  auto p = std::make_shared<const ToyCompositeProblem>(std::move(workers));
  check_dimension(pj, p->dimension());
  return p;
}

}  // namespace detail

/// Builds a problem from its JSON description. `seed` is the fallback when
/// the problem object has no seed of its own.
inline ProblemPtr parse_problem(const Json& pj, std::uint64_t seed) {
  const std::string kind = detail::as_string(detail::require_key(pj, "problem", "kind"), "problem.kind");
  if (const Json* s = detail::optional_key(pj, "seed")) seed = detail::as_u64(*s, "problem.seed");
  if (kind == "quadratic") return detail::parse_quadratic(pj, seed);
  if (kind == "logistic_l2") {
    const double lambda = detail::as_double(detail::require_key(pj, "problem", "lambda"), "problem.lambda");
    return make_logistic_l2(detail::parse_classification(pj, seed), lambda);
  }
  if (kind == "nonconvex_reg_classification") {
    const double lnc = detail::as_double(detail::require_key(pj, "problem", "lambda_nc"), "problem.lambda_nc");
    return make_nonconvex_reg(detail::parse_classification(pj, seed), lnc);
  }
  if (kind == "maml") {
    const double gi = detail::as_double(detail::require_key(pj, "problem", "gamma_inner"),
                                        "problem.gamma_inner");
    return make_maml(detail::parse_classification(pj, seed), gi);
  }
  if (kind == "composite_finite_sum") return detail::parse_toy(pj);
  throw ConfigError("unknown 'problem.kind' \"" + kind + "\"");
}

inline EstimatorSpec parse_estimator(const Json& ej) {
  const std::string kind = detail::as_string(detail::require_key(ej, "estimator", "kind"), "estimator.kind");
  if (kind == "identity") return EstimatorSpec::identity();
  if (kind == "top_k") return EstimatorSpec::top_k(detail::as_size(detail::require_key(ej, "estimator", "k"), "estimator.k"));
  if (kind == "scaled_sign") return EstimatorSpec::scaled_sign();
  if (kind == "clip") return EstimatorSpec::clip(detail::as_double(detail::require_key(ej, "estimator", "tau"), "estimator.tau"));
  if (kind == "composite") {
    return EstimatorSpec::composite(
        detail::as_size(detail::require_key(ej, "estimator", "S_g"), "estimator.S_g"),
        detail::as_size(detail::require_key(ej, "estimator", "S_F"), "estimator.S_F"));
  }
  throw ConfigError("unknown 'estimator.kind' \"" + kind + "\"");
}

inline NoiseSpec parse_noise(const Json* nj) {
  NoiseSpec n;
  if (nj == nullptr) return n;
  if (!nj->is_object()) throw ConfigError("'noise' must be an object");
  n.sigma2 = detail::double_or(*nj, "noise", "sigma2", 0.0);
  if (const Json* off = detail::optional_key(*nj, "delta_offset")) {
    if (off->is_array()) n.delta_vector = detail::as_vector(*off, "noise.delta_offset");
    else n.delta_offset = detail::as_double(*off, "noise.delta_offset");
  }
  n.validate();
  return n;
}

// Default seed: the BIASMOM_SEED environment variable, else 0.
inline std::uint64_t default_seed() {
  if (const char* env = std::getenv("BIASMOM_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw ConfigError("BIASMOM_SEED must be an unsigned integer");
    return static_cast<std::uint64_t>(v);
  }
  return 0;
}

/// Parses a run configuration document. Key errors name the full key path.
/// The recorded phi column uses the PL weight when mu > 0 and the general
/// weight otherwise.
inline ExperimentConfig parse_config(const Json& doc) {
  using namespace detail;
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  const Json& sv = require_key(doc, "", "schema_version");
  if (!sv.is_number_integer() || sv.get<int>() != kSchemaVersion) {
    throw ConfigError("unsupported 'schema_version' (expected " + std::to_string(kSchemaVersion) + ")");
  }
  ExperimentConfig ec;
  ec.source = doc;
  RunConfig& rc = ec.run;
  rc.seed = optional_key(doc, "seed") ? as_u64(doc["seed"], "seed") : default_seed();
  rc.problem = parse_problem(require_key(doc, "", "problem"), rc.seed);
  rc.estimator = parse_estimator(require_key(doc, "", "estimator"));
  rc.noise = parse_noise(optional_key(doc, "noise"));
  rc.beta = as_double(require_key(doc, "", "beta"), "beta");
  rc.iterations = as_size(require_key(doc, "", "iterations"), "iterations");
  rc.trials = size_or(doc, "", "trials", 1);
  if (const Json* vi = optional_key(doc, "v_init")) {
    const std::string s = as_string(*vi, "v_init");
    if (s == "zero") rc.v_init = VInit::zero;
    else if (s == "grad_at_x0") rc.v_init = VInit::grad_at_x0;
    else throw ConfigError("unknown 'v_init' \"" + s + "\"");
  }
  if (const Json* x0 = optional_key(doc, "x0")) rc.x0 = as_vector(*x0, "x0");

  const Problem& p = *rc.problem;
  if (!(rc.beta > 0.0 && rc.beta <= 1.0)) throw ConfigError("'beta' must lie in (0, 1]");
  const Json& gj = require_key(doc, "", "gamma");
  ec.gamma_scale = double_or(doc, "", "gamma_scale", 1.0);
  if (gj.is_string()) {
    const std::string rule = gj.get<std::string>();
    if (!std::isfinite(p.smoothness())) {
      throw ConfigError("'gamma' rule \"" + rule + "\" needs a finite smoothness constant");
    }
    const StepsizeBounds sb = stepsize_bounds(rc.beta, p.smoothness(), p.pl_constant());
    if (rule == "max_ncvx") {
      ec.gamma_rule = GammaRule::max_ncvx;
      rc.gamma = sb.gamma_max_ncvx;
    } else if (rule == "max_pl") {
      if (!sb.gamma_max_pl) throw ConfigError("'gamma' rule \"max_pl\" needs mu > 0");
      ec.gamma_rule = GammaRule::max_pl;
      rc.gamma = *sb.gamma_max_pl;
    } else {
      throw ConfigError("unknown 'gamma' rule \"" + rule + "\"");
    }
    rc.gamma *= ec.gamma_scale;
  } else {
    rc.gamma = as_double(gj, "gamma");
  }
  rc.lyapunov_weight = p.pl_constant() > 0.0 ? lyapunov_weight_pl(rc.gamma, rc.beta)
                                             : lyapunov_weight_ncvx(rc.gamma, rc.beta);
  rc.validate();
  return ec;
}

/// Parses JSON text; syntax errors report line and column.
inline Json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t b = 0; b + 1 < e.byte && b < text.size(); ++b) {
      if (text[b] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) +
                      ": malformed JSON");
  }
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ExperimentConfig load_config(const std::string& path) {
  const Json doc = parse_json_text(read_text_file(path), path);
  try {
    return parse_config(doc);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const DataError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace biasmom
