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

#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "biasmom/audit.hpp"
#include "biasmom/engine.hpp"
#include "biasmom/error.hpp"
#include "biasmom/theory.hpp"

namespace biasmom {

using Json = nlohmann::json;

inline constexpr const char* kCsvHeader =
    "k,trial,f,grad_norm_sq,eta_norm_sq,v_error_sq,step_norm_sq,phi";

// Shortest form that round-trips every double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// One row per iteration per trial, trials ascending, then k ascending.
inline void write_csv(std::ostream& out, std::span<const Trajectory> runs) {
  std::vector<const Trajectory*> sorted;
  for (const Trajectory& t : runs) sorted.push_back(&t);
  std::sort(sorted.begin(), sorted.end(),
            [](const Trajectory* a, const Trajectory* b) { return a->trial < b->trial; });
  out << kCsvHeader << '\n';
  std::string line;
  for (const Trajectory* t : sorted) {
    for (const IterationRecord& r : t->records) {
      line = std::to_string(r.k);
      line += ',';
      line += std::to_string(t->trial);
      for (RecordField f : kRecordFields) {
        line += ',';
        line += format_double(field_value(r, f));
      }
      out << line << '\n';
    }
  }
}

inline std::string csv_string(std::span<const Trajectory> runs) {
  std::ostringstream ss;
  write_csv(ss, runs);
  return ss.str();
}

/// Parses the CSV back into per-trial record lists (terminal values and
/// diverged flags live in the sidecar).
inline std::vector<Trajectory> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw DataError("csv: unexpected header");
  }
  std::map<std::size_t, Trajectory> by_trial;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 2 + kRecordFields.size()) {
      throw DataError("csv line " + std::to_string(lineno) + ": expected 8 columns");
    }
    try {
      IterationRecord r;
      r.k = static_cast<std::size_t>(std::stoull(cells[0]));
      const auto trial = static_cast<std::size_t>(std::stoull(cells[1]));
      r.f = std::stod(cells[2]);
      r.grad_norm_sq = std::stod(cells[3]);
      r.eta_norm_sq = std::stod(cells[4]);
      r.v_error_sq = std::stod(cells[5]);
      r.step_norm_sq = std::stod(cells[6]);
      r.phi = std::stod(cells[7]);
      Trajectory& t = by_trial[trial];
      t.trial = trial;
      if (r.k != t.records.size()) {
        throw DataError("csv line " + std::to_string(lineno) + ": iterations out of order");
      }
      t.records.push_back(r);
    } catch (const std::logic_error&) {
      throw DataError("csv line " + std::to_string(lineno) + ": malformed number");
    }
  }
  std::vector<Trajectory> out;
  for (auto& [id, t] : by_trial) out.push_back(std::move(t));
  return out;
}

// ---------------------------------------------------------------------------

namespace detail {

inline Json opt_json(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

inline std::optional<double> opt_double(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

// JSON has no infinity; encode it as a string.
inline Json num_json(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

inline double num_from(const Json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  }
  return j.get<double>();
}

}  // namespace detail

inline Json to_json(const TheoryReport& r) {
  using detail::num_json;
  using detail::opt_json;
  Json in = {{"gamma", r.inputs.gamma},
             {"beta", r.inputs.beta},
             {"L", num_json(r.inputs.L)},
             {"mu", r.inputs.mu},
             {"f_star", opt_json(r.inputs.f_star)},
             {"f0", num_json(r.inputs.f0)},
             {"v0_error_sq", r.inputs.v0_error_sq},
             {"variance_source", r.inputs.variance_source}};
  Json j = {{"inputs", in},
            {"alpha_ncvx", num_json(r.alpha_ncvx)},
            {"alpha_pl", num_json(r.alpha_pl)},
            {"gamma_max_ncvx", num_json(r.gamma_max_ncvx)},
            {"gamma_max_pl", opt_json(r.gamma_max_pl)},
            {"lemma3_ncvx_ok", r.lemma3_ncvx_ok},
            {"lemma3_pl_ok", r.lemma3_pl_ok ? Json(*r.lemma3_pl_ok) : Json(nullptr)},
            {"A_ncvx", num_json(r.a_ncvx)},
            {"A_pl", num_json(r.a_pl)},
            {"B1", num_json(r.b1)},
            {"B2", num_json(r.b2)},
            {"B3", num_json(r.b3)},
            {"B1_pl", num_json(r.b1_pl)},
            {"B2_pl", num_json(r.b2_pl)},
            {"B3_pl", num_json(r.b3_pl)},
            {"B_var", num_json(r.b_var)},
            {"C_var", num_json(r.c_var)},
            {"theta0", opt_json(r.theta0)},
            {"phi0", opt_json(r.phi0)},
            {"floor_ncvx", num_json(r.floor_ncvx)},
            {"floor_pl", num_json(r.floor_pl)},
            {"cond_B_ncvx_ok", r.cond_b_ncvx_ok},
            {"cond_B_pl_ok", r.cond_b_pl_ok},
            {"gamma_ok_ncvx", r.gamma_ok_ncvx},
            {"gamma_ok_pl", r.gamma_ok_pl},
            {"ncvx_guaranteed", r.ncvx_guaranteed()},
            {"pl_guaranteed", r.pl_guaranteed()},
            {"descent_applicable", r.descent_applicable()}};
  return j;
}

/// Rebuilds a report from its JSON form by re-evaluating the closed forms
/// from the stored inputs.
inline TheoryReport theory_from_json(const Json& j) {
  const Json& in = j.at("inputs");
  TheoryInputs ti;
  ti.gamma = in.at("gamma").get<double>();
  ti.beta = in.at("beta").get<double>();
  ti.L = detail::num_from(in.at("L"));
  ti.mu = in.at("mu").get<double>();
  ti.f_star = detail::opt_double(in, "f_star");
  ti.f0 = detail::num_from(in.at("f0"));
  ti.v0_error_sq = in.at("v0_error_sq").get<double>();
  ti.variance.b = detail::num_from(j.at("B_var"));
  ti.variance.c = detail::num_from(j.at("C_var"));
  ti.variance_source = in.value("variance_source", "");
  return make_theory_report(ti);
}

inline Json to_json(const AuditOutcome& o) {
  return {{"check", o.check_name},
          {"status", to_string(o.status)},
          {"worst_margin", detail::num_json(o.worst_margin)},
          {"trial", o.trial ? Json(*o.trial) : Json(nullptr)},
          {"k", o.k ? Json(*o.k) : Json(nullptr)},
          {"tolerance", o.tolerance},
          {"evaluated", o.evaluated},
          {"detail", o.detail}};
}

inline Json to_json(std::span<const AuditOutcome> outcomes) {
  Json arr = Json::array();
  for (const AuditOutcome& o : outcomes) arr.push_back(to_json(o));
  return arr;
}

inline Json to_json(const Terminal& t) {
  return {{"f", t.f}, {"grad_norm_sq", t.grad_norm_sq}, {"v_error_sq", t.v_error_sq}};
}

inline Terminal terminal_from_json(const Json& j) {
  Terminal t;
  t.f = j.at("f").get<double>();
  t.grad_norm_sq = j.at("grad_norm_sq").get<double>();
  t.v_error_sq = j.at("v_error_sq").get<double>();
  return t;
}

// ---------------------------------------------------------------------------

namespace detail {

inline std::string cell(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string cell(const std::optional<double>& v) { return v ? cell(*v) : "n/a"; }
inline std::string cell(bool v) { return v ? "yes" : "no"; }

}  // namespace detail

inline void print_theory_table(std::ostream& out, const TheoryReport& r) {
  using detail::cell;
  const std::vector<std::pair<std::string, std::string>> rows = {
      {"gamma", cell(r.inputs.gamma)},
      {"beta", cell(r.inputs.beta)},
      {"L", cell(r.inputs.L)},
      {"mu", cell(r.inputs.mu)},
      {"f*", cell(r.inputs.f_star)},
      {"alpha_ncvx", cell(r.alpha_ncvx)},
      {"alpha_pl", cell(r.alpha_pl)},
      {"gamma_max_ncvx", cell(r.gamma_max_ncvx)},
      {"gamma_max_pl", cell(r.gamma_max_pl)},
      {"A_ncvx", cell(r.a_ncvx)},
      {"A_pl", cell(r.a_pl)},
      {"B1", cell(r.b1)},
      {"B2", cell(r.b2)},
      {"B3", cell(r.b3)},
      {"B_var", cell(r.b_var)},
      {"C_var", cell(r.c_var)},
      {"variance source", r.inputs.variance_source},
      {"theta0", cell(r.theta0)},
      {"phi0", cell(r.phi0)},
      {"floor_ncvx", cell(r.floor_ncvx)},
      {"floor_pl", r.inputs.mu > 0.0 ? cell(r.floor_pl) : "n/a"},
      {"cond_B_ncvx_ok", cell(r.cond_b_ncvx_ok)},
      {"cond_B_pl_ok", cell(r.cond_b_pl_ok)},
      {"gamma_ok_ncvx", cell(r.gamma_ok_ncvx)},
      {"gamma_ok_pl", cell(r.gamma_ok_pl)},
      {"ncvx bound", r.ncvx_guaranteed() ? "guaranteed" : "informational"},
      {"pl bound", r.pl_guaranteed() ? "guaranteed" : "informational"},
  };
  std::size_t w = 0;
  for (const auto& [k, v] : rows) w = std::max(w, k.size());
  for (const auto& [k, v] : rows) {
    out << "  " << k << std::string(w - k.size() + 2, ' ') << v << '\n';
  }
}

inline void print_outcomes(std::ostream& out, std::span<const AuditOutcome> outcomes) {
  std::size_t w = 0;
  for (const AuditOutcome& o : outcomes) w = std::max(w, o.check_name.size());
  for (const AuditOutcome& o : outcomes) {
    out << "  " << o.check_name << std::string(w - o.check_name.size() + 2, ' ')
        << to_string(o.status);
    if (!o.skipped()) out << "  margin=" << detail::cell(o.worst_margin);
    if (!o.detail.empty()) out << "  (" << o.detail << ")";
    out << '\n';
  }
}

}  // namespace biasmom
