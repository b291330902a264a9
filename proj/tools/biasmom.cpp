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

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "biasmom.hpp"

namespace {

using biasmom::AuditOutcome;

int cmd_run(const std::string& config, const std::string& out, std::size_t threads) {
  const biasmom::ExperimentConfig ec = biasmom::load_config(config);
  const biasmom::RunArtifacts a = biasmom::execute(ec, threads);
  biasmom::write_run_outputs(out, ec, a);
  std::size_t diverged = a.trials.stats.diverged;
  std::cout << "wrote " << (std::filesystem::path(out) / "run.csv").string() << " ("
            << ec.run.trials << " trial(s), " << ec.run.iterations << " iteration(s), "
            << diverged << " diverged)\n";
  return 0;
}

int cmd_sweep(const std::string& spec, const std::string& out, std::size_t threads) {
  const biasmom::SweepSpec s = biasmom::load_sweep(spec);
  const biasmom::SweepResult r = biasmom::run_sweep(s, threads, std::filesystem::path(out));
  std::cout << biasmom::sweep_summary_csv(r);
  return 0;
}

int cmd_verify(const std::string& config, const std::optional<std::string>& out,
               std::size_t threads) {
  const biasmom::ExperimentConfig ec = biasmom::load_config(config);
  biasmom::RunArtifacts a;
  const biasmom::VerifyReport rep = biasmom::verify(ec, threads, &a);
  std::cout << "theory\n";
  biasmom::print_theory_table(std::cout, rep.theory);
  std::cout << "checks\n";
  biasmom::print_outcomes(std::cout, rep.outcomes);
  if (out) {
    biasmom::write_run_outputs(*out, ec, a);
    biasmom::write_text(std::filesystem::path(*out) / "audit.json",
                        biasmom::to_json(rep).dump(2) + "\n");
  }
  std::cout << (rep.ok() ? "verify: ok\n" : "verify: FAILED\n");
  return rep.ok() ? 0 : 1;
}

int cmd_report(const std::string& dir) {
  biasmom::TheoryReport theory;
  const std::vector<AuditOutcome> outcomes = biasmom::replay(dir, &theory);
  std::cout << "theory\n";
  biasmom::print_theory_table(std::cout, theory);
  std::cout << "checks (replayed)\n";
  biasmom::print_outcomes(std::cout, outcomes);
  const bool ok = std::none_of(outcomes.begin(), outcomes.end(),
                               [](const AuditOutcome& o) { return o.failed(); });
  std::cout << (ok ? "report: ok\n" : "report: FAILED\n");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel momentum under biased gradients: runs, sweeps and audits"};
  app.set_version_flag("--version", std::string(BIASMOM_VERSION));
  app.require_subcommand(1);
  std::size_t threads = 1;
  app.add_option("--threads", threads, "Worker threads for independent trials")
      ->check(CLI::PositiveNumber);

  std::string config, out, spec, dir;
  std::optional<std::string> verify_out;

  auto* run = app.add_subcommand("run", "Run a configuration and write run.csv/run.json");
  run->add_option("config", config, "Run configuration (JSON)")->required();
  run->add_option("--out", out, "Output directory")->required();

  auto* sweep = app.add_subcommand("sweep", "Run one configuration per axis value");
  sweep->add_option("spec", spec, "Sweep specification (JSON)")->required();
  sweep->add_option("--out", out, "Output directory")->required();

  auto* verify = app.add_subcommand("verify", "Run the full audit battery");
  verify->add_option("config", config, "Run configuration (JSON)")->required();
  verify->add_option("--out", verify_out, "Also write run outputs and audit.json here");

  auto* report = app.add_subcommand("report", "Re-run the trajectory audits on a run directory");
  report->add_option("dir", dir, "Directory holding run.csv and run.json")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config, out, threads);
    if (*sweep) return cmd_sweep(spec, out, threads);
    if (*verify) return cmd_verify(config, verify_out, threads);
    if (*report) return cmd_report(dir);
  } catch (const biasmom::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const biasmom::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
