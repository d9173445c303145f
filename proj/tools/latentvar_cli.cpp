// Copyright 2026 The latentvar Authors
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

// latentvar: coefficient reports, Monte Carlo sweeps and verdicts.
//
//   latentvar coeffs   --config cfg.json [--out coeffs.json]
//   latentvar simulate --config cfg.json [--out sweep.csv] [--seed S] [--threads T]
//   latentvar verify   --config cfg.json [--csv sweep.csv] [--out table.txt]

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "latentvar/commands.hpp"

namespace {

using namespace latentvar;

struct Options {
  std::string config;
  std::string out;
  std::string csv;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool quiet = false;
};

ExperimentConfig load(const Options& o) {
  ExperimentConfig c = load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  validate(c);
  return c;
}

// Writes to `path`, or stdout when empty or "-".
template <class F>
void with_output(const std::string& path, F&& body) {
  if (path.empty() || path == "-") {
    body(std::cout);
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  body(f);
}

int run_coeffs(const Options& o) {
  const ExperimentConfig c = load(o);
  const auto j = cmd_coeffs(c);
  with_output(o.out.empty() ? c.coeffs_path : o.out, [&](std::ostream& s) { s << j.dump(2) << '\n'; });
  return kExitOk;
}

int run_simulate(const Options& o) {
  const ExperimentConfig c = load(o);
  if (c.targets.empty()) throw ConfigError("'simulation.targets' is empty");
  if (c.n_grid.empty()) throw ConfigError("'simulation.n_grid' is empty");
  std::size_t flagged = 0;
  with_output(o.out.empty() ? c.simulate_path : o.out, [&](std::ostream& s) {
    const auto rows = cmd_simulate(c, s, [&](std::size_t n) {
      if (!o.quiet) std::cerr << "n = " << n << " done\n";
    });
    for (const auto& r : rows) flagged += r.valid() ? 0 : 1;
  });
  if (flagged > 0) std::cerr << "warning: " << flagged << " rows exceed the ESS flag limit\n";
  return kExitOk;
}

int run_verify(const Options& o) {
  const ExperimentConfig c = load(o);
  const std::string path = o.csv.empty() ? c.simulate_path : o.csv;
  if (path.empty()) throw ConfigError("no CSV given (--csv or 'output.simulate')");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  int code = kExitOk;
  with_output(o.out, [&](std::ostream& s) { code = cmd_verify(c, in, s); });
  if (code != kExitOk) std::cerr << "ordering violated\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-variable estimation error: coefficients, simulation and verification"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output path (default: config output block, else stdout)");
    sub->add_option("--seed", o.seed, "root seed, overrides the config");
    sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
  };
  auto* coeffs = app.add_subcommand("coeffs", "Fisher matrices and leading coefficients as JSON");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo sweep written as CSV");
  auto* verify = app.add_subcommand("verify", "fit a sweep and compare ML with Bayes");
  for (auto* s : {coeffs, simulate, verify}) common(s);
  simulate->add_flag("--quiet", o.quiet, "no progress on stderr");
  verify->add_option("--csv", o.csv, "sweep CSV (default: config output.simulate)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*coeffs) return run_coeffs(o);
    if (*simulate) return run_simulate(o);
    return run_verify(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const RegularityError& e) {
    std::cerr << "non-regular model: " << e.what() << '\n';
    return kExitNonRegular;
  } catch (const InsufficientDataError& e) {
    std::cerr << "insufficient data: " << e.what() << '\n';
    return kExitInsufficientData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}
