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

#ifndef LATENTVAR_COMMANDS_HPP
#define LATENTVAR_COMMANDS_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "latentvar/config.hpp"
#include "latentvar/errors.hpp"
#include "latentvar/fisher.hpp"
#include "latentvar/montecarlo.hpp"

namespace latentvar {

/// Process exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitNonRegular = 2,
  kExitInsufficientData = 3,
  kExitVerdictMismatch = 4,
};

/// Theoretical leading coefficient of D(n) for one series.
inline double theoretical_coefficient(const FisherBundle& b, Target t, Series s, double alpha) {
  const int d = b.dim();
  auto ml = [&] { return is_latent(t) ? coeff_ml(b) : coeff_predictions(d, 1.0).stp; };
  auto bayes = [&] {
    switch (t) {
      case Target::kI: return coeff_bayes_type1(b);
      case Target::kII:
      case Target::kIII: return coeff_ml(b);
      case Target::kIIprime:
      case Target::kIIIprime: return coeff_bayes_multitarget(b, alpha);
      case Target::kSTP: return coeff_predictions(d, 1.0).stp;
      case Target::kMTP: return coeff_predictions(d, alpha).mtp;
    }
    return 0.0;
  };
  switch (s) {
    case Series::kML: return ml();
    case Series::kBayes: return bayes();
    case Series::kPairedDiff: return bayes() - ml();
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// coeffs

inline nlohmann::json coefficient_json(const FisherBundle& b, const CoefficientReport& r) {
  using nlohmann::json;
  json j;
  j["d"] = r.d;
  j["c_ml"] = r.c_ml;
  j["c_bayes_I"] = r.c_bayes_I;
  j["c_stp"] = r.c_stp;
  j["alphas"] = r.alphas;
  j["c_bayes_IIp"] = r.c_bayes_IIp;
  j["c_bayes_IIIp"] = r.c_bayes_IIIp;
  j["c_mtp"] = r.c_mtp;
  json f;
  f["method"] = to_string(b.method);
  f["resolution"] = b.resolution;
  f["error_bound"] = b.error_bound;
  f["i_x"] = detail::matrix_json(b.i_x);
  f["i_xy"] = detail::matrix_json(b.i_xy);
  f["i_y_given_x"] = detail::matrix_json(clamped_conditional_information(b));
  f["min_eigenvalue_i_y_given_x"] = min_eigenvalue(b.i_y_given_x);
  if (b.method == FisherMethod::kMonteCarlo) {
    f["se_x"] = detail::matrix_json(b.se_x);
    f["se_xy"] = detail::matrix_json(b.se_xy);
  }
  j["fisher"] = std::move(f);
  j["backend"] = {{"linear_algebra", "Eigen " + std::to_string(EIGEN_WORLD_VERSION) + "." +
                                          std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                          std::to_string(EIGEN_MINOR_VERSION)},
                  {"factorization", "Cholesky"},
                  {"conditioning_limit", kConditioningLimit}};
  return j;
}

/// Fisher matrices and every coefficient as a JSON document.
inline nlohmann::json cmd_coeffs(const ExperimentConfig& config) {
  const FisherBundle b = fisher_matrices(config.truth(), config.fisher_options());
  const std::vector<double> alphas = config.alphas.empty() ? std::vector<double>{0.25, 0.5, 1.0} : config.alphas;
  return coefficient_json(b, coefficient_report(b, alphas));
}

// ---------------------------------------------------------------------------
// simulate

inline constexpr const char* kCsvHeader = "target,method,n,alpha,mean,stderr,reps,flags,seed";

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_csv_row(std::ostream& out, const ErrorEstimate& e) {
  out << to_string(e.target) << ',' << to_string(e.method) << ',' << e.n << ','
      << (e.alpha ? format_double(*e.alpha) : std::string()) << ',' << format_double(e.mean) << ','
      << format_double(e.std_error) << ',' << e.reps << ',' << e.flags << ',' << e.seed << '\n';
}

/// Runs the sweep and writes one CSV row per (target, method, alpha, n).
///
/// Rows follow the order of the configured targets, then alpha, then n.
/// `progress`, when set, is called after each grid point.
inline std::vector<ErrorEstimate> cmd_simulate(const ExperimentConfig& config, std::ostream& csv,
                                               const std::function<void(std::size_t)>& progress = {}) {
  const TrueDistribution truth = config.truth();
  const Prior prior = config.prior();
  const FisherBundle fisher = fisher_matrices(truth, config.fisher_options());
  const std::vector<Cell> cells = config.cells();
  std::vector<Series> series;
  for (Series s : {Series::kML, Series::kBayes, Series::kPairedDiff}) {
    for (const auto& t : config.targets) {
      if (t.series == s) {
        series.push_back(s);
        break;
      }
    }
  }
  const SimulationSettings settings = config.simulation_settings();

  // estimates[n index][cell][series]
  std::vector<std::vector<std::vector<ErrorEstimate>>> grid;
  for (std::size_t n : config.n_grid) {
    const auto flat = estimate_cells(truth, prior, fisher, cells, series, n, settings);
    auto& g = grid.emplace_back(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      g[c].assign(flat.begin() + static_cast<std::ptrdiff_t>(c * series.size()),
                  flat.begin() + static_cast<std::ptrdiff_t>((c + 1) * series.size()));
    }
    if (progress) progress(n);
  }

  std::vector<ErrorEstimate> rows;
  for (const TargetSpec& spec : config.targets) {
    const std::size_t si = static_cast<std::size_t>(std::find(series.begin(), series.end(), spec.series) - series.begin());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (cells[c].target != spec.target) continue;
      for (std::size_t k = 0; k < config.n_grid.size(); ++k) rows.push_back(grid[k][c][si]);
    }
  }
  csv << kCsvHeader << '\n';
  for (const auto& r : rows) write_csv_row(csv, r);
  return rows;
}

// ---------------------------------------------------------------------------
// verify

inline std::vector<ErrorEstimate> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw ConfigError("unexpected CSV header: " + line);
  std::vector<ErrorEstimate> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    const std::string where = "CSV line " + std::to_string(lineno);
    if (f.size() != 9) throw ConfigError(where + ": expected 9 fields");
    ErrorEstimate e;
    const auto t = parse_target(f[0]);
    const auto m = parse_series(f[1]);
    if (!t) throw ConfigError(where + ": unknown target '" + f[0] + "'");
    if (!m) throw ConfigError(where + ": unknown method '" + f[1] + "'");
    e.target = *t;
    e.method = *m;
    try {
      e.n = std::stoull(f[2]);
      if (!f[3].empty()) e.alpha = std::stod(f[3]);
      e.mean = std::stod(f[4]);
      e.std_error = std::stod(f[5]);
      e.reps = std::stoull(f[6]);
      e.flags = std::stoull(f[7]);
      e.seed = std::stoull(f[8]);
    } catch (const std::exception&) {
      throw ConfigError(where + ": malformed number");
    }
    if (is_block(e.target) != e.alpha.has_value()) throw ConfigError(where + ": alpha must be set exactly for block targets");
    rows.push_back(e);
  }
  return rows;
}

struct SeriesCheck {
  Target target = Target::kI;
  std::optional<double> alpha;
  Series series = Series::kML;
  CoefficientFit fit;
  double theory = 0.0;
  std::size_t flagged_rows = 0;
  /// |c_hat - theory| <= 3 c_se.
  bool agrees() const { return std::abs(fit.c_hat - theory) <= 3.0 * fit.c_se; }
};

struct VerifyReport {
  std::vector<SeriesCheck> series;
  std::vector<VerdictRecord> verdicts;
  bool all_match() const {
    for (const auto& v : verdicts) {
      if (!v.matches()) return false;
    }
    return true;
  }
};

/// Fits every series in the CSV, compares with theory and classifies each
/// target whose ML and Bayes (or paired) series are both present.
inline VerifyReport verify_estimates(const FisherBundle& fisher, const std::vector<ErrorEstimate>& rows) {
  using Key = std::pair<int, double>;
  std::vector<Key> order;
  std::map<Key, std::map<Series, std::vector<ErrorEstimate>>> groups;
  for (const auto& r : rows) {
    const Key k{static_cast<int>(r.target), r.alpha.value_or(0.0)};
    if (!groups.count(k)) order.push_back(k);
    groups[k][r.method].push_back(r);
  }
  VerifyReport rep;
  for (const Key& k : order) {
    const auto t = static_cast<Target>(k.first);
    auto& g = groups[k];
    for (auto& [s, est] : g) {
      SeriesCheck c;
      c.target = t;
      if (is_block(t)) c.alpha = k.second;
      c.series = s;
      c.fit = fit_leading_coefficient(est);
      c.theory = theoretical_coefficient(fisher, t, s, k.second);
      for (const auto& e : est) c.flagged_rows += e.valid() ? 0 : 1;
      rep.series.push_back(c);
    }
    const bool paired = g.count(Series::kPairedDiff) > 0;
    const bool both = g.count(Series::kML) > 0 && g.count(Series::kBayes) > 0;
    if (paired || both) {
      static const std::vector<ErrorEstimate> none;
      rep.verdicts.push_back(compare_methods(t, both ? g[Series::kML] : none, both ? g[Series::kBayes] : none,
                                             paired ? g[Series::kPairedDiff] : none));
    }
  }
  return rep;
}

inline void print_report(std::ostream& out, const VerifyReport& rep) {
  auto label = [](Target t, const std::optional<double>& a) {
    std::ostringstream s;
    s << to_string(t);
    if (a) s << "(a=" << *a << ")";
    return s.str();
  };
  out << std::left << std::setw(18) << "target" << std::setw(10) << "method" << std::right << std::setw(12) << "fitted"
      << std::setw(11) << "se" << std::setw(12) << "theory" << std::setw(9) << "z" << "  check\n";
  out << std::fixed << std::setprecision(5);
  for (const auto& c : rep.series) {
    const double z = c.fit.c_se > 0 ? (c.fit.c_hat - c.theory) / c.fit.c_se : 0.0;
    out << std::left << std::setw(18) << label(c.target, c.alpha) << std::setw(10) << to_string(c.series) << std::right
        << std::setw(12) << c.fit.c_hat << std::setw(11) << c.fit.c_se << std::setw(12) << c.theory << std::setw(9)
        << std::setprecision(2) << z << std::setprecision(5) << "  " << (c.agrees() ? "ok" : "off")
        << (c.flagged_rows ? " (flagged rows)" : "") << '\n';
  }
  out << '\n'
      << std::left << std::setw(18) << "target" << std::right << std::setw(12) << "gap" << std::setw(11) << "se"
      << "  " << std::left << std::setw(14) << "verdict" << std::setw(14) << "expected" << "status\n";
  for (const auto& v : rep.verdicts) {
    out << std::left << std::setw(18) << label(v.target, v.alpha) << std::right << std::setw(12) << v.gap
        << std::setw(11) << v.gap_se << "  " << std::left << std::setw(14) << to_string(v.verdict) << std::setw(14)
        << to_string(v.expected) << (v.matches() ? "ok" : "ordering violated") << '\n';
  }
  out << std::right << std::defaultfloat;
}

/// Reads a sweep CSV, prints the coefficient table and verdicts, and
/// returns the exit code (0 iff every verdict matches the expected ordering).
inline int cmd_verify(const ExperimentConfig& config, std::istream& csv, std::ostream& out) {
  const FisherBundle fisher = fisher_matrices(config.truth(), config.fisher_options());
  const VerifyReport rep = verify_estimates(fisher, read_csv(csv));
  print_report(out, rep);
  return rep.all_match() ? kExitOk : kExitVerdictMismatch;
}

}  // namespace latentvar

#endif  // LATENTVAR_COMMANDS_HPP
