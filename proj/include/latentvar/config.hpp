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

#ifndef LATENTVAR_CONFIG_HPP
#define LATENTVAR_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "latentvar/errors.hpp"
#include "latentvar/fisher.hpp"
#include "latentvar/model.hpp"
#include "latentvar/montecarlo.hpp"
#include "latentvar/prior.hpp"

/**
 * \file
 * \brief Experiment configuration: a JSON document (comments allowed) with
 * the blocks `model`, `prior`, `fisher`, `simulation` and `output`.
 *
 * See configs/benchmark.json for an annotated example.
 */

namespace latentvar {

/// A requested series, e.g. "IIIprime:Bayes" or "I:Bayes-ML".
struct TargetSpec {
  Target target = Target::kI;
  Series series = Series::kML;

  bool operator==(const TargetSpec&) const = default;
};

inline std::string to_string(const TargetSpec& t) { return to_string(t.target) + ":" + to_string(t.series); }

inline std::optional<TargetSpec> parse_target_spec(std::string_view s) {
  const auto colon = s.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  const auto t = parse_target(s.substr(0, colon));
  const auto m = parse_series(s.substr(colon + 1));
  if (!t || !m) return std::nullopt;
  return TargetSpec{*t, *m};
}

struct ExperimentConfig {
  int components = 2;
  int dim = 1;
  Matrix sigma = Matrix::Identity(1, 1);
  std::vector<double> mixing{0.4, 0.6};
  /// K x M, one row per component.
  Matrix means = (Matrix(2, 1) << -1.5, 1.5).finished();

  double prior_concentration = 1.0;
  double prior_mean_location = 0.0;
  double prior_mean_scale = 10.0;

  FisherMethod fisher_method = FisherMethod::kQuadrature;
  std::int64_t fisher_resolution = 200;

  std::vector<TargetSpec> targets;
  std::vector<double> alphas;
  std::vector<std::size_t> n_grid;
  std::size_t reps = 10000;
  std::size_t posterior_samples = 500;
  std::uint64_t seed = 1;
  int threads = 1;

  std::string coeffs_path;
  std::string simulate_path;

  MixtureModel model() const { return MixtureModel(components, dim, sigma); }
  TrueDistribution truth() const {
    const MixtureModel m = model();
    return TrueDistribution(m, m.make_param(mixing, means));
  }
  Prior prior() const { return Prior(model(), prior_concentration, prior_mean_location, prior_mean_scale); }
  FisherOptions fisher_options() const {
    FisherOptions o;
    o.method = fisher_method;
    o.resolution = fisher_resolution;
    o.seed = seed;
    o.threads = threads;
    return o;
  }
  SimulationSettings simulation_settings() const {
    SimulationSettings s;
    s.reps = reps;
    s.seed = seed;
    s.posterior.samples = posterior_samples;
    s.threads = threads;
    return s;
  }
  /// Distinct (target, alpha) cells in first-appearance order.
  std::vector<Cell> cells() const {
    std::vector<Cell> out;
    auto add = [&](Cell c) {
      for (const Cell& o : out) {
        if (o.target == c.target && o.alpha == c.alpha) return;
      }
      out.push_back(c);
    };
    for (const TargetSpec& t : targets) {
      if (is_block(t.target)) {
        for (double a : alphas) add({t.target, a});
      } else {
        add({t.target, 0.0});
      }
    }
    return out;
  }
};

namespace detail {

using nlohmann::json;

struct ConfigReader {
  static const json& object(const json& parent, const std::string& key, const std::string& path, bool required) {
    static const json empty = json::object();
    if (!parent.contains(key)) {
      if (required) throw ConfigError("missing key '" + path + "'");
      return empty;
    }
    const json& v = parent.at(key);
    if (!v.is_object()) throw ConfigError("'" + path + "' must be an object");
    return v;
  }

  static void reject_unknown(const json& obj, const std::string& prefix, std::initializer_list<const char*> known) {
    for (const auto& [k, v] : obj.items()) {
      bool ok = false;
      for (const char* name : known) ok = ok || k == name;
      if (!ok) throw ConfigError("unknown key '" + prefix + k + "'");
    }
  }

  static double number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError("'" + path + "' must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError("'" + path + "' must be finite");
    return x;
  }

  static std::uint64_t unsigned_integer(const json& v, const std::string& path) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      throw ConfigError("'" + path + "' must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  static std::vector<double> numbers(const json& v, const std::string& path) {
    if (!v.is_array()) throw ConfigError("'" + path + "' must be an array");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
  }

  static Matrix matrix(const json& v, const std::string& path, Eigen::Index rows, Eigen::Index cols) {
    if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != rows) {
      throw ConfigError("'" + path + "' must have " + std::to_string(rows) + " rows");
    }
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const std::string rp = path + "[" + std::to_string(r) + "]";
      const auto row = numbers(v[static_cast<std::size_t>(r)], rp);
      if (static_cast<Eigen::Index>(row.size()) != cols) {
        throw ConfigError("'" + rp + "' must have " + std::to_string(cols) + " entries");
      }
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
    }
    return m;
  }
};

inline json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

/// Checks cross-field constraints; throws ConfigError naming the key.
inline void validate(const ExperimentConfig& c) {
  if (c.components < 1) throw ConfigError("'model.K' must be at least 1");
  if (c.dim < 1) throw ConfigError("'model.M' must be at least 1");
  if (static_cast<int>(c.mixing.size()) != c.components) throw ConfigError("'model.w_star.a' must have K entries");
  double total = 0.0;
  for (double a : c.mixing) {
    if (!(a > 0.0)) throw ConfigError("'model.w_star.a' entries must be positive");
    total += a;
  }
  if (std::abs(total - 1.0) > 1e-10) throw ConfigError("'model.w_star.a' must sum to 1");
  if (!(c.prior_concentration > 0.0)) throw ConfigError("'prior.concentration' must be positive");
  if (!(c.prior_mean_scale > 0.0)) throw ConfigError("'prior.mean_scale' must be positive");
  if (c.fisher_resolution < 2) throw ConfigError("'fisher.resolution' must be at least 2");
  if (c.fisher_method == FisherMethod::kQuadrature && c.dim > 2) {
    throw ConfigError("'fisher.method' quadrature supports M <= 2");
  }
  if (c.reps < 100) throw ConfigError("'simulation.reps' must be at least 100");
  if (c.posterior_samples < 2) throw ConfigError("'simulation.posterior_samples' must be at least 2");
  if (c.threads < 1) throw ConfigError("'simulation.threads' must be at least 1");
  for (std::size_t i = 0; i < c.n_grid.size(); ++i) {
    if (c.n_grid[i] < 1) throw ConfigError("'simulation.n_grid' entries must be positive");
    if (i > 0 && c.n_grid[i] <= c.n_grid[i - 1]) throw ConfigError("'simulation.n_grid' must be strictly increasing");
  }
  bool any_block = false;
  for (const auto& t : c.targets) any_block = any_block || is_block(t.target);
  for (double a : c.alphas) {
    if (!(a > 0.0 && a <= 1.0)) throw ConfigError("'simulation.alpha' entries must lie in (0, 1]");
    if (!any_block) continue;
    for (std::size_t n : c.n_grid) {
      const double m = a * static_cast<double>(n);
      if (std::abs(m - std::round(m)) > 1e-9 * std::max(1.0, m) || std::round(m) < 1.0) {
        throw ConfigError("'simulation.alpha' value " + std::to_string(a) + " times n = " + std::to_string(n) +
                          " is not a positive integer");
      }
    }
  }
  if (any_block && c.alphas.empty()) throw ConfigError("'simulation.alpha' is required for block targets");
  try {
    (void)c.model();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("'model.sigma': ") + e.what());
  }
  // Boundary ratios and coinciding means surface as RegularityError.
  try {
    (void)c.truth();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("'model': ") + e.what());
  }
}

inline ExperimentConfig parse_config(const std::string& text) {
  using detail::ConfigReader;
  using nlohmann::json;
  json root;
  try {
    root = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be an object");
  ConfigReader::reject_unknown(root, "", {"model", "prior", "fisher", "simulation", "output"});

  ExperimentConfig c;
  const json& model = ConfigReader::object(root, "model", "model", true);
  ConfigReader::reject_unknown(model, "model.", {"K", "M", "sigma", "w_star"});
  if (!model.contains("K")) throw ConfigError("missing key 'model.K'");
  if (!model.contains("M")) throw ConfigError("missing key 'model.M'");
  c.components = static_cast<int>(ConfigReader::unsigned_integer(model["K"], "model.K"));
  c.dim = static_cast<int>(ConfigReader::unsigned_integer(model["M"], "model.M"));
  if (c.components < 1) throw ConfigError("'model.K' must be at least 1");
  if (c.dim < 1) throw ConfigError("'model.M' must be at least 1");
  if (!model.contains("sigma")) throw ConfigError("missing key 'model.sigma'");
  c.sigma = ConfigReader::matrix(model["sigma"], "model.sigma", c.dim, c.dim);
  const json& ws = ConfigReader::object(model, "w_star", "model.w_star", true);
  ConfigReader::reject_unknown(ws, "model.w_star.", {"a", "mu"});
  if (!ws.contains("a")) throw ConfigError("missing key 'model.w_star.a'");
  if (!ws.contains("mu")) throw ConfigError("missing key 'model.w_star.mu'");
  c.mixing = ConfigReader::numbers(ws["a"], "model.w_star.a");
  c.means = ConfigReader::matrix(ws["mu"], "model.w_star.mu", c.components, c.dim);

  const json& prior = ConfigReader::object(root, "prior", "prior", false);
  ConfigReader::reject_unknown(prior, "prior.", {"concentration", "mean_location", "mean_scale"});
  if (prior.contains("concentration")) c.prior_concentration = ConfigReader::number(prior["concentration"], "prior.concentration");
  if (prior.contains("mean_location")) c.prior_mean_location = ConfigReader::number(prior["mean_location"], "prior.mean_location");
  if (prior.contains("mean_scale")) c.prior_mean_scale = ConfigReader::number(prior["mean_scale"], "prior.mean_scale");

  const json& fisher = ConfigReader::object(root, "fisher", "fisher", false);
  ConfigReader::reject_unknown(fisher, "fisher.", {"method", "resolution"});
  if (fisher.contains("method")) {
    const json& m = fisher["method"];
    if (m == "quadrature") {
      c.fisher_method = FisherMethod::kQuadrature;
    } else if (m == "monte-carlo") {
      c.fisher_method = FisherMethod::kMonteCarlo;
      c.fisher_resolution = 1 << 20;
    } else {
      throw ConfigError("'fisher.method' must be \"quadrature\" or \"monte-carlo\"");
    }
  }
  if (fisher.contains("resolution")) {
    c.fisher_resolution = static_cast<std::int64_t>(ConfigReader::unsigned_integer(fisher["resolution"], "fisher.resolution"));
  }

  const json& sim = ConfigReader::object(root, "simulation", "simulation", false);
  ConfigReader::reject_unknown(sim, "simulation.",
                               {"targets", "alpha", "n_grid", "reps", "posterior_samples", "seed", "threads"});
  if (sim.contains("targets")) {
    const json& t = sim["targets"];
    if (!t.is_array()) throw ConfigError("'simulation.targets' must be an array");
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::string path = "simulation.targets[" + std::to_string(i) + "]";
      if (!t[i].is_string()) throw ConfigError("'" + path + "' must be a string");
      const auto spec = parse_target_spec(t[i].get<std::string>());
      if (!spec) throw ConfigError("'" + path + "' is not a TARGET:METHOD pair: " + t[i].get<std::string>());
      for (const auto& o : c.targets) {
        if (o == *spec) throw ConfigError("'" + path + "' is listed twice");
      }
      c.targets.push_back(*spec);
    }
  }
  if (sim.contains("alpha")) c.alphas = ConfigReader::numbers(sim["alpha"], "simulation.alpha");
  if (sim.contains("n_grid")) {
    const json& g = sim["n_grid"];
    if (!g.is_array()) throw ConfigError("'simulation.n_grid' must be an array");
    for (std::size_t i = 0; i < g.size(); ++i) {
      c.n_grid.push_back(ConfigReader::unsigned_integer(g[i], "simulation.n_grid[" + std::to_string(i) + "]"));
    }
  }
  if (sim.contains("reps")) c.reps = ConfigReader::unsigned_integer(sim["reps"], "simulation.reps");
  if (sim.contains("posterior_samples")) {
    c.posterior_samples = ConfigReader::unsigned_integer(sim["posterior_samples"], "simulation.posterior_samples");
  }
  if (sim.contains("seed")) c.seed = ConfigReader::unsigned_integer(sim["seed"], "simulation.seed");
  if (sim.contains("threads")) c.threads = static_cast<int>(ConfigReader::unsigned_integer(sim["threads"], "simulation.threads"));

  const json& out = ConfigReader::object(root, "output", "output", false);
  ConfigReader::reject_unknown(out, "output.", {"coeffs", "simulate"});
  for (const char* key : {"coeffs", "simulate"}) {
    if (!out.contains(key)) continue;
    if (!out[key].is_string()) throw ConfigError(std::string("'output.") + key + "' must be a string");
    (std::string(key) == "coeffs" ? c.coeffs_path : c.simulate_path) = out[key].get<std::string>();
  }

  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Canonical form: every key present, sorted, two-space indent.
inline std::string serialize(const ExperimentConfig& c) {
  using nlohmann::json;
  json j;
  j["model"]["K"] = c.components;
  j["model"]["M"] = c.dim;
  j["model"]["sigma"] = detail::matrix_json(c.sigma);
  j["model"]["w_star"]["a"] = c.mixing;
  j["model"]["w_star"]["mu"] = detail::matrix_json(c.means);
  j["prior"]["concentration"] = c.prior_concentration;
  j["prior"]["mean_location"] = c.prior_mean_location;
  j["prior"]["mean_scale"] = c.prior_mean_scale;
  j["fisher"]["method"] = to_string(c.fisher_method);
  j["fisher"]["resolution"] = c.fisher_resolution;
  json targets = json::array();
  for (const auto& t : c.targets) targets.push_back(to_string(t));
  j["simulation"]["targets"] = targets;
  j["simulation"]["alpha"] = c.alphas;
  j["simulation"]["n_grid"] = c.n_grid;
  j["simulation"]["reps"] = c.reps;
  j["simulation"]["posterior_samples"] = c.posterior_samples;
  j["simulation"]["seed"] = c.seed;
  j["simulation"]["threads"] = c.threads;
  j["output"]["coeffs"] = c.coeffs_path;
  j["output"]["simulate"] = c.simulate_path;
  return j.dump(2) + "\n";
}

}  // namespace latentvar

#endif  // LATENTVAR_CONFIG_HPP
