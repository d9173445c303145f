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

#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"

namespace latentvar {
namespace {

const char* kSmall = R"({
  // two separated components
  "model": {"K": 2, "M": 1, "sigma": [[1.0]],
            "w_star": {"a": [0.4, 0.6], "mu": [[-1.5], [1.5]]}},
  "fisher": {"method": "quadrature", "resolution": 120},
  "simulation": {
    "targets": ["I:ML", "I:Bayes", "IIIprime:Bayes-ML", "STP:ML", "MTP:Bayes"],
    "alpha": [0.25, 0.5],
    "n_grid": [20, 40, 60],
    "reps": 100,
    "posterior_samples": 64,
    "seed": 3
  }
})";

std::string with(const std::string& text, const std::string& from, const std::string& to) {
  std::string s = text;
  const auto pos = s.find(from);
  if (pos == std::string::npos) ADD_FAILURE() << "missing " << from;
  else s.replace(pos, from.size(), to);
  return s;
}

std::string error_of(const std::string& text) {
  try {
    validate(parse_config(text));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, ParsesAndRoundTrips) {
  const ExperimentConfig c = parse_config(kSmall);
  EXPECT_EQ(c.components, 2);
  EXPECT_EQ(c.targets.size(), 5u);
  EXPECT_EQ(c.targets[2].target, Target::kIIIprime);
  EXPECT_EQ(c.targets[2].series, Series::kPairedDiff);
  EXPECT_EQ(c.n_grid, (std::vector<std::size_t>{20, 40, 60}));
  EXPECT_EQ(c.fisher_resolution, 120);
  EXPECT_DOUBLE_EQ(c.prior_mean_scale, 10.0);
  const std::string once = serialize(c);
  EXPECT_EQ(serialize(parse_config(once)), once);
}

TEST(Config, TargetSpecTokens) {
  for (Target t : kAllTargets) {
    for (Series s : {Series::kML, Series::kBayes, Series::kPairedDiff}) {
      const TargetSpec spec{t, s};
      const auto back = parse_target_spec(to_string(spec));
      ASSERT_TRUE(back.has_value());
      EXPECT_EQ(back->target, t);
      EXPECT_EQ(back->series, s);
    }
  }
  EXPECT_FALSE(parse_target_spec("IV:ML").has_value());
  EXPECT_FALSE(parse_target_spec("I").has_value());
}

TEST(Config, ErrorsNameTheKey) {
  const std::string s = kSmall;
  EXPECT_NE(error_of(with(s, "\"reps\": 100", "\"reps\": 10")).find("reps"), std::string::npos);
  EXPECT_NE(error_of(with(s, "\"reps\": 100", "\"rep\": 100")).find("simulation.rep"), std::string::npos);
  EXPECT_NE(error_of(with(s, "[0.4, 0.6]", "[0.5, 0.6]")).find("w_star.a"), std::string::npos);
  EXPECT_NE(error_of(with(s, "[0.4, 0.6]", "[0.0, 1.0]")).find("w_star.a"), std::string::npos);
  EXPECT_NE(error_of(with(s, "[20, 40, 60]", "[40, 20, 60]")).find("n_grid"), std::string::npos);
  EXPECT_NE(error_of(with(s, "[0.25, 0.5]", "[0.33]")).find("alpha"), std::string::npos);
  EXPECT_NE(error_of(with(s, "[0.25, 0.5]", "[1.5]")).find("alpha"), std::string::npos);
  EXPECT_NE(error_of(with(s, "\"I:ML\"", "\"I:MAP\"")).find("targets"), std::string::npos);
  EXPECT_NE(error_of(with(s, "[[1.0]]", "[[-1.0]]")).find("sigma"), std::string::npos);
  EXPECT_NE(error_of(with(s, "\"quadrature\"", "\"simpson\"")).find("fisher.method"), std::string::npos);
  EXPECT_THROW(parse_config("{ not json"), ConfigError);
}

TEST(Config, CoincidingMeansAreNonRegular) {
  const std::string s = with(kSmall, "[[-1.5], [1.5]]", "[[0.5], [0.5]]");
  EXPECT_THROW(validate(parse_config(s)), RegularityError);
}

TEST(Config, BenchmarkFileLoads) {
  const ExperimentConfig c = load_config(std::string(LATENTVAR_CONFIG_DIR) + "/benchmark.json");
  EXPECT_NO_THROW(validate(c));
  EXPECT_EQ(c.targets.size(), 21u);
  EXPECT_EQ(c.reps, 10000u);
  const ExperimentConfig q = load_config(std::string(LATENTVAR_CONFIG_DIR) + "/quick.json");
  EXPECT_NO_THROW(validate(q));
}

// ---------------------------------------------------------------------------

TEST(Coeffs, BenchmarkValues) {
  ExperimentConfig c = parse_config(kSmall);
  c.fisher_resolution = 200;
  const nlohmann::json j = cmd_coeffs(c);
  EXPECT_EQ(j["d"], 3);
  EXPECT_NEAR(j["c_ml"].get<double>(), testing::kBenchmarkCoeffMl, 1e-8);
  EXPECT_NEAR(j["c_bayes_I"].get<double>(), testing::kBenchmarkCoeffBayesI, 1e-8);
  EXPECT_DOUBLE_EQ(j["c_stp"].get<double>(), 1.5);
  EXPECT_EQ(j["alphas"].size(), 2u);
  EXPECT_NEAR(j["c_bayes_IIp"][0].get<double>(), testing::kBenchmarkCoeffMulti[0], 1e-8);
  EXPECT_NEAR(j["c_mtp"][1].get<double>(), std::log(1.5) / 0.5 * 1.5, 1e-12);
}

TEST(Simulate, RowCountAndReproducibility) {
  const ExperimentConfig c = parse_config(kSmall);
  std::ostringstream a, b;
  const auto rows = cmd_simulate(c, a);
  cmd_simulate(c, b);
  // I:ML, I:Bayes, STP:ML have 3 rows; the two block targets have 2 x 3.
  EXPECT_EQ(rows.size(), 3u * 3 + 2u * 2 * 3);
  EXPECT_EQ(a.str(), b.str());
  std::istringstream in(a.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, kCsvHeader);

  std::istringstream back(a.str());
  const auto parsed = read_csv(back);
  ASSERT_EQ(parsed.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(parsed[i].mean, rows[i].mean);
    EXPECT_EQ(parsed[i].std_error, rows[i].std_error);
    EXPECT_EQ(parsed[i].alpha, rows[i].alpha);
    EXPECT_EQ(parsed[i].target, rows[i].target);
    EXPECT_EQ(parsed[i].method, rows[i].method);
  }
}

TEST(Simulate, ReadCsvRejectsMalformedInput) {
  std::istringstream bad_header("target,n\nI,ML\n");
  EXPECT_THROW(read_csv(bad_header), ConfigError);
  std::istringstream bad_row(std::string(kCsvHeader) + "\nI,ML,abc,,0.1,0.01,100,0,1\n");
  EXPECT_THROW(read_csv(bad_row), ConfigError);
}

// ---------------------------------------------------------------------------

// Rows equal to c / n with small errors for every target and series.
std::string exact_csv(const FisherBundle& f, bool swap_type_one) {
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (Target t : kAllTargets) {
    for (double alpha : is_block(t) ? std::vector<double>{0.25, 0.5} : std::vector<double>{0.0}) {
      for (Series s : {Series::kML, Series::kBayes}) {
        Series used = s;
        if (swap_type_one && t == Target::kI) used = s == Series::kML ? Series::kBayes : Series::kML;
        for (std::size_t n : {100u, 200u, 400u, 800u}) {
          ErrorEstimate e;
          e.target = t;
          e.method = s;
          e.n = n;
          if (is_block(t)) e.alpha = alpha;
          e.mean = theoretical_coefficient(f, t, used, alpha) / static_cast<double>(n);
          e.std_error = 0.01 / static_cast<double>(n);
          e.reps = 10000;
          write_csv_row(out, e);
        }
      }
    }
  }
  return out.str();
}

TEST(Verify, ExactTheoryPasses) {
  const ExperimentConfig c = parse_config(kSmall);
  const FisherBundle f = fisher_matrices(c.truth(), c.fisher_options());
  std::istringstream in(exact_csv(f, false));
  const VerifyReport rep = verify_estimates(f, read_csv(in));
  EXPECT_EQ(rep.verdicts.size(), 10u);
  EXPECT_TRUE(rep.all_match());
  for (const auto& s : rep.series) {
    EXPECT_TRUE(s.agrees()) << to_string(s.target);
    EXPECT_NEAR(s.fit.c_hat, s.theory, 1e-9);
  }
  std::istringstream again(exact_csv(f, false));
  std::ostringstream report;
  EXPECT_EQ(cmd_verify(c, again, report), kExitOk);
  EXPECT_EQ(report.str().find("ordering violated"), std::string::npos);
}

TEST(Verify, SwappedTypeOneIsReported) {
  const ExperimentConfig c = parse_config(kSmall);
  const FisherBundle f = fisher_matrices(c.truth(), c.fisher_options());
  std::istringstream in(exact_csv(f, true));
  std::ostringstream report;
  EXPECT_EQ(cmd_verify(c, in, report), kExitVerdictMismatch);
  EXPECT_NE(report.str().find("ordering violated"), std::string::npos);
}

TEST(Verify, TheoryTable) {
  const FisherBundle f = fisher_matrices(testing::benchmark());
  EXPECT_DOUBLE_EQ(theoretical_coefficient(f, Target::kII, Series::kBayes, 0), coeff_ml(f));
  EXPECT_DOUBLE_EQ(theoretical_coefficient(f, Target::kIII, Series::kPairedDiff, 0), 0.0);
  EXPECT_DOUBLE_EQ(theoretical_coefficient(f, Target::kSTP, Series::kBayes, 0), 1.5);
  EXPECT_DOUBLE_EQ(theoretical_coefficient(f, Target::kMTP, Series::kML, 0.5), 1.5);
  EXPECT_NEAR(theoretical_coefficient(f, Target::kIIprime, Series::kBayes, 1.0),
              theoretical_coefficient(f, Target::kI, Series::kBayes, 0), 1e-12);
}

}  // namespace
}  // namespace latentvar
