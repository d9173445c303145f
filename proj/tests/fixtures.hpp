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

#ifndef LATENTVAR_TESTS_FIXTURES_HPP
#define LATENTVAR_TESTS_FIXTURES_HPP

// Shared instances and reference values. The Fisher references were computed
// with adaptive quadrature (scipy.integrate.quad, tolerance 1e-13) on the
// explicit score formulas, independently of this library.

#include <vector>

#include "latentvar/latentvar.hpp"

namespace latentvar::testing {

inline MixtureModel univariate(int k) { return MixtureModel(k, 1, Matrix::Identity(1, 1)); }

/// K = 2, M = 1, sigma = 1, a* = 0.4, mu* = (-1.5, 1.5).
inline TrueDistribution benchmark() {
  const MixtureModel m = univariate(2);
  const std::vector<double> a{0.4, 0.6};
  const Matrix mu = (Matrix(2, 1) << -1.5, 1.5).finished();
  return TrueDistribution(m, m.make_param(a, mu));
}

/// K = 2, M = 1, sigma = 1, a* = 0.5, mu* = (-2, 2).
inline TrueDistribution symmetric_pair() {
  const MixtureModel m = univariate(2);
  const std::vector<double> a{0.5, 0.5};
  const Matrix mu = (Matrix(2, 1) << -2.0, 2.0).finished();
  return TrueDistribution(m, m.make_param(a, mu));
}

inline Matrix benchmark_i_x() {
  return (Matrix(3, 3) << 3.3322557417498357, -0.2848772257018748, -0.3158986402382444,  //
          -0.2848772257018748, 0.28219543577683914, -0.08730703828218901,                //
          -0.3158986402382444, -0.08730703828218901, 0.45986001731065307)
      .finished();
}

/// Complete-data information is diagonal: 1/a + 1/(1-a), a, 1-a.
inline Matrix benchmark_i_xy() {
  return (Matrix(3, 3) << 1.0 / 0.4 + 1.0 / 0.6, 0, 0, 0, 0.4, 0, 0, 0, 0.6).finished();
}

inline constexpr double kBenchmarkCoeffMl = 0.951401993683916;
inline constexpr double kBenchmarkCoeffBayesI = 0.56068475699299;
inline constexpr double kBenchmarkAlphas[] = {0.25, 0.5, 1.0};
inline constexpr double kBenchmarkCoeffMulti[] = {0.792299240198696, 0.689623282272396, 0.56068475699299};

inline Matrix symmetric_pair_i_x() {
  return (Matrix(3, 3) << 3.7256103648370456, -0.1371948175814776, -0.1371948175814776,  //
          -0.1371948175814776, 0.4259887205955032, -0.0631835381769807,                  //
          -0.1371948175814776, -0.0631835381769807, 0.4259887205955032)
      .finished();
}

inline constexpr double kSymmetricPairCoeffMl = 0.272087411648686;
inline constexpr double kSymmetricPairCoeffBayesI = 0.220972472116448;

/// K = 1, M = 1 conjugate fixture: N(mu, 1) with a N(0, 2^2) prior on mu.
inline TrueDistribution conjugate_truth() {
  const MixtureModel m = univariate(1);
  const std::vector<double> a{1.0};
  const Matrix mu = (Matrix(1, 1) << 0.7).finished();
  return TrueDistribution(m, m.make_param(a, mu));
}

inline Prior conjugate_prior(const MixtureModel& m) { return Prior(m, 1.0, 0.0, 2.0); }

}  // namespace latentvar::testing

#endif  // LATENTVAR_TESTS_FIXTURES_HPP
