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

#include <cmath>
#include <numeric>
#include <random>

#include "fixtures.hpp"

namespace latentvar {
namespace {

FisherBundle manual_bundle(const Matrix& i_x, const Matrix& i_y_given_x) {
  FisherBundle b;
  b.i_x = i_x;
  b.i_y_given_x = i_y_given_x;
  b.i_xy = i_x + i_y_given_x;
  return b;
}

void expect_bundle_invariants(const FisherBundle& b) {
  EXPECT_LT(max_asymmetry(b.i_x), 1e-9);
  EXPECT_LT(max_asymmetry(b.i_xy), 1e-9);
  EXPECT_LT(max_asymmetry(b.i_y_given_x), 1e-9);
  EXPECT_EQ(b.i_xy, Matrix(b.i_x + b.i_y_given_x));
  EXPECT_GT(min_eigenvalue(b.i_x), 0.0);
  EXPECT_GT(min_eigenvalue(b.i_xy), 0.0);
  EXPECT_GE(min_eigenvalue(b.i_y_given_x), -1e-8);
  EXPECT_GE(min_eigenvalue(b.i_xy - b.i_x), -1e-8);
}

// ---------------------------------------------------------------------------
// Scores

TEST(Scores, MatchFiniteDifferences) {
  Rng rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0), ua(0.15, 0.85);
  std::uniform_int_distribution<int> pick(0, 2);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int k = 2 + t % 2;
    const int dim = 1 + t % 2;
    Matrix sigma = Matrix::Identity(dim, dim);
    if (dim == 2) sigma(0, 1) = sigma(1, 0) = 0.3;
    const MixtureModel m(k, dim, sigma);
    std::vector<double> a(static_cast<std::size_t>(k));
    a[0] = ua(rng) / (k - 1);
    for (int j = 1; j < k - 1; ++j) a[static_cast<std::size_t>(j)] = (1 - a[0]) / k;
    a.back() = 1.0 - std::accumulate(a.begin(), a.end() - 1, 0.0);
    Matrix mu(k, dim);
    for (Eigen::Index i = 0; i < mu.size(); ++i) mu.data()[i] = u(rng);
    const ParamVector w = m.make_param(a, mu);
    Vector x(dim);
    for (int j = 0; j < dim; ++j) x[j] = 1.5 * u(rng);
    const int y = pick(rng) % k;
    const ScorePair s = score_gradients(m, w, x, y);
    const double h = 1e-5;
    for (int i = 0; i < m.param_dim(); ++i) {
      ParamVector wp = w, wm = w;
      wp.values[i] += h;
      wm.values[i] -= h;
      const double gj = (m.log_joint(wp, x, y) - m.log_joint(wm, x, y)) / (2 * h);
      const double gm = (m.log_marginal(wp, x) - m.log_marginal(wm, x)) / (2 * h);
      worst = std::max({worst, std::abs(gj - s.joint[i]), std::abs(gm - s.marginal[i])});
    }
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Scores, MarginalIsPosteriorAverageOfJoint) {
  const auto t = testing::benchmark();
  const auto& m = t.model();
  for (double xv : {-3.0, -0.4, 0.0, 1.1, 4.0}) {
    const Vector x = Vector::Constant(1, xv);
    const Vector post = m.posterior_label(t.w_star(), x);
    Vector avg = Vector::Zero(m.param_dim());
    for (int y = 0; y < 2; ++y) avg += post[y] * score_gradients(m, t.w_star(), x, y).joint;
    EXPECT_LT((avg - score_gradients(m, t.w_star(), x, 0).marginal).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Scores, SingleComponentMeanScore) {
  const auto m = testing::univariate(1);
  const std::vector<double> a{1.0};
  const ParamVector w = m.make_param(a, Matrix::Constant(1, 1, 0.3));
  const ScorePair s = score_gradients(m, w, Vector::Constant(1, 2.0), 0);
  EXPECT_NEAR(s.marginal[0], 1.7, 1e-15);
  EXPECT_NEAR(s.joint[0], 1.7, 1e-15);
}

// ---------------------------------------------------------------------------
// Fisher matrices

TEST(FisherMatrices, SingleComponentUnitVariance) {
  const auto m = testing::univariate(1);
  const std::vector<double> a{1.0};
  const TrueDistribution t(m, m.make_param(a, Matrix::Zero(1, 1)));
  const FisherBundle b = fisher_matrices(t);
  EXPECT_NEAR(b.i_x(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(b.i_xy(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(b.i_y_given_x(0, 0), 0.0, 1e-12);
  EXPECT_EQ(coeff_ml(b), 0.0);
  EXPECT_EQ(coeff_bayes_type1(b), 0.0);
}

TEST(FisherMatrices, BenchmarkMatchesReference) {
  const FisherBundle b = fisher_matrices(testing::benchmark());
  EXPECT_EQ(b.method, FisherMethod::kQuadrature);
  EXPECT_LT((b.i_x - testing::benchmark_i_x()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((b.i_xy - testing::benchmark_i_xy()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT(b.error_bound, 1e-6);
  expect_bundle_invariants(b);
  EXPECT_NEAR(coeff_ml(b), testing::kBenchmarkCoeffMl, 1e-9);
  EXPECT_NEAR(coeff_bayes_type1(b), testing::kBenchmarkCoeffBayesI, 1e-9);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(coeff_bayes_multitarget(b, testing::kBenchmarkAlphas[i]), testing::kBenchmarkCoeffMulti[i], 1e-9);
  }
}

TEST(FisherMatrices, SymmetricPairHasLatentInformation) {
  const FisherBundle b = fisher_matrices(testing::symmetric_pair());
  expect_bundle_invariants(b);
  // Well-separated components converge more slowly in the node count.
  EXPECT_LT((b.i_x - testing::symmetric_pair_i_x()).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Matrix>(b.i_y_given_x).eigenvalues().maxCoeff(), 0.1);
  EXPECT_NEAR(coeff_ml(b), testing::kSymmetricPairCoeffMl, 1e-8);
  EXPECT_NEAR(coeff_bayes_type1(b), testing::kSymmetricPairCoeffBayesI, 1e-8);
}

TEST(FisherMatrices, MonteCarloAgreesWithQuadrature) {
  const auto t = testing::symmetric_pair();
  const FisherBundle q = fisher_matrices(t);
  FisherOptions opt;
  opt.method = FisherMethod::kMonteCarlo;
  opt.resolution = 1 << 20;
  opt.seed = 17;
  const FisherBundle mc = fisher_matrices(t, opt);
  expect_bundle_invariants(mc);
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) {
      EXPECT_LE(std::abs(mc.i_x(i, j) - q.i_x(i, j)), 4 * mc.se_x(i, j) + 1e-12) << i << "," << j;
      EXPECT_LE(std::abs(mc.i_xy(i, j) - q.i_xy(i, j)), 4 * mc.se_xy(i, j) + 1e-12) << i << "," << j;
    }
  }
}

TEST(FisherMatrices, MonteCarloAgreesInTwoDimensions) {
  Matrix sigma(2, 2);
  sigma << 1.0, 0.4, 0.4, 0.8;
  const MixtureModel m(3, 2, sigma);
  Matrix mu(3, 2);
  mu << -1.5, 0, 1.5, 0.5, 0, -2;
  const std::vector<double> a{0.3, 0.3, 0.4};
  const TrueDistribution t(m, m.make_param(a, mu));
  const FisherBundle q = fisher_matrices(t, {FisherMethod::kQuadrature, 120, 1, 1});
  expect_bundle_invariants(q);
  EXPECT_LT(q.error_bound, 1e-6);
  const FisherBundle mc = fisher_matrices(t, {FisherMethod::kMonteCarlo, 1 << 19, 3, 2});
  const Matrix zx = (mc.i_x - q.i_x).cwiseAbs().cwiseQuotient(mc.se_x.cwiseMax(1e-15));
  EXPECT_LE(zx.maxCoeff(), 4.5);
}

TEST(FisherMatrices, MonteCarloIsThreadCountIndependent) {
  const auto t = testing::benchmark();
  const FisherBundle a = fisher_matrices(t, {FisherMethod::kMonteCarlo, 200000, 9, 1});
  const FisherBundle b = fisher_matrices(t, {FisherMethod::kMonteCarlo, 200000, 9, 3});
  EXPECT_EQ(a.i_x, b.i_x);
  EXPECT_EQ(a.i_xy, b.i_xy);
}

TEST(FisherMatrices, Errors) {
  const MixtureModel m3(2, 3, Matrix::Identity(3, 3));
  const std::vector<double> a{0.5, 0.5};
  const TrueDistribution t3(m3, m3.make_param(a, (Matrix(2, 3) << 0, 0, 0, 1, 1, 1).finished()));
  EXPECT_THROW(fisher_matrices(t3), std::invalid_argument);
  EXPECT_NO_THROW(fisher_matrices(t3, {FisherMethod::kMonteCarlo, 100000, 1, 1}));

  // Nearly coinciding components: I_X is numerically singular.
  const auto m = testing::univariate(2);
  const TrueDistribution close(m, m.make_param(a, (Matrix(2, 1) << -1e-4, 1e-4).finished()));
  EXPECT_THROW(fisher_matrices(close), RegularityError);
}

TEST(FisherMatrices, SymmetricImageGivesSameCoefficients) {
  const auto t = testing::benchmark();
  const SymmetryGroup g(2);
  const TrueDistribution swapped(t.model(), SymmetryGroup::apply(t.model(), g.permutation(1), t.w_star()));
  const FisherBundle a = fisher_matrices(t), b = fisher_matrices(swapped);
  EXPECT_NEAR(coeff_ml(a), coeff_ml(b), 1e-10);
  EXPECT_NEAR(coeff_bayes_type1(a), coeff_bayes_type1(b), 1e-10);
}

// ---------------------------------------------------------------------------
// Coefficients

TEST(Coefficients, MlExamples) {
  EXPECT_EQ(coeff_ml(manual_bundle(Matrix::Identity(3, 3), Matrix::Zero(3, 3))), 0.0);
  for (int d : {1, 3, 5}) {
    EXPECT_NEAR(coeff_ml(manual_bundle(2 * Matrix::Identity(d, d), Matrix::Identity(d, d))), d / 4.0, 1e-15);
  }
}

TEST(Coefficients, BayesTypeOneExamples) {
  EXPECT_EQ(coeff_bayes_type1(manual_bundle(Matrix::Identity(3, 3), Matrix::Zero(3, 3))), 0.0);
  EXPECT_NEAR(coeff_bayes_type1(manual_bundle(Matrix::Constant(1, 1, 2.0), Matrix::Constant(1, 1, 1.0))),
              0.5 * std::log(1.5), 1e-15);
}

TEST(Coefficients, BayesNeverExceedsMlOnRandomPerturbations) {
  Rng rng(8);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 200; ++t) {
    const int d = 1 + t % 5;
    Matrix g(d, d), h(d, d);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      g.data()[i] = nd(rng);
      h.data()[i] = nd(rng);
    }
    const Matrix i_x = g * g.transpose() + 0.5 * Matrix::Identity(d, d);
    const Matrix i_yx = (t % 3 == 0 ? 0.01 : 1.0) * h * h.transpose();
    const FisherBundle b = manual_bundle(i_x, i_yx);
    EXPECT_LE(coeff_bayes_type1(b), coeff_ml(b) + 1e-12);
    if (min_eigenvalue(i_yx) > 1e-6) {
      EXPECT_LT(coeff_bayes_type1(b), coeff_ml(b));
    }
  }
}

TEST(Coefficients, MultitargetLimitsAndMonotonicity) {
  const FisherBundle b = fisher_matrices(testing::benchmark());
  EXPECT_NEAR(coeff_bayes_multitarget(b, 1.0), coeff_bayes_type1(b), 1e-12);
  // First-order series: sum log1p(a l)/(2a) = c_ml - (a/4) sum l^2 + O(a^2).
  const Vector lam = relative_information_spectrum(b);
  const double a = 1e-4;
  const double series = coeff_ml(b) - a / 4.0 * lam.squaredNorm();
  EXPECT_NEAR(coeff_bayes_multitarget(b, a), series, 1e-8);
  EXPECT_NEAR(coeff_bayes_multitarget(b, a) / coeff_ml(b), 1.0, 1e-3);
  double prev = coeff_ml(b);
  for (int i = 1; i <= 20; ++i) {
    const double c = coeff_bayes_multitarget(b, i / 20.0);
    EXPECT_LT(c, prev);
    prev = c;
  }
  const FisherBundle zero = manual_bundle(Matrix::Identity(3, 3), Matrix::Zero(3, 3));
  for (double al : {0.1, 0.5, 1.0}) EXPECT_EQ(coeff_bayes_multitarget(zero, al), 0.0);
  EXPECT_THROW(coeff_bayes_multitarget(b, 0.0), std::invalid_argument);
  EXPECT_THROW(coeff_bayes_multitarget(b, 1.5), std::invalid_argument);
}

TEST(Coefficients, MultitargetMatchesDeterminantForm) {
  const FisherBundle b = fisher_matrices(testing::benchmark());
  for (double al : {0.2, 0.5, 0.9}) {
    const double direct = 0.5 / al * (std::log(b.k_xy(al).determinant()) - std::log(b.i_x.determinant()));
    EXPECT_NEAR(coeff_bayes_multitarget(b, al), direct, 1e-12);
  }
}

TEST(Coefficients, Predictions) {
  const auto p = coeff_predictions(3, 1.0);
  EXPECT_DOUBLE_EQ(p.stp, 1.5);
  EXPECT_NEAR(p.mtp, 1.5 * std::log(2.0), 1e-15);
  EXPECT_NEAR(coeff_predictions(3, 1e-6).mtp, 1.5, 1e-5);
  for (double a : {1e-3, 0.1, 0.5, 1.0, 2.0}) EXPECT_LT(coeff_predictions(3, a).mtp, coeff_predictions(3, a).stp);
  EXPECT_THROW(coeff_predictions(0, 1.0), std::invalid_argument);
  EXPECT_THROW(coeff_predictions(3, 0.0), std::invalid_argument);
}

TEST(Coefficients, Report) {
  const FisherBundle b = fisher_matrices(testing::benchmark());
  const CoefficientReport r = coefficient_report(b, {0.25, 0.5, 1.0});
  EXPECT_EQ(r.d, 3);
  EXPECT_LT(r.c_bayes_I, r.c_ml);
  EXPECT_EQ(r.c_bayes_IIp, r.c_bayes_IIIp);
  EXPECT_NEAR(r.c_mtp.back(), 1.5 * std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(r.c_stp, 1.5);
}

TEST(Coefficients, ClampedConditionalInformation) {
  Matrix i_yx = Matrix::Zero(2, 2);
  i_yx(0, 0) = 1.0;
  i_yx(1, 1) = -5e-9;
  const Matrix c = clamped_conditional_information(manual_bundle(Matrix::Identity(2, 2), i_yx));
  EXPECT_GE(min_eigenvalue(c), 0.0);
  EXPECT_NEAR(c(0, 0), 1.0, 1e-15);
}

}  // namespace
}  // namespace latentvar
