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

#ifndef LATENTVAR_FISHER_HPP
#define LATENTVAR_FISHER_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "latentvar/gauss_hermite.hpp"
#include "latentvar/linalg.hpp"
#include "latentvar/model.hpp"
#include "latentvar/random.hpp"

namespace latentvar {

enum class FisherMethod { kQuadrature, kMonteCarlo };

inline std::string to_string(FisherMethod m) {
  return m == FisherMethod::kQuadrature ? "quadrature" : "monte-carlo";
}

/// Gradients of ln p(x, y | w) and ln p(x | w) with respect to w.
struct ScorePair {
  Vector joint;
  Vector marginal;
};

namespace detail {

/// Joint scores for every label at x, one per column (d x K), plus posterior weights.
inline void joint_scores(const MixtureModel& model, const ParamVector& w, const Vector& x, Matrix& scores,
                         Vector& posterior) {
  const int kc = model.components();
  const int d = model.param_dim();
  const Vector a = model.mixing_ratios(w);
  scores.setZero(d, kc);
  Vector lj(kc);
  for (int y = 0; y < kc; ++y) {
    for (int k = 0; k < kc - 1; ++k) {
      scores(k, y) = (y == k ? 1.0 / a[k] : 0.0) - (y == kc - 1 ? 1.0 / a[kc - 1] : 0.0);
    }
    const Vector diff = x - model.mean(w, y);
    scores.block(model.mean_offset(y), y, model.dim(), 1) = model.sigma_inverse() * diff;
    const Vector z = model.whiten(diff);
    lj[y] = std::log(a[y]) - 0.5 * z.squaredNorm();
  }
  const double lm = log_sum_exp(std::span<const double>(lj.data(), static_cast<std::size_t>(kc)));
  posterior = (lj.array() - lm).exp().matrix();
}

}  // namespace detail

/// Analytic scores. The marginal score is the posterior-weighted average of
/// the joint scores over labels.
inline ScorePair score_gradients(const MixtureModel& model, const ParamVector& w, const Vector& x, int y) {
  model.validate(w);
  model.check_label(y);
  Matrix scores;
  Vector post;
  detail::joint_scores(model, w, x, scores, post);
  return {scores.col(y), scores * post};
}

/// I_X, I_XY and I_{Y|X} at the true parameter.
struct FisherBundle {
  Matrix i_x;
  Matrix i_xy;
  Matrix i_y_given_x;
  FisherMethod method = FisherMethod::kQuadrature;
  /// Quadrature: max entrywise change against a half-resolution rule.
  /// Monte Carlo: max entrywise standard error.
  double error_bound = 0.0;
  /// Entrywise standard errors (Monte Carlo only; zero for quadrature).
  Matrix se_x;
  Matrix se_xy;
  int resolution = 0;

  int dim() const { return static_cast<int>(i_x.rows()); }
  /// alpha I_XY + (1 - alpha) I_X.
  Matrix k_xy(double alpha) const { return alpha * i_xy + (1.0 - alpha) * i_x; }
};

struct FisherOptions {
  FisherMethod method = FisherMethod::kQuadrature;
  /// Gauss-Hermite nodes per dimension, or Monte Carlo draws.
  std::int64_t resolution = 200;
  std::uint64_t seed = 1;
  int threads = 1;
};

namespace detail {

struct RawFisher {
  Matrix xy;
  Matrix x;
};

inline RawFisher quadrature_fisher(const TrueDistribution& truth, int nodes) {
  const auto& model = truth.model();
  const auto& w = truth.w_star();
  const int d = model.param_dim();
  const TensorRule rule = tensor_gauss_hermite(nodes, model.dim());
  const Vector a = model.mixing_ratios(w);
  RawFisher out{Matrix::Zero(d, d), Matrix::Zero(d, d)};
  Matrix scores;
  Vector post;
  for (int k = 0; k < model.components(); ++k) {
    const Vector mu = model.mean(w, k);
    for (Eigen::Index c = 0; c < rule.nodes.cols(); ++c) {
      const double wt = a[k] * rule.weights[static_cast<std::size_t>(c)];
      const Vector x = mu + model.sigma_cholesky() * rule.nodes.col(c);
      joint_scores(model, w, x, scores, post);
      const Vector sx = scores * post;
      out.x.noalias() += wt * sx * sx.transpose();
      // Complete data: y = k with weight a_k, x ~ N(mu_k, sigma).
      out.xy.noalias() += wt * scores.col(k) * scores.col(k).transpose();
    }
  }
  return out;
}

struct MomentAccumulator {
  Matrix sum_x, sum_xy, sq_x, sq_xy;
  explicit MomentAccumulator(int d)
      : sum_x(Matrix::Zero(d, d)), sum_xy(Matrix::Zero(d, d)), sq_x(Matrix::Zero(d, d)), sq_xy(Matrix::Zero(d, d)) {}
};

inline void monte_carlo_chunk(const TrueDistribution& truth, std::uint64_t seed, std::uint64_t chunk,
                              std::int64_t draws, MomentAccumulator& acc) {
  const auto& model = truth.model();
  Rng rng = make_stream(seed, "fisher", {chunk});
  const LabeledDataset data = sample_dataset(truth, static_cast<std::size_t>(draws), rng);
  Matrix scores;
  Vector post;
  for (std::size_t i = 0; i < data.size(); ++i) {
    detail::joint_scores(model, truth.w_star(), data.point(i), scores, post);
    const Vector sx = scores * post;
    const Vector sxy = scores.col(data.y[i]);
    const Matrix ox = sx * sx.transpose();
    const Matrix oxy = sxy * sxy.transpose();
    acc.sum_x += ox;
    acc.sum_xy += oxy;
    acc.sq_x += ox.cwiseProduct(ox);
    acc.sq_xy += oxy.cwiseProduct(oxy);
  }
}

}  // namespace detail

/// Fisher information at w*. Quadrature (M <= 2) or seeded Monte Carlo.
inline FisherBundle fisher_matrices(const TrueDistribution& truth, const FisherOptions& opt = {}) {
  const auto& model = truth.model();
  const int d = model.param_dim();
  FisherBundle b;
  b.method = opt.method;
  b.resolution = static_cast<int>(opt.resolution);
  Matrix raw_xy, raw_x;
  if (opt.method == FisherMethod::kQuadrature) {
    if (model.dim() > 2) throw std::invalid_argument("quadrature Fisher backend supports M <= 2 only");
    if (opt.resolution < 4) throw std::invalid_argument("quadrature needs at least 4 nodes");
    const int nodes = static_cast<int>(opt.resolution);
    auto full = detail::quadrature_fisher(truth, nodes);
    auto half = detail::quadrature_fisher(truth, nodes / 2);
    b.error_bound = std::max((full.x - half.x).cwiseAbs().maxCoeff(), (full.xy - half.xy).cwiseAbs().maxCoeff());
    raw_xy = std::move(full.xy);
    raw_x = std::move(full.x);
    b.se_x = Matrix::Zero(d, d);
    b.se_xy = Matrix::Zero(d, d);
  } else {
    constexpr std::int64_t kChunk = 1 << 16;
    const std::int64_t total = opt.resolution;
    if (total < 2) throw std::invalid_argument("Monte Carlo Fisher needs at least 2 draws");
    const auto chunks = static_cast<std::size_t>((total + kChunk - 1) / kChunk);
    std::vector<detail::MomentAccumulator> parts(chunks, detail::MomentAccumulator(d));
    auto run = [&](std::size_t begin, std::size_t stride) {
      for (std::size_t c = begin; c < chunks; c += stride) {
        const std::int64_t draws = std::min<std::int64_t>(kChunk, total - static_cast<std::int64_t>(c) * kChunk);
        detail::monte_carlo_chunk(truth, opt.seed, c, draws, parts[c]);
      }
    };
    const auto workers = static_cast<std::size_t>(std::max(1, opt.threads));
    if (workers == 1) {
      run(0, 1);
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(run, t, workers);
    }
    detail::MomentAccumulator acc(d);
    for (const auto& p : parts) {
      acc.sum_x += p.sum_x;
      acc.sum_xy += p.sum_xy;
      acc.sq_x += p.sq_x;
      acc.sq_xy += p.sq_xy;
    }
    const double nn = static_cast<double>(total);
    raw_x = acc.sum_x / nn;
    raw_xy = acc.sum_xy / nn;
    auto se = [&](const Matrix& sq, const Matrix& mean) {
      Matrix var = (sq / nn - mean.cwiseProduct(mean)) * (nn / (nn - 1.0));
      return Matrix(var.cwiseMax(0.0).cwiseSqrt() / std::sqrt(nn));
    };
    b.se_x = se(acc.sq_x, raw_x);
    b.se_xy = se(acc.sq_xy, raw_xy);
    b.error_bound = std::max(b.se_x.maxCoeff(), b.se_xy.maxCoeff());
  }
  b.i_x = 0.5 * (raw_x + raw_x.transpose());
  b.i_y_given_x = 0.5 * ((raw_xy - b.i_x) + (raw_xy - b.i_x).transpose());
  b.i_xy = b.i_x + b.i_y_given_x;
  checked_cholesky(b.i_x, "I_X: model not regular at w*");
  checked_cholesky(b.i_xy, "I_XY: model not regular at w*");
  const double floor = -1e-8 - (opt.method == FisherMethod::kMonteCarlo ? 6.0 * b.error_bound * d : 0.0);
  if (min_eigenvalue(b.i_y_given_x) < floor) {
    throw RegularityError("I_{Y|X} has a negative eigenvalue beyond round-off");
  }
  if (opt.method == FisherMethod::kMonteCarlo) {
    // Sampling noise can push a null direction slightly negative. Project
    // onto the PSD cone and absorb the shift into I_X, the noisier estimate
    // (complete-data scores often have zero-variance entries).
    Eigen::SelfAdjointEigenSolver<Matrix> es(b.i_y_given_x);
    if (es.eigenvalues().minCoeff() < 0.0) {
      const Vector lam = es.eigenvalues().cwiseMax(0.0);
      const Matrix p = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
      const Matrix xy = b.i_xy;
      b.i_y_given_x = 0.5 * (p + p.transpose());
      b.i_x = xy - b.i_y_given_x;
      b.i_xy = b.i_x + b.i_y_given_x;
      checked_cholesky(b.i_x, "I_X: model not regular at w*");
    }
  }
  return b;
}

/// I_{Y|X} with eigenvalues in [-1e-8, 0) set to zero, for reporting.
inline Matrix clamped_conditional_information(const FisherBundle& b) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(b.i_y_given_x);
  const Vector lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

// ---------------------------------------------------------------------------
// Leading-order coefficients of the error functions.

/// Tr[I_{Y|X} I_X^{-1}] / 2, shared by every ML latent-variable error.
inline double coeff_ml(const FisherBundle& b) {
  const auto llt = checked_cholesky(b.i_x, "I_X");
  return 0.5 * trace_solve(b.i_y_given_x, llt);
}

/// ln det[I_XY I_X^{-1}] / 2 for the Bayes joint (Type I) error.
inline double coeff_bayes_type1(const FisherBundle& b) {
  const auto lx = checked_cholesky(b.i_x, "I_X");
  const auto lxy = checked_cholesky(b.i_xy, "I_XY");
  return 0.5 * (log_det(lxy) - log_det(lx));
}

/// Eigenvalues of L^{-1} I_{Y|X} L^{-T} with I_X = L L^T; the spectrum of I_{Y|X} I_X^{-1}.
inline Vector relative_information_spectrum(const FisherBundle& b) {
  const auto llt = checked_cholesky(b.i_x, "I_X");
  const Matrix l = llt.matrixL();
  const Matrix half = l.triangularView<Eigen::Lower>().solve(b.i_y_given_x);
  const Matrix whitened = l.triangularView<Eigen::Lower>().solve(half.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (whitened + whitened.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

/// (1 / 2 alpha) ln det[K_XY I_X^{-1}] with K_XY = alpha I_XY + (1 - alpha) I_X.
/// Shared by the Bayes block-estimation errors (Types II' and III').
///
/// Evaluated as sum log1p(alpha lambda_i) / (2 alpha) over the relative
/// spectrum so that small alpha does not cancel.
inline double coeff_bayes_multitarget(const FisherBundle& b, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  const Vector lam = relative_information_spectrum(b);
  double s = 0.0;
  for (Eigen::Index i = 0; i < lam.size(); ++i) s += std::log1p(alpha * lam[i]);
  return s / (2.0 * alpha);
}

struct PredictionCoefficients {
  double stp = 0.0;
  double mtp = 0.0;
};

/// Single-target d/2 and multiple-target ln(1 + alpha)/alpha * d/2.
inline PredictionCoefficients coeff_predictions(int d, double alpha) {
  if (d < 1) throw std::invalid_argument("parameter dimension must be positive");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  return {0.5 * d, std::log1p(alpha) / alpha * 0.5 * d};
}

/// Every leading coefficient for one true distribution.
struct CoefficientReport {
  int d = 0;
  double c_ml = 0.0;
  double c_bayes_I = 0.0;
  double c_stp = 0.0;
  std::vector<double> alphas;
  std::vector<double> c_bayes_IIp;
  std::vector<double> c_bayes_IIIp;
  std::vector<double> c_mtp;
};

inline CoefficientReport coefficient_report(const FisherBundle& b, const std::vector<double>& alphas) {
  CoefficientReport r;
  r.d = b.dim();
  r.c_ml = coeff_ml(b);
  r.c_bayes_I = coeff_bayes_type1(b);
  r.c_stp = coeff_predictions(r.d, 1.0).stp;
  r.alphas = alphas;
  for (double a : alphas) {
    const double c = coeff_bayes_multitarget(b, a);
    r.c_bayes_IIp.push_back(c);
    r.c_bayes_IIIp.push_back(c);
    r.c_mtp.push_back(coeff_predictions(r.d, a).mtp);
  }
  return r;
}

}  // namespace latentvar

#endif  // LATENTVAR_FISHER_HPP
