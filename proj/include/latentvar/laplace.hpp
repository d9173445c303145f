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

#ifndef LATENTVAR_LAPLACE_HPP
#define LATENTVAR_LAPLACE_HPP

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "latentvar/em.hpp"
#include "latentvar/fisher.hpp"
#include "latentvar/linalg.hpp"
#include "latentvar/model.hpp"
#include "latentvar/prior.hpp"

namespace latentvar {

/// Large-sample expansion of F(n) = -ln Z(X^n), term by term.
struct LaplaceTerms {
  double neg_log_likelihood = 0.0;  ///< -sum_i ln p(x_i | w_hat)
  double half_d_log_n = 0.0;        ///< (d/2) ln n
  double neg_log_prior = 0.0;       ///< -ln phi(w_hat)
  double neg_half_d_log_2pi = 0.0;  ///< -(d/2) ln 2 pi
  double half_log_det_ix = 0.0;     ///< (1/2) ln det I_X(w*)
  double curvature = 0.0;           ///< -(1/2n) Tr[phi''(w_hat)/phi(w_hat) I_X^{-1}]

  double total() const {
    return neg_log_likelihood + half_d_log_n + neg_log_prior + neg_half_d_log_2pi + half_log_det_ix + curvature;
  }
};

inline LaplaceTerms laplace_expansion_F2(const MixtureModel& model, const Prior& prior, const Matrix& x,
                                         const MLEResult& mle, const FisherBundle& fisher) {
  if (!mle.converged) throw std::invalid_argument("expansion requires a converged maximum-likelihood fit");
  const auto n = static_cast<double>(x.cols());
  if (!(n > 0.0)) throw std::invalid_argument("expansion needs at least one observation");
  const double d = model.param_dim();
  const auto llt = checked_cholesky(fisher.i_x, "I_X");
  LaplaceTerms t;
  t.neg_log_likelihood = -log_likelihood(model, mle.w_hat, x);
  t.half_d_log_n = 0.5 * d * std::log(n);
  t.neg_log_prior = -prior.log_density(mle.w_hat);
  t.neg_half_d_log_2pi = -0.5 * d * std::log(2.0 * std::numbers::pi);
  t.half_log_det_ix = 0.5 * log_det(llt);
  t.curvature = -0.5 / n * trace_solve(prior.relative_hessian(mle.w_hat), llt);
  return t;
}

// ---------------------------------------------------------------------------
// Single-component conjugate fixture: K = 1, mean prior N(m0, diag(s0^2)).

namespace detail {
inline void require_conjugate(const MixtureModel& model) {
  if (model.components() != 1) throw std::invalid_argument("closed forms need a single-component model");
}

inline double log_normal(const Vector& x, const Vector& mean, const Matrix& cov) {
  const auto llt = checked_cholesky(cov, "normal covariance");
  const Vector z = llt.matrixL().solve(x - mean);
  return -0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) - 0.5 * log_det(llt) -
         0.5 * z.squaredNorm();
}
}  // namespace detail

struct GaussianPosterior {
  Vector mean;
  Matrix cov;
};

inline GaussianPosterior conjugate_posterior(const MixtureModel& model, const Prior& prior, const Matrix& x) {
  detail::require_conjugate(model);
  const Matrix prior_prec = prior.mean_scale().cwiseAbs2().cwiseInverse().asDiagonal();
  const Matrix prec = prior_prec + static_cast<double>(x.cols()) * model.sigma_inverse();
  const Matrix cov = prec.inverse();
  const Vector rhs = prior_prec * prior.mean_location() + model.sigma_inverse() * x.rowwise().sum();
  return {cov * rhs, 0.5 * (cov + cov.transpose())};
}

/// Exact ln Z(X^n); zero for an empty sample.
inline double conjugate_log_evidence(const MixtureModel& model, const Prior& prior, const Matrix& x) {
  detail::require_conjugate(model);
  const auto n = x.cols();
  if (n == 0) return 0.0;
  const Vector xbar = x.rowwise().mean();
  const Matrix s0 = prior.mean_scale().cwiseAbs2().asDiagonal();
  const Matrix sig_n = model.sigma() / static_cast<double>(n);
  double fit = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) fit += detail::log_normal(x.col(i), xbar, model.sigma());
  const auto llt = Eigen::LLT<Matrix>(sig_n);
  return fit + detail::log_normal(xbar, prior.mean_location(), s0 + sig_n) +
         0.5 * static_cast<double>(model.dim()) * std::log(2.0 * std::numbers::pi) + 0.5 * log_det(llt);
}

/// Exact ln p(x_new | X^n) = ln N(x_new | m_n, sigma + S_n).
inline double conjugate_log_predictive(const MixtureModel& model, const Prior& prior, const Matrix& x,
                                       const Vector& x_new) {
  const GaussianPosterior post = conjugate_posterior(model, prior, x);
  return detail::log_normal(x_new, post.mean, model.sigma() + post.cov);
}

}  // namespace latentvar

#endif  // LATENTVAR_LAPLACE_HPP
