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

#ifndef LATENTVAR_POSTERIOR_HPP
#define LATENTVAR_POSTERIOR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "latentvar/em.hpp"
#include "latentvar/fisher.hpp"
#include "latentvar/linalg.hpp"
#include "latentvar/model.hpp"
#include "latentvar/prior.hpp"
#include "latentvar/random.hpp"

namespace latentvar {

/// A log-scale estimate with its (delta-method) standard error.
struct LogEstimate {
  double value = 0.0;
  double se = 0.0;
};

/// Per-parameter, per-point log densities for a fixed set of observations.
///
/// For parameter s and point i: ln p(x_i | w_s) and ln p(y = k | x_i, w_s).
class PointTable {
 public:
  PointTable() = default;

  PointTable(const MixtureModel& model, std::span<const ParamVector> params, const Matrix& x)
      : samples_(params.size()), points_(static_cast<std::size_t>(x.cols())), k_(model.components()) {
    if (x.rows() != model.dim()) throw std::invalid_argument("point dimension does not match the model");
    const Matrix zt = model.whiten_columns(x).transpose();
    const auto np = static_cast<Eigen::Index>(points_);
    const auto kc = static_cast<std::size_t>(k_);
    label_.resize(samples_ * points_ * kc);
    marginal_.resize(samples_ * points_);
    // One column per component keeps every inner loop contiguous.
    Eigen::ArrayXXd joint(np, k_);
    // Results are staged in Eigen-owned (aligned) buffers: a Map over vector
    // storage would let heap alignment change the SIMD split and the bits.
    Eigen::ArrayXd top(np), acc(np), marg(np), lab(np);
    for (std::size_t s = 0; s < samples_; ++s) {
      const ParamVector& w = params[s];
      for (int k = 0; k < k_; ++k) {
        const Vector zm = model.whiten(model.mean(w, k));
        auto col = joint.col(k);
        col.setConstant(std::log(model.mixing(w, k)) + model.log_normalizer());
        for (int j = 0; j < model.dim(); ++j) {
          col -= 0.5 * (zt.col(j).array() - zm[j]).square();
        }
      }
      if (k_ == 1) {
        marg = joint.col(0);
      } else if (k_ == 2) {
        top = joint.col(0).max(joint.col(1));
        marg = top + (1.0 + (-(joint.col(0) - joint.col(1)).abs()).exp()).log();
      } else {
        top = joint.col(0);
        for (int k = 1; k < k_; ++k) top = top.max(joint.col(k));
        acc.setZero();
        for (int k = 0; k < k_; ++k) acc += (joint.col(k) - top).exp();
        marg = top + acc.log();
      }
      std::copy(marg.data(), marg.data() + np, marginal_.begin() + static_cast<std::ptrdiff_t>(s * points_));
      for (int k = 0; k < k_; ++k) {
        lab = joint.col(k) - marg;
        std::copy(lab.data(), lab.data() + np,
                  label_.begin() + static_cast<std::ptrdiff_t>((s * kc + static_cast<std::size_t>(k)) * points_));
      }
    }
  }

  std::size_t samples() const { return samples_; }
  std::size_t points() const { return points_; }
  int components() const { return k_; }

  /// ln p(x_i | w_s).
  double log_marginal(std::size_t s, std::size_t i) const { return marginal_[s * points_ + i]; }
  /// ln p(y = k | x_i, w_s).
  double log_label(std::size_t s, std::size_t i, int k) const {
    return label_[(s * static_cast<std::size_t>(k_) + static_cast<std::size_t>(k)) * points_ + i];
  }

 private:
  std::size_t samples_ = 0;
  std::size_t points_ = 0;
  int k_ = 0;
  std::vector<double> label_;
  std::vector<double> marginal_;
};

/// ln sum_s W_s exp(v_s) for normalized weights W, with the self-normalized
/// importance-sampling standard error propagated to log scale.
inline LogEstimate log_weighted_mean(std::span<const double> weights, std::span<const double> log_values) {
  double vmax = -std::numeric_limits<double>::infinity();
  for (double v : log_values) vmax = std::max(vmax, v);
  if (!std::isfinite(vmax)) return {vmax, 0.0};
  // Divide by the weight total so that constant values come back exactly.
  double mu = 0.0, total = 0.0;
  for (std::size_t s = 0; s < weights.size(); ++s) {
    mu += weights[s] * std::exp(log_values[s] - vmax);
    total += weights[s];
  }
  mu /= total;
  double var = 0.0;
  for (std::size_t s = 0; s < weights.size(); ++s) {
    const double dev = std::exp(log_values[s] - vmax) - mu;
    var += weights[s] * weights[s] * dev * dev;
  }
  return {vmax + std::log(mu), std::sqrt(var) / mu};
}

struct PosteriorOptions {
  std::size_t samples = 1000;
  std::uint64_t seed = 1;
  /// Multiplies the proposal covariance (n I_X)^{-1}.
  double inflation = 1.2;
  /// Draw proposal noise in +/- pairs.
  bool antithetic = true;
  /// ESS below this fraction of the draw count flags the sampler.
  double ess_floor = 0.05;
};

/// Self-normalized importance sampler for p(w | X^n) with a Gaussian proposal.
///
/// Draws that leave the open simplex have zero prior mass and are dropped
/// from the particle set but still count toward the evidence average.
class PosteriorSampler {
 public:
  PosteriorSampler(const MixtureModel& model, const Prior& prior, const Matrix& x, const Vector& proposal_mean,
                   const Matrix& proposal_cov, const PosteriorOptions& opt)
      : model_(model), n_(static_cast<std::size_t>(x.cols())), draws_(opt.samples), mean_(proposal_mean),
        cov_(proposal_cov) {
    if (opt.samples < 2) throw std::invalid_argument("posterior needs at least two draws");
    const auto d = model.param_dim();
    if (proposal_mean.size() != d || proposal_cov.rows() != d || proposal_cov.cols() != d) {
      throw std::invalid_argument("proposal has the wrong dimension");
    }
    Eigen::LLT<Matrix> llt(proposal_cov);
    if (llt.info() != Eigen::Success) throw RegularityError("proposal covariance is not positive definite");
    const Matrix chol = llt.matrixL();
    const double log_norm = -0.5 * d * std::log(2.0 * std::numbers::pi) - 0.5 * log_det(llt);

    Rng rng(opt.seed);
    std::normal_distribution<double> normal;
    std::vector<double> all_lw(opt.samples, -std::numeric_limits<double>::infinity());
    Vector z(d);
    for (std::size_t s = 0; s < opt.samples; ++s) {
      if (opt.antithetic && s % 2 == 1) {
        z = -z;
      } else {
        for (Eigen::Index j = 0; j < d; ++j) z[j] = normal(rng);
      }
      ParamVector w(proposal_mean + chol * z);
      const double lp = prior.log_density(w);
      if (!std::isfinite(lp)) continue;
      all_lw[s] = lp - (log_norm - 0.5 * z.squaredNorm());
      particles_.push_back(std::move(w));
    }
    if (particles_.empty()) throw RegularityError("no proposal draw landed inside the parameter space");

    table_ = PointTable(model, particles_, x);
    std::vector<double> lw(particles_.size());
    std::size_t p = 0;
    for (std::size_t s = 0; s < opt.samples; ++s) {
      if (!std::isfinite(all_lw[s])) continue;
      CompensatedSum ll;
      for (std::size_t i = 0; i < n_; ++i) ll.add(table_.log_marginal(p, i));
      all_lw[s] += ll.value();
      lw[p] = all_lw[s];
      ++p;
    }
    log_weights_ = lw;

    // Evidence: log-mean-exp over every draw, zeros included.
    const double lmax = *std::max_element(lw.begin(), lw.end());
    double sum = 0.0, sum_sq = 0.0;
    for (double v : lw) {
      const double e = std::exp(v - lmax);
      sum += e;
      sum_sq += e * e;
    }
    const double count = static_cast<double>(opt.samples);
    const double mean = sum / count;
    const double var = std::max(0.0, sum_sq / count - mean * mean) * count / (count - 1.0);
    log_evidence_ = {lmax + std::log(mean), std::sqrt(var / count) / mean};

    weights_.resize(lw.size());
    for (std::size_t s = 0; s < lw.size(); ++s) weights_[s] = std::exp(lw[s] - lmax) / sum;
    double sq = 0.0;
    for (double w : weights_) sq += w * w;
    ess_ = 1.0 / sq;
    flagged_ = ess_ < opt.ess_floor * count;
  }

  const MixtureModel& model() const { return model_; }
  std::size_t data_size() const { return n_; }
  std::size_t draws() const { return draws_; }
  const std::vector<ParamVector>& particles() const { return particles_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& log_weights() const { return log_weights_; }
  const Vector& proposal_mean() const { return mean_; }
  const Matrix& proposal_cov() const { return cov_; }
  double ess() const { return ess_; }
  /// ESS fell below the floor: "posterior approximation unreliable".
  bool flagged() const { return flagged_; }
  /// Importance estimate of ln Z(X^n).
  LogEstimate log_evidence() const { return log_evidence_; }
  /// Table of the conditioning data X^n over the particles.
  const PointTable& data_table() const { return table_; }

  /// Self-normalized posterior mean of w with per-coordinate standard errors.
  std::pair<Vector, Vector> posterior_mean() const {
    const auto d = model_.param_dim();
    Vector m = Vector::Zero(d);
    for (std::size_t s = 0; s < particles_.size(); ++s) m += weights_[s] * particles_[s].values;
    Vector var = Vector::Zero(d);
    for (std::size_t s = 0; s < particles_.size(); ++s) {
      var += (weights_[s] * weights_[s]) * (particles_[s].values - m).cwiseAbs2();
    }
    return {m, var.cwiseSqrt()};
  }

  /// Weighted posterior covariance.
  Matrix posterior_cov() const {
    const Vector m = posterior_mean().first;
    Matrix c = Matrix::Zero(m.size(), m.size());
    for (std::size_t s = 0; s < particles_.size(); ++s) {
      const Vector dv = particles_[s].values - m;
      c += weights_[s] * dv * dv.transpose();
    }
    return c;
  }

 private:
  MixtureModel model_;
  std::size_t n_;
  std::size_t draws_;
  Vector mean_;
  Matrix cov_;
  std::vector<ParamVector> particles_;
  std::vector<double> log_weights_;
  std::vector<double> weights_;
  PointTable table_;
  double ess_ = 0.0;
  bool flagged_ = false;
  LogEstimate log_evidence_;
};

/// Laplace-proposal sampler: N(w_hat, inflation * (n I_X(w*))^{-1}).
inline PosteriorSampler build_posterior(const MixtureModel& model, const Prior& prior, const Matrix& x,
                                        const MLEResult& mle, const FisherBundle& fisher,
                                        const PosteriorOptions& opt = {}) {
  if (!mle.converged) throw std::invalid_argument("posterior requires a converged maximum-likelihood fit");
  const auto n = static_cast<double>(x.cols());
  const auto llt = checked_cholesky(fisher.i_x, "I_X");
  const Matrix inv = llt.solve(Matrix::Identity(fisher.dim(), fisher.dim()));
  const Matrix cov = opt.inflation / n * 0.5 * (inv + inv.transpose());
  return PosteriorSampler(model, prior, x, mle.w_hat.values, cov, opt);
}

/// ln Z(X^n) from the importance identity. ln Z of an empty sample is 0.
inline LogEstimate log_marginal_likelihood(const PosteriorSampler& sampler) {
  if (sampler.data_size() == 0) return {0.0, 0.0};
  return sampler.log_evidence();
}

}  // namespace latentvar

#endif  // LATENTVAR_POSTERIOR_HPP
