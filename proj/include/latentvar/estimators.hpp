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

#ifndef LATENTVAR_ESTIMATORS_HPP
#define LATENTVAR_ESTIMATORS_HPP

#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "latentvar/em.hpp"
#include "latentvar/model.hpp"
#include "latentvar/posterior.hpp"

/**
 * \file
 * \brief Estimated probabilities of latent and observable targets.
 *
 * Both methods reduce to a weighted parameter ensemble: maximum likelihood is
 * the single point w_hat with weight one, Bayes is the importance-weighted
 * posterior sample. Every estimate is then ln sum_s W_s exp(v_s) for a
 * per-parameter log value v_s, so one code path serves both.
 */

namespace latentvar {

enum class Method { kML, kBayes };

inline std::string to_string(Method m) { return m == Method::kML ? "ML" : "Bayes"; }

/// A fitted estimator: ML point estimate or Bayes posterior sample.
class Estimator {
 public:
  static Estimator ml(const MixtureModel& model, const Matrix& x, const MLEResult& mle) {
    model.validate(mle.w_hat);
    Estimator e;
    e.method_ = Method::kML;
    auto own = std::make_shared<MlState>(MlState{model, {mle.w_hat}, {1.0}, {}});
    own->table = PointTable(model, own->point, x);
    e.ml_ = std::move(own);
    return e;
  }

  static Estimator bayes(std::shared_ptr<const PosteriorSampler> sampler) {
    if (!sampler) throw std::invalid_argument("null posterior sampler");
    Estimator e;
    e.method_ = Method::kBayes;
    e.bayes_ = std::move(sampler);
    return e;
  }

  Method method() const { return method_; }
  const MixtureModel& model() const { return ml_ ? ml_->model : bayes_->model(); }
  std::span<const ParamVector> params() const { return ml_ ? std::span(ml_->point) : std::span(bayes_->particles()); }
  std::span<const double> weights() const { return ml_ ? std::span(ml_->weight) : std::span(bayes_->weights()); }
  /// Table of the conditioning data X^n.
  const PointTable& data_table() const { return ml_ ? ml_->table : bayes_->data_table(); }
  std::size_t data_size() const { return data_table().points(); }
  bool flagged() const { return bayes_ && bayes_->flagged(); }
  PointTable tabulate(const Matrix& x) const { return PointTable(model(), params(), x); }

 private:
  struct MlState {
    MixtureModel model;
    std::vector<ParamVector> point;
    std::vector<double> weight;
    PointTable table;
  };

  Method method_ = Method::kML;
  std::shared_ptr<const MlState> ml_;
  std::shared_ptr<const PosteriorSampler> bayes_;
};

/// Probability vector over labels with per-entry standard errors.
struct LabelDistribution {
  Vector prob;
  Vector se;
};

/// Number of targets alpha * n; throws unless it is a positive integer.
inline std::size_t block_size(std::size_t n, double alpha) {
  const double raw = alpha * static_cast<double>(n);
  const double rounded = std::round(raw);
  if (!(alpha > 0.0) || std::abs(raw - rounded) > 1e-9 * std::max(1.0, raw) || rounded < 1.0) {
    throw std::invalid_argument("alpha * n = " + std::to_string(raw) + " is not a positive integer");
  }
  return static_cast<std::size_t>(rounded);
}

// ---------------------------------------------------------------------------
// Table-level primitives.

/// ln of the estimated joint probability of labels[0..count) at the first
/// `count` points of the table.
inline LogEstimate log_block_labels(const Estimator& est, const PointTable& table, std::span<const int> labels,
                                    std::size_t count) {
  if (count > table.points() || count > labels.size()) throw std::invalid_argument("block exceeds the data");
  const auto w = est.weights();
  std::vector<double> v(w.size());
  for (std::size_t s = 0; s < w.size(); ++s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < count; ++i) acc += table.log_label(s, i, labels[i]);
    v[s] = acc;
  }
  return log_weighted_mean(w, v);
}

/// ln of the estimated joint density of the first `count` points of the table.
inline LogEstimate log_block_marginal(const Estimator& est, const PointTable& table, std::size_t count) {
  if (count > table.points()) throw std::invalid_argument("block exceeds the data");
  const auto w = est.weights();
  std::vector<double> v(w.size());
  for (std::size_t s = 0; s < w.size(); ++s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < count; ++i) acc += table.log_marginal(s, i);
    v[s] = acc;
  }
  return log_weighted_mean(w, v);
}

/// Estimated p(y | ...) for the table's point i, renormalized to sum to one.
inline LabelDistribution label_distribution(const Estimator& est, const PointTable& table, std::size_t i) {
  const int kc = table.components();
  const auto w = est.weights();
  LabelDistribution out{Vector(kc), Vector(kc)};
  std::vector<double> v(w.size());
  for (int k = 0; k < kc; ++k) {
    for (std::size_t s = 0; s < w.size(); ++s) v[s] = table.log_label(s, i, k);
    const LogEstimate le = log_weighted_mean(w, v);
    out.prob[k] = std::exp(le.value);
    out.se[k] = out.prob[k] * le.se;
  }
  const double total = out.prob.sum();
  out.prob /= total;
  out.se /= total;
  return out;
}

// ---------------------------------------------------------------------------
// Latent-variable estimates.

/// Type I: ln p(Y^n | X^n) at the given assignment of every label.
inline LogEstimate estimate_type1(const Estimator& est, std::span<const int> labels) {
  if (labels.size() != est.data_size()) throw std::invalid_argument("Type I needs one label per observation");
  for (int y : labels) est.model().check_label(y);
  return log_block_labels(est, est.data_table(), labels, labels.size());
}

/// Type II: p(y_j | X^n) for an in-sample observation j (0-based).
inline LabelDistribution estimate_type2(const Estimator& est, std::size_t j) {
  if (j >= est.data_size()) throw std::invalid_argument("target index out of range");
  return label_distribution(est, est.data_table(), j);
}

/// Type III: p(y_{n+1} | X^{n+1}) for a new observation; x_new enters only
/// through the conditional, never the likelihood.
inline LabelDistribution estimate_type3(const Estimator& est, const Vector& x_new) {
  const PointTable t = est.tabulate(x_new);
  return label_distribution(est, t, 0);
}

/// Type II': ln p(Y_1 | X^n) for the first alpha n labels. alpha = 1 is the
/// Type I estimate.
inline LogEstimate estimate_type2prime(const Estimator& est, std::span<const int> labels, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("Type II' needs 0 < alpha <= 1");
  const std::size_t m = block_size(est.data_size(), alpha);
  for (std::size_t i = 0; i < m; ++i) est.model().check_label(labels[i]);
  return log_block_labels(est, est.data_table(), labels, m);
}

/// Type III': ln p(Y_2 | X^n, X_2) for alpha n new observations.
inline LogEstimate estimate_type3prime(const Estimator& est, const Matrix& x2, std::span<const int> y2,
                                       double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("Type III' needs 0 < alpha <= 1");
  const std::size_t m = block_size(est.data_size(), alpha);
  if (static_cast<std::size_t>(x2.cols()) != m || y2.size() != m) {
    throw std::invalid_argument("Type III' needs exactly alpha n new observations");
  }
  for (int y : y2) est.model().check_label(y);
  const PointTable t = est.tabulate(x2);
  return log_block_labels(est, t, y2, m);
}

// ---------------------------------------------------------------------------
// Observable predictions.

/// ln p(x_{n+1} | X^n).
inline LogEstimate predict_stp(const Estimator& est, const Vector& x_new) {
  const PointTable t = est.tabulate(x_new);
  return log_block_marginal(est, t, 1);
}

/// ln p(X_2 | X^n) for a block of new observations.
inline LogEstimate predict_mtp(const Estimator& est, const Matrix& x2) {
  const PointTable t = est.tabulate(x2);
  return log_block_marginal(est, t, t.points());
}

/// Bayes ln p(X_2 | X^n) as ln Z(X^n u X_2) - ln Z(X^n), with a second
/// sampler built around the refitted maximum-likelihood estimate.
inline LogEstimate predict_mtp_by_evidence(const MixtureModel& model, const Prior& prior, const Matrix& x,
                                           const Matrix& x2, const PosteriorSampler& base, const FisherBundle& fisher,
                                           const PosteriorOptions& opt, const EmOptions& em = {}) {
  Matrix all(x.rows(), x.cols() + x2.cols());
  all << x, x2;
  const MLEResult fit = em_fit(model, all, ParamVector(base.proposal_mean()), em);
  if (!fit.converged) throw std::runtime_error("EM did not converge on the extended data");
  const PosteriorSampler extended = build_posterior(model, prior, all, fit, fisher, opt);
  const LogEstimate a = extended.log_evidence();
  const LogEstimate b = base.log_evidence();
  return {a.value - b.value, std::hypot(a.se, b.se)};
}

// ---------------------------------------------------------------------------
// Chain-rule decomposition.

struct DecompositionResult {
  double block = 0.0;
  double sequential = 0.0;
  double residual = 0.0;
  /// Combined standard error of the two routes.
  double se = 0.0;
};

namespace detail {

/// Sequential conditionals from per-parameter increments inc[s][i].
/// ML ignores the other targets, so each conditional is the increment itself.
inline DecompositionResult decompose(const Estimator& est, const std::vector<std::vector<double>>& inc,
                                     std::size_t count) {
  const auto w = est.weights();
  DecompositionResult r;
  std::vector<double> v(w.size());
  for (std::size_t s = 0; s < w.size(); ++s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < count; ++i) acc += inc[s][i];
    v[s] = acc;
  }
  const LogEstimate block = log_weighted_mean(w, v);
  r.block = block.value;
  double var = block.se * block.se;
  if (est.method() == Method::kML) {
    double acc = 0.0;
    for (std::size_t i = 0; i < count; ++i) acc += inc[0][i];
    r.sequential = acc;
  } else {
    std::vector<double> prefix(w.size(), 0.0);
    double prev = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      for (std::size_t s = 0; s < w.size(); ++s) prefix[s] += inc[s][i];
      const LogEstimate cur = log_weighted_mean(w, prefix);
      r.sequential += cur.value - prev;
      var += cur.se * cur.se;
      prev = cur.value;
    }
  }
  r.residual = std::abs(r.block - r.sequential);
  r.se = std::sqrt(var);
  return r;
}

}  // namespace detail

/// ln p(X_2 | X^n) against sum_i ln p(x_{n+i} | X^n, x_{n+1..n+i-1}).
inline DecompositionResult decomposition_check(const Estimator& est, const Matrix& x2) {
  const PointTable t = est.tabulate(x2);
  std::vector<std::vector<double>> inc(t.samples(), std::vector<double>(t.points()));
  for (std::size_t s = 0; s < t.samples(); ++s)
    for (std::size_t i = 0; i < t.points(); ++i) inc[s][i] = t.log_marginal(s, i);
  return detail::decompose(est, inc, t.points());
}

/// ln p(Y_1 | X^n) against sum_i ln p(y_i | y_1..y_{i-1}, X^n) over the first
/// `count` in-sample labels.
inline DecompositionResult decomposition_check_labels(const Estimator& est, std::span<const int> labels,
                                                      std::size_t count) {
  const PointTable& t = est.data_table();
  if (count > t.points() || count > labels.size()) throw std::invalid_argument("block exceeds the data");
  std::vector<std::vector<double>> inc(t.samples(), std::vector<double>(count));
  for (std::size_t s = 0; s < t.samples(); ++s)
    for (std::size_t i = 0; i < count; ++i) inc[s][i] = t.log_label(s, i, labels[i]);
  return detail::decompose(est, inc, count);
}

}  // namespace latentvar

#endif  // LATENTVAR_ESTIMATORS_HPP
