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

#ifndef LATENTVAR_EM_HPP
#define LATENTVAR_EM_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "latentvar/errors.hpp"
#include "latentvar/linalg.hpp"
#include "latentvar/model.hpp"

namespace latentvar {

struct MLEResult {
  ParamVector w_hat;
  double log_likelihood = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  /// A mixing ratio collapsed to the simplex boundary during the fit.
  bool boundary = false;
  /// Log-likelihood after each iteration (entry 0 is the initial value).
  std::vector<double> trace;
};

struct EmOptions {
  double tol = 1e-10;
  int max_iter = 500;
  bool keep_trace = false;
};

/// sum_i ln p(x_i | w) for observations stored one per column.
inline double log_likelihood(const MixtureModel& model, const ParamVector& w, const Matrix& x) {
  model.validate(w);
  const Matrix z = model.whiten_columns(x);
  const ComponentEvaluator ev = model.evaluator(w);
  std::vector<double> buf(static_cast<std::size_t>(model.components()));
  double s = 0.0;
  for (Eigen::Index i = 0; i < z.cols(); ++i) s += ev.log_marginal(z.col(i).data(), buf.data());
  return s;
}

/// Maximum likelihood by expectation-maximization with known shared covariance.
///
/// Iterates until the relative log-likelihood gain drops below opt.tol or
/// opt.max_iter is hit. Non-convergence and boundary collapse are reported in
/// the result, not thrown.
inline MLEResult em_fit(const MixtureModel& model, const Matrix& x, const ParamVector& init, const EmOptions& opt = {}) {
  const auto n = x.cols();
  const int kc = model.components();
  const int m = model.dim();
  if (x.rows() != m) throw std::invalid_argument("data dimension does not match the model");
  if (n < model.param_dim()) {
    throw InsufficientDataError("EM needs at least d = " + std::to_string(model.param_dim()) + " observations");
  }
  model.validate(init);

  const Matrix z = model.whiten_columns(x);
  MLEResult res;
  res.w_hat = init;
  Matrix resp(kc, n);
  std::vector<double> lj(static_cast<std::size_t>(kc));

  auto e_step = [&](const ParamVector& w) {
    const ComponentEvaluator ev = model.evaluator(w);
    CompensatedSum ll;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double lm = ev.log_marginal(z.col(i).data(), lj.data());
      ll.add(lm);
      for (int k = 0; k < kc; ++k) resp(k, i) = std::exp(lj[static_cast<std::size_t>(k)] - lm);
    }
    return ll.value();
  };

  double ll = e_step(res.w_hat);
  if (opt.keep_trace) res.trace.push_back(ll);
  for (int it = 1; it <= opt.max_iter; ++it) {
    Vector v(model.param_dim());
    const Vector counts = resp.rowwise().sum();
    for (int k = 0; k < kc - 1; ++k) v[k] = counts[k] / static_cast<double>(n);
    for (int k = 0; k < kc; ++k) {
      if (counts[k] / static_cast<double>(n) <= kBoundaryFloor) {
        res.boundary = true;
        res.iterations = it;
        res.log_likelihood = ll;
        return res;
      }
      v.segment(model.mean_offset(k), m) = (x * resp.row(k).transpose()) / counts[k];
    }
    ParamVector next(std::move(v));
    if (!model.in_interior(next)) {
      res.boundary = true;
      res.iterations = it;
      res.log_likelihood = ll;
      return res;
    }
    const double ll_next = e_step(next);
    res.w_hat = std::move(next);
    res.iterations = it;
    if (opt.keep_trace) res.trace.push_back(ll_next);
    const double gain = ll_next - ll;
    ll = ll_next;
    // K = 1 reaches the closed form in one step.
    if (kc == 1 || std::abs(gain) < opt.tol * std::max(1.0, std::abs(ll))) {
      res.converged = true;
      break;
    }
  }
  res.log_likelihood = ll;
  return res;
}

/// Best of `restarts` EM runs from random starts: means at distinct random
/// observations, ratios uniform. Boundary runs are skipped; throws
/// RegularityError if every run collapses.
inline MLEResult em_fit_restarts(const MixtureModel& model, const Matrix& x, int restarts, std::uint64_t seed,
                                 const EmOptions& opt = {}) {
  if (restarts < 1) throw std::invalid_argument("need at least one restart");
  const int kc = model.components();
  const auto n = x.cols();
  if (n < kc) throw InsufficientDataError("fewer observations than components");
  Rng rng(seed);
  MLEResult best;
  bool found = false;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  for (int r = 0; r < restarts; ++r) {
    std::shuffle(idx.begin(), idx.end(), rng);
    Matrix mu(kc, model.dim());
    for (int k = 0; k < kc; ++k) mu.row(k) = x.col(idx[static_cast<std::size_t>(k)]).transpose();
    const std::vector<double> a(static_cast<std::size_t>(kc), 1.0 / kc);
    std::vector<double> ratios = a;
    ratios.back() = 1.0 - std::accumulate(a.begin(), a.end() - 1, 0.0);
    MLEResult fit = em_fit(model, x, model.make_param(ratios, mu), opt);
    if (fit.boundary) continue;
    if (!found || fit.log_likelihood > best.log_likelihood) {
      best = std::move(fit);
      found = true;
    }
  }
  if (!found) throw RegularityError("every EM restart collapsed to the simplex boundary");
  return best;
}

/// Relabels the estimate to the symmetric image nearest w* (Euclidean);
/// ties go to the lexicographically first permutation.
inline MLEResult align_mle(const MLEResult& result, const TrueDistribution& truth, const SymmetryGroup& group) {
  const auto& model = truth.model();
  MLEResult out = result;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& perm : group.permutations()) {
    ParamVector cand = SymmetryGroup::apply(model, perm, result.w_hat);
    const double dist = (cand.values - truth.w_star().values).norm();
    if (dist < best) {
      best = dist;
      out.w_hat = std::move(cand);
    }
  }
  return out;
}

}  // namespace latentvar

#endif  // LATENTVAR_EM_HPP
