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

#ifndef LATENTVAR_MONTECARLO_HPP
#define LATENTVAR_MONTECARLO_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "latentvar/em.hpp"
#include "latentvar/errors.hpp"
#include "latentvar/estimators.hpp"
#include "latentvar/fisher.hpp"
#include "latentvar/gauss_hermite.hpp"
#include "latentvar/model.hpp"
#include "latentvar/posterior.hpp"
#include "latentvar/prior.hpp"
#include "latentvar/random.hpp"

namespace latentvar {

enum class Target { kI, kII, kIII, kIIprime, kIIIprime, kSTP, kMTP };

inline constexpr Target kAllTargets[] = {Target::kI,        Target::kII,  Target::kIII, Target::kIIprime,
                                         Target::kIIIprime, Target::kSTP, Target::kMTP};

inline std::string to_string(Target t) {
  switch (t) {
    case Target::kI: return "I";
    case Target::kII: return "II";
    case Target::kIII: return "III";
    case Target::kIIprime: return "IIprime";
    case Target::kIIIprime: return "IIIprime";
    case Target::kSTP: return "STP";
    case Target::kMTP: return "MTP";
  }
  return "?";
}

inline std::optional<Target> parse_target(std::string_view s) {
  for (Target t : kAllTargets) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

/// Targets indexed by a block fraction alpha.
inline bool is_block(Target t) { return t == Target::kIIprime || t == Target::kIIIprime || t == Target::kMTP; }

/// Latent-variable targets (KL between label distributions).
inline bool is_latent(Target t) { return t != Target::kSTP && t != Target::kMTP; }

/// Which estimate a row describes. kPairedDiff is the per-replication
/// difference Bayes - ML on shared data.
enum class Series { kML, kBayes, kPairedDiff };

inline std::string to_string(Series s) {
  switch (s) {
    case Series::kML: return "ML";
    case Series::kBayes: return "Bayes";
    case Series::kPairedDiff: return "Bayes-ML";
  }
  return "?";
}

inline std::optional<Series> parse_series(std::string_view s) {
  for (Series v : {Series::kML, Series::kBayes, Series::kPairedDiff}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

/// Monte Carlo estimate of one error function at one n, in nats.
struct ErrorEstimate {
  Target target = Target::kI;
  Series method = Series::kML;
  std::size_t n = 0;
  std::optional<double> alpha;
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t reps = 0;
  /// Replications with an ESS-flagged posterior or an unconverged fit.
  std::size_t flags = 0;
  std::uint64_t seed = 0;

  bool valid() const { return std::isfinite(mean) && static_cast<double>(flags) <= 0.05 * static_cast<double>(reps); }
};

/// One (target, alpha) combination evaluated by the engine; alpha is ignored
/// for single targets.
struct Cell {
  Target target = Target::kI;
  double alpha = 0.0;

  bool operator<(const Cell& o) const {
    return target != o.target ? target < o.target : alpha < o.alpha;
  }
};

struct SimulationSettings {
  std::size_t reps = 10000;
  std::uint64_t seed = 1;
  PosteriorOptions posterior{};
  EmOptions em{1e-12, 1000, false};
  /// Gauss-Hermite nodes per dimension for the STP integral over x_{n+1}.
  int stp_nodes = 48;
  int threads = 1;
  bool ml = true;
  bool bayes = true;
};

/// Per-replication contributions for every requested cell.
struct ReplicationValues {
  std::vector<double> ml;
  std::vector<double> bayes;
  bool flagged = false;
  bool dropped = false;
};

namespace detail {

inline double label_kl(const Vector& q, const Vector& p) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < q.size(); ++k) {
    if (q[k] > 0.0) s += q[k] * (std::log(q[k]) - std::log(p[k]));
  }
  return s;
}

/// Nodes and weights for E_q[f(x)] under the true marginal of x.
struct MarginalRule {
  Matrix nodes;
  std::vector<double> weights;
};

inline MarginalRule marginal_rule(const TrueDistribution& truth, int per_dim) {
  const auto& model = truth.model();
  const TensorRule base = tensor_gauss_hermite(per_dim, model.dim());
  const Vector a = model.mixing_ratios(truth.w_star());
  const auto g = base.nodes.cols();
  MarginalRule r;
  r.nodes.resize(model.dim(), g * model.components());
  for (int k = 0; k < model.components(); ++k) {
    const Vector mu = model.mean(truth.w_star(), k);
    for (Eigen::Index c = 0; c < g; ++c) {
      r.nodes.col(k * g + c) = mu + model.sigma_cholesky() * base.nodes.col(c);
      r.weights.push_back(a[k] * base.weights[static_cast<std::size_t>(c)]);
    }
  }
  return r;
}

class ReplicationEngine {
 public:
  ReplicationEngine(const TrueDistribution& truth, const Prior& prior, const FisherBundle& fisher,
                    std::vector<Cell> cells, std::size_t n, const SimulationSettings& settings)
      : truth_(truth), prior_(prior), fisher_(fisher), cells_(std::move(cells)), n_(n), s_(settings),
        group_(truth.model().components()) {
    for (const Cell& c : cells_) {
      if (is_block(c.target)) {
        const std::size_t m = block_size(n_, c.alpha);
        if (c.target == Target::kIIprime && m > n_) throw std::invalid_argument("Type II' block exceeds n");
        if (c.target != Target::kIIprime) x2_size_ = std::max(x2_size_, m);
      }
      if (c.target == Target::kIII) need_new_ = true;
      if (c.target == Target::kSTP) {
        if (truth.model().dim() <= 2) {
          need_rule_ = true;
        } else {
          need_new_ = true;
        }
      }
    }
    if (need_rule_) rule_ = marginal_rule(truth, s_.stp_nodes);
  }

  ReplicationValues run(std::size_t rep) const {
    const auto& model = truth_.model();
    const std::uint64_t seed = s_.seed;
    const auto nn = static_cast<std::uint64_t>(n_);
    const auto rr = static_cast<std::uint64_t>(rep);
    ReplicationValues out;
    out.ml.assign(cells_.size(), std::numeric_limits<double>::quiet_NaN());
    out.bayes.assign(cells_.size(), std::numeric_limits<double>::quiet_NaN());

    Rng data_rng = make_stream(seed, "data", {nn, rr});
    const LabeledDataset data = sample_dataset(truth_, n_, data_rng);
    LabeledDataset x2;
    if (x2_size_ > 0) {
      Rng rng = make_stream(seed, "x2", {nn, rr});
      x2 = sample_dataset(truth_, x2_size_, rng);
    }
    LabeledDataset fresh;
    if (need_new_) {
      Rng rng = make_stream(seed, "new", {nn, rr});
      fresh = sample_dataset(truth_, 1, rng);
    }
    Rng j_rng = make_stream(seed, "target-index", {nn, rr});
    const std::size_t j = std::uniform_int_distribution<std::size_t>(0, n_ - 1)(j_rng);

    MLEResult fit = em_fit(model, data.x, truth_.w_star(), s_.em);
    if (fit.boundary) {
      out.dropped = out.flagged = true;
      return out;
    }
    fit = align_mle(fit, truth_, group_);
    if (!fit.converged) out.flagged = true;

    const std::vector<ParamVector> star{truth_.w_star()};
    const PointTable q_data(model, star, data.x);
    PointTable q_x2, q_new;
    if (x2_size_ > 0) q_x2 = PointTable(model, star, x2.x);
    if (need_new_) q_new = PointTable(model, star, fresh.x);
    std::vector<double> q_rule;
    if (need_rule_) {
      const PointTable t(model, star, rule_.nodes);
      for (std::size_t g = 0; g < t.points(); ++g) q_rule.push_back(t.log_marginal(0, g));
    }

    auto evaluate = [&](const Estimator& est, std::vector<double>& dst) {
      PointTable t_x2, t_new, t_rule;
      if (x2_size_ > 0) t_x2 = est.tabulate(x2.x);
      if (need_new_) t_new = est.tabulate(fresh.x);
      if (need_rule_) t_rule = est.tabulate(rule_.nodes);
      for (std::size_t c = 0; c < cells_.size(); ++c) {
        const Cell& cell = cells_[c];
        switch (cell.target) {
          case Target::kI:
          case Target::kIIprime: {
            const std::size_t m = cell.target == Target::kI ? n_ : block_size(n_, cell.alpha);
            const double lq = log_block_labels_truth(q_data, data.y, m);
            dst[c] = (lq - log_block_labels(est, est.data_table(), data.y, m).value) / static_cast<double>(m);
            break;
          }
          case Target::kII:
            dst[c] = label_kl(truth_labels(q_data, j), label_distribution(est, est.data_table(), j).prob);
            break;
          case Target::kIII:
            dst[c] = label_kl(truth_labels(q_new, 0), label_distribution(est, t_new, 0).prob);
            break;
          case Target::kIIIprime: {
            const std::size_t m = block_size(n_, cell.alpha);
            const double lq = log_block_labels_truth(q_x2, x2.y, m);
            dst[c] = (lq - log_block_labels(est, t_x2, x2.y, m).value) / static_cast<double>(m);
            break;
          }
          case Target::kSTP:
            if (need_rule_) {
              CompensatedSum kl;
              const auto w = est.weights();
              std::vector<double> v(w.size());
              for (std::size_t g = 0; g < t_rule.points(); ++g) {
                for (std::size_t s = 0; s < w.size(); ++s) v[s] = t_rule.log_marginal(s, g);
                kl.add(rule_.weights[g] * (q_rule[g] - log_weighted_mean(w, v).value));
              }
              dst[c] = kl.value();
            } else {
              dst[c] = q_new.log_marginal(0, 0) - log_block_marginal(est, t_new, 1).value;
            }
            break;
          case Target::kMTP: {
            const std::size_t m = block_size(n_, cell.alpha);
            double lq = 0.0;
            for (std::size_t i = 0; i < m; ++i) lq += q_x2.log_marginal(0, i);
            dst[c] = (lq - log_block_marginal(est, t_x2, m).value) / static_cast<double>(m);
            break;
          }
        }
      }
    };

    if (s_.ml) evaluate(Estimator::ml(model, data.x, fit), out.ml);
    if (s_.bayes) {
      PosteriorOptions po = s_.posterior;
      po.seed = stream_seed(seed, "posterior", {nn, rr});
      const auto llt = checked_cholesky(fisher_.i_x, "I_X");
      const Matrix inv = llt.solve(Matrix::Identity(fisher_.dim(), fisher_.dim()));
      const Matrix cov = po.inflation / static_cast<double>(n_) * 0.5 * (inv + inv.transpose());
      auto sampler = std::make_shared<const PosteriorSampler>(model, prior_, data.x, fit.w_hat.values, cov, po);
      if (sampler->flagged()) out.flagged = true;
      evaluate(Estimator::bayes(std::move(sampler)), out.bayes);
    }
    return out;
  }

 private:
  static double log_block_labels_truth(const PointTable& q, const std::vector<int>& y, std::size_t m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += q.log_label(0, i, y[i]);
    return s;
  }

  static Vector truth_labels(const PointTable& q, std::size_t i) {
    Vector p(q.components());
    for (int k = 0; k < q.components(); ++k) p[k] = std::exp(q.log_label(0, i, k));
    return p;
  }

  const TrueDistribution& truth_;
  const Prior& prior_;
  const FisherBundle& fisher_;
  std::vector<Cell> cells_;
  std::size_t n_;
  SimulationSettings s_;
  SymmetryGroup group_;
  std::size_t x2_size_ = 0;
  bool need_new_ = false;
  bool need_rule_ = false;
  MarginalRule rule_;
};

}  // namespace detail

/// Runs settings.reps replications at sample size n; results are indexed by
/// replication and do not depend on settings.threads.
inline std::vector<ReplicationValues> run_replications(const TrueDistribution& truth, const Prior& prior,
                                                       const FisherBundle& fisher, const std::vector<Cell>& cells,
                                                       std::size_t n, const SimulationSettings& settings) {
  if (n < static_cast<std::size_t>(truth.model().param_dim())) {
    throw InsufficientDataError("n must be at least the parameter dimension");
  }
  const detail::ReplicationEngine engine(truth, prior, fisher, cells, n, settings);
  std::vector<ReplicationValues> results(settings.reps);
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t r = begin; r < settings.reps; r += stride) results[r] = engine.run(r);
  };
  const auto workers = static_cast<std::size_t>(std::max(1, settings.threads));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work, t, workers);
  }
  return results;
}

/// Mean and standard error over replications, summed in replication order.
inline ErrorEstimate summarize(const std::vector<ReplicationValues>& reps, std::size_t cell, Series series) {
  ErrorEstimate e;
  e.method = series;
  CompensatedSum sum;
  std::size_t count = 0;
  for (const auto& r : reps) {
    if (r.flagged) ++e.flags;
    if (r.dropped) continue;
    const double v = series == Series::kML      ? r.ml[cell]
                     : series == Series::kBayes ? r.bayes[cell]
                                                : r.bayes[cell] - r.ml[cell];
    sum.add(v);
    ++count;
  }
  e.reps = count;
  e.mean = count > 0 ? sum.value() / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
  CompensatedSum sq;
  for (const auto& r : reps) {
    if (r.dropped) continue;
    const double v = series == Series::kML      ? r.ml[cell]
                     : series == Series::kBayes ? r.bayes[cell]
                                                : r.bayes[cell] - r.ml[cell];
    sq.add((v - e.mean) * (v - e.mean));
  }
  e.std_error = count > 1 ? std::sqrt(sq.value() / static_cast<double>(count - 1) / static_cast<double>(count))
                        : std::numeric_limits<double>::quiet_NaN();
  return e;
}

/// Estimates every requested cell for each series at one n.
inline std::vector<ErrorEstimate> estimate_cells(const TrueDistribution& truth, const Prior& prior,
                                                 const FisherBundle& fisher, const std::vector<Cell>& cells,
                                                 const std::vector<Series>& series, std::size_t n,
                                                 SimulationSettings settings) {
  if (settings.reps < 100) throw std::invalid_argument("at least 100 replications are required");
  settings.ml = false;
  settings.bayes = false;
  for (Series s : series) {
    if (s != Series::kBayes) settings.ml = true;
    if (s != Series::kML) settings.bayes = true;
  }
  const auto reps = run_replications(truth, prior, fisher, cells, n, settings);
  std::vector<ErrorEstimate> out;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (Series s : series) {
      ErrorEstimate e = summarize(reps, c, s);
      e.target = cells[c].target;
      e.n = n;
      if (is_block(cells[c].target)) e.alpha = cells[c].alpha;
      e.seed = settings.seed;
      out.push_back(e);
    }
  }
  return out;
}

/// D(n) for one target and method.
inline ErrorEstimate estimate_error(Target target, Method method, const TrueDistribution& truth, const Prior& prior,
                                    const FisherBundle& fisher, std::size_t n, std::size_t reps,
                                    std::optional<double> alpha, std::uint64_t seed,
                                    SimulationSettings settings = {}) {
  if (is_block(target) && !alpha) throw std::invalid_argument(to_string(target) + " needs alpha");
  settings.reps = reps;
  settings.seed = seed;
  const Cell cell{target, is_block(target) ? *alpha : 0.0};
  const Series s = method == Method::kML ? Series::kML : Series::kBayes;
  return estimate_cells(truth, prior, fisher, {cell}, {s}, n, settings).front();
}

// ---------------------------------------------------------------------------
// Leading-coefficient extraction.

struct CoefficientFit {
  double c_hat = 0.0;
  double c_se = 0.0;
  /// Next-order term b in n D(n) = c + b / n.
  double b_hat = 0.0;
  double b_se = 0.0;
  std::vector<std::size_t> n_grid;
  /// Standardized residuals of n D(n) at each grid point.
  std::vector<double> residuals;
  double chi2 = 0.0;
};

/// Weighted least squares of n D(n) on c + b / n with weights 1 / (n stderr)^2.
///
/// When any standard error is zero the fit falls back to ordinary least
/// squares with residual-based errors (exact synthetic input gives c_se = 0).
inline CoefficientFit fit_leading_coefficient(const std::vector<ErrorEstimate>& estimates) {
  if (estimates.size() < 3) throw InsufficientDataError("coefficient fit needs at least three grid points");
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    for (std::size_t k = i + 1; k < estimates.size(); ++k) {
      if (estimates[i].n == estimates[k].n) throw std::invalid_argument("grid values of n must be distinct");
    }
  }
  const auto m = static_cast<Eigen::Index>(estimates.size());
  Matrix x(m, 2);
  Vector y(m), sd(m);
  bool weighted = true;
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& e = estimates[static_cast<std::size_t>(i)];
    const double n = static_cast<double>(e.n);
    x(i, 0) = 1.0;
    x(i, 1) = 1.0 / n;
    y[i] = n * e.mean;
    sd[i] = n * e.std_error;
    if (!(sd[i] > 0.0)) weighted = false;
  }
  const Vector w = weighted ? Vector(sd.cwiseAbs2().cwiseInverse()) : Vector(Vector::Ones(m));
  const Matrix xtwx = x.transpose() * w.asDiagonal() * x;
  const Matrix cov_unit = xtwx.inverse();
  const Vector beta = cov_unit * (x.transpose() * w.asDiagonal() * y);
  const Vector resid = y - x * beta;
  CoefficientFit f;
  f.c_hat = beta[0];
  f.b_hat = beta[1];
  Matrix cov = cov_unit;
  if (!weighted) {
    const double dof = static_cast<double>(m - 2);
    const double s2 = dof > 0 ? resid.squaredNorm() / dof : 0.0;
    cov *= s2;
  }
  f.c_se = std::sqrt(std::max(0.0, cov(0, 0)));
  f.b_se = std::sqrt(std::max(0.0, cov(1, 1)));
  for (Eigen::Index i = 0; i < m; ++i) {
    f.n_grid.push_back(estimates[static_cast<std::size_t>(i)].n);
    const double r = weighted ? resid[i] / sd[i] : resid[i];
    f.residuals.push_back(r);
    f.chi2 += r * r;
  }
  return f;
}

// ---------------------------------------------------------------------------
// Method comparison.

enum class Verdict { kEquivalent, kBayesBetter, kMlBetter };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::kEquivalent: return "equivalent";
    case Verdict::kBayesBetter: return "bayes-better";
    case Verdict::kMlBetter: return "ml-better";
  }
  return "?";
}

/// The asymptotic ordering: Bayes wins only for multi-target estimation.
inline Verdict expected_verdict(Target t) {
  return (t == Target::kII || t == Target::kIII || t == Target::kSTP) ? Verdict::kEquivalent : Verdict::kBayesBetter;
}

struct VerdictRecord {
  Target target = Target::kI;
  std::optional<double> alpha;
  /// Fitted constant of n (D_Bayes - D_ML) and its standard error.
  double gap = 0.0;
  double gap_se = 0.0;
  bool paired = false;
  Verdict verdict = Verdict::kEquivalent;
  Verdict expected = Verdict::kEquivalent;
  bool matches() const { return verdict == expected; }
};

inline Verdict classify_gap(double gap, double se) {
  if (std::abs(gap) <= 3.0 * se) return Verdict::kEquivalent;
  return gap < 0.0 ? Verdict::kBayesBetter : Verdict::kMlBetter;
}

/// Compares methods from a paired-difference sweep (preferred) or, when that
/// is empty, from independent ML and Bayes sweeps with combined errors.
inline VerdictRecord compare_methods(Target target, const std::vector<ErrorEstimate>& ml,
                                     const std::vector<ErrorEstimate>& bayes,
                                     const std::vector<ErrorEstimate>& paired = {}) {
  VerdictRecord v;
  v.target = target;
  v.expected = expected_verdict(target);
  const auto& any = !paired.empty() ? paired : ml;
  if (!any.empty()) v.alpha = any.front().alpha;
  if (!paired.empty()) {
    const CoefficientFit f = fit_leading_coefficient(paired);
    v.gap = f.c_hat;
    v.gap_se = f.c_se;
    v.paired = true;
  } else {
    if (ml.size() != bayes.size()) throw std::invalid_argument("ML and Bayes sweeps differ in length");
    std::vector<ErrorEstimate> diff;
    for (std::size_t i = 0; i < ml.size(); ++i) {
      if (ml[i].n != bayes[i].n) throw std::invalid_argument("ML and Bayes sweeps use different grids");
      ErrorEstimate e = ml[i];
      e.method = Series::kPairedDiff;
      e.mean = bayes[i].mean - ml[i].mean;
      e.std_error = std::hypot(bayes[i].std_error, ml[i].std_error);
      diff.push_back(e);
    }
    const CoefficientFit f = fit_leading_coefficient(diff);
    v.gap = f.c_hat;
    v.gap_se = f.c_se;
  }
  v.verdict = classify_gap(v.gap, v.gap_se);
  return v;
}

}  // namespace latentvar

#endif  // LATENTVAR_MONTECARLO_HPP
