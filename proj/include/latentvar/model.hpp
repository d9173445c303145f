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

#ifndef LATENTVAR_MODEL_HPP
#define LATENTVAR_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "latentvar/errors.hpp"
#include "latentvar/linalg.hpp"
#include "latentvar/random.hpp"

/**
 * \file
 * \brief Gaussian mixture with a known shared covariance, viewed as a
 * hierarchical model p(x, y | w) = p(y | w) p(x | y, w).
 *
 * Labels are 0-based throughout the library: y in {0, ..., K-1}.
 */

namespace latentvar {

/// Mixing ratios at or below this value are treated as the simplex boundary.
inline constexpr double kBoundaryFloor = 1e-8;

/// A point in the d-dimensional parameter space. Layout is fixed by the owning
/// MixtureModel: (a_0, ..., a_{K-2}, mu_0, ..., mu_{K-1}), each mu of length M,
/// with a_{K-1} = 1 - sum of the stored ratios.
struct ParamVector {
  Vector values;

  ParamVector() = default;
  explicit ParamVector(Vector v) : values(std::move(v)) {}

  Eigen::Index size() const { return values.size(); }
  double operator[](Eigen::Index i) const { return values[i]; }
  double& operator[](Eigen::Index i) { return values[i]; }
  bool operator==(const ParamVector& o) const {
    return values.size() == o.values.size() && values == o.values;
  }
};

class MixtureModel;

/// Log-density evaluator for one fixed parameter, working in whitened
/// coordinates z = L^{-1} x where sigma = L L^T.
class ComponentEvaluator {
 public:
  int components() const { return k_; }
  int dim() const { return m_; }

  /// ln p(x, y = k | w) for a whitened point z, written into out[0..K).
  void log_joint_all(const double* z, double* out) const {
    for (int k = 0; k < k_; ++k) {
      const double* mk = means_.data() + static_cast<std::ptrdiff_t>(k) * m_;
      double q = 0.0;
      for (int j = 0; j < m_; ++j) {
        const double t = z[j] - mk[j];
        q += t * t;
      }
      out[k] = offsets_[static_cast<std::size_t>(k)] - 0.5 * q;
    }
  }

  /// ln p(x | w) for a whitened point; fills out[0..K) with joints as a side effect.
  double log_marginal(const double* z, double* joint_out) const {
    log_joint_all(z, joint_out);
    if (k_ == 1) return joint_out[0];
    if (k_ == 2) return log_add_exp(joint_out[0], joint_out[1]);
    return log_sum_exp(std::span<const double>(joint_out, static_cast<std::size_t>(k_)));
  }

 private:
  friend class MixtureModel;
  int k_ = 0;
  int m_ = 0;
  std::vector<double> means_;    // whitened means, K blocks of M
  std::vector<double> offsets_;  // ln a_k + ln normalizer
};

/// Gaussian mixture sum_k a_k N(x | mu_k, sigma) with sigma fixed and known.
class MixtureModel {
 public:
  MixtureModel(int components, int dim, Matrix sigma) : k_(components), m_(dim), sigma_(std::move(sigma)) {
    if (k_ < 1) throw std::invalid_argument("mixture needs at least one component");
    if (m_ < 1) throw std::invalid_argument("observable dimension must be at least 1");
    if (sigma_.rows() != m_ || sigma_.cols() != m_) {
      throw std::invalid_argument("covariance must be M x M");
    }
    if (max_asymmetry(sigma_) > 1e-12 * std::max(1.0, sigma_.cwiseAbs().maxCoeff())) {
      throw std::invalid_argument("covariance must be symmetric");
    }
    Eigen::LLT<Matrix> llt(sigma_);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("covariance must be positive definite");
    chol_ = llt.matrixL();
    chol_inv_ = chol_.triangularView<Eigen::Lower>().solve(Matrix::Identity(m_, m_));
    sigma_inv_ = llt.solve(Matrix::Identity(m_, m_));
    log_norm_ = -0.5 * m_ * std::log(2.0 * std::numbers::pi) - 0.5 * log_det(llt);
  }

  int components() const { return k_; }
  int dim() const { return m_; }
  /// d = (K - 1) + K M.
  int param_dim() const { return (k_ - 1) + k_ * m_; }
  const Matrix& sigma() const { return sigma_; }
  const Matrix& sigma_inverse() const { return sigma_inv_; }
  const Matrix& sigma_cholesky() const { return chol_; }
  /// -(M/2) ln 2 pi - (1/2) ln det sigma.
  double log_normalizer() const { return log_norm_; }

  Eigen::Index mean_offset(int k) const { return (k_ - 1) + static_cast<Eigen::Index>(k) * m_; }

  double mixing(const ParamVector& w, int k) const {
    if (k < k_ - 1) return w[k];
    double s = 1.0;
    for (int j = 0; j < k_ - 1; ++j) s -= w[j];
    return s;
  }

  Vector mixing_ratios(const ParamVector& w) const {
    Vector a(k_);
    for (int k = 0; k < k_; ++k) a[k] = mixing(w, k);
    return a;
  }

  Vector mean(const ParamVector& w, int k) const { return w.values.segment(mean_offset(k), m_); }

  /// Builds a parameter from all K mixing ratios and a K x M matrix of means.
  ParamVector make_param(std::span<const double> ratios, const Matrix& means) const {
    if (static_cast<int>(ratios.size()) != k_) throw std::invalid_argument("expected K mixing ratios");
    if (means.rows() != k_ || means.cols() != m_) throw std::invalid_argument("means must be K x M");
    const double total = std::accumulate(ratios.begin(), ratios.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-10) throw std::invalid_argument("mixing ratios must sum to 1");
    Vector v(param_dim());
    for (int k = 0; k < k_ - 1; ++k) v[k] = ratios[static_cast<std::size_t>(k)];
    for (int k = 0; k < k_; ++k) v.segment(mean_offset(k), m_) = means.row(k).transpose();
    ParamVector w(std::move(v));
    validate(w);
    return w;
  }

  bool in_interior(const ParamVector& w) const {
    if (w.size() != param_dim()) return false;
    for (int k = 0; k < k_; ++k) {
      if (!(mixing(w, k) > kBoundaryFloor)) return false;
    }
    return w.values.allFinite();
  }

  /// Throws RegularityError unless every ratio exceeds the boundary floor.
  void validate(const ParamVector& w) const {
    if (w.size() != param_dim()) {
      throw std::invalid_argument("parameter has length " + std::to_string(w.size()) + ", expected " +
                                  std::to_string(param_dim()));
    }
    if (!w.values.allFinite()) throw RegularityError("parameter has non-finite entries");
    for (int k = 0; k < k_; ++k) {
      if (!(mixing(w, k) > kBoundaryFloor)) {
        throw RegularityError("mixing ratio " + std::to_string(k) + " is on the simplex boundary");
      }
    }
  }

  void check_label(int y) const {
    if (y < 0 || y >= k_) throw std::invalid_argument("label " + std::to_string(y) + " out of range");
  }

  /// ln a_y + ln N(x | mu_y, sigma).
  double log_joint(const ParamVector& w, const Vector& x, int y) const {
    validate(w);
    check_label(y);
    return log_joint_unchecked(w, x, y);
  }

  double log_marginal(const ParamVector& w, const Vector& x) const {
    validate(w);
    std::vector<double> lj(static_cast<std::size_t>(k_));
    for (int k = 0; k < k_; ++k) lj[static_cast<std::size_t>(k)] = log_joint_unchecked(w, x, k);
    return log_sum_exp(lj);
  }

  /// p(y | x, w) over all labels.
  Vector posterior_label(const ParamVector& w, const Vector& x) const {
    validate(w);
    Vector lj(k_);
    for (int k = 0; k < k_; ++k) lj[k] = log_joint_unchecked(w, x, k);
    const double lm = log_sum_exp(std::span<const double>(lj.data(), static_cast<std::size_t>(k_)));
    return (lj.array() - lm).exp().matrix();
  }

  Vector whiten(const Vector& x) const { return chol_inv_ * x; }
  Matrix whiten_columns(const Matrix& x) const { return chol_inv_ * x; }

  /// Evaluator for the hot loops; assumes w already validated.
  ComponentEvaluator evaluator(const ParamVector& w) const {
    ComponentEvaluator ev;
    ev.k_ = k_;
    ev.m_ = m_;
    ev.means_.resize(static_cast<std::size_t>(k_ * m_));
    ev.offsets_.resize(static_cast<std::size_t>(k_));
    for (int k = 0; k < k_; ++k) {
      const Vector zm = chol_inv_ * mean(w, k);
      for (int j = 0; j < m_; ++j) ev.means_[static_cast<std::size_t>(k * m_ + j)] = zm[j];
      ev.offsets_[static_cast<std::size_t>(k)] = std::log(mixing(w, k)) + log_norm_;
    }
    return ev;
  }

 private:
  double log_joint_unchecked(const ParamVector& w, const Vector& x, int y) const {
    const Vector z = chol_inv_ * (x - mean(w, y));
    return std::log(mixing(w, y)) + log_norm_ - 0.5 * z.squaredNorm();
  }

  int k_;
  int m_;
  Matrix sigma_;
  Matrix chol_;
  Matrix chol_inv_;
  Matrix sigma_inv_;
  double log_norm_ = 0.0;
};

/// The data-generating distribution q(x, y) = p(x, y | w*).
class TrueDistribution {
 public:
  TrueDistribution(MixtureModel model, ParamVector w_star) : model_(std::move(model)), w_star_(std::move(w_star)) {
    model_.validate(w_star_);
    for (int i = 0; i < model_.components(); ++i) {
      for (int j = i + 1; j < model_.components(); ++j) {
        if ((model_.mean(w_star_, i) - model_.mean(w_star_, j)).norm() < 1e-8) {
          throw RegularityError("true component means " + std::to_string(i) + " and " + std::to_string(j) +
                                " coincide");
        }
      }
    }
  }

  const MixtureModel& model() const { return model_; }
  const ParamVector& w_star() const { return w_star_; }

 private:
  MixtureModel model_;
  ParamVector w_star_;
};

/// Paired draws (X^n, Y^n). Observations are stored one per column (M x n).
struct LabeledDataset {
  Matrix x;
  std::vector<int> y;

  std::size_t size() const { return y.size(); }
  Vector point(std::size_t i) const { return x.col(static_cast<Eigen::Index>(i)); }
};

/// Appends n draws from the true distribution using the caller's stream.
inline LabeledDataset sample_dataset(const TrueDistribution& truth, std::size_t n, Rng& rng) {
  const auto& model = truth.model();
  const Vector a = model.mixing_ratios(truth.w_star());
  std::discrete_distribution<int> pick(a.data(), a.data() + a.size());
  std::normal_distribution<double> normal;
  LabeledDataset out;
  out.x.resize(model.dim(), static_cast<Eigen::Index>(n));
  out.y.resize(n);
  Vector z(model.dim());
  for (std::size_t i = 0; i < n; ++i) {
    const int y = model.components() == 1 ? 0 : pick(rng);
    for (int j = 0; j < model.dim(); ++j) z[j] = normal(rng);
    out.y[i] = y;
    out.x.col(static_cast<Eigen::Index>(i)) = model.mean(truth.w_star(), y) + model.sigma_cholesky() * z;
  }
  return out;
}

inline LabeledDataset sample_dataset(const TrueDistribution& truth, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample size must be at least 1");
  Rng rng(seed);
  return sample_dataset(truth, n, rng);
}

/// The K! label permutations, in lexicographic order (identity first).
class SymmetryGroup {
 public:
  explicit SymmetryGroup(int components) {
    std::vector<int> p(static_cast<std::size_t>(components));
    std::iota(p.begin(), p.end(), 0);
    do {
      perms_.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
  }

  std::size_t size() const { return perms_.size(); }
  const std::vector<int>& permutation(std::size_t i) const { return perms_.at(i); }
  const std::vector<std::vector<int>>& permutations() const { return perms_; }

  /// Relabels w so that old component k becomes component perm[k].
  static ParamVector apply(const MixtureModel& model, std::span<const int> perm, const ParamVector& w) {
    const int k_count = model.components();
    if (static_cast<int>(perm.size()) != k_count) throw std::invalid_argument("permutation size mismatch");
    Vector a_new(k_count);
    Matrix mu_new(k_count, model.dim());
    for (int k = 0; k < k_count; ++k) {
      const int to = perm[static_cast<std::size_t>(k)];
      a_new[to] = model.mixing(w, k);
      mu_new.row(to) = model.mean(w, k).transpose();
    }
    Vector v(model.param_dim());
    for (int k = 0; k < k_count - 1; ++k) v[k] = a_new[k];
    for (int k = 0; k < k_count; ++k) v.segment(model.mean_offset(k), model.dim()) = mu_new.row(k).transpose();
    return ParamVector(std::move(v));
  }

 private:
  std::vector<std::vector<int>> perms_;
};

}  // namespace latentvar

#endif  // LATENTVAR_MODEL_HPP
