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

#ifndef LATENTVAR_PRIOR_HPP
#define LATENTVAR_PRIOR_HPP

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "latentvar/linalg.hpp"
#include "latentvar/model.hpp"

namespace latentvar {

/// Dirichlet(eta) on the mixing ratios times independent Gaussians on every
/// mean coordinate. The density is taken with respect to Lebesgue measure on
/// the stored coordinates (a_0..a_{K-2}, means).
class Prior {
 public:
  /// Uniform Dirichlet and N(0, 10^2) means.
  static Prior standard(const MixtureModel& model) { return Prior(model, 1.0, 0.0, 10.0); }

  Prior(const MixtureModel& model, double concentration, double mean_location, double mean_scale)
      : Prior(model, Vector::Constant(model.components(), concentration),
              Vector::Constant(model.components() * model.dim(), mean_location),
              Vector::Constant(model.components() * model.dim(), mean_scale)) {}

  Prior(const MixtureModel& model, Vector concentration, Vector mean_location, Vector mean_scale)
      : k_(model.components()),
        m_(model.dim()),
        eta_(std::move(concentration)),
        loc_(std::move(mean_location)),
        scale_(std::move(mean_scale)) {
    if (eta_.size() != k_ || loc_.size() != k_ * m_ || scale_.size() != k_ * m_) {
      throw std::invalid_argument("prior hyperparameter sizes do not match the model");
    }
    if ((eta_.array() <= 0.0).any() || (scale_.array() <= 0.0).any()) {
      throw std::invalid_argument("prior concentration and scales must be positive");
    }
    log_const_ = std::lgamma(eta_.sum());
    for (Eigen::Index k = 0; k < k_; ++k) log_const_ -= std::lgamma(eta_[k]);
    for (Eigen::Index i = 0; i < scale_.size(); ++i) {
      log_const_ -= 0.5 * std::log(2.0 * std::numbers::pi) + std::log(scale_[i]);
    }
  }

  const Vector& concentration() const { return eta_; }
  const Vector& mean_location() const { return loc_; }
  const Vector& mean_scale() const { return scale_; }

  /// ln phi(w); -inf outside the open simplex.
  double log_density(const ParamVector& w) const {
    double last = 1.0;
    double s = log_const_;
    for (int k = 0; k < k_ - 1; ++k) {
      if (!(w[k] > 0.0)) return -std::numeric_limits<double>::infinity();
      last -= w[k];
      s += (eta_[k] - 1.0) * std::log(w[k]);
    }
    if (!(last > 0.0)) return -std::numeric_limits<double>::infinity();
    s += (eta_[k_ - 1] - 1.0) * std::log(last);
    for (Eigen::Index i = 0; i < loc_.size(); ++i) {
      const double z = (w[(k_ - 1) + i] - loc_[i]) / scale_[i];
      s -= 0.5 * z * z;
    }
    return s;
  }

  Vector gradient_log(const ParamVector& w) const {
    Vector g = Vector::Zero(w.size());
    const double last = last_ratio(w);
    for (int k = 0; k < k_ - 1; ++k) g[k] = (eta_[k] - 1.0) / w[k] - (eta_[k_ - 1] - 1.0) / last;
    for (Eigen::Index i = 0; i < loc_.size(); ++i) {
      g[(k_ - 1) + i] = -(w[(k_ - 1) + i] - loc_[i]) / (scale_[i] * scale_[i]);
    }
    return g;
  }

  Matrix hessian_log(const ParamVector& w) const {
    Matrix h = Matrix::Zero(w.size(), w.size());
    const double last = last_ratio(w);
    for (int i = 0; i < k_ - 1; ++i) {
      for (int j = 0; j < k_ - 1; ++j) {
        h(i, j) = -(eta_[k_ - 1] - 1.0) / (last * last);
      }
      h(i, i) -= (eta_[i] - 1.0) / (w[i] * w[i]);
    }
    for (Eigen::Index i = 0; i < loc_.size(); ++i) h((k_ - 1) + i, (k_ - 1) + i) = -1.0 / (scale_[i] * scale_[i]);
    return h;
  }

  /// phi''(w) / phi(w) = Hessian of ln phi + grad ln phi grad ln phi^T.
  Matrix relative_hessian(const ParamVector& w) const {
    const Vector g = gradient_log(w);
    return hessian_log(w) + g * g.transpose();
  }

 private:
  double last_ratio(const ParamVector& w) const {
    double s = 1.0;
    for (int k = 0; k < k_ - 1; ++k) s -= w[k];
    return s;
  }

  int k_;
  int m_;
  Vector eta_;
  Vector loc_;
  Vector scale_;
  double log_const_ = 0.0;
};

}  // namespace latentvar

#endif  // LATENTVAR_PRIOR_HPP
