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

#ifndef LATENTVAR_LINALG_HPP
#define LATENTVAR_LINALG_HPP

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>

#include "latentvar/errors.hpp"

namespace latentvar {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Largest condition number (estimated from the Cholesky diagonal) accepted
/// before a matrix is treated as singular.
inline constexpr double kConditioningLimit = 1e10;

/// Cholesky factorization that refuses ill-conditioned input.
///
/// The condition estimate is (max diag L / min diag L)^2, which is a lower
/// bound on the spectral condition number and exact for diagonal matrices.
inline Eigen::LLT<Matrix> checked_cholesky(const Matrix& a, const std::string& what) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw RegularityError(what + " is not positive definite");
  }
  const Vector diag = llt.matrixL().toDenseMatrix().diagonal();
  const double lo = diag.minCoeff();
  const double hi = diag.maxCoeff();
  if (!(lo > 0.0) || (hi / lo) * (hi / lo) > kConditioningLimit) {
    throw RegularityError(what + " is ill-conditioned (condition estimate above 1e10)");
  }
  return llt;
}

/// ln det A from a Cholesky factor.
inline double log_det(const Eigen::LLT<Matrix>& llt) {
  const auto& l = llt.matrixLLT();
  double s = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

/// Tr[B A^{-1}] via a linear solve against the factor of A.
inline double trace_solve(const Matrix& b, const Eigen::LLT<Matrix>& a_llt) {
  // Tr[B A^{-1}] = Tr[A^{-1} B] for symmetric A.
  return a_llt.solve(b).trace();
}

inline double max_asymmetry(const Matrix& a) { return (a - a.transpose()).cwiseAbs().maxCoeff(); }

inline double min_eigenvalue(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// ln(sum exp(v)), -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

inline double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (!std::isfinite(a)) return a;
  return a + std::log1p(std::exp(b - a));
}

/// Neumaier compensated summation; order-independent to within rounding of
/// the final result for the magnitudes seen here.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace latentvar

#endif  // LATENTVAR_LINALG_HPP
