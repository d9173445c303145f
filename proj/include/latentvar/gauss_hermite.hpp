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

#ifndef LATENTVAR_GAUSS_HERMITE_HPP
#define LATENTVAR_GAUSS_HERMITE_HPP

#include <stdexcept>
#include <vector>

#include "latentvar/linalg.hpp"

namespace latentvar {

/// Nodes and weights for E[f(Z)], Z ~ N(0, 1); weights sum to one.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Probabilists' Gauss-Hermite rule by the Golub-Welsch eigenvalue method.
inline QuadratureRule gauss_hermite(int count) {
  if (count < 1) throw std::invalid_argument("quadrature needs at least one node");
  Matrix jacobi = Matrix::Zero(count, count);
  for (int k = 1; k < count; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(jacobi);
  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(count));
  rule.weights.resize(static_cast<std::size_t>(count));
  double total = 0.0;
  for (int i = 0; i < count; ++i) {
    rule.nodes[static_cast<std::size_t>(i)] = es.eigenvalues()[i];
    const double v = es.eigenvectors()(0, i);
    rule.weights[static_cast<std::size_t>(i)] = v * v;
    total += v * v;
  }
  for (double& w : rule.weights) w /= total;
  return rule;
}

/// Tensor-product rule for a standard normal in `dim` dimensions.
/// Nodes are returned one per column.
struct TensorRule {
  Matrix nodes;
  std::vector<double> weights;
};

inline TensorRule tensor_gauss_hermite(int count, int dim) {
  if (dim < 1 || dim > 2) throw std::invalid_argument("tensor quadrature supports dimension 1 or 2");
  const QuadratureRule base = gauss_hermite(count);
  TensorRule rule;
  const auto n = static_cast<std::size_t>(count);
  if (dim == 1) {
    rule.nodes.resize(1, count);
    for (std::size_t i = 0; i < n; ++i) rule.nodes(0, static_cast<Eigen::Index>(i)) = base.nodes[i];
    rule.weights = base.weights;
    return rule;
  }
  rule.nodes.resize(2, static_cast<Eigen::Index>(n * n));
  rule.weights.resize(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto c = static_cast<Eigen::Index>(i * n + j);
      rule.nodes(0, c) = base.nodes[i];
      rule.nodes(1, c) = base.nodes[j];
      rule.weights[i * n + j] = base.weights[i] * base.weights[j];
    }
  }
  return rule;
}

}  // namespace latentvar

#endif  // LATENTVAR_GAUSS_HERMITE_HPP
