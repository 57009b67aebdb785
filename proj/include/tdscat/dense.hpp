#pragma once

#include <Eigen/Dense>

#include <functional>

#include "tdscat/grid.hpp"

namespace tdscat {

inline constexpr std::size_t dense_cap = 1024;

inline void require_dense(const GridSpec& g) {
  if (g.size() > dense_cap) throw CapExceeded("dense oracle limited to N^dim <= 1024 points");
}

// Unitary DFT matrix by direct summation: F_kj = N^{-dim/2} e^{-i xi_k . x_j}.
inline Eigen::MatrixXcd dft_matrix(const GridSpec& g) {
  require_dense(g);
  const std::size_t n = g.size();
  Eigen::MatrixXcd F(n, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    Vec3 xi = g.frequency_vector(k);
    for (std::size_t j = 0; j < n; ++j) F(k, j) = std::polar(scale, -dot3(xi, g.point(j)));
  }
  return F;
}

inline Eigen::VectorXcd to_vector(const Field& f) {
  return Eigen::Map<const Eigen::VectorXcd>(f.values.data(), static_cast<Eigen::Index>(f.size()));
}

inline Field from_vector(const GridSpec& g, const Eigen::VectorXcd& v) {
  return Field(g, std::vector<cplx>(v.data(), v.data() + v.size()));
}

// Matrix of a linear map on fields, built column by column.
inline Eigen::MatrixXcd operator_matrix(const GridSpec& g, const std::function<Field(const Field&)>& apply) {
  require_dense(g);
  const std::size_t n = g.size();
  Eigen::MatrixXcd A(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    Field e(g);
    e[j] = 1.0;
    Field col = apply(e);
    for (std::size_t i = 0; i < n; ++i) A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
  }
  return A;
}

// Exact p -> p norm for p in {1, 2, inf}: max column sum, largest singular
// value, max row sum. Grid weights cancel for equal p.
inline double dense_norm(const Eigen::MatrixXcd& A, double p) {
  if (p == 1.0) return A.cwiseAbs().colwise().sum().maxCoeff();
  if (std::isinf(p)) return A.cwiseAbs().rowwise().sum().maxCoeff();
  if (p == 2.0) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(A);
    return svd.singularValues()(0);
  }
  throw DomainError("dense norms are exact only for p in {1, 2, inf}");
}

}  // namespace tdscat
