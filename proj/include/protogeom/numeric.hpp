#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "protogeom/errors.hpp"

namespace protogeom {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Deterministic 64-bit engine used everywhere a seed appears in a config.
using rng_engine = std::mt19937_64;

/// Cascade summation. Keeps the accumulated round-off small enough that
/// reorderings of the input stay within ~1e-12 of each other.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline double pairwise_sum(const std::vector<double>& v) {
  return pairwise_sum(std::span<const double>(v.data(), v.size()));
}

/// d x n matrix of i.i.d. standard Gaussian columns normalized to unit length.
inline Matrix random_unit_columns(int d, int n, rng_engine& engine) {
  std::normal_distribution<double> gauss;
  Matrix m(d, n);
  for (int j = 0; j < n; ++j) {
    do {
      for (int i = 0; i < d; ++i) m(i, j) = gauss(engine);
    } while (m.col(j).norm() < 1e-12);
    m.col(j).normalize();
  }
  return m;
}

/// Haar-ish random orthogonal matrix: QR of a Gaussian matrix with the sign
/// of each column fixed so the factorization is unique.
inline Matrix random_orthogonal(int d, rng_engine& engine) {
  std::normal_distribution<double> gauss;
  Matrix a(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) a(i, j) = gauss(engine);
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ();
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  return q;
}

}  // namespace protogeom
