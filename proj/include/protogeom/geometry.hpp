#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "protogeom/errors.hpp"
#include "protogeom/numeric.hpp"

namespace protogeom {

/// k fixed unit-norm d-dimensional vectors, one column per class. Defines the
/// reference geometry the embeddings are trained towards.
struct PrototypeSet {
  Matrix vectors;  // d x k, unit-norm columns

  int dim() const { return static_cast<int>(vectors.rows()); }
  int class_count() const { return static_cast<int>(vectors.cols()); }

  /// Enforce the type invariants: k >= 2, d >= 1, unit columns within 1e-12.
  void validate() const {
    if (class_count() < 2 || dim() < 1)
      throw dimension_error("PrototypeSet needs k >= 2 and d >= 1");
    for (int c = 0; c < class_count(); ++c)
      if (std::abs(vectors.col(c).norm() - 1.0) > 1e-12)
        throw domain_error("prototype column " + std::to_string(c) +
                           " is not unit norm");
  }
};

/// Symmetric matrix of pairwise inner products; the fingerprint of a geometry.
struct GramMatrix {
  Matrix entries;

  GramMatrix() = default;

  explicit GramMatrix(Matrix m) {
    if (m.rows() != m.cols()) throw dimension_error("Gram matrix must be square");
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw gram_error("Gram matrix is not symmetric within 1e-12");
    entries = 0.5 * (m + m.transpose());
  }

  int size() const { return static_cast<int>(entries.rows()); }
};

/// Declarative description of a target geometry, parsed from a config file.
struct GeometrySpec {
  enum class Kind { etf, gram_target, minority_angle, majority_collapse };

  Kind kind = Kind::etf;
  std::vector<int> minority;           // minority_angle
  double cos_min_min = -1.0;           // minority_angle: minority-minority cosine
  double cos_rest = 0.0;               // minority_angle: every other pair
  std::vector<int> majority;           // majority_collapse
  std::string gram_path;               // gram_target: CSV file with the k x k target
  std::optional<unsigned long long> seed;  // optional random frame orientation
};

/// Pairwise inner products of a set of columns.
inline GramMatrix gram(const Matrix& columns) {
  return GramMatrix(Matrix(columns.transpose() * columns));
}

inline GramMatrix gram(const PrototypeSet& prototypes) {
  return gram(prototypes.vectors);
}

/// Scale-free distance between two geometries: Frobenius norm of the
/// difference of the Frobenius-normalized matrices. A metric on rays of
/// nonzero symmetric matrices, with values in [0, 2].
inline double convergence_delta(const GramMatrix& g_m, const GramMatrix& g_star) {
  if (g_m.size() != g_star.size())
    throw dimension_error("convergence_delta: shape mismatch");
  const double nm = g_m.entries.norm();
  const double ns = g_star.entries.norm();
  if (nm < 1e-15 || ns < 1e-15)
    throw degenerate_error("convergence_delta: degenerate (near-zero) Gram matrix");
  return (g_m.entries / nm - g_star.entries / ns).norm();
}

/// Realize a target Gram as d-dimensional unit vectors via eigen-factorization.
/// The target must be symmetric PSD with unit diagonal and rank <= d. Invalid
/// targets are rejected, never silently projected.
inline PrototypeSet make_from_gram(const GramMatrix& target, int d) {
  const int k = target.size();
  if (k < 2 || d < 1) throw dimension_error("make_from_gram needs k >= 2, d >= 1");
  for (int c = 0; c < k; ++c)
    if (std::abs(target.entries(c, c) - 1.0) > 1e-8)
      throw diagonal_error("target Gram diagonal entry " + std::to_string(c) +
                           " differs from 1 by more than 1e-8");
  Eigen::SelfAdjointEigenSolver<Matrix> es(target.entries);
  if (es.info() != Eigen::Success)
    throw gram_error("eigen decomposition of target Gram failed");
  const Vector evals = es.eigenvalues();  // ascending
  if (evals(0) < -1e-8) {
    std::ostringstream msg;
    msg << "target Gram is not PSD: most negative eigenvalue " << evals(0);
    throw not_psd_error(msg.str());
  }
  int rank = 0;
  for (int i = 0; i < k; ++i)
    if (evals(i) > 1e-8) ++rank;
  if (rank > d) {
    std::ostringstream msg;
    msg << "target Gram has numerical rank " << rank << " > dimension " << d;
    throw rank_error(msg.str());
  }
  Matrix w = Matrix::Zero(d, k);
  int row = 0;
  for (int i = k - 1; i >= 0; --i) {  // descending eigenvalues
    if (evals(i) <= 1e-8) continue;
    w.row(row++) = std::sqrt(evals(i)) * es.eigenvectors().col(i).transpose();
  }
  // Dropped eigenvalues in [-1e-8, 1e-8] can leave columns short of unit norm
  // by up to ~1e-8; restore the exact unit-norm invariant.
  for (int c = 0; c < k; ++c) w.col(c).normalize();
  PrototypeSet p{std::move(w)};
  p.validate();
  return p;
}

/// Simplex equiangular tight frame: k unit vectors with every pairwise inner
/// product equal to -1/(k-1), embedded in the first k-1 coordinates of R^d.
inline PrototypeSet make_etf(int k, int d) {
  if (k < 2) throw dimension_error("ETF needs at least 2 classes");
  if (d < k - 1)
    throw dimension_error("ETF of " + std::to_string(k) +
                          " vectors needs dimension >= " + std::to_string(k - 1));
  // Scaled centered identity: k x k frame with the desired Gram, rank k-1.
  Matrix m = std::sqrt(double(k) / (k - 1)) *
             (Matrix::Identity(k, k) - Matrix::Constant(k, k, 1.0 / k));
  // Columns of m live in the complement of the all-ones vector. Reflect that
  // complement onto coordinates 2..k, then keep the k-1 nonzero rows.
  Vector u = Vector::Constant(k, 1.0 / std::sqrt(double(k)));
  Vector v = u - Vector::Unit(k, 0);
  Matrix house = Matrix::Identity(k, k) - (2.0 / v.squaredNorm()) * (v * v.transpose());
  Matrix coords = (house * m).bottomRows(k - 1);  // (k-1) x k
  Matrix w = Matrix::Zero(d, k);
  w.topRows(k - 1) = coords;
  for (int c = 0; c < k; ++c) w.col(c).normalize();
  PrototypeSet p{std::move(w)};
  p.validate();
  return p;
}

namespace detail {

inline void check_index_set(const std::vector<int>& idx, int k, const char* what) {
  std::set<int> seen;
  for (int i : idx) {
    if (i < 0 || i >= k)
      throw domain_error(std::string(what) + " index " + std::to_string(i) +
                         " out of range [0, " + std::to_string(k) + ")");
    if (!seen.insert(i).second)
      throw domain_error(std::string(what) + " index " + std::to_string(i) +
                         " repeated");
  }
}

}  // namespace detail

/// Two-level geometry: minority-minority pairs get cosine cos_min_min (a wider
/// angle), every other distinct pair gets cos_rest. Rejected if the pattern is
/// not realizable as a Gram of unit vectors of rank <= d.
inline PrototypeSet make_minority_angle(int k, const std::vector<int>& minority,
                                        double cos_min_min, double cos_rest, int d) {
  if (k < 2) throw dimension_error("make_minority_angle needs k >= 2");
  detail::check_index_set(minority, k, "minority");
  if (std::abs(cos_min_min) > 1.0 || std::abs(cos_rest) > 1.0)
    throw domain_error("cosines must lie in [-1, 1]");
  if (minority.size() >= 2 && !(cos_min_min < cos_rest))
    throw domain_error("minority pairs must get the larger angle (cos_min_min < cos_rest)");
  Matrix g = Matrix::Constant(k, k, cos_rest);
  for (int a : minority)
    for (int b : minority)
      if (a != b) g(a, b) = cos_min_min;
  g.diagonal().setOnes();
  return make_from_gram(GramMatrix(std::move(g)), d);
}

/// Extreme geometry: all majority classes share one prototype; the shared
/// direction plus the individual minority directions form an ETF of
/// k_eff = k - |majority| + 1 mutually equiangular unit vectors.
inline PrototypeSet make_majority_collapse(int k, const std::vector<int>& majority,
                                           int d) {
  if (k < 2) throw dimension_error("make_majority_collapse needs k >= 2");
  detail::check_index_set(majority, k, "majority");
  if (majority.size() < 2)
    throw domain_error("majority set must contain at least 2 classes");
  const int k_eff = k - static_cast<int>(majority.size()) + 1;
  if (d < k_eff - 1)
    throw dimension_error("collapsed geometry needs dimension >= " +
                          std::to_string(k_eff - 1));
  Matrix directions;
  if (k_eff == 1) {
    directions = Matrix::Zero(d, 1);
    directions(0, 0) = 1.0;
  } else {
    directions = make_etf(k_eff, d).vectors;
  }
  std::set<int> maj(majority.begin(), majority.end());
  Matrix w(d, k);
  int next = 1;
  for (int c = 0; c < k; ++c)
    w.col(c) = maj.count(c) ? directions.col(0) : directions.col(next++);
  PrototypeSet p{std::move(w)};
  p.validate();
  return p;
}

/// Rotate a prototype set by a seeded random orthogonal frame. The Gram is
/// unchanged; only the orientation in R^d moves.
inline PrototypeSet rotate_frame(const PrototypeSet& prototypes,
                                 unsigned long long seed) {
  rng_engine engine(seed);
  Matrix q = random_orthogonal(prototypes.dim(), engine);
  PrototypeSet p{Matrix(q * prototypes.vectors)};
  for (int c = 0; c < p.class_count(); ++c) p.vectors.col(c).normalize();
  return p;
}

}  // namespace protogeom
