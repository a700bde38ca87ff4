#pragma once

// Test-only reference implementations, deliberately written in the plainest
// possible style (double loops, no log-sum-exp, no shared code with the
// library) so they can serve as independent oracles.

#include <cmath>
#include <vector>

#include "protogeom/numeric.hpp"

namespace naive {

using protogeom::Matrix;

/// Literal batch-wise supervised-contrastive loss with temperature. Anchors
/// whose class appears once in the batch are skipped.
inline double scl(const Matrix& h, const std::vector<int>& y, double tau) {
  const int n = static_cast<int>(h.cols());
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    int positives = 0;
    for (int j = 0; j < n; ++j)
      if (j != i && y[j] == y[i]) ++positives;
    if (positives == 0) continue;
    double denom = 0.0;
    for (int l = 0; l < n; ++l)
      if (l != i) denom += std::exp(h.col(i).dot(h.col(l)) / tau);
    for (int j = 0; j < n; ++j)
      if (j != i && y[j] == y[i])
        total += (std::log(denom) - h.col(i).dot(h.col(j)) / tau) / positives;
  }
  return total;
}

/// Materialize the batch plus n_w copies of every prototype column.
inline Matrix replicate(const Matrix& h, const std::vector<int>& y,
                        const Matrix& w, int n_w, std::vector<int>& y_out) {
  const int n = static_cast<int>(h.cols());
  const int k = static_cast<int>(w.cols());
  Matrix full(h.rows(), n + k * n_w);
  full.leftCols(n) = h;
  y_out = y;
  int col = n;
  for (int rep = 0; rep < n_w; ++rep)
    for (int c = 0; c < k; ++c) {
      full.col(col++) = w.col(c);
      y_out.push_back(c);
    }
  return full;
}

/// Augmented loss by literal replication.
inline double replicated_scl(const Matrix& h, const std::vector<int>& y,
                             const Matrix& w, int n_w, double tau) {
  std::vector<int> y_full;
  Matrix full = replicate(h, y, w, n_w, y_full);
  return scl(full, y_full, tau);
}

/// Central finite differences of an arbitrary scalar function of the batch
/// columns; used to validate analytical gradients end to end.
template <typename F>
Matrix fd_grad(F&& f, Matrix h, double eps = 1e-6) {
  Matrix g(h.rows(), h.cols());
  for (int c = 0; c < h.cols(); ++c) {
    for (int r = 0; r < h.rows(); ++r) {
      const double saved = h(r, c);
      h(r, c) = saved + eps;
      const double up = f(h);
      h(r, c) = saved - eps;
      const double down = f(h);
      h(r, c) = saved;
      g(r, c) = (up - down) / (2.0 * eps);
    }
  }
  return g;
}

}  // namespace naive
