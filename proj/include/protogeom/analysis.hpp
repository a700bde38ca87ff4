#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "protogeom/data.hpp"
#include "protogeom/errors.hpp"
#include "protogeom/geometry.hpp"

namespace protogeom {

/// Per-class arithmetic means of the embeddings, NOT renormalized: column
/// norms live in [0, 1] and shrinking norms are themselves a collapse signal.
struct ClassMeans {
  Matrix matrix;  // d x k
};

/// One row of the training history.
struct MetricsRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double delta = 0.0;      // convergence_delta of class-mean Gram vs reference
  double alignment = 0.0;  // mean_i w_{y_i} . h_i, in [-1, 1]
  double spread = 0.0;     // mean_i |h_i - mu_{y_i}|
  double min_class_mean_norm = 0.0;
  double max_class_mean_norm = 0.0;
};

inline ClassMeans class_means(const EmbeddingSet& embeddings) {
  const int k = embeddings.num_classes;
  Matrix sums = Matrix::Zero(embeddings.dim(), k);
  std::vector<int> counts(k, 0);
  for (int i = 0; i < embeddings.size(); ++i) {
    sums.col(embeddings.labels[i]) += embeddings.vectors.col(i);
    ++counts[embeddings.labels[i]];
  }
  for (int c = 0; c < k; ++c) {
    if (counts[c] == 0)
      throw empty_class_error("class " + std::to_string(c) + " has no samples");
    sums.col(c) /= counts[c];
  }
  return ClassMeans{std::move(sums)};
}

/// Gram of the class means, optionally renormalizing each mean to unit length
/// first (zero means are left untouched by the flag).
inline GramMatrix mean_gram(const EmbeddingSet& embeddings,
                            bool normalize_means = false) {
  Matrix m = class_means(embeddings).matrix;
  if (normalize_means) {
    for (int c = 0; c < m.cols(); ++c) {
      const double norm = m.col(c).norm();
      if (norm > 1e-15) m.col(c) /= norm;
    }
  }
  return gram(m);
}

/// Convergence measure: distance between the Frobenius-normalized class-mean
/// Gram and the (normalized) reference geometry.
inline double geometry_delta(const EmbeddingSet& embeddings,
                             const GramMatrix& reference,
                             bool normalize_means = false) {
  return convergence_delta(mean_gram(embeddings, normalize_means), reference);
}

/// Mean inner product between each embedding and its class prototype.
inline double alignment(const EmbeddingSet& embeddings,
                        const PrototypeSet& prototypes) {
  if (prototypes.dim() != embeddings.dim() ||
      prototypes.class_count() != embeddings.num_classes)
    throw mismatch_error("alignment: embeddings and prototypes do not match");
  std::vector<double> dots(embeddings.size());
  for (int i = 0; i < embeddings.size(); ++i)
    dots[i] = prototypes.vectors.col(embeddings.labels[i]).dot(embeddings.vectors.col(i));
  return pairwise_sum(dots) / embeddings.size();
}

/// Mean distance of each embedding from its class mean; zero exactly when
/// every class has fully collapsed onto one point.
inline double within_class_spread(const EmbeddingSet& embeddings) {
  const Matrix mu = class_means(embeddings).matrix;
  std::vector<double> dist(embeddings.size());
  for (int i = 0; i < embeddings.size(); ++i)
    dist[i] = (embeddings.vectors.col(i) - mu.col(embeddings.labels[i])).norm();
  return pairwise_sum(dist) / embeddings.size();
}

/// Assemble a full history record from the current embedding state.
inline MetricsRecord compute_metrics(const EmbeddingSet& embeddings,
                                     const PrototypeSet& prototypes,
                                     const GramMatrix& reference, int epoch,
                                     double mean_loss) {
  MetricsRecord rec;
  rec.epoch = epoch;
  rec.mean_loss = mean_loss;
  rec.delta = geometry_delta(embeddings, reference);
  rec.alignment = alignment(embeddings, prototypes);
  rec.spread = within_class_spread(embeddings);
  const Matrix mu = class_means(embeddings).matrix;
  rec.min_class_mean_norm = mu.colwise().norm().minCoeff();
  rec.max_class_mean_norm = mu.colwise().norm().maxCoeff();
  return rec;
}

}  // namespace protogeom
