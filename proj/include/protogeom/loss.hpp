#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "protogeom/data.hpp"
#include "protogeom/errors.hpp"
#include "protogeom/geometry.hpp"
#include "protogeom/numeric.hpp"

namespace protogeom {

struct LossParams {
  double temperature = 0.1;  // tau; every inner product is divided by it
};

/// Value, ambient Euclidean gradient (d x N, zero columns for samples outside
/// the batch) and the count of embedding inner products the evaluation needed.
/// Products among the fixed prototypes are not counted: they depend only on
/// the chosen geometry and can be computed once per run.
struct LossReport {
  double value = 0.0;
  Matrix grad;
  std::int64_t inner_product_count = 0;
};

namespace detail {

inline void check_params(const LossParams& params) {
  if (!(params.temperature > 0.0))
    throw config_error("temperature must be positive");
}

inline void check_prototypes(const EmbeddingSet& embeddings,
                             const PrototypeSet& prototypes) {
  if (prototypes.dim() != embeddings.dim())
    throw mismatch_error("prototype dimension " + std::to_string(prototypes.dim()) +
                         " != embedding dimension " + std::to_string(embeddings.dim()));
  if (prototypes.class_count() != embeddings.num_classes)
    throw mismatch_error("prototype count " + std::to_string(prototypes.class_count()) +
                         " != label space size " + std::to_string(embeddings.num_classes));
}

struct Batch {
  Matrix h;              // d x n batch columns
  std::vector<int> y;    // batch labels
  std::vector<int> idx;  // original sample indices
  std::vector<int> n_bc; // per-class counts within the batch
};

inline Batch gather(const EmbeddingSet& embeddings, const BatchPlan& plan) {
  Batch b;
  b.idx = plan.sample_indices;
  if (b.idx.empty()) throw config_error("empty batch");
  const int n = static_cast<int>(b.idx.size());
  b.h.resize(embeddings.dim(), n);
  b.y.resize(n);
  b.n_bc.assign(embeddings.num_classes, 0);
  std::vector<char> seen(embeddings.size(), 0);
  for (int j = 0; j < n; ++j) {
    const int i = b.idx[j];
    if (i < 0 || i >= embeddings.size())
      throw domain_error("batch index " + std::to_string(i) + " out of range");
    if (seen[i]) throw domain_error("batch index " + std::to_string(i) + " repeated");
    seen[i] = 1;
    b.h.col(j) = embeddings.vectors.col(i);
    b.y[j] = embeddings.labels[i];
    ++b.n_bc[b.y[j]];
  }
  return b;
}

inline Matrix scatter(const Matrix& grad_batch, const std::vector<int>& idx,
                      int d, int total) {
  Matrix grad = Matrix::Zero(d, total);
  for (std::size_t j = 0; j < idx.size(); ++j) grad.col(idx[j]) = grad_batch.col(j);
  return grad;
}

}  // namespace detail

/// Batch-wise supervised-contrastive loss:
///
///   sum_i 1/(n_{B,y_i}-1) sum_{j != i, y_j = y_i} [ log D_i - (h_i.h_j)/tau ],
///   D_i = sum_{l != i} exp((h_i.h_l)/tau),
///
/// together with its exact gradient. Anchors whose class appears only once in
/// the batch have no positives and are skipped as anchors (they still act as
/// negatives for everyone else).
inline LossReport scl_loss(const EmbeddingSet& embeddings, const BatchPlan& plan,
                           const LossParams& params) {
  detail::check_params(params);
  if (plan.proto_multiplicity != 0)
    throw config_error("scl_loss is the vanilla loss; it requires n_w = 0");
  detail::Batch b = detail::gather(embeddings, plan);
  const int n = static_cast<int>(b.y.size());
  const double tau = params.temperature;

  Matrix s = (b.h.transpose() * b.h) / tau;
  Matrix coeff = Matrix::Zero(n, n);
  std::vector<double> anchor_terms;
  anchor_terms.reserve(n);

  for (int i = 0; i < n; ++i) {
    const int positives = b.n_bc[b.y[i]] - 1;
    if (positives < 1) continue;

    double mx = -std::numeric_limits<double>::infinity();
    for (int l = 0; l < n; ++l)
      if (l != i) mx = std::max(mx, s(i, l));
    double sum = 0.0;
    for (int l = 0; l < n; ++l)
      if (l != i) sum += std::exp(s(i, l) - mx);
    const double log_d = mx + std::log(sum);

    double term = 0.0;
    const double inv_m = 1.0 / positives;
    for (int l = 0; l < n; ++l) {
      if (l == i) continue;
      coeff(i, l) = std::exp(s(i, l) - log_d);
      if (b.y[l] == b.y[i]) {
        coeff(i, l) -= inv_m;
        term += log_d - s(i, l);
      }
    }
    anchor_terms.push_back(term * inv_m);
  }
  if (anchor_terms.empty())
    throw empty_anchor_error("no anchor in the batch has an in-batch positive");

  LossReport report;
  report.value = pairwise_sum(anchor_terms);
  Matrix grad_batch = (b.h * (coeff + coeff.transpose())) / tau;
  report.grad = detail::scatter(grad_batch, b.idx, embeddings.dim(), embeddings.size());
  report.inner_product_count = std::int64_t(n) * (n - 1) / 2;
  return report;
}

/// SCL over the batch augmented with n_w copies of every class prototype,
/// evaluated without materializing the copies. Writing s(x,y) = (x.y)/tau and
/// n_c for the in-batch count of class c:
///
///   sample anchor i:  1/(n_{y_i}+n_w-1) * [ sum_{j pos} (log Dt_i - s(h_i,h_j))
///                       + n_w (log Dt_i - s(h_i, w_{y_i})) ],
///     Dt_i = sum_{l != i} e^{s(h_i,h_l)} + n_w sum_c e^{s(h_i,w_c)};
///
///   prototype anchor c (multiplicity n_w, skipped when n_c + n_w - 1 = 0):
///     n_w/(n_c+n_w-1) * [ sum_{j: y_j=c} (log Dh_c - s(w_c,h_j))
///                       + (n_w-1)(log Dh_c - 1/tau) ],
///     Dh_c = sum_l e^{s(h_l,w_c)} + n_w L_c + (n_w-1) e^{1/tau},
///     L_c  = sum_{c' != c} e^{s(w_c',w_c)}.
///
/// This equals the vanilla loss on the literally replicated batch, exactly.
/// The gradient is taken with respect to the embeddings only; prototypes are
/// fixed. The number of embedding inner products is n(n-1)/2 + nk whatever
/// n_w is; the multiplicity enters the loss only through scalar weights.
inline LossReport scl_augmented_loss(const EmbeddingSet& embeddings,
                                     const PrototypeSet& prototypes,
                                     const BatchPlan& plan,
                                     const LossParams& params) {
  detail::check_params(params);
  detail::check_prototypes(embeddings, prototypes);
  if (plan.proto_multiplicity < 1)
    throw config_error("scl_augmented_loss requires n_w >= 1");
  detail::Batch b = detail::gather(embeddings, plan);
  const int n = static_cast<int>(b.y.size());
  const int k = prototypes.class_count();
  const double tau = params.temperature;
  const double n_w = plan.proto_multiplicity;
  const double log_nw = std::log(n_w);

  Matrix ss = (b.h.transpose() * b.h) / tau;                  // n x n
  Matrix sw = (b.h.transpose() * prototypes.vectors) / tau;   // n x k
  Matrix gw = (prototypes.vectors.transpose() * prototypes.vectors) / tau;  // k x k

  std::vector<double> terms;
  terms.reserve(n + k);

  // Sample anchors. The prototype block always provides n_w positives, so no
  // sample anchor is ever skipped here.
  Vector log_dt(n);
  std::vector<double> alpha(n);
  for (int i = 0; i < n; ++i) {
    alpha[i] = 1.0 / (b.n_bc[b.y[i]] + n_w - 1.0);
    double mx = -std::numeric_limits<double>::infinity();
    for (int l = 0; l < n; ++l)
      if (l != i) mx = std::max(mx, ss(i, l));
    for (int c = 0; c < k; ++c) mx = std::max(mx, sw(i, c) + log_nw);
    double sum = 0.0;
    for (int l = 0; l < n; ++l)
      if (l != i) sum += std::exp(ss(i, l) - mx);
    for (int c = 0; c < k; ++c) sum += std::exp(sw(i, c) + log_nw - mx);
    log_dt(i) = mx + std::log(sum);

    double term = n_w * (log_dt(i) - sw(i, b.y[i]));
    for (int j = 0; j < n; ++j)
      if (j != i && b.y[j] == b.y[i]) term += log_dt(i) - ss(i, j);
    terms.push_back(alpha[i] * term);
  }

  // Prototype anchors.
  Vector log_dh(k);
  std::vector<double> beta(k, 0.0);
  std::vector<char> active(k, 0);
  for (int c = 0; c < k; ++c) {
    const double m_hat = b.n_bc[c] + n_w - 1.0;
    if (m_hat < 0.5) continue;  // n_w = 1 and no in-batch sample of class c
    active[c] = 1;
    beta[c] = 1.0 / m_hat;
    double mx = 1.0 / tau + ((n_w >= 2.0) ? std::log(n_w - 1.0)
                                          : -std::numeric_limits<double>::infinity());
    for (int l = 0; l < n; ++l) mx = std::max(mx, sw(l, c));
    for (int c2 = 0; c2 < k; ++c2)
      if (c2 != c) mx = std::max(mx, gw(c2, c) + log_nw);
    double sum = 0.0;
    for (int l = 0; l < n; ++l) sum += std::exp(sw(l, c) - mx);
    for (int c2 = 0; c2 < k; ++c2)
      if (c2 != c) sum += std::exp(gw(c2, c) + log_nw - mx);
    if (n_w >= 2.0) sum += std::exp(1.0 / tau + std::log(n_w - 1.0) - mx);
    log_dh(c) = mx + std::log(sum);

    double term = (n_w - 1.0) * (log_dh(c) - 1.0 / tau);
    for (int j = 0; j < n; ++j)
      if (b.y[j] == c) term += log_dh(c) - sw(j, c);
    terms.push_back(n_w * beta[c] * term);
  }

  // Gradient. Three coefficient blocks: sample-sample, sample-anchor vs
  // prototype, prototype-anchor vs sample.
  Matrix cs(n, n);
  for (int i = 0; i < n; ++i) {
    for (int l = 0; l < n; ++l) {
      if (l == i) { cs(i, l) = 0.0; continue; }
      cs(i, l) = std::exp(ss(i, l) - log_dt(i));
      if (b.y[l] == b.y[i]) cs(i, l) -= alpha[i];
    }
  }
  Matrix cw(n, k);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < k; ++c) {
      cw(i, c) = n_w * std::exp(sw(i, c) - log_dt(i));
      if (c == b.y[i]) cw(i, c) -= alpha[i] * n_w;
    }
  }
  Matrix cp = Matrix::Zero(k, n);
  for (int c = 0; c < k; ++c) {
    if (!active[c]) continue;
    for (int m = 0; m < n; ++m) {
      cp(c, m) = n_w * std::exp(sw(m, c) - log_dh(c));
      if (b.y[m] == c) cp(c, m) -= n_w * beta[c];
    }
  }

  LossReport report;
  report.value = pairwise_sum(terms);
  Matrix grad_batch = (b.h * (cs + cs.transpose()) +
                       prototypes.vectors * cw.transpose() +
                       prototypes.vectors * cp) / tau;
  report.grad = detail::scatter(grad_batch, b.idx, embeddings.dim(), embeddings.size());
  report.inner_product_count = std::int64_t(n) * (n - 1) / 2 + std::int64_t(n) * k;
  return report;
}

/// The n_w -> infinity form of the augmented loss, additive constants dropped:
/// cross-entropy against the fixed prototypes plus an alignment bonus,
///
///   - sum_i [ log softmax_c((w_c.h_i)/tau)[y_i] + (w_{y_i}.h_i)/tau ].
inline LossReport limit_loss(const EmbeddingSet& embeddings,
                             const PrototypeSet& prototypes, const BatchPlan& plan,
                             const LossParams& params) {
  detail::check_params(params);
  detail::check_prototypes(embeddings, prototypes);
  detail::Batch b = detail::gather(embeddings, plan);
  const int n = static_cast<int>(b.y.size());
  const int k = prototypes.class_count();
  const double tau = params.temperature;

  Matrix sw = (b.h.transpose() * prototypes.vectors) / tau;  // n x k
  Matrix coeff(n, k);  // softmax minus twice the one-hot target
  std::vector<double> terms;
  terms.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double mx = sw.row(i).maxCoeff();
    double sum = 0.0;
    for (int c = 0; c < k; ++c) sum += std::exp(sw(i, c) - mx);
    const double log_z = mx + std::log(sum);
    terms.push_back(log_z - 2.0 * sw(i, b.y[i]));
    for (int c = 0; c < k; ++c)
      coeff(i, c) = std::exp(sw(i, c) - log_z) - (c == b.y[i] ? 2.0 : 0.0);
  }

  LossReport report;
  report.value = pairwise_sum(terms);
  Matrix grad_batch = (prototypes.vectors * coeff.transpose()) / tau;
  report.grad = detail::scatter(grad_batch, b.idx, embeddings.dim(), embeddings.size());
  report.inner_product_count = std::int64_t(n) * k;
  return report;
}

enum class LossKind { scl, scl_proto, limit };

/// Evaluate the loss selected by kind. Prototypes may be null for plain scl.
inline LossReport evaluate_loss(LossKind kind, const EmbeddingSet& embeddings,
                                const PrototypeSet* prototypes,
                                const BatchPlan& plan, const LossParams& params) {
  switch (kind) {
    case LossKind::scl:
      return scl_loss(embeddings, plan, params);
    case LossKind::scl_proto:
      if (!prototypes) throw config_error("scl_proto needs a prototype set");
      return scl_augmented_loss(embeddings, *prototypes, plan, params);
    case LossKind::limit:
      if (!prototypes) throw config_error("limit loss needs a prototype set");
      return limit_loss(embeddings, *prototypes, plan, params);
  }
  throw config_error("unknown loss kind");
}

/// Compare the analytical gradient against central finite differences of the
/// value on a seeded subset of at least min_coords coordinates; returns the
/// maximum relative error |a-f| / max(1, |a|, |f|).
///
/// analytic_bias is a validation hook: it is added to each analytical entry
/// before the comparison so callers can confirm that a wrong gradient is
/// actually flagged.
inline double grad_check(LossKind kind, const EmbeddingSet& embeddings,
                         const PrototypeSet* prototypes, const BatchPlan& plan,
                         const LossParams& params, double eps,
                         unsigned long long seed = 0, int min_coords = 20,
                         double analytic_bias = 0.0) {
  if (!(eps >= 1e-8 && eps <= 1e-4))
    throw config_error("finite-difference step must lie in [1e-8, 1e-4]");
  const LossReport base = evaluate_loss(kind, embeddings, prototypes, plan, params);

  std::vector<std::pair<int, int>> coords;  // (row, batch column)
  const int d = embeddings.dim();
  const std::int64_t cells = std::int64_t(d) * plan.sample_indices.size();
  rng_engine engine(seed);
  if (cells <= min_coords) {
    for (int j = 0; j < static_cast<int>(plan.sample_indices.size()); ++j)
      for (int r = 0; r < d; ++r) coords.emplace_back(r, plan.sample_indices[j]);
  } else {
    std::uniform_int_distribution<int> pick_row(0, d - 1);
    std::uniform_int_distribution<std::size_t> pick_col(0, plan.sample_indices.size() - 1);
    std::vector<std::pair<int, int>> seen;
    while (static_cast<int>(coords.size()) < min_coords) {
      std::pair<int, int> c{pick_row(engine), plan.sample_indices[pick_col(engine)]};
      if (std::find(coords.begin(), coords.end(), c) == coords.end())
        coords.push_back(c);
    }
  }

  double worst = 0.0;
  EmbeddingSet probe = embeddings;
  for (auto [r, c] : coords) {
    const double saved = probe.vectors(r, c);
    probe.vectors(r, c) = saved + eps;
    const double up = evaluate_loss(kind, probe, prototypes, plan, params).value;
    probe.vectors(r, c) = saved - eps;
    const double down = evaluate_loss(kind, probe, prototypes, plan, params).value;
    probe.vectors(r, c) = saved;
    const double fd = (up - down) / (2.0 * eps);
    const double an = base.grad(r, c) + analytic_bias;
    worst = std::max(worst, std::abs(an - fd) /
                                std::max({1.0, std::abs(an), std::abs(fd)}));
  }
  return worst;
}

/// Relative Frobenius gap between the augmented-loss gradient and the
/// limit-loss gradient at the same embeddings, for each multiplicity in the
/// sweep. Reported for rate inspection; the sweep must be increasing.
inline std::vector<std::pair<int, double>> limit_gap(
    const EmbeddingSet& embeddings, const PrototypeSet& prototypes,
    const BatchPlan& plan, const std::vector<int>& n_w_sweep,
    const LossParams& params) {
  if (n_w_sweep.empty()) throw config_error("empty n_w sweep");
  for (std::size_t i = 0; i < n_w_sweep.size(); ++i) {
    if (n_w_sweep[i] < 1) throw config_error("n_w values must be >= 1");
    if (i > 0 && n_w_sweep[i] <= n_w_sweep[i - 1])
      throw config_error("n_w sweep must be strictly increasing");
  }
  const LossReport lim = limit_loss(embeddings, prototypes, plan, params);
  const double lim_norm = lim.grad.norm();
  if (lim_norm < 1e-15)
    throw degenerate_error("limit-loss gradient vanishes; gap undefined");

  std::vector<std::pair<int, double>> gaps;
  for (int n_w : n_w_sweep) {
    BatchPlan p = plan;
    p.proto_multiplicity = n_w;
    const LossReport aug = scl_augmented_loss(embeddings, prototypes, p, params);
    gaps.emplace_back(n_w, (aug.grad - lim.grad).norm() / lim_norm);
  }
  return gaps;
}

}  // namespace protogeom
