#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "protogeom/analysis.hpp"
#include "protogeom/config.hpp"
#include "protogeom/data.hpp"
#include "protogeom/errors.hpp"
#include "protogeom/geometry.hpp"
#include "protogeom/loss.hpp"

namespace protogeom {

/// Step-decay learning-rate schedule.
struct Schedule {
  double base_lr = 0.1;
  std::vector<int> anneal_epochs;  // strictly increasing, all < epochs
  double anneal_factor = 0.1;      // in (0, 1]
  int epochs = 0;

  double lr_at(int epoch) const {
    int hits = 0;
    for (int a : anneal_epochs)
      if (a <= epoch) ++hits;
    return base_lr * std::pow(anneal_factor, hits);
  }
};

/// Mutable optimization state plus the per-epoch metric history.
struct TrainState {
  EmbeddingSet embeddings;
  int epoch = 0;
  std::vector<MetricsRecord> history;
};

/// One projected-SGD step on the unit sphere: drop the radial component of
/// the gradient, step, renormalize. Columns whose tangential gradient is
/// below 1e-15 (in particular every column outside the batch) stay untouched.
inline void project_and_step(EmbeddingSet& embeddings, const Matrix& grad,
                             double lr) {
  if (grad.rows() != embeddings.vectors.rows() ||
      grad.cols() != embeddings.vectors.cols())
    throw mismatch_error("gradient shape does not match embeddings");
  if (!grad.allFinite())
    throw nonfinite_error("gradient contains NaN or Inf; aborting");
  for (int i = 0; i < embeddings.size(); ++i) {
    auto h = embeddings.vectors.col(i);
    const Vector g = grad.col(i);
    const Vector tangent = g - h.dot(g) * h;
    if (tangent.norm() < 1e-15) continue;
    const Vector step = h - lr * tangent;
    const double norm = step.norm();
    // An overflowing step reports an infinite norm and would renormalize to
    // an all-zero column; treat it as the numerical abort it is.
    if (!std::isfinite(norm) || norm < 1e-300)
      throw nonfinite_error("optimizer step overflowed at column " +
                            std::to_string(i));
    h = step / norm;
  }
}

/// Drive a full experiment: seeded init, per-epoch batch sampling, loss
/// evaluation and projected steps under the schedule, one MetricsRecord per
/// epoch (plus the initialization record at epoch 0, whose loss column is the
/// full-dataset loss before any step). State is updated in place so a partial
/// history survives if a numerical abort is thrown mid-run.
inline void run(const RunConfig& cfg, TrainState& state) {
  validate(cfg);
  const LabelDistribution dist = build_distribution(cfg);
  const PrototypeSet prototypes = build_prototypes(cfg);
  const GramMatrix reference = gram(prototypes);
  const LossParams params{cfg.tau};
  const LossKind kind = cfg.loss == "scl"       ? LossKind::scl
                        : cfg.loss == "scl_proto" ? LossKind::scl_proto
                                                  : LossKind::limit;
  const Schedule schedule{cfg.base_lr, cfg.anneal_epochs, cfg.anneal_factor,
                          cfg.epochs};
  const int n = cfg.batch_size();

  state.embeddings = init_embeddings(dist, cfg.d, cfg.seed_init);
  state.epoch = 0;
  state.history.clear();

  rng_engine batch_engine(cfg.seed_batch);

  {
    // Initialization record; the whole dataset acts as one evaluation batch.
    std::vector<int> all(state.embeddings.size());
    for (int i = 0; i < state.embeddings.size(); ++i) all[i] = i;
    const BatchPlan plan = make_batch_plan(std::move(all), cfg.n_w,
                                           state.embeddings.labels, cfg.k);
    const double full = evaluate_loss(kind, state.embeddings, &prototypes, plan,
                                      params).value;
    state.history.push_back(
        compute_metrics(state.embeddings, prototypes, reference, 0, full));
  }

  Matrix velocity;
  if (cfg.momentum > 0.0)
    velocity = Matrix::Zero(cfg.d, state.embeddings.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = schedule.lr_at(epoch);
    const std::vector<BatchPlan> plans =
        sample_batches(dist, n, cfg.n_w, batch_engine, cfg.bind_classes);
    std::vector<double> batch_losses;
    batch_losses.reserve(plans.size());
    for (const BatchPlan& plan : plans) {
      LossReport report =
          evaluate_loss(kind, state.embeddings, &prototypes, plan, params);
      batch_losses.push_back(report.value);
      if (cfg.momentum > 0.0) {
        velocity = cfg.momentum * velocity + report.grad;
        project_and_step(state.embeddings, velocity, lr);
      } else {
        project_and_step(state.embeddings, report.grad, lr);
      }
    }
    state.epoch = epoch + 1;
    const double mean_loss =
        pairwise_sum(batch_losses) / static_cast<double>(batch_losses.size());
    state.history.push_back(compute_metrics(state.embeddings, prototypes,
                                            reference, epoch + 1, mean_loss));
  }
}

inline TrainState run(const RunConfig& cfg) {
  TrainState state;
  run(cfg, state);
  return state;
}

}  // namespace protogeom
