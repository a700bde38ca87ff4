#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "protogeom/errors.hpp"
#include "protogeom/numeric.hpp"

namespace protogeom {

/// Samples-per-class description of a (possibly imbalanced) synthetic dataset.
struct LabelDistribution {
  std::vector<int> counts;

  int class_count() const { return static_cast<int>(counts.size()); }
  int total() const { return std::accumulate(counts.begin(), counts.end(), 0); }

  /// Canonical label list: class 0 repeated counts[0] times, then class 1, ...
  /// Everything downstream (init, batching, serialization) uses this order.
  std::vector<int> labels() const {
    std::vector<int> y;
    y.reserve(total());
    for (int c = 0; c < class_count(); ++c)
      y.insert(y.end(), counts[c], c);
    return y;
  }
};

/// N free unit-norm embeddings with class labels; the optimization variable.
struct EmbeddingSet {
  Matrix vectors;           // d x N, unit-norm columns
  std::vector<int> labels;  // length N, values in [0, num_classes)
  int num_classes = 0;

  int dim() const { return static_cast<int>(vectors.rows()); }
  int size() const { return static_cast<int>(vectors.cols()); }

  void validate() const {
    if (static_cast<int>(labels.size()) != size())
      throw mismatch_error("label count does not match embedding count");
    for (int y : labels)
      if (y < 0 || y >= num_classes)
        throw domain_error("label " + std::to_string(y) + " out of range");
    for (int i = 0; i < size(); ++i)
      if (std::abs(vectors.col(i).norm() - 1.0) > 1e-9)
        throw domain_error("embedding column " + std::to_string(i) +
                           " drifted off the unit sphere");
  }
};

/// Index set over samples plus the per-class prototype multiplicity n_w.
struct BatchPlan {
  std::vector<int> sample_indices;
  int proto_multiplicity = 0;        // n_w
  std::vector<int> per_class_counts; // n_{B,c}, derived from the labels
};

inline BatchPlan make_batch_plan(std::vector<int> indices, int n_w,
                                 const std::vector<int>& labels, int k) {
  BatchPlan plan;
  plan.sample_indices = std::move(indices);
  plan.proto_multiplicity = n_w;
  plan.per_class_counts.assign(k, 0);
  std::vector<char> seen(labels.size(), 0);
  for (int i : plan.sample_indices) {
    if (i < 0 || i >= static_cast<int>(labels.size()))
      throw domain_error("batch index " + std::to_string(i) + " out of range");
    if (seen[i]) throw domain_error("batch index " + std::to_string(i) + " repeated");
    seen[i] = 1;
    ++plan.per_class_counts[labels[i]];
  }
  return plan;
}

/// STEP imbalance: the first k/2 classes get n_maj samples each, the last k/2
/// get n_maj/R (floored). Fails if any class would end up empty.
inline LabelDistribution step_imbalance(int k, int n_maj, int ratio) {
  if (k <= 0 || k % 2 != 0)
    throw domain_error("STEP imbalance needs an even, positive class count");
  if (ratio < 1) throw domain_error("imbalance ratio must be >= 1");
  if (n_maj < 1) throw domain_error("majority count must be >= 1");
  const int n_min = n_maj / ratio;
  if (n_min < 1)
    throw domain_error("minority count n_maj/R = " + std::to_string(n_maj) + "/" +
                       std::to_string(ratio) + " is below 1");
  LabelDistribution dist;
  dist.counts.assign(k, n_maj);
  std::fill(dist.counts.begin() + k / 2, dist.counts.end(), n_min);
  return dist;
}

/// i.i.d. Gaussian directions on the unit sphere, labelled in canonical class
/// order. Deterministic for a fixed seed.
inline EmbeddingSet init_embeddings(const LabelDistribution& dist, int d,
                                    unsigned long long seed) {
  if (d < 1) throw dimension_error("embedding dimension must be >= 1");
  for (int c : dist.counts)
    if (c < 1) throw domain_error("every class needs at least one sample");
  rng_engine engine(seed);
  EmbeddingSet set;
  set.num_classes = dist.class_count();
  set.labels = dist.labels();
  set.vectors = random_unit_columns(d, dist.total(), engine);
  return set;
}

namespace detail {

/// Force every class into the batch. While some class still has a duplicate,
/// replace one of its surplus members with a held-out sample of a missing
/// class; if the batch is smaller than k and all members are distinct
/// classes already, grow it instead. The swapped-in index may also appear in
/// another batch of the same epoch, so epoch-wide uniqueness is given up in
/// exchange for the guarantee.
inline void bind_batch(std::vector<int>& batch, const std::vector<int>& labels,
                       int k, const std::vector<std::vector<int>>& by_class,
                       rng_engine& engine) {
  for (;;) {
    std::vector<int> count(k, 0);
    for (int i : batch) ++count[labels[i]];
    int missing = -1;
    for (int c = 0; c < k; ++c)
      if (count[c] == 0) { missing = c; break; }
    if (missing < 0) return;

    std::vector<int> donors;
    for (int i : by_class[missing])
      if (std::find(batch.begin(), batch.end(), i) == batch.end())
        donors.push_back(i);
    if (donors.empty())
      throw config_error("class " + std::to_string(missing) +
                         " has no sample available for batch binding");
    std::uniform_int_distribution<std::size_t> pick(0, donors.size() - 1);
    const int incoming = donors[pick(engine)];

    int biggest = -1;
    for (int c = 0; c < k; ++c)
      if (count[c] >= 2 && (biggest < 0 || count[c] > count[biggest])) biggest = c;
    if (biggest < 0) {
      batch.push_back(incoming);  // all present classes are singletons
    } else {
      auto victim = std::find_if(batch.begin(), batch.end(),
                                 [&](int i) { return labels[i] == biggest; });
      *victim = incoming;
    }
  }
}

}  // namespace detail

/// Random partition of the dataset into batches of size n for one epoch (last
/// short batch kept). With bind_classes, each batch is post-processed to
/// contain every class; see bind_batch for the exchange rule.
inline std::vector<BatchPlan> sample_batches(const LabelDistribution& dist, int n,
                                             int n_w, rng_engine& engine,
                                             bool bind_classes) {
  const int total = dist.total();
  const int k = dist.class_count();
  if (n < 1 || n > total)
    throw config_error("batch size must lie in [1, N]");
  if (bind_classes && n < k)
    throw config_error("batch binding needs batch size >= class count");
  const std::vector<int> labels = dist.labels();

  std::vector<int> perm(total);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), engine);

  std::vector<std::vector<int>> by_class(k);
  for (int i = 0; i < total; ++i) by_class[labels[i]].push_back(i);

  std::vector<BatchPlan> plans;
  for (int start = 0; start < total; start += n) {
    const int stop = std::min(start + n, total);
    std::vector<int> batch(perm.begin() + start, perm.begin() + stop);
    if (bind_classes) detail::bind_batch(batch, labels, k, by_class, engine);
    plans.push_back(make_batch_plan(std::move(batch), n_w, labels, k));
  }
  return plans;
}

/// Convenience overload seeding a fresh engine.
inline std::vector<BatchPlan> sample_batches(const LabelDistribution& dist, int n,
                                             int n_w, unsigned long long seed,
                                             bool bind_classes) {
  rng_engine engine(seed);
  return sample_batches(dist, n, n_w, engine, bind_classes);
}

}  // namespace protogeom
