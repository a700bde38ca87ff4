#pragma once

#include <stdexcept>

namespace protogeom {

/// Base class for all protogeom errors.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Requested construction does not fit in the given embedding dimension.
struct dimension_error : error {
  using error::error;
};

/// Invalid argument values (odd class count for STEP splits, empty class, ...).
struct domain_error : error {
  using error::error;
};

/// Invalid or inconsistent experiment configuration.
struct config_error : error {
  using error::error;
};

/// Incompatible shapes or label spaces between embeddings and prototypes.
struct mismatch_error : error {
  using error::error;
};

/// A quantity that must be nonzero vanished (all-zero Gram, zero class means).
struct degenerate_error : error {
  using error::error;
};

/// A class has no samples where at least one is required.
struct empty_class_error : error {
  using error::error;
};

/// No anchor in the batch has a positive; the loss is undefined.
struct empty_anchor_error : error {
  using error::error;
};

/// A gradient or update contained NaN/Inf; the run is aborted.
struct nonfinite_error : error {
  using error::error;
};

/// Problems with a target Gram matrix.
struct gram_error : error {
  using error::error;
};

/// Target Gram has an eigenvalue below -1e-8.
struct not_psd_error : gram_error {
  using gram_error::gram_error;
};

/// Numerical rank of the target exceeds the embedding dimension.
struct rank_error : gram_error {
  using gram_error::gram_error;
};

/// Target diagonal is not all ones.
struct diagonal_error : gram_error {
  using gram_error::gram_error;
};

}  // namespace protogeom
