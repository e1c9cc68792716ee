#pragma once

#include <lfiw/types.hpp>

#include <cmath>
#include <stdexcept>

namespace lfiw::estimators {

/// Selects the importance-weight variant: power flattening (alpha), lower-bound
/// clipping (beta), and batch self-normalization. alpha=1, beta=0, no
/// normalization is the plain estimator.
struct WeightConfig {
  double gamma = 1.0;
  double alpha = 1.0;
  double beta = 0.0;
  bool self_normalize = false;

  void validate() const {
    require(gamma > 0.0, "WeightConfig: gamma must be positive");
    require(alpha >= 0.0, "WeightConfig: alpha must be >= 0");
    require(beta >= 0.0, "WeightConfig: beta must be >= 0");
  }

  static WeightConfig plain() { return {}; }
  static WeightConfig self_normalized() { return {1.0, 1.0, 0.0, true}; }
};

/// Applies, in order: w <- w^alpha, w <- max(w, beta), and if requested
/// w <- w / sum(w). Flattening precedes clipping so beta acts as a floor on
/// the flattened scale.
inline Vector transform_weights(const Vector& raw, const WeightConfig& config) {
  config.validate();
  require(raw.size() > 0, "transform_weights: empty weight vector");
  Vector w(raw.size());
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    const double r = raw(i);
    if (!(r >= 0.0) || !std::isfinite(r))
      throw std::invalid_argument(
          "transform_weights: weights must be finite and >= 0");
    w(i) = config.alpha == 1.0 ? r : std::pow(r, config.alpha);
    if (w(i) < config.beta) w(i) = config.beta;
  }
  if (config.self_normalize) {
    const double total = w.sum();
    if (total <= 0.0)
      throw std::runtime_error(
          "transform_weights: cannot self-normalize all-zero weights");
    w /= total;
  }
  return w;
}

/// (sum w)^2 / sum(w^2); equals the batch size iff all weights are equal.
inline double effective_sample_size(const Vector& w) {
  require(w.size() > 0, "effective_sample_size: empty weights");
  const double s1 = w.sum();
  const double s2 = w.squaredNorm();
  if (s2 == 0.0) return 0.0;
  return s1 * s1 / s2;
}

/// Model samples paired with raw and transformed importance weights.
struct WeightedBatch {
  Matrix points;        // one sample per row, drawn from the model
  Vector raw_weights;   // classifier-implied weights, >= 0
  Vector transformed_weights;

  WeightedBatch() = default;
  WeightedBatch(Matrix pts, Vector raw, const WeightConfig& config)
      : points(std::move(pts)),
        raw_weights(std::move(raw)),
        transformed_weights(transform_weights(raw_weights, config)) {
    require(points.rows() == raw_weights.size() && points.rows() >= 1,
            "WeightedBatch: points/weights length mismatch");
  }
};

}  // namespace lfiw::estimators
