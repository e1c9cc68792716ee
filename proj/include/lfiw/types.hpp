#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace lfiw {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Version string embedded in serialized artifacts and run manifests.
inline constexpr const char* kVersion = "0.1.0";

/// Probability clamp applied to every classifier output before it is turned
/// into an importance weight. Keeps weights finite under saturated sigmoids.
inline constexpr double kProbClamp = 1e-7;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace lfiw
