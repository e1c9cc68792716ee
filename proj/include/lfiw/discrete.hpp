#pragma once

#include <lfiw/random.hpp>
#include <lfiw/types.hpp>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace lfiw {

/// Explicit finite-support density pair (p, p_theta). Serves as the exact
/// oracle for importance weights, KL quantities, and resampling limits.
class DiscreteDistributionPair {
 public:
  DiscreteDistributionPair(Vector p, Vector p_theta,
                           bool require_absolute_continuity = true)
      : p_(std::move(p)), p_theta_(std::move(p_theta)) {
    require(p_.size() == p_theta_.size() && p_.size() > 0,
            "DiscreteDistributionPair: vectors must be non-empty and equal length");
    validate_density(p_, "p");
    validate_density(p_theta_, "p_theta");
    if (require_absolute_continuity) {
      for (Eigen::Index i = 0; i < p_.size(); ++i) {
        if (p_(i) > 0.0 && p_theta_(i) == 0.0)
          throw std::invalid_argument(
              "DiscreteDistributionPair: p is not absolutely continuous "
              "w.r.t. p_theta at index " + std::to_string(i));
      }
    }
  }

  Eigen::Index size() const { return p_.size(); }
  const Vector& p() const { return p_; }
  const Vector& p_theta() const { return p_theta_; }

  /// Exact density ratio p(x)/p_theta(x) per support symbol. Errors where
  /// p_theta(x) = 0 with p(x) > 0; yields 0 where both vanish.
  Vector oracle_weights() const {
    Vector w(p_.size());
    for (Eigen::Index i = 0; i < p_.size(); ++i) {
      if (p_theta_(i) == 0.0) {
        if (p_(i) > 0.0)
          throw std::domain_error(
              "oracle_weights: support violation at index " + std::to_string(i));
        w(i) = 0.0;
      } else {
        w(i) = p_(i) / p_theta_(i);
      }
    }
    return w;
  }

  /// Bayes-optimal classifier probabilities c*(x) = p(x)/(p(x) + gamma*p_theta(x)).
  Vector bayes_optimal_probs(double gamma) const {
    require(gamma > 0.0, "bayes_optimal_probs: gamma must be positive");
    Vector c(p_.size());
    for (Eigen::Index i = 0; i < p_.size(); ++i) {
      const double denom = p_(i) + gamma * p_theta_(i);
      if (denom == 0.0)
        throw std::domain_error(
            "bayes_optimal_probs: both densities vanish at index " +
            std::to_string(i));
      c(i) = p_(i) / denom;
    }
    return c;
  }

  std::size_t sample(rng::Rng& g) const {
    return g.categorical({p_theta_.data(), static_cast<std::size_t>(p_theta_.size())});
  }

  std::size_t sample_p(rng::Rng& g) const {
    return g.categorical({p_.data(), static_cast<std::size_t>(p_.size())});
  }

  double kl_p_ptheta() const { return kl(p_, p_theta_); }

  /// D_KL(a || b) over matching finite supports, with the 0 log 0 = 0 convention.
  static double kl(const Vector& a, const Vector& b) {
    require(a.size() == b.size(), "kl: size mismatch");
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      if (a(i) == 0.0) continue;
      if (b(i) == 0.0) throw std::domain_error("kl: support violation");
      s += a(i) * std::log(a(i) / b(i));
    }
    return s;
  }

 private:
  static void validate_density(const Vector& v, const char* name) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (!(v(i) >= 0.0) || !std::isfinite(v(i)))
        throw std::invalid_argument(std::string(name) +
                                    ": entries must be finite and >= 0");
      total += v(i);
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw std::invalid_argument(std::string(name) + ": must sum to 1");
  }

  Vector p_;
  Vector p_theta_;
};

/// Total variation distance between two distributions on the same support.
inline double total_variation(const Vector& a, const Vector& b) {
  require(a.size() == b.size(), "total_variation: size mismatch");
  return 0.5 * (a - b).cwiseAbs().sum();
}

/// Random probability vector ~ Dirichlet(1,...,1) via normalized exponentials.
inline Vector random_simplex(Eigen::Index k, rng::Rng& g, double floor = 1e-3) {
  Vector v(k);
  for (Eigen::Index i = 0; i < k; ++i)
    v(i) = -std::log(1.0 - g.uniform()) + floor;
  v /= v.sum();
  return v;
}

/// Random weight vector with entries log-uniform in [exp(-2), exp(2)].
inline Vector random_log_uniform_weights(Eigen::Index k, rng::Rng& g) {
  Vector w(k);
  for (Eigen::Index i = 0; i < k; ++i) w(i) = std::exp(g.uniform(-2.0, 2.0));
  return w;
}

}  // namespace lfiw
