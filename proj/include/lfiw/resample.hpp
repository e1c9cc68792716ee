#pragma once

#include <lfiw/discrete.hpp>
#include <lfiw/random.hpp>
#include <lfiw/types.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace lfiw::resample {

/// Base model plus importance-weight estimator; together they induce the
/// resampled distribution proportional to p_theta(x) * w(x). X is the sample
/// type (std::size_t for discrete supports, Vector for continuous spaces).
template <class X>
struct ResampledModel {
  std::function<X(rng::Rng&)> base_sampler;
  std::function<double(const X&)> weight_fn;
  int particles_T = 1;

  void validate() const {
    require(static_cast<bool>(base_sampler), "ResampledModel: missing sampler");
    require(static_cast<bool>(weight_fn), "ResampledModel: missing weight_fn");
    require(particles_T >= 1, "ResampledModel: particles_T must be >= 1");
  }
};

template <class X>
ResampledModel<X> make_resampled_model(std::function<X(rng::Rng&)> sampler,
                                       std::function<double(const X&)> weight,
                                       int particles) {
  ResampledModel<X> m{std::move(sampler), std::move(weight), particles};
  m.validate();
  return m;
}

inline ResampledModel<std::size_t> resampled_from_pair(
    const DiscreteDistributionPair& pair, Vector weights, int particles) {
  require(weights.size() == pair.size(), "resampled_from_pair: weight length");
  auto w = std::make_shared<Vector>(std::move(weights));
  return make_resampled_model<std::size_t>(
      [pair](rng::Rng& g) { return pair.sample(g); },
      [w](const std::size_t& i) { return (*w)(static_cast<Eigen::Index>(i)); },
      particles);
}

struct PartitionEstimate {
  double z_hat = 0.0;
  double stderr_ = 0.0;
};

/// Monte Carlo estimate of the partition function Z = E_{p_theta}[w] from
/// independent base draws. Always uses raw weights.
template <class X>
PartitionEstimate estimate_partition(const ResampledModel<X>& model,
                                     std::int64_t n_samples,
                                     std::uint64_t seed) {
  model.validate();
  require(n_samples >= 1, "estimate_partition: n_samples must be >= 1");
  rng::Rng g(seed);
  double sum = 0.0, sum_sq = 0.0;
  for (std::int64_t i = 0; i < n_samples; ++i) {
    const X x = model.base_sampler(g);
    const double w = model.weight_fn(x);
    if (!(w >= 0.0) || !std::isfinite(w))
      throw std::runtime_error("estimate_partition: invalid weight");
    sum += w;
    sum_sq += w * w;
  }
  const double n = static_cast<double>(n_samples);
  PartitionEstimate out;
  out.z_hat = sum / n;
  if (n_samples >= 2) {
    const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0));
    out.stderr_ = std::sqrt(var / n);
  }
  return out;
}

/// Exact partition function for a discrete pair: sum p_theta(x) w(x).
inline double exact_partition(const DiscreteDistributionPair& pair,
                              const Vector& weights) {
  require(weights.size() == pair.size(), "exact_partition: weight length");
  return pair.p_theta().dot(weights);
}

/// Exact induced pmf, p_theta(x) w(x) / Z.
inline Vector resampled_pmf(const DiscreteDistributionPair& pair,
                            const Vector& weights) {
  const double z = exact_partition(pair, weights);
  require(z > 0.0, "resampled_pmf: partition function is zero");
  return pair.p_theta().cwiseProduct(weights) / z;
}

/// One draw from the SIR approximation: T particles from the base model,
/// one kept with probability proportional to its weight.
template <class X>
X sir_sample(const ResampledModel<X>& model, rng::Rng& g) {
  model.validate();
  std::vector<X> particles;
  particles.reserve(static_cast<std::size_t>(model.particles_T));
  std::vector<double> weights(static_cast<std::size_t>(model.particles_T));
  for (int t = 0; t < model.particles_T; ++t) {
    particles.push_back(model.base_sampler(g));
    weights[static_cast<std::size_t>(t)] = model.weight_fn(particles.back());
  }
  // categorical() rejects an all-zero batch
  const std::size_t j = g.categorical(weights);
  return particles[j];
}

template <class X>
X sir_sample(const ResampledModel<X>& model, std::uint64_t seed) {
  rng::Rng g(seed);
  return sir_sample(model, g);
}

/// Monte Carlo estimate of the SIR density at x for a finite particle budget:
/// T * E_{x_2..x_T ~ p_theta}[ w(x) / (w(x) + sum_i w(x_i)) ] * base_density(x).
/// The leading T makes the density integrate to 1 and reduces to the base
/// density at T = 1; the T -> infinity limit is the induced distribution.
template <class X>
double sir_density(const ResampledModel<X>& model, const X& x,
                   const std::function<double(const X&)>& base_density,
                   std::int64_t n_outer, std::uint64_t seed) {
  model.validate();
  require(n_outer >= 1, "sir_density: n_outer must be >= 1");
  const double wx = model.weight_fn(x);
  const double px = base_density(x);
  rng::Rng g(seed);
  double acc = 0.0;
  for (std::int64_t rep = 0; rep < n_outer; ++rep) {
    double others = 0.0;
    for (int t = 1; t < model.particles_T; ++t)
      others += model.weight_fn(model.base_sampler(g));
    const double denom = wx + others;
    acc += denom > 0.0 ? wx / denom : 0.0;
  }
  return static_cast<double>(model.particles_T) * px * acc /
         static_cast<double>(n_outer);
}

/// Exact SIR density on a discrete pair by enumerating every configuration of
/// the T - 1 auxiliary particles. Gated to K <= 6, T <= 3 so the enumeration
/// stays small.
inline double sir_density_exact(const DiscreteDistributionPair& pair,
                                const Vector& weights, std::size_t x, int t) {
  require(weights.size() == pair.size(), "sir_density_exact: weight length");
  require(t >= 1 && t <= 3, "sir_density_exact: T must be in [1, 3]");
  require(pair.size() <= 6, "sir_density_exact: support too large (K <= 6)");
  require(x < static_cast<std::size_t>(pair.size()), "sir_density_exact: bad symbol");
  const auto k = static_cast<std::size_t>(pair.size());
  const double wx = weights(static_cast<Eigen::Index>(x));
  const double px = pair.p_theta()(static_cast<Eigen::Index>(x));
  const int aux = t - 1;

  double expectation = 0.0;
  std::vector<std::size_t> idx(static_cast<std::size_t>(aux), 0);
  for (;;) {
    double prob = 1.0, others = 0.0;
    for (std::size_t a = 0; a < idx.size(); ++a) {
      prob *= pair.p_theta()(static_cast<Eigen::Index>(idx[a]));
      others += weights(static_cast<Eigen::Index>(idx[a]));
    }
    const double denom = wx + others;
    expectation += denom > 0.0 ? prob * wx / denom : 0.0;
    // odometer over the auxiliary particles
    std::size_t pos = 0;
    while (pos < idx.size() && ++idx[pos] == k) idx[pos++] = 0;
    if (pos == idx.size()) break;
  }
  if (aux == 0) expectation = wx > 0.0 ? 1.0 : 0.0;
  return static_cast<double>(t) * px * expectation;
}

// --- KL improvement diagnostics -------------------------------------------

/// Monte Carlo diagnostics for the resampling KL change. delta_estimate
/// follows the KL-difference convention (negative = resampling improves the
/// fit): delta = log E_{p_theta}[w] - E_{p_data}[log w]. The log of the mean
/// weight is a biased (Jensen) estimate of log Z; the two necessary-condition
/// gaps use unbiased means only.
struct KlDiagnostics {
  double lhs_estimate = 0.0;   // E_{p_data}[log w]
  double rhs_log_mean = 0.0;   // log E_{p_theta}[w]
  double delta_estimate = 0.0; // rhs_log_mean - lhs_estimate
  double nec1_gap = 0.0;       // E_{p_data}[w] - E_{p_theta}[w]
  double nec2_gap = 0.0;       // E_{p_data}[log w] - E_{p_theta}[log w]
  double lhs_stderr = 0.0;
  double nec1_stderr = 0.0;
  double nec2_stderr = 0.0;
  bool improvement_consistent = false;  // both gaps >= 0 (necessary conditions)
};

namespace detail {
struct MeanVar {
  double mean = 0.0;
  double sem = 0.0;  // standard error of the mean
};

inline MeanVar mean_sem(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}
}  // namespace detail

template <class X>
KlDiagnostics kl_diagnostics(const std::vector<X>& real_data,
                             const std::vector<X>& model_samples,
                             const std::function<double(const X&)>& weight_fn) {
  require(!real_data.empty() && !model_samples.empty(),
          "kl_diagnostics: empty sample lists");
  auto eval = [&](const std::vector<X>& xs) {
    std::vector<double> w(xs.size()), logw(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double wi = weight_fn(xs[i]);
      if (!(wi > 0.0) || !std::isfinite(wi))
        throw std::runtime_error("kl_diagnostics: weights must be strictly positive");
      w[i] = wi;
      logw[i] = std::log(wi);
    }
    return std::pair{w, logw};
  };
  const auto [w_real, logw_real] = eval(real_data);
  const auto [w_model, logw_model] = eval(model_samples);

  const auto real_w = detail::mean_sem(w_real);
  const auto real_logw = detail::mean_sem(logw_real);
  const auto model_w = detail::mean_sem(w_model);
  const auto model_logw = detail::mean_sem(logw_model);

  KlDiagnostics d;
  d.lhs_estimate = real_logw.mean;
  d.lhs_stderr = real_logw.sem;
  d.rhs_log_mean = std::log(model_w.mean);
  d.delta_estimate = d.rhs_log_mean - d.lhs_estimate;
  d.nec1_gap = real_w.mean - model_w.mean;
  d.nec2_gap = real_logw.mean - model_logw.mean;
  d.nec1_stderr = std::sqrt(real_w.sem * real_w.sem + model_w.sem * model_w.sem);
  d.nec2_stderr =
      std::sqrt(real_logw.sem * real_logw.sem + model_logw.sem * model_logw.sem);
  d.improvement_consistent = d.nec1_gap >= 0.0 && d.nec2_gap >= 0.0;
  return d;
}

/// Exhaustive-enumeration diagnostics on a discrete pair; reproduces
/// exact_delta_kl in delta_estimate.
inline KlDiagnostics kl_diagnostics_exact(const DiscreteDistributionPair& pair,
                                          const Vector& weights) {
  require(weights.size() == pair.size(), "kl_diagnostics_exact: weight length");
  double lhs = 0.0, mean_w_model = 0.0, mean_w_real = 0.0, mean_logw_model = 0.0;
  for (Eigen::Index i = 0; i < pair.size(); ++i) {
    const double w = weights(i);
    if (pair.p()(i) > 0.0 || pair.p_theta()(i) > 0.0)
      require(w > 0.0 && std::isfinite(w),
              "kl_diagnostics_exact: weights must be strictly positive on support");
    const double logw = w > 0.0 ? std::log(w) : 0.0;
    lhs += pair.p()(i) * logw;
    mean_w_real += pair.p()(i) * w;
    mean_w_model += pair.p_theta()(i) * w;
    mean_logw_model += pair.p_theta()(i) * logw;
  }
  KlDiagnostics d;
  d.lhs_estimate = lhs;
  d.rhs_log_mean = std::log(mean_w_model);
  d.delta_estimate = d.rhs_log_mean - d.lhs_estimate;
  d.nec1_gap = mean_w_real - mean_w_model;
  d.nec2_gap = lhs - mean_logw_model;
  d.improvement_consistent = d.nec1_gap >= 0.0 && d.nec2_gap >= 0.0;
  return d;
}

/// Exact KL change from resampling: D_KL(p || p_resampled) - D_KL(p || p_theta),
/// with p_resampled = p_theta * w / Z. Negative means the resampled model is a
/// strictly better fit.
inline double exact_delta_kl(const DiscreteDistributionPair& pair,
                             const Vector& weights) {
  require(weights.size() == pair.size(), "exact_delta_kl: weight length");
  for (Eigen::Index i = 0; i < pair.size(); ++i)
    if (pair.p()(i) > 0.0)
      require(weights(i) > 0.0 && std::isfinite(weights(i)),
              "exact_delta_kl: weights must be strictly positive where p > 0");
  const Vector q = resampled_pmf(pair, weights);
  return DiscreteDistributionPair::kl(pair.p(), q) -
         DiscreteDistributionPair::kl(pair.p(), pair.p_theta());
}

}  // namespace lfiw::resample
