#pragma once

#include <lfiw/classifier.hpp>
#include <lfiw/parallel.hpp>
#include <lfiw/random.hpp>
#include <lfiw/types.hpp>
#include <lfiw/weights.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace lfiw::estimators {

struct WeightStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double effective_sample_size = 0.0;
};

struct EstimateReport {
  double value = 0.0;
  double stderr_ = 0.0;  // sample std of the weighted summands / sqrt(T)
  std::int64_t batch_size = 0;
  WeightStats weight_stats;
};

namespace detail {

inline double sample_std(const Vector& v) {
  if (v.size() < 2) return 0.0;
  const double mean = v.mean();
  const double ss = (v.array() - mean).square().sum();
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Type-7 quantile (linear interpolation) over an unsorted copy.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(v.begin(), v.end());
  if (q <= 0.0) return v.front();
  if (q >= 1.0) return v.back();
  const double h = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(h);
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

}  // namespace detail

/// Weighted Monte Carlo estimate of E_p[f] from transformed weights and
/// per-point f values. Self-normalized: sum(w_i f_i) with sum(w) = 1; plain:
/// mean(w_i f_i).
inline EstimateReport estimate_expectation(const Vector& raw_weights,
                                           const Vector& f_values,
                                           const WeightConfig& config) {
  require(raw_weights.size() == f_values.size() && raw_weights.size() >= 1,
          "estimate_expectation: weights/values length mismatch");
  require(f_values.allFinite(), "estimate_expectation: non-finite f values");
  const Vector w = transform_weights(raw_weights, config);
  const auto t = static_cast<double>(w.size());

  EstimateReport rep;
  rep.batch_size = w.size();
  rep.weight_stats = {w.minCoeff(), w.maxCoeff(), w.mean(),
                      effective_sample_size(w)};

  // Summands are scaled so their mean equals the estimate in both modes.
  Vector summands = w.cwiseProduct(f_values);
  if (config.self_normalize) summands *= t;
  rep.value = summands.mean();
  rep.stderr_ = detail::sample_std(summands) / std::sqrt(t);
  return rep;
}

inline EstimateReport estimate_expectation(
    const WeightedBatch& batch, const std::function<double(const Vector&)>& f,
    const WeightConfig& config) {
  Vector fv(batch.points.rows());
  for (Eigen::Index i = 0; i < batch.points.rows(); ++i)
    fv(i) = f(batch.points.row(i).transpose());
  return estimate_expectation(batch.raw_weights, fv, config);
}

// --- Bootstrap confidence intervals --------------------------------------

enum class BootstrapMode { empirical, parametric, combined };

inline std::string to_string(BootstrapMode m) {
  switch (m) {
    case BootstrapMode::empirical: return "empirical";
    case BootstrapMode::parametric: return "parametric";
    default: return "combined";
  }
}

inline BootstrapMode bootstrap_mode_from_string(const std::string& s) {
  if (s == "empirical") return BootstrapMode::empirical;
  if (s == "parametric") return BootstrapMode::parametric;
  if (s == "combined") return BootstrapMode::combined;
  throw std::invalid_argument("unknown bootstrap mode: " + s);
}

struct BootstrapConfig {
  int n_resamples = 1000;
  double confidence = 0.95;
  BootstrapMode mode = BootstrapMode::combined;
  std::uint64_t seed = 0;

  void validate() const {
    require(n_resamples >= 2, "BootstrapConfig: need at least 2 resamples");
    require(confidence > 0.0 && confidence < 1.0,
            "BootstrapConfig: confidence must be in (0, 1)");
  }
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  double point_estimate = 0.0;
};

/// Draws n fresh model samples; must be a pure function of (n, seed).
using ModelSampler = std::function<Matrix(Eigen::Index, std::uint64_t)>;

/// Per-query-point confidence intervals for the estimated importance weight.
/// Each resample rebuilds the training set (real side resampled with
/// replacement, model side freshly drawn, depending on mode), retrains the
/// classifier, and records the weights at the query points. Resamples run in
/// parallel with indexed seed streams, so results do not depend on the thread
/// count.
inline std::vector<Interval> bootstrap_ci(
    const ratio::LabeledRatioDataset& dataset, const ModelSampler& model_sampler,
    const Matrix& query_points, const ratio::TrainConfig& train,
    const BootstrapConfig& boot,
    ratio::Architecture arch = ratio::Architecture::mlp) {
  dataset.validate();
  boot.validate();
  require(query_points.rows() >= 1, "bootstrap_ci: no query points");

  const ratio::ProbClassifier base = ratio::train_classifier(dataset, train, arch);
  const Vector point = ratio::importance_weights(base, dataset.gamma, query_points);

  const auto n_q = query_points.rows();
  const auto r = static_cast<std::size_t>(boot.n_resamples);
  Matrix resampled(boot.n_resamples, n_q);

  parallel::parallel_for(r, [&](std::size_t rep) {
    rng::Rng g(rng::derive_seed(boot.seed, "bootstrap", rep));
    ratio::LabeledRatioDataset d;
    d.gamma = dataset.gamma;

    const bool resample_real = boot.mode != BootstrapMode::parametric;
    const bool fresh_model = boot.mode != BootstrapMode::empirical;

    if (resample_real) {
      d.positives.resize(dataset.positives.rows(), dataset.positives.cols());
      for (Eigen::Index i = 0; i < d.positives.rows(); ++i)
        d.positives.row(i) = dataset.positives.row(static_cast<Eigen::Index>(
            g.integer(static_cast<std::uint64_t>(dataset.positives.rows()))));
    } else {
      d.positives = dataset.positives;
    }
    if (fresh_model) {
      d.negatives = model_sampler(dataset.negatives.rows(),
                                  rng::derive_seed(boot.seed, "bootstrap-model", rep));
    } else {
      d.negatives.resize(dataset.negatives.rows(), dataset.negatives.cols());
      for (Eigen::Index i = 0; i < d.negatives.rows(); ++i)
        d.negatives.row(i) = dataset.negatives.row(static_cast<Eigen::Index>(
            g.integer(static_cast<std::uint64_t>(dataset.negatives.rows()))));
    }

    // Training keeps the base seed: resample variability comes from the data
    // alone, so identical resamples reproduce identical classifiers.
    const ratio::ProbClassifier clf = ratio::train_classifier(d, train, arch);
    resampled.row(static_cast<Eigen::Index>(rep)) =
        ratio::importance_weights(clf, d.gamma, query_points).transpose();
  });

  const double lo_q = (1.0 - boot.confidence) / 2.0;
  const double hi_q = (1.0 + boot.confidence) / 2.0;
  std::vector<Interval> out(static_cast<std::size_t>(n_q));
  for (Eigen::Index q = 0; q < n_q; ++q) {
    std::vector<double> column(resampled.col(q).data(),
                               resampled.col(q).data() + boot.n_resamples);
    out[static_cast<std::size_t>(q)] = {detail::quantile(column, lo_q),
                                        detail::quantile(column, hi_q),
                                        point(q)};
  }
  return out;
}

// --- Bias-variance harness ------------------------------------------------

struct BiasVarianceRecord {
  std::string statistic_id;
  double bias = 0.0;      // truth - mean over trials of the estimate
  double variance = 0.0;  // population variance over trials
  double mse = 0.0;       // mean squared error against truth
};

struct BiasVarianceReport {
  WeightConfig config;
  std::vector<BiasVarianceRecord> records;
  int n_trials = 0;
};

struct Statistic {
  std::string id;
  std::function<double(const Vector&)> f;
};

/// Produces a fresh batch (model points + raw weights) per trial index.
using TrialSampler = std::function<WeightedBatch(int trial)>;

/// Empirical MSE = bias^2 + variance decomposition over repeated trials, per
/// estimator configuration and statistic. Uses the population (divide-by-n)
/// variance so the identity holds exactly.
inline std::vector<BiasVarianceReport> bias_variance_decompose(
    const std::vector<WeightConfig>& estimator_configs,
    const std::vector<Statistic>& statistics, const std::vector<double>& truth,
    const TrialSampler& trial_sampler, int n_trials) {
  require(truth.size() == statistics.size(),
          "bias_variance_decompose: truth/statistics length mismatch");
  require(n_trials >= 2, "bias_variance_decompose: need at least 2 trials");
  require(!estimator_configs.empty() && !statistics.empty(),
          "bias_variance_decompose: empty inputs");

  const auto n_cfg = estimator_configs.size();
  const auto n_stat = statistics.size();
  // estimates[cfg][stat][trial]
  std::vector<std::vector<Vector>> estimates(
      n_cfg, std::vector<Vector>(n_stat, Vector(n_trials)));

  for (int trial = 0; trial < n_trials; ++trial) {
    const WeightedBatch batch = trial_sampler(trial);
    Matrix fv(batch.points.rows(), static_cast<Eigen::Index>(n_stat));
    for (std::size_t s = 0; s < n_stat; ++s)
      for (Eigen::Index i = 0; i < batch.points.rows(); ++i)
        fv(i, static_cast<Eigen::Index>(s)) =
            statistics[s].f(batch.points.row(i).transpose());
    for (std::size_t cfgi = 0; cfgi < n_cfg; ++cfgi) {
      for (std::size_t s = 0; s < n_stat; ++s) {
        const auto rep = estimate_expectation(
            batch.raw_weights, fv.col(static_cast<Eigen::Index>(s)),
            estimator_configs[cfgi]);
        estimates[cfgi][s](trial) = rep.value;
      }
    }
  }

  std::vector<BiasVarianceReport> reports;
  reports.reserve(n_cfg);
  for (std::size_t cfgi = 0; cfgi < n_cfg; ++cfgi) {
    BiasVarianceReport rep;
    rep.config = estimator_configs[cfgi];
    rep.n_trials = n_trials;
    for (std::size_t s = 0; s < n_stat; ++s) {
      const Vector& est = estimates[cfgi][s];
      BiasVarianceRecord rec;
      rec.statistic_id = statistics[s].id;
      const double mean_est = est.mean();
      rec.bias = truth[s] - mean_est;
      rec.variance = (est.array() - mean_est).square().mean();
      rec.mse = (est.array() - truth[s]).square().mean();
      rep.records.push_back(std::move(rec));
    }
    reports.push_back(std::move(rep));
  }
  return reports;
}

}  // namespace lfiw::estimators
