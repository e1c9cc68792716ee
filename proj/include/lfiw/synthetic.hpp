#pragma once

#include <lfiw/classifier.hpp>
#include <lfiw/estimators.hpp>
#include <lfiw/random.hpp>
#include <lfiw/types.hpp>
#include <lfiw/weights.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

namespace lfiw::synthetic {

inline double normal_pdf(double x, double mean, double stddev) {
  const double z = (x - mean) / stddev;
  return std::exp(-0.5 * z * z) / (stddev * std::sqrt(2.0 * M_PI));
}

/// Univariate Gaussian mixture; the canonical bimodal target of the toy
/// importance-weighting study.
struct GaussianMixture1D {
  std::vector<double> means;
  std::vector<double> stds;
  std::vector<double> weights;

  void validate() const {
    require(means.size() == stds.size() && means.size() == weights.size() &&
                !means.empty(),
            "GaussianMixture1D: component lists must be equal length");
    double total = 0.0;
    for (std::size_t i = 0; i < means.size(); ++i) {
      require(stds[i] > 0.0, "GaussianMixture1D: stds must be positive");
      require(weights[i] >= 0.0, "GaussianMixture1D: weights must be >= 0");
      total += weights[i];
    }
    require(std::abs(total - 1.0) <= 1e-12, "GaussianMixture1D: weights must sum to 1");
  }

  double pdf(double x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < means.size(); ++i)
      s += weights[i] * normal_pdf(x, means[i], stds[i]);
    return s;
  }

  double sample(rng::Rng& g) const {
    const std::size_t k = g.categorical({weights.data(), weights.size()});
    return g.normal(means[k], stds[k]);
  }

  double mean() const {
    double m = 0.0;
    for (std::size_t i = 0; i < means.size(); ++i) m += weights[i] * means[i];
    return m;
  }

  double second_moment() const {
    double s = 0.0;
    for (std::size_t i = 0; i < means.size(); ++i)
      s += weights[i] * (stds[i] * stds[i] + means[i] * means[i]);
    return s;
  }

  double variance() const {
    const double m = mean();
    return second_moment() - m * m;
  }
};

/// The canonical bimodal target: 0.5 N(-1, 0.5^2) + 0.5 N(+1, 0.5^2).
inline GaussianMixture1D canonical_mixture() {
  return {{-1.0, 1.0}, {0.5, 0.5}, {0.5, 0.5}};
}

struct MomentMatchedGaussian {
  double mean = 0.0;
  double std = 1.0;

  double pdf(double x) const { return normal_pdf(x, mean, std); }
  double sample(rng::Rng& g) const { return g.normal(mean, std); }
};

/// Maximum-likelihood Gaussian fit: sample mean and divide-by-n standard
/// deviation.
inline MomentMatchedGaussian fit_moment_matched(const std::vector<double>& samples) {
  require(samples.size() >= 2, "fit_moment_matched: need at least 2 samples");
  const double n = static_cast<double>(samples.size());
  double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double var = ss / n;
  if (var <= 0.0)
    throw std::domain_error("fit_moment_matched: zero variance sample");
  return {mean, std::sqrt(var)};
}

/// Optimal class-probability curve c*(x) = p(x) / (p(x) + gamma p_theta(x))
/// from closed-form densities, evaluated on a grid.
inline Vector analytic_bayes_curve(const GaussianMixture1D& mixture,
                                   const MomentMatchedGaussian& model,
                                   double gamma, const Vector& grid) {
  mixture.validate();
  require(gamma > 0.0, "analytic_bayes_curve: gamma must be positive");
  Vector c(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const double p = mixture.pdf(grid(i));
    const double q = model.pdf(grid(i));
    c(i) = p / (p + gamma * q);
  }
  return c;
}

// --- Reference experiment ---------------------------------------------------

struct Fig1Options {
  double grid_lo = -4.0;
  double grid_hi = 4.0;
  int grid_points = 161;
  bool with_bootstrap = true;
  int bootstrap_n = 1000;
  double confidence = 0.95;
  ratio::TrainConfig train = fig1_train_config();

  // Full-batch Adam converges in far fewer passes than plain gradient
  // descent here, which keeps the 1000-resample bootstrap affordable.
  static ratio::TrainConfig fig1_train_config() {
    ratio::TrainConfig t;
    t.optimizer = ratio::Optimizer::adam;
    t.learning_rate = 0.05;
    t.epochs = 400;
    t.batch_size = 2000;
    t.hidden_units = 100;
    return t;
  }
};

struct Fig1Result {
  Vector grid;
  Vector trained_curve;   // classifier probabilities
  Vector optimal_curve;   // analytic Bayes probabilities
  Vector band_lo;         // bootstrap band, probability scale
  Vector band_hi;
  double mean_abs_gap = 0.0;
  double gamma = 1.0;
  GaussianMixture1D target;
  MomentMatchedGaussian model;
};

/// Draws n target samples, fits the moment-matched Gaussian to them, draws n
/// model samples, trains the classifier, and evaluates trained vs optimal
/// probability curves on a fixed grid. Deterministic given (n, seed).
inline Fig1Result run_fig1_experiment(int n, std::uint64_t seed,
                                      Fig1Options opts = {}) {
  require(n >= 10, "run_fig1_experiment: n must be >= 10");
  Fig1Result res;
  res.target = canonical_mixture();

  rng::Rng data_rng(rng::derive_seed(seed, "data"));
  std::vector<double> real(static_cast<std::size_t>(n));
  for (auto& x : real) x = res.target.sample(data_rng);
  res.model = fit_moment_matched(real);

  rng::Rng model_rng(rng::derive_seed(seed, "model"));
  Matrix positives(n, 1), negatives(n, 1);
  for (int i = 0; i < n; ++i) positives(i, 0) = real[static_cast<std::size_t>(i)];
  for (int i = 0; i < n; ++i) negatives(i, 0) = res.model.sample(model_rng);

  const auto dataset = ratio::make_ratio_dataset(positives, negatives);
  res.gamma = dataset.gamma;  // 1 by construction: equal class sizes

  ratio::TrainConfig train = opts.train;
  train.seed = rng::derive_seed(seed, "train");
  const auto clf = ratio::train_classifier(dataset, train, ratio::Architecture::mlp);

  res.grid = Vector::LinSpaced(opts.grid_points, opts.grid_lo, opts.grid_hi);
  Matrix grid_pts(opts.grid_points, 1);
  grid_pts.col(0) = res.grid;
  res.trained_curve = clf.predict(grid_pts);
  res.optimal_curve =
      analytic_bayes_curve(res.target, res.model, res.gamma, res.grid);
  res.mean_abs_gap = (res.trained_curve - res.optimal_curve).cwiseAbs().mean();

  if (opts.with_bootstrap) {
    estimators::BootstrapConfig boot;
    boot.n_resamples = opts.bootstrap_n;
    boot.confidence = opts.confidence;
    boot.seed = rng::derive_seed(seed, "bootstrap");
    const MomentMatchedGaussian model = res.model;
    estimators::ModelSampler sampler = [model](Eigen::Index m, std::uint64_t s) {
      rng::Rng g(s);
      Matrix out(m, 1);
      for (Eigen::Index i = 0; i < m; ++i) out(i, 0) = model.sample(g);
      return out;
    };
    const auto intervals =
        estimators::bootstrap_ci(dataset, sampler, grid_pts, train, boot);
    res.band_lo.resize(opts.grid_points);
    res.band_hi.resize(opts.grid_points);
    // Weight intervals map monotonically back to the probability scale.
    for (int i = 0; i < opts.grid_points; ++i) {
      const auto& iv = intervals[static_cast<std::size_t>(i)];
      res.band_lo(i) = iv.lower / (res.gamma + iv.lower);
      res.band_hi(i) = iv.upper / (res.gamma + iv.upper);
    }
  }
  return res;
}

// --- Weighted data augmentation ---------------------------------------------

/// Real and generated labeled points plus the mixture coefficient m weighting
/// the real empirical risk against the generated one.
struct AugmentedTask {
  Matrix real_x;
  std::vector<int> real_y;
  Matrix gen_x;
  std::vector<int> gen_y;
  double mixture_m = 0.5;
  int n_classes = 2;

  void validate() const {
    require(mixture_m >= 0.0 && mixture_m <= 1.0,
            "AugmentedTask: m must be in [0, 1]");
    require(static_cast<Eigen::Index>(real_y.size()) == real_x.rows(),
            "AugmentedTask: real labels mismatch");
    require(static_cast<Eigen::Index>(gen_y.size()) == gen_x.rows(),
            "AugmentedTask: generated labels mismatch");
    if (mixture_m > 0.0)
      require(real_x.rows() > 0, "AugmentedTask: real partition empty");
    if (mixture_m < 1.0)
      require(gen_x.rows() > 0, "AugmentedTask: generated partition empty");
    for (int y : real_y) require(y >= 0 && y < n_classes, "AugmentedTask: bad label");
    for (int y : gen_y) require(y >= 0 && y < n_classes, "AugmentedTask: bad label");
  }
};

/// Multinomial logistic classifier for the downstream task.
struct DownstreamClassifier {
  Matrix w;  // k x d
  Vector b;  // k

  Matrix logits(const Matrix& x) const {
    return (x * w.transpose()).rowwise() + b.transpose();
  }

  Matrix probs(const Matrix& x) const {
    Matrix z = logits(x);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const double m = z.row(i).maxCoeff();
      Eigen::RowVectorXd e = (z.row(i).array() - m).exp();
      z.row(i) = e / e.sum();
    }
    return z;
  }

  int predict_class(const Vector& x) const {
    Matrix row(1, x.size());
    row.row(0) = x.transpose();
    Eigen::Index arg = 0;
    logits(row).row(0).maxCoeff(&arg);
    return static_cast<int>(arg);
  }
};

namespace detail {
inline double cross_entropy_sum(const DownstreamClassifier& clf, const Matrix& x,
                                const std::vector<int>& y, const Vector& coef) {
  const Matrix p = clf.probs(x);
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double pi = std::max(p(i, y[static_cast<std::size_t>(i)]), 1e-300);
    s += coef(i) * -std::log(pi);
  }
  return s;
}
}  // namespace detail

/// Mixture risk m * E_real[CE] + (1 - m) * E_gen-weighted[CE], where the
/// generated side carries transformed importance weights per config.
inline double weighted_augmented_risk(
    const AugmentedTask& task, const DownstreamClassifier& clf,
    const std::function<double(const Vector&, int)>& weight_fn,
    const estimators::WeightConfig& config) {
  task.validate();
  double risk = 0.0;
  if (task.mixture_m > 0.0) {
    const Vector coef =
        Vector::Constant(task.real_x.rows(), 1.0 / static_cast<double>(task.real_x.rows()));
    risk += task.mixture_m * detail::cross_entropy_sum(clf, task.real_x, task.real_y, coef);
  }
  if (task.mixture_m < 1.0) {
    Vector raw(task.gen_x.rows());
    for (Eigen::Index i = 0; i < task.gen_x.rows(); ++i)
      raw(i) = weight_fn(task.gen_x.row(i).transpose(),
                         task.gen_y[static_cast<std::size_t>(i)]);
    Vector w = estimators::transform_weights(raw, config);
    if (!config.self_normalize) w /= static_cast<double>(task.gen_x.rows());
    risk += (1.0 - task.mixture_m) *
            detail::cross_entropy_sum(clf, task.gen_x, task.gen_y, w);
  }
  return risk;
}

struct DownstreamTrainConfig {
  double learning_rate = 0.1;
  int epochs = 300;
  double momentum = 0.9;
};

/// Trains the downstream classifier by full-batch gradient descent on the
/// weighted augmented risk. Convex objective; zero initialization keeps the
/// run deterministic without a seed.
inline DownstreamClassifier train_downstream(
    const AugmentedTask& task,
    const std::function<double(const Vector&, int)>& weight_fn,
    const estimators::WeightConfig& config,
    const DownstreamTrainConfig& train = {}) {
  task.validate();
  const Eigen::Index d = task.mixture_m < 1.0 ? task.gen_x.cols() : task.real_x.cols();
  DownstreamClassifier clf{Matrix::Zero(task.n_classes, d),
                           Vector::Zero(task.n_classes)};

  // Per-point gradient coefficients mirroring weighted_augmented_risk.
  Vector real_coef, gen_coef;
  if (task.mixture_m > 0.0)
    real_coef = Vector::Constant(
        task.real_x.rows(),
        task.mixture_m / static_cast<double>(task.real_x.rows()));
  if (task.mixture_m < 1.0) {
    Vector raw(task.gen_x.rows());
    for (Eigen::Index i = 0; i < task.gen_x.rows(); ++i)
      raw(i) = weight_fn(task.gen_x.row(i).transpose(),
                         task.gen_y[static_cast<std::size_t>(i)]);
    gen_coef = estimators::transform_weights(raw, config);
    if (!config.self_normalize) gen_coef /= static_cast<double>(task.gen_x.rows());
    gen_coef *= 1.0 - task.mixture_m;
  }

  Matrix vw = Matrix::Zero(task.n_classes, d);
  Vector vb = Vector::Zero(task.n_classes);
  auto accumulate_grad = [&](const Matrix& x, const std::vector<int>& y,
                             const Vector& coef, Matrix& gw, Vector& gb) {
    const Matrix p = clf.probs(x);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      Eigen::RowVectorXd delta = p.row(i);
      delta(y[static_cast<std::size_t>(i)]) -= 1.0;
      delta *= coef(i);
      gw += delta.transpose() * x.row(i);
      gb += delta.transpose();
    }
  };

  for (int epoch = 0; epoch < train.epochs; ++epoch) {
    Matrix gw = Matrix::Zero(task.n_classes, d);
    Vector gb = Vector::Zero(task.n_classes);
    if (task.mixture_m > 0.0)
      accumulate_grad(task.real_x, task.real_y, real_coef, gw, gb);
    if (task.mixture_m < 1.0)
      accumulate_grad(task.gen_x, task.gen_y, gen_coef, gw, gb);
    vw = train.momentum * vw - train.learning_rate * gw;
    vb = train.momentum * vb - train.learning_rate * gb;
    clf.w += vw;
    clf.b += vb;
    if (!clf.w.allFinite())
      throw std::runtime_error("train_downstream: diverged");
  }
  return clf;
}

/// Indices of generated points in decreasing weight order; ties keep the
/// original order.
inline std::vector<std::size_t> rank_generated_by_weight(const Vector& weights) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(weights.size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return weights(static_cast<Eigen::Index>(a)) >
           weights(static_cast<Eigen::Index>(b));
  });
  return idx;
}

// --- Contaminated 2-D augmentation toy --------------------------------------

/// Two-class task: class-conditional unit Gaussians at (+2, 0) and (-2, 0).
/// The generator reproduces the correct class-conditional but flips the label
/// on a fraction of points, planting outliers the oracle weights can demote.
struct ContaminatedToy {
  AugmentedTask task;
  Matrix test_x;
  std::vector<int> test_y;
  double flip_fraction = 0.3;

  static Vector class_mean(int y) {
    Vector m(2);
    m << (y == 0 ? 2.0 : -2.0), 0.0;
    return m;
  }

  static double class_pdf(const Vector& x, int y) {
    const Vector mu = class_mean(y);
    return std::exp(-0.5 * (x - mu).squaredNorm()) / (2.0 * M_PI);
  }

  /// Oracle joint-density ratio p_data(x, y) / p_gen(x, y).
  double oracle_weight(const Vector& x, int y) const {
    const double num = class_pdf(x, y);
    const double den = (1.0 - flip_fraction) * class_pdf(x, y) +
                       flip_fraction * class_pdf(x, 1 - y);
    return num / den;
  }

  /// Index set of the planted label-flipped generated points.
  std::vector<std::size_t> flipped;
};

inline ContaminatedToy make_contaminated_toy(int n_real, int n_gen, int n_test,
                                             double flip_fraction,
                                             std::uint64_t seed) {
  require(flip_fraction >= 0.0 && flip_fraction < 1.0,
          "make_contaminated_toy: flip fraction in [0, 1)");
  ContaminatedToy toy;
  toy.flip_fraction = flip_fraction;
  toy.task.n_classes = 2;
  toy.task.mixture_m = 0.5;

  auto draw_class_point = [&](rng::Rng& g, int cls) {
    Vector x = ContaminatedToy::class_mean(cls);
    x(0) += g.normal();
    x(1) += g.normal();
    return x;
  };

  rng::Rng g_real(rng::derive_seed(seed, "aug-real"));
  toy.task.real_x.resize(n_real, 2);
  toy.task.real_y.resize(static_cast<std::size_t>(n_real));
  for (int i = 0; i < n_real; ++i) {
    const int y = static_cast<int>(g_real.integer(2));
    toy.task.real_y[static_cast<std::size_t>(i)] = y;
    toy.task.real_x.row(i) = draw_class_point(g_real, y).transpose();
  }

  rng::Rng g_gen(rng::derive_seed(seed, "aug-gen"));
  toy.task.gen_x.resize(n_gen, 2);
  toy.task.gen_y.resize(static_cast<std::size_t>(n_gen));
  for (int i = 0; i < n_gen; ++i) {
    const int y = static_cast<int>(g_gen.integer(2));
    const bool flip = g_gen.uniform() < flip_fraction;
    const int source = flip ? 1 - y : y;
    toy.task.gen_y[static_cast<std::size_t>(i)] = y;
    toy.task.gen_x.row(i) = draw_class_point(g_gen, source).transpose();
    if (flip) toy.flipped.push_back(static_cast<std::size_t>(i));
  }

  rng::Rng g_test(rng::derive_seed(seed, "aug-test"));
  toy.test_x.resize(n_test, 2);
  toy.test_y.resize(static_cast<std::size_t>(n_test));
  for (int i = 0; i < n_test; ++i) {
    const int y = static_cast<int>(g_test.integer(2));
    toy.test_y[static_cast<std::size_t>(i)] = y;
    toy.test_x.row(i) = draw_class_point(g_test, y).transpose();
  }
  return toy;
}

inline double accuracy(const DownstreamClassifier& clf, const Matrix& x,
                       const std::vector<int>& y) {
  require(x.rows() == static_cast<Eigen::Index>(y.size()), "accuracy: size mismatch");
  Eigen::Index correct = 0;
  const Matrix z = clf.logits(x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Index arg = 0;
    z.row(i).maxCoeff(&arg);
    if (static_cast<int>(arg) == y[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(x.rows());
}

}  // namespace lfiw::synthetic
