#pragma once

#include <lfiw/types.hpp>
#include <lfiw/weights.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>

namespace lfiw::metrics {

/// Feature rows (one point per row) with optional non-negative weights.
/// Weights are self-normalized inside every metric; absent weights mean
/// uniform.
struct FeatureSet {
  Matrix rows;
  std::optional<Vector> weights;

  void validate(bool needs_covariance = false) const {
    require(rows.rows() >= (needs_covariance ? 2 : 1),
            "FeatureSet: not enough points");
    if (!rows.allFinite())
      throw std::invalid_argument("FeatureSet: non-finite features");
    if (weights) {
      require(weights->size() == rows.rows(), "FeatureSet: weight length mismatch");
      require(weights->minCoeff() >= 0.0, "FeatureSet: negative weights");
      require(weights->sum() > 0.0, "FeatureSet: weights sum to zero");
    }
  }

  Vector normalized_weights() const {
    if (!weights) return Vector::Constant(rows.rows(), 1.0 / static_cast<double>(rows.rows()));
    return *weights / weights->sum();
  }
};

/// Row-stochastic class probabilities with optional weights.
struct LabelDistribution {
  Matrix rows;  // n x k, each row sums to 1
  std::optional<Vector> weights;

  void validate() const {
    require(rows.rows() >= 1 && rows.cols() >= 2,
            "LabelDistribution: need n >= 1 rows and k >= 2 classes");
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
      require(rows.row(i).minCoeff() >= 0.0, "LabelDistribution: negative probability");
      require(std::abs(rows.row(i).sum() - 1.0) <= 1e-9,
              "LabelDistribution: rows must sum to 1");
    }
    if (weights) {
      require(weights->size() == rows.rows(),
              "LabelDistribution: weight length mismatch");
      require(weights->minCoeff() >= 0.0 && weights->sum() > 0.0,
              "LabelDistribution: invalid weights");
    }
  }

  Vector normalized_weights() const {
    if (!weights) return Vector::Constant(rows.rows(), 1.0 / static_cast<double>(rows.rows()));
    return *weights / weights->sum();
  }
};

/// exp(E[KL(d(y|x) || d(y))]) with the marginal d(y) taken as the weighted
/// mean of the rows; both the conditional average and the marginal use the
/// same weights. Always lies in [1, k].
inline double inception_style_score(const LabelDistribution& preds) {
  preds.validate();
  const Vector w = preds.normalized_weights();
  const Vector marginal = preds.rows.transpose() * w;
  double mean_kl = 0.0;
  for (Eigen::Index i = 0; i < preds.rows.rows(); ++i) {
    double kl = 0.0;
    for (Eigen::Index c = 0; c < preds.rows.cols(); ++c) {
      const double pij = preds.rows(i, c);
      if (pij == 0.0) continue;  // 0 log(0/.) = 0
      if (marginal(c) == 0.0)
        throw std::domain_error(
            "inception_style_score: marginal vanishes where a row is positive");
      kl += pij * std::log(pij / marginal(c));
    }
    mean_kl += w(i) * kl;
  }
  return std::exp(mean_kl);
}

namespace detail {

struct Moments {
  Vector mean;
  Matrix cov;  // divide-by-total-weight convention
};

inline Moments weighted_moments(const FeatureSet& s) {
  const Vector w = s.normalized_weights();
  Moments m;
  m.mean = s.rows.transpose() * w;
  Matrix centered = s.rows.rowwise() - m.mean.transpose();
  m.cov = centered.transpose() * w.asDiagonal() * centered;
  return m;
}

/// Trace of the principal square root of a symmetric PSD matrix; tiny
/// negative eigenvalues from rounding are clipped at zero.
inline double trace_sqrt_psd(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("trace_sqrt_psd: eigendecomposition failed");
  double tr = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    tr += std::sqrt(std::max(0.0, es.eigenvalues()(i)));
  return tr;
}

/// Principal square root of a symmetric PSD matrix.
inline Matrix sqrt_psd(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("sqrt_psd: eigendecomposition failed");
  Vector lambda = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// ||mu_S - mu_R||^2 + Tr(Sigma_S + Sigma_R - 2 sqrt(Sigma_S Sigma_R)). The
/// matrix square root of the (generally non-symmetric) product is evaluated
/// as Tr sqrt(S^{1/2} Sigma_R S^{1/2}), which is symmetric PSD.
inline double frechet_distance(const FeatureSet& s, const FeatureSet& r) {
  s.validate(true);
  r.validate(true);
  require(s.rows.cols() == r.rows.cols(), "frechet_distance: dimension mismatch");
  const auto ms = detail::weighted_moments(s);
  const auto mr = detail::weighted_moments(r);
  const Matrix root_s = detail::sqrt_psd(ms.cov);
  const double tr_cross = detail::trace_sqrt_psd(root_s * mr.cov * root_s);
  const double fid = (ms.mean - mr.mean).squaredNorm() + ms.cov.trace() +
                     mr.cov.trace() - 2.0 * tr_cross;
  return std::max(0.0, fid);
}

/// Squared MMD with an RBF kernel, exp(-||a-b||^2 / (2 bandwidth^2)), as an
/// unbiased U-statistic: within-set terms exclude the diagonal. The weighted
/// variant excludes diagonal mass analogously.
inline double kernel_distance(const FeatureSet& s, const FeatureSet& r,
                              double bandwidth = 1.0) {
  s.validate(true);
  r.validate(true);
  require(s.rows.cols() == r.rows.cols(), "kernel_distance: dimension mismatch");
  require(bandwidth > 0.0, "kernel_distance: bandwidth must be positive");
  const double inv2s2 = 1.0 / (2.0 * bandwidth * bandwidth);

  auto gram = [&](const Matrix& a, const Matrix& b) -> Matrix {
    Vector an = a.rowwise().squaredNorm();
    Vector bn = b.rowwise().squaredNorm();
    Matrix d2 = (-2.0 * a * b.transpose()).colwise() + an;
    d2 = d2.rowwise() + bn.transpose();
    return (-d2.cwiseMax(0.0) * inv2s2).array().exp().matrix();
  };

  const Vector ws = s.normalized_weights();
  const Vector wr = r.normalized_weights();

  auto within = [&](const Matrix& x, const Vector& w) {
    const Matrix k = gram(x, x);
    const double full = w.transpose() * k * w;        // includes diagonal
    const double diag = w.squaredNorm();              // k_ii = 1 for RBF
    const double mass = 1.0 - diag;                   // sum_{i != j} w_i w_j
    if (mass <= 0.0)
      throw std::invalid_argument("kernel_distance: degenerate weights");
    return (full - diag) / mass;
  };

  const double term_ss = within(s.rows, ws);
  const double term_rr = within(r.rows, wr);
  const double term_sr = ws.transpose() * gram(s.rows, r.rows) * wr;
  return term_ss + term_rr - 2.0 * term_sr;
}

// --- Debiased suite --------------------------------------------------------

struct MetricSuite {
  double is_raw = 0.0;
  double is_lfiw = 0.0;
  double fid_raw = 0.0;
  double fid_lfiw = 0.0;
  double kid_raw = 0.0;
  double kid_lfiw = 0.0;
  double weight_ess = 0.0;  // effective sample size of the transformed weights
};

/// Maps feature rows to class probability rows; the default treats features
/// as logits and applies a row softmax.
using LabelMapper = std::function<Matrix(const Matrix&)>;

inline Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(i).array() - m).exp();
    out.row(i) = e / e.sum();
  }
  return out;
}

/// Computes IS/FID/KID twice: with unit weights and with transformed LFIW
/// weights attached to the model side. The real side is always unit-weighted.
inline MetricSuite debiased_metric_suite(
    const Matrix& model_features, const Matrix& real_features,
    const std::function<double(const Vector&)>& weight_fn,
    const estimators::WeightConfig& config, double bandwidth = 1.0,
    const LabelMapper& label_mapper = softmax_rows) {
  require(model_features.rows() >= 2 && real_features.rows() >= 2,
          "debiased_metric_suite: need at least 2 points per side");
  Vector raw(model_features.rows());
  for (Eigen::Index i = 0; i < model_features.rows(); ++i)
    raw(i) = weight_fn(model_features.row(i).transpose());
  const Vector transformed = estimators::transform_weights(raw, config);

  const FeatureSet model_raw{model_features, std::nullopt};
  const FeatureSet model_w{model_features, transformed};
  const FeatureSet real{real_features, std::nullopt};
  const Matrix labels = label_mapper(model_features);

  MetricSuite out;
  out.is_raw = inception_style_score({labels, std::nullopt});
  out.is_lfiw = inception_style_score({labels, transformed});
  out.fid_raw = frechet_distance(model_raw, real);
  out.fid_lfiw = frechet_distance(model_w, real);
  out.kid_raw = kernel_distance(model_raw, real, bandwidth);
  out.kid_lfiw = kernel_distance(model_w, real, bandwidth);
  out.weight_ess = estimators::effective_sample_size(transformed);
  return out;
}

}  // namespace lfiw::metrics
