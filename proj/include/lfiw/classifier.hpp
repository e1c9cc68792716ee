#pragma once

#include <lfiw/io.hpp>
#include <lfiw/random.hpp>
#include <lfiw/types.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lfiw::ratio {

/// Samples from p (label 1) and from the model p_theta (label 0), plus the
/// odds ratio gamma. When built from raw datasets gamma is the size ratio
/// |negatives| / |positives|.
struct LabeledRatioDataset {
  Matrix positives;
  Matrix negatives;
  double gamma = 1.0;

  void validate() const {
    require(positives.rows() > 0 && negatives.rows() > 0,
            "LabeledRatioDataset: both classes must be non-empty");
    require(positives.cols() == negatives.cols(),
            "LabeledRatioDataset: feature dimension mismatch between classes");
    require(positives.cols() > 0, "LabeledRatioDataset: zero feature dimension");
    require(gamma > 0.0, "LabeledRatioDataset: gamma must be positive");
    if (!positives.allFinite() || !negatives.allFinite())
      throw std::invalid_argument("LabeledRatioDataset: non-finite features");
  }
};

inline LabeledRatioDataset make_ratio_dataset(Matrix positives, Matrix negatives) {
  LabeledRatioDataset d;
  d.positives = std::move(positives);
  d.negatives = std::move(negatives);
  d.gamma = static_cast<double>(d.negatives.rows()) /
            static_cast<double>(d.positives.rows());
  d.validate();
  return d;
}

enum class Optimizer { gd, adam };

struct TrainConfig {
  double learning_rate = 1e-2;
  int epochs = 200;
  int batch_size = 128;
  std::uint64_t seed = 0;
  int hidden_units = 100;   // mlp only
  double l2_penalty = 0.0;
  double momentum = 0.9;    // gd only; 0 disables
  Optimizer optimizer = Optimizer::gd;

  void validate() const {
    require(learning_rate > 0.0, "TrainConfig: learning_rate must be positive");
    require(epochs > 0, "TrainConfig: epochs must be positive");
    require(batch_size > 0, "TrainConfig: batch_size must be positive");
    require(hidden_units > 0, "TrainConfig: hidden_units must be positive");
    require(l2_penalty >= 0.0, "TrainConfig: l2_penalty must be >= 0");
    require(momentum >= 0.0 && momentum < 1.0,
            "TrainConfig: momentum must be in [0, 1)");
  }
};

enum class Architecture { logistic, mlp };

inline std::string to_string(Architecture a) {
  return a == Architecture::logistic ? "logistic" : "mlp";
}

inline Architecture architecture_from_string(const std::string& s) {
  if (s == "logistic") return Architecture::logistic;
  if (s == "mlp") return Architecture::mlp;
  throw std::invalid_argument("unknown architecture: " + s);
}

/// Probabilistic binary classifier c_phi. Either an affine map + sigmoid or a
/// one-hidden-layer tanh MLP + sigmoid. Outputs are clamped to
/// [kProbClamp, 1 - kProbClamp], so implied weights stay finite. Immutable
/// after training; safe for concurrent reads.
class ProbClassifier {
 public:
  ProbClassifier() = default;

  static ProbClassifier logistic(Vector w, double b) {
    ProbClassifier c;
    c.arch_ = Architecture::logistic;
    c.input_dim_ = static_cast<int>(w.size());
    c.w_ = std::move(w);
    c.b_ = b;
    return c;
  }

  static ProbClassifier mlp(Matrix W1, Vector b1, Vector w2, double b2) {
    ProbClassifier c;
    c.arch_ = Architecture::mlp;
    c.input_dim_ = static_cast<int>(W1.cols());
    c.hidden_units_ = static_cast<int>(W1.rows());
    require(b1.size() == W1.rows() && w2.size() == W1.rows(),
            "ProbClassifier: inconsistent mlp shapes");
    c.W1_ = std::move(W1);
    c.b1_ = std::move(b1);
    c.w2_ = std::move(w2);
    c.b2_ = b2;
    return c;
  }

  Architecture architecture() const { return arch_; }
  int input_dim() const { return input_dim_; }
  int hidden_units() const { return hidden_units_; }

  /// Pre-sigmoid scores for a batch of points (one per row).
  Vector decision(const Matrix& x) const {
    require(x.cols() == input_dim_, "ProbClassifier: input dimension mismatch");
    if (arch_ == Architecture::logistic) {
      return ((x * w_).array() + b_).matrix();
    }
    Matrix h = batch_tanh(((x * W1_.transpose()).rowwise() + b1_.transpose()));
    return ((h * w2_).array() + b2_).matrix();
  }

  /// Clamped probabilities for a batch of points.
  Vector predict(const Matrix& x) const {
    Vector z = decision(x);
    return batch_sigmoid(z).cwiseMax(kProbClamp).cwiseMin(1.0 - kProbClamp);
  }

  /// tanh(z) = 1 - 2 / (exp(2z) + 1); exp vectorizes for doubles where tanh
  /// does not. Saturates correctly at +-1 for large |z|.
  template <class Derived>
  static Matrix batch_tanh(const Eigen::MatrixBase<Derived>& z) {
    return 1.0 - 2.0 * ((2.0 * z.array()).exp() + 1.0).inverse();
  }

  static Vector batch_sigmoid(const Vector& z) {
    return ((-z.array()).exp() + 1.0).inverse();
  }

  double predict_proba(const Vector& x) const {
    require(x.size() == input_dim_, "predict_proba: input dimension mismatch");
    Matrix row(1, x.size());
    row.row(0) = x.transpose();
    return predict(row)(0);
  }

  /// Flat parameter vector; logistic: [w, b], mlp: [W1 row-major, b1, w2, b2].
  Vector flat_weights() const {
    if (arch_ == Architecture::logistic) {
      Vector v(w_.size() + 1);
      v.head(w_.size()) = w_;
      v(w_.size()) = b_;
      return v;
    }
    const Eigen::Index h = W1_.rows(), d = W1_.cols();
    Vector v(h * d + h + h + 1);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < h; ++i)
      for (Eigen::Index j = 0; j < d; ++j) v(k++) = W1_(i, j);
    v.segment(k, h) = b1_; k += h;
    v.segment(k, h) = w2_; k += h;
    v(k) = b2_;
    return v;
  }

  static ProbClassifier from_flat(Architecture arch, int input_dim,
                                  int hidden_units, const Vector& flat) {
    if (arch == Architecture::logistic) {
      require(flat.size() == input_dim + 1, "from_flat: bad logistic size");
      return logistic(flat.head(input_dim), flat(input_dim));
    }
    const Eigen::Index h = hidden_units, d = input_dim;
    require(flat.size() == h * d + 2 * h + 1, "from_flat: bad mlp size");
    Matrix W1(h, d);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < h; ++i)
      for (Eigen::Index j = 0; j < d; ++j) W1(i, j) = flat(k++);
    Vector b1 = flat.segment(k, h); k += h;
    Vector w2 = flat.segment(k, h); k += h;
    return mlp(std::move(W1), std::move(b1), std::move(w2), flat(k));
  }

  static double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  }

  static double clamp_prob(double c) {
    return std::min(1.0 - kProbClamp, std::max(kProbClamp, c));
  }

 private:
  friend class Trainer;

  Architecture arch_ = Architecture::logistic;
  int input_dim_ = 0;
  int hidden_units_ = 0;
  Vector w_;      // logistic
  double b_ = 0.0;
  Matrix W1_;     // mlp
  Vector b1_;
  Vector w2_;
  double b2_ = 0.0;
};

/// w(x) = gamma * c/(1 - c) for a clamped probability c.
inline double weight_from_prob(double c, double gamma) {
  require(gamma > 0.0, "weight_from_prob: gamma must be positive");
  return gamma * c / (1.0 - c);
}

inline double importance_weight(const ProbClassifier& clf, double gamma,
                                const Vector& x) {
  return weight_from_prob(clf.predict_proba(x), gamma);
}

/// Batch importance weights for points given one per row.
inline Vector importance_weights(const ProbClassifier& clf, double gamma,
                                 const Matrix& x) {
  require(gamma > 0.0, "importance_weights: gamma must be positive");
  Vector c = clf.predict(x);
  Vector w(c.size());
  for (Eigen::Index i = 0; i < c.size(); ++i)
    w(i) = gamma * c(i) / (1.0 - c(i));
  return w;
}

/// Mean binary cross-entropy of the classifier on a dataset, computed from
/// logits in a numerically stable form.
inline double binary_cross_entropy(const ProbClassifier& clf,
                                   const LabeledRatioDataset& data) {
  auto accum = [&](const Matrix& x, double y) {
    Vector z = clf.decision(x);
    // log(1 + e^z) - y z, rearranged to avoid overflow
    return (z.cwiseMax(0.0).array() - y * z.array() +
            ((-z.array().abs()).exp() + 1.0).log())
        .sum();
  };
  const double n = static_cast<double>(data.positives.rows() + data.negatives.rows());
  return (accum(data.positives, 1.0) + accum(data.negatives, 0.0)) / n;
}

class Trainer {
 public:
  /// Minimizes binary cross-entropy by mini-batch first-order descent
  /// (gradient descent with optional momentum, or Adam). Deterministic given
  /// (dataset, config): initialization and shuffling use per-purpose streams
  /// derived from config.seed.
  static ProbClassifier train(const LabeledRatioDataset& data,
                              const TrainConfig& config, Architecture arch) {
    data.validate();
    config.validate();
    const Eigen::Index n_pos = data.positives.rows();
    const Eigen::Index n_neg = data.negatives.rows();
    const Eigen::Index n = n_pos + n_neg;
    const Eigen::Index d = data.positives.cols();

    Matrix x(n, d);
    x.topRows(n_pos) = data.positives;
    x.bottomRows(n_neg) = data.negatives;
    Vector y(n);
    y.head(n_pos).setOnes();
    y.tail(n_neg).setZero();

    ProbClassifier clf = initialize(arch, static_cast<int>(d),
                                    config.hidden_units,
                                    rng::derive_seed(config.seed, "init"));
    rng::Rng shuffle_rng(rng::derive_seed(config.seed, "shuffle"));

    State st;
    if (arch == Architecture::logistic) {
      st.w.init(d, 1);
    } else {
      st.W1.init(config.hidden_units, d);
      st.b1.init(config.hidden_units, 1);
      st.w2.init(config.hidden_units, 1);
    }

    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), std::size_t{0});
    const Eigen::Index bs = std::min<Eigen::Index>(config.batch_size, n);
    const bool full_batch = bs == n;  // gradient is order-independent
    Matrix xb(bs, d);
    Vector yb(bs);
    Workspace ws;
    int step = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      if (!full_batch) shuffle_rng.shuffle(order);
      for (Eigen::Index start = 0; start < n; start += bs) {
        const Eigen::Index m = std::min(bs, n - start);
        if (!full_batch) {
          for (Eigen::Index i = 0; i < m; ++i) {
            const auto src = static_cast<Eigen::Index>(
                order[static_cast<std::size_t>(start + i)]);
            xb.row(i) = x.row(src);
            yb(i) = y(src);
          }
        }
        const auto& xref = full_batch ? x : xb;
        const auto& yref = full_batch ? y : yb;
        ++step;

        double batch_loss;
        if (arch == Architecture::logistic) {
          batch_loss = step_logistic(clf, xref.topRows(m), yref.head(m), config,
                                     st, ws, step);
        } else {
          batch_loss =
              step_mlp(clf, xref.topRows(m), yref.head(m), config, st, ws, step);
        }
        if (!std::isfinite(batch_loss))
          throw std::runtime_error(
              "train_classifier: non-finite loss (learning rate too large?)");
      }
    }
    return clf;
  }

 private:
  /// First and second moment slots for one parameter tensor (second unused
  /// by plain momentum).
  struct TensorState {
    Matrix m1, m2;
    void init(Eigen::Index r, Eigen::Index c) {
      m1 = Matrix::Zero(r, c);
      m2 = Matrix::Zero(r, c);
    }
  };

  struct State {
    TensorState w;              // logistic weights
    TensorState W1, b1, w2;     // mlp tensors
    double bm1 = 0.0, bm2 = 0.0;    // scalar bias (logistic b / mlp b2)
  };

  struct Workspace {
    Matrix z1, h, dz1, gW1;
    Vector z, c, dz, gw, gw2, gb1;
  };

  static constexpr double kAdamBeta1 = 0.9;
  static constexpr double kAdamBeta2 = 0.999;
  static constexpr double kAdamEps = 1e-8;

  template <class Tensor, class Grad>
  static void update(Tensor& theta, const Grad& g, TensorState& st,
                     const TrainConfig& cfg, int step) {
    if (cfg.optimizer == Optimizer::gd) {
      st.m1 = cfg.momentum * st.m1 - cfg.learning_rate * g;
      theta += st.m1;
    } else {
      st.m1 = kAdamBeta1 * st.m1 + (1.0 - kAdamBeta1) * g;
      st.m2.array() =
          kAdamBeta2 * st.m2.array() + (1.0 - kAdamBeta2) * g.array().square();
      const double c1 = 1.0 - std::pow(kAdamBeta1, step);
      const double c2 = 1.0 - std::pow(kAdamBeta2, step);
      theta.array() -= cfg.learning_rate * (st.m1.array() / c1) /
                       ((st.m2.array() / c2).sqrt() + kAdamEps);
    }
  }

  static void update_scalar(double& theta, double g, double& m1, double& m2,
                            const TrainConfig& cfg, int step) {
    if (cfg.optimizer == Optimizer::gd) {
      m1 = cfg.momentum * m1 - cfg.learning_rate * g;
      theta += m1;
    } else {
      m1 = kAdamBeta1 * m1 + (1.0 - kAdamBeta1) * g;
      m2 = kAdamBeta2 * m2 + (1.0 - kAdamBeta2) * g * g;
      const double c1 = 1.0 - std::pow(kAdamBeta1, step);
      const double c2 = 1.0 - std::pow(kAdamBeta2, step);
      theta -= cfg.learning_rate * (m1 / c1) / (std::sqrt(m2 / c2) + kAdamEps);
    }
  }

  static ProbClassifier initialize(Architecture arch, int d, int hidden,
                                   std::uint64_t seed) {
    rng::Rng g(seed);
    auto u = [&](double fan_in) {
      const double lim = 1.0 / std::sqrt(fan_in);
      return g.uniform(-lim, lim);
    };
    if (arch == Architecture::logistic) {
      Vector w(d);
      for (Eigen::Index i = 0; i < d; ++i) w(i) = u(d);
      return ProbClassifier::logistic(std::move(w), u(d));
    }
    Matrix W1(hidden, d);
    for (Eigen::Index i = 0; i < hidden; ++i)
      for (Eigen::Index j = 0; j < d; ++j) W1(i, j) = u(d);
    Vector b1(hidden), w2(hidden);
    for (Eigen::Index i = 0; i < hidden; ++i) b1(i) = u(d);
    for (Eigen::Index i = 0; i < hidden; ++i) w2(i) = u(hidden);
    return ProbClassifier::mlp(std::move(W1), std::move(b1), std::move(w2),
                               u(hidden));
  }

  // mean of log(1 + e^z) - y z, rearranged to avoid overflow
  template <class YB>
  static double stable_bce(const Vector& z, const YB& yv) {
    return (z.cwiseMax(0.0).array() - z.array() * yv.array() +
            ((-z.array().abs()).exp() + 1.0).log())
        .mean();
  }

  template <class XB, class YB>
  static double step_logistic(ProbClassifier& clf, const XB& xv, const YB& yv,
                              const TrainConfig& cfg, State& st, Workspace& ws,
                              int step) {
    const double m = static_cast<double>(yv.size());
    ws.z.noalias() = xv * clf.w_;
    ws.z.array() += clf.b_;
    ws.c = ProbClassifier::batch_sigmoid(ws.z);
    const double loss = stable_bce(ws.z, yv);
    ws.dz = (ws.c - yv) / m;
    ws.gw.noalias() = xv.transpose() * ws.dz;
    if (cfg.l2_penalty > 0.0) ws.gw += cfg.l2_penalty * clf.w_;
    update(clf.w_, ws.gw, st.w, cfg, step);
    update_scalar(clf.b_, ws.dz.sum(), st.bm1, st.bm2, cfg, step);
    return loss;
  }

  template <class XB, class YB>
  static double step_mlp(ProbClassifier& clf, const XB& xv, const YB& yv,
                         const TrainConfig& cfg, State& st, Workspace& ws,
                         int step) {
    const double m = static_cast<double>(yv.size());
    ws.z1.noalias() = xv * clf.W1_.transpose();
    ws.z1.rowwise() += clf.b1_.transpose();
    ws.h = ProbClassifier::batch_tanh(ws.z1);
    ws.z.noalias() = ws.h * clf.w2_;
    ws.z.array() += clf.b2_;
    ws.c = ProbClassifier::batch_sigmoid(ws.z);
    const double loss = stable_bce(ws.z, yv);

    ws.dz = (ws.c - yv) / m;
    ws.gw2.noalias() = ws.h.transpose() * ws.dz;
    if (cfg.l2_penalty > 0.0) ws.gw2 += cfg.l2_penalty * clf.w2_;
    const double gb2 = ws.dz.sum();
    ws.dz1.noalias() = ws.dz * clf.w2_.transpose();
    ws.dz1.array() *= 1.0 - ws.h.array().square();  // tanh'
    ws.gW1.noalias() = ws.dz1.transpose() * xv;
    if (cfg.l2_penalty > 0.0) ws.gW1 += cfg.l2_penalty * clf.W1_;
    ws.gb1 = ws.dz1.colwise().sum();

    update(clf.W1_, ws.gW1, st.W1, cfg, step);
    update(clf.b1_, ws.gb1, st.b1, cfg, step);
    update(clf.w2_, ws.gw2, st.w2, cfg, step);
    update_scalar(clf.b2_, gb2, st.bm1, st.bm2, cfg, step);
    return loss;
  }
};

inline ProbClassifier train_classifier(const LabeledRatioDataset& data,
                                       const TrainConfig& config,
                                       Architecture arch = Architecture::mlp) {
  return Trainer::train(data, config, arch);
}

/// Bayes-optimal classifier c*(x) = p(x) / (p(x) + gamma * p_theta(x)) built
/// from pointwise-evaluable densities. Errors where p_theta(x) = 0 with
/// p(x) > 0.
template <class DensityP, class DensityQ>
auto bayes_optimal_classifier(DensityP p, DensityQ p_theta, double gamma) {
  require(gamma > 0.0, "bayes_optimal_classifier: gamma must be positive");
  return [p, p_theta, gamma](const auto& x) -> double {
    const double num = p(x);
    const double den = p_theta(x);
    if (den == 0.0 && num > 0.0)
      throw std::domain_error("bayes_optimal_classifier: support violation");
    if (num == 0.0 && den == 0.0)
      throw std::domain_error("bayes_optimal_classifier: both densities vanish");
    return num / (num + gamma * den);
  };
}

// --- Calibration ---------------------------------------------------------

struct CalibrationReport {
  Vector bin_edges;        // n_bins + 1, uniform on [0, 1]
  Vector mean_confidence;  // per bin; 0 for empty bins
  Vector frac_positive;    // per bin; 0 for empty bins
  std::vector<std::int64_t> counts;
  double ece = 0.0;

  std::string to_csv() const {
    io::CsvWriter w("bin_low,bin_high,mean_conf,frac_pos,count");
    for (std::size_t b = 0; b < counts.size(); ++b) {
      w.row(bin_edges(static_cast<Eigen::Index>(b)),
            bin_edges(static_cast<Eigen::Index>(b) + 1),
            mean_confidence(static_cast<Eigen::Index>(b)),
            frac_positive(static_cast<Eigen::Index>(b)), counts[b]);
    }
    w.comment("ece=" + io::format_double(ece));
    return w.str();
  }
};

/// Reliability statistics over uniform-width probability bins. Empty bins
/// contribute zero to the expected calibration error.
inline CalibrationReport calibration_report(const ProbClassifier& clf,
                                            const LabeledRatioDataset& eval_set,
                                            int n_bins) {
  eval_set.validate();
  require(n_bins >= 2, "calibration_report: need at least 2 bins");
  const Vector c_pos = clf.predict(eval_set.positives);
  const Vector c_neg = clf.predict(eval_set.negatives);
  const Eigen::Index total = c_pos.size() + c_neg.size();

  CalibrationReport rep;
  rep.bin_edges = Vector::LinSpaced(n_bins + 1, 0.0, 1.0);
  Vector conf_sum = Vector::Zero(n_bins);
  Vector pos_sum = Vector::Zero(n_bins);
  rep.counts.assign(static_cast<std::size_t>(n_bins), 0);

  auto tally = [&](const Vector& probs, double label) {
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
      const int b = std::min(n_bins - 1,
                             static_cast<int>(probs(i) * n_bins));
      conf_sum(b) += probs(i);
      pos_sum(b) += label;
      ++rep.counts[static_cast<std::size_t>(b)];
    }
  };
  tally(c_pos, 1.0);
  tally(c_neg, 0.0);

  rep.mean_confidence = Vector::Zero(n_bins);
  rep.frac_positive = Vector::Zero(n_bins);
  double ece = 0.0;
  for (int b = 0; b < n_bins; ++b) {
    const auto cnt = rep.counts[static_cast<std::size_t>(b)];
    if (cnt == 0) continue;
    rep.mean_confidence(b) = conf_sum(b) / static_cast<double>(cnt);
    rep.frac_positive(b) = pos_sum(b) / static_cast<double>(cnt);
    ece += static_cast<double>(cnt) / static_cast<double>(total) *
           std::abs(rep.mean_confidence(b) - rep.frac_positive(b));
  }
  rep.ece = ece;
  return rep;
}

// --- Serialization -------------------------------------------------------

inline io::json classifier_to_json(const ProbClassifier& clf) {
  io::json j;
  j["format_version"] = 1;
  j["architecture"] = to_string(clf.architecture());
  j["input_dim"] = clf.input_dim();
  j["hidden_units"] = clf.hidden_units();
  j["clamp"] = kProbClamp;
  const Vector flat = clf.flat_weights();
  j["weights"] = std::vector<double>(flat.data(), flat.data() + flat.size());
  return j;
}

inline ProbClassifier classifier_from_json(const io::json& j) {
  if (j.at("format_version").get<int>() != 1)
    throw std::runtime_error("unsupported classifier format version");
  const auto arch = architecture_from_string(j.at("architecture").get<std::string>());
  const auto weights = j.at("weights").get<std::vector<double>>();
  Vector flat = Eigen::Map<const Vector>(weights.data(),
                                         static_cast<Eigen::Index>(weights.size()));
  return ProbClassifier::from_flat(arch, j.at("input_dim").get<int>(),
                                   j.at("hidden_units").get<int>(), flat);
}

}  // namespace lfiw::ratio
