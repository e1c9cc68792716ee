#pragma once

#include <lfiw/classifier.hpp>
#include <lfiw/io.hpp>
#include <lfiw/parallel.hpp>
#include <lfiw/random.hpp>
#include <lfiw/types.hpp>

#include <Eigen/Cholesky>

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lfiw::mbope {

// --- Tabular environments ---------------------------------------------------

/// Per-action stochastic transition matrices, P[a](s, s').
struct TabularDynamics {
  std::vector<Matrix> p;

  int n_states() const { return p.empty() ? 0 : static_cast<int>(p.front().rows()); }
  int n_actions() const { return static_cast<int>(p.size()); }

  void validate() const {
    require(!p.empty(), "TabularDynamics: no actions");
    for (const auto& m : p) {
      require(m.rows() == m.cols() && m.rows() == p.front().rows(),
              "TabularDynamics: inconsistent matrix shapes");
      for (Eigen::Index s = 0; s < m.rows(); ++s) {
        require(m.row(s).minCoeff() >= 0.0, "TabularDynamics: negative probability");
        require(std::abs(m.row(s).sum() - 1.0) <= 1e-12,
                "TabularDynamics: rows must sum to 1");
      }
    }
  }

  double prob(int s, int a, int s2) const { return p[static_cast<std::size_t>(a)](s, s2); }

  int sample_next(int s, int a, rng::Rng& g) const {
    const auto& m = p[static_cast<std::size_t>(a)];
    return static_cast<int>(g.categorical_indexed(
        static_cast<std::size_t>(m.cols()),
        [&](std::size_t s2) { return m(s, static_cast<Eigen::Index>(s2)); }));
  }
};

/// Undiscounted finite-horizon MDP with a known reward function r(s, a).
struct TabularMdp {
  TabularDynamics dynamics;
  Matrix reward;  // n_states x n_actions
  Vector eta;     // initial state distribution
  int horizon = 1;

  void validate() const {
    dynamics.validate();
    require(reward.rows() == dynamics.n_states() &&
                reward.cols() == dynamics.n_actions(),
            "TabularMdp: reward table shape mismatch");
    require(eta.size() == dynamics.n_states(), "TabularMdp: eta length mismatch");
    require(std::abs(eta.sum() - 1.0) <= 1e-12 && eta.minCoeff() >= 0.0,
            "TabularMdp: eta must be a distribution");
    require(horizon >= 1, "TabularMdp: horizon must be >= 1");
  }
};

struct TabularPolicy {
  Matrix probs;  // n_states x n_actions, row-stochastic

  void validate() const {
    for (Eigen::Index s = 0; s < probs.rows(); ++s) {
      require(probs.row(s).minCoeff() >= 0.0, "TabularPolicy: negative probability");
      require(std::abs(probs.row(s).sum() - 1.0) <= 1e-12,
              "TabularPolicy: rows must sum to 1");
    }
  }

  int sample_action(int s, rng::Rng& g) const {
    return static_cast<int>(g.categorical_indexed(
        static_cast<std::size_t>(probs.cols()),
        [&](std::size_t a) { return probs(s, static_cast<Eigen::Index>(a)); }));
  }
};

// --- Linear-Gaussian environments -------------------------------------------

/// s' = A s + B a + noise, noise ~ N(0, Sigma).
struct LinearGaussianDynamics {
  Matrix a;
  Matrix b;
  Matrix sigma;
  Matrix chol;  // lower Cholesky factor of sigma

  void finalize() {
    require(a.rows() == a.cols(), "LinearGaussianDynamics: A must be square");
    require(b.rows() == a.rows(), "LinearGaussianDynamics: B row mismatch");
    require(sigma.rows() == a.rows() && sigma.cols() == a.rows(),
            "LinearGaussianDynamics: Sigma shape mismatch");
    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument(
          "LinearGaussianDynamics: Sigma must be symmetric positive definite");
    chol = llt.matrixL();
  }

  Vector sample_next(const Vector& s, const Vector& act, rng::Rng& g) const {
    Vector z(s.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = g.normal();
    return a * s + b * act + chol * z;
  }
};

struct LinearReward {
  Vector state_coef;
  Vector action_coef;
  double constant = 0.0;

  double operator()(const Vector& s, const Vector& a) const {
    return state_coef.dot(s) + action_coef.dot(a) + constant;
  }
};

struct LinearGaussianMdp {
  LinearGaussianDynamics dynamics;
  LinearReward reward;
  Vector eta_mean;
  Matrix eta_chol;  // lower Cholesky of the initial covariance
  int horizon = 1;

  Vector sample_initial(rng::Rng& g) const {
    Vector z(eta_mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = g.normal();
    return eta_mean + eta_chol * z;
  }
};

/// a = K s + noise, noise ~ N(0, noise_chol noise_chol^T).
struct LinearGaussianPolicy {
  Matrix gain;
  Matrix noise_chol;

  Vector sample_action(const Vector& s, rng::Rng& g) const {
    Vector z(gain.rows());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = g.normal();
    return gain * s + noise_chol * z;
  }
};

// --- Trajectories -----------------------------------------------------------

/// Rewards accrue at visited next states: rewards[t] = r(s_{t+1}, a_t), so a
/// horizon-T trajectory carries T reward terms r_1..r_T.
template <class State, class Action>
struct Trajectory {
  std::vector<State> states;    // horizon + 1
  std::vector<Action> actions;  // horizon
  std::vector<double> rewards;  // rewards[t] = r(s_{t+1}, a_t)

  int horizon() const { return static_cast<int>(actions.size()); }

  double total_return() const {
    double s = 0.0;
    for (double r : rewards) s += r;
    return s;
  }
};

using TabularTrajectory = Trajectory<int, int>;
using GaussianTrajectory = Trajectory<Vector, Vector>;

/// Rolls out n_traj independent trajectories under the given transition
/// kernel (true dynamics or a learned model); rewards always come from the
/// known reward function. Per-trajectory derived seeds keep the result
/// deterministic and order-independent under parallel execution.
inline std::vector<TabularTrajectory> rollout(const TabularDynamics& dynamics,
                                              const TabularMdp& mdp,
                                              const TabularPolicy& policy,
                                              int n_traj, int horizon,
                                              std::uint64_t seed) {
  dynamics.validate();
  mdp.validate();
  policy.validate();
  require(n_traj >= 1, "rollout: n_traj must be >= 1");
  require(horizon >= 1, "rollout: horizon must be >= 1");
  require(dynamics.n_states() == mdp.dynamics.n_states() &&
              policy.probs.rows() == mdp.dynamics.n_states() &&
              policy.probs.cols() == mdp.dynamics.n_actions(),
          "rollout: incompatible spaces");

  std::vector<TabularTrajectory> out(static_cast<std::size_t>(n_traj));
  parallel::parallel_for(static_cast<std::size_t>(n_traj), [&](std::size_t i) {
    rng::Rng g(rng::derive_seed(seed, "traj", i));
    TabularTrajectory t;
    t.states.reserve(static_cast<std::size_t>(horizon) + 1);
    t.actions.reserve(static_cast<std::size_t>(horizon));
    t.rewards.reserve(static_cast<std::size_t>(horizon));
    int s = static_cast<int>(g.categorical(
        {mdp.eta.data(), static_cast<std::size_t>(mdp.eta.size())}));
    t.states.push_back(s);
    for (int step = 0; step < horizon; ++step) {
      const int a = policy.sample_action(s, g);
      t.actions.push_back(a);
      s = dynamics.sample_next(s, a, g);
      t.states.push_back(s);
      t.rewards.push_back(mdp.reward(s, a));
    }
    out[i] = std::move(t);
  });
  return out;
}

inline std::vector<GaussianTrajectory> rollout(
    const LinearGaussianDynamics& dynamics, const LinearGaussianMdp& mdp,
    const LinearGaussianPolicy& policy, int n_traj, int horizon,
    std::uint64_t seed) {
  require(n_traj >= 1 && horizon >= 1, "rollout: bad sizes");
  std::vector<GaussianTrajectory> out(static_cast<std::size_t>(n_traj));
  parallel::parallel_for(static_cast<std::size_t>(n_traj), [&](std::size_t i) {
    rng::Rng g(rng::derive_seed(seed, "traj", i));
    GaussianTrajectory t;
    Vector s = mdp.sample_initial(g);
    t.states.push_back(s);
    for (int step = 0; step < horizon; ++step) {
      Vector a = policy.sample_action(s, g);
      s = dynamics.sample_next(s, a, g);
      t.states.push_back(s);
      t.rewards.push_back(mdp.reward(s, a));
      t.actions.push_back(std::move(a));
    }
    out[i] = std::move(t);
  });
  return out;
}

/// Exact finite-horizon policy value by backward dynamic programming, with
/// rewards accruing at arrival states.
inline double ground_truth_value(const TabularMdp& mdp, const TabularPolicy& policy) {
  mdp.validate();
  policy.validate();
  const int n_s = mdp.dynamics.n_states();
  const int n_a = mdp.dynamics.n_actions();
  Vector v = Vector::Zero(n_s);
  for (int t = mdp.horizon - 1; t >= 0; --t) {
    Vector next = Vector::Zero(n_s);
    for (int s = 0; s < n_s; ++s) {
      double acc = 0.0;
      for (int a = 0; a < n_a; ++a) {
        // q(s, a) = sum_{s'} P(s'|s,a) (r(s', a) + V_{t+1}(s'))
        const auto& p = mdp.dynamics.p[static_cast<std::size_t>(a)];
        double q = 0.0;
        for (int s2 = 0; s2 < n_s; ++s2)
          q += p(s, s2) * (mdp.reward(s2, a) + v(s2));
        acc += policy.probs(s, a) * q;
      }
      next(s) = acc;
    }
    v = next;
  }
  return mdp.eta.dot(v);
}

struct ValueEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

/// Monte Carlo value estimate; the fallback for non-tabular environments.
template <class Dyn, class Mdp, class Pol>
ValueEstimate monte_carlo_value(const Dyn& dynamics, const Mdp& mdp,
                                const Pol& policy, int n_traj, int horizon,
                                std::uint64_t seed) {
  const auto trajs = rollout(dynamics, mdp, policy, n_traj, horizon, seed);
  double sum = 0.0, sum_sq = 0.0;
  for (const auto& t : trajs) {
    const double r = t.total_return();
    sum += r;
    sum_sq += r * r;
  }
  const double n = static_cast<double>(trajs.size());
  ValueEstimate est;
  est.value = sum / n;
  if (trajs.size() >= 2) {
    const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0));
    est.stderr_ = std::sqrt(var / n);
  }
  return est;
}

/// Log-probability of a tabular trajectory under given dynamics and policy
/// (the trajectory-distribution factorization).
inline double trajectory_log_prob(const TabularDynamics& dynamics,
                                  const TabularPolicy& policy, const Vector& eta,
                                  const TabularTrajectory& traj) {
  double lp = std::log(eta(traj.states.front()));
  for (int t = 0; t < traj.horizon(); ++t) {
    lp += std::log(policy.probs(traj.states[static_cast<std::size_t>(t)],
                                traj.actions[static_cast<std::size_t>(t)]));
    lp += std::log(dynamics.prob(traj.states[static_cast<std::size_t>(t)],
                                 traj.actions[static_cast<std::size_t>(t)],
                                 traj.states[static_cast<std::size_t>(t) + 1]));
  }
  return lp;
}

// --- Dynamics learning -------------------------------------------------------

/// Laplace-smoothed count estimate of the transition kernel.
inline TabularDynamics fit_tabular_dynamics(
    const std::vector<TabularTrajectory>& data, int n_states, int n_actions,
    double smoothing = 1.0) {
  require(!data.empty(), "fit_tabular_dynamics: no data");
  require(smoothing > 0.0, "fit_tabular_dynamics: smoothing must be positive");
  std::vector<Matrix> counts(static_cast<std::size_t>(n_actions),
                             Matrix::Zero(n_states, n_states));
  std::size_t n_transitions = 0;
  for (const auto& t : data) {
    for (int step = 0; step < t.horizon(); ++step) {
      counts[static_cast<std::size_t>(t.actions[static_cast<std::size_t>(step)])](
          t.states[static_cast<std::size_t>(step)],
          t.states[static_cast<std::size_t>(step) + 1]) += 1.0;
      ++n_transitions;
    }
  }
  require(n_transitions >= 1, "fit_tabular_dynamics: no transitions observed");
  TabularDynamics dyn;
  dyn.p.reserve(static_cast<std::size_t>(n_actions));
  for (auto& c : counts) {
    Matrix m(n_states, n_states);
    for (int s = 0; s < n_states; ++s) {
      const double row_total = c.row(s).sum() + smoothing * n_states;
      m.row(s) = (c.row(s).array() + smoothing) / row_total;
    }
    dyn.p.push_back(std::move(m));
  }
  return dyn;
}

/// Ordinary least squares for (A, B) with a small ridge, residual covariance
/// (divide-by-n) for Sigma.
inline LinearGaussianDynamics fit_linear_gaussian_dynamics(
    const std::vector<GaussianTrajectory>& data, double ridge = 1e-6) {
  require(!data.empty() && data.front().horizon() >= 1,
          "fit_linear_gaussian_dynamics: no transitions");
  const auto d = data.front().states.front().size();
  const auto m = data.front().actions.front().size();
  Eigen::Index n = 0;
  for (const auto& t : data) n += t.horizon();
  Matrix x(n, d + m), y(n, d);
  Eigen::Index row = 0;
  for (const auto& t : data) {
    for (int step = 0; step < t.horizon(); ++step) {
      x.row(row).head(d) = t.states[static_cast<std::size_t>(step)];
      x.row(row).tail(m) = t.actions[static_cast<std::size_t>(step)];
      y.row(row) = t.states[static_cast<std::size_t>(step) + 1];
      ++row;
    }
  }
  Matrix gram = x.transpose() * x + ridge * Matrix::Identity(d + m, d + m);
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("fit_linear_gaussian_dynamics: rank-deficient regression");
  Matrix coef = llt.solve(x.transpose() * y).transpose();  // d x (d+m)

  LinearGaussianDynamics dyn;
  dyn.a = coef.leftCols(d);
  dyn.b = coef.rightCols(m);
  Matrix residuals = y - x * coef.transpose();
  dyn.sigma = residuals.transpose() * residuals / static_cast<double>(n) +
              ridge * Matrix::Identity(d, d);
  dyn.finalize();
  return dyn;
}

/// Mixes each transition row with the uniform distribution; used to build
/// benchmarks with a deliberately corrupted model.
inline TabularDynamics mix_with_uniform(const TabularDynamics& dynamics,
                                        double mix) {
  require(mix >= 0.0 && mix <= 1.0, "mix_with_uniform: mix in [0, 1]");
  TabularDynamics out = dynamics;
  const double u = 1.0 / static_cast<double>(dynamics.n_states());
  for (auto& m : out.p) m = (1.0 - mix) * m + mix * u * Matrix::Ones(m.rows(), m.cols());
  return out;
}

// --- Transition classifier ----------------------------------------------------

/// Classifier over (s, a, s') triples distinguishing true from model
/// transitions. Tabular triples are encoded as a joint one-hot (fully
/// expressive for a logistic head); continuous triples are concatenated raw.
struct TransitionClassifier {
  ratio::ProbClassifier clf;
  double gamma = 1.0;
  int n_states = 0;   // tabular only
  int n_actions = 0;

  static Vector encode_tabular(int n_states, int n_actions, int s, int a, int s2) {
    Vector v = Vector::Zero(static_cast<Eigen::Index>(n_states) * n_actions * n_states);
    v((static_cast<Eigen::Index>(s) * n_actions + a) * n_states + s2) = 1.0;
    return v;
  }

  static Vector encode_continuous(const Vector& s, const Vector& a, const Vector& s2) {
    Vector v(s.size() + a.size() + s2.size());
    v << s, a, s2;
    return v;
  }

  double weight(int s, int a, int s2) const {
    return ratio::weight_from_prob(
        clf.predict_proba(encode_tabular(n_states, n_actions, s, a, s2)), gamma);
  }

  double weight(const Vector& s, const Vector& a, const Vector& s2) const {
    return ratio::weight_from_prob(clf.predict_proba(encode_continuous(s, a, s2)),
                                   gamma);
  }

  /// Weight lookup table for every tabular triple, for batched use.
  std::vector<Matrix> weight_table() const {
    Matrix all = Matrix::Identity(
        static_cast<Eigen::Index>(n_states) * n_actions * n_states,
        static_cast<Eigen::Index>(n_states) * n_actions * n_states);
    Vector probs = clf.predict(all);
    std::vector<Matrix> w(static_cast<std::size_t>(n_states) *
                          static_cast<std::size_t>(n_actions));
    Eigen::Index k = 0;
    for (int s = 0; s < n_states; ++s)
      for (int a = 0; a < n_actions; ++a) {
        Matrix& slot = w[static_cast<std::size_t>(s * n_actions + a)];
        if (slot.size() == 0) slot = Matrix::Zero(1, n_states);
        for (int s2 = 0; s2 < n_states; ++s2)
          slot(0, s2) = ratio::weight_from_prob(probs(k++), gamma);
      }
    return w;
  }
};

/// Builds one generated negative per real transition by resampling the next
/// state from the model (gamma = 1), then trains the classifier.
inline TransitionClassifier train_transition_classifier(
    const std::vector<TabularTrajectory>& real_data, const TabularDynamics& model,
    const ratio::TrainConfig& config,
    ratio::Architecture arch = ratio::Architecture::logistic) {
  require(!real_data.empty(), "train_transition_classifier: no data");
  model.validate();
  const int n_states = model.n_states();
  const int n_actions = model.n_actions();
  std::size_t n = 0;
  for (const auto& t : real_data) n += static_cast<std::size_t>(t.horizon());
  require(n >= 1, "train_transition_classifier: no transitions");

  const Eigen::Index dim =
      static_cast<Eigen::Index>(n_states) * n_actions * n_states;
  Matrix pos(static_cast<Eigen::Index>(n), dim);
  Matrix neg(static_cast<Eigen::Index>(n), dim);
  rng::Rng g(rng::derive_seed(config.seed, "negatives"));
  Eigen::Index row = 0;
  for (const auto& t : real_data) {
    for (int step = 0; step < t.horizon(); ++step) {
      const int s = t.states[static_cast<std::size_t>(step)];
      const int a = t.actions[static_cast<std::size_t>(step)];
      const int s2 = t.states[static_cast<std::size_t>(step) + 1];
      pos.row(row) =
          TransitionClassifier::encode_tabular(n_states, n_actions, s, a, s2);
      neg.row(row) = TransitionClassifier::encode_tabular(
          n_states, n_actions, s, a, model.sample_next(s, a, g));
      ++row;
    }
  }

  TransitionClassifier tc;
  tc.gamma = 1.0;
  tc.n_states = n_states;
  tc.n_actions = n_actions;
  tc.clf = ratio::train_classifier(
      ratio::make_ratio_dataset(std::move(pos), std::move(neg)), config, arch);
  return tc;
}

inline TransitionClassifier train_transition_classifier(
    const std::vector<GaussianTrajectory>& real_data,
    const LinearGaussianDynamics& model, const ratio::TrainConfig& config,
    ratio::Architecture arch = ratio::Architecture::mlp) {
  require(!real_data.empty(), "train_transition_classifier: no data");
  std::size_t n = 0;
  for (const auto& t : real_data) n += static_cast<std::size_t>(t.horizon());
  require(n >= 1, "train_transition_classifier: no transitions");
  const auto d = real_data.front().states.front().size();
  const auto m = real_data.front().actions.front().size();
  Matrix pos(static_cast<Eigen::Index>(n), 2 * d + m);
  Matrix neg(static_cast<Eigen::Index>(n), 2 * d + m);
  rng::Rng g(rng::derive_seed(config.seed, "negatives"));
  Eigen::Index row = 0;
  for (const auto& t : real_data) {
    for (int step = 0; step < t.horizon(); ++step) {
      const auto& s = t.states[static_cast<std::size_t>(step)];
      const auto& a = t.actions[static_cast<std::size_t>(step)];
      const auto& s2 = t.states[static_cast<std::size_t>(step) + 1];
      pos.row(row) = TransitionClassifier::encode_continuous(s, a, s2);
      neg.row(row) =
          TransitionClassifier::encode_continuous(s, a, model.sample_next(s, a, g));
      ++row;
    }
  }
  TransitionClassifier tc;
  tc.gamma = 1.0;
  tc.clf = ratio::train_classifier(
      ratio::make_ratio_dataset(std::move(pos), std::move(neg)), config, arch);
  return tc;
}

// --- LFIW value estimation -----------------------------------------------------

/// Per-transition weight callable: tabular (int, int, int) or continuous
/// (Vector, Vector, Vector).
template <class Traj, class WeightFn>
double trajectory_weight(const Traj& traj, const WeightFn& weight_fn, int horizon_h) {
  require(horizon_h >= 0 && horizon_h <= traj.horizon(),
          "trajectory_weight: H must be in [0, T]");
  double w = 1.0;
  for (int t = 0; t < horizon_h; ++t)
    w *= weight_fn(traj.states[static_cast<std::size_t>(t)],
                   traj.actions[static_cast<std::size_t>(t)],
                   traj.states[static_cast<std::size_t>(t) + 1]);
  return w;
}

/// Weighted-mean estimate from precomputed rollouts; weights are trajectory
/// products over the first H transitions.
template <class Traj, class WeightFn>
ValueEstimate lfiw_value_from(const std::vector<Traj>& rollouts,
                              const WeightFn& weight_fn, int horizon_h,
                              bool self_normalize = true) {
  require(!rollouts.empty(), "lfiw_value_from: no rollouts");
  const auto n = static_cast<double>(rollouts.size());
  Vector w(static_cast<Eigen::Index>(rollouts.size()));
  Vector returns(static_cast<Eigen::Index>(rollouts.size()));
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    w(static_cast<Eigen::Index>(i)) =
        trajectory_weight(rollouts[i], weight_fn, horizon_h);
    returns(static_cast<Eigen::Index>(i)) = rollouts[i].total_return();
  }
  Vector summands;
  if (self_normalize) {
    const double total = w.sum();
    if (total <= 0.0)
      throw std::runtime_error(
          "lfiw_value_from: all trajectory weights are zero");
    summands = (w / total).cwiseProduct(returns) * n;
  } else {
    summands = w.cwiseProduct(returns);
  }
  ValueEstimate est;
  est.value = summands.mean();
  if (rollouts.size() >= 2) {
    const double sd =
        std::sqrt((summands.array() - est.value).square().sum() / (n - 1.0));
    est.stderr_ = sd / std::sqrt(n);
  }
  return est;
}

template <class Dyn, class Mdp, class Pol, class WeightFn>
ValueEstimate lfiw_value(const Dyn& model, const Mdp& mdp, const Pol& policy,
                         const WeightFn& weight_fn, int n_traj, int horizon,
                         int horizon_h, std::uint64_t seed,
                         bool self_normalize = true) {
  const auto rollouts = rollout(model, mdp, policy, n_traj, horizon, seed);
  return lfiw_value_from(rollouts, weight_fn, horizon_h, self_normalize);
}

/// Stepwise estimator: each transition triplet carries its own weight,
/// self-normalized across the batch at fixed timestep t and rescaled by the
/// batch size so unit weights recover the plain model estimate.
template <class Traj, class WeightFn>
ValueEstimate stepwise_lfiw_value_from(const std::vector<Traj>& rollouts,
                                       const WeightFn& weight_fn) {
  require(!rollouts.empty(), "stepwise_lfiw_value_from: no rollouts");
  const auto n = rollouts.size();
  const int horizon = rollouts.front().horizon();
  Vector summand = Vector::Zero(static_cast<Eigen::Index>(n));
  Vector w(static_cast<Eigen::Index>(n));
  for (int t = 0; t < horizon; ++t) {
    for (std::size_t i = 0; i < n; ++i)
      w(static_cast<Eigen::Index>(i)) =
          weight_fn(rollouts[i].states[static_cast<std::size_t>(t)],
                    rollouts[i].actions[static_cast<std::size_t>(t)],
                    rollouts[i].states[static_cast<std::size_t>(t) + 1]);
    const double total = w.sum();
    if (total <= 0.0)
      throw std::runtime_error("stepwise_lfiw_value_from: all weights zero at a step");
    for (std::size_t i = 0; i < n; ++i)
      summand(static_cast<Eigen::Index>(i)) +=
          static_cast<double>(n) * w(static_cast<Eigen::Index>(i)) / total *
          rollouts[i].rewards[static_cast<std::size_t>(t)];
  }
  ValueEstimate est;
  est.value = summand.mean();
  if (n >= 2) {
    const double sd = std::sqrt((summand.array() - est.value).square().sum() /
                                static_cast<double>(n - 1));
    est.stderr_ = sd / std::sqrt(static_cast<double>(n));
  }
  return est;
}

template <class Dyn, class Mdp, class Pol, class WeightFn>
ValueEstimate stepwise_lfiw_value(const Dyn& model, const Mdp& mdp,
                                  const Pol& policy, const WeightFn& weight_fn,
                                  int n_traj, int horizon, std::uint64_t seed) {
  const auto rollouts = rollout(model, mdp, policy, n_traj, horizon, seed);
  return stepwise_lfiw_value_from(rollouts, weight_fn);
}

struct SweepPoint {
  int horizon_h = 0;
  double value = 0.0;
  double stderr_ = 0.0;
  double delta = 0.0;  // v_true - value, when a ground truth is supplied
};

/// Evaluates the partial-horizon estimator across H values on one shared
/// rollout set (common random numbers).
template <class Dyn, class Mdp, class Pol, class WeightFn>
std::vector<SweepPoint> horizon_sweep(const Dyn& model, const Mdp& mdp,
                                      const Pol& policy, const WeightFn& weight_fn,
                                      int n_traj, int horizon,
                                      const std::vector<int>& h_values,
                                      std::uint64_t seed,
                                      bool self_normalize = true,
                                      double v_true = 0.0) {
  const auto rollouts = rollout(model, mdp, policy, n_traj, horizon, seed);
  std::vector<SweepPoint> out;
  out.reserve(h_values.size());
  for (int h : h_values) {
    require(h >= 0 && h <= horizon, "horizon_sweep: H out of range");
    const auto est = lfiw_value_from(rollouts, weight_fn, h, self_normalize);
    out.push_back({h, est.value, est.stderr_, v_true - est.value});
  }
  return out;
}

// --- Exhaustive enumeration (small tabular instances) -----------------------

struct EnumerationResult {
  double weighted_value = 0.0;  // sum over trajectories of p_model * w * R
  double weight_mass = 0.0;     // sum over trajectories of p_model * w
};

/// Sums p_model(tau) * w(tau) * R(tau) over every trajectory of the given
/// horizon. Cost grows as (S*A)^T; intended for S*A <= 12, T <= 4.
template <class WeightFn>
EnumerationResult enumerate_weighted_value(const TabularDynamics& model,
                                           const TabularMdp& mdp,
                                           const TabularPolicy& policy,
                                           const WeightFn& weight_fn,
                                           int horizon) {
  model.validate();
  mdp.validate();
  policy.validate();
  EnumerationResult res;
  const int n_s = model.n_states();
  const int n_a = model.n_actions();

  struct Frame {
    int s;
    double prob;
    double weight;
    double ret;
  };
  std::function<void(int, const Frame&)> recurse = [&](int t, const Frame& f) {
    if (f.prob == 0.0) return;
    if (t == horizon) {
      res.weighted_value += f.prob * f.weight * f.ret;
      res.weight_mass += f.prob * f.weight;
      return;
    }
    for (int a = 0; a < n_a; ++a) {
      const double pa = policy.probs(f.s, a);
      if (pa == 0.0) continue;
      for (int s2 = 0; s2 < n_s; ++s2) {
        const double pt = model.prob(f.s, a, s2);
        if (pt == 0.0) continue;
        Frame next{s2, f.prob * pa * pt, f.weight * weight_fn(f.s, a, s2),
                   f.ret + mdp.reward(s2, a)};
        recurse(t + 1, next);
      }
    }
  };
  for (int s0 = 0; s0 < n_s; ++s0)
    recurse(0, {s0, mdp.eta(s0), 1.0, 0.0});
  return res;
}

/// Exact per-step density-ratio weights between two tabular kernels.
inline auto oracle_transition_weight(const TabularDynamics& true_dynamics,
                                     const TabularDynamics& model) {
  return [&true_dynamics, &model](int s, int a, int s2) {
    const double pm = model.prob(s, a, s2);
    if (pm == 0.0) {
      if (true_dynamics.prob(s, a, s2) > 0.0)
        throw std::domain_error("oracle_transition_weight: support violation");
      return 0.0;
    }
    return true_dynamics.prob(s, a, s2) / pm;
  };
}

// --- Bundled benchmark --------------------------------------------------------

struct ChainBenchmark {
  TabularMdp mdp;
  TabularPolicy behavior;
  TabularPolicy evaluation;
};

/// 4-state chain with drift actions; the behavior policy explores while the
/// evaluation policy pushes right toward the rewarding states.
inline ChainBenchmark make_chain_benchmark(int horizon = 20) {
  const int n_s = 4;
  ChainBenchmark b;
  Matrix left(n_s, n_s), right(n_s, n_s);
  left.setZero();
  right.setZero();
  for (int s = 0; s < n_s; ++s) {
    const int dn = std::max(0, s - 1);
    const int up = std::min(n_s - 1, s + 1);
    // action 0 drifts left, action 1 drifts right
    left(s, dn) += 0.7;
    left(s, s) += 0.2;
    left(s, up) += 0.1;
    right(s, up) += 0.8;
    right(s, s) += 0.15;
    right(s, dn) += 0.05;
  }
  b.mdp.dynamics.p = {left, right};
  b.mdp.reward.resize(n_s, 2);
  for (int s = 0; s < n_s; ++s) {
    b.mdp.reward(s, 0) = s / 3.0;
    b.mdp.reward(s, 1) = s / 3.0 - 0.01;
  }
  b.mdp.eta = Vector::Zero(n_s);
  b.mdp.eta(0) = 1.0;
  b.mdp.horizon = horizon;

  b.behavior.probs = Matrix::Constant(n_s, 2, 0.5);
  b.evaluation.probs.resize(n_s, 2);
  b.evaluation.probs.col(0).setConstant(0.1);
  b.evaluation.probs.col(1).setConstant(0.9);
  b.mdp.validate();
  return b;
}

// --- JSON interchange ----------------------------------------------------------

inline io::json tabular_mdp_to_json(const TabularMdp& mdp) {
  io::json j;
  j["kind"] = "tabular";
  j["n_states"] = mdp.dynamics.n_states();
  j["n_actions"] = mdp.dynamics.n_actions();
  auto mat = [](const Matrix& m) {
    std::vector<std::vector<double>> rows;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(m.cols()));
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        row[static_cast<std::size_t>(c)] = m(i, c);
      rows.push_back(std::move(row));
    }
    return rows;
  };
  std::vector<std::vector<std::vector<double>>> p;
  for (const auto& m : mdp.dynamics.p) p.push_back(mat(m));
  j["transition"] = p;
  j["reward"] = mat(mdp.reward);
  j["eta"] = std::vector<double>(mdp.eta.data(), mdp.eta.data() + mdp.eta.size());
  j["horizon"] = mdp.horizon;
  return j;
}

inline Matrix matrix_from_json(const io::json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  require(!rows.empty(), "matrix_from_json: empty matrix");
  Matrix m(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i].size() == rows.front().size(), "matrix_from_json: ragged rows");
    for (std::size_t c = 0; c < rows[i].size(); ++c)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
  }
  return m;
}

inline TabularMdp tabular_mdp_from_json(const io::json& j) {
  require(j.at("kind").get<std::string>() == "tabular",
          "tabular_mdp_from_json: kind must be 'tabular'");
  TabularMdp mdp;
  for (const auto& a : j.at("transition")) mdp.dynamics.p.push_back(matrix_from_json(a));
  mdp.reward = matrix_from_json(j.at("reward"));
  const auto eta = j.at("eta").get<std::vector<double>>();
  mdp.eta = Eigen::Map<const Vector>(eta.data(), static_cast<Eigen::Index>(eta.size()));
  mdp.horizon = j.at("horizon").get<int>();
  mdp.validate();
  return mdp;
}

inline std::vector<std::vector<double>> matrix_to_rows(const Matrix& m) {
  std::vector<std::vector<double>> rows;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      row[static_cast<std::size_t>(c)] = m(i, c);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline io::json linear_gaussian_mdp_to_json(const LinearGaussianMdp& mdp) {
  io::json j;
  j["kind"] = "linear_gaussian";
  j["A"] = matrix_to_rows(mdp.dynamics.a);
  j["B"] = matrix_to_rows(mdp.dynamics.b);
  j["Sigma"] = matrix_to_rows(mdp.dynamics.sigma);
  j["reward"] = {{"state_coef", std::vector<double>(mdp.reward.state_coef.data(),
                                                    mdp.reward.state_coef.data() +
                                                        mdp.reward.state_coef.size())},
                 {"action_coef", std::vector<double>(
                                     mdp.reward.action_coef.data(),
                                     mdp.reward.action_coef.data() +
                                         mdp.reward.action_coef.size())},
                 {"constant", mdp.reward.constant}};
  j["eta_mean"] = std::vector<double>(mdp.eta_mean.data(),
                                      mdp.eta_mean.data() + mdp.eta_mean.size());
  j["eta_cov"] = matrix_to_rows(mdp.eta_chol * mdp.eta_chol.transpose());
  j["horizon"] = mdp.horizon;
  return j;
}

inline LinearGaussianMdp linear_gaussian_mdp_from_json(const io::json& j) {
  require(j.at("kind").get<std::string>() == "linear_gaussian",
          "linear_gaussian_mdp_from_json: kind must be 'linear_gaussian'");
  LinearGaussianMdp mdp;
  mdp.dynamics.a = matrix_from_json(j.at("A"));
  mdp.dynamics.b = matrix_from_json(j.at("B"));
  mdp.dynamics.sigma = matrix_from_json(j.at("Sigma"));
  mdp.dynamics.finalize();
  const auto& r = j.at("reward");
  const auto sc = r.at("state_coef").get<std::vector<double>>();
  const auto ac = r.at("action_coef").get<std::vector<double>>();
  mdp.reward.state_coef =
      Eigen::Map<const Vector>(sc.data(), static_cast<Eigen::Index>(sc.size()));
  mdp.reward.action_coef =
      Eigen::Map<const Vector>(ac.data(), static_cast<Eigen::Index>(ac.size()));
  mdp.reward.constant = r.value("constant", 0.0);
  const auto em = j.at("eta_mean").get<std::vector<double>>();
  mdp.eta_mean = Eigen::Map<const Vector>(em.data(), static_cast<Eigen::Index>(em.size()));
  const Matrix eta_cov = matrix_from_json(j.at("eta_cov"));
  Eigen::LLT<Matrix> llt(eta_cov);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("linear_gaussian_mdp_from_json: eta_cov not SPD");
  mdp.eta_chol = llt.matrixL();
  mdp.horizon = j.at("horizon").get<int>();
  return mdp;
}

inline io::json linear_gaussian_policy_to_json(const LinearGaussianPolicy& p) {
  io::json j;
  j["kind"] = "linear_gaussian";
  j["K"] = matrix_to_rows(p.gain);
  j["noise_cov"] = matrix_to_rows(p.noise_chol * p.noise_chol.transpose());
  return j;
}

inline LinearGaussianPolicy linear_gaussian_policy_from_json(const io::json& j) {
  require(j.at("kind").get<std::string>() == "linear_gaussian",
          "linear_gaussian_policy_from_json: kind must be 'linear_gaussian'");
  LinearGaussianPolicy p;
  p.gain = matrix_from_json(j.at("K"));
  const Matrix cov = matrix_from_json(j.at("noise_cov"));
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("linear_gaussian_policy_from_json: noise_cov not SPD");
  p.noise_chol = llt.matrixL();
  return p;
}

inline io::json tabular_policy_to_json(const TabularPolicy& p) {
  io::json j;
  j["kind"] = "tabular";
  std::vector<std::vector<double>> rows;
  for (Eigen::Index i = 0; i < p.probs.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(p.probs.cols()));
    for (Eigen::Index c = 0; c < p.probs.cols(); ++c)
      row[static_cast<std::size_t>(c)] = p.probs(i, c);
    rows.push_back(std::move(row));
  }
  j["probs"] = rows;
  return j;
}

inline TabularPolicy tabular_policy_from_json(const io::json& j) {
  require(j.at("kind").get<std::string>() == "tabular",
          "tabular_policy_from_json: kind must be 'tabular'");
  TabularPolicy p{matrix_from_json(j.at("probs"))};
  p.validate();
  return p;
}

}  // namespace lfiw::mbope
