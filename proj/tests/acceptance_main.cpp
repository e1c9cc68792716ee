// Acceptance suite: runs every gate criterion at its stated tolerance and
// prints one [PASS]/[FAIL] line per criterion. Exit code is the number of
// failed criteria.

#include <lfiw/lfiw.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace lfiw;
using estimators::WeightConfig;

namespace {

constexpr std::uint64_t kRoot = 20250810;

#ifdef LFIW_CLI_PATH
const std::string kCli = LFIW_CLI_PATH;
#else
const std::string kCli;
#endif

std::string fmt(double v) { return io::format_double(v); }

// --- criterion 1 -------------------------------------------------------------

bool criterion1(std::string& detail) {
  rng::Rng g(rng::derive_seed(kRoot, "c1"));
  double max_weight_err = 0.0, max_estimate_err = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto k = static_cast<Eigen::Index>(2 + g.integer(7));  // K <= 8
    const DiscreteDistributionPair pair(random_simplex(k, g), random_simplex(k, g));
    const double gamma = std::exp(g.uniform(-1.0, 1.0));
    const Vector c = pair.bayes_optimal_probs(gamma);
    const Vector w = pair.oracle_weights();
    for (Eigen::Index i = 0; i < k; ++i) {
      const double implied = gamma * c(i) / (1.0 - c(i));
      const double target = pair.p()(i) / pair.p_theta()(i);
      max_weight_err = std::max(
          max_weight_err, std::abs(implied - target) / std::max(1.0, target));
    }
    for (int rep = 0; rep < 5; ++rep) {
      Vector f(k);
      for (Eigen::Index i = 0; i < k; ++i) f(i) = g.uniform(-10.0, 10.0);
      double est = 0.0, truth = 0.0;
      for (Eigen::Index i = 0; i < k; ++i) {
        est += pair.p_theta()(i) * w(i) * f(i);
        truth += pair.p()(i) * f(i);
      }
      max_estimate_err = std::max(max_estimate_err, std::abs(est - truth));
    }
  }
  detail = "max weight err " + fmt(max_weight_err) + ", max estimate err " +
           fmt(max_estimate_err);
  return max_weight_err <= 1e-12 && max_estimate_err <= 1e-12;
}

// --- criterion 2 -------------------------------------------------------------

double median_band_width(const synthetic::Fig1Result& r) {
  std::vector<double> w;
  for (Eigen::Index i = 0; i < r.band_lo.size(); ++i)
    w.push_back(r.band_hi(i) - r.band_lo(i));
  std::sort(w.begin(), w.end());
  return w[w.size() / 2];
}

bool criterion2(std::string& detail) {
  synthetic::Fig1Options with_bands;
  with_bands.bootstrap_n = 1000;
  const auto big = synthetic::run_fig1_experiment(1000, 7, with_bands);
  const auto small = synthetic::run_fig1_experiment(50, 7, with_bands);
  const bool gap_ok = big.mean_abs_gap <= 0.05;
  const bool width_ok = median_band_width(big) < median_band_width(small);

  synthetic::Fig1Options no_bands;
  no_bands.with_bootstrap = false;
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto b = synthetic::run_fig1_experiment(1000, seed, no_bands);
    const auto s = synthetic::run_fig1_experiment(50, seed, no_bands);
    wins += b.mean_abs_gap < s.mean_abs_gap;
  }
  detail = "gap(n=1000) " + fmt(big.mean_abs_gap) + ", wins " +
           std::to_string(wins) + "/20, median widths " +
           fmt(median_band_width(big)) + " vs " + fmt(median_band_width(small));
  return gap_ok && wins >= 16 && width_ok;
}

// --- criterion 3 -------------------------------------------------------------

bool criterion3(std::string& detail) {
  rng::Rng g(rng::derive_seed(kRoot, "c3"));
  double worst = 0.0;
  for (int trial = 0; trial < 2000; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(g.integer(30));
    Vector w(n), f(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      w(i) = std::exp(g.uniform(-3.0, 3.0));
      f(i) = g.uniform(-5.0, 5.0);
    }
    // alpha = 0 flattens to ones
    const Vector ones = estimators::transform_weights(w, {1.0, 0.0, 0.0, false});
    worst = std::max(worst, (ones.array() - 1.0).abs().maxCoeff());
    // beta = 0 leaves weights unchanged
    const Vector same = estimators::transform_weights(w, {1.0, 1.0, 0.0, false});
    worst = std::max(worst, (same - w).cwiseAbs().maxCoeff());
    // self-normalized weights sum to one
    const Vector norm = estimators::transform_weights(w, {1.0, 1.0, 0.0, true});
    worst = std::max(worst, std::abs(norm.sum() - 1.0));
    // gamma-invariance and boundedness of the self-normalized estimate
    const auto a =
        estimators::estimate_expectation(w, f, WeightConfig::self_normalized());
    const double scale = std::exp(g.uniform(-2.0, 2.0));
    const auto b = estimators::estimate_expectation((w * scale).eval(), f,
                                                    WeightConfig::self_normalized());
    worst = std::max(worst, std::abs(a.value - b.value));
    worst = std::max(worst, std::max(f.minCoeff() - a.value, 0.0));
    worst = std::max(worst, std::max(a.value - f.maxCoeff(), 0.0));
  }
  detail = "worst deviation " + fmt(worst);
  return worst <= 1e-9;
}

// --- shared toy helpers --------------------------------------------------------

struct ToySetup {
  synthetic::MomentMatchedGaussian model;
  ratio::ProbClassifier clf;
  double gamma = 1.0;
};

ToySetup build_toy(std::uint64_t seed, int n_model, int n_clf, int neg_ratio) {
  const auto mixture = synthetic::canonical_mixture();
  rng::Rng fit_rng(rng::derive_seed(seed, "model-fit"));
  std::vector<double> fit_sample(static_cast<std::size_t>(n_model));
  for (auto& x : fit_sample) x = mixture.sample(fit_rng);
  ToySetup setup;
  setup.model = synthetic::fit_moment_matched(fit_sample);

  const int n_neg = neg_ratio * n_clf;
  rng::Rng data_rng(rng::derive_seed(seed, "data"));
  rng::Rng model_rng(rng::derive_seed(seed, "model"));
  Matrix pos(n_clf, 1), neg(n_neg, 1);
  for (int i = 0; i < n_clf; ++i) pos(i, 0) = mixture.sample(data_rng);
  for (int i = 0; i < n_neg; ++i) neg(i, 0) = setup.model.sample(model_rng);
  auto tc = synthetic::Fig1Options::fig1_train_config();
  tc.batch_size = n_clf + n_neg;
  tc.seed = rng::derive_seed(seed, "train");
  setup.gamma = static_cast<double>(n_neg) / n_clf;
  setup.clf = ratio::train_classifier(ratio::make_ratio_dataset(pos, neg), tc,
                                      ratio::Architecture::mlp);
  return setup;
}

Matrix draw_model_batch(const synthetic::MomentMatchedGaussian& model,
                        std::uint64_t seed, int count) {
  rng::Rng g(seed);
  Matrix pts(count, 1);
  for (int i = 0; i < count; ++i) pts(i, 0) = model.sample(g);
  return pts;
}

// --- criterion 4 -------------------------------------------------------------

bool criterion4(std::string& detail) {
  // The generative model is fit on a small sample, so it carries genuine
  // bias; the classifier trains on 1000 target draws vs 5000 model draws.
  const auto mixture = synthetic::canonical_mixture();
  const double truth = mixture.second_moment();
  int wins = 0;
  for (int seed = 0; seed < 50; ++seed) {
    const auto root = rng::derive_seed(kRoot, "c4", static_cast<std::uint64_t>(seed));
    const auto setup = build_toy(root, 50, 1000, 5);
    const Matrix pts =
        draw_model_batch(setup.model, rng::derive_seed(root, "batch"), 5000);
    const Vector w = ratio::importance_weights(setup.clf, setup.gamma, pts);
    const Vector f = pts.col(0).array().square();
    const double plain = f.mean();
    const auto rep =
        estimators::estimate_expectation(w, f, WeightConfig::self_normalized());
    wins += std::abs(rep.value - truth) < std::abs(plain - truth);
  }
  detail = std::to_string(wins) + "/50 seeds improved";
  return wins >= 40;
}

// --- criterion 5 -------------------------------------------------------------

bool criterion5(std::string& detail) {
  rng::Rng g(rng::derive_seed(kRoot, "c5"));
  const DiscreteDistributionPair pair(random_simplex(10, g, 0.05),
                                      random_simplex(10, g, 0.05));
  const Vector w = pair.oracle_weights();
  const Vector target = resample::resampled_pmf(pair, w);
  std::vector<double> tvs;
  for (int t : {1, 10, 100}) {
    auto model = resample::resampled_from_pair(pair, w, t);
    rng::Rng draws(rng::derive_seed(kRoot, "c5-draws", static_cast<std::uint64_t>(t)));
    Vector counts = Vector::Zero(10);
    for (int i = 0; i < 100000; ++i)
      counts(static_cast<Eigen::Index>(resample::sir_sample(model, draws))) += 1.0;
    tvs.push_back(total_variation((counts / counts.sum()).eval(), target));
  }
  detail = "TV(T=1) " + fmt(tvs[0]) + ", TV(T=10) " + fmt(tvs[1]) +
           ", TV(T=100) " + fmt(tvs[2]);
  return tvs[2] <= 0.05 && tvs[2] <= tvs[1] + 0.01 && tvs[1] <= tvs[0] + 0.01;
}

// --- criterion 6 -------------------------------------------------------------

bool criterion6(std::string& detail) {
  rng::Rng g(rng::derive_seed(kRoot, "c6"));
  int improvements = 0;
  double worst_gap = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto k = static_cast<Eigen::Index>(2 + g.integer(7));
    const DiscreteDistributionPair pair(random_simplex(k, g), random_simplex(k, g));
    const Vector w = random_log_uniform_weights(k, g);
    if (resample::exact_delta_kl(pair, w) <= 0.0) {
      ++improvements;
      const auto d = resample::kl_diagnostics_exact(pair, w);
      worst_gap = std::min({worst_gap, d.nec1_gap, d.nec2_gap});
    }
  }
  // stored insufficiency counterexample: both gaps >= 0 but the KL worsens
  Vector p(2), q(2), w(2);
  p << 0.6, 0.4;
  q << 0.5, 0.5;
  w << std::exp(2.0), std::exp(-2.0);
  const DiscreteDistributionPair pair(p, q);
  const auto d = resample::kl_diagnostics_exact(pair, w);
  const bool witness_ok = d.nec1_gap >= 0.0 && d.nec2_gap >= 0.0 &&
                          resample::exact_delta_kl(pair, w) > 0.0;
  detail = std::to_string(improvements) + "/1000 improving triples, worst gap " +
           fmt(worst_gap) + ", witness " + (witness_ok ? "holds" : "broken");
  return worst_gap >= -1e-12 && witness_ok && improvements > 0;
}

// --- criterion 7 -------------------------------------------------------------

bool criterion7(std::string& detail) {
  const auto mixture = synthetic::canonical_mixture();
  const std::vector<double> truth{mixture.mean(), mixture.second_moment()};
  std::vector<WeightConfig> configs;
  for (double a : {0.0, 0.25, 0.5, 0.75, 1.0}) configs.push_back({1.0, a, 0.0, false});
  for (double b : {0.001, 0.01, 0.1, 1.0}) configs.push_back({1.0, 1.0, b, false});
  configs.push_back(WeightConfig::self_normalized());
  const std::size_t self_idx = configs.size() - 1;
  const std::vector<estimators::Statistic> stats{
      {"mean_x", [](const Vector& x) { return x(0); }},
      {"second_moment", [](const Vector& x) { return x(0) * x(0); }}};

  int self_norm_best = 0;
  int rank_le2 = 0;
  double worst_identity = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    const auto root = rng::derive_seed(kRoot, "c7", static_cast<std::uint64_t>(seed));
    const auto setup = build_toy(root, 100, 1000, 1);
    auto sampler = [&](int trial) {
      const Matrix pts = draw_model_batch(
          setup.model, rng::derive_seed(root, "trial", static_cast<std::uint64_t>(trial)),
          5000);
      return estimators::WeightedBatch(
          pts, ratio::importance_weights(setup.clf, setup.gamma, pts),
          WeightConfig{});
    };
    const auto reports =
        estimators::bias_variance_decompose(configs, stats, truth, sampler, 10);
    std::size_t best = 0;
    double best_bias = 1e300;
    int better_than_self = 0;
    const double self_bias = std::abs(reports[self_idx].records[1].bias);
    for (std::size_t i = 0; i < reports.size(); ++i) {
      for (const auto& rec : reports[i].records) {
        worst_identity = std::max(
            worst_identity, std::abs(rec.mse - rec.bias * rec.bias - rec.variance) /
                                std::max(1.0, rec.mse));
      }
      const double b = std::abs(reports[i].records[1].bias);  // E[x^2]
      if (b < best_bias) {
        best_bias = b;
        best = i;
      }
      if (i != self_idx && b < self_bias) ++better_than_self;
    }
    self_norm_best += best == self_idx;
    rank_le2 += better_than_self <= 1;
  }
  detail = "identity dev " + fmt(worst_identity) + ", self-norm strictly best " +
           std::to_string(self_norm_best) + "/20 (best-or-second " +
           std::to_string(rank_le2) + "/20)";
  return worst_identity <= 1e-9 && self_norm_best >= 12;
}

// --- criterion 8 -------------------------------------------------------------

bool criterion8(std::string& detail) {
  rng::Rng g(rng::derive_seed(kRoot, "c8"));
  Matrix cloud(200, 6);
  for (Eigen::Index i = 0; i < cloud.rows(); ++i)
    for (Eigen::Index j = 0; j < cloud.cols(); ++j) cloud(i, j) = g.normal();
  const double self_fid =
      metrics::frechet_distance({cloud, std::nullopt}, {cloud, std::nullopt});

  Matrix a(2, 1), b(2, 1), c(2, 1);
  a << -1.0, 1.0;
  b << 2.0, 4.0;
  c << -2.0, 2.0;
  const double fid9 = metrics::frechet_distance({a, std::nullopt}, {b, std::nullopt});
  const double fid1 = metrics::frechet_distance({a, std::nullopt}, {c, std::nullopt});

  Matrix s(50, 4), r(50, 4);
  for (Eigen::Index i = 0; i < 50; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) {
      s(i, j) = g.normal();
      r(i, j) = g.normal() + 0.8;
    }
  auto kern = [&](const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& y) {
    return std::exp(-(x - y).squaredNorm() / 2.0);
  };
  double ss = 0.0, rr = 0.0, sr = 0.0;
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 50; ++j) {
      if (i != j) {
        ss += kern(s.row(i), s.row(j));
        rr += kern(r.row(i), r.row(j));
      }
      sr += kern(s.row(i), r.row(j));
    }
  const double kid_oracle = ss / (50.0 * 49.0) + rr / (50.0 * 49.0) -
                            2.0 * sr / (50.0 * 50.0);
  const double kid = metrics::kernel_distance({s, std::nullopt}, {r, std::nullopt});

  // contaminated model: weighted FID strictly below unweighted
  const int n = 600;
  Matrix real(n, 2), model_pts(n, 2);
  for (int i = 0; i < n; ++i) {
    real(i, 0) = g.normal();
    real(i, 1) = g.normal();
    const bool spurious = g.uniform() < 0.5;
    model_pts(i, 0) = g.normal() + (spurious ? 5.0 : 0.0);
    model_pts(i, 1) = g.normal() + (spurious ? 5.0 : 0.0);
  }
  auto suite = metrics::debiased_metric_suite(
      model_pts, real,
      [](const Vector& x) {
        Vector mu(2);
        mu << 5.0, 5.0;
        const double num = std::exp(-0.5 * x.squaredNorm());
        const double den = 0.5 * num + 0.5 * std::exp(-0.5 * (x - mu).squaredNorm());
        return num / den;
      },
      WeightConfig::self_normalized());

  detail = "FID(S,S) " + fmt(self_fid) + ", analytic errs " +
           fmt(std::abs(fid9 - 9.0)) + "/" + fmt(std::abs(fid1 - 1.0)) +
           ", KID err " + fmt(std::abs(kid - kid_oracle)) + ", weighted FID " +
           fmt(suite.fid_lfiw) + " < raw " + fmt(suite.fid_raw);
  return self_fid <= 1e-8 && std::abs(fid9 - 9.0) <= 1e-10 &&
         std::abs(fid1 - 1.0) <= 1e-10 && std::abs(kid - kid_oracle) <= 1e-12 &&
         suite.fid_lfiw < suite.fid_raw;
}

// --- criterion 9 -------------------------------------------------------------

bool criterion9(std::string& detail) {
  const int horizon = 20, n_traj = 10000;
  const auto bench = mbope::make_chain_benchmark(horizon);
  const double v = mbope::ground_truth_value(bench.mdp, bench.evaluation);

  double err_plain = 0.0, err_lfiw = 0.0, err_step = 0.0;
  double worst_endpoint = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto root = rng::derive_seed(kRoot, "c9", seed);
    const auto behavior_data =
        mbope::rollout(bench.mdp.dynamics, bench.mdp, bench.behavior, 400, horizon,
                       rng::derive_seed(root, "behavior"));
    auto model = mbope::fit_tabular_dynamics(behavior_data, 4, 2);
    model = mbope::mix_with_uniform(model, 0.25);

    ratio::TrainConfig tc;
    tc.optimizer = ratio::Optimizer::adam;
    tc.learning_rate = 0.02;
    tc.epochs = 150;
    tc.batch_size = 1 << 30;
    tc.seed = rng::derive_seed(root, "classifier");
    const auto clf = mbope::train_transition_classifier(behavior_data, model, tc);
    const auto table = clf.weight_table();
    auto weight_fn = [&table](int s, int a, int s2) {
      return table[static_cast<std::size_t>(s * 2 + a)](0, s2);
    };

    const auto rollouts = mbope::rollout(model, bench.mdp, bench.evaluation,
                                         n_traj, horizon,
                                         rng::derive_seed(root, "rollout"));
    auto unit = [](int, int, int) { return 1.0; };
    const double plain = mbope::lfiw_value_from(rollouts, unit, horizon).value;
    const double corrected = mbope::lfiw_value_from(rollouts, weight_fn, horizon).value;
    const double stepwise = mbope::stepwise_lfiw_value_from(rollouts, weight_fn).value;
    const auto sweep = mbope::horizon_sweep(model, bench.mdp, bench.evaluation,
                                            weight_fn, n_traj, horizon,
                                            {0, horizon},
                                            rng::derive_seed(root, "rollout"),
                                            true, v);
    worst_endpoint = std::max(worst_endpoint, std::abs(sweep[0].value - plain));

    err_plain += std::abs(plain - v) / 10.0;
    err_lfiw += std::abs(corrected - v) / 10.0;
    err_step += std::abs(stepwise - v) / 10.0;
  }
  detail = "mean |err|: plain " + fmt(err_plain) + ", lfiw " + fmt(err_lfiw) +
           ", stepwise " + fmt(err_step) + "; endpoint dev " + fmt(worst_endpoint);
  return err_lfiw < err_plain && err_step < err_plain && worst_endpoint <= 1e-12;
}

// --- criterion 10 ------------------------------------------------------------

int shell(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

bool same_digest(const fs::path& a, const fs::path& b, const std::string& name) {
  return io::sha256_file((a / name).string()) == io::sha256_file((b / name).string());
}

bool criterion10(std::string& detail) {
  if (kCli.empty() || !fs::exists(kCli)) {
    detail = "cli binary not found";
    return false;
  }
  const fs::path base = fs::temp_directory_path() / "lfiw_acceptance_cli";
  fs::remove_all(base);
  fs::create_directories(base);

  // deterministic input fixtures
  rng::Rng g(rng::derive_seed(kRoot, "c10"));
  std::string pos = "x,y\n", neg = "x,y\n";
  for (int i = 0; i < 150; ++i) {
    pos += fmt(g.normal() + 0.8) + "," + fmt(g.normal()) + "\n";
    neg += fmt(g.normal() - 0.8) + "," + fmt(g.normal()) + "\n";
  }
  io::atomic_write((base / "pos.csv").string(), pos);
  io::atomic_write((base / "neg.csv").string(), neg);
  io::atomic_write((base / "pair.json").string(),
                   "{\"p\": [0.7, 0.2, 0.1], \"p_theta\": [0.3, 0.4, 0.3]}\n");

  struct Step {
    std::string name;
    std::string args;
    std::vector<std::string> outputs;
  };
  const std::string in = base.string() + "/";
  std::vector<Step> steps{
      {"make-bench", "make-bench --horizon 8", {"env.json", "behavior.json", "eval.json"}},
      {"train-ratio",
       "train-ratio --positives " + in + "pos.csv --negatives " + in +
           "neg.csv --arch logistic --epochs 60 --lr 0.1 --eval-positives " + in +
           "pos.csv --eval-negatives " + in + "neg.csv --seed 5",
       {"classifier.json", "calibration.csv"}},
      {"estimate",
       "estimate --classifier {A}/classifier.json --samples " + in +
           "neg.csv --statistic mean --self-normalize true --seed 5",
       {"estimate.json", "estimate.csv"}},
      {"resample",
       "resample --pair " + in + "pair.json --particles 20 --draws 20000 --seed 5",
       {"histogram.csv", "diagnostics.json"}},
      {"metrics",
       "metrics --model " + in + "neg.csv --real " + in + "pos.csv --seed 5",
       {"metrics.json"}},
      {"fig1", "fig1 --n 60 --bootstrap-n 40 --seed 5",
       {"fig1_curve.csv", "fig1_summary.json"}},
      {"augment", "augment --m 0.5 --weights oracle --n-test 400 --seed 5",
       {"augment.json"}},
      {"ope",
       "ope --env {A}/env.json --behavior {A}/behavior.json --eval {A}/eval.json"
       " --n-traj 300 --H-sweep 0,4,8 --corrupt 0.3 --seed 5",
       {"ope_sweep.csv", "ope_summary.json"}},
      {"bias-variance", "bias-variance --trials 3 --t-batch 400 --n-clf 200 --seed 5",
       {"bias_variance.csv", "bias_variance.json"}},
  };

  for (const auto& step : steps) {
    const fs::path run_a = base / (step.name + "_a");
    const fs::path run_b = base / (step.name + "_b");
    for (const auto& dir : {run_a, run_b}) {
      std::string args = step.args;
      // inputs produced by earlier steps come from their first run
      const std::string marker = "{A}";
      for (std::size_t at = args.find(marker); at != std::string::npos;
           at = args.find(marker)) {
        std::string replacement = base.string();
        if (step.name == "estimate") replacement = (base / "train-ratio_a").string();
        if (step.name == "ope") replacement = (base / "make-bench_a").string();
        args.replace(at, marker.size(), replacement);
      }
      if (shell(args + " --threads 2 --out-dir " + dir.string()) != 0) {
        detail = step.name + " failed to run";
        return false;
      }
    }
    for (const auto& out : step.outputs) {
      if (!same_digest(run_a, run_b, out)) {
        detail = step.name + "/" + out + " differs between identical runs";
        return false;
      }
    }
    if (shell("verify " + (run_a / "manifest.json").string()) != 0) {
      detail = step.name + " manifest failed to verify";
      return false;
    }
  }
  fs::remove_all(base);
  detail = std::to_string(steps.size()) + " subcommands byte-identical, verify ok";
  return true;
}

// --- criterion 11 ------------------------------------------------------------

bool criterion11(std::string& detail) {
  // positives ~ N(+mu, I), negatives ~ N(-mu, I): the true posterior is an
  // affine-sigmoid, so the logistic model is well specified.
  auto blobs = [&](std::uint64_t seed) {
    rng::Rng g(seed);
    Matrix pos(1000, 2), neg(1000, 2);
    for (int i = 0; i < 1000; ++i) {
      pos(i, 0) = g.normal(0.5, 1.0);
      pos(i, 1) = g.normal();
      neg(i, 0) = g.normal(-0.5, 1.0);
      neg(i, 1) = g.normal();
    }
    return ratio::make_ratio_dataset(std::move(pos), std::move(neg));
  };
  const auto train_set = blobs(rng::derive_seed(kRoot, "c11-train"));
  const auto eval_set = blobs(rng::derive_seed(kRoot, "c11-eval"));
  ratio::TrainConfig tc;
  tc.epochs = 200;
  tc.learning_rate = 0.1;
  tc.seed = rng::derive_seed(kRoot, "c11-seed");
  const auto clf = ratio::train_classifier(train_set, tc, ratio::Architecture::logistic);
  const auto rep = ratio::calibration_report(clf, eval_set, 10);
  detail = "ece " + fmt(rep.ece);
  return rep.ece <= 0.05;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* label;
    std::function<bool(std::string&)> run;
  };
  const std::vector<Criterion> criteria{
      {1, "oracle identities on random discrete pairs", criterion1},
      {2, "toy-mixture classifier approaches the analytic optimum", criterion2},
      {3, "estimator family algebra", criterion3},
      {4, "self-normalized weighting reduces estimation error", criterion4},
      {5, "SIR empirical law converges to the induced distribution", criterion5},
      {6, "KL-improvement necessary conditions and counterexample", criterion6},
      {7, "bias-variance identity and self-normalization ranking", criterion7},
      {8, "feature-space metric sanity", criterion8},
      {9, "off-policy value estimation on the chain benchmark", criterion9},
      {10, "CLI determinism and manifest verification", criterion10},
      {11, "ratio classifier calibration", criterion11},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    std::string detail;
    bool ok = false;
    const auto started = std::chrono::steady_clock::now();
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - started)
                            .count();
    std::printf("[%s] criterion %2d: %s (%s; %.1fs)\n", ok ? "PASS" : "FAIL",
                c.id, c.label, detail.c_str(), secs);
    std::fflush(stdout);
    failed += !ok;
  }
  if (failed > 0) std::printf("%d criterion(s) failed\n", failed);
  return failed;
}
