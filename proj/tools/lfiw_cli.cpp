// Command-line driver for the likelihood-free importance weighting toolkit.
//
// Every subcommand is a pure function of (config, seed, input files): outputs
// are written atomically under --out-dir together with a manifest recording
// the effective configuration and artifact digests, which `verify` rechecks.

#include <lfiw/lfiw.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace lfiw;
using io::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

/// Root seed plus a log of every purpose stream derived from it.
struct SeedBook {
  std::uint64_t root = 0;
  std::vector<std::string> used;

  std::uint64_t derive(const std::string& purpose, std::uint64_t index = 0) {
    std::string label = purpose;
    if (index != 0) label += "[" + std::to_string(index) + "]";
    used.push_back(label);
    return rng::derive_seed(root, purpose, index);
  }
};

struct RunContext {
  std::string out_dir = ".";
  SeedBook seeds;
  json effective_config;
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

  std::string path(const std::string& name) const {
    return (fs::path(out_dir) / name).string();
  }

  void write(const std::string& name, const std::string& content) {
    const std::string p = path(name);
    io::atomic_write(p, content);
    outputs.push_back(p);
  }

  void finish(const std::string& command) {
    io::RunManifest manifest;
    manifest.command = command;
    manifest.config = effective_config;
    manifest.seed = seeds.root;
    manifest.seed_streams = seeds.used;
    manifest.duration_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - started)
                               .count();
    for (const auto& p : outputs) {
      // store paths relative to the manifest location
      manifest.outputs.emplace_back(fs::path(p).filename().string(),
                                    io::sha256_file(p));
    }
    manifest.write(path("manifest.json"));
  }
};

estimators::WeightConfig weight_config_from(double gamma, double alpha,
                                            double beta, bool self_normalize) {
  estimators::WeightConfig cfg{gamma, alpha, beta, self_normalize};
  cfg.validate();
  return cfg;
}

json weight_stats_json(const estimators::EstimateReport& rep) {
  return {{"value", rep.value},
          {"stderr", rep.stderr_},
          {"batch_size", rep.batch_size},
          {"weight_min", rep.weight_stats.min},
          {"weight_max", rep.weight_stats.max},
          {"weight_mean", rep.weight_stats.mean},
          {"effective_sample_size", rep.weight_stats.effective_sample_size}};
}

Vector load_weight_column(const std::string& path) {
  const Matrix m = io::load_csv_matrix(path);
  require(m.cols() == 1, "weights file must have a single column");
  return m.col(0);
}

// --- subcommand payloads -----------------------------------------------------

struct TrainRatioArgs {
  std::string positives, negatives, eval_positives, eval_negatives;
  std::string arch = "mlp";
  ratio::TrainConfig train;
  std::string optimizer = "gd";
  int bins = 10;
};

void run_train_ratio(RunContext& ctx, TrainRatioArgs& a) {
  a.train.optimizer = a.optimizer == "adam" ? ratio::Optimizer::adam
                                            : ratio::Optimizer::gd;
  a.train.seed = ctx.seeds.derive("train");
  const auto dataset = ratio::make_ratio_dataset(io::load_points(a.positives),
                                                 io::load_points(a.negatives));
  const auto clf = ratio::train_classifier(dataset, a.train,
                                           ratio::architecture_from_string(a.arch));
  json out = ratio::classifier_to_json(clf);
  out["gamma"] = dataset.gamma;
  out["final_bce"] = ratio::binary_cross_entropy(clf, dataset);
  ctx.write("classifier.json", out.dump(2) + "\n");

  if (!a.eval_positives.empty() || !a.eval_negatives.empty()) {
    require(!a.eval_positives.empty() && !a.eval_negatives.empty(),
            "calibration needs both --eval-positives and --eval-negatives");
    auto eval_set = ratio::make_ratio_dataset(io::load_points(a.eval_positives),
                                              io::load_points(a.eval_negatives));
    const auto rep = ratio::calibration_report(clf, eval_set, a.bins);
    ctx.write("calibration.csv", rep.to_csv());
  }
}

struct EstimateArgs {
  std::string classifier, samples;
  std::string statistic = "mean";
  int coord = 0;
  double gamma = 1.0, alpha = 1.0, beta = 0.0;
  bool self_normalize = false;
  double weight_warn_threshold = 1e3;
};

void run_estimate(RunContext& ctx, const EstimateArgs& a) {
  const auto clf =
      ratio::classifier_from_json(json::parse(io::read_file(a.classifier)));
  const Matrix pts = io::load_points(a.samples);
  require(a.coord >= 0 && a.coord < pts.cols(), "statistic coordinate out of range");
  Vector f(pts.rows());
  if (a.statistic == "mean") {
    f = pts.col(a.coord);
  } else if (a.statistic == "second-moment") {
    f = pts.col(a.coord).array().square();
  } else {
    throw std::invalid_argument("unknown statistic: " + a.statistic);
  }
  const Vector w = ratio::importance_weights(clf, a.gamma, pts);
  if (w.maxCoeff() > a.weight_warn_threshold) {
    std::fprintf(stderr,
                 "warning: max importance weight %g exceeds %g; the model may "
                 "not cover the target support\n",
                 w.maxCoeff(), a.weight_warn_threshold);
  }
  const auto cfg = weight_config_from(a.gamma, a.alpha, a.beta, a.self_normalize);
  const auto rep = estimators::estimate_expectation(w, f, cfg);
  json out = weight_stats_json(rep);
  out["statistic"] = a.statistic;
  out["coord"] = a.coord;
  ctx.write("estimate.json", out.dump(2) + "\n");
  io::CsvWriter csv("statistic,value,stderr,batch_size,effective_sample_size");
  csv.row(a.statistic, rep.value, rep.stderr_, rep.batch_size,
          rep.weight_stats.effective_sample_size);
  ctx.write("estimate.csv", csv.str());
}

struct ResampleArgs {
  std::string pair, weights;
  int particles = 10;
  std::int64_t draws = 100000;
};

void run_resample(RunContext& ctx, const ResampleArgs& a) {
  const json spec = json::parse(io::read_file(a.pair));
  const auto pv = spec.at("p").get<std::vector<double>>();
  const auto qv = spec.at("p_theta").get<std::vector<double>>();
  const DiscreteDistributionPair pair(
      Eigen::Map<const Vector>(pv.data(), (Eigen::Index)pv.size()),
      Eigen::Map<const Vector>(qv.data(), (Eigen::Index)qv.size()));
  const Vector w = a.weights.empty() ? pair.oracle_weights()
                                     : load_weight_column(a.weights);

  auto model = resample::resampled_from_pair(pair, w, a.particles);
  rng::Rng g(ctx.seeds.derive("sir"));
  Vector counts = Vector::Zero(pair.size());
  for (std::int64_t i = 0; i < a.draws; ++i)
    counts((Eigen::Index)resample::sir_sample(model, g)) += 1.0;
  const Vector exact = resample::resampled_pmf(pair, w);

  io::CsvWriter hist("symbol,count,frequency,exact_prob");
  for (Eigen::Index i = 0; i < pair.size(); ++i)
    hist.row(static_cast<std::int64_t>(i), static_cast<std::int64_t>(counts(i)),
             counts(i) / static_cast<double>(a.draws), exact(i));
  ctx.write("histogram.csv", hist.str());

  rng::Rng gd(ctx.seeds.derive("diagnostics"));
  std::vector<std::size_t> real_pts, model_pts;
  for (std::int64_t i = 0; i < a.draws; ++i) {
    real_pts.push_back(pair.sample_p(gd));
    model_pts.push_back(pair.sample(gd));
  }
  std::function<double(const std::size_t&)> wf =
      [&w](const std::size_t& i) { return w((Eigen::Index)i); };
  const auto mc = resample::kl_diagnostics(real_pts, model_pts, wf);
  const auto exact_diag = resample::kl_diagnostics_exact(pair, w);
  const auto z = resample::estimate_partition(model, a.draws, ctx.seeds.derive("partition"));

  json out{{"delta_estimate", mc.delta_estimate},
           {"nec1_gap", mc.nec1_gap},
           {"nec2_gap", mc.nec2_gap},
           {"verdict", mc.improvement_consistent ? "improvement-consistent"
                                                 : "not-improvement-consistent"},
           {"lhs_estimate", mc.lhs_estimate},
           {"rhs_log_mean", mc.rhs_log_mean},
           {"lhs_stderr", mc.lhs_stderr},
           {"nec1_stderr", mc.nec1_stderr},
           {"nec2_stderr", mc.nec2_stderr},
           {"delta_exact", exact_diag.delta_estimate},
           {"z_hat", z.z_hat},
           {"z_stderr", z.stderr_},
           {"tv_empirical_vs_exact",
            total_variation((counts / counts.sum()).eval(), exact)}};
  ctx.write("diagnostics.json", out.dump(2) + "\n");
}

struct MetricsArgs {
  std::string model, real, weights;
  double bandwidth = 1.0;
  double gamma = 1.0, alpha = 1.0, beta = 0.0;
  bool self_normalize = true;
};

void run_metrics(RunContext& ctx, const MetricsArgs& a) {
  const Matrix model_feats = io::load_points(a.model);
  const Matrix real_feats = io::load_points(a.real);
  Vector raw = Vector::Ones(model_feats.rows());
  if (!a.weights.empty()) {
    raw = load_weight_column(a.weights);
    require(raw.size() == model_feats.rows(),
            "weights length must match the model feature rows");
  }
  const auto cfg = weight_config_from(a.gamma, a.alpha, a.beta, a.self_normalize);
  const auto suite = metrics::debiased_metric_suite(
      model_feats, real_feats,
      [&raw, i = Eigen::Index(0)](const Vector&) mutable { return raw(i++); },
      cfg, a.bandwidth);
  json out{{"is_raw", suite.is_raw},       {"is_lfiw", suite.is_lfiw},
           {"fid_raw", suite.fid_raw},     {"fid_lfiw", suite.fid_lfiw},
           {"kid_raw", suite.kid_raw},     {"kid_lfiw", suite.kid_lfiw},
           {"weight_ess", suite.weight_ess}};
  ctx.write("metrics.json", out.dump(2) + "\n");
}

struct Fig1Args {
  int n = 1000;
  int bootstrap_n = 1000;
  double confidence = 0.95;
  bool no_bootstrap = false;
};

void run_fig1(RunContext& ctx, const Fig1Args& a) {
  synthetic::Fig1Options opts;
  opts.with_bootstrap = !a.no_bootstrap;
  opts.bootstrap_n = a.bootstrap_n;
  opts.confidence = a.confidence;
  ctx.seeds.used.push_back("fig1{data,model,train,bootstrap}");
  const auto res = synthetic::run_fig1_experiment(a.n, ctx.seeds.root, opts);

  io::CsvWriter curve("x,c_hat,c_opt,band_lo,band_hi");
  for (Eigen::Index i = 0; i < res.grid.size(); ++i) {
    const double lo = res.band_lo.size() > 0 ? res.band_lo(i) : res.trained_curve(i);
    const double hi = res.band_hi.size() > 0 ? res.band_hi(i) : res.trained_curve(i);
    curve.row(res.grid(i), res.trained_curve(i), res.optimal_curve(i), lo, hi);
  }
  ctx.write("fig1_curve.csv", curve.str());

  json summary{{"n", a.n},
               {"gamma", res.gamma},
               {"mean_abs_gap", res.mean_abs_gap},
               {"model_mean", res.model.mean},
               {"model_std", res.model.std}};
  ctx.write("fig1_summary.json", summary.dump(2) + "\n");
}

struct AugmentArgs {
  double m = 0.5;
  std::string weights = "oracle";  // unit | lfiw | oracle
  int n_real = 25, n_gen = 400, n_test = 2000;
  double flip = 0.3;
};

void run_augment(RunContext& ctx, const AugmentArgs& a) {
  require(a.weights == "unit" || a.weights == "lfiw" || a.weights == "oracle",
          "--weights must be unit, lfiw or oracle");
  auto toy = synthetic::make_contaminated_toy(a.n_real, a.n_gen, a.n_test, a.flip,
                                              ctx.seeds.derive("toy"));
  toy.task.mixture_m = a.m;

  std::function<double(const Vector&, int)> weight_fn;
  if (a.weights == "unit") {
    weight_fn = [](const Vector&, int) { return 1.0; };
  } else if (a.weights == "oracle") {
    weight_fn = [toy](const Vector& x, int y) { return toy.oracle_weight(x, y); };
  } else {
    // classifier over joint (x, onehot y) features: real labeled pairs vs
    // generated labeled pairs
    auto encode = [](const Matrix& x, const std::vector<int>& y) {
      Matrix out(x.rows(), x.cols() + 2);
      out.leftCols(x.cols()) = x;
      out.rightCols(2).setZero();
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        out(i, x.cols() + y[(std::size_t)i]) = 1.0;
      return out;
    };
    auto dataset = ratio::make_ratio_dataset(encode(toy.task.real_x, toy.task.real_y),
                                             encode(toy.task.gen_x, toy.task.gen_y));
    ratio::TrainConfig tc;
    tc.optimizer = ratio::Optimizer::adam;
    tc.learning_rate = 0.02;
    tc.epochs = 200;
    tc.batch_size = 1 << 30;
    tc.hidden_units = 32;
    tc.seed = ctx.seeds.derive("ratio-train");
    const auto clf = ratio::train_classifier(dataset, tc, ratio::Architecture::mlp);
    const double gamma = dataset.gamma;
    weight_fn = [clf, gamma](const Vector& x, int y) {
      Vector features(x.size() + 2);
      features.head(x.size()) = x;
      features(x.size()) = y == 0 ? 1.0 : 0.0;
      features(x.size() + 1) = y == 1 ? 1.0 : 0.0;
      return ratio::importance_weight(clf, gamma, features);
    };
  }

  const auto cfg = estimators::WeightConfig::self_normalized();
  const auto clf = synthetic::train_downstream(toy.task, weight_fn, cfg);
  auto unit = [](const Vector&, int) { return 1.0; };
  const auto baseline = synthetic::train_downstream(toy.task, unit, cfg);

  json out{{"weights", a.weights},
           {"m", a.m},
           {"accuracy", synthetic::accuracy(clf, toy.test_x, toy.test_y)},
           {"accuracy_unit_weights",
            synthetic::accuracy(baseline, toy.test_x, toy.test_y)},
           {"train_risk",
            synthetic::weighted_augmented_risk(toy.task, clf, weight_fn, cfg)}};
  ctx.write("augment.json", out.dump(2) + "\n");
}

struct OpeArgs {
  std::string env, behavior, evaluation;
  int n_traj = 100;
  int horizon = 0;  // 0: use the spec's horizon
  std::string h_sweep;
  int n_behavior_traj = 400;
  int n_classifiers = 1;
  double corrupt = 0.0;
  std::string weights = "classifier";  // classifier | oracle
  bool no_self_normalize = false;
};

/// Continuous-state variant: least-squares dynamics, an MLP transition
/// classifier, and a Monte Carlo ground truth in place of dynamic programming.
void run_ope_linear_gaussian(RunContext& ctx, const OpeArgs& a, const json& env) {
  const auto mdp = mbope::linear_gaussian_mdp_from_json(env);
  const auto pi_b = mbope::linear_gaussian_policy_from_json(
      json::parse(io::read_file(a.behavior)));
  const auto pi_e = mbope::linear_gaussian_policy_from_json(
      json::parse(io::read_file(a.evaluation)));
  const int horizon = a.horizon > 0 ? a.horizon : mdp.horizon;
  require(a.weights == "classifier", "linear-gaussian ope supports --weights classifier");

  std::vector<int> h_values{0, horizon};
  if (!a.h_sweep.empty()) {
    h_values.clear();
    std::size_t start = 0;
    while (start <= a.h_sweep.size()) {
      auto comma = a.h_sweep.find(',', start);
      if (comma == std::string::npos) comma = a.h_sweep.size();
      h_values.push_back(std::stoi(a.h_sweep.substr(start, comma - start)));
      start = comma + 1;
    }
  }

  const auto v_mc = mbope::monte_carlo_value(mdp.dynamics, mdp, pi_e, 100000,
                                             horizon, ctx.seeds.derive("truth"));
  const auto behavior_data = mbope::rollout(mdp.dynamics, mdp, pi_b,
                                            a.n_behavior_traj, horizon,
                                            ctx.seeds.derive("behavior"));
  auto model = mbope::fit_linear_gaussian_dynamics(behavior_data);
  if (a.corrupt > 0.0) {
    model.a *= 1.0 - a.corrupt;  // deliberate decay toward the origin
    model.finalize();
  }

  ratio::TrainConfig tc;
  tc.optimizer = ratio::Optimizer::adam;
  tc.learning_rate = 0.01;
  tc.epochs = 120;
  tc.batch_size = 512;
  tc.hidden_units = 64;
  tc.seed = ctx.seeds.derive("classifier");
  const auto clf = mbope::train_transition_classifier(behavior_data, model, tc);
  auto weight_fn = [&clf](const Vector& s, const Vector& act, const Vector& s2) {
    return clf.weight(s, act, s2);
  };

  const auto sweep = mbope::horizon_sweep(model, mdp, pi_e, weight_fn, a.n_traj,
                                          horizon, h_values,
                                          ctx.seeds.derive("rollout"),
                                          !a.no_self_normalize, v_mc.value);
  const auto st = mbope::stepwise_lfiw_value(model, mdp, pi_e, weight_fn,
                                             a.n_traj, horizon,
                                             ctx.seeds.derive("rollout"));

  io::CsvWriter csv("H,value,stderr,delta");
  json sweep_json = json::array();
  for (const auto& pt : sweep) {
    csv.row(pt.horizon_h, pt.value, pt.stderr_, pt.delta);
    sweep_json.push_back(
        {{"H", pt.horizon_h}, {"value", pt.value}, {"stderr", pt.stderr_}});
  }
  ctx.write("ope_sweep.csv", csv.str());
  json out{{"v_true", v_mc.value},
           {"v_true_stderr", v_mc.stderr_},
           {"stepwise_value", st.value},
           {"stepwise_stderr", st.stderr_},
           {"kind", "linear_gaussian"},
           {"sweep", sweep_json}};
  ctx.write("ope_summary.json", out.dump(2) + "\n");
}

void run_ope(RunContext& ctx, const OpeArgs& a) {
  const json env = json::parse(io::read_file(a.env));
  if (env.at("kind").get<std::string>() == "linear_gaussian") {
    run_ope_linear_gaussian(ctx, a, env);
    return;
  }
  const auto mdp = mbope::tabular_mdp_from_json(env);
  const auto pi_b =
      mbope::tabular_policy_from_json(json::parse(io::read_file(a.behavior)));
  const auto pi_e =
      mbope::tabular_policy_from_json(json::parse(io::read_file(a.evaluation)));
  const int horizon = a.horizon > 0 ? a.horizon : mdp.horizon;
  require(a.weights == "classifier" || a.weights == "oracle",
          "--weights must be classifier or oracle");

  std::vector<int> h_values;
  if (a.h_sweep.empty()) {
    h_values = {0, horizon};
  } else {
    std::size_t start = 0;
    while (start <= a.h_sweep.size()) {
      auto comma = a.h_sweep.find(',', start);
      if (comma == std::string::npos) comma = a.h_sweep.size();
      h_values.push_back(std::stoi(a.h_sweep.substr(start, comma - start)));
      start = comma + 1;
    }
  }

  const double v_true = mbope::ground_truth_value(mdp, pi_e);

  const auto behavior_data = mbope::rollout(mdp.dynamics, mdp, pi_b,
                                            a.n_behavior_traj, horizon,
                                            ctx.seeds.derive("behavior"));
  auto model = mbope::fit_tabular_dynamics(behavior_data, mdp.dynamics.n_states(),
                                           mdp.dynamics.n_actions());
  if (a.corrupt > 0.0) model = mbope::mix_with_uniform(model, a.corrupt);

  // averaged sweep over independently seeded classifiers
  std::vector<std::vector<mbope::SweepPoint>> sweeps;
  mbope::ValueEstimate stepwise_acc{0.0, 0.0};
  for (int k = 0; k < a.n_classifiers; ++k) {
    std::function<double(int, int, int)> weight_fn;
    if (a.weights == "oracle") {
      auto oracle = mbope::oracle_transition_weight(mdp.dynamics, model);
      weight_fn = oracle;
    } else {
      ratio::TrainConfig tc;
      tc.optimizer = ratio::Optimizer::adam;
      tc.learning_rate = 0.02;
      tc.epochs = 150;
      tc.batch_size = 1 << 30;
      tc.seed = ctx.seeds.derive("classifier", (std::uint64_t)k);
      const auto clf = mbope::train_transition_classifier(behavior_data, model, tc);
      const auto table = clf.weight_table();
      const int n_actions = mdp.dynamics.n_actions();
      weight_fn = [table, n_actions](int s, int act, int s2) {
        return table[(std::size_t)(s * n_actions + act)](0, s2);
      };
    }
    sweeps.push_back(mbope::horizon_sweep(model, mdp, pi_e, weight_fn, a.n_traj,
                                          horizon, h_values,
                                          ctx.seeds.derive("rollout"),
                                          !a.no_self_normalize, v_true));
    const auto st = mbope::stepwise_lfiw_value(model, mdp, pi_e, weight_fn,
                                               a.n_traj, horizon,
                                               ctx.seeds.derive("rollout"));
    stepwise_acc.value += st.value / a.n_classifiers;
    stepwise_acc.stderr_ += st.stderr_ / a.n_classifiers;
  }

  io::CsvWriter csv("H,value,stderr,delta");
  json sweep_json = json::array();
  for (std::size_t i = 0; i < h_values.size(); ++i) {
    double value = 0.0, se = 0.0;
    for (const auto& s : sweeps) {
      value += s[i].value / static_cast<double>(sweeps.size());
      se += s[i].stderr_ / static_cast<double>(sweeps.size());
    }
    csv.row(h_values[i], value, se, v_true - value);
    sweep_json.push_back({{"H", h_values[i]}, {"value", value}, {"stderr", se}});
  }
  ctx.write("ope_sweep.csv", csv.str());

  json out{{"v_true", v_true},
           {"stepwise_value", stepwise_acc.value},
           {"stepwise_stderr", stepwise_acc.stderr_},
           {"n_classifiers", a.n_classifiers},
           {"weights", a.weights},
           {"sweep", sweep_json}};
  ctx.write("ope_summary.json", out.dump(2) + "\n");
}

struct BiasVarianceArgs {
  int trials = 10;
  int t_batch = 5000;
  int n_model = 100;
  int n_clf = 1000;
};

void run_bias_variance(RunContext& ctx, const BiasVarianceArgs& a) {
  const auto mixture = synthetic::canonical_mixture();
  rng::Rng fit_rng(ctx.seeds.derive("model-fit"));
  std::vector<double> fit_sample((std::size_t)a.n_model);
  for (auto& x : fit_sample) x = mixture.sample(fit_rng);
  const auto model = synthetic::fit_moment_matched(fit_sample);

  rng::Rng data_rng(ctx.seeds.derive("data"));
  rng::Rng model_rng(ctx.seeds.derive("model"));
  Matrix pos(a.n_clf, 1), neg(a.n_clf, 1);
  for (int i = 0; i < a.n_clf; ++i) pos(i, 0) = mixture.sample(data_rng);
  for (int i = 0; i < a.n_clf; ++i) neg(i, 0) = model.sample(model_rng);
  auto tc = synthetic::Fig1Options::fig1_train_config();
  tc.batch_size = 2 * a.n_clf;
  tc.seed = ctx.seeds.derive("train");
  const auto clf = ratio::train_classifier(ratio::make_ratio_dataset(pos, neg),
                                           tc, ratio::Architecture::mlp);

  std::vector<estimators::WeightConfig> configs;
  std::vector<std::string> names;
  for (double al : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    configs.push_back({1.0, al, 0.0, false});
    names.push_back("flatten_alpha_" + io::format_double(al));
  }
  for (double be : {0.001, 0.01, 0.1, 1.0}) {
    configs.push_back({1.0, 1.0, be, false});
    names.push_back("clip_beta_" + io::format_double(be));
  }
  configs.push_back(estimators::WeightConfig::self_normalized());
  names.push_back("self_normalized");

  const std::vector<estimators::Statistic> stats{
      {"mean_x", [](const Vector& x) { return x(0); }},
      {"second_moment", [](const Vector& x) { return x(0) * x(0); }}};
  const std::vector<double> truth{mixture.mean(), mixture.second_moment()};

  const std::uint64_t trial_root = ctx.seeds.derive("trials");
  auto sampler = [&](int trial) {
    rng::Rng g(rng::derive_seed(trial_root, "trial", (std::uint64_t)trial));
    Matrix pts(a.t_batch, 1);
    for (int i = 0; i < a.t_batch; ++i) pts(i, 0) = model.sample(g);
    return estimators::WeightedBatch(pts, ratio::importance_weights(clf, 1.0, pts),
                                     estimators::WeightConfig{});
  };
  const auto reports = estimators::bias_variance_decompose(configs, stats, truth,
                                                           sampler, a.trials);

  io::CsvWriter csv("config,statistic,bias,variance,mse");
  json records = json::array();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    for (const auto& rec : reports[i].records) {
      csv.row(names[i], rec.statistic_id, rec.bias, rec.variance, rec.mse);
      records.push_back({{"config", names[i]},
                         {"statistic", rec.statistic_id},
                         {"bias", rec.bias},
                         {"variance", rec.variance},
                         {"mse", rec.mse}});
    }
  }
  ctx.write("bias_variance.csv", csv.str());
  json out{{"n_trials", a.trials}, {"t_batch", a.t_batch}, {"records", records}};
  ctx.write("bias_variance.json", out.dump(2) + "\n");
}

void run_make_bench(RunContext& ctx, int horizon) {
  const auto bench = mbope::make_chain_benchmark(horizon);
  ctx.write("env.json", mbope::tabular_mdp_to_json(bench.mdp).dump(2) + "\n");
  ctx.write("behavior.json",
            mbope::tabular_policy_to_json(bench.behavior).dump(2) + "\n");
  ctx.write("eval.json",
            mbope::tabular_policy_to_json(bench.evaluation).dump(2) + "\n");
}

// --- config file handling ------------------------------------------------------

/// Reads a flat JSON object of long-option values and splices it in front of
/// the user's arguments, so explicitly passed flags win.
std::vector<std::string> splice_config(const std::string& sub_name,
                                       const std::string& config_path,
                                       std::vector<std::string> tail) {
  const json cfg = json::parse(io::read_file(config_path));
  if (!cfg.is_object())
    throw std::invalid_argument("config file must hold a JSON object");
  std::vector<std::string> args;
  for (const auto& [key, value] : cfg.items()) {
    if (key == "command") {
      if (value.get<std::string>() != sub_name)
        throw std::invalid_argument("config command '" +
                                    value.get<std::string>() +
                                    "' does not match subcommand '" + sub_name + "'");
      continue;
    }
    args.push_back("--" + key);
    if (value.is_string())
      args.push_back(value.get<std::string>());
    else
      args.push_back(value.dump());
  }
  args.insert(args.end(), tail.begin(), tail.end());
  return args;
}

json snapshot_options(const CLI::App& sub) {
  json snap;
  for (const auto* opt : sub.get_options()) {
    if (opt->get_name().empty() || opt->get_name() == "--help") continue;
    if (!opt->results().empty()) {
      const auto& rs = opt->results();
      snap[opt->get_name().substr(2)] = rs.size() == 1 ? json(rs.front()) : json(rs);
    }
  }
  return snap;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"likelihood-free importance weighting toolkit"};
  app.require_subcommand(0, 1);

  std::string out_dir = std::getenv("LFIW_OUT_DIR") ? std::getenv("LFIW_OUT_DIR") : ".";
  std::size_t threads = 0;
  std::uint64_t seed = 0;
  std::string config_path;

  // shared options registered on every subcommand
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out-dir", out_dir, "output directory");
    sub->add_option("--threads", threads, "worker thread cap (0 = all cores)");
    sub->add_option("--seed", seed, "root seed");
    sub->add_option("--config", config_path, "JSON config file (flags override)");
    for (auto* opt : sub->get_options())
      opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  };

  TrainRatioArgs tr;
  auto* sub_tr = app.add_subcommand("train-ratio",
                                    "train the density-ratio classifier");
  sub_tr->add_option("--positives", tr.positives)->required();
  sub_tr->add_option("--negatives", tr.negatives)->required();
  sub_tr->add_option("--arch", tr.arch);
  sub_tr->add_option("--hidden", tr.train.hidden_units);
  sub_tr->add_option("--lr", tr.train.learning_rate);
  sub_tr->add_option("--epochs", tr.train.epochs);
  sub_tr->add_option("--batch", tr.train.batch_size);
  sub_tr->add_option("--l2", tr.train.l2_penalty);
  sub_tr->add_option("--momentum", tr.train.momentum);
  sub_tr->add_option("--optimizer", tr.optimizer);
  sub_tr->add_option("--eval-positives", tr.eval_positives);
  sub_tr->add_option("--eval-negatives", tr.eval_negatives);
  sub_tr->add_option("--bins", tr.bins);
  add_common(sub_tr);

  EstimateArgs es;
  auto* sub_es = app.add_subcommand("estimate", "weighted expectation estimate");
  sub_es->add_option("--classifier", es.classifier)->required();
  sub_es->add_option("--samples", es.samples)->required();
  sub_es->add_option("--statistic", es.statistic);
  sub_es->add_option("--coord", es.coord);
  sub_es->add_option("--gamma", es.gamma);
  sub_es->add_option("--alpha", es.alpha);
  sub_es->add_option("--beta", es.beta);
  sub_es->add_option("--self-normalize", es.self_normalize);
  sub_es->add_option("--weight-warn-threshold", es.weight_warn_threshold);
  add_common(sub_es);

  ResampleArgs rs;
  auto* sub_rs = app.add_subcommand("resample", "SIR sampling and KL diagnostics");
  sub_rs->add_option("--pair", rs.pair)->required();
  sub_rs->add_option("--weights", rs.weights);
  sub_rs->add_option("--particles", rs.particles);
  sub_rs->add_option("--draws", rs.draws);
  add_common(sub_rs);

  MetricsArgs me;
  auto* sub_me = app.add_subcommand("metrics", "feature-space sample metrics");
  sub_me->add_option("--model", me.model)->required();
  sub_me->add_option("--real", me.real)->required();
  sub_me->add_option("--weights", me.weights);
  sub_me->add_option("--bandwidth", me.bandwidth);
  sub_me->add_option("--gamma", me.gamma);
  sub_me->add_option("--alpha", me.alpha);
  sub_me->add_option("--beta", me.beta);
  sub_me->add_option("--self-normalize", me.self_normalize);
  add_common(sub_me);

  Fig1Args f1;
  auto* sub_f1 = app.add_subcommand("fig1", "toy mixture study with bootstrap bands");
  sub_f1->add_option("--n", f1.n);
  sub_f1->add_option("--bootstrap-n", f1.bootstrap_n);
  sub_f1->add_option("--confidence", f1.confidence);
  sub_f1->add_option("--no-bootstrap", f1.no_bootstrap);
  add_common(sub_f1);

  AugmentArgs au;
  auto* sub_au = app.add_subcommand("augment", "weighted data augmentation demo");
  sub_au->add_option("--m", au.m);
  sub_au->add_option("--weights", au.weights);
  sub_au->add_option("--n-real", au.n_real);
  sub_au->add_option("--n-gen", au.n_gen);
  sub_au->add_option("--n-test", au.n_test);
  sub_au->add_option("--flip", au.flip);
  add_common(sub_au);

  OpeArgs op;
  auto* sub_op = app.add_subcommand("ope", "model-based off-policy evaluation");
  sub_op->add_option("--env", op.env)->required();
  sub_op->add_option("--behavior", op.behavior)->required();
  sub_op->add_option("--eval", op.evaluation)->required();
  sub_op->add_option("--n-traj", op.n_traj);
  sub_op->add_option("--horizon", op.horizon);
  sub_op->add_option("--H-sweep", op.h_sweep);
  sub_op->add_option("--n-behavior-traj", op.n_behavior_traj);
  sub_op->add_option("--n-classifiers", op.n_classifiers);
  sub_op->add_option("--corrupt", op.corrupt);
  sub_op->add_option("--weights", op.weights);
  sub_op->add_option("--no-self-normalize", op.no_self_normalize);
  add_common(sub_op);

  BiasVarianceArgs bv;
  auto* sub_bv = app.add_subcommand("bias-variance",
                                    "estimator-family bias/variance harness");
  sub_bv->add_option("--trials", bv.trials);
  sub_bv->add_option("--t-batch", bv.t_batch);
  sub_bv->add_option("--n-model", bv.n_model);
  sub_bv->add_option("--n-clf", bv.n_clf);
  add_common(sub_bv);

  int bench_horizon = 20;
  auto* sub_mb = app.add_subcommand("make-bench", "emit the bundled 4-state chain");
  sub_mb->add_option("--horizon", bench_horizon);
  add_common(sub_mb);

  std::string manifest_path;
  auto* sub_vf = app.add_subcommand("verify", "recompute manifest digests");
  sub_vf->add_option("manifest", manifest_path, "path to manifest.json")->required();

  // two-phase parse: find the subcommand and --config, then splice config
  // values in front of the remaining flags
  std::vector<std::string> raw(argv + 1, argv + argc);
  try {
    std::string sub_name;
    std::string cfg_path;
    std::vector<std::string> tail;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (sub_name.empty() && !raw[i].starts_with("-")) {
        sub_name = raw[i];
        continue;
      }
      if (raw[i] == "--config" && i + 1 < raw.size()) {
        cfg_path = raw[i + 1];
        ++i;
        continue;
      }
      if (raw[i].starts_with("--config=")) {
        cfg_path = raw[i].substr(9);
        continue;
      }
      tail.push_back(raw[i]);
    }
    std::vector<std::string> args;
    if (!cfg_path.empty()) {
      args = splice_config(sub_name, cfg_path, std::move(tail));
    } else {
      args = std::move(tail);
    }
    args.insert(args.begin(), sub_name);
    if (sub_name.empty()) args.clear();

    // CLI11 consumes arguments in reverse order
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: validation: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: io: %s\n", e.what());
    return kExitIo;
  }

  parallel::thread_cap() = threads;

  try {
    if (sub_vf->parsed()) {
      switch (io::verify_manifest(manifest_path)) {
        case io::VerifyStatus::ok:
          std::printf("verify: ok\n");
          return 0;
        case io::VerifyStatus::mismatch:
          std::fprintf(stderr, "error: verify: digest mismatch\n");
          return 1;
        case io::VerifyStatus::missing:
          std::fprintf(stderr, "error: verify: missing artifact or manifest\n");
          return kExitIo;
      }
    }

    RunContext ctx;
    ctx.out_dir = out_dir;
    ctx.seeds.root = seed;

    CLI::App* active = nullptr;
    std::string name;
    for (auto* sub : app.get_subcommands()) {
      active = sub;
      name = sub->get_name();
    }
    if (active == nullptr) {
      std::fprintf(stderr, "error: validation: no subcommand given\n");
      return kExitValidation;
    }
    ctx.effective_config = snapshot_options(*active);
    ctx.effective_config["command"] = name;

    if (name == "train-ratio") run_train_ratio(ctx, tr);
    else if (name == "estimate") run_estimate(ctx, es);
    else if (name == "resample") run_resample(ctx, rs);
    else if (name == "metrics") run_metrics(ctx, me);
    else if (name == "fig1") run_fig1(ctx, f1);
    else if (name == "augment") run_augment(ctx, au);
    else if (name == "ope") run_ope(ctx, op);
    else if (name == "bias-variance") run_bias_variance(ctx, bv);
    else if (name == "make-bench") run_make_bench(ctx, bench_horizon);
    ctx.finish(name);
    return 0;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: validation: %s\n", e.what());
    return kExitValidation;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "error: numeric: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    if (what.find("cannot open") != std::string::npos ||
        what.find("file") != std::string::npos) {
      std::fprintf(stderr, "error: io: %s\n", what.c_str());
      return kExitIo;
    }
    std::fprintf(stderr, "error: numeric: %s\n", what.c_str());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return kExitNumeric;
  }
}
