#include <catch2/catch_amalgamated.hpp>

#include <lfiw/classifier.hpp>
#include <lfiw/synthetic.hpp>

using namespace lfiw;
using ratio::Architecture;
using ratio::ProbClassifier;

namespace {

Matrix column(std::initializer_list<double> xs) {
  Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return m;
}

Vector vec1(double x) {
  Vector v(1);
  v << x;
  return v;
}

ratio::LabeledRatioDataset gaussian_blobs(int n, double sep, std::uint64_t seed,
                                          int dim = 1) {
  rng::Rng g(seed);
  Matrix pos(n, dim), neg(n, dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) {
      pos(i, j) = g.normal(j == 0 ? sep : 0.0, 1.0);
      neg(i, j) = g.normal(j == 0 ? -sep : 0.0, 1.0);
    }
  return ratio::make_ratio_dataset(std::move(pos), std::move(neg));
}

}  // namespace

TEST_CASE("logistic predictions match closed forms") {
  const auto clf = ProbClassifier::logistic(vec1(1.0), 0.0);
  REQUIRE(clf.predict_proba(vec1(0.0)) == Catch::Approx(0.5).margin(1e-15));
  REQUIRE(clf.predict_proba(vec1(std::log(3.0))) ==
          Catch::Approx(0.75).margin(1e-12));
  const auto zero = ProbClassifier::logistic(Vector::Zero(3), 0.0);
  Vector x(3);
  x << 4.0, -2.0, 7.0;
  REQUIRE(zero.predict_proba(x) == 0.5);
}

TEST_CASE("predictions are clamped inside (0,1)") {
  const auto clf = ProbClassifier::logistic(vec1(100.0), 0.0);
  REQUIRE(clf.predict_proba(vec1(50.0)) == 1.0 - kProbClamp);
  REQUIRE(clf.predict_proba(vec1(-50.0)) == kProbClamp);
  // implied weights stay finite
  REQUIRE(std::isfinite(ratio::importance_weight(clf, 1.0, vec1(50.0))));
}

TEST_CASE("importance weight closed forms") {
  REQUIRE(ratio::weight_from_prob(0.5, 1.0) == Catch::Approx(1.0).margin(1e-15));
  REQUIRE(ratio::weight_from_prob(0.8, 1.0) == Catch::Approx(4.0).margin(1e-12));
  REQUIRE(ratio::weight_from_prob(0.9, 2.0) == Catch::Approx(18.0).margin(1e-12));
}

TEST_CASE("importance weight is monotone in c and gamma") {
  double prev = 0.0;
  for (double c = 0.05; c < 1.0; c += 0.05) {
    const double w = ratio::weight_from_prob(c, 1.0);
    REQUIRE(w > prev);
    prev = w;
  }
  REQUIRE(ratio::weight_from_prob(0.7, 2.0) > ratio::weight_from_prob(0.7, 1.0));
}

TEST_CASE("dimension mismatches are rejected") {
  const auto clf = ProbClassifier::logistic(vec1(1.0), 0.0);
  Vector x(2);
  x << 1.0, 2.0;
  REQUIRE_THROWS_AS(clf.predict_proba(x), std::invalid_argument);
  ratio::LabeledRatioDataset bad;
  bad.positives = Matrix::Ones(3, 2);
  bad.negatives = Matrix::Ones(3, 1);
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("identical classes converge to the 1/2 predictor") {
  rng::Rng g(11);
  Matrix pts(60, 1);
  for (int i = 0; i < 60; ++i) pts(i, 0) = g.normal();
  ratio::LabeledRatioDataset data;
  data.positives = pts;
  data.negatives = pts;
  data.gamma = 1.0;
  ratio::TrainConfig tc;
  tc.epochs = 400;
  tc.seed = 3;
  const auto clf = ratio::train_classifier(data, tc, Architecture::logistic);
  const Vector c = clf.predict(pts);
  REQUIRE((c.array() - 0.5).abs().maxCoeff() <= 0.05);
  REQUIRE(ratio::binary_cross_entropy(clf, data) >= std::log(2.0) - 1e-6);
}

TEST_CASE("linearly separable classes are driven to the extremes") {
  ratio::LabeledRatioDataset data;
  data.positives = Matrix::Constant(20, 1, 10.0);
  data.negatives = Matrix::Constant(20, 1, -10.0);
  data.gamma = 1.0;
  ratio::TrainConfig tc;
  tc.epochs = 300;
  tc.learning_rate = 0.1;
  tc.seed = 5;
  const auto clf = ratio::train_classifier(data, tc, Architecture::logistic);
  REQUIRE(clf.predict(data.positives).minCoeff() > 0.99);
  REQUIRE(clf.predict(data.negatives).maxCoeff() < 0.01);
}

TEST_CASE("training is deterministic given dataset and config") {
  const auto data = gaussian_blobs(100, 1.0, 42, 2);
  ratio::TrainConfig tc;
  tc.epochs = 40;
  tc.seed = 9;
  const auto a = ratio::train_classifier(data, tc, Architecture::mlp);
  const auto b = ratio::train_classifier(data, tc, Architecture::mlp);
  const Vector wa = a.flat_weights();
  const Vector wb = b.flat_weights();
  REQUIRE(wa.size() == wb.size());
  for (Eigen::Index i = 0; i < wa.size(); ++i) REQUIRE(wa(i) == wb(i));

  ratio::TrainConfig other = tc;
  other.seed = 10;
  const auto c = ratio::train_classifier(data, other, Architecture::mlp);
  REQUIRE(c.flat_weights() != wa);
}

TEST_CASE("divergent learning rate reports a non-finite loss") {
  const auto data = gaussian_blobs(50, 1.0, 1);
  ratio::TrainConfig tc;
  // the ridge term makes the update multiplicative with factor 1 - lr*l2,
  // so this configuration blows up exponentially
  tc.learning_rate = 10.0;
  tc.l2_penalty = 10.0;
  tc.epochs = 200;
  REQUIRE_THROWS_AS(ratio::train_classifier(data, tc, Architecture::mlp),
                    std::runtime_error);
}

TEST_CASE("trained mlp approaches the analytic optimum on the toy setup") {
  synthetic::Fig1Options opts;
  opts.with_bootstrap = false;
  const auto res = synthetic::run_fig1_experiment(1000, 7, opts);
  REQUIRE(res.gamma == 1.0);
  REQUIRE(res.mean_abs_gap <= 0.05);
}

TEST_CASE("classifier serialization round-trips") {
  const auto data = gaussian_blobs(80, 1.5, 21, 3);
  ratio::TrainConfig tc;
  tc.epochs = 30;
  tc.hidden_units = 7;
  tc.seed = 2;
  for (auto arch : {Architecture::logistic, Architecture::mlp}) {
    const auto clf = ratio::train_classifier(data, tc, arch);
    const auto restored = ratio::classifier_from_json(ratio::classifier_to_json(clf));
    REQUIRE(restored.architecture() == clf.architecture());
    REQUIRE(restored.input_dim() == clf.input_dim());
    Vector probe(3);
    probe << 0.3, -1.2, 0.8;
    REQUIRE(restored.predict_proba(probe) == clf.predict_proba(probe));
  }
}

TEST_CASE("bayes_optimal_classifier matches the density ratio") {
  const auto mix = synthetic::canonical_mixture();
  const synthetic::MomentMatchedGaussian model{0.0, std::sqrt(1.25)};
  auto c_star = ratio::bayes_optimal_classifier(
      [&](double x) { return mix.pdf(x); }, [&](double x) { return model.pdf(x); },
      2.0);
  for (double x : {-3.0, -1.0, 0.0, 0.5, 2.0}) {
    const double c = c_star(x);
    const double implied = 2.0 * c / (1.0 - c);
    REQUIRE(implied == Catch::Approx(mix.pdf(x) / model.pdf(x)).epsilon(1e-12));
  }
  auto broken = ratio::bayes_optimal_classifier(
      [](double) { return 0.5; }, [](double) { return 0.0; }, 1.0);
  REQUIRE_THROWS_AS(broken(0.0), std::domain_error);
}

// --- calibration ------------------------------------------------------------

TEST_CASE("constant base-rate predictor has zero ece") {
  const auto clf = ProbClassifier::logistic(Vector::Zero(1), 0.0);
  ratio::LabeledRatioDataset eval;
  eval.positives = column({1.0, 2.0, 3.0});
  eval.negatives = column({-1.0, -2.0, -3.0});
  eval.gamma = 1.0;
  const auto rep = ratio::calibration_report(clf, eval, 10);
  int occupied = 0;
  for (auto c : rep.counts) occupied += c > 0;
  REQUIRE(occupied == 1);
  REQUIRE(rep.ece == Catch::Approx(0.0).margin(1e-12));
  std::int64_t total = 0;
  for (auto c : rep.counts) total += c;
  REQUIRE(total == 6);
}

TEST_CASE("overconfident predictor on a balanced set has ece near 1/2") {
  const auto clf = ProbClassifier::logistic(Vector::Zero(1), 1e9);
  ratio::LabeledRatioDataset eval;
  eval.positives = column({1.0, 2.0});
  eval.negatives = column({-1.0, -2.0});
  eval.gamma = 1.0;
  const auto rep = ratio::calibration_report(clf, eval, 10);
  REQUIRE(rep.ece == Catch::Approx(0.5).margin(1e-6));
}

TEST_CASE("well-specified logistic task is calibrated") {
  // positives ~ N(+mu, I), negatives ~ N(-mu, I): the Bayes classifier is an
  // affine-sigmoid, so a trained logistic model should come out calibrated.
  const auto train_set = gaussian_blobs(1000, 0.5, 100, 2);
  const auto eval_set = gaussian_blobs(1000, 0.5, 101, 2);
  ratio::TrainConfig tc;
  tc.epochs = 200;
  tc.learning_rate = 0.1;
  tc.seed = 17;
  const auto clf = ratio::train_classifier(train_set, tc, Architecture::logistic);
  const auto rep = ratio::calibration_report(clf, eval_set, 10);
  REQUIRE(rep.ece <= 0.05);
  for (Eigen::Index b = 0; b < rep.frac_positive.size(); ++b) {
    REQUIRE(rep.frac_positive(b) >= 0.0);
    REQUIRE(rep.frac_positive(b) <= 1.0);
  }
  // csv has a header, ten bin rows and the ece footer
  const auto csv = rep.to_csv();
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 12);
  REQUIRE(csv.find("# ece=") != std::string::npos);
}

TEST_CASE("calibration report validates inputs") {
  const auto clf = ProbClassifier::logistic(vec1(1.0), 0.0);
  ratio::LabeledRatioDataset eval;
  eval.positives = column({1.0});
  eval.negatives = column({-1.0});
  eval.gamma = 1.0;
  REQUIRE_THROWS_AS(ratio::calibration_report(clf, eval, 1), std::invalid_argument);
  ratio::LabeledRatioDataset empty;
  empty.gamma = 1.0;
  REQUIRE_THROWS_AS(ratio::calibration_report(clf, empty, 10),
                    std::invalid_argument);
}
