#include <catch2/catch_amalgamated.hpp>

#include <lfiw/classifier.hpp>
#include <lfiw/discrete.hpp>

using namespace lfiw;

namespace {
Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}
}  // namespace

TEST_CASE("pair construction validates densities") {
  REQUIRE_NOTHROW(DiscreteDistributionPair(vec2(0.5, 0.5), vec2(0.25, 0.75)));
  REQUIRE_THROWS_AS(DiscreteDistributionPair(vec2(0.5, 0.6), vec2(0.25, 0.75)),
                    std::invalid_argument);
  // absolute continuity violation: p > 0 where p_theta = 0
  REQUIRE_THROWS_AS(DiscreteDistributionPair(vec2(0.5, 0.5), vec2(1.0, 0.0)),
                    std::invalid_argument);
  REQUIRE_NOTHROW(DiscreteDistributionPair(vec2(0.5, 0.5), vec2(1.0, 0.0), false));
}

TEST_CASE("bayes optimal classifier on a two-symbol pair") {
  const DiscreteDistributionPair pair(vec2(0.75, 0.25), vec2(0.25, 0.75));

  SECTION("c*(a) at gamma=1 and the implied weight") {
    const Vector c = pair.bayes_optimal_probs(1.0);
    REQUIRE(c(0) == Catch::Approx(0.75).margin(1e-15));
    const double w = ratio::weight_from_prob(c(0), 1.0);
    REQUIRE(w == Catch::Approx(3.0).margin(1e-12));
  }

  SECTION("gamma cancels in the implied weight") {
    const Vector c = pair.bayes_optimal_probs(3.0);
    REQUIRE(c(0) == Catch::Approx(0.5).margin(1e-15));
    REQUIRE(ratio::weight_from_prob(c(0), 3.0) == Catch::Approx(3.0).margin(1e-12));
  }

  SECTION("identical densities give c* = 1/2") {
    const DiscreteDistributionPair same(vec2(0.5, 0.5), vec2(0.5, 0.5));
    const Vector c = same.bayes_optimal_probs(1.0);
    REQUIRE(c(0) == 0.5);
    REQUIRE(c(1) == 0.5);
  }
}

TEST_CASE("oracle identity over random pairs") {
  rng::Rng g(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto k = static_cast<Eigen::Index>(2 + g.integer(7));  // K <= 8
    const Vector p = random_simplex(k, g);
    const Vector q = random_simplex(k, g);
    const DiscreteDistributionPair pair(p, q);
    const double gamma = std::exp(g.uniform(-1.0, 1.0));
    const Vector c = pair.bayes_optimal_probs(gamma);
    const Vector w = pair.oracle_weights();
    for (Eigen::Index i = 0; i < k; ++i) {
      const double implied = gamma * c(i) / (1.0 - c(i));
      REQUIRE(implied == Catch::Approx(w(i)).epsilon(1e-12));
      REQUIRE(implied == Catch::Approx(p(i) / q(i)).epsilon(1e-12));
    }
  }
}

TEST_CASE("oracle weights error on support violations") {
  const DiscreteDistributionPair pair(vec2(0.5, 0.5), vec2(1.0, 0.0), false);
  REQUIRE_THROWS_AS(pair.oracle_weights(), std::domain_error);
}

TEST_CASE("total variation basics") {
  REQUIRE(total_variation(vec2(1.0, 0.0), vec2(0.0, 1.0)) == 1.0);
  REQUIRE(total_variation(vec2(0.5, 0.5), vec2(0.5, 0.5)) == 0.0);
}

TEST_CASE("random simplex generator produces valid densities") {
  rng::Rng g(9);
  for (int i = 0; i < 50; ++i) {
    const Vector v = random_simplex(5, g);
    REQUIRE(v.minCoeff() > 0.0);
    REQUIRE(v.sum() == Catch::Approx(1.0).margin(1e-12));
  }
  const Vector w = random_log_uniform_weights(100, g);
  REQUIRE(w.minCoeff() >= std::exp(-2.0));
  REQUIRE(w.maxCoeff() <= std::exp(2.0));
}
