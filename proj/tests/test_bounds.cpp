#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "saferec/bounds.hpp"
#include "saferec/error.hpp"
#include "saferec/rng.hpp"
#include "saferec/simenv.hpp"
#include "saferec/stats.hpp"

using namespace saferec;

// Reference quantiles, cross-checked against a high-precision quadrature of
// the respective CDFs before these tests were frozen.
namespace {
constexpr double kT95Nu99 = 1.6603911559963895;
constexpr double kT95Nu9 = 1.8331129326536335;
constexpr double kT95Nu1 = 6.313751514675041;
constexpr double kT99Nu5 = 3.3649299989072747;
constexpr double kT95Nu1999 = 1.645616248187262;
constexpr double kT75Nu3 = 0.7648923284043453;
constexpr double kZ95 = 1.6448536269514722;
constexpr double kZ975 = 1.959963984540054;
}  // namespace

TEST_CASE("normal quantile matches reference values") {
  CHECK(normal_quantile(0.95) == doctest::Approx(kZ95).epsilon(1e-11));
  CHECK(normal_quantile(0.975) == doctest::Approx(kZ975).epsilon(1e-11));
  CHECK(normal_quantile(0.05) == doctest::Approx(-kZ95).epsilon(1e-11));
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  for (double p : {0.001, 0.1, 0.3, 0.77, 0.999}) {
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-11));
  }
}

TEST_CASE("student t quantile matches reference values") {
  CHECK(student_t_quantile(0.95, 99) == doctest::Approx(kT95Nu99).epsilon(1e-9));
  CHECK(student_t_quantile(0.95, 9) == doctest::Approx(kT95Nu9).epsilon(1e-9));
  CHECK(student_t_quantile(0.95, 1) == doctest::Approx(kT95Nu1).epsilon(1e-9));
  CHECK(student_t_quantile(0.99, 5) == doctest::Approx(kT99Nu5).epsilon(1e-9));
  CHECK(student_t_quantile(0.95, 1999) == doctest::Approx(kT95Nu1999).epsilon(1e-9));
  CHECK(student_t_quantile(0.75, 3) == doctest::Approx(kT75Nu3).epsilon(1e-9));
  for (double p : {0.6, 0.9, 0.99}) {
    for (double nu : {2.0, 17.0, 250.0}) {
      CHECK(student_t_cdf(student_t_quantile(p, nu), nu) == doctest::Approx(p).epsilon(1e-10));
    }
  }
}

TEST_CASE("t-test bound equals the constant on zero-variance data") {
  const std::vector<double> xs(25, 3.5);
  const BoundResult result = lower_bound_ttest(xs, 0.05);
  CHECK(result.lower_bound == doctest::Approx(3.5).epsilon(1e-14));
}

TEST_CASE("t-test bound on the 0/1 benchmark sample") {
  std::vector<double> xs;
  for (int i = 0; i < 50; ++i) {
    xs.push_back(0.0);
    xs.push_back(1.0);
  }
  const BoundResult result = lower_bound_ttest(xs, 0.05);
  const double sigma = std::sqrt(25.0 / 99.0);  // 0.502519...
  CHECK(result.sample_std == doctest::Approx(sigma).epsilon(1e-12));
  CHECK(result.lower_bound ==
        doctest::Approx(0.5 - sigma / 10.0 * kT95Nu99).epsilon(1e-10));
}

TEST_CASE("t-test bound translation and scale equivariance") {
  Rng rng(21);
  std::vector<double> xs(60);
  for (double& x : xs) x = rng.gamma(2.0, 50.0);
  const double base = lower_bound_ttest(xs, 0.1).lower_bound;

  std::vector<double> shifted = xs;
  for (double& x : shifted) x += 7.5;
  CHECK(lower_bound_ttest(shifted, 0.1).lower_bound == doctest::Approx(base + 7.5));

  std::vector<double> scaled = xs;
  for (double& x : scaled) x *= 3.0;
  CHECK(lower_bound_ttest(scaled, 0.1).lower_bound == doctest::Approx(3.0 * base));
}

TEST_CASE("bounds reject invalid inputs") {
  CHECK_THROWS_AS(static_cast<void>(lower_bound_ttest({1.0}, 0.05)), Error);
  CHECK_THROWS_AS(static_cast<void>(lower_bound_ttest({1.0, 2.0}, 0.6)), Error);
  CHECK_THROWS_AS(static_cast<void>(lower_bound_ttest({1.0, 2.0}, 0.0)), Error);
  CHECK_THROWS_AS(static_cast<void>(lower_bound_ci({1.0}, 0.05)), Error);
  CHECK_THROWS_AS(static_cast<void>(lower_bound_bca({1.0, 2.0}, 0.05, 2000, 1)), Error);
  CHECK_THROWS_AS(static_cast<void>(lower_bound_bca({1.0, 2.0, 3.0}, 0.05, 10, 1)), Error);
  CHECK_THROWS_AS(static_cast<void>(lower_bound_ttest({-1.0, 2.0}, 0.05)), Error);
}

TEST_CASE("ci bound reduces to the clip-penalty formula on constant data") {
  const std::size_t n = 2000;
  const double value = 40.0;
  const double clip = 100.0;
  const std::vector<double> xs(n, value);
  const BoundResult result = lower_bound_ci(xs, 0.05, std::nullopt, clip);
  const double expected = value - 7.0 * clip * std::log(40.0) / (3.0 * 1999.0);
  CHECK(result.lower_bound == doctest::Approx(expected).epsilon(1e-12));
  CHECK(*result.truncation_threshold == clip);
}

TEST_CASE("ci bound flags the small-sample fallback") {
  Rng rng(5);
  std::vector<double> xs(30);
  for (double& x : xs) x = rng.gamma(2.0, 50.0);
  const BoundResult result = lower_bound_ci(xs, 0.05);
  CHECK(result.conservative_fallback);
  CHECK(*result.truncation_threshold == *std::max_element(xs.begin(), xs.end()));
}

TEST_CASE("ci bound is below the t-test bound on heavy-tailed data") {
  // The distribution-free bound pays for validity with conservatism.
  Rng rng(77);
  int ci_not_higher = 0;
  const int trials = 1000;
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<double> xs(100);
    for (double& x : xs) x = rng.gamma(2.0, 50.0);
    const double ci = lower_bound_ci(xs, 0.05).lower_bound;
    const double tt = lower_bound_ttest(xs, 0.05).lower_bound;
    if (ci <= tt) ++ci_not_higher;
  }
  CHECK(ci_not_higher >= static_cast<int>(0.95 * trials));
}

TEST_CASE("bca bound equals the constant on degenerate data") {
  const std::vector<double> xs(20, 2.25);
  const BoundResult result = lower_bound_bca(xs, 0.05, 1000, 42);
  CHECK(result.degenerate);
  CHECK(result.lower_bound == 2.25);
}

TEST_CASE("bca is a pure function of data, delta, B, and seed") {
  Rng rng(3);
  std::vector<double> xs(80);
  for (double& x : xs) x = rng.gamma(2.0, 50.0);
  const BoundResult a = lower_bound_bca(xs, 0.05, 2000, 123);
  const BoundResult b = lower_bound_bca(xs, 0.05, 2000, 123);
  CHECK(a.lower_bound == b.lower_bound);
  const BoundResult c = lower_bound_bca(xs, 0.05, 2000, 124);
  CHECK(a.lower_bound != c.lower_bound);
}

TEST_CASE("lower bounds sit below the sample mean for delta <= 0.5") {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> xs(50 + 10 * trial % 150);
    for (double& x : xs) x = rng.gamma(2.0, 50.0);
    const double m = mean(xs);
    for (double delta : {0.02, 0.2, 0.5}) {
      CHECK(lower_bound_ttest(xs, delta).lower_bound <= m + 1e-9);
      CHECK(lower_bound_ci(xs, delta).lower_bound <= m + 1e-9);
      CHECK(lower_bound_bca(xs, delta, 1000, trial).lower_bound <=
            *std::max_element(xs.begin(), xs.end()));
    }
  }
}

TEST_CASE("larger predicted sample sizes give less conservative bounds") {
  Rng rng(15);
  std::vector<double> xs(100);
  for (double& x : xs) x = rng.gamma(2.0, 50.0);
  const std::size_t n = xs.size();
  CHECK(lower_bound_ttest(xs, 0.05, 10 * n).lower_bound >
        lower_bound_ttest(xs, 0.05, n).lower_bound);
  CHECK(lower_bound_ci(xs, 0.05, 10 * n).lower_bound >
        lower_bound_ci(xs, 0.05).lower_bound);
  CHECK(lower_bound_bca(xs, 0.05, 2000, 9, 10 * n).lower_bound >
        lower_bound_bca(xs, 0.05, 2000, 9, n).lower_bound);
}

TEST_CASE("error-rate experiment is exact on a point mass and sane on gamma") {
  DistSpec point;
  point.kind = DistSpec::Kind::PointMass;
  point.value = 4.0;
  const auto rows = error_rate_experiment(point, {20, 100}, 1000, 0.05, 3, 1000);
  for (const ErrorRateRow& row : rows) {
    CHECK(row.ci_rate == 0.0);
    CHECK(row.tt_rate == 0.0);
    CHECK(row.bca_rate == 0.0);
  }

  DistSpec gamma;  // defaults: shape 2, scale 50, true mean 100
  CHECK(gamma.true_mean() == 100.0);
  const auto gamma_rows = error_rate_experiment(gamma, {2000}, 1000, 0.05, 7, 1000);
  const double sigma3 = 3.0 * std::sqrt(0.05 * 0.95 / 1000.0);
  CHECK(gamma_rows[0].tt_rate <= 0.05 + sigma3);
  CHECK(gamma_rows[0].ci_rate == 0.0);
}

TEST_CASE("bound_policy ties the pipeline together") {
  const SimEnv env = chain_env();
  const Policy behavior = Policy::uniform(2);
  const Dataset data = simulate(env, behavior, 400, 19);

  // Matching policy, gamma = 0, all first-step rewards become the samples.
  Dataset deterministic;
  for (int i = 0; i < 50; ++i) {
    Trajectory traj;
    Step step;
    step.state = State(0, {0.0});
    step.action = 0;
    step.reward = 1.0;
    step.behavior_prob = 1.0;
    traj.steps.push_back(step);
    deterministic.trajectories.push_back(traj);
  }
  const Policy always = Policy::tabular({{0, {1.0, 0.0}}});
  const BoundResult unit = bound_policy(deterministic, always, 0.05, BoundMethod::TT,
                                        Estimator::PerStepIs, DiscountSpec{0.0});
  CHECK(unit.lower_bound == doctest::Approx(1.0).epsilon(1e-12));

  // Chain calibration: the TT bound undershoots the DP truth almost always.
  const Policy pi_e = Policy::uniform(2);
  const double truth = exact_value(env, pi_e, DiscountSpec{1.0});
  int covered = 0;
  const int replications = 1000;
  for (int rep = 0; rep < replications; ++rep) {
    const Dataset sample = simulate(env, behavior, 100, 5000 + rep);
    const BoundResult bound =
        bound_policy(sample, pi_e, 0.05, BoundMethod::TT, Estimator::PerStepIs);
    if (bound.lower_bound <= truth) ++covered;
  }
  CHECK(covered >= static_cast<int>(0.94 * replications));
}

TEST_CASE("bound result serializes its diagnostics") {
  Rng rng(2);
  std::vector<double> xs(50);
  for (double& x : xs) x = rng.gamma(2.0, 50.0);
  const BoundResult result = lower_bound_bca(xs, 0.05, 1000, 6);
  const std::string text = result.to_json_string();
  CHECK(text.find("\"method\":\"bca\"") != std::string::npos);
  CHECK(text.find("bootstrap_B") != std::string::npos);
}
