#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "saferec/error.hpp"
#include "saferec/estimators.hpp"
#include "saferec/simenv.hpp"
#include "saferec/stats.hpp"

using namespace saferec;

namespace {

Policy chain_behavior() {
  std::map<int, std::vector<double>> table;
  for (int s = 0; s < 5; ++s) table[s] = {0.6, 0.4};
  return Policy::tabular(table);
}

}  // namespace

TEST_CASE("is_estimate with matching policy returns the plain return") {
  const SimEnv env = chain_env();
  const Policy behavior = chain_behavior();
  const Dataset data = simulate(env, behavior, 50, 3);
  for (const Trajectory& traj : data.trajectories) {
    const IsEstimate est = is_estimate(traj, behavior);
    CHECK(est.weight == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(est.value ==
          doctest::Approx(discounted_return(traj, DiscountSpec{1.0})).epsilon(1e-12));
  }
}

TEST_CASE("is_estimate is zero when the evaluation policy avoids a logged action") {
  const Policy never_a1 = Policy::tabular({{0, {1.0, 0.0}},
                                           {1, {1.0, 0.0}},
                                           {2, {1.0, 0.0}},
                                           {3, {1.0, 0.0}},
                                           {4, {1.0, 0.0}}});
  Trajectory traj;
  Step step;
  step.state = State(2, {0.5});
  step.action = 1;  // disagrees with the deterministic evaluation policy
  step.reward = 1.0;
  step.behavior_prob = 0.4;
  traj.steps.push_back(step);
  const IsEstimate est = is_estimate(traj, never_a1);
  CHECK(est.value == 0.0);
  CHECK(est.weight == 0.0);
}

TEST_CASE("per-step estimator collapses to the full-trajectory one at T=1") {
  Trajectory traj;
  Step step;
  step.state = State(1, {0.25});
  step.action = 0;
  step.reward = 1.0;
  step.behavior_prob = 0.6;
  traj.steps.push_back(step);
  const Policy pi_e = Policy::uniform(2);
  const DiscountSpec disc{0.9};
  CHECK(per_step_is(traj, pi_e, disc).value ==
        doctest::Approx(is_estimate(traj, pi_e, disc).value).epsilon(1e-12));
}

TEST_CASE("per-step estimator equals the discounted return on-policy") {
  const SimEnv env = chain_env();
  const Policy behavior = chain_behavior();
  const Dataset data = simulate(env, behavior, 40, 5);
  const DiscountSpec disc{0.9};
  for (const Trajectory& traj : data.trajectories) {
    CHECK(per_step_is(traj, behavior, disc).value ==
          doctest::Approx(discounted_return(traj, disc)).epsilon(1e-12));
  }
}

TEST_CASE("both importance-sampling estimators are unbiased on the chain") {
  const SimEnv env = chain_env();
  const Policy behavior = chain_behavior();
  const Policy pi_e = Policy::uniform(2);
  const DiscountSpec disc{1.0};
  const double truth = exact_value(env, pi_e, disc);

  const std::size_t n = 100000;
  const Dataset data = simulate(env, behavior, n, 11);
  std::vector<double> is_values(n);
  std::vector<double> psis_values(n);
  for (std::size_t i = 0; i < n; ++i) {
    is_values[i] = is_estimate(data.trajectories[i], pi_e, disc).value;
    psis_values[i] = per_step_is(data.trajectories[i], pi_e, disc).value;
  }
  const double is_mean = mean(is_values);
  const double psis_mean = mean(psis_values);
  const double is_se = sample_std(is_values) / std::sqrt(static_cast<double>(n));
  const double psis_se = sample_std(psis_values) / std::sqrt(static_cast<double>(n));
  CHECK(std::fabs(is_mean - truth) <= 3.0 * is_se);
  CHECK(std::fabs(psis_mean - truth) <= 3.0 * psis_se);

  // The per-step estimator must not be noisier than the full product.
  CHECK(sample_variance(psis_values) <= sample_variance(is_values));
}

TEST_CASE("wis equals the dataset mean return when the policies match") {
  const SimEnv env = chain_env();
  const Policy behavior = chain_behavior();
  const Dataset data = simulate(env, behavior, 500, 17);
  for (double gamma : {1.0, 0.9}) {
    const DiscountSpec disc{gamma};
    std::vector<double> returns(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) {
      returns[i] = discounted_return(data.trajectories[i], disc);
    }
    CHECK(std::fabs(wis_estimate(data, behavior, disc) - mean(returns)) <= 1e-12);
  }
}

TEST_CASE("wis on a single trajectory returns its plain return") {
  const SimEnv env = chain_env();
  const Dataset data = simulate(env, chain_behavior(), 1, 23);
  const Policy pi_e = Policy::uniform(2);
  Dataset one;
  one.trajectories.push_back(data.trajectories[0]);
  const double r = discounted_return(one.trajectories[0], DiscountSpec{1.0});
  CHECK(wis_estimate(one, pi_e) == doctest::Approx(r).epsilon(1e-12));
}

TEST_CASE("wis stays within the convex hull of returns and throws on zero weights") {
  const SimEnv env = chain_env();
  const Policy behavior = chain_behavior();
  const Policy pi_e = Policy::uniform(2);
  const Dataset data = simulate(env, behavior, 200, 29);
  double max_return = 0.0;
  for (const Trajectory& traj : data.trajectories) {
    max_return = std::max(max_return, discounted_return(traj, DiscountSpec{1.0}));
  }
  const double wis = wis_estimate(data, pi_e);
  CHECK(wis >= 0.0);
  CHECK(wis <= max_return + 1e-12);

  // A deterministic policy that contradicts every logged action kills all
  // weights.
  Dataset contradicted;
  Trajectory traj;
  Step step;
  step.state = State(0, {0.0});
  step.action = 1;
  step.reward = 1.0;
  step.behavior_prob = 0.4;
  traj.steps.push_back(step);
  contradicted.trajectories.push_back(traj);
  const Policy always_a0 = Policy::tabular({{0, {1.0, 0.0}}});
  CHECK_THROWS_WITH_AS(static_cast<void>(wis_estimate(contradicted, always_a0)),
                       doctest::Contains("DegenerateWeights"), Error);
}

TEST_CASE("wis has lower rmse than plain is under policy mismatch") {
  const SimEnv env = chain_env();
  const Policy behavior = chain_behavior();
  const Policy pi_e = Policy::uniform(2);
  const double truth = exact_value(env, pi_e, DiscountSpec{1.0});

  double wis_sse = 0.0;
  double is_sse = 0.0;
  const int replications = 200;
  for (int rep = 0; rep < replications; ++rep) {
    const Dataset data = simulate(env, behavior, 1000, 1000 + rep);
    const double wis = wis_estimate(data, pi_e);
    const std::vector<double> xs =
        per_trajectory_estimates(data, pi_e, DiscountSpec{1.0}, Estimator::Is);
    const double is_mean = mean(xs);
    wis_sse += (wis - truth) * (wis - truth);
    is_sse += (is_mean - truth) * (is_mean - truth);
  }
  CHECK(std::sqrt(wis_sse / replications) < std::sqrt(is_sse / replications));
}

TEST_CASE("all estimators vanish on all-zero rewards") {
  const SimEnv env = sparse_click_env(0.0);
  const Policy behavior = Policy::uniform(2);
  const Dataset data = simulate(env, behavior, 50, 31);
  const Policy pi_e = Policy::uniform(2);
  CHECK(wis_estimate(data, pi_e) == 0.0);
  for (const Trajectory& traj : data.trajectories) {
    CHECK(is_estimate(traj, pi_e).value == 0.0);
    CHECK(per_step_is(traj, pi_e, DiscountSpec{1.0}).value == 0.0);
  }
}

TEST_CASE("wis pseudo-values average to the wis estimate") {
  const SimEnv env = chain_env();
  const Dataset data = simulate(env, chain_behavior(), 300, 37);
  const Policy pi_e = Policy::uniform(2);
  const std::vector<double> xs =
      per_trajectory_estimates(data, pi_e, DiscountSpec{1.0}, Estimator::Wis);
  CHECK(mean(xs) == doctest::Approx(wis_estimate(data, pi_e)).epsilon(1e-10));
}
