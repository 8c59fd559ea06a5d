#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "saferec/error.hpp"
#include "saferec/policy.hpp"
#include "saferec/rng.hpp"
#include "saferec/trajectory.hpp"

using namespace saferec;

namespace {

Trajectory make_traj(const std::vector<double>& rewards, double bp = 0.5) {
  Trajectory traj;
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    Step step;
    step.state = State(static_cast<int>(t));
    step.action = 0;
    step.reward = rewards[t];
    step.behavior_prob = bp;
    traj.steps.push_back(step);
  }
  return traj;
}

}  // namespace

TEST_CASE("discounted return evaluates the geometric sum") {
  CHECK(discounted_return(make_traj({1, 0, 1}), DiscountSpec{0.9}) == doctest::Approx(1.81));
  CHECK(discounted_return(make_traj({0, 0, 0}), DiscountSpec{0.7}) == 0.0);
  CHECK(discounted_return(make_traj({1, 1}), DiscountSpec{0.0}) == 1.0);
}

TEST_CASE("discounted return is monotone in each reward") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> rewards(5);
    for (double& r : rewards) r = rng.uniform01();
    const double gamma = rng.uniform01();
    const double base = discounted_return(make_traj(rewards), DiscountSpec{gamma});
    const std::size_t bump = rng.uniform_int(rewards.size());
    rewards[bump] += 0.25;
    CHECK(discounted_return(make_traj(rewards), DiscountSpec{gamma}) >= base);
  }
}

TEST_CASE("ctr counts clicks per visit") {
  Dataset data;
  // 10 clicks over 100 visits
  for (int u = 0; u < 10; ++u) {
    std::vector<double> rewards(10, 0.0);
    if (u < 10) rewards[0] = u < 10 ? 1.0 : 0.0;
    data.trajectories.push_back(make_traj(rewards));
  }
  CHECK(ctr(data) == doctest::Approx(10.0));

  Dataset zero;
  zero.trajectories.push_back(make_traj({0, 0, 0}));
  CHECK(ctr(zero) == 0.0);
}

TEST_CASE("ltv counts clicks per user and relates to ctr by mean visits") {
  // 3 users x 4 visits each, 6 clicks
  Dataset data;
  data.trajectories.push_back(make_traj({1, 1, 0, 0}));
  data.trajectories.push_back(make_traj({1, 1, 0, 0}));
  data.trajectories.push_back(make_traj({1, 1, 0, 0}));
  CHECK(ctr(data) == doctest::Approx(50.0));
  CHECK(ltv(data) == doctest::Approx(200.0));
  CHECK(ltv(data) > ctr(data));

  Dataset single;
  single.trajectories.push_back(make_traj({1}));
  CHECK(ltv(single) == doctest::Approx(100.0));

  // ltv = ctr * mean visits per user
  const double visits_per_user = 4.0;
  CHECK(ltv(data) == doctest::Approx(ctr(data) * visits_per_user));
}

TEST_CASE("trajectory invariants are enforced") {
  Trajectory empty;
  CHECK_THROWS_AS(validate(empty), Error);

  Trajectory too_long = make_traj(std::vector<double>(21, 0.0));
  CHECK_THROWS_AS(validate(too_long), Error);
  CHECK_NOTHROW(validate(too_long, 25));

  Trajectory bad_bp = make_traj({1.0});
  bad_bp.steps[0].behavior_prob = 0.0;
  CHECK_THROWS_AS(validate(bad_bp), Error);
  bad_bp.steps[0].behavior_prob = 1.5;
  CHECK_THROWS_AS(validate(bad_bp), Error);

  Trajectory negative = make_traj({1.0});
  negative.steps[0].reward = -0.25;
  CHECK_THROWS_AS(validate(negative), Error);
}

TEST_CASE("epsilon-greedy spreads epsilon over the non-best actions") {
  // 7 offers, epsilon 0.1, non-best action gets 0.1/6
  std::map<int, std::vector<double>> q{{0, {0.1, 0.9, 0.2, 0.2, 0.2, 0.2, 0.2}}};
  const Policy policy = Policy::epsilon_greedy(std::make_shared<TabularQ>(q, 7), 0.1);
  const State s(0);
  CHECK(policy.action_prob(s, 1) == doctest::Approx(0.9));
  CHECK(policy.action_prob(s, 0) == doctest::Approx(0.1 / 6.0));
  CHECK(policy.action_prob(s, 5) == doctest::Approx(0.1 / 6.0));
}

TEST_CASE("epsilon-greedy breaks argmax ties by lowest action id") {
  std::map<int, std::vector<double>> q{{0, {0.5, 0.5, 0.1}}};
  const Policy policy = Policy::epsilon_greedy(std::make_shared<TabularQ>(q, 3), 0.3);
  CHECK(policy.action_prob(State(0), 0) == doctest::Approx(0.7));
  CHECK(policy.action_prob(State(0), 1) == doctest::Approx(0.15));
}

TEST_CASE("mixed policy blends probabilities") {
  const Policy base = Policy::tabular({{0, {0.4, 0.6}}});
  const Policy inner = Policy::tabular({{0, {0.9, 0.1}}});
  const State s(0);

  const Policy blend = Policy::mixed(0.5, base, inner);
  CHECK(blend.action_prob(s, 0) == doctest::Approx(0.5 * 0.9 + 0.5 * 0.4));

  // alpha = 0 -> base exactly; alpha = 1 -> inner exactly
  const Policy zero = Policy::mixed(0.0, base, inner);
  const Policy one = Policy::mixed(1.0, base, inner);
  for (int a = 0; a < 2; ++a) {
    CHECK(zero.action_prob(s, a) == base.action_prob(s, a));
    CHECK(one.action_prob(s, a) == inner.action_prob(s, a));
  }
}

TEST_CASE("mixed policy reachable interval matches the blend bounds") {
  // alpha = 0.5 and pi0(a|s) = 0.4: reachable interval [0.2, 0.7]
  const Policy base = Policy::tabular({{0, {0.4, 0.6}}});
  const Policy lo_inner = Policy::tabular({{0, {0.0, 1.0}}});
  const Policy hi_inner = Policy::tabular({{0, {1.0, 0.0}}});
  CHECK(Policy::mixed(0.5, base, lo_inner).action_prob(State(0), 0) == doctest::Approx(0.2));
  CHECK(Policy::mixed(0.5, base, hi_inner).action_prob(State(0), 0) == doctest::Approx(0.7));
}

TEST_CASE("every policy kind produces a normalized action distribution") {
  Rng rng(9);
  std::vector<Policy> policies;
  policies.push_back(Policy::tabular({{0, {0.25, 0.75}}, {1, {1.0, 0.0}}}));
  policies.push_back(Policy::uniform(5));
  policies.push_back(
      Policy::epsilon_greedy(std::make_shared<TabularQ>(
                                 std::map<int, std::vector<double>>{{0, {1.0, 2.0, 0.0}}}, 3),
                             0.2));
  std::vector<std::vector<double>> weights(4);
  for (auto& row : weights) {
    row.resize(fourier_basis_size(1, 3));
    for (double& w : row) w = rng.normal();
  }
  policies.push_back(Policy::softmax_linear(weights, 3, 1));
  policies.push_back(Policy::mixed(0.3, Policy::uniform(2),
                                   Policy::tabular({{0, {0.9, 0.1}}, {7, {0.2, 0.8}}})));

  for (const Policy& policy : policies) {
    for (int sid : {0, 7}) {
      if (policy.kind() == Policy::Kind::Tabular && sid == 7 && policy.num_actions() != 5) {
        continue;  // explicit table only covers listed states
      }
      const State s(sid, {sid / 10.0});
      double total = 0.0;
      for (int a = 0; a < policy.num_actions(); ++a) {
        const double p = policy.action_prob(s, a);
        CHECK(p >= 0.0);
        total += p;
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("action_prob rejects unknown actions") {
  const Policy policy = Policy::uniform(3);
  CHECK_THROWS_AS(policy.action_prob(State(0), 3), Error);
  CHECK_THROWS_AS(policy.action_prob(State(0), -1), Error);
}

TEST_CASE("jsonl io round-trips and rejects bad behavior probabilities") {
  const std::string path = "trajcore_test.jsonl";
  {
    std::ofstream out(path);
    out << R"({"user_id":"u1","steps":[{"s":[0.5,0.25],"a":1,"r":1.0,"bp":0.5}]})" << "\n";
    out << R"({"user_id":"u2","steps":[{"s":3,"a":0,"r":0.0,"bp":1.0}]})" << "\n";
  }
  const Dataset data = read_jsonl(path);
  REQUIRE(data.n() == 2);
  CHECK(data.trajectories[0].steps[0].state.features ==
        std::vector<double>{0.5, 0.25});
  CHECK_FALSE(data.trajectories[0].steps[0].state.is_discrete());
  CHECK(data.trajectories[1].steps[0].state.id == 3);

  write_jsonl(data, path);
  const Dataset again = read_jsonl(path);
  CHECK(again.n() == 2);
  CHECK(again.trajectories[1].steps[0].state.id == 3);

  {
    std::ofstream out(path);
    out << R"({"user_id":"u1","steps":[{"s":1,"a":0,"r":1.0,"bp":0.0}]})" << "\n";
  }
  CHECK_THROWS_WITH_AS(static_cast<void>(read_jsonl(path)),
                       doctest::Contains("line 1"), Error);

  {
    std::ofstream out(path);
    out << "{not json}\n";
  }
  CHECK_THROWS_AS(static_cast<void>(read_jsonl(path)), Error);
  std::remove(path.c_str());
}

TEST_CASE("policy serialization round-trips each kind") {
  const Policy tab = Policy::tabular({{0, {0.3, 0.7}}, {2, {1.0, 0.0}}});
  const Policy back = Policy::from_json_string(tab.to_json_string());
  CHECK(back.action_prob(State(0), 1) == doctest::Approx(0.7));

  std::vector<std::vector<double>> weights(2, std::vector<double>(fourier_basis_size(2, 2)));
  weights[0][1] = 0.4;
  weights[1][3] = -0.2;
  const Policy soft = Policy::softmax_linear(weights, 2, 2);
  const Policy soft_back = Policy::from_json_string(soft.to_json_string());
  const State s(-1, {0.3, 0.9});
  CHECK(soft_back.action_prob(s, 0) == doctest::Approx(soft.action_prob(s, 0)));

  const Policy mix = Policy::mixed(0.25, Policy::uniform(2), tab);
  const Policy mix_back = Policy::from_json_string(mix.to_json_string());
  CHECK(mix_back.action_prob(State(2), 0) == doctest::Approx(mix.action_prob(State(2), 0)));
}
