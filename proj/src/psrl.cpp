#include "saferec/psrl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "saferec/error.hpp"
#include "saferec/parallel.hpp"
#include "saferec/rng.hpp"

namespace saferec {

void ThetaFamily::validate() const {
  require(!grid.empty(), "InvalidParameter", "theta grid must be nonempty");
  for (double theta : grid) require(theta >= 1.0, "InvalidParameter", "thetas must be >= 1");
  if (!prior.empty()) {
    require(prior.size() == grid.size(), "InvalidParameter", "prior size must match the grid");
    double total = 0.0;
    for (double p : prior) {
      require(p >= 0.0, "InvalidParameter", "prior mass must be nonnegative");
      total += p;
    }
    require(std::fabs(total - 1.0) <= 1e-9, "InvalidParameter", "prior must sum to 1");
  }
}

std::vector<double> ThetaFamily::effective_prior() const {
  if (!prior.empty()) return prior;
  return std::vector<double>(grid.size(), 1.0 / static_cast<double>(grid.size()));
}

std::vector<double> posterior_update(const std::vector<double>& prior, int state, int action,
                                     int next_state, const std::vector<PstMdp>& family_mdps,
                                     bool* flagged) {
  require(prior.size() == family_mdps.size(), "InvalidParameter",
          "prior and model family sizes differ");
  std::vector<double> posterior(prior.size());
  double total = 0.0;
  for (std::size_t i = 0; i < prior.size(); ++i) {
    posterior[i] = prior[i] * family_mdps[i].transitions[state][action][next_state];
    total += posterior[i];
  }
  if (total <= 0.0) {
    if (flagged != nullptr) *flagged = true;
    return prior;
  }
  if (flagged != nullptr) *flagged = false;
  for (double& p : posterior) p /= total;
  return posterior;
}

namespace {

struct PreparedRun {
  std::vector<PstMdp> family_mdps;            // one per grid theta
  std::vector<std::vector<int>> policies;      // per-theta optimal actions
  PstMdp env;                                  // true-theta dynamics and rewards
};

PreparedRun prepare(const PsrlSetup& setup) {
  setup.family.validate();
  require(setup.theta_star >= 1.0, "InvalidParameter", "theta_star must be >= 1");
  PreparedRun run;
  run.family_mdps.resize(setup.family.grid.size());
  run.policies.resize(setup.family.grid.size());
  parallel_for(setup.family.grid.size(), [&](std::size_t i) {
    run.family_mdps[i] = build_mdp(setup.pst, setup.family.grid[i], setup.rewards, setup.disc);
    run.policies[i] = policy_iteration(run.family_mdps[i]).policy;
  });
  run.env = build_mdp(setup.pst, setup.theta_star, setup.rewards, setup.disc);
  return run;
}

int greedy_immediate_action(const PstMdp& mdp, int state) {
  int best = 0;
  double best_reward = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < mdp.num_actions(); ++a) {
    if (mdp.rewards[state][a] > best_reward + 1e-12) {
      best_reward = mdp.rewards[state][a];
      best = a;
    }
  }
  return best;
}

PsrlRunLog run_loop(const PsrlSetup& setup, std::size_t horizon, std::uint64_t seed,
                    bool doubling_schedule) {
  require(horizon >= 1, "InvalidParameter", "horizon must be >= 1");
  const PreparedRun run = prepare(setup);
  Rng rng(seed);

  PsrlRunLog log;
  log.steps.reserve(horizon);
  std::vector<double> posterior = setup.family.effective_prior();
  int state = run.env.state_index(Suffix{});
  std::size_t next_sample_at = 1;  // L in the doubling schedule
  std::size_t sampled_index = 0;
  double reward_sum = 0.0;

  for (std::size_t t = 1; t <= horizon; ++t) {
    bool switched = false;
    if (doubling_schedule) {
      if (t == next_sample_at) {
        sampled_index = static_cast<std::size_t>(rng.categorical(posterior));
        next_sample_at *= 2;
        switched = true;
        ++log.switch_count;
      }
    } else {
      sampled_index = static_cast<std::size_t>(rng.categorical(posterior));
      switched = true;
      ++log.switch_count;
    }

    const int action = doubling_schedule
                           ? run.policies[sampled_index][state]
                           : greedy_immediate_action(run.family_mdps[sampled_index], state);
    const double reward = run.env.rewards[state][action];
    const int next_state = rng.categorical(run.env.transitions[state][action]);
    posterior = posterior_update(posterior, state, action, next_state, run.family_mdps);

    PsrlStep step;
    step.t = t;
    step.state = state;
    step.action = action;
    step.reward = reward;
    step.theta_sampled = setup.family.grid[sampled_index];
    step.switched = switched;
    step.posterior = posterior;
    log.steps.push_back(std::move(step));

    reward_sum += reward;
    if (action == run.env.null_action()) ++log.null_actions;
    state = next_state;
  }
  log.average_reward = reward_sum / static_cast<double>(horizon);
  log.final_posterior = posterior;
  return log;
}

}  // namespace

PsrlRunLog ds_psrl(const PsrlSetup& setup, std::size_t horizon, std::uint64_t seed) {
  return run_loop(setup, horizon, seed, /*doubling_schedule=*/true);
}

PsrlRunLog greedy_thompson(const PsrlSetup& setup, std::size_t horizon, std::uint64_t seed) {
  return run_loop(setup, horizon, seed, /*doubling_schedule=*/false);
}

}  // namespace saferec
