#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "saferec/policy.hpp"
#include "saferec/trajectory.hpp"

namespace saferec {

// Finite click environment with exactly computable ground truth. Rewards are
// Bernoulli clicks with probability click_prob[s][a], optionally scaled by a
// per-episode drift multiplier. Entering a terminal state ends the episode.
struct SimEnv {
  int num_states = 0;
  int num_actions = 0;
  int horizon = kDefaultHorizonCap;
  double gamma = 1.0;
  std::vector<double> d0;
  std::vector<std::vector<std::vector<double>>> transitions;  // [s][a][s']
  std::vector<std::vector<double>> click_prob;                // [s][a]
  std::vector<int> terminal;
  std::vector<double> drift;  // per-episode reward multiplier; empty = stationary

  bool is_terminal(int s) const;
  double drift_multiplier(std::size_t episode) const;
  // Feature map used for logged states: {id / (num_states - 1)} in [0, 1].
  State make_state(int s) const;

  void validate() const;
  std::string to_json_string() const;
  static SimEnv from_json_string(const std::string& text);
  static SimEnv load(const std::string& path);
};

// n trajectories under `policy`, behavior probabilities logged per step.
// episode_offset shifts the drift index, so streams can be generated in
// chunks. Deterministic for a fixed seed, independent of worker count.
Dataset simulate(const SimEnv& env, const Policy& policy, std::size_t n, std::uint64_t seed,
                 std::size_t episode_offset = 0);

// Exact expected discounted return by finite-horizon backward DP.
double exact_value(const SimEnv& env, const Policy& policy, const DiscountSpec& disc,
                   std::size_t episode = 0);

// Exact CTR/LTV percentages (clicks per visit / clicks per user).
struct MetricPair {
  double ctr = 0.0;
  double ltv = 0.0;
};
MetricPair exact_ctr_ltv(const SimEnv& env, const Policy& policy);

// Expected fraction of rewarding transitions under the uniform policy.
double rewarding_transition_rate(const SimEnv& env);

// T=20, gamma=1 click environment calibrated so the uniform policy's
// rewarding-transition rate equals target_rate.
SimEnv sparse_click_env(double target_rate, std::uint64_t seed = 11);

// Built-in environments used by the test and acceptance suites.
SimEnv chain_env();    // 5-state chain, biased behavior vs uniform evaluation
SimEnv funnel_env();   // offer-now vs nurture dynamics with user exit
SimEnv bandit_env();   // single-state, 2-action improvable environment
// Click stream for drift studies: hotel_shaped=true injects a mid-stream
// drop and recovery in the reward multiplier, false keeps it stationary.
SimEnv stream_env(bool hotel_shaped, std::size_t episodes);

SimEnv builtin_env(const std::string& name);

}  // namespace saferec
