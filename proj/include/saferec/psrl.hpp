#pragma once

#include <cstdint>
#include <vector>

#include "saferec/pst.hpp"

namespace saferec {

struct ThetaFamily {
  std::vector<double> grid;   // theta values, each >= 1
  std::vector<double> prior;  // sums to 1; uniform when empty

  void validate() const;
  std::vector<double> effective_prior() const;
};

// Bayes step over the theta grid given one observed transition. An all-zero
// likelihood keeps the prior and sets *flagged.
std::vector<double> posterior_update(const std::vector<double>& prior, int state, int action,
                                     int next_state, const std::vector<PstMdp>& family_mdps,
                                     bool* flagged = nullptr);

struct PsrlStep {
  std::size_t t = 0;
  int state = 0;
  int action = 0;
  double reward = 0.0;
  double theta_sampled = 0.0;
  bool switched = false;  // a fresh posterior sample was drawn this step
  std::vector<double> posterior;
};

struct PsrlRunLog {
  std::vector<PsrlStep> steps;
  double average_reward = 0.0;
  int switch_count = 0;
  std::vector<double> final_posterior;
  std::size_t null_actions = 0;
};

struct PsrlSetup {
  Pst pst;
  ThetaFamily family;
  double theta_star = 1.0;  // hidden environment parameter
  PoiRewardSpec rewards;
  DiscountSpec disc{0.9};
};

// Posterior sampling with the doubling update schedule: a new theta is drawn
// only when t reaches L, then L doubles, so a T-step run samples exactly
// floor(log2 T) + 1 times. Per-theta optimal policies are solved up front.
PsrlRunLog ds_psrl(const PsrlSetup& setup, std::size_t horizon, std::uint64_t seed);

// One-step Thompson baseline: samples theta every step and takes the action
// with the best immediate reward under the sampled model.
PsrlRunLog greedy_thompson(const PsrlSetup& setup, std::size_t horizon, std::uint64_t seed);

}  // namespace saferec
