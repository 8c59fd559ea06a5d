#pragma once

#include <vector>

#include "saferec/policy.hpp"
#include "saferec/trajectory.hpp"

namespace saferec {

struct IsEstimate {
  double value = 0.0;   // importance-weighted return, >= 0
  double weight = 0.0;  // terminal cumulative importance weight, >= 0
};

// Full-trajectory importance sampling: value = R(tau) * prod_t pi_e/bp.
// Ratios are accumulated in log space and exponentiated once, so length-20
// trajectories with small probabilities do not underflow.
IsEstimate is_estimate(const Trajectory& traj, const Policy& pi_e,
                       const DiscountSpec& disc = DiscountSpec{1.0});

// Per-step importance sampling: value = sum_t gamma^{t-1} r_t prod_{j<=t} ratio_j.
// weight still reports the terminal cumulative product.
IsEstimate per_step_is(const Trajectory& traj, const Policy& pi_e, const DiscountSpec& disc);

enum class Estimator { Is, PerStepIs, Wis };

Estimator estimator_from_name(const std::string& name);
std::string estimator_name(Estimator est);

// Weighted importance sampling over the whole dataset:
//   g = sum_i R_i w_i / sum_i w_i, with w_i the full-trajectory weight.
// Throws DegenerateWeights when every w_i is zero.
double wis_estimate(const Dataset& data, const Policy& pi_e,
                    const DiscountSpec& disc = DiscountSpec{1.0});

// Per-trajectory values X_i whose sample mean matches the named estimator:
// Is/PerStepIs give the usual unbiased estimates; Wis gives contributions
// normalized by the mean weight (biased, mean equals wis_estimate).
std::vector<double> per_trajectory_estimates(const Dataset& data, const Policy& pi_e,
                                             const DiscountSpec& disc, Estimator est);

}  // namespace saferec
