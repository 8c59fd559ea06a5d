#include "saferec/estimators.hpp"

#include <cmath>

#include "saferec/error.hpp"
#include "saferec/parallel.hpp"
#include "saferec/stats.hpp"

namespace saferec {

IsEstimate is_estimate(const Trajectory& traj, const Policy& pi_e, const DiscountSpec& disc) {
  double log_weight = 0.0;
  bool zero = false;
  for (const Step& step : traj.steps) {
    const double p = pi_e.action_prob(step.state, step.action);
    if (p <= 0.0) {
      zero = true;
      break;
    }
    log_weight += std::log(p) - std::log(step.behavior_prob);
  }
  IsEstimate est;
  est.weight = zero ? 0.0 : std::exp(log_weight);
  est.value = est.weight * discounted_return(traj, disc);
  return est;
}

IsEstimate per_step_is(const Trajectory& traj, const Policy& pi_e, const DiscountSpec& disc) {
  IsEstimate est;
  double log_weight = 0.0;
  double discount = 1.0;
  bool zero = false;
  double total = 0.0;
  for (const Step& step : traj.steps) {
    if (!zero) {
      const double p = pi_e.action_prob(step.state, step.action);
      if (p <= 0.0) {
        zero = true;
      } else {
        log_weight += std::log(p) - std::log(step.behavior_prob);
      }
    }
    if (!zero) total += discount * step.reward * std::exp(log_weight);
    discount *= disc.gamma;
  }
  est.value = total;
  est.weight = zero ? 0.0 : std::exp(log_weight);
  return est;
}

Estimator estimator_from_name(const std::string& name) {
  if (name == "is") return Estimator::Is;
  if (name == "psis") return Estimator::PerStepIs;
  if (name == "wis") return Estimator::Wis;
  fail("UnknownEstimator", "estimator must be one of is, psis, wis");
}

std::string estimator_name(Estimator est) {
  switch (est) {
    case Estimator::Is: return "is";
    case Estimator::PerStepIs: return "psis";
    case Estimator::Wis: return "wis";
  }
  return "?";
}

namespace {

// value/weight pairs for every trajectory, evaluated in parallel but stored
// by index so downstream reductions are order-deterministic.
std::vector<IsEstimate> all_estimates(const Dataset& data, const Policy& pi_e,
                                      const DiscountSpec& disc, bool per_step) {
  std::vector<IsEstimate> out(data.n());
  parallel_for(data.n(), [&](std::size_t i) {
    out[i] = per_step ? per_step_is(data.trajectories[i], pi_e, disc)
                      : is_estimate(data.trajectories[i], pi_e, disc);
  });
  return out;
}

}  // namespace

double wis_estimate(const Dataset& data, const Policy& pi_e, const DiscountSpec& disc) {
  require(!data.empty(), "EmptyData", "wis_estimate needs a nonempty dataset");
  const std::vector<IsEstimate> ests = all_estimates(data, pi_e, disc, /*per_step=*/false);
  std::vector<double> values(ests.size());
  std::vector<double> weights(ests.size());
  for (std::size_t i = 0; i < ests.size(); ++i) {
    values[i] = ests[i].value;
    weights[i] = ests[i].weight;
  }
  const double denom = pairwise_sum(weights);
  require(denom > 0.0, "DegenerateWeights", "all importance weights are zero");
  return pairwise_sum(values) / denom;
}

std::vector<double> per_trajectory_estimates(const Dataset& data, const Policy& pi_e,
                                             const DiscountSpec& disc, Estimator est) {
  require(!data.empty(), "EmptyData", "estimator needs a nonempty dataset");
  const bool per_step = est == Estimator::PerStepIs;
  const std::vector<IsEstimate> ests = all_estimates(data, pi_e, disc, per_step);
  std::vector<double> xs(ests.size());
  if (est == Estimator::Wis) {
    std::vector<double> weights(ests.size());
    for (std::size_t i = 0; i < ests.size(); ++i) weights[i] = ests[i].weight;
    const double wsum = pairwise_sum(weights);
    require(wsum > 0.0, "DegenerateWeights", "all importance weights are zero");
    const double scale = static_cast<double>(ests.size()) / wsum;
    for (std::size_t i = 0; i < ests.size(); ++i) xs[i] = ests[i].value * scale;
  } else {
    for (std::size_t i = 0; i < ests.size(); ++i) xs[i] = ests[i].value;
  }
  return xs;
}

}  // namespace saferec
