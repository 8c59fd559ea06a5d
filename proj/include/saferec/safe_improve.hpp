#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "saferec/bounds.hpp"
#include "saferec/policy.hpp"
#include "saferec/simenv.hpp"
#include "saferec/trajectory.hpp"

namespace saferec {

struct SafetySpec {
  double rho_minus = 0.0;  // performance floor the candidate must clear
  double delta = 0.05;
  BoundMethod method = BoundMethod::TT;
};

enum class CandidateVariant { None, KFold };

struct CandidateSearchConfig {
  CandidateVariant variant = CandidateVariant::KFold;
  std::vector<double> alpha_grid = {0.0, 0.25, 0.5, 0.75, 1.0};
  std::size_t budget = 400;  // objective evaluations per optimizer call
  Estimator estimator = Estimator::PerStepIs;
  DiscountSpec disc{1.0};
  int fourier_order = 3;
  int bootstrap_B = kDefaultBootstrapB;
  std::size_t max_folds = 20;  // k = min(max_folds, n/2)
};

// g(pi | D): full-trajectory weighted importance sampling. Returns nullopt
// when every importance weight is zero.
std::optional<double> wis_score(const Dataset& data, const Policy& pi, const DiscountSpec& disc);

// Returns g(pi|D) when the predicted m-trajectory bound clears rho_minus,
// otherwise the predicted bound itself.
double objective_f(const Policy& pi, const Dataset& data, double delta, double rho_minus,
                   std::size_t m, BoundMethod method,
                   const CandidateSearchConfig& config = {}, std::uint64_t seed = 0);

// (mu, lambda) evolution strategy with self-adapted per-offspring step sizes.
// Returns the best parameter vector seen; with budget = 0 the initial vector
// comes back unevaluated.
std::vector<double> evolve(const std::function<double(const std::vector<double>&)>& objective,
                           std::vector<double> init, std::uint64_t seed, std::size_t budget);

struct SoftmaxShape {
  int num_actions = 2;
  std::size_t state_dim = 1;
  int fourier_order = 3;
};

// Searches softmax-linear policies by the evolution strategy above.
Policy policy_search(const std::function<double(const Policy&)>& objective,
                     const SoftmaxShape& shape, std::uint64_t seed, std::size_t budget);

Policy get_candidate_none(const Dataset& train, double delta, double rho_minus, std::size_t m,
                          const SafetySpec& spec, const CandidateSearchConfig& config,
                          const SoftmaxShape& shape, std::uint64_t seed);

double cross_validate(double alpha, const Dataset& data, double delta, double rho_minus,
                      std::size_t m, const SafetySpec& spec,
                      const CandidateSearchConfig& config, const SoftmaxShape& shape,
                      const Policy& pi0, std::uint64_t seed);

Policy get_candidate_kfold(const Dataset& train, double delta, double rho_minus, std::size_t m,
                           const SafetySpec& spec, const CandidateSearchConfig& config,
                           const SoftmaxShape& shape, const Policy& pi0, std::uint64_t seed);

struct ImprovementResult {
  std::optional<Policy> policy;  // empty = No Solution Found
  BoundResult test_bound;
  int test_bound_evaluations = 0;  // must be exactly 1 per call

  bool accepted() const { return policy.has_value(); }
};

// Candidate from the train split, one safety test on the test split.
ImprovementResult policy_improvement(const Dataset& train, const Dataset& test,
                                     const SafetySpec& spec,
                                     const CandidateSearchConfig& config,
                                     const SoftmaxShape& shape, const Policy& pi0,
                                     std::uint64_t seed);

enum class DaedalusVariant { D1, D2 };

struct DaedalusConfig {
  std::vector<std::size_t> beta_schedule = {50};
  DaedalusVariant variant = DaedalusVariant::D2;
  int iterations = 10;
  CandidateSearchConfig search;
  SoftmaxShape shape;
  // k-fold candidate search until the first acceptance, None afterwards.
  bool switch_to_none_after_accept = true;
};

struct DaedalusIteration {
  int iteration = 0;
  std::size_t beta = 0;
  std::size_t total_trajectories = 0;
  int incumbent = 0;
  double incumbent_score = 0.0;
  bool accepted = false;
  double candidate_score = 0.0;
  BoundResult test_bound;
  bool used_kfold = false;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

struct DaedalusResult {
  std::vector<Policy> library;  // index 0 = pi0
  std::vector<DaedalusIteration> log;
};

// Incremental loop: generate beta trajectories with the current best library
// policy, split 1/5 train : 4/5 test, run policy_improvement, accept the
// candidate only when it beats every library member's WIS score. D1 clears
// the test partition on acceptance; D2 keeps it and pools train+test when
// comparing scores.
DaedalusResult daedalus(const SimEnv& env, const Policy& pi0, const SafetySpec& spec,
                        const DaedalusConfig& config, std::uint64_t seed);

}  // namespace saferec
