#include "saferec/safe_improve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "saferec/error.hpp"
#include "saferec/parallel.hpp"
#include "saferec/rng.hpp"
#include "saferec/stats.hpp"

namespace saferec {

std::optional<double> wis_score(const Dataset& data, const Policy& pi,
                                const DiscountSpec& disc) {
  if (data.empty()) return std::nullopt;
  try {
    return wis_estimate(data, pi, disc);
  } catch (const Error& e) {
    if (e.code() == "DegenerateWeights") return std::nullopt;
    throw;
  }
}

double objective_f(const Policy& pi, const Dataset& data, double delta, double rho_minus,
                   std::size_t m, BoundMethod method, const CandidateSearchConfig& config,
                   std::uint64_t seed) {
  require(!data.empty(), "EmptyData", "objective needs a nonempty dataset");
  const BoundResult bound = bound_policy(data, pi, delta, method, config.estimator,
                                         config.disc, m, config.bootstrap_B, seed);
  if (bound.lower_bound >= rho_minus) {
    const std::optional<double> g = wis_score(data, pi, config.disc);
    if (g) return *g;
  }
  return bound.lower_bound;
}

std::vector<double> evolve(const std::function<double(const std::vector<double>&)>& objective,
                           std::vector<double> init, std::uint64_t seed, std::size_t budget) {
  if (budget == 0) return init;
  const std::size_t dim = init.size();
  constexpr std::size_t kLambda = 8;
  constexpr std::size_t kMu = 2;
  const double tau = 1.0 / std::sqrt(2.0 * static_cast<double>(std::max<std::size_t>(dim, 1)));

  Rng rng(seed);
  std::vector<double> best = init;
  double best_score = objective(init);
  std::size_t evals = 1;

  std::vector<double> center = init;
  double sigma = 0.5;
  struct Offspring {
    std::vector<double> params;
    double step;
    double score;
  };
  while (evals + kLambda <= budget) {
    std::vector<Offspring> population(kLambda);
    for (auto& child : population) {
      child.step = sigma * std::exp(tau * rng.normal());
      child.params = center;
      for (double& w : child.params) w += child.step * rng.normal();
      child.score = objective(child.params);
      ++evals;
    }
    std::stable_sort(population.begin(), population.end(),
                     [](const Offspring& a, const Offspring& b) { return a.score > b.score; });
    if (population.front().score > best_score) {
      best_score = population.front().score;
      best = population.front().params;
    }
    std::vector<double> new_center(dim, 0.0);
    double log_step = 0.0;
    for (std::size_t k = 0; k < kMu; ++k) {
      for (std::size_t j = 0; j < dim; ++j) new_center[j] += population[k].params[j];
      log_step += std::log(population[k].step);
    }
    for (double& w : new_center) w /= static_cast<double>(kMu);
    center = std::move(new_center);
    sigma = std::exp(log_step / static_cast<double>(kMu));
    sigma = std::clamp(sigma, 1e-8, 1e3);
  }
  return best;
}

namespace {

Policy softmax_from_params(const std::vector<double>& params, const SoftmaxShape& shape) {
  const std::size_t basis = fourier_basis_size(shape.state_dim, shape.fourier_order);
  std::vector<std::vector<double>> weights(shape.num_actions, std::vector<double>(basis, 0.0));
  for (int a = 0; a < shape.num_actions; ++a) {
    for (std::size_t k = 0; k < basis; ++k) {
      weights[a][k] = params[static_cast<std::size_t>(a) * basis + k];
    }
  }
  return Policy::softmax_linear(std::move(weights), shape.fourier_order, shape.state_dim);
}

std::size_t param_count(const SoftmaxShape& shape) {
  return static_cast<std::size_t>(shape.num_actions) *
         fourier_basis_size(shape.state_dim, shape.fourier_order);
}

}  // namespace

Policy policy_search(const std::function<double(const Policy&)>& objective,
                     const SoftmaxShape& shape, std::uint64_t seed, std::size_t budget) {
  std::vector<double> init(param_count(shape), 0.0);
  const auto wrapped = [&](const std::vector<double>& params) {
    return objective(softmax_from_params(params, shape));
  };
  return softmax_from_params(evolve(wrapped, std::move(init), seed, budget), shape);
}

Policy get_candidate_none(const Dataset& train, double delta, double rho_minus, std::size_t m,
                          const SafetySpec& spec, const CandidateSearchConfig& config,
                          const SoftmaxShape& shape, std::uint64_t seed) {
  const auto objective = [&](const Policy& pi) {
    return objective_f(pi, train, delta, rho_minus, m, spec.method, config,
                       derive_seed(seed, 0x0bfULL));
  };
  return policy_search(objective, shape, seed, config.budget);
}

namespace {

// argmax_pi f(mixed(alpha, pi0, pi)) over softmax policies.
Policy optimize_mixed(double alpha, const Dataset& data, double delta, double rho_minus,
                      std::size_t m, const SafetySpec& spec,
                      const CandidateSearchConfig& config, const SoftmaxShape& shape,
                      const Policy& pi0, std::uint64_t seed) {
  if (alpha == 0.0 || data.empty()) return pi0;  // feasible set is a single point
  const auto objective = [&](const Policy& pi) {
    return objective_f(Policy::mixed(alpha, pi0, pi), data, delta, rho_minus, m, spec.method,
                       config, derive_seed(seed, 0x0bfULL));
  };
  Policy inner = policy_search(objective, shape, seed, config.budget);
  return Policy::mixed(alpha, pi0, std::move(inner));
}

}  // namespace

double cross_validate(double alpha, const Dataset& data, double delta, double rho_minus,
                      std::size_t m, const SafetySpec& spec,
                      const CandidateSearchConfig& config, const SoftmaxShape& shape,
                      const Policy& pi0, std::uint64_t seed) {
  const std::size_t n = data.n();
  const std::size_t k = std::min(config.max_folds, n / 2);
  require(k >= 2, "TooFewSamples", "k-fold cross-validation needs n >= 4");

  std::vector<Dataset> folds(k);
  for (std::size_t i = 0; i < n; ++i) {
    folds[i % k].trajectories.push_back(data.trajectories[i]);
  }
  std::vector<double> fold_scores(k, 0.0);
  parallel_for(k, [&](std::size_t fold) {
    Dataset complement;
    for (std::size_t j = 0; j < k; ++j) {
      if (j == fold) continue;
      complement.trajectories.insert(complement.trajectories.end(),
                                     folds[j].trajectories.begin(),
                                     folds[j].trajectories.end());
    }
    const Policy candidate = optimize_mixed(alpha, complement, delta, rho_minus, m, spec,
                                            config, shape, pi0, derive_seed(seed, fold));
    fold_scores[fold] = objective_f(candidate, folds[fold], delta, rho_minus, m, spec.method,
                                    config, derive_seed(seed, fold, 0xcfULL));
  });
  return mean(fold_scores);
}

Policy get_candidate_kfold(const Dataset& train, double delta, double rho_minus, std::size_t m,
                           const SafetySpec& spec, const CandidateSearchConfig& config,
                           const SoftmaxShape& shape, const Policy& pi0, std::uint64_t seed) {
  require(!config.alpha_grid.empty(), "InvalidParameter", "alpha grid must be nonempty");
  double best_alpha = config.alpha_grid.front();
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t gi = 0; gi < config.alpha_grid.size(); ++gi) {
    const double alpha = config.alpha_grid[gi];
    require(alpha >= 0.0 && alpha <= 1.0, "InvalidParameter", "alpha must lie in [0, 1]");
    const double score = cross_validate(alpha, train, delta, rho_minus, m, spec, config, shape,
                                        pi0, derive_seed(seed, 0xa1f, gi));
    if (score > best_score) {
      best_score = score;
      best_alpha = alpha;
    }
  }
  return optimize_mixed(best_alpha, train, delta, rho_minus, m, spec, config, shape, pi0,
                        derive_seed(seed, 0xfe11ULL));
}

ImprovementResult policy_improvement(const Dataset& train, const Dataset& test,
                                     const SafetySpec& spec,
                                     const CandidateSearchConfig& config,
                                     const SoftmaxShape& shape, const Policy& pi0,
                                     std::uint64_t seed) {
  require(!train.empty() && !test.empty(), "EmptyData",
          "policy_improvement needs train and test partitions");
  require(spec.delta > 0.0 && spec.delta <= 0.5, "InvalidDelta", "delta must lie in (0, 0.5]");
  const std::size_t m = test.n();

  Policy candidate =
      config.variant == CandidateVariant::KFold
          ? get_candidate_kfold(train, spec.delta, spec.rho_minus, m, spec, config, shape, pi0,
                                seed)
          : get_candidate_none(train, spec.delta, spec.rho_minus, m, spec, config, shape, seed);

  // The single safety test: the only bound ever computed on the test split.
  ImprovementResult result;
  result.test_bound =
      bound_policy(test, candidate, spec.delta, spec.method, config.estimator, config.disc, m,
                   config.bootstrap_B, derive_seed(seed, 0x7e57ULL));
  result.test_bound_evaluations = 1;
  if (result.test_bound.lower_bound >= spec.rho_minus) {
    result.policy = std::move(candidate);
  }
  return result;
}

DaedalusResult daedalus(const SimEnv& env, const Policy& pi0, const SafetySpec& spec,
                        const DaedalusConfig& config, std::uint64_t seed) {
  require(!config.beta_schedule.empty(), "InvalidParameter", "beta schedule must be nonempty");
  for (std::size_t beta : config.beta_schedule) {
    require(beta >= 5, "InvalidParameter", "beta must be >= 5 so the train slice is nonempty");
  }

  DaedalusResult result;
  result.library.push_back(pi0);
  Dataset train;
  Dataset test;
  std::size_t total = 0;
  bool any_accepted = false;

  const auto pooled = [&]() {
    if (config.variant == DaedalusVariant::D1) return train;
    Dataset both = train;
    both.trajectories.insert(both.trajectories.end(), test.trajectories.begin(),
                             test.trajectories.end());
    return both;
  };
  const auto library_scores = [&](const Dataset& pool) {
    std::vector<double> scores(result.library.size(),
                               -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < result.library.size(); ++i) {
      const std::optional<double> g = wis_score(pool, result.library[i], config.search.disc);
      if (g) scores[i] = *g;
    }
    return scores;
  };

  for (int iter = 1; iter <= config.iterations; ++iter) {
    DaedalusIteration entry;
    entry.iteration = iter;
    entry.beta = config.beta_schedule[std::min<std::size_t>(iter - 1,
                                                            config.beta_schedule.size() - 1)];

    // Pick the generating policy: best library member by WIS on the pool,
    // falling back to pi0 while no data exists.
    Dataset pool = pooled();
    int incumbent = 0;
    if (!pool.empty()) {
      const std::vector<double> scores = library_scores(pool);
      incumbent = static_cast<int>(std::max_element(scores.begin(), scores.end()) -
                                   scores.begin());
      entry.incumbent_score = scores[incumbent];
    }
    entry.incumbent = incumbent;

    const Dataset batch =
        simulate(env, result.library[incumbent], entry.beta, derive_seed(seed, iter));
    total += entry.beta;
    const std::size_t to_train = (entry.beta + 4) / 5;  // ceil(beta / 5)
    for (std::size_t i = 0; i < batch.n(); ++i) {
      (i < to_train ? train : test).trajectories.push_back(batch.trajectories[i]);
    }

    CandidateSearchConfig search = config.search;
    if (any_accepted && config.switch_to_none_after_accept) {
      search.variant = CandidateVariant::None;
    }
    entry.used_kfold = search.variant == CandidateVariant::KFold;

    const ImprovementResult improvement = policy_improvement(
        train, test, spec, search, config.shape, pi0, derive_seed(seed, iter, 0xdaeULL));
    entry.test_bound = improvement.test_bound;

    if (improvement.accepted()) {
      pool = pooled();
      const std::vector<double> scores = library_scores(pool);
      const double library_best = *std::max_element(scores.begin(), scores.end());
      const std::optional<double> candidate_score =
          wis_score(pool, *improvement.policy, config.search.disc);
      entry.candidate_score = candidate_score.value_or(
          -std::numeric_limits<double>::infinity());
      if (candidate_score && *candidate_score > library_best) {
        result.library.push_back(*improvement.policy);
        entry.accepted = true;
        any_accepted = true;
        if (config.variant == DaedalusVariant::D1) test.trajectories.clear();
      }
    }

    entry.total_trajectories = total;
    entry.train_size = train.n();
    entry.test_size = test.n();
    result.log.push_back(std::move(entry));
  }
  return result;
}

}  // namespace saferec
