#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "saferec/bounds.hpp"
#include "saferec/policy.hpp"
#include "saferec/regressor.hpp"
#include "saferec/trajectory.hpp"

namespace saferec {

// One regressor per action over a shared feature mask. Actions that never
// appeared in training keep a null regressor and predict 0 (flagged).
class QModel : public QFunction {
 public:
  QModel(std::vector<std::shared_ptr<const Regressor>> per_action,
         std::vector<std::size_t> feature_mask, std::vector<int> missing_actions)
      : per_action_(std::move(per_action)),
        feature_mask_(std::move(feature_mask)),
        missing_actions_(std::move(missing_actions)) {}

  std::vector<double> qvalues(const State& state) const override;
  int num_actions() const override { return static_cast<int>(per_action_.size()); }
  std::string to_json_string() const override;

  const std::vector<std::size_t>& feature_mask() const { return feature_mask_; }
  const std::vector<int>& missing_actions() const { return missing_actions_; }

  std::vector<double> masked(const std::vector<double>& features) const;

 private:
  std::vector<std::shared_ptr<const Regressor>> per_action_;
  std::vector<std::size_t> feature_mask_;
  std::vector<int> missing_actions_;
};

struct FeatureSelection {
  std::vector<std::size_t> mask;  // ascending feature indices
  bool constant_target = false;
};

// Mutual information between 10-bin discretizations of each feature and the
// target; keeps the top keep_fraction of features, ties broken by lower index.
FeatureSelection information_gain_select(const std::vector<std::vector<double>>& features,
                                         const std::vector<double>& targets,
                                         double keep_fraction);

struct FqiConfig {
  int iterations = 10;  // K
  DiscountSpec disc{0.9};
  double epsilon = 0.1;
  double delta = 0.05;
  BoundMethod method = BoundMethod::TT;
  double keep_fraction = 1.0;
  RegressorKind regressor = RegressorKind::TabularMean;
  double cell_width = 0.05;
  TreeEnsembleConfig tree;
  int bootstrap_B = kDefaultBootstrapB;
};

struct GreedyResult {
  Policy policy;
  std::shared_ptr<const QModel> q;
};

// Fits one immediate-reward regressor per action and wraps the result in an
// epsilon-greedy policy.
GreedyResult greedy_train(const Dataset& train, double epsilon, std::uint64_t seed,
                          const FqiConfig& config = {});

struct FqiIteration {
  int iteration = 0;
  BoundResult validation_bound;
  bool new_best = false;
};

struct FqiResult {
  Policy policy;          // best-bound iterate
  BoundResult bound;      // evaluated on test when given, else best validation bound
  std::vector<FqiIteration> history;
};

// Batch value iteration over logged data: labels r + gamma max_a Q(x'),
// feature selection, per-action refit, epsilon-greedy wrap, per-step
// importance-sampled lower bound on the validation set; the best-bound
// iterate wins (earliest iteration on ties).
FqiResult fqi_train(const Dataset& train, const Dataset& val, const FqiConfig& config,
                    std::uint64_t seed, const Dataset* test = nullptr);

}  // namespace saferec
