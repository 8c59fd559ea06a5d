#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "saferec/trajectory.hpp"

namespace saferec {

// State-conditional action values. Implementations are immutable after
// construction and safe to share across threads.
class QFunction {
 public:
  virtual ~QFunction() = default;
  virtual std::vector<double> qvalues(const State& state) const = 0;
  virtual int num_actions() const = 0;
  virtual std::string to_json_string() const;  // optional; default throws
};

class TabularQ : public QFunction {
 public:
  TabularQ(std::map<int, std::vector<double>> table, int actions)
      : table_(std::move(table)), actions_(actions) {}

  std::vector<double> qvalues(const State& state) const override;
  int num_actions() const override { return actions_; }
  std::string to_json_string() const override;

  const std::map<int, std::vector<double>>& table() const { return table_; }

 private:
  std::map<int, std::vector<double>> table_;
  int actions_;
};

// Fourier cosine basis over [0,1]^d: one feature per multi-index
// c in {0..order}^d, value cos(pi * c . x). The basis size (order+1)^d is
// capped to keep desk-scale problems honest.
std::vector<double> fourier_features(const std::vector<double>& x, int order);
std::size_t fourier_basis_size(std::size_t dim, int order);

// Tagged-union policy. Kinds:
//  - Tabular: per-discrete-state action distribution.
//  - EpsilonGreedy: 1-eps on the argmax-Q action (ties to the lowest action
//    id), eps/(|A|-1) on the rest.
//  - SoftmaxLinear: softmax over linear scores on Fourier features of the
//    state feature vector (scaled to [0,1] by the caller).
//  - Mixed: alpha * inner + (1 - alpha) * base, probability-for-probability.
class Policy {
 public:
  enum class Kind { Tabular, EpsilonGreedy, SoftmaxLinear, Mixed };

  static Policy tabular(std::map<int, std::vector<double>> table);
  static Policy uniform(int num_actions);  // tabular-free uniform over actions
  static Policy epsilon_greedy(std::shared_ptr<const QFunction> q, double epsilon);
  // weights[a] has one entry per Fourier feature.
  static Policy softmax_linear(std::vector<std::vector<double>> weights, int fourier_order,
                               std::size_t state_dim);
  static Policy mixed(double alpha, Policy base, Policy inner);

  Kind kind() const { return kind_; }
  int num_actions() const { return num_actions_; }
  double epsilon() const { return epsilon_; }
  double alpha() const { return alpha_; }
  int fourier_order() const { return fourier_order_; }
  std::size_t state_dim() const { return state_dim_; }
  const std::vector<std::vector<double>>& weights() const { return weights_; }
  const Policy& base() const { return *base_; }
  const Policy& inner() const { return *inner_; }
  const QFunction& qfunction() const { return *q_; }

  double action_prob(const State& state, int action) const;
  std::vector<double> action_distribution(const State& state) const;

  // Convenience for simulators: action_prob on a discrete env state.
  double action_prob(int state_id, const std::vector<double>& features, int action) const {
    return action_prob(State(state_id, features), action);
  }

  std::string to_json_string() const;
  static Policy from_json_string(const std::string& text);
  static Policy load(const std::string& path);
  void save(const std::string& path, const std::string& manifest_json = "") const;

 private:
  Policy() = default;

  Kind kind_ = Kind::Tabular;
  int num_actions_ = 0;

  // Tabular
  std::map<int, std::vector<double>> table_;
  bool uniform_fallback_ = false;

  // EpsilonGreedy
  std::shared_ptr<const QFunction> q_;
  double epsilon_ = 0.0;

  // SoftmaxLinear
  std::vector<std::vector<double>> weights_;
  int fourier_order_ = 3;
  std::size_t state_dim_ = 0;

  // Mixed
  double alpha_ = 0.0;
  std::shared_ptr<const Policy> base_;
  std::shared_ptr<const Policy> inner_;
};

// Deserializes a regressor-backed Q function ("forest"/"tabular_mean" JSON).
// Defined alongside the regressor implementations.
std::shared_ptr<const QFunction> load_regressor_q(const std::string& json_text);

}  // namespace saferec
