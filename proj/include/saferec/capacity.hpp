#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace saferec {

// Hidden-type user model: a finite family of MDPs sharing states and
// actions, with the type fixed for the whole horizon.
struct TypedMdpFamily {
  int num_types = 0;
  int num_states = 0;
  int num_actions = 0;
  int horizon = 0;
  int initial_state = 0;
  std::vector<double> initial_belief;                                   // over types
  std::vector<std::vector<std::vector<std::vector<double>>>> transitions;  // [th][s][a][s']
  std::vector<std::vector<std::vector<double>>> rewards;                   // [th][s][a]

  void validate() const;
  std::string to_json_string() const;
  static TypedMdpFamily from_json_string(const std::string& text);
  static TypedMdpFamily load(const std::string& path);
};

struct CapacitySpec {
  std::vector<std::vector<std::vector<double>>> consumption;  // [r][s][a], 0/1
  std::vector<double> limits;                                 // L_r > 0

  int num_resources() const { return static_cast<int>(limits.size()); }
  void validate(const TypedMdpFamily& family) const;
  static CapacitySpec load(const std::string& path);
};

// b'(th) proportional to b(th) * T_th(s'|s,a). Zero total evidence throws
// ImpossibleTransition.
std::vector<double> belief_update(const TypedMdpFamily& family, const std::vector<double>& b,
                                  int s, int a, int s_next);

// Per-type optimal finite-horizon policies and exact cross-evaluations
// value[i][j][t][s]: following type j's optimal policy on type i's model.
struct TypePolicies {
  std::vector<std::vector<std::vector<int>>> policy;                  // [j][t][s]
  std::vector<std::vector<std::vector<std::vector<double>>>> value;   // [i][j][t][s]
};

// reward(th, t, s, a); time-dependence carries the Lagrangian pricing term.
using RewardFn = std::function<double(int, int, int, int)>;

TypePolicies type_policies_and_cross_values(const TypedMdpFamily& family,
                                            const RewardFn& reward);
TypePolicies type_policies_and_cross_values(const TypedMdpFamily& family);

struct RegretResult {
  double value = 0.0;
  int argmin = 0;
};

// min_i sum_j b(th_j) (V^j_{pi*_j} - V^j_{pi*_i}) at (t, s); ties go to the
// lowest type index.
RegretResult regret(const std::vector<double>& b, const TypePolicies& tp, int t, int s);

struct BeliefPoint {
  int t = 0;
  int s = 0;
  std::vector<double> b;
  double prob = 0.0;    // highest reach probability over expansion paths
  double regret = 0.0;
};

class BeliefSpace {
 public:
  std::vector<BeliefPoint> points;

  std::optional<int> find(int t, int s, const std::vector<double>& b) const;
  int add(BeliefPoint point);  // returns the point id

 private:
  static std::string key_of(int t, int s, const std::vector<double>& b);
  std::map<std::string, int> index_;
};

// Breadth-first expansion of reachable (t, s, b); a belief is kept when its
// regret clears the probability-shaped threshold
//   regret(b) > (exp(-alpha (P(b) - p)) - exp(-alpha (1 - p))) regret(b0).
// The root is always kept; children of dropped points are not expanded.
BeliefSpace build_belief_space(const TypedMdpFamily& family, const std::vector<double>& b0,
                               double min_prob, double alpha_shape);

struct PlannedColumn {
  double priced_value = 0.0;    // DP value of the root under priced rewards
  double expected_value = 0.0;  // exact unpriced E[V] of the closed-loop policy
  std::vector<std::vector<double>> expected_consumption;  // [t][r], exact
  // plan: action per in-tree point, and per-(point, next state) routing.
  std::vector<int> tree_action;
  std::vector<std::vector<int>> next_point;     // [point][s'] in-tree successor or -1
  std::vector<std::vector<int>> fallback_type;  // [point][s'] type policy when not in tree
};

// Backward DP over the truncated belief space with rewards priced by lambda;
// missing successors fall back to the best single-type policy. A final exact
// forward pass produces unbiased E[V] and E[C].
PlannedColumn bounded_belief_plan(const TypedMdpFamily& family, const BeliefSpace& space,
                                  const std::vector<std::vector<double>>& lambda,  // [t][r]
                                  const CapacitySpec& caps);

// Dense-tableau primal simplex (Bland's rule) for
//   max c.x  s.t.  A x (<= | =) b,  x >= 0.
struct LpProblem {
  std::vector<double> objective;
  std::vector<std::vector<double>> rows;
  std::vector<double> rhs;
  std::vector<char> row_type;  // 'L' for <=, 'E' for =
};

struct LpSolution {
  std::vector<double> x;
  std::vector<double> duals;  // one per row
  double objective = 0.0;
};

LpSolution simplex_solve(const LpProblem& problem);

struct MasterSolution {
  std::vector<std::vector<double>> mix;     // x[i][j] per agent/column
  std::vector<std::vector<double>> duals;   // lambda[t][r]
  std::vector<double> agent_duals;          // convexity-row duals
  double objective = 0.0;
};

// Eq-style master: pick per-agent column mixtures maximizing total expected
// value subject to per-(t, r) expected-consumption limits.
MasterSolution master_lp(const std::vector<std::vector<PlannedColumn>>& columns,
                         const CapacitySpec& caps, int horizon);

struct CgConfig {
  double reduced_cost_tolerance = 1e-7;
  double dual_tolerance = 1e-8;
  int max_iterations = 200;
  double min_prob = 0.01;    // belief-space p
  double alpha_shape = 10.0;  // belief-space alpha
};

struct CgResult {
  MasterSolution master;
  std::vector<std::vector<PlannedColumn>> columns;
  int iterations = 0;
  std::vector<double> objective_trace;
};

// Column generation: alternate the master LP with per-agent pricing until
// the duals are stationary or no column prices out.
CgResult column_generation(const std::vector<TypedMdpFamily>& families,
                           const CapacitySpec& caps, const CgConfig& config = {});

}  // namespace saferec
