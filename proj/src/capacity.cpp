#include "saferec/capacity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "saferec/error.hpp"
#include "saferec/parallel.hpp"

namespace saferec {

using nlohmann::json;

void TypedMdpFamily::validate() const {
  require(num_types >= 1 && num_states >= 1 && num_actions >= 1, "InvalidFamily",
          "need >= 1 type, state, action");
  require(horizon >= 1, "InvalidFamily", "horizon must be >= 1");
  require(initial_state >= 0 && initial_state < num_states, "InvalidFamily",
          "initial state out of range");
  require(static_cast<int>(initial_belief.size()) == num_types, "InvalidFamily",
          "initial belief size mismatch");
  double total = 0.0;
  for (double p : initial_belief) {
    require(p >= 0.0, "InvalidFamily", "belief mass must be nonnegative");
    total += p;
  }
  require(std::fabs(total - 1.0) <= 1e-9, "InvalidFamily", "initial belief must sum to 1");
  require(static_cast<int>(transitions.size()) == num_types, "InvalidFamily",
          "transition tensor type count");
  require(static_cast<int>(rewards.size()) == num_types, "InvalidFamily",
          "reward tensor type count");
  for (int th = 0; th < num_types; ++th) {
    require(static_cast<int>(transitions[th].size()) == num_states, "InvalidFamily",
            "transition states");
    require(static_cast<int>(rewards[th].size()) == num_states, "InvalidFamily",
            "reward states");
    for (int s = 0; s < num_states; ++s) {
      require(static_cast<int>(transitions[th][s].size()) == num_actions, "InvalidFamily",
              "transition actions");
      require(static_cast<int>(rewards[th][s].size()) == num_actions, "InvalidFamily",
              "reward actions");
      for (int a = 0; a < num_actions; ++a) {
        double row = 0.0;
        for (double p : transitions[th][s][a]) {
          require(p >= 0.0, "InvalidFamily", "negative transition probability");
          row += p;
        }
        require(std::fabs(row - 1.0) <= 1e-9, "InvalidFamily",
                "transition rows must sum to 1");
      }
    }
  }
}

void CapacitySpec::validate(const TypedMdpFamily& family) const {
  require(!limits.empty(), "InvalidCapacity", "need >= 1 resource");
  require(consumption.size() == limits.size(), "InvalidCapacity",
          "consumption/limits size mismatch");
  for (double limit : limits) {
    require(limit > 0.0, "InvalidCapacity", "limits must be positive");
  }
  for (const auto& per_state : consumption) {
    require(static_cast<int>(per_state.size()) == family.num_states, "InvalidCapacity",
            "consumption states");
    for (const auto& per_action : per_state) {
      require(static_cast<int>(per_action.size()) == family.num_actions, "InvalidCapacity",
              "consumption actions");
      for (double c : per_action) {
        require(c == 0.0 || c == 1.0, "InvalidCapacity", "consumption must be 0 or 1");
      }
    }
  }
}

std::vector<double> belief_update(const TypedMdpFamily& family, const std::vector<double>& b,
                                  int s, int a, int s_next) {
  require(static_cast<int>(b.size()) == family.num_types, "InvalidParameter",
          "belief size mismatch");
  std::vector<double> out(b.size());
  double total = 0.0;
  for (int th = 0; th < family.num_types; ++th) {
    out[th] = b[th] * family.transitions[th][s][a][s_next];
    total += out[th];
  }
  require(total > 0.0, "ImpossibleTransition",
          "observed transition has zero probability under the belief");
  for (double& p : out) p /= total;
  return out;
}

TypePolicies type_policies_and_cross_values(const TypedMdpFamily& family,
                                            const RewardFn& reward) {
  family.validate();
  const int h = family.horizon;
  TypePolicies tp;
  tp.policy.assign(family.num_types,
                   std::vector<std::vector<int>>(h, std::vector<int>(family.num_states, 0)));
  // Optimal policy per type by backward induction.
  for (int j = 0; j < family.num_types; ++j) {
    std::vector<double> next(family.num_states, 0.0);
    std::vector<double> current(family.num_states, 0.0);
    for (int t = h - 1; t >= 0; --t) {
      for (int s = 0; s < family.num_states; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        int best_action = 0;
        for (int a = 0; a < family.num_actions; ++a) {
          double q = reward(j, t, s, a);
          for (int sn = 0; sn < family.num_states; ++sn) {
            q += family.transitions[j][s][a][sn] * next[sn];
          }
          if (q > best + 1e-12) {
            best = q;
            best_action = a;
          }
        }
        current[s] = best;
        tp.policy[j][t][s] = best_action;
      }
      next = current;
    }
  }
  // Exact evaluation of each policy j on each true type i.
  tp.value.assign(
      family.num_types,
      std::vector<std::vector<std::vector<double>>>(
          family.num_types,
          std::vector<std::vector<double>>(h + 1, std::vector<double>(family.num_states, 0.0))));
  for (int i = 0; i < family.num_types; ++i) {
    for (int j = 0; j < family.num_types; ++j) {
      for (int t = h - 1; t >= 0; --t) {
        for (int s = 0; s < family.num_states; ++s) {
          const int a = tp.policy[j][t][s];
          double v = reward(i, t, s, a);
          for (int sn = 0; sn < family.num_states; ++sn) {
            v += family.transitions[i][s][a][sn] * tp.value[i][j][t + 1][sn];
          }
          tp.value[i][j][t][s] = v;
        }
      }
    }
  }
  return tp;
}

TypePolicies type_policies_and_cross_values(const TypedMdpFamily& family) {
  return type_policies_and_cross_values(
      family, [&](int th, int, int s, int a) { return family.rewards[th][s][a]; });
}

RegretResult regret(const std::vector<double>& b, const TypePolicies& tp, int t, int s) {
  const int num_types = static_cast<int>(tp.policy.size());
  RegretResult out;
  out.value = std::numeric_limits<double>::infinity();
  for (int i = 0; i < num_types; ++i) {
    double loss = 0.0;
    for (int j = 0; j < num_types; ++j) {
      loss += b[j] * (tp.value[j][j][t][s] - tp.value[j][i][t][s]);
    }
    if (loss < out.value - 1e-15) {
      out.value = loss;
      out.argmin = i;
    }
  }
  out.value = std::max(out.value, 0.0);  // clear -0 and rounding dust
  return out;
}

std::string BeliefSpace::key_of(int t, int s, const std::vector<double>& b) {
  std::ostringstream key;
  key << t << '|' << s;
  for (double p : b) {
    key << '|' << static_cast<long long>(std::llround(p * 1e9));
  }
  return key.str();
}

std::optional<int> BeliefSpace::find(int t, int s, const std::vector<double>& b) const {
  const auto it = index_.find(key_of(t, s, b));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int BeliefSpace::add(BeliefPoint point) {
  const std::string key = key_of(point.t, point.s, point.b);
  const int id = static_cast<int>(points.size());
  points.push_back(std::move(point));
  index_[key] = id;
  return id;
}

BeliefSpace build_belief_space(const TypedMdpFamily& family, const std::vector<double>& b0,
                               double min_prob, double alpha_shape) {
  family.validate();
  const TypePolicies tp = type_policies_and_cross_values(family);
  const double root_regret = regret(b0, tp, 0, family.initial_state).value;

  const auto threshold = [&](double prob) {
    return (std::exp(-alpha_shape * (prob - min_prob)) -
            std::exp(-alpha_shape * (1.0 - min_prob))) *
           root_regret;
  };

  BeliefSpace space;
  BeliefPoint root;
  root.t = 0;
  root.s = family.initial_state;
  root.b = b0;
  root.prob = 1.0;
  root.regret = root_regret;
  space.add(root);  // the root is kept unconditionally

  std::vector<int> frontier = {0};
  for (int t = 0; t + 1 < family.horizon && !frontier.empty(); ++t) {
    // Gather candidate children with their best reach probability first, so
    // the keep test sees each belief's final probability.
    struct Candidate {
      int s = 0;
      std::vector<double> b;
      double prob = 0.0;
    };
    std::map<std::string, Candidate> candidates;
    for (int id : frontier) {
      const BeliefPoint point = space.points[id];
      for (int a = 0; a < family.num_actions; ++a) {
        for (int sn = 0; sn < family.num_states; ++sn) {
          double evidence = 0.0;
          for (int th = 0; th < family.num_types; ++th) {
            evidence += point.b[th] * family.transitions[th][point.s][a][sn];
          }
          if (evidence <= 0.0) continue;
          const std::vector<double> b_next = belief_update(family, point.b, point.s, a, sn);
          std::ostringstream key;
          key << sn;
          for (double p : b_next) key << '|' << static_cast<long long>(std::llround(p * 1e9));
          auto& candidate = candidates[key.str()];
          if (candidate.b.empty()) {
            candidate.s = sn;
            candidate.b = b_next;
          }
          candidate.prob = std::max(candidate.prob, point.prob * evidence);
        }
      }
    }
    frontier.clear();
    for (auto& [key, candidate] : candidates) {
      const RegretResult r = regret(candidate.b, tp, t + 1, candidate.s);
      if (r.value > threshold(candidate.prob)) {
        BeliefPoint point;
        point.t = t + 1;
        point.s = candidate.s;
        point.b = candidate.b;
        point.prob = candidate.prob;
        point.regret = r.value;
        frontier.push_back(space.add(std::move(point)));
      }
    }
  }
  return space;
}

PlannedColumn bounded_belief_plan(const TypedMdpFamily& family, const BeliefSpace& space,
                                  const std::vector<std::vector<double>>& lambda,
                                  const CapacitySpec& caps) {
  family.validate();
  caps.validate(family);
  const int h = family.horizon;
  const int num_resources = caps.num_resources();
  require(static_cast<int>(lambda.size()) == h, "InvalidParameter",
          "lambda must have one row per time step");
  for (const auto& row : lambda) {
    require(static_cast<int>(row.size()) == num_resources, "InvalidParameter",
            "lambda row size mismatch");
    for (double v : row) require(v >= 0.0, "InvalidParameter", "duals must be >= 0");
  }

  const auto priced = [&](int th, int t, int s, int a) {
    double r = family.rewards[th][s][a];
    for (int res = 0; res < num_resources; ++res) {
      r -= lambda[t][res] * caps.consumption[res][s][a];
    }
    return r;
  };
  const TypePolicies tp = type_policies_and_cross_values(family, priced);

  const int num_points = static_cast<int>(space.points.size());
  PlannedColumn plan;
  plan.tree_action.assign(num_points, 0);
  plan.next_point.assign(num_points, std::vector<int>(family.num_states, -1));
  plan.fallback_type.assign(num_points, std::vector<int>(family.num_states, -1));
  std::vector<double> value(num_points, 0.0);

  // Backward over belief points, deepest first.
  std::vector<int> order(num_points);
  for (int i = 0; i < num_points; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return space.points[a].t > space.points[b].t;
  });

  for (int id : order) {
    const BeliefPoint& point = space.points[id];
    double best_value = -std::numeric_limits<double>::infinity();
    int best_action = 0;
    std::vector<int> best_next(family.num_states, -1);
    std::vector<int> best_fallback(family.num_states, -1);
    for (int a = 0; a < family.num_actions; ++a) {
      double q = 0.0;
      for (int th = 0; th < family.num_types; ++th) {
        q += point.b[th] * priced(th, point.t, point.s, a);
      }
      std::vector<int> next(family.num_states, -1);
      std::vector<int> fallback(family.num_states, -1);
      for (int sn = 0; sn < family.num_states; ++sn) {
        double evidence = 0.0;
        for (int th = 0; th < family.num_types; ++th) {
          evidence += point.b[th] * family.transitions[th][point.s][a][sn];
        }
        if (evidence <= 0.0) continue;
        if (point.t + 1 >= h) continue;  // horizon reached; no continuation value
        const std::vector<double> b_next = belief_update(family, point.b, point.s, a, sn);
        const std::optional<int> child = space.find(point.t + 1, sn, b_next);
        if (child) {
          next[sn] = *child;
          q += evidence * value[*child];
        } else {
          // Missing point: adopt the best single-type policy from here on.
          double best_q = -std::numeric_limits<double>::infinity();
          int best_type = 0;
          for (int j = 0; j < family.num_types; ++j) {
            double qj = 0.0;
            for (int th = 0; th < family.num_types; ++th) {
              qj += b_next[th] * tp.value[th][j][point.t + 1][sn];
            }
            if (qj > best_q + 1e-15) {
              best_q = qj;
              best_type = j;
            }
          }
          fallback[sn] = best_type;
          q += evidence * best_q;
        }
      }
      if (q > best_value + 1e-15) {
        best_value = q;
        best_action = a;
        best_next = next;
        best_fallback = fallback;
      }
    }
    value[id] = best_value;
    plan.tree_action[id] = best_action;
    plan.next_point[id] = std::move(best_next);
    plan.fallback_type[id] = std::move(best_fallback);
  }
  plan.priced_value = value[0];

  // Exact forward propagation of the closed-loop process for unbiased E[V]
  // and E[C]. Mass is tracked per (type, in-tree point) and per
  // (type, fallback policy, state).
  plan.expected_consumption.assign(h, std::vector<double>(num_resources, 0.0));
  std::map<std::pair<int, int>, double> tree_mass;      // (point, type) -> mass
  std::map<std::tuple<int, int, int>, double> mdp_mass;  // (type, policy j, state) -> mass
  for (int th = 0; th < family.num_types; ++th) {
    if (space.points[0].b[th] > 0.0) tree_mass[{0, th}] = space.points[0].b[th];
  }
  double expected_value = 0.0;
  for (int t = 0; t < h; ++t) {
    std::map<std::pair<int, int>, double> next_tree;
    std::map<std::tuple<int, int, int>, double> next_mdp;
    for (const auto& [key, mass] : tree_mass) {
      const auto& [id, th] = key;
      const BeliefPoint& point = space.points[id];
      const int a = plan.tree_action[id];
      expected_value += mass * family.rewards[th][point.s][a];
      for (int res = 0; res < num_resources; ++res) {
        plan.expected_consumption[t][res] += mass * caps.consumption[res][point.s][a];
      }
      if (t + 1 >= h) continue;
      for (int sn = 0; sn < family.num_states; ++sn) {
        const double p = family.transitions[th][point.s][a][sn];
        if (p <= 0.0) continue;
        if (plan.next_point[id][sn] >= 0) {
          next_tree[{plan.next_point[id][sn], th}] += mass * p;
        } else {
          require(plan.fallback_type[id][sn] >= 0, "InternalError",
                  "missing routing for a reachable successor");
          next_mdp[{th, plan.fallback_type[id][sn], sn}] += mass * p;
        }
      }
    }
    for (const auto& [key, mass] : mdp_mass) {
      const auto& [th, j, s] = key;
      const int a = tp.policy[j][t][s];
      expected_value += mass * family.rewards[th][s][a];
      for (int res = 0; res < num_resources; ++res) {
        plan.expected_consumption[t][res] += mass * caps.consumption[res][s][a];
      }
      if (t + 1 >= h) continue;
      for (int sn = 0; sn < family.num_states; ++sn) {
        const double p = family.transitions[th][s][a][sn];
        if (p > 0.0) next_mdp[{th, j, sn}] += mass * p;
      }
    }
    tree_mass = std::move(next_tree);
    mdp_mass = std::move(next_mdp);
  }
  plan.expected_value = expected_value;
  return plan;
}

namespace {

constexpr double kSimplexTol = 1e-9;

}  // namespace

LpSolution simplex_solve(const LpProblem& problem) {
  const int num_vars = static_cast<int>(problem.objective.size());
  const int num_rows = static_cast<int>(problem.rows.size());
  require(static_cast<int>(problem.rhs.size()) == num_rows &&
              static_cast<int>(problem.row_type.size()) == num_rows,
          "InvalidLp", "row metadata sizes must match");
  for (double b : problem.rhs) require(b >= 0.0, "InvalidLp", "rhs must be nonnegative");

  // Column layout: [structural | slack (per <= row) | artificial (per = row)].
  int num_slacks = 0;
  int num_artificials = 0;
  for (char type : problem.row_type) {
    require(type == 'L' || type == 'E', "InvalidLp", "row type must be L or E");
    if (type == 'L') ++num_slacks;
    if (type == 'E') ++num_artificials;
  }
  const int total = num_vars + num_slacks + num_artificials;

  std::vector<std::vector<double>> tab(num_rows, std::vector<double>(total + 1, 0.0));
  std::vector<int> basis(num_rows, -1);
  std::vector<int> slack_col(num_rows, -1);
  std::vector<int> artificial_col(num_rows, -1);
  {
    int next_slack = num_vars;
    int next_artificial = num_vars + num_slacks;
    for (int r = 0; r < num_rows; ++r) {
      require(static_cast<int>(problem.rows[r].size()) == num_vars, "InvalidLp",
              "row length mismatch");
      for (int c = 0; c < num_vars; ++c) tab[r][c] = problem.rows[r][c];
      tab[r][total] = problem.rhs[r];
      if (problem.row_type[r] == 'L') {
        slack_col[r] = next_slack++;
        tab[r][slack_col[r]] = 1.0;
        basis[r] = slack_col[r];
      } else {
        artificial_col[r] = next_artificial++;
        tab[r][artificial_col[r]] = 1.0;
        basis[r] = artificial_col[r];
      }
    }
  }

  const auto pivot = [&](int row, int col) {
    const double p = tab[row][col];
    for (double& v : tab[row]) v /= p;
    for (int r = 0; r < num_rows; ++r) {
      if (r == row || std::fabs(tab[r][col]) < 1e-15) continue;
      const double f = tab[r][col];
      for (int c = 0; c <= total; ++c) tab[r][c] -= f * tab[row][c];
    }
    basis[row] = col;
  };

  // One simplex phase: maximize cost over allowed columns with Bland's rule.
  const auto run_phase = [&](const std::vector<double>& cost,
                             const std::vector<bool>& allowed) {
    for (;;) {
      // Reduced costs z_j - c_j from the current basis.
      std::vector<double> y(num_rows, 0.0);
      int entering = -1;
      for (int c = 0; c < total; ++c) {
        if (!allowed[c]) continue;
        bool in_basis = false;
        for (int r = 0; r < num_rows; ++r) {
          if (basis[r] == c) {
            in_basis = true;
            break;
          }
        }
        if (in_basis) continue;
        double zj = 0.0;
        for (int r = 0; r < num_rows; ++r) zj += cost[basis[r]] * tab[r][c];
        if (zj - cost[c] < -kSimplexTol) {  // improving column; Bland: lowest index
          entering = c;
          break;
        }
      }
      if (entering < 0) return;
      int leaving = -1;
      double best_ratio = 0.0;
      for (int r = 0; r < num_rows; ++r) {
        if (tab[r][entering] > kSimplexTol) {
          const double ratio = tab[r][total] / tab[r][entering];
          if (leaving < 0 || ratio < best_ratio - 1e-12 ||
              (std::fabs(ratio - best_ratio) <= 1e-12 && basis[r] < basis[leaving])) {
            leaving = r;
            best_ratio = ratio;
          }
        }
      }
      require(leaving >= 0, "UnboundedLp", "LP is unbounded");
      pivot(leaving, entering);
    }
  };

  std::vector<bool> allowed(total, true);
  if (num_artificials > 0) {
    std::vector<double> phase1_cost(total, 0.0);
    for (int r = 0; r < num_rows; ++r) {
      if (artificial_col[r] >= 0) phase1_cost[artificial_col[r]] = -1.0;
    }
    run_phase(phase1_cost, allowed);
    double infeasibility = 0.0;
    for (int r = 0; r < num_rows; ++r) {
      if (basis[r] >= num_vars + num_slacks) infeasibility += tab[r][total];
    }
    require(infeasibility <= 1e-7, "Infeasible", "LP has no feasible point");
    // Drive lingering artificial basics out where possible.
    for (int r = 0; r < num_rows; ++r) {
      if (basis[r] < num_vars + num_slacks) continue;
      for (int c = 0; c < num_vars + num_slacks; ++c) {
        if (std::fabs(tab[r][c]) > kSimplexTol) {
          pivot(r, c);
          break;
        }
      }
    }
  }

  std::vector<double> cost(total, 0.0);
  for (int c = 0; c < num_vars; ++c) cost[c] = problem.objective[c];
  for (int c = num_vars + num_slacks; c < total; ++c) allowed[c] = false;
  run_phase(cost, allowed);

  LpSolution solution;
  solution.x.assign(num_vars, 0.0);
  for (int r = 0; r < num_rows; ++r) {
    if (basis[r] < num_vars) solution.x[basis[r]] = tab[r][total];
  }
  solution.objective = 0.0;
  for (int c = 0; c < num_vars; ++c) solution.objective += problem.objective[c] * solution.x[c];
  // Row duals y = c_B B^{-1}: read off the slack / artificial unit columns.
  solution.duals.assign(num_rows, 0.0);
  for (int r = 0; r < num_rows; ++r) {
    const int unit = problem.row_type[r] == 'L' ? slack_col[r] : artificial_col[r];
    double zj = 0.0;
    for (int rr = 0; rr < num_rows; ++rr) zj += cost[basis[rr]] * tab[rr][unit];
    solution.duals[r] = zj;
  }
  return solution;
}

MasterSolution master_lp(const std::vector<std::vector<PlannedColumn>>& columns,
                         const CapacitySpec& caps, int horizon) {
  const int num_agents = static_cast<int>(columns.size());
  require(num_agents >= 1, "InvalidParameter", "master needs >= 1 agent");
  for (const auto& agent_columns : columns) {
    require(!agent_columns.empty(), "InvalidParameter", "every agent needs >= 1 column");
  }
  const int num_resources = caps.num_resources();

  LpProblem lp;
  std::vector<std::pair<int, int>> var_of;  // (agent, column) per LP variable
  for (int i = 0; i < num_agents; ++i) {
    for (int j = 0; j < static_cast<int>(columns[i].size()); ++j) {
      lp.objective.push_back(columns[i][j].expected_value);
      var_of.emplace_back(i, j);
    }
  }
  const int num_vars = static_cast<int>(lp.objective.size());
  // Capacity rows: one per (t, r).
  for (int t = 0; t < horizon; ++t) {
    for (int res = 0; res < num_resources; ++res) {
      std::vector<double> row(num_vars, 0.0);
      for (int v = 0; v < num_vars; ++v) {
        const auto& [i, j] = var_of[v];
        row[v] = columns[i][j].expected_consumption[t][res];
      }
      lp.rows.push_back(std::move(row));
      lp.rhs.push_back(caps.limits[res]);
      lp.row_type.push_back('L');
    }
  }
  // Convexity rows: each agent's mixture sums to one.
  for (int i = 0; i < num_agents; ++i) {
    std::vector<double> row(num_vars, 0.0);
    for (int v = 0; v < num_vars; ++v) row[v] = var_of[v].first == i ? 1.0 : 0.0;
    lp.rows.push_back(std::move(row));
    lp.rhs.push_back(1.0);
    lp.row_type.push_back('E');
  }

  const LpSolution lp_solution = simplex_solve(lp);
  MasterSolution master;
  master.objective = lp_solution.objective;
  master.mix.resize(num_agents);
  for (int i = 0; i < num_agents; ++i) {
    master.mix[i].assign(columns[i].size(), 0.0);
  }
  for (int v = 0; v < num_vars; ++v) {
    const auto& [i, j] = var_of[v];
    master.mix[i][j] = lp_solution.x[v];
  }
  master.duals.assign(horizon, std::vector<double>(num_resources, 0.0));
  for (int t = 0; t < horizon; ++t) {
    for (int res = 0; res < num_resources; ++res) {
      // Capacity duals are >= 0 up to simplex tolerance.
      master.duals[t][res] = std::max(0.0, lp_solution.duals[t * num_resources + res]);
    }
  }
  master.agent_duals.assign(num_agents, 0.0);
  for (int i = 0; i < num_agents; ++i) {
    master.agent_duals[i] = lp_solution.duals[horizon * num_resources + i];
  }
  return master;
}

namespace {

// Seed column: the constant policy on the action with the least consumption,
// evaluated exactly per agent. Keeps the first master feasible.
PlannedColumn seed_column(const TypedMdpFamily& family, const CapacitySpec& caps) {
  int best_action = 0;
  double best_load = std::numeric_limits<double>::infinity();
  for (int a = 0; a < family.num_actions; ++a) {
    double load = 0.0;
    for (int res = 0; res < caps.num_resources(); ++res) {
      for (int s = 0; s < family.num_states; ++s) load += caps.consumption[res][s][a];
    }
    if (load < best_load) {
      best_load = load;
      best_action = a;
    }
  }
  PlannedColumn column;
  column.expected_consumption.assign(family.horizon,
                                     std::vector<double>(caps.num_resources(), 0.0));
  // Forward evaluation of the constant policy, exact over (type, state).
  std::vector<std::vector<double>> mass(
      family.num_types, std::vector<double>(family.num_states, 0.0));
  for (int th = 0; th < family.num_types; ++th) {
    mass[th][family.initial_state] = family.initial_belief[th];
  }
  double value = 0.0;
  for (int t = 0; t < family.horizon; ++t) {
    std::vector<std::vector<double>> next(
        family.num_types, std::vector<double>(family.num_states, 0.0));
    for (int th = 0; th < family.num_types; ++th) {
      for (int s = 0; s < family.num_states; ++s) {
        const double m = mass[th][s];
        if (m <= 0.0) continue;
        value += m * family.rewards[th][s][best_action];
        for (int res = 0; res < caps.num_resources(); ++res) {
          column.expected_consumption[t][res] += m * caps.consumption[res][s][best_action];
        }
        for (int sn = 0; sn < family.num_states; ++sn) {
          next[th][sn] += m * family.transitions[th][s][best_action][sn];
        }
      }
    }
    mass = std::move(next);
  }
  column.expected_value = value;
  column.priced_value = value;
  return column;
}

bool same_column(const PlannedColumn& a, const PlannedColumn& b) {
  if (std::fabs(a.expected_value - b.expected_value) > 1e-12) return false;
  for (std::size_t t = 0; t < a.expected_consumption.size(); ++t) {
    for (std::size_t r = 0; r < a.expected_consumption[t].size(); ++r) {
      if (std::fabs(a.expected_consumption[t][r] - b.expected_consumption[t][r]) > 1e-12) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace

CgResult column_generation(const std::vector<TypedMdpFamily>& families,
                           const CapacitySpec& caps, const CgConfig& config) {
  const int num_agents = static_cast<int>(families.size());
  require(num_agents >= 1, "InvalidParameter", "column generation needs >= 1 agent");
  for (const TypedMdpFamily& family : families) {
    family.validate();
    caps.validate(family);
    require(family.horizon == families[0].horizon, "InvalidParameter",
            "agents must share the horizon");
  }
  const int horizon = families[0].horizon;

  // Belief spaces are built once per agent against the unpriced model.
  std::vector<BeliefSpace> spaces(num_agents);
  parallel_for(static_cast<std::size_t>(num_agents), [&](std::size_t i) {
    spaces[i] = build_belief_space(families[i], families[i].initial_belief, config.min_prob,
                                   config.alpha_shape);
  });

  CgResult result;
  result.columns.resize(num_agents);
  for (int i = 0; i < num_agents; ++i) {
    result.columns[i].push_back(seed_column(families[i], caps));
  }
  {
    // The seed columns must already satisfy the caps, otherwise no master
    // over these columns can be feasible.
    std::vector<double> load(caps.num_resources(), 0.0);
    for (int t = 0; t < horizon; ++t) {
      for (int res = 0; res < caps.num_resources(); ++res) {
        double total = 0.0;
        for (int i = 0; i < num_agents; ++i) {
          total += result.columns[i][0].expected_consumption[t][res];
        }
        require(total <= caps.limits[res] + 1e-9, "InfeasibleSeed",
                "the least-consumption policies already exceed a capacity limit");
      }
    }
    (void)load;
  }

  std::vector<std::vector<double>> previous_duals;
  for (int iteration = 1; iteration <= config.max_iterations; ++iteration) {
    result.master = master_lp(result.columns, caps, horizon);
    result.objective_trace.push_back(result.master.objective);
    result.iterations = iteration;

    // Stationary duals mean the Lagrangian prices settled.
    if (!previous_duals.empty()) {
      double max_change = 0.0;
      for (int t = 0; t < horizon; ++t) {
        for (int res = 0; res < caps.num_resources(); ++res) {
          max_change = std::max(max_change,
                                std::fabs(result.master.duals[t][res] - previous_duals[t][res]));
        }
      }
      if (max_change <= config.dual_tolerance) return result;
    }
    previous_duals = result.master.duals;

    std::vector<PlannedColumn> priced(num_agents);
    parallel_for(static_cast<std::size_t>(num_agents), [&](std::size_t i) {
      priced[i] = bounded_belief_plan(families[i], spaces[i], result.master.duals, caps);
    });
    bool added = false;
    for (int i = 0; i < num_agents; ++i) {
      const double reduced_cost = priced[i].priced_value - result.master.agent_duals[i];
      if (reduced_cost <= config.reduced_cost_tolerance) continue;
      bool duplicate = false;
      for (const PlannedColumn& existing : result.columns[i]) {
        if (same_column(existing, priced[i])) {
          duplicate = true;
          break;
        }
      }
      if (!duplicate) {
        result.columns[i].push_back(priced[i]);
        added = true;
      }
    }
    if (!added) return result;
  }
  fail("IterationCap", "column generation exceeded the iteration cap");
}

namespace {

json family_to_json(const TypedMdpFamily& family) {
  json j;
  j["types"] = family.num_types;
  j["states"] = family.num_states;
  j["actions"] = family.num_actions;
  j["horizon"] = family.horizon;
  j["s0"] = family.initial_state;
  j["b0"] = family.initial_belief;
  j["transitions"] = family.transitions;
  j["rewards"] = family.rewards;
  return j;
}

TypedMdpFamily family_from_json(const json& j) {
  TypedMdpFamily family;
  family.num_types = j.at("types").get<int>();
  family.num_states = j.at("states").get<int>();
  family.num_actions = j.at("actions").get<int>();
  family.horizon = j.at("horizon").get<int>();
  family.initial_state = j.at("s0").get<int>();
  family.initial_belief = j.at("b0").get<std::vector<double>>();
  family.transitions =
      j.at("transitions").get<std::vector<std::vector<std::vector<std::vector<double>>>>>();
  family.rewards = j.at("rewards").get<std::vector<std::vector<std::vector<double>>>>();
  family.validate();
  return family;
}

}  // namespace

std::string TypedMdpFamily::to_json_string() const { return family_to_json(*this).dump(); }

TypedMdpFamily TypedMdpFamily::from_json_string(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  require(!j.is_discarded(), "ParseError", "malformed family JSON");
  return family_from_json(j);
}

TypedMdpFamily TypedMdpFamily::load(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "IoError", "cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_string(text);
}

CapacitySpec CapacitySpec::load(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "IoError", "cannot open " + path);
  json j = json::parse(in, nullptr, false);
  require(!j.is_discarded(), "ParseError", "malformed capacity JSON in " + path);
  CapacitySpec caps;
  caps.consumption = j.at("consumption").get<std::vector<std::vector<std::vector<double>>>>();
  caps.limits = j.at("limits").get<std::vector<double>>();
  return caps;
}

}  // namespace saferec
