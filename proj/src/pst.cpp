#include "saferec/pst.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "saferec/error.hpp"

namespace saferec {

using nlohmann::json;

namespace {

bool suffix_less(const Suffix& a, const Suffix& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

Suffix parent_of(const Suffix& suffix) {
  return Suffix(suffix.begin() + 1, suffix.end());
}

double l1_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += std::fabs(a[i] - b[i]);
  return total;
}

}  // namespace

int Pst::symbol_index(int symbol) const {
  const auto it = std::lower_bound(alphabet_.begin(), alphabet_.end(), symbol);
  require(it != alphabet_.end() && *it == symbol, "UnknownSymbol",
          "symbol " + std::to_string(symbol) + " is not in the alphabet");
  return static_cast<int>(it - alphabet_.begin());
}

const PstNode& Pst::node(const Suffix& suffix) const {
  const auto it = nodes_.find(suffix);
  require(it != nodes_.end(), "UnknownSuffix", "suffix is not stored in the tree");
  return it->second;
}

std::vector<const PstNode*> Pst::nodes_in_order() const {
  std::vector<const PstNode*> out;
  out.reserve(nodes_.size());
  for (const auto& [suffix, node] : nodes_) out.push_back(&node);
  std::sort(out.begin(), out.end(),
            [](const PstNode* a, const PstNode* b) { return suffix_less(a->suffix, b->suffix); });
  return out;
}

Suffix Pst::longest_suffix(const Suffix& history) const {
  const std::size_t depth = std::min<std::size_t>(history.size(), max_depth_);
  for (std::size_t len = depth; len > 0; --len) {
    Suffix tail(history.end() - len, history.end());
    if (nodes_.count(tail)) return tail;
  }
  return {};
}

Suffix Pst::extend(const Suffix& context, int symbol) const {
  Suffix history = context;
  history.push_back(symbol);
  return longest_suffix(history);
}

const std::vector<double>& Pst::distribution(const Suffix& suffix) const {
  return node(suffix).distribution;
}

Pst Pst::fit(const std::vector<std::vector<int>>& sequences, int max_depth,
             std::size_t min_count, double prune_epsilon) {
  require(!sequences.empty(), "EmptyCorpus", "pst_fit needs at least one sequence");
  require(max_depth >= 0, "InvalidParameter", "max_depth must be >= 0");
  require(min_count >= 1, "InvalidParameter", "min_count must be >= 1");
  require(prune_epsilon >= 0.0, "InvalidParameter", "prune_epsilon must be >= 0");

  Pst pst;
  pst.max_depth_ = max_depth;
  pst.min_count_ = min_count;
  {
    std::vector<int> symbols;
    for (const auto& seq : sequences) {
      require(!seq.empty(), "EmptyCorpus", "sequences must be nonempty");
      symbols.insert(symbols.end(), seq.begin(), seq.end());
    }
    std::sort(symbols.begin(), symbols.end());
    symbols.erase(std::unique(symbols.begin(), symbols.end()), symbols.end());
    pst.alphabet_ = std::move(symbols);
  }
  const int num_symbols = pst.alphabet_size();

  // Suffix counts per depth; next-symbol counts per suffix.
  std::map<Suffix, std::vector<std::size_t>> counts;
  for (int depth = 0; depth <= max_depth; ++depth) {
    for (const auto& seq : sequences) {
      for (std::size_t t = depth; t < seq.size(); ++t) {
        Suffix suffix(seq.begin() + (t - depth), seq.begin() + t);
        auto& next_counts = counts[suffix];
        if (next_counts.empty()) next_counts.assign(num_symbols, 0);
        ++next_counts[pst.symbol_index(seq[t])];
      }
    }
  }

  for (const auto& [suffix, next_counts] : counts) {
    std::size_t total = 0;
    for (std::size_t c : next_counts) total += c;
    if (!suffix.empty() && total < min_count) continue;
    PstNode node;
    node.suffix = suffix;
    node.count = total;
    node.distribution.resize(num_symbols);
    for (int s = 0; s < num_symbols; ++s) {
      node.distribution[s] = (static_cast<double>(next_counts[s]) + 1.0) /
                             (static_cast<double>(total) + num_symbols);
    }
    pst.nodes_[suffix] = std::move(node);
  }
  // min_count filtering preserves closure automatically (a parent occurs at
  // least as often as any of its extensions), so only pruning needs care.

  if (prune_epsilon > 0.0) {
    bool changed = true;
    while (changed) {
      changed = false;
      std::vector<Suffix> removable;
      for (const auto& [suffix, node] : pst.nodes_) {
        if (suffix.empty()) continue;
        bool has_child = false;
        for (const auto& [other, _] : pst.nodes_) {
          if (other.size() == suffix.size() + 1 && parent_of(other) == suffix) {
            has_child = true;
            break;
          }
        }
        if (has_child) continue;
        const auto parent_it = pst.nodes_.find(parent_of(suffix));
        if (parent_it == pst.nodes_.end()) continue;
        if (l1_distance(node.distribution, parent_it->second.distribution) <= prune_epsilon) {
          removable.push_back(suffix);
        }
      }
      for (const Suffix& suffix : removable) {
        pst.nodes_.erase(suffix);
        changed = true;
      }
    }
  }
  return pst;
}

Pst Pst::from_nodes(std::vector<int> alphabet, std::vector<PstNode> nodes, int max_depth,
                    std::size_t min_count) {
  require(!alphabet.empty(), "InvalidPst", "alphabet must be nonempty");
  require(std::is_sorted(alphabet.begin(), alphabet.end()), "InvalidPst",
          "alphabet must be sorted");
  Pst pst;
  pst.alphabet_ = std::move(alphabet);
  pst.max_depth_ = max_depth;
  pst.min_count_ = min_count;
  for (PstNode& node : nodes) {
    require(static_cast<int>(node.distribution.size()) == pst.alphabet_size(), "InvalidPst",
            "node distribution size must match the alphabet");
    double total = 0.0;
    for (double p : node.distribution) {
      require(p >= 0.0, "InvalidPst", "probabilities must be nonnegative");
      total += p;
    }
    require(std::fabs(total - 1.0) <= 1e-12, "InvalidPst",
            "node distribution must sum to 1");
    require(static_cast<int>(node.suffix.size()) <= max_depth, "InvalidPst",
            "suffix longer than max_depth");
    pst.nodes_[node.suffix] = std::move(node);
  }
  require(pst.nodes_.count(Suffix{}) > 0, "InvalidPst", "the root (empty suffix) is required");
  for (const auto& [suffix, node] : pst.nodes_) {
    if (suffix.empty()) continue;
    require(pst.nodes_.count(parent_of(suffix)) > 0, "InvalidPst",
            "tree closure violated: missing parent suffix");
  }
  return pst;
}

double pst_loglik(const Pst& pst, const std::vector<std::vector<int>>& sequences) {
  require(!sequences.empty(), "EmptyCorpus", "log likelihood needs sequences");
  double loglik = 0.0;
  for (const auto& seq : sequences) {
    for (std::size_t t = 0; t < seq.size(); ++t) {
      const Suffix history(seq.begin(), seq.begin() + t);
      const Suffix context = pst.longest_suffix(history);
      loglik += std::log(pst.distribution(context)[pst.symbol_index(seq[t])]);
    }
  }
  return loglik;
}

std::size_t pst_num_parameters(const Pst& pst) {
  return pst.num_nodes() * static_cast<std::size_t>(pst.alphabet_size() - 1);
}

double aicc(double loglik, std::size_t k, std::size_t n) {
  require(n > k + 1, "AiccUndefined", "AICc needs n > k + 1");
  const double kd = static_cast<double>(k);
  return 2.0 * kd - 2.0 * loglik + 2.0 * kd * (kd + 1.0) / static_cast<double>(n - k - 1);
}

std::vector<double> perturb_dynamics(const Pst& pst, const Suffix& suffix, int action_symbol,
                                     double theta) {
  require(theta >= 1.0, "InvalidParameter", "theta must be >= 1");
  require(pst.alphabet_size() >= 2, "InvalidPst",
          "perturbation needs an alphabet of >= 2 symbols");
  const std::vector<double>& passive = pst.distribution(suffix);
  if (theta == 1.0) return passive;  // exact identity, bit for bit

  const int a = pst.symbol_index(action_symbol);
  const double p_a = passive[a];
  std::vector<double> out(passive.size());
  const double boosted = std::pow(p_a, 1.0 / theta);
  const double z = (1.0 - p_a) / (1.0 - boosted);
  for (std::size_t s = 0; s < passive.size(); ++s) {
    out[s] = static_cast<int>(s) == a ? boosted : passive[s] / z;
  }
  return out;
}

int PstMdp::state_index(const Suffix& suffix) const {
  const auto it = std::lower_bound(states.begin(), states.end(), suffix, suffix_less);
  require(it != states.end() && *it == suffix, "UnknownSuffix", "suffix is not an MDP state");
  return static_cast<int>(it - states.begin());
}

PstMdp build_mdp(const Pst& pst, double theta, const PoiRewardSpec& rewards,
                 const DiscountSpec& disc) {
  validate(disc);
  require(static_cast<int>(rewards.desirability.size()) == pst.alphabet_size(),
          "InvalidParameter", "desirability must cover the alphabet");

  PstMdp mdp;
  mdp.num_symbols = pst.alphabet_size();
  mdp.theta = theta;
  mdp.gamma = disc.gamma;
  for (const PstNode* node : pst.nodes_in_order()) mdp.states.push_back(node->suffix);

  const int num_states = mdp.num_states();
  const int num_actions = mdp.num_actions();
  mdp.transitions.assign(num_states,
                         std::vector<std::vector<double>>(num_actions,
                                                          std::vector<double>(num_states, 0.0)));
  mdp.rewards.assign(num_states, std::vector<double>(num_actions, 0.0));

  for (int x = 0; x < num_states; ++x) {
    const Suffix& context = mdp.states[x];
    // Successor contexts are shared by all actions.
    std::vector<int> successor(mdp.num_symbols);
    for (int s = 0; s < mdp.num_symbols; ++s) {
      successor[s] = mdp.state_index(pst.extend(context, pst.alphabet()[s]));
    }
    for (int a = 0; a < num_actions; ++a) {
      const bool null_action = a == mdp.null_action();
      const std::vector<double> next =
          null_action ? pst.distribution(context)
                      : perturb_dynamics(pst, context, pst.alphabet()[a], theta);
      double expected_desirability = 0.0;
      for (int s = 0; s < mdp.num_symbols; ++s) {
        mdp.transitions[x][a][successor[s]] += next[s];
        expected_desirability += next[s] * rewards.desirability[s];
      }
      double cost = 0.0;
      if (!null_action) {
        const bool already_seen =
            std::find(context.begin(), context.end(), pst.alphabet()[a]) != context.end();
        cost = (rewards.action_cost + (already_seen ? rewards.fatigue_cost : 0.0)) *
               rewards.desirability[a];
      }
      mdp.rewards[x][a] = expected_desirability - cost;
    }
  }
  return mdp;
}

namespace {

// Dense linear solve of (I - gamma P_pi) v = r_pi.
std::vector<double> evaluate_policy(const PstMdp& mdp, const std::vector<int>& policy) {
  const int n = mdp.num_states();
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  std::vector<double> b(n, 0.0);
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) {
      a[x][y] = (x == y ? 1.0 : 0.0) - mdp.gamma * mdp.transitions[x][policy[x]][y];
    }
    b[x] = mdp.rewards[x][policy[x]];
  }
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    }
    require(std::fabs(a[pivot][col]) > 1e-12, "SingularEvaluation",
            "policy evaluation system is singular");
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = b[i] / a[i][i];
  return v;
}

}  // namespace

PolicyIterationResult policy_iteration(const PstMdp& mdp) {
  require(mdp.gamma < 1.0, "InvalidDiscount", "policy iteration needs gamma < 1");
  const int n = mdp.num_states();
  PolicyIterationResult result;
  result.policy.assign(n, mdp.null_action());

  for (int iter = 0; iter < 1000; ++iter) {
    result.values = evaluate_policy(mdp, result.policy);
    bool stable = true;
    for (int x = 0; x < n; ++x) {
      int best_action = 0;
      double best_q = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < mdp.num_actions(); ++a) {
        double q = mdp.rewards[x][a];
        for (int y = 0; y < n; ++y) q += mdp.gamma * mdp.transitions[x][a][y] * result.values[y];
        if (q > best_q + 1e-12) {
          best_q = q;
          best_action = a;
        }
      }
      if (best_action != result.policy[x]) {
        result.policy[x] = best_action;
        stable = false;
      }
    }
    result.iterations = iter + 1;
    if (stable) return result;
  }
  fail("NoConvergence", "policy iteration did not stabilize");
}

LipschitzReport lipschitz_check(const Pst& pst,
                                const std::vector<std::pair<double, double>>& theta_pairs) {
  LipschitzReport report;
  report.min_slack = std::numeric_limits<double>::infinity();
  constexpr double kBoundConstant = 2.0 / M_E;
  for (const PstNode* node : pst.nodes_in_order()) {
    for (int a = 0; a < pst.alphabet_size(); ++a) {
      const int symbol = pst.alphabet()[a];
      for (const auto& [theta, theta_prime] : theta_pairs) {
        const std::vector<double> p = perturb_dynamics(pst, node->suffix, symbol, theta);
        const std::vector<double> q = perturb_dynamics(pst, node->suffix, symbol, theta_prime);
        const double distance = l1_distance(p, q);
        const double bound = kBoundConstant * std::fabs(theta - theta_prime);
        report.min_slack = std::min(report.min_slack, bound - distance);
        report.max_distance = std::max(report.max_distance, distance);
        ++report.checks;
      }
    }
  }
  require(report.min_slack >= -1e-12, "ViolationFound",
          "dynamics violated the Lipschitz bound");
  return report;
}

std::vector<double> symbol_frequencies(const Pst& pst,
                                       const std::vector<std::vector<int>>& sequences) {
  std::vector<double> freq(pst.alphabet_size(), 0.0);
  double total = 0.0;
  for (const auto& seq : sequences) {
    for (int symbol : seq) {
      freq[pst.symbol_index(symbol)] += 1.0;
      total += 1.0;
    }
  }
  for (double& f : freq) f /= total;
  return freq;
}

std::string Pst::to_json_string() const {
  json nodes = json::array();
  for (const PstNode* node : nodes_in_order()) {
    json jn;
    jn["suffix"] = node->suffix;
    jn["count"] = node->count;
    jn["dist"] = node->distribution;
    nodes.push_back(std::move(jn));
  }
  json j;
  j["alphabet"] = alphabet_;
  j["max_depth"] = max_depth_;
  j["min_count"] = min_count_;
  j["nodes"] = std::move(nodes);
  return j.dump();
}

Pst Pst::from_json_string(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  require(!j.is_discarded(), "ParseError", "malformed PST JSON");
  if (j.is_object() && j.contains("pst")) j = j["pst"];
  std::vector<PstNode> nodes;
  for (const auto& jn : j.at("nodes")) {
    PstNode node;
    node.suffix = jn.at("suffix").get<Suffix>();
    node.count = jn.value("count", std::size_t{0});
    node.distribution = jn.at("dist").get<std::vector<double>>();
    nodes.push_back(std::move(node));
  }
  return from_nodes(j.at("alphabet").get<std::vector<int>>(), std::move(nodes),
                    j.at("max_depth").get<int>(), j.value("min_count", std::size_t{1}));
}

Pst Pst::load(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "IoError", "cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_string(text);
}

void Pst::save(const std::string& path, const std::string& manifest_json) const {
  std::ofstream out(path);
  require(out.good(), "IoError", "cannot open " + path + " for writing");
  json j;
  j["pst"] = json::parse(to_json_string());
  if (!manifest_json.empty()) j["manifest"] = json::parse(manifest_json);
  out << j.dump(2) << '\n';
}

std::vector<std::vector<int>> read_sequences(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "IoError", "cannot open " + path);
  std::vector<std::vector<int>> sequences;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<int> seq;
    std::stringstream ss(line);
    std::string token;
    while (std::getline(ss, token, ',')) {
      try {
        seq.push_back(std::stoi(token));
      } catch (const std::exception&) {
        fail("ParseError", "line " + std::to_string(line_no) + ": bad symbol '" + token + "'");
      }
    }
    require(!seq.empty(), "ParseError", "line " + std::to_string(line_no) + ": empty sequence");
    sequences.push_back(std::move(seq));
  }
  require(!sequences.empty(), "EmptyCorpus", path + " contains no sequences");
  return sequences;
}

}  // namespace saferec
