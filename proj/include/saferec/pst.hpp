#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "saferec/trajectory.hpp"

namespace saferec {

// A suffix is stored chronologically: the last element is the most recent
// symbol. The parent of a suffix drops its oldest symbol.
using Suffix = std::vector<int>;

struct PstNode {
  Suffix suffix;
  std::size_t count = 0;            // occurrences followed by a next symbol
  std::vector<double> distribution;  // next-symbol probabilities, alphabet order
};

// Variable-order Markov model over a finite alphabet. Node distributions are
// add-one smoothed empirical frequencies, so every probability lies strictly
// inside (0, 1) whenever the alphabet has two or more symbols.
class Pst {
 public:
  // Counts every suffix up to max_depth occurring at least min_count times;
  // prunes childless nodes whose distribution is within prune_epsilon (L1)
  // of their parent's. The root is always kept.
  static Pst fit(const std::vector<std::vector<int>>& sequences, int max_depth,
                 std::size_t min_count, double prune_epsilon = 0.0);

  // Direct construction for tests and deserialization; validates closure
  // (every proper suffix of a stored suffix is stored) and distributions.
  static Pst from_nodes(std::vector<int> alphabet, std::vector<PstNode> nodes, int max_depth,
                        std::size_t min_count);

  const std::vector<int>& alphabet() const { return alphabet_; }
  int alphabet_size() const { return static_cast<int>(alphabet_.size()); }
  int symbol_index(int symbol) const;
  int max_depth() const { return max_depth_; }
  std::size_t min_count() const { return min_count_; }

  std::size_t num_nodes() const { return nodes_.size(); }
  bool contains(const Suffix& suffix) const { return nodes_.count(suffix) > 0; }
  const PstNode& node(const Suffix& suffix) const;
  std::vector<const PstNode*> nodes_in_order() const;  // by (length, lexicographic)

  // Longest stored tail of the history (always defined; the root matches).
  Suffix longest_suffix(const Suffix& history) const;
  // Longest stored suffix of (context . symbol) — the MDP successor context.
  Suffix extend(const Suffix& context, int symbol) const;

  const std::vector<double>& distribution(const Suffix& suffix) const;

  std::string to_json_string() const;
  static Pst from_json_string(const std::string& text);
  static Pst load(const std::string& path);
  void save(const std::string& path, const std::string& manifest_json = "") const;

 private:
  std::vector<int> alphabet_;
  std::map<Suffix, PstNode> nodes_;
  int max_depth_ = 0;
  std::size_t min_count_ = 1;
};

double pst_loglik(const Pst& pst, const std::vector<std::vector<int>>& sequences);

// Free parameters: one short of a full distribution per node.
std::size_t pst_num_parameters(const Pst& pst);

// 2k - 2 logL + 2k(k+1)/(n-k-1); throws AiccUndefined when n <= k + 1.
double aicc(double loglik, std::size_t k, std::size_t n);

// Action-conditioned next-symbol distribution: the recommended symbol's
// probability is raised to 1/theta, the rest share the leftover mass
// proportionally. theta = 1 returns the passive distribution unchanged.
std::vector<double> perturb_dynamics(const Pst& pst, const Suffix& suffix, int action_symbol,
                                     double theta);

// POI-style rewards: expected desirability of the next symbol, minus
// action_cost (and additionally fatigue_cost, when the recommended symbol
// already appears in the context) times the recommended symbol's
// desirability. The null action carries no cost.
struct PoiRewardSpec {
  std::vector<double> desirability;  // per alphabet index, in [0, 1]
  double action_cost = 0.2;
  double fatigue_cost = 0.4;
};

// Finite MDP compiled from a PST at a fixed theta. States are tree contexts;
// actions recommend one symbol each, plus a trailing null action (id = |S|)
// whose dynamics are the passive model.
struct PstMdp {
  std::vector<Suffix> states;
  int num_symbols = 0;
  double theta = 1.0;
  double gamma = 0.9;
  std::vector<std::vector<std::vector<double>>> transitions;  // [x][a][x']
  std::vector<std::vector<double>> rewards;                   // [x][a]

  int num_states() const { return static_cast<int>(states.size()); }
  int num_actions() const { return num_symbols + 1; }
  int null_action() const { return num_symbols; }
  int state_index(const Suffix& suffix) const;
};

PstMdp build_mdp(const Pst& pst, double theta, const PoiRewardSpec& rewards,
                 const DiscountSpec& disc);

struct PolicyIterationResult {
  std::vector<int> policy;    // action per state
  std::vector<double> values;
  int iterations = 0;
};

// Exact policy evaluation (dense linear solve) alternated with greedy
// improvement until stable. Requires gamma < 1.
PolicyIterationResult policy_iteration(const PstMdp& mdp);

// Worst slack of the (2/e)|theta - theta'| dynamics bound over all stored
// contexts, recommendation actions, and the given theta pairs. Negative
// slack (a violation) throws ViolationFound.
struct LipschitzReport {
  double min_slack = 0.0;      // bound - distance, minimized over the sweep
  double max_distance = 0.0;
  std::size_t checks = 0;
};

LipschitzReport lipschitz_check(const Pst& pst,
                                const std::vector<std::pair<double, double>>& theta_pairs);

// Desirability defaults for POI-style experiments: empirical symbol
// frequency in the corpus.
std::vector<double> symbol_frequencies(const Pst& pst,
                                       const std::vector<std::vector<int>>& sequences);

// Sequence file: one comma-separated symbol sequence per line.
std::vector<std::vector<int>> read_sequences(const std::string& path);

}  // namespace saferec
