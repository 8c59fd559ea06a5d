#include "saferec/regressor.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "saferec/error.hpp"
#include "saferec/rng.hpp"
#include "saferec/stats.hpp"

namespace saferec {

using nlohmann::json;

std::string TabularMean::key_of(const std::vector<double>& features) const {
  std::string key;
  for (double x : features) {
    key += std::to_string(static_cast<long long>(std::floor(x / cell_)));
    key += ',';
  }
  return key;
}

void TabularMean::fit(const std::vector<std::vector<double>>& features,
                      const std::vector<double>& targets) {
  require(features.size() == targets.size() && !features.empty(), "InvalidData",
          "fit needs matching, nonempty features and targets");
  cells_.clear();
  std::unordered_map<std::string, std::pair<double, std::size_t>> sums;
  for (std::size_t i = 0; i < features.size(); ++i) {
    auto& [sum, count] = sums[key_of(features[i])];
    sum += targets[i];
    ++count;
  }
  global_mean_ = mean(targets);
  for (auto& [key, sc] : sums) cells_[key] = sc.first / static_cast<double>(sc.second);
}

double TabularMean::predict(const std::vector<double>& features) const {
  const auto it = cells_.find(key_of(features));
  return it == cells_.end() ? global_mean_ : it->second;
}

std::string TabularMean::to_json_string() const {
  json cells = json::object();
  std::vector<std::string> keys;
  keys.reserve(cells_.size());
  for (const auto& [key, value] : cells_) keys.push_back(key);
  std::sort(keys.begin(), keys.end());  // stable output ordering
  for (const auto& key : keys) cells[key] = cells_.at(key);
  json j;
  j["kind"] = "tabular_mean";
  j["cell"] = cell_;
  j["global_mean"] = global_mean_;
  j["cells"] = std::move(cells);
  return j.dump();
}

std::unique_ptr<TabularMean> TabularMean::from_json_string(const std::string& text) {
  json j = json::parse(text);
  auto model = std::make_unique<TabularMean>(j.at("cell").get<double>());
  model->global_mean_ = j.at("global_mean").get<double>();
  for (const auto& [key, value] : j.at("cells").items()) {
    model->cells_[key] = value.get<double>();
  }
  return model;
}

namespace {

struct SplitResult {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double score = 0.0;  // variance reduction
};

double subset_mean(const std::vector<double>& targets, const std::vector<int>& idx) {
  double sum = 0.0;
  for (int i : idx) sum += targets[i];
  return sum / static_cast<double>(idx.size());
}

double subset_sse(const std::vector<double>& targets, const std::vector<int>& idx) {
  const double m = subset_mean(targets, idx);
  double sse = 0.0;
  for (int i : idx) sse += (targets[i] - m) * (targets[i] - m);
  return sse;
}

}  // namespace

void TreeEnsemble::fit(const std::vector<std::vector<double>>& features,
                       const std::vector<double>& targets) {
  require(features.size() == targets.size() && !features.empty(), "InvalidData",
          "fit needs matching, nonempty features and targets");
  const int n = static_cast<int>(features.size());
  const int dim = static_cast<int>(features[0].size());
  const int subset = std::max(1, static_cast<int>(std::ceil(std::sqrt(dim))));
  fallback_ = mean(targets);
  trees_.assign(config_.num_trees, {});

  for (int t = 0; t < config_.num_trees; ++t) {
    Rng rng(derive_seed(seed_, static_cast<std::uint64_t>(t)));
    std::vector<int> bag(n);
    for (int& i : bag) i = static_cast<int>(rng.uniform_int(n));

    std::vector<TreeNode>& tree = trees_[t];
    // Iterative node expansion; each frame owns its sample indices.
    struct Frame {
      int node;
      int depth;
      std::vector<int> idx;
    };
    tree.push_back(TreeNode{});
    std::vector<Frame> stack{{0, 0, bag}};
    while (!stack.empty()) {
      Frame frame = std::move(stack.back());
      stack.pop_back();
      TreeNode& node = tree[frame.node];
      node.value = subset_mean(targets, frame.idx);
      if (frame.depth >= config_.max_depth ||
          static_cast<int>(frame.idx.size()) < 2 * config_.min_leaf) {
        continue;
      }
      const double parent_sse = subset_sse(targets, frame.idx);
      if (parent_sse <= 1e-12) continue;

      SplitResult best;
      for (int k = 0; k < subset; ++k) {
        const int f = static_cast<int>(rng.uniform_int(dim));
        double lo = features[frame.idx[0]][f];
        double hi = lo;
        for (int i : frame.idx) {
          lo = std::min(lo, features[i][f]);
          hi = std::max(hi, features[i][f]);
        }
        if (hi <= lo) continue;
        for (int c = 0; c < config_.candidate_thresholds; ++c) {
          const double cut = lo + (hi - lo) * (c + 1) /
                                      static_cast<double>(config_.candidate_thresholds + 1);
          std::vector<int> left;
          std::vector<int> right;
          for (int i : frame.idx) {
            (features[i][f] <= cut ? left : right).push_back(i);
          }
          if (static_cast<int>(left.size()) < config_.min_leaf ||
              static_cast<int>(right.size()) < config_.min_leaf) {
            continue;
          }
          const double gain =
              parent_sse - subset_sse(targets, left) - subset_sse(targets, right);
          if (gain > best.score + 1e-15) {
            best = {true, f, cut, gain};
          }
        }
      }
      if (!best.found) continue;

      std::vector<int> left;
      std::vector<int> right;
      for (int i : frame.idx) {
        (features[i][best.feature] <= best.threshold ? left : right).push_back(i);
      }
      const int left_id = static_cast<int>(tree.size());
      tree.push_back(TreeNode{});
      const int right_id = static_cast<int>(tree.size());
      tree.push_back(TreeNode{});
      TreeNode& parent = tree[frame.node];  // re-take: pushes may reallocate
      parent.feature = best.feature;
      parent.threshold = best.threshold;
      parent.left = left_id;
      parent.right = right_id;
      stack.push_back({left_id, frame.depth + 1, std::move(left)});
      stack.push_back({right_id, frame.depth + 1, std::move(right)});
    }
  }
}

double TreeEnsemble::predict_tree(const std::vector<TreeNode>& tree,
                                  const std::vector<double>& features) const {
  int node = 0;
  while (tree[node].feature >= 0) {
    node = features[tree[node].feature] <= tree[node].threshold ? tree[node].left
                                                                : tree[node].right;
  }
  return tree[node].value;
}

double TreeEnsemble::predict(const std::vector<double>& features) const {
  if (trees_.empty()) return fallback_;
  double sum = 0.0;
  for (const auto& tree : trees_) sum += predict_tree(tree, features);
  return sum / static_cast<double>(trees_.size());
}

std::string TreeEnsemble::to_json_string() const {
  json jtrees = json::array();
  for (const auto& tree : trees_) {
    json jt = json::array();
    for (const TreeNode& node : tree) {
      jt.push_back({node.feature, node.threshold, node.left, node.right, node.value});
    }
    jtrees.push_back(std::move(jt));
  }
  json j;
  j["kind"] = "forest";
  j["num_trees"] = config_.num_trees;
  j["max_depth"] = config_.max_depth;
  j["min_leaf"] = config_.min_leaf;
  j["candidate_thresholds"] = config_.candidate_thresholds;
  j["seed"] = seed_;
  j["fallback"] = fallback_;
  j["trees"] = std::move(jtrees);
  return j.dump();
}

std::unique_ptr<TreeEnsemble> TreeEnsemble::from_json_string(const std::string& text) {
  json j = json::parse(text);
  TreeEnsembleConfig config;
  config.num_trees = j.at("num_trees").get<int>();
  config.max_depth = j.at("max_depth").get<int>();
  config.min_leaf = j.at("min_leaf").get<int>();
  config.candidate_thresholds = j.at("candidate_thresholds").get<int>();
  auto model = std::make_unique<TreeEnsemble>(config, j.at("seed").get<std::uint64_t>());
  model->fallback_ = j.at("fallback").get<double>();
  for (const auto& jt : j.at("trees")) {
    std::vector<TreeNode> tree;
    for (const auto& jn : jt) {
      TreeNode node;
      node.feature = jn.at(0).get<int>();
      node.threshold = jn.at(1).get<double>();
      node.left = jn.at(2).get<int>();
      node.right = jn.at(3).get<int>();
      node.value = jn.at(4).get<double>();
      tree.push_back(node);
    }
    model->trees_.push_back(std::move(tree));
  }
  return model;
}

std::unique_ptr<Regressor> make_regressor(RegressorKind kind, std::uint64_t seed,
                                          double cell_width, TreeEnsembleConfig config) {
  if (kind == RegressorKind::TabularMean) return std::make_unique<TabularMean>(cell_width);
  return std::make_unique<TreeEnsemble>(config, seed);
}

std::unique_ptr<Regressor> regressor_from_json(const std::string& text) {
  json j = json::parse(text);
  const std::string kind = j.value("kind", "");
  if (kind == "tabular_mean") return TabularMean::from_json_string(text);
  if (kind == "forest") return TreeEnsemble::from_json_string(text);
  fail("ParseError", "unknown regressor kind: " + kind);
}

}  // namespace saferec
