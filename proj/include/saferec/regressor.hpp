#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace saferec {

// Minimal regression capability used by the batch training loops.
// Implementations are deterministic after fit for a fixed seed.
class Regressor {
 public:
  virtual ~Regressor() = default;
  virtual void fit(const std::vector<std::vector<double>>& features,
                   const std::vector<double>& targets) = 0;
  virtual double predict(const std::vector<double>& features) const = 0;
  virtual std::string to_json_string() const = 0;
};

// Mean response per discretized feature cell; unseen cells fall back to the
// global target mean. Exact for finite state spaces when the cell width
// separates the distinct feature values.
class TabularMean : public Regressor {
 public:
  explicit TabularMean(double cell_width = 0.05) : cell_(cell_width) {}

  void fit(const std::vector<std::vector<double>>& features,
           const std::vector<double>& targets) override;
  double predict(const std::vector<double>& features) const override;
  std::string to_json_string() const override;

  static std::unique_ptr<TabularMean> from_json_string(const std::string& text);

 private:
  std::string key_of(const std::vector<double>& features) const;
  double cell_;
  double global_mean_ = 0.0;
  std::unordered_map<std::string, double> cells_;
};

// Bagged depth-limited regression trees with random feature subsets at each
// split; a desk-scale stand-in for a production random forest.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct TreeEnsembleConfig {
  int num_trees = 20;
  int max_depth = 6;
  int min_leaf = 4;
  int candidate_thresholds = 16;
};

class TreeEnsemble : public Regressor {
 public:
  explicit TreeEnsemble(TreeEnsembleConfig config = {}, std::uint64_t seed = 0)
      : config_(config), seed_(seed) {}

  void fit(const std::vector<std::vector<double>>& features,
           const std::vector<double>& targets) override;
  double predict(const std::vector<double>& features) const override;
  std::string to_json_string() const override;

  static std::unique_ptr<TreeEnsemble> from_json_string(const std::string& text);

 private:
  double predict_tree(const std::vector<TreeNode>& tree,
                      const std::vector<double>& features) const;
  TreeEnsembleConfig config_;
  std::uint64_t seed_;
  double fallback_ = 0.0;
  std::vector<std::vector<TreeNode>> trees_;
};

enum class RegressorKind { TabularMean, TreeEnsemble };

std::unique_ptr<Regressor> make_regressor(RegressorKind kind, std::uint64_t seed,
                                          double cell_width = 0.05,
                                          TreeEnsembleConfig config = {});
std::unique_ptr<Regressor> regressor_from_json(const std::string& text);

}  // namespace saferec
