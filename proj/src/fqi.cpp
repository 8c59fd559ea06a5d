#include "saferec/fqi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "saferec/error.hpp"
#include "saferec/estimators.hpp"
#include "saferec/parallel.hpp"
#include "saferec/rng.hpp"

namespace saferec {

using nlohmann::json;

std::vector<double> QModel::masked(const std::vector<double>& features) const {
  std::vector<double> out;
  out.reserve(feature_mask_.size());
  for (std::size_t f : feature_mask_) {
    require(f < features.size(), "InvalidState", "feature mask exceeds feature vector");
    out.push_back(features[f]);
  }
  return out;
}

std::vector<double> QModel::qvalues(const State& state) const {
  const std::vector<double> x = masked(state.features);
  std::vector<double> qs(per_action_.size(), 0.0);
  for (std::size_t a = 0; a < per_action_.size(); ++a) {
    if (per_action_[a]) qs[a] = per_action_[a]->predict(x);
  }
  return qs;
}

std::string QModel::to_json_string() const {
  json per_action = json::array();
  for (const auto& reg : per_action_) {
    per_action.push_back(reg ? json::parse(reg->to_json_string()) : json(nullptr));
  }
  json j;
  j["kind"] = "qmodel";
  j["mask"] = feature_mask_;
  j["missing_actions"] = missing_actions_;
  j["per_action"] = std::move(per_action);
  return j.dump();
}

std::shared_ptr<const QFunction> load_regressor_q(const std::string& json_text) {
  json j = json::parse(json_text);
  require(j.value("kind", "") == "qmodel", "ParseError", "expected a qmodel JSON object");
  std::vector<std::shared_ptr<const Regressor>> per_action;
  for (const auto& jr : j.at("per_action")) {
    if (jr.is_null()) {
      per_action.push_back(nullptr);
    } else {
      per_action.push_back(std::shared_ptr<const Regressor>(regressor_from_json(jr.dump())));
    }
  }
  return std::make_shared<QModel>(std::move(per_action),
                                  j.at("mask").get<std::vector<std::size_t>>(),
                                  j.at("missing_actions").get<std::vector<int>>());
}

namespace {

constexpr int kBins = 10;

std::vector<int> discretize(const std::vector<double>& values) {
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  std::vector<int> bins(values.size(), 0);
  if (hi <= lo) return bins;
  const double width = (hi - lo) / kBins;
  for (std::size_t i = 0; i < values.size(); ++i) {
    bins[i] = std::min(kBins - 1, static_cast<int>((values[i] - lo) / width));
  }
  return bins;
}

double mutual_information(const std::vector<int>& f, const std::vector<int>& t) {
  const double n = static_cast<double>(f.size());
  double counts[kBins][kBins] = {};
  double fc[kBins] = {};
  double tc[kBins] = {};
  for (std::size_t i = 0; i < f.size(); ++i) {
    counts[f[i]][t[i]] += 1.0;
    fc[f[i]] += 1.0;
    tc[t[i]] += 1.0;
  }
  double info = 0.0;
  for (int a = 0; a < kBins; ++a) {
    for (int b = 0; b < kBins; ++b) {
      if (counts[a][b] <= 0.0) continue;
      const double p = counts[a][b] / n;
      info += p * std::log(p * n * n / (fc[a] * tc[b]));
    }
  }
  return info;
}

}  // namespace

FeatureSelection information_gain_select(const std::vector<std::vector<double>>& features,
                                         const std::vector<double>& targets,
                                         double keep_fraction) {
  require(!features.empty() && features.size() == targets.size(), "InvalidData",
          "feature selection needs matching, nonempty rows");
  require(keep_fraction > 0.0 && keep_fraction <= 1.0, "InvalidParameter",
          "keep_fraction must lie in (0, 1]");
  const std::size_t dim = features[0].size();

  FeatureSelection out;
  const auto [t_lo, t_hi] = std::minmax_element(targets.begin(), targets.end());
  if (*t_hi <= *t_lo) {
    out.constant_target = true;
    out.mask.resize(dim);
    for (std::size_t f = 0; f < dim; ++f) out.mask[f] = f;
    return out;
  }

  const std::vector<int> target_bins = discretize(targets);
  std::vector<std::pair<double, std::size_t>> ranked(dim);
  std::vector<double> column(features.size());
  for (std::size_t f = 0; f < dim; ++f) {
    for (std::size_t i = 0; i < features.size(); ++i) column[i] = features[i][f];
    ranked[f] = {mutual_information(discretize(column), target_bins), f};
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(keep_fraction * static_cast<double>(dim))));
  out.mask.reserve(keep);
  for (std::size_t k = 0; k < std::min(keep, dim); ++k) out.mask.push_back(ranked[k].second);
  std::sort(out.mask.begin(), out.mask.end());
  return out;
}

namespace {

struct Rows {
  std::vector<std::vector<double>> features;
  std::vector<double> targets;
  std::vector<int> actions;
  int num_actions = 0;
};

Rows collect_rows(const Dataset& data) {
  Rows rows;
  for (const Trajectory& traj : data.trajectories) {
    for (const Step& step : traj.steps) {
      rows.features.push_back(step.state.features);
      rows.targets.push_back(step.reward);
      rows.actions.push_back(step.action);
      rows.num_actions = std::max(rows.num_actions, step.action + 1);
    }
  }
  return rows;
}

// Fit one regressor per action on masked features; actions with no rows stay
// null and are flagged.
std::shared_ptr<const QModel> fit_qmodel(const Rows& rows, const std::vector<double>& labels,
                                         const std::vector<std::size_t>& mask, int num_actions,
                                         const FqiConfig& config, std::uint64_t seed) {
  std::vector<std::shared_ptr<const Regressor>> per_action(num_actions);
  std::vector<int> missing;
  std::vector<std::vector<std::vector<double>>> xs(num_actions);
  std::vector<std::vector<double>> ys(num_actions);
  for (std::size_t i = 0; i < rows.features.size(); ++i) {
    std::vector<double> selected;
    selected.reserve(mask.size());
    for (std::size_t f : mask) selected.push_back(rows.features[i][f]);
    xs[rows.actions[i]].push_back(std::move(selected));
    ys[rows.actions[i]].push_back(labels[i]);
  }
  std::vector<std::unique_ptr<Regressor>> fitted(num_actions);
  parallel_for(static_cast<std::size_t>(num_actions), [&](std::size_t a) {
    if (xs[a].empty()) return;
    auto reg = make_regressor(config.regressor, derive_seed(seed, a), config.cell_width,
                              config.tree);
    reg->fit(xs[a], ys[a]);
    fitted[a] = std::move(reg);
  });
  for (int a = 0; a < num_actions; ++a) {
    if (fitted[a]) {
      per_action[a] = std::shared_ptr<const Regressor>(std::move(fitted[a]));
    } else {
      missing.push_back(a);
    }
  }
  return std::make_shared<QModel>(std::move(per_action), mask, std::move(missing));
}

}  // namespace

GreedyResult greedy_train(const Dataset& train, double epsilon, std::uint64_t seed,
                          const FqiConfig& config) {
  require(!train.empty(), "EmptyData", "greedy_train needs a nonempty dataset");
  const Rows rows = collect_rows(train);
  const FeatureSelection selection =
      information_gain_select(rows.features, rows.targets, config.keep_fraction);
  auto q = fit_qmodel(rows, rows.targets, selection.mask, rows.num_actions, config, seed);
  GreedyResult out{Policy::epsilon_greedy(q, epsilon), q};
  return out;
}

FqiResult fqi_train(const Dataset& train, const Dataset& val, const FqiConfig& config,
                    std::uint64_t seed, const Dataset* test) {
  require(config.iterations >= 1, "InvalidParameter", "fqi needs K >= 1");
  require(!train.empty() && !val.empty(), "EmptyData", "fqi needs train and validation data");
  validate(config.disc);

  const Rows rows = collect_rows(train);
  GreedyResult current = greedy_train(train, config.epsilon, seed, config);
  std::shared_ptr<const QModel> q_prev = current.q;

  FqiResult result{current.policy, BoundResult{}, {}};
  double best_bound = -std::numeric_limits<double>::infinity();
  std::shared_ptr<const QModel> q_best = q_prev;

  for (int iteration = 1; iteration <= config.iterations; ++iteration) {
    // Labels: immediate reward, plus the discounted best next-visit value for
    // steps that have a successor (recurrent visits).
    std::vector<double> labels;
    labels.reserve(rows.targets.size());
    for (const Trajectory& traj : train.trajectories) {
      for (std::size_t t = 0; t < traj.steps.size(); ++t) {
        double y = traj.steps[t].reward;
        if (t + 1 < traj.steps.size() && config.disc.gamma > 0.0) {
          const std::vector<double> qs = q_prev->qvalues(traj.steps[t + 1].state);
          y += config.disc.gamma * *std::max_element(qs.begin(), qs.end());
        }
        labels.push_back(y);
      }
    }

    const FeatureSelection selection =
        information_gain_select(rows.features, labels, config.keep_fraction);
    auto q_new = fit_qmodel(rows, labels, selection.mask, rows.num_actions, config, seed);
    const Policy pi_e = Policy::epsilon_greedy(q_new, config.epsilon);
    const BoundResult bound =
        bound_policy(val, pi_e, config.delta, config.method, Estimator::PerStepIs, config.disc,
                     std::nullopt, config.bootstrap_B, derive_seed(seed, 0xf41, iteration));

    FqiIteration stat;
    stat.iteration = iteration;
    stat.validation_bound = bound;
    if (bound.lower_bound > best_bound) {
      best_bound = bound.lower_bound;
      q_best = q_new;
      stat.new_best = true;
    }
    result.history.push_back(stat);
    q_prev = q_new;
  }

  result.policy = Policy::epsilon_greedy(q_best, config.epsilon);
  if (test != nullptr) {
    result.bound =
        bound_policy(*test, result.policy, config.delta, config.method, Estimator::PerStepIs,
                     config.disc, std::nullopt, config.bootstrap_B, derive_seed(seed, 0xf42));
  } else {
    for (const FqiIteration& it : result.history) {
      if (it.new_best) result.bound = it.validation_bound;
    }
  }
  return result;
}

}  // namespace saferec
