#include "saferec/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "saferec/error.hpp"

namespace saferec {

using nlohmann::json;

std::string QFunction::to_json_string() const {
  fail("NotSerializable", "this QFunction kind has no JSON form");
}

std::vector<double> TabularQ::qvalues(const State& state) const {
  require(state.is_discrete(), "UnknownState", "TabularQ needs a discrete state id");
  const auto it = table_.find(state.id);
  if (it == table_.end()) return std::vector<double>(actions_, 0.0);
  return it->second;
}

std::string TabularQ::to_json_string() const {
  json t;
  for (const auto& [sid, qs] : table_) t[std::to_string(sid)] = qs;
  json j;
  j["kind"] = "tabular_q";
  j["actions"] = actions_;
  j["table"] = std::move(t);
  return j.dump();
}

std::size_t fourier_basis_size(std::size_t dim, int order) {
  std::size_t size = 1;
  for (std::size_t i = 0; i < dim; ++i) {
    size *= static_cast<std::size_t>(order) + 1;
    require(size <= 4096, "BasisTooLarge",
            "full Fourier basis (order+1)^dim exceeds 4096 terms");
  }
  return size;
}

std::vector<double> fourier_features(const std::vector<double>& x, int order) {
  const std::size_t size = fourier_basis_size(x.size(), order);
  std::vector<double> phi(size);
  std::vector<int> c(x.size(), 0);
  for (std::size_t k = 0; k < size; ++k) {
    double dot = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) dot += c[j] * x[j];
    phi[k] = std::cos(M_PI * dot);
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (++c[j] <= order) break;
      c[j] = 0;
    }
  }
  return phi;
}

Policy Policy::tabular(std::map<int, std::vector<double>> table) {
  require(!table.empty(), "InvalidPolicy", "tabular policy needs at least one state row");
  Policy p;
  p.kind_ = Kind::Tabular;
  p.num_actions_ = static_cast<int>(table.begin()->second.size());
  for (const auto& [sid, probs] : table) {
    require(static_cast<int>(probs.size()) == p.num_actions_, "InvalidPolicy",
            "inconsistent action count across tabular rows");
    double total = 0.0;
    for (double q : probs) {
      require(q >= 0.0, "InvalidPolicy", "action probabilities must be nonnegative");
      total += q;
    }
    require(std::fabs(total - 1.0) <= 1e-12, "InvalidPolicy",
            "action probabilities for state " + std::to_string(sid) + " must sum to 1");
  }
  p.table_ = std::move(table);
  return p;
}

Policy Policy::uniform(int num_actions) {
  require(num_actions >= 1, "InvalidPolicy", "uniform policy needs >= 1 action");
  Policy p;
  p.kind_ = Kind::Tabular;
  p.num_actions_ = num_actions;
  p.uniform_fallback_ = true;
  return p;
}

Policy Policy::epsilon_greedy(std::shared_ptr<const QFunction> q, double epsilon) {
  require(q != nullptr, "InvalidPolicy", "epsilon-greedy needs a Q function");
  require(epsilon >= 0.0 && epsilon <= 1.0, "InvalidPolicy", "epsilon must lie in [0, 1]");
  Policy p;
  p.kind_ = Kind::EpsilonGreedy;
  p.num_actions_ = q->num_actions();
  p.q_ = std::move(q);
  p.epsilon_ = epsilon;
  return p;
}

Policy Policy::softmax_linear(std::vector<std::vector<double>> weights, int fourier_order,
                              std::size_t state_dim) {
  require(!weights.empty(), "InvalidPolicy", "softmax policy needs >= 1 action");
  const std::size_t basis = fourier_basis_size(state_dim, fourier_order);
  for (const auto& w : weights) {
    require(w.size() == basis, "InvalidPolicy", "weight row size must match basis size");
  }
  Policy p;
  p.kind_ = Kind::SoftmaxLinear;
  p.num_actions_ = static_cast<int>(weights.size());
  p.weights_ = std::move(weights);
  p.fourier_order_ = fourier_order;
  p.state_dim_ = state_dim;
  return p;
}

Policy Policy::mixed(double alpha, Policy base, Policy inner) {
  require(alpha >= 0.0 && alpha <= 1.0, "InvalidPolicy", "alpha must lie in [0, 1]");
  require(base.num_actions() == inner.num_actions(), "InvalidPolicy",
          "mixed policy components must share the action set");
  Policy p;
  p.kind_ = Kind::Mixed;
  p.num_actions_ = base.num_actions();
  p.alpha_ = alpha;
  p.base_ = std::make_shared<Policy>(std::move(base));
  p.inner_ = std::make_shared<Policy>(std::move(inner));
  return p;
}

std::vector<double> Policy::action_distribution(const State& state) const {
  switch (kind_) {
    case Kind::Tabular: {
      if (uniform_fallback_) {
        return std::vector<double>(num_actions_, 1.0 / num_actions_);
      }
      require(state.is_discrete(), "UnknownState", "tabular policy needs a discrete state id");
      const auto it = table_.find(state.id);
      require(it != table_.end(), "UnknownState",
              "tabular policy has no row for state " + std::to_string(state.id));
      return it->second;
    }
    case Kind::EpsilonGreedy: {
      const std::vector<double> qs = q_->qvalues(state);
      const int best = static_cast<int>(std::max_element(qs.begin(), qs.end()) - qs.begin());
      std::vector<double> probs(num_actions_, 0.0);
      if (num_actions_ == 1) {
        probs[0] = 1.0;
      } else {
        const double rest = epsilon_ / static_cast<double>(num_actions_ - 1);
        for (int a = 0; a < num_actions_; ++a) probs[a] = rest;
        probs[best] = 1.0 - epsilon_;
      }
      return probs;
    }
    case Kind::SoftmaxLinear: {
      require(state.features.size() == state_dim_, "InvalidState",
              "softmax policy expects " + std::to_string(state_dim_) + " features");
      const std::vector<double> phi = fourier_features(state.features, fourier_order_);
      std::vector<double> scores(num_actions_, 0.0);
      for (int a = 0; a < num_actions_; ++a) {
        double s = 0.0;
        for (std::size_t k = 0; k < phi.size(); ++k) s += weights_[a][k] * phi[k];
        scores[a] = s;
      }
      const double top = *std::max_element(scores.begin(), scores.end());
      double denom = 0.0;
      for (double& s : scores) {
        s = std::exp(s - top);
        denom += s;
      }
      for (double& s : scores) s /= denom;
      return scores;
    }
    case Kind::Mixed: {
      std::vector<double> pb = base_->action_distribution(state);
      const std::vector<double> pi = inner_->action_distribution(state);
      for (int a = 0; a < num_actions_; ++a) pb[a] = alpha_ * pi[a] + (1.0 - alpha_) * pb[a];
      return pb;
    }
  }
  fail("InvalidPolicy", "unreachable policy kind");
}

double Policy::action_prob(const State& state, int action) const {
  require(action >= 0 && action < num_actions_, "UnknownAction",
          "action " + std::to_string(action) + " outside the policy's action set");
  return action_distribution(state)[action];
}

std::string Policy::to_json_string() const {
  json j;
  switch (kind_) {
    case Kind::Tabular: {
      j["kind"] = "tabular";
      j["actions"] = num_actions_;
      if (uniform_fallback_) {
        j["uniform"] = true;
      } else {
        json rows = json::object();
        for (const auto& [sid, probs] : table_) rows[std::to_string(sid)] = probs;
        j["table"] = std::move(rows);
      }
      break;
    }
    case Kind::EpsilonGreedy: {
      j["kind"] = "epsilon_greedy";
      j["epsilon"] = epsilon_;
      j["q"] = json::parse(q_->to_json_string());
      break;
    }
    case Kind::SoftmaxLinear: {
      j["kind"] = "softmax_linear";
      j["order"] = fourier_order_;
      j["dim"] = state_dim_;
      j["weights"] = weights_;
      break;
    }
    case Kind::Mixed: {
      j["kind"] = "mixed";
      j["alpha"] = alpha_;
      j["base"] = json::parse(base_->to_json_string());
      j["inner"] = json::parse(inner_->to_json_string());
      break;
    }
  }
  return j.dump();
}

namespace {

Policy policy_from_json(const json& j);

std::shared_ptr<const QFunction> qfunction_from_json(const json& j) {
  const std::string kind = j.value("kind", "");
  if (kind == "tabular_q") {
    std::map<int, std::vector<double>> table;
    for (const auto& [key, value] : j.at("table").items()) {
      table[std::stoi(key)] = value.get<std::vector<double>>();
    }
    return std::make_shared<TabularQ>(std::move(table), j.at("actions").get<int>());
  }
  if (kind == "qmodel") {
    return load_regressor_q(j.dump());  // defined with the regressor-backed QModel
  }
  fail("ParseError", "unknown Q function kind: " + kind);
}

Policy policy_from_json(const json& j) {
  const std::string kind = j.value("kind", "");
  if (kind == "tabular") {
    if (j.value("uniform", false)) return Policy::uniform(j.at("actions").get<int>());
    std::map<int, std::vector<double>> table;
    for (const auto& [key, value] : j.at("table").items()) {
      table[std::stoi(key)] = value.get<std::vector<double>>();
    }
    return Policy::tabular(std::move(table));
  }
  if (kind == "epsilon_greedy") {
    return Policy::epsilon_greedy(qfunction_from_json(j.at("q")), j.at("epsilon").get<double>());
  }
  if (kind == "softmax_linear") {
    return Policy::softmax_linear(j.at("weights").get<std::vector<std::vector<double>>>(),
                                  j.at("order").get<int>(), j.at("dim").get<std::size_t>());
  }
  if (kind == "mixed") {
    return Policy::mixed(j.at("alpha").get<double>(), policy_from_json(j.at("base")),
                         policy_from_json(j.at("inner")));
  }
  fail("ParseError", "unknown policy kind: " + kind);
}

}  // namespace

Policy Policy::from_json_string(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  require(!j.is_discarded(), "ParseError", "malformed policy JSON");
  return policy_from_json(j);
}

Policy Policy::load(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "IoError", "cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  json j = json::parse(text, nullptr, false);
  require(!j.is_discarded(), "ParseError", "malformed policy JSON in " + path);
  if (j.is_object() && j.contains("policy")) j = j["policy"];
  return policy_from_json(j);
}

void Policy::save(const std::string& path, const std::string& manifest_json) const {
  std::ofstream out(path);
  require(out.good(), "IoError", "cannot open " + path + " for writing");
  json j;
  j["policy"] = json::parse(to_json_string());
  if (!manifest_json.empty()) j["manifest"] = json::parse(manifest_json);
  out << j.dump(2) << '\n';
}

}  // namespace saferec
