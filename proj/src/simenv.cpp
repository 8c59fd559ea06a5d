#include "saferec/simenv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "saferec/error.hpp"
#include "saferec/parallel.hpp"
#include "saferec/rng.hpp"

namespace saferec {

using nlohmann::json;

bool SimEnv::is_terminal(int s) const {
  return std::find(terminal.begin(), terminal.end(), s) != terminal.end();
}

double SimEnv::drift_multiplier(std::size_t episode) const {
  if (drift.empty()) return 1.0;
  return drift[std::min(episode, drift.size() - 1)];
}

State SimEnv::make_state(int s) const {
  const double denom = num_states > 1 ? static_cast<double>(num_states - 1) : 1.0;
  return State(s, {static_cast<double>(s) / denom});
}

void SimEnv::validate() const {
  require(num_states >= 1 && num_actions >= 1, "InvalidEnv", "need >= 1 state and action");
  require(horizon >= 1, "InvalidEnv", "horizon must be >= 1");
  require(static_cast<int>(d0.size()) == num_states, "InvalidEnv", "d0 size mismatch");
  double d0_sum = 0.0;
  for (int s = 0; s < num_states; ++s) {
    d0_sum += d0[s];
    require(d0[s] >= 0.0, "InvalidEnv", "d0 must be nonnegative");
    if (d0[s] > 0.0) require(!is_terminal(s), "InvalidEnv", "d0 mass on terminal state");
  }
  require(std::fabs(d0_sum - 1.0) <= 1e-9, "InvalidEnv", "d0 must sum to 1");
  require(static_cast<int>(transitions.size()) == num_states, "InvalidEnv", "transition rows");
  require(static_cast<int>(click_prob.size()) == num_states, "InvalidEnv", "click_prob rows");
  for (int s = 0; s < num_states; ++s) {
    require(static_cast<int>(transitions[s].size()) == num_actions, "InvalidEnv",
            "transition actions");
    for (int a = 0; a < num_actions; ++a) {
      require(static_cast<int>(transitions[s][a].size()) == num_states, "InvalidEnv",
              "transition columns");
      double row = 0.0;
      for (double p : transitions[s][a]) {
        require(p >= 0.0, "InvalidEnv", "negative transition probability");
        row += p;
      }
      require(std::fabs(row - 1.0) <= 1e-9, "InvalidEnv", "transition row must sum to 1");
      require(click_prob[s][a] >= 0.0 && click_prob[s][a] <= 1.0, "InvalidEnv",
              "click_prob outside [0,1]");
    }
  }
  for (double m : drift) require(m >= 0.0, "InvalidEnv", "drift multipliers must be >= 0");
}

Dataset simulate(const SimEnv& env, const Policy& policy, std::size_t n, std::uint64_t seed,
                 std::size_t episode_offset) {
  env.validate();
  require(n >= 1, "EmptyData", "simulate needs n >= 1 trajectories");
  Dataset data;
  data.trajectories.resize(n);
  parallel_for(n, [&](std::size_t i) {
    Rng rng(derive_seed(seed, episode_offset + i));
    const double mult = env.drift_multiplier(episode_offset + i);
    Trajectory traj;
    traj.behavior_id = "u" + std::to_string(episode_offset + i);
    int s = rng.categorical(env.d0);
    for (int t = 0; t < env.horizon; ++t) {
      const State state = env.make_state(s);
      const std::vector<double> probs = policy.action_distribution(state);
      const int a = rng.categorical(probs);
      const double p_click = std::clamp(env.click_prob[s][a] * mult, 0.0, 1.0);
      Step step;
      step.state = state;
      step.action = a;
      step.reward = rng.uniform01() < p_click ? 1.0 : 0.0;
      step.behavior_prob = probs[a];
      traj.steps.push_back(std::move(step));
      const int next = rng.categorical(env.transitions[s][a]);
      if (env.is_terminal(next)) break;
      s = next;
    }
    data.trajectories[i] = std::move(traj);
  });
  return data;
}

double exact_value(const SimEnv& env, const Policy& policy, const DiscountSpec& disc,
                   std::size_t episode) {
  env.validate();
  const double mult = env.drift_multiplier(episode);
  std::vector<double> next_v(env.num_states, 0.0);
  std::vector<double> v(env.num_states, 0.0);
  for (int t = env.horizon - 1; t >= 0; --t) {
    for (int s = 0; s < env.num_states; ++s) {
      if (env.is_terminal(s)) {
        v[s] = 0.0;
        continue;
      }
      const std::vector<double> probs = policy.action_distribution(env.make_state(s));
      double total = 0.0;
      for (int a = 0; a < env.num_actions; ++a) {
        double value = std::clamp(env.click_prob[s][a] * mult, 0.0, 1.0);
        double cont = 0.0;
        for (int sn = 0; sn < env.num_states; ++sn) {
          if (!env.is_terminal(sn)) cont += env.transitions[s][a][sn] * next_v[sn];
        }
        total += probs[a] * (value + disc.gamma * cont);
      }
      v[s] = total;
    }
    next_v = v;
  }
  double rho = 0.0;
  for (int s = 0; s < env.num_states; ++s) rho += env.d0[s] * next_v[s];
  return rho;
}

MetricPair exact_ctr_ltv(const SimEnv& env, const Policy& policy) {
  env.validate();
  std::vector<double> clicks_next(env.num_states, 0.0);
  std::vector<double> visits_next(env.num_states, 0.0);
  std::vector<double> clicks(env.num_states, 0.0);
  std::vector<double> visits(env.num_states, 0.0);
  for (int t = env.horizon - 1; t >= 0; --t) {
    for (int s = 0; s < env.num_states; ++s) {
      if (env.is_terminal(s)) {
        clicks[s] = visits[s] = 0.0;
        continue;
      }
      const std::vector<double> probs = policy.action_distribution(env.make_state(s));
      double c = 0.0;
      double w = 0.0;
      for (int a = 0; a < env.num_actions; ++a) {
        double cc = env.click_prob[s][a];
        double ww = 1.0;
        for (int sn = 0; sn < env.num_states; ++sn) {
          if (env.is_terminal(sn)) continue;
          cc += env.transitions[s][a][sn] * clicks_next[sn];
          ww += env.transitions[s][a][sn] * visits_next[sn];
        }
        c += probs[a] * cc;
        w += probs[a] * ww;
      }
      clicks[s] = c;
      visits[s] = w;
    }
    clicks_next = clicks;
    visits_next = visits;
  }
  double expected_clicks = 0.0;
  double expected_visits = 0.0;
  for (int s = 0; s < env.num_states; ++s) {
    expected_clicks += env.d0[s] * clicks_next[s];
    expected_visits += env.d0[s] * visits_next[s];
  }
  MetricPair out;
  out.ltv = 100.0 * expected_clicks;
  out.ctr = expected_visits > 0.0 ? 100.0 * expected_clicks / expected_visits : 0.0;
  return out;
}

double rewarding_transition_rate(const SimEnv& env) {
  const Policy uniform = Policy::uniform(env.num_actions);
  const MetricPair metrics = exact_ctr_ltv(env, uniform);
  return metrics.ctr / 100.0;
}

SimEnv sparse_click_env(double target_rate, std::uint64_t seed) {
  require(target_rate >= 0.0 && target_rate <= 1.0, "InvalidParameter",
          "target rate must lie in [0, 1]");
  SimEnv env;
  env.num_states = 4;
  env.num_actions = 2;
  env.horizon = 20;
  env.gamma = 1.0;
  env.d0 = {1.0, 0.0, 0.0, 0.0};
  Rng rng(seed);
  env.transitions.assign(4, std::vector<std::vector<double>>(2, std::vector<double>(4, 0.0)));
  env.click_prob.assign(4, std::vector<double>(2, 0.0));
  for (int s = 0; s < 4; ++s) {
    for (int a = 0; a < 2; ++a) {
      double row_sum = 0.0;
      for (int sn = 0; sn < 4; ++sn) {
        const double w = 0.2 + rng.uniform01();
        env.transitions[s][a][sn] = w;
        row_sum += w;
      }
      for (int sn = 0; sn < 4; ++sn) env.transitions[s][a][sn] /= row_sum;
      // Spread in (0.5, 1] so one multiplicative calibration step rarely clips.
      env.click_prob[s][a] = 0.5 + 0.5 * rng.uniform01();
    }
  }
  // Iteratively rescale click probabilities until the uniform-policy
  // rewarding-transition rate hits the target (clipping at 1 is the only
  // non-linearity, so this converges in a handful of rounds).
  for (int round = 0; round < 200; ++round) {
    const double rate = rewarding_transition_rate(env);
    if (target_rate == 0.0) {
      for (auto& row : env.click_prob) std::fill(row.begin(), row.end(), 0.0);
      break;
    }
    if (rate <= 0.0) break;
    const double scale = target_rate / rate;
    if (std::fabs(scale - 1.0) < 1e-13) break;
    bool clipped = false;
    for (auto& row : env.click_prob) {
      for (double& p : row) {
        p *= scale;
        if (p > 1.0) {
          p = 1.0;
          clipped = true;
        }
      }
    }
    if (!clipped && std::fabs(scale - 1.0) < 1e-12) break;
  }
  return env;
}

SimEnv chain_env() {
  SimEnv env;
  env.num_states = 5;
  env.num_actions = 2;
  env.horizon = 5;
  env.gamma = 1.0;
  env.d0 = {1.0, 0.0, 0.0, 0.0, 0.0};
  env.transitions.assign(5, std::vector<std::vector<double>>(2, std::vector<double>(5, 0.0)));
  env.click_prob.assign(5, std::vector<double>(2, 0.0));
  for (int s = 0; s < 5; ++s) {
    const int right = std::min(s + 1, 4);
    // action 0 advances, action 1 lingers
    env.transitions[s][0][right] += 0.8;
    env.transitions[s][0][s] += 0.2;
    env.transitions[s][1][right] += 0.25;
    env.transitions[s][1][s] += 0.75;
    env.click_prob[s][0] = 0.05 + 0.08 * s;
    env.click_prob[s][1] = 0.02 + 0.05 * s;
  }
  return env;
}

SimEnv funnel_env() {
  // States: 0 browsing, 1 engaged, 2 ready, 3 gone (terminal).
  // Action 0 shows the offer now, action 1 nurtures the relationship.
  SimEnv env;
  env.num_states = 4;
  env.num_actions = 2;
  env.horizon = 20;
  env.gamma = 1.0;
  env.d0 = {1.0, 0.0, 0.0, 0.0};
  env.terminal = {3};
  env.transitions.assign(4, std::vector<std::vector<double>>(2, std::vector<double>(4, 0.0)));
  env.click_prob.assign(4, std::vector<double>(2, 0.0));

  env.click_prob[0][0] = 0.20;
  env.transitions[0][0][3] = 1.0;  // immediate offer burns the visitor
  env.click_prob[0][1] = 0.0;
  env.transitions[0][1][1] = 0.9;
  env.transitions[0][1][0] = 0.1;

  env.click_prob[1][0] = 0.15;
  env.transitions[1][0][3] = 1.0;
  env.click_prob[1][1] = 0.0;
  env.transitions[1][1][2] = 0.9;
  env.transitions[1][1][1] = 0.1;

  env.click_prob[2][0] = 0.15;  // repeatable offers once the user is ready
  env.transitions[2][0][2] = 0.7;
  env.transitions[2][0][3] = 0.3;
  env.click_prob[2][1] = 0.0;
  env.transitions[2][1][2] = 0.8;
  env.transitions[2][1][3] = 0.2;

  env.transitions[3][0][3] = 1.0;
  env.transitions[3][1][3] = 1.0;
  return env;
}

SimEnv bandit_env() {
  SimEnv env;
  env.num_states = 1;
  env.num_actions = 2;
  env.horizon = 2;
  env.gamma = 1.0;
  env.d0 = {1.0};
  env.transitions.assign(1, std::vector<std::vector<double>>(2, std::vector<double>(1, 1.0)));
  env.click_prob.assign(1, std::vector<double>(2, 0.0));
  env.click_prob[0][0] = 0.5;
  env.click_prob[0][1] = 0.1;
  return env;
}

SimEnv stream_env(bool hotel_shaped, std::size_t episodes) {
  SimEnv env;
  env.num_states = 1;
  env.num_actions = 2;
  env.horizon = 4;
  env.gamma = 1.0;
  env.d0 = {1.0};
  env.transitions.assign(1, std::vector<std::vector<double>>(2, std::vector<double>(1, 1.0)));
  env.click_prob.assign(1, std::vector<double>(2, 0.0));
  env.click_prob[0][0] = 0.10;
  env.click_prob[0][1] = 0.06;
  env.drift.resize(episodes, 1.0);
  if (hotel_shaped) {
    // CTR holds, collapses mid-stream, then recovers.
    for (std::size_t e = 0; e < episodes; ++e) {
      const double frac = static_cast<double>(e) / static_cast<double>(episodes);
      double m = 1.0;
      if (frac >= 1.0 / 3.0 && frac < 0.5) {
        m = 1.0 - (frac - 1.0 / 3.0) / (0.5 - 1.0 / 3.0) * 0.95;
      } else if (frac >= 0.5 && frac < 5.0 / 6.0) {
        m = 0.05 + (frac - 0.5) / (5.0 / 6.0 - 0.5) * 0.95;
      }
      env.drift[e] = m;
    }
  }
  return env;
}

SimEnv builtin_env(const std::string& name) {
  if (name == "chain5") return chain_env();
  if (name == "funnel") return funnel_env();
  if (name == "bandit") return bandit_env();
  if (name == "hotel") return stream_env(true, 3000);
  if (name == "hotel_stationary") return stream_env(false, 3000);
  if (name == "sparse_click") return sparse_click_env(0.0038);
  fail("UnknownEnv", "unknown builtin environment: " + name);
}

std::string SimEnv::to_json_string() const {
  json j;
  j["states"] = num_states;
  j["actions"] = num_actions;
  j["horizon"] = horizon;
  j["gamma"] = gamma;
  j["d0"] = d0;
  j["transitions"] = transitions;
  j["click_prob"] = click_prob;
  if (!terminal.empty()) j["terminal"] = terminal;
  if (!drift.empty()) j["drift"] = drift;
  return j.dump();
}

SimEnv SimEnv::from_json_string(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  require(!j.is_discarded(), "ParseError", "malformed environment JSON");
  if (j.contains("builtin")) {
    SimEnv env = builtin_env(j["builtin"].get<std::string>());
    if (j.contains("target_rate")) env = sparse_click_env(j["target_rate"].get<double>());
    if (j.contains("episodes") && !env.drift.empty()) {
      const bool hotel = j["builtin"].get<std::string>() == "hotel";
      env = stream_env(hotel, j["episodes"].get<std::size_t>());
    }
    return env;
  }
  SimEnv env;
  env.num_states = j.at("states").get<int>();
  env.num_actions = j.at("actions").get<int>();
  env.horizon = j.value("horizon", static_cast<int>(kDefaultHorizonCap));
  env.gamma = j.value("gamma", 1.0);
  env.d0 = j.at("d0").get<std::vector<double>>();
  env.transitions = j.at("transitions").get<std::vector<std::vector<std::vector<double>>>>();
  env.click_prob = j.at("click_prob").get<std::vector<std::vector<double>>>();
  if (j.contains("terminal")) env.terminal = j["terminal"].get<std::vector<int>>();
  if (j.contains("drift")) env.drift = j["drift"].get<std::vector<double>>();
  env.validate();
  return env;
}

SimEnv SimEnv::load(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "IoError", "cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_string(text);
}

}  // namespace saferec
