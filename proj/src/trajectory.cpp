#include "saferec/trajectory.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "saferec/error.hpp"
#include "saferec/stats.hpp"

namespace saferec {

using nlohmann::json;

void validate(const Trajectory& traj, std::size_t horizon_cap) {
  require(!traj.steps.empty(), "InvalidTrajectory", "trajectory must have at least one step");
  require(traj.steps.size() <= horizon_cap, "InvalidTrajectory",
          "trajectory length " + std::to_string(traj.steps.size()) + " exceeds horizon cap " +
              std::to_string(horizon_cap));
  for (const Step& step : traj.steps) {
    require(std::isfinite(step.reward) && step.reward >= 0.0, "InvalidTrajectory",
            "rewards must be finite and >= 0");
    require(step.behavior_prob > 0.0 && step.behavior_prob <= 1.0, "InvalidTrajectory",
            "behavior_prob must lie in (0, 1]");
  }
}

void validate(const Dataset& data, std::size_t horizon_cap) {
  require(!data.empty(), "EmptyData", "dataset must contain at least one trajectory");
  for (const Trajectory& traj : data.trajectories) validate(traj, horizon_cap);
}

void validate(const DiscountSpec& disc) {
  require(disc.gamma >= 0.0 && disc.gamma <= 1.0, "InvalidDiscount", "gamma must lie in [0, 1]");
}

double discounted_return(const Trajectory& traj, const DiscountSpec& disc) {
  double total = 0.0;
  double weight = 1.0;
  for (const Step& step : traj.steps) {
    total += weight * step.reward;
    weight *= disc.gamma;
  }
  return total;
}

namespace {

bool is_click(const Step& step) { return step.reward == 1.0; }

}  // namespace

double ctr(const Dataset& data) {
  std::size_t visits = 0;
  std::size_t clicks = 0;
  for (const Trajectory& traj : data.trajectories) {
    visits += traj.steps.size();
    for (const Step& step : traj.steps) clicks += is_click(step) ? 1 : 0;
  }
  require(visits > 0, "EmptyData", "ctr needs at least one visit");
  return 100.0 * static_cast<double>(clicks) / static_cast<double>(visits);
}

double ltv(const Dataset& data) {
  require(data.n() > 0, "EmptyData", "ltv needs at least one trajectory");
  std::size_t clicks = 0;
  for (const Trajectory& traj : data.trajectories) {
    for (const Step& step : traj.steps) clicks += is_click(step) ? 1 : 0;
  }
  return 100.0 * static_cast<double>(clicks) / static_cast<double>(data.n());
}

namespace {

Trajectory parse_trajectory(const json& j, std::size_t line_no, std::size_t horizon_cap) {
  Trajectory traj;
  if (j.contains("user_id")) traj.behavior_id = j.value("user_id", std::string());
  const auto steps_it = j.find("steps");
  require(steps_it != j.end() && steps_it->is_array(), "ParseError",
          "line " + std::to_string(line_no) + ": missing \"steps\" array");
  for (const json& js : *steps_it) {
    Step step;
    const auto s_it = js.find("s");
    require(s_it != js.end(), "ParseError",
            "line " + std::to_string(line_no) + ": step missing \"s\"");
    if (s_it->is_number_integer()) {
      step.state = State(s_it->get<int>());
    } else if (s_it->is_array()) {
      step.state = State(s_it->get<std::vector<double>>());
    } else {
      fail("ParseError", "line " + std::to_string(line_no) + ": \"s\" must be int or array");
    }
    require(js.contains("a") && js["a"].is_number_integer(), "ParseError",
            "line " + std::to_string(line_no) + ": step missing integer \"a\"");
    step.action = js["a"].get<int>();
    require(js.contains("r") && js["r"].is_number(), "ParseError",
            "line " + std::to_string(line_no) + ": step missing numeric \"r\"");
    step.reward = js["r"].get<double>();
    require(js.contains("bp") && js["bp"].is_number(), "ParseError",
            "line " + std::to_string(line_no) + ": step missing numeric \"bp\"");
    step.behavior_prob = js["bp"].get<double>();
    require(step.behavior_prob > 0.0 && step.behavior_prob <= 1.0, "ParseError",
            "line " + std::to_string(line_no) + ": bp outside (0, 1]");
    require(std::isfinite(step.reward) && step.reward >= 0.0, "ParseError",
            "line " + std::to_string(line_no) + ": reward must be >= 0");
    traj.steps.push_back(std::move(step));
  }
  validate(traj, horizon_cap);
  return traj;
}

}  // namespace

Dataset read_jsonl(const std::string& path, std::size_t horizon_cap) {
  std::ifstream in(path);
  require(in.good(), "IoError", "cannot open " + path);
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    require(!j.is_discarded(), "ParseError",
            "line " + std::to_string(line_no) + ": malformed JSON");
    if (j.is_object() && j.contains("manifest")) continue;  // embedded run manifest
    data.trajectories.push_back(parse_trajectory(j, line_no, horizon_cap));
  }
  require(!data.empty(), "EmptyData", path + " contains no trajectories");
  return data;
}

std::string trajectory_to_json_line(const Trajectory& traj) {
  json steps = json::array();
  for (const Step& step : traj.steps) {
    json js;
    if (step.state.is_discrete()) {
      js["s"] = step.state.id;
    } else {
      js["s"] = step.state.features;
    }
    js["a"] = step.action;
    js["r"] = step.reward;
    js["bp"] = step.behavior_prob;
    steps.push_back(std::move(js));
  }
  json j;
  j["user_id"] = traj.behavior_id;
  j["steps"] = std::move(steps);
  return j.dump();
}

void write_jsonl(const Dataset& data, const std::string& path, const std::string& manifest_line) {
  std::ofstream out(path);
  require(out.good(), "IoError", "cannot open " + path + " for writing");
  if (!manifest_line.empty()) out << manifest_line << '\n';
  for (const Trajectory& traj : data.trajectories) out << trajectory_to_json_line(traj) << '\n';
}

}  // namespace saferec
