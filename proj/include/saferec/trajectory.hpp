#pragma once

#include <string>
#include <vector>

namespace saferec {

// A visit state: either a discrete id (id >= 0) or a plain feature vector.
// Discrete states still carry a one-element feature vector so feature-based
// policies and regressors can score them.
struct State {
  int id = -1;
  std::vector<double> features;

  State() = default;
  explicit State(int discrete_id)
      : id(discrete_id), features{static_cast<double>(discrete_id)} {}
  explicit State(std::vector<double> x) : features(std::move(x)) {}
  State(int discrete_id, std::vector<double> x) : id(discrete_id), features(std::move(x)) {}

  bool is_discrete() const { return id >= 0; }
};

struct Step {
  State state;
  int action = 0;
  double reward = 0.0;        // >= 0
  double behavior_prob = 1.0;  // in (0, 1], logged by the behavior policy
};

struct Trajectory {
  std::vector<Step> steps;
  std::string behavior_id;

  std::size_t length() const { return steps.size(); }
};

struct Dataset {
  std::vector<Trajectory> trajectories;

  std::size_t n() const { return trajectories.size(); }
  bool empty() const { return trajectories.empty(); }
};

struct DiscountSpec {
  double gamma = 1.0;
};

inline constexpr std::size_t kDefaultHorizonCap = 20;

// Throws on violated invariants (length, reward sign, behavior_prob range).
void validate(const Trajectory& traj, std::size_t horizon_cap = kDefaultHorizonCap);
void validate(const Dataset& data, std::size_t horizon_cap = kDefaultHorizonCap);
void validate(const DiscountSpec& disc);

// Sum of gamma^{t-1} r_t over the trajectory.
double discounted_return(const Trajectory& traj, const DiscountSpec& disc);

// Clicks per visit and clicks per user, both scaled by 100. A click is a
// step whose reward equals 1.
double ctr(const Dataset& data);
double ltv(const Dataset& data);

// Line-delimited JSON trajectory logs:
//   {"user_id": "...", "steps": [{"s": [..] or int, "a": int, "r": num, "bp": num}]}
// A leading {"manifest": ...} line (written by the CLI) is skipped on read.
Dataset read_jsonl(const std::string& path, std::size_t horizon_cap = kDefaultHorizonCap);
void write_jsonl(const Dataset& data, const std::string& path,
                 const std::string& manifest_line = "");
std::string trajectory_to_json_line(const Trajectory& traj);

}  // namespace saferec
