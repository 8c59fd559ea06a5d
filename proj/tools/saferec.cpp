#include <charconv>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "saferec/bounds.hpp"
#include "saferec/capacity.hpp"
#include "saferec/error.hpp"
#include "saferec/estimators.hpp"
#include "saferec/fqi.hpp"
#include "saferec/manifest.hpp"
#include "saferec/parallel.hpp"
#include "saferec/policy.hpp"
#include "saferec/psrl.hpp"
#include "saferec/pst.hpp"
#include "saferec/safe_improve.hpp"
#include "saferec/simenv.hpp"
#include "saferec/timeseries.hpp"
#include "saferec/trajectory.hpp"

namespace {

using nlohmann::json;
using namespace saferec;

std::string fmt_double(double v) {
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), v);
  (void)ec;
  return std::string(buffer, ptr);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  require(out.good(), "IoError", "cannot open " + path + " for writing");
  out << text;
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> values;
  std::stringstream ss(csv);
  std::string token;
  while (std::getline(ss, token, ',')) values.push_back(std::stod(token));
  return values;
}

std::vector<std::size_t> parse_size_list(const std::string& csv) {
  std::vector<std::size_t> values;
  std::stringstream ss(csv);
  std::string token;
  while (std::getline(ss, token, ',')) values.push_back(std::stoull(token));
  return values;
}

struct ManifestBuilder {
  RunManifest manifest;

  ManifestBuilder(const std::string& subcommand, std::uint64_t seed) {
    manifest.subcommand = subcommand;
    manifest.seed = seed;
  }
  void flag(const std::string& key, const std::string& value) { manifest.flags[key] = value; }
  void flag(const std::string& key, double value) { manifest.flags[key] = fmt_double(value); }
  void flag(const std::string& key, std::uint64_t value) {
    manifest.flags[key] = std::to_string(value);
  }
  void flag(const std::string& key, int value) { manifest.flags[key] = std::to_string(value); }
  void input(const std::string& path) { manifest.add_input(path); }
  std::string str() const { return manifest.to_json_string(); }
  std::string manifest_line() const {
    json j;
    j["manifest"] = json::parse(str());
    return j.dump();
  }
};

json bound_to_json(const BoundResult& bound) { return json::parse(bound.to_json_string()); }

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

int cmd_sim(const std::string& env_path, const std::string& policy_path, std::size_t n,
            std::uint64_t seed, std::size_t episode_offset, const std::string& out_path) {
  const SimEnv env = SimEnv::load(env_path);
  const Policy policy = Policy::load(policy_path);
  ManifestBuilder mb("sim", seed);
  mb.input(env_path);
  mb.input(policy_path);
  mb.flag("n", static_cast<std::uint64_t>(n));
  mb.flag("episode_offset", static_cast<std::uint64_t>(episode_offset));
  const Dataset data = simulate(env, policy, n, seed, episode_offset);
  write_jsonl(data, out_path, mb.manifest_line());
  json summary;
  summary["trajectories"] = data.n();
  summary["out"] = out_path;
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_bound(const std::string& in_path, const std::string& policy_path,
              const std::string& method_name, const std::string& estimator_name_, double delta,
              double gamma, std::optional<std::uint64_t> seed, int bootstrap_B,
              std::optional<std::size_t> m, const std::string& out_path,
              const std::string& risk_path, const std::string& risk_deltas) {
  const BoundMethod method = bound_method_from_name(method_name);
  const Estimator estimator = estimator_from_name(estimator_name_);
  require(method != BoundMethod::BCa || seed.has_value(), "MissingSeed",
          "--seed is required for the bca method");
  const Dataset data = read_jsonl(in_path);
  const Policy pi_e = Policy::load(policy_path);
  const DiscountSpec disc{gamma};

  ManifestBuilder mb("bound", seed.value_or(0));
  mb.input(in_path);
  mb.input(policy_path);
  mb.flag("method", method_name);
  mb.flag("estimator", estimator_name_);
  mb.flag("delta", delta);
  mb.flag("gamma", gamma);
  if (m) mb.flag("m", static_cast<std::uint64_t>(*m));

  const BoundResult bound = bound_policy(data, pi_e, delta, method, estimator, disc, m,
                                         bootstrap_B, seed.value_or(0));
  json out;
  out["bound"] = bound_to_json(bound);
  out["manifest"] = json::parse(mb.str());
  write_text(out_path, out.dump(2) + "\n");
  std::cout << bound.to_json_string() << "\n";

  if (!risk_path.empty()) {
    const std::vector<double> deltas =
        risk_deltas.empty() ? std::vector<double>{0.01, 0.025, 0.05, 0.1, 0.25, 0.5}
                            : parse_double_list(risk_deltas);
    std::ostringstream csv;
    csv << "# manifest: " << mb.str() << "\n";
    csv << "delta,lower_bound\n";
    for (double d : deltas) {
      const BoundResult row = bound_policy(data, pi_e, d, method, estimator, disc, m,
                                           bootstrap_B, seed.value_or(0));
      csv << fmt_double(d) << ',' << fmt_double(row.lower_bound) << "\n";
    }
    write_text(risk_path, csv.str());
  }
  return 0;
}

int cmd_fqi(const std::string& train_path, const std::string& val_path,
            const std::string& test_path, int iterations, double gamma, double epsilon,
            double delta, const std::string& method_name, double keep_fraction,
            const std::string& regressor_name, std::uint64_t seed,
            const std::string& out_policy, const std::string& out_report) {
  require(train_path != val_path && train_path != test_path && val_path != test_path,
          "InvalidParameter", "train, val and test must be distinct files");
  const Dataset train = read_jsonl(train_path);
  const Dataset val = read_jsonl(val_path);
  const Dataset test = read_jsonl(test_path);

  FqiConfig config;
  config.iterations = iterations;
  config.disc = DiscountSpec{gamma};
  config.epsilon = epsilon;
  config.delta = delta;
  config.method = bound_method_from_name(method_name);
  config.keep_fraction = keep_fraction;
  if (regressor_name == "tabular") {
    config.regressor = RegressorKind::TabularMean;
  } else if (regressor_name == "forest") {
    config.regressor = RegressorKind::TreeEnsemble;
  } else {
    fail("InvalidParameter", "--regressor must be tabular or forest");
  }

  ManifestBuilder mb("fqi", seed);
  mb.input(train_path);
  mb.input(val_path);
  mb.input(test_path);
  mb.flag("K", iterations);
  mb.flag("gamma", gamma);
  mb.flag("epsilon", epsilon);
  mb.flag("delta", delta);
  mb.flag("method", method_name);
  mb.flag("keep_fraction", keep_fraction);
  mb.flag("regressor", regressor_name);

  const FqiResult result = fqi_train(train, val, config, seed, &test);
  result.policy.save(out_policy, mb.str());

  json history = json::array();
  for (const FqiIteration& it : result.history) {
    json row;
    row["iteration"] = it.iteration;
    row["validation_bound"] = bound_to_json(it.validation_bound);
    row["new_best"] = it.new_best;
    history.push_back(std::move(row));
  }
  json report;
  report["test_bound"] = bound_to_json(result.bound);
  report["history"] = std::move(history);
  report["manifest"] = json::parse(mb.str());
  write_text(out_report, report.dump(2) + "\n");
  std::cout << result.bound.to_json_string() << "\n";
  return 0;
}

int cmd_improve(const std::string& train_path, const std::string& test_path, double rho_minus,
                double delta, const std::string& method_name, const std::string& variant_name,
                double gamma, int actions, int order, std::size_t budget, std::uint64_t seed,
                const std::string& out_path) {
  const Dataset train = read_jsonl(train_path);
  const Dataset test = read_jsonl(test_path);

  SafetySpec spec;
  spec.rho_minus = rho_minus;
  spec.delta = delta;
  spec.method = bound_method_from_name(method_name);
  CandidateSearchConfig config;
  config.disc = DiscountSpec{gamma};
  config.budget = budget;
  if (variant_name == "none") {
    config.variant = CandidateVariant::None;
  } else if (variant_name == "kfold") {
    config.variant = CandidateVariant::KFold;
  } else {
    fail("InvalidParameter", "--variant must be none or kfold");
  }
  SoftmaxShape shape;
  shape.num_actions = actions;
  shape.state_dim = train.trajectories.front().steps.front().state.features.size();
  shape.fourier_order = order;
  const Policy pi0 = Policy::uniform(actions);

  ManifestBuilder mb("improve", seed);
  mb.input(train_path);
  mb.input(test_path);
  mb.flag("rho_minus", rho_minus);
  mb.flag("delta", delta);
  mb.flag("method", method_name);
  mb.flag("variant", variant_name);
  mb.flag("gamma", gamma);
  mb.flag("actions", actions);

  const ImprovementResult result =
      policy_improvement(train, test, spec, config, shape, pi0, seed);
  json out;
  out["status"] = result.accepted() ? "accepted" : "nsf";
  out["test_bound"] = bound_to_json(result.test_bound);
  if (result.accepted()) out["policy"] = json::parse(result.policy->to_json_string());
  out["manifest"] = json::parse(mb.str());
  write_text(out_path, out.dump(2) + "\n");
  std::cout << out["status"].get<std::string>() << "\n";
  return 0;
}

int cmd_daedalus(const std::string& env_path, const std::string& beta_csv,
                 const std::string& variant_name, int iterations, double rho_minus, double delta,
                 const std::string& method_name, double gamma, int actions, int order,
                 std::size_t budget, std::uint64_t seed, const std::string& out_path) {
  const SimEnv env = SimEnv::load(env_path);
  SafetySpec spec;
  spec.rho_minus = rho_minus;
  spec.delta = delta;
  spec.method = bound_method_from_name(method_name);

  DaedalusConfig config;
  config.beta_schedule = parse_size_list(beta_csv);
  config.iterations = iterations;
  config.search.disc = DiscountSpec{gamma};
  config.search.budget = budget;
  if (variant_name == "d1") {
    config.variant = DaedalusVariant::D1;
  } else if (variant_name == "d2") {
    config.variant = DaedalusVariant::D2;
  } else {
    fail("InvalidParameter", "--variant must be d1 or d2");
  }
  config.shape.num_actions = actions;
  config.shape.state_dim = 1;
  config.shape.fourier_order = order;
  const Policy pi0 = Policy::uniform(actions);

  ManifestBuilder mb("daedalus", seed);
  mb.input(env_path);
  mb.flag("beta", beta_csv);
  mb.flag("variant", variant_name);
  mb.flag("iters", iterations);
  mb.flag("rho_minus", rho_minus);
  mb.flag("delta", delta);
  mb.flag("method", method_name);

  const DaedalusResult result = daedalus(env, pi0, spec, config, seed);
  std::ostringstream out;
  out << mb.manifest_line() << "\n";
  for (const DaedalusIteration& entry : result.log) {
    json row;
    row["iteration"] = entry.iteration;
    row["beta"] = entry.beta;
    row["total_trajectories"] = entry.total_trajectories;
    row["incumbent"] = entry.incumbent;
    row["incumbent_score"] = entry.incumbent_score;
    row["accepted"] = entry.accepted;
    row["candidate_score"] = entry.candidate_score;
    row["test_bound"] = bound_to_json(entry.test_bound);
    row["used_kfold"] = entry.used_kfold;
    row["train_size"] = entry.train_size;
    row["test_size"] = entry.test_size;
    out << row.dump() << "\n";
  }
  write_text(out_path, out.str());
  json summary;
  summary["library_size"] = result.library.size();
  summary["iterations"] = result.log.size();
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_nope(const std::string& in_path, const std::string& policy_path, std::size_t bin_width,
             const std::string& estimator_name_, double gamma, const std::string& out_path) {
  const Dataset data = read_jsonl(in_path);
  const Policy pi_e = Policy::load(policy_path);
  const Estimator estimator = estimator_from_name(estimator_name_);
  const DiscountSpec disc{gamma};

  ManifestBuilder mb("nope", 0);
  mb.input(in_path);
  mb.input(policy_path);
  mb.flag("bin", static_cast<std::uint64_t>(bin_width));
  mb.flag("estimator", estimator_name_);
  mb.flag("gamma", gamma);

  const RollingReport report = rolling_compare(data, pi_e, bin_width, estimator, disc);
  std::ostringstream csv;
  csv << "# manifest: " << mb.str() << "\n";
  csv << "# rmse_tsp=" << fmt_double(report.rmse_tsp)
      << " rmse_standard=" << fmt_double(report.rmse_standard) << "\n";
  csv << "bin,actual,tsp_pred,standard_pred\n";
  for (std::size_t i = 0; i < report.actual.size(); ++i) {
    csv << (i + 1) << ',' << fmt_double(report.actual[i]) << ','
        << fmt_double(report.tsp_pred[i]) << ',' << fmt_double(report.standard_pred[i]) << "\n";
  }
  write_text(out_path, csv.str());

  json summary;
  summary["rmse_tsp"] = report.rmse_tsp;
  summary["rmse_standard"] = report.rmse_standard;
  summary["bins"] = report.actual.size() + 1;
  summary["tsp_fallbacks"] = report.tsp_fallbacks;
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_pst_fit(const std::string& in_path, int depth, std::size_t min_count,
                double prune_epsilon, const std::string& out_path) {
  const std::vector<std::vector<int>> sequences = read_sequences(in_path);
  const Pst pst = Pst::fit(sequences, depth, min_count, prune_epsilon);

  ManifestBuilder mb("pst-fit", 0);
  mb.input(in_path);
  mb.flag("depth", depth);
  mb.flag("min_count", static_cast<std::uint64_t>(min_count));
  mb.flag("prune_eps", prune_epsilon);

  const double loglik = pst_loglik(pst, sequences);
  std::size_t total_symbols = 0;
  for (const auto& seq : sequences) total_symbols += seq.size();
  const std::size_t k = pst_num_parameters(pst);

  json out;
  out["pst"] = json::parse(pst.to_json_string());
  out["frequencies"] = symbol_frequencies(pst, sequences);
  out["loglik"] = loglik;
  out["parameters"] = k;
  out["observations"] = total_symbols;
  if (total_symbols > k + 1) out["aicc"] = aicc(loglik, k, total_symbols);
  out["manifest"] = json::parse(mb.str());
  write_text(out_path, out.dump(2) + "\n");

  json summary;
  summary["nodes"] = pst.num_nodes();
  summary["loglik"] = loglik;
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_psrl(const std::string& pst_path, const std::string& theta_csv, double theta_star,
             std::size_t horizon, double gamma, double action_cost, double fatigue_cost,
             std::uint64_t seed, bool greedy_baseline, const std::string& out_path) {
  std::ifstream in(pst_path);
  require(in.good(), "IoError", "cannot open " + pst_path);
  json jfile = json::parse(in, nullptr, false);
  require(!jfile.is_discarded(), "ParseError", "malformed PST JSON in " + pst_path);

  PsrlSetup setup;
  setup.pst = Pst::from_json_string(jfile.dump());
  setup.family.grid = parse_double_list(theta_csv);
  setup.theta_star = theta_star;
  setup.disc = DiscountSpec{gamma};
  setup.rewards.action_cost = action_cost;
  setup.rewards.fatigue_cost = fatigue_cost;
  if (jfile.contains("frequencies")) {
    setup.rewards.desirability = jfile["frequencies"].get<std::vector<double>>();
  } else {
    setup.rewards.desirability.assign(setup.pst.alphabet_size(),
                                      1.0 / setup.pst.alphabet_size());
  }

  ManifestBuilder mb("psrl", seed);
  mb.input(pst_path);
  mb.flag("thetas", theta_csv);
  mb.flag("theta_star", theta_star);
  mb.flag("T", static_cast<std::uint64_t>(horizon));
  mb.flag("gamma", gamma);
  mb.flag("baseline", greedy_baseline ? "greedy" : "none");

  const PsrlRunLog log = greedy_baseline ? greedy_thompson(setup, horizon, seed)
                                         : ds_psrl(setup, horizon, seed);
  std::ostringstream out;
  out << mb.manifest_line() << "\n";
  for (const PsrlStep& step : log.steps) {
    json row;
    row["t"] = step.t;
    row["state"] = step.state;
    row["action"] = step.action;
    row["reward"] = step.reward;
    row["theta"] = step.theta_sampled;
    row["switched"] = step.switched;
    row["posterior"] = step.posterior;
    out << row.dump() << "\n";
  }
  write_text(out_path, out.str());

  json summary;
  summary["average_reward"] = log.average_reward;
  summary["switches"] = log.switch_count;
  summary["null_actions"] = log.null_actions;
  summary["final_posterior"] = log.final_posterior;
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_capacity(const std::string& family_path, const std::string& caps_path, int agents,
                 double min_prob, double alpha_shape, const std::string& out_path,
                 const std::string& load_csv_path) {
  const TypedMdpFamily family = TypedMdpFamily::load(family_path);
  const CapacitySpec caps = CapacitySpec::load(caps_path);
  require(agents >= 1, "InvalidParameter", "--agents must be >= 1");
  std::vector<TypedMdpFamily> families(static_cast<std::size_t>(agents), family);

  CgConfig config;
  config.min_prob = min_prob;
  config.alpha_shape = alpha_shape;

  ManifestBuilder mb("capacity", 0);
  mb.input(family_path);
  mb.input(caps_path);
  mb.flag("agents", agents);
  mb.flag("p", min_prob);
  mb.flag("alpha", alpha_shape);

  const CgResult result = column_generation(families, caps, config);
  json out;
  out["objective"] = result.master.objective;
  out["iterations"] = result.iterations;
  out["objective_trace"] = result.objective_trace;
  out["mix"] = result.master.mix;
  out["duals"] = result.master.duals;
  out["manifest"] = json::parse(mb.str());
  write_text(out_path, out.dump(2) + "\n");

  if (!load_csv_path.empty()) {
    const int horizon = family.horizon;
    std::ostringstream csv;
    csv << "# manifest: " << mb.str() << "\n";
    csv << "t,resource,expected_load,limit\n";
    for (int t = 0; t < horizon; ++t) {
      for (int res = 0; res < caps.num_resources(); ++res) {
        double load = 0.0;
        for (int i = 0; i < agents; ++i) {
          for (std::size_t j = 0; j < result.columns[i].size(); ++j) {
            load += result.master.mix[i][j] *
                    result.columns[i][j].expected_consumption[t][res];
          }
        }
        csv << t << ',' << res << ',' << fmt_double(load) << ','
            << fmt_double(caps.limits[res]) << "\n";
      }
    }
    write_text(load_csv_path, csv.str());
  }
  json summary;
  summary["objective"] = result.master.objective;
  summary["iterations"] = result.iterations;
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_calibrate_fig1(std::size_t trials, double delta, int bootstrap_B,
                       const std::string& n_grid_csv, std::uint64_t seed,
                       const std::string& out_path) {
  const std::vector<std::size_t> n_grid =
      n_grid_csv.empty() ? std::vector<std::size_t>{20, 50, 100, 200, 500, 1000, 2000}
                         : parse_size_list(n_grid_csv);
  DistSpec dist;  // gamma with heavy upper tail, known mean 100

  ManifestBuilder mb("calibrate-fig1", seed);
  mb.flag("trials", static_cast<std::uint64_t>(trials));
  mb.flag("delta", delta);
  mb.flag("B", bootstrap_B);

  const std::vector<ErrorRateRow> rows =
      error_rate_experiment(dist, n_grid, trials, delta, seed, bootstrap_B);
  std::ostringstream csv;
  csv << "# manifest: " << mb.str() << "\n";
  csv << "n,ci_error_rate,tt_error_rate,bca_error_rate\n";
  for (const ErrorRateRow& row : rows) {
    csv << row.n << ',' << fmt_double(row.ci_rate) << ',' << fmt_double(row.tt_rate) << ','
        << fmt_double(row.bca_rate) << "\n";
  }
  write_text(out_path, csv.str());
  for (const ErrorRateRow& row : rows) {
    json line;
    line["n"] = row.n;
    line["ci"] = row.ci_rate;
    line["tt"] = row.tt_rate;
    line["bca"] = row.bca_rate;
    std::cout << line.dump() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"saferec: strategic-recommendation toolkit"};
  app.require_subcommand(1);
  std::size_t workers = 0;
  app.add_option("--workers", workers, "worker thread cap (0 = hardware)");

  int exit_code = 0;
  const auto run = [&](const std::function<int()>& body) {
    set_worker_count(workers);  // callbacks fire during parse
    try {
      exit_code = body();
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      exit_code = 1;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      exit_code = 1;
    }
  };

  // sim
  {
    auto* cmd = app.add_subcommand("sim", "generate trajectories from a simulator");
    auto env = std::make_shared<std::string>();
    auto policy = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto n = std::make_shared<std::size_t>(1000);
    auto seed = std::make_shared<std::uint64_t>();
    auto offset = std::make_shared<std::size_t>(0);
    cmd->add_option("--env", *env, "environment JSON")->required();
    cmd->add_option("--policy", *policy, "behavior policy JSON")->required();
    cmd->add_option("--n", *n, "number of trajectories")->required();
    cmd->add_option("--seed", *seed, "RNG seed")->required();
    cmd->add_option("--episode-offset", *offset, "drift index of the first episode");
    cmd->add_option("--out", *out, "output JSONL path")->required();
    cmd->callback([=, &run] {
      run([=] { return cmd_sim(*env, *policy, *n, *seed, *offset, *out); });
    });
  }
  // bound
  {
    auto* cmd = app.add_subcommand("bound", "high-confidence lower bound on a policy");
    auto in = std::make_shared<std::string>();
    auto policy = std::make_shared<std::string>();
    auto method = std::make_shared<std::string>("tt");
    auto estimator = std::make_shared<std::string>("psis");
    auto delta = std::make_shared<double>(0.05);
    auto gamma = std::make_shared<double>(1.0);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto has_seed = std::make_shared<bool>(false);
    auto bootstrap = std::make_shared<int>(kDefaultBootstrapB);
    auto m = std::make_shared<std::size_t>(0);
    auto out = std::make_shared<std::string>("bound.json");
    auto risk = std::make_shared<std::string>();
    auto risk_deltas = std::make_shared<std::string>();
    cmd->add_option("--in", *in, "trajectory JSONL")->required();
    cmd->add_option("--policy", *policy, "evaluation policy JSON")->required();
    cmd->add_option("--method", *method, "ci|tt|bca");
    cmd->add_option("--estimator", *estimator, "is|psis|wis");
    cmd->add_option("--delta", *delta, "confidence level");
    cmd->add_option("--gamma", *gamma, "reward discount");
    auto* seed_opt = cmd->add_option("--seed", *seed, "RNG seed (required for bca)");
    cmd->add_option("--B", *bootstrap, "bootstrap resamples");
    cmd->add_option("--m", *m, "predicted sample size (0 = actual n)");
    cmd->add_option("--out", *out, "output JSON path");
    cmd->add_option("--risk-table", *risk, "optional CSV of delta -> bound");
    cmd->add_option("--risk-deltas", *risk_deltas, "comma-separated deltas for the risk table");
    cmd->callback([=, &run] {
      *has_seed = seed_opt->count() > 0;
      run([=] {
        return cmd_bound(*in, *policy, *method, *estimator, *delta, *gamma,
                         *has_seed ? std::optional<std::uint64_t>(*seed) : std::nullopt,
                         *bootstrap, *m > 0 ? std::optional<std::size_t>(*m) : std::nullopt,
                         *out, *risk, *risk_deltas);
      });
    });
  }
  // fqi
  {
    auto* cmd = app.add_subcommand("fqi", "batch value-iteration training with bound tracking");
    auto train = std::make_shared<std::string>();
    auto val = std::make_shared<std::string>();
    auto test = std::make_shared<std::string>();
    auto iterations = std::make_shared<int>(10);
    auto gamma = std::make_shared<double>(0.9);
    auto epsilon = std::make_shared<double>(0.1);
    auto delta = std::make_shared<double>(0.05);
    auto method = std::make_shared<std::string>("tt");
    auto keep = std::make_shared<double>(1.0);
    auto regressor = std::make_shared<std::string>("tabular");
    auto seed = std::make_shared<std::uint64_t>();
    auto out_policy = std::make_shared<std::string>("policy.json");
    auto out_report = std::make_shared<std::string>("fqi.json");
    cmd->add_option("--train", *train)->required();
    cmd->add_option("--val", *val)->required();
    cmd->add_option("--test", *test)->required();
    cmd->add_option("--K", *iterations, "training iterations");
    cmd->add_option("--gamma", *gamma);
    cmd->add_option("--epsilon", *epsilon);
    cmd->add_option("--delta", *delta);
    cmd->add_option("--method", *method, "ci|tt|bca");
    cmd->add_option("--keep-fraction", *keep, "fraction of features kept");
    cmd->add_option("--regressor", *regressor, "tabular|forest");
    cmd->add_option("--seed", *seed)->required();
    cmd->add_option("--out-policy", *out_policy);
    cmd->add_option("--out", *out_report);
    cmd->callback([=, &run] {
      run([=] {
        return cmd_fqi(*train, *val, *test, *iterations, *gamma, *epsilon, *delta, *method,
                       *keep, *regressor, *seed, *out_policy, *out_report);
      });
    });
  }
  // improve
  {
    auto* cmd = app.add_subcommand("improve", "batch safety-tested policy improvement");
    auto train = std::make_shared<std::string>();
    auto test = std::make_shared<std::string>();
    auto rho = std::make_shared<double>();
    auto delta = std::make_shared<double>(0.05);
    auto method = std::make_shared<std::string>("tt");
    auto variant = std::make_shared<std::string>("kfold");
    auto gamma = std::make_shared<double>(1.0);
    auto actions = std::make_shared<int>(2);
    auto order = std::make_shared<int>(3);
    auto budget = std::make_shared<std::size_t>(400);
    auto seed = std::make_shared<std::uint64_t>();
    auto out = std::make_shared<std::string>("improve.json");
    cmd->add_option("--train", *train)->required();
    cmd->add_option("--test", *test)->required();
    cmd->add_option("--rho-minus", *rho)->required();
    cmd->add_option("--delta", *delta);
    cmd->add_option("--method", *method, "ci|tt|bca");
    cmd->add_option("--variant", *variant, "none|kfold");
    cmd->add_option("--gamma", *gamma);
    cmd->add_option("--actions", *actions, "action count of the search space");
    cmd->add_option("--order", *order, "Fourier order");
    cmd->add_option("--budget", *budget, "optimizer evaluations");
    cmd->add_option("--seed", *seed)->required();
    cmd->add_option("--out", *out);
    cmd->callback([=, &run] {
      run([=] {
        return cmd_improve(*train, *test, *rho, *delta, *method, *variant, *gamma, *actions,
                           *order, *budget, *seed, *out);
      });
    });
  }
  // daedalus
  {
    auto* cmd = app.add_subcommand("daedalus", "incremental safe policy improvement");
    auto env = std::make_shared<std::string>();
    auto beta = std::make_shared<std::string>("50");
    auto variant = std::make_shared<std::string>("d2");
    auto iterations = std::make_shared<int>(10);
    auto rho = std::make_shared<double>();
    auto delta = std::make_shared<double>(0.05);
    auto method = std::make_shared<std::string>("tt");
    auto gamma = std::make_shared<double>(1.0);
    auto actions = std::make_shared<int>(2);
    auto order = std::make_shared<int>(3);
    auto budget = std::make_shared<std::size_t>(200);
    auto seed = std::make_shared<std::uint64_t>();
    auto out = std::make_shared<std::string>("daedalus.jsonl");
    cmd->add_option("--env", *env)->required();
    cmd->add_option("--beta", *beta, "comma-separated batch sizes");
    cmd->add_option("--variant", *variant, "d1|d2");
    cmd->add_option("--iters", *iterations)->required();
    cmd->add_option("--rho-minus", *rho)->required();
    cmd->add_option("--delta", *delta);
    cmd->add_option("--method", *method);
    cmd->add_option("--gamma", *gamma);
    cmd->add_option("--actions", *actions);
    cmd->add_option("--order", *order);
    cmd->add_option("--budget", *budget);
    cmd->add_option("--seed", *seed)->required();
    cmd->add_option("--out", *out);
    cmd->callback([=, &run] {
      run([=] {
        return cmd_daedalus(*env, *beta, *variant, *iterations, *rho, *delta, *method, *gamma,
                            *actions, *order, *budget, *seed, *out);
      });
    });
  }
  // nope
  {
    auto* cmd = app.add_subcommand("nope", "non-stationary off-policy evaluation");
    auto in = std::make_shared<std::string>();
    auto policy = std::make_shared<std::string>();
    auto bin = std::make_shared<std::size_t>(500);
    auto estimator = std::make_shared<std::string>("is");
    auto gamma = std::make_shared<double>(1.0);
    auto out = std::make_shared<std::string>("nope.csv");
    cmd->add_option("--in", *in)->required();
    cmd->add_option("--policy", *policy)->required();
    cmd->add_option("--bin", *bin, "episodes per bin");
    cmd->add_option("--estimator", *estimator, "is|psis|wis");
    cmd->add_option("--gamma", *gamma);
    cmd->add_option("--out", *out);
    cmd->callback([=, &run] {
      run([=] { return cmd_nope(*in, *policy, *bin, *estimator, *gamma, *out); });
    });
  }
  // pst fit
  {
    auto* cmd = app.add_subcommand("pst", "probabilistic suffix tree tools");
    auto* fit = cmd->add_subcommand("fit", "fit a tree from sequences");
    auto in = std::make_shared<std::string>();
    auto depth = std::make_shared<int>(2);
    auto min_count = std::make_shared<std::size_t>(1);
    auto prune = std::make_shared<double>(0.0);
    auto out = std::make_shared<std::string>("pst.json");
    fit->add_option("--in", *in, "sequence file, one comma-separated line each")->required();
    fit->add_option("--depth", *depth);
    fit->add_option("--min-count", *min_count);
    fit->add_option("--prune-eps", *prune);
    fit->add_option("--out", *out);
    fit->callback([=, &run] {
      run([=] { return cmd_pst_fit(*in, *depth, *min_count, *prune, *out); });
    });
    cmd->require_subcommand(1);
  }
  // psrl
  {
    auto* cmd = app.add_subcommand("psrl", "posterior-sampling control on a fitted tree");
    auto pst = std::make_shared<std::string>();
    auto thetas = std::make_shared<std::string>("1,10,20");
    auto theta_star = std::make_shared<double>();
    auto horizon = std::make_shared<std::size_t>(10000);
    auto gamma = std::make_shared<double>(0.9);
    auto action_cost = std::make_shared<double>(0.2);
    auto fatigue = std::make_shared<double>(0.4);
    auto seed = std::make_shared<std::uint64_t>();
    auto baseline = std::make_shared<bool>(false);
    auto out = std::make_shared<std::string>("psrl.jsonl");
    cmd->add_option("--pst", *pst)->required();
    cmd->add_option("--thetas", *thetas, "comma-separated grid");
    cmd->add_option("--theta-star", *theta_star, "hidden true theta")->required();
    cmd->add_option("--T", *horizon);
    cmd->add_option("--gamma", *gamma);
    cmd->add_option("--action-cost", *action_cost);
    cmd->add_option("--fatigue-cost", *fatigue);
    cmd->add_flag("--greedy-baseline", *baseline, "run the one-step Thompson baseline");
    cmd->add_option("--seed", *seed)->required();
    cmd->add_option("--out", *out);
    cmd->callback([=, &run] {
      run([=] {
        return cmd_psrl(*pst, *thetas, *theta_star, *horizon, *gamma, *action_cost, *fatigue,
                        *seed, *baseline, *out);
      });
    });
  }
  // capacity
  {
    auto* cmd = app.add_subcommand("capacity", "capacity-constrained multi-agent planning");
    auto family = std::make_shared<std::string>();
    auto caps = std::make_shared<std::string>();
    auto agents = std::make_shared<int>(1);
    auto min_prob = std::make_shared<double>(0.01);
    auto alpha = std::make_shared<double>(10.0);
    auto out = std::make_shared<std::string>("capacity.json");
    auto load_csv = std::make_shared<std::string>();
    cmd->add_option("--family", *family)->required();
    cmd->add_option("--caps", *caps)->required();
    cmd->add_option("--agents", *agents)->required();
    cmd->add_option("--p", *min_prob, "belief-space probability floor");
    cmd->add_option("--alpha", *alpha, "belief-space shape");
    cmd->add_option("--out", *out);
    cmd->add_option("--load-csv", *load_csv, "per-(t,r) expected load table");
    cmd->callback([=, &run] {
      run([=] {
        return cmd_capacity(*family, *caps, *agents, *min_prob, *alpha, *out, *load_csv);
      });
    });
  }
  // calibrate
  {
    auto* cmd = app.add_subcommand("calibrate", "bound calibration experiments");
    auto* fig1 = cmd->add_subcommand("fig1", "gamma-distribution error rates per sample size");
    auto trials = std::make_shared<std::size_t>(10000);
    auto delta = std::make_shared<double>(0.05);
    auto bootstrap = std::make_shared<int>(1000);
    auto grid = std::make_shared<std::string>();
    auto seed = std::make_shared<std::uint64_t>();
    auto out = std::make_shared<std::string>("fig1.csv");
    fig1->add_option("--trials", *trials);
    fig1->add_option("--delta", *delta);
    fig1->add_option("--B", *bootstrap, "bootstrap resamples per bound");
    fig1->add_option("--n-grid", *grid, "comma-separated sample sizes");
    fig1->add_option("--seed", *seed)->required();
    fig1->add_option("--out", *out);
    fig1->callback([=, &run] {
      run([=] { return cmd_calibrate_fig1(*trials, *delta, *bootstrap, *grid, *seed, *out); });
    });
    cmd->require_subcommand(1);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  return exit_code;
}
