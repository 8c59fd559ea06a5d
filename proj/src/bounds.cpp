#include "saferec/bounds.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "saferec/error.hpp"
#include "saferec/parallel.hpp"
#include "saferec/rng.hpp"
#include "saferec/stats.hpp"

namespace saferec {

using nlohmann::json;

BoundMethod bound_method_from_name(const std::string& name) {
  if (name == "ci") return BoundMethod::CI;
  if (name == "tt") return BoundMethod::TT;
  if (name == "bca") return BoundMethod::BCa;
  fail("UnknownMethod", "bound method must be one of ci, tt, bca");
}

std::string bound_method_name(BoundMethod method) {
  switch (method) {
    case BoundMethod::CI: return "ci";
    case BoundMethod::TT: return "tt";
    case BoundMethod::BCa: return "bca";
  }
  return "?";
}

std::string BoundResult::to_json_string() const {
  json j;
  j["lower_bound"] = lower_bound;
  j["method"] = bound_method_name(method);
  j["delta"] = delta;
  j["n"] = n;
  j["sample_mean"] = sample_mean;
  j["sample_std"] = sample_std;
  if (truncation_threshold) j["truncation_threshold"] = *truncation_threshold;
  if (bootstrap_B) j["bootstrap_B"] = *bootstrap_B;
  if (conservative_fallback) j["conservative_fallback"] = true;
  if (degenerate) j["degenerate"] = true;
  return j.dump();
}

namespace {

void check_delta(double delta) {
  require(delta > 0.0 && delta <= 0.5, "InvalidDelta", "delta must lie in (0, 0.5]");
}

void check_nonnegative(const std::vector<double>& xs) {
  for (double x : xs) {
    require(std::isfinite(x) && x >= 0.0, "InvalidSample", "samples must be finite and >= 0");
  }
}

}  // namespace

BoundResult lower_bound_ttest(const std::vector<double>& xs, double delta,
                              std::optional<std::size_t> m) {
  check_delta(delta);
  require(xs.size() >= 2, "TooFewSamples", "t-test bound needs n >= 2");
  check_nonnegative(xs);
  const std::size_t m_eff = m.value_or(xs.size());
  require(m_eff >= 2, "TooFewSamples", "prediction size m must be >= 2");

  BoundResult result;
  result.method = BoundMethod::TT;
  result.delta = delta;
  result.n = xs.size();
  result.sample_mean = mean(xs);
  result.sample_std = sample_std(xs);
  const double t = student_t_quantile(1.0 - delta, static_cast<double>(m_eff - 1));
  result.lower_bound =
      result.sample_mean - result.sample_std / std::sqrt(static_cast<double>(m_eff)) * t;
  return result;
}

BoundResult lower_bound_ci(const std::vector<double>& xs, double delta,
                           std::optional<std::size_t> m, std::optional<double> clip_threshold) {
  check_delta(delta);
  require(xs.size() >= 2, "TooFewSamples", "CI bound needs n >= 2");
  check_nonnegative(xs);

  BoundResult result;
  result.method = BoundMethod::CI;
  result.delta = delta;
  result.n = xs.size();
  result.sample_mean = mean(xs);
  result.sample_std = sample_std(xs);

  double c = 0.0;
  std::vector<double> eval;
  if (clip_threshold) {
    c = *clip_threshold;
    require(c >= 0.0, "InvalidParameter", "clip threshold must be >= 0");
    eval = xs;
  } else if (xs.size() < 40) {
    c = *std::max_element(xs.begin(), xs.end());
    eval = xs;
    result.conservative_fallback = true;
  } else {
    // Every 20th sample picks the threshold; the rest take the bound, so the
    // clipped variables stay independent of their own clip level.
    std::vector<double> held_out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (i % 20 == 0) {
        held_out.push_back(xs[i]);
      } else {
        eval.push_back(xs[i]);
      }
    }
    c = percentile(held_out, 0.95);
  }
  result.truncation_threshold = c;

  for (double& y : eval) y = std::min(y, c);
  const std::size_t m_eff = m.value_or(eval.size());
  require(m_eff >= 2, "TooFewSamples", "prediction size m must be >= 2");
  const double log_term = std::log(2.0 / delta);
  const double clipped_mean = mean(eval);
  const double clipped_var = eval.size() >= 2 ? sample_variance(eval) : 0.0;
  result.lower_bound = clipped_mean -
                       std::sqrt(2.0 * clipped_var * log_term / static_cast<double>(m_eff)) -
                       7.0 * c * log_term / (3.0 * static_cast<double>(m_eff - 1));
  return result;
}

BoundResult lower_bound_bca(const std::vector<double>& xs, double delta, int B,
                            std::uint64_t seed, std::optional<std::size_t> m) {
  check_delta(delta);
  require(xs.size() >= 3, "TooFewSamples", "BCa bound needs n >= 3");
  require(B >= 1000, "InvalidParameter", "BCa needs B >= 1000");
  check_nonnegative(xs);

  const std::size_t n = xs.size();
  const std::size_t resample_size = m.value_or(n);
  require(resample_size >= 1, "InvalidParameter", "resample size must be >= 1");

  BoundResult result;
  result.method = BoundMethod::BCa;
  result.delta = delta;
  result.n = n;
  result.sample_mean = mean(xs);
  result.sample_std = sample_std(xs);
  result.bootstrap_B = B;

  std::vector<double> boot(static_cast<std::size_t>(B));
  parallel_for(boot.size(), [&](std::size_t b) {
    Rng rng(derive_seed(seed, b));
    double sum = 0.0;
    for (std::size_t k = 0; k < resample_size; ++k) {
      sum += xs[rng.uniform_int(n)];
    }
    boot[b] = sum / static_cast<double>(resample_size);
  });

  const auto [lo_it, hi_it] = std::minmax_element(boot.begin(), boot.end());
  if (*lo_it == *hi_it) {
    result.degenerate = true;
    result.lower_bound = *lo_it;
    return result;
  }

  std::size_t below = 0;
  for (double b : boot) below += b < result.sample_mean ? 1 : 0;
  double frac = static_cast<double>(below) / static_cast<double>(B);
  frac = std::clamp(frac, 1.0 / (B + 1.0), static_cast<double>(B) / (B + 1.0));
  const double z0 = normal_quantile(frac);

  // Acceleration from jackknife skewness of the mean.
  const double total = pairwise_sum(xs);
  double sum_sq = 0.0;
  double sum_cu = 0.0;
  const double jack_mean = total / static_cast<double>(n);  // mean of leave-one-out means
  for (std::size_t i = 0; i < n; ++i) {
    const double loo = (total - xs[i]) / static_cast<double>(n - 1);
    const double d = jack_mean - loo;
    sum_sq += d * d;
    sum_cu += d * d * d;
  }
  double accel = 0.0;
  if (sum_sq > 0.0) accel = sum_cu / (6.0 * std::pow(sum_sq, 1.5));

  const double z_delta = normal_quantile(delta);
  double denom = 1.0 - accel * (z0 + z_delta);
  if (std::fabs(denom) < 1e-10) denom = std::copysign(1e-10, denom);
  const double alpha1 = normal_cdf(z0 + (z0 + z_delta) / denom);

  std::sort(boot.begin(), boot.end());
  const auto idx = static_cast<std::size_t>(std::clamp(
      std::floor(alpha1 * B), 0.0, static_cast<double>(B - 1)));
  result.lower_bound = boot[idx];
  return result;
}

BoundResult bound_from_samples(const std::vector<double>& xs, double delta, BoundMethod method,
                               std::optional<std::size_t> m, int bootstrap_B,
                               std::uint64_t seed) {
  switch (method) {
    case BoundMethod::CI: return lower_bound_ci(xs, delta, m);
    case BoundMethod::TT: return lower_bound_ttest(xs, delta, m);
    case BoundMethod::BCa: return lower_bound_bca(xs, delta, bootstrap_B, seed, m);
  }
  fail("UnknownMethod", "unreachable bound method");
}

BoundResult bound_policy(const Dataset& data, const Policy& pi_e, double delta,
                         BoundMethod method, Estimator estimator, const DiscountSpec& disc,
                         std::optional<std::size_t> m, int bootstrap_B, std::uint64_t seed) {
  require(!data.empty(), "EmptyData", "bound_policy needs a nonempty dataset");
  const std::vector<double> xs = per_trajectory_estimates(data, pi_e, disc, estimator);
  return bound_from_samples(xs, delta, method, m, bootstrap_B, seed);
}

std::vector<ErrorRateRow> error_rate_experiment(const DistSpec& dist,
                                                const std::vector<std::size_t>& n_grid,
                                                std::size_t trials, double delta,
                                                std::uint64_t seed, int bootstrap_B) {
  require(trials >= 1000, "InvalidParameter", "error-rate experiment needs >= 1000 trials");
  check_delta(delta);
  const double truth = dist.true_mean();

  std::vector<ErrorRateRow> rows;
  rows.reserve(n_grid.size());
  for (std::size_t ni = 0; ni < n_grid.size(); ++ni) {
    const std::size_t n = n_grid[ni];
    require(n >= 3, "InvalidParameter", "sample sizes must be >= 3");
    std::vector<std::uint8_t> ci_err(trials, 0);
    std::vector<std::uint8_t> tt_err(trials, 0);
    std::vector<std::uint8_t> bca_err(trials, 0);
    parallel_for(trials, [&](std::size_t trial) {
      const std::uint64_t trial_seed = derive_seed(seed, ni, trial);
      Rng rng(trial_seed);
      std::vector<double> xs(n);
      for (double& x : xs) {
        x = dist.kind == DistSpec::Kind::Gamma ? rng.gamma(dist.shape, dist.scale) : dist.value;
      }
      ci_err[trial] = lower_bound_ci(xs, delta).lower_bound > truth ? 1 : 0;
      tt_err[trial] = lower_bound_ttest(xs, delta).lower_bound > truth ? 1 : 0;
      bca_err[trial] =
          lower_bound_bca(xs, delta, bootstrap_B, derive_seed(trial_seed, 0xb0075ULL))
                  .lower_bound > truth
              ? 1
              : 0;
    });
    ErrorRateRow row;
    row.n = n;
    double ci = 0.0;
    double tt = 0.0;
    double bca = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      ci += ci_err[t];
      tt += tt_err[t];
      bca += bca_err[t];
    }
    row.ci_rate = ci / static_cast<double>(trials);
    row.tt_rate = tt / static_cast<double>(trials);
    row.bca_rate = bca / static_cast<double>(trials);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace saferec
