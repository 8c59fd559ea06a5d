#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "saferec/estimators.hpp"
#include "saferec/policy.hpp"
#include "saferec/trajectory.hpp"

namespace saferec {

enum class BoundMethod { CI, TT, BCa };

BoundMethod bound_method_from_name(const std::string& name);
std::string bound_method_name(BoundMethod method);

struct BoundResult {
  double lower_bound = 0.0;
  BoundMethod method = BoundMethod::TT;
  double delta = 0.05;
  std::size_t n = 0;
  // diagnostics
  double sample_mean = 0.0;
  double sample_std = 0.0;
  std::optional<double> truncation_threshold;
  std::optional<int> bootstrap_B;
  bool conservative_fallback = false;  // CI with n < 40: clip at max(xs)
  bool degenerate = false;             // BCa with identical resample means

  std::string to_json_string() const;
};

// One-tailed Student's t lower bound: mean - (std/sqrt(m)) * t_{1-delta,m-1}.
// m defaults to n; passing m > n predicts the bound a larger sample would
// give (used when picking candidates that must later pass a safety test).
BoundResult lower_bound_ttest(const std::vector<double>& xs, double delta,
                              std::optional<std::size_t> m = std::nullopt);

// Distribution-free bound for nonnegative variables: clip each sample at a
// threshold c (the clipped mean lower-bounds the true mean), then apply an
// empirical Bernstein bound for [0,c]-valued variables:
//   mean(Y) - sqrt(2 V ln(2/delta) / m) - 7 c ln(2/delta) / (3 (m-1)).
// By default c is the 95th percentile of a 1/20 held-out slice and the bound
// is computed on the remaining 19/20; with fewer than 40 samples c = max(xs)
// and the result is flagged conservative. clip_threshold overrides c and
// keeps all samples in the bound.
BoundResult lower_bound_ci(const std::vector<double>& xs, double delta,
                           std::optional<std::size_t> m = std::nullopt,
                           std::optional<double> clip_threshold = std::nullopt);

// One-sided bias-corrected and accelerated bootstrap lower bound. Resamples
// are seeded per replicate, so results are a pure function of
// (xs, delta, B, seed) regardless of thread count. When m is given,
// replicates resample m points instead of n.
BoundResult lower_bound_bca(const std::vector<double>& xs, double delta, int B,
                            std::uint64_t seed, std::optional<std::size_t> m = std::nullopt);

inline constexpr int kDefaultBootstrapB = 2000;

BoundResult bound_from_samples(const std::vector<double>& xs, double delta, BoundMethod method,
                               std::optional<std::size_t> m = std::nullopt,
                               int bootstrap_B = kDefaultBootstrapB, std::uint64_t seed = 0);

// Importance-sample the dataset with the chosen estimator, then bound.
BoundResult bound_policy(const Dataset& data, const Policy& pi_e, double delta,
                         BoundMethod method, Estimator estimator,
                         const DiscountSpec& disc = DiscountSpec{1.0},
                         std::optional<std::size_t> m = std::nullopt,
                         int bootstrap_B = kDefaultBootstrapB, std::uint64_t seed = 0);

// Calibration experiment: empirical rate at which each bound exceeds the
// known true mean, per sample size.
struct DistSpec {
  enum class Kind { Gamma, PointMass };
  Kind kind = Kind::Gamma;
  double shape = 2.0;
  double scale = 50.0;
  double value = 0.0;  // point mass location

  double true_mean() const { return kind == Kind::Gamma ? shape * scale : value; }
};

struct ErrorRateRow {
  std::size_t n = 0;
  double ci_rate = 0.0;
  double tt_rate = 0.0;
  double bca_rate = 0.0;
};

std::vector<ErrorRateRow> error_rate_experiment(const DistSpec& dist,
                                                const std::vector<std::size_t>& n_grid,
                                                std::size_t trials, double delta,
                                                std::uint64_t seed, int bootstrap_B = 1000);

}  // namespace saferec
