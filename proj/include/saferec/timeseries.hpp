#pragma once

#include <cstddef>
#include <vector>

#include "saferec/estimators.hpp"
#include "saferec/policy.hpp"
#include "saferec/trajectory.hpp"

namespace saferec {

// Episode-indexed OPE estimates, averaged over consecutive bins.
struct OpeSeries {
  std::vector<double> x;  // bin index
  std::vector<double> y;  // mean OPE estimate within the bin
  std::size_t bin_width = 1;
};

struct AcfResult {
  double value = 0.0;
  double band = 0.0;  // +-1.96 / sqrt(n) reference band
};

// Sample autocorrelation at the given lag. Throws ConstantSeries when the
// series has no variance.
AcfResult acf(const std::vector<double>& series, std::size_t lag);

OpeSeries bin_series(const Dataset& data, const Policy& pi_e, std::size_t bin_width,
                     Estimator estimator = Estimator::Is,
                     const DiscountSpec& disc = DiscountSpec{1.0});

// Autoregressive model on the d-times-differenced series, fit by least
// squares over a (p <= 5, d <= 1) grid and selected by AICc; ties go to the
// lexicographically smaller (p, d).
struct ForecastModel {
  int p = 0;
  int d = 0;
  std::vector<double> coefficients;  // coefficients[i] multiplies lag i+1
  double intercept = 0.0;
  double aicc = 0.0;
};

ForecastModel fit_forecast(const std::vector<double>& series);
double forecast_next(const ForecastModel& model, const std::vector<double>& series);

inline constexpr std::size_t kMinForecastLength = 10;

// Per-episode OPE series, forecast model, prediction for the next episode.
double tsp_predict(const Dataset& data, const Policy& pi_e,
                   Estimator estimator = Estimator::Is,
                   const DiscountSpec& disc = DiscountSpec{1.0});

struct RollingReport {
  double rmse_tsp = 0.0;
  double rmse_standard = 0.0;
  std::vector<double> actual;         // y_i for i >= 1
  std::vector<double> tsp_pred;       // forecast of y_i from y_0..y_{i-1}
  std::vector<double> standard_pred;  // cumulative mean of y_0..y_{i-1}
  std::size_t tsp_fallbacks = 0;      // predictions where TSP fell back to the mean
};

// Walk the binned series forward, predicting each point from its past with
// both the forecaster and the cumulative mean.
RollingReport rolling_compare(const Dataset& data, const Policy& pi_e, std::size_t bin_width,
                              Estimator estimator = Estimator::Is,
                              const DiscountSpec& disc = DiscountSpec{1.0});

}  // namespace saferec
