#include "saferec/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "saferec/error.hpp"
#include "saferec/stats.hpp"

namespace saferec {

AcfResult acf(const std::vector<double>& series, std::size_t lag) {
  const std::size_t n = series.size();
  require(n >= 2, "TooFewSamples", "acf needs a series of length >= 2");
  require(lag < n, "InvalidParameter", "lag must be smaller than the series length");
  const double mu = mean(series);
  double denom = 0.0;
  for (double v : series) denom += (v - mu) * (v - mu);
  require(denom > 0.0, "ConstantSeries", "acf undefined for a constant series");
  double num = 0.0;
  for (std::size_t t = 0; t + lag < n; ++t) num += (series[t + lag] - mu) * (series[t] - mu);
  AcfResult out;
  out.value = num / denom;
  out.band = 1.96 / std::sqrt(static_cast<double>(n));
  return out;
}

OpeSeries bin_series(const Dataset& data, const Policy& pi_e, std::size_t bin_width,
                     Estimator estimator, const DiscountSpec& disc) {
  require(bin_width >= 1, "InvalidParameter", "bin width must be >= 1");
  const std::vector<double> per_episode =
      per_trajectory_estimates(data, pi_e, disc, estimator);
  OpeSeries series;
  series.bin_width = bin_width;
  for (std::size_t start = 0; start < per_episode.size(); start += bin_width) {
    const std::size_t end = std::min(per_episode.size(), start + bin_width);
    double sum = 0.0;
    for (std::size_t i = start; i < end; ++i) sum += per_episode[i];
    series.x.push_back(static_cast<double>(series.x.size()));
    series.y.push_back(sum / static_cast<double>(end - start));
  }
  return series;
}

namespace {

// Least squares for z_t = c + sum_i phi_i z_{t-i}; returns false when the
// normal equations are singular (collinear lags).
bool fit_ar(const std::vector<double>& z, int p, std::vector<double>& coeffs,
            double& intercept, double& sse, int& rows) {
  const int len = static_cast<int>(z.size());
  rows = len - p;
  const int dim = p + 1;
  if (rows < dim + 1) return false;

  std::vector<std::vector<double>> ata(dim, std::vector<double>(dim, 0.0));
  std::vector<double> atb(dim, 0.0);
  for (int t = p; t < len; ++t) {
    std::vector<double> row(dim, 1.0);
    for (int i = 1; i <= p; ++i) row[i] = z[t - i];
    for (int a = 0; a < dim; ++a) {
      for (int b = 0; b < dim; ++b) ata[a][b] += row[a] * row[b];
      atb[a] += row[a] * z[t];
    }
  }
  // Gaussian elimination with partial pivoting.
  for (int col = 0; col < dim; ++col) {
    int pivot = col;
    for (int r = col + 1; r < dim; ++r) {
      if (std::fabs(ata[r][col]) > std::fabs(ata[pivot][col])) pivot = r;
    }
    if (std::fabs(ata[pivot][col]) < 1e-12 * static_cast<double>(rows)) return false;
    std::swap(ata[col], ata[pivot]);
    std::swap(atb[col], atb[pivot]);
    for (int r = 0; r < dim; ++r) {
      if (r == col) continue;
      const double f = ata[r][col] / ata[col][col];
      for (int c = col; c < dim; ++c) ata[r][c] -= f * ata[col][c];
      atb[r] -= f * atb[col];
    }
  }
  std::vector<double> beta(dim);
  for (int i = 0; i < dim; ++i) beta[i] = atb[i] / ata[i][i];

  sse = 0.0;
  for (int t = p; t < len; ++t) {
    double pred = beta[0];
    for (int i = 1; i <= p; ++i) pred += beta[i] * z[t - i];
    const double resid = z[t] - pred;
    sse += resid * resid;
  }
  intercept = beta[0];
  coeffs.assign(beta.begin() + 1, beta.end());
  return true;
}

std::vector<double> difference(const std::vector<double>& y) {
  std::vector<double> z(y.size() - 1);
  for (std::size_t t = 1; t < y.size(); ++t) z[t - 1] = y[t] - y[t - 1];
  return z;
}

}  // namespace

ForecastModel fit_forecast(const std::vector<double>& series) {
  require(series.size() >= kMinForecastLength, "DegenerateSeries",
          "forecaster needs a series of length >= " + std::to_string(kMinForecastLength));

  ForecastModel best;
  double best_aicc = std::numeric_limits<double>::infinity();
  bool found = false;
  for (int p = 0; p <= 5; ++p) {
    for (int d = 0; d <= 1; ++d) {
      const std::vector<double> z = d == 0 ? series : difference(series);
      std::vector<double> coeffs;
      double intercept = 0.0;
      double sse = 0.0;
      int rows = 0;
      if (!fit_ar(z, p, coeffs, intercept, sse, rows)) continue;
      const int k = p + 1;
      if (rows <= k + 1) continue;  // AICc undefined
      const double variance = std::max(sse / static_cast<double>(rows), 1e-300);
      const double loglik =
          -0.5 * static_cast<double>(rows) * (std::log(2.0 * M_PI * variance) + 1.0);
      const double aicc = 2.0 * k - 2.0 * loglik +
                          2.0 * k * (k + 1.0) / static_cast<double>(rows - k - 1);
      if (aicc < best_aicc) {
        best_aicc = aicc;
        best.p = p;
        best.d = d;
        best.coefficients = coeffs;
        best.intercept = intercept;
        best.aicc = aicc;
        found = true;
      }
    }
  }
  require(found, "DegenerateSeries", "no autoregressive order could be fit");
  return best;
}

double forecast_next(const ForecastModel& model, const std::vector<double>& series) {
  const std::size_t n = series.size();
  require(n > static_cast<std::size_t>(model.p + model.d), "TooFewSamples",
          "series too short for the fitted model");
  const std::vector<double> z = model.d == 0 ? series : difference(series);
  double pred = model.intercept;
  for (int i = 1; i <= model.p; ++i) pred += model.coefficients[i - 1] * z[z.size() - i];
  return model.d == 0 ? pred : series.back() + pred;
}

double tsp_predict(const Dataset& data, const Policy& pi_e, Estimator estimator,
                   const DiscountSpec& disc) {
  const OpeSeries series = bin_series(data, pi_e, 1, estimator, disc);
  const ForecastModel model = fit_forecast(series.y);
  return forecast_next(model, series.y);
}

RollingReport rolling_compare(const Dataset& data, const Policy& pi_e, std::size_t bin_width,
                              Estimator estimator, const DiscountSpec& disc) {
  const OpeSeries series = bin_series(data, pi_e, bin_width, estimator, disc);
  require(series.y.size() >= 2, "TooFewSamples", "rolling comparison needs >= 2 bins");

  RollingReport report;
  double sse_tsp = 0.0;
  double sse_std = 0.0;
  std::vector<double> history;
  history.reserve(series.y.size());
  history.push_back(series.y.front());
  for (std::size_t i = 1; i < series.y.size(); ++i) {
    const double standard = mean(history);
    double tsp = standard;
    if (history.size() >= kMinForecastLength) {
      tsp = forecast_next(fit_forecast(history), history);
    } else {
      ++report.tsp_fallbacks;
    }
    const double actual = series.y[i];
    report.actual.push_back(actual);
    report.tsp_pred.push_back(tsp);
    report.standard_pred.push_back(standard);
    sse_tsp += (tsp - actual) * (tsp - actual);
    sse_std += (standard - actual) * (standard - actual);
    history.push_back(actual);
  }
  const double count = static_cast<double>(report.actual.size());
  report.rmse_tsp = std::sqrt(sse_tsp / count);
  report.rmse_standard = std::sqrt(sse_std / count);
  return report;
}

}  // namespace saferec
