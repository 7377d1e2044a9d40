#pragma once

#include "dan/data/normalize.hpp"
#include "dan/data/series.hpp"
#include "dan/forecast/rolling.hpp"

#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dan {

struct MetricsReport {
  double rmse = 0.0;                // original units
  double mape = 0.0;                // mean |f - y| / (|y| + 1)
  std::optional<double> rmse_far;   // over steps with standardized truth > threshold
  std::size_t n_points = 0;
  std::size_t n_far_points = 0;
};

inline constexpr double kFarThreshold = 1.5;

inline MetricsReport compute_metrics(std::span<const double> forecast, std::span<const double> truth,
                                     const NormTransform& norm, double far_threshold = kFarThreshold) {
  if (forecast.size() != truth.size()) {
    throw std::invalid_argument("compute_metrics: " + std::to_string(forecast.size()) + " forecasts vs " +
                                std::to_string(truth.size()) + " truth values");
  }
  if (forecast.empty()) throw std::invalid_argument("compute_metrics: nothing to score");
  MetricsReport r;
  double se = 0.0, ape = 0.0, se_far = 0.0;
  for (std::size_t i = 0; i < forecast.size(); ++i) {
    const double e = forecast[i] - truth[i];
    se += e * e;
    ape += std::abs(e) / (std::abs(truth[i]) + 1.0);
    if (norm.forward(truth[i]) > far_threshold) {
      se_far += e * e;
      ++r.n_far_points;
    }
  }
  r.n_points = forecast.size();
  r.rmse = std::sqrt(se / static_cast<double>(r.n_points));
  r.mape = ape / static_cast<double>(r.n_points);
  if (r.n_far_points > 0) r.rmse_far = std::sqrt(se_far / static_cast<double>(r.n_far_points));
  return r;
}

/// Pairs every forecast step with the truth at the same timestamp.
inline MetricsReport compute_metrics(const std::vector<Issuance>& forecasts, const TimeSeries& truth,
                                     const NormTransform& norm, double far_threshold = kFarThreshold) {
  std::vector<double> f, y;
  for (const Issuance& is : forecasts) {
    if (is.index + is.forecast.size() > truth.size()) {
      throw std::invalid_argument("compute_metrics: forecast issued at " + format_timestamp(is.issue_time) +
                                  " runs past the truth series");
    }
    f.insert(f.end(), is.forecast.begin(), is.forecast.end());
    y.insert(y.end(), truth.values.begin() + static_cast<std::ptrdiff_t>(is.index),
             truth.values.begin() + static_cast<std::ptrdiff_t>(is.index + is.forecast.size()));
  }
  return compute_metrics(f, y, norm, far_threshold);
}

/// `rmse,mape,rmse_far,n_points,n_far_points`; rmse_far is empty when absent.
inline void write_metrics(const std::string& path, const MetricsReport& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out.precision(12);
  out << "rmse,mape,rmse_far,n_points,n_far_points\n";
  out << m.rmse << ',' << m.mape << ',';
  if (m.rmse_far) out << *m.rmse_far;
  out << ',' << m.n_points << ',' << m.n_far_points << '\n';
}

}  // namespace dan
