#pragma once

#include "dan/data/series.hpp"

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dan {

/// log(1 + v) followed by standardization. `mean`/`std` describe the
/// log-transformed training span; std is the population deviation.
struct NormTransform {
  double mean = 0.0;
  double std = 1.0;

  double forward(double raw) const { return (std::log1p(raw) - mean) / std; }
  double inverse(double z) const { return std::expm1(z * std + mean); }

  std::vector<double> forward(std::span<const double> raw) const {
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = forward(raw[i]);
    return out;
  }

  friend bool operator==(const NormTransform&, const NormTransform&) = default;
};

inline NormTransform fit_norm(std::span<const double> raw) {
  if (raw.empty()) throw std::invalid_argument("fit_norm: empty span");
  double sum = 0.0;
  for (double v : raw) {
    if (!(v >= 0.0)) throw std::invalid_argument("fit_norm: negative or missing value " + std::to_string(v));
    sum += std::log1p(v);
  }
  const double n = static_cast<double>(raw.size());
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : raw) {
    const double d = std::log1p(v) - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / n);
  if (!(sd > 0.0)) throw std::invalid_argument("fit_norm: constant series (std = 0)");
  return {mean, sd};
}

/// Fits on the first `fit_span` values (all when zero) and transforms the
/// whole series.
inline std::pair<std::vector<double>, NormTransform> fit_transform(const TimeSeries& series,
                                                                   std::size_t fit_span = 0) {
  series.require_complete();
  const std::size_t n = fit_span ? fit_span : series.size();
  if (n > series.size()) throw std::out_of_range("fit_transform: fit span past series end");
  const NormTransform t = fit_norm(std::span<const double>(series.values).first(n));
  return {t.forward(series.values), t};
}

}  // namespace dan
