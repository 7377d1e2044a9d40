#pragma once

#include "dan/data/series.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace dan::synth {

inline TimePoint default_start() { return *parse_timestamp("2020-01-01T00:00:00Z"); }

/// Period-50 sine around 10 with a sharp spike once per period at a fixed
/// phase. Strictly positive, so it survives the log transform.
inline TimeSeries sine_spike(std::size_t n = 500, std::size_t period = 50, std::size_t spike_phase = 35,
                             double spike_height = 12.0) {
  TimeSeries s{"sine_spike", default_start(), kDefaultInterval, std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(i % period) / static_cast<double>(period);
    s.values[i] = 10.0 + 4.0 * std::sin(phase) + (i % period == spike_phase ? spike_height : 0.0);
  }
  return s;
}

struct RainfallRunoffOptions {
  std::size_t length = 8000;
  double storm_rate = 0.004;      // storm onsets per step
  double storm_steps_mean = 6.0;  // mean storm duration
  double intensity_mean = 4.0;    // mean rain per storm step
  double baseflow = 3.0;
  double gain = 2.5;              // runoff per unit rain at the hydrograph peak
  double hydrograph_shape = 8.0;  // steps to peak response
  double noise = 0.04;            // multiplicative log-normal noise
  std::uint64_t seed = 0;
};

struct RainfallRunoff {
  TimeSeries flow;
  TimeSeries rain;
};

/// Rare storms on a slowly varying baseflow. Storm rain passes through a
/// gamma-shaped unit hydrograph, so flow is right-skewed with occasional
/// sharp peaks and long recessions.
inline RainfallRunoff rainfall_runoff(const RainfallRunoffOptions& o = {}) {
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::exponential_distribution<double> intensity(1.0 / o.intensity_mean);
  std::exponential_distribution<double> duration(1.0 / o.storm_steps_mean);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<double> rain(o.length, 0.0);
  for (std::size_t i = 0; i < o.length; ++i) {
    if (u(rng) >= o.storm_rate) continue;
    const auto steps = static_cast<std::size_t>(std::ceil(duration(rng)));
    const double peak = intensity(rng);
    for (std::size_t j = 0; j < steps && i + j < o.length; ++j) rain[i + j] += peak * (0.5 + u(rng));
  }

  const auto klen = static_cast<std::size_t>(o.hydrograph_shape * 8.0);
  std::vector<double> kernel(klen);
  double kmax = 0.0;
  for (std::size_t k = 0; k < klen; ++k) {
    const double x = static_cast<double>(k) / o.hydrograph_shape;
    kernel[k] = x * x * std::exp(-2.0 * x);
    kmax = std::max(kmax, kernel[k]);
  }
  for (double& k : kernel) k *= o.gain / kmax;

  std::vector<double> flow(o.length);
  for (std::size_t i = 0; i < o.length; ++i) {
    double q = o.baseflow * (1.0 + 0.15 * std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / 2000.0));
    for (std::size_t k = 0; k < klen && k <= i; ++k) q += kernel[k] * rain[i - k];
    flow[i] = q * std::exp(o.noise * gauss(rng));
  }
  return {TimeSeries{"flow", default_start(), kDefaultInterval, std::move(flow)},
          TimeSeries{"rain", default_start(), kDefaultInterval, std::move(rain)}};
}

}  // namespace dan::synth
