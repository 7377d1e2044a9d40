#pragma once

#include "dan/data/normalize.hpp"
#include "dan/data/series.hpp"
#include "dan/network/dan.hpp"
#include "dan/train/checkpoint.hpp"
#include "dan/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dan {

/// Forecasts are issued every `stride` steps at series indices in
/// [start, end); each covers the `horizon` steps from its issue index.
struct RollingSchedule {
  std::size_t stride = 16;
  std::size_t horizon = 0;
  std::size_t start = 0;
  std::size_t end = 0;

  void validate() const {
    if (stride == 0) throw std::invalid_argument("rolling schedule: stride must be at least 1");
    if (horizon == 0) throw std::invalid_argument("rolling schedule: horizon must be at least 1");
    if (end <= start) throw std::invalid_argument("rolling schedule: empty test span");
  }
};

/// floor((span - 1) / stride) + 1
inline std::size_t issuance_count(std::size_t span, std::size_t stride) {
  if (span == 0 || stride == 0) throw std::invalid_argument("issuance_count: span and stride must be positive");
  return (span - 1) / stride + 1;
}

inline std::vector<std::size_t> issuance_indices(const RollingSchedule& s) {
  s.validate();
  std::vector<std::size_t> out;
  out.reserve(issuance_count(s.end - s.start, s.stride));
  for (std::size_t i = s.start; i < s.end; i += s.stride) out.push_back(i);
  return out;
}

/// Schedule over the timestamps [start, end) of `series`.
inline RollingSchedule make_schedule(const TimeSeries& series, TimePoint start, TimePoint end, std::size_t stride,
                                     std::size_t horizon) {
  const auto a = series.index_of(start);
  const auto b = series.index_of(end);
  if (!a) throw std::invalid_argument("test span start " + format_timestamp(start) + " is not on the series grid");
  if (!b) throw std::invalid_argument("test span end " + format_timestamp(end) + " is not on the series grid");
  RollingSchedule s{stride, horizon, *a, *b};
  s.validate();
  return s;
}

class InsufficientHistory : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Every issuance needs t steps of history before it and h steps of truth
/// from it.
inline void check_coverage(const TimeSeries& series, const RollingSchedule& s, std::size_t t) {
  s.validate();
  if (s.start < t) {
    const std::string first = t < series.size() ? format_timestamp(series.time_at(t)) : std::string("(none)");
    throw InsufficientHistory("issue time " + format_timestamp(series.time_at(s.start)) + " has only " +
                              std::to_string(s.start) + " steps of history, need " + std::to_string(t) +
                              "; first feasible issue time is " + first);
  }
  const std::size_t last = s.start + (issuance_count(s.end - s.start, s.stride) - 1) * s.stride;
  if (last + s.horizon > series.size()) {
    const std::string latest =
        series.size() >= s.horizon ? format_timestamp(series.time_at(series.size() - s.horizon)) : std::string("(none)");
    throw InsufficientHistory("issue time " + format_timestamp(series.time_at(last)) + " lacks " +
                              std::to_string(s.horizon) + " steps of ground truth; last feasible issue time is " +
                              latest);
  }
}

struct Issuance {
  TimePoint issue_time{};
  std::size_t index = 0;
  std::vector<double> forecast;  // original units, non-negative
};

/// Runs `predict` over the schedule in batches. `predict` maps a span of
/// issue indices to standardized h-step forecasts; results are inverted
/// through `norm` and clamped at zero.
template <class Predictor>
std::vector<Issuance> rolling_predict(Predictor&& predict, const TimeSeries& series, const NormTransform& norm,
                                      const RollingSchedule& schedule, std::size_t t, std::size_t batch = 128) {
  check_coverage(series, schedule, t);
  const auto indices = issuance_indices(schedule);
  std::vector<Issuance> out;
  out.reserve(indices.size());
  for (std::size_t b = 0; b < indices.size(); b += batch) {
    const std::span<const std::size_t> chunk(indices.data() + b, std::min(batch, indices.size() - b));
    const std::vector<std::vector<double>> z = predict(chunk);
    if (z.size() != chunk.size()) throw std::logic_error("rolling_predict: predictor returned wrong batch size");
    for (std::size_t r = 0; r < chunk.size(); ++r) {
      if (z[r].size() != schedule.horizon) throw std::logic_error("rolling_predict: predictor returned wrong horizon");
      Issuance is{series.time_at(chunk[r]), chunk[r], std::vector<double>(schedule.horizon)};
      for (std::size_t j = 0; j < schedule.horizon; ++j) is.forecast[j] = std::max(norm.inverse(z[r][j]), 0.0);
      out.push_back(std::move(is));
    }
  }
  return out;
}

/// Model-backed rolling inference. The indicator series is required for
/// checkpoints trained with one and must be absent for univariate ones.
inline std::vector<Issuance> rolling_predict(const Checkpoint& ck, const TimeSeries& ordinary,
                                             const TimeSeries* indicator, const RollingSchedule& schedule) {
  if (schedule.horizon != ck.config.h) {
    throw std::invalid_argument("rolling schedule horizon " + std::to_string(schedule.horizon) +
                                " differs from the checkpoint's h = " + std::to_string(ck.config.h));
  }
  const ModelInputs in = standardize_inputs(ck, ordinary, indicator);
  const ModelConfig mc = ck.config.model();
  const std::size_t t = ck.config.t;
  auto predictor = [&](std::span<const std::size_t> idx) {
    std::vector<std::vector<double>> xs, is;
    for (std::size_t i : idx) {
      xs.emplace_back(in.ordinary.begin() + static_cast<std::ptrdiff_t>(i - t),
                      in.ordinary.begin() + static_cast<std::ptrdiff_t>(i));
      is.emplace_back(in.indicator.begin() + static_cast<std::ptrdiff_t>(i - t),
                      in.indicator.begin() + static_cast<std::ptrdiff_t>(i));
    }
    std::vector<std::vector<double>> z;
    for (auto& b : forward_batch(mc, ck.params, xs, is)) z.push_back(std::move(b.y_hat));
    return z;
  };
  return rolling_predict(predictor, ordinary, ck.ordinary_norm, schedule, t);
}

/// `issue_time,step,forecast,truth`; step counts from 1.
inline void write_forecasts(const std::string& path, const std::vector<Issuance>& forecasts, const TimeSeries& truth) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "issue_time,step,forecast,truth\n";
  out.precision(12);
  for (const Issuance& is : forecasts) {
    const std::string ts = format_timestamp(is.issue_time);
    for (std::size_t j = 0; j < is.forecast.size(); ++j) {
      out << ts << ',' << j + 1 << ',' << is.forecast[j] << ',' << truth.values.at(is.index + j) << '\n';
    }
  }
}

}  // namespace dan
