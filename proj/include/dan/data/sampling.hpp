#pragma once

#include "dan/data/kruskal_wallis.hpp"

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dan {

struct WindowShape {
  std::size_t input = 0;    // t
  std::size_t horizon = 0;  // h

  std::size_t total() const { return input + horizon; }
};

/// Oversampling policy: windows with H >= epsilon are always kept, the rest
/// with probability p.
struct SamplingPolicy {
  double epsilon = 10.0;
  double p = 1.0;
  std::size_t groups = 4;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("sampling policy: p must lie in (0, 1]");
    if (groups < 2) throw std::invalid_argument("sampling policy: k must be at least 2");
    if (!(epsilon >= 0.0)) throw std::invalid_argument("sampling policy: epsilon must be non-negative");
  }
};

/// Standardized views of the aligned series a sampler draws from. H is
/// scored on `raw_ordinary` (original units). Leaving `ordinary` and
/// `indicator` empty records statistics without building windows.
struct SeriesView {
  std::span<const double> raw_ordinary;
  std::span<const double> ordinary;
  std::span<const double> indicator;
};

struct TrainingWindow {
  std::size_t offset = 0;
  std::vector<double> input_ordinary;
  std::vector<double> input_indicator;
  std::vector<double> target;
  double h_stat = 0.0;

  double last_observed() const { return input_ordinary.back(); }
  double last_indicator() const { return input_indicator.back(); }
};

struct SampleResult {
  std::vector<TrainingWindow> windows;
  std::vector<double> drawn_h;     // H of every draw, accepted or not
  std::vector<double> accepted_h;  // H of the kept draws
  std::size_t drawn = 0;
  std::size_t drawn_below = 0;     // draws with H < epsilon
  std::size_t accepted_below = 0;  // of those, kept by the coin

  double below_acceptance_rate() const {
    return drawn_below ? static_cast<double>(accepted_below) / static_cast<double>(drawn_below) : 0.0;
  }
};

/// Per-draw generator derived from (seed, draw index) alone, so draws are
/// reproducible independently of policy and order.
inline std::mt19937_64 draw_rng(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(std::uint64_t(index) >> 32)};
  return std::mt19937_64(seq);
}

inline TrainingWindow make_window(const SeriesView& view, WindowShape shape, std::size_t offset, double h_stat) {
  TrainingWindow w;
  w.offset = offset;
  auto ord = view.ordinary.subspan(offset, shape.total());
  auto ind = view.indicator.subspan(offset, shape.input);
  w.input_ordinary.assign(ord.begin(), ord.begin() + static_cast<std::ptrdiff_t>(shape.input));
  w.target.assign(ord.begin() + static_cast<std::ptrdiff_t>(shape.input), ord.end());
  w.input_indicator.assign(ind.begin(), ind.end());
  w.h_stat = h_stat;
  return w;
}

/// Draws `n_draws` uniformly random window starts (with replacement) and
/// keeps each per the policy.
inline SampleResult sample_training_set(const SeriesView& view, WindowShape shape, const SamplingPolicy& policy,
                                        std::size_t n_draws) {
  policy.validate();
  if (n_draws == 0) throw std::invalid_argument("sample_training_set: n_draws must be positive");
  if (shape.input == 0 || shape.horizon == 0) throw std::invalid_argument("sample_training_set: t and h must be positive");
  const std::size_t len = view.raw_ordinary.size();
  const bool materialize = !view.ordinary.empty() || !view.indicator.empty();
  if (materialize && (view.ordinary.size() != len || view.indicator.size() != len)) {
    throw std::invalid_argument("sample_training_set: ordinary and indicator series differ in length");
  }
  if (len < shape.total()) {
    throw std::invalid_argument("sample_training_set: series of " + std::to_string(len) +
                                " steps is shorter than t+h = " + std::to_string(shape.total()));
  }

  SampleResult result;
  result.drawn = n_draws;
  result.drawn_h.reserve(n_draws);
  std::uniform_int_distribution<std::size_t> start_dist(0, len - shape.total());
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (std::size_t d = 0; d < n_draws; ++d) {
    auto rng = draw_rng(policy.seed, d);
    const std::size_t offset = start_dist(rng);
    const double toss = coin(rng);
    const double h = kw_statistic(view.raw_ordinary.subspan(offset, shape.total()), policy.groups);
    result.drawn_h.push_back(h);
    bool keep = h >= policy.epsilon;
    if (!keep) {
      ++result.drawn_below;
      keep = toss < policy.p;
      if (keep) ++result.accepted_below;
    }
    if (!keep) continue;
    result.accepted_h.push_back(h);
    if (materialize) result.windows.push_back(make_window(view, shape, offset, h));
  }
  return result;
}

}  // namespace dan
