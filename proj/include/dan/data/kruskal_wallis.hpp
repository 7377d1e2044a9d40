#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dan {

/// 1-based ranks; tied values share the average of the ranks they span.
inline std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t q = i; q < j; ++q) ranks[order[q]] = avg;
    i = j;
  }
  return ranks;
}

/// Kruskal-Wallis H across `groups` consecutive equal-length sub-sequences
/// of `window`. Values are rounded to the nearest integer first, a tail
/// remainder that does not fill a group is dropped, and no tie correction
/// is applied.
inline double kw_statistic(std::span<const double> window, std::size_t groups) {
  if (groups < 2) throw std::invalid_argument("kw_statistic: need at least 2 groups, got " + std::to_string(groups));
  const std::size_t per_group = window.size() / groups;
  if (per_group == 0) {
    throw std::invalid_argument("kw_statistic: window of " + std::to_string(window.size()) +
                                " values cannot form " + std::to_string(groups) + " groups");
  }
  const std::size_t n = per_group * groups;
  std::vector<double> rounded(n);
  for (std::size_t i = 0; i < n; ++i) rounded[i] = std::round(window[i]);
  const std::vector<double> ranks = average_ranks(rounded);

  // Centered form of 12/(n(n+1)) * sum(R_j^2 / n_j) - 3(n+1); identical
  // algebraically, and exactly zero when every rank is tied.
  const double nd = static_cast<double>(n);
  const double mid = 0.5 * (nd + 1.0);
  double term = 0.0;
  for (std::size_t g = 0; g < groups; ++g) {
    double rank_sum = 0.0;
    for (std::size_t i = g * per_group; i < (g + 1) * per_group; ++i) rank_sum += ranks[i];
    const double dev = rank_sum / static_cast<double>(per_group) - mid;
    term += static_cast<double>(per_group) * dev * dev;
  }
  return 12.0 / (nd * (nd + 1.0)) * term;
}

}  // namespace dan
