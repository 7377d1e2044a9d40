#pragma once

#include "dan/data/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dan {

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t before = 0;  // all draws (p = 1)
  std::size_t after = 0;   // draws kept by the configured policy
};

struct KwReport {
  std::vector<HistogramBin> bins;
  std::size_t n_drawn = 0;
  std::size_t n_before = 0;
  std::size_t n_accepted = 0;
  std::size_t before_below = 0;  // H < epsilon
  std::size_t after_below = 0;

  double before_below_fraction() const {
    return n_before ? static_cast<double>(before_below) / static_cast<double>(n_before) : 0.0;
  }
  double after_below_fraction() const {
    return n_accepted ? static_cast<double>(after_below) / static_cast<double>(n_accepted) : 0.0;
  }
};

/// Histograms of H over the same draws with p = 1 and with `policy`.
inline KwReport kw_stats_report(std::span<const double> raw_ordinary, WindowShape shape, const SamplingPolicy& policy,
                                std::size_t n_draws, double bin_width = 2.0) {
  if (!(bin_width > 0.0)) throw std::invalid_argument("kw_stats_report: bin width must be positive");
  const SeriesView view{raw_ordinary, {}, {}};
  SamplingPolicy all = policy;
  all.p = 1.0;
  const SampleResult before = sample_training_set(view, shape, all, n_draws);
  const SampleResult after = sample_training_set(view, shape, policy, n_draws);

  KwReport rep;
  rep.n_drawn = n_draws;
  rep.n_before = before.accepted_h.size();
  rep.n_accepted = after.accepted_h.size();
  double hmax = 0.0;
  for (double h : before.accepted_h) hmax = std::max(hmax, h);
  const auto nbins = static_cast<std::size_t>(std::floor(hmax / bin_width)) + 1;
  rep.bins.resize(nbins);
  for (std::size_t b = 0; b < nbins; ++b) {
    rep.bins[b].lo = static_cast<double>(b) * bin_width;
    rep.bins[b].hi = static_cast<double>(b + 1) * bin_width;
  }
  auto bin_of = [&](double h) { return std::min(static_cast<std::size_t>(std::floor(h / bin_width)), nbins - 1); };
  for (double h : before.accepted_h) {
    ++rep.bins[bin_of(h)].before;
    rep.before_below += h < policy.epsilon;
  }
  for (double h : after.accepted_h) {
    ++rep.bins[bin_of(h)].after;
    rep.after_below += h < policy.epsilon;
  }
  return rep;
}

/// `bin_lo,bin_hi,before,after`
inline void write_kw_report(const std::string& path, const KwReport& rep) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "bin_lo,bin_hi,before,after\n";
  for (const HistogramBin& b : rep.bins) out << b.lo << ',' << b.hi << ',' << b.before << ',' << b.after << '\n';
}

}  // namespace dan
