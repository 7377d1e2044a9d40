#pragma once

#include "dan/autodiff.hpp"
#include "dan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace dan {

/// Builds a scalar loss from leaf variables bound in the given graph.
using LossBuilder = std::function<Var(Graph&, std::span<const Var>)>;

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // 0 checks every element; otherwise a seeded random subset per leaf.
  std::size_t max_coords_per_leaf = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t coords_checked = 0;
  bool passed = true;
};

/// Compares reverse-mode gradients against central differences. The error
/// of one coordinate is |analytic - numeric| / max(1, |analytic|, |numeric|).
inline GradCheckReport finite_difference_check(const LossBuilder& build, std::vector<Tensor> leaves,
                                               const GradCheckOptions& opt = {}) {
  if (!(opt.step > 0.0)) throw std::invalid_argument("finite_difference_check: step must be positive");
  for (const Tensor& t : leaves) {
    if (!t.all_finite()) throw std::invalid_argument("finite_difference_check: non-finite leaf");
  }

  std::vector<Tensor> analytic;
  {
    Graph g;
    std::vector<Var> vars;
    for (const Tensor& t : leaves) vars.push_back(g.leaf(t, true));
    Var loss = build(g, vars);
    g.backward(loss);
    for (const Var& v : vars) analytic.push_back(g.grad(v));
  }

  auto evaluate = [&]() {
    Graph g;
    std::vector<Var> vars;
    for (const Tensor& t : leaves) vars.push_back(g.leaf(t, false));
    return build(g, vars).value().item();
  };

  std::mt19937_64 rng(opt.seed);
  GradCheckReport report;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    std::vector<std::size_t> coords(leaves[li].size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (opt.max_coords_per_leaf && coords.size() > opt.max_coords_per_leaf) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opt.max_coords_per_leaf);
    }
    for (std::size_t idx : coords) {
      const double orig = leaves[li][idx];
      leaves[li][idx] = orig + opt.step;
      const double fp = evaluate();
      leaves[li][idx] = orig - opt.step;
      const double fm = evaluate();
      leaves[li][idx] = orig;
      const double numeric = (fp - fm) / (2.0 * opt.step);
      const double a = analytic[li][idx];
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      report.max_relative_error = std::max(report.max_relative_error, err);
      ++report.coords_checked;
    }
  }
  report.passed = report.max_relative_error < opt.tolerance;
  return report;
}

}  // namespace dan
