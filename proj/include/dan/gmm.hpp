#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dan {

/// Univariate Gaussian mixture.
struct GmmModel {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> variances;

  std::size_t components() const noexcept { return weights.size(); }

  void validate() const {
    if (weights.empty() || means.size() != weights.size() || variances.size() != weights.size()) {
      throw std::invalid_argument("gmm: mismatched or empty parameter vectors");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (!(weights[i] >= 0.0) || !(variances[i] > 0.0) || !std::isfinite(means[i])) {
        throw std::invalid_argument("gmm: invalid component " + std::to_string(i));
      }
      total += weights[i];
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("gmm: weights do not sum to 1");
  }

  friend bool operator==(const GmmModel&, const GmmModel&) = default;
};

inline double gaussian_density(double x, double mean, double variance) {
  const double d = x - mean;
  return std::exp(-0.5 * d * d / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

/// Mixture density at x: sum_i w_i * N(x | mu_i, var_i).
inline double indicator_value(const GmmModel& model, double x) {
  double p = 0.0;
  for (std::size_t i = 0; i < model.components(); ++i) {
    p += model.weights[i] * gaussian_density(x, model.means[i], model.variances[i]);
  }
  return p;
}

inline std::vector<double> indicator_series(const GmmModel& model, std::span<const double> series) {
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) out[i] = indicator_value(model, series[i]);
  return out;
}

struct GmmFitOptions {
  std::size_t components = 3;
  std::size_t max_iters = 200;
  double tol = 1e-7;              // on mean per-sample log-likelihood
  double variance_floor = 1e-6;
  std::uint64_t seed = 0;
};

struct GmmFit {
  GmmModel model;
  std::vector<double> log_likelihood;  // mean per sample, one entry per E-step
  std::size_t iterations = 0;
  bool converged = false;
};

namespace detail {

inline double log_gaussian(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + d * d / variance);
}

// k-means++ seeding in 1-D, then a hard assignment to initialise the mixture.
inline GmmModel seed_mixture(std::span<const double> x, const GmmFitOptions& opt, double global_var) {
  const std::size_t n = x.size();
  const std::size_t m = opt.components;
  std::mt19937_64 rng(opt.seed);
  std::vector<double> centers;
  centers.push_back(x[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
  std::vector<double> d2(n);
  while (centers.size() < m) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : centers) best = std::min(best, (x[i] - c) * (x[i] - c));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      centers.push_back(centers.back());
      continue;
    }
    double r = std::uniform_real_distribution<double>(0.0, total)(rng);
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      r -= d2[i];
      if (r <= 0.0) {
        pick = i;
        break;
      }
    }
    centers.push_back(x[pick]);
  }
  std::sort(centers.begin(), centers.end());

  std::vector<double> count(m, 0.0), sum(m, 0.0), sumsq(m, 0.0);
  for (double v : x) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < m; ++c) {
      if (std::abs(v - centers[c]) < std::abs(v - centers[best])) best = c;
    }
    count[best] += 1.0;
    sum[best] += v;
    sumsq[best] += v * v;
  }
  GmmModel model;
  for (std::size_t c = 0; c < m; ++c) {
    const double cnt = count[c];
    const double mean = cnt > 0 ? sum[c] / cnt : centers[c];
    double var = cnt > 1 ? sumsq[c] / cnt - mean * mean : global_var;
    if (!(var > opt.variance_floor)) var = std::max(global_var / static_cast<double>(m * m), opt.variance_floor);
    model.weights.push_back(std::max(cnt, 1.0));
    model.means.push_back(mean);
    model.variances.push_back(var);
  }
  double wsum = 0.0;
  for (double w : model.weights) wsum += w;
  for (double& w : model.weights) w /= wsum;
  return model;
}

}  // namespace detail

/// Expectation-Maximization for a univariate mixture. Stops when the mean
/// log-likelihood improves by less than `tol`, or after `max_iters` M-steps.
inline GmmFit fit_gmm(std::span<const double> values, const GmmFitOptions& opt = {}) {
  const std::size_t n = values.size();
  const std::size_t m = opt.components;
  if (m == 0) throw std::invalid_argument("fit_gmm: need at least one component");
  if (n < 10 * m) {
    throw std::invalid_argument("fit_gmm: " + std::to_string(n) + " values are too few for " + std::to_string(m) +
                                " components (need " + std::to_string(10 * m) + ")");
  }
  double mean = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("fit_gmm: non-finite value");
    mean += v;
  }
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  if (!(var > 0.0)) throw std::invalid_argument("fit_gmm: degenerate data (all values equal)");

  GmmFit fit;
  fit.model = detail::seed_mixture(values, opt, var);
  GmmModel& gm = fit.model;

  std::vector<double> resp(n * m);
  std::vector<double> logp(m);
  auto e_step = [&]() {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < m; ++c) {
        logp[c] = gm.weights[c] > 0.0 ? std::log(gm.weights[c]) + detail::log_gaussian(values[i], gm.means[c], gm.variances[c])
                                      : -std::numeric_limits<double>::infinity();
        mx = std::max(mx, logp[c]);
      }
      double s = 0.0;
      for (std::size_t c = 0; c < m; ++c) s += std::exp(logp[c] - mx);
      const double lse = mx + std::log(s);
      ll += lse;
      for (std::size_t c = 0; c < m; ++c) resp[i * m + c] = std::exp(logp[c] - lse);
    }
    return ll / static_cast<double>(n);
  };

  fit.log_likelihood.push_back(e_step());
  for (std::size_t it = 0; it < opt.max_iters; ++it) {
    for (std::size_t c = 0; c < m; ++c) {
      double nk = 0.0, sx = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        nk += resp[i * m + c];
        sx += resp[i * m + c] * values[i];
      }
      gm.weights[c] = nk / static_cast<double>(n);
      if (nk <= 0.0) {
        gm.variances[c] = opt.variance_floor;
        continue;
      }
      const double mu = sx / nk;
      double sv = 0.0;
      for (std::size_t i = 0; i < n; ++i) sv += resp[i * m + c] * (values[i] - mu) * (values[i] - mu);
      gm.means[c] = mu;
      gm.variances[c] = std::max(sv / nk, opt.variance_floor);
    }
    double wsum = 0.0;
    for (double w : gm.weights) wsum += w;
    for (double& w : gm.weights) w /= wsum;
    ++fit.iterations;

    const double ll = e_step();
    const double gain = ll - fit.log_likelihood.back();
    fit.log_likelihood.push_back(ll);
    if (gain < opt.tol) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

/// Three-line text export: `weights ...`, `means ...`, `variances ...`.
inline void write_gmm(const std::string& path, const GmmModel& model) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out.precision(17);
  auto row = [&](const char* name, const std::vector<double>& v) {
    out << name;
    for (double x : v) out << ' ' << x;
    out << '\n';
  };
  row("weights", model.weights);
  row("means", model.means);
  row("variances", model.variances);
}

inline GmmModel read_gmm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  GmmModel model;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream is(line);
    std::string key;
    is >> key;
    std::vector<double>* dst = key == "weights" ? &model.weights
                               : key == "means" ? &model.means
                               : key == "variances" ? &model.variances
                                                    : nullptr;
    if (!dst) {
      if (key.empty()) continue;
      throw std::runtime_error("gmm file '" + path + "': unknown row '" + key + "'");
    }
    double v;
    while (is >> v) dst->push_back(v);
  }
  model.validate();
  return model;
}

}  // namespace dan
