#pragma once

#include "dan/autodiff.hpp"
#include "dan/network/dan.hpp"
#include "dan/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace dan {

/// Distance weights of a standardized target: w_f = tanh(y)^2 favours points
/// far from the mean, w_n = (1 - |tanh(y)|)^2 those near it, w_p = |tanh(y)|.
struct LossWeights {
  std::vector<double> w_f;
  std::vector<double> w_n;
  std::vector<double> w_p;
};

inline LossWeights distance_weights(std::span<const double> y) {
  LossWeights w;
  w.w_f.resize(y.size());
  w.w_n.resize(y.size());
  w.w_p.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double a = std::abs(std::tanh(y[i]));
    w.w_p[i] = a;
    w.w_f[i] = a * a;
    w.w_n[i] = (1.0 - a) * (1.0 - a);
  }
  return w;
}

/// y[j] - y[j-1], with y[-1] taken as the last observed input value.
inline std::vector<double> first_order_target(std::span<const double> y, double last_observed) {
  std::vector<double> d(y.size());
  double prev = last_observed;
  for (std::size_t j = 0; j < y.size(); ++j) {
    d[j] = y[j] - prev;
    prev = y[j];
  }
  return d;
}

/// max(2 - e^(epoch/45), 0.2)
inline double lambda_schedule(std::size_t epoch) {
  return std::max(-std::exp(static_cast<double>(epoch) / 45.0) + 2.0, 0.2);
}

struct LossTerms {
  Var total;
  Var base;  // RMSE(y_hat, y)
  Var l1, l2, l3, l4;
};

/// RMSE(y_hat, y) + lambda * (L1 + L2 + L3 + L4) over a batch. `y` and
/// `y_i_target` are [B x h] tensors of standardized targets.
inline LossTerms multi_loss(Graph& g, const BundleVars& b, const Tensor& y, const Tensor& y_i_target, double lambda) {
  if (y.shape() != b.y_hat.shape() || y_i_target.shape() != y.shape()) {
    throw DimensionError("multi_loss: target shape " + shape_str(y.shape()) + " vs prediction " +
                         shape_str(b.y_hat.shape()));
  }
  const LossWeights w = distance_weights(y.data());
  auto weighted = [&](const std::vector<double>& wt, const Tensor& v) {
    Tensor out(v.shape());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = wt[i] * v[i];
    return out;
  };
  const Var wf = g.constant(Tensor(y.shape(), w.w_f));
  const Var wn = g.constant(Tensor(y.shape(), w.w_n));
  const Var wp = g.constant(Tensor(y.shape(), w.w_p));

  LossTerms t;
  t.base = ops::rmse(b.y_hat, g.constant(y));
  t.l1 = ops::rmse(ops::mul(b.y_f, wf), g.constant(weighted(w.w_f, y)));
  t.l2 = ops::rmse(ops::mul(b.y_n, wn), g.constant(weighted(w.w_n, y)));
  t.l3 = ops::rmse(ops::mul(b.y_w, wp), g.constant(weighted(w.w_p, y)));
  t.l4 = ops::rmse(ops::mul(b.y_i, wp), g.constant(weighted(w.w_p, y_i_target)));
  const Var reg = ops::add(ops::add(t.l1, t.l2), ops::add(t.l3, t.l4));
  t.total = ops::add(t.base, ops::affine_scalar(reg, lambda, 0.0));
  return t;
}

/// Single-sample evaluation of the same objective.
inline double multi_loss(const ForecastBundle& b, std::span<const double> y, std::span<const double> y_i_target,
                         double lambda) {
  const std::size_t h = y.size();
  for (auto* v : {&b.y_f, &b.y_n, &b.y_i, &b.y_w, &b.y_hat}) {
    if (v->size() != h) throw DimensionError("multi_loss: bundle length differs from target");
  }
  if (y_i_target.size() != h) throw DimensionError("multi_loss: y_i target length differs from target");
  Graph g;
  BundleVars bv;
  auto c = [&](const std::vector<double>& v) { return g.constant(Tensor({1, h}, v)); };
  bv.y_f = c(b.y_f);
  bv.y_n = c(b.y_n);
  bv.y_i = c(b.y_i);
  bv.y_w = c(b.y_w);
  bv.y_hat = c(b.y_hat);
  const Tensor yt({1, h}, std::vector<double>(y.begin(), y.end()));
  const Tensor it({1, h}, std::vector<double>(y_i_target.begin(), y_i_target.end()));
  return multi_loss(g, bv, yt, it, lambda).total.value().item();
}

}  // namespace dan
