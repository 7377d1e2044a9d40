#pragma once

#include "dan/data/normalize.hpp"
#include "dan/data/sampling.hpp"
#include "dan/data/series.hpp"
#include "dan/gmm.hpp"
#include "dan/network/dan.hpp"
#include "dan/train/checkpoint.hpp"
#include "dan/train/config.hpp"
#include "dan/train/loss.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace dan {

class ModeMismatchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t epoch, std::size_t batch, double loss)
      : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
                           " (loss " + std::to_string(loss) + ")"),
        epoch_(epoch),
        batch_(batch) {}
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t epoch_, batch_;
};

namespace detail {

inline void require_aligned(const TimeSeries& ordinary, const TimeSeries& indicator) {
  if (indicator.start != ordinary.start || indicator.interval != ordinary.interval ||
      indicator.size() != ordinary.size()) {
    throw std::invalid_argument("indicator series '" + indicator.sensor_id + "' is not aligned with '" +
                                ordinary.sensor_id + "' (start, cadence and length must match)");
  }
}

}  // namespace detail

/// Standardized full-length series plus the transforms fitted on the
/// training span. Without an indicator series, a mixture fitted to the
/// standardized training span supplies it (univariate mode).
struct PreparedSeries {
  std::vector<double> raw_ordinary;
  std::vector<double> ordinary;
  std::vector<double> indicator;
  NormTransform ordinary_norm;
  NormTransform indicator_norm;
  std::optional<GmmModel> gmm;
  std::size_t fit_span = 0;
};

inline std::size_t training_span(const TrainConfig& cfg, const TimeSeries& ordinary) {
  if (cfg.train_end.empty()) return ordinary.size();
  const auto tp = parse_timestamp(cfg.train_end);
  if (!tp) throw ConfigError("config: train_end '" + cfg.train_end + "' is not an ISO-8601 timestamp");
  const auto idx = ordinary.index_of(*tp);
  if (!idx || *idx > ordinary.size()) {
    throw ConfigError("config: train_end " + cfg.train_end + " does not fall on the series grid");
  }
  return *idx;
}

inline PreparedSeries prepare_series(const TrainConfig& cfg, const TimeSeries& ordinary, const TimeSeries* indicator) {
  ordinary.require_complete();
  PreparedSeries ps;
  ps.fit_span = training_span(cfg, ordinary);
  if (ps.fit_span < cfg.t + cfg.h) {
    throw std::invalid_argument("training span of " + std::to_string(ps.fit_span) + " steps is shorter than t+h = " +
                                std::to_string(cfg.t + cfg.h));
  }
  ps.raw_ordinary = ordinary.values;
  std::tie(ps.ordinary, ps.ordinary_norm) = fit_transform(ordinary, ps.fit_span);

  std::vector<double> raw_indicator;
  if (indicator) {
    detail::require_aligned(ordinary, *indicator);
    indicator->require_complete();
    raw_indicator = indicator->values;
  } else {
    const auto fit = fit_gmm(std::span<const double>(ps.ordinary).first(ps.fit_span), cfg.gmm_options());
    ps.gmm = fit.model;
    raw_indicator = indicator_series(*ps.gmm, ps.ordinary);
  }
  ps.indicator_norm = fit_norm(std::span<const double>(raw_indicator).first(ps.fit_span));
  ps.indicator = ps.indicator_norm.forward(raw_indicator);
  return ps;
}

/// Standardized model inputs for a trained checkpoint.
struct ModelInputs {
  std::vector<double> ordinary;
  std::vector<double> indicator;
};

inline ModelInputs standardize_inputs(const Checkpoint& ck, const TimeSeries& ordinary, const TimeSeries* indicator) {
  ordinary.require_complete();
  if (ck.univariate() && indicator) {
    throw ModeMismatchError("checkpoint was trained in univariate mode; do not pass an indicator series");
  }
  if (!ck.univariate() && !indicator) {
    throw ModeMismatchError("checkpoint was trained with an indicator series; pass one to predict");
  }
  ModelInputs in;
  in.ordinary = ck.ordinary_norm.forward(ordinary.values);
  if (indicator) {
    detail::require_aligned(ordinary, *indicator);
    indicator->require_complete();
    in.indicator = ck.indicator_norm.forward(indicator->values);
  } else {
    in.indicator = ck.indicator_norm.forward(indicator_series(*ck.gmm, in.ordinary));
  }
  return in;
}

struct TrainReport {
  Checkpoint checkpoint;
  std::size_t drawn = 0;
  std::size_t train_windows = 0;
  std::size_t val_windows = 0;
  std::size_t drawn_below = 0;
  std::size_t accepted_below = 0;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<bool(const EpochRecord&)> stop_after;  // true ends training after this epoch
};

/// The window set a run with `cfg` trains on (train and validation parts).
inline SampleResult training_windows(const TrainConfig& cfg, const PreparedSeries& ps) {
  const std::size_t n = ps.fit_span;
  const SeriesView view{std::span<const double>(ps.raw_ordinary).first(n), std::span<const double>(ps.ordinary).first(n),
                        std::span<const double>(ps.indicator).first(n)};
  return sample_training_set(view, {cfg.t, cfg.h}, cfg.sampling(), cfg.n_draws);
}

namespace detail {

class Adam {
 public:
  Adam(const ParamMap& params, double lr) : lr_(lr) {
    for (const auto& [name, t] : params) {
      m_.emplace(name, std::vector<double>(t.size(), 0.0));
      v_.emplace(name, std::vector<double>(t.size(), 0.0));
    }
  }

  void step(ParamMap& params, const std::map<std::string, Tensor>& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (const auto& [name, g] : grads) {
      const auto p = params.at(name).data();
      auto& m = m_.at(name);
      auto& v = v_.at(name);
      const auto gd = g.data();
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * gd[i];
        v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * gd[i] * gd[i];
        p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_;
  std::size_t t_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

inline void clip_global_norm(std::map<std::string, Tensor>& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  double ss = 0.0;
  for (const auto& [name, g] : grads) {
    for (double v : g.data()) ss += v * v;
  }
  const double norm = std::sqrt(ss);
  if (norm <= max_norm) return;
  const double s = max_norm / norm;
  for (auto& [name, g] : grads) {
    for (double& v : g.data()) v *= s;
  }
}

struct BatchTensors {
  Tensor x, ind, y, yi;
};

inline BatchTensors gather(const std::vector<TrainingWindow>& windows, std::span<const std::size_t> idx,
                           std::size_t t, std::size_t h) {
  const std::size_t b = idx.size();
  BatchTensors bt{Tensor({b, t}), Tensor({b, t}), Tensor({b, h}), Tensor({b, h})};
  for (std::size_t r = 0; r < b; ++r) {
    const TrainingWindow& w = windows[idx[r]];
    std::copy(w.input_ordinary.begin(), w.input_ordinary.end(), bt.x.data().begin() + static_cast<std::ptrdiff_t>(r * t));
    std::copy(w.input_indicator.begin(), w.input_indicator.end(), bt.ind.data().begin() + static_cast<std::ptrdiff_t>(r * t));
    std::copy(w.target.begin(), w.target.end(), bt.y.data().begin() + static_cast<std::ptrdiff_t>(r * h));
    const auto d = first_order_target(w.target, w.last_observed());
    std::copy(d.begin(), d.end(), bt.yi.data().begin() + static_cast<std::ptrdiff_t>(r * h));
  }
  return bt;
}

struct BatchLoss {
  double total, base, l1, l2, l3, l4;
};

inline BatchLoss evaluate_batch(Graph& g, const ModelConfig& mc, ParamBinder& P, const BatchTensors& bt,
                                double lambda, LossTerms* terms_out = nullptr) {
  const BundleVars bv = forward(P, mc, g.constant(bt.x), g.constant(bt.ind));
  const LossTerms terms = multi_loss(g, bv, bt.y, bt.yi, lambda);
  if (terms_out) *terms_out = terms;
  return {terms.total.value().item(), terms.base.value().item(), terms.l1.value().item(),
          terms.l2.value().item(),    terms.l3.value().item(),   terms.l4.value().item()};
}

}  // namespace detail

/// Plain RMSE of `params` over `windows`, computed per batch then averaged.
inline double evaluate_rmse(const TrainConfig& cfg, const ParamMap& params, const std::vector<TrainingWindow>& windows,
                            std::size_t batch = 64) {
  if (windows.empty()) throw std::invalid_argument("evaluate_rmse: no windows");
  const ModelConfig mc = cfg.model();
  std::vector<std::size_t> idx(windows.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  double total = 0.0;
  std::size_t nb = 0;
  for (std::size_t start = 0; start < idx.size(); start += batch) {
    const std::span<const std::size_t> chunk(idx.data() + start, std::min(batch, idx.size() - start));
    const auto bt = detail::gather(windows, chunk, cfg.t, cfg.h);
    Graph g;
    ParamBinder P(g, params, false);
    total += detail::evaluate_batch(g, mc, P, bt, 0.0).base;
    ++nb;
  }
  return total / static_cast<double>(nb);
}

/// Samples windows from the training span, fits the network with Adam on
/// the multi-loss, and returns the best-validation parameters.
inline TrainReport train(const TrainConfig& cfg, const TimeSeries& ordinary, const TimeSeries* indicator,
                         const TrainHooks& hooks = {}) {
  cfg.validate();
  const ModelConfig mc = cfg.model();
  const PreparedSeries ps = prepare_series(cfg, ordinary, indicator);

  const SampleResult sample = training_windows(cfg, ps);
  if (sample.windows.empty()) throw std::runtime_error("sampling accepted no windows; raise p or n_draws");

  TrainReport report;
  report.drawn = sample.drawn;
  report.drawn_below = sample.drawn_below;
  report.accepted_below = sample.accepted_below;

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(sample.windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_val = static_cast<std::size_t>(std::floor(cfg.val_fraction * static_cast<double>(order.size())));
  if (n_val >= order.size()) n_val = order.size() - 1;
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> trn(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  report.train_windows = trn.size();
  report.val_windows = val.size();

  Checkpoint& ck = report.checkpoint;
  ck.config = cfg;
  ck.ordinary_norm = ps.ordinary_norm;
  ck.indicator_norm = ps.indicator_norm;
  ck.gmm = ps.gmm;
  ck.params = init_params(mc, cfg.seed);

  detail::Adam adam(ck.params, cfg.learning_rate);
  ParamMap best = ck.params;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  const std::size_t bs = cfg.batch_size;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lambda = lambda_schedule(epoch);
    std::shuffle(trn.begin(), trn.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lambda = lambda;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < trn.size(); start += bs) {
      const std::span<const std::size_t> idx(trn.data() + start, std::min(bs, trn.size() - start));
      const auto bt = detail::gather(sample.windows, idx, cfg.t, cfg.h);
      Graph g;
      ParamBinder P(g, ck.params, true);
      LossTerms terms;
      const auto loss = detail::evaluate_batch(g, mc, P, bt, lambda, &terms);
      if (!std::isfinite(loss.total)) throw TrainingDiverged(epoch, batches, loss.total);
      g.backward(terms.total);
      std::map<std::string, Tensor> grads;
      for (const auto& [name, v] : P.bound()) grads.emplace(name, g.grad(v));
      detail::clip_global_norm(grads, cfg.grad_clip);
      adam.step(ck.params, grads);
      rec.train_loss += loss.total;
      rec.train_rmse += loss.base;
      rec.l1 += loss.l1;
      rec.l2 += loss.l2;
      rec.l3 += loss.l3;
      rec.l4 += loss.l4;
      ++batches;
    }
    const double nb = static_cast<double>(batches);
    rec.train_loss /= nb;
    rec.train_rmse /= nb;
    rec.l1 /= nb;
    rec.l2 /= nb;
    rec.l3 /= nb;
    rec.l4 /= nb;

    if (val.empty()) {
      rec.val_loss = std::numeric_limits<double>::quiet_NaN();
      rec.val_multi_loss = std::numeric_limits<double>::quiet_NaN();
    } else {
      std::size_t vb = 0;
      for (std::size_t start = 0; start < val.size(); start += bs) {
        const std::span<const std::size_t> idx(val.data() + start, std::min(bs, val.size() - start));
        const auto bt = detail::gather(sample.windows, idx, cfg.t, cfg.h);
        Graph g;
        ParamBinder P(g, ck.params, false);
        const auto loss = detail::evaluate_batch(g, mc, P, bt, lambda);
        rec.val_loss += loss.base;
        rec.val_multi_loss += loss.total;
        ++vb;
      }
      rec.val_loss /= static_cast<double>(vb);
      rec.val_multi_loss /= static_cast<double>(vb);
    }
    ck.log.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
    const bool stop = hooks.stop_after && hooks.stop_after(rec);

    if (!val.empty()) {
      if (rec.val_loss < best_val) {
        best_val = rec.val_loss;
        best = ck.params;
        report.best_epoch = epoch;
        since_best = 0;
      } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
        report.stopped_early = true;
        break;
      }
    }
    if (stop) {
      report.stopped_early = true;
      break;
    }
  }
  if (!val.empty()) {
    ck.params = std::move(best);
  } else {
    report.best_epoch = ck.log.back().epoch;
  }
  return report;
}

}  // namespace dan
