#pragma once

#include "dan/autodiff.hpp"
#include "dan/lstm.hpp"
#include "dan/network/params.hpp"
#include "dan/network/stack_plan.hpp"
#include "dan/ops.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dan {

/// Binds named parameters into a graph on first use.
class ParamBinder {
 public:
  ParamBinder(Graph& graph, const ParamMap& params, bool trainable)
      : graph_(graph), params_(params), trainable_(trainable) {}

  Var operator()(const std::string& name) {
    if (auto it = bound_.find(name); it != bound_.end()) return it->second;
    auto p = params_.find(name);
    if (p == params_.end()) throw std::out_of_range("missing parameter '" + name + "'");
    Var v = graph_.leaf(p->second, trainable_);
    bound_.emplace(name, v);
    return v;
  }

  /// Uses an existing variable for a parameter instead of a fresh leaf.
  void bind(const std::string& name, Var v) { bound_.insert_or_assign(name, v); }

  LstmVars lstm(const std::string& prefix) {
    return {(*this)(prefix + ".w_input"), (*this)(prefix + ".w_hidden"), (*this)(prefix + ".bias")};
  }

  Graph& graph() { return graph_; }
  const std::map<std::string, Var>& bound() const { return bound_; }

 private:
  Graph& graph_;
  const ParamMap& params_;
  bool trainable_;
  std::map<std::string, Var> bound_;
};

/// Final states of one bidirectional encoder; `merged` is the sum of the
/// two directions and seeds the unidirectional decoder.
struct BranchState {
  Var forward;
  Var backward;
  Var merged;
};

struct EncoderStates {
  BranchState far;
  BranchState near;
  BranchState ind;
};

struct DecodeOutput {
  Var y_f;       // [B x h]
  Var y_n;       // [B x h]
  Var y_i_raw;   // [B x h], affine head over the indicator decoder
  Var i_hidden;  // [B x 2H x h], packed [h | c] decoder states
};

struct GateVectors {
  Var m_far;
  Var m_near;
};

struct MergeOutput {
  Var y_hat;
  Var y_f;
  Var y_n;
};

/// Graph-level outputs of a full forward pass over a batch.
struct BundleVars {
  Var y_f, y_n, y_i, y_w, y_hat;
  Var m_far, m_near;
  Var h_far;  // [B x 2H] packed far-encoder state
};

namespace detail {

inline Var zero_state(Graph& g, std::size_t batch, std::size_t hidden) {
  return g.constant(Tensor::zeros({batch, 2 * hidden}));
}

inline void require_batch_seq(Var v, std::size_t len, const char* what) {
  if (v.value().rank() != 2 || v.value().dim(1) != len) {
    throw DimensionError(std::string(what) + ": expected [B x " + std::to_string(len) + "], got " +
                         shape_str(v.shape()));
  }
}

inline Var conv_front(ParamBinder& P, const std::string& prefix, Var seq, std::size_t kernel) {
  const std::size_t b = seq.value().dim(0);
  const std::size_t t = seq.value().dim(1);
  Var x3 = ops::reshape(seq, {b, 1, t});
  return ops::tanh(ops::conv1d(x3, P(prefix + ".kernel"), P(prefix + ".bias"), kernel, 0));
}

inline BranchState encode_branch(ParamBinder& P, const std::string& prefix, Var features, std::size_t hidden) {
  const std::size_t b = features.value().dim(0);
  const std::size_t len = features.value().dim(2);
  std::vector<Var> steps;
  steps.reserve(len);
  for (std::size_t j = 0; j < len; ++j) steps.push_back(ops::step(features, j));
  Var init = zero_state(P.graph(), b, hidden);
  Var f = run_lstm(steps, P.lstm(prefix + ".fwd"), init, false).final_state;
  Var r = run_lstm(steps, P.lstm(prefix + ".bwd"), init, true).final_state;
  return {f, r, ops::add(f, r)};
}

inline Var head(ParamBinder& P, const std::string& prefix, Var input) {
  return ops::affine(input, P(prefix + ".weight"), P(prefix + ".bias"));
}

}  // namespace detail

/// Conv front-ends plus bidirectional LSTMs: C0 and C2 read the ordinary
/// window (far and near branches), C1 reads the indicator window.
inline EncoderStates encode(ParamBinder& P, const ModelConfig& cfg, std::size_t block, Var x, Var ind) {
  detail::require_batch_seq(x, cfg.input_length, "encode ordinary input");
  detail::require_batch_seq(ind, cfg.input_length, "encode indicator input");
  if (x.value().dim(0) != ind.value().dim(0)) throw DimensionError("encode: batch size mismatch");
  const std::string p = "E" + std::to_string(block) + ".";
  EncoderStates s;
  s.far = detail::encode_branch(P, p + "enc_far", detail::conv_front(P, p + "conv_far", x, cfg.kernel_far), cfg.hidden);
  s.near = detail::encode_branch(P, p + "enc_near", detail::conv_front(P, p + "conv_near", x, cfg.kernel_near), cfg.hidden);
  s.ind = detail::encode_branch(P, p + "enc_ind", detail::conv_front(P, p + "conv_ind", ind, cfg.kernel_indicator), cfg.hidden);
  return s;
}

/// Autoregressive decoders of one D block. The indicator decoder runs
/// first; its per-step head output joins the far/near decoder inputs.
/// Blocks after the first also read the previous block's refined y_i.
inline DecodeOutput decode(ParamBinder& P, const ModelConfig& cfg, std::size_t block, const EncoderStates& states,
                           Var last_observed, Var last_indicator, std::optional<Var> prev_indicator) {
  const std::size_t h = cfg.horizon;
  if (h == 0) throw std::invalid_argument("decode: horizon must be positive");
  if (block > 0 && !prev_indicator) {
    throw std::invalid_argument("decode: D block " + std::to_string(block) + " needs the previous refined indicator");
  }
  if (prev_indicator) detail::require_batch_seq(*prev_indicator, h, "decode previous indicator");
  const std::string p = "D" + std::to_string(block) + ".";

  std::vector<Var> i_states, yi_steps;
  {
    const LstmVars lstm = P.lstm(p + "dec_ind");
    Var state = states.ind.merged;
    Var prev = last_indicator;
    for (std::size_t j = 0; j < h; ++j) {
      Var in = prev_indicator ? ops::concat_cols({prev, ops::slice_cols(*prev_indicator, j, j + 1)}) : prev;
      state = ops::lstm_cell(in, state, lstm.w_input, lstm.w_hidden, lstm.bias);
      prev = detail::head(P, p + "head_ind", state_hidden(state));
      i_states.push_back(state);
      yi_steps.push_back(prev);
    }
  }

  auto run_polar = [&](const std::string& name, const BranchState& init) {
    const LstmVars lstm = P.lstm(p + "dec_" + name);
    Var state = init.merged;
    Var prev = last_observed;
    std::vector<Var> outs;
    for (std::size_t j = 0; j < h; ++j) {
      state = ops::lstm_cell(ops::concat_cols({prev, yi_steps[j]}), state, lstm.w_input, lstm.w_hidden, lstm.bias);
      prev = detail::head(P, p + "head_" + name, state_hidden(state));
      outs.push_back(prev);
    }
    return ops::concat_cols(outs);
  };

  DecodeOutput out;
  out.y_f = run_polar("far", states.far);
  out.y_n = run_polar("near", states.near);
  out.y_i_raw = ops::concat_cols(yi_steps);
  out.i_hidden = ops::stack_steps(i_states);
  return out;
}

/// Two stacked length-preserving convolutions with relu between them.
inline Var refine_indicator(ParamBinder& P, const ModelConfig& cfg, std::size_t block, Var i_hidden) {
  if (i_hidden.value().rank() != 3 || i_hidden.value().dim(1) != 2 * cfg.hidden) {
    throw DimensionError("refine_indicator: expected [B x " + std::to_string(2 * cfg.hidden) + " x h], got " +
                         shape_str(i_hidden.shape()));
  }
  const std::string p = "D" + std::to_string(block) + ".";
  const std::size_t b = i_hidden.value().dim(0);
  const std::size_t h = i_hidden.value().dim(2);
  Var c1 = ops::conv1d(i_hidden, P(p + "refine1.kernel"), P(p + "refine1.bias"), 1, cfg.refine_kernel_first / 2);
  Var c2 = ops::conv1d(ops::relu(c1), P(p + "refine2.kernel"), P(p + "refine2.bias"), 1, cfg.refine_kernel_second / 2);
  return ops::reshape(c2, {b, h});
}

/// m_far = sigmoid(alpha * y_i), m_near = 1 - m_far.
inline GateVectors gate_vectors(Var y_i, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("gate_vectors: alpha must be positive");
  Var m_far = ops::sigmoid(ops::affine_scalar(y_i, alpha, 0.0));
  return {m_far, ops::affine_scalar(m_far, -1.0, 1.0)};
}

/// One RepMerg block. An LSTM seeded with the far-encoder state reads y_i;
/// its head output is paired with y_n to produce y_hat, and two residual
/// heads refine y_f and y_n. `y_hat_prev` accumulates across R blocks.
inline MergeOutput repmerg(ParamBinder& P, const ModelConfig& cfg, std::size_t block, Var y_f, Var y_n, Var y_i,
                           Var h_far, std::optional<Var> y_hat_prev) {
  const std::size_t h = cfg.horizon;
  detail::require_batch_seq(y_f, h, "repmerg y_f");
  detail::require_batch_seq(y_n, h, "repmerg y_n");
  detail::require_batch_seq(y_i, h, "repmerg y_i");
  if (y_hat_prev) detail::require_batch_seq(*y_hat_prev, h, "repmerg y_hat");
  const std::string p = "R" + std::to_string(block) + ".";
  const LstmVars lstm = P.lstm(p + "lstm");

  std::vector<Var> outs, res_f, res_n;
  Var state = h_far;
  for (std::size_t j = 0; j < h; ++j) {
    state = ops::lstm_cell(ops::slice_cols(y_i, j, j + 1), state, lstm.w_input, lstm.w_hidden, lstm.bias);
    Var hid = state_hidden(state);
    Var z = detail::head(P, p + "head_z", hid);
    outs.push_back(detail::head(P, p + "head_out", ops::concat_cols({z, ops::slice_cols(y_n, j, j + 1)})));
    res_f.push_back(detail::head(P, p + "res_far", hid));
    res_n.push_back(detail::head(P, p + "res_near", hid));
  }
  MergeOutput out;
  out.y_hat = ops::concat_cols(outs);
  if (y_hat_prev) out.y_hat = ops::add(*y_hat_prev, out.y_hat);
  out.y_f = ops::add(y_f, ops::concat_cols(res_f));
  out.y_n = ops::add(y_n, ops::concat_cols(res_n));
  return out;
}

/// Runs the plan over a batch: x and ind are [B x t] standardized windows.
inline BundleVars forward(ParamBinder& P, const ModelConfig& cfg, Var x, Var ind) {
  const std::size_t t = cfg.input_length;
  detail::require_batch_seq(x, t, "forward ordinary input");
  detail::require_batch_seq(ind, t, "forward indicator input");
  const Var last_x = ops::slice_cols(x, t - 1, t);
  const Var last_ind = ops::slice_cols(ind, t - 1, t);

  std::optional<EncoderStates> states;
  std::optional<Var> y_i, y_f, y_n, y_hat;
  std::size_t e = 0, d = 0, r = 0;
  for (Block b : cfg.plan.tokens) {
    switch (b) {
      case Block::encode:
        states = encode(P, cfg, e++, x, ind);
        break;
      case Block::decode: {
        if (!states) throw std::invalid_argument("forward: D block before any E block");
        DecodeOutput out = decode(P, cfg, d, *states, last_x, last_ind, d > 0 ? y_i : std::nullopt);
        y_i = refine_indicator(P, cfg, d, out.i_hidden);
        y_f = out.y_f;
        y_n = out.y_n;
        ++d;
        break;
      }
      case Block::merge: {
        if (!y_i) throw std::invalid_argument("forward: R block before any D block");
        MergeOutput m = repmerg(P, cfg, r++, *y_f, *y_n, *y_i, states->far.merged, y_hat);
        y_hat = m.y_hat;
        y_f = m.y_f;
        y_n = m.y_n;
        break;
      }
    }
  }
  if (!y_hat) throw std::invalid_argument("forward: plan has no R block");
  const GateVectors gates = gate_vectors(*y_i, cfg.alpha);
  BundleVars out;
  out.y_f = *y_f;
  out.y_n = *y_n;
  out.y_i = *y_i;
  out.y_hat = *y_hat;
  out.m_far = gates.m_far;
  out.m_near = gates.m_near;
  out.y_w = ops::add(ops::mul(gates.m_far, *y_f), ops::mul(gates.m_near, *y_n));
  out.h_far = states->far.merged;
  return out;
}

/// Per-sample outputs, all in standardized units.
struct ForecastBundle {
  std::vector<double> y_f, y_n, y_i, y_w, y_hat;
  std::vector<double> m_far, m_near;
  std::vector<double> h_far;  // hidden half of the merged far-encoder state
};

inline Var batch_matrix(Graph& g, std::span<const std::vector<double>> rows, std::size_t width) {
  Tensor t({rows.size(), width});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width) {
      throw DimensionError("batch row " + std::to_string(r) + " has length " + std::to_string(rows[r].size()) +
                           ", expected " + std::to_string(width));
    }
    std::copy(rows[r].begin(), rows[r].end(), t.data().begin() + static_cast<std::ptrdiff_t>(r * width));
  }
  return g.constant(std::move(t));
}

/// Inference over a batch of windows, without gradient bookkeeping.
inline std::vector<ForecastBundle> forward_batch(const ModelConfig& cfg, const ParamMap& params,
                                                 std::span<const std::vector<double>> xs,
                                                 std::span<const std::vector<double>> inds) {
  if (xs.size() != inds.size()) throw DimensionError("forward_batch: ordinary/indicator batch sizes differ");
  if (xs.empty()) return {};
  Graph g;
  ParamBinder P(g, params, false);
  const BundleVars bv = forward(P, cfg, batch_matrix(g, xs, cfg.input_length), batch_matrix(g, inds, cfg.input_length));
  const std::size_t h = cfg.horizon;
  const std::size_t hid = cfg.hidden;
  auto row = [](Var v, std::size_t r, std::size_t w) {
    auto d = v.value().data().subspan(r * v.value().dim(1), w);
    return std::vector<double>(d.begin(), d.end());
  };
  std::vector<ForecastBundle> out(xs.size());
  for (std::size_t r = 0; r < xs.size(); ++r) {
    out[r].y_f = row(bv.y_f, r, h);
    out[r].y_n = row(bv.y_n, r, h);
    out[r].y_i = row(bv.y_i, r, h);
    out[r].y_w = row(bv.y_w, r, h);
    out[r].y_hat = row(bv.y_hat, r, h);
    out[r].m_far = row(bv.m_far, r, h);
    out[r].m_near = row(bv.m_near, r, h);
    out[r].h_far = row(bv.h_far, r, hid);
  }
  return out;
}

inline ForecastBundle forward(const ModelConfig& cfg, const ParamMap& params, std::span<const double> x,
                              std::span<const double> ind) {
  const std::vector<double> xs{x.begin(), x.end()};
  const std::vector<double> is{ind.begin(), ind.end()};
  return forward_batch(cfg, params, std::span<const std::vector<double>>(&xs, 1),
                       std::span<const std::vector<double>>(&is, 1))
      .front();
}

}  // namespace dan
