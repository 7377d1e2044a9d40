#pragma once

#include "dan/autodiff.hpp"
#include "dan/ops.hpp"
#include "dan/tensor.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace dan {

enum class Direction { forward, bidirectional };

/// Parameters of one LSTM direction.
struct LstmWeights {
  Tensor w_input;   // [D x 4H]
  Tensor w_hidden;  // [H x 4H]
  Tensor bias;      // [4H]

  std::size_t hidden() const { return w_hidden.dim(0); }
  std::size_t input_dim() const { return w_input.dim(0); }

  static LstmWeights zeros(std::size_t input_dim, std::size_t hidden) {
    return {Tensor::zeros({input_dim, 4 * hidden}), Tensor::zeros({hidden, 4 * hidden}),
            Tensor::zeros({4 * hidden})};
  }
};

/// LSTM parameters bound into a graph.
struct LstmVars {
  Var w_input;
  Var w_hidden;
  Var bias;

  std::size_t hidden() const { return w_hidden.value().dim(0); }
};

struct LstmRun {
  std::vector<Var> states;  // per step, [B x 2H] packed [h | c], in input order
  Var final_state;          // state after the last processed step
};

inline Var state_hidden(Var state) {
  const std::size_t h = state.value().dim(1) / 2;
  return ops::slice_cols(state, 0, h);
}

inline Var state_cell(Var state) {
  const std::size_t h = state.value().dim(1) / 2;
  return ops::slice_cols(state, h, 2 * h);
}

/// Runs a unidirectional LSTM over `steps` (each [B x D]). With `reverse`
/// the sequence is consumed back to front; `states` stays in input order.
inline LstmRun run_lstm(std::span<const Var> steps, const LstmVars& p, Var initial, bool reverse = false) {
  LstmRun run;
  run.states.resize(steps.size());
  Var state = initial;
  for (std::size_t n = 0; n < steps.size(); ++n) {
    const std::size_t j = reverse ? steps.size() - 1 - n : n;
    state = ops::lstm_cell(steps[j], state, p.w_input, p.w_hidden, p.bias);
    run.states[j] = state;
  }
  run.final_state = state;
  return run;
}

struct LstmFinal {
  Tensor h;
  Tensor c;
};

struct LstmResult {
  Tensor outputs;                 // [L x H * dirs]
  std::vector<LstmFinal> finals;  // one entry per direction
};

/// Evaluates an LSTM over `input` [L x D] without recording gradients.
/// Bidirectional runs concatenate forward and backward outputs per step.
inline LstmResult lstm_forward(const Tensor& input, const LstmWeights& fwd,
                               const std::optional<LstmWeights>& bwd, const Tensor& h0,
                               const Tensor& c0, Direction direction) {
  if (input.rank() != 2) throw DimensionError("lstm_forward: input must be [L x D], got " + shape_str(input.shape()));
  const std::size_t hid = fwd.hidden();
  if (h0.size() != hid || c0.size() != hid) {
    throw DimensionError("lstm_forward: h0/c0 sizes " + std::to_string(h0.size()) + "/" +
                         std::to_string(c0.size()) + " vs hidden " + std::to_string(hid));
  }
  if (direction == Direction::bidirectional && !bwd) {
    throw std::invalid_argument("lstm_forward: bidirectional run needs backward weights");
  }
  const std::size_t len = input.dim(0);
  const std::size_t din = input.dim(1);

  Graph g;
  std::vector<Var> steps;
  steps.reserve(len);
  for (std::size_t j = 0; j < len; ++j) {
    std::vector<double> row(input.data().begin() + j * din, input.data().begin() + (j + 1) * din);
    steps.push_back(g.constant(Tensor({1, din}, std::move(row))));
  }
  std::vector<double> s0(2 * hid);
  std::copy(h0.data().begin(), h0.data().end(), s0.begin());
  std::copy(c0.data().begin(), c0.data().end(), s0.begin() + hid);
  const Var init = g.constant(Tensor({1, 2 * hid}, s0));

  auto bind = [&g](const LstmWeights& w) {
    return LstmVars{g.constant(w.w_input), g.constant(w.w_hidden), g.constant(w.bias)};
  };

  std::vector<LstmRun> runs;
  runs.push_back(run_lstm(steps, bind(fwd), init, false));
  if (direction == Direction::bidirectional) runs.push_back(run_lstm(steps, bind(*bwd), init, true));

  const std::size_t dirs = runs.size();
  LstmResult result{Tensor({len, hid * dirs}), {}};
  for (std::size_t d = 0; d < dirs; ++d) {
    for (std::size_t j = 0; j < len; ++j) {
      const Tensor& s = runs[d].states[j].value();
      for (std::size_t k = 0; k < hid; ++k) result.outputs.at(j, d * hid + k) = s[k];
    }
    const Tensor& fs = runs[d].final_state.value();
    LstmFinal fin{Tensor({hid}), Tensor({hid})};
    for (std::size_t k = 0; k < hid; ++k) {
      fin.h[k] = fs[k];
      fin.c[k] = fs[hid + k];
    }
    result.finals.push_back(std::move(fin));
  }
  return result;
}

}  // namespace dan
