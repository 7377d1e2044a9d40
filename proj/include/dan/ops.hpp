#pragma once

#include "dan/autodiff.hpp"
#include "dan/tensor.hpp"

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dan::ops {

namespace detail {

inline void same_shape(Var a, Var b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

inline void require_rank(Var a, std::size_t rank, const char* op) {
  if (a.value().rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(a.shape()));
  }
}

inline void accumulate(Graph& g, Var v, const Tensor& delta) {
  if (!g.wants_grad(v)) return;
  Tensor& gv = g.grad_buffer(v);
  for (std::size_t i = 0; i < delta.size(); ++i) gv[i] += delta[i];
}

}  // namespace detail

inline Var add(Var a, Var b) {
  detail::same_shape(a, b, "add");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return a.graph->record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor&, const Tensor& go) {
    detail::accumulate(g, a, go);
    detail::accumulate(g, b, go);
  });
}

inline Var sub(Var a, Var b) {
  detail::same_shape(a, b, "sub");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return a.graph->record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor&, const Tensor& go) {
    detail::accumulate(g, a, go);
    if (g.wants_grad(b)) {
      Tensor& gb = g.grad_buffer(b);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
    }
  });
}

/// Elementwise (Hadamard) product.
inline Var mul(Var a, Var b) {
  detail::same_shape(a, b, "mul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return a.graph->record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor&, const Tensor& go) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (g.wants_grad(a)) {
      Tensor& ga = g.grad_buffer(a);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * bv[i];
    }
    if (g.wants_grad(b)) {
      Tensor& gb = g.grad_buffer(b);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * av[i];
    }
  });
}

/// scale * a + shift, elementwise.
inline Var affine_scalar(Var a, double scale, double shift) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * av[i] + shift;
  return a.graph->record(std::move(out), {a}, [a, scale](Graph& g, const Tensor&, const Tensor& go) {
    Tensor& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += scale * go[i];
  });
}

inline Var tanh(Var a) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(av[i]);
  return a.graph->record(std::move(out), {a}, [a](Graph& g, const Tensor& y, const Tensor& go) {
    Tensor& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * (1.0 - y[i] * y[i]);
  });
}

inline Var sigmoid(Var a) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = dan::detail::sigmoid(av[i]);
  return a.graph->record(std::move(out), {a}, [a](Graph& g, const Tensor& y, const Tensor& go) {
    Tensor& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * y[i] * (1.0 - y[i]);
  });
}

inline Var relu(Var a) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
  return a.graph->record(std::move(out), {a}, [a](Graph& g, const Tensor&, const Tensor& go) {
    const Tensor& av = a.value();
    Tensor& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < go.size(); ++i) {
      if (av[i] > 0.0) ga[i] += go[i];
    }
  });
}

/// Sum of all elements, as a scalar.
inline Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.graph->record(Tensor::scalar(s), {a}, [a](Graph& g, const Tensor&, const Tensor& go) {
    Tensor& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[0];
  });
}

/// Root mean squared difference over all elements. The derivative at zero
/// error is taken to be zero.
inline Var rmse(Var prediction, Var target) {
  detail::same_shape(prediction, target, "rmse");
  const Tensor& pv = prediction.value();
  const Tensor& tv = target.value();
  if (pv.size() == 0) throw DimensionError("rmse: empty operands");
  double acc = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double d = pv[i] - tv[i];
    acc += d * d;
  }
  const double r = std::sqrt(acc / static_cast<double>(pv.size()));
  return prediction.graph->record(
      Tensor::scalar(r), {prediction, target},
      [prediction, target](Graph& g, const Tensor& y, const Tensor& go) {
        const double r = y[0];
        if (r == 0.0) return;
        const Tensor& pv = prediction.value();
        const Tensor& tv = target.value();
        const double scale = go[0] / (static_cast<double>(pv.size()) * r);
        if (g.wants_grad(prediction)) {
          Tensor& gp = g.grad_buffer(prediction);
          for (std::size_t i = 0; i < pv.size(); ++i) gp[i] += scale * (pv[i] - tv[i]);
        }
        if (g.wants_grad(target)) {
          Tensor& gt = g.grad_buffer(target);
          for (std::size_t i = 0; i < pv.size(); ++i) gt[i] -= scale * (pv[i] - tv[i]);
        }
      });
}

/// Same data with a new shape of equal element count.
inline Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.graph->record(std::move(out), {a}, [a](Graph& g, const Tensor&, const Tensor& go) {
    detail::accumulate(g, a, go);
  });
}

/// input [... x in] times weight [in x out] plus bias [out].
inline Var affine(Var input, Var weight, std::optional<Var> bias = std::nullopt) {
  detail::require_rank(weight, 2, "affine weight");
  const Tensor& xv = input.value();
  const Tensor& wv = weight.value();
  if (xv.rank() == 0 || xv.shape().back() != wv.dim(0)) {
    throw DimensionError("affine: input " + shape_str(xv.shape()) + " vs weight " +
                         shape_str(wv.shape()));
  }
  const std::size_t in = wv.dim(0);
  const std::size_t outd = wv.dim(1);
  if (bias && (bias->value().rank() != 1 || bias->value().dim(0) != outd)) {
    throw DimensionError("affine: bias " + shape_str(bias->shape()) + " vs out dim " +
                         std::to_string(outd));
  }
  const std::size_t rows = xv.size() / in;
  Shape oshape = xv.shape();
  oshape.back() = outd;
  Tensor out(oshape);
  if (bias) {
    const Tensor& bv = bias->value();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < outd; ++j) out[r * outd + j] = bv[j];
    }
  }
  dan::detail::gemm_acc(xv.data().data(), wv.data().data(), out.data().data(), rows, in, outd);

  std::vector<Var> inputs{input, weight};
  if (bias) inputs.push_back(*bias);
  return input.graph->record(
      std::move(out), inputs,
      [input, weight, bias, rows, in, outd](Graph& g, const Tensor&, const Tensor& go) {
        if (g.wants_grad(input)) {
          dan::detail::gemm_acc_bt(go.data().data(), weight.value().data().data(),
                                   g.grad_buffer(input).data().data(), rows, in, outd);
        }
        if (g.wants_grad(weight)) {
          dan::detail::gemm_acc_at(input.value().data().data(), go.data().data(),
                                   g.grad_buffer(weight).data().data(), rows, in, outd);
        }
        if (bias && g.wants_grad(*bias)) {
          Tensor& gb = g.grad_buffer(*bias);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < outd; ++j) gb[j] += go[r * outd + j];
          }
        }
      });
}

inline std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                                        std::size_t padding) {
  if (stride == 0) throw std::invalid_argument("conv1d: stride must be positive");
  if (length + 2 * padding < kernel) {
    throw DimensionError("conv1d: padded length " + std::to_string(length + 2 * padding) +
                         " shorter than kernel " + std::to_string(kernel));
  }
  return (length + 2 * padding - kernel) / stride + 1;
}

/// Cross-correlation. input [C_in x L] or [B x C_in x L], kernel
/// [C_out x C_in x k], bias [C_out]. Zero padding on both ends.
inline Var conv1d(Var input, Var kernel, std::optional<Var> bias, std::size_t stride,
                  std::size_t padding) {
  detail::require_rank(kernel, 3, "conv1d kernel");
  const Tensor& xv = input.value();
  const Tensor& kv = kernel.value();
  if (xv.rank() != 2 && xv.rank() != 3) {
    throw DimensionError("conv1d: input must be [C x L] or [B x C x L], got " + shape_str(xv.shape()));
  }
  const bool batched = xv.rank() == 3;
  const std::size_t batch = batched ? xv.dim(0) : 1;
  const std::size_t cin = xv.dim(batched ? 1 : 0);
  const std::size_t len = xv.dim(batched ? 2 : 1);
  const std::size_t cout = kv.dim(0);
  const std::size_t k = kv.dim(2);
  if (kv.dim(1) != cin) {
    throw DimensionError("conv1d: input channels " + std::to_string(cin) + " vs kernel channels " +
                         std::to_string(kv.dim(1)));
  }
  if (bias && (bias->value().rank() != 1 || bias->value().dim(0) != cout)) {
    throw DimensionError("conv1d: bias " + shape_str(bias->shape()) + " vs out channels " +
                         std::to_string(cout));
  }
  const std::size_t lout = conv1d_output_length(len, k, stride, padding);
  Shape oshape = batched ? Shape{batch, cout, lout} : Shape{cout, lout};
  Tensor out(oshape);

  const double* x = xv.data().data();
  const double* w = kv.data().data();
  double* o = out.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t oc = 0; oc < cout; ++oc) {
      double* orow = o + (b * cout + oc) * lout;
      const double bval = bias ? bias->value()[oc] : 0.0;
      for (std::size_t j = 0; j < lout; ++j) orow[j] = bval;
      for (std::size_t ic = 0; ic < cin; ++ic) {
        const double* xrow = x + (b * cin + ic) * len;
        const double* wrow = w + (oc * cin + ic) * k;
        for (std::size_t j = 0; j < lout; ++j) {
          const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(j * stride) -
                                      static_cast<std::ptrdiff_t>(padding);
          double acc = 0.0;
          for (std::size_t q = 0; q < k; ++q) {
            const std::ptrdiff_t pos = base + static_cast<std::ptrdiff_t>(q);
            if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(len)) continue;
            acc += wrow[q] * xrow[pos];
          }
          orow[j] += acc;
        }
      }
    }
  }

  std::vector<Var> inputs{input, kernel};
  if (bias) inputs.push_back(*bias);
  return input.graph->record(
      std::move(out), inputs,
      [=](Graph& g, const Tensor&, const Tensor& go) {
        const bool want_x = g.wants_grad(input);
        const bool want_w = g.wants_grad(kernel);
        double* gx = want_x ? g.grad_buffer(input).data().data() : nullptr;
        double* gw = want_w ? g.grad_buffer(kernel).data().data() : nullptr;
        const double* x = input.value().data().data();
        const double* w = kernel.value().data().data();
        const double* gov = go.data().data();
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t oc = 0; oc < cout; ++oc) {
            const double* grow = gov + (b * cout + oc) * lout;
            for (std::size_t ic = 0; ic < cin; ++ic) {
              const double* xrow = x + (b * cin + ic) * len;
              const double* wrow = w + (oc * cin + ic) * k;
              for (std::size_t j = 0; j < lout; ++j) {
                const double gj = grow[j];
                if (gj == 0.0) continue;
                const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(j * stride) -
                                            static_cast<std::ptrdiff_t>(padding);
                for (std::size_t q = 0; q < k; ++q) {
                  const std::ptrdiff_t pos = base + static_cast<std::ptrdiff_t>(q);
                  if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(len)) continue;
                  if (gw) gw[(oc * cin + ic) * k + q] += gj * xrow[pos];
                  if (gx) gx[(b * cin + ic) * len + pos] += gj * wrow[q];
                }
              }
            }
          }
        }
        if (bias && g.wants_grad(*bias)) {
          Tensor& gb = g.grad_buffer(*bias);
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t oc = 0; oc < cout; ++oc) {
              for (std::size_t j = 0; j < lout; ++j) gb[oc] += gov[(b * cout + oc) * lout + j];
            }
          }
        }
      });
}

/// Columns [begin, end) of a [R x C] tensor.
inline Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  detail::require_rank(a, 2, "slice_cols");
  const Tensor& av = a.value();
  const std::size_t rows = av.dim(0);
  const std::size_t cols = av.dim(1);
  if (begin >= end || end > cols) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") outside " + std::to_string(cols) + " columns");
  }
  const std::size_t w = end - begin;
  Tensor out({rows, w});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < w; ++c) out[r * w + c] = av[r * cols + begin + c];
  }
  return a.graph->record(std::move(out), {a}, [a, rows, cols, begin, w](Graph& g, const Tensor&, const Tensor& go) {
    Tensor& ga = g.grad_buffer(a);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < w; ++c) ga[r * cols + begin + c] += go[r * w + c];
    }
  });
}

/// Concatenates [R x C_i] tensors along columns.
inline Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no operands");
  const std::size_t rows = parts[0].value().rank() == 2 ? parts[0].value().dim(0) : 0;
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const Var& p : parts) {
    detail::require_rank(p, 2, "concat_cols");
    if (p.value().dim(0) != rows) {
      throw DimensionError("concat_cols: row count " + std::to_string(p.value().dim(0)) + " vs " +
                           std::to_string(rows));
    }
    widths.push_back(p.value().dim(1));
    total += widths.back();
  }
  Tensor out({rows, total});
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor& pv = parts[i].value();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < widths[i]; ++c) out[r * total + offset + c] = pv[r * widths[i] + c];
    }
    offset += widths[i];
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].graph->record(std::move(out), inputs, [inputs, widths, rows, total](Graph& g, const Tensor&, const Tensor& go) {
    std::size_t offset = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (g.wants_grad(inputs[i])) {
        Tensor& gp = g.grad_buffer(inputs[i]);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < widths[i]; ++c) gp[r * widths[i] + c] += go[r * total + offset + c];
        }
      }
      offset += widths[i];
    }
  });
}

inline Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

/// Stacks L tensors of shape [B x C] into [B x C x L] (time as last axis).
inline Var stack_steps(std::span<const Var> steps) {
  if (steps.empty()) throw DimensionError("stack_steps: no operands");
  const Shape s0 = steps[0].shape();
  if (s0.size() != 2) throw DimensionError("stack_steps: steps must be [B x C]");
  for (const Var& s : steps) {
    if (s.shape() != s0) throw DimensionError("stack_steps: step shape " + shape_str(s.shape()) + " vs " + shape_str(s0));
  }
  const std::size_t b = s0[0], c = s0[1], l = steps.size();
  Tensor out({b, c, l});
  for (std::size_t j = 0; j < l; ++j) {
    const Tensor& sv = steps[j].value();
    for (std::size_t i = 0; i < b * c; ++i) out[i * l + j] = sv[i];
  }
  std::vector<Var> inputs(steps.begin(), steps.end());
  return steps[0].graph->record(std::move(out), inputs, [inputs, b, c, l](Graph& g, const Tensor&, const Tensor& go) {
    for (std::size_t j = 0; j < l; ++j) {
      if (!g.wants_grad(inputs[j])) continue;
      Tensor& gs = g.grad_buffer(inputs[j]);
      for (std::size_t i = 0; i < b * c; ++i) gs[i] += go[i * l + j];
    }
  });
}

/// Time step `index` of a [B x C x L] tensor, as [B x C].
inline Var step(Var a, std::size_t index) {
  detail::require_rank(a, 3, "step");
  const Tensor& av = a.value();
  const std::size_t b = av.dim(0), c = av.dim(1), l = av.dim(2);
  if (index >= l) throw DimensionError("step: index " + std::to_string(index) + " past length " + std::to_string(l));
  Tensor out({b, c});
  for (std::size_t i = 0; i < b * c; ++i) out[i] = av[i * l + index];
  return a.graph->record(std::move(out), {a}, [a, b, c, l, index](Graph& g, const Tensor&, const Tensor& go) {
    Tensor& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < b * c; ++i) ga[i * l + index] += go[i];
  });
}

/// One LSTM step over a batch. `state` packs [h | c] as [B x 2H]; the
/// result uses the same packing. Gate blocks of the 4H axis are ordered
/// input, forget, candidate, output.
inline Var lstm_cell(Var input, Var state, Var w_input, Var w_hidden, Var bias) {
  detail::require_rank(input, 2, "lstm_cell input");
  detail::require_rank(state, 2, "lstm_cell state");
  const Tensor& xv = input.value();
  const Tensor& sv = state.value();
  const Tensor& wi = w_input.value();
  const Tensor& wh = w_hidden.value();
  const Tensor& bv = bias.value();
  const std::size_t batch = xv.dim(0);
  const std::size_t din = xv.dim(1);
  if (wh.rank() != 2 || wh.dim(1) != 4 * wh.dim(0)) {
    throw DimensionError("lstm_cell: hidden weight must be [H x 4H], got " + shape_str(wh.shape()));
  }
  const std::size_t hid = wh.dim(0);
  if (wi.rank() != 2 || wi.dim(0) != din || wi.dim(1) != 4 * hid) {
    throw DimensionError("lstm_cell: input weight " + shape_str(wi.shape()) + " vs input " +
                         shape_str(xv.shape()) + " and hidden " + std::to_string(hid));
  }
  if (bv.rank() != 1 || bv.dim(0) != 4 * hid) {
    throw DimensionError("lstm_cell: bias " + shape_str(bv.shape()));
  }
  if (sv.dim(0) != batch || sv.dim(1) != 2 * hid) {
    throw DimensionError("lstm_cell: state " + shape_str(sv.shape()) + " vs batch " +
                         std::to_string(batch) + " and hidden " + std::to_string(hid));
  }
  const std::size_t g4 = 4 * hid;

  std::vector<double> h_prev(batch * hid);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < hid; ++j) h_prev[b * hid + j] = sv[b * 2 * hid + j];
  }
  // gates holds activated i, f, g, o after this block
  std::vector<double> gates(batch * g4);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < g4; ++j) gates[b * g4 + j] = bv[j];
  }
  dan::detail::gemm_acc(xv.data().data(), wi.data().data(), gates.data(), batch, din, g4);
  dan::detail::gemm_acc(h_prev.data(), wh.data().data(), gates.data(), batch, hid, g4);

  Tensor out({batch, 2 * hid});
  std::vector<double> tanh_c(batch * hid);
  for (std::size_t b = 0; b < batch; ++b) {
    double* gr = gates.data() + b * g4;
    for (std::size_t j = 0; j < hid; ++j) {
      gr[j] = dan::detail::sigmoid(gr[j]);
      gr[hid + j] = dan::detail::sigmoid(gr[hid + j]);
      gr[2 * hid + j] = std::tanh(gr[2 * hid + j]);
      gr[3 * hid + j] = dan::detail::sigmoid(gr[3 * hid + j]);
      const double c = gr[hid + j] * sv[b * 2 * hid + hid + j] + gr[j] * gr[2 * hid + j];
      const double tc = std::tanh(c);
      tanh_c[b * hid + j] = tc;
      out[b * 2 * hid + j] = gr[3 * hid + j] * tc;
      out[b * 2 * hid + hid + j] = c;
    }
  }

  return input.graph->record(
      std::move(out), {input, state, w_input, w_hidden, bias},
      [=, h_prev = std::move(h_prev), gates = std::move(gates), tanh_c = std::move(tanh_c)](
          Graph& g, const Tensor&, const Tensor& go) {
        const Tensor& sv = state.value();
        std::vector<double> dz(batch * g4);
        std::vector<double> dc_prev(batch * hid);
        for (std::size_t b = 0; b < batch; ++b) {
          const double* gr = gates.data() + b * g4;
          double* dzr = dz.data() + b * g4;
          for (std::size_t j = 0; j < hid; ++j) {
            const double ig = gr[j], fg = gr[hid + j], cg = gr[2 * hid + j], og = gr[3 * hid + j];
            const double tc = tanh_c[b * hid + j];
            const double dh = go[b * 2 * hid + j];
            const double dc = go[b * 2 * hid + hid + j] + dh * og * (1.0 - tc * tc);
            const double c_prev = sv[b * 2 * hid + hid + j];
            dzr[j] = dc * cg * ig * (1.0 - ig);
            dzr[hid + j] = dc * c_prev * fg * (1.0 - fg);
            dzr[2 * hid + j] = dc * ig * (1.0 - cg * cg);
            dzr[3 * hid + j] = dh * tc * og * (1.0 - og);
            dc_prev[b * hid + j] = dc * fg;
          }
        }
        if (g.wants_grad(input)) {
          dan::detail::gemm_acc_bt(dz.data(), w_input.value().data().data(),
                                   g.grad_buffer(input).data().data(), batch, din, g4);
        }
        if (g.wants_grad(state)) {
          std::vector<double> dh_prev(batch * hid, 0.0);
          dan::detail::gemm_acc_bt(dz.data(), w_hidden.value().data().data(), dh_prev.data(), batch, hid, g4);
          Tensor& gs = g.grad_buffer(state);
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t j = 0; j < hid; ++j) {
              gs[b * 2 * hid + j] += dh_prev[b * hid + j];
              gs[b * 2 * hid + hid + j] += dc_prev[b * hid + j];
            }
          }
        }
        if (g.wants_grad(w_input)) {
          dan::detail::gemm_acc_at(input.value().data().data(), dz.data(),
                                   g.grad_buffer(w_input).data().data(), batch, din, g4);
        }
        if (g.wants_grad(w_hidden)) {
          dan::detail::gemm_acc_at(h_prev.data(), dz.data(), g.grad_buffer(w_hidden).data().data(),
                                   batch, hid, g4);
        }
        if (g.wants_grad(bias)) {
          Tensor& gb = g.grad_buffer(bias);
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t j = 0; j < g4; ++j) gb[j] += dz[b * g4 + j];
          }
        }
      });
}

}  // namespace dan::ops
