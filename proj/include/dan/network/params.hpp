#pragma once

#include "dan/network/stack_plan.hpp"
#include "dan/tensor.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace dan {

/// Network shape. Kernel sizes double as strides for the three RepGen
/// convolutions (C0 far, C1 indicator, C2 near).
struct ModelConfig {
  std::size_t input_length = 1440;
  std::size_t horizon = 288;
  std::size_t hidden = 384;
  std::size_t conv_channels = 256;
  std::size_t kernel_far = 11;
  std::size_t kernel_indicator = 7;
  std::size_t kernel_near = 3;
  std::size_t refine_kernel_first = 7;   // padding 3
  std::size_t refine_kernel_second = 3;  // padding 1
  double alpha = 4.0;
  StackPlan plan = parse_stack("EDEDRR");

  /// Desk-scale profile used throughout the tests.
  static ModelConfig toy() {
    ModelConfig c;
    c.input_length = 48;
    c.horizon = 12;
    c.hidden = 16;
    c.conv_channels = 8;
    c.kernel_far = 4;
    c.kernel_indicator = 2;
    c.kernel_near = 3;
    c.plan = parse_stack("EDR");
    return c;
  }

  void validate() const {
    if (horizon == 0 || input_length <= horizon) throw std::invalid_argument("model config: need t > h >= 1");
    if (hidden == 0 || conv_channels == 0) throw std::invalid_argument("model config: widths must be positive");
    for (std::size_t k : {kernel_far, kernel_indicator, kernel_near}) {
      if (k == 0 || k > input_length) throw std::invalid_argument("model config: conv kernel out of range");
    }
    if (refine_kernel_first % 2 == 0 || refine_kernel_second % 2 == 0) {
      throw std::invalid_argument("model config: refine kernels must be odd to preserve length");
    }
    if (!(alpha > 0.0)) throw std::invalid_argument("model config: alpha must be positive");
  }
};

/// Named parameter tensors, ordered by name.
using ParamMap = std::map<std::string, Tensor>;

struct ParamSpec {
  std::string name;
  Shape shape;
  std::size_t fan_in = 1;
};

namespace detail {

inline void add_lstm(std::vector<ParamSpec>& out, const std::string& prefix, std::size_t din, std::size_t hid) {
  out.push_back({prefix + ".w_input", {din, 4 * hid}, hid});
  out.push_back({prefix + ".w_hidden", {hid, 4 * hid}, hid});
  out.push_back({prefix + ".bias", {4 * hid}, hid});
}

inline void add_conv(std::vector<ParamSpec>& out, const std::string& prefix, std::size_t cout, std::size_t cin,
                     std::size_t k) {
  out.push_back({prefix + ".kernel", {cout, cin, k}, cin * k});
  out.push_back({prefix + ".bias", {cout}, cin * k});
}

inline void add_affine(std::vector<ParamSpec>& out, const std::string& prefix, std::size_t in, std::size_t outd) {
  out.push_back({prefix + ".weight", {in, outd}, in});
  out.push_back({prefix + ".bias", {outd}, in});
}

}  // namespace detail

/// Every parameter the plan needs. Each E, D and R block owns its weights.
inline std::vector<ParamSpec> param_specs(const ModelConfig& cfg) {
  const std::size_t H = cfg.hidden;
  const std::size_t C = cfg.conv_channels;
  std::vector<ParamSpec> specs;
  const std::size_t n_enc = cfg.plan.count(Block::encode);
  const std::size_t n_dec = cfg.plan.count(Block::decode);
  const std::size_t n_merge = cfg.plan.count(Block::merge);
  for (std::size_t e = 0; e < n_enc; ++e) {
    const std::string p = "E" + std::to_string(e) + ".";
    detail::add_conv(specs, p + "conv_far", C, 1, cfg.kernel_far);
    detail::add_conv(specs, p + "conv_ind", C, 1, cfg.kernel_indicator);
    detail::add_conv(specs, p + "conv_near", C, 1, cfg.kernel_near);
    for (const char* branch : {"enc_far", "enc_ind", "enc_near"}) {
      detail::add_lstm(specs, p + branch + ".fwd", C, H);
      detail::add_lstm(specs, p + branch + ".bwd", C, H);
    }
  }
  for (std::size_t d = 0; d < n_dec; ++d) {
    const std::string p = "D" + std::to_string(d) + ".";
    detail::add_lstm(specs, p + "dec_ind", d == 0 ? 1 : 2, H);
    detail::add_lstm(specs, p + "dec_far", 2, H);
    detail::add_lstm(specs, p + "dec_near", 2, H);
    detail::add_affine(specs, p + "head_ind", H, 1);
    detail::add_affine(specs, p + "head_far", H, 1);
    detail::add_affine(specs, p + "head_near", H, 1);
    detail::add_conv(specs, p + "refine1", H, 2 * H, cfg.refine_kernel_first);
    detail::add_conv(specs, p + "refine2", 1, H, cfg.refine_kernel_second);
  }
  for (std::size_t r = 0; r < n_merge; ++r) {
    const std::string p = "R" + std::to_string(r) + ".";
    detail::add_lstm(specs, p + "lstm", 1, H);
    detail::add_affine(specs, p + "head_z", H, 1);
    detail::add_affine(specs, p + "head_out", 2, 1);
    detail::add_affine(specs, p + "res_far", H, 1);
    detail::add_affine(specs, p + "res_near", H, 1);
  }
  return specs;
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation, seeded.
inline ParamMap init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  ParamMap params;
  for (const ParamSpec& s : param_specs(cfg)) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(s.shape);
    for (double& v : t.data()) v = dist(rng);
    params.emplace(s.name, std::move(t));
  }
  return params;
}

inline ParamMap zero_params(const ModelConfig& cfg) {
  ParamMap params;
  for (const ParamSpec& s : param_specs(cfg)) params.emplace(s.name, Tensor::zeros(s.shape));
  return params;
}

inline std::size_t parameter_count(const ParamMap& params) {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t.size();
  return n;
}

}  // namespace dan
