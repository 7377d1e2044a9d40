#pragma once

#include "dan/data/sampling.hpp"
#include "dan/gmm.hpp"
#include "dan/network/params.hpp"

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace dan {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Everything a training run depends on. Keys in the config file match the
/// field names below (`t`, `h`, `stack`, `epsilon`, ...).
struct TrainConfig {
  std::size_t t = 1440;
  std::size_t h = 288;
  std::size_t hidden = 384;
  std::size_t conv_channels = 256;
  std::size_t kernel_far = 11;
  std::size_t kernel_indicator = 7;
  std::size_t kernel_near = 3;
  std::string stack = "EDEDRR";
  double epsilon = 10.0;
  double p = 1.0;
  std::size_t k = 4;
  double alpha = 4.0;
  std::size_t gmm_components = 3;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 60;
  std::size_t patience = 10;  // 0 disables early stopping
  double val_fraction = 0.1;
  double grad_clip = 5.0;     // 0 disables clipping
  std::uint64_t seed = 0;
  std::size_t n_draws = 10000;
  std::string train_end;      // ISO timestamp; empty means the whole series

  /// Desk-scale profile: t=48, h=12, hidden 16, kernels 4/2/3, stack EDR.
  static TrainConfig toy() {
    TrainConfig c;
    c.t = 48;
    c.h = 12;
    c.hidden = 16;
    c.conv_channels = 8;
    c.kernel_far = 4;
    c.kernel_indicator = 2;
    c.kernel_near = 3;
    c.stack = "EDR";
    c.batch_size = 32;
    c.n_draws = 2000;
    return c;
  }

  ModelConfig model() const {
    ModelConfig m;
    m.input_length = t;
    m.horizon = h;
    m.hidden = hidden;
    m.conv_channels = conv_channels;
    m.kernel_far = kernel_far;
    m.kernel_indicator = kernel_indicator;
    m.kernel_near = kernel_near;
    m.alpha = alpha;
    m.plan = parse_stack(stack);
    return m;
  }

  SamplingPolicy sampling() const { return {epsilon, p, k, seed}; }

  GmmFitOptions gmm_options() const {
    GmmFitOptions o;
    o.components = gmm_components;
    o.seed = seed;
    return o;
  }

  void validate() const {
    if (h == 0 || t <= h) throw ConfigError("config: need t > h >= 1 (t=" + std::to_string(t) + ", h=" + std::to_string(h) + ")");
    if (hidden == 0 || conv_channels == 0 || batch_size == 0 || epochs == 0 || n_draws == 0 || gmm_components == 0) {
      throw ConfigError("config: hidden, conv_channels, batch_size, epochs, n_draws and gmm_components must be positive");
    }
    if (!(learning_rate > 0.0)) throw ConfigError("config: learning_rate must be positive");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("config: val_fraction must lie in [0, 1)");
    if (!(grad_clip >= 0.0)) throw ConfigError("config: grad_clip must be non-negative");
    try {
      sampling().validate();
      model().validate();
    } catch (const StackGrammarError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

template <class T>
void parse_number(std::string_view key, std::string_view text, T& out) {
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc() || p != text.data() + text.size()) {
    throw ConfigError("config: key '" + std::string(key) + "' has invalid value '" + std::string(text) + "'");
  }
}

struct ConfigField {
  std::function<void(TrainConfig&, std::string_view)> set;
  std::function<std::string(const TrainConfig&)> get;
};

inline const std::map<std::string, ConfigField, std::less<>>& config_fields() {
  static const std::map<std::string, ConfigField, std::less<>> fields = [] {
    std::map<std::string, ConfigField, std::less<>> f;
    auto size_field = [&](const char* name, std::size_t TrainConfig::*m) {
      f[name] = {[=](TrainConfig& c, std::string_view v) { parse_number(name, v, c.*m); },
                 [=](const TrainConfig& c) { return std::to_string(c.*m); }};
    };
    auto real_field = [&](const char* name, double TrainConfig::*m) {
      f[name] = {[=](TrainConfig& c, std::string_view v) { parse_number(name, v, c.*m); },
                 [=](const TrainConfig& c) { return format_double(c.*m); }};
    };
    auto text_field = [&](const char* name, std::string TrainConfig::*m) {
      f[name] = {[=](TrainConfig& c, std::string_view v) { c.*m = std::string(v); },
                 [=](const TrainConfig& c) { return c.*m; }};
    };
    size_field("t", &TrainConfig::t);
    size_field("h", &TrainConfig::h);
    size_field("hidden", &TrainConfig::hidden);
    size_field("conv_channels", &TrainConfig::conv_channels);
    size_field("kernel_far", &TrainConfig::kernel_far);
    size_field("kernel_indicator", &TrainConfig::kernel_indicator);
    size_field("kernel_near", &TrainConfig::kernel_near);
    text_field("stack", &TrainConfig::stack);
    real_field("epsilon", &TrainConfig::epsilon);
    real_field("p", &TrainConfig::p);
    size_field("k", &TrainConfig::k);
    real_field("alpha", &TrainConfig::alpha);
    size_field("gmm_components", &TrainConfig::gmm_components);
    real_field("learning_rate", &TrainConfig::learning_rate);
    size_field("batch_size", &TrainConfig::batch_size);
    size_field("epochs", &TrainConfig::epochs);
    size_field("patience", &TrainConfig::patience);
    real_field("val_fraction", &TrainConfig::val_fraction);
    real_field("grad_clip", &TrainConfig::grad_clip);
    f["seed"] = {[](TrainConfig& c, std::string_view v) { parse_number("seed", v, c.seed); },
                 [](const TrainConfig& c) { return std::to_string(c.seed); }};
    size_field("n_draws", &TrainConfig::n_draws);
    text_field("train_end", &TrainConfig::train_end);
    return f;
  }();
  return fields;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace detail

/// Sets one field from its textual value; unknown keys are an error.
inline void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value) {
  const auto& fields = detail::config_fields();
  auto it = fields.find(key);
  if (it == fields.end()) throw ConfigError("config: unknown key '" + std::string(key) + "'");
  value = detail::trim(value);
  if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
  it->second.set(cfg, value);
}

/// Parses `key = value` lines. `#` starts a comment, values may be quoted,
/// and keys absent from the text keep their defaults from `base`.
inline TrainConfig parse_config(std::string_view text, TrainConfig base = {}) {
  std::map<std::string, std::size_t, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line = line.substr(0, i);
        break;
      }
    }
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string_view key = detail::trim(line.substr(0, eq));
    if (auto prev = seen.find(key); prev != seen.end()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": key '" + std::string(key) +
                        "' already set on line " + std::to_string(prev->second));
    }
    seen.emplace(std::string(key), line_no);
    try {
      set_config_value(base, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

inline TrainConfig load_config(const std::string& path, TrainConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

/// Canonical text form: every key, sorted, one per line. Doubles use the
/// shortest round-trip representation so parse(to_text(c)) == c.
inline std::string config_to_text(const TrainConfig& cfg) {
  std::string out;
  for (const auto& [name, field] : detail::config_fields()) {
    out += name;
    out += " = ";
    const std::string v = field.get(cfg);
    const bool text = name == "stack" || name == "train_end";
    if (text) out += '"';
    out += v;
    if (text) out += '"';
    out += '\n';
  }
  return out;
}

}  // namespace dan
