#include "dan/data/series.hpp"
#include "dan/forecast/kw_report.hpp"
#include "dan/forecast/metrics.hpp"
#include "dan/forecast/rolling.hpp"
#include "dan/gmm.hpp"
#include "dan/synthetic.hpp"
#include "dan/train/checkpoint.hpp"
#include "dan/train/config.hpp"
#include "dan/train/trainer.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr const char* kVersion = "0.1.0";

// Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string manifest_path;
  bool toy = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "Config file of key = value lines")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.overrides, "Override a config key, e.g. --set hidden=32")->take_all();
  cmd->add_option("--seed", c.seed, "Seed for sampling, mixture fitting and initialisation");
  cmd->add_option("--manifest", c.manifest_path, "Run manifest path (default: <output>.manifest.json)");
  cmd->add_flag("--toy", c.toy, "Start from the desk-scale profile instead of the full-scale defaults");
}

dan::TrainConfig resolve_config(const Common& c) {
  dan::TrainConfig cfg = c.toy ? dan::TrainConfig::toy() : dan::TrainConfig{};
  if (!c.config_path.empty()) cfg = dan::load_config(c.config_path, cfg);
  for (const std::string& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw dan::ConfigError("--set expects key=value, got '" + kv + "'");
    dan::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

dan::TimeSeries read_series(const std::string& path, const std::string& value_column, std::size_t max_gap) {
  dan::CsvColumns cols;
  cols.value = value_column;
  const dan::IngestReport rep = dan::load_series(path, cols);
  if (rep.gaps.empty()) return rep.series;
  const auto filled = dan::gap_fill(rep.series, max_gap);
  std::cerr << "note: forward-filled " << filled.filled << " missing steps in '" << path << "'\n";
  return filled.series;
}

dan::TimePoint timestamp_arg(const std::string& text, const char* what) {
  const auto tp = dan::parse_timestamp(text);
  if (!tp) throw ValidationError(std::string(what) + " '" + text + "' is not an ISO-8601 timestamp");
  return *tp;
}

std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

void write_manifest(const std::string& path, const std::string& command, const dan::TrainConfig& cfg,
                    const nlohmann::json& inputs, const nlohmann::json& outputs) {
  const std::string text = dan::config_to_text(cfg);
  nlohmann::json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["compiler"] = __VERSION__;
  m["seed"] = cfg.seed;
  m["config_hash"] = "crc32:" + hex32(dan::detail::crc32_of(reinterpret_cast<const unsigned char*>(text.data()),
                                                             text.size()));
  m["config"] = text;
  m["sampling"] = {{"epsilon", cfg.epsilon}, {"p", cfg.p}, {"k", cfg.k}, {"n_draws", cfg.n_draws}};
  m["inputs"] = inputs;
  m["outputs"] = outputs;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest '" + path + "'");
  out << m.dump(2) << '\n';
}

std::string manifest_for(const Common& c, const std::string& output) {
  return c.manifest_path.empty() ? output + ".manifest.json" : c.manifest_path;
}

struct SeriesArgs {
  std::string ordinary;
  std::string indicator;
  std::string value_column = "value";
  std::size_t max_gap = 96;
};

void add_series(CLI::App* cmd, SeriesArgs& s, bool need_ordinary = true) {
  auto* o = cmd->add_option("--ordinary", s.ordinary, "Streamflow CSV (timestamp,value)")->check(CLI::ExistingFile);
  if (need_ordinary) o->required();
  cmd->add_option("--indicator", s.indicator, "Indicator CSV aligned with --ordinary; omit for univariate mode")
      ->check(CLI::ExistingFile);
  cmd->add_option("--value-column", s.value_column, "Name of the value column");
  cmd->add_option("--max-gap", s.max_gap, "Longest run of missing steps to forward-fill");
}

struct Loaded {
  dan::TimeSeries ordinary;
  std::optional<dan::TimeSeries> indicator;
  const dan::TimeSeries* indicator_ptr() const { return indicator ? &*indicator : nullptr; }
};

Loaded load_inputs(const SeriesArgs& s) {
  Loaded l;
  l.ordinary = read_series(s.ordinary, s.value_column, s.max_gap);
  if (!s.indicator.empty()) l.indicator = read_series(s.indicator, s.value_column, s.max_gap);
  return l;
}

nlohmann::json series_inputs(const SeriesArgs& s) {
  nlohmann::json in{{"ordinary", s.ordinary}};
  if (!s.indicator.empty()) in["indicator"] = s.indicator;
  return in;
}

struct SpanArgs {
  std::string start, end;
  std::size_t stride = 16;
};

void add_span(CLI::App* cmd, SpanArgs& s) {
  cmd->add_option("--start", s.start, "First issue time of the test span")->required();
  cmd->add_option("--end", s.end, "End of the test span (exclusive)")->required();
  cmd->add_option("--stride", s.stride, "Steps between issuances")->check(CLI::PositiveNumber);
}

std::vector<dan::Issuance> run_rolling(const dan::Checkpoint& ck, const Loaded& in, const SpanArgs& span) {
  const auto sched = dan::make_schedule(in.ordinary, timestamp_arg(span.start, "--start"),
                                        timestamp_arg(span.end, "--end"), span.stride, ck.config.h);
  return dan::rolling_predict(ck, in.ordinary, in.indicator_ptr(), sched);
}

int run(int argc, char** argv) {
  CLI::App app{"Extreme-adaptive streamflow forecaster"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common common;
  SeriesArgs series;
  SpanArgs span;
  std::string out, checkpoint, log_path, forecasts_path;
  std::size_t components = 0;
  double bin_width = 2.0;

  auto* fit = app.add_subcommand("fit-gmm", "Fit the mixture that stands in for a missing indicator");
  add_common(fit, common);
  add_series(fit, series);
  fit->add_option("--components", components, "Mixture components (default: config gmm_components)");
  fit->add_option("--out", out, "Mixture output file")->required();

  auto* train = app.add_subcommand("train", "Sample windows, train the network and write a checkpoint");
  add_common(train, common);
  add_series(train, series);
  train->add_option("--out", out, "Checkpoint output path")->required();
  train->add_option("--log", log_path, "Per-epoch loss CSV");

  auto* predict = app.add_subcommand("predict", "Rolling forecasts over a test span");
  add_series(predict, series);
  add_span(predict, span);
  predict->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  predict->add_option("--out", out, "Forecast CSV (issue_time,step,forecast,truth)")->required();
  predict->add_option("--manifest", common.manifest_path, "Run manifest path");

  auto* evaluate = app.add_subcommand("evaluate", "Rolling forecasts scored with RMSE, MAPE and RMSE_far");
  add_series(evaluate, series);
  add_span(evaluate, span);
  evaluate->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", out, "Metrics CSV")->required();
  evaluate->add_option("--forecasts", forecasts_path, "Also write the forecast CSV");
  evaluate->add_option("--manifest", common.manifest_path, "Run manifest path");

  auto* kw = app.add_subcommand("kw-stats", "Histogram of window H before and after the sampling policy");
  add_common(kw, common);
  add_series(kw, series);
  kw->add_option("--out", out, "Histogram CSV (bin_lo,bin_hi,before,after)")->required();
  kw->add_option("--bin-width", bin_width, "Histogram bin width")->check(CLI::PositiveNumber);

  std::string synth_kind = "rainfall-runoff", synth_dir;
  std::size_t synth_length = 8000;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "Write a synthetic benchmark as CSV");
  synth->add_option("--kind", synth_kind, "sine-spike or rainfall-runoff")
      ->check(CLI::IsMember({"sine-spike", "rainfall-runoff"}));
  synth->add_option("--out-dir", synth_dir, "Output directory")->required();
  synth->add_option("--length", synth_length, "Number of steps")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (*fit) {
    const dan::TrainConfig cfg = resolve_config(common);
    if (!series.indicator.empty()) throw ValidationError("fit-gmm takes no --indicator");
    const Loaded in = load_inputs(series);
    dan::GmmFitOptions opt = cfg.gmm_options();
    if (components) opt.components = components;
    const std::size_t span_len = dan::training_span(cfg, in.ordinary);
    const auto [z, norm] = dan::fit_transform(in.ordinary, span_len);
    const auto result = dan::fit_gmm(std::span<const double>(z).first(span_len), opt);
    dan::write_gmm(out, result.model);
    std::cout << "fitted " << opt.components << " components in " << result.log_likelihood.size()
              << " iterations (converged: " << (result.converged ? "yes" : "no") << ")\n";
    write_manifest(manifest_for(common, out), "fit-gmm", cfg, series_inputs(series), {{"gmm", out}});
  } else if (*train) {
    const dan::TrainConfig cfg = resolve_config(common);
    const Loaded in = load_inputs(series);
    dan::TrainHooks hooks;
    hooks.on_epoch = [](const dan::EpochRecord& r) {
      std::cerr << "epoch " << r.epoch << "  lambda " << r.lambda << "  loss " << r.train_loss << "  val_rmse "
                << r.val_loss << '\n';
    };
    const auto rep = dan::train(cfg, in.ordinary, in.indicator_ptr(), hooks);
    dan::save_checkpoint(rep.checkpoint, out);
    nlohmann::json outputs{{"checkpoint", out}};
    if (!log_path.empty()) {
      dan::write_training_log(log_path, rep.checkpoint.log);
      outputs["log"] = log_path;
    }
    std::cout << "trained on " << rep.train_windows << " windows (" << rep.val_windows << " validation) of "
              << rep.drawn << " drawn; best epoch " << rep.best_epoch << '\n';
    write_manifest(manifest_for(common, out), "train", cfg, series_inputs(series), outputs);
  } else if (*predict || *evaluate) {
    const dan::Checkpoint ck = dan::load_checkpoint(checkpoint);
    const Loaded in = load_inputs(series);
    const auto forecasts = run_rolling(ck, in, span);
    nlohmann::json inputs = series_inputs(series);
    inputs["checkpoint"] = checkpoint;
    nlohmann::json outputs;
    if (*predict) {
      dan::write_forecasts(out, forecasts, in.ordinary);
      outputs["forecasts"] = out;
      std::cout << forecasts.size() << " issuances written to " << out << '\n';
    } else {
      const auto m = dan::compute_metrics(forecasts, in.ordinary, ck.ordinary_norm);
      dan::write_metrics(out, m);
      outputs["metrics"] = out;
      if (!forecasts_path.empty()) {
        dan::write_forecasts(forecasts_path, forecasts, in.ordinary);
        outputs["forecasts"] = forecasts_path;
      }
      std::cout << "rmse " << m.rmse << "  mape " << m.mape << "  rmse_far "
                << (m.rmse_far ? std::to_string(*m.rmse_far) : std::string("n/a")) << "  (" << m.n_far_points << " of "
                << m.n_points << " points far)\n";
    }
    write_manifest(manifest_for(common, out), *predict ? "predict" : "evaluate", ck.config, inputs, outputs);
  } else if (*kw) {
    const dan::TrainConfig cfg = resolve_config(common);
    const Loaded in = load_inputs(series);
    const std::size_t span_len = dan::training_span(cfg, in.ordinary);
    const auto rep = dan::kw_stats_report(std::span<const double>(in.ordinary.values).first(span_len),
                                          {cfg.t, cfg.h}, cfg.sampling(), cfg.n_draws, bin_width);
    dan::write_kw_report(out, rep);
    std::cout << "H < " << cfg.epsilon << ": " << rep.before_below_fraction() << " of all draws, "
              << rep.after_below_fraction() << " of " << rep.n_accepted << " accepted\n";
    write_manifest(manifest_for(common, out), "kw-stats", cfg, series_inputs(series), {{"histogram", out}});
  } else if (*synth) {
    std::filesystem::create_directories(synth_dir);
    const std::filesystem::path dir(synth_dir);
    if (synth_kind == "sine-spike") {
      dan::write_series((dir / "sine_spike.csv").string(), dan::synth::sine_spike(synth_length));
    } else {
      dan::synth::RainfallRunoffOptions o;
      o.length = synth_length;
      o.seed = synth_seed;
      const auto rr = dan::synth::rainfall_runoff(o);
      dan::write_series((dir / "flow.csv").string(), rr.flow);
      dan::write_series((dir / "rain.csv").string(), rr.rain);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const dan::IngestionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const dan::CheckpointError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
