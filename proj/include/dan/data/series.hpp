#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace dan {

using TimePoint = std::chrono::sys_seconds;
using Interval = std::chrono::seconds;

inline constexpr Interval kDefaultInterval{15 * 60};

/// Parses `YYYY-MM-DDTHH:MM:SS` with an optional `Z` or `+00:00` suffix.
/// A space may replace the `T`. Returns nullopt on malformed input.
inline std::optional<TimePoint> parse_timestamp(std::string_view s) {
  auto num = [&](std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, out);
    return ec == std::errc{} && p == s.data() + pos + len;
  };
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
      s[16] != ':') {
    return std::nullopt;
  }
  if (!num(0, 4, y) || !num(5, 2, mo) || !num(8, 2, d) || !num(11, 2, h) || !num(14, 2, mi) ||
      !num(17, 2, sec)) {
    return std::nullopt;
  }
  const std::string_view tail = s.substr(19);
  if (!(tail.empty() || tail == "Z" || tail == "+00:00")) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 59) return std::nullopt;
  return TimePoint{std::chrono::sys_days{ymd}} + std::chrono::hours{h} + std::chrono::minutes{mi} +
         std::chrono::seconds{sec};
}

inline std::string format_timestamp(TimePoint tp) {
  const auto day = std::chrono::floor<std::chrono::days>(tp);
  const std::chrono::year_month_day ymd{day};
  const std::chrono::hh_mm_ss hms{tp - day};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long>(hms.seconds().count()));
  return buf;
}

/// Fixed-interval univariate series. A NaN value marks a missing step; a
/// series is usable for modelling only once complete().
struct TimeSeries {
  std::string sensor_id;
  TimePoint start{};
  Interval interval = kDefaultInterval;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  TimePoint time_at(std::size_t i) const { return start + interval * static_cast<long long>(i); }

  bool complete() const {
    return std::none_of(values.begin(), values.end(), [](double v) { return std::isnan(v); });
  }

  void require_complete() const {
    if (!complete()) throw std::invalid_argument("series '" + sensor_id + "' has unfilled gaps");
  }

  /// Index of `tp` if it falls on the grid (may be past the end).
  std::optional<std::size_t> index_of(TimePoint tp) const {
    if (tp < start) return std::nullopt;
    const auto delta = tp - start;
    if (delta % interval != Interval::zero()) return std::nullopt;
    return static_cast<std::size_t>(delta / interval);
  }

  TimeSeries slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > values.size()) throw std::out_of_range("series slice out of range");
    return {sensor_id, time_at(begin), interval,
            std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(begin),
                                values.begin() + static_cast<std::ptrdiff_t>(end))};
  }
};

/// Ingestion failure. `lines` holds 1-based file line numbers.
class IngestionError : public std::runtime_error {
 public:
  IngestionError(const std::string& message, std::vector<std::size_t> lines)
      : std::runtime_error(message), lines_(std::move(lines)) {}
  const std::vector<std::size_t>& lines() const noexcept { return lines_; }

 private:
  std::vector<std::size_t> lines_;
};

struct CsvColumns {
  std::string timestamp = "timestamp";
  std::string value = "value";
};

struct Gap {
  std::size_t offset = 0;  // index of the first missing step
  std::size_t length = 0;
};

struct IngestReport {
  TimeSeries series;
  std::vector<Gap> gaps;

  std::size_t missing() const {
    std::size_t n = 0;
    for (const Gap& g : gaps) n += g.length;
    return n;
  }
};

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    std::string_view field = line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    while (!field.empty() && (field.front() == ' ' || field.front() == '"')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '"' || field.back() == '\r')) field.remove_suffix(1);
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace detail

/// Reads a `timestamp,value` CSV. Rows must advance by positive multiples of
/// `interval`; skipped steps and empty value fields become gaps (NaN).
inline IngestReport load_series(const std::string& path, const CsvColumns& columns = {},
                                Interval interval = kDefaultInterval) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open '" + path + "'", {});

  std::string line;
  if (!std::getline(in, line)) throw IngestionError("'" + path + "' is empty", {1});
  const auto header = detail::split_csv(line);
  auto find_col = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw IngestionError("'" + path + "': header lacks column '" + name + "'", {1});
  };
  const std::size_t tcol = find_col(columns.timestamp);
  const std::size_t vcol = find_col(columns.value);

  IngestReport report;
  std::string stem = path.substr(path.find_last_of('/') == std::string::npos ? 0 : path.find_last_of('/') + 1);
  report.series.sensor_id = stem.substr(0, stem.rfind('.'));
  report.series.interval = interval;

  std::vector<std::size_t> bad_lines;
  std::ostringstream problems;
  auto fail = [&](std::size_t lineno, const std::string& what) {
    bad_lines.push_back(lineno);
    if (bad_lines.size() <= 20) problems << "\n  line " << lineno << ": " << what;
  };

  std::optional<TimePoint> prev;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv(line);
    if (fields.size() <= std::max(tcol, vcol)) {
      fail(lineno, "too few fields");
      continue;
    }
    const auto tp = parse_timestamp(fields[tcol]);
    if (!tp) {
      fail(lineno, "unparseable timestamp '" + std::string(fields[tcol]) + "'");
      continue;
    }
    double value = std::numeric_limits<double>::quiet_NaN();
    if (!fields[vcol].empty()) {
      const auto sv = fields[vcol];
      auto [p, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), value);
      if (ec != std::errc{} || p != sv.data() + sv.size() || !std::isfinite(value)) {
        fail(lineno, "unparseable value '" + std::string(sv) + "'");
        continue;
      }
      if (value < 0.0) {
        fail(lineno, "negative value " + std::string(sv));
        continue;
      }
    }
    if (!prev) {
      report.series.start = *tp;
    } else {
      const auto delta = *tp - *prev;
      if (delta == Interval::zero()) {
        fail(lineno, "duplicated timestamp " + format_timestamp(*tp));
        continue;
      }
      if (delta < Interval::zero()) {
        fail(lineno, "timestamp " + format_timestamp(*tp) + " precedes previous row");
        continue;
      }
      if (delta % interval != Interval::zero()) {
        fail(lineno, "timestamp " + format_timestamp(*tp) + " off the " +
                         std::to_string(interval.count()) + "s cadence");
        continue;
      }
      const auto steps = static_cast<std::size_t>(delta / interval);
      if (steps > 1) {
        report.gaps.push_back({report.series.values.size(), steps - 1});
        report.series.values.insert(report.series.values.end(), steps - 1,
                                    std::numeric_limits<double>::quiet_NaN());
      }
    }
    if (std::isnan(value)) {
      if (!report.gaps.empty() && report.gaps.back().offset + report.gaps.back().length == report.series.values.size()) {
        ++report.gaps.back().length;
      } else {
        report.gaps.push_back({report.series.values.size(), 1});
      }
    }
    report.series.values.push_back(value);
    prev = *tp;
  }

  if (!bad_lines.empty()) {
    std::string msg = "'" + path + "': " + std::to_string(bad_lines.size()) + " bad row(s)" + problems.str();
    if (bad_lines.size() > 20) msg += "\n  ...";
    throw IngestionError(msg, std::move(bad_lines));
  }
  if (report.series.values.empty()) throw IngestionError("'" + path + "' has no data rows", {});
  if (std::isnan(report.series.values.front())) {
    throw IngestionError("'" + path + "': first row has no value", {2});
  }
  return report;
}

struct FillResult {
  TimeSeries series;
  std::size_t filled = 0;
};

/// Forward-fills gaps of at most `max_gap` consecutive steps (default one
/// day at 15-minute cadence).
inline FillResult gap_fill(const TimeSeries& series, std::size_t max_gap = 96) {
  FillResult out{series, 0};
  auto& v = out.series.values;
  std::size_t run = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isnan(v[i])) {
      run = 0;
      continue;
    }
    if (i == 0) throw std::invalid_argument("gap_fill: series starts with a gap");
    if (++run > max_gap) {
      throw std::invalid_argument("gap_fill: gap at " + format_timestamp(series.time_at(i - run + 1)) +
                                  " exceeds " + std::to_string(max_gap) + " steps");
    }
    v[i] = v[i - 1];
    ++out.filled;
  }
  return out;
}

inline void write_series(const std::string& path, const TimeSeries& series) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "timestamp,value\n";
  char buf[64];
  for (std::size_t i = 0; i < series.size(); ++i) {
    out << format_timestamp(series.time_at(i)) << ',';
    if (!std::isnan(series.values[i])) {
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, series.values[i]);
      out.write(buf, p - buf);
    }
    out << '\n';
  }
}

}  // namespace dan
