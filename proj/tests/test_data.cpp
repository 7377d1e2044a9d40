#include "dan/data/kruskal_wallis.hpp"
#include "dan/data/normalize.hpp"
#include "dan/data/series.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

using namespace dan;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
  const fs::path p = fs::temp_directory_path() / ("dan_data_" + name);
  std::ofstream(p) << body;
  return p.string();
}

// Literal form of the statistic: ranks by counting, then
// 12/(n(n+1)) * sum(R_j^2/n_j) - 3(n+1).
double kw_oracle(const std::vector<double>& window, std::size_t k) {
  const std::size_t m = window.size() / k;
  const std::size_t n = m * k;
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = std::round(window[i]);
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      less += r[j] < r[i];
      equal += r[j] == r[i];
    }
    rank[i] = less + (equal + 1.0) / 2.0;
  }
  double s = 0.0;
  for (std::size_t g = 0; g < k; ++g) {
    double rs = 0.0;
    for (std::size_t i = g * m; i < (g + 1) * m; ++i) rs += rank[i];
    s += rs * rs / static_cast<double>(m);
  }
  const double nd = static_cast<double>(n);
  return 12.0 / (nd * (nd + 1.0)) * s - 3.0 * (nd + 1.0);
}

}  // namespace

TEST(Timestamp, ParsesIsoForms) {
  const auto a = parse_timestamp("2021-09-01T00:15:00Z");
  const auto b = parse_timestamp("2021-09-01 00:15:00");
  const auto c = parse_timestamp("2021-09-01T00:15:00+00:00");
  ASSERT_TRUE(a && b && c);
  EXPECT_EQ(*a, *b);
  EXPECT_EQ(*a, *c);
  EXPECT_EQ(format_timestamp(*a), "2021-09-01T00:15:00Z");
  EXPECT_FALSE(parse_timestamp("2021-13-01T00:00:00Z"));
  EXPECT_FALSE(parse_timestamp("yesterday"));
}

TEST(LoadSeries, ReadsCleanFile) {
  const auto path = write_temp("clean.csv",
                               "timestamp,value\n2020-01-01T00:00:00Z,1.5\n2020-01-01T00:15:00Z,2\n"
                               "2020-01-01T00:30:00Z,0\n");
  const auto rep = load_series(path);
  EXPECT_EQ(rep.series.values, (std::vector<double>{1.5, 2.0, 0.0}));
  EXPECT_TRUE(rep.gaps.empty());
  EXPECT_EQ(rep.series.sensor_id, "dan_data_clean");
  EXPECT_EQ(format_timestamp(rep.series.time_at(2)), "2020-01-01T00:30:00Z");
}

TEST(LoadSeries, SkippedStepsBecomeGaps) {
  const auto path = write_temp("gappy.csv",
                               "timestamp,value\n2020-01-01T00:00:00Z,5\n2020-01-01T00:45:00Z,7\n"
                               "2020-01-01T01:00:00Z,\n2020-01-01T01:15:00Z,8\n");
  const auto rep = load_series(path);
  ASSERT_EQ(rep.series.size(), 6u);
  ASSERT_EQ(rep.gaps.size(), 2u);
  EXPECT_EQ(rep.gaps[0].offset, 1u);
  EXPECT_EQ(rep.gaps[0].length, 2u);
  EXPECT_EQ(rep.gaps[1].offset, 4u);
  EXPECT_EQ(rep.missing(), 3u);
  EXPECT_FALSE(rep.series.complete());
}

TEST(LoadSeries, ReportsEveryBadLine) {
  const auto path = write_temp("bad.csv",
                               "timestamp,value\n2020-01-01T00:00:00Z,1\n2020-01-01T00:15:00Z,-3\n"
                               "2020-01-01T00:15:00Z,2\nnot-a-time,4\n2020-01-01T00:20:00Z,1\n"
                               "2020-01-01T00:30:00Z,abc\n");
  try {
    load_series(path);
    FAIL() << "expected IngestionError";
  } catch (const IngestionError& e) {
    EXPECT_EQ(e.lines(), (std::vector<std::size_t>{3, 5, 6, 7}));
  }
}

TEST(LoadSeries, RejectsDuplicateAndBackwardsTimestamps) {
  const auto dup = write_temp("dup.csv", "timestamp,value\n2020-01-01T00:00:00Z,1\n2020-01-01T00:00:00Z,2\n");
  EXPECT_THROW(load_series(dup), IngestionError);
  const auto back = write_temp("back.csv",
                               "timestamp,value\n2020-01-01T00:15:00Z,1\n2020-01-01T00:00:00Z,2\n");
  EXPECT_THROW(load_series(back), IngestionError);
}

TEST(LoadSeries, MissingColumnOrFile) {
  EXPECT_THROW(load_series(write_temp("cols.csv", "time,flow\n2020-01-01T00:00:00Z,1\n")), IngestionError);
  EXPECT_THROW(load_series("/nonexistent/file.csv"), IngestionError);
}

TEST(LoadSeries, WriteThenLoadRoundTrips) {
  TimeSeries s{"x", *parse_timestamp("2020-05-01T00:00:00Z"), kDefaultInterval, {0.1, 2.25, 1e-7, 3.0}};
  const auto path = (fs::temp_directory_path() / "dan_data_roundtrip.csv").string();
  write_series(path, s);
  EXPECT_EQ(load_series(path).series.values, s.values);
}

TEST(GapFill, NoGapsIsIdentity) {
  TimeSeries s{"x", {}, kDefaultInterval, {1, 2, 3}};
  const auto r = gap_fill(s);
  EXPECT_EQ(r.series.values, s.values);
  EXPECT_EQ(r.filled, 0u);
}

TEST(GapFill, SingleStepForwardFilled) {
  const double nan = std::nan("");
  TimeSeries s{"x", {}, kDefaultInterval, {5, nan, 7}};
  const auto r = gap_fill(s);
  EXPECT_EQ(r.series.values, (std::vector<double>{5, 5, 7}));
  EXPECT_EQ(r.filled, 1u);
}

TEST(GapFill, MaximumIsInclusive) {
  const double nan = std::nan("");
  std::vector<double> v(1, 1.0);
  v.insert(v.end(), 96, nan);
  v.push_back(2.0);
  EXPECT_NO_THROW(gap_fill(TimeSeries{"x", {}, kDefaultInterval, v}));
  v.insert(v.begin() + 1, nan);  // 97 missing steps
  EXPECT_THROW(gap_fill(TimeSeries{"x", {}, kDefaultInterval, v}), std::invalid_argument);
}

TEST(GapFill, LeadingGapRejected) {
  TimeSeries s{"x", {}, kDefaultInterval, {std::nan(""), 1.0}};
  EXPECT_THROW(gap_fill(s), std::invalid_argument);
}

TEST(Normalize, RoundTripWithinTolerance) {
  std::mt19937_64 rng(11);
  std::lognormal_distribution<double> d(1.0, 1.2);
  std::vector<double> raw(1000);
  for (double& v : raw) v = d(rng);
  raw[3] = 0.0;
  const NormTransform t = fit_norm(raw);
  for (double v : raw) EXPECT_NEAR(t.inverse(t.forward(v)), v, 1e-9 * std::max(1.0, v));
}

TEST(Normalize, StandardizedMomentsArePopulationMoments) {
  const std::vector<double> raw{0, 1, 3, 7, 15};
  const NormTransform t = fit_norm(raw);
  const auto z = t.forward(raw);
  double m = 0, v = 0;
  for (double x : z) m += x;
  m /= 5;
  for (double x : z) v += (x - m) * (x - m);
  EXPECT_NEAR(m, 0.0, 1e-12);
  EXPECT_NEAR(v / 5, 1.0, 1e-12);
}

TEST(Normalize, ZeroMapsToMinusMeanOverStd) {
  const NormTransform t = fit_norm(std::vector<double>{0, 2, 5});
  EXPECT_DOUBLE_EQ(t.forward(0.0), -t.mean / t.std);
}

TEST(Normalize, RejectsConstantAndNegative) {
  EXPECT_THROW(fit_norm(std::vector<double>{4, 4, 4}), std::invalid_argument);
  EXPECT_THROW(fit_norm(std::vector<double>{1, -1, 2}), std::invalid_argument);
}

TEST(Normalize, FitSpanOnlyUsesPrefix) {
  TimeSeries s{"x", {}, kDefaultInterval, {1, 2, 3, 100}};
  const auto [z, t] = fit_transform(s, 3);
  EXPECT_EQ(t, fit_norm(std::vector<double>{1, 2, 3}));
  EXPECT_EQ(z.size(), 4u);
}

TEST(KruskalWallis, AverageRanksForTies) {
  EXPECT_EQ(average_ranks(std::vector<double>{10, 20, 20, 5}), (std::vector<double>{2, 3.5, 3.5, 1}));
}

TEST(KruskalWallis, TextbookFixture) {
  const std::vector<double> w{1, 2, 3, 4, 5, 6, 7, 8, 9};
  EXPECT_NEAR(kw_statistic(w, 3), 7.2, 1e-12);
  EXPECT_NEAR(kw_oracle(w, 3), 7.2, 1e-12);
}

TEST(KruskalWallis, MatchesReferenceImplementation) {
  // Reference values from a standard statistics package, with its tie
  // correction factor multiplied back out.
  struct Case {
    std::vector<double> w;
    std::size_t k;
    double h;
  };
  const std::vector<Case> cases{
      {{5.914, 1.88, 7.251, 7.822, -0.853, 1.093, 5.384, 4.051, 4.95, 2.441, 7.638, 7.333,
        5.198, 8.382, 6.403, 2.422, 6.106, 2.123, 7.635, 4.85, 4.445, 2.957, 8.668, 4.536},
       4, 0.7883333333333411},
      {{0.717, 1.479, 10.323, 8.654, 9.127, 9.308, 26.416, 0.936, -0.122, -3.138, 11.16, 16.29, 3.861, -3.402, -3.245,
        11.506, 12.433, 10.432, -1.655, 7.322, 6.167, 7.187, 13.714, 7.236, 11.789, 5.676, 7.891, 11.313, -9.572, 1.803},
       3, 0.35677419354837525},
      {{4.294, 4.042, 4.587, 7.242, 3.701, 6.452, 2.476, 4.498, 5.244, 5.879, 6.067, 6.19,  4.477, 4.306, 6.287,
        4.713, 3.086, 3.3,   3.621, 5.746, 5.214, 6.036, 4.359, 5.238, 5.938, 4.536, 5.685, 4.007, 4.455, 4.427,
        3.206, 5.73,  4.296, 5.019, 5.721, 5.67,  5.998, 4.852, 4.365, 4.88,  2.469, 2.829, 3.016, 3.504, 5.6,
        3.642, 4.433, 6.949, 4.466, 6.106, 3.6,   4.692, 3.575, 4.491, 6.26,  2.409, 5.652, 5.357, 4.109, 2.831},
       4, 0.69868852459015329},
  };
  for (const Case& c : cases) EXPECT_NEAR(kw_statistic(c.w, c.k), c.h, 1e-9);
}

TEST(KruskalWallis, MatchesLiteralFormulaOnRandomWindows) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> d(20.0, 8.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng() % 5;
    const std::size_t len = k * (3 + rng() % 20) + rng() % k;
    std::vector<double> w(len);
    for (double& v : w) v = d(rng);
    EXPECT_NEAR(kw_statistic(w, k), kw_oracle(w, k), 1e-9);
  }
}

TEST(KruskalWallis, ConstantWindowIsExactlyZero) {
  for (double v : {0.0, 3.3, 1234.0}) {
    for (std::size_t k : {2u, 3u, 4u, 7u}) EXPECT_EQ(kw_statistic(std::vector<double>(28, v), k), 0.0);
  }
}

TEST(KruskalWallis, TailRemainderTrimmed) {
  std::vector<double> w{1, 2, 3, 4, 5, 6, 7, 8, 9, 1000, -1000};
  EXPECT_DOUBLE_EQ(kw_statistic(w, 3), kw_statistic(std::vector<double>(w.begin(), w.begin() + 9), 3));
}

TEST(KruskalWallis, RejectsTooFewGroups) {
  EXPECT_THROW(kw_statistic(std::vector<double>{1, 2, 3}, 1), std::invalid_argument);
  EXPECT_THROW(kw_statistic(std::vector<double>{1, 2}, 3), std::invalid_argument);
}

TEST(KruskalWallis, PermutationWithinGroupsInvariant) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> d(0, 30);
  std::vector<double> w(40);
  for (double& v : w) v = d(rng);
  const double h = kw_statistic(w, 4);
  for (int trial = 0; trial < 20; ++trial) {
    for (std::size_t g = 0; g < 4; ++g) std::shuffle(w.begin() + g * 10, w.begin() + (g + 1) * 10, rng);
    EXPECT_DOUBLE_EQ(kw_statistic(w, 4), h);
  }
}

TEST(KruskalWallis, SubHalfNoiseOnIntegersLeavesHUnchanged) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> d(0, 20);
  std::uniform_real_distribution<double> noise(-0.49, 0.49);
  std::vector<double> w(32);
  for (double& v : w) v = d(rng);
  std::vector<double> noisy = w;
  for (double& v : noisy) v += noise(rng);
  EXPECT_EQ(kw_statistic(w, 4), kw_statistic(noisy, 4));
}

TEST(KruskalWallis, OrderAcrossGroupsMatters) {
  std::vector<double> w{1, 2, 3, 4, 5, 6, 7, 8};
  const double sorted = kw_statistic(w, 2);
  std::vector<double> mixed{1, 8, 2, 7, 3, 6, 4, 5};
  EXPECT_GT(sorted, kw_statistic(mixed, 2));
}
