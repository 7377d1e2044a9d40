#include "dan/gmm.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <vector>

using namespace dan;

namespace {

std::vector<double> two_component_draw(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution pick(0.5);
  std::normal_distribution<double> a(-2.0, 1.0), b(2.0, 1.0);
  std::vector<double> x(n);
  for (double& v : x) v = pick(rng) ? b(rng) : a(rng);
  return x;
}

}  // namespace

TEST(Gmm, StandardNormalPeak) {
  const GmmModel m{{1.0}, {0.0}, {1.0}};
  EXPECT_NEAR(indicator_value(m, 0.0), 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(indicator_value(m, 0.0), 0.398942, 1e-6);
}

TEST(Gmm, TailsVanish) {
  const GmmModel m{{0.3, 0.7}, {-1.0, 2.0}, {0.5, 2.0}};
  EXPECT_LT(indicator_value(m, 60.0), 1e-100);
  EXPECT_LT(indicator_value(m, -60.0), 1e-100);
}

TEST(Gmm, SymmetricMixtureIsSymmetric) {
  const GmmModel m{{0.5, 0.5}, {-1.7, 1.7}, {0.8, 0.8}};
  for (double x : {0.3, 1.7, 4.0}) EXPECT_DOUBLE_EQ(indicator_value(m, x), indicator_value(m, -x));
}

TEST(Gmm, ComponentOrderIrrelevant) {
  const GmmModel a{{0.2, 0.5, 0.3}, {-1.0, 0.5, 3.0}, {0.4, 1.0, 2.0}};
  const GmmModel b{{0.3, 0.2, 0.5}, {3.0, -1.0, 0.5}, {2.0, 0.4, 1.0}};
  for (double x = -5.0; x <= 5.0; x += 0.25) EXPECT_NEAR(indicator_value(a, x), indicator_value(b, x), 1e-15);
}

TEST(Gmm, DensityIntegratesToOne) {
  const GmmModel m{{0.2, 0.5, 0.3}, {-1.0, 0.5, 3.0}, {0.4, 1.0, 2.0}};
  // Trapezoid rule over [-10 sigma, +10 sigma] around the outer components.
  const double lo = -1.0 - 10.0 * std::sqrt(0.4), hi = 3.0 + 10.0 * std::sqrt(2.0);
  const int n = 20000;
  const double dx = (hi - lo) / n;
  double s = 0.5 * (indicator_value(m, lo) + indicator_value(m, hi));
  for (int i = 1; i < n; ++i) s += indicator_value(m, lo + i * dx);
  EXPECT_NEAR(s * dx, 1.0, 1e-3);
}

TEST(Gmm, IndicatorSeriesIsPointwise) {
  const GmmModel m{{0.4, 0.6}, {0.0, 1.0}, {1.0, 0.5}};
  EXPECT_TRUE(indicator_series(m, std::vector<double>{}).empty());
  const std::vector<double> x{0.0, 1.0, 0.0, 1.0};
  const auto y = indicator_series(m, x);
  ASSERT_EQ(y.size(), 4u);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], indicator_value(m, x[i]));
  const auto c = indicator_series(m, std::vector<double>(5, 0.3));
  EXPECT_TRUE(std::all_of(c.begin(), c.end(), [&](double v) { return v == c[0]; }));
}

TEST(GmmFit, SingleComponentIsClosedForm) {
  std::mt19937_64 rng(4);
  std::gamma_distribution<double> g(2.0, 1.5);
  std::vector<double> x(500);
  for (double& v : x) v = g(rng);
  const auto fit = fit_gmm(x, {.components = 1});
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= x.size();
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= x.size();
  EXPECT_NEAR(fit.model.weights[0], 1.0, 1e-12);
  EXPECT_NEAR(fit.model.means[0], mean, 1e-9);
  EXPECT_NEAR(fit.model.variances[0], var, 1e-9);
}

TEST(GmmFit, RecoversTwoComponents) {
  const auto x = two_component_draw(10000, 99);
  const auto fit = fit_gmm(x, {.components = 2, .seed = 5});
  std::vector<double> means = fit.model.means;
  std::sort(means.begin(), means.end());
  EXPECT_NEAR(means[0], -2.0, 0.1);
  EXPECT_NEAR(means[1], 2.0, 0.1);
  EXPECT_TRUE(fit.converged);
}

TEST(GmmFit, LogLikelihoodNonDecreasing) {
  const auto x = two_component_draw(3000, 7);
  for (std::size_t m : {1u, 2u, 3u, 5u}) {
    const auto fit = fit_gmm(x, {.components = m, .seed = 11});
    for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i) {
      EXPECT_GE(fit.log_likelihood[i] - fit.log_likelihood[i - 1], -1e-9) << "M=" << m << " iter " << i;
    }
  }
}

TEST(GmmFit, WeightsSumToOneAndVariancesFloored) {
  std::vector<double> x(200, 0.0);
  for (std::size_t i = 0; i < 100; ++i) x[i] = 1.0;  // two point masses
  const auto fit = fit_gmm(x, {.components = 3, .seed = 2});
  double s = 0.0;
  for (double w : fit.model.weights) s += w;
  EXPECT_NEAR(s, 1.0, 1e-12);
  for (double v : fit.model.variances) EXPECT_GE(v, 1e-6);
}

TEST(GmmFit, DeterministicForSeed) {
  const auto x = two_component_draw(2000, 3);
  EXPECT_EQ(fit_gmm(x, {.seed = 8}).model, fit_gmm(x, {.seed = 8}).model);
}

TEST(GmmFit, DefaultThreeComponents) {
  const auto x = two_component_draw(1000, 1);
  EXPECT_EQ(fit_gmm(x).model.components(), 3u);
}

TEST(GmmFit, Errors) {
  EXPECT_THROW(fit_gmm(std::vector<double>(100, 2.0), {.components = 2}), std::invalid_argument);
  EXPECT_THROW(fit_gmm(std::vector<double>(29, 1.0), {.components = 3}), std::invalid_argument);
  EXPECT_THROW(fit_gmm(std::vector<double>(100, 1.0), {.components = 0}), std::invalid_argument);
}

TEST(GmmFile, RoundTrip) {
  const GmmModel m{{0.25, 0.75}, {-0.123456789012345, 1.5}, {0.3, 2.0 / 3.0}};
  const auto path = (std::filesystem::temp_directory_path() / "dan_gmm.txt").string();
  write_gmm(path, m);
  EXPECT_EQ(read_gmm(path), m);
}
