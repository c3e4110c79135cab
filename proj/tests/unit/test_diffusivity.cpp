#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "mimpact/diffusivity.hpp"
#include "oracles/arfima.hpp"

using namespace mimpact;

namespace {

std::vector<double> white(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  return x;
}

StationaryFlowParams iid_params(std::size_t n, std::uint64_t seed) {
  StationaryFlowParams p;
  p.alpha = 0.0;
  p.noise_std = 1.0;
  p.metaorder_flow = {10, 1.5, 1, 1, 0};
  p.horizon = n;
  p.seed = seed;
  return p;
}

}  // namespace

TEST(Helpers, CausalConvolutionMatchesDirectSum) {
  const auto x = white(300, 1);
  std::vector<double> g(300);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = 1.0 / (1.0 + i);
  const auto y = detail::causal_convolution(x, g);
  for (std::size_t t = 0; t < x.size(); ++t) {
    double s = 0.0;
    for (std::size_t i = 1; i <= t; ++i) s += g[i] * x[t - i];
    EXPECT_NEAR(y[t], s, 1e-11);
  }
}

TEST(Acf, MatchesDirectEstimator) {
  const auto x = white(500, 2);
  const auto r = acf(x, 50);
  double m = 0.0;
  for (double v : x) m += v;
  m /= 500;
  double c0 = 0.0;
  for (double v : x) c0 += (v - m) * (v - m);
  for (std::size_t k = 0; k <= 50; ++k) {
    double c = 0.0;
    for (std::size_t t = 0; t + k < 500; ++t) c += (x[t] - m) * (x[t + k] - m);
    EXPECT_NEAR(r[k], c / c0, 1e-12);
  }
  EXPECT_THROW(acf(std::vector<double>(500, 3.0), 50), InvalidArgument);
  EXPECT_THROW(acf(x, 125), InvalidArgument);
}

TEST(LongMemory, ExactPowerLawAcf) {
  std::vector<double> r(1001);
  for (std::size_t k = 0; k <= 1000; ++k) r[k] = std::pow(std::max<double>(k, 1), -0.4);
  const auto f = long_memory_exponent(r, 10, 1000);
  EXPECT_NEAR(f.gamma_hat, 0.4, 1e-12);
  EXPECT_NEAR(f.gamma_se, 0.0, 1e-10);
  EXPECT_THROW(long_memory_exponent(r, 10, 50), InvalidArgument);
  r[500] = -0.01;
  EXPECT_THROW(long_memory_exponent(r, 10, 1000), InvalidArgument);
}

TEST(LongMemory, ArfimaRecoversGamma) {
  // d = 0.3: gamma = 1 - 2d = 0.4 and the low-frequency spectrum falls as omega^{-2d}.
  const auto x = oracle::arfima_noise(std::size_t{1} << 18, 0.3, 11);
  const auto r = acf(x, 1000);
  const auto f = long_memory_exponent(r, 10, 1000);
  EXPECT_NEAR(f.gamma_hat, 0.4, 0.1);
  const auto sc = spectral_check(x, std::vector<double>{});
  EXPECT_NEAR(sc.spectral_slope, -0.6, 0.1);
  EXPECT_DOUBLE_EQ(sc.amplification, 1.0);
}

TEST(Spectral, WhiteNoiseIsFlatAndArAmplifies) {
  const std::size_t n = std::size_t{1} << 18;
  const auto e = white(n, 3);
  EXPECT_NEAR(spectral_check(e, std::vector<double>{}).spectral_slope, 0.0, 0.05);

  std::vector<double> v(n);
  for (std::size_t t = 0; t < n; ++t) v[t] = e[t] + (t ? 0.5 * v[t - 1] : 0.0);
  EXPECT_DOUBLE_EQ(ar_amplification(std::vector<double>{0.5}), 4.0);
  EXPECT_NEAR(measured_amplification(v, e), 4.0, 0.2);
  EXPECT_THROW(ar_amplification(std::vector<double>{0.6, 0.4}), Singularity);
  EXPECT_THROW(spectral_check(std::vector<double>(1000, 1.0), std::vector<double>{}), InsufficientData);
}

TEST(Flow, ParamsValidationAndDeterminism) {
  auto p = iid_params(2000, 5);
  p.ar_coeffs = {0.7, 0.3};
  EXPECT_THROW(p.validate(), NonStationary);
  p.ar_coeffs = {1.5, -0.6};  // sum 0.9 but complex roots of modulus sqrt(0.6): stationary
  EXPECT_NO_THROW(p.validate());
  p.ar_coeffs = {2.5, -1.6};  // sum 0.9 but roots of modulus sqrt(1.6)
  EXPECT_THROW(p.validate(), NonStationary);
  p.ar_coeffs = {0.5};
  p.alpha = 0.8;
  const auto a = simulate_stationary_flow_components(p);
  const auto b = simulate_stationary_flow_components(p);
  EXPECT_EQ(a.volume, b.volume);
  ASSERT_EQ(a.volume.size(), 2000u);
  for (std::size_t t = 1; t < 2000; ++t) EXPECT_NEAR(a.volume[t], a.innovation[t] + 0.5 * a.volume[t - 1], 1e-12);
}

TEST(Diffusivity, RandomWalkAndSubdiffusion) {
  const auto flow = simulate_stationary_flow(iid_params(std::size_t{1} << 18, 7));
  const auto flat = price_variance_scaling(KernelSpec::power_law(0.0, KernelRole::PriceG), flow);
  EXPECT_NEAR(flat.exponent, 1.0, 0.05);
  EXPECT_EQ(flat.taus.front(), 1u);
  EXPECT_EQ(flat.taus.back(), 1000u);
  // iid flow with G ~ l^{-beta}: Var grows like tau^{1 - 2 beta}.
  const auto sub = price_variance_scaling(KernelSpec::power_law(0.25, KernelRole::PriceG), flow);
  EXPECT_NEAR(sub.exponent, 0.5, 0.1);

  const auto walk = price_variance_scaling(LinearModel::tim({1.0, 0.0}, {0.0}), flow);
  EXPECT_NEAR(walk.exponent, flat.exponent, 0.02);
  EXPECT_THROW(price_variance_scaling(KernelSpec::power_law(0.0, KernelRole::PriceG), std::vector<double>(1000, 1.0)),
               InsufficientData);
}

TEST(Report, TextAndCsv) {
  LongMemoryReport r;
  r.gamma_hat = 0.5;
  r.flagged = true;
  std::ostringstream t, c;
  write_report_text(t, r);
  EXPECT_NE(t.str().find("gamma_hat=0.5\n"), std::string::npos);
  EXPECT_NE(t.str().find("measured_amplification=NA\n"), std::string::npos);
  write_report_csv_row(c, r);
  EXPECT_EQ(c.str(), "0.5,0,0,0,0,NA,1\n");
}

TEST(LongMemory, ArFilterKeepsTailExponent) {
  const auto eta = oracle::arfima_noise(std::size_t{1} << 18, 0.3, 11);
  std::vector<double> v(eta.size());
  for (std::size_t t = 0; t < v.size(); ++t) v[t] = eta[t] + (t ? 0.5 * v[t - 1] : 0.0);
  const auto fe = long_memory_exponent(acf(eta, 1000), 10, 1000);
  const auto fv = long_memory_exponent(acf(v, 1000), 10, 1000);
  EXPECT_LE(std::abs(fe.gamma_hat - fv.gamma_hat), 2.0 * std::hypot(fe.gamma_se, fv.gamma_se));
}

TEST(Spectral, MeasuredAmplificationForAr1) {
  const auto e = white(std::size_t{1} << 18, 13);
  for (double d1 : {0.3, 0.5, 0.7}) {
    std::vector<double> v(e.size());
    for (std::size_t t = 0; t < v.size(); ++t) v[t] = e[t] + (t ? d1 * v[t - 1] : 0.0);
    const double expected = ar_amplification(std::vector<double>{d1});
    EXPECT_NEAR(expected, 1.0 / ((1 - d1) * (1 - d1)), 1e-12);
    EXPECT_NEAR(measured_amplification(v, e) / expected, 1.0, 0.25) << d1;
  }
}

TEST(Acf, CosinePeaksAtItsPeriod) {
  const std::size_t period = 50;
  std::vector<double> x(20000);
  for (std::size_t t = 0; t < x.size(); ++t) x[t] = std::cos(2 * std::numbers::pi * t / period);
  const auto r = acf(x, 2 * period);
  std::size_t best = period / 2;
  for (std::size_t k = period / 2; k <= 3 * period / 2; ++k)
    if (r[k] > r[best]) best = k;
  EXPECT_EQ(best, period);
}
