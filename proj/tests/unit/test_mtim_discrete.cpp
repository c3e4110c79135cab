#include <gtest/gtest.h>

#include <boost/math/special_functions/zeta.hpp>

#include <cmath>
#include <numbers>

#include "mimpact/mtim_discrete.hpp"

using namespace mimpact;

namespace {

DiscreteParams base(KernelSpec d, KernelSpec g, double lam, std::size_t T, std::size_t H) {
  DiscreteParams p;
  p.kernel_d = d;
  p.kernel_g = g;
  p.lam = lam;
  p.alpha = 0.7;
  p.V = 1.0;
  p.T = T;
  p.horizon = H;
  return p;
}

/// Direct double sums from the model definition, no recursion tricks.
std::pair<std::vector<double>, std::vector<double>> brute_force(const DiscreteParams& p) {
  const std::size_t H = p.horizon;
  std::vector<double> v(H + 1, 0.0), price(H + 1, 0.0);
  auto theta = [&](std::size_t t) { return t >= 1 && t <= p.T ? 1.0 : 0.0; };
  for (std::size_t t = 1; t <= H; ++t) {
    double s = p.alpha * p.V * theta(t);
    for (std::size_t i = 1; i <= t; ++i) s += p.lam * p.kernel_d.coefficient(i, p.dt) * v[t - i];
    v[t] = s;
    double x = 0.0;
    for (std::size_t i = 1; i <= t; ++i)
      x += p.kernel_g.coefficient(i, p.dt) * (v[t - i] + (1.0 - p.alpha) * p.V * theta(t - i));
    price[t] = x;
  }
  return {v, price};
}

}  // namespace

TEST(Kernel, Coefficients) {
  const auto e = KernelSpec::exponential(0.5, KernelRole::VolumeD);
  EXPECT_DOUBLE_EQ(e.coefficient(3), std::exp(-1.5));
  EXPECT_DOUBLE_EQ(e.coefficient(3, 0.1), std::exp(-0.15) * 0.1);
  const auto pl = KernelSpec::power_law(1.5, KernelRole::VolumeD);
  EXPECT_DOUBLE_EQ(pl.coefficient(4), 0.125);
  EXPECT_EQ(pl.coefficients(3).size(), 4u);
  EXPECT_EQ(pl.describe(), "pow(1.5)");
  EXPECT_THROW(KernelSpec::power_law(1.0, KernelRole::VolumeD).validate(), InvalidArgument);
  EXPECT_NO_THROW(KernelSpec::power_law(0.0, KernelRole::PriceG).validate());
  EXPECT_THROW(KernelSpec::exponential(0.0, KernelRole::PriceG).validate(), InvalidArgument);
}

TEST(Zeta, AgreesWithBoost) {
  for (double s : {1.001, 1.01, 1.1, 1.5, 2.0, 3.0, 7.5, 30.0})
    EXPECT_NEAR(riemann_zeta(s), boost::math::zeta(s), 2e-14 * boost::math::zeta(s)) << s;
  EXPECT_NEAR(riemann_zeta(2.0), std::numbers::pi * std::numbers::pi / 6, 1e-15);
  EXPECT_THROW(riemann_zeta(1.0), InvalidArgument);
}

TEST(Criticality, ExponentialAndPowerLaw) {
  const auto e = KernelSpec::exponential(0.3, KernelRole::VolumeD);
  double brute = 0.0;
  for (int i = 1; i < 2000; ++i) brute += std::exp(-0.3 * i);
  EXPECT_NEAR(kernel_sum(e), brute, 1e-12);
  EXPECT_DOUBLE_EQ(critical_lambda(e), std::expm1(0.3));
  EXPECT_NEAR(critical_lambda(e) * kernel_sum(e), 1.0, 1e-14);

  const auto pl = KernelSpec::power_law(2.0, KernelRole::VolumeD);
  EXPECT_NEAR(critical_lambda(pl), 6.0 / (std::numbers::pi * std::numbers::pi), 1e-15);
  const auto pl2 = KernelSpec::power_law(1.5, KernelRole::VolumeD);
  EXPECT_NEAR(critical_lambda(pl2, 0.1) * kernel_sum(pl2, 0.1), 1.0, 1e-14);
  EXPECT_THROW(critical_lambda(KernelSpec::exponential(1.0, KernelRole::PriceG)), InvalidArgument);

  auto p = base(e, KernelSpec::exponential(1.0, KernelRole::PriceG), critical_lambda(e), 5, 10);
  EXPECT_NEAR(criticality_margin(p), 0.0, 1e-14);
  EXPECT_NO_THROW(simulate(p));
  p.lam *= 1.01;
  EXPECT_LT(criticality_margin(p), 0.0);
  EXPECT_THROW(simulate(p), NonStationary);
}

TEST(Simulate, MatchesBruteForceSums) {
  const KernelSpec ds[] = {KernelSpec::exponential(0.8, KernelRole::VolumeD),
                           KernelSpec::power_law(1.7, KernelRole::VolumeD)};
  const KernelSpec gs[] = {KernelSpec::exponential(0.2, KernelRole::PriceG),
                           KernelSpec::power_law(0.5, KernelRole::PriceG), KernelSpec::power_law(0.0, KernelRole::PriceG)};
  for (const auto& d : ds)
    for (const auto& g : gs)
      for (double dt : {1.0, 0.25}) {
        auto p = base(d, g, 0.9 * critical_lambda(d, dt), 12, 40);
        p.dt = dt;
        const auto tr = simulate(p);
        const auto [v, price] = brute_force(p);
        for (std::size_t t = 0; t <= p.horizon; ++t) {
          EXPECT_NEAR(tr.volume[t], v[t], 1e-12 * (1 + std::abs(v[t])));
          EXPECT_NEAR(tr.price[t], price[t], 1e-12 * (1 + std::abs(price[t])));
        }
      }
}

TEST(Simulate, HandExample) {
  // d_i = g_i = e^{-i}, lam = 1, alpha = 1, T = 1.
  auto p = base(KernelSpec::exponential(1.0, KernelRole::VolumeD), KernelSpec::exponential(1.0, KernelRole::PriceG),
                1.0, 1, 3);
  p.alpha = 1.0;
  const auto tr = simulate(p);
  const double e = std::exp(-1.0);
  EXPECT_DOUBLE_EQ(tr.volume[1], 1.0);
  EXPECT_NEAR(tr.volume[2], e, 1e-15);
  EXPECT_NEAR(tr.volume[3], e * e + e * e, 1e-15);
  EXPECT_NEAR(tr.price[2], e, 1e-15);
  EXPECT_NEAR(tr.price[3], e * e + e * e, 1e-15);
  EXPECT_EQ(tr.tags.front().second, "mtim-discrete");
}

TEST(Simulate, FlatPriceKernelIsPermanent) {
  auto p = base(KernelSpec::exponential(1.0, KernelRole::VolumeD), KernelSpec::power_law(0.0, KernelRole::PriceG),
                0.0, 5, 20);
  p.alpha = 1.0;
  const auto tr = simulate(p);
  for (std::size_t t = 6; t <= 20; ++t) EXPECT_DOUBLE_EQ(tr.price[t], 5.0);
}

TEST(MonteCarlo, MeanMatchesDeterministicAndWorkersAgree) {
  auto p = base(KernelSpec::exponential(0.5, KernelRole::VolumeD), KernelSpec::power_law(0.5, KernelRole::PriceG),
                0.4, 20, 60);
  const auto det = simulate(p);
  p.noise = {0.5, 0.3};
  p.seed = 17;
  const auto a = monte_carlo(p, 1000, 1);
  const auto b = monte_carlo(p, 1000, 3);
  EXPECT_EQ(a.mean_price, b.mean_price);
  EXPECT_EQ(a.se_volume, b.se_volume);
  int outside = 0;
  for (std::size_t t = 1; t <= 60; ++t) {
    outside += std::abs(a.mean_price[t] - det.price[t]) > 4 * a.se_price[t];
    outside += std::abs(a.mean_volume[t] - det.volume[t]) > 4 * a.se_volume[t];
    EXPECT_GT(a.se_price[t], 0.0);
  }
  EXPECT_LE(outside, 1);
  EXPECT_THROW(monte_carlo(p, 1), InvalidArgument);
}

TEST(MonteCarlo, SeedReproducible) {
  auto p = base(KernelSpec::exponential(0.5, KernelRole::VolumeD), KernelSpec::exponential(0.5, KernelRole::PriceG),
                0.3, 5, 10);
  p.noise = {1.0, 1.0};
  p.seed = 3;
  EXPECT_EQ(simulate(p).price, simulate(p).price);
  auto q = p;
  q.seed = 4;
  EXPECT_NE(simulate(p).price, simulate(q).price);
}

TEST(Continuum, RightEndpointMatchesBruteForce) {
  const ContinuousParams pc{0.6, 1.0, 1.0, 1.5, 0.7, 2.0};
  const double h = 0.1;
  const auto path = discretize_continuous(pc, h, 4.0, Endpoint::Right);
  const std::size_t nT = 20, N = 40;
  ASSERT_EQ(path.volume.size(), N + 1);
  std::vector<double> v(N + 1), price(N + 1);
  auto src = [&](std::size_t n) { return n < nT ? pc.alpha * pc.V : 0.0; };
  auto direct = [&](std::size_t n) { return n < nT ? (1 - pc.alpha) * pc.V : 0.0; };
  for (std::size_t n = 0; n <= N; ++n) {
    // v_n = src_n + lam h sum_{j=1..n} e^{-beta (n-j) h} v_j   (implicit in v_n)
    double hist = 0.0;
    for (std::size_t j = 1; j < n; ++j) hist += std::exp(-pc.beta * (n - j) * h) * v[j];
    v[n] = n == 0 ? src(0) : (src(n) + pc.lam * h * hist) / (1 - pc.lam * h);
    double x = 0.0;
    for (std::size_t j = 1; j <= n; ++j) x += std::exp(-pc.rho * (n - j) * h) * (v[j] + direct(j));
    price[n] = h * x;
  }
  for (std::size_t n = 0; n <= N; ++n) {
    EXPECT_NEAR(path.volume[n], v[n], 1e-12);
    EXPECT_NEAR(path.price[n], price[n], 1e-12);
  }
}

TEST(Continuum, FirstOrderConvergenceBothEndpoints) {
  const ContinuousParams pc{0.6, 1.0, 1.0, 1.5, 0.7, 2.0};
  for (auto ep : {Endpoint::Left, Endpoint::Right}) {
    const auto pts = continuum_convergence(pc, {0.04, 0.02, 0.01, 0.005}, ep);
    for (std::size_t i = 1; i < pts.size(); ++i) {
      EXPECT_LT(pts[i].max_error, pts[i - 1].max_error);
      EXPECT_NEAR(pts[i - 1].max_error / pts[i].max_error, 2.0, 0.25);
    }
  }
  EXPECT_THROW(discretize_continuous(pc, 1.5, 4.0, Endpoint::Right), Instability);
}

TEST(Continuum, EndpointsAgreeAtFineStep) {
  for (const ContinuousParams& pc : {ContinuousParams{1.0, 1.0, 0.4, 0.8, 0.5, 10.0},
                                     ContinuousParams{0.5, 1.0, 0.3, 1.0, 0.5, 5.0}}) {
    const auto l = discretize_continuous(pc, 1e-3, 3 * pc.T, Endpoint::Left);
    const auto r = discretize_continuous(pc, 1e-3, 3 * pc.T, Endpoint::Right);
    ASSERT_EQ(l.price.size(), r.price.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < l.price.size(); ++i)
      worst = std::max({worst, std::abs(l.price[i] - r.price[i]), std::abs(l.volume[i] - r.volume[i])});
    EXPECT_LT(worst, 1e-2);
  }
}

TEST(Criticality, SubcriticalVolumeDecays) {
  const double beta = 0.5;
  const auto d = KernelSpec::exponential(beta, KernelRole::VolumeD);
  auto p = base(d, KernelSpec::power_law(0.5, KernelRole::PriceG), 0.5 * critical_lambda(d), 20, 0);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 1; i < 2000; ++i) {
    num += i * d.coefficient(i, 1.0);
    den += d.coefficient(i, 1.0);
  }
  const double margin = criticality_margin(p);
  ASSERT_GT(margin, 0.0);
  p.horizon = p.T + static_cast<std::size_t>(std::ceil(50.0 / margin * num / den));
  const auto tr = simulate(p);
  EXPECT_LT(std::abs(tr.volume.back()), 1e-6);
}

TEST(Criticality, ExponentialPlateau) {
  const auto d = KernelSpec::exponential(0.5, KernelRole::VolumeD);
  auto p = base(d, KernelSpec::power_law(0.5, KernelRole::PriceG), critical_lambda(d), 20, 400);
  const auto tr = simulate(p);
  const std::size_t from = tr.volume.size() - tr.volume.size() / 5;
  const double last = tr.volume.back();
  ASSERT_GT(last, 0.0);
  double drift = 0.0;
  for (std::size_t t = from; t < tr.volume.size(); ++t) drift = std::max(drift, std::abs(tr.volume[t] - last) / last);
  EXPECT_LT(drift, 1e-3);
}
