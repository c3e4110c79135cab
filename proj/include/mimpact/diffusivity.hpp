#pragma once

// Stationary order flow driven by many concurrent metaorders, long-memory
// estimators (ACF and averaged periodogram) and propagator price diffusivity.

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "mimpact/detail/random.hpp"
#include "mimpact/detail/text.hpp"
#include "mimpact/error.hpp"
#include "mimpact/linmodels.hpp"
#include "mimpact/marketdata.hpp"
#include "mimpact/mtim_discrete.hpp"

namespace mimpact {

struct StationaryFlowParams {
  std::vector<double> ar_coeffs;  // d_1..d_p of the background flow
  double alpha = 1.0;
  LmfFlowParams metaorder_flow;  // its horizon and seed are overridden
  double noise_std = 0.0;
  std::size_t horizon = 1 << 14;
  std::uint64_t seed = 0;
  std::size_t burn_in = 1000;

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in [0, 1]");
    if (!(noise_std >= 0.0)) throw InvalidArgument("noise_std must be >= 0");
    if (horizon < 1) throw InvalidArgument("horizon must be positive");
    auto flow = metaorder_flow;
    flow.horizon = 1;
    flow.validate();
    double sum = 0.0;
    for (double d : ar_coeffs) sum += d;
    if (!ar_coeffs.empty()) {
      if (sum >= 1.0) throw NonStationary("ar_coeffs sum to >= 1: the background flow is not stationary");
      const auto cs = companion(LinearModel::tim(std::vector<double>(ar_coeffs.size() + 1, 0.0), ar_coeffs));
      if (!stationarity_report(cs).is_stationary)
        throw NonStationary("ar_coeffs have a root on or inside the unit circle");
    }
  }
};

struct StationaryFlow {
  std::vector<double> volume;      // v_t
  std::vector<double> innovation;  // eta_t = eps_t + alpha V_t
};

/// eta_t = eps_t + alpha V_t with V_t the signed child-order flow of an LMF
/// generator, filtered through v_t = sum d_i v_{t-i} + eta_t.
inline StationaryFlow simulate_stationary_flow_components(const StationaryFlowParams& p) {
  p.validate();
  const std::size_t total = p.horizon + p.burn_in;
  auto flow_params = p.metaorder_flow;
  flow_params.horizon = total;
  flow_params.seed = detail::stream_seed(p.seed, 0);
  const auto flow = synth_lmf_orderflow(flow_params);
  auto rng = detail::make_engine(detail::stream_seed(p.seed, 1));
  std::normal_distribution<double> gauss(0.0, 1.0);

  const std::size_t q = p.ar_coeffs.size();
  StationaryFlow out;
  out.volume.reserve(p.horizon);
  out.innovation.reserve(p.horizon);
  std::vector<double> v(total, 0.0);
  for (std::size_t t = 0; t < total; ++t) {
    double eta = p.alpha * flow.ticks[t].signed_volume();
    if (p.noise_std > 0.0) eta += p.noise_std * gauss(rng);
    double x = eta;
    for (std::size_t i = 1; i <= std::min(q, t); ++i) x += p.ar_coeffs[i - 1] * v[t - i];
    v[t] = x;
    if (t >= p.burn_in) {
      out.volume.push_back(x);
      out.innovation.push_back(eta);
    }
  }
  return out;
}

inline std::vector<double> simulate_stationary_flow(const StationaryFlowParams& p) {
  return simulate_stationary_flow_components(p).volume;
}

namespace detail {

inline std::size_t next_pow2(std::size_t n) {
  std::size_t m = 1;
  while (m < n) m <<= 1;
  return m;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};

inline LineFit ols_line(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  if (x.size() < 3) throw InsufficientData("line fit needs at least 3 points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    rss += r * r;
  }
  f.slope_se = std::sqrt(rss / (n - 2) / sxx);
  return f;
}

/// Linear convolution out_t = sum_{i>=1} g_i x_{t-i} for t = 0..n-1
/// (g[0] ignored) via zero-padded FFT.
inline std::vector<double> causal_convolution(std::span<const double> x, std::span<const double> g) {
  const std::size_t n = x.size();
  const std::size_t m = next_pow2(2 * n);
  std::vector<double> xa(m, 0.0), ga(m, 0.0);
  std::copy(x.begin(), x.end(), xa.begin());
  for (std::size_t i = 1; i < std::min(n, g.size()); ++i) ga[i] = g[i];
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> fx, fg;
  fft.fwd(fx, xa);
  fft.fwd(fg, ga);
  for (std::size_t i = 0; i < fx.size(); ++i) fx[i] *= fg[i];
  std::vector<double> y;
  fft.inv(y, fx);
  y.resize(n);
  return y;
}

}  // namespace detail

/// Biased (1/n) sample autocorrelation at lags 0..max_lag.
inline std::vector<double> acf(std::span<const double> series, std::size_t max_lag) {
  const std::size_t n = series.size();
  if (n <= 4 * max_lag) throw InvalidArgument("acf: series length must exceed 4 * max_lag");
  double mean = 0.0;
  for (double x : series) mean += x;
  mean /= static_cast<double>(n);
  const std::size_t m = detail::next_pow2(2 * n);
  std::vector<double> xa(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) xa[i] = series[i] - mean;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> fx;
  fft.fwd(fx, xa);
  for (auto& c : fx) c = std::norm(c);
  std::vector<double> cov;
  fft.inv(cov, fx);
  const double c0 = cov[0];
  double scale = 0.0;
  for (double x : series) scale = std::max(scale, std::abs(x - mean));
  if (!(c0 > 1e-24 * static_cast<double>(n) * scale * scale) || scale == 0.0)
    throw InvalidArgument("acf: constant series, correlation undefined");
  std::vector<double> r(max_lag + 1);
  for (std::size_t k = 0; k <= max_lag; ++k) r[k] = cov[k] / c0;
  r[0] = 1.0;
  return r;
}

struct LongMemoryFit {
  double gamma_hat = 0.0;
  double gamma_se = 0.0;
};

/// Minus the least-squares slope of log ACF against log lag over every lag
/// in [lag_lo, lag_hi].
inline LongMemoryFit long_memory_exponent(std::span<const double> acf_vals, std::size_t lag_lo, std::size_t lag_hi) {
  if (lag_lo < 1 || lag_hi >= acf_vals.size()) throw InvalidArgument("long_memory_exponent: fit range outside the ACF");
  if (lag_hi < 10 * lag_lo) throw InvalidArgument("long_memory_exponent: fit range must span a decade");
  std::vector<double> x, y;
  for (std::size_t k = lag_lo; k <= lag_hi; ++k) {
    if (!(acf_vals[k] > 0.0))
      throw InvalidArgument("long_memory_exponent: ACF is non-positive at lag " + std::to_string(k) +
                            "; use a longer series or a narrower fit range");
    x.push_back(std::log(static_cast<double>(k)));
    y.push_back(std::log(acf_vals[k]));
  }
  const auto f = detail::ols_line(x, y);
  return {-f.slope, f.slope_se};
}

struct Periodogram {
  std::vector<double> power;  // bins 0..L/2, frequency 2 pi j / L
  std::size_t segment_length = 0;
};

/// Averaged periodogram over `segments` Hann-tapered segments with 50% overlap.
inline Periodogram welch_periodogram(std::span<const double> series, std::size_t segments = 8) {
  const std::size_t n = series.size();
  if (segments < 1) throw InvalidArgument("welch_periodogram: need at least one segment");
  const std::size_t L = 2 * n / (segments + 1);
  if (L < 16) throw InsufficientData("welch_periodogram: series too short");
  const std::size_t step = L / 2;
  std::vector<double> window(L);
  for (std::size_t i = 0; i < L; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(L - 1));
  Periodogram out;
  out.segment_length = L;
  out.power.assign(L / 2 + 1, 0.0);
  Eigen::FFT<double> fft;
  std::vector<double> seg(L);
  std::vector<std::complex<double>> spec;
  for (std::size_t s = 0; s < segments; ++s) {
    const auto chunk = series.subspan(s * step, L);
    double mean = 0.0;
    for (double x : chunk) mean += x;
    mean /= static_cast<double>(L);
    for (std::size_t i = 0; i < L; ++i) seg[i] = (chunk[i] - mean) * window[i];
    fft.fwd(spec, seg);
    for (std::size_t j = 0; j <= L / 2; ++j) out.power[j] += std::norm(spec[j]);
  }
  for (auto& x : out.power) x /= static_cast<double>(segments);
  return out;
}

struct SpectralOptions {
  std::size_t segments = 8;
  std::size_t lo_bin = 64;  // slope fitted over bins [lo_bin, hi_bin]
  std::size_t hi_bin = 640;
};

struct SpectralCheck {
  double spectral_slope = 0.0;
  double amplification = 0.0;  // 1 / phi(1)^2 from the supplied coefficients
};

inline double ar_amplification(std::span<const double> ar_coeffs) {
  double phi1 = 1.0;
  for (double d : ar_coeffs) phi1 -= d;
  if (phi1 == 0.0) throw Singularity("phi(1) = 0: infinite low-frequency amplification");
  return 1.0 / (phi1 * phi1);
}

inline SpectralCheck spectral_check(std::span<const double> series, std::span<const double> ar_coeffs,
                                    const SpectralOptions& opts = {}) {
  if (series.size() < (std::size_t{1} << 14)) throw InsufficientData("spectral_check: need at least 2^14 samples");
  const auto pg = welch_periodogram(series, opts.segments);
  if (opts.hi_bin >= pg.power.size() || opts.lo_bin < 1 || opts.hi_bin <= opts.lo_bin)
    throw InvalidArgument("spectral_check: frequency band outside the periodogram");
  std::vector<double> x, y;
  for (std::size_t j = opts.lo_bin; j <= opts.hi_bin; ++j) {
    x.push_back(std::log(static_cast<double>(j)));
    y.push_back(std::log(pg.power[j]));
  }
  SpectralCheck out;
  out.spectral_slope = detail::ols_line(x, y).slope;
  out.amplification = ar_amplification(ar_coeffs);
  return out;
}

/// Ratio of the mean periodogram of v to that of eta over the fit band.
inline double measured_amplification(std::span<const double> volume, std::span<const double> innovation,
                                     const SpectralOptions& opts = {}) {
  const auto pv = welch_periodogram(volume, opts.segments);
  const auto pe = welch_periodogram(innovation, opts.segments);
  if (opts.hi_bin >= pv.power.size()) throw InvalidArgument("measured_amplification: band outside the periodogram");
  double sv = 0.0, se = 0.0;
  for (std::size_t j = opts.lo_bin; j <= opts.hi_bin; ++j) {
    sv += pv.power[j];
    se += pe.power[j];
  }
  return sv / se;
}

struct VarianceScaling {
  double exponent = 0.0;
  std::vector<std::size_t> taus;
  std::vector<double> variances;
};

namespace detail {

inline VarianceScaling variance_scaling_of_prices(std::span<const double> price) {
  VarianceScaling out;
  const std::size_t n = price.size();
  std::vector<double> grid;
  for (int i = 0; i < 30; ++i) {
    const auto tau = static_cast<std::size_t>(std::llround(std::pow(10.0, 3.0 * i / 29.0)));
    if (out.taus.empty() || out.taus.back() != tau) out.taus.push_back(tau);
  }
  std::vector<double> lx, ly;
  for (std::size_t tau : out.taus) {
    if (tau >= n / 2) throw InsufficientData("price_variance_scaling: series too short for tau = 1000");
    double m = 0.0, m2 = 0.0;
    const std::size_t cnt = n - tau;
    for (std::size_t t = 0; t < cnt; ++t) {
      const double d = price[t + tau] - price[t];
      m += d;
      m2 += d * d;
    }
    m /= static_cast<double>(cnt);
    const double var = m2 / static_cast<double>(cnt) - m * m;
    out.variances.push_back(var);
    lx.push_back(std::log(static_cast<double>(tau)));
    ly.push_back(std::log(var));
  }
  out.exponent = ols_line(lx, ly).slope;
  return out;
}

inline void require_long_flow(std::span<const double> flow) {
  if (flow.size() < 100'000) throw InsufficientData("price_variance_scaling: flow must have >= 1e5 samples");
}

}  // namespace detail

/// Propagator prices p_t = sum_{i>=1} g_i v_{t-i}; the first quarter is
/// discarded as burn-in, then Var[p_{t+tau} - p_t] is regressed on tau in
/// log-log over ~30 log-spaced lags in [1, 1000]. Returns the slope (2H).
inline VarianceScaling price_variance_scaling(const KernelSpec& kernel_g, std::span<const double> flow) {
  detail::require_long_flow(flow);
  kernel_g.validate();
  const auto g = kernel_g.coefficients(flow.size() - 1);
  const auto price = detail::causal_convolution(flow, g);
  return detail::variance_scaling_of_prices(std::span<const double>(price).subspan(price.size() / 4));
}

/// Same measurement with prices from a fitted linear model's price equation
/// (noise at zero), integrated from the price changes.
inline VarianceScaling price_variance_scaling(const LinearModel& model, std::span<const double> flow) {
  detail::require_long_flow(flow);
  model.validate();
  const std::size_t n = flow.size(), p = model.p;
  std::vector<double> dp(n, 0.0), price(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double x = model.b[0] * flow[t];
    for (std::size_t i = 1; i <= std::min(p, t); ++i) {
      x += model.b[i] * flow[t - i];
      if (model.kind == ModelKind::Hasbrouck) x += model.a[i - 1] * dp[t - i];
    }
    dp[t] = x;
    price[t] = (t ? price[t - 1] : 0.0) + x;
  }
  return detail::variance_scaling_of_prices(std::span<const double>(price).subspan(n / 4));
}

struct LongMemoryReport {
  double gamma_hat = 0.0;
  double gamma_se = 0.0;
  double spectral_slope = 0.0;
  double variance_exponent = 0.0;
  double amplification = 0.0;
  std::optional<double> measured_amplification;
  /// ACF and spectral estimates of gamma (gamma_hat vs 1 + slope) differ by > 0.2.
  bool flagged = false;
};

struct LongMemoryOptions {
  std::size_t lag_lo = 10;
  std::size_t lag_hi = 1000;
  SpectralOptions spectral;
};

inline LongMemoryReport analyze_long_memory(const StationaryFlow& flow, std::span<const double> ar_coeffs,
                                            const KernelSpec& kernel_g, const LongMemoryOptions& opts = {}) {
  LongMemoryReport r;
  const auto rho = acf(flow.volume, opts.lag_hi);
  const auto fit = long_memory_exponent(rho, opts.lag_lo, opts.lag_hi);
  r.gamma_hat = fit.gamma_hat;
  r.gamma_se = fit.gamma_se;
  const auto sc = spectral_check(flow.volume, ar_coeffs, opts.spectral);
  r.spectral_slope = sc.spectral_slope;
  r.amplification = sc.amplification;
  if (!flow.innovation.empty()) r.measured_amplification = measured_amplification(flow.volume, flow.innovation, opts.spectral);
  r.variance_exponent = price_variance_scaling(kernel_g, flow.volume).exponent;
  r.flagged = std::abs(r.gamma_hat - (1.0 + r.spectral_slope)) > 0.2;
  return r;
}

inline void write_report_text(std::ostream& os, const LongMemoryReport& r) {
  using detail::format_double;
  os << "gamma_hat=" << format_double(r.gamma_hat) << '\n'
     << "gamma_se=" << format_double(r.gamma_se) << '\n'
     << "spectral_slope=" << format_double(r.spectral_slope) << '\n'
     << "variance_exponent=" << format_double(r.variance_exponent) << '\n'
     << "amplification=" << format_double(r.amplification) << '\n'
     << "measured_amplification=" << (r.measured_amplification ? format_double(*r.measured_amplification) : "NA") << '\n'
     << "flagged=" << (r.flagged ? "true" : "false") << '\n';
}

inline constexpr const char* kReportCsvHeader =
    "gamma_hat,gamma_se,spectral_slope,variance_exponent,amplification,measured_amplification,flagged";

inline void write_report_csv_row(std::ostream& os, const LongMemoryReport& r) {
  using detail::format_double;
  os << format_double(r.gamma_hat) << ',' << format_double(r.gamma_se) << ',' << format_double(r.spectral_slope) << ','
     << format_double(r.variance_exponent) << ',' << format_double(r.amplification) << ','
     << (r.measured_amplification ? format_double(*r.measured_amplification) : "NA") << ',' << (r.flagged ? 1 : 0)
     << '\n';
}

}  // namespace mimpact
