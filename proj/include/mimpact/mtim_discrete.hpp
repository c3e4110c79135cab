#pragma once

// Discrete-time modified TIM
//   p_t = sum_{i=1..t} g_i [v_{t-i} + (1-alpha) V theta_{t-i}]
//   v_t = alpha V theta_t + lam sum_{i=1..t} d_i v_{t-i}
// with theta_t = 1 for t in 1..T, plus criticality arithmetic and the
// small-step limit towards the continuous model.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "mimpact/detail/random.hpp"
#include "mimpact/detail/text.hpp"
#include "mimpact/error.hpp"
#include "mimpact/irf.hpp"
#include "mimpact/mtim_continuous.hpp"

namespace mimpact {

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

struct ExponentialKernel {
  double rate = 1.0;
};
struct PowerLawKernel {
  double exponent = 1.5;
};

enum class KernelRole { VolumeD, PriceG };

/// Continuous-time kernel K(t) = e^{-rate t} or t^{-exponent}; the discrete
/// coefficients at step dt are K(i dt) dt, so dt = 1 gives e^{-rate i} and
/// i^{-exponent}.
struct KernelSpec {
  std::variant<ExponentialKernel, PowerLawKernel> family;
  KernelRole role = KernelRole::VolumeD;

  static KernelSpec exponential(double rate, KernelRole role) { return {ExponentialKernel{rate}, role}; }
  static KernelSpec power_law(double exponent, KernelRole role) { return {PowerLawKernel{exponent}, role}; }

  bool is_exponential() const { return std::holds_alternative<ExponentialKernel>(family); }

  void validate() const {
    if (const auto* e = std::get_if<ExponentialKernel>(&family)) {
      if (!(e->rate > 0.0) || !std::isfinite(e->rate)) throw InvalidArgument("exponential kernel rate must be > 0");
    } else {
      const double x = std::get<PowerLawKernel>(family).exponent;
      if (!std::isfinite(x)) throw InvalidArgument("power-law exponent must be finite");
      if (role == KernelRole::VolumeD && !(x > 1.0))
        throw InvalidArgument("volume kernel power-law exponent must exceed 1 (summability)");
      // A zero price exponent is the flat (permanent) propagator.
      if (role == KernelRole::PriceG && !(x >= 0.0))
        throw InvalidArgument("price kernel power-law exponent must be >= 0");
    }
  }

  double coefficient(std::size_t i, double dt = 1.0) const {
    const double t = static_cast<double>(i) * dt;
    if (const auto* e = std::get_if<ExponentialKernel>(&family)) return std::exp(-e->rate * t) * dt;
    return std::pow(t, -std::get<PowerLawKernel>(family).exponent) * dt;
  }

  std::vector<double> coefficients(std::size_t n, double dt = 1.0) const {
    std::vector<double> c(n + 1, 0.0);  // c[0] unused
    for (std::size_t i = 1; i <= n; ++i) c[i] = coefficient(i, dt);
    return c;
  }

  std::string describe() const {
    if (const auto* e = std::get_if<ExponentialKernel>(&family)) return "exp(" + detail::format_double(e->rate) + ")";
    return "pow(" + detail::format_double(std::get<PowerLawKernel>(family).exponent) + ")";
  }
};

/// Riemann zeta for s > 1 by Euler-Maclaurin: 19 explicit terms, the integral
/// tail and 8 Bernoulli corrections, accurate to ~1e-15 relative.
inline double riemann_zeta(double s) {
  if (!(s > 1.0)) throw InvalidArgument("riemann_zeta: s must exceed 1 (the series diverges)");
  constexpr int N = 20;
  constexpr std::array<double, 8> kB2k = {1.0 / 6, -1.0 / 30, 1.0 / 42, -1.0 / 30,
                                          5.0 / 66, -691.0 / 2730, 7.0 / 6, -3617.0 / 510};
  double sum = 0.0;
  for (int n = N - 1; n >= 1; --n) sum += std::pow(static_cast<double>(n), -s);
  const double Nd = N;
  sum += std::pow(Nd, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(Nd, -s);
  // Term k: B_2k / (2k)! * s (s+1) ... (s+2k-2) * N^{-s-2k+1}
  double rising = s;  // s (s+1) ... (s+2k-2)
  double fact = 2.0;  // (2k)!
  double npow = std::pow(Nd, -s - 1.0);
  for (std::size_t k = 1; k <= kB2k.size(); ++k) {
    sum += kB2k[k - 1] / fact * rising * npow;
    const double kk = static_cast<double>(k);
    rising *= (s + 2 * kk - 1) * (s + 2 * kk);
    fact *= (2 * kk + 1) * (2 * kk + 2);
    npow /= Nd * Nd;
  }
  return sum;
}

/// sum_{i>=1} K(i dt) dt for a volume kernel.
inline double kernel_sum(const KernelSpec& k, double dt = 1.0) {
  k.validate();
  if (const auto* e = std::get_if<ExponentialKernel>(&k.family)) return dt / std::expm1(e->rate * dt);
  const double eta = std::get<PowerLawKernel>(k.family).exponent;
  if (!(eta > 1.0)) throw InvalidArgument("kernel_sum: divergent power-law sum (exponent <= 1)");
  return std::pow(dt, 1.0 - eta) * riemann_zeta(eta);
}

/// lam* with lam* sum d_i = 1: e^beta - 1 for the exponential kernel,
/// 1 / zeta(eta) for the power law (dt = 1).
inline double critical_lambda(const KernelSpec& kernel_d, double dt = 1.0) {
  if (kernel_d.role != KernelRole::VolumeD) throw InvalidArgument("critical_lambda: needs a volume kernel");
  if (const auto* e = std::get_if<ExponentialKernel>(&kernel_d.family)) {
    kernel_d.validate();
    return std::expm1(e->rate * dt) / dt;
  }
  const double eta = std::get<PowerLawKernel>(kernel_d.family).exponent;
  if (!(eta > 1.0)) throw InvalidArgument("critical_lambda: divergent sum for exponent <= 1");
  return 1.0 / kernel_sum(kernel_d, dt);
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

struct DiscreteNoise {
  double price = 0.0;
  double volume = 0.0;
};

struct DiscreteParams {
  KernelSpec kernel_d = KernelSpec::exponential(1.0, KernelRole::VolumeD);
  KernelSpec kernel_g = KernelSpec::exponential(1.0, KernelRole::PriceG);
  double lam = 0.5;
  double alpha = 1.0;
  double V = 1.0;
  std::size_t T = 1;  // steps
  std::size_t horizon = 1;
  double dt = 1.0;
  DiscreteNoise noise;
  std::uint64_t seed = 0;

  void validate() const {
    kernel_d.validate();
    kernel_g.validate();
    if (kernel_d.role != KernelRole::VolumeD || kernel_g.role != KernelRole::PriceG)
      throw InvalidArgument("kernel roles must be (VolumeD, PriceG)");
    if (!(lam >= 0.0) || !std::isfinite(lam)) throw InvalidArgument("lam must be >= 0");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in [0, 1]");
    if (!std::isfinite(V)) throw InvalidArgument("V must be finite");
    if (T < 1) throw InvalidArgument("T must be >= 1");
    if (horizon < T) throw InvalidArgument("horizon must be >= T");
    if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
    if (!(noise.price >= 0.0) || !(noise.volume >= 0.0)) throw InvalidArgument("noise stds must be >= 0");
  }
};

/// 1 - lam sum d_i; <= 0 at or beyond criticality.
inline double criticality_margin(const DiscreteParams& p) { return 1.0 - p.lam * kernel_sum(p.kernel_d, p.dt); }

namespace detail {

inline void require_subcritical(const DiscreteParams& p) {
  const double load = p.lam * kernel_sum(p.kernel_d, p.dt);
  if (load > 1.0 + 1e-9)
    throw NonStationary("mtim-discrete: lam * sum(d) = " + format_double(load) +
                        " exceeds 1 (supercritical order flow); lower lam below " +
                        format_double(critical_lambda(p.kernel_d, p.dt)));
}

/// History sum sum_{i=1..t} c_i x_{t-i}: O(1) updates for exponential
/// coefficients, explicit sums otherwise.
class LagSum {
 public:
  LagSum(const KernelSpec& k, std::size_t horizon, double dt) {
    if (const auto* e = std::get_if<ExponentialKernel>(&k.family)) {
      recursive_ = true;
      ratio_ = std::exp(-e->rate * dt);
      scale_ = dt;
    } else {
      coef_ = k.coefficients(horizon, dt);
    }
  }

  /// Value at step t given x[0..t-1].
  double at(const std::vector<double>& x, std::size_t t) {
    if (recursive_) {
      // S_t = r (dt x_{t-1} + S_{t-1})
      if (t > 0) state_ = ratio_ * (scale_ * x[t - 1] + state_);
      return state_;
    }
    double s = 0.0;
    for (std::size_t i = 1; i <= t; ++i) s += coef_[i] * x[t - i];
    return s;
  }

 private:
  bool recursive_ = false;
  double ratio_ = 0.0, scale_ = 0.0, state_ = 0.0;
  std::vector<double> coef_;
};

}  // namespace detail

/// One path of the discrete model for t = 0..horizon (v_0 = p_0 = 0). With
/// noise enabled, independent Gaussian terms are added to v_t and p_t.
inline Trajectory simulate(const DiscreteParams& p) {
  p.validate();
  detail::require_subcritical(p);
  const std::size_t H = p.horizon;
  MetaorderSpec meta{p.V == 0.0 ? 1.0 : p.V, p.T, H, VolumeRouting::VolumeCoupled};
  Trajectory out = Trajectory::zeros(meta);
  out.tags = {{"model", "mtim-discrete"},
              {"kernel_d", p.kernel_d.describe()},
              {"kernel_g", p.kernel_g.describe()},
              {"lam", detail::format_double(p.lam)},
              {"alpha", detail::format_double(p.alpha)},
              {"V", detail::format_double(p.V)},
              {"T", std::to_string(p.T)},
              {"dt", detail::format_double(p.dt)}};

  const bool noisy = p.noise.price > 0.0 || p.noise.volume > 0.0;
  auto rng = detail::make_engine(p.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<double>& v = out.volume;
  std::vector<double> u(H + 1, 0.0);  // v + direct child flow
  detail::LagSum dsum(p.kernel_d, H, p.dt), gsum(p.kernel_g, H, p.dt);
  const double direct = (1.0 - p.alpha) * p.V;
  for (std::size_t t = 1; t <= H; ++t) {
    const bool active = t <= p.T;
    double vt = (active ? p.alpha * p.V : 0.0) + p.lam * dsum.at(v, t);
    double pt = gsum.at(u, t);
    if (noisy) {
      vt += p.noise.volume * gauss(rng);
      pt += p.noise.price * gauss(rng);
    }
    v[t] = vt;
    u[t] = vt + (active ? direct : 0.0);
    out.price[t] = pt;
  }
  return out;
}

struct EnsembleResult {
  std::vector<double> mean_price, mean_volume;
  std::vector<double> se_price, se_volume;
  std::size_t paths = 0;
};

/// Monte Carlo average over `paths` noisy paths. Path i uses seed
/// stream_seed(seed, i); paths are summed in fixed chunks so the result does not
/// depend on the worker count.
inline EnsembleResult monte_carlo(const DiscreteParams& p, std::size_t paths, std::size_t workers = 1) {
  p.validate();
  if (paths < 2) throw InvalidArgument("monte_carlo: need at least 2 paths");
  detail::require_subcritical(p);
  const std::size_t H = p.horizon + 1;
  constexpr std::size_t kChunk = 64;
  const std::size_t n_chunks = (paths + kChunk - 1) / kChunk;
  struct Moments {
    std::vector<double> sp, sp2, sv, sv2;
  };
  std::vector<Moments> chunks(n_chunks);
  auto run_chunk = [&](std::size_t c) {
    Moments m{std::vector<double>(H), std::vector<double>(H), std::vector<double>(H), std::vector<double>(H)};
    for (std::size_t i = c * kChunk; i < std::min(paths, (c + 1) * kChunk); ++i) {
      DiscreteParams q = p;
      q.seed = detail::stream_seed(p.seed, i);
      const auto tr = simulate(q);
      for (std::size_t t = 0; t < H; ++t) {
        m.sp[t] += tr.price[t];
        m.sp2[t] += tr.price[t] * tr.price[t];
        m.sv[t] += tr.volume[t];
        m.sv2[t] += tr.volume[t] * tr.volume[t];
      }
    }
    chunks[c] = std::move(m);
  };
  workers = std::max<std::size_t>(1, std::min(workers, n_chunks));
  if (workers == 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t c = w; c < n_chunks; c += workers) run_chunk(c);
      });
    for (auto& th : pool) th.join();
  }
  EnsembleResult r;
  r.paths = paths;
  r.mean_price.assign(H, 0.0);
  r.mean_volume.assign(H, 0.0);
  r.se_price.assign(H, 0.0);
  r.se_volume.assign(H, 0.0);
  std::vector<double> sp2(H, 0.0), sv2(H, 0.0);
  for (const auto& m : chunks)
    for (std::size_t t = 0; t < H; ++t) {
      r.mean_price[t] += m.sp[t];
      sp2[t] += m.sp2[t];
      r.mean_volume[t] += m.sv[t];
      sv2[t] += m.sv2[t];
    }
  const double n = static_cast<double>(paths);
  for (std::size_t t = 0; t < H; ++t) {
    r.mean_price[t] /= n;
    r.mean_volume[t] /= n;
    const double vp = std::max(0.0, (sp2[t] / n - r.mean_price[t] * r.mean_price[t]) * n / (n - 1));
    const double vv = std::max(0.0, (sv2[t] / n - r.mean_volume[t] * r.mean_volume[t]) * n / (n - 1));
    r.se_price[t] = std::sqrt(vp / n);
    r.se_volume[t] = std::sqrt(vv / n);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Continuum limit
// ---------------------------------------------------------------------------

/// Which end of each subinterval the Riemann sum samples. Left reproduces the
/// TIM-style recursion (lags start at 1); Right the Hasbrouck-style one, where
/// the current value enters its own equation.
enum class Endpoint { Left, Right };

struct DiscretizedPath {
  double dt = 0.0;
  std::vector<double> volume;  // at t = n dt, n = 0..N
  std::vector<double> price;
};

/// Exponential-kernel discretization with step dt on [0, t_max]. dt is
/// adjusted so that T is a whole number of steps.
inline DiscretizedPath discretize_continuous(const ContinuousParams& pc, double dt, double t_max,
                                             Endpoint endpoint = Endpoint::Left) {
  pc.validate();
  if (!(dt > 0.0)) throw InvalidArgument("discretize_continuous: dt must be positive");
  const auto nT = static_cast<std::size_t>(std::max(1.0, std::round(pc.T / dt)));
  const double h = pc.T / static_cast<double>(nT);
  const auto N = static_cast<std::size_t>(std::round(t_max / h));
  DiscretizedPath out;
  out.dt = h;
  if (endpoint == Endpoint::Left) {
    // Left endpoints with activation n in 0..nT-1 is the unit-step model shifted
    // by one step: v_n here is the simulator's v_{n+1}.
    DiscreteParams p;
    p.kernel_d = KernelSpec::exponential(pc.beta, KernelRole::VolumeD);
    p.kernel_g = KernelSpec::exponential(pc.rho, KernelRole::PriceG);
    p.lam = pc.lam;
    p.alpha = pc.alpha;
    p.V = pc.V;
    p.T = nT;
    p.horizon = N + 1;
    p.dt = h;
    const auto tr = simulate(p);
    out.volume.assign(tr.volume.begin() + 1, tr.volume.end());
    out.price.assign(tr.price.begin() + 1, tr.price.end());
    return out;
  }
  const double rd = std::exp(-pc.beta * h), rg = std::exp(-pc.rho * h);
  const double denom = 1.0 - pc.lam * h;  // D(0) dt
  if (!(denom > 0.0)) throw Instability("discretize_continuous: lam * dt >= 1 with right endpoints");
  out.volume.assign(N + 1, 0.0);
  out.price.assign(N + 1, 0.0);
  const double direct = (1.0 - pc.alpha) * pc.V;
  auto source = [&](std::size_t n) { return n < nT ? pc.alpha * pc.V : 0.0; };
  out.volume[0] = source(0);
  // R_n = sum_{j=1..n-1} D((n-j) dt) v_j, Q_n likewise for G and u.
  double R = 0.0, Q = 0.0;
  for (std::size_t n = 1; n <= N; ++n) {
    if (n >= 2) {
      const double u_prev = out.volume[n - 1] + (n - 1 < nT ? direct : 0.0);
      R = rd * (R + out.volume[n - 1]);
      Q = rg * (Q + u_prev);
    }
    const double v = (source(n) + pc.lam * h * R) / denom;
    out.volume[n] = v;
    out.price[n] = h * (Q + v + (n < nT ? direct : 0.0));
  }
  return out;
}

struct ConvergencePoint {
  double dt = 0.0;
  double volume_error = 0.0;
  double price_error = 0.0;
  double max_error = 0.0;
};

/// Max-abs deviation of the discretized model from the closed forms on [0, 2T]
/// for each step in dt_list.
inline std::vector<ConvergencePoint> continuum_convergence(const ContinuousParams& pc, const std::vector<double>& dt_list,
                                                           Endpoint endpoint = Endpoint::Left) {
  pc.validate();
  std::vector<ConvergencePoint> out;
  for (double dt : dt_list) {
    const auto path = discretize_continuous(pc, dt, 2.0 * pc.T, endpoint);
    ConvergencePoint cp;
    cp.dt = path.dt;
    for (std::size_t n = 0; n < path.volume.size(); ++n) {
      const double t = path.dt * static_cast<double>(n);
      cp.volume_error = std::max(cp.volume_error, std::abs(path.volume[n] - volume_closed(pc, t)));
      cp.price_error = std::max(cp.price_error, std::abs(path.price[n] - price_closed(pc, t)));
    }
    cp.max_error = std::max(cp.volume_error, cp.price_error);
    out.push_back(cp);
  }
  return out;
}

}  // namespace mimpact
