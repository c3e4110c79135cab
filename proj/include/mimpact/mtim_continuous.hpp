#pragma once

// Continuous-time modified TIM with exponential kernels
//   p(t) = int_0^t G(t-s) [v(s) + (1-alpha) V theta(T-s)] ds,  G(t) = e^{-rho t}
//   v(t) = alpha V theta(T-t) + lam int_0^t D(t-s) v(s) ds,   D(t) = e^{-beta t}
// closed forms, asymptotic regimes and a numerical Volterra oracle.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mimpact/detail/text.hpp"
#include "mimpact/error.hpp"

namespace mimpact {

struct ContinuousParams {
  double alpha = 1.0;
  double V = 1.0;
  double lam = 1.0;
  double beta = 1.0;
  double rho = 1.0;
  double T = 1.0;

  /// Range checks; beta < lam is reported as NonStationary.
  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in [0, 1]");
    if (!std::isfinite(V)) throw InvalidArgument("V must be finite");
    if (!(lam > 0.0) || !std::isfinite(lam)) throw InvalidArgument("lam must be positive");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidArgument("beta must be positive");
    if (!(rho > 0.0) || !std::isfinite(rho)) throw InvalidArgument("rho must be positive");
    if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("T must be positive");
    if (beta < lam) throw NonStationary("beta < lam: the volume equation is explosive");
  }

  double k() const { return beta - lam; }
  bool critical() const { return std::abs(beta - lam) <= kCriticalBand; }

  static constexpr double kCriticalBand = 1e-12;
  static constexpr double kSingularBand = 1e-9;
};

namespace detail {

/// (1 - e^{-k s}) / k, continuous at k = 0.
inline double phi(double k, double s) {
  if (k == 0.0) return s;
  return -std::expm1(-k * s) / k;
}

inline void check_singularity(const ContinuousParams& p) {
  if (!p.critical() && std::abs(p.rho - p.k()) <= ContinuousParams::kSingularBand)
    throw Singularity("rho = beta - lam: the closed-form price is singular here; perturb rho or use the "
                      "Volterra oracle");
}

/// Volume response to a unit-rate step switched on at s = 0.
inline double volume_step(const ContinuousParams& p, double s) {
  const double k = p.critical() ? 0.0 : p.k();
  return p.alpha * p.V * (1.0 + p.lam * phi(k, s));
}

/// Price response to the same step, source split included.
inline double price_step(const ContinuousParams& p, double s) {
  const double direct = (1.0 - p.alpha) * p.V * phi(p.rho, s);
  if (p.critical()) {
    const double rs = p.rho * s;
    const double lin = (rs + std::expm1(-rs)) / (p.rho * p.rho);
    return p.alpha * p.V * (phi(p.rho, s) + p.beta * lin) + direct;
  }
  const double k = p.k();
  // Equal to beta/k * phi(rho,s) + (1 - beta/k)(e^{-ks} - e^{-rho s})/(rho - k),
  // rearranged so that nothing blows up as k -> 0.
  const double coupled = phi(p.rho, s) + p.lam * (phi(k, s) - phi(p.rho, s)) / (p.rho - k);
  return p.alpha * p.V * coupled + direct;
}

}  // namespace detail

/// Expected order flow; theta(0) = 1 in the switch-off term so the source is
/// already inactive at t = T (v jumps down by alpha V there).
inline double volume_closed(const ContinuousParams& p, double t) {
  p.validate();
  if (t < 0.0) throw InvalidArgument("volume_closed: t must be >= 0");
  double v = detail::volume_step(p, t);
  if (t >= p.T) v -= detail::volume_step(p, t - p.T);
  return v;
}

inline double price_closed(const ContinuousParams& p, double t) {
  p.validate();
  detail::check_singularity(p);
  if (t < 0.0) throw InvalidArgument("price_closed: t must be >= 0");
  double x = detail::price_step(p, t);
  if (t >= p.T) x -= detail::price_step(p, t - p.T);
  return x;
}

/// Long-run price after the metaorder: 0 when beta > lam, alpha V beta T / rho
/// at criticality.
inline double asymptote(const ContinuousParams& p) {
  p.validate();
  return p.critical() ? p.alpha * p.V * p.beta * p.T / p.rho : 0.0;
}

/// Plateau reached during a long execution when beta > lam.
inline double execution_plateau(const ContinuousParams& p) {
  p.validate();
  if (p.critical()) throw NonStationary("execution_plateau: no plateau at beta = lam (linear growth)");
  return p.alpha * p.V / p.rho * p.beta / p.k() + (1.0 - p.alpha) * p.V / p.rho;
}

enum class TaylorSide { Start, AfterEnd };

/// Leading local behaviour p(t0 + h) ~ p(t0) + linear h + quadratic h^2 / 2,
/// i.e. `quadratic` is the curvature p''(t0+).
struct TaylorCoefficients {
  double linear = 0.0;
  double quadratic = 0.0;
  /// AfterEnd only: whether T rho >= 10, the regime the expansion assumes.
  bool long_execution = true;
};

inline TaylorCoefficients small_time_quadratic(const ContinuousParams& p, TaylorSide side) {
  p.validate();
  TaylorCoefficients c;
  if (side == TaylorSide::Start) {
    c.linear = p.V;
    c.quadratic = p.V * (p.alpha * p.lam - p.rho);
    return c;
  }
  c.long_execution = p.T * p.rho >= 10.0;
  if (p.critical()) {
    const double g = p.rho - p.alpha * p.beta;
    c.linear = -p.V / p.rho * g;
    c.quadratic = p.V * g;
  } else {
    c.linear = -p.V;
    c.quadratic = p.V * (p.rho - p.alpha * p.lam);
  }
  return c;
}

/// Price once the rho-driven terms have decayed, leaving only the slow
/// (beta - lam) relaxation.
inline double first_relaxation_level(const ContinuousParams& p, double t) {
  p.validate();
  detail::check_singularity(p);
  if (t < p.T) throw InvalidArgument("first_relaxation_level: t must be >= T");
  if (p.critical()) return asymptote(p);
  const double k = p.k();
  return p.alpha * p.V * p.lam * std::exp(-k * (t - p.T)) * detail::phi(k, p.T) / (p.rho - k);
}

/// p(T) - p(infinity) at beta = lam for T >> 1/rho; negative means the price
/// keeps rising after the execution.
inline double peak_gap_critical(const ContinuousParams& p) {
  p.validate();
  if (!p.critical()) throw InvalidArgument("peak_gap_critical: requires beta = lam");
  return p.V / (p.rho * p.rho) * (p.rho - p.alpha * p.beta);
}

// ---------------------------------------------------------------------------
// Numerical oracle
// ---------------------------------------------------------------------------

/// Samples f(t0 + i dt). Piecewise-smooth functions record their jumps: at a
/// jump node `values` holds the right limit and `jumps` the left limit.
struct GridFunction {
  struct Jump {
    std::size_t index;
    double left_value;
  };

  double t0 = 0.0;
  double dt = 1.0;
  std::vector<double> values;
  std::vector<Jump> jumps;  // sorted by index

  std::size_t size() const { return values.size(); }
  double time(std::size_t i) const { return t0 + dt * static_cast<double>(i); }

  double left(std::size_t i) const {
    for (const auto& j : jumps)
      if (j.index == i) return j.left_value;
    return values[i];
  }
};

struct VolterraGrid {
  double t_max = 1.0;
  double dt = 1e-3;
};

namespace detail {

inline std::size_t node_of(double t, double dt, const char* what) {
  const double x = t / dt;
  const double r = std::round(x);
  if (std::abs(x - r) > 1e-6) throw InvalidArgument(std::string(what) + ": grid mismatch, t=" +
                                                    format_double(t) + " is not on a node");
  return static_cast<std::size_t>(r);
}

/// Trapezoid weights over the nodes: node 0 and the current node count half,
/// interior nodes use the mean of their one-sided limits.
inline std::vector<double> node_averages(const std::vector<double>& right, const std::vector<double>& left) {
  std::vector<double> w(right.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.5 * (right[i] + left[i]);
  return w;
}

}  // namespace detail

/// Solves v(t) = f(t) + lam int_0^t D(t-s) v(s) ds on t = 0, dt, ..., by the
/// implicit trapezoid rule. `breaks` lists times where f jumps; each must fall
/// on a node, where both one-sided limits of v are tracked so the rule stays
/// second order across the jump.
template <class Kernel, class Source>
GridFunction volterra_solve(Kernel&& D, double lam, Source&& f, VolterraGrid grid,
                            const std::vector<double>& breaks = {}) {
  if (!(grid.dt > 0.0) || !(grid.t_max > 0.0)) throw InvalidArgument("volterra_solve: need dt > 0 and t_max > 0");
  const double dt = grid.dt;
  const auto n_nodes = static_cast<std::size_t>(std::ceil(grid.t_max / dt - 1e-9)) + 1;

  std::vector<char> is_break(n_nodes, 0);
  for (double b : breaks) {
    const std::size_t idx = detail::node_of(b, dt, "volterra_solve");
    if (idx > 0 && idx < n_nodes) is_break[idx] = 1;
  }

  // Kernel table reversed so the history sum is a forward dot product:
  // D((n - j) dt) = drev[N - 1 - n + j].
  const std::size_t N = n_nodes;
  std::vector<double> drev(N);
  for (std::size_t i = 0; i < N; ++i) drev[N - 1 - i] = D(dt * static_cast<double>(i));
  const double d0 = drev[N - 1];
  const double denom = 1.0 - 0.5 * lam * dt * d0;
  if (!(denom > 0.0)) throw Instability("volterra_solve: step too large for the kernel (1 - lam dt D(0)/2 <= 0)");

  GridFunction out;
  out.t0 = 0.0;
  out.dt = dt;
  out.values.resize(N);
  std::vector<double> w(N, 0.0);  // trapezoid node averages of v
  constexpr double kLimit = 1e12;

  out.values[0] = f(0.0);
  w[0] = 0.5 * out.values[0];  // endpoint weight
  for (std::size_t n = 1; n < N; ++n) {
    const double t = dt * static_cast<double>(n);
    const double* dk = drev.data() + (N - 1 - n);
    double hist = dk[0] * w[0];
    for (std::size_t j = 1; j < n; ++j) hist += dk[j] * w[j];
    const double f_left = is_break[n] ? f(std::nextafter(t, -std::numeric_limits<double>::infinity())) : f(t);
    const double v_left = (f_left + lam * dt * hist) / denom;
    double v = v_left;
    if (is_break[n]) {
      v = v_left + (f(t) - f_left);
      out.jumps.push_back({n, v_left});
    }
    if (!std::isfinite(v) || std::abs(v) > kLimit)
      throw Instability("volterra_solve: |v| exceeded 1e12 at t=" + detail::format_double(t));
    out.values[n] = v;
    w[n] = 0.5 * (v + v_left);
  }
  return out;
}

/// p(t_n) = int_0^{t_n} G(t_n - s) [v(s) + (1 - alpha) V theta(T - s)] ds by
/// the trapezoid rule on v's grid, honouring v's jumps and the switch-off at T.
template <class Kernel>
GridFunction price_integrate(Kernel&& G, const GridFunction& v, const ContinuousParams& p) {
  if (v.t0 != 0.0) throw InvalidArgument("price_integrate: grid mismatch, v must start at t = 0");
  if (v.size() < 2) throw InvalidArgument("price_integrate: v has fewer than 2 nodes");
  const double dt = v.dt;
  const std::size_t N = v.size();
  const std::size_t nT = detail::node_of(p.T, dt, "price_integrate");
  const double direct = (1.0 - p.alpha) * p.V;

  std::vector<double> right(N), left(N);
  for (std::size_t i = 0; i < N; ++i) {
    right[i] = v.values[i] + (i < nT ? direct : 0.0);
    left[i] = v.values[i] + (i <= nT ? direct : 0.0);
  }
  for (const auto& j : v.jumps) left[j.index] = j.left_value + (j.index <= nT ? direct : 0.0);
  left[0] = right[0];

  std::vector<double> w = detail::node_averages(right, left);
  w[0] = 0.5 * right[0];
  std::vector<double> grev(N);
  for (std::size_t i = 0; i < N; ++i) grev[N - 1 - i] = G(dt * static_cast<double>(i));
  const double g0 = grev[N - 1];

  GridFunction out;
  out.t0 = 0.0;
  out.dt = dt;
  out.values.assign(N, 0.0);
  for (std::size_t n = 1; n < N; ++n) {
    const double* gk = grev.data() + (N - 1 - n);
    double acc = gk[0] * w[0];
    for (std::size_t j = 1; j < n; ++j) acc += gk[j] * w[j];
    acc += 0.5 * g0 * left[n];
    out.values[n] = dt * acc;
  }
  return out;
}

struct OracleSolution {
  GridFunction volume;
  GridFunction price;
};

/// Volterra + quadrature solution of the exponential-kernel model. dt is
/// shrunk slightly if needed so that T lands exactly on a node.
inline OracleSolution solve_oracle(const ContinuousParams& p, double dt, double t_max) {
  p.validate();
  if (!(dt > 0.0)) throw InvalidArgument("solve_oracle: dt must be positive");
  const double steps = std::max(1.0, std::ceil(p.T / dt - 1e-9));
  const double snapped = p.T / steps;
  auto D = [b = p.beta](double t) { return std::exp(-b * t); };
  auto G = [r = p.rho](double t) { return std::exp(-r * t); };
  auto f = [&](double t) { return t < p.T ? p.alpha * p.V : 0.0; };
  OracleSolution s;
  s.volume = volterra_solve(D, p.lam, f, {t_max, snapped}, {p.T});
  s.price = price_integrate(G, s.volume, p);
  return s;
}

inline void write_grid_csv(std::ostream& os, const GridFunction& g) {
  os << "t,value\n";
  for (std::size_t i = 0; i < g.size(); ++i)
    os << detail::format_double(g.time(i)) << ',' << detail::format_double(g.values[i]) << '\n';
}

}  // namespace mimpact
