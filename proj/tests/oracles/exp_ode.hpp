#pragma once

// With exponential kernels the model is equivalent to a linear ODE system:
//   u' = v - beta u,  v = f + lam u      (u = int e^{-beta(t-s)} v(s) ds)
//   p' = v + (1 - alpha) V theta - rho p
// integrated here by classical RK4 with the step aligned on T. Independent of
// both the closed forms and the Volterra quadrature.

#include <cmath>
#include <vector>

#include "mimpact/mtim_continuous.hpp"

namespace oracle {

struct OdeSample {
  double volume;
  double price;
};

/// Values at t = k * h for k = 0..n, right limits at t = T.
inline std::vector<OdeSample> exp_kernel_ode(const mimpact::ContinuousParams& p, double h, std::size_t n) {
  std::vector<OdeSample> out;
  out.reserve(n + 1);
  double u = 0.0, x = 0.0;
  auto rhs = [&](double uu, double xx, bool on, double& du, double& dx) {
    const double src = on ? p.alpha * p.V : 0.0;
    const double v = src + p.lam * uu;
    du = v - p.beta * uu;
    dx = v + (on ? (1.0 - p.alpha) * p.V : 0.0) - p.rho * xx;
  };
  const auto nT = static_cast<std::size_t>(std::llround(p.T / h));
  for (std::size_t k = 0; k <= n; ++k) {
    const bool on_now = k < nT;
    out.push_back({(on_now ? p.alpha * p.V : 0.0) + p.lam * u, x});
    if (k == n) break;
    const bool on = k < nT;  // source constant on [k h, (k+1) h)
    double du1, dx1, du2, dx2, du3, dx3, du4, dx4;
    rhs(u, x, on, du1, dx1);
    rhs(u + 0.5 * h * du1, x + 0.5 * h * dx1, on, du2, dx2);
    rhs(u + 0.5 * h * du2, x + 0.5 * h * dx2, on, du3, dx3);
    rhs(u + h * du3, x + h * dx3, on, du4, dx4);
    u += h / 6.0 * (du1 + 2 * du2 + 2 * du3 + du4);
    x += h / 6.0 * (dx1 + 2 * dx2 + 2 * dx3 + dx4);
  }
  return out;
}

}  // namespace oracle
