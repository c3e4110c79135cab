#pragma once

#include <random>

#include "mimpact/linmodels.hpp"

namespace oracle {

/// Random model with spectral radius below `max_radius`, by rejection.
inline mimpact::LinearModel random_stable_model(std::mt19937_64& rng, mimpact::ModelKind kind, std::size_t p,
                                                double max_radius = 0.9) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    auto m = mimpact::LinearModel::zeros(kind, p);
    const double s = 0.9 / static_cast<double>(p);
    m.b[0] = 0.5 + 0.5 * u(rng);
    for (std::size_t i = 0; i < p; ++i) {
      m.b[i + 1] = s * u(rng);
      m.d[i] = s * u(rng);
      if (kind == mimpact::ModelKind::Hasbrouck) {
        m.a[i] = s * u(rng);
        m.c[i] = s * u(rng);
      }
    }
    if (mimpact::companion(m).spectral_radius() < max_radius) return m;
  }
}

}  // namespace oracle
