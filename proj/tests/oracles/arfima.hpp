#pragma once

// ARFIMA(0, d, 0) noise by truncated MA(infinity) weights
// psi_0 = 1, psi_j = psi_{j-1} (j - 1 + d) / j, applied with an FFT
// convolution. Its autocorrelation decays as tau^{2d - 1}, i.e. gamma = 1 - 2d,
// and its spectrum near zero as omega^{-2d} = omega^{gamma - 1}.

#include <unsupported/Eigen/FFT>

#include <complex>
#include <random>
#include <vector>

namespace oracle {

inline std::vector<double> arfima_noise(std::size_t n, double d, std::uint64_t seed) {
  const std::size_t burn = n;  // MA truncation length
  const std::size_t total = n + burn;
  std::size_t m = 1;
  while (m < 2 * total) m <<= 1;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> e(m, 0.0), psi(m, 0.0);
  for (std::size_t i = 0; i < total; ++i) e[i] = g(rng);
  psi[0] = 1.0;
  for (std::size_t j = 1; j < total; ++j) psi[j] = psi[j - 1] * (static_cast<double>(j) - 1.0 + d) / static_cast<double>(j);
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> fe, fp;
  fft.fwd(fe, e);
  fft.fwd(fp, psi);
  for (std::size_t i = 0; i < fe.size(); ++i) fe[i] *= fp[i];
  std::vector<double> y;
  fft.inv(y, fe);
  return std::vector<double>(y.begin() + static_cast<long>(burn), y.begin() + static_cast<long>(total));
}

}  // namespace oracle
