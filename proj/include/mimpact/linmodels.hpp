#pragma once

// SVAR (Hasbrouck) and TIM models of (dp_t, v_t): OLS estimation, simulation,
// companion-form representation and stationarity diagnostics.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <future>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mimpact/detail/random.hpp"
#include "mimpact/detail/text.hpp"
#include "mimpact/error.hpp"
#include "mimpact/marketdata.hpp"

namespace mimpact {

enum class ModelKind { Hasbrouck, TIM };

inline std::string to_string(ModelKind k) { return k == ModelKind::TIM ? "TIM" : "Hasbrouck"; }

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "TIM" || s == "tim") return ModelKind::TIM;
  if (s == "Hasbrouck" || s == "hasbrouck") return ModelKind::Hasbrouck;
  throw InvalidArgument("unknown model kind '" + std::string(s) + "'");
}

/// dp_t = sum_i a_i dp_{t-i} + sum_{i=0..p} b_i v_{t-i} + u1
/// v_t  = sum_i c_i dp_{t-i} + sum_{i=1..p} d_i v_{t-i} + u2
/// Arrays a, c, d are indexed by lag - 1; b by lag (b[0] contemporaneous).
struct LinearModel {
  ModelKind kind = ModelKind::TIM;
  std::size_t p = 0;
  std::vector<double> a, b, c, d;
  double resid_var_dp = 0.0;
  double resid_var_v = 0.0;
  std::size_t n_obs = 0;
  // OLS standard errors, same layout; empty when not estimated.
  std::vector<double> se_a, se_b, se_c, se_d;

  static LinearModel zeros(ModelKind kind, std::size_t p) {
    if (p == 0) throw InvalidArgument("lag order p must be >= 1");
    LinearModel m;
    m.kind = kind;
    m.p = p;
    m.a.assign(p, 0.0);
    m.b.assign(p + 1, 0.0);
    m.c.assign(p, 0.0);
    m.d.assign(p, 0.0);
    return m;
  }

  static LinearModel tim(std::vector<double> b, std::vector<double> d) {
    if (b.size() != d.size() + 1) throw InvalidArgument("TIM: b must have one more entry than d");
    auto m = zeros(ModelKind::TIM, d.size());
    m.b = std::move(b);
    m.d = std::move(d);
    return m;
  }

  void validate() const {
    if (p == 0) throw InvalidArgument("lag order p must be >= 1");
    if (a.size() != p || c.size() != p || d.size() != p || b.size() != p + 1)
      throw InvalidArgument("coefficient array lengths do not match p");
    if (kind == ModelKind::TIM) {
      for (std::size_t i = 0; i < p; ++i)
        if (a[i] != 0.0 || c[i] != 0.0) throw InvalidArgument("TIM model must have a = c = 0");
    }
  }

  double sum_d() const { return std::accumulate(d.begin(), d.end(), 0.0); }
};

/// TIM with power-law memory: d_i proportional to i^{-d_exponent}, scaled so
/// that sum d = d_sum, and b taken from the propagator G(l) = b_scale (1+l)^{-b_exponent}
/// as b_0 = G(0), b_i = G(i) - G(i-1).
inline LinearModel power_law_tim(std::size_t p, double d_sum, double d_exponent, double b_exponent,
                                 double b_scale = 1.0) {
  if (p == 0) throw InvalidArgument("power_law_tim: p must be >= 1");
  if (!(d_sum >= 0.0) || !(d_exponent >= 0.0) || !(b_exponent >= 0.0))
    throw InvalidArgument("power_law_tim: d_sum and exponents must be >= 0");
  std::vector<double> d(p), b(p + 1);
  double total = 0.0;
  for (std::size_t i = 0; i < p; ++i) total += d[i] = std::pow(static_cast<double>(i + 1), -d_exponent);
  for (auto& x : d) x *= d_sum / total;
  auto G = [&](std::size_t l) { return b_scale * std::pow(1.0 + static_cast<double>(l), -b_exponent); };
  b[0] = G(0);
  for (std::size_t i = 1; i <= p; ++i) b[i] = G(i) - G(i - 1);
  return LinearModel::tim(std::move(b), std::move(d));
}

// ---------------------------------------------------------------------------
// Estimation
// ---------------------------------------------------------------------------

struct FitOptions {
  bool standard_errors = true;
  std::size_t block_rows = 0;  // rows per streamed QR block; 0 picks 4x the column count
  bool parallel = true;        // solve the two equations concurrently
};

namespace detail {

/// Upper-triangular factor of a tall matrix, accumulated block by block
/// (TSQR): the memory footprint is O(k^2 + block*k) whatever the row count.
class StreamingQR {
 public:
  StreamingQR(Eigen::Index cols, Eigen::Index block_rows)
      : cols_(cols), block_(std::max<Eigen::Index>(block_rows, 1)),
        stack_(Eigen::MatrixXd::Zero(cols + block_, cols)), col_sq_(Eigen::VectorXd::Zero(cols)) {}

  /// Returns the next row slot to fill (length = cols).
  auto next_row() {
    if (fill_ == block_) flush();
    return stack_.row(cols_ + fill_++);
  }

  void finish() {
    if (fill_ > 0) flush();
  }

  Eigen::MatrixXd r() const { return stack_.topRows(cols_).triangularView<Eigen::Upper>(); }
  const Eigen::VectorXd& column_sq_norms() const { return col_sq_; }

 private:
  void flush() {
    const Eigen::Index rows = cols_ + fill_;
    auto active = stack_.topRows(rows);
    col_sq_ += stack_.middleRows(cols_, fill_).colwise().squaredNorm().transpose();
    Eigen::HouseholderQR<Eigen::Ref<Eigen::MatrixXd>> qr(active);
    Eigen::MatrixXd rr = qr.matrixQR().topRows(std::min(rows, cols_)).triangularView<Eigen::Upper>();
    stack_.topRows(cols_).setZero();
    stack_.topRows(rr.rows()) = rr;
    stack_.middleRows(cols_, block_).setZero();
    fill_ = 0;
  }

  Eigen::Index cols_;
  Eigen::Index block_;
  Eigen::Index fill_ = 0;
  Eigen::MatrixXd stack_;
  Eigen::VectorXd col_sq_;
};

struct EquationSolution {
  Eigen::VectorXd coef;
  Eigen::VectorXd se;
  double resid_var = 0.0;
};

/// Least squares from the R factor of [X | y]: X occupies columns [0, k),
/// y is column `target`. Only the leading k x k block of R is used.
inline EquationSolution solve_from_r(const Eigen::MatrixXd& r, Eigen::Index k, Eigen::Index target,
                                     std::size_t n_obs, bool with_se) {
  EquationSolution out;
  const auto rk = r.topLeftCorner(k, k).triangularView<Eigen::Upper>();
  out.coef = rk.solve(r.col(target).head(k));
  // Residual sum of squares: the part of Q'y outside the span of X.
  const double rss = r.col(target).segment(k, target - k + 1).squaredNorm();
  const double dof = static_cast<double>(n_obs) - static_cast<double>(k);
  out.resid_var = rss / dof;
  if (with_se) {
    const Eigen::MatrixXd rinv = rk.solve(Eigen::MatrixXd::Identity(k, k));
    out.se = rinv.rowwise().norm() * std::sqrt(out.resid_var);
  }
  return out;
}

}  // namespace detail

/// OLS estimate of the model from aligned (dp, v) pairs. Both equations come
/// from a single orthogonal factorization of the augmented design
/// [volume-equation regressors | v_t | dp_t]: the volume equation's regressors
/// are exactly the price equation's minus the contemporaneous volume.
inline LinearModel fit(const RegressionDataset& data, std::size_t p, ModelKind kind,
                       const FitOptions& options = {}) {
  if (p == 0) throw InvalidArgument("fit: lag order p must be >= 1");
  if (data.dp.size() != data.v.size()) throw InvalidArgument("fit: dp and v lengths differ");
  const std::size_t len = data.size();
  const std::size_t lag_blocks = kind == ModelKind::Hasbrouck ? 2 : 1;
  const std::size_t m = lag_blocks * p;  // volume-equation regressors
  if (len <= 2 * p + 1 || len - p <= m + 1)
    throw InsufficientData("fit: " + std::to_string(len) + " observations are too few for p=" +
                           std::to_string(p));
  const std::size_t n_obs = len - p;

  const auto cols = static_cast<Eigen::Index>(m + 2);
  const auto block = options.block_rows ? static_cast<Eigen::Index>(options.block_rows) : 4 * cols;
  detail::StreamingQR qr(cols, block);
  for (std::size_t t = p; t < len; ++t) {
    auto row = qr.next_row();
    Eigen::Index j = 0;
    if (kind == ModelKind::Hasbrouck)
      for (std::size_t i = 1; i <= p; ++i) row[j++] = data.dp[t - i];
    for (std::size_t i = 1; i <= p; ++i) row[j++] = data.v[t - i];
    row[j++] = data.v[t];
    row[j] = data.dp[t];
  }
  qr.finish();
  const Eigen::MatrixXd r = qr.r();

  // Rank check, relative to each column's own norm.
  const auto& sq = qr.column_sq_norms();
  for (Eigen::Index j = 0; j <= static_cast<Eigen::Index>(m); ++j) {
    const double norm = std::sqrt(sq[j]);
    if (norm == 0.0 || std::abs(r(j, j)) <= 1e-10 * norm) {
      std::string block;
      if (j == static_cast<Eigen::Index>(m)) block = "contemporaneous volume";
      else if (kind == ModelKind::Hasbrouck && j < static_cast<Eigen::Index>(p)) block = "price-change lags";
      else block = "volume lags";
      throw RankDeficient(block, "fit: design is rank deficient in the " + block + " block (column " +
                                     std::to_string(j) + ")");
    }
  }

  const auto mk = static_cast<Eigen::Index>(m);
  auto solve_v = [&] { return detail::solve_from_r(r, mk, mk, n_obs, options.standard_errors); };
  auto solve_dp = [&] { return detail::solve_from_r(r, mk + 1, mk + 1, n_obs, options.standard_errors); };
  detail::EquationSolution sv, sdp;
  if (options.parallel) {
    auto fut = std::async(std::launch::async, solve_v);
    sdp = solve_dp();
    sv = fut.get();
  } else {
    sv = solve_v();
    sdp = solve_dp();
  }

  auto model = LinearModel::zeros(kind, p);
  model.n_obs = n_obs;
  model.resid_var_v = sv.resid_var;
  model.resid_var_dp = sdp.resid_var;
  const bool se = options.standard_errors;
  if (se) {
    model.se_a.assign(p, 0.0);
    model.se_b.assign(p + 1, 0.0);
    model.se_c.assign(p, 0.0);
    model.se_d.assign(p, 0.0);
  }
  const std::size_t off = kind == ModelKind::Hasbrouck ? p : 0;
  for (std::size_t i = 0; i < p; ++i) {
    if (kind == ModelKind::Hasbrouck) {
      model.a[i] = sdp.coef[i];
      model.c[i] = sv.coef[i];
      if (se) {
        model.se_a[i] = sdp.se[i];
        model.se_c[i] = sv.se[i];
      }
    }
    model.b[i + 1] = sdp.coef[off + i];
    model.d[i] = sv.coef[off + i];
    if (se) {
      model.se_b[i + 1] = sdp.se[off + i];
      model.se_d[i] = sv.se[off + i];
    }
  }
  model.b[0] = sdp.coef[mk];
  if (se) model.se_b[0] = sdp.se[mk];
  return model;
}

enum class CoefficientArray { A, B, C, D };

/// Running partial sums; for b the sum starts at b_1 (b_0 excluded).
inline std::vector<double> cumulative_coefficients(const LinearModel& model, CoefficientArray which) {
  std::span<const double> src;
  switch (which) {
    case CoefficientArray::A: src = model.a; break;
    case CoefficientArray::B: src = std::span<const double>(model.b).subspan(std::min<std::size_t>(1, model.b.size())); break;
    case CoefficientArray::C: src = model.c; break;
    case CoefficientArray::D: src = model.d; break;
  }
  std::vector<double> out(src.size());
  std::partial_sum(src.begin(), src.end(), out.begin());
  return out;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

struct SimulationNoise {
  double sigma_dp = 1.0;
  double sigma_v = 1.0;
};

/// Draws n observations from the structural model with independent Gaussian
/// innovations, after `burn_in` discarded steps (default 10p).
inline RegressionDataset simulate(const LinearModel& model, std::size_t n, std::uint64_t seed,
                                  SimulationNoise noise = {}, std::size_t burn_in = static_cast<std::size_t>(-1)) {
  model.validate();
  const std::size_t p = model.p;
  if (burn_in == static_cast<std::size_t>(-1)) burn_in = 10 * p;
  auto rng = detail::make_engine(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Histories, newest first after rotation: hist[(head + i - 1) % p] is lag i.
  std::vector<double> hdp(p, 0.0), hv(p, 0.0);
  std::size_t head = 0;
  RegressionDataset out;
  out.convention = model.kind == ModelKind::TIM ? PriceConvention::PreTrade : PriceConvention::PostTrade;
  out.dp.reserve(n);
  out.v.reserve(n);
  const bool hasb = model.kind == ModelKind::Hasbrouck;
  for (std::size_t t = 0; t < n + burn_in; ++t) {
    double v = noise.sigma_v * gauss(rng);
    double dp = noise.sigma_dp * gauss(rng);
    for (std::size_t i = 1; i <= p; ++i) {
      const std::size_t idx = (head + i - 1) % p;
      v += model.d[i - 1] * hv[idx];
      dp += model.b[i] * hv[idx];
      if (hasb) {
        v += model.c[i - 1] * hdp[idx];
        dp += model.a[i - 1] * hdp[idx];
      }
    }
    dp += model.b[0] * v;
    head = (head + p - 1) % p;
    hv[head] = v;
    hdp[head] = dp;
    if (!std::isfinite(v) || !std::isfinite(dp)) throw NonStationary("simulate: path diverged");
    if (t >= burn_in) {
      out.dp.push_back(dp);
      out.v.push_back(v);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Companion form
// ---------------------------------------------------------------------------

/// State z_t = (dp_t, v_t, dp_{t-1}, v_{t-1}, ..., dp_{t-p+1}, v_{t-p+1}).
/// Gamma has two dense rows (the reduced-form dp and v equations, with the
/// contemporaneous b_0 v_t substituted out) and a shift structure below.
/// Products and solves are O(p); the dense matrix is built only on request.
class CompanionSystem {
 public:
  CompanionSystem() = default;

  explicit CompanionSystem(const LinearModel& model) : p_(model.p), b0_(model.b[0]) {
    model.validate();
    row0_.assign(2 * p_, 0.0);
    row1_.assign(2 * p_, 0.0);
    for (std::size_t i = 0; i < p_; ++i) {
      row1_[2 * i] = model.c[i];
      row1_[2 * i + 1] = model.d[i];
      row0_[2 * i] = model.a[i] + b0_ * model.c[i];
      row0_[2 * i + 1] = model.b[i + 1] + b0_ * model.d[i];
    }
    sum_d_ = model.sum_d();
    spectral_radius_ = compute_spectral_radius();
  }

  std::size_t p() const { return p_; }
  std::size_t dim() const { return 2 * p_; }
  double b0() const { return b0_; }
  double spectral_radius() const { return spectral_radius_; }
  double sum_d() const { return sum_d_; }
  std::span<const double> dp_row() const { return row0_; }
  std::span<const double> v_row() const { return row1_; }

  Eigen::VectorXd e1() const {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim());
    e[0] = 1.0;
    return e;
  }
  Eigen::VectorXd e2() const {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim());
    e[0] = b0_;
    e[1] = 1.0;
    return e;
  }

  Eigen::MatrixXd gamma() const {
    const auto n = static_cast<Eigen::Index>(dim());
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      g(0, j) = row0_[j];
      g(1, j) = row1_[j];
    }
    for (Eigen::Index j = 2; j < n; ++j) g(j, j - 2) = 1.0;
    return g;
  }

  /// out = Gamma * x (out must not alias x).
  void apply(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
    const std::size_t n = dim();
    out.resize(static_cast<Eigen::Index>(n));
    double s0 = 0.0, s1 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      s0 += row0_[j] * x[j];
      s1 += row1_[j] * x[j];
    }
    for (std::size_t j = n - 1; j >= 2; --j) out[j] = x[j - 2];
    out[0] = s0;
    out[1] = s1;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    Eigen::VectorXd out;
    apply(x, out);
    return out;
  }

  /// out = Gamma' * y.
  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& y) const {
    const std::size_t n = dim();
    Eigen::VectorXd out(static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j)
      out[j] = row0_[j] * y[0] + row1_[j] * y[1] + (j + 2 < n ? y[j + 2] : 0.0);
    return out;
  }

  /// Solves (I - Gamma) x = y in O(p). The shift rows give
  /// x_j = x_{j mod 2} + (prefix sum of y over same-parity indices), leaving a
  /// 2x2 system for (x_0, x_1).
  Eigen::VectorXd solve_identity_minus(const Eigen::VectorXd& y) const {
    const std::size_t n = dim();
    Eigen::VectorXd prefix(static_cast<Eigen::Index>(n));
    prefix[0] = 0.0;
    prefix[1] = 0.0;
    for (std::size_t j = 2; j < n; ++j) prefix[j] = prefix[j - 2] + y[j];
    // Row r: x_r - sum_j row_r[j] (x_{j%2} + prefix_j) = y_r
    double m00 = 1.0, m01 = 0.0, m10 = 0.0, m11 = 1.0, r0 = y[0], r1 = y[1];
    for (std::size_t j = 0; j < n; ++j) {
      if (j % 2 == 0) {
        m00 -= row0_[j];
        m10 -= row1_[j];
      } else {
        m01 -= row0_[j];
        m11 -= row1_[j];
      }
      r0 += row0_[j] * prefix[j];
      r1 += row1_[j] * prefix[j];
    }
    const auto [x0, x1] = solve2(m00, m01, m10, m11, r0, r1);
    Eigen::VectorXd x(static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) x[j] = (j % 2 == 0 ? x0 : x1) + prefix[j];
    return x;
  }

  /// Solves (I - Gamma)' x = y in O(p) by same-parity suffix sums.
  Eigen::VectorXd solve_identity_minus_transpose(const Eigen::VectorXd& y) const {
    const std::size_t n = dim();
    // x_j = Y_j + R0_j x_0 + R1_j x_1 with suffix sums over j, j+2, ...
    std::vector<double> ys(n), r0s(n), r1s(n);
    for (std::size_t jj = n; jj-- > 0;) {
      const bool tail = jj + 2 < n;
      ys[jj] = y[jj] + (tail ? ys[jj + 2] : 0.0);
      r0s[jj] = row0_[jj] + (tail ? r0s[jj + 2] : 0.0);
      r1s[jj] = row1_[jj] + (tail ? r1s[jj + 2] : 0.0);
    }
    const auto [x0, x1] = solve2(1.0 - r0s[0], -r1s[0], -r0s[1], 1.0 - r1s[1], ys[0], ys[1]);
    Eigen::VectorXd x(static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) x[j] = ys[j] + r0s[j] * x0 + r1s[j] * x1;
    return x;
  }

 private:
  static std::pair<double, double> solve2(double a, double b, double c, double d, double r0, double r1) {
    const double det = a * d - b * c;
    const double scale = std::max({std::abs(a * d), std::abs(b * c), 1e-300});
    if (std::abs(det) <= 1e-14 * scale || det == 0.0)
      throw NonStationary("I - Gamma is singular (unit root in the companion system)");
    return {(r0 * d - b * r1) / det, (a * r1 - c * r0) / det};
  }

  double compute_spectral_radius() const {
    const std::size_t n = dim();
    bool all_zero = std::all_of(row0_.begin(), row0_.end(), [](double x) { return x == 0.0; }) &&
                    std::all_of(row1_.begin(), row1_.end(), [](double x) { return x == 0.0; });
    if (all_zero) return 0.0;
    if (p_ <= 64) {
      Eigen::EigenSolver<Eigen::MatrixXd> es(gamma(), /*computeEigenvectors=*/false);
      return es.eigenvalues().cwiseAbs().maxCoeff();
    }
    // Power iteration. With a complex dominant pair the Rayleigh-style ratio
    // oscillates, so the estimate is the geometric mean growth over a window.
    constexpr int kMaxIter = 10'000;
    constexpr int kWindow = 50;
    constexpr double kTol = 1e-12;
    Eigen::VectorXd x = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / std::sqrt(double(n)));
    x[0] += 0.3;  // break symmetry
    x.normalize();
    Eigen::VectorXd y;
    std::vector<double> log_growth;
    log_growth.reserve(kMaxIter);
    double estimate = 0.0, previous = -1.0;
    for (int it = 0; it < kMaxIter; ++it) {
      apply(x, y);
      const double norm = y.norm();
      if (norm == 0.0) return 0.0;
      log_growth.push_back(std::log(norm));
      x = y / norm;
      if (log_growth.size() >= static_cast<std::size_t>(kWindow) && (it + 1) % kWindow == 0) {
        const double s = std::accumulate(log_growth.end() - kWindow, log_growth.end(), 0.0);
        estimate = std::exp(s / kWindow);
        if (previous > 0.0 && std::abs(estimate - previous) <= kTol * std::max(1.0, estimate)) break;
        previous = estimate;
      }
    }
    return estimate;
  }

  std::size_t p_ = 0;
  double b0_ = 0.0;
  std::vector<double> row0_, row1_;
  double sum_d_ = 0.0;
  double spectral_radius_ = 0.0;
};

inline CompanionSystem companion(const LinearModel& model) { return CompanionSystem(model); }

struct StationarityReport {
  double spectral_radius = 0.0;
  double sum_d = 0.0;
  bool is_stationary = true;
};

inline StationarityReport stationarity_report(const CompanionSystem& cs) {
  constexpr double kEps = 1e-10;
  return {cs.spectral_radius(), cs.sum_d(), cs.spectral_radius() < 1.0 - kEps};
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

inline void write_model(std::ostream& os, const LinearModel& m) {
  using detail::format_double;
  os << "# kind=" << to_string(m.kind) << '\n'
     << "# p=" << m.p << '\n'
     << "# n_obs=" << m.n_obs << '\n'
     << "# resid_var_dp=" << format_double(m.resid_var_dp) << '\n'
     << "# resid_var_v=" << format_double(m.resid_var_v) << '\n';
  const bool se = !m.se_b.empty();
  os << "lag,a,b,c,d";
  if (se) os << ",se_a,se_b,se_c,se_d";
  os << '\n';
  for (std::size_t lag = 0; lag <= m.p; ++lag) {
    auto at = [&](const std::vector<double>& v, bool lagged) {
      if (lagged) return lag == 0 ? 0.0 : v[lag - 1];
      return v[lag];
    };
    os << lag << ',' << format_double(at(m.a, true)) << ',' << format_double(at(m.b, false)) << ','
       << format_double(at(m.c, true)) << ',' << format_double(at(m.d, true));
    if (se)
      os << ',' << format_double(at(m.se_a, true)) << ',' << format_double(at(m.se_b, false)) << ','
         << format_double(at(m.se_c, true)) << ',' << format_double(at(m.se_d, true));
    os << '\n';
  }
}

inline LinearModel read_model(std::istream& is) {
  std::string line;
  std::size_t line_no = 0;
  std::optional<ModelKind> kind;
  std::optional<std::size_t> p;
  LinearModel m;
  bool header_seen = false;
  bool with_se = false;
  std::size_t next_lag = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto s = detail::trim(line);
    if (s.empty()) continue;
    if (s.front() == '#') {
      const auto eq = s.find('=');
      if (eq == std::string_view::npos) continue;
      const auto key = detail::trim(s.substr(1, eq - 1));
      const auto val = detail::trim(s.substr(eq + 1));
      if (key == "kind") kind = parse_model_kind(val);
      else if (key == "p") {
        const auto v = detail::parse_int(val);
        if (!v || *v < 1) throw ParseError(line_no, "bad p");
        p = static_cast<std::size_t>(*v);
      } else if (key == "n_obs") {
        const auto v = detail::parse_int(val);
        if (!v || *v < 0) throw ParseError(line_no, "bad n_obs");
        m.n_obs = static_cast<std::size_t>(*v);
      } else if (key == "resid_var_dp" || key == "resid_var_v") {
        const auto v = detail::parse_double(val);
        if (!v) throw ParseError(line_no, "bad residual variance");
        (key == "resid_var_dp" ? m.resid_var_dp : m.resid_var_v) = *v;
      }
      continue;
    }
    if (!header_seen) {
      if (!kind || !p) throw ParseError(line_no, "model file lacks kind/p metadata");
      const auto meta = m;
      m = LinearModel::zeros(*kind, *p);
      m.n_obs = meta.n_obs;
      m.resid_var_dp = meta.resid_var_dp;
      m.resid_var_v = meta.resid_var_v;
      header_seen = true;
      with_se = detail::split(s, ',').size() == 9;
      if (with_se) {
        m.se_a.assign(*p, 0.0);
        m.se_b.assign(*p + 1, 0.0);
        m.se_c.assign(*p, 0.0);
        m.se_d.assign(*p, 0.0);
      }
      continue;
    }
    const auto cols = detail::split(s, ',');
    if (cols.size() != (with_se ? 9u : 5u)) throw ParseError(line_no, "wrong column count");
    std::vector<double> vals;
    for (auto c : cols) {
      const auto v = detail::parse_double(c);
      if (!v) throw ParseError(line_no, "non-numeric coefficient");
      vals.push_back(*v);
    }
    const auto lag = static_cast<std::size_t>(vals[0]);
    if (lag != next_lag || lag > m.p) throw ParseError(line_no, "lags must run 0..p in order");
    ++next_lag;
    m.b[lag] = vals[2];
    if (with_se) m.se_b[lag] = vals[6];
    if (lag > 0) {
      m.a[lag - 1] = vals[1];
      m.c[lag - 1] = vals[3];
      m.d[lag - 1] = vals[4];
      if (with_se) {
        m.se_a[lag - 1] = vals[5];
        m.se_c[lag - 1] = vals[7];
        m.se_d[lag - 1] = vals[8];
      }
    }
  }
  if (!header_seen || next_lag != m.p + 1) throw ParseError(line_no, "model file is truncated");
  m.validate();
  return m;
}

}  // namespace mimpact
