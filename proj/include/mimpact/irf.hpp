#pragma once

// Impulse responses and expected metaorder price paths for linear models.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "mimpact/detail/text.hpp"
#include "mimpact/error.hpp"
#include "mimpact/linmodels.hpp"

namespace mimpact {

/// kappa = 1 (VolumeCoupled): child orders enter the order-flow recursion and
/// trigger further volume. kappa = 0 (PriceOnly): the flow is exactly the
/// child orders.
enum class VolumeRouting { VolumeCoupled, PriceOnly };

struct MetaorderSpec {
  double child_size = 1.0;  // signed shares per trade
  std::size_t duration = 1;  // T child orders, at t = 1..T
  std::size_t horizon = 1;
  VolumeRouting kappa = VolumeRouting::VolumeCoupled;

  void validate() const {
    if (duration < 1) throw InvalidArgument("metaorder: duration T must be >= 1");
    if (horizon < duration) throw InvalidArgument("metaorder: horizon must be >= T");
    if (child_size == 0.0 || !std::isfinite(child_size))
      throw InvalidArgument("metaorder: child_size must be finite and nonzero");
  }
};

/// Expected price (relative to p_0 = 0) and order flow at k = 0..horizon.
struct Trajectory {
  std::vector<std::int64_t> times;
  std::vector<double> price;
  std::vector<double> volume;
  MetaorderSpec meta;
  std::vector<std::pair<std::string, std::string>> tags;  // emitted as '# key=value'

  std::size_t size() const { return price.size(); }

  static Trajectory zeros(const MetaorderSpec& meta) {
    Trajectory t;
    t.meta = meta;
    t.times.resize(meta.horizon + 1);
    for (std::size_t k = 0; k <= meta.horizon; ++k) t.times[k] = static_cast<std::int64_t>(k);
    t.price.assign(meta.horizon + 1, 0.0);
    t.volume.assign(meta.horizon + 1, 0.0);
    return t;
  }
};

namespace detail {

inline void require_stationary(const CompanionSystem& cs, const char* what) {
  if (!stationarity_report(cs).is_stationary)
    throw NonStationary(std::string(what) + ": companion system is not stationary (spectral radius " +
                        format_double(cs.spectral_radius()) +
                        "); (I - Gamma)^-1 does not exist, use trajectory_iter instead");
}

inline std::vector<std::pair<std::string, std::string>> model_tags(const std::string& kind, std::size_t p,
                                                                   const MetaorderSpec& m) {
  return {{"model", kind},
          {"p", std::to_string(p)},
          {"T", std::to_string(m.duration)},
          {"delta_v", format_double(m.child_size)},
          {"kappa", m.kappa == VolumeRouting::VolumeCoupled ? "1" : "0"}};
}

}  // namespace detail

/// e1' Gamma^h e2 * shock: the price change h trades after a unit structural
/// volume shock.
inline double standard_irf(const CompanionSystem& cs, std::size_t h, double shock) {
  Eigen::VectorXd w = cs.e2(), tmp;
  for (std::size_t i = 0; i < h; ++i) {
    cs.apply(w, tmp);
    w.swap(tmp);
  }
  return w[0] * shock;
}

/// Closed-form path. During execution
///   p_k = delta [k r'e2 - s'e2 + s' Gamma^k e2],  r' = e1'(I-G)^-1, s' = r'G(I-G)^-1,
/// and afterwards, with z_T = delta (I-G)^-1 (I - G^T) e2 and q' = e1'G(I-G)^-1,
///   p_{T+k} = p_T + q'z_T - q' Gamma^k z_T.
/// Inverses are applied through O(p) structured solves and powers through
/// repeated products, so no 2p x 2p matrix is formed.
inline Trajectory trajectory_closed(const CompanionSystem& cs, const MetaorderSpec& meta) {
  meta.validate();
  if (meta.kappa != VolumeRouting::VolumeCoupled)
    throw InvalidArgument("trajectory_closed: only the volume-coupled metaorder has a closed form");
  detail::require_stationary(cs, "trajectory_closed");

  const double delta = meta.child_size;
  const std::size_t T = meta.duration;
  const Eigen::VectorXd e1 = cs.e1(), e2 = cs.e2();
  Eigen::VectorXd ev = Eigen::VectorXd::Zero(e1.size());
  ev[1] = 1.0;

  const Eigen::VectorXd r = cs.solve_identity_minus_transpose(e1);
  const Eigen::VectorXd s = cs.solve_identity_minus_transpose(cs.apply_transpose(r));
  const Eigen::VectorXd q = cs.solve_identity_minus_transpose(cs.apply_transpose(e1));
  const Eigen::VectorXd u = cs.solve_identity_minus_transpose(ev);  // volume selector
  const double re2 = r.dot(e2), se2 = s.dot(e2), ue2 = u.dot(e2);

  Trajectory out = Trajectory::zeros(meta);
  out.tags = detail::model_tags("companion", cs.p(), meta);

  Eigen::VectorXd w = e2, tmp;  // Gamma^k e2
  for (std::size_t k = 1; k <= T; ++k) {
    cs.apply(w, tmp);
    w.swap(tmp);
    out.price[k] = delta * (static_cast<double>(k) * re2 - se2 + s.dot(w));
    // v_k = e_v' z_k with z_k = delta (I-G)^-1 (I - G^k) e2.
    out.volume[k] = delta * (ue2 - u.dot(w));
  }
  // Here w = Gamma^T e2.
  Eigen::VectorXd y = cs.solve_identity_minus(e2 - w) * delta;  // z_T
  const double pT = out.price[T];
  const double qz = q.dot(y);
  for (std::size_t k = 1; T + k <= meta.horizon; ++k) {
    cs.apply(y, tmp);
    y.swap(tmp);
    out.price[T + k] = pT + qz - q.dot(y);
    out.volume[T + k] = y[1];
  }
  return out;
}

/// Deterministic skeleton of the structural recursion with O(p) work per step.
inline Trajectory trajectory_iter(const LinearModel& model, const MetaorderSpec& meta) {
  meta.validate();
  model.validate();
  const std::size_t p = model.p;
  const bool coupled = meta.kappa == VolumeRouting::VolumeCoupled;
  const bool hasb = model.kind == ModelKind::Hasbrouck;

  // Ring buffers: lag i sits at (head + i - 1) % p.
  std::vector<double> hv(p, 0.0), hdp(p, 0.0);
  std::size_t head = 0;
  Trajectory out = Trajectory::zeros(meta);
  out.tags = detail::model_tags(to_string(model.kind), p, meta);
  for (std::size_t t = 1; t <= meta.horizon; ++t) {
    double v = t <= meta.duration ? meta.child_size : 0.0;
    double dp = 0.0;
    for (std::size_t i = 1; i <= p; ++i) {
      const std::size_t idx = (head + i - 1) % p;
      dp += model.b[i] * hv[idx];
      if (hasb) dp += model.a[i - 1] * hdp[idx];
      if (coupled) {
        v += model.d[i - 1] * hv[idx];
        if (hasb) v += model.c[i - 1] * hdp[idx];
      }
    }
    dp += model.b[0] * v;
    head = (head + p - 1) % p;
    hv[head] = v;
    hdp[head] = dp;
    out.price[t] = out.price[t - 1] + dp;
    out.volume[t] = v;
  }
  return out;
}

struct ConcavityFlags {
  std::vector<bool> during;  // k = 0..T:  e1' G^{k+1} e2 > 0
  std::vector<bool> after;   // k = 0..horizon-T-1:  e1' G^{k+1} (I - G^T) e2 < 0
  std::vector<double> during_products;
  std::vector<double> after_products;
};

/// Sign conditions on the increments of the closed-form path. For a buy
/// order (delta > 0) the second difference p_{k+2} - 2p_{k+1} + p_k equals
/// delta * during_products[k] while k + 2 <= T, and
/// p_{T+k+2} - 2p_{T+k+1} + p_{T+k} equals -delta * after_products[k].
inline ConcavityFlags concavity_flags(const CompanionSystem& cs, const MetaorderSpec& meta) {
  meta.validate();
  detail::require_stationary(cs, "concavity_flags");
  const std::size_t T = meta.duration;
  ConcavityFlags out;
  Eigen::VectorXd w = cs.e2(), tmp;
  Eigen::VectorXd w_T;
  for (std::size_t k = 0; k <= T; ++k) {
    cs.apply(w, tmp);
    w.swap(tmp);  // Gamma^{k+1} e2
    if (k + 1 == T) w_T = w;
    out.during_products.push_back(w[0]);
    out.during.push_back(w[0] > 0.0);
  }
  Eigen::VectorXd y = cs.e2() - w_T;  // (I - G^T) e2
  for (std::size_t k = 0; T + k < meta.horizon; ++k) {
    cs.apply(y, tmp);
    y.swap(tmp);
    out.after_products.push_back(y[0]);
    out.after.push_back(y[0] < 0.0);
  }
  return out;
}

struct ImpactMetrics {
  double peak = 0.0;
  double long_term = 0.0;
  std::optional<double> reversion_ratio;  // empty when the peak is zero
};

inline ImpactMetrics impact_metrics(const Trajectory& traj) {
  const std::size_t T = traj.meta.duration;
  const std::size_t H = traj.price.size() - 1;
  if (traj.price.empty() || H <= T) throw InvalidArgument("impact_metrics: horizon must exceed T");
  ImpactMetrics m;
  m.peak = traj.price[T];
  m.long_term = traj.price[H];
  if (m.peak != 0.0) m.reversion_ratio = (m.peak - m.long_term) / m.peak;
  return m;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  for (const auto& [k, v] : traj.tags) os << "# " << k << '=' << v << '\n';
  os << "k,price,volume\n";
  for (std::size_t i = 0; i < traj.price.size(); ++i)
    os << traj.times[i] << ',' << detail::format_double(traj.price[i]) << ','
       << detail::format_double(traj.volume[i]) << '\n';
}

}  // namespace mimpact
