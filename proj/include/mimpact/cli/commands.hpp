#pragma once

// One function per command block. Each writes its CSV artifacts into the
// output directory; the sweep reuses the *_metrics helpers per grid cell.

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "mimpact/cli/config.hpp"
#include "mimpact/cli/manifest.hpp"
#include "mimpact/detail/text.hpp"
#include "mimpact/diffusivity.hpp"
#include "mimpact/irf.hpp"
#include "mimpact/linmodels.hpp"
#include "mimpact/marketdata.hpp"
#include "mimpact/mtim_continuous.hpp"
#include "mimpact/mtim_discrete.hpp"

namespace mimpact::cli {

/// A library error tagged with the module that raised it.
class ModuleError : public std::runtime_error {
 public:
  ModuleError(std::string module, const std::string& what)
      : std::runtime_error(what.rfind(module + ":", 0) == 0 ? what : module + ": " + what), module_(std::move(module)) {}
  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

template <class F>
auto in_module(const char* module, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const mimpact::Error& e) {
    throw ModuleError(module, e.what());
  }
}

using Metrics = std::map<std::string, std::optional<double>>;

inline std::string fmt(double x) { return detail::format_double(x); }
inline std::string fmt(const std::optional<double>& x) { return x ? fmt(*x) : "NA"; }

inline Metrics impact_metric_map(const ImpactMetrics& m) {
  return {{"peak", m.peak}, {"long_term", m.long_term}, {"reversion_ratio", m.reversion_ratio}};
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

struct ResolvedModel {
  LinearModel model;
  bool fitted = false;
};

inline ResolvedModel resolve_model(const ModelSource& src, std::uint64_t seed) {
  ResolvedModel r;
  if (const auto* path = std::get_if<fs::path>(&src.source)) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("model.file", "cannot open " + path->string());
    r.model = in_module("linmodels", [&] { return read_model(in); });
  } else if (const auto* m = std::get_if<LinearModel>(&src.source)) {
    r.model = *m;
  } else {
    const auto& g = std::get<ModelSource::PowerLaw>(src.source);
    r.model = in_module("linmodels", [&] { return power_law_tim(g.p, g.d_sum, g.d_exponent, g.b_exponent, g.b_scale); });
  }
  in_module("linmodels", [&] { r.model.validate(); });
  if (src.fit) {
    r.model = in_module("linmodels", [&] {
      const auto data = simulate(r.model, src.fit->n, seed);
      return fit(data, src.fit->p, src.fit->kind);
    });
    r.fitted = true;
  }
  return r;
}

inline std::string stationarity_text(const LinearModel& m) {
  const auto rep = stationarity_report(companion(m));
  return "spectral_radius=" + fmt(rep.spectral_radius) + "\nsum_d=" + fmt(rep.sum_d) +
         "\nis_stationary=" + (rep.is_stationary ? "true" : "false") + "\n";
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

inline void run_ingest(const IngestConfig& c, std::uint64_t seed, const OutputDir& out) {
  EventSeries series;
  if (c.lmf) {
    auto p = *c.lmf;
    p.seed = seed;
    series = in_module("marketdata", [&] { return synth_lmf_orderflow(p); });
  } else {
    std::ifstream msg(*c.messages), book(*c.orderbook);
    if (!msg) throw ConfigError("ingest.messages", "cannot open " + c.messages->string());
    if (!book) throw ConfigError("ingest.orderbook", "cannot open " + c.orderbook->string());
    series = in_module("marketdata", [&] { return parse_trade_file(msg, book, TradeFormat::LobsterMessages, c.lobster); });
  }
  in_module("marketdata", [&] {
    if (c.merge) series = merge_same_timestamp(series);
    if (c.clip_head.count() > 0 || c.clip_tail.count() > 0) series = clip_session(series, c.clip_head, c.clip_tail);
  });
  std::ostringstream ev;
  write_event_csv(ev, series);
  out.write("events.csv", ev.str());

  const auto& d = series.diagnostics;
  std::ostringstream diag;
  diag << "asset_id=" << series.asset_id << "\nticks=" << series.size() << "\nexecution_rows=" << d.execution_rows
       << "\nrejected_missing_quote=" << d.rejected_missing_quote
       << "\ndropped_outside_session=" << d.dropped_outside_session << "\nfiltered_out=" << d.filtered_out
       << "\nempty_window=" << (d.empty_window ? "true" : "false") << "\n";
  out.write("diagnostics.txt", diag.str());

  if (series.size() >= 2) {
    const auto ds = in_module("marketdata", [&] { return price_changes(series, c.convention); });
    std::ostringstream os;
    write_dataset_csv(os, ds);
    out.write("dataset.csv", os.str());
  }
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

inline void run_calibrate(const CalibrateConfig& c, std::uint64_t seed, const OutputDir& out) {
  RegressionDataset data;
  if (c.data) {
    std::ifstream in(*c.data);
    if (!in) throw ConfigError("calibrate.data", "cannot open " + c.data->string());
    data = in_module("marketdata", [&] { return read_dataset_csv(in); });
  } else {
    const auto src = resolve_model(*c.simulate_from, detail::stream_seed(seed, 1));
    data = in_module("linmodels", [&] { return simulate(src.model, c.n, seed); });
  }
  FitOptions opts;
  opts.standard_errors = c.standard_errors;
  const auto model = in_module("linmodels", [&] { return fit(data, c.p, c.kind, opts); });
  std::ostringstream ms;
  write_model(ms, model);
  out.write("model.csv", ms.str());
  out.write("stationarity.txt", in_module("linmodels", [&] { return stationarity_text(model); }));

  const auto A = cumulative_coefficients(model, CoefficientArray::A), B = cumulative_coefficients(model, CoefficientArray::B),
             C = cumulative_coefficients(model, CoefficientArray::C), D = cumulative_coefficients(model, CoefficientArray::D);
  std::ostringstream cs;
  cs << "lag,A,B,C,D\n";
  for (std::size_t i = 0; i < model.p; ++i)
    cs << i + 1 << ',' << fmt(A[i]) << ',' << fmt(B[i]) << ',' << fmt(C[i]) << ',' << fmt(D[i]) << '\n';
  out.write("cumulative.csv", cs.str());
}

// ---------------------------------------------------------------------------
// trajectory
// ---------------------------------------------------------------------------

inline Trajectory compute_trajectory(const LinearModel& model, const MetaorderSpec& meta, TrajectoryConfig::Method method,
                                     std::string* used = nullptr) {
  return in_module("irf", [&] {
    const auto cs = companion(model);
    bool closed = method == TrajectoryConfig::Method::Closed;
    if (method == TrajectoryConfig::Method::Auto)
      closed = meta.kappa == VolumeRouting::VolumeCoupled && stationarity_report(cs).is_stationary;
    if (used) *used = closed ? "closed" : "iter";
    return closed ? trajectory_closed(cs, meta) : trajectory_iter(model, meta);
  });
}

inline MetaorderSpec make_meta(const TrajectoryConfig& c, double delta, int kappa) {
  MetaorderSpec m;
  m.child_size = delta;
  m.duration = c.T;
  m.horizon = c.horizon;
  m.kappa = kappa ? VolumeRouting::VolumeCoupled : VolumeRouting::PriceOnly;
  return m;
}

inline void run_trajectory(const TrajectoryConfig& c, std::uint64_t seed, const OutputDir& out) {
  const auto rm = resolve_model(c.model, seed);
  if (rm.fitted) {
    std::ostringstream ms;
    write_model(ms, rm.model);
    out.write("model.csv", ms.str());
  }
  out.write("stationarity.txt", in_module("linmodels", [&] { return stationarity_text(rm.model); }));
  std::ostringstream metrics;
  metrics << "delta_v,kappa,method,peak,long_term,reversion_ratio\n";
  for (double delta : c.delta_v)
    for (int kappa : c.kappa) {
      std::string method;
      const auto tr = compute_trajectory(rm.model, make_meta(c, delta, kappa), c.method, &method);
      std::ostringstream os;
      write_trajectory_csv(os, tr);
      out.write("trajectory_dv" + fmt(delta) + "_kappa" + std::to_string(kappa) + ".csv", os.str());
      if (c.horizon > c.T) {
        const auto m = impact_metrics(tr);
        metrics << fmt(delta) << ',' << kappa << ',' << method << ',' << fmt(m.peak) << ',' << fmt(m.long_term) << ','
                << fmt(m.reversion_ratio) << '\n';
      } else {
        metrics << fmt(delta) << ',' << kappa << ',' << method << ',' << fmt(tr.price.back()) << ",NA,NA\n";
      }
    }
  out.write("metrics.csv", metrics.str());
}

inline Metrics trajectory_metrics(const TrajectoryConfig& c, std::uint64_t seed) {
  if (c.delta_v.size() != 1 || c.kappa.size() != 1)
    throw ConfigError("trajectory", "sweep cells need a single delta_v and kappa");
  const auto rm = resolve_model(c.model, seed);
  const auto tr = compute_trajectory(rm.model, make_meta(c, c.delta_v[0], c.kappa[0]), c.method);
  auto m = impact_metric_map(in_module("irf", [&] { return impact_metrics(tr); }));
  m["criticality_margin"] = 1.0 - companion(rm.model).spectral_radius();
  return m;
}

// ---------------------------------------------------------------------------
// continuous
// ---------------------------------------------------------------------------

inline ContinuousParams continuous_params(const ContinuousConfig& c, double alpha) {
  ContinuousParams p{alpha, c.V, c.lam, c.beta, c.rho, c.T};
  in_module("mtim-continuous", [&] { p.validate(); });
  return p;
}

inline double continuous_t_max(const ContinuousConfig& c) { return c.t_max > 0 ? c.t_max : 3.0 * c.T; }

inline Metrics continuous_metrics(const ContinuousConfig& c) {
  if (c.alpha.size() != 1) throw ConfigError("continuous.alpha", "sweep cells need a single alpha");
  const auto p = continuous_params(c, c.alpha[0]);
  return in_module("mtim-continuous", [&] {
    const double peak = price_closed(p, p.T), lt = price_closed(p, continuous_t_max(c));
    Metrics m{{"peak", peak}, {"long_term", lt}, {"reversion_ratio", std::nullopt}};
    if (peak != 0.0) m["reversion_ratio"] = (peak - lt) / peak;
    m["criticality_margin"] = 1.0 - p.lam / p.beta;
    return m;
  });
}

inline void run_continuous(const ContinuousConfig& c, const OutputDir& out) {
  const double t_max = continuous_t_max(c);
  const double dt = c.dt > 0 ? c.dt : t_max / 1000.0;
  const auto n = static_cast<std::size_t>(std::llround(t_max / dt));
  std::ostringstream summary;
  summary << "alpha,peak,long_term,reversion_ratio,asymptote,start_linear,start_quadratic,after_linear,"
             "after_quadratic,long_execution,oracle_max_rel_error\n";
  for (double alpha : c.alpha) {
    const auto p = continuous_params(c, alpha);
    in_module("mtim-continuous", [&] {
      std::ostringstream os;
      os << "t,volume,price\n";
      for (std::size_t k = 0; k <= n; ++k) {
        const double t = dt * static_cast<double>(k);
        os << fmt(t) << ',' << fmt(volume_closed(p, t)) << ',' << fmt(price_closed(p, t)) << '\n';
      }
      out.write("continuous_alpha" + fmt(alpha) + ".csv", os.str());

      std::optional<double> oracle_err;
      if (c.oracle_dt) {
        const auto sol = solve_oracle(p, *c.oracle_dt, t_max);
        std::ostringstream oc;
        oc << "t,volume,price\n";
        double err = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < sol.price.size(); ++i) {
          const double t = sol.price.time(i), ref = price_closed(p, t);
          oc << fmt(t) << ',' << fmt(sol.volume.values[i]) << ',' << fmt(sol.price.values[i]) << '\n';
          err = std::max(err, std::abs(sol.price.values[i] - ref));
          scale = std::max(scale, std::abs(ref));
        }
        out.write("oracle_alpha" + fmt(alpha) + ".csv", oc.str());
        oracle_err = scale > 0 ? err / scale : err;
      }
      const double peak = price_closed(p, p.T), lt = price_closed(p, t_max);
      const auto s = small_time_quadratic(p, TaylorSide::Start), a = small_time_quadratic(p, TaylorSide::AfterEnd);
      summary << fmt(alpha) << ',' << fmt(peak) << ',' << fmt(lt) << ','
              << fmt(peak != 0.0 ? std::optional<double>((peak - lt) / peak) : std::nullopt) << ','
              << fmt(asymptote(p)) << ',' << fmt(s.linear) << ',' << fmt(s.quadratic) << ',' << fmt(a.linear) << ','
              << fmt(a.quadratic) << ',' << (a.long_execution ? "true" : "false") << ',' << fmt(oracle_err) << '\n';
    });
  }
  out.write("summary.csv", summary.str());
}

// ---------------------------------------------------------------------------
// discrete
// ---------------------------------------------------------------------------

inline Metrics discrete_metrics(const DiscreteConfig& c, std::uint64_t seed, std::size_t workers = 1) {
  auto p = c.params;
  p.seed = seed;
  return in_module("mtim-discrete", [&] {
    Trajectory tr;
    if (c.paths >= 2) {
      const auto ens = monte_carlo(p, c.paths, workers);
      auto quiet = p;
      quiet.noise = {};
      tr = simulate(quiet);  // for the metadata; the path is replaced by the ensemble mean
      tr.price = ens.mean_price;
      tr.volume = ens.mean_volume;
    } else {
      tr = simulate(p);
    }
    Metrics m;
    if (p.horizon > p.T) m = impact_metric_map(impact_metrics(tr));
    else m = {{"peak", tr.price.back()}, {"long_term", std::nullopt}, {"reversion_ratio", std::nullopt}};
    m["criticality_margin"] = criticality_margin(p);
    return m;
  });
}

inline void run_discrete(const DiscreteConfig& c, std::uint64_t seed, std::size_t workers, const OutputDir& out) {
  auto p = c.params;
  p.seed = seed;
  in_module("mtim-discrete", [&] {
    const auto tr = simulate(p);
    std::ostringstream os;
    write_trajectory_csv(os, tr);
    out.write("discrete.csv", os.str());
    if (c.paths >= 2) {
      const auto ens = monte_carlo(p, c.paths, workers);
      std::ostringstream es;
      es << "k,mean_price,se_price,mean_volume,se_volume\n";
      for (std::size_t k = 0; k < ens.mean_price.size(); ++k)
        es << k << ',' << fmt(ens.mean_price[k]) << ',' << fmt(ens.se_price[k]) << ',' << fmt(ens.mean_volume[k]) << ','
           << fmt(ens.se_volume[k]) << '\n';
      out.write("ensemble.csv", es.str());
    }
  });
  const auto m = discrete_metrics(c, seed, workers);
  std::ostringstream ms;
  ms << "peak,long_term,reversion_ratio,criticality_margin\n"
     << fmt(m.at("peak")) << ',' << fmt(m.at("long_term")) << ',' << fmt(m.at("reversion_ratio")) << ','
     << fmt(m.at("criticality_margin")) << '\n';
  out.write("metrics.csv", ms.str());
}

// ---------------------------------------------------------------------------
// diffusivity
// ---------------------------------------------------------------------------

inline StationaryFlow diffusivity_flow(const DiffusivityConfig& c, std::uint64_t seed) {
  auto fp = c.flow;
  fp.seed = seed;
  return in_module("diffusivity", [&] { return simulate_stationary_flow_components(fp); });
}

inline Metrics diffusivity_metrics(const DiffusivityConfig& c, std::uint64_t seed) {
  const auto flow = diffusivity_flow(c, seed);
  const auto r = in_module("diffusivity", [&] { return analyze_long_memory(flow, c.flow.ar_coeffs, c.kernel_g, c.options); });
  return {{"gamma_hat", r.gamma_hat}, {"exponent", r.variance_exponent}};
}

inline void run_diffusivity(const DiffusivityConfig& c, std::uint64_t seed, const OutputDir& out) {
  const auto flow = diffusivity_flow(c, seed);
  in_module("diffusivity", [&] {
    const auto r = analyze_long_memory(flow, c.flow.ar_coeffs, c.kernel_g, c.options);
    std::ostringstream txt, csv;
    write_report_text(txt, r);
    out.write("report.txt", txt.str());
    csv << kReportCsvHeader << '\n';
    write_report_csv_row(csv, r);
    out.write("report.csv", csv.str());

    const auto rho = acf(flow.volume, c.options.lag_hi);
    std::ostringstream ac;
    ac << "lag,acf\n";
    for (std::size_t k = 0; k < rho.size(); ++k) ac << k << ',' << fmt(rho[k]) << '\n';
    out.write("acf.csv", ac.str());

    const auto vs = price_variance_scaling(c.kernel_g, flow.volume);
    std::ostringstream vc;
    vc << "tau,variance\n";
    for (std::size_t i = 0; i < vs.taus.size(); ++i) vc << vs.taus[i] << ',' << fmt(vs.variances[i]) << '\n';
    out.write("variance.csv", vc.str());
  });
}

}  // namespace mimpact::cli
