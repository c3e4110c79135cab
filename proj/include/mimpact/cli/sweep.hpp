#pragma once

// Cross-product parameter sweeps. Cells are enumerated in lexicographic
// order of their grid coordinates (axes sorted by name, values ascending);
// cell i draws its randomness from stream_seed(master seed, i).

#include <atomic>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mimpact/cli/commands.hpp"
#include "mimpact/cli/config.hpp"

namespace mimpact::cli {

inline const std::vector<std::string>& metrics_for_target(const std::string& target) {
  static const std::vector<std::string> impact{"peak", "long_term", "reversion_ratio", "criticality_margin"};
  static const std::vector<std::string> diff{"gamma_hat", "exponent"};
  return target == "diffusivity" ? diff : impact;
}

/// Sets a dotted path ("kernel_d.exponent") inside a JSON object,
/// creating intermediate objects; unknown leaves are caught by the schema.
inline void set_path(json& j, const std::string& dotted, double value) {
  json* cur = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("sweep.grid." + dotted, "malformed parameter path");
    if (!cur->is_object()) throw ConfigError("sweep.grid." + dotted, "path does not lead to an object");
    if (dot == std::string::npos) {
      (*cur)[key] = value;
      return;
    }
    cur = &(*cur)[key];
    start = dot + 1;
  }
}

struct SweepCell {
  std::vector<double> coords;
  bool ok = false;
  Metrics metrics;
  std::string error;
};

inline Metrics run_cell(const SweepConfig& s, const json& block, std::uint64_t seed, const fs::path& base_dir) {
  const auto parsed = parse_block(s.target, block, s.target, base_dir);
  if (s.target == "trajectory") return trajectory_metrics(std::get<TrajectoryConfig>(parsed), seed);
  if (s.target == "continuous") return continuous_metrics(std::get<ContinuousConfig>(parsed));
  if (s.target == "discrete") return discrete_metrics(std::get<DiscreteConfig>(parsed), seed);
  return diffusivity_metrics(std::get<DiffusivityConfig>(parsed), seed);
}

inline std::string sanitize(std::string s) {
  for (auto& ch : s)
    if (ch == ',' || ch == '\n' || ch == '\r' || ch == '"') ch = ';';
  return s;
}

inline std::vector<SweepCell> run_sweep_cells(const SweepConfig& s, std::uint64_t seed, std::size_t workers,
                                              const fs::path& base_dir) {
  const auto& allowed = metrics_for_target(s.target);
  for (const auto& m : s.metrics)
    if (std::find(allowed.begin(), allowed.end(), m) == allowed.end())
      throw ConfigError("sweep.metrics", "metric '" + m + "' is not available for target " + s.target);

  std::size_t cells = 1;
  for (const auto& [name, values] : s.axes) {
    if (values.size() > s.max_cells || cells > s.max_cells / values.size())
      throw ConfigError("sweep.grid", "grid has more than max_cells = " + std::to_string(s.max_cells) + " cells; refusing");
    cells *= values.size();
  }

  auto block_for = [&](std::size_t idx, std::vector<double>& coords) {
    json block = s.base;
    coords.assign(s.axes.size(), 0.0);
    for (std::size_t a = s.axes.size(); a-- > 0;) {
      const auto& values = s.axes[a].second;
      coords[a] = values[idx % values.size()];
      idx /= values.size();
    }
    for (std::size_t a = 0; a < s.axes.size(); ++a) set_path(block, s.axes[a].first, coords[a]);
    return block;
  };

  // Schema problems are the same in every cell: report them as config errors up front.
  {
    std::vector<double> coords;
    const json first = block_for(0, coords);
    parse_block(s.target, first, "sweep.base", base_dir);
  }

  std::vector<SweepCell> out(cells);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells; i = next++) {
      SweepCell& cell = out[i];
      try {
        const json block = block_for(i, cell.coords);
        cell.metrics = run_cell(s, block, detail::stream_seed(seed, i), base_dir);
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = sanitize(e.what());
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, cells));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

inline std::string sweep_csv(const SweepConfig& s, const std::vector<SweepCell>& cells) {
  std::ostringstream os;
  os << "cell";
  for (const auto& [name, values] : s.axes) os << ',' << name;
  os << ",status";
  for (const auto& m : s.metrics) os << ',' << m;
  os << ",error\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    os << i;
    for (double x : c.coords) os << ',' << fmt(x);
    os << ',' << (c.ok ? "ok" : "failed");
    for (const auto& m : s.metrics) {
      os << ',';
      if (c.ok) {
        const auto it = c.metrics.find(m);
        os << (it == c.metrics.end() ? "NA" : fmt(it->second));
      } else {
        os << "NA";
      }
    }
    os << ',' << c.error << '\n';
  }
  return os.str();
}

}  // namespace mimpact::cli
