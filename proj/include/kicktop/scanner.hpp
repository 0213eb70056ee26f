#pragma once

// Participation-ratio landscapes over two of (k, beta, tau), line scans and
// beta frame sequences, for the classical and the quantum engine.

#include "kicktop/classical.hpp"
#include "kicktop/random.hpp"
#include "kicktop/spectral.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace kicktop {

enum class Parameter { K, Beta, Tau };
enum class Engine { Classical, Quantum };
enum class CellStatus { Ok, Unconverged, Failed };

inline std::string to_string(Parameter p) {
  switch (p) {
    case Parameter::K: return "k";
    case Parameter::Beta: return "beta";
    case Parameter::Tau: return "tau";
  }
  return "?";
}

inline Parameter parse_parameter(const std::string& s) {
  if (s == "k") return Parameter::K;
  if (s == "beta") return Parameter::Beta;
  if (s == "tau") return Parameter::Tau;
  throw std::invalid_argument("unknown parameter '" + s + "' (expected k, beta or tau)");
}

inline std::string to_string(Engine e) { return e == Engine::Classical ? "classical" : "quantum"; }

inline Engine parse_engine(const std::string& s) {
  if (s == "classical") return Engine::Classical;
  if (s == "quantum") return Engine::Quantum;
  throw std::invalid_argument("unknown engine '" + s + "' (expected classical or quantum)");
}

inline std::string to_string(CellStatus s) {
  switch (s) {
    case CellStatus::Ok: return "ok";
    case CellStatus::Unconverged: return "unconverged";
    case CellStatus::Failed: return "failed";
  }
  return "?";
}

inline CellStatus parse_status(const std::string& s) {
  if (s == "ok") return CellStatus::Ok;
  if (s == "unconverged") return CellStatus::Unconverged;
  if (s == "failed") return CellStatus::Failed;
  throw std::invalid_argument("unknown cell status '" + s + "'");
}

/// Uniform axis, endpoints inclusive.
struct AxisSpec {
  Parameter param = Parameter::K;
  double min = 0.0;
  double max = 1.0;
  int n_points = 2;

  void validate() const {
    if (!std::isfinite(min) || !std::isfinite(max) || !(min < max))
      throw std::invalid_argument("AxisSpec(" + to_string(param) + "): need finite min < max");
    if (n_points < 2) throw std::invalid_argument("AxisSpec(" + to_string(param) + "): n_points must be >= 2");
  }

  double value(int i) const {
    if (i == n_points - 1) return max;
    return min + (max - min) * i / (n_points - 1);
  }

  bool operator==(const AxisSpec&) const = default;
};

inline void set_param(MapParams& p, Parameter which, double v) {
  switch (which) {
    case Parameter::K: p.k = v; break;
    case Parameter::Beta: p.beta = v; break;
    case Parameter::Tau: p.tau = v; break;
  }
}

inline double get_param(const MapParams& p, Parameter which) {
  switch (which) {
    case Parameter::K: return p.k;
    case Parameter::Beta: return p.beta;
    case Parameter::Tau: return p.tau;
  }
  return 0.0;
}

/// The parameter not named by either axis.
inline Parameter remaining_parameter(Parameter a, Parameter b) {
  if (a == b) throw std::invalid_argument("scan axes must name two different parameters");
  for (Parameter p : {Parameter::K, Parameter::Beta, Parameter::Tau})
    if (p != a && p != b) return p;
  return Parameter::K;
}

struct ClassicalSettings {
  std::int64_t n_traj = 10000;
  std::int64_t n_steps = 1000;
  int n_bins = 1000;
  /// Accumulate the histogram over all steps after n_transient instead of
  /// using final points only.
  bool aggregate = false;
  std::int64_t n_transient = 0;
};

struct QuantumSettings {
  int j = 0;
  ArnoldiOptions arnoldi{6, 40, 1e-9, 40, 0};
  /// 0 = invariant state; i > 0 = i-th eigenmatrix in the sorted spectrum
  /// (participation ratio of the diagonal moduli, normalised).
  int state_index = 0;
};

struct EngineSettings {
  Engine engine = Engine::Classical;
  ClassicalSettings classical;
  QuantumSettings quantum;
  int workers = 1;

  /// N in eta / N.
  double normalization() const {
    return engine == Engine::Classical ? static_cast<double>(classical.n_bins) : 2.0 * quantum.j + 1.0;
  }

  void validate() const {
    if (engine == Engine::Classical) {
      if (classical.n_traj < 1 || classical.n_steps < 0 || classical.n_bins < 1)
        throw std::invalid_argument("classical settings: need n_traj >= 1, n_steps >= 0, n_bins >= 1");
    } else {
      if (quantum.j < 1) throw std::invalid_argument("quantum settings: j must be >= 1");
      if (quantum.state_index < 0) throw std::invalid_argument("quantum settings: state_index must be >= 0");
    }
    if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  }
};

struct ScanRequest {
  AxisSpec axis1;
  AxisSpec axis2;
  double fixed_value = 0.0;
  EngineSettings settings;

  Parameter fixed_param() const { return remaining_parameter(axis1.param, axis2.param); }

  void validate() const {
    axis1.validate();
    axis2.validate();
    (void)fixed_param();
    if (!std::isfinite(fixed_value)) throw std::invalid_argument("ScanRequest: fixed value must be finite");
    settings.validate();
  }
};

struct CellResult {
  double eta = std::numeric_limits<double>::quiet_NaN();
  CellStatus status = CellStatus::Failed;
  double seconds = 0.0;
  std::string message;
};

struct ScanGrid {
  AxisSpec axis1;
  AxisSpec axis2;
  Parameter fixed_param = Parameter::Beta;
  double fixed_value = 0.0;
  Engine engine = Engine::Classical;
  int j = 0;  // quantum only
  double normalization = 1.0;
  Eigen::MatrixXd eta;  // (axis1 index, axis2 index)
  std::vector<CellStatus> status;  // row-major over (axis1, axis2)
  std::vector<double> seconds;     // per-cell wall time

  CellStatus cell_status(int i1, int i2) const { return status[static_cast<std::size_t>(i1 * axis2.n_points + i2)]; }
};

/// Per-point seed. Hashing the parameter values rather than the grid indices
/// makes a point's value independent of which scan produced it.
inline std::uint64_t cell_seed(std::uint64_t base_seed, const MapParams& p) {
  return hash_words({base_seed, std::bit_cast<std::uint64_t>(p.k), std::bit_cast<std::uint64_t>(p.beta),
                     std::bit_cast<std::uint64_t>(p.tau)});
}

inline double classical_eta(const MapParams& p, const ClassicalSettings& cs, std::uint64_t seed) {
  if (cs.aggregate) {
    return participation_ratio(histogram_mu_aggregate(p, cs.n_traj, cs.n_steps, cs.n_transient, cs.n_bins, seed));
  }
  return participation_ratio(histogram_mu(evolve_ensemble(p, cs.n_traj, cs.n_steps, seed), cs.n_bins));
}

/// P(m) participation ratio of an arbitrary eigenmatrix: |X_mm| normalised to
/// unit sum.
inline double eigenmatrix_participation_ratio(const ComplexMatrix& x) {
  const Eigen::VectorXd d = x.diagonal().cwiseAbs();
  const double s = d.sum();
  if (!(s > 0.0)) throw NumericalError("eigenmatrix has vanishing diagonal");
  return 1.0 / (d / s).squaredNorm();
}

inline CellResult evaluate_cell(const MapParams& p, const EngineSettings& es, std::uint64_t base_seed) {
  CellResult r;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    p.validate();
    const std::uint64_t seed = cell_seed(base_seed, p);
    if (es.engine == Engine::Classical) {
      r.eta = classical_eta(p, es.classical, seed);
      r.status = CellStatus::Ok;
    } else {
      ArnoldiOptions opt = es.quantum.arnoldi;
      opt.seed = seed;
      opt.n_eigs = std::max(opt.n_eigs, es.quantum.state_index + 1);
      const SpectrumResult spec = leading_spectrum(SpinParams(es.quantum.j), p.k, p.beta, p.tau, opt);
      if (es.quantum.state_index == 0) {
        r.eta = participation_ratio_quantum(invariant_state(spec));
      } else {
        if (static_cast<int>(spec.pairs.size()) <= es.quantum.state_index)
          throw NumericalError("requested eigenstate index not available");
        r.eta = eigenmatrix_participation_ratio(spec.pairs[static_cast<std::size_t>(es.quantum.state_index)].eigenmatrix);
      }
      r.status = spec.converged ? CellStatus::Ok : CellStatus::Unconverged;
    }
  } catch (const std::exception& e) {
    r.eta = std::numeric_limits<double>::quiet_NaN();
    r.status = CellStatus::Failed;
    r.message = e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

/// Runs `task(i)` for i in [0, n) on `workers` threads. Tasks write to
/// disjoint preallocated slots, so the outcome is independent of scheduling.
template <typename Task>
void parallel_for(std::size_t n, int workers, Task&& task) {
  const int w = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(n, 1))));
  if (w == 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(w));
  for (int t = 0; t < w; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) task(i);
    });
  }
  for (auto& th : pool) th.join();
}

inline ScanGrid scan_grid(const ScanRequest& req, std::uint64_t seed) {
  req.validate();
  ScanGrid g;
  g.axis1 = req.axis1;
  g.axis2 = req.axis2;
  g.fixed_param = req.fixed_param();
  g.fixed_value = req.fixed_value;
  g.engine = req.settings.engine;
  g.j = req.settings.engine == Engine::Quantum ? req.settings.quantum.j : 0;
  g.normalization = req.settings.normalization();
  const int n1 = req.axis1.n_points, n2 = req.axis2.n_points;
  const std::size_t cells = static_cast<std::size_t>(n1) * n2;
  g.eta.resize(n1, n2);
  g.status.assign(cells, CellStatus::Failed);
  g.seconds.assign(cells, 0.0);

  parallel_for(cells, req.settings.workers, [&](std::size_t c) {
    const int i1 = static_cast<int>(c / n2), i2 = static_cast<int>(c % n2);
    MapParams p;
    set_param(p, g.fixed_param, req.fixed_value);
    set_param(p, req.axis1.param, req.axis1.value(i1));
    set_param(p, req.axis2.param, req.axis2.value(i2));
    const CellResult r = evaluate_cell(p, req.settings, seed);
    g.eta(i1, i2) = r.eta;
    g.status[c] = r.status;
    g.seconds[c] = r.seconds;
  });
  return g;
}

struct Series {
  Parameter param = Parameter::K;
  MapParams fixed;  // the scanned parameter's slot is unused
  Engine engine = Engine::Classical;
  int j = 0;
  double normalization = 1.0;
  std::vector<double> values;
  std::vector<double> eta;
  std::vector<double> eta_over_n;
  std::vector<CellStatus> status;
};

/// eta / N along one axis with the other two parameters held at `fixed`.
inline Series line_scan(const AxisSpec& axis, const MapParams& fixed, const EngineSettings& es, std::uint64_t seed) {
  axis.validate();
  es.validate();
  Series s;
  s.param = axis.param;
  s.fixed = fixed;
  s.engine = es.engine;
  s.j = es.engine == Engine::Quantum ? es.quantum.j : 0;
  s.normalization = es.normalization();
  const auto n = static_cast<std::size_t>(axis.n_points);
  s.values.resize(n);
  s.eta.resize(n);
  s.eta_over_n.resize(n);
  s.status.resize(n);
  parallel_for(n, es.workers, [&](std::size_t i) {
    MapParams p = fixed;
    const double v = axis.value(static_cast<int>(i));
    set_param(p, axis.param, v);
    const CellResult r = evaluate_cell(p, es, seed);
    s.values[i] = v;
    s.eta[i] = r.eta;
    s.eta_over_n[i] = r.eta / s.normalization;
    s.status[i] = r.status;
  });
  return s;
}

/// Connected runs along axis 2 in row i1 of the set {eta / N < threshold}.
/// Returns a label per cell (-1 outside the set), labels increase along the row.
inline std::vector<int> low_eta_runs(const ScanGrid& g, int i1, double threshold) {
  std::vector<int> labels(static_cast<std::size_t>(g.axis2.n_points), -1);
  int label = -1;
  bool inside = false;
  for (int i2 = 0; i2 < g.axis2.n_points; ++i2) {
    const double v = g.eta(i1, i2) / g.normalization;
    const bool low = std::isfinite(v) && v < threshold;
    if (low && !inside) ++label;
    inside = low;
    if (low) labels[static_cast<std::size_t>(i2)] = label;
  }
  return labels;
}

/// Four-neighbour connected components of {eta / N < threshold} on the full
/// grid. Label per cell in row-major order, -1 outside the set.
inline std::vector<int> low_eta_components(const ScanGrid& g, double threshold) {
  const int n1 = g.axis1.n_points, n2 = g.axis2.n_points;
  std::vector<int> labels(static_cast<std::size_t>(n1) * n2, -1);
  auto low = [&](int a, int b) {
    const double v = g.eta(a, b) / g.normalization;
    return std::isfinite(v) && v < threshold;
  };
  int next = 0;
  std::vector<std::pair<int, int>> stack;
  for (int a = 0; a < n1; ++a) {
    for (int b = 0; b < n2; ++b) {
      if (!low(a, b) || labels[static_cast<std::size_t>(a * n2 + b)] >= 0) continue;
      stack.assign(1, {a, b});
      labels[static_cast<std::size_t>(a * n2 + b)] = next;
      while (!stack.empty()) {
        const auto [x, y] = stack.back();
        stack.pop_back();
        constexpr int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
        for (int d = 0; d < 4; ++d) {
          const int u = x + dx[d], v = y + dy[d];
          if (u < 0 || v < 0 || u >= n1 || v >= n2) continue;
          auto& l = labels[static_cast<std::size_t>(u * n2 + v)];
          if (l >= 0 || !low(u, v)) continue;
          l = next;
          stack.emplace_back(u, v);
        }
      }
      ++next;
    }
  }
  return labels;
}

}  // namespace kicktop
