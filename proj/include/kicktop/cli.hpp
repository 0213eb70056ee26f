#pragma once

// Command-line front end. `run` is the whole program; tools/kicktop.cpp only
// forwards argv. Exit codes: 0 success, 1 usage error, 2 numerical or I/O
// failure.

#include "kicktop/classical.hpp"
#include "kicktop/io.hpp"
#include "kicktop/quantum.hpp"
#include "kicktop/scanner.hpp"
#include "kicktop/spectral.hpp"
#include "kicktop/wigner.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace kicktop::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

inline constexpr const char* kWorkersEnv = "KICKTOP_WORKERS";

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A parameter given either as a single value or as `min:max:n_points`.
struct ParamArg {
  std::optional<double> value;
  std::optional<AxisSpec> range;

  bool is_range() const { return range.has_value(); }
};

inline ParamArg parse_param_arg(Parameter p, const std::string& text) {
  ParamArg a;
  const auto parts = split(text, ':');
  try {
    if (parts.size() == 1) {
      a.value = parse_double(parts[0]);
      if (!std::isfinite(*a.value)) throw UsageError("");
    } else if (parts.size() == 3) {
      const long long n = parse_integer(parts[2]);
      AxisSpec s{p, parse_double(parts[0]), parse_double(parts[1]), static_cast<int>(n)};
      if (n > 1000000) throw UsageError("");
      s.validate();
      a.range = s;
    } else {
      throw UsageError("");
    }
  } catch (const std::exception&) {
    throw UsageError("--" + to_string(p) + ": expected a number or min:max:n_points with min < max, n_points >= 2, got '" +
                     text + "'");
  }
  return a;
}

/// Comma-separated values or a `min:max:n` range; empty text is an empty list.
inline std::vector<double> parse_value_list(const std::string& text) {
  std::vector<double> out;
  if (text.empty()) return out;
  try {
    if (text.find(':') != std::string::npos) {
      const ParamArg a = parse_param_arg(Parameter::Beta, text);
      for (int i = 0; i < a.range->n_points; ++i) out.push_back(a.range->value(i));
      return out;
    }
    for (const auto& item : split(text, ',')) out.push_back(parse_double(item));
  } catch (const std::exception&) {
    throw UsageError("--betas: expected comma-separated numbers or min:max:n_points, got '" + text + "'");
  }
  return out;
}

/// Everything a subcommand can be configured with. Unset optionals take
/// subcommand-specific defaults.
struct RunConfig {
  std::string subcommand;
  std::string config_file;

  std::optional<int> j;
  std::string k, beta, tau;  // value or range text; empty = not given
  std::string engine = "classical";
  std::string betas;  // frames
  bool betas_given = false;

  std::optional<int> n_eigs, krylov_dim, max_restarts;
  double tol = 1e-9;
  int eigen_index = 0;  // 0 = invariant state

  std::int64_t n_traj = 10000;
  std::int64_t n_steps = 1000;
  int n_bins = 1000;
  bool aggregate = false;
  std::int64_t n_transient = 1000;

  std::string state = "invariant";  // eigenstate-wigner
  int n_mu = 200, n_phi = 400;

  int max_period = 64;
  double cycle_tol = 1e-8;

  double mu = 0.5, phi = 1.0;  // correspondence-check

  std::uint64_t seed = 0;
  int workers = 1;
  std::string out;
  std::string out_dir = ".";
  std::string manifest;
  bool binary = false;

  nlohmann::json to_json() const {
    nlohmann::json c{{"subcommand", subcommand}, {"seed", seed}, {"workers", workers}, {"out", out}};
    if (!config_file.empty()) c["config_file"] = config_file;
    if (j) c["j"] = *j;
    if (!k.empty()) c["k"] = k;
    if (!beta.empty()) c["beta"] = beta;
    if (!tau.empty()) c["tau"] = tau;
    c["engine"] = engine;
    if (betas_given) c["betas"] = betas;
    if (n_eigs) c["n_eigs"] = *n_eigs;
    if (krylov_dim) c["krylov_dim"] = *krylov_dim;
    if (max_restarts) c["max_restarts"] = *max_restarts;
    c["tol"] = tol;
    c["eigen_index"] = eigen_index;
    c["n_traj"] = n_traj;
    c["n_steps"] = n_steps;
    c["n_bins"] = n_bins;
    c["aggregate"] = aggregate;
    c["n_transient"] = n_transient;
    c["state"] = state;
    c["n_mu"] = n_mu;
    c["n_phi"] = n_phi;
    c["max_period"] = max_period;
    c["cycle_tol"] = cycle_tol;
    c["mu"] = mu;
    c["phi"] = phi;
    c["out_dir"] = out_dir;
    c["binary"] = binary;
    return c;
  }
};

namespace detail {

inline const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names{"classical-scan", "quantum-scan",         "line-scan", "spectrum",
                                              "eigenstate-wigner", "limit-cycle", "correspondence-check", "frames"};
  return names;
}

/// JSON config object to flag tokens. Keys use option names with '-' or '_'.
inline std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot read config file '" + path + "'");
  nlohmann::json cfg;
  try {
    f >> cfg;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config file '" + path + "': " + e.what());
  }
  if (!cfg.is_object()) throw UsageError("config file '" + path + "' must hold a JSON object");
  std::vector<std::string> tokens;
  for (const auto& [key, value] : cfg.items()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (flag == "--config") throw UsageError("config file may not name another config file");
    if (value.is_boolean()) {
      if (value.get<bool>()) tokens.push_back(flag);
    } else if (value.is_string()) {
      tokens.push_back(flag + "=" + value.get<std::string>());
    } else if (value.is_number_integer() || value.is_number_unsigned()) {
      tokens.push_back(flag + "=" + value.dump());
    } else if (value.is_number_float()) {
      tokens.push_back(flag + "=" + format_double(value.get<double>()));
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& item : value) {
        if (!joined.empty()) joined += ',';
        joined += item.is_number() ? format_double(item.get<double>()) : item.get<std::string>();
      }
      // "--flag=" with nothing after it is not an empty value to CLI11
      if (joined.empty()) {
        tokens.push_back(flag);
        tokens.emplace_back();
      } else {
        tokens.push_back(flag + "=" + joined);
      }
    } else {
      throw UsageError("config key '" + key + "' has an unsupported type");
    }
  }
  return tokens;
}

/// Inserts config-file flags right after the subcommand so that flags typed
/// on the command line, which come later, win.
inline std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  const auto& names = subcommand_names();
  auto sub = std::find_if(args.begin() + 1, args.end(),
                          [&](const std::string& a) { return std::find(names.begin(), names.end(), a) != names.end(); });
  if (sub == args.end()) return args;
  const auto tokens = config_tokens(path);
  args.insert(sub + 1, tokens.begin(), tokens.end());
  return args;
}

struct Outcome {
  std::vector<std::string> outputs;
  nlohmann::json extra = nlohmann::json::object();
  std::vector<std::string> warnings;
  bool numerical_failure = false;
  std::string message;
};

struct ScanParams {
  AxisSpec axis1, axis2;
  double fixed = 0.0;
};

/// Exactly two of k, beta, tau must be ranges after defaults are applied.
inline ScanParams scan_params(const RunConfig& c) {
  const std::string k = c.k.empty() ? "0:10:200" : c.k;
  const std::string tau = c.tau.empty() ? "0.01:1:200" : c.tau;
  const std::string beta = c.beta.empty() ? "2" : c.beta;
  const ParamArg ak = parse_param_arg(Parameter::K, k), ab = parse_param_arg(Parameter::Beta, beta),
                 at = parse_param_arg(Parameter::Tau, tau);
  std::vector<AxisSpec> ranges;
  std::optional<double> fixed;
  int n_fixed = 0;
  for (const ParamArg* a : {&ak, &ab, &at}) {
    if (a->is_range()) {
      ranges.push_back(*a->range);
    } else {
      fixed = a->value;
      ++n_fixed;
    }
  }
  if (ranges.size() != 2 || n_fixed != 1)
    throw UsageError("a scan needs exactly two of --k, --beta, --tau as min:max:n ranges and one fixed value");
  return {ranges[0], ranges[1], *fixed};
}

inline MapParams point_params(const RunConfig& c, bool allow_range_for = false, Parameter range_param = Parameter::K) {
  MapParams p;
  const std::pair<Parameter, const std::string*> fields[] = {
      {Parameter::K, &c.k}, {Parameter::Beta, &c.beta}, {Parameter::Tau, &c.tau}};
  for (const auto& [param, text] : fields) {
    if (allow_range_for && param == range_param) continue;
    if (text->empty()) throw UsageError("--" + to_string(param) + " is required");
    const ParamArg a = parse_param_arg(param, *text);
    if (a.is_range()) throw UsageError("--" + to_string(param) + " must be a single value here");
    set_param(p, param, *a.value);
  }
  if (p.tau < 0.0) throw UsageError("--tau must be >= 0");
  return p;
}

inline int require_j(const RunConfig& c) {
  if (!c.j) throw UsageError("--j is required for " + c.subcommand);
  if (*c.j < 1) throw UsageError("--j must be >= 1");
  return *c.j;
}

inline ArnoldiOptions arnoldi_options(const RunConfig& c, int default_nev, int default_m) {
  ArnoldiOptions o;
  o.n_eigs = c.n_eigs.value_or(default_nev);
  o.krylov_dim = c.krylov_dim.value_or(std::max(default_m, 2 * o.n_eigs + 1));
  o.tol = c.tol;
  o.max_restarts = c.max_restarts.value_or(40);
  o.seed = c.seed;
  if (o.n_eigs < 1) throw UsageError("--n-eigs must be >= 1");
  if (o.krylov_dim <= o.n_eigs) throw UsageError("--krylov-dim must exceed --n-eigs");
  if (!(o.tol > 0.0)) throw UsageError("--tol must be > 0");
  if (o.max_restarts < 0) throw UsageError("--max-restarts must be >= 0");
  return o;
}

inline EngineSettings engine_settings(const RunConfig& c, Engine engine) {
  EngineSettings es;
  es.engine = engine;
  es.classical = {c.n_traj, c.n_steps, c.n_bins, c.aggregate, c.n_transient};
  if (c.n_traj < 1) throw UsageError("--n-traj must be >= 1");
  if (c.n_steps < 0) throw UsageError("--n-steps must be >= 0");
  if (c.n_bins < 1) throw UsageError("--n-bins must be >= 1");
  if (c.n_transient < 0) throw UsageError("--n-transient must be >= 0");
  if (engine == Engine::Quantum) {
    es.quantum.j = require_j(c);
    es.quantum.arnoldi = arnoldi_options(c, 4, 30);
    es.quantum.state_index = c.eigen_index;
    if (c.eigen_index < 0) throw UsageError("--eigen-index must be >= 0");
  }
  if (c.workers < 1) throw UsageError("--workers must be >= 1");
  es.workers = c.workers;
  return es;
}

inline std::string output_path(const RunConfig& c, const std::string& fallback) {
  return c.out.empty() ? fallback : c.out;
}

inline nlohmann::json status_counts(const std::vector<CellStatus>& status) {
  int ok = 0, unconverged = 0, failed = 0;
  for (auto s : status) {
    if (s == CellStatus::Ok) ++ok;
    if (s == CellStatus::Unconverged) ++unconverged;
    if (s == CellStatus::Failed) ++failed;
  }
  return {{"ok", ok}, {"unconverged", unconverged}, {"failed", failed}};
}

inline Outcome do_scan(const RunConfig& c, Engine engine, std::ostream& out) {
  const ScanParams sp = scan_params(c);
  ScanRequest req{sp.axis1, sp.axis2, sp.fixed, engine_settings(c, engine)};
  const ScanGrid g = scan_grid(req, c.seed);
  Outcome o;
  const std::string path =
      output_path(c, engine == Engine::Classical ? "classical_scan" : "quantum_scan") + (c.out.empty() ? (c.binary ? ".bin" : ".csv") : "");
  if (c.binary) {
    write_grid_binary(path, g);
    o.outputs = {path, path + ".json"};
  } else {
    write_grid_csv(path, g);
    o.outputs = {path};
  }
  double total = 0.0, worst = 0.0;
  for (double s : g.seconds) {
    total += s;
    worst = std::max(worst, s);
  }
  o.extra["cells"] = status_counts(g.status);
  o.extra["cell_seconds"] = {{"total", total}, {"max", worst}, {"mean", total / static_cast<double>(g.seconds.size())}};
  const int failed = o.extra["cells"]["failed"].get<int>();
  if (failed > 0) o.warnings.push_back(std::to_string(failed) + " cell(s) failed and are flagged in the output");
  out << "wrote " << path << " (" << g.axis1.n_points << " x " << g.axis2.n_points << " cells)\n";
  return o;
}

inline Outcome do_line_scan(const RunConfig& c, std::ostream& out) {
  const Engine engine = parse_engine(c.engine);
  std::optional<AxisSpec> axis;
  const std::pair<Parameter, const std::string*> fields[] = {
      {Parameter::K, &c.k}, {Parameter::Beta, &c.beta}, {Parameter::Tau, &c.tau}};
  for (const auto& [param, text] : fields) {
    if (text->empty()) continue;
    const ParamArg a = parse_param_arg(param, *text);
    if (a.is_range()) {
      if (axis) throw UsageError("line-scan takes exactly one of --k, --beta, --tau as a range");
      axis = a.range;
    }
  }
  if (!axis) throw UsageError("line-scan needs one of --k, --beta, --tau as a min:max:n range");
  const MapParams fixed = point_params(c, true, axis->param);
  const Series s = line_scan(*axis, fixed, engine_settings(c, engine), c.seed);
  Outcome o;
  const std::string path = output_path(c, "line_scan.csv");
  write_series_csv(path, s);
  o.outputs = {path};
  o.extra["cells"] = status_counts(s.status);
  out << "wrote " << path << " (" << s.values.size() << " points)\n";
  return o;
}

inline Outcome do_spectrum(const RunConfig& c, std::ostream& out) {
  const int j = require_j(c);
  const MapParams p = point_params(c);
  const ArnoldiOptions opt = arnoldi_options(c, 30, 120);
  const SpectrumResult r = leading_spectrum(SpinParams(j), p.k, p.beta, p.tau, opt);
  Outcome o;
  const std::string path = output_path(c, "spectrum.csv");
  write_spectrum_csv(path, r);
  o.outputs = {path};
  o.extra["restarts"] = r.iterations;
  o.extra["applications"] = r.applications;
  o.extra["converged"] = r.converged;
  if (!r.converged) {
    o.numerical_failure = true;
    o.message = "Arnoldi did not reach tol for all requested eigenpairs";
  }
  out << "wrote " << path << " (" << r.pairs.size() << " eigenvalues, " << (r.converged ? "converged" : "NOT converged")
      << ")\n";
  return o;
}

inline Outcome do_eigenstate_wigner(const RunConfig& c, std::ostream& out) {
  const int j = require_j(c);
  const MapParams p = point_params(c);
  if (c.n_mu < 2 || c.n_phi < 2) throw UsageError("--n-mu and --n-phi must be >= 2");
  int index = 0;  // position in the sorted spectrum, 0-based
  bool invariant = false;
  if (c.state == "invariant") {
    invariant = true;
  } else if (c.state == "leading") {
    index = 1;
  } else {
    try {
      index = static_cast<int>(parse_integer(c.state)) - 1;
    } catch (const std::exception&) {
      index = -1;
    }
    if (index < 0) throw UsageError("--state must be invariant, leading or a 1-based eigenvalue index");
  }
  const ArnoldiOptions opt = arnoldi_options(c, std::max(4, index + 1), 30);
  const SpectrumResult r = leading_spectrum(SpinParams(j), p.k, p.beta, p.tau, opt);
  ComplexMatrix rho;
  Complex lambda;
  if (invariant) {
    rho = invariant_state(r);
    lambda = r.pairs.front().lambda;
  } else if (index == 1) {
    const LeadingEigenstate le = leading_eigenstate(r);
    rho = le.matrix;
    lambda = le.lambda;
  } else {
    if (index >= static_cast<int>(r.pairs.size())) throw NumericalError("requested eigenvalue index not computed");
    rho = r.pairs[static_cast<std::size_t>(index)].eigenmatrix;
    lambda = r.pairs[static_cast<std::size_t>(index)].lambda;
  }
  const WignerGrid w = wigner_grid(rho, c.n_mu, c.n_phi);
  Outcome o;
  const std::string path = output_path(c, "wigner.csv");
  write_wigner_csv(path, w);
  o.outputs = {path};
  const ClassicalState peak = wigner_argmax(w);
  o.extra["lambda"] = {lambda.real(), lambda.imag()};
  o.extra["argmax"] = {{"mu", peak.mu}, {"phi", peak.phi}};
  o.extra["converged"] = r.converged;
  if (!r.converged) {
    o.numerical_failure = true;
    o.message = "Arnoldi did not reach tol for all requested eigenpairs";
  }
  out << "wrote " << path << " (" << w.n_mu << " x " << w.n_phi << ", lambda = " << lambda << ")\n";
  return o;
}

inline Outcome do_limit_cycle(const RunConfig& c, std::ostream& out) {
  const MapParams p = point_params(c);
  if (c.max_period < 1) throw UsageError("--max-period must be >= 1");
  if (!(c.cycle_tol > 0.0)) throw UsageError("--cycle-tol must be > 0");
  LimitCycleOptions opt{c.n_transient, c.max_period, c.cycle_tol, c.seed};
  const auto cycle = find_limit_cycle(p, opt);
  LimitCycleRecord rec{p, cycle.value_or(std::vector<ClassicalState>{})};
  Outcome o;
  const std::string path = output_path(c, "limit_cycle.csv");
  write_limit_cycle_csv(path, rec);
  o.outputs = {path};
  o.extra["period"] = rec.points.size();
  if (!cycle) o.warnings.push_back("no cycle of period <= " + std::to_string(c.max_period) + " found");
  out << "wrote " << path << " (period " << rec.points.size() << ")\n";
  return o;
}

/// One dissipation step on a coherent state against the classical contraction.
inline Outcome do_correspondence(const RunConfig& c, std::ostream& out) {
  const int j = require_j(c);
  if (c.tau.empty()) throw UsageError("--tau is required");
  const ParamArg at = parse_param_arg(Parameter::Tau, c.tau);
  if (at.is_range() || *at.value < 0.0) throw UsageError("--tau must be a single value >= 0");
  if (!(c.mu >= -1.0 && c.mu <= 1.0)) throw UsageError("--mu must lie in [-1, 1]");
  const SpinParams sp(j);
  const DensityMatrix rho = apply_dissipator(build_dissipator_blocks(sp, *at.value), coherent_state(sp, c.mu, c.phi));
  const double quantum = mean_mu(sp, rho);
  const double classical = dissipate({c.mu, c.phi}, *at.value).mu;
  Outcome o;
  const std::string path = output_path(c, "correspondence.json");
  nlohmann::json res{{"j", j}, {"mu", c.mu}, {"phi", c.phi}, {"tau", *at.value}, {"quantum_mean_mu", quantum},
                     {"classical_mu", classical}, {"abs_error", std::abs(quantum - classical)}};
  write_manifest(path, res);
  o.outputs = {path};
  o.extra["result"] = res;
  out << "quantum <Jz>/j = " << format_double(quantum) << ", classical mu' = " << format_double(classical)
      << ", |diff| = " << format_double(std::abs(quantum - classical)) << '\n';
  return o;
}

inline Outcome do_frames(const RunConfig& c, std::ostream& out) {
  const Engine engine = parse_engine(c.engine);
  const std::vector<double> betas = c.betas_given ? parse_value_list(c.betas) : std::vector<double>{1.25, 1.5, 1.75, 2.0};
  const ParamArg ak = parse_param_arg(Parameter::K, c.k.empty() ? "0:10:200" : c.k);
  const ParamArg at = parse_param_arg(Parameter::Tau, c.tau.empty() ? "0.01:1:200" : c.tau);
  if (!ak.is_range() || !at.is_range()) throw UsageError("frames needs --k and --tau as min:max:n ranges");
  const EngineSettings es = engine_settings(c, engine);
  std::error_code ec;
  std::filesystem::create_directories(c.out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + c.out_dir + "': " + ec.message());
  const FrameSequenceResult r = frame_sequence(betas, *ak.range, *at.range, es, c.seed, c.out_dir, c.binary);
  Outcome o;
  o.outputs = r.files;
  o.warnings = r.warnings;
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& [b, msg] : r.failures) failures.push_back({{"beta", b}, {"message", msg}});
  o.extra["frame_failures"] = failures;
  if (!r.failures.empty()) {
    o.numerical_failure = true;
    o.message = std::to_string(r.failures.size()) + " frame(s) failed";
  }
  out << "wrote " << r.files.size() << " frame(s) to " << c.out_dir << '\n';
  return o;
}

inline std::string manifest_path(const RunConfig& c) {
  if (!c.manifest.empty()) return c.manifest;
  if (c.subcommand == "frames") return c.out_dir + "/manifest.json";
  std::string base = c.out;
  if (base.empty()) {
    static const std::map<std::string, std::string> defaults{
        {"classical-scan", "classical_scan"}, {"quantum-scan", "quantum_scan"},   {"line-scan", "line_scan.csv"},
        {"spectrum", "spectrum.csv"},         {"eigenstate-wigner", "wigner.csv"}, {"limit-cycle", "limit_cycle.csv"},
        {"correspondence-check", "correspondence.json"}};
    base = defaults.at(c.subcommand);
    if (c.subcommand == "classical-scan" || c.subcommand == "quantum-scan") base += c.binary ? ".bin" : ".csv";
  }
  return base + ".manifest.json";
}

inline void add_options(CLI::App& sub, RunConfig& c) {
  sub.add_option("--config", c.config_file, "JSON file supplying any flag; the command line overrides it");
  sub.add_option("--seed", c.seed, "Base seed");
  sub.add_option("--workers", c.workers, "Worker threads (default from " + std::string(kWorkersEnv) + ", else 1)")
      ->envname(kWorkersEnv);
  sub.add_option("--out", c.out, "Output file path");
  sub.add_option("--manifest", c.manifest, "Run manifest path (default <out>.manifest.json)");
}

inline void add_point(CLI::App& sub, RunConfig& c, bool ranges) {
  const std::string kind = ranges ? "value or min:max:n" : "value";
  sub.add_option("--k", c.k, "Torsion strength (" + kind + ")");
  sub.add_option("--beta", c.beta, "Rotation angle (" + kind + ")");
  sub.add_option("--tau", c.tau, "Dissipation strength (" + kind + ")");
}

inline void add_ensemble(CLI::App& sub, RunConfig& c) {
  sub.add_option("--n-traj", c.n_traj, "Trajectories per cell");
  sub.add_option("--n-steps", c.n_steps, "Map iterations per trajectory");
  sub.add_option("--n-bins", c.n_bins, "Histogram bins in mu");
  sub.add_flag("--aggregate", c.aggregate, "Histogram all steps after --n-transient instead of final points");
}

inline void add_solver(CLI::App& sub, RunConfig& c) {
  sub.add_option("--n-eigs", c.n_eigs, "Eigenpairs to converge");
  sub.add_option("--krylov-dim", c.krylov_dim, "Krylov subspace dimension");
  sub.add_option("--tol", c.tol, "Residual tolerance");
  sub.add_option("--max-restarts", c.max_restarts, "Restart cycles");
}

}  // namespace detail

inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  if (args.empty()) args.emplace_back("kicktop");
  RunConfig c;
  CLI::App app{"Dissipative kicked top: classical and quantum maps, spectra, Wigner functions, parameter scans",
               "kicktop"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  auto* cs = app.add_subcommand("classical-scan", "eta grid of the classical map over two of (k, beta, tau)");
  detail::add_options(*cs, c);
  detail::add_point(*cs, c, true);
  detail::add_ensemble(*cs, c);
  cs->add_option("--n-transient", c.n_transient, "Steps skipped by --aggregate");
  cs->add_flag("--binary", c.binary, "Raw float64 grid plus JSON sidecar instead of CSV");

  auto* qs = app.add_subcommand("quantum-scan", "eta grid of the invariant state over two of (k, beta, tau)");
  detail::add_options(*qs, c);
  detail::add_point(*qs, c, true);
  qs->add_option("--j", c.j, "Spin quantum number")->required();
  detail::add_solver(*qs, c);
  qs->add_option("--eigen-index", c.eigen_index, "0 = invariant state, i = i-th sorted eigenmatrix (0-based)");
  qs->add_flag("--binary", c.binary, "Raw float64 grid plus JSON sidecar instead of CSV");

  auto* ls = app.add_subcommand("line-scan", "eta / N along one parameter");
  detail::add_options(*ls, c);
  detail::add_point(*ls, c, true);
  ls->add_option("--engine", c.engine, "classical or quantum")->check(CLI::IsMember({"classical", "quantum"}));
  ls->add_option("--j", c.j, "Spin quantum number (quantum engine)");
  detail::add_ensemble(*ls, c);
  ls->add_option("--n-transient", c.n_transient, "Steps skipped by --aggregate");
  detail::add_solver(*ls, c);
  ls->add_option("--eigen-index", c.eigen_index, "0 = invariant state, i = i-th sorted eigenmatrix (0-based)");

  auto* sp = app.add_subcommand("spectrum", "Leading superoperator eigenvalues");
  detail::add_options(*sp, c);
  detail::add_point(*sp, c, false);
  sp->add_option("--j", c.j, "Spin quantum number")->required();
  detail::add_solver(*sp, c);

  auto* ew = app.add_subcommand("eigenstate-wigner", "Wigner function of a superoperator eigenstate");
  detail::add_options(*ew, c);
  detail::add_point(*ew, c, false);
  ew->add_option("--j", c.j, "Spin quantum number")->required();
  detail::add_solver(*ew, c);
  ew->add_option("--state", c.state, "invariant, leading, or 1-based eigenvalue index");
  ew->add_option("--n-mu", c.n_mu, "Grid points in mu");
  ew->add_option("--n-phi", c.n_phi, "Grid points in phi");

  auto* lc = app.add_subcommand("limit-cycle", "Classical attractor cycle from a reference initial condition");
  detail::add_options(*lc, c);
  detail::add_point(*lc, c, false);
  lc->add_option("--n-transient", c.n_transient, "Transient steps");
  lc->add_option("--max-period", c.max_period, "Longest period searched");
  lc->add_option("--cycle-tol", c.cycle_tol, "Return distance accepted as closure (rad)");

  auto* cc = app.add_subcommand("correspondence-check", "Dissipated coherent state <Jz>/j against the classical map");
  detail::add_options(*cc, c);
  cc->add_option("--j", c.j, "Spin quantum number")->required();
  cc->add_option("--tau", c.tau, "Dissipation strength")->required();
  cc->add_option("--mu", c.mu, "Coherent state mu");
  cc->add_option("--phi", c.phi, "Coherent state phi");

  auto* fr = app.add_subcommand("frames", "One (k, tau) grid per beta");
  detail::add_options(*fr, c);
  fr->add_option("--betas", c.betas, "Comma-separated beta values or min:max:n (default 1.25,1.5,1.75,2)");
  fr->add_option("--k", c.k, "k range min:max:n");
  fr->add_option("--tau", c.tau, "tau range min:max:n");
  fr->add_option("--engine", c.engine, "classical or quantum")->check(CLI::IsMember({"classical", "quantum"}));
  fr->add_option("--j", c.j, "Spin quantum number (quantum engine)");
  detail::add_ensemble(*fr, c);
  fr->add_option("--n-transient", c.n_transient, "Steps skipped by --aggregate");
  detail::add_solver(*fr, c);
  fr->add_option("--out-dir", c.out_dir, "Directory for frame files");
  fr->add_flag("--binary", c.binary, "Raw float64 grids plus JSON sidecars instead of CSV");

  try {
    args = detail::expand_config(std::move(args));
    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  CLI::App* chosen = app.get_subcommands().front();
  c.subcommand = chosen->get_name();
  c.betas_given = fr->count("--betas") > 0;
  if (c.subcommand == "frames" && c.engine == "quantum" && !c.j) {
    err << "error: --j is required for the quantum engine\n" << chosen->help();
    return kExitUsage;
  }
  if (c.subcommand == "line-scan" && c.engine == "quantum" && !c.j) {
    err << "error: --j is required for the quantum engine\n" << chosen->help();
    return kExitUsage;
  }

  const auto t0 = std::chrono::steady_clock::now();
  detail::Outcome result;
  int code = kExitOk;
  std::string status = "ok";
  try {
    if (c.subcommand == "classical-scan") result = detail::do_scan(c, Engine::Classical, out);
    else if (c.subcommand == "quantum-scan") result = detail::do_scan(c, Engine::Quantum, out);
    else if (c.subcommand == "line-scan") result = detail::do_line_scan(c, out);
    else if (c.subcommand == "spectrum") result = detail::do_spectrum(c, out);
    else if (c.subcommand == "eigenstate-wigner") result = detail::do_eigenstate_wigner(c, out);
    else if (c.subcommand == "limit-cycle") result = detail::do_limit_cycle(c, out);
    else if (c.subcommand == "correspondence-check") result = detail::do_correspondence(c, out);
    else if (c.subcommand == "frames") result = detail::do_frames(c, out);
    if (result.numerical_failure) {
      code = kExitFailure;
      status = "numerical_failure";
      err << "error: " << result.message << '\n';
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n' << chosen->help();
    return kExitUsage;
  } catch (const IoError& e) {
    code = kExitFailure;
    status = "io_failure";
    result.message = e.what();
    err << "error: " << e.what() << '\n';
  } catch (const std::ios_base::failure& e) {
    code = kExitFailure;
    status = "io_failure";
    result.message = e.what();
    err << "error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    code = kExitFailure;
    status = "numerical_failure";
    result.message = e.what();
    err << "error: " << e.what() << '\n';
  }
  for (const auto& w : result.warnings) err << "warning: " << w << '\n';

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  nlohmann::json manifest{{"tool", "kicktop"},
                          {"version", kVersion},
                          {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                                "." + std::to_string(EIGEN_MINOR_VERSION)},
                          {"compiler", __VERSION__},
                          {"command", c.subcommand},
                          {"argv", args},
                          {"config", c.to_json()},
                          {"seed", c.seed},
                          {"timing", {{"wall_seconds", wall}}},
                          {"status", status},
                          {"message", result.message},
                          {"warnings", result.warnings},
                          {"outputs", result.outputs},
                          {"details", result.extra}};
  const std::string mpath = detail::manifest_path(c);
  try {
    write_manifest(mpath, manifest);
  } catch (const std::exception& e) {
    err << "error: cannot write manifest: " << e.what() << '\n';
    return kExitFailure;
  }
  return code;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace kicktop::cli
