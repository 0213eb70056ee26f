#pragma once

// Text and binary output formats, with parsers for round-tripping.
//
// Every CSV starts with one '#' metadata line, then one column-name line,
// then data rows. Floats are printed with 17 significant digits.

#include "kicktop/scanner.hpp"
#include "kicktop/spectral.hpp"
#include "kicktop/wigner.hpp"

#include <bit>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace kicktop {

inline constexpr const char* kVersion = "0.1.0";

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline double parse_double(const std::string& s) {
  const char* b = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(b, &end);
  if (end == b || *end != '\0') throw IoError("not a number: '" + s + "'");
  return v;
}

inline long long parse_integer(const std::string& s) {
  const char* b = s.c_str();
  char* end = nullptr;
  const long long v = std::strtoll(b, &end, 10);
  if (end == b || *end != '\0') throw IoError("not an integer: '" + s + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

namespace detail {

inline std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream f(path, mode);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.exceptions(std::ios::badbit | std::ios::failbit);
  return f;
}

inline std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream f(path, mode);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  return f;
}

struct CsvText {
  std::vector<std::string> meta;  // fields of the '#' line
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

inline CsvText read_csv(const std::string& path, std::size_t n_columns) {
  std::ifstream f = open_in(path);
  CsvText t;
  std::string line;
  if (!std::getline(f, line) || line.size() < 2 || line[0] != '#') throw IoError(path + ": missing '#' header line");
  std::string meta = line.substr(1);
  if (!meta.empty() && meta[0] == ' ') meta.erase(0, 1);
  t.meta = split(meta, ',');
  if (!std::getline(f, line)) throw IoError(path + ": missing column line");
  t.columns = split(line, ',');
  if (t.columns.size() != n_columns) throw IoError(path + ": unexpected column count");
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() != n_columns) throw IoError(path + ": malformed row '" + line + "'");
    t.rows.push_back(std::move(fields));
  }
  return t;
}

/// key=value fields of a metadata line; fields without '=' are skipped.
inline std::map<std::string, std::string> meta_map(const std::vector<std::string>& fields) {
  std::map<std::string, std::string> m;
  for (const auto& f : fields) {
    const auto eq = f.find('=');
    if (eq != std::string::npos) m[f.substr(0, eq)] = f.substr(eq + 1);
  }
  return m;
}

inline const std::string& require(const std::map<std::string, std::string>& m, const std::string& key,
                                  const std::string& path) {
  auto it = m.find(key);
  if (it == m.end()) throw IoError(path + ": header lacks '" + key + "'");
  return it->second;
}

/// Recovers a uniform axis from its distinct values in order of appearance.
inline AxisSpec axis_from_values(Parameter p, const std::vector<double>& v, const std::string& path) {
  if (v.size() < 2) throw IoError(path + ": axis '" + to_string(p) + "' has fewer than two points");
  AxisSpec a{p, v.front(), v.back(), static_cast<int>(v.size())};
  a.validate();
  return a;
}

}  // namespace detail

// ---------------------------------------------------------------- grid

inline void write_grid_csv(const std::string& path, const ScanGrid& g) {
  auto f = detail::open_out(path);
  const std::string p1 = to_string(g.axis1.param), p2 = to_string(g.axis2.param);
  f << "# " << p1 << ',' << p2 << ",fixed=" << to_string(g.fixed_param) << ':' << format_double(g.fixed_value)
    << ",engine=" << to_string(g.engine) << ",j=" << g.j << ",N=" << format_double(g.normalization) << '\n';
  f << p1 << ',' << p2 << ",eta,status\n";
  for (int a = 0; a < g.axis1.n_points; ++a)
    for (int b = 0; b < g.axis2.n_points; ++b)
      f << format_double(g.axis1.value(a)) << ',' << format_double(g.axis2.value(b)) << ','
        << format_double(g.eta(a, b)) << ',' << to_string(g.cell_status(a, b)) << '\n';
}

inline ScanGrid read_grid_csv(const std::string& path) {
  const auto t = detail::read_csv(path, 4);
  if (t.meta.size() < 2) throw IoError(path + ": header lacks parameter names");
  const auto m = detail::meta_map(t.meta);
  ScanGrid g;
  const Parameter p1 = parse_parameter(t.meta[0]), p2 = parse_parameter(t.meta[1]);
  const std::string fixed = detail::require(m, "fixed", path);
  const auto colon = fixed.find(':');
  if (colon == std::string::npos) throw IoError(path + ": malformed fixed field");
  g.fixed_param = parse_parameter(fixed.substr(0, colon));
  g.fixed_value = parse_double(fixed.substr(colon + 1));
  g.engine = parse_engine(detail::require(m, "engine", path));
  g.j = static_cast<int>(parse_integer(detail::require(m, "j", path)));
  g.normalization = parse_double(detail::require(m, "N", path));

  std::vector<double> v1, v2;
  for (const auto& r : t.rows) {
    const double a = parse_double(r[0]), b = parse_double(r[1]);
    if (v1.empty() || v1.back() != a) v1.push_back(a);
    if (v1.size() == 1) v2.push_back(b);
  }
  g.axis1 = detail::axis_from_values(p1, v1, path);
  g.axis2 = detail::axis_from_values(p2, v2, path);
  if (t.rows.size() != v1.size() * v2.size()) throw IoError(path + ": row count does not match axes");
  g.eta.resize(g.axis1.n_points, g.axis2.n_points);
  g.status.resize(t.rows.size());
  g.seconds.assign(t.rows.size(), 0.0);
  for (std::size_t c = 0; c < t.rows.size(); ++c) {
    const int a = static_cast<int>(c / v2.size()), b = static_cast<int>(c % v2.size());
    g.eta(a, b) = parse_double(t.rows[c][2]);
    g.status[c] = parse_status(t.rows[c][3]);
  }
  return g;
}

inline nlohmann::json grid_metadata(const ScanGrid& g) {
  auto axis = [](const AxisSpec& a) {
    return nlohmann::json{{"param", to_string(a.param)}, {"min", a.min}, {"max", a.max}, {"n_points", a.n_points}};
  };
  std::vector<std::string> status;
  status.reserve(g.status.size());
  for (auto s : g.status) status.push_back(to_string(s));
  return {{"axis1", axis(g.axis1)},
          {"axis2", axis(g.axis2)},
          {"fixed", {{"param", to_string(g.fixed_param)}, {"value", g.fixed_value}}},
          {"engine", to_string(g.engine)},
          {"j", g.j},
          {"N", g.normalization},
          {"layout", "float64 little-endian, row-major, axis1 outer"},
          {"status", status}};
}

/// Raw eta values plus `<path>.json` describing axes and cell status.
inline void write_grid_binary(const std::string& path, const ScanGrid& g) {
  {
    auto f = detail::open_out(path, std::ios::out | std::ios::binary);
    for (int a = 0; a < g.axis1.n_points; ++a) {
      for (int b = 0; b < g.axis2.n_points; ++b) {
        std::uint64_t bits = std::bit_cast<std::uint64_t>(g.eta(a, b));
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        char bytes[8];
        std::memcpy(bytes, &bits, 8);
        f.write(bytes, 8);
      }
    }
  }
  auto side = detail::open_out(path + ".json");
  side << grid_metadata(g).dump(2) << '\n';
}

inline ScanGrid read_grid_binary(const std::string& path) {
  auto side = detail::open_in(path + ".json");
  nlohmann::json meta;
  try {
    side >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ".json: " + e.what());
  }
  auto axis = [](const nlohmann::json& a) {
    AxisSpec s{parse_parameter(a.at("param").get<std::string>()), a.at("min").get<double>(), a.at("max").get<double>(),
               a.at("n_points").get<int>()};
    s.validate();
    return s;
  };
  ScanGrid g;
  try {
    g.axis1 = axis(meta.at("axis1"));
    g.axis2 = axis(meta.at("axis2"));
    g.fixed_param = parse_parameter(meta.at("fixed").at("param").get<std::string>());
    g.fixed_value = meta.at("fixed").at("value").get<double>();
    g.engine = parse_engine(meta.at("engine").get<std::string>());
    g.j = meta.at("j").get<int>();
    g.normalization = meta.at("N").get<double>();
    for (const auto& s : meta.at("status")) g.status.push_back(parse_status(s.get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ".json: " + e.what());
  }
  const std::size_t cells = static_cast<std::size_t>(g.axis1.n_points) * g.axis2.n_points;
  if (g.status.size() != cells) throw IoError(path + ".json: status length does not match axes");
  g.seconds.assign(cells, 0.0);
  g.eta.resize(g.axis1.n_points, g.axis2.n_points);
  auto f = detail::open_in(path, std::ios::in | std::ios::binary);
  for (std::size_t c = 0; c < cells; ++c) {
    char bytes[8];
    if (!f.read(bytes, 8)) throw IoError(path + ": truncated binary grid");
    std::uint64_t bits;
    std::memcpy(&bits, bytes, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    g.eta(static_cast<Eigen::Index>(c / g.axis2.n_points), static_cast<Eigen::Index>(c % g.axis2.n_points)) =
        std::bit_cast<double>(bits);
  }
  return g;
}

// ---------------------------------------------------------------- frames

struct FrameSequenceResult {
  std::vector<std::string> files;
  std::vector<std::pair<double, std::string>> failures;  // (beta, message)
  std::vector<std::string> warnings;
};

inline std::string frame_file_name(std::size_t index, double beta, bool binary) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "frame_%04zu_beta_%.6f.%s", index, beta, binary ? "bin" : "csv");
  return buf;
}

/// One (k, tau) grid per beta, written to out_dir. A frame that fails to
/// compute or write is reported and the remaining frames still run.
inline FrameSequenceResult frame_sequence(const std::vector<double>& betas, const AxisSpec& k_axis,
                                          const AxisSpec& tau_axis, const EngineSettings& settings,
                                          std::uint64_t seed, const std::string& out_dir, bool binary = false) {
  if (k_axis.param != Parameter::K || tau_axis.param != Parameter::Tau)
    throw std::invalid_argument("frame_sequence: axes must be k and tau");
  k_axis.validate();
  tau_axis.validate();
  settings.validate();
  FrameSequenceResult out;
  if (betas.empty()) {
    out.warnings.emplace_back("empty beta list, no frames written");
    return out;
  }
  for (std::size_t i = 0; i < betas.size(); ++i) {
    try {
      ScanRequest req{k_axis, tau_axis, betas[i], settings};
      const ScanGrid g = scan_grid(req, seed);
      const std::string path = out_dir + "/" + frame_file_name(i, betas[i], binary);
      if (binary) {
        write_grid_binary(path, g);
      } else {
        write_grid_csv(path, g);
      }
      out.files.push_back(path);
    } catch (const std::exception& e) {
      out.failures.emplace_back(betas[i], e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------- series

inline void write_series_csv(const std::string& path, const Series& s) {
  auto f = detail::open_out(path);
  f << "# " << to_string(s.param) << ",fixed=";
  bool first = true;
  for (Parameter p : {Parameter::K, Parameter::Beta, Parameter::Tau}) {
    if (p == s.param) continue;
    if (!first) f << ';';
    f << to_string(p) << ':' << format_double(get_param(s.fixed, p));
    first = false;
  }
  f << ",engine=" << to_string(s.engine) << ",j=" << s.j << ",N=" << format_double(s.normalization) << '\n';
  f << "param,eta,eta_over_N\n";
  for (std::size_t i = 0; i < s.values.size(); ++i)
    f << format_double(s.values[i]) << ',' << format_double(s.eta[i]) << ',' << format_double(s.eta_over_n[i]) << '\n';
}

inline Series read_series_csv(const std::string& path) {
  const auto t = detail::read_csv(path, 3);
  if (t.meta.empty()) throw IoError(path + ": header lacks parameter name");
  const auto m = detail::meta_map(t.meta);
  Series s;
  s.param = parse_parameter(t.meta[0]);
  for (const auto& item : split(detail::require(m, "fixed", path), ';')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw IoError(path + ": malformed fixed field");
    set_param(s.fixed, parse_parameter(item.substr(0, colon)), parse_double(item.substr(colon + 1)));
  }
  s.engine = parse_engine(detail::require(m, "engine", path));
  s.j = static_cast<int>(parse_integer(detail::require(m, "j", path)));
  s.normalization = parse_double(detail::require(m, "N", path));
  for (const auto& r : t.rows) {
    s.values.push_back(parse_double(r[0]));
    s.eta.push_back(parse_double(r[1]));
    s.eta_over_n.push_back(parse_double(r[2]));
    s.status.push_back(std::isfinite(s.eta.back()) ? CellStatus::Ok : CellStatus::Failed);
  }
  return s;
}

// ---------------------------------------------------------------- spectrum

struct SpectrumTable {
  int j = 0;
  double k = 0.0, beta = 0.0, tau = 0.0;
  std::vector<Complex> lambda;
  std::vector<double> residual;

  static SpectrumTable from(const SpectrumResult& r) {
    SpectrumTable t{r.j, r.k, r.beta, r.tau, {}, {}};
    for (const auto& p : r.pairs) {
      t.lambda.push_back(p.lambda);
      t.residual.push_back(p.residual);
    }
    return t;
  }
};

inline void write_spectrum_csv(const std::string& path, const SpectrumResult& r) {
  auto f = detail::open_out(path);
  f << "# j=" << r.j << ",k=" << format_double(r.k) << ",beta=" << format_double(r.beta)
    << ",tau=" << format_double(r.tau) << ",krylov_dim=" << r.krylov_dim << ",tol=" << format_double(r.tol)
    << ",restarts=" << r.iterations << ",converged=" << (r.converged ? 1 : 0) << '\n';
  f << "index,re,im,abs,residual\n";
  for (std::size_t i = 0; i < r.pairs.size(); ++i) {
    const auto& p = r.pairs[i];
    f << i + 1 << ',' << format_double(p.lambda.real()) << ',' << format_double(p.lambda.imag()) << ','
      << format_double(std::abs(p.lambda)) << ',' << format_double(p.residual) << '\n';
  }
}

inline SpectrumTable read_spectrum_csv(const std::string& path) {
  const auto t = detail::read_csv(path, 5);
  const auto m = detail::meta_map(t.meta);
  SpectrumTable s;
  s.j = static_cast<int>(parse_integer(detail::require(m, "j", path)));
  s.k = parse_double(detail::require(m, "k", path));
  s.beta = parse_double(detail::require(m, "beta", path));
  s.tau = parse_double(detail::require(m, "tau", path));
  for (const auto& r : t.rows) {
    s.lambda.emplace_back(parse_double(r[1]), parse_double(r[2]));
    s.residual.push_back(parse_double(r[4]));
  }
  return s;
}

// ---------------------------------------------------------------- wigner

/// mu-major: all phi values for the first mu, then the next mu.
inline void write_wigner_csv(const std::string& path, const WignerGrid& w) {
  auto f = detail::open_out(path);
  f << "# j=" << w.j << ",n_mu=" << w.n_mu << ",n_phi=" << w.n_phi << '\n';
  f << "mu,phi,re_w,im_w\n";
  for (int i = 0; i < w.n_mu; ++i)
    for (int l = 0; l < w.n_phi; ++l) {
      const Complex v = w.values(i, l);
      f << format_double(w.mu[static_cast<std::size_t>(i)]) << ',' << format_double(w.phi[static_cast<std::size_t>(l)])
        << ',' << format_double(v.real()) << ',' << format_double(v.imag()) << '\n';
    }
}

inline WignerGrid read_wigner_csv(const std::string& path) {
  const auto t = detail::read_csv(path, 4);
  const auto m = detail::meta_map(t.meta);
  WignerGrid w;
  w.j = static_cast<int>(parse_integer(detail::require(m, "j", path)));
  w.n_mu = static_cast<int>(parse_integer(detail::require(m, "n_mu", path)));
  w.n_phi = static_cast<int>(parse_integer(detail::require(m, "n_phi", path)));
  if (w.n_mu < 1 || w.n_phi < 1 || t.rows.size() != static_cast<std::size_t>(w.n_mu) * w.n_phi)
    throw IoError(path + ": row count does not match n_mu x n_phi");
  w.values.resize(w.n_mu, w.n_phi);
  w.mu.resize(static_cast<std::size_t>(w.n_mu));
  w.phi.resize(static_cast<std::size_t>(w.n_phi));
  for (std::size_t c = 0; c < t.rows.size(); ++c) {
    const int i = static_cast<int>(c / w.n_phi), l = static_cast<int>(c % w.n_phi);
    if (l == 0) w.mu[static_cast<std::size_t>(i)] = parse_double(t.rows[c][0]);
    if (i == 0) w.phi[static_cast<std::size_t>(l)] = parse_double(t.rows[c][1]);
    w.values(i, l) = Complex(parse_double(t.rows[c][2]), parse_double(t.rows[c][3]));
  }
  return w;
}

// ---------------------------------------------------------------- limit cycle

struct LimitCycleRecord {
  MapParams params;
  std::vector<ClassicalState> points;  // empty: no cycle found
};

inline void write_limit_cycle_csv(const std::string& path, const LimitCycleRecord& r) {
  auto f = detail::open_out(path);
  f << "# k=" << format_double(r.params.k) << ",beta=" << format_double(r.params.beta)
    << ",tau=" << format_double(r.params.tau) << ",period=" << r.points.size() << '\n';
  f << "index,mu,phi\n";
  for (std::size_t i = 0; i < r.points.size(); ++i)
    f << i << ',' << format_double(r.points[i].mu) << ',' << format_double(r.points[i].phi) << '\n';
}

inline LimitCycleRecord read_limit_cycle_csv(const std::string& path) {
  const auto t = detail::read_csv(path, 3);
  const auto m = detail::meta_map(t.meta);
  LimitCycleRecord r;
  r.params.k = parse_double(detail::require(m, "k", path));
  r.params.beta = parse_double(detail::require(m, "beta", path));
  r.params.tau = parse_double(detail::require(m, "tau", path));
  for (const auto& row : t.rows) r.points.push_back({parse_double(row[1]), parse_double(row[2])});
  if (r.points.size() != static_cast<std::size_t>(parse_integer(detail::require(m, "period", path))))
    throw IoError(path + ": period does not match row count");
  return r;
}

// ---------------------------------------------------------------- manifest

inline void write_manifest(const std::string& path, const nlohmann::json& manifest) {
  auto f = detail::open_out(path);
  f << manifest.dump(2) << '\n';
}

}  // namespace kicktop
