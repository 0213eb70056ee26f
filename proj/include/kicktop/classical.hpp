#pragma once

// Classical dissipative kicked top on the unit sphere, canonical variables
// (mu = cos theta, phi). One step is rotation about y by beta, torsion about
// z by k mu, then the Moebius contraction of mu toward the south pole.

#include "kicktop/random.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kicktop {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct ClassicalState {
  double mu = 0.0;
  double phi = 0.0;
};

struct MapParams {
  double k = 0.0;
  double beta = 0.0;
  double tau = 0.0;

  void validate() const {
    if (!std::isfinite(k) || !std::isfinite(beta) || !std::isfinite(tau))
      throw std::domain_error("MapParams: non-finite parameter");
    if (tau < 0.0) throw std::domain_error("MapParams: tau must be >= 0");
  }
};

inline double wrap_angle(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

namespace detail {

inline double clamp_unit(double x) { return x > 1.0 ? 1.0 : (x < -1.0 ? -1.0 : x); }

}  // namespace detail

/// Rotation by beta around the y axis written in (mu, phi).
///
/// y = sqrt(1-mu^2) sin(phi) is conserved, so sin(phi') = y / sqrt(1-mu'^2)
/// and the branch follows the sign of the rotated x component: phi' =
/// arcsin(...) for x' >= 0, sign(y) pi - arcsin(...) otherwise, with
/// sign(0) = +1. atan2(y, x') is that same branch choice without the
/// ill-conditioning of arcsin near +-1. At the poles phi' is undefined and
/// set to 0.
inline ClassicalState rotate(const ClassicalState& s, double beta) {
  const double cb = std::cos(beta), sb = std::sin(beta);
  const double rho = std::sqrt(std::max(0.0, 1.0 - s.mu * s.mu));
  const double cphi = std::cos(s.phi), sphi = std::sin(s.phi);
  const double mu_new = detail::clamp_unit(s.mu * cb - rho * sb * cphi);
  const double x_new = rho * cphi * cb + s.mu * sb;
  const double y = rho * sphi;
  if (1.0 - mu_new * mu_new <= 0.0 || (x_new == 0.0 && y == 0.0)) return {mu_new, 0.0};
  return {mu_new, wrap_angle(std::atan2(y, x_new))};
}

inline ClassicalState torsion(const ClassicalState& s, double k) { return {s.mu, wrap_angle(s.phi + k * s.mu)}; }

inline ClassicalState dissipate(const ClassicalState& s, double tau) {
  if (tau == 0.0 || s.mu == 1.0 || s.mu == -1.0) return s;
  const double t = std::tanh(tau);
  return {detail::clamp_unit((s.mu - t) / (1.0 - s.mu * t)), s.phi};
}

inline ClassicalState step(const ClassicalState& s, const MapParams& p) {
  return dissipate(torsion(rotate(s, p.beta), p.k), p.tau);
}

/// Uniform initial condition on the (mu, phi) rectangle for trajectory `index`.
inline ClassicalState initial_condition(std::uint64_t seed, std::uint64_t index) {
  StreamRng rng(seed, index);
  const double mu = 2.0 * rng.uniform() - 1.0;
  const double phi = kTwoPi * rng.uniform();
  return {mu, phi};
}

/// Final states of independent trajectories. Trajectory i draws its initial
/// condition from stream (seed, i), so the result does not depend on how the
/// range is split over workers.
inline std::vector<ClassicalState> evolve_ensemble(const MapParams& p, std::int64_t n_traj, std::int64_t n_steps,
                                                   std::uint64_t seed) {
  p.validate();
  if (n_traj < 1) throw std::invalid_argument("evolve_ensemble: n_traj must be >= 1");
  if (n_steps < 0) throw std::invalid_argument("evolve_ensemble: n_steps must be >= 0");
  std::vector<ClassicalState> out(static_cast<std::size_t>(n_traj));
  for (std::int64_t i = 0; i < n_traj; ++i) {
    ClassicalState s = initial_condition(seed, static_cast<std::uint64_t>(i));
    for (std::int64_t t = 0; t < n_steps; ++t) s = step(s, p);
    out[static_cast<std::size_t>(i)] = s;
  }
  return out;
}

struct MuHistogram {
  int n_bins = 0;
  std::vector<double> probabilities;

  double bin_width() const { return 2.0 / n_bins; }
  double bin_center(int b) const { return -1.0 + (b + 0.5) * bin_width(); }
};

inline int mu_bin(double mu, int n_bins) {
  int b = static_cast<int>(std::floor((mu + 1.0) * 0.5 * n_bins));
  if (b < 0) b = 0;
  if (b >= n_bins) b = n_bins - 1;
  return b;
}

/// Counts per bin; summing counts is the associative merge used by workers.
inline std::vector<std::int64_t> count_mu(const std::vector<ClassicalState>& states, int n_bins) {
  if (n_bins < 1) throw std::invalid_argument("histogram_mu: n_bins must be >= 1");
  std::vector<std::int64_t> counts(static_cast<std::size_t>(n_bins), 0);
  for (const auto& s : states) ++counts[static_cast<std::size_t>(mu_bin(s.mu, n_bins))];
  return counts;
}

inline MuHistogram histogram_from_counts(const std::vector<std::int64_t>& counts) {
  std::int64_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) throw std::invalid_argument("histogram_mu: empty state list");
  MuHistogram h{static_cast<int>(counts.size()), std::vector<double>(counts.size())};
  for (std::size_t b = 0; b < counts.size(); ++b) h.probabilities[b] = static_cast<double>(counts[b]) / total;
  return h;
}

inline MuHistogram histogram_mu(const std::vector<ClassicalState>& states, int n_bins) {
  if (n_bins < 1) throw std::invalid_argument("histogram_mu: n_bins must be >= 1");
  if (states.empty()) throw std::invalid_argument("histogram_mu: empty state list");
  return histogram_from_counts(count_mu(states, n_bins));
}

inline double participation_ratio(const MuHistogram& h) {
  double s = 0.0;
  for (double p : h.probabilities) s += p * p;
  if (!(s > 0.0)) throw std::domain_error("participation_ratio: empty histogram");
  return 1.0 / s;
}

/// Histogram accumulated over every step after `n_transient` of every
/// trajectory, instead of final points only.
inline MuHistogram histogram_mu_aggregate(const MapParams& p, std::int64_t n_traj, std::int64_t n_steps,
                                          std::int64_t n_transient, int n_bins, std::uint64_t seed) {
  p.validate();
  if (n_bins < 1) throw std::invalid_argument("histogram_mu_aggregate: n_bins must be >= 1");
  std::vector<std::int64_t> counts(static_cast<std::size_t>(n_bins), 0);
  for (std::int64_t i = 0; i < n_traj; ++i) {
    ClassicalState s = initial_condition(seed, static_cast<std::uint64_t>(i));
    for (std::int64_t t = 0; t < n_steps; ++t) {
      s = step(s, p);
      if (t >= n_transient) ++counts[static_cast<std::size_t>(mu_bin(s.mu, n_bins))];
    }
  }
  return histogram_from_counts(counts);
}

inline double great_circle_distance(const ClassicalState& a, const ClassicalState& b) {
  const double ra = std::sqrt(std::max(0.0, 1.0 - a.mu * a.mu));
  const double rb = std::sqrt(std::max(0.0, 1.0 - b.mu * b.mu));
  const double ax = ra * std::cos(a.phi), ay = ra * std::sin(a.phi);
  const double bx = rb * std::cos(b.phi), by = rb * std::sin(b.phi);
  // atan2 of |a x b| and a.b is accurate for small and large angles alike.
  const double cx = ay * b.mu - a.mu * by;
  const double cy = a.mu * bx - ax * b.mu;
  const double cz = ax * by - ay * bx;
  const double cross = std::sqrt(cx * cx + cy * cy + cz * cz);
  const double dot = ax * bx + ay * by + a.mu * b.mu;
  return std::atan2(cross, dot);
}

struct LimitCycleOptions {
  std::int64_t n_transient = 1000;
  int max_period = 64;
  double tol = 1e-8;
  /// Reference initial condition stream.
  std::uint64_t seed = 0;
};

/// Shortest cycle of period <= max_period reached from the reference initial
/// condition after the transient, or nullopt if none recurs within tol.
inline std::optional<std::vector<ClassicalState>> find_limit_cycle(const MapParams& p,
                                                                   const LimitCycleOptions& opt = {}) {
  p.validate();
  if (opt.n_transient < 0) throw std::invalid_argument("find_limit_cycle: n_transient must be >= 0");
  if (opt.max_period < 1) throw std::invalid_argument("find_limit_cycle: max_period must be >= 1");
  ClassicalState s = initial_condition(opt.seed, 0);
  for (std::int64_t t = 0; t < opt.n_transient; ++t) s = step(s, p);

  std::vector<ClassicalState> orbit;
  orbit.reserve(static_cast<std::size_t>(opt.max_period) + 1);
  orbit.push_back(s);
  for (int t = 0; t < opt.max_period; ++t) orbit.push_back(step(orbit.back(), p));
  for (int period = 1; period <= opt.max_period; ++period) {
    if (great_circle_distance(orbit[0], orbit[static_cast<std::size_t>(period)]) < opt.tol)
      return std::vector<ClassicalState>(orbit.begin(), orbit.begin() + period);
  }
  return std::nullopt;
}

}  // namespace kicktop
