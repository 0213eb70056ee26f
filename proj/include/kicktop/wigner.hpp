#pragma once

// Multipole (coupled) representation of a spin-j density matrix and the
// spherical Wigner function
//
//   rho_{kappa q} = sum_{m m'} rho_{m m'} t^{j m m'}_{kappa q},
//   t^{j m m'}_{kappa q} = (-1)^{j-m-q} <j m; j -m' | kappa q>,   q = m - m',
//   W(theta, phi) = sum_{kappa q} rho_{kappa q} Y_{kappa q}(theta, phi).
//
// The multipole rank is called kappa to keep k for the torsion strength.

#include "kicktop/classical.hpp"
#include "kicktop/quantum.hpp"
#include "kicktop/spin.hpp"

#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace kicktop {

class CoupledTensor {
 public:
  explicit CoupledTensor(int j) : j_(SpinParams(j).j()), data_(static_cast<std::size_t>((2 * j + 1) * (2 * j + 1))) {}

  int j() const noexcept { return j_; }
  int max_kappa() const noexcept { return 2 * j_; }

  Complex& operator()(int kappa, int q) { return data_[index(kappa, q)]; }
  const Complex& operator()(int kappa, int q) const { return data_[index(kappa, q)]; }

  const std::vector<Complex>& data() const noexcept { return data_; }

 private:
  std::size_t index(int kappa, int q) const {
    if (kappa < 0 || kappa > 2 * j_ || std::abs(q) > kappa)
      throw std::out_of_range("CoupledTensor: (kappa, q) out of range");
    return static_cast<std::size_t>(kappa * kappa + q + kappa);
  }

  int j_;
  std::vector<Complex> data_;
};

namespace detail {

inline double parity(int n) { return (n % 2 == 0) ? 1.0 : -1.0; }

}  // namespace detail

// Each diagonal q of rho is one matrix-vector product with the coupling
// sector: u_a = rho_{m, m-q} (-1)^{j-m-q} ordered by m. For q < 0 the stored
// |q| sector is reused with reversed rows and the (-1)^{2j-kappa} factor.
inline CoupledTensor to_coupled(const DensityMatrix& rho, const CouplingTable& table) {
  const int j = table.j();
  const int n = 2 * j + 1;
  check_dims(rho, n, "to_coupled");
  CoupledTensor out(j);
  Eigen::VectorXcd u;
  for (int q = -2 * j; q <= 2 * j; ++q) {
    const int p = std::abs(q);
    const int len = n - p;
    const int m_lo = std::max(-j, q - j);
    u.resize(len);
    for (int a = 0; a < len; ++a) {
      const int m = m_lo + a;
      const Complex z = rho(m + j, m - q + j);
      // q < 0: stored sector |q| is indexed by -m1, i.e. reversed.
      const int slot = (q >= 0) ? a : len - 1 - a;
      u(slot) = z * detail::parity(j - m - q);
    }
    const RealMatrix& c = table.sector(p);
    const Eigen::VectorXcd r = c.transpose().cast<Complex>() * u;
    for (int col = 0; col < len; ++col) {
      const int kappa = p + col;
      out(kappa, q) = (q >= 0) ? r(col) : r(col) * detail::parity(2 * j - kappa);
    }
  }
  return out;
}

inline CoupledTensor to_coupled(const DensityMatrix& rho) {
  if (rho.rows() < 3 || rho.rows() % 2 == 0) throw std::invalid_argument("to_coupled: dimension must be odd and >= 3");
  return to_coupled(rho, CouplingTable(static_cast<int>(rho.rows() - 1) / 2));
}

inline DensityMatrix from_coupled(const CoupledTensor& t, const CouplingTable& table) {
  const int j = table.j();
  if (t.j() != j) throw std::invalid_argument("from_coupled: spin mismatch");
  const int n = 2 * j + 1;
  DensityMatrix rho = DensityMatrix::Zero(n, n);
  Eigen::VectorXcd r;
  for (int q = -2 * j; q <= 2 * j; ++q) {
    const int p = std::abs(q);
    const int len = n - p;
    const int m_lo = std::max(-j, q - j);
    r.resize(len);
    for (int col = 0; col < len; ++col) {
      const int kappa = p + col;
      r(col) = (q >= 0) ? t(kappa, q) : t(kappa, q) * detail::parity(2 * j - kappa);
    }
    const Eigen::VectorXcd u = table.sector(p).cast<Complex>() * r;
    for (int a = 0; a < len; ++a) {
      const int m = m_lo + a;
      const int slot = (q >= 0) ? a : len - 1 - a;
      rho(m + j, m - q + j) = u(slot) * detail::parity(j - m - q);
    }
  }
  return rho;
}

inline DensityMatrix from_coupled(const CoupledTensor& t) { return from_coupled(t, CouplingTable(t.j())); }

/// Orthonormal associated Legendre values Ybar_l^p(x) for l = p..l_max at
/// fixed order p >= 0, Condon-Shortley phase included, so that
/// Y_{l p}(theta, phi) = Ybar_l^p(cos theta) e^{i p phi}.
inline void normalized_legendre_column(int p, int l_max, double x, std::vector<double>& out) {
  out.assign(static_cast<std::size_t>(std::max(0, l_max - p + 1)), 0.0);
  if (l_max < p) return;
  const double s = std::sqrt(std::max(0.0, (1.0 - x) * (1.0 + x)));
  double pmm = 1.0 / std::sqrt(4.0 * std::numbers::pi);
  for (int i = 1; i <= p; ++i) pmm *= -std::sqrt((2.0 * i + 1.0) / (2.0 * i)) * s;
  out[0] = pmm;
  if (l_max == p) return;
  double prev = pmm;
  double cur = std::sqrt(2.0 * p + 3.0) * x * pmm;
  out[1] = cur;
  for (int l = p + 2; l <= l_max; ++l) {
    const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - static_cast<double>(p) * p));
    const double b = std::sqrt((static_cast<double>(l - 1) * (l - 1) - static_cast<double>(p) * p) /
                               (4.0 * (l - 1) * (l - 1) - 1.0));
    const double next = a * (x * cur - b * prev);
    prev = cur;
    cur = next;
    out[static_cast<std::size_t>(l - p)] = cur;
  }
}

inline Complex spherical_harmonic(int kappa, int q, double mu, double phi) {
  if (kappa < 0 || std::abs(q) > kappa) throw std::domain_error("spherical_harmonic: need 0 <= |q| <= kappa");
  if (!(std::abs(mu) <= 1.0)) throw std::domain_error("spherical_harmonic: |mu| must be <= 1");
  const int p = std::abs(q);
  std::vector<double> col;
  normalized_legendre_column(p, kappa, mu, col);
  const Complex y = col.back() * std::polar(1.0, p * phi);
  return q >= 0 ? y : detail::parity(p) * std::conj(y);
}

struct WignerGrid {
  int j = 0;
  int n_mu = 0;
  int n_phi = 0;
  std::vector<double> mu;   // uniform on [-1, 1], endpoints included
  std::vector<double> phi;  // uniform on [0, 2 pi)
  Eigen::MatrixXcd values;  // (mu index, phi index)

  ClassicalState point(int i, int l) const { return {mu[static_cast<std::size_t>(i)], phi[static_cast<std::size_t>(l)]}; }
};

inline std::vector<double> uniform_mu_axis(int n_mu) {
  std::vector<double> mu(static_cast<std::size_t>(n_mu));
  for (int i = 0; i < n_mu; ++i) mu[static_cast<std::size_t>(i)] = -1.0 + 2.0 * i / (n_mu - 1);
  return mu;
}

inline std::vector<double> uniform_phi_axis(int n_phi) {
  std::vector<double> phi(static_cast<std::size_t>(n_phi));
  for (int l = 0; l < n_phi; ++l) phi[static_cast<std::size_t>(l)] = kTwoPi * l / n_phi;
  return phi;
}

/// W on the given mu values and a uniform phi grid.
///
/// The phi dependence is separated: W(mu, phi) = sum_q g_q(mu) e^{i q phi}
/// with g_q(mu) = sum_kappa rho_{kappa q} Ybar_kappa^q(mu), using
/// Y_{kappa,-p} = (-1)^p conj(Y_{kappa p}).
inline WignerGrid wigner_from_tensor(const CoupledTensor& t, std::vector<double> mu_axis, int n_phi) {
  if (mu_axis.size() < 2 || n_phi < 2) throw std::invalid_argument("wigner_grid: grid sizes must be >= 2");
  const int j = t.j();
  const int kmax = 2 * j;
  WignerGrid w;
  w.j = j;
  w.n_mu = static_cast<int>(mu_axis.size());
  w.n_phi = n_phi;
  w.mu = std::move(mu_axis);
  w.phi = uniform_phi_axis(n_phi);
  w.values.resize(w.n_mu, n_phi);

  // e^{i q phi_l} for q = -2j..2j
  Eigen::MatrixXcd phases(2 * kmax + 1, n_phi);
  for (int l = 0; l < n_phi; ++l)
    for (int q = -kmax; q <= kmax; ++q) phases(q + kmax, l) = std::polar(1.0, q * w.phi[static_cast<std::size_t>(l)]);

  std::vector<double> col;
  Eigen::RowVectorXcd g(2 * kmax + 1);
  for (int i = 0; i < w.n_mu; ++i) {
    const double x = w.mu[static_cast<std::size_t>(i)];
    for (int p = 0; p <= kmax; ++p) {
      normalized_legendre_column(p, kmax, x, col);
      Complex gp = 0.0, gm = 0.0;
      for (int kappa = p; kappa <= kmax; ++kappa) {
        const double y = col[static_cast<std::size_t>(kappa - p)];
        gp += t(kappa, p) * y;
        if (p > 0) gm += t(kappa, -p) * y;
      }
      g(kmax + p) = gp;
      if (p > 0) g(kmax - p) = gm * detail::parity(p);
    }
    w.values.row(i) = g * phases;
  }
  return w;
}

inline WignerGrid wigner_grid(const DensityMatrix& rho, int n_mu, int n_phi, const CouplingTable& table) {
  if (n_mu < 2 || n_phi < 2) throw std::invalid_argument("wigner_grid: grid sizes must be >= 2");
  return wigner_from_tensor(to_coupled(rho, table), uniform_mu_axis(n_mu), n_phi);
}

inline WignerGrid wigner_grid(const DensityMatrix& rho, int n_mu = 200, int n_phi = 400) {
  if (rho.rows() < 3 || rho.rows() % 2 == 0) throw std::invalid_argument("wigner_grid: dimension must be odd and >= 3");
  return wigner_grid(rho, n_mu, n_phi, CouplingTable(static_cast<int>(rho.rows() - 1) / 2));
}

namespace detail {

// Uniform-grid quadrature weights: trapezoid plus Gregory end corrections
// through sixth differences,
//   I = T - h sum_k g_k (nabla^k f_n + (-1)^k delta^k f_0).
// The order drops when the grid is too short for the difference stencils.
inline std::vector<double> gregory_weights(int n, double h) {
  constexpr double kGamma[6] = {1.0 / 12.0, 1.0 / 24.0, 19.0 / 720.0, 3.0 / 160.0, 863.0 / 60480.0, 275.0 / 24192.0};
  std::vector<double> w(static_cast<std::size_t>(n), h);
  w.front() = w.back() = 0.5 * h;
  const int order = std::min(6, (n - 1) / 2);
  for (int k = 1; k <= order; ++k) {
    double binom = 1.0;  // C(k, i)
    for (int i = 0; i <= k; ++i) {
      if (i > 0) binom = binom * (k - i + 1) / i;
      // nabla^k f_n = sum_i (-1)^i C(k,i) f_{n-i}
      w[static_cast<std::size_t>(n - 1 - i)] -= h * kGamma[k - 1] * parity(i) * binom;
      // (-1)^k delta^k f_0 = sum_i (-1)^k (-1)^{k-i} C(k,i) f_i = sum_i (-1)^i C(k,i) f_i
      w[static_cast<std::size_t>(i)] -= h * kGamma[k - 1] * parity(i) * binom;
    }
  }
  return w;
}

}  // namespace detail

/// Distribution over the mu axis: the phi integral of Re W divided by
/// sqrt(4 pi / (2j+1)), so that it integrates to Tr rho over [-1, 1].
inline std::vector<double> marginal_mu(const WignerGrid& w) {
  const double norm = std::sqrt(4.0 * std::numbers::pi / (2.0 * w.j + 1.0));
  const double dphi = kTwoPi / w.n_phi;
  std::vector<double> out(static_cast<std::size_t>(w.n_mu));
  for (int i = 0; i < w.n_mu; ++i) out[static_cast<std::size_t>(i)] = w.values.row(i).real().sum() * dphi / norm;
  return out;
}

/// Integral of W over the unit sphere (area element d mu d phi).
inline Complex sphere_integral(const WignerGrid& w) {
  const double h = 2.0 / (w.n_mu - 1);
  const auto weights = detail::gregory_weights(w.n_mu, h);
  const double dphi = kTwoPi / w.n_phi;
  Complex total = 0.0;
  for (int i = 0; i < w.n_mu; ++i) total += weights[static_cast<std::size_t>(i)] * w.values.row(i).sum() * dphi;
  return total;
}

/// Grid point with the largest real part of W.
inline ClassicalState wigner_argmax(const WignerGrid& w) {
  Eigen::Index i = 0, l = 0;
  w.values.real().maxCoeff(&i, &l);
  return w.point(static_cast<int>(i), static_cast<int>(l));
}

}  // namespace kicktop
