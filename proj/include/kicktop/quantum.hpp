#pragma once

// Quantum dissipative kicked top: rho' = D_tau F rho F^dagger.
//
// F = exp(-i k/(2J) Jz^2) exp(-i beta Jy). D_tau = exp(Lambda gamma t) with
// Lambda rho = 2 J- rho J+ - J+J- rho - rho J+J-, and gamma t = tau/(2J).
// The generator only couples rho_{m+1,m'+1} to rho_{m,m'}, so
// it splits into one upper-bidiagonal block per diagonal q = m - m' of rho.

#include "kicktop/expm.hpp"
#include "kicktop/spin.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace kicktop {

/// (2j+1) x (2j+1) complex matrix rho_{mm'} = <jm|rho|jm'>; index i <-> m = i - j.
using DensityMatrix = ComplexMatrix;

struct FloquetOperator {
  int j = 0;
  ComplexMatrix matrix;
};

/// Exact exp(Lambda gamma t) restricted to every diagonal q of rho. Block q
/// acts on the vector (rho_{m, m-q}) ordered by increasing m.
class DissipatorBlocks {
 public:
  DissipatorBlocks(int j, double tau, std::vector<RealMatrix> blocks)
      : j_(j), tau_(tau), blocks_(std::move(blocks)) {}

  int j() const noexcept { return j_; }
  int dim() const noexcept { return 2 * j_ + 1; }
  double tau() const noexcept { return tau_; }

  /// First row index m of diagonal q.
  int m_lo(int q) const noexcept { return std::max(-j_, q - j_); }
  int size(int q) const noexcept { return 2 * j_ + 1 - std::abs(q); }

  /// B_q; B_q = B_{-q}, so only q >= 0 is stored.
  const RealMatrix& block(int q) const {
    if (std::abs(q) > 2 * j_) throw std::out_of_range("DissipatorBlocks::block: q out of range");
    return blocks_[std::abs(q)];
  }

 private:
  int j_;
  double tau_;
  std::vector<RealMatrix> blocks_;
};

inline FloquetOperator build_floquet(const SpinParams& sp, double k, double beta) {
  if (!std::isfinite(k) || !std::isfinite(beta)) throw std::domain_error("build_floquet: non-finite parameter");
  const int n = sp.dim();
  const RealMatrix d = wigner_d_matrix(sp.j(), beta);
  FloquetOperator f{sp.j(), ComplexMatrix(n, n)};
  for (int r = 0; r < n; ++r) {
    const double m = sp.m_of(r);
    const Complex phase = std::polar(1.0, -k * m * m / (2.0 * sp.big_j()));
    f.matrix.row(r) = phase * d.row(r).cast<Complex>();
  }
  return f;
}

/// Generator of diagonal q scaled by gamma t = tau/(2J):
/// (L v)_a = 2 c(m+1) c(m'+1) v_{a+1} - (h(m) + h(m')) v_a, m' = m - q, h = c^2.
inline RealMatrix dissipator_generator_block(const SpinParams& sp, int q, double tau) {
  const int j = sp.j();
  const int lo = std::max(-j, q - j);
  const int n = 2 * j + 1 - std::abs(q);
  const double s = tau / (2.0 * sp.big_j());
  RealMatrix gen = RealMatrix::Zero(n, n);
  for (int a = 0; a < n; ++a) {
    const int m = lo + a;
    const int mp = m - q;
    const double hm = static_cast<double>(j + m) * (j - m + 1);
    const double hmp = static_cast<double>(j + mp) * (j - mp + 1);
    gen(a, a) = -s * (hm + hmp);
    if (a + 1 < n) gen(a, a + 1) = 2.0 * s * ladder_coefficient(j, m + 1) * ladder_coefficient(j, mp + 1);
  }
  return gen;
}

inline DissipatorBlocks build_dissipator_blocks(const SpinParams& sp, double tau) {
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw std::domain_error("build_dissipator_blocks: tau must be finite and >= 0");
  std::vector<RealMatrix> blocks;
  blocks.reserve(2 * sp.j() + 1);
  for (int q = 0; q <= 2 * sp.j(); ++q) {
    if (tau == 0.0) {
      const int n = 2 * sp.j() + 1 - q;
      blocks.push_back(RealMatrix::Identity(n, n));
    } else {
      blocks.push_back(expm(dissipator_generator_block(sp, q, tau), MatrixStructure::UpperTriangular));
    }
  }
  return DissipatorBlocks(sp.j(), tau, std::move(blocks));
}

inline void check_dims(const DensityMatrix& rho, int n, const char* where) {
  if (rho.rows() != n || rho.cols() != n)
    throw std::invalid_argument(std::string(where) + ": expected " + std::to_string(n) + "x" + std::to_string(n) +
                                " matrix, got " + std::to_string(rho.rows()) + "x" + std::to_string(rho.cols()));
}

inline DensityMatrix apply_dissipator(const DissipatorBlocks& blocks, const DensityMatrix& rho) {
  const int n = blocks.dim();
  const int j = blocks.j();
  check_dims(rho, n, "apply_dissipator");
  DensityMatrix out(n, n);
  Eigen::VectorXd re, im, re_out, im_out;
  for (int q = -2 * j; q <= 2 * j; ++q) {
    const int len = blocks.size(q);
    const int r0 = blocks.m_lo(q) + j;  // row index of first element
    const int c0 = r0 - q;
    re.resize(len);
    im.resize(len);
    for (int a = 0; a < len; ++a) {
      const Complex z = rho(r0 + a, c0 + a);
      re(a) = z.real();
      im(a) = z.imag();
    }
    const auto tri = blocks.block(q).triangularView<Eigen::Upper>();
    re_out.noalias() = tri * re;
    im_out.noalias() = tri * im;
    for (int a = 0; a < len; ++a) out(r0 + a, c0 + a) = Complex(re_out(a), im_out(a));
  }
  return out;
}

inline DensityMatrix apply_unitary(const FloquetOperator& f, const DensityMatrix& rho) {
  check_dims(rho, static_cast<int>(f.matrix.rows()), "apply_unitary");
  ComplexMatrix tmp;
  tmp.noalias() = f.matrix * rho;
  ComplexMatrix out;
  out.noalias() = tmp * f.matrix.adjoint();
  return out;
}

inline DensityMatrix apply_superoperator(const FloquetOperator& f, const DissipatorBlocks& blocks,
                                         const DensityMatrix& rho) {
  if (f.j != blocks.j()) throw std::invalid_argument("apply_superoperator: Floquet and dissipator spin mismatch");
  return apply_dissipator(blocks, apply_unitary(f, rho));
}

/// Spin coherent state exp(-i phi Jz) exp(-i theta Jy)|j, j>, mu = cos(theta).
inline DensityMatrix coherent_state(const SpinParams& sp, double mu, double phi) {
  if (!(std::abs(mu) <= 1.0)) throw std::domain_error("coherent_state: |mu| must be <= 1");
  const int j = sp.j();
  const int n = sp.dim();
  const double cos2 = 0.5 * (1.0 + mu);  // cos^2(theta/2)
  const double sin2 = 0.5 * (1.0 - mu);
  ComplexVector amp = ComplexVector::Zero(n);
  for (int i = 0; i < n; ++i) {
    const int m = sp.m_of(i);
    const int up = j + m, down = j - m;
    if ((up > 0 && cos2 == 0.0) || (down > 0 && sin2 == 0.0)) continue;
    const double log_binom = std::lgamma(2.0 * j + 1) - std::lgamma(up + 1.0) - std::lgamma(down + 1.0);
    double log_mag = 0.5 * log_binom;
    if (up > 0) log_mag += 0.5 * up * std::log(cos2);
    if (down > 0) log_mag += 0.5 * down * std::log(sin2);
    amp(i) = std::polar(std::exp(log_mag), -m * phi);
  }
  amp.normalize();
  return amp * amp.adjoint();
}

/// 1 / sum_m P(m)^2 with P(m) = Re rho_mm.
inline double participation_ratio_quantum(const DensityMatrix& rho) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < rho.rows(); ++i) s += rho(i, i).real() * rho(i, i).real();
  if (!(s > 0.0)) throw std::domain_error("participation_ratio_quantum: zero diagonal");
  return 1.0 / s;
}

/// <Jz> / J for a unit-trace state.
inline double mean_mu(const SpinParams& sp, const DensityMatrix& rho) {
  double s = 0.0;
  for (int i = 0; i < sp.dim(); ++i) s += sp.m_of(i) * rho(i, i).real();
  return s / sp.j();
}

}  // namespace kicktop
