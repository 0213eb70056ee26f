#pragma once

// Angular-momentum algebra for a single integer spin j.
//
// Basis convention used throughout the library: index i in [0, 2j+1) is the
// Jz eigenstate |j, m> with m = i - j.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace kicktop {

using Complex = std::complex<double>;
using RealMatrix = Eigen::MatrixXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// Identification of the kick normalisation J with the quantum number j.
/// Used in the torsion phase k/(2J) and in the dissipation time scale
/// gamma*t = tau/(2J). Set to 0.5 to study J = j + 1/2.
inline constexpr double kJOffset = 0.0;

class SpinParams {
 public:
  explicit SpinParams(int j) : j_(j) {
    if (j < 1) throw std::domain_error("SpinParams: j must be >= 1, got " + std::to_string(j));
  }

  int j() const noexcept { return j_; }
  int dim() const noexcept { return 2 * j_ + 1; }
  /// The J entering k/(2J) and tau = 2 J gamma t.
  double big_j() const noexcept { return j_ + kJOffset; }

  int m_of(int index) const noexcept { return index - j_; }
  int index_of(int m) const noexcept { return m + j_; }
  bool valid_m(int m) const noexcept { return m >= -j_ && m <= j_; }

 private:
  int j_;
};

/// <j, m-1 | J- | j, m> = sqrt((j+m)(j-m+1)).
inline double ladder_coefficient(int j, int m) {
  if (j < 0 || m < -j || m > j)
    throw std::domain_error("ladder_coefficient: m=" + std::to_string(m) +
                            " outside [-j, j] for j=" + std::to_string(j));
  return std::sqrt(static_cast<double>(j + m) * static_cast<double>(j - m + 1));
}

namespace detail {

// <j, m+1 | J+ | j, m>
inline double raise_coefficient(int j, int m) {
  return std::sqrt(static_cast<double>(j - m) * static_cast<double>(j + m + 1));
}

}  // namespace detail

/// Real matrix d^j_{m'm}(beta) = <j m'| exp(-i beta Jy) |j m>, rows m', cols m.
///
/// Jy is unitarily equivalent to Jx through exp(-i pi/2 Jz), and Jx is real
/// symmetric tridiagonal with exact integer eigenvalues, so
///   d = P V exp(-i beta diag(w)) V^T P^dagger,  P = diag(exp(-i pi m / 2)).
/// The phases (-i)^{m'} i^{m} are folded in analytically; the imaginary part
/// vanishes up to rounding.
inline RealMatrix wigner_d_matrix(int j, double beta) {
  const SpinParams sp(j);
  const int n = sp.dim();

  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(n - 1);
  for (int i = 0; i + 1 < n; ++i) sub(i) = 0.5 * detail::raise_coefficient(j, sp.m_of(i));
  Eigen::SelfAdjointEigenSolver<RealMatrix> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw std::runtime_error("wigner_d_matrix: tridiagonal solver failed");

  // Eigenvalues of Jx are exactly -j..j; use the exact values for the phases.
  ComplexMatrix phased(n, n);
  for (int c = 0; c < n; ++c) {
    const double w = static_cast<double>(c - j);
    phased.col(c) = es.eigenvectors().col(c).cast<Complex>() * std::polar(1.0, -beta * w);
  }
  const ComplexMatrix ex = phased * es.eigenvectors().transpose().cast<Complex>();

  // i^{m - m'} = i^{(m - m') mod 4}
  static constexpr Complex kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  RealMatrix d(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const int p = (((c - r) % 4) + 4) % 4;
      d(r, c) = (kIPow[p] * ex(r, c)).real();
    }
  }
  return d;
}

namespace detail {

inline void check_cg_args(int j, int m1, int m2, int k, int q) {
  if (j < 0 || k < 0 || k > 2 * j || std::abs(q) > k || std::abs(m1) > j || std::abs(m2) > j)
    throw std::domain_error("clebsch_gordan: arguments out of range (j=" + std::to_string(j) +
                            ", m1=" + std::to_string(m1) + ", m2=" + std::to_string(m2) +
                            ", k=" + std::to_string(k) + ", q=" + std::to_string(q) + ")");
}

inline long double log_factorial(int n) { return std::lgamma(static_cast<long double>(n) + 1.0L); }

}  // namespace detail

/// Racah closed form for <j m1; j m2 | k q> in extended (long double)
/// precision. The alternating sum loses roughly log10 of its largest term
/// relative to the result, so this is only trusted for small j; see
/// clebsch_gordan for the general entry point.
inline double clebsch_gordan_racah(int j, int m1, int m2, int k, int q) {
  detail::check_cg_args(j, m1, m2, k, q);
  if (q != m1 + m2) return 0.0;
  using detail::log_factorial;
  const int j1 = j, j2 = j;
  const long double log_pre =
      0.5L * (std::log(static_cast<long double>(2 * k + 1)) + log_factorial(j1 + j2 - k) +
              log_factorial(j1 - j2 + k) + log_factorial(-j1 + j2 + k) - log_factorial(j1 + j2 + k + 1) +
              log_factorial(j1 + m1) + log_factorial(j1 - m1) + log_factorial(j2 + m2) +
              log_factorial(j2 - m2) + log_factorial(k + q) + log_factorial(k - q));
  const int z_min = std::max({0, j2 - k - m1, j1 - k + m2});
  const int z_max = std::min({j1 + j2 - k, j1 - m1, j2 + m2});
  long double sum = 0.0L;
  for (int z = z_min; z <= z_max; ++z) {
    const long double log_den = log_factorial(z) + log_factorial(j1 + j2 - k - z) +
                                log_factorial(j1 - m1 - z) + log_factorial(j2 + m2 - z) +
                                log_factorial(k - j2 + m1 + z) + log_factorial(k - j1 - m2 + z);
    const long double term = std::exp(log_pre - log_den);
    sum += (z % 2 == 0) ? term : -term;
  }
  return static_cast<double>(sum);
}

namespace detail {

// Sign of the m1 = j component of an eigenvector column, determined reliably
// even when that component is far below rounding level: run the
// eigen-recurrence from the top end with a positive seed (stable while the
// solution grows) until the computed eigenvector is clearly resolved, and
// compare signs there.
inline int top_sign(const Eigen::VectorXd& diag, const Eigen::VectorXd& off, double lambda,
                    const Eigen::Ref<const Eigen::VectorXd>& v) {
  const int n = static_cast<int>(diag.size());
  const int top = n - 1;
  const double scale = v.cwiseAbs().maxCoeff();
  if (std::abs(v(top)) > 1e-3 * scale) return v(top) > 0 ? 1 : -1;

  double upper = 0.0;  // recurrence value at index i + 1
  double cur = 1.0;    // at index i
  for (int i = top; i > 0; --i) {
    const double above = (i + 1 <= top) ? off(i) * upper : 0.0;
    const double next = ((lambda - diag(i)) * cur - above) / off(i - 1);
    upper = cur;
    cur = next;
    const double mag = std::max(std::abs(cur), std::abs(upper));
    if (mag > 1e100) {
      cur /= mag;
      upper /= mag;
    }
    if (std::abs(v(i - 1)) > 1e-3 * scale) return (cur > 0) == (v(i - 1) > 0) ? 1 : -1;
  }
  return 1;
}

}  // namespace detail

/// Coefficients <j m1; j q-m1 | k q> for one sector q >= 0 as an orthogonal
/// matrix: row m1 - max(-j, q-j), column k - q.
///
/// They are the eigenvectors of J^2 restricted to the sector, a symmetric
/// tridiagonal matrix with eigenvalues k(k+1), k = q..2j. Columns are signed
/// so that the m1 = j coefficient is positive (Condon-Shortley).
inline RealMatrix coupling_sector(int j, int q) {
  if (j < 1 || q < 0 || q > 2 * j) throw std::domain_error("coupling_sector: q out of range");
  const int lo = std::max(-j, q - j);
  const int n = 2 * j + 1 - q;
  if (n == 1) return RealMatrix::Ones(1, 1);
  const double jj = static_cast<double>(j) * (j + 1);

  Eigen::VectorXd diag(n);
  Eigen::VectorXd off(n - 1);
  for (int i = 0; i < n; ++i) {
    const int m1 = lo + i;
    const int m2 = q - m1;
    diag(i) = 2.0 * jj + 2.0 * m1 * m2;
    if (i + 1 < n) off(i) = detail::raise_coefficient(j, m1) * ladder_coefficient(j, m2);
  }

  Eigen::SelfAdjointEigenSolver<RealMatrix> es;
  es.computeFromTridiagonal(diag, off, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw std::runtime_error("coupling_sector: tridiagonal solver failed");
  RealMatrix vecs = es.eigenvectors();

  for (int c = 0; c < n; ++c) {
    const int k = q + c;
    const double lambda = static_cast<double>(k) * (k + 1);
    if (detail::top_sign(diag, off, lambda, vecs.col(c)) < 0) vecs.col(c) *= -1.0;
  }
  return vecs;
}

/// Clebsch-Gordan table for the coupling j (x) j. Stores the sectors q >= 0;
/// negative q follow from <j -m1; j -m2 | k -q> = (-1)^{2j-k} <j m1; j m2 | k q>.
class CouplingTable {
 public:
  explicit CouplingTable(int j) : j_(SpinParams(j).j()) {
    sectors_.reserve(2 * j_ + 1);
    for (int q = 0; q <= 2 * j_; ++q) sectors_.push_back(coupling_sector(j_, q));
  }

  int j() const noexcept { return j_; }

  int m1_min(int q) const noexcept { return std::max(-j_, q - j_); }
  int m1_max(int q) const noexcept { return std::min(j_, q + j_); }
  int sector_size(int q) const noexcept { return 2 * j_ + 1 - std::abs(q); }

  const RealMatrix& sector(int q) const {
    if (q < 0 || q > 2 * j_) throw std::domain_error("CouplingTable::sector: q out of range");
    return sectors_[q];
  }

  double operator()(int m1, int m2, int k, int q) const {
    detail::check_cg_args(j_, m1, m2, k, q);
    if (q != m1 + m2) return 0.0;
    if (q >= 0) return sectors_[q](m1 - m1_min(q), k - q);
    const double sign = ((2 * j_ - k) % 2 == 0) ? 1.0 : -1.0;
    return sign * sectors_[-q](-m1 - m1_min(-q), k + q);
  }

 private:
  int j_;
  std::vector<RealMatrix> sectors_;
};

/// Threshold below which the Racah sum in long double is accurate to ~1e-14.
inline constexpr int kRacahMaxJ = 20;

/// <j m1; j m2 | k q>, Condon-Shortley convention.
///
/// Small j uses the Racah sum; larger j diagonalises the single q sector
/// needed (O((2j)^2) work per call). Callers needing many coefficients should
/// build a CouplingTable once.
inline double clebsch_gordan(int j, int m1, int m2, int k, int q) {
  detail::check_cg_args(j, m1, m2, k, q);
  if (q != m1 + m2) return 0.0;
  if (j <= kRacahMaxJ) return clebsch_gordan_racah(j, m1, m2, k, q);

  if (q >= 0) return coupling_sector(j, q)(m1 - std::max(-j, q - j), k - q);
  const double sign = ((2 * j - k) % 2 == 0) ? 1.0 : -1.0;
  return sign * coupling_sector(j, -q)(-m1 - std::max(-j, -q - j), k + q);
}

}  // namespace kicktop
