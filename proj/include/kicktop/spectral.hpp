#pragma once

// Leading spectrum of the superoperator by matrix-free Krylov-Schur
// (thick-restart Arnoldi, Stewart 2001) in complex arithmetic.
//
// Operator vectors are column-major vectorisations of (2j+1)x(2j+1) matrices.

#include "kicktop/quantum.hpp"
#include "kicktop/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace kicktop {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ArnoldiOptions {
  int n_eigs = 30;
  int krylov_dim = 120;
  double tol = 1e-9;
  int max_restarts = 40;
  std::uint64_t seed = 0;
};

struct Eigenpair {
  Complex lambda;
  ComplexMatrix eigenmatrix;  // unit Frobenius norm
  double residual = 0.0;      // ||S v - lambda v|| / ||v||, recomputed post hoc
  bool converged = false;
};

struct SpectrumResult {
  int j = 0;
  double k = 0.0, beta = 0.0, tau = 0.0;
  int krylov_dim = 0;
  double tol = 0.0;
  int iterations = 0;  // restart cycles performed
  int applications = 0;
  bool converged = false;
  std::vector<Eigenpair> pairs;  // sorted by |lambda| descending
};

namespace detail {

/// Descending |lambda|; near-equal moduli broken toward larger real part,
/// then larger imaginary part.
inline bool spectral_before(const Complex& a, const Complex& b) {
  constexpr double kTie = 1e-10;
  const double da = std::abs(a), db = std::abs(b);
  if (std::abs(da - db) > kTie * std::max(1.0, std::max(da, db))) return da > db;
  if (std::abs(a.real() - b.real()) > kTie) return a.real() > b.real();
  return a.imag() > b.imag();
}

// Swap adjacent diagonal entries k, k+1 of the upper triangular t, updating
// the accumulated Schur vectors q.
inline void swap_schur(ComplexMatrix& t, ComplexMatrix& q, Eigen::Index k) {
  const Complex a = t(k, k), b = t(k + 1, k + 1);
  if (a == b) return;
  // Eigenvector of the 2x2 block for eigenvalue b.
  Complex x1 = t(k, k + 1), x2 = b - a;
  const double nrm = std::hypot(std::abs(x1), std::abs(x2));
  x1 /= nrm;
  x2 /= nrm;
  Eigen::Matrix2cd g;
  g << x1, -std::conj(x2), x2, std::conj(x1);
  t.middleRows(k, 2) = g.adjoint() * t.middleRows(k, 2);
  t.middleCols(k, 2) = t.middleCols(k, 2) * g;
  q.middleCols(k, 2) = q.middleCols(k, 2) * g;
  t(k + 1, k) = 0.0;
  t(k, k) = b;
  t(k + 1, k + 1) = a;
}

// Reorder a complex Schur form into spectral_before order (insertion sort
// with adjacent swaps), so ties on the unit circle select consistently.
inline void sort_schur(ComplexMatrix& t, ComplexMatrix& q) {
  const Eigen::Index n = t.rows();
  for (Eigen::Index i = 1; i < n; ++i) {
    for (Eigen::Index k = i; k > 0; --k) {
      if (spectral_before(t(k, k), t(k - 1, k - 1))) {
        swap_schur(t, q, k - 1);
      } else {
        break;
      }
    }
  }
}

// Eigenvector of upper triangular t for the eigenvalue at position i.
inline ComplexVector triangular_eigenvector(const ComplexMatrix& t, Eigen::Index i) {
  const double small = std::numeric_limits<double>::epsilon() * std::max(1.0, t.cwiseAbs().maxCoeff());
  ComplexVector y = ComplexVector::Zero(t.rows());
  y(i) = 1.0;
  const Complex lam = t(i, i);
  for (Eigen::Index l = i - 1; l >= 0; --l) {
    Complex s = 0.0;
    for (Eigen::Index r = l + 1; r <= i; ++r) s += t(l, r) * y(r);
    Complex den = t(l, l) - lam;
    if (std::abs(den) < small) den = small;
    y(l) = -s / den;
  }
  return y;
}

}  // namespace detail

/// Generic Krylov-Schur on a linear operator `apply(in, out)` of dimension `dim`.
/// Returns Ritz pairs (vector form) for the n_eigs largest-modulus eigenvalues.
struct KrylovResult {
  std::vector<Complex> values;
  std::vector<ComplexVector> vectors;
  std::vector<double> ritz_residuals;
  int iterations = 0;
  int applications = 0;
  bool converged = false;
};

template <typename Op>
KrylovResult krylov_schur(Op&& apply, Eigen::Index dim, const ComplexVector& start, const ArnoldiOptions& opt) {
  const int m = opt.krylov_dim;
  const int nev = opt.n_eigs;
  if (nev < 1 || m <= nev || m > dim) throw std::invalid_argument("krylov_schur: need 1 <= n_eigs < krylov_dim <= dim");
  if (start.size() != dim) throw std::invalid_argument("krylov_schur: start vector dimension mismatch");

  ComplexMatrix basis(dim, m + 1);
  ComplexMatrix h = ComplexMatrix::Zero(m + 1, m);
  basis.col(0) = start.normalized();
  int kept = 0;
  KrylovResult res;
  ComplexVector w(dim);

  ComplexMatrix t, q;
  Eigen::RowVectorXcd bvec;
  int size = m;

  for (int cycle = 0;; ++cycle) {
    res.iterations = cycle + 1;
    size = m;
    bool breakdown = false;
    for (int i = kept; i < m; ++i) {
      apply(basis.col(i), w);
      ++res.applications;
      const double wnorm0 = w.norm();
      // Modified Gram-Schmidt with one full reorthogonalisation pass.
      for (int pass = 0; pass < 2; ++pass) {
        for (int l = 0; l <= i; ++l) {
          const Complex c = basis.col(l).dot(w);
          h(l, i) += c;
          w.noalias() -= c * basis.col(l);
        }
      }
      const double beta = w.norm();
      h(i + 1, i) = beta;
      if (beta <= 1e-13 * std::max(wnorm0, 1.0)) {
        // Invariant subspace: the decomposition is exact.
        h(i + 1, i) = 0.0;
        size = i + 1;
        breakdown = true;
        break;
      }
      basis.col(i + 1) = w / beta;
    }

    Eigen::ComplexSchur<ComplexMatrix> schur(h.topLeftCorner(size, size));
    if (schur.info() != Eigen::Success) throw NumericalError("krylov_schur: Schur decomposition failed");
    t = schur.matrixT();
    q = schur.matrixU();
    t.triangularView<Eigen::StrictlyLower>().setZero();
    detail::sort_schur(t, q);
    bvec = h.row(size).head(size) * q;

    const int wanted = std::min(nev, size);
    res.ritz_residuals.assign(static_cast<std::size_t>(wanted), 0.0);
    bool all_ok = true;
    for (int i = 0; i < wanted; ++i) {
      const ComplexVector y = detail::triangular_eigenvector(t, i);
      const double r = std::abs((bvec.head(i + 1) * y.head(i + 1)).value()) / y.norm();
      res.ritz_residuals[static_cast<std::size_t>(i)] = r;
      if (!(r < opt.tol)) all_ok = false;
    }

    if (breakdown || all_ok || cycle >= opt.max_restarts) {
      res.converged = breakdown ? size >= nev : all_ok;
      for (int i = 0; i < wanted; ++i) {
        const ComplexVector y = detail::triangular_eigenvector(t, i);
        ComplexVector x = basis.leftCols(size) * (q * y);
        x.normalize();
        res.values.push_back(t(i, i));
        res.vectors.push_back(std::move(x));
      }
      return res;
    }

    // Thick restart: keep the leading p Schur vectors.
    const int p = std::clamp(nev + (m - nev) / 2, nev + 1, m - 1);
    const ComplexMatrix kept_basis = basis.leftCols(size) * q.leftCols(p);
    basis.col(p) = basis.col(size);
    basis.leftCols(p) = kept_basis;
    h.setZero();
    h.topLeftCorner(p, p) = t.topLeftCorner(p, p);
    h.row(p).head(p) = bvec.head(p);
    kept = p;
  }
}

/// Vectorised superoperator application.
struct SuperoperatorAction {
  const FloquetOperator* floquet;
  const DissipatorBlocks* blocks;

  template <typename In, typename Out>
  void operator()(const In& in, Out& out) const {
    const int n = blocks->dim();
    const Eigen::Map<const ComplexMatrix> rho(in.data(), n, n);
    const ComplexMatrix next = apply_superoperator(*floquet, *blocks, rho);
    out = Eigen::Map<const ComplexVector>(next.data(), static_cast<Eigen::Index>(n) * n);
  }
};

/// Maximally mixed state plus seeded complex noise of relative size 1e-3.
inline ComplexVector default_start_vector(int n, std::uint64_t seed) {
  StreamRng rng(seed, 0x5ea7);
  ComplexVector v(static_cast<Eigen::Index>(n) * n);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = Complex(rng.normal(), rng.normal());
  v *= 1e-3 / v.norm();
  for (int d = 0; d < n; ++d) v(static_cast<Eigen::Index>(d) * n + d) += 1.0 / std::sqrt(static_cast<double>(n));
  return v;
}

inline SpectrumResult arnoldi_leading_spectrum(const FloquetOperator& f, const DissipatorBlocks& blocks,
                                               const ArnoldiOptions& opt = {}) {
  if (f.j != blocks.j()) throw std::invalid_argument("arnoldi_leading_spectrum: spin mismatch");
  const int n = blocks.dim();
  const Eigen::Index dim = static_cast<Eigen::Index>(n) * n;
  const SuperoperatorAction op{&f, &blocks};
  KrylovResult kr = krylov_schur(op, dim, default_start_vector(n, opt.seed), opt);

  SpectrumResult out;
  out.j = blocks.j();
  out.tau = blocks.tau();
  out.krylov_dim = opt.krylov_dim;
  out.tol = opt.tol;
  out.iterations = kr.iterations;
  out.applications = kr.applications;
  out.converged = true;

  ComplexVector image(dim);
  for (std::size_t i = 0; i < kr.values.size(); ++i) {
    Eigenpair ep;
    ep.lambda = kr.values[i];
    op(kr.vectors[i], image);
    ++out.applications;
    ep.residual = (image - ep.lambda * kr.vectors[i]).norm();
    ep.converged = ep.residual < opt.tol;
    out.converged = out.converged && ep.converged;
    ep.eigenmatrix = Eigen::Map<const ComplexMatrix>(kr.vectors[i].data(), n, n);
    out.pairs.push_back(std::move(ep));
  }
  std::stable_sort(out.pairs.begin(), out.pairs.end(),
                   [](const Eigenpair& a, const Eigenpair& b) { return detail::spectral_before(a.lambda, b.lambda); });
  return out;
}

/// Convenience overload that records the map parameters in the result.
inline SpectrumResult leading_spectrum(const SpinParams& sp, double k, double beta, double tau,
                                       const ArnoldiOptions& opt = {}) {
  const FloquetOperator f = build_floquet(sp, k, beta);
  const DissipatorBlocks blocks = build_dissipator_blocks(sp, tau);
  SpectrumResult r = arnoldi_leading_spectrum(f, blocks, opt);
  r.k = k;
  r.beta = beta;
  return r;
}

inline constexpr double kUnitEigenTol = 1e-8;

/// Hermitian part of the lambda = 1 eigenmatrix before normalisation,
/// ||X - X^dagger||_max with X scaled to unit trace. Diagnostic only.
inline double invariant_hermiticity_defect(const SpectrumResult& spec) {
  if (spec.pairs.empty()) throw NumericalError("invariant_hermiticity_defect: empty spectrum");
  const ComplexMatrix& v = spec.pairs.front().eigenmatrix;
  const ComplexMatrix x = v / v.trace();
  return (x - x.adjoint()).cwiseAbs().maxCoeff();
}

/// Physical invariant state from the lambda ~ 1 sector.
///
/// When several eigenvalues lie within 1e-8 of 1 (e.g. the unitary channel)
/// the returned state is the projection of the identity onto that sector,
/// which is one of many valid fixed points. Result is Hermitised, scaled to
/// unit trace, with negative eigenvalues clipped to 0 and renormalised.
inline DensityMatrix invariant_state(const SpectrumResult& spec) {
  if (spec.pairs.empty()) throw NumericalError("invariant_state: empty spectrum");
  std::vector<const ComplexMatrix*> sector;
  for (const auto& p : spec.pairs)
    if (std::abs(p.lambda - 1.0) < kUnitEigenTol) sector.push_back(&p.eigenmatrix);
  if (sector.empty()) throw NumericalError("invariant_state: no eigenvalue within 1e-8 of 1");

  const Eigen::Index n = sector.front()->rows();
  ComplexMatrix x;
  if (sector.size() == 1) {
    x = *sector.front();
  } else {
    ComplexMatrix cols(n * n, static_cast<Eigen::Index>(sector.size()));
    for (std::size_t c = 0; c < sector.size(); ++c)
      cols.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const ComplexVector>(sector[c]->data(), n * n);
    const Eigen::HouseholderQR<ComplexMatrix> qr(cols);
    const ComplexMatrix u = qr.householderQ() * ComplexMatrix::Identity(n * n, cols.cols());
    ComplexVector ident = ComplexVector::Zero(n * n);
    for (Eigen::Index d = 0; d < n; ++d) ident(d * n + d) = 1.0;
    const ComplexVector proj = u * (u.adjoint() * ident);
    x = Eigen::Map<const ComplexMatrix>(proj.data(), n, n);
  }
  const Complex tr = x.trace();
  if (std::abs(tr) < 1e-10 * std::max(1.0, x.norm()))
    throw NumericalError("invariant_state: invariant eigenmatrix has vanishing trace");
  x /= tr;
  const ComplexMatrix herm = 0.5 * (x + x.adjoint());

  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(herm);
  Eigen::VectorXd w = es.eigenvalues().cwiseMax(0.0);
  const double total = w.sum();
  if (!(total > 0.0)) throw NumericalError("invariant_state: no positive weight after clipping");
  w /= total;
  return es.eigenvectors() * w.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
}

struct LeadingEigenstate {
  Complex lambda;
  ComplexMatrix matrix;
};

/// Second entry of the sorted spectrum, unit Frobenius norm, phase fixed so
/// that the largest-modulus element is real positive.
inline LeadingEigenstate leading_eigenstate(const SpectrumResult& spec) {
  if (spec.pairs.size() < 2) throw NumericalError("leading_eigenstate: fewer than two eigenpairs");
  const Eigenpair& p = spec.pairs[1];
  ComplexMatrix mat = p.eigenmatrix / p.eigenmatrix.norm();
  Eigen::Index r = 0, c = 0;
  mat.cwiseAbs().maxCoeff(&r, &c);
  const Complex z = mat(r, c);
  mat *= std::conj(z) / std::abs(z);
  return {p.lambda, mat};
}

}  // namespace kicktop
