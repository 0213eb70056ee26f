#include "kicktop/spectral.hpp"
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>

using namespace kicktop;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<Complex> dense_eigenvalues_by_modulus(const oracle::CM& s) {
  Eigen::ComplexEigenSolver<oracle::CM> es(s, false);
  std::vector<Complex> v(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(v.begin(), v.end(), [](Complex a, Complex b) { return std::abs(a) > std::abs(b); });
  return v;
}

double distance_to_set(Complex z, const std::vector<Complex>& set) {
  double best = 1e300;
  for (Complex w : set) best = std::min(best, std::abs(z - w));
  return best;
}

}  // namespace

TEST_CASE("unitary channel spectrum", "[spectral]") {
  const int j = 5, n = 11;
  const SpinParams sp(j);
  ArnoldiOptions opt;
  opt.n_eigs = 30;
  opt.krylov_dim = 121;
  const SpectrumResult r = leading_spectrum(sp, 3.0, 1.1, 0.0, opt);
  REQUIRE(r.converged);
  REQUIRE(r.pairs.size() == 30);

  Eigen::ComplexEigenSolver<oracle::CM> es(oracle::floquet(j, 3.0, 1.1), false);
  std::vector<Complex> products;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) products.push_back(es.eigenvalues()(a) * std::conj(es.eigenvalues()(b)));

  for (const auto& p : r.pairs) {
    CHECK_THAT(std::abs(p.lambda), WithinAbs(1.0, 1e-9));
    CHECK(distance_to_set(p.lambda, products) < 1e-9);
    CHECK(p.residual < 1e-9);
  }
}

TEST_CASE("Arnoldi matches dense diagonalisation", "[spectral]") {
  const int j = 5;
  const oracle::CM dense = oracle::superoperator(j, 4.5, 1.5, 0.18);
  const auto ref = dense_eigenvalues_by_modulus(dense);
  ArnoldiOptions opt;
  opt.n_eigs = 15;
  opt.krylov_dim = 60;
  const SpectrumResult r = leading_spectrum(SpinParams(j), 4.5, 1.5, 0.18, opt);
  REQUIRE(r.converged);
  REQUIRE(r.pairs.size() == 15);

  // match against the leading dense values, each used once
  std::vector<Complex> pool(ref.begin(), ref.begin() + 20);
  for (const auto& p : r.pairs) {
    auto it = std::min_element(pool.begin(), pool.end(),
                               [&](Complex a, Complex b) { return std::abs(a - p.lambda) < std::abs(b - p.lambda); });
    CHECK(std::abs(*it - p.lambda) < 1e-8);
    pool.erase(it);
  }
  for (std::size_t i = 0; i < r.pairs.size(); ++i) CHECK_THAT(std::abs(r.pairs[i].lambda), WithinAbs(std::abs(ref[i]), 1e-8));

  // residual certificate recomputed with the dense matrix
  for (const auto& p : r.pairs) {
    const oracle::CV v = oracle::vec(p.eigenmatrix);
    CHECK((dense * v - p.lambda * v).norm() / v.norm() < opt.tol);
    CHECK_THAT(p.eigenmatrix.norm(), WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("conjugate pairs and conjugated eigenmatrices", "[spectral]") {
  ArnoldiOptions opt;
  opt.n_eigs = 16;
  opt.krylov_dim = 60;
  const SpectrumResult r = leading_spectrum(SpinParams(6), 6.5, 1.75, 0.18, opt);
  REQUIRE(r.converged);
  int pairs_checked = 0;
  for (std::size_t i = 0; i + 1 < r.pairs.size(); ++i) {
    const auto& a = r.pairs[i];
    if (std::abs(a.lambda.imag()) < 1e-8) continue;
    const auto it = std::find_if(r.pairs.begin(), r.pairs.end(),
                                 [&](const Eigenpair& b) { return std::abs(b.lambda - std::conj(a.lambda)) < 1e-8; });
    if (it == r.pairs.end()) {
      // the partner may be cut off only at the end of the list
      CHECK(i + 2 >= r.pairs.size());
      continue;
    }
    const Complex overlap = (it->eigenmatrix.conjugate().cwiseProduct(a.eigenmatrix.adjoint())).sum();
    CHECK_THAT(std::abs(overlap), WithinAbs(1.0, 1e-8));
    ++pairs_checked;
  }
  CHECK(pairs_checked > 0);
}

TEST_CASE("sorted order and tie breaking", "[spectral]") {
  using detail::spectral_before;
  CHECK(spectral_before({0.9, 0.0}, {0.5, 0.0}));
  CHECK(spectral_before({0.6, 0.0}, {-0.6, 0.0}));
  CHECK(spectral_before({0.3, 0.4}, {0.3, -0.4}));
  CHECK_FALSE(spectral_before({0.3, -0.4}, {0.3, 0.4}));

  ArnoldiOptions opt;
  opt.n_eigs = 12;
  opt.krylov_dim = 40;
  const SpectrumResult r = leading_spectrum(SpinParams(4), 2.0, 0.8, 0.3, opt);
  for (std::size_t i = 1; i < r.pairs.size(); ++i) CHECK(std::abs(r.pairs[i - 1].lambda) >= std::abs(r.pairs[i].lambda) - 1e-10);
}

TEST_CASE("random parameters: unit leading eigenvalue and contraction", "[spectral]") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ArnoldiOptions opt;
  opt.n_eigs = 8;
  opt.krylov_dim = 40;
  for (int t = 0; t < 12; ++t) {
    const int j = 3 + t % 5;
    const double k = 8.0 * u(rng), beta = 3.0 * u(rng), tau = 0.05 + u(rng);
    const SpectrumResult r = leading_spectrum(SpinParams(j), k, beta, tau, opt);
    INFO("j=" << j << " k=" << k << " beta=" << beta << " tau=" << tau);
    REQUIRE(r.converged);
    CHECK(std::abs(r.pairs.front().lambda - 1.0) < 1e-8);
    CHECK(std::abs(r.pairs.front().eigenmatrix.trace()) > 1e-3);
    for (const auto& p : r.pairs) CHECK(std::abs(p.lambda) <= 1.0 + 1e-9);
    CHECK(invariant_hermiticity_defect(r) < 1e-9);
  }
}

TEST_CASE("invariant states", "[spectral]") {
  ArnoldiOptions opt;
  opt.n_eigs = 4;
  opt.krylov_dim = 30;

  const int j = 4;
  const DensityMatrix dark = invariant_state(leading_spectrum(SpinParams(j), 0.0, 0.0, 0.4, opt));
  ComplexMatrix expect = ComplexMatrix::Zero(9, 9);
  expect(0, 0) = 1.0;
  CHECK((dark - expect).cwiseAbs().maxCoeff() < 1e-8);

  // unitary channel: degenerate fixed-point sector
  ArnoldiOptions full;
  full.n_eigs = 20;
  full.krylov_dim = 81;
  const DensityMatrix fixed = invariant_state(leading_spectrum(SpinParams(j), 2.5, 1.2, 0.0, full));
  CHECK((fixed - fixed.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THAT(fixed.trace().real(), WithinAbs(1.0, 1e-12));
  const oracle::CM f = oracle::floquet(j, 2.5, 1.2);
  CHECK((f * fixed * f.adjoint() - fixed).cwiseAbs().maxCoeff() < 1e-8);

  // dissipative channel: fixed point of the dense superoperator
  const DensityMatrix rho = invariant_state(leading_spectrum(SpinParams(5), 4.5, 1.5, 0.18, opt));
  const oracle::CM dense = oracle::superoperator(5, 4.5, 1.5, 0.18);
  CHECK((oracle::unvec(dense * oracle::vec(rho), 11) - rho).cwiseAbs().maxCoeff() < 1e-8);
  CHECK_THAT(rho.trace().real(), WithinAbs(1.0, 1e-12));
  const double min_eig = Eigen::SelfAdjointEigenSolver<ComplexMatrix>(rho, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  CHECK(min_eig >= -1e-12);
}

TEST_CASE("invariant_state failure modes", "[spectral]") {
  SpectrumResult empty;
  CHECK_THROWS_AS(invariant_state(empty), NumericalError);

  SpectrumResult no_unit;
  no_unit.pairs.push_back({Complex(0.9, 0.0), ComplexMatrix::Identity(3, 3), 0.0, true});
  CHECK_THROWS_AS(invariant_state(no_unit), NumericalError);

  SpectrumResult traceless;
  ComplexMatrix z = ComplexMatrix::Zero(3, 3);
  z(0, 0) = 1.0;
  z(2, 2) = -1.0;
  traceless.pairs.push_back({Complex(1.0, 0.0), z, 0.0, true});
  CHECK_THROWS_AS(invariant_state(traceless), NumericalError);
}

TEST_CASE("leading eigenstate normalisation", "[spectral]") {
  ArnoldiOptions opt;
  opt.n_eigs = 6;
  opt.krylov_dim = 30;
  const SpectrumResult r = leading_spectrum(SpinParams(5), 6.5, 1.75, 0.18, opt);
  const LeadingEigenstate le = leading_eigenstate(r);
  CHECK(le.lambda == r.pairs[1].lambda);
  CHECK_THAT(le.matrix.norm(), WithinAbs(1.0, 1e-12));
  Eigen::Index rr = 0, cc = 0;
  le.matrix.cwiseAbs().maxCoeff(&rr, &cc);
  CHECK(le.matrix(rr, cc).real() > 0.0);
  CHECK(std::abs(le.matrix(rr, cc).imag()) < 1e-14);

  SpectrumResult one;
  one.pairs.push_back({Complex(1.0, 0.0), ComplexMatrix::Identity(3, 3), 0.0, true});
  CHECK_THROWS_AS(leading_eigenstate(one), NumericalError);
}

TEST_CASE("solver contract", "[spectral]") {
  const SpinParams sp(3);
  ArnoldiOptions opt;
  opt.n_eigs = 10;
  opt.krylov_dim = 10;
  CHECK_THROWS_AS(leading_spectrum(sp, 1, 1, 0.1, opt), std::invalid_argument);
  opt.krylov_dim = 50;
  CHECK_THROWS_AS(leading_spectrum(sp, 1, 1, 0.1, opt), std::invalid_argument);

  // determinism for a fixed seed
  opt.krylov_dim = 30;
  opt.seed = 9;
  const SpectrumResult a = leading_spectrum(sp, 2, 1, 0.2, opt);
  const SpectrumResult b = leading_spectrum(sp, 2, 1, 0.2, opt);
  for (std::size_t i = 0; i < a.pairs.size(); ++i) CHECK(a.pairs[i].lambda == b.pairs[i].lambda);

  // an impossible tolerance without restarts is reported, not thrown
  ArnoldiOptions tight;
  tight.n_eigs = 8;
  tight.krylov_dim = 12;
  tight.tol = 1e-30;
  tight.max_restarts = 0;
  const SpectrumResult c = leading_spectrum(SpinParams(6), 6.5, 1.75, 0.18, tight);
  CHECK_FALSE(c.converged);
  CHECK(c.pairs.size() == 8);
  CHECK(c.iterations == 1);
}

TEST_CASE("generic Krylov-Schur on a known operator", "[spectral]") {
  const Eigen::Index n = 200;
  ComplexVector diag(n);
  for (Eigen::Index i = 0; i < n; ++i) diag(i) = std::polar(1.0 - 0.004 * i, 0.37 * i);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  ComplexMatrix basis(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) basis(r, c) = Complex(g(rng), g(rng));
  const ComplexMatrix a = basis * diag.asDiagonal() * basis.inverse();
  ComplexVector start(n);
  for (Eigen::Index i = 0; i < n; ++i) start(i) = Complex(g(rng), g(rng));

  ArnoldiOptions opt;
  opt.n_eigs = 6;
  opt.krylov_dim = 40;
  opt.max_restarts = 200;
  opt.tol = 1e-8;
  const KrylovResult r = krylov_schur([&](const auto& in, auto& out) { out = a * in; }, n, start, opt);
  REQUIRE(r.converged);
  for (int i = 0; i < 6; ++i) CHECK(std::abs(r.values[static_cast<std::size_t>(i)] - diag(i)) < 1e-6);
}
