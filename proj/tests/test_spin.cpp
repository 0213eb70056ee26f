#include "kicktop/spin.hpp"
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace kicktop;
using Catch::Matchers::WithinAbs;

TEST_CASE("SpinParams index convention", "[spin]") {
  SpinParams sp(3);
  CHECK(sp.dim() == 7);
  CHECK(sp.m_of(0) == -3);
  CHECK(sp.m_of(6) == 3);
  CHECK(sp.index_of(0) == 3);
  CHECK(sp.big_j() == 3.0);
  CHECK_THROWS_AS(SpinParams(0), std::domain_error);
}

TEST_CASE("ladder coefficients", "[spin]") {
  CHECK(ladder_coefficient(1, -1) == 0.0);
  CHECK_THAT(ladder_coefficient(1, 1), WithinAbs(std::sqrt(2.0), 1e-15));
  for (int j : {1, 7, 40}) {
    CHECK(ladder_coefficient(j, -j) == 0.0);
    CHECK(ladder_coefficient(j, j) == std::sqrt(2.0 * j));
  }
  CHECK_THROWS_AS(ladder_coefficient(2, 3), std::domain_error);
  CHECK_THROWS_AS(ladder_coefficient(2, -3), std::domain_error);

  // <j, m-1 | J- | j, m> from the dense oracle
  const int j = 100;
  const auto ops = oracle::spin_ops(j);
  CHECK_THAT(ladder_coefficient(j, 0), WithinAbs(std::sqrt(100.0 * 101.0), 1e-12));
  for (int m = -j + 1; m <= j; m += 7) {
    CHECK_THAT(ladder_coefficient(j, m), WithinAbs(ops.jm(m - 1 + j, m + j).real(), 1e-10));
  }
}

TEST_CASE("Wigner-d simple cases", "[spin]") {
  CHECK((wigner_d_matrix(5, 0.0) - RealMatrix::Identity(11, 11)).cwiseAbs().maxCoeff() < 1e-14);

  const RealMatrix d = wigner_d_matrix(1, std::numbers::pi);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      const int m_row = r - 1, m_col = c - 1;
      const double expect = (m_row == -m_col) ? ((1 - m_col) % 2 == 0 ? 1.0 : -1.0) : 0.0;
      CHECK_THAT(d(r, c), WithinAbs(expect, 1e-14));
    }
  }
  const oracle::CM ref = oracle::rotation_y(1, std::numbers::pi);
  CHECK((d.cast<Complex>() - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Wigner-d matches the dense exponential", "[spin]") {
  for (auto [j, beta] : {std::pair{20, 1.5}, std::pair{3, -2.2}, std::pair{60, 0.4}, std::pair{200, 1.1}}) {
    const oracle::CM ref = oracle::rotation_y(j, beta);
    const RealMatrix d = wigner_d_matrix(j, beta);
    INFO("j = " << j << ", beta = " << beta);
    CHECK((d.cast<Complex>() - ref).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("Wigner-d orthogonality and group law", "[spin]") {
  for (int j : {1, 4, 17, 60}) {
    const int n = 2 * j + 1;
    for (double b1 : {-2.9, -0.3, 0.7, 1.5, 3.1}) {
      const double b2 = 0.37 * b1 + 0.9;
      const RealMatrix d1 = wigner_d_matrix(j, b1), d2 = wigner_d_matrix(j, b2);
      INFO("j = " << j << ", beta = " << b1);
      CHECK((d1.transpose() * d1 - RealMatrix::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-10);
      CHECK((d1 * d2 - wigner_d_matrix(j, b1 + b2)).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((d1 * wigner_d_matrix(j, -b1) - RealMatrix::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("Clebsch-Gordan special values", "[spin][cg]") {
  CHECK(clebsch_gordan(2, 1, 0, 3, 2) == 0.0);
  CHECK_THAT(clebsch_gordan(1, 1, -1, 0, 0), WithinAbs(1.0 / std::sqrt(3.0), 1e-14));
  for (int j : {1, 5, 20, 33}) {
    for (int m = -j; m <= j; ++m) {
      const double expect = ((j - m) % 2 == 0 ? 1.0 : -1.0) / std::sqrt(2.0 * j + 1.0);
      INFO("j = " << j << ", m = " << m);
      CHECK_THAT(clebsch_gordan(j, m, -m, 0, 0), WithinAbs(expect, 1e-12));
    }
  }
  for (int j : {2, 9, 30}) {
    for (int m1 = -j; m1 <= j; m1 += 3) {
      for (int m2 = -j; m2 <= j; m2 += 2) {
        CHECK_THAT(clebsch_gordan(j, m1, m2, 2 * j, m1 + m2), WithinAbs(oracle::cg_stretched(j, m1, m2), 1e-12));
      }
    }
  }
  CHECK_THROWS_AS(clebsch_gordan(2, 3, 0, 2, 3), std::domain_error);
  CHECK_THROWS_AS(clebsch_gordan(2, 0, 0, 5, 0), std::domain_error);
  CHECK_THROWS_AS(clebsch_gordan(2, 0, 0, 1, 2), std::domain_error);
}

TEST_CASE("Clebsch-Gordan against lowering from the highest weight", "[spin][cg]") {
  for (int j : {1, 2, 3}) {
    const int n = 2 * j + 1;
    const auto basis = oracle::coupled_basis(j);
    const CouplingTable table(j);
    for (int kappa = 0; kappa <= 2 * j; ++kappa) {
      for (int q = -kappa; q <= kappa; ++q) {
        const Eigen::VectorXd& v = basis[static_cast<std::size_t>(kappa)][static_cast<std::size_t>(q + kappa)];
        for (int m1 = -j; m1 <= j; ++m1) {
          const int m2 = q - m1;
          if (std::abs(m2) > j) continue;
          const double expect = v((m1 + j) * n + (m2 + j));
          INFO("j=" << j << " m1=" << m1 << " m2=" << m2 << " kappa=" << kappa << " q=" << q);
          CHECK_THAT(clebsch_gordan_racah(j, m1, m2, kappa, q), WithinAbs(expect, 1e-12));
          CHECK_THAT(table(m1, m2, kappa, q), WithinAbs(expect, 1e-12));
        }
      }
    }
  }
}

TEST_CASE("coupling table agrees with the Racah sum", "[spin][cg]") {
  for (int j : {4, 9, 15}) {
    const CouplingTable table(j);
    double worst = 0.0;
    for (int q = -2 * j; q <= 2 * j; ++q)
      for (int kappa = std::abs(q); kappa <= 2 * j; ++kappa)
        for (int m1 = table.m1_min(q); m1 <= table.m1_max(q); ++m1)
          worst = std::max(worst, std::abs(table(m1, q - m1, kappa, q) - clebsch_gordan_racah(j, m1, q - m1, kappa, q)));
    INFO("j = " << j);
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("coupling sectors are orthogonal both ways", "[spin][cg]") {
  for (int j : {5, 21, 40}) {
    const CouplingTable table(j);
    double worst = 0.0;
    for (int q = 0; q <= 2 * j; ++q) {
      const RealMatrix& s = table.sector(q);
      const auto len = s.rows();
      worst = std::max(worst, (s.transpose() * s - RealMatrix::Identity(len, len)).cwiseAbs().maxCoeff());
      worst = std::max(worst, (s * s.transpose() - RealMatrix::Identity(len, len)).cwiseAbs().maxCoeff());
    }
    INFO("j = " << j);
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("large-j single coefficients use one sector", "[spin][cg]") {
  const int j = 45;
  const CouplingTable table(j);
  for (auto [m1, m2, kappa] : {std::tuple{3, -1, 10}, std::tuple{-45, 45, 0}, std::tuple{20, 30, 77}}) {
    CHECK_THAT(clebsch_gordan(j, m1, m2, kappa, m1 + m2), WithinAbs(table(m1, m2, kappa, m1 + m2), 1e-13));
  }
  CHECK_THAT(clebsch_gordan(j, 10, -10, 0, 0), WithinAbs(((j - 10) % 2 ? -1.0 : 1.0) / std::sqrt(2.0 * j + 1), 1e-12));
}
