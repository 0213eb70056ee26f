#include "kicktop/classical.hpp"

#include <catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <random>

using namespace kicktop;
using Catch::Matchers::WithinAbs;

namespace {

std::array<double, 3> to_xyz(const ClassicalState& s) {
  const double r = std::sqrt(std::max(0.0, 1.0 - s.mu * s.mu));
  return {r * std::cos(s.phi), r * std::sin(s.phi), s.mu};
}

// Active rotation about y: x' = x cos b + z sin b, z' = -x sin b + z cos b.
ClassicalState cartesian_rotate(const ClassicalState& s, double beta) {
  const auto v = to_xyz(s);
  const double x = v[0] * std::cos(beta) + v[2] * std::sin(beta);
  const double y = v[1];
  const double z = -v[0] * std::sin(beta) + v[2] * std::cos(beta);
  double phi = std::atan2(y, x);
  if (phi < 0.0) phi += kTwoPi;
  return {z, phi};
}

}  // namespace

TEST_CASE("rotate simple cases", "[classical]") {
  const ClassicalState a = rotate({0.3, 1.1}, 0.0);
  CHECK_THAT(a.mu, WithinAbs(0.3, 1e-15));
  CHECK_THAT(a.phi, WithinAbs(1.1, 1e-15));

  const ClassicalState b = rotate({0.0, 0.0}, 0.7);
  CHECK_THAT(b.mu, WithinAbs(-std::sin(0.7), 1e-15));
  CHECK(b.phi == 0.0);

  // rotating the north pole onto the south pole
  const ClassicalState c = rotate({1.0, 0.4}, std::numbers::pi);
  CHECK_THAT(c.mu, WithinAbs(-1.0, 1e-15));
}

TEST_CASE("rotate matches the Cartesian rotation", "[classical]") {
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_mu = 0.0, worst_angle = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const ClassicalState s{2.0 * u(rng) - 1.0, kTwoPi * u(rng)};
    const double beta = (u(rng) - 0.5) * 4.0 * std::numbers::pi;
    const ClassicalState got = rotate(s, beta);
    const ClassicalState ref = cartesian_rotate(s, beta);
    worst_mu = std::max(worst_mu, std::abs(got.mu - ref.mu));
    worst_angle = std::max(worst_angle, great_circle_distance(got, ref));
    REQUIRE(got.phi >= 0.0);
    REQUIRE(got.phi < kTwoPi);
  }
  CHECK(worst_mu < 1e-12);
  CHECK(worst_angle < 1e-12);
}

TEST_CASE("rotation composition", "[classical]") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const ClassicalState s{2.0 * u(rng) - 1.0, kTwoPi * u(rng)};
    const double b1 = 6.0 * u(rng) - 3.0, b2 = 6.0 * u(rng) - 3.0;
    worst = std::max(worst, great_circle_distance(rotate(rotate(s, b1), b2), rotate(s, b1 + b2)));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("torsion", "[classical]") {
  const ClassicalState a = torsion({0.5, 1.0}, 0.0);
  CHECK(a.mu == 0.5);
  CHECK(a.phi == 1.0);
  const ClassicalState b = torsion({0.0, 2.0}, 7.3);
  CHECK(b.mu == 0.0);
  CHECK(b.phi == 2.0);
  const ClassicalState c = torsion({1.0, 0.0}, kTwoPi + 1.0);
  CHECK_THAT(c.phi, WithinAbs(1.0, 1e-14));
}

TEST_CASE("dissipate", "[classical]") {
  for (double tau : {0.0, 0.1, 3.0, 40.0}) {
    CHECK(dissipate({1.0, 0.3}, tau).mu == 1.0);
    CHECK(dissipate({-1.0, 0.3}, tau).mu == -1.0);
  }
  const ClassicalState s = dissipate({0.0, 0.2}, 0.18);
  CHECK_THAT(s.mu, WithinAbs(-std::tanh(0.18), 1e-15));
  CHECK(s.phi == 0.2);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const ClassicalState p{2.0 * u(rng) - 1.0, 1.0};
    const double t1 = 2.0 * u(rng), t2 = 2.0 * u(rng);
    worst = std::max(worst, std::abs(dissipate(dissipate(p, t1), t2).mu - dissipate(p, t1 + t2).mu));
  }
  CHECK(worst < 1e-14);
}

TEST_CASE("step", "[classical]") {
  const ClassicalState s{0.42, 2.5};
  const ClassicalState id = step(s, {0.0, 0.0, 0.0});
  CHECK_THAT(id.mu, WithinAbs(s.mu, 1e-15));
  CHECK_THAT(id.phi, WithinAbs(s.phi, 1e-15));

  ClassicalState x{0.9, 1.0};
  for (int i = 0; i < 50; ++i) {
    const ClassicalState next = step(x, {0.0, 0.0, 0.3});
    CHECK(next.mu < x.mu);
    x = next;
  }
  CHECK(x.mu > -1.0);

  CHECK_THROWS_AS(MapParams({1.0, 1.0, -0.1}).validate(), std::domain_error);
  CHECK_THROWS_AS(MapParams({NAN, 1.0, 0.1}).validate(), std::domain_error);
}

TEST_CASE("ten million iterates stay on the sphere", "[classical]") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  bool ok = true;
  for (int t = 0; t < 1000; ++t) {
    const MapParams p{10.0 * u(rng), 4.0 * u(rng), 1.5 * u(rng)};
    ClassicalState s = initial_condition(t, 0);
    for (int i = 0; i < 10000; ++i) {
      s = step(s, p);
      ok = ok && std::isfinite(s.mu) && std::isfinite(s.phi) && std::abs(s.mu) <= 1.0 && s.phi >= 0.0 && s.phi < kTwoPi;
    }
  }
  CHECK(ok);
}

TEST_CASE("ensemble evolution", "[classical]") {
  const auto south = evolve_ensemble({0.0, 0.0, 0.5}, 100, 200, 1);
  for (const auto& s : south) CHECK(s.mu + 1.0 < 1e-6);

  const auto a = evolve_ensemble({4.5, 1.5, 0.18}, 500, 100, 42);
  const auto b = evolve_ensemble({4.5, 1.5, 0.18}, 500, 100, 42);
  REQUIRE(a.size() == b.size());
  bool same = true;
  for (std::size_t i = 0; i < a.size(); ++i) same = same && a[i].mu == b[i].mu && a[i].phi == b[i].phi;
  CHECK(same);

  // initial conditions are uniform in (mu, phi)
  const auto start = evolve_ensemble({1.0, 1.0, 0.1}, 20000, 0, 5);
  double mean_mu = 0.0, mean_phi = 0.0;
  for (const auto& s : start) {
    mean_mu += s.mu;
    mean_phi += s.phi;
  }
  mean_mu /= start.size();
  mean_phi /= start.size();
  CHECK(std::abs(mean_mu) < 5.0 * std::sqrt(1.0 / 3.0 / 20000));
  CHECK(std::abs(mean_phi - std::numbers::pi) < 5.0 * kTwoPi * std::sqrt(1.0 / 12.0 / 20000));

  CHECK_THROWS_AS(evolve_ensemble({0, 0, 0}, 0, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(evolve_ensemble({0, 0, 0}, 1, -1, 0), std::invalid_argument);
}

TEST_CASE("period-1 attractor at the working point", "[classical]") {
  const auto fin = evolve_ensemble({4.5, 1.5, 0.18}, 10000, 1000, 0);
  const double eta = participation_ratio(histogram_mu(fin, 1000));
  CHECK(eta >= 1.0);
  CHECK(eta <= 2.0);
}

TEST_CASE("histograms", "[classical]") {
  std::vector<ClassicalState> poles(37, ClassicalState{-1.0, 0.0});
  const MuHistogram h = histogram_mu(poles, 10);
  CHECK(h.probabilities[0] == 1.0);
  CHECK(participation_ratio(h) == 1.0);

  std::vector<ClassicalState> spread;
  const int n_bins = 50;
  for (int b = 0; b < n_bins; ++b) spread.push_back({-1.0 + (b + 0.5) * 2.0 / n_bins, 0.0});
  const MuHistogram u = histogram_mu(spread, n_bins);
  for (double p : u.probabilities) CHECK_THAT(p, WithinAbs(1.0 / n_bins, 1e-15));
  CHECK_THAT(participation_ratio(u), WithinAbs(n_bins, 1e-9));

  // mu = +1 falls into the last bin
  CHECK(mu_bin(1.0, 10) == 9);
  CHECK(mu_bin(-1.0, 10) == 0);

  CHECK_THROWS_AS(histogram_mu({}, 10), std::invalid_argument);
  CHECK_THROWS_AS(histogram_mu(poles, 0), std::invalid_argument);
}

TEST_CASE("uniform samples obey binomial statistics", "[classical]") {
  const int n = 1000000, n_bins = 1000;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<ClassicalState> s(n);
  for (auto& x : s) x = {u(rng), 0.0};
  const MuHistogram h = histogram_mu(s, n_bins);
  const double p = 1.0 / n_bins;
  const double sigma = std::sqrt(p * (1.0 - p) / n);
  double worst = 0.0, total = 0.0;
  for (double q : h.probabilities) {
    worst = std::max(worst, std::abs(q - p));
    total += q;
  }
  CHECK(worst < 5.0 * sigma);
  CHECK_THAT(total, WithinAbs(1.0, 1e-12));
}

TEST_CASE("participation ratio examples and bounds", "[classical]") {
  CHECK(participation_ratio({3, {0.0, 1.0, 0.0}}) == 1.0);
  CHECK(participation_ratio({2, {0.5, 0.5}}) == 2.0);
  CHECK_THAT(participation_ratio({1000, std::vector<double>(1000, 1e-3)}), WithinAbs(1000.0, 1e-9));

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const int n_bins = 1 + static_cast<int>(u(rng) * 300);
    const int n = 1 + static_cast<int>(u(rng) * 2000);
    std::vector<ClassicalState> s(static_cast<std::size_t>(n));
    const double width = u(rng);
    for (auto& x : s) x = {-1.0 + 2.0 * width * u(rng), 0.0};
    const double eta = participation_ratio(histogram_mu(s, n_bins));
    CHECK(eta >= 1.0 - 1e-12);
    CHECK(eta <= n_bins + 1e-9);
  }
}

TEST_CASE("aggregate histogram variant", "[classical]") {
  const MuHistogram h = histogram_mu_aggregate({0.0, 0.0, 0.5}, 50, 300, 200, 100, 3);
  CHECK(h.probabilities[0] == 1.0);
  const MuHistogram g = histogram_mu_aggregate({6.5, 1.75, 0.18}, 50, 300, 100, 100, 3);
  double total = 0.0;
  for (double p : g.probabilities) total += p;
  CHECK_THAT(total, WithinAbs(1.0, 1e-12));
  CHECK(participation_ratio(g) > 5.0);
}

TEST_CASE("limit cycles", "[classical]") {
  const auto south = find_limit_cycle({0.0, 0.0, 0.3});
  REQUIRE(south.has_value());
  CHECK(south->size() == 1);
  CHECK_THAT(south->front().mu, WithinAbs(-1.0, 1e-12));

  const auto regular = find_limit_cycle({4.5, 1.5, 0.18});
  REQUIRE(regular.has_value());
  CHECK(regular->size() == 1);
  const ClassicalState fixed = regular->front();
  CHECK(great_circle_distance(step(fixed, {4.5, 1.5, 0.18}), fixed) < 1e-8);

  CHECK_FALSE(find_limit_cycle({6.5, 1.75, 0.18}).has_value());

  CHECK_THROWS_AS(find_limit_cycle({0, 0, 0}, {-1, 64, 1e-8, 0}), std::invalid_argument);
  CHECK_THROWS_AS(find_limit_cycle({0, 0, 0}, {10, 0, 1e-8, 0}), std::invalid_argument);
}

TEST_CASE("great-circle distance", "[classical]") {
  CHECK_THAT(great_circle_distance({1.0, 0.0}, {-1.0, 0.0}), WithinAbs(std::numbers::pi, 1e-15));
  CHECK_THAT(great_circle_distance({0.0, 0.0}, {0.0, 0.5}), WithinAbs(0.5, 1e-15));
  CHECK_THAT(great_circle_distance({0.0, 0.1}, {0.0, kTwoPi - 0.1}), WithinAbs(0.2, 1e-14));
}
