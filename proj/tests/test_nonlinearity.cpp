#include <doctest.h>

#include <cmath>

#include "nonlinearity.hpp"
#include "oracles.hpp"

using namespace nlpme;

TEST_CASE("mobility families") {
  NonlinearitySpec power{MobilityKind::power, 2.0, 0.0};
  CHECK(power.mobility(0.0) == 0.0);
  CHECK(power.mobility(3.0) == doctest::Approx(3.0));

  NonlinearitySpec shifted{MobilityKind::shifted_power, 2.0, 1.0};
  CHECK(shifted.mobility(0.0) == doctest::Approx(1.0));

  NonlinearitySpec logm{MobilityKind::log_mobility, 2.0, 0.0};
  CHECK(logm.mobility(1.0) == doctest::Approx(0.5));
  CHECK(logm.mobility_bound(100.0) == doctest::Approx(1.0));

  CHECK_THROWS_AS(power.mobility(-0.1), std::invalid_argument);
  NonlinearitySpec bad{MobilityKind::power, 2.0, 0.5};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  NonlinearitySpec sub_one{MobilityKind::power, 0.5, 0.0};
  CHECK_THROWS_AS(sub_one.validate(), std::invalid_argument);

  // linear limit kept for the fractional-heat benchmark
  NonlinearitySpec linear{MobilityKind::power, 1.0, 0.0};
  CHECK_NOTHROW(linear.validate());
  CHECK(linear.mobility(0.0) == 1.0);
  CHECK(linear.mobility(7.0) == 1.0);
}

TEST_CASE("psi pair closed forms") {
  auto [psi, big] = psi_pair(1.0, 2.0, 2.0, 0.0);
  CHECK(psi == doctest::Approx(0.5));
  CHECK(big == doctest::Approx(2.0 / 3.0));

  auto [psi0, big0] = psi_pair(0.0, 3.0, 2.5, 0.7);
  CHECK(psi0 == 0.0);
  CHECK(big0 == 0.0);
}

TEST_CASE("psi pair quadrature vs brute-force Riemann oracle") {
  // (z=2, p=2, m=3, mu=0.5) against a 1e6-point midpoint sum
  const double z = 2.0, p = 2.0, m = 3.0, mu = 0.5;
  const int cells = 1000000;
  double riemann_psi = 0.0, riemann_big = 0.0;
  const double h = z / cells;
  for (int i = 0; i < cells; ++i) {
    const double zeta = (i + 0.5) * h;
    riemann_psi += std::pow(zeta, p - 2.0) * std::pow(zeta + mu, m - 1.0) * h;
    riemann_big += std::pow(zeta, 0.5 * (p - 2.0)) * std::pow(zeta + mu, 0.5 * (m - 1.0)) * h;
  }
  auto [psi, big] = psi_pair(z, p, m, mu);
  CHECK(psi == doctest::Approx(riemann_psi).epsilon(1e-8));
  CHECK(big == doctest::Approx(riemann_big).epsilon(1e-8));
}

TEST_CASE("psi' = (Psi')^2 on a lattice, by finite differences") {
  for (double p : {1.5, 2.0, 3.0})
    for (double m : {1.5, 2.0, 3.5})
      for (double mu : {0.0, 0.3}) {
        const double dz = 1e-5;
        for (int i = 1; i <= 100; ++i) {
          const double z = 0.05 + 0.1 * i;
          const double dpsi =
              (psi_pair(z + dz, p, m, mu).psi - psi_pair(z - dz, p, m, mu).psi) / (2.0 * dz);
          const double dbig =
              (psi_pair(z + dz, p, m, mu).big_psi - psi_pair(z - dz, p, m, mu).big_psi) /
              (2.0 * dz);
          CHECK(dpsi == doctest::Approx(dbig * dbig).epsilon(1e-6));
        }
      }
}

TEST_CASE("psi monotone nondecreasing") {
  EnergyFunctions ef(2.5, 2.0, 0.2);
  double prev_psi = -1.0, prev_big = -1.0;
  for (int i = 0; i <= 50; ++i) {
    const double z = 0.2 * i;
    const double v = ef.psi(z), w = ef.big_psi(z);
    CHECK(v >= prev_psi);
    CHECK(w >= prev_big);
    prev_psi = v;
    prev_big = w;
  }
}

TEST_CASE("mu -> 0 continuity of the quadrature branch") {
  for (double z : {0.5, 1.0, 4.0, 10.0}) {
    const auto small_mu = psi_pair(z, 2.0, 2.5, 1e-8);
    const auto closed = psi_pair(z, 2.0, 2.5, 0.0);
    CHECK(small_mu.psi == doctest::Approx(closed.psi).epsilon(1e-6));
    CHECK(small_mu.big_psi == doctest::Approx(closed.big_psi).epsilon(1e-6));
  }
}

TEST_CASE("first energy density branches") {
  CHECK(first_energy_density(1.0, 2.0) == doctest::Approx(0.0));
  CHECK(first_energy_density(1.0, 3.0) == doctest::Approx(1.0));
  CHECK(first_energy_density(4.0, 2.5) == doctest::Approx(2.0));
  CHECK(first_energy_density(0.0, 2.0) == 0.0);
  CHECK(std::isinf(first_energy_density(0.0, 3.0)));
  CHECK(first_energy_density(0.0, 2.5) == 0.0);
  CHECK(std::isinf(first_energy_density(0.0, 3.5)));
  CHECK_THROWS_AS(first_energy_density(-1.0, 2.0), std::invalid_argument);
}
