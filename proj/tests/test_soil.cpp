#include <doctest.h>

#include <cmath>
#include <random>

#include "agrohydro/soil.hpp"

using namespace agrohydro;

// Reference values evaluated independently from the closed forms at high
// precision (loam parameters, h = -1 m).
namespace {
constexpr double kSeLoamM1 = 0.46628347931293228;
constexpr double kKLoamM1 = 3.9263686409261713e-9;
constexpr double kThetaLoamM1 = 0.24213178471815216;
constexpr double kCapLoamM1 = 0.08094057228763074;
constexpr double kKLoamHalf = 2.9833158074090516e-8;

double fd_dtheta_dh(double h, const SoilParams& p, double step = 1e-6) {
  return (water_content(h + step, p) - water_content(h - step, p)) / (2.0 * step);
}
}  // namespace

TEST_SUITE("soil") {
  TEST_CASE("parameter validation") {
    CHECK(loam().valid());
    SoilParams bad = loam();
    bad.n = 1.0;
    CHECK_FALSE(bad.valid());
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = loam();
    bad.theta_r = bad.theta_s;
    CHECK_FALSE(bad.valid());
    bad = loam();
    bad.k_sat = 0.0;
    CHECK_FALSE(bad.valid());
    CHECK(loam().m() == doctest::Approx(1.0 - 1.0 / 1.56).epsilon(1e-15));
  }

  TEST_CASE("effective saturation") {
    const SoilParams p = loam();
    CHECK(effective_saturation(0.0, p) == 1.0);
    CHECK(effective_saturation(2.5, p) == 1.0);
    CHECK(effective_saturation(-1.0, p) ==
          doctest::Approx(kSeLoamM1).epsilon(1e-13));
    // monotone decay toward 0 for drier heads
    CHECK(effective_saturation(-100.0, p) < effective_saturation(-10.0, p));
    CHECK(effective_saturation(-1e4, p) > 0.0);
    CHECK_THROWS_AS(effective_saturation(std::nan(""), p), std::domain_error);
  }

  TEST_CASE("conductivity") {
    const SoilParams p = loam();
    CHECK(conductivity(0.0, p) == p.k_sat);
    CHECK(conductivity(0.3, p) == p.k_sat);
    CHECK(conductivity(-1.0, p) == doctest::Approx(kKLoamM1).epsilon(1e-12));
    CHECK(conductivity(-0.5, p) == doctest::Approx(kKLoamHalf).epsilon(1e-12));
    // continuity approaching saturation from below
    CHECK(conductivity(-1e-9, p) == doctest::Approx(p.k_sat).epsilon(1e-9));
  }

  TEST_CASE("capacity") {
    const SoilParams p = loam();
    CHECK(capacity(0.5, p) == p.s_r);  // ponded branch returns S_r
    CHECK(capacity(-1.0, p) == doctest::Approx(kCapLoamM1).epsilon(1e-12));
    CHECK(capacity(-1.0, p) == doctest::Approx(fd_dtheta_dh(-1.0, p)).epsilon(1e-6));
    CHECK(capacity(-1e4, p) < 1e-8);  // vanishes in the dry limit
  }

  TEST_CASE("water content") {
    const SoilParams p = loam();
    CHECK(water_content(0.0, p) == doctest::Approx(0.430).epsilon(1e-15));
    CHECK(water_content(-1e7, p) == doctest::Approx(0.0780).epsilon(1e-3));
    CHECK(water_content(-1.0, p) == doctest::Approx(kThetaLoamM1).epsilon(1e-13));
    // composition identity with the saturation curve
    CHECK(water_content(-1.0, p) ==
          doctest::Approx(p.theta_r +
                          (p.theta_s - p.theta_r) * effective_saturation(-1.0, p))
              .epsilon(1e-15));
  }

  TEST_CASE("capacity equals dtheta/dh on random heads") {
    const SoilParams p = loam();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> head(-50.0, -0.01);
    for (int i = 0; i < 2000; ++i) {
      const double h = head(rng);
      const double fd = fd_dtheta_dh(h, p);
      CHECK(capacity(h, p) == doctest::Approx(fd).epsilon(1e-6));
    }
  }

  TEST_CASE("monotonicity of retention and conductivity") {
    const SoilParams p = loam();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> head(-50.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
      double h1 = head(rng), h2 = head(rng);
      if (h1 > h2) std::swap(h1, h2);
      CHECK(water_content(h1, p) <= water_content(h2, p));
      CHECK(conductivity(h1, p) <= conductivity(h2, p));
    }
  }

  TEST_CASE("branch continuity at saturation") {
    const SoilParams p = loam();
    for (double eps : {1e-6, 1e-9, 1e-12}) {
      CHECK(std::abs(water_content(-eps, p) - p.theta_s) < 1e-6);
      CHECK(std::abs(conductivity(-eps, p) - p.k_sat) < 1e-6 * p.k_sat + 1e-18);
    }
    CHECK(std::abs(water_content(-1e-12, p) - p.theta_s) < 1e-9);
  }

  TEST_CASE("finite outputs under extreme heads") {
    const SoilParams p = loam();
    for (double h : {-1e4, -123.4, -1.0, -1e-8, 0.0, 1e-8, 55.0, 1e4}) {
      CHECK(std::isfinite(effective_saturation(h, p)));
      CHECK(std::isfinite(conductivity(h, p)));
      CHECK(std::isfinite(capacity(h, p)));
      CHECK(std::isfinite(water_content(h, p)));
      CHECK(conductivity(h, p) > 0.0);
      CHECK(conductivity(h, p) <= p.k_sat);
    }
  }

  TEST_CASE("analytic derivatives match finite differences") {
    const SoilParams p = loam();
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> head(-20.0, -0.05);
    for (int i = 0; i < 500; ++i) {
      const double h = head(rng);
      const double dk_fd =
          (conductivity(h + 1e-7, p) - conductivity(h - 1e-7, p)) / 2e-7;
      const double dc_fd = (capacity(h + 1e-7, p) - capacity(h - 1e-7, p)) / 2e-7;
      CHECK(conductivity_dh(h, p) == doctest::Approx(dk_fd).epsilon(1e-5));
      CHECK(capacity_dh(h, p) == doctest::Approx(dc_fd).epsilon(1e-5));
    }
    CHECK(conductivity_dh(0.5, p) == 0.0);
    CHECK(capacity_dh(0.5, p) == 0.0);
  }
}
