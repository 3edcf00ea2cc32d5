#include <doctest.h>

#include <cmath>
#include <vector>

#include "agrohydro/field_model.hpp"

using namespace agrohydro;

namespace {

FieldModel closed_model(const CylindricalGrid& g, SoilParams p = loam()) {
  BoundaryConfig bc;
  bc.surface = BoundaryConfig::Surface::no_flux;
  bc.bottom = BoundaryConfig::Bottom::no_flux;
  return FieldModel(g, std::vector<SoilParams>(g.size(), p), SinkConfig{}, bc);
}

FieldModel open_model(const CylindricalGrid& g, SinkConfig sink = {},
                      SoilParams p = loam()) {
  return FieldModel(g, std::vector<SoilParams>(g.size(), p), sink);
}

/// Total water volume, sum of theta(h_i) * V_i.
double stored_water(const FieldModel& m, const VectorXd& x) {
  double total = 0.0;
  for (int i = 0; i < m.grid().size(); ++i)
    total += water_content(x[i], m.soil()[i]) * m.grid().cell_volume(i);
  return total;
}

VectorXd hydrostatic_profile(const CylindricalGrid& g, double head_at_surface) {
  VectorXd x(g.size());
  for (int i = 0; i < g.size(); ++i)
    x[i] = head_at_surface + g.depth_center(g.coords(i)[2]);
  return x;
}

}  // namespace

TEST_SUITE("simulator") {
  TEST_CASE("hydrostatic equilibrium is stationary in a closed system") {
    const auto g = build_grid(5, 8, 10, 10.0, 0.15);
    const auto m = closed_model(g);
    const VectorXd x = hydrostatic_profile(g, -2.0);
    const VectorXd u = VectorXd::Zero(g.surface_count());
    CHECK(m.rhs(x, u).lpNorm<Eigen::Infinity>() < 1e-12);
  }

  TEST_CASE("uniform head has no lateral fluxes") {
    // a uniform field must evolve exactly like a single soil column
    const auto g3 = build_grid(4, 6, 8, 9.0, 0.3);
    const auto g1 = build_grid(1, 1, 8, 1.0, 0.3);
    const auto m3 = open_model(g3);
    const auto m1 = open_model(g1);
    const VectorXd x3 = VectorXd::Constant(g3.size(), -1.0);
    const VectorXd x1 = VectorXd::Constant(g1.size(), -1.0);
    const VectorXd f3 = m3.rhs(x3, VectorXd::Zero(g3.surface_count()));
    const VectorXd f1 = m1.rhs(x1, VectorXd::Zero(1));
    for (int i = 0; i < g3.size(); ++i)
      CHECK(f3[i] == f1[g3.coords(i)[2]]);  // bitwise: lateral terms are exact zeros
  }

  TEST_CASE("two-node column matches the hand-evaluated Darcy stencil") {
    const auto g = build_grid(1, 1, 2, 1.0, 0.3);
    const auto m = closed_model(g);
    const SoilParams p = loam();
    VectorXd x(2);
    x << -1.0, -0.4;
    const VectorXd f = m.rhs(x, VectorXd::Zero(1));

    const double kf = 0.5 * (conductivity(-1.0, p) + conductivity(-0.4, p));
    const double grad_term = kf * ((x[0] - x[1]) / g.dz + 1.0);
    const double f0 = -grad_term / g.dz / capacity(-1.0, p);
    const double f1 = +grad_term / g.dz / capacity(-0.4, p);
    CHECK(f[0] == doctest::Approx(f0).epsilon(1e-14));
    CHECK(f[1] == doctest::Approx(f1).epsilon(1e-14));
  }

  TEST_CASE("step edge cases") {
    const auto g = build_grid(2, 3, 3, 2.0, 0.3);
    const auto m = open_model(g);
    const VectorXd x = VectorXd::Constant(g.size(), -1.0);
    const VectorXd u = VectorXd::Zero(g.surface_count());
    CHECK(m.step(x, u, 0.0, 0.0) == x);
    CHECK_THROWS_AS(m.step(x, u, 0.0, -1.0), std::invalid_argument);
    // absurdly large explicit step trips the stability monitor
    CHECK_THROWS_AS(m.step(x, u, 0.0, 1e9, 1), IntegrationError);
  }

  TEST_CASE("instability reports the offending node and time") {
    const auto g = build_grid(1, 1, 4, 1.0, 0.2);
    const auto m = open_model(g);
    VectorXd x = VectorXd::Constant(g.size(), -0.1);
    try {
      m.step(x, VectorXd::Zero(1), 0.0, 5e7, 1);
      FAIL("expected IntegrationError");
    } catch (const IntegrationError& e) {
      CHECK(e.node >= 0);
      CHECK(e.time > 0.0);
      CHECK(std::string(e.what()).find("node") != std::string::npos);
    }
  }

  TEST_CASE("seeded simulation replays bit-exactly") {
    const auto g = build_grid(3, 4, 5, 5.0, 0.2);
    const auto m = open_model(g);
    PivotSchedule sched;
    sched.angular_speed = 2.0 * std::numbers::pi / 7200.0;
    sched.segments = {{0.0, 7200.0, 2.0e-7}};
    const VectorXd x0 = VectorXd::Constant(g.size(), -1.0);
    NoiseSpec noise;
    noise.process_std = 1e-3;
    noise.seed = 42;
    const MatrixXd a = simulate(m, x0, sched, 0.0, 7200.0, 360.0, 6, &noise);
    const MatrixXd b = simulate(m, x0, sched, 0.0, 7200.0, 360.0, 6, &noise);
    CHECK(a == b);
    NoiseSpec other = noise;
    other.seed = 43;
    const MatrixXd c = simulate(m, x0, sched, 0.0, 7200.0, 360.0, 6, &other);
    CHECK(a != c);
  }

  TEST_CASE("surface heads rise while the pivot passes overhead") {
    const auto g = build_grid(5, 8, 10, 10.0, 0.15);
    const auto m = open_model(g);
    PivotSchedule sched;
    sched.angular_speed = 0.0;  // park the arm over column 0
    sched.phase0 = 0.5 * g.dtheta;
    sched.segments = {{0.0, 14400.0, 2.2e-7}};  // ~0.8 mm/hr
    const VectorXd x0 = VectorXd::Constant(g.size(), -1.0);
    const MatrixXd traj = simulate(m, x0, sched, 0.0, 14400.0, 360.0, 12);
    const int wet = g.flat(2, 0, 0);
    const int dry = g.flat(2, 4, 0);
    CHECK(traj(wet, traj.cols() - 1) > traj(wet, 0) + 0.05);
    CHECK(traj(wet, traj.cols() - 1) > traj(dry, traj.cols() - 1) + 0.05);
    // relaxation after shutoff
    PivotSchedule off = sched;
    off.segments = {{0.0, 7200.0, 2.2e-7}};
    const MatrixXd traj2 = simulate(m, x0, off, 0.0, 21600.0, 360.0, 12);
    const int peak_k = 20;  // shutoff
    CHECK(traj2(wet, traj2.cols() - 1) < traj2(wet, peak_k));
  }

  TEST_CASE("closed-system water volume is conserved") {
    const auto g = build_grid(4, 6, 8, 9.0, 0.3);
    const auto m = closed_model(g);
    VectorXd x(g.size());
    for (int i = 0; i < g.size(); ++i) {
      const auto [ir, it, iz] = g.coords(i);
      x[i] = -1.0 + 0.2 * std::sin(0.9 * ir + 1.7 * it) - 0.3 * iz * g.dz;
    }
    const VectorXd u = VectorXd::Zero(g.surface_count());
    const double m0 = stored_water(m, x);
    for (int k = 0; k < 1000; ++k) x = m.step(x, u, k * 300.0, 300.0, 2);
    const double m1 = stored_water(m, x);
    CHECK(std::abs(m1 - m0) / m0 < 1e-3);
  }

  TEST_CASE("open-system water balance closes within 1 percent") {
    const auto g = build_grid(5, 8, 10, 10.0, 0.15);
    SinkConfig sink{0.35, 0.085e-3 / 3600.0, 0.15};
    const auto m = open_model(g, sink);
    PivotSchedule sched;
    sched.angular_speed = 2.0 * std::numbers::pi / 28800.0;
    sched.segments = {{0.0, 43200.0, 2.2e-7}};
    VectorXd x = VectorXd::Constant(g.size(), -0.8);
    VectorXd u(g.surface_count());

    const double dt_sub = 30.0;
    double irrigation = 0.0, drainage = 0.0, et = 0.0;
    const double m0 = stored_water(m, x);
    const int per_layer = g.surface_count();
    for (int k = 0; k < 12 * 120; ++k) {  // 12 h at 30 s resolution
      const double t = k * dt_sub;
      sched.surface_input(t, g, u);
      // accumulate the boundary fluxes the explicit step is about to apply
      for (int s = 0; s < per_layer; ++s) {
        const auto [ir, it, iz] = g.coords(s);
        const double a_z = g.r_center(ir) * g.dr * g.dtheta;
        irrigation += u[it * g.n_r + ir] * a_z * dt_sub;
        const int bot = s + (g.n_z - 1) * per_layer;
        drainage += conductivity(x[bot], m.soil()[bot]) * a_z * dt_sub;
      }
      for (int i = 0; i < g.size(); ++i)
        et += m.sink_rate(i) * g.cell_volume(i) * dt_sub;
      x = m.step(x, u, t, dt_sub, 1);
    }
    const double dm = stored_water(m, x) - m0;
    const double expected = irrigation - drainage - et;
    CHECK(irrigation > 0.0);
    CHECK(drainage > 0.0);
    CHECK(et > 0.0);
    CHECK(std::abs(dm - expected) <
          0.01 * std::max({irrigation, drainage, std::abs(dm)}));
  }

  TEST_CASE("rotational equivariance on a homogeneous field") {
    const auto g = build_grid(4, 8, 6, 10.0, 0.15);
    const auto m = open_model(g);
    const VectorXd x0 = VectorXd::Constant(g.size(), -1.0);
    PivotSchedule a;
    a.angular_speed = 2.0 * std::numbers::pi / 28800.0;
    a.phase0 = 0.5 * g.dtheta;
    a.segments = {{0.0, 1e9, 2.2e-7}};
    PivotSchedule b = a;
    b.phase0 = 1.5 * g.dtheta;
    // dt chosen so no sampling instant lands on a sector crossing
    const MatrixXd ta = simulate(m, x0, a, 0.0, 350.0 * 60, 350.0, 8);
    const MatrixXd tb = simulate(m, x0, b, 0.0, 350.0 * 60, 350.0, 8);
    double worst = 0.0;
    for (int k = 0; k < ta.cols(); ++k)
      for (int i = 0; i < g.size(); ++i) {
        const auto [ir, it, iz] = g.coords(i);
        const int rotated = g.flat(ir, (it + 1) % g.n_theta, iz);
        worst = std::max(worst, std::abs(tb(rotated, k) - ta(i, k)));
      }
    CHECK(worst < 1e-10);
  }

  TEST_CASE("first-order self-convergence (Richardson)") {
    const auto g = build_grid(1, 1, 10, 1.0, 0.15);
    const auto m = open_model(g);
    PivotSchedule quiet;
    const VectorXd x0 = VectorXd::Constant(g.size(), -1.0);
    auto endpoint = [&](double dt) {
      return simulate(m, x0, quiet, 0.0, 21600.0, dt, 1).rightCols(1);
    };
    const double e1 = (endpoint(360.0) - endpoint(180.0)).norm();
    const double e2 = (endpoint(180.0) - endpoint(90.0)).norm();
    CHECK(e2 / e1 > 0.35);
    CHECK(e2 / e1 < 0.65);
  }

  TEST_CASE("measurements") {
    const auto g = build_grid(5, 8, 10, 10.0, 0.15);
    SensorSpec spec;
    spec.explicit_indices = {89, 185, 281};
    const auto sets = node_sets(g, spec);
    VectorXd x(g.size());
    for (int i = 0; i < g.size(); ++i) x[i] = -1.0 - 0.001 * i;
    const VectorXd y = measure(x, sets.sensors);
    REQUIRE(y.size() == 3);
    CHECK(y[0] == x[89]);
    CHECK(y[1] == x[185]);
    CHECK(y[2] == x[281]);

    NodeSet empty;
    CHECK_THROWS_AS(measure(x, empty), std::invalid_argument);

    // seeded noise statistics: sample std within 5 % of the target
    NoiseStreams streams(99);
    double acc = 0.0, acc2 = 0.0;
    const int draws = 10000;
    for (int k = 0; k < draws; ++k) {
      const VectorXd yn = measure(x, sets.sensors, 0.15, streams);
      const double e = yn[0] - x[89];
      acc += e;
      acc2 += e * e;
    }
    const double mean = acc / draws;
    const double stddev = std::sqrt(acc2 / draws - mean * mean);
    CHECK(stddev == doctest::Approx(0.15).epsilon(0.05));
  }

  TEST_CASE("sink term") {
    const auto g = build_grid(2, 3, 10, 2.0, 0.15);
    SinkConfig sink{0.35, 0.085e-3 / 3600.0, 0.06};
    const auto m = open_model(g, sink);
    // ETP_p = K_c * PET = 0.02975 mm/hr
    const double etp_p = 0.35 * 0.085e-3 / 3600.0;
    CHECK(etp_p * 3600.0 * 1000.0 == doctest::Approx(0.02975).epsilon(1e-12));
    CHECK(m.sink_rate(g.flat(0, 0, 0)) == doctest::Approx(etp_p / 0.06));
    CHECK(m.sink_rate(g.flat(0, 0, 3)) == doctest::Approx(etp_p / 0.06));
    CHECK(m.sink_rate(g.flat(0, 0, 4)) == 0.0);  // below the root zone
    CHECK(m.sink_rate(g.flat(0, 0, 9)) == 0.0);

    const auto off = open_model(g, SinkConfig{0.0, 1.0, 0.5});
    for (int i = 0; i < g.size(); ++i) CHECK(off.sink_rate(i) == 0.0);
  }

  TEST_CASE("analytic dynamics Jacobian matches finite differences") {
    const auto g = build_grid(3, 4, 5, 5.0, 0.25);
    SinkConfig sink{0.35, 2.36e-8, 0.25};
    const auto m = open_model(g, sink);
    VectorXd x(g.size());
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> head(-2.0, -0.3);
    for (int i = 0; i < g.size(); ++i) x[i] = head(rng);
    VectorXd u(g.surface_count());
    for (int i = 0; i < u.size(); ++i) u[i] = (i % 3 == 0) ? 2e-7 : 0.0;

    SparseMat jac;
    m.rhs_jacobian(x, u, jac);
    const MatrixXd dense = MatrixXd(jac);

    MatrixXd fd(g.size(), g.size());
    const double eps = 1e-6;
    for (int j = 0; j < g.size(); ++j) {
      VectorXd xp = x, xm = x;
      xp[j] += eps;
      xm[j] -= eps;
      fd.col(j) = (m.rhs(xp, u) - m.rhs(xm, u)) / (2.0 * eps);
    }
    CHECK((dense - fd).norm() / fd.norm() < 1e-5);
  }
}
