#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fluidmc/fluid.hpp"
#include "fluidmc/models.hpp"

using namespace fluidmc;

namespace {

Vec vec1(double v) {
  Vec x(1);
  x << v;
  return x;
}

// unit-speed 1-D flow on U = (-inf, 1)
FluidModel unit_speed_model(double x0) {
  FluidModel m;
  m.dim = 1;
  m.field = [](const Vec&) { return Vec::Ones(1); };
  m.domain.inside = [](const Vec& x) { return x[0] < 1.0; };
  m.domain.margin = [](const Vec& x) { return 1.0 - x[0]; };
  m.domain.outside_distance = [](const Vec& x) { return std::max(x[0] - 1.0, 0.0); };
  m.lipschitz = 0.0;
  m.x0 = vec1(x0);
  return m;
}

}  // namespace

TEST_CASE("integrate is exact on a constant field") {
  auto poisson = models::make_poisson(2.0, 100);
  auto path = integrate(poisson.fluid, 3.0, 0.1);
  for (std::size_t k = 0; k < path.times.size(); ++k)
    CHECK(path.values[k][0] ==
          doctest::Approx(2.0 * path.times[k]).epsilon(1e-13));
  CHECK_FALSE(path.exited);
}

TEST_CASE("critical branching has a frozen flow") {
  auto crit = models::make_branching({0.5, 0.0, 0.5}, 100, 0.7);  // mean 1
  auto path = integrate(crit.fluid, 4.0, 0.01);
  for (const auto& v : path.values) CHECK(v[0] == 0.7);
}

TEST_CASE("relaxation flow solves x' = 1 - x (not the misprinted form)") {
  auto queue = models::make_mm_inf(0.5, 10);
  auto path = integrate(queue.fluid, 2.0, 1e-3);
  const double x0 = 0.5;
  for (double t : {0.5, 1.0, 2.0}) {
    const double expected = 1.0 + (x0 - 1.0) * std::exp(-t);
    CHECK(path.eval(t)[0] == doctest::Approx(expected).epsilon(1e-8));
    const double misprint = 1.0 + x0 * std::exp(-t);
    CHECK(std::abs(path.eval(t)[0] - misprint) > 1e-2);
  }
}

TEST_CASE("dense accessor agrees with grid values exactly") {
  auto epi = models::make_epidemic({100, 5.0, 0.1});
  auto path = integrate(epi.fluid, 1.0, 0.01);
  for (std::size_t k = 0; k < path.times.size(); ++k)
    CHECK((path.eval(path.times[k]) - path.values[k]).norm() == 0.0);
  CHECK_THROWS_AS(path.eval(1.5), std::out_of_range);
}

TEST_CASE("integration reports non-finite fields") {
  FluidModel m;
  m.dim = 1;
  m.field = [](const Vec& x) {
    return vec1(x[0] < 0.5 ? 1.0 : std::numeric_limits<double>::quiet_NaN());
  };
  m.domain = Domain::whole_space(1);
  m.x0 = vec1(0.0);
  CHECK_THROWS_AS(integrate(m, 2.0, 0.01), IntegrationError);
}

TEST_CASE("unit-speed crossing: exit time and window") {
  auto m = unit_speed_model(0.0);
  auto path = integrate(m, 1.5, 1e-3);
  REQUIRE(path.exited);
  CHECK(path.exit_time == doctest::Approx(1.0).epsilon(1e-9));

  for (double eps : {0.1, 0.01, 0.001}) {
    const auto w = exit_window(m, path, eps);
    CHECK(w.zeta_minus == doctest::Approx(1.0 - eps).epsilon(1e-7));
    CHECK(w.zeta_plus == doctest::Approx(1.0 + eps).epsilon(1e-7));
    CHECK(w.rho == doctest::Approx(eps).epsilon(1e-6));
    CHECK(w.zeta_minus <= path.exit_time);
    CHECK(path.exit_time <= w.zeta_plus);
  }

  // rho decreases with eps and rho/eps stays bounded (slope 1 here)
  const auto w1 = exit_window(m, path, 0.1);
  const auto w2 = exit_window(m, path, 0.01);
  const auto w3 = exit_window(m, path, 0.001);
  CHECK(w1.rho > w2.rho);
  CHECK(w2.rho > w3.rho);
  CHECK(w3.rho / 0.001 < 1.5);

  // windows nest
  CHECK(w2.zeta_minus >= w1.zeta_minus);
  CHECK(w2.zeta_plus <= w1.zeta_plus);
}

TEST_CASE("window errors when the horizon is too short") {
  auto m = unit_speed_model(0.0);
  auto path = integrate(m, 1.05, 1e-3);
  REQUIRE(path.exited);
  CHECK_THROWS_AS(exit_window(m, path, 0.2), IntegrationError);
  auto inside_path = integrate(m, 0.5, 1e-3);
  CHECK_THROWS_AS(exit_window(m, inside_path, 0.1), IntegrationError);
}

TEST_CASE("time-changed epidemic exits at the final-size root") {
  models::EpidemicParams params{1000, 5.0, 0.1};
  auto tc = models::make_epidemic_timechanged(params);
  auto path = integrate(tc.fluid, 1.3, 1e-3);
  REQUIRE(path.exited);
  const double tau = models::sir_final_size(5.0, 0.1);
  CHECK(std::abs(path.exit_time - tau) <= 1e-6);

  // the exit is transversal through x^2 = 0
  const auto w = exit_window(tc.fluid, path, 0.05);
  CHECK(w.zeta_minus <= path.exit_time);
  CHECK(path.exit_time <= w.zeta_plus);
  const auto w_small = exit_window(tc.fluid, path, 0.01);
  CHECK(w_small.zeta_minus >= w.zeta_minus);
  CHECK(w_small.zeta_plus <= w.zeta_plus);
  CHECK(w_small.rho <= w.rho + 1e-12);
}

TEST_CASE("lattice window variant brackets the continuous one") {
  auto m = unit_speed_model(0.0);
  auto path = integrate(m, 1.5, 1e-3);
  const double eps = 0.05;
  const auto cont = exit_window(m, path, eps);
  const auto lat = exit_window_lattice(m, path, eps, vec1(0.01));
  // lattice tests only see points of 0.01 Z, so the window shrinks by at
  // most one spacing on each side
  CHECK(lat.zeta_minus >= cont.zeta_minus - 1e-9);
  CHECK(lat.zeta_minus <= cont.zeta_minus + 0.011);
  CHECK(lat.zeta_plus >= cont.zeta_plus - 0.011);
  CHECK(lat.zeta_plus <= cont.zeta_plus + 0.011);
}

TEST_CASE("estimate_lipschitz: affine, constant and epidemic fields") {
  // affine field with known induced sup-norm (max absolute row sum)
  Eigen::Matrix3d a;
  a << 0.5, -1.25, 0.75, 2.0, 0.25, -0.5, -0.3, 0.9, 1.1;
  double row_norm = 0.0;
  for (int i = 0; i < 3; ++i) row_norm = std::max(row_norm, a.row(i).cwiseAbs().sum());

  FluidModel m;
  m.dim = 3;
  m.field = [a](const Vec& x) { return Vec(a * x); };
  Vec lo = Vec::Constant(3, -1.0), hi = Vec::Constant(3, 1.0);
  m.domain = Domain::from_box(Box{lo, hi});
  m.x0 = Vec::Zero(3);
  const double est = estimate_lipschitz(m, 100000, 42);
  CHECK(est / 1.2 >= 0.95 * row_norm);
  CHECK(est / 1.2 <= 1.0001 * row_norm);

  FluidModel constant;
  constant.dim = 2;
  constant.field = [](const Vec&) { return Vec::Ones(2); };
  constant.domain = Domain::from_box(Box{Vec::Zero(2), Vec::Ones(2)});
  constant.x0 = Vec::Zero(2);
  CHECK(estimate_lipschitz(constant, 1000, 1) == 0.0);

  auto epi = models::make_epidemic({100, 5.0, 0.1});
  const double k_est = estimate_lipschitz(epi.fluid, 100000, 3);
  CHECK(k_est <= 1.2 * epi.fluid.lipschitz + 1e-9);
  CHECK(k_est >= 0.9 * epi.fluid.lipschitz);

  FluidModel boxless;
  boxless.dim = 1;
  boxless.field = [](const Vec& x) { return x; };
  boxless.domain = Domain::whole_space(1);
  boxless.domain.box.reset();
  boxless.x0 = vec1(0.0);
  CHECK_THROWS_AS(estimate_lipschitz(boxless, 10, 0), ModelError);
}

TEST_CASE("refinement gap shrinks with the step") {
  auto epi = models::make_epidemic({100, 5.0, 0.1});
  const auto coarse = integrate(epi.fluid, 1.0, 0.02);
  const auto fine = integrate(epi.fluid, 1.0, 0.002);
  const double gap_coarse = max_refinement_gap(epi.fluid, coarse);
  const double gap_fine = max_refinement_gap(epi.fluid, fine);
  CHECK(gap_coarse < 1e-6);
  CHECK(gap_fine < gap_coarse / 100.0);
}
