#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fluidmc/ctmc.hpp"
#include "fluidmc/models.hpp"

using namespace fluidmc;

namespace {

State state1(std::int64_t a) {
  State s(1);
  s << a;
  return s;
}

State state2(std::int64_t a, std::int64_t b) {
  State s(2);
  s << a, b;
  return s;
}

ChainSpec empty_spec() {
  ChainSpec spec;
  spec.dim = 1;
  spec.coord_dim = 1;
  spec.coord = [](const State& s) { return s.cast<double>(); };
  return spec;
}

// small random specs for property checks: dim 2, affine nonnegative rates
ChainSpec random_spec(Rng& rng, int channels) {
  ChainSpec spec;
  spec.dim = 2;
  spec.coord_dim = 2;
  spec.coord = [](const State& s) { return s.cast<double>() * 0.125; };
  for (int c = 0; c < channels; ++c) {
    State jump(2);
    do {
      jump << static_cast<std::int64_t>(rng.bounded(5)) - 2,
          static_cast<std::int64_t>(rng.bounded(5)) - 2;
    } while (jump.isZero());
    const double a = rng.unit(), b = rng.unit(), c2 = rng.unit();
    spec.channels.push_back(
        {jump,
         [a, b, c2](const State& s) {
           return a + b * std::abs(static_cast<double>(s[0])) +
                  c2 * std::abs(static_cast<double>(s[1]));
         },
         ""});
  }
  return spec;
}

}  // namespace

TEST_CASE("total rate sums channel rates") {
  auto poisson = models::make_poisson(2.0, 100);
  CHECK(total_rate(poisson.chain, state1(7)) == doctest::Approx(200.0).epsilon(1e-14));

  CHECK(total_rate(empty_spec(), state1(3)) == 0.0);

  auto queue = models::make_mm_inf(1.0, 10);
  CHECK(total_rate(queue.chain, state1(10)) == doctest::Approx(20.0).epsilon(1e-14));
}

TEST_CASE("total rate rejects invalid channel rates") {
  ChainSpec spec = empty_spec();
  State up(1);
  up << 1;
  spec.channels.push_back({up, [](const State&) { return -1.0; }, "bad_channel"});
  CHECK_THROWS_WITH_AS(total_rate(spec, state1(0)),
                       doctest::Contains("bad_channel"), ModelError);
}

TEST_CASE("validate rejects zero jumps and bad shapes") {
  ChainSpec spec = empty_spec();
  spec.channels.push_back({State::Zero(1), [](const State&) { return 1.0; }, ""});
  CHECK_THROWS_AS(spec.validate(), ModelError);
}

TEST_CASE("drift matches the worked examples") {
  auto poisson = models::make_poisson(2.0, 100);
  CHECK(drift(poisson.chain, state1(5))[0] == doctest::Approx(2.0).epsilon(1e-13));

  auto queue = models::make_mm_inf(1.0, 10);
  CHECK(drift(queue.chain, state1(10))[0] == doctest::Approx(0.0).epsilon(1e-13));
  CHECK(drift(queue.chain, state1(5))[0] == doctest::Approx(0.5).epsilon(1e-13));

  auto fight = models::make_gunfight(1.0, 1.0, 4, 0.5, 0.25);
  const Vec beta = drift(fight.chain, state2(2, 1));
  CHECK(beta[0] == doctest::Approx(-0.25).epsilon(1e-13));
  CHECK(beta[1] == doctest::Approx(-0.5).epsilon(1e-13));
}

TEST_CASE("alpha matches the worked examples") {
  auto poisson = models::make_poisson(2.0, 100);
  CHECK(alpha(poisson.chain, state1(0)) == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(alpha(empty_spec(), state1(0)) == 0.0);
  auto queue = models::make_mm_inf(1.0, 10);
  CHECK(alpha(queue.chain, state1(10)) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("phi_exp worked examples") {
  auto poisson = models::make_poisson(2.0, 100);
  CHECK(phi_exp(poisson.chain, state1(0), 0.0) == 0.0);

  // epidemic rates at N = 1 (integer coordinates), xi = (1,1), theta = 1:
  // both channels move coordinate 2, giving 2 (e - 2)
  ChainSpec epi;
  epi.dim = 2;
  epi.coord_dim = 2;
  epi.coord = [](const State& s) { return s.cast<double>(); };
  State infect(2), remove(2);
  infect << -1, 1;
  remove << 0, -1;
  epi.channels.push_back(
      {infect,
       [](const State& s) { return static_cast<double>(s[0] * s[1]); },
       "infection"});
  epi.channels.push_back(
      {remove, [](const State& s) { return static_cast<double>(s[1]); },
       "removal"});
  const double expected = 2.0 * (std::exp(1.0) - 2.0);
  CHECK(phi_exp(epi, state2(1, 1), 1.0) ==
        doctest::Approx(expected).epsilon(1e-12));

  // closed form lambda N sigma_theta(1/N) against the generic channel sum
  for (double theta : {0.5, 2.0, 7.0}) {
    const double n = 100.0, lambda = 2.0;
    const double closed = lambda * n * sigma_theta(theta, 1.0 / n);
    CHECK(phi_exp(poisson.chain, state1(17), theta) ==
          doctest::Approx(closed).epsilon(1e-12));
  }
}

TEST_CASE("phi_exp saturates on overflow") {
  auto poisson = models::make_poisson(1.0, 1);
  bool overflow = false;
  const double v = phi_exp(poisson.chain, state1(0), 800.0, &overflow);
  CHECK(overflow);
  CHECK(v == std::numeric_limits<double>::max());
}

TEST_CASE("sigma_theta lower bound and small-argument stability") {
  Rng rng(11, 0);
  for (int i = 0; i < 2000; ++i) {
    const double theta = 10.0 * rng.unit();
    const double x = 2.0 * rng.unit() - 1.0;
    CHECK(sigma_theta(theta, x) >= 0.5 * theta * theta * x * x - 1e-18);
  }
  // series branch agrees with the direct formula where both are accurate
  const double u = 0.9e-3;
  CHECK(sigma_theta(1.0, u) == doctest::Approx(std::expm1(u) - u).epsilon(1e-10));
}

TEST_CASE("per-coordinate phi dominates theta^2 alpha_i / 2") {
  Rng rng(12, 0);
  for (int rep = 0; rep < 50; ++rep) {
    auto spec = random_spec(rng, 4);
    const State s = state2(static_cast<std::int64_t>(rng.bounded(9)) - 4,
                           static_cast<std::int64_t>(rng.bounded(9)) - 4);
    const double theta = 0.1 + 3.0 * rng.unit();
    // test-side per-coordinate alpha
    Vec alpha_i = Vec::Zero(2);
    const Vec x = spec.coord(s);
    for (const auto& ch : spec.channels) {
      const Vec dx = spec.coord(s + ch.jump) - x;
      alpha_i += dx.cwiseProduct(dx) * ch.rate(s);
    }
    CHECK(phi_exp(spec, s, theta) >=
          0.5 * theta * theta * alpha_i.maxCoeff() * (1.0 - 1e-12));
  }
}

TEST_CASE("drift is additive over channel unions") {
  Rng rng(13, 0);
  for (int rep = 0; rep < 50; ++rep) {
    auto a = random_spec(rng, 3);
    auto b = random_spec(rng, 2);
    ChainSpec both = a;
    for (const auto& ch : b.channels) both.channels.push_back(ch);
    const State s = state2(static_cast<std::int64_t>(rng.bounded(7)) - 3,
                           static_cast<std::int64_t>(rng.bounded(7)) - 3);
    const Vec sum = drift(a, s) + drift(b, s);
    CHECK((drift(both, s) - sum).lpNorm<Eigen::Infinity>() ==
          doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("Cauchy-Schwarz |beta|^2 <= q alpha at sampled states") {
  Rng rng(14, 0);
  for (int rep = 0; rep < 200; ++rep) {
    auto spec = random_spec(rng, 1 + static_cast<int>(rng.bounded(5)));
    const State s = state2(static_cast<std::int64_t>(rng.bounded(11)) - 5,
                           static_cast<std::int64_t>(rng.bounded(11)) - 5);
    const double lhs = drift(spec, s).squaredNorm();
    const double rhs = total_rate(spec, s) * alpha(spec, s);
    CHECK(lhs <= rhs * (1.0 + 1e-12) + 1e-15);
  }
}

TEST_CASE("simulate: absorbing states and constant paths") {
  auto traj = simulate(empty_spec(), state1(4), 5.0, 99);
  CHECK(traj.terminated_absorbing);
  CHECK(traj.times.size() == 1);
  CHECK(traj.states.front() == state1(4));
  CHECK(traj.state_at(4.9) == state1(4));
}

TEST_CASE("simulate: Poisson jump counts match the law") {
  auto poisson = models::make_poisson(1.0, 1);
  const int replicas = 100000;
  double total_jumps = 0.0;
  for (int r = 0; r < replicas; ++r) {
    SimulateOptions opts;
    opts.stream = static_cast<std::uint64_t>(r);
    const auto traj = simulate(poisson.chain, state1(0), 10.0, 2024, opts);
    total_jumps += static_cast<double>(traj.times.size() - 1);
  }
  const double mean = total_jumps / replicas;
  const double slack = 4.0 * std::sqrt(10.0 / replicas);
  CHECK(mean > 10.0 - slack);
  CHECK(mean < 10.0 + slack);
}

TEST_CASE("simulate: determinism and seed sensitivity") {
  auto epi = models::make_epidemic({100, 2.0, 0.1});
  const auto a = simulate(epi.chain, epi.init, 2.0, 7);
  const auto b = simulate(epi.chain, epi.init, 2.0, 7);
  REQUIRE(a.times.size() == b.times.size());
  for (std::size_t i = 0; i < a.times.size(); ++i) {
    CHECK(a.times[i] == b.times[i]);
    CHECK(a.states[i] == b.states[i]);
  }
  const auto c = simulate(epi.chain, epi.init, 2.0, 8);
  REQUIRE(c.times.size() > 1);
  CHECK(a.times[1] != c.times[1]);
}

TEST_CASE("simulate: holding times have the exponential mean") {
  auto poisson = models::make_poisson(1.0, 1000);  // constant total rate 1000
  const auto traj = simulate(poisson.chain, state1(0), 120.0, 5);
  REQUIRE(traj.times.size() > 100000);
  double sum = 0.0;
  for (int i = 1; i <= 100000; ++i) sum += traj.times[i] - traj.times[i - 1];
  const double mean = sum / 100000;
  const double q = 1000.0;
  CHECK(std::abs(mean - 1.0 / q) <= 4.0 / (q * std::sqrt(100000.0)));
}

TEST_CASE("simulate: event budget raises with partial trajectory") {
  auto poisson = models::make_poisson(1.0, 100);
  SimulateOptions opts;
  opts.max_events = 10;
  try {
    simulate(poisson.chain, state1(0), 1e9, 1, opts);
    FAIL("expected BudgetExceededError");
  } catch (const BudgetExceededError& e) {
    CHECK(e.partial.times.size() == 11);  // initial point plus 10 events
    CHECK_FALSE(e.partial.terminated_absorbing);
  }
}

TEST_CASE("project maps states through the coordinate map") {
  auto traj = simulate(empty_spec(), state1(3), 1.0, 0);
  auto path = project(traj, empty_spec());
  REQUIRE(path.values.size() == 1);
  CHECK(path.values[0][0] == 3.0);

  auto epi = models::make_epidemic({1000, 5.0, 0.1});
  Trajectory manual;
  manual.horizon = 1.0;
  manual.times = {0.0, 0.5};
  manual.states = {state2(900, 100), state2(899, 101)};
  auto coords = project(manual, epi.chain);
  CHECK(coords.values[0][0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(coords.values[1][0] == doctest::Approx(0.899).epsilon(1e-15));
  CHECK(coords.values[1][1] == doctest::Approx(0.101).epsilon(1e-15));

  auto queue = models::make_mm_inf(0.0, 10);
  CHECK_THROWS_AS(project(manual, queue.chain), ModelError);
}

TEST_CASE("path_integral on piecewise-constant paths") {
  Trajectory manual;
  manual.horizon = 2.0;
  manual.times = {0.0, 0.5};
  manual.states = {state1(0), state1(1)};

  CHECK(path_integral(manual, [](const State&) { return 1.0; }, 1.5) ==
        doctest::Approx(1.5).epsilon(1e-15));
  CHECK(path_integral(manual, [](const State&) { return 0.0; }, 2.0) == 0.0);
  CHECK(path_integral(manual, [](const State& s) { return s[0] == 0 ? 1.0 : 0.0; },
                      1.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(path_integral(manual, [](const State&) { return 1.0; }, 3.0),
                  std::invalid_argument);
}

TEST_CASE("trajectory invariants: increasing times, moving states") {
  auto epi = models::make_epidemic({200, 5.0, 0.1});
  const auto traj = simulate(epi.chain, epi.init, 2.0, 63);
  REQUIRE(traj.times.size() == traj.states.size());
  CHECK(traj.times.front() == 0.0);
  for (std::size_t k = 1; k < traj.times.size(); ++k) {
    CHECK(traj.times[k] > traj.times[k - 1]);
    CHECK(traj.states[k] != traj.states[k - 1]);
  }
  if (traj.terminated_absorbing)
    CHECK(total_rate(epi.chain, traj.states.back()) == 0.0);
}
