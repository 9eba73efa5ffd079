#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <memory>

#include "fluidmc/coupling.hpp"
#include "fluidmc/stats.hpp"

using namespace fluidmc;

namespace {

State state1(std::int64_t a) {
  State s(1);
  s << a;
  return s;
}

// M/M/infinity with the identity label map: gamma is a function of the label
// alone, so the matched modulation has zero desynchronization hazard.
struct IdentityQueue {
  models::ModelPair model;
  ModulationSpec mod;
};

IdentityQueue identity_queue(std::int64_t n) {
  IdentityQueue out;
  out.model = models::make_mm_inf(0.0, n);
  out.mod.label_of = [](const State& s) { return s[0]; };
  out.mod.target_rate = [n](const Vec&, Label from, Label to) {
    if (to == from + 1) return static_cast<double>(n);
    if (to == from - 1) return static_cast<double>(from);
    return 0.0;
  };
  out.mod.label_neighbors = [](Label y) {
    return y > 0 ? std::vector<Label>{y + 1, y - 1} : std::vector<Label>{y + 1};
  };
  out.mod.label_rate_bound = [n](Label y) {
    return static_cast<double>(n) + static_cast<double>(y);
  };
  return out;
}

// random two-dimensional spec plus an arbitrary finite label table, for the
// kernel marginal identities
struct RandomCoupled {
  ChainSpec spec;
  ModulationSpec mod;
};

RandomCoupled random_coupled(Rng& rng) {
  RandomCoupled rc;
  rc.spec.dim = 2;
  rc.spec.coord_dim = 2;
  rc.spec.coord = [](const State& s) { return s.cast<double>() * 0.25; };
  const int channels = 3 + static_cast<int>(rng.bounded(3));
  for (int c = 0; c < channels; ++c) {
    State jump(2);
    do {
      jump << static_cast<std::int64_t>(rng.bounded(3)) - 1,
          static_cast<std::int64_t>(rng.bounded(3)) - 1;
    } while (jump.isZero());
    const double a = 0.2 + rng.unit(), b = rng.unit();
    rc.spec.channels.push_back(
        {jump,
         [a, b](const State& s) {
           return a + b * std::abs(static_cast<double>(s[0] + s[1]));
         },
         ""});
  }
  // labels 0..5 from a fixed hash of the state; g from a frozen random table
  rc.mod.label_of = [](const State& s) {
    return ((s[0] * 7 + s[1] * 3) % 6 + 6) % 6;
  };
  auto table = std::make_shared<std::map<std::pair<Label, Label>, double>>();
  for (Label y = 0; y < 6; ++y)
    for (Label y2 = 0; y2 < 6; ++y2)
      if (y != y2) (*table)[{y, y2}] = rng.unit() * (1.0 + 0.3 * y2);
  rc.mod.target_rate = [table](const Vec& x, Label y, Label y2) {
    const auto it = table->find({y, y2});
    return it == table->end() ? 0.0 : it->second * (1.0 + 0.1 * x[0]);
  };
  rc.mod.label_neighbors = [](Label y) {
    std::vector<Label> out;
    for (Label y2 = 0; y2 < 6; ++y2)
      if (y2 != y) out.push_back(y2);
    return out;
  };
  rc.mod.label_rate_bound = [](Label) { return 100.0; };
  return rc;
}

FluidPath constant_fluid(const Vec& x, double horizon) {
  FluidModel m;
  m.dim = static_cast<int>(x.size());
  m.field = [](const Vec& v) { return Vec::Zero(v.size()); };
  m.domain = Domain::whole_space(m.dim);
  m.x0 = x;
  return integrate(m, horizon, horizon / 16.0);
}

}  // namespace

TEST_CASE("gamma sums channel rates landing in a label class") {
  // constant label map: no class change is possible
  auto queue = identity_queue(10);
  ModulationSpec constant_mod = queue.mod;
  constant_mod.label_of = [](const State&) { return 0; };
  CHECK(coupling_gamma(queue.model.chain, constant_mod, state1(4), 1) == 0.0);

  // identity label map: gamma equals the matching channel rate
  CHECK(coupling_gamma(queue.model.chain, queue.mod, state1(4), 5) ==
        doctest::Approx(10.0).epsilon(1e-15));
  CHECK(coupling_gamma(queue.model.chain, queue.mod, state1(4), 3) ==
        doctest::Approx(4.0).epsilon(1e-15));

  // tracked epidemic individual, k = 1: susceptible individual moves to
  // label 2 at rate lambda xi^2 / N
  auto ind = make_epidemic_individuals({1000, 5.0, 0.1}, 1, 0.05);
  State s = ind.model.init;  // (900, 100, 1)
  const Label to = encode_individual_labels({2});
  CHECK(coupling_gamma(ind.model.chain, ind.modulation, s, to) ==
        doctest::Approx(5.0 * 100.0 / 1000.0).epsilon(1e-12));
}

TEST_CASE("coupled kernel marginals recover both chains") {
  Rng rng(31, 0);
  for (int rep = 0; rep < 20; ++rep) {
    auto rc = random_coupled(rng);
    auto fluid = constant_fluid(Vec::Constant(2, 0.5), 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      State s(2);
      s << static_cast<std::int64_t>(rng.bounded(9)) - 4,
          static_cast<std::int64_t>(rng.bounded(9)) - 4;
      const Label own = rc.mod.label_of(s);
      // both the synchronized case and an arbitrary desynchronized label
      for (Label y : {own, (own + 1 + static_cast<Label>(rng.bounded(5))) % 6}) {
        const double t = rng.unit();
        const auto moves = coupled_kernel(rc.spec, rc.mod, s, y, t, fluid);
        // state marginal: sum over labels of rates into each target state
        std::map<std::vector<std::int64_t>, double> state_marginal;
        std::map<Label, double> label_marginal;
        for (const auto& mv : moves) {
          if (mv.state != s) {
            std::vector<std::int64_t> key(mv.state.data(),
                                          mv.state.data() + mv.state.size());
            state_marginal[key] += mv.rate;
          }
          if (mv.label != y) label_marginal[mv.label] += mv.rate;
        }
        for (const auto& ch : rc.spec.channels) {
          const State target = s + ch.jump;
          std::vector<std::int64_t> key(target.data(),
                                        target.data() + target.size());
          double expected = 0.0;
          for (const auto& other : rc.spec.channels)
            if ((s + other.jump) == target) expected += other.rate(s);
          CHECK(state_marginal[key] ==
                doctest::Approx(expected).epsilon(1e-12));
        }
        const Vec x_t = fluid.eval(t);
        for (Label y2 : rc.mod.label_neighbors(y)) {
          const double g = rc.mod.target_rate(x_t, y, y2);
          CHECK(label_marginal[y2] == doctest::Approx(g).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("matched rates never desynchronize") {
  auto queue = identity_queue(50);
  auto fluid = constant_fluid(Vec::Zero(1), 1.0);
  // kernel form: every move keeps label == label_of(state)
  State s = state1(12);
  const auto moves =
      coupled_kernel(queue.model.chain, queue.mod, s, 12, 0.5, fluid);
  for (const auto& mv : moves) {
    CHECK(mv.label == queue.mod.label_of(mv.state));
    CHECK(mv.state != s);  // no label-only moves with matched rates
  }
  for (std::uint64_t r = 0; r < 50; ++r) {
    SimulateOptions opts;
    opts.stream = r;
    const auto traj = simulate_coupled(queue.model.chain, queue.mod,
                                       queue.model.init, fluid, 1.0, 77, opts);
    CHECK(std::isinf(traj.decouple_time));
    CHECK(traj.tau == 1.0);
  }
}

TEST_CASE("labels stay equal to label_of(state) before the decoupling time") {
  auto ind = make_epidemic_individuals({200, 5.0, 0.1}, 2, 0.05);
  auto fluid = integrate(ind.model.fluid, 1.0, 1e-3);
  for (std::uint64_t r = 0; r < 20; ++r) {
    SimulateOptions opts;
    opts.stream = r;
    const auto traj = simulate_coupled(ind.model.chain, ind.modulation,
                                       ind.model.init, fluid, 1.0, 11, opts);
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
      if (traj.times[i] < traj.decouple_time)
        CHECK(ind.modulation.label_of(traj.states[i]) == traj.labels[i]);
    }
  }
}

TEST_CASE("epidemic individual coupling stays within the decoupling bound") {
  const models::EpidemicParams params{1000, 5.0, 0.1};
  const int k = 1;
  const double eps = 0.05, t0 = 1.0;
  auto ind = make_epidemic_individuals(params, k, eps);
  auto fluid = integrate(ind.model.fluid, t0, 1e-3);
  const int replicas = 500;
  int desynced = 0;
  for (int r = 0; r < replicas; ++r) {
    SimulateOptions opts;
    opts.stream = static_cast<std::uint64_t>(r);
    const auto traj = simulate_coupled(ind.model.chain, ind.modulation,
                                       ind.model.init, fluid, t0, 2718, opts);
    if (traj.decouple_time <= traj.tau) ++desynced;
  }
  const double frac = static_cast<double>(desynced) / replicas;
  const auto budget =
      budget_exp(eps, t0, ind.model.fluid.lipschitz,
                 models::epidemic_default_a(params.lambda, params.n), 2);
  const double bound = decoupling_bound(0.0, ind.modulation.kappa, t0, budget);
  CHECK(frac <= bound + 3.0 * binomial_std_error(frac, replicas));
}

TEST_CASE("label marginal matches a frozen-point homogeneous chain") {
  const double lambda = 5.0;
  auto ind = make_epidemic_individuals({1000, lambda, 0.1}, 1, 0.05);
  auto fluid = integrate(ind.model.fluid, 1.0, 1e-3);
  const Vec frozen = fluid.eval(0.3);
  auto const_fluid = constant_fluid(frozen, 1.0);

  const int replicas = 10000;
  const double t0 = 1.0;
  // direct homogeneous chain on {1,2,3} with rates lambda x2, then 1
  ChainSpec direct;
  direct.dim = 1;
  direct.coord_dim = 1;
  direct.coord = [](const State& s) { return s.cast<double>(); };
  State up(1);
  up << 1;
  const double infect_rate = lambda * frozen[1];
  direct.channels.push_back(
      {up,
       [infect_rate](const State& s) { return s[0] == 1 ? infect_rate : 0.0; },
       "infect"});
  direct.channels.push_back(
      {up, [](const State& s) { return s[0] == 2 ? 1.0 : 0.0; }, "remove"});

  std::vector<double> occupation_direct, occupation_labels;
  std::vector<double> final_direct(3, 0.0), final_labels(3, 0.0);
  for (int r = 0; r < replicas; ++r) {
    SimulateOptions opts;
    opts.stream = static_cast<std::uint64_t>(r);
    const auto traj = simulate(direct, state1(1), t0, 5150, opts);
    occupation_direct.push_back(
        path_integral(traj, [](const State& s) { return s[0] == 1 ? 1.0 : 0.0; },
                      t0));
    final_direct[traj.states.back()[0] - 1] += 1.0;

    const auto labels = simulate_labels(ind.modulation,
                                        encode_individual_labels({1}),
                                        const_fluid, t0, 5151, opts);
    // occupation time of label "susceptible"
    double occ = 0.0;
    for (std::size_t i = 0; i < labels.times.size(); ++i) {
      const double hi =
          i + 1 < labels.times.size() ? labels.times[i + 1] : t0;
      if (labels.labels[i] == encode_individual_labels({1}))
        occ += hi - labels.times[i];
    }
    occupation_labels.push_back(occ);
    final_labels[decode_individual_labels(labels.labels.back(), 1)[0] - 1] += 1.0;
  }
  const auto ks = ks_two_sample(occupation_direct, occupation_labels, 1e-3);
  CHECK_FALSE(ks.reject);
  CHECK(chi_square_two_sample(final_direct, final_labels) <
        chi_square_critical_1e3(2));
}

TEST_CASE("tracked components evolve on independent clocks") {
  const int k = 2;
  auto ind = make_epidemic_individuals({1000, 5.0, 0.1}, k, 0.05);
  auto fluid = integrate(ind.model.fluid, 1.0, 1e-3);
  const int replicas = 10000;
  std::vector<std::vector<double>> table(3, std::vector<double>(3, 0.0));
  for (int r = 0; r < replicas; ++r) {
    SimulateOptions opts;
    opts.stream = static_cast<std::uint64_t>(r);
    const auto labels =
        simulate_labels(ind.modulation, encode_individual_labels({1, 1}),
                        fluid, 1.0, 31337, opts);
    const auto decoded = decode_individual_labels(labels.labels.back(), k);
    table[decoded[0] - 1][decoded[1] - 1] += 1.0;
  }
  CHECK(chi_square_independence(table) < chi_square_critical_1e3(4));
}

TEST_CASE("decoupling bound reductions and shapes") {
  const auto budget = budget_exp(3.0, 1.0, 0.0, 0.05, 2);
  CHECK(decoupling_bound(0.0, 0.0, 1.0, budget) == budget.bound);

  // linear in kappa = k lambda eps
  const double lambda = 0.001, eps = 0.01, t0 = 1.0;
  const double b1 = decoupling_bound(0.0, 1.0 * lambda * eps, t0, budget);
  const double b2 = decoupling_bound(0.0, 2.0 * lambda * eps, t0, budget);
  CHECK(std::abs((b2 - b1) - lambda * eps * t0) <= 1e-15);

  // with eps = sqrt(C log N / N) the unclamped bound decreases in N
  const double k = 2.0, lam = 5.0;
  const double lip = lam + std::max(lam, 1.0);
  const double c = models::epidemic_c_constant(lam, 1.0);
  double prev = std::numeric_limits<double>::infinity();
  for (double n : {1e3, 1e4, 1e5}) {
    const double eps_n = std::sqrt(c * std::log(n) / n);
    const auto b = budget_exp(eps_n, 1.0, lip, models::epidemic_default_a(lam,
                              static_cast<std::int64_t>(n)), 2);
    const double raw = k * lam * eps_n * 1.0 + b.raw_bound;
    CHECK(raw < prev);
    prev = raw;
  }
}

TEST_CASE("individual rate table") {
  Vec x(2);
  x << 0.4, 0.1;
  CHECK(epidemic_individual_rate(5.0, x, 1, 2) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(epidemic_individual_rate(5.0, x, 2, 3) == 1.0);
  CHECK(epidemic_individual_rate(5.0, x, 3, 1) == 0.0);
  CHECK(epidemic_individual_rate(5.0, x, 3, 2) == 0.0);
  CHECK(epidemic_individual_rate(5.0, x, 1, 3) == 0.0);

  // k = 2 label (1,2): total outflow lambda x2 + 1
  auto ind = make_epidemic_individuals({1000, 5.0, 0.1}, 2, 0.05);
  const Label y = encode_individual_labels({1, 2});
  double total = 0.0;
  for (Label y2 : ind.modulation.label_neighbors(y))
    total += ind.modulation.target_rate(x, y, y2);
  CHECK(total == doctest::Approx(5.0 * 0.1 + 1.0).epsilon(1e-14));
}

TEST_CASE("restricted label sets cap tau") {
  auto queue = identity_queue(10);
  queue.mod.in_restricted = [](Label y) { return y < 3; };
  auto fluid = constant_fluid(Vec::Zero(1), 2.0);
  const auto traj = simulate_coupled(queue.model.chain, queue.mod,
                                     queue.model.init, fluid, 2.0, 5);
  // arrivals at rate 10 push the label past 3 quickly
  CHECK(traj.tau < 2.0);
  bool seen_exit = false;
  for (std::size_t i = 0; i < traj.labels.size(); ++i) {
    if (!queue.mod.in_restricted(traj.labels[i])) {
      CHECK(traj.times[i] == traj.tau);
      seen_exit = true;
      break;
    }
  }
  CHECK(seen_exit);
}

TEST_CASE("label codec round-trips") {
  for (int a = 1; a <= 3; ++a)
    for (int b = 1; b <= 3; ++b)
      for (int c = 1; c <= 3; ++c) {
        const auto code = encode_individual_labels({a, b, c});
        const auto back = decode_individual_labels(code, 3);
        CHECK(back[0] == a);
        CHECK(back[1] == b);
        CHECK(back[2] == c);
      }
}

TEST_CASE("estimated kappa recovers the analytic epidemic modulus") {
  const double lambda = 5.0, eps = 0.05, t0 = 1.0;
  for (int k : {1, 2}) {
    auto ind = make_epidemic_individuals({1000, lambda, 0.1}, k, eps);
    const auto fluid = integrate(ind.model.fluid, t0, 1e-2);
    std::vector<Label> labels;
    Label count = 1;
    for (int j = 0; j < k; ++j) count *= 3;
    for (Label y = 0; y < count; ++y) labels.push_back(y);
    const double est = estimate_kappa(ind.modulation, fluid, t0, eps, labels);
    const double analytic = k * lambda * eps;  // k susceptible components
    CHECK(est <= analytic * (1.0 + 1e-12));
    CHECK(est >= 0.95 * analytic);
  }
}
