// Batch front end: parse a config file, run one subcommand, emit CSV data
// files and a JSON summary. All randomness flows from the single master seed
// (replica r uses stream r), outputs are ordered by replica index, and float
// serialization is shortest-round-trip, so reruns are byte-identical.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "fluidmc/bounds.hpp"
#include "fluidmc/coupling.hpp"
#include "fluidmc/csv.hpp"
#include "fluidmc/ctmc.hpp"
#include "fluidmc/fluid.hpp"
#include "fluidmc/hypergraph.hpp"
#include "fluidmc/martingale.hpp"
#include "fluidmc/models.hpp"
#include "fluidmc/parallel.hpp"
#include "fluidmc/stats.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace fluidmc;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr int kExitOk = 0;
constexpr int kExitAssertion = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

const json& get_field(const json& obj, const std::string& key,
                      const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw ConfigError("missing required key '" + key + "' in " + where);
  return *it;
}

double get_number(const json& obj, const std::string& key,
                  const std::string& where) {
  const json& v = get_field(obj, key, where);
  if (!v.is_number()) throw ConfigError("'" + key + "' must be a number");
  return v.get<double>();
}

std::int64_t get_integer(const json& obj, const std::string& key,
                         const std::string& where) {
  const json& v = get_field(obj, key, where);
  if (!v.is_number_integer())
    throw ConfigError("'" + key + "' must be an integer");
  return v.get<std::int64_t>();
}

std::string get_string(const json& obj, const std::string& key,
                       const std::string& where) {
  const json& v = get_field(obj, key, where);
  if (!v.is_string()) throw ConfigError("'" + key + "' must be a string");
  return v.get<std::string>();
}

double get_number_or(const json& obj, const std::string& key, double fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number()) throw ConfigError("'" + key + "' must be a number");
  return it->get<double>();
}

// -- config ------------------------------------------------------------------

struct RunConfig {
  json raw;
  std::string model;
  std::map<std::string, double> parameters;
  std::int64_t n = 0;
  double t0 = 0.0;
  double eps = 0.0;
  std::string a_mode;  // explicit | footnote4 | model_default
  double a_explicit = 0.0;
  std::string theorem = "exp";
  int replicas = 0;
  std::uint64_t seed = 0;
  double h = 1e-3;
  std::uint64_t max_events = 100'000'000;
  fs::path out_dir = ".";
};

RunConfig parse_common(const json& cfg, const std::set<std::string>& allowed,
                       const std::string& sub, bool needs_model,
                       bool needs_eps_budget, bool needs_replicas) {
  check_keys(cfg, allowed, "config (" + sub + ")");
  RunConfig rc;
  rc.raw = cfg;

  const json& seed_field = get_field(cfg, "seed", "config");
  if (!seed_field.is_number_integer() && !seed_field.is_number_unsigned())
    throw ConfigError("'seed' must be an integer (no silent randomness)");
  rc.seed = seed_field.get<std::uint64_t>();

  if (needs_model) {
    rc.model = get_string(cfg, "model", "config");
    rc.n = get_integer(cfg, "N", "config");
    if (rc.n < 1) throw ConfigError("'N' must be at least 1");
    rc.t0 = get_number(cfg, "t0", "config");
    if (rc.t0 < 0) throw ConfigError("'t0' must be nonnegative");
    if (cfg.contains("parameters")) {
      const json& params = cfg.at("parameters");
      if (!params.is_object())
        throw ConfigError("'parameters' must be an object of numbers");
      for (auto it = params.begin(); it != params.end(); ++it) {
        if (!it->is_number())
          throw ConfigError("parameter '" + it.key() + "' must be a number");
        rc.parameters[it.key()] = it->get<double>();
      }
    }
  }
  if (needs_eps_budget) {
    rc.eps = get_number(cfg, "eps", "config");
    if (rc.eps <= 0) throw ConfigError("'eps' must be positive");
    rc.a_mode = get_string(cfg, "A_mode", "config");
    if (rc.a_mode != "explicit" && rc.a_mode != "footnote4" &&
        rc.a_mode != "model_default")
      throw ConfigError("'A_mode' must be explicit, footnote4 or model_default");
    if (rc.a_mode == "explicit") rc.a_explicit = get_number(cfg, "A", "config");
    if (cfg.contains("theorem")) {
      rc.theorem = get_string(cfg, "theorem", "config");
      if (rc.theorem != "exp" && rc.theorem != "l2")
        throw ConfigError("'theorem' must be exp or l2");
    }
  }
  if (needs_replicas) {
    rc.replicas = static_cast<int>(get_integer(cfg, "replicas", "config"));
    if (rc.replicas < 1) throw ConfigError("'replicas' must be at least 1");
  }
  if (cfg.contains("h")) {
    rc.h = get_number(cfg, "h", "config");
    if (rc.h <= 0) throw ConfigError("'h' must be positive");
  }
  if (cfg.contains("max_events")) {
    const auto budget = get_integer(cfg, "max_events", "config");
    if (budget < 1) throw ConfigError("'max_events' must be positive");
    rc.max_events = static_cast<std::uint64_t>(budget);
  }
  if (cfg.contains("out_dir")) rc.out_dir = get_string(cfg, "out_dir", "config");
  return rc;
}

// strict key allowlists per subcommand
const std::set<std::string> kSimulateKeys{"model", "parameters", "N", "t0",
                                          "replicas", "seed", "out_dir",
                                          "generic", "max_events"};
const std::set<std::string> kFluidKeys{"model", "parameters", "N", "t0", "h",
                                       "eps", "seed", "out_dir", "generic"};
const std::set<std::string> kBoundKeys{"model", "parameters", "N",       "t0",
                                       "eps",   "A_mode",     "A",       "theorem",
                                       "seed",  "out_dir",    "generic"};
const std::set<std::string> kCompareKeys{
    "model", "parameters", "N",    "t0",      "eps",     "A_mode", "A",
    "theorem", "replicas", "h",    "seed",    "out_dir", "generic",
    "max_events"};
const std::set<std::string> kCoupleKeys{"model", "parameters", "N",
                                        "t0",    "eps",        "A_mode",
                                        "A",     "replicas",   "h",
                                        "seed",  "out_dir",    "couple"};
const std::set<std::string> kCoreKeys{"N", "replicas", "seed", "out_dir", "core"};
const std::set<std::string> kDiagnoseKeys{"model", "parameters", "N",
                                          "t0",    "replicas",   "seed",
                                          "out_dir", "generic",  "diagnose"};

// -- model construction ------------------------------------------------------

models::ModelPair build_generic(const json& g, std::int64_t n) {
  check_keys(g, {"dim", "init", "channels", "box", "K"}, "generic");
  const int dim = static_cast<int>(get_integer(g, "dim", "generic"));
  if (dim < 1) throw ConfigError("generic.dim must be at least 1");

  models::ModelPair m;
  m.chain.dim = dim;
  m.chain.coord_dim = dim;
  m.chain.scale_hint = static_cast<double>(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  m.chain.coord = [inv_n](const State& s) { return s.cast<double>() * inv_n; };

  const json& init = get_field(g, "init", "generic");
  if (!init.is_array() || static_cast<int>(init.size()) != dim)
    throw ConfigError("generic.init must be an array of length dim");
  m.init = State(dim);
  for (int i = 0; i < dim; ++i) m.init[i] = init[i].get<std::int64_t>();

  struct Monomial {
    double constant;
    double scale_power;
    std::vector<int> powers;
  };
  const json& channels = get_field(g, "channels", "generic");
  if (!channels.is_array() || channels.empty())
    throw ConfigError("generic.channels must be a non-empty array");
  std::vector<std::pair<State, Monomial>> table;
  const double nn = static_cast<double>(n);
  for (const auto& ch : channels) {
    check_keys(ch, {"jump", "constant", "powers", "scale_power"},
               "generic channel");
    const json& jump = get_field(ch, "jump", "generic channel");
    if (!jump.is_array() || static_cast<int>(jump.size()) != dim)
      throw ConfigError("channel jump must be an array of length dim");
    State j(dim);
    for (int i = 0; i < dim; ++i) j[i] = jump[i].get<std::int64_t>();
    Monomial mono;
    mono.constant = get_number(ch, "constant", "generic channel");
    if (mono.constant < 0) throw ConfigError("channel constant must be >= 0");
    mono.scale_power = get_number_or(ch, "scale_power", 0.0);
    const json& powers = get_field(ch, "powers", "generic channel");
    if (!powers.is_array() || static_cast<int>(powers.size()) != dim)
      throw ConfigError("channel powers must be an array of length dim");
    for (int i = 0; i < dim; ++i) {
      const int p = powers[i].get<int>();
      if (p < 0) throw ConfigError("channel powers must be nonnegative");
      mono.powers.push_back(p);
    }
    table.emplace_back(std::move(j), std::move(mono));
  }
  for (auto& [jump, mono] : table) {
    const Monomial mo = mono;
    const double factor = mo.constant * std::pow(nn, mo.scale_power);
    m.chain.channels.push_back(
        {jump,
         [mo, factor](const State& s) {
           double r = factor;
           for (std::size_t i = 0; i < mo.powers.size(); ++i)
             for (int p = 0; p < mo.powers[i]; ++p)
               r *= static_cast<double>(s[i]);
           return r;
         },
         ""});
  }
  m.chain.validate();

  m.fluid.dim = dim;
  std::optional<Box> box;
  if (g.contains("box")) {
    const json& b = g.at("box");
    if (!b.is_array() || static_cast<int>(b.size()) != dim)
      throw ConfigError("generic.box must be an array of [lo, hi] pairs");
    Vec lo(dim), hi(dim);
    for (int i = 0; i < dim; ++i) {
      lo[i] = b[i].at(0).get<double>();
      hi[i] = b[i].at(1).get<double>();
    }
    box = Box{lo, hi};
  }
  // the fluid field is the drift read at real-valued states; clamping to the
  // box provides the Lipschitz extension outside U
  auto field_core = [table, nn, inv_n](const Vec& x) {
    Vec b = Vec::Zero(x.size());
    for (const auto& [jump, mono] : table) {
      double r = mono.constant * std::pow(nn, mono.scale_power);
      for (std::size_t i = 0; i < mono.powers.size(); ++i)
        for (int p = 0; p < mono.powers[i]; ++p) r *= nn * x[i];
      b += jump.cast<double>() * (r * inv_n);
    }
    return b;
  };
  if (box) {
    const Box bx = *box;
    m.fluid.field = [field_core, bx](const Vec& x) {
      Vec clamped = x.cwiseMax(bx.lo).cwiseMin(bx.hi);
      return field_core(clamped);
    };
    m.fluid.domain = Domain::from_box(bx);
  } else {
    m.fluid.field = field_core;
    m.fluid.domain = Domain::whole_space(dim);
  }
  m.fluid.x0 = m.init.cast<double>() * inv_n;
  if (g.contains("K")) {
    m.fluid.lipschitz = get_number(g, "K", "generic");
  } else {
    if (!box)
      throw ConfigError("generic model needs either K or a box to estimate it");
    m.fluid.lipschitz = estimate_lipschitz(m.fluid, 100000, 1);
    m.fluid.approximate_lipschitz = true;
  }
  return m;
}

// The library ships the removal-rate-1 epidemic; a general removal rate mu
// maps onto it by the linear time change t -> mu t with lambda -> lambda/mu.
// Returns the scale factor; all emitted times are then in units of 1/mu.
double extract_epidemic_mu(RunConfig& rc) {
  if (rc.model != "epidemic" && rc.model != "epidemic_timechanged") return 1.0;
  const auto it = rc.parameters.find("mu");
  if (it == rc.parameters.end()) return 1.0;
  const double mu = it->second;
  if (mu <= 0) throw ConfigError("epidemic 'mu' must be positive");
  rc.parameters.erase("mu");
  rc.parameters.at("lambda") /= mu;
  rc.t0 *= mu;
  return mu;
}

models::ModelPair build_model(const RunConfig& rc) {
  if (rc.model == "generic") {
    if (!rc.raw.contains("generic"))
      throw ConfigError("model 'generic' needs a 'generic' section");
    return build_generic(rc.raw.at("generic"), rc.n);
  }
  const auto& fac = models::factory(rc.model);
  // strict parameter schema: every key must be meaningful to the model
  for (const auto& [key, value] : rc.parameters) {
    (void)value;
    bool known = std::find(fac.required_params.begin(), fac.required_params.end(),
                           key) != fac.required_params.end();
    if (!known && fac.offspring_law && key.size() >= 2 && key[0] == 'p') {
      known = key.find_first_not_of("0123456789", 1) == std::string::npos;
    }
    if (!known)
      throw ConfigError("unknown parameter '" + key + "' for model " + rc.model);
  }
  return fac.make(rc.parameters, rc.n);
}

double resolve_a(const RunConfig& rc, const models::ModelPair& model) {
  if (rc.a_mode == "explicit") return rc.a_explicit;
  if (rc.model == "generic")
    throw ConfigError("generic models require A_mode = explicit");
  const auto& fac = models::factory(rc.model);
  if (rc.a_mode == "footnote4") {
    const auto qj = fac.footnote_qj(rc.parameters, rc.n);
    if (!qj)
      throw ConfigError("model " + rc.model +
                        " has no bounded-jump (Q, J) data; use A_mode = "
                        "explicit (for the viral model the A = a/R pattern "
                        "applies)");
    return admissible_a(qj->first, qj->second, rc.eps, rc.t0,
                        model.fluid.lipschitz)
        .a;
  }
  const auto a = fac.default_a(rc.parameters, rc.n);
  if (!a)
    throw ConfigError("model " + rc.model +
                      " has no model_default A; use explicit or footnote4");
  return *a;
}

ErrorBudget resolve_budget(const RunConfig& rc, const models::ModelPair& model,
                           double a) {
  if (rc.theorem == "l2")
    return budget_l2(rc.eps, rc.t0, model.fluid.lipschitz, a,
                     model.chain.coord_dim);
  return budget_exp(rc.eps, rc.t0, model.fluid.lipschitz, a,
                    model.chain.coord_dim);
}

// -- output helpers ----------------------------------------------------------

std::ofstream open_file(const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream out(dir / name, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + (dir / name).string());
  return out;
}

void write_summary(const fs::path& dir, json summary) {
  summary["version"] = kVersion;
  auto out = open_file(dir, "summary.json");
  out << summary.dump(2) << "\n";
}

json budget_json(const ErrorBudget& b, const std::string& a_mode) {
  json j;
  j["theorem"] = theorem_name(b.theorem);
  j["norm"] = theorem_norm(b.theorem);
  j["eps"] = b.eps;
  j["t0"] = b.t0;
  j["lipschitz"] = b.lipschitz;
  j["A"] = b.a;
  j["A_mode"] = a_mode;
  j["delta"] = b.delta;
  j["theta"] = b.theta;
  j["dim"] = b.dim;
  j["raw_bound"] = b.raw_bound;
  j["bound"] = b.bound;
  j["vacuous"] = b.vacuous;
  return j;
}

// -- subcommands --------------------------------------------------------------

int run_simulate(const json& cfg, const fs::path& out_override, int jobs,
                 std::optional<std::uint64_t> seed_override) {
  RunConfig rc = parse_common(cfg, kSimulateKeys, "simulate", true, false, true);
  const double mu_scale = extract_epidemic_mu(rc);
  if (seed_override) rc.seed = *seed_override;
  if (!out_override.empty()) rc.out_dir = out_override;
  const auto model = build_model(rc);

  std::vector<CoordPath> paths(rc.replicas);
  std::vector<char> absorbed(rc.replicas, 0);
  parallel_for(rc.replicas, jobs, [&](int r) {
    SimulateOptions opts;
    opts.stream = static_cast<std::uint64_t>(r);
    opts.max_events = rc.max_events;
    const auto traj = simulate(model.chain, model.init, rc.t0, rc.seed, opts);
    absorbed[r] = traj.terminated_absorbing;
    paths[r] = project(traj, model.chain);
  });

  auto csv = open_file(rc.out_dir, "paths.csv");
  csv << "replica,time";
  for (int i = 0; i < model.chain.coord_dim; ++i) csv << ",coord_" << (i + 1);
  csv << "\n";
  std::int64_t events = 0;
  for (int r = 0; r < rc.replicas; ++r) {
    for (std::size_t k = 0; k < paths[r].times.size(); ++k) {
      csv << r << "," << format_double(paths[r].times[k]);
      for (int i = 0; i < model.chain.coord_dim; ++i)
        csv << "," << format_double(paths[r].values[k][i]);
      csv << "\n";
    }
    events += static_cast<std::int64_t>(paths[r].times.size()) - 1;
  }

  json summary;
  summary["subcommand"] = "simulate";
  if (mu_scale != 1.0) {
    summary["mu"] = mu_scale;
    summary["time_unit"] = "1/mu";  // emitted times are mu * original time
  }
  summary["model"] = rc.model;
  summary["seed"] = rc.seed;
  summary["N"] = rc.n;
  summary["t0"] = rc.t0;
  summary["replicas"] = rc.replicas;
  summary["total_events"] = events;
  summary["absorbed_replicas"] =
      static_cast<int>(std::count(absorbed.begin(), absorbed.end(), 1));
  write_summary(rc.out_dir, std::move(summary));
  return kExitOk;
}

int run_fluid(const json& cfg, const fs::path& out_override, int,
              std::optional<std::uint64_t> seed_override) {
  RunConfig rc = parse_common(cfg, kFluidKeys, "fluid", true, false, false);
  const double mu_scale = extract_epidemic_mu(rc);
  if (seed_override) rc.seed = *seed_override;
  if (!out_override.empty()) rc.out_dir = out_override;
  const auto model = build_model(rc);
  const auto path = integrate(model.fluid, rc.t0, rc.h);

  auto csv = open_file(rc.out_dir, "fluid.csv");
  csv << "time";
  for (int i = 0; i < model.fluid.dim; ++i) csv << ",x_" << (i + 1);
  csv << "\n";
  for (std::size_t k = 0; k < path.times.size(); ++k) {
    csv << format_double(path.times[k]);
    for (int i = 0; i < model.fluid.dim; ++i)
      csv << "," << format_double(path.values[k][i]);
    csv << "\n";
  }

  json summary;
  summary["subcommand"] = "fluid";
  if (mu_scale != 1.0) {
    summary["mu"] = mu_scale;
    summary["time_unit"] = "1/mu";  // emitted times are mu * original time
  }
  summary["model"] = rc.model;
  summary["seed"] = rc.seed;
  summary["N"] = rc.n;
  summary["t0"] = rc.t0;
  summary["h"] = rc.h;
  summary["exited"] = path.exited;
  if (path.exited)
    summary["exit_time"] = path.exit_time;
  else
    summary["exit_time"] = nullptr;
  if (cfg.contains("eps") && path.exited) {
    const double eps = get_number(cfg, "eps", "config");
    const auto w = exit_window(model.fluid, path, eps);
    summary["exit_window"] = {{"eps", eps},
                              {"zeta_minus", w.zeta_minus},
                              {"zeta_plus", w.zeta_plus},
                              {"rho", w.rho}};
  }
  write_summary(rc.out_dir, std::move(summary));
  return kExitOk;
}

int run_bound(const json& cfg, const fs::path& out_override, int,
              std::optional<std::uint64_t> seed_override) {
  RunConfig rc = parse_common(cfg, kBoundKeys, "bound", true, true, false);
  const double mu_scale = extract_epidemic_mu(rc);
  if (seed_override) rc.seed = *seed_override;
  if (!out_override.empty()) rc.out_dir = out_override;
  const auto model = build_model(rc);
  const double a = resolve_a(rc, model);
  const auto budget = resolve_budget(rc, model, a);

  json summary;
  summary["subcommand"] = "bound";
  if (mu_scale != 1.0) {
    summary["mu"] = mu_scale;
    summary["time_unit"] = "1/mu";  // emitted times are mu * original time
  }
  summary["model"] = rc.model;
  summary["seed"] = rc.seed;
  summary["N"] = rc.n;
  summary["budget"] = budget_json(budget, rc.a_mode);
  if (rc.model == "epidemic" || rc.model == "epidemic_timechanged") {
    const double lambda = rc.parameters.at("lambda");
    const double c = models::epidemic_c_constant(lambda, rc.t0);
    summary["epidemic_C"] = c;
    summary["epidemic_closed_form_bound"] =
        4.0 * std::exp(-static_cast<double>(rc.n) * rc.eps * rc.eps / c);
  }
  write_summary(rc.out_dir, std::move(summary));
  return kExitOk;
}

int run_compare(const json& cfg, const fs::path& out_override, int jobs,
                std::optional<std::uint64_t> seed_override) {
  RunConfig rc = parse_common(cfg, kCompareKeys, "compare", true, true, true);
  const double mu_scale = extract_epidemic_mu(rc);
  if (seed_override) rc.seed = *seed_override;
  if (!out_override.empty()) rc.out_dir = out_override;
  const auto model = build_model(rc);
  const double a = resolve_a(rc, model);
  const auto budget = resolve_budget(rc, model, a);
  const auto fluid = integrate(model.fluid, rc.t0, rc.h);
  const bool sup_norm = budget.theorem != Theorem::kL2;

  std::vector<double> deviations(rc.replicas);
  std::vector<OmegaReport> omegas(rc.replicas);
  std::vector<CoordPath> paths(rc.replicas);
  parallel_for(rc.replicas, jobs, [&](int r) {
    SimulateOptions opts;
    opts.stream = static_cast<std::uint64_t>(r);
    opts.max_events = rc.max_events;
    const auto traj = simulate(model.chain, model.init, rc.t0, rc.seed, opts);
    paths[r] = project(traj, model.chain);
    deviations[r] = sup_deviation(paths[r], fluid, rc.t0, sup_norm);
    omegas[r] = omega_report(traj, model.chain, model.fluid, budget);
  });

  auto csv = open_file(rc.out_dir, "deviations.csv");
  csv << "replica,sup_deviation,omega0,omega1,omega2\n";
  int exceed = 0, fail0 = 0, fail1 = 0, fail2 = 0;
  for (int r = 0; r < rc.replicas; ++r) {
    csv << r << "," << format_double(deviations[r]) << "," << omegas[r].omega0
        << "," << omegas[r].omega1 << "," << omegas[r].omega2 << "\n";
    if (deviations[r] > rc.eps) ++exceed;
    fail0 += !omegas[r].omega0;
    fail1 += !omegas[r].omega1;
    fail2 += !omegas[r].omega2;
  }
  const double fraction = static_cast<double>(exceed) / rc.replicas;
  const double se = binomial_std_error(fraction, rc.replicas);
  const bool passed = fraction <= budget.bound + 3.0 * se;

  json summary;
  summary["subcommand"] = "compare";
  if (mu_scale != 1.0) {
    summary["mu"] = mu_scale;
    summary["time_unit"] = "1/mu";  // emitted times are mu * original time
  }
  summary["model"] = rc.model;
  summary["seed"] = rc.seed;
  summary["N"] = rc.n;
  summary["replicas"] = rc.replicas;
  summary["budget"] = budget_json(budget, rc.a_mode);
  summary["exceedance"] = {{"count", exceed},
                           {"fraction", fraction},
                           {"std_error", se}};
  summary["omega_failure_fractions"] = {
      {"omega0", static_cast<double>(fail0) / rc.replicas},
      {"omega1", static_cast<double>(fail1) / rc.replicas},
      {"omega2", static_cast<double>(fail2) / rc.replicas}};
  summary["exceedance_within_bound"] = passed;
  write_summary(rc.out_dir, std::move(summary));
  return passed ? kExitOk : kExitAssertion;
}

int run_couple(const json& cfg, const fs::path& out_override, int jobs,
               std::optional<std::uint64_t> seed_override) {
  RunConfig rc = parse_common(cfg, kCoupleKeys, "couple", true, true, true);
  if (seed_override) rc.seed = *seed_override;
  if (!out_override.empty()) rc.out_dir = out_override;
  if (rc.model != "epidemic")
    throw ConfigError("couple currently supports the epidemic label maps");
  const double mu_scale = extract_epidemic_mu(rc);
  for (const auto& [key, value] : rc.parameters) {
    (void)value;
    if (key != "lambda" && key != "p")
      throw ConfigError("unknown parameter '" + key + "' for model epidemic");
  }
  const json& section = get_field(cfg, "couple", "config");
  check_keys(section, {"label_map", "k", "G", "kappa"}, "couple");
  const std::string label_map = get_string(section, "label_map", "couple");
  if (label_map != "epidemic_individuals")
    throw ConfigError("unknown label map: " + label_map);
  const int k = static_cast<int>(get_integer(section, "k", "couple"));

  models::EpidemicParams params{rc.n, rc.parameters.at("lambda"),
                                rc.parameters.at("p")};
  auto ind = make_epidemic_individuals(params, k, rc.eps);
  ind.modulation.big_g = get_number_or(section, "G", 0.0);

  const double a = resolve_a(rc, ind.model);
  const auto budget =
      budget_exp(rc.eps, rc.t0, ind.model.fluid.lipschitz, a, 2);
  const auto fluid = integrate(ind.model.fluid, rc.t0, rc.h);

  if (section.contains("kappa")) {
    const json& kv = section.at("kappa");
    if (kv.is_string() && kv.get<std::string>() == "estimate") {
      std::vector<Label> labels;
      Label count = 1;
      for (int j = 0; j < k; ++j) count *= 3;
      for (Label y = 0; y < count; ++y) labels.push_back(y);
      ind.modulation.kappa =
          estimate_kappa(ind.modulation, fluid, rc.t0, rc.eps, labels);
      ind.modulation.kappa_estimated = true;
    } else if (kv.is_number()) {
      ind.modulation.kappa = kv.get<double>();
    } else {
      throw ConfigError("couple.kappa must be a number or \"estimate\"");
    }
  }

  std::vector<CoupledTrajectory> runs(rc.replicas);
  parallel_for(rc.replicas, jobs, [&](int r) {
    SimulateOptions opts;
    opts.stream = static_cast<std::uint64_t>(r);
    runs[r] = simulate_coupled(ind.model.chain, ind.modulation, ind.model.init,
                               fluid, rc.t0, rc.seed, opts);
  });

  auto csv = open_file(rc.out_dir, "decoupling.csv");
  csv << "replica,decoupled,decouple_time,tau\n";
  int desynced = 0;
  for (int r = 0; r < rc.replicas; ++r) {
    const bool hit = runs[r].decouple_time <= runs[r].tau;
    desynced += hit;
    csv << r << "," << hit << "," << format_double(runs[r].decouple_time) << ","
        << format_double(runs[r].tau) << "\n";
  }
  const double fraction = static_cast<double>(desynced) / rc.replicas;
  const double se = binomial_std_error(fraction, rc.replicas);
  const double bound =
      decoupling_bound(ind.modulation.big_g, ind.modulation.kappa, rc.t0, budget);
  const bool passed = fraction <= bound + 3.0 * se;

  json summary;
  summary["subcommand"] = "couple";
  if (mu_scale != 1.0) {
    summary["mu"] = mu_scale;
    summary["time_unit"] = "1/mu";
  }
  summary["model"] = rc.model;
  summary["seed"] = rc.seed;
  summary["N"] = rc.n;
  summary["k"] = k;
  summary["replicas"] = rc.replicas;
  summary["kappa"] = ind.modulation.kappa;
  summary["kappa_estimated"] = ind.modulation.kappa_estimated;
  summary["G"] = ind.modulation.big_g;
  summary["budget"] = budget_json(budget, rc.a_mode);
  summary["decoupling_bound"] = bound;
  summary["decoupled"] = {{"count", desynced},
                          {"fraction", fraction},
                          {"std_error", se}};
  summary["within_bound"] = passed;
  write_summary(rc.out_dir, std::move(summary));
  return passed ? kExitOk : kExitAssertion;
}

int run_core(const json& cfg, const fs::path& out_override, int jobs,
             std::optional<std::uint64_t> seed_override) {
  RunConfig rc = parse_common(cfg, kCoreKeys, "core", false, false, true);
  if (seed_override) rc.seed = *seed_override;
  if (!out_override.empty()) rc.out_dir = out_override;
  rc.n = get_integer(cfg, "N", "config");
  const json& section = get_field(cfg, "core", "config");
  check_keys(section, {"k", "p", "q", "export_instances"}, "core");
  bool export_instances = false;
  if (section.contains("export_instances")) {
    if (!section.at("export_instances").is_boolean())
      throw ConfigError("core.export_instances must be a boolean");
    export_instances = section.at("export_instances").get<bool>();
  }
  const int k = static_cast<int>(get_integer(section, "k", "core"));
  if (k < 2) throw ConfigError("core.k must be at least 2");

  auto parse_freq = [&](const char* key) {
    const json& fv = get_field(section, key, "core");
    if (!fv.is_object()) throw ConfigError("core frequency map must be an object");
    std::vector<double> values;
    for (auto it = fv.begin(); it != fv.end(); ++it) {
      std::size_t pos = 0;
      int index = -1;
      try {
        index = std::stoi(it.key(), &pos);
      } catch (const std::exception&) {
        throw ConfigError("frequency keys must be nonnegative integers");
      }
      if (pos != it.key().size() || index < 0)
        throw ConfigError("frequency keys must be nonnegative integers");
      if (static_cast<std::size_t>(index) >= values.size())
        values.resize(index + 1, 0.0);
      values[index] = it->get<double>();
    }
    return values;
  };
  const auto freq = hg::FrequencyVectors::create(parse_freq("p"), parse_freq("q"));

  const auto gs = hg::g_star(freq, k);
  const auto predicted = hg::limiting_frequencies(freq, k, gs.g);
  const int L = freq.max_index;

  std::vector<hg::CoreFrequencies> empirical(rc.replicas);
  std::vector<int> retries(rc.replicas);
  parallel_for(rc.replicas, jobs, [&](int r) {
    const auto gen =
        hg::generate(freq, rc.n, rc.seed, static_cast<std::uint64_t>(r));
    retries[r] = gen.retries;
    const auto peel =
        hg::peel_chain(gen.instance, k, rc.seed, 0x10000u + static_cast<std::uint64_t>(r));
    empirical[r] = hg::empirical_core_frequencies(peel.core, gen.instance);
    if (export_instances) {
      auto out = open_file(rc.out_dir,
                           "instance_" + std::to_string(r) + ".txt");
      hg::write_edge_list(gen.instance, out);
    }
  });

  Eigen::MatrixXd mean_p = Eigen::MatrixXd::Zero(L + 1, L + 1);
  Eigen::VectorXd mean_q = Eigen::VectorXd::Zero(L + 1);
  double max_dev = 0.0;
  for (const auto& emp : empirical) {
    for (int d = k; d <= L; ++d)
      for (int d2 = d; d2 <= L; ++d2) {
        const double e = d < emp.p.rows() && d2 < emp.p.cols() ? emp.p(d, d2) : 0.0;
        mean_p(d, d2) += e;
        max_dev = std::max(max_dev, std::abs(e - predicted.p(d, d2)));
      }
    for (int w = 1; w <= L; ++w) {
      const double e = w < emp.q.size() ? emp.q(w) : 0.0;
      mean_q(w) += e;
      max_dev = std::max(max_dev, std::abs(e - predicted.q(w)));
    }
  }
  mean_p /= rc.replicas;
  mean_q /= rc.replicas;

  auto csv = open_file(rc.out_dir, "core_frequencies.csv");
  csv << "kind,current,original,predicted,empirical_mean,max_abs_error\n";
  for (int d = k; d <= L; ++d)
    for (int d2 = d; d2 <= L; ++d2) {
      double dev = 0.0;
      for (const auto& emp : empirical) {
        const double e = d < emp.p.rows() && d2 < emp.p.cols() ? emp.p(d, d2) : 0.0;
        dev = std::max(dev, std::abs(e - predicted.p(d, d2)));
      }
      csv << "p," << d << "," << d2 << "," << format_double(predicted.p(d, d2))
          << "," << format_double(mean_p(d, d2)) << "," << format_double(dev)
          << "\n";
    }
  for (int w = 1; w <= L; ++w) {
    double dev = 0.0;
    for (const auto& emp : empirical) {
      const double e = w < emp.q.size() ? emp.q(w) : 0.0;
      dev = std::max(dev, std::abs(e - predicted.q(w)));
    }
    csv << "q," << w << ",-1," << format_double(predicted.q(w)) << ","
        << format_double(mean_q(w)) << "," << format_double(dev) << "\n";
  }

  json summary;
  summary["subcommand"] = "core";
  summary["seed"] = rc.seed;
  summary["N"] = rc.n;
  summary["k"] = k;
  summary["replicas"] = rc.replicas;
  summary["g_star"] = gs.g;
  summary["crossing_holds"] = gs.crossing_holds;
  summary["max_abs_error"] = max_dev;
  summary["total_retries"] =
      std::accumulate(retries.begin(), retries.end(), 0);
  write_summary(rc.out_dir, std::move(summary));
  return kExitOk;
}

int run_diagnose(const json& cfg, const fs::path& out_override, int jobs,
                 std::optional<std::uint64_t> seed_override) {
  RunConfig rc = parse_common(cfg, kDiagnoseKeys, "diagnose", true, false, true);
  const double mu_scale = extract_epidemic_mu(rc);
  if (seed_override) rc.seed = *seed_override;
  if (!out_override.empty()) rc.out_dir = out_override;
  const json& section = get_field(cfg, "diagnose", "config");
  check_keys(section, {"theta", "B", "A", "observable"}, "diagnose");
  const double theta = get_number(section, "theta", "diagnose");
  const double b_level = get_number(section, "B", "diagnose");
  const double a_level = get_number(section, "A", "diagnose");
  const std::string observable = get_string(section, "observable", "diagnose");

  const auto model = build_model(rc);
  int coord_index = -1;
  if (observable.rfind("coord_", 0) == 0) {
    coord_index = std::stoi(observable.substr(6));
    if (coord_index < 0 || coord_index >= model.chain.coord_dim)
      throw ConfigError("observable coordinate out of range");
  } else {
    throw ConfigError("observable must be coord_<i>");
  }
  const CoordFn coord = model.chain.coord;
  const ObservableFn f = [coord, coord_index](const State& s) {
    return coord(s)[coord_index];
  };

  std::vector<CompensatedPath> paths(rc.replicas);
  parallel_for(rc.replicas, jobs, [&](int r) {
    SimulateOptions opts;
    opts.stream = static_cast<std::uint64_t>(r);
    const auto traj = simulate(model.chain, model.init, rc.t0, rc.seed, opts);
    paths[r] = compensate(traj, model.chain, f, theta);
  });

  auto csv = open_file(rc.out_dir, "martingale.csv");
  csv << "replica,m_end,sup_m,sup_abs_m,int_alpha,int_phi,z\n";
  for (int r = 0; r < rc.replicas; ++r) {
    const auto& p = paths[r];
    csv << r << "," << format_double(p.m_end) << "," << format_double(p.sup_m)
        << "," << format_double(p.sup_abs_m) << ","
        << format_double(p.int_alpha) << "," << format_double(p.int_phi) << ","
        << format_double(std::exp(theta * p.m_end - p.int_phi)) << "\n";
  }

  const auto zero = mean_zero_check(paths);
  const auto doob = doob_check(paths);
  const auto expr = exp_check(paths, b_level, a_level);
  const bool passed = zero.within_4se && doob.holds && doob.first_moment_holds &&
                      doob.quadratic_centered && expr.mean_ok && expr.tail_ok;

  json summary;
  summary["subcommand"] = "diagnose";
  if (mu_scale != 1.0) {
    summary["mu"] = mu_scale;
    summary["time_unit"] = "1/mu";  // emitted times are mu * original time
  }
  summary["model"] = rc.model;
  summary["seed"] = rc.seed;
  summary["N"] = rc.n;
  summary["t0"] = rc.t0;
  summary["replicas"] = rc.replicas;
  summary["observable"] = observable;
  summary["theta"] = theta;
  summary["mean_zero"] = {{"mean", zero.mean},
                          {"std_error", zero.std_error},
                          {"within_4se", zero.within_4se}};
  summary["doob"] = {{"mean_sup_m2", doob.mean_sup_m2},
                     {"mean_4int_alpha", doob.mean_4int_alpha},
                     {"holds", doob.holds},
                     {"mean_sup_abs", doob.mean_sup_abs},
                     {"mean_2int_tau", doob.mean_2int_tau},
                     {"first_moment_holds", doob.first_moment_holds},
                     {"mean_quadratic", doob.mean_quadratic},
                     {"quadratic_centered", doob.quadratic_centered}};
  summary["exponential"] = {{"mean_z", expr.mean_z},
                            {"se_z", expr.se_z},
                            {"mean_ok", expr.mean_ok},
                            {"overflow_excluded", expr.overflow_excluded},
                            {"B", expr.b},
                            {"A", expr.a},
                            {"prob_exceed", expr.prob_exceed},
                            {"exceed_bound", expr.exceed_bound},
                            {"tail_ok", expr.tail_ok}};
  summary["checks_passed"] = passed;
  write_summary(rc.out_dir, std::move(summary));
  return passed ? kExitOk : kExitAssertion;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fluid-limit approximation toolkit for Markov jump processes"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int jobs = 1;
  std::uint64_t seed_value = 0;
  bool seed_given = false;

  const std::vector<std::pair<std::string, std::string>> subs{
      {"simulate", "exact jump-chain simulation, coordinate paths as CSV"},
      {"fluid", "integrate the limit equation, exit report"},
      {"bound", "evaluate an error budget"},
      {"compare", "replicas vs fluid path: deviations, exceedance, Omega events"},
      {"couple", "joint chain with fluid-modulated label dynamics"},
      {"core", "random hypergraph cores: predicted vs empirical frequencies"},
      {"diagnose", "martingale compensation checks"}};
  for (const auto& [name, desc] : subs) {
    auto* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--out", out_dir, "output directory (overrides config)");
    sub->add_option("--jobs", jobs, "worker threads for replicas");
    sub->add_option_function<std::uint64_t>(
        "--seed",
        [&](std::uint64_t v) {
          seed_value = v;
          seed_given = true;
        },
        "master seed (overrides config)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    json cfg;
    {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot read config file: " + config_path);
      try {
        in >> cfg;
      } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
      }
    }
    const std::optional<std::uint64_t> seed_override =
        seed_given ? std::optional<std::uint64_t>(seed_value) : std::nullopt;
    const fs::path out_override = out_dir;

    const std::string sub = app.get_subcommands().front()->get_name();
    if (sub == "simulate") return run_simulate(cfg, out_override, jobs, seed_override);
    if (sub == "fluid") return run_fluid(cfg, out_override, jobs, seed_override);
    if (sub == "bound") return run_bound(cfg, out_override, jobs, seed_override);
    if (sub == "compare") return run_compare(cfg, out_override, jobs, seed_override);
    if (sub == "couple") return run_couple(cfg, out_override, jobs, seed_override);
    if (sub == "core") return run_core(cfg, out_override, jobs, seed_override);
    if (sub == "diagnose") return run_diagnose(cfg, out_override, jobs, seed_override);
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ModelError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const BudgetExceededError& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
