#include "ospca/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "ospca/error.hpp"
#include "ospca/oja_analytic.hpp"

#ifndef OSPCA_VERSION
#define OSPCA_VERSION "0.0.0"
#endif

namespace ospca {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------- config I/O

class Reader {
 public:
  Reader(const json& doc, std::string section) : section_(std::move(section)) {
    if (section_.empty()) {
      node_ = &doc;
    } else if (doc.contains(section_)) {
      node_ = &doc.at(section_);
      require(node_->is_object(), ErrorCode::Config, section_ + " must be an object");
    }
  }

  template <class T>
  void get(const char* key, T& out) {
    const json* v = find(key);
    if (!v) return;
    try {
      out = v->get<T>();
    } catch (const json::exception&) {
      fail(ErrorCode::Config, path(key) + ": wrong type (" + v->dump() + ")");
    }
  }

  /// null or "auto" leaves the value empty.
  void get(const char* key, std::optional<double>& out) {
    const json* v = find(key);
    if (!v) return;
    if (v->is_null() || (v->is_string() && v->get<std::string>() == "auto")) {
      out.reset();
      return;
    }
    require(v->is_number(), ErrorCode::Config, path(key) + ": expected a number or \"auto\"");
    out = v->get<double>();
  }

  void get(const char* key, std::vector<Atom>& out) {
    const json* v = find(key);
    if (!v) return;
    require(v->is_array(), ErrorCode::Config, path(key) + ": expected a list of atoms");
    out.clear();
    for (const auto& item : *v) {
      if (item.is_array() && item.size() == 2 && item[0].is_number() && item[1].is_number()) {
        out.push_back({item[0].get<double>(), item[1].get<double>()});
      } else if (item.is_object() && item.contains("value") && item.contains("weight")) {
        out.push_back({item.at("value").get<double>(), item.at("weight").get<double>()});
      } else {
        fail(ErrorCode::Config, path(key) + ": atoms are [value, weight] pairs");
      }
    }
  }

  /// Rejects keys that were never read.
  void finish() const {
    if (!node_ || section_.empty()) return;
    for (const auto& [key, value] : node_->items()) {
      if (!seen_.count(key)) fail(ErrorCode::Config, "unknown configuration key " + path(key));
    }
  }

 private:
  const json* find(const char* key) {
    seen_.insert(key);
    if (!node_ || !node_->contains(key)) return nullptr;
    return &node_->at(key);
  }

  std::string path(const std::string& key) const {
    return section_.empty() ? key : section_ + "." + key;
  }

  const json* node_ = nullptr;
  std::string section_;
  std::set<std::string> seen_;
};

json optional_to_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// ---------------------------------------------------------------- validation

void check(bool ok, const std::string& field, const std::string& what) {
  require(ok, ErrorCode::Config, field + ": " + what);
}

bool finite(double v) { return std::isfinite(v); }

void check_times(const std::vector<double>& times, double t_max, const std::string& field) {
  for (double t : times) {
    check(finite(t) && t >= 0.0 && t <= t_max + 1e-12, field,
          "times must lie in [0, t_max]");
  }
}

std::vector<double> time_grid(double t_max, double interval) {
  std::vector<double> out;
  for (std::int64_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * interval;
    if (t > t_max + 1e-9 * std::max(1.0, t_max)) break;
    out.push_back(t);
  }
  if (out.empty() || out.back() < t_max - 1e-9 * std::max(1.0, t_max)) out.push_back(t_max);
  return out;
}

FluxScheme parse_scheme(const std::string& s) {
  if (s == "exponential") return FluxScheme::ExponentialFitting;
  if (s == "upwind") return FluxScheme::Upwind;
  fail(ErrorCode::Config, "pde.scheme: expected \"exponential\" or \"upwind\"");
}

void require_nonzero_overlap(double q0, const char* command) {
  if (std::abs(q0) <= 1e-12) {
    fail(ErrorCode::Config,
         std::string(command) +
             ": initial overlap Q0 is zero; the scaling limit assumes Q0 != 0 "
             "(set simulation.x0_mean != 0 with a prior of nonzero mean, or oja.q0)");
  }
}

Cell num(double v) { return v; }
Cell integer(std::int64_t v) { return v; }

}  // namespace

void ExperimentConfig::validate() const {
  static const std::set<std::string> priors{"two_point", "two_point_signed",
                                            "bernoulli_gaussian", "discrete"};
  check(priors.count(model.prior) > 0, "model.prior",
        "expected two_point, two_point_signed, bernoulli_gaussian or discrete");
  if (model.prior != "discrete") {
    check(finite(model.rho) && model.rho > 0.0 && model.rho <= 1.0, "model.rho",
          "must lie in (0, 1]");
  } else {
    check(!model.atoms.empty(), "model.atoms", "a discrete prior needs atoms");
  }
  check(finite(model.omega) && model.omega >= 0.0, "model.omega", "must be >= 0");
  check(model.p >= 2, "model.p", "must be >= 2");
  check(model.quadrature_nodes >= 1 && model.quadrature_nodes <= 200, "model.quadrature_nodes",
        "must lie in [1, 200]");
  try {
    prior().validate();
  } catch (const Error& e) {
    fail(ErrorCode::Config, std::string("model: ") + e.what());
  }

  check(finite(algorithm.tau) && algorithm.tau > 0.0, "algorithm.tau", "must be > 0");
  check(algorithm.threshold == "none" || algorithm.threshold == "soft", "algorithm.threshold",
        "expected \"none\" or \"soft\"");
  check(finite(algorithm.beta) && algorithm.beta >= 0.0, "algorithm.beta", "must be >= 0");

  check(finite(simulation.t_max) && simulation.t_max >= 0.0, "simulation.t_max",
        "must be >= 0");
  check(simulation.replicas >= 1, "simulation.replicas", "must be >= 1");
  check(finite(simulation.record_interval) && simulation.record_interval > 0.0,
        "simulation.record_interval", "must be > 0");
  check_times(simulation.record_times, simulation.t_max, "simulation.record_times");
  check_times(simulation.histogram_times, simulation.t_max, "simulation.histogram_times");
  check(simulation.histogram_bins >= 1, "simulation.histogram_bins", "must be >= 1");
  {
    const double lo = simulation.histogram_min.value_or(-2.0);
    const double hi = simulation.histogram_max.value_or(2.0);
    check(finite(lo) && finite(hi) && (!simulation.histogram_max || hi > lo),
          "simulation.histogram_max", "must exceed histogram_min");
  }
  check(!simulation.theta || (finite(*simulation.theta) && *simulation.theta > 0.0),
        "simulation.theta", "must be > 0");
  check(finite(simulation.x0_mean), "simulation.x0_mean", "must be finite");
  check(finite(simulation.x0_variance) && simulation.x0_variance >= 0.0,
        "simulation.x0_variance", "must be >= 0");
  check(simulation.x0_mean != 0.0 || simulation.x0_variance > 0.0, "simulation.x0_variance",
        "the initial estimate would be identically zero");

  parse_scheme(pde.scheme);
  try {
    pde_config().validate();
  } catch (const Error& e) {
    fail(ErrorCode::Config, e.what());
  }
  check(finite(pde.moments_interval) && pde.moments_interval > 0.0, "pde.moments_interval",
        "must be > 0");
  check_times(pde.record_times, pde.t_max, "pde.record_times");

  check(!oja.q0 || (finite(*oja.q0) && std::abs(*oja.q0) <= 1.0), "oja.q0",
        "must lie in [-1, 1]");
  check(finite(oja.t_max) && oja.t_max >= 0.0, "oja.t_max", "must be >= 0");
  check(finite(oja.interval) && oja.interval > 0.0, "oja.interval", "must be > 0");

  check(!steady.init_q.empty(), "steady.init_q", "needs at least one start");
  for (double q : steady.init_q) check(finite(q), "steady.init_q", "must be finite");
  check(finite(steady.init_h) && steady.init_h > 0.0, "steady.init_h", "must be > 0");
  check(steady.damping > 0.0 && steady.damping <= 1.0, "steady.damping", "must lie in (0, 1]");
  check(steady.tol > 0.0, "steady.tol", "must be > 0");
  check(steady.max_iter >= 1, "steady.max_iter", "must be >= 1");
  check(steady.density_n >= 2, "steady.density_n", "must be >= 2");
  check(finite(steady.density_x_min) && finite(steady.density_x_max) &&
            steady.density_x_max > steady.density_x_min,
        "steady.density_x_max", "must exceed density_x_min");

  check(finite(sweep.omega_min) && sweep.omega_min >= 0.0, "sweep.omega_min", "must be >= 0");
  check(finite(sweep.omega_max) && sweep.omega_max > sweep.omega_min, "sweep.omega_max",
        "must exceed omega_min");
  check(sweep.n_points >= 2, "sweep.n_points", "must be >= 2");

  check(!output.directory.empty(), "output.directory", "must not be empty");
  check(output.format == "csv" || output.format == "json", "output.format",
        "expected \"csv\" or \"json\"");
  check(threads >= 1, "threads", "must be >= 1");
}

Prior ExperimentConfig::prior() const {
  if (model.prior == "two_point") return Prior::two_point(model.rho);
  if (model.prior == "two_point_signed") return Prior::signed_two_point(model.rho);
  if (model.prior == "bernoulli_gaussian") return Prior::bernoulli_gaussian(model.rho);
  if (model.prior == "discrete") return Prior::discrete(model.atoms);
  fail(ErrorCode::Config, "model.prior: unknown prior \"" + model.prior + "\"");
}

Threshold ExperimentConfig::threshold() const {
  return algorithm.threshold == "none" ? Threshold::none() : Threshold::soft(algorithm.beta);
}

AlgoConfig ExperimentConfig::algo() const { return {algorithm.tau, threshold()}; }

SteadyConfig ExperimentConfig::steady_config() const {
  return {algorithm.tau, model.omega, algorithm.threshold == "none" ? 0.0 : algorithm.beta};
}

PdeConfig ExperimentConfig::pde_config() const {
  PdeConfig c;
  c.tau = algorithm.tau;
  c.omega = model.omega;
  c.threshold = threshold();
  c.grid = {pde.x_min, pde.x_max, pde.n};
  c.dt = pde.dt;
  c.cfl = pde.cfl;
  c.t_max = pde.t_max;
  c.scheme = parse_scheme(pde.scheme);
  return c;
}

InitialLaw ExperimentConfig::initial_law() const {
  return {simulation.x0_mean, simulation.x0_variance};
}

double ExperimentConfig::implied_initial_overlap() const {
  const double m = simulation.x0_mean;
  const double second = m * m + simulation.x0_variance;
  if (second <= 0.0) return 0.0;
  return m * prior().mean() / std::sqrt(second);
}

ExperimentConfig config_from_json(const json& doc) {
  require(doc.is_object(), ErrorCode::Config, "configuration must be a JSON object");
  static const std::set<std::string> sections{"model", "algorithm", "simulation", "pde",
                                              "oja",   "steady",    "sweep",      "output",
                                              "threads"};
  for (const auto& [key, value] : doc.items()) {
    if (!sections.count(key)) fail(ErrorCode::Config, "unknown configuration section " + key);
  }
  ExperimentConfig c;

  Reader m(doc, "model");
  m.get("prior", c.model.prior);
  m.get("rho", c.model.rho);
  m.get("atoms", c.model.atoms);
  m.get("omega", c.model.omega);
  m.get("p", c.model.p);
  m.get("quadrature_nodes", c.model.quadrature_nodes);
  m.finish();

  Reader a(doc, "algorithm");
  a.get("tau", c.algorithm.tau);
  a.get("threshold", c.algorithm.threshold);
  a.get("beta", c.algorithm.beta);
  a.finish();

  Reader s(doc, "simulation");
  s.get("t_max", c.simulation.t_max);
  s.get("replicas", c.simulation.replicas);
  s.get("seed", c.simulation.seed);
  s.get("record_times", c.simulation.record_times);
  s.get("record_interval", c.simulation.record_interval);
  s.get("histogram_times", c.simulation.histogram_times);
  s.get("histogram_min", c.simulation.histogram_min);
  s.get("histogram_max", c.simulation.histogram_max);
  s.get("histogram_bins", c.simulation.histogram_bins);
  s.get("theta", c.simulation.theta);
  s.get("x0_mean", c.simulation.x0_mean);
  s.get("x0_variance", c.simulation.x0_variance);
  s.finish();

  Reader p(doc, "pde");
  p.get("x_min", c.pde.x_min);
  p.get("x_max", c.pde.x_max);
  p.get("n", c.pde.n);
  p.get("dt", c.pde.dt);
  p.get("cfl", c.pde.cfl);
  p.get("t_max", c.pde.t_max);
  p.get("record_times", c.pde.record_times);
  p.get("moments_interval", c.pde.moments_interval);
  p.get("scheme", c.pde.scheme);
  p.finish();

  Reader o(doc, "oja");
  o.get("q0", c.oja.q0);
  o.get("t_max", c.oja.t_max);
  o.get("interval", c.oja.interval);
  o.finish();

  Reader st(doc, "steady");
  st.get("init_q", c.steady.init_q);
  st.get("init_h", c.steady.init_h);
  st.get("damping", c.steady.damping);
  st.get("tol", c.steady.tol);
  st.get("max_iter", c.steady.max_iter);
  st.get("density", c.steady.density);
  st.get("density_x_min", c.steady.density_x_min);
  st.get("density_x_max", c.steady.density_x_max);
  st.get("density_n", c.steady.density_n);
  st.finish();

  Reader sw(doc, "sweep");
  sw.get("omega_min", c.sweep.omega_min);
  sw.get("omega_max", c.sweep.omega_max);
  sw.get("n_points", c.sweep.n_points);
  sw.finish();

  Reader out(doc, "output");
  out.get("directory", c.output.directory);
  out.get("format", c.output.format);
  out.finish();

  Reader top(doc, "");
  top.get("threads", c.threads);
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json atoms = json::array();
  for (const auto& at : c.model.atoms) atoms.push_back({{"value", at.value}, {"weight", at.weight}});
  json doc;
  doc["model"] = {{"prior", c.model.prior},
                  {"rho", c.model.rho},
                  {"atoms", atoms},
                  {"omega", c.model.omega},
                  {"p", c.model.p},
                  {"quadrature_nodes", c.model.quadrature_nodes}};
  doc["algorithm"] = {
      {"tau", c.algorithm.tau}, {"threshold", c.algorithm.threshold}, {"beta", c.algorithm.beta}};
  doc["simulation"] = {{"t_max", c.simulation.t_max},
                       {"replicas", c.simulation.replicas},
                       {"seed", c.simulation.seed},
                       {"record_times", c.simulation.record_times},
                       {"record_interval", c.simulation.record_interval},
                       {"histogram_times", c.simulation.histogram_times},
                       {"histogram_min", optional_to_json(c.simulation.histogram_min)},
                       {"histogram_max", optional_to_json(c.simulation.histogram_max)},
                       {"histogram_bins", c.simulation.histogram_bins},
                       {"theta", optional_to_json(c.simulation.theta)},
                       {"x0_mean", c.simulation.x0_mean},
                       {"x0_variance", c.simulation.x0_variance}};
  doc["pde"] = {{"x_min", c.pde.x_min},
                {"x_max", c.pde.x_max},
                {"n", c.pde.n},
                {"dt", c.pde.dt ? json(*c.pde.dt) : json("auto")},
                {"cfl", c.pde.cfl},
                {"t_max", c.pde.t_max},
                {"record_times", c.pde.record_times},
                {"moments_interval", c.pde.moments_interval},
                {"scheme", c.pde.scheme}};
  doc["oja"] = {{"q0", optional_to_json(c.oja.q0)},
                {"t_max", c.oja.t_max},
                {"interval", c.oja.interval}};
  doc["steady"] = {{"init_q", c.steady.init_q},
                   {"init_h", c.steady.init_h},
                   {"damping", c.steady.damping},
                   {"tol", c.steady.tol},
                   {"max_iter", c.steady.max_iter},
                   {"density", c.steady.density},
                   {"density_x_min", c.steady.density_x_min},
                   {"density_x_max", c.steady.density_x_max},
                   {"density_n", c.steady.density_n}};
  doc["sweep"] = {{"omega_min", c.sweep.omega_min},
                  {"omega_max", c.sweep.omega_max},
                  {"n_points", c.sweep.n_points}};
  doc["output"] = {{"directory", c.output.directory}, {"format", c.output.format}};
  doc["threads"] = c.threads;
  return doc;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Config,
          "cannot open configuration file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::Config, "configuration file " + path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;
  }
  json doc = config_to_json(cfg);
  const auto dot = key.find('.');
  if (dot == std::string::npos) {
    require(key == "threads", ErrorCode::Config, "unknown configuration key " + key);
    doc[key] = parsed;
  } else {
    const std::string section = key.substr(0, dot);
    const std::string field = key.substr(dot + 1);
    require(doc.contains(section) && doc[section].is_object(), ErrorCode::Config,
            "unknown configuration section " + section);
    require(doc[section].contains(field), ErrorCode::Config,
            "unknown configuration key " + key);
    doc[section][field] = parsed;
  }
  cfg = config_from_json(doc);
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos && eq > 0, ErrorCode::Config,
          "override \"" + assignment + "\" is not of the form section.key=value");
  apply_override(cfg, assignment.substr(0, eq), assignment.substr(eq + 1));
}

// ---------------------------------------------------------------- commands

RunResult cmd_simulate(const ExperimentConfig& cfg) {
  cfg.validate();
  const Prior prior = cfg.prior();
  RunResult result;
  result.command = "simulate";
  if (std::abs(cfg.implied_initial_overlap()) <= 1e-12) {
    result.warnings.push_back(
        "the initial law gives E[x xi] = 0; the scaling limit assumes a nonzero initial "
        "overlap");
  }

  TrajectoryOptions opt;
  opt.t_max = cfg.simulation.t_max;
  opt.record_times = cfg.simulation.record_times.empty()
                         ? time_grid(cfg.simulation.t_max, cfg.simulation.record_interval)
                         : cfg.simulation.record_times;
  std::sort(opt.record_times.begin(), opt.record_times.end());
  opt.histogram_times = cfg.simulation.histogram_times;
  std::sort(opt.histogram_times.begin(), opt.histogram_times.end());
  const double lo = cfg.simulation.histogram_min.value_or(-2.0);
  const double hi = cfg.simulation.histogram_max.value_or(2.0 + 1.0 / std::sqrt(prior.rho()));
  opt.bins = HistogramSpec::uniform(lo, hi, cfg.simulation.histogram_bins);
  opt.theta = cfg.simulation.theta.value_or(default_theta(prior));
  opt.replicas = cfg.simulation.replicas;
  opt.threads = cfg.threads;
  if (!prior.is_discrete() && !opt.histogram_times.empty()) {
    result.warnings.push_back(
        "histograms are conditioned on atoms and are skipped for a continuous prior");
  }

  const SampleStreamConfig stream{cfg.model.omega, cfg.model.p, cfg.simulation.seed};
  const auto records = run_trajectory(prior, stream, cfg.algo(), cfg.initial_law(), opt);

  Table traj{"trajectory", {"replica", "t", "Q", "misclass"}, {}};
  Table hist{"histograms", {"replica", "t", "xi_atom", "bin_center", "density"}, {}};
  for (const auto& rec : records) {
    for (const auto& pt : rec.points) {
      traj.rows.push_back({integer(rec.replica), num(pt.t), num(pt.q), num(pt.misclass)});
    }
    for (const auto& snap : rec.histograms) {
      for (const auto& h : snap.atoms) {
        for (std::size_t b = 0; b < opt.bins.bins(); ++b) {
          hist.rows.push_back({integer(rec.replica), num(snap.t), num(h.xi_atom),
                               num(opt.bins.center(b)), num(h.density[b])});
        }
      }
    }
  }
  Table summary{"summary", {"t", "Q_mean", "Q_std", "n_replicas"}, {}};
  for (const auto& row : summarize(records)) {
    summary.rows.push_back({num(row.t), num(row.q_mean), num(row.q_std), integer(row.n_replicas)});
  }
  result.tables = {std::move(traj), std::move(hist), std::move(summary)};
  result.details = {{"theta", opt.theta},
                    {"histogram_range", {lo, hi}},
                    {"implied_initial_overlap", cfg.implied_initial_overlap()},
                    {"steps", steps_at(cfg.simulation.t_max, cfg.model.p)}};
  return result;
}

RunResult cmd_pde(const ExperimentConfig& cfg) {
  cfg.validate();
  const Prior prior = cfg.prior();
  const PdeConfig pcfg = cfg.pde_config();
  const Prior discrete = discretize_prior(prior, cfg.model.quadrature_nodes);
  PdeConfig fitted = pcfg;
  fitted.grid = fit_grid(pcfg.grid, discrete.atoms());
  ConditionalDensitySet init = initial_density(cfg.simulation.x0_mean, cfg.simulation.x0_variance,
                                               fitted.grid, discrete.atoms(), pcfg.threshold);
  require_nonzero_overlap(init.q, "pde");
  const PdeSolution sol =
      solve_pde(fitted, std::move(init), cfg.pde.record_times, cfg.pde.moments_interval);

  RunResult result;
  result.command = "pde";
  Table mom{"moments", {"t", "Q", "R"}, {}};
  for (const auto& s : sol.series) mom.rows.push_back({num(s.t), num(s.q), num(s.r)});
  Table dens{"densities", {"t", "xi_atom", "x", "density"}, {}};
  for (const auto& snap : sol.snapshots) {
    for (std::size_t j = 0; j < snap.atoms.size(); ++j) {
      for (int i = 0; i < snap.grid.n; ++i) {
        dens.rows.push_back({num(snap.t), num(snap.atoms[j].value), num(snap.grid.center(i)),
                             num(snap.density[j][i])});
      }
    }
  }
  result.tables = {std::move(mom), std::move(dens)};
  if (sol.clipped > 0) {
    result.warnings.push_back(std::to_string(sol.clipped) +
                              " negative density values were clipped");
  }
  json atoms = json::array();
  for (const auto& a : discrete.atoms()) atoms.push_back({a.value, a.weight});
  result.details = {
      {"dt", {{"mode", cfg.pde.dt ? "fixed" : "auto"},
              {"min", sol.dt_min},
              {"max", sol.dt_max},
              {"cfl", cfg.pde.cfl}}},
      {"grid", {{"x_min", fitted.grid.x_min}, {"x_max", fitted.grid.x_max}, {"n", fitted.grid.n}}},
      {"atoms", atoms},
      {"steps", sol.steps},
      {"clipped", sol.clipped},
      {"min_before_clip", sol.min_before_clip}};
  return result;
}

RunResult cmd_oja_theory(const ExperimentConfig& cfg) {
  cfg.validate();
  const double q0 = cfg.oja.q0.value_or(cfg.implied_initial_overlap());
  require_nonzero_overlap(q0, "oja-theory");
  const OjaParams params{cfg.algorithm.tau, cfg.model.omega};
  RunResult result;
  result.command = "oja-theory";
  Table table{"oja_theory", {"t", "Q"}, {}};
  for (double t : time_grid(cfg.oja.t_max, cfg.oja.interval)) {
    table.rows.push_back({num(t), num(closed_form_q(t, q0, params))});
  }
  result.tables = {std::move(table)};
  result.details = {{"q0", q0},
                    {"alpha1", params.alpha1()},
                    {"alpha2", params.alpha2()},
                    {"steady_state_q", steady_state_q(params)}};
  return result;
}

namespace {

FixedPointOptions fixed_point_options(const ExperimentConfig& cfg) {
  FixedPointOptions o;
  o.damping = cfg.steady.damping;
  o.tol = cfg.steady.tol;
  o.max_iter = cfg.steady.max_iter;
  return o;
}

}  // namespace

RunResult cmd_steady(const ExperimentConfig& cfg) {
  cfg.validate();
  const SteadyConfig scfg = cfg.steady_config();
  const Prior discrete = discretize_prior(cfg.prior(), cfg.model.quadrature_nodes);
  const auto opts = fixed_point_options(cfg);

  RunResult result;
  result.command = "steady";
  Table table{"steady",
              {"init_Q", "Q_star", "R_star", "residual", "branch", "converged", "iterations"},
              {}};
  std::optional<FixedPoint> chosen;
  for (double q0 : cfg.steady.init_q) {
    const FixedPoint fp =
        solve_fixed_point(scfg, discrete.atoms(), start_from_h(q0, cfg.steady.init_h, scfg), opts);
    table.rows.push_back({num(q0), num(fp.q), num(fp.r), num(fp.residual),
                          std::string(to_string(fp.branch)), integer(fp.converged ? 1 : 0),
                          integer(fp.iterations)});
    if (fp.converged && (!chosen || std::abs(fp.q) > std::abs(chosen->q) + 1e-12)) chosen = fp;
    if (!fp.converged) {
      std::ostringstream msg;
      msg << "start Q0 = " << q0 << " did not converge (residual " << fp.residual << ")";
      result.warnings.push_back(msg.str());
    }
  }
  result.tables.push_back(std::move(table));

  if (chosen) {
    result.details = {{"Q_star", chosen->q},
                      {"R_star", chosen->r},
                      {"branch", to_string(chosen->branch)}};
  } else {
    result.details = {{"Q_star", nullptr}};
  }
  if (cfg.steady.density) {
    require(chosen.has_value(), ErrorCode::Numerical,
            "steady: no start converged, so no density can be written");
    Table dens{"steady_density", {"xi_atom", "x", "density"}, {}};
    const auto xs = linspace(cfg.steady.density_x_min, cfg.steady.density_x_max,
                             cfg.steady.density_n);
    for (const auto& a : discrete.atoms()) {
      const SteadyDensity d = steady_density(a.value, chosen->q, chosen->r, scfg);
      for (double x : xs) dens.rows.push_back({num(a.value), num(x), num(d(x))});
    }
    result.tables.push_back(std::move(dens));
  }
  return result;
}

RunResult cmd_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const SteadyConfig scfg = cfg.steady_config();
  const Prior discrete = discretize_prior(cfg.prior(), cfg.model.quadrature_nodes);
  const auto omegas = linspace(cfg.sweep.omega_min, cfg.sweep.omega_max, cfg.sweep.n_points);

  SweepOptions opts;
  opts.init_q = cfg.steady.init_q;
  opts.init_h = cfg.steady.init_h;
  opts.fixed_point = fixed_point_options(cfg);
  opts.threads = cfg.threads;
  const auto points = sweep_omega(scfg, discrete.atoms(), omegas, opts);

  RunResult result;
  result.command = "sweep";
  Table table{"sweep", {"omega", "Q_star", "converged", "branch", "R_star", "n_distinct"}, {}};
  for (const auto& pt : points) {
    table.rows.push_back({num(pt.omega), num(pt.q_star), integer(pt.converged ? 1 : 0),
                          std::string(to_string(pt.branch)), num(pt.r_star),
                          integer(static_cast<std::int64_t>(pt.distinct_q.size()))});
    if (!pt.converged) {
      result.warnings.push_back("omega = " + format_number(pt.omega) +
                                ": no start converged");
    }
    if (pt.distinct_q.size() > 1) {
      result.warnings.push_back("omega = " + format_number(pt.omega) + ": " +
                                std::to_string(pt.distinct_q.size()) +
                                " distinct fixed points found");
    }
  }
  result.tables.push_back(std::move(table));

  auto critical_json = [](const CriticalEstimate& c) {
    return c.omega_c ? json{{"omega_c", *c.omega_c}, {"uncertainty", c.uncertainty}}
                     : json{{"omega_c", nullptr}};
  };
  result.details["critical"] = critical_json(estimate_critical_omega(points, opts.eps_pt));

  if (scfg.beta > 0.0) {
    Table oja{"sweep_oja", {"omega", "Q_star", "converged", "branch"}, {}};
    std::vector<SweepPoint> oja_points;
    for (double w : omegas) {
      SweepPoint pt;
      pt.omega = w;
      pt.q_star = steady_state_q({scfg.tau, w});
      pt.converged = true;
      pt.branch = pt.q_star > opts.fixed_point.eps_q ? Branch::Informative
                                                     : Branch::Uninformative;
      oja.rows.push_back({num(w), num(pt.q_star), integer(1), std::string(to_string(pt.branch))});
      oja_points.push_back(pt);
    }
    result.tables.push_back(std::move(oja));
    result.details["critical_oja"] = critical_json(estimate_critical_omega(oja_points, opts.eps_pt));
  }
  return result;
}

RunResult run_command(const ExperimentConfig& cfg, const std::string& command) {
  if (command == "simulate") return cmd_simulate(cfg);
  if (command == "pde") return cmd_pde(cfg);
  if (command == "oja-theory") return cmd_oja_theory(cfg);
  if (command == "steady") return cmd_steady(cfg);
  if (command == "sweep") return cmd_sweep(cfg);
  fail(ErrorCode::Config, "unknown command \"" + command + "\"");
}

// ---------------------------------------------------------------- output

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

namespace {

std::string cell_text(const Cell& cell) {
  if (const auto* d = std::get_if<double>(&cell)) return format_number(*d);
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return std::to_string(*i);
  const auto& s = std::get<std::string>(cell);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char ch : s) {
    if (ch == '"') quoted += '"';
    quoted += ch;
  }
  return quoted + "\"";
}

json cell_json(const Cell& cell) {
  if (const auto* d = std::get_if<double>(&cell)) {
    return std::isfinite(*d) ? json(*d) : json(format_number(*d));
  }
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return *i;
  return std::get<std::string>(cell);
}

}  // namespace

std::string to_csv(const Table& table) {
  std::string out;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out += ',';
    out += table.columns[c];
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += cell_text(row[c]);
    }
    out += '\n';
  }
  return out;
}

json to_json(const Table& table) {
  json rows = json::array();
  for (const auto& row : table.rows) {
    json r = json::array();
    for (const auto& cell : row) r.push_back(cell_json(cell));
    rows.push_back(std::move(r));
  }
  return {{"name", table.name}, {"columns", table.columns}, {"rows", std::move(rows)}};
}

void write_result(const RunResult& result, const ExperimentConfig& cfg, double wall_seconds) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.output.directory);
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::Io, "cannot create output directory " + dir.string() + ": " +
                                  ec.message());
  const bool as_json = cfg.output.format == "json";
  json files = json::array();
  auto write_file = [&](const fs::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
    out << body;
    out.close();
    require(!out.fail(), ErrorCode::Io, "failed writing " + path.string());
  };
  for (const auto& table : result.tables) {
    const fs::path path = dir / (table.name + (as_json ? ".json" : ".csv"));
    write_file(path, as_json ? to_json(table).dump(1) + "\n" : to_csv(table));
    files.push_back(path.filename().string());
  }
  json manifest = {{"command", result.command},
                   {"version", version()},
                   {"seed", cfg.simulation.seed},
                   {"wall_seconds", wall_seconds},
                   {"config", config_to_json(cfg)},
                   {"files", files},
                   {"warnings", result.warnings},
                   {"details", result.details}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

const char* version() noexcept { return OSPCA_VERSION; }

}  // namespace ospca
