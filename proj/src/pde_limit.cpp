#include "ospca/pde_limit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ospca/error.hpp"

namespace ospca {

namespace {

constexpr double kMassTolerance = 1e-6;
constexpr double kClipLevel = 1e-14;

// Bernoulli function z / (e^z - 1).
double bernoulli(double z) {
  if (std::abs(z) < 1e-5) return 1.0 - 0.5 * z + z * z / 12.0;
  if (z > 700.0) return z * std::exp(-z);
  return z / std::expm1(z);
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

void normalize_or_fail(std::vector<double>& density, double dx, const char* what) {
  double mass = 0.0;
  for (double v : density) mass += v;
  mass *= dx;
  require(mass > 0.0 && std::isfinite(mass), ErrorCode::Config,
          std::string(what) + ": profile has no mass on the grid");
  for (auto& v : density) v /= mass;
}

void face_drift_for_atom(const ConditionalDensitySet& state, const PdeConfig& cfg, double xi,
                         std::vector<double>& out) {
  const int n = state.grid.n;
  out.assign(static_cast<std::size_t>(n) + 1, 0.0);
  for (int i = 1; i < n; ++i) {
    out[i] = drift_gamma(state.grid.face(i), xi, state.q, state.r, cfg.tau, cfg.omega,
                         cfg.threshold);
  }
}

// Largest diagonal loss rate of the explicit update over all cells.
double max_outflow_rate(std::span<const double> face_drift, const Grid& grid,
                        double diffusion, FluxScheme scheme) {
  const int n = grid.n;
  const double dx = grid.dx();
  double worst = 0.0;
  auto out_right = [&](int f) {  // coefficient of P_i in the flux through face f = i+1
    const double v = face_drift[f];
    if (scheme == FluxScheme::Upwind || diffusion == 0.0) {
      return std::max(v, 0.0) / dx + diffusion / (dx * dx);
    }
    return diffusion / (dx * dx) * bernoulli(-v * dx / diffusion);
  };
  auto out_left = [&](int f) {  // coefficient of P_i in the flux through face f = i
    const double v = face_drift[f];
    if (scheme == FluxScheme::Upwind || diffusion == 0.0) {
      return std::max(-v, 0.0) / dx + diffusion / (dx * dx);
    }
    return diffusion / (dx * dx) * bernoulli(v * dx / diffusion);
  };
  for (int i = 0; i < n; ++i) {
    double rate = 0.0;
    if (i + 1 < n) rate += out_right(i + 1);
    if (i > 0) rate += out_left(i);
    worst = std::max(worst, rate);
  }
  return worst;
}

}  // namespace

void Grid::validate() const {
  require(std::isfinite(x_min) && std::isfinite(x_max) && x_max > x_min, ErrorCode::Config,
          "pde grid: x_max must exceed x_min");
  require(n >= 50, ErrorCode::Config, "pde grid: n must be >= 50");
}

Grid fit_grid(const Grid& grid, std::span<const Atom> atoms, double margin) {
  grid.validate();
  Grid out = grid;
  const double dx = grid.dx();
  double lo = grid.x_min;
  double hi = grid.x_max;
  for (const auto& a : atoms) {
    lo = std::min(lo, a.value - margin);
    hi = std::max(hi, a.value + margin);
  }
  const int extra_lo = static_cast<int>(std::ceil((grid.x_min - lo) / dx - 1e-9));
  const int extra_hi = static_cast<int>(std::ceil((hi - grid.x_max) / dx - 1e-9));
  out.x_min = grid.x_min - extra_lo * dx;
  out.x_max = grid.x_max + extra_hi * dx;
  out.n = grid.n + extra_lo + extra_hi;
  return out;
}

void PdeConfig::validate() const {
  require(std::isfinite(tau) && tau > 0.0, ErrorCode::Config, "pde: tau must be > 0");
  require(std::isfinite(omega) && omega >= 0.0, ErrorCode::Config, "pde: omega must be >= 0");
  require(threshold.is_none() || threshold.beta >= 0.0, ErrorCode::Config,
          "pde: beta must be >= 0");
  grid.validate();
  require(!dt || (std::isfinite(*dt) && *dt > 0.0), ErrorCode::Config, "pde: dt must be > 0");
  require(cfl > 0.0 && cfl <= 1.0, ErrorCode::Config, "pde: cfl must lie in (0, 1]");
  require(std::isfinite(t_max) && t_max >= 0.0, ErrorCode::Config, "pde: t_max must be >= 0");
}

double ConditionalDensitySet::mass(std::size_t atom) const {
  double m = 0.0;
  for (double v : density.at(atom)) m += v;
  return m * grid.dx();
}

double drift_gamma(double x, double xi, double q, double r, double tau, double omega,
                   const Threshold& threshold) {
  const double restoring = tau * omega * q * q - r + 0.5 * tau * tau * (1.0 + omega * q * q);
  return tau * omega * q * xi - phi_eval(x, threshold) - x * restoring;
}

Moments moments(const ConditionalDensitySet& state, const Threshold& threshold) {
  const Grid& g = state.grid;
  const double dx = g.dx();
  Moments m;
  for (std::size_t j = 0; j < state.atoms.size(); ++j) {
    const auto& p = state.density[j];
    double mass = 0.0;
    double first = 0.0;
    double phi_moment = 0.0;
    for (int i = 0; i < g.n; ++i) {
      const double x = g.center(i);
      mass += p[i];
      first += x * p[i];
      phi_moment += x * phi_eval(x, threshold) * p[i];
    }
    mass *= dx;
    if (std::abs(mass - 1.0) > kMassTolerance) {
      std::ostringstream msg;
      msg << "moments: density for atom " << state.atoms[j].value << " has mass " << mass;
      fail(ErrorCode::Numerical, msg.str());
    }
    const double w = state.atoms[j].weight;
    m.q += w * state.atoms[j].value * first * dx;
    m.r += w * phi_moment * dx;
  }
  return m;
}

ConditionalDensitySet initial_density(double mean, double variance, const Grid& grid,
                                      std::span<const Atom> atoms,
                                      const Threshold& threshold) {
  grid.validate();
  require(std::isfinite(mean) && std::isfinite(variance) && variance > 0.0, ErrorCode::Config,
          "initial density: variance must be > 0");
  require(!atoms.empty(), ErrorCode::Config, "initial density: no atoms");
  const double sd = std::sqrt(variance);
  const double dx = grid.dx();
  std::vector<double> profile(static_cast<std::size_t>(grid.n));
  double inside = 0.0;
  for (int i = 0; i < grid.n; ++i) {
    const double a = std_normal_cdf((grid.face(i) - mean) / sd);
    const double b = std_normal_cdf((grid.face(i + 1) - mean) / sd);
    profile[i] = (b - a) / dx;
    inside += b - a;
  }
  if (1.0 - inside > 1e-6) {
    std::ostringstream msg;
    msg << "initial density: grid [" << grid.x_min << ", " << grid.x_max << "] misses "
        << 1.0 - inside << " of the initial Gaussian mass";
    fail(ErrorCode::Config, msg.str());
  }
  normalize_or_fail(profile, dx, "initial density");

  ConditionalDensitySet state;
  state.atoms.assign(atoms.begin(), atoms.end());
  state.grid = grid;
  state.density.assign(atoms.size(), profile);
  const Moments m = moments(state, threshold);
  state.q = m.q;
  state.r = m.r;
  return state;
}

ConditionalDensitySet density_from_profile(
    const Grid& grid, std::span<const Atom> atoms, const Threshold& threshold,
    const std::function<double(double x, double xi)>& profile) {
  grid.validate();
  ConditionalDensitySet state;
  state.atoms.assign(atoms.begin(), atoms.end());
  state.grid = grid;
  for (const auto& a : atoms) {
    std::vector<double> p(static_cast<std::size_t>(grid.n));
    for (int i = 0; i < grid.n; ++i) {
      const double v = profile(grid.center(i), a.value);
      require(std::isfinite(v) && v >= 0.0, ErrorCode::Config,
              "density profile must be finite and nonnegative");
      p[i] = v;
    }
    normalize_or_fail(p, grid.dx(), "density profile");
    state.density.push_back(std::move(p));
  }
  const Moments m = moments(state, threshold);
  state.q = m.q;
  state.r = m.r;
  return state;
}

namespace {

// Stability limit 1/max(rate) for the current macro state, with the face
// drifts of every atom left in `drifts` for reuse by the step.
double step_bound(const ConditionalDensitySet& state, const PdeConfig& cfg,
                  std::vector<std::vector<double>>& drifts) {
  const double dx = state.grid.dx();
  const double diffusion = diffusion_coefficient(state.q, cfg.tau, cfg.omega);
  drifts.resize(state.atoms.size());
  double max_drift = 0.0;
  double max_rate = 0.0;
  for (std::size_t j = 0; j < state.atoms.size(); ++j) {
    face_drift_for_atom(state, cfg, state.atoms[j].value, drifts[j]);
    for (int i = 1; i < state.grid.n; ++i) {
      max_drift = std::max(max_drift, std::abs(drifts[j][i]));
    }
    max_rate = std::max(max_rate, max_outflow_rate(drifts[j], state.grid, diffusion, cfg.scheme));
  }
  const double rate = std::max(2.0 * diffusion / (dx * dx) + max_drift / dx, max_rate);
  require(rate > 0.0, ErrorCode::Numerical, "stable_dt: no drift and no diffusion");
  return 1.0 / rate;
}

StepStats step_impl(ConditionalDensitySet& state, const PdeConfig& cfg,
                    std::optional<double> dt, double cap) {
  std::vector<std::vector<double>> drifts;
  const double bound = step_bound(state, cfg, drifts);
  StepStats stats;
  if (dt) {
    if (!(*dt > 0.0) || *dt > bound * (1.0 + 1e-12)) {
      std::ostringstream msg;
      msg << "step_pde: dt = " << *dt << " exceeds the stability bound "
          << "1/(2D/dx^2 + max|Gamma|/dx) = " << bound << " at Q = " << state.q;
      fail(ErrorCode::StepSize, msg.str());
    }
    stats.dt = std::min(*dt, cap);
  } else {
    stats.dt = std::min(cfg.cfl * bound, cap);
  }

  const double diffusion = diffusion_coefficient(state.q, cfg.tau, cfg.omega);
  std::vector<double> flux;
  stats.min_before_clip = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < state.atoms.size(); ++j) {
    auto& p = state.density[j];
    double before = 0.0;
    for (double v : p) before += v;
    const double lowest = advance_drift_diffusion(p, state.grid, drifts[j], diffusion, stats.dt,
                                                  cfg.scheme, flux);
    stats.min_before_clip = std::min(stats.min_before_clip, lowest);
    if (lowest < 0.0) {
      double after = 0.0;
      for (auto& v : p) {
        if (v < 0.0) {
          if (v < -kClipLevel) ++stats.clipped;
          v = 0.0;
        }
        after += v;
      }
      require(after > 0.0, ErrorCode::Numerical, "step_pde: density vanished");
      const double scale = before / after;
      for (auto& v : p) v *= scale;
    }
  }
  state.t += stats.dt;
  state.clipped += stats.clipped;
  const Moments m = moments(state, cfg.threshold);
  require(std::isfinite(m.q) && std::isfinite(m.r), ErrorCode::Numerical,
          "step_pde: moments are not finite");
  state.q = m.q;
  state.r = m.r;
  return stats;
}

}  // namespace

double stable_dt(const ConditionalDensitySet& state, const PdeConfig& cfg) {
  std::vector<std::vector<double>> drifts;
  return cfg.cfl * step_bound(state, cfg, drifts);
}

double advance_drift_diffusion(std::span<double> density, const Grid& grid,
                               std::span<const double> face_drift, double diffusion,
                               double dt, FluxScheme scheme,
                               std::vector<double>& flux_scratch) {
  const int n = grid.n;
  require(static_cast<int>(density.size()) == n &&
              static_cast<int>(face_drift.size()) == n + 1,
          ErrorCode::Precondition, "advance_drift_diffusion: size mismatch");
  const double dx = grid.dx();
  auto& flux = flux_scratch;
  flux.assign(static_cast<std::size_t>(n) + 1, 0.0);
  const bool fitted = scheme == FluxScheme::ExponentialFitting && diffusion > 0.0;
  for (int f = 1; f < n; ++f) {
    const double v = face_drift[f];
    const double left = density[f - 1];
    const double right = density[f];
    if (fitted) {
      const double pe = v * dx / diffusion;
      flux[f] = diffusion / dx * (bernoulli(-pe) * left - bernoulli(pe) * right);
    } else {
      flux[f] = (v > 0.0 ? v * left : v * right) - diffusion / dx * (right - left);
    }
  }
  const double ratio = dt / dx;
  double lowest = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    density[i] -= ratio * (flux[i + 1] - flux[i]);
    lowest = std::min(lowest, density[i]);
  }
  return lowest;
}

StepStats step_pde(ConditionalDensitySet& state, const PdeConfig& cfg,
                   std::optional<double> dt) {
  return step_impl(state, cfg, dt, std::numeric_limits<double>::infinity());
}

PdeSolution solve_pde(const PdeConfig& cfg, ConditionalDensitySet state,
                      std::span<const double> record_times, double moments_interval,
                      bool require_nonzero_overlap) {
  cfg.validate();
  require(moments_interval > 0.0, ErrorCode::Config, "pde: moments interval must be > 0");
  for (double t : record_times) {
    require(t >= state.t && t <= cfg.t_max + 1e-12, ErrorCode::Config,
            "pde: record times must lie in [t0, t_max]");
  }
  if (require_nonzero_overlap && std::abs(state.q) <= 1e-12) {
    fail(ErrorCode::Config,
         "pde: initial overlap Q0 is zero; the limiting dynamics need Q0 != 0");
  }

  std::vector<double> records(record_times.begin(), record_times.end());
  std::sort(records.begin(), records.end());

  PdeSolution sol;
  sol.dt_min = std::numeric_limits<double>::infinity();
  sol.min_before_clip = std::numeric_limits<double>::infinity();
  const double t0 = state.t;
  const double eps = 1e-12 * std::max(1.0, cfg.t_max);

  std::size_t next_record = 0;
  std::int64_t next_sample = 0;
  auto sample_time = [&](std::int64_t k) { return t0 + static_cast<double>(k) * moments_interval; };
  auto visit = [&] {
    while (next_record < records.size() && records[next_record] <= state.t + eps) {
      sol.snapshots.push_back(state);
      ++next_record;
    }
    while (sample_time(next_sample) <= state.t + eps &&
           sample_time(next_sample) <= cfg.t_max + eps) {
      sol.series.push_back({state.t, state.q, state.r});
      ++next_sample;
    }
  };

  visit();
  while (state.t < cfg.t_max - eps) {
    double target = std::min(cfg.t_max, sample_time(next_sample));
    if (next_record < records.size()) target = std::min(target, records[next_record]);
    const StepStats stats = step_impl(state, cfg, cfg.dt, target - state.t);
    const bool land = state.t >= target - eps;
    if (land) state.t = target;
    ++sol.steps;
    sol.clipped += stats.clipped;
    sol.min_before_clip = std::min(sol.min_before_clip, stats.min_before_clip);
    if (!land || sol.steps == 1) {
      sol.dt_min = std::min(sol.dt_min, stats.dt);
      sol.dt_max = std::max(sol.dt_max, stats.dt);
    }
    visit();
  }
  if (sol.steps == 0) sol.dt_min = sol.dt_max = 0.0;
  if (!std::isfinite(sol.dt_min)) sol.dt_min = sol.dt_max;
  return sol;
}

PdeSolution solve_pde(const PdeConfig& cfg, const Prior& prior, const InitialLaw& x0,
                      std::span<const double> record_times, double moments_interval,
                      int quadrature_nodes) {
  cfg.validate();
  prior.validate();
  const Prior discrete = discretize_prior(prior, quadrature_nodes);
  PdeConfig fitted = cfg;
  fitted.grid = fit_grid(cfg.grid, discrete.atoms());
  ConditionalDensitySet init =
      initial_density(x0.mean, x0.variance, fitted.grid, discrete.atoms(), cfg.threshold);
  return solve_pde(fitted, std::move(init), record_times, moments_interval, true);
}

}  // namespace ospca
