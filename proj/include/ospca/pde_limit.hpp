#pragma once

// Finite-volume solver for the coupled drift-diffusion equations
//   dP/dt = -d/dx[ Gamma(x, xi, Q, R) P ] + (tau^2 (1 + omega Q^2)/2) d2P/dx2,
// one equation per xi-atom, coupled through Q = E[xi x] and R = E[x phi(x)].

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ospca/model.hpp"
#include "ospca/online_sim.hpp"

namespace ospca {

struct Grid {
  double x_min = -6.0;
  double x_max = 8.0;
  int n = 700;

  double dx() const noexcept { return (x_max - x_min) / n; }
  double center(int i) const noexcept { return x_min + (i + 0.5) * dx(); }
  /// Interface between cells i-1 and i, for i in [0, n].
  double face(int i) const noexcept { return x_min + i * dx(); }

  void validate() const;
};

/// Grows the domain (keeping dx) until every atom sits at least `margin`
/// inside it.
Grid fit_grid(const Grid& grid, std::span<const Atom> atoms, double margin = 3.0);

enum class FluxScheme {
  /// Scharfetter-Gummel: upwind flux with exponential fitting of the
  /// diffusion; reduces to first-order upwinding at large cell Peclet number.
  ExponentialFitting,
  /// First-order upwind drift plus centered diffusion.
  Upwind,
};

struct PdeConfig {
  double tau = 0.5;
  double omega = 1.0;
  Threshold threshold = Threshold::soft(0.27);
  Grid grid;
  std::optional<double> dt;  // empty: chosen from the stability bound each step
  double cfl = 0.9;
  double t_max = 15.0;
  FluxScheme scheme = FluxScheme::ExponentialFitting;

  void validate() const;
};

struct ConditionalDensitySet {
  std::vector<Atom> atoms;
  Grid grid;
  std::vector<std::vector<double>> density;  // [atom][cell], cell averages
  double t = 0.0;
  double q = 0.0;
  double r = 0.0;
  std::size_t clipped = 0;  // cells set to zero by negativity clipping so far

  double mass(std::size_t atom) const;
};

/// tau omega Q xi - phi(x) - x [tau omega Q^2 - R + (tau^2/2)(1 + omega Q^2)].
double drift_gamma(double x, double xi, double q, double r, double tau, double omega,
                   const Threshold& threshold);

/// Diffusion coefficient tau^2 (1 + omega Q^2) / 2.
inline double diffusion_coefficient(double q, double tau, double omega) noexcept {
  return 0.5 * tau * tau * (1.0 + omega * q * q);
}

struct Moments {
  double q = 0.0;
  double r = 0.0;
};

/// Midpoint-rule moments. Throws ErrorCode::Numerical when an atom's mass
/// differs from 1 by more than 1e-6.
Moments moments(const ConditionalDensitySet& state, const Threshold& threshold);

/// Same Gaussian N(mean, variance) profile for every atom, cell-averaged
/// and renormalized. Throws ErrorCode::Config when more than 1e-6 of the
/// Gaussian mass falls outside the grid.
ConditionalDensitySet initial_density(double mean, double variance, const Grid& grid,
                                      std::span<const Atom> atoms,
                                      const Threshold& threshold);

/// Per-atom profile sampled at cell centers and normalized.
ConditionalDensitySet density_from_profile(
    const Grid& grid, std::span<const Atom> atoms, const Threshold& threshold,
    const std::function<double(double x, double xi)>& profile);

/// Largest explicit step keeping the update positive:
///   cfl / (2 D / dx^2 + max|Gamma| / dx).
/// This never exceeds cfl * min(dx^2/(2D), dx/max|Gamma|).
double stable_dt(const ConditionalDensitySet& state, const PdeConfig& cfg);

/// Low-level kernel: one explicit step of dP/dt = -d/dx(v P) + D d2P/dx2 on a
/// single density with zero flux at both ends. `face_drift` holds v at the
/// n+1 interfaces (the two boundary entries are ignored). Returns the most
/// negative value produced before any clipping.
double advance_drift_diffusion(std::span<double> density, const Grid& grid,
                               std::span<const double> face_drift, double diffusion,
                               double dt, FluxScheme scheme,
                               std::vector<double>& flux_scratch);

struct StepStats {
  double dt = 0.0;
  double min_before_clip = 0.0;
  std::size_t clipped = 0;
};

/// Advances every atom with (Q, R) frozen at the start of the step, then
/// refreshes (Q, R). With dt empty the stable step is used; an explicit dt
/// above the bound throws ErrorCode::StepSize.
StepStats step_pde(ConditionalDensitySet& state, const PdeConfig& cfg,
                   std::optional<double> dt = std::nullopt);

struct MomentSample {
  double t = 0.0;
  double q = 0.0;
  double r = 0.0;
};

struct PdeSolution {
  std::vector<ConditionalDensitySet> snapshots;  // one per record time
  std::vector<MomentSample> series;
  std::size_t steps = 0;
  double dt_min = 0.0;
  double dt_max = 0.0;
  std::size_t clipped = 0;
  double min_before_clip = 0.0;
};

/// Integrates from `initial` to cfg.t_max. Snapshots land exactly on
/// record_times; the (t, Q, R) series is sampled every moments_interval.
/// Refuses to start from Q_0 = 0.
PdeSolution solve_pde(const PdeConfig& cfg, ConditionalDensitySet initial,
                      std::span<const double> record_times,
                      double moments_interval = 0.05,
                      bool require_nonzero_overlap = true);

/// Builds the atoms (discretizing continuous priors with quadrature_nodes
/// Gauss-Hermite points), fits the grid and starts from N(mean, variance).
PdeSolution solve_pde(const PdeConfig& cfg, const Prior& prior, const InitialLaw& x0,
                      std::span<const double> record_times,
                      double moments_interval = 0.05, int quadrature_nodes = 21);

}  // namespace ospca
