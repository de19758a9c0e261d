#pragma once

// Stationary solutions of the limiting PDE for soft thresholding
// (phi = beta sgn, beta = 0 gives Oja's method).

#include <optional>
#include <span>
#include <vector>

#include "ospca/model.hpp"

namespace ospca {

struct SteadyConfig {
  double tau = 0.5;
  double omega = 1.0;
  double beta = 0.27;

  void validate() const;
};

/// g = tau^2 (1 + omega Q^2)/2 and h = (tau omega Q^2 - R + g)/2.
struct BoltzmannCoefficients {
  double g = 0.0;
  double h = 0.0;
};

BoltzmannCoefficients boltzmann_coefficients(double q, double r, const SteadyConfig& cfg);

/// P(x|xi) = exp(-[h x^2 + beta |x| - tau omega Q xi x] / g) / Z_xi.
/// h = 0 (with beta > |tau omega Q xi|) is the two-sided exponential limit;
/// Q = 0, R = tau^2/2 gives the Laplace law with rate 2 beta / tau^2.
class SteadyDensity {
 public:
  double operator()(double x) const;
  double log_partition() const noexcept { return log_z_; }
  double mean() const noexcept { return mean_; }
  double mean_abs() const noexcept { return mean_abs_; }
  bool is_exponential_limit() const noexcept { return h_ == 0.0; }

 private:
  friend SteadyDensity steady_density(double xi, double q, double r,
                                      const SteadyConfig& cfg);

  double g_ = 0.0;
  double h_ = 0.0;
  double beta_ = 0.0;
  double tilt_ = 0.0;  // tau omega Q xi
  double log_z_ = 0.0;
  double mean_ = 0.0;
  double mean_abs_ = 0.0;
};

/// Throws ErrorCode::Numerical when the density is not normalizable.
SteadyDensity steady_density(double xi, double q, double r, const SteadyConfig& cfg);

struct MacroState {
  double q = 0.0;
  double r = 0.0;
};

/// Right-hand side of the fixed-point system, evaluated in closed form with
/// the scaled complementary error function. Throws ErrorCode::Numerical for
/// h < 0.
MacroState fp_rhs(double q, double r, const SteadyConfig& cfg,
                  std::span<const Atom> atoms);

/// Same map computed by adaptive quadrature of the unnormalized Boltzmann
/// density; independent of the closed form and used to check it.
MacroState fp_rhs_quadrature(double q, double r, const SteadyConfig& cfg,
                             std::span<const Atom> atoms);

enum class Branch { Uninformative, Informative };

const char* to_string(Branch branch) noexcept;

struct FixedPoint {
  double q = 0.0;
  double r = 0.0;
  double residual = 0.0;
  Branch branch = Branch::Uninformative;
  bool converged = false;
  int iterations = 0;
};

struct FixedPointOptions {
  double damping = 0.5;
  double tol = 1e-10;
  int max_iter = 10000;
  double h_min = 1e-8;
  double eps_q = 1e-6;
};

/// (Q0, R0) with R0 chosen so that h(Q0, R0) = h0.
MacroState start_from_h(double q0, double h0, const SteadyConfig& cfg);

/// Damped iteration (Q, R) <- (1 - lambda)(Q, R) + lambda fp_rhs(Q, R).
/// Iterates are projected back to h >= h_min. When the iteration collapses
/// onto Q = 0 with h at the floor, the exact uninformative point
/// (0, tau^2/2) is checked directly. Non-convergence returns the best
/// iterate with converged = false.
FixedPoint solve_fixed_point(const SteadyConfig& cfg, std::span<const Atom> atoms,
                             MacroState init, const FixedPointOptions& options = {});

struct SweepOptions {
  std::vector<double> init_q{0.2, 0.5, 0.9};
  double init_h = 3e-3;
  double eps_pt = 1e-3;
  FixedPointOptions fixed_point;
  int threads = 1;
};

struct SweepPoint {
  double omega = 0.0;
  double q_star = 0.0;  // largest converged |Q*|, 0 when none is informative
  double r_star = 0.0;
  bool converged = false;
  Branch branch = Branch::Uninformative;
  std::vector<double> distinct_q;  // every distinct converged |Q*|
};

std::vector<SweepPoint> sweep_omega(const SteadyConfig& base, std::span<const Atom> atoms,
                                    std::span<const double> omegas,
                                    const SweepOptions& options = {});

struct CriticalEstimate {
  std::optional<double> omega_c;  // smallest grid omega with Q* > eps_pt
  double uncertainty = 0.0;       // grid spacing at omega_c
};

CriticalEstimate estimate_critical_omega(std::span<const SweepPoint> sweep,
                                         double eps_pt = 1e-3);

std::vector<double> linspace(double lo, double hi, int n);

}  // namespace ospca
