#include "ospca/oja_analytic.hpp"

#include <cmath>

#include "ospca/error.hpp"

namespace ospca {

namespace {

// Below this |alpha2| the logistic branch is replaced by its alpha2 -> 0 limit.
constexpr double kAlpha2Switch = 1e-12;

}  // namespace

void OjaParams::validate() const {
  require(std::isfinite(tau) && tau > 0.0, ErrorCode::Config, "oja: tau must be > 0");
  require(std::isfinite(omega) && omega >= 0.0, ErrorCode::Config, "oja: omega must be >= 0");
}

double closed_form_q(double t, double q0, const OjaParams& params) {
  params.validate();
  require(q0 != 0.0, ErrorCode::Precondition,
          "closed_form_q: the scaling limit requires a nonzero initial overlap Q0");
  require(t >= 0.0, ErrorCode::Precondition, "closed_form_q: t must be >= 0");
  const double a1 = params.alpha1();
  const double a2 = params.alpha2();
  const double inv_q0_sq = 1.0 / (q0 * q0);
  double q_sq;
  if (std::abs(a2) < kAlpha2Switch) {
    q_sq = 1.0 / (2.0 * a1 * t + inv_q0_sq);
  } else {
    q_sq = a2 / (a1 + (a2 * inv_q0_sq - a1) * std::exp(-2.0 * a2 * t));
  }
  return std::copysign(std::sqrt(q_sq), q0);
}

double steady_state_q(const OjaParams& params) {
  params.validate();
  if (params.omega == 0.0) return 0.0;
  const double ratio =
      (params.omega - params.tau / 2.0) / (params.omega * (1.0 + params.tau / 2.0));
  return std::sqrt(std::max(0.0, ratio));
}

double ode_q(double t, double q0, const OjaParams& params, double dt) {
  params.validate();
  require(dt > 0.0, ErrorCode::Precondition, "ode_q: dt must be > 0");
  require(t >= 0.0, ErrorCode::Precondition, "ode_q: t must be >= 0");
  const double a1 = params.alpha1();
  const double a2 = params.alpha2();
  const auto rhs = [a1, a2](double q) { return a2 * q - a1 * q * q * q; };
  const auto steps = static_cast<long long>(std::ceil(t / dt - 1e-9));
  if (steps == 0) return q0;
  const double h = t / static_cast<double>(steps);
  double q = q0;
  for (long long s = 0; s < steps; ++s) {
    const double k1 = rhs(q);
    const double k2 = rhs(q + 0.5 * h * k1);
    const double k3 = rhs(q + 0.5 * h * k2);
    const double k4 = rhs(q + h * k3);
    q += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return q;
}

}  // namespace ospca
