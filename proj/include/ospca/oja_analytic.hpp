#pragma once

// Closed-form overlap dynamics of Oja's method (no thresholding).

namespace ospca {

struct OjaParams {
  double tau = 0.5;
  double omega = 1.0;

  double alpha1() const noexcept { return tau * omega * (1.0 + tau / 2.0); }
  double alpha2() const noexcept { return tau * (omega - tau / 2.0); }

  void validate() const;
};

/// Limit of the cosine similarity at rescaled time t, carrying the sign of q0.
double closed_form_q(double t, double q0, const OjaParams& params);

/// sqrt(max{0, (omega - tau/2) / (omega (1 + tau/2))}); 0 when omega = 0.
double steady_state_q(const OjaParams& params);

/// RK4 integration of dQ/dt = alpha2 Q - alpha1 Q^3 up to t.
double ode_q(double t, double q0, const OjaParams& params, double dt);

}  // namespace ospca
