#pragma once

namespace ospca {

/// exp(x^2) erfc(x). Finite for x > -26.6; overflows to +inf below that.
double erfcx(double x);

/// f(x) = (2/pi) exp(x^2) int_x^inf exp(-z^2) dz = erfcx(x)/sqrt(pi).
double scaled_erfc(double x);

/// log f(x); finite for every finite x.
double log_scaled_erfc(double x);

/// 1/(pi f(x)) - x, evaluated without cancellation for large x, where it
/// behaves like 1/(2x).
double scaled_erfc_residual(double x);

}  // namespace ospca
