#include "ospca/special.hpp"

#include <cmath>
#include <numbers>

namespace ospca {

namespace {

constexpr double kContinuedFractionFrom = 4.0;

// Tail K(x) of  sqrt(pi) erfcx(x) = 1 / (x + K(x)),
//   K(x) = (1/2) / (x + 1 / (x + (3/2) / (x + 2 / (x + ...)))),
// by the modified Lentz method. Accurate to a few ulps for x >= 4.
double erfc_fraction_tail(double x) {
  constexpr double tiny = 1e-300;
  double f = tiny;
  double c = f;
  double d = 0.0;
  for (int n = 1; n < 500; ++n) {
    const double a = 0.5 * n;
    d = x + a * d;
    c = x + a / c;
    if (d == 0.0) d = tiny;
    if (c == 0.0) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return f;
}

const double kSqrtPi = std::sqrt(std::numbers::pi);

}  // namespace

double erfcx(double x) {
  if (x >= kContinuedFractionFrom) return 1.0 / (kSqrtPi * (x + erfc_fraction_tail(x)));
  return std::exp(x * x) * std::erfc(x);
}

double scaled_erfc(double x) { return erfcx(x) / kSqrtPi; }

double log_scaled_erfc(double x) {
  if (x >= kContinuedFractionFrom) {
    return -std::log(std::numbers::pi * (x + erfc_fraction_tail(x)));
  }
  if (x < 0.0) return x * x + std::log(std::erfc(x)) - std::log(kSqrtPi);
  return std::log(scaled_erfc(x));
}

double scaled_erfc_residual(double x) {
  if (x >= kContinuedFractionFrom) return erfc_fraction_tail(x);
  return 1.0 / (kSqrtPi * erfcx(x)) - x;
}

}  // namespace ospca
