#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ospca/special.hpp"

using namespace ospca;

namespace {

// exp(x^2) erfc(x), log f(x) and 1/(pi f(x)) - x from 40-digit arithmetic.
struct Reference {
  double x;
  double erfcx;
  double log_f;
  double residual;
};

constexpr Reference kReference[] = {
    {-3.0, 16205.988853999586625, 9.1207711923257467233, 3.0000348136475120749},
    {-1.0, 5.0089800807622834663, 1.0388673747533704076, 1.1126356213143287276},
    {-0.5, 1.9523604891825570933, 0.096674204850859493292, 0.78897818137263136866},
    {0.0, 1.0, -0.57236494292470008707, 0.56418958354775628695},
    {0.3, 0.73459933456765515237, -0.880794994364785363, 0.46802354290152919447},
    {1.0, 0.42758357615580700441, -1.4219704528579483356, 0.31948375711739563024},
    {2.0, 0.25539567631050574387, -1.9373062075413376615, 0.20908040299720709899},
    {3.9, 0.14031418160068970328, -2.5362361593601038226, 0.12090207213226599523},
    {4.0, 0.13699945762506138989, -2.5601432550277065901, 0.11818844635008803608},
    {4.1, 0.13383411641865221245, -2.5835191260073491881, 0.11558866038978293888},
    {6.0, 0.092776567800538354389, -2.9499261161480884531, 0.081164640200049147225},
    {10.0, 0.056140992743822585858, -3.4522539677695886619, 0.049512058367302114772},
    {30.0, 0.018795888861416751497, -4.5464820535685781667, 0.016648199378114202838},
    {100.0, 0.0056416137829894329036, -5.7499500655890326575, 0.0049995001249537720498},
    {1e4, 0.000056418958072680841152, -10.355070262825582848, 0.0000499999995000000125},
};

}  // namespace

TEST_SUITE("special") {

TEST_CASE("erfcx matches high-precision values") {
  for (const auto& r : kReference) {
    CAPTURE(r.x);
    CHECK(erfcx(r.x) == doctest::Approx(r.erfcx).epsilon(2e-14));
    CHECK(log_scaled_erfc(r.x) == doctest::Approx(r.log_f).epsilon(1e-14));
    // Cancellation just below the continued-fraction switch costs a few digits.
    CHECK(scaled_erfc_residual(r.x) == doctest::Approx(r.residual).epsilon(1e-12));
  }
}

TEST_CASE("f(0) is 1/sqrt(pi)") {
  CHECK(scaled_erfc(0.0) == doctest::Approx(1.0 / std::sqrt(std::numbers::pi)).epsilon(1e-15));
  CHECK(scaled_erfc(0.0) == doctest::Approx(0.5641896).epsilon(1e-7));
}

TEST_CASE("reflection identity f(-x) + f(x) = (2/sqrt(pi)) exp(x^2)") {
  for (double x = 0.0; x <= 2.0 + 1e-12; x += 0.01) {
    const double lhs = scaled_erfc(-x) + scaled_erfc(x);
    const double rhs = 2.0 / std::sqrt(std::numbers::pi) * std::exp(x * x);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * rhs);
  }
}

TEST_CASE("x f(x) tends to 1/pi") {
  CHECK(std::abs(30.0 * scaled_erfc(30.0) - 1.0 / std::numbers::pi) <= 1e-3);
  double previous = 1.0;
  for (double x = 5.0; x <= 1e6; x *= 2.0) {
    const double gap = std::abs(x * scaled_erfc(x) - 1.0 / std::numbers::pi);
    CHECK(gap < previous);
    previous = gap;
  }
}

TEST_CASE("scaled forms stay finite across the range") {
  for (double x = -30.0; x <= 30.0; x += 0.25) {
    CAPTURE(x);
    CHECK(std::isfinite(log_scaled_erfc(x)));
    CHECK(std::isfinite(scaled_erfc_residual(x)));
    CHECK(scaled_erfc_residual(x) > 0.0);
    if (x > -26.0) CHECK(std::isfinite(scaled_erfc(x)));
  }
  CHECK(std::isfinite(log_scaled_erfc(-1e3)));
}

TEST_CASE("f is continuous across the evaluation switch") {
  const double below = std::nextafter(4.0, 0.0);
  CHECK(erfcx(below) == doctest::Approx(erfcx(4.0)).epsilon(1e-14));
  CHECK(scaled_erfc_residual(below) == doctest::Approx(scaled_erfc_residual(4.0)).epsilon(1e-12));
}

TEST_CASE("residual relation between f and its complement") {
  // d/dx of the Gaussian tail integral gives f(x) (x + r(x)) = 1/pi.
  // Well below x = -2 the sum x + r loses most of its digits to cancellation.
  for (double x = -2.0; x <= 50.0; x += 0.37) {
    CAPTURE(x);
    CHECK(scaled_erfc(x) * (x + scaled_erfc_residual(x)) ==
          doctest::Approx(1.0 / std::numbers::pi).epsilon(1e-12));
  }
}

}  // TEST_SUITE
