#include <doctest.h>

#include <cmath>

#include "ospca/error.hpp"
#include "ospca/oja_analytic.hpp"

using namespace ospca;

TEST_SUITE("oja_analytic") {

TEST_CASE("coefficients") {
  const OjaParams p{0.5, 1.0};
  CHECK(p.alpha1() == doctest::Approx(0.625));
  CHECK(p.alpha2() == doctest::Approx(0.375));
  CHECK(OjaParams{2.0, 1.0}.alpha2() == 0.0);
  CHECK(OjaParams{2.0, 1.0}.alpha1() == doctest::Approx(4.0));
}

TEST_CASE("initial condition is returned at t = 0") {
  CHECK(closed_form_q(0.0, 0.1, {0.5, 1.0}) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(closed_form_q(0.0, 0.5, {2.0, 1.0}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(closed_form_q(0.0, -0.3, {3.0, 1.0}) == doctest::Approx(-0.3).epsilon(1e-15));
}

TEST_CASE("closed form at tau = 0.5, omega = 1") {
  const double expected = std::sqrt(0.375 / (0.625 + (0.375 / 0.01 - 0.625) * std::exp(-0.75)));
  CHECK(closed_form_q(1.0, 0.1, {0.5, 1.0}) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(closed_form_q(1.0, 0.1, {0.5, 1.0}) == doctest::Approx(0.144164).epsilon(1e-5));
}

TEST_CASE("balanced case alpha2 = 0 follows the algebraic decay") {
  // dQ/dt = -alpha1 Q^3  =>  Q^-2 = Q0^-2 + 2 alpha1 t.
  const double q = closed_form_q(1.0, 0.5, {2.0, 1.0});
  CHECK(q == doctest::Approx(1.0 / std::sqrt(12.0)).epsilon(1e-14));
  CHECK(ode_q(1.0, 0.5, {2.0, 1.0}, 1e-3) == doctest::Approx(q).epsilon(1e-10));
}

TEST_CASE("closed form is continuous across the alpha2 switch") {
  const double tau = 2.0;
  for (double d : {1e-6, 1e-9, 1e-11}) {
    const double above = closed_form_q(3.0, 0.4, {tau, 1.0 + d});
    const double at = closed_form_q(3.0, 0.4, {tau, 1.0});
    CHECK(std::abs(above - at) <= 10.0 * d);
  }
}

TEST_CASE("zero initial overlap is rejected") {
  try {
    closed_form_q(1.0, 0.0, {0.5, 1.0});
    FAIL("expected a precondition error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Precondition);
  }
}

TEST_CASE("steady state") {
  CHECK(steady_state_q({0.5, 1.0}) == doctest::Approx(std::sqrt(0.6)).epsilon(1e-15));
  CHECK(steady_state_q({0.5, 1.0}) == doctest::Approx(0.77460).epsilon(1e-5));
  CHECK(steady_state_q({2.0, 1.0}) == 0.0);
  CHECK(steady_state_q({3.0, 1.0}) == 0.0);
  CHECK(steady_state_q({0.5, 0.0}) == 0.0);
  CHECK(steady_state_q({1e-9, 1.0}) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("phase boundary at omega = tau / 2") {
  for (double tau : {0.1, 0.5, 1.0, 2.0, 3.0}) {
    for (double omega = 0.01; omega <= 3.0; omega += 0.07) {
      CHECK((steady_state_q({tau, omega}) > 0.0) == (omega > tau / 2.0));
    }
  }
}

TEST_CASE("ODE integration agrees with the closed form over the parameter grid") {
  double worst = 0.0;
  for (double tau : {0.1, 0.5, 1.0, 2.0, 3.0}) {
    for (double omega : {0.1, 0.5, 1.0, 2.0}) {
      for (double q0 : {0.05, 0.3, 0.9}) {
        for (double t : {0.5, 1.0, 5.0, 20.0}) {
          const OjaParams p{tau, omega};
          worst = std::max(worst, std::abs(ode_q(t, q0, p, 1e-3) - closed_form_q(t, q0, p)));
        }
      }
    }
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("ODE fixed point is stationary") {
  const OjaParams p{0.5, 1.0};
  const double q = std::sqrt(p.alpha2() / p.alpha1());
  for (double t : {1.0, 10.0, 20.0}) CHECK(std::abs(ode_q(t, q, p, 1e-3) - q) <= 1e-10);
}

TEST_CASE("pure decay without signal") {
  const double tau = 0.8;
  for (double t : {0.5, 2.0, 7.0}) {
    const double expected = 0.4 * std::exp(-tau * tau * t / 2.0);
    CHECK(std::abs(ode_q(t, 0.4, {tau, 0.0}, 1e-3) - expected) <= 1e-8);
    CHECK(std::abs(closed_form_q(t, 0.4, {tau, 0.0}) - expected) <= 1e-8);
  }
}

TEST_CASE("monotone approach to the steady state") {
  const OjaParams p{0.5, 1.0};
  const double star = steady_state_q(p);
  double prev_low = 0.1;
  double prev_high = 0.99;
  for (double t = 0.1; t <= 30.0; t += 0.1) {
    const double low = closed_form_q(t, 0.1, p);
    const double high = closed_form_q(t, 0.99, p);
    CHECK(low > prev_low);
    CHECK(high < prev_high);
    CHECK(low < star);
    CHECK(high > star);
    prev_low = low;
    prev_high = high;
  }
  CHECK(std::abs(closed_form_q(1e3, 0.1, p) - star) <= 1e-6);
}

TEST_CASE("sign follows the initial overlap") {
  const OjaParams p{0.5, 1.0};
  CHECK(closed_form_q(4.0, -0.2, p) == doctest::Approx(-closed_form_q(4.0, 0.2, p)));
  CHECK(ode_q(4.0, -0.2, p, 1e-3) == doctest::Approx(-ode_q(4.0, 0.2, p, 1e-3)));
}

TEST_CASE("curve from the reference initial overlap") {
  const OjaParams p{0.5, 1.0};
  const double q0 = std::sqrt(0.05 / 2.0);
  const double expected[][2] = {{0.5, 0.188939}, {1.0, 0.224881}, {2.0, 0.312806},
                                {5.0, 0.624004}, {10.0, 0.769716}, {15.0, 0.774481}};
  for (const auto& e : expected) {
    CHECK(std::abs(closed_form_q(e[0], q0, p) - e[1]) <= 1e-6);
  }
  CHECK(std::abs(closed_form_q(15.0, q0, p) - std::sqrt(0.6)) <= 2e-4);
  CHECK(std::abs(closed_form_q(40.0, q0, p) - std::sqrt(0.6)) <= 1e-5);
}

}  // TEST_SUITE
