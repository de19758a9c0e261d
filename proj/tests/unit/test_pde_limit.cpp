#include <doctest.h>

#include <cmath>
#include <vector>

#include "ospca/error.hpp"
#include "ospca/oja_analytic.hpp"
#include "ospca/pde_limit.hpp"

using namespace ospca;

namespace {

const double kRho = 0.05;

PdeConfig reference_config() {
  PdeConfig c;
  c.tau = 0.5;
  c.omega = 1.0;
  c.threshold = Threshold::soft(0.27);
  return c;
}

ConditionalDensitySet reference_initial(const PdeConfig& cfg) {
  return initial_density(1.0 / std::sqrt(2.0), 0.5, cfg.grid, Prior::two_point(kRho).atoms(),
                         cfg.threshold);
}

double mean_of(const std::vector<double>& p, const Grid& g) {
  double m = 0.0;
  for (int i = 0; i < g.n; ++i) m += g.center(i) * p[i] * g.dx();
  return m;
}

double variance_of(const std::vector<double>& p, const Grid& g) {
  const double m = mean_of(p, g);
  double v = 0.0;
  for (int i = 0; i < g.n; ++i) v += (g.center(i) - m) * (g.center(i) - m) * p[i] * g.dx();
  return v;
}

}  // namespace

TEST_SUITE("pde_limit") {

TEST_CASE("grid validation and geometry") {
  const Grid g;
  CHECK(g.dx() == doctest::Approx(0.02));
  CHECK(g.center(0) == doctest::Approx(-5.99));
  CHECK(g.face(700) == doctest::Approx(8.0));
  CHECK_THROWS_AS((Grid{0.0, 1.0, 49}.validate()), Error);
  CHECK_THROWS_AS((Grid{1.0, 1.0, 100}.validate()), Error);
}

TEST_CASE("grid grows to hold every atom with a margin") {
  const Grid g;
  const std::vector<Atom> atoms{{0.0, 0.9}, {10.0, 0.1}};
  const Grid f = fit_grid(g, atoms, 3.0);
  CHECK(f.dx() == doctest::Approx(g.dx()).epsilon(1e-12));
  CHECK(f.x_max >= 13.0 - 1e-9);
  CHECK(f.x_min == doctest::Approx(g.x_min));
  const Grid same = fit_grid(g, Prior::two_point(kRho).atoms(), 3.0);
  CHECK(same.n == g.n);
}

TEST_CASE("drift examples") {
  const auto soft = Threshold::soft(0.27);
  CHECK(drift_gamma(1.0, 0.0, 0.0, 0.0, 0.5, 1.0, soft) == doctest::Approx(-0.395));
  CHECK(drift_gamma(0.0, 3.0, 0.4, 0.1, 0.5, 1.0, soft) == doctest::Approx(0.5 * 0.4 * 3.0));
  const double xi = 1.0 / std::sqrt(kRho);
  const double expected = 0.5 * 0.5 * xi - 0.27 - 0.5 * (0.125 - 0.2 + 0.15625);
  CHECK(drift_gamma(0.5, xi, 0.5, 0.2, 0.5, 1.0, soft) == doctest::Approx(expected));
  CHECK(drift_gamma(0.5, xi, 0.5, 0.2, 0.5, 1.0, soft) == doctest::Approx(0.80741).epsilon(1e-5));
}

TEST_CASE("moments of concentrated densities recover the prior second moment") {
  const auto prior = Prior::two_point(kRho);
  const auto atoms = prior.atoms();
  // Cells of width 0.01 centred on both atoms.
  const Grid g{-0.005, 5.995, 600};
  auto state = density_from_profile(g, atoms, Threshold::none(), [&](double x, double a) {
    return std::abs(x - a) < 0.006 ? 1.0 : 0.0;
  });
  CHECK(state.q == doctest::Approx(1.0).epsilon(2e-3));
}

TEST_CASE("symmetric densities give no overlap and R = beta E|x|") {
  const auto prior = Prior::two_point(kRho);
  const auto atoms = prior.atoms();
  const Grid g{-6.0, 6.0, 1200};
  const double beta = 0.27;
  const double tau = 0.5;
  const double rate = 2.0 * beta / (tau * tau);
  auto state = density_from_profile(g, atoms, Threshold::soft(beta),
                                    [&](double x, double) { return std::exp(-rate * std::abs(x)); });
  CHECK(std::abs(state.q) <= 1e-12);
  CHECK(state.r == doctest::Approx(tau * tau / 2.0).epsilon(1e-4));
}

TEST_CASE("initial density is normalized and carries the expected overlap") {
  const auto cfg = reference_config();
  const auto s = reference_initial(cfg);
  for (std::size_t j = 0; j < s.atoms.size(); ++j) CHECK(std::abs(s.mass(j) - 1.0) <= 1e-8);
  CHECK(s.q == doctest::Approx(std::sqrt(kRho / 2.0)).epsilon(1e-6));
  CHECK(s.q == doctest::Approx(0.15811).epsilon(1e-4));
}

TEST_CASE("initial density must fit on the grid") {
  try {
    initial_density(7.5, 0.5, Grid{}, Prior::two_point(kRho).atoms(), Threshold::none());
    FAIL("expected a configuration error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Config);
  }
}

TEST_CASE("solver refuses a zero initial overlap") {
  const auto cfg = reference_config();
  auto s = initial_density(0.0, 0.5, cfg.grid, Prior::two_point(kRho).atoms(), cfg.threshold);
  CHECK(std::abs(s.q) <= 1e-12);
  try {
    solve_pde(cfg, s, std::vector<double>{});
    FAIL("expected a configuration error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Config);
  }
}

TEST_CASE("pure diffusion grows the variance by 2 D dt per step") {
  const Grid g{-10.0, 10.0, 1000};
  std::vector<double> p(g.n, 0.0);
  p[g.n / 2] = 1.0 / g.dx();
  const double d = diffusion_coefficient(0.3, 0.5, 1.0);
  const double dt = 0.4 * g.dx() * g.dx() / d;
  const std::vector<double> drift(g.n + 1, 0.0);
  std::vector<double> scratch;
  const double v0 = variance_of(p, g);
  for (int k = 0; k < 100; ++k) {
    advance_drift_diffusion(p, g, drift, d, dt, FluxScheme::ExponentialFitting, scratch);
  }
  const double growth = variance_of(p, g) - v0;
  CHECK(growth == doctest::Approx(2.0 * d * dt * 100).epsilon(0.02));
}

TEST_CASE("pure advection translates the profile by c dt per step") {
  const Grid g{-5.0, 5.0, 500};
  std::vector<double> p(g.n);
  for (int i = 0; i < g.n; ++i) p[i] = std::exp(-g.center(i) * g.center(i) / 0.1);
  double mass = 0.0;
  for (double v : p) mass += v * g.dx();
  for (auto& v : p) v /= mass;
  const double c = 0.7;
  const double dt = 0.5 * g.dx() / c;
  const std::vector<double> drift(g.n + 1, c);
  std::vector<double> scratch;
  for (auto scheme : {FluxScheme::Upwind, FluxScheme::ExponentialFitting}) {
    std::vector<double> q = p;
    const double m0 = mean_of(q, g);
    for (int k = 1; k <= 200; ++k) {
      advance_drift_diffusion(q, g, drift, 0.0, dt, scheme, scratch);
      if (k % 50 == 0) CHECK(std::abs(mean_of(q, g) - m0 - c * dt * k) <= g.dx());
    }
  }
}

TEST_CASE("automatic step satisfies the stability bound and keeps densities positive") {
  const auto cfg = reference_config();
  auto s = reference_initial(cfg);
  for (int k = 0; k < 2000; ++k) {
    const double d = diffusion_coefficient(s.q, cfg.tau, cfg.omega);
    double max_drift = 0.0;
    for (const auto& a : s.atoms) {
      for (int i = 1; i < s.grid.n; ++i) {
        max_drift = std::max(max_drift, std::abs(drift_gamma(s.grid.face(i), a.value, s.q, s.r,
                                                             cfg.tau, cfg.omega, cfg.threshold)));
      }
    }
    const double dx = s.grid.dx();
    const double bound = 0.9 * std::min(dx * dx / (2.0 * d), dx / max_drift);
    const auto stats = step_pde(s, cfg);
    CHECK(stats.dt <= bound);
    CHECK(stats.min_before_clip >= -1e-14);
    CHECK(stats.clipped == 0);
  }
}

TEST_CASE("explicit step above the bound is rejected") {
  const auto cfg = reference_config();
  auto s = reference_initial(cfg);
  try {
    step_pde(s, cfg, 1.0);
    FAIL("expected a step-size error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::StepSize);
  }
  const double ok = stable_dt(s, cfg);
  CHECK_NOTHROW(step_pde(s, cfg, ok));
}

TEST_CASE("mass is conserved step by step and moments stay consistent") {
  auto cfg = reference_config();
  cfg.grid = Grid{-6.0, 8.0, 140};
  auto s = reference_initial(cfg);
  for (int k = 0; k < 20000; ++k) {
    std::vector<double> before(s.atoms.size());
    for (std::size_t j = 0; j < s.atoms.size(); ++j) before[j] = s.mass(j);
    step_pde(s, cfg);
    if (k % 1000 == 0) {
      for (std::size_t j = 0; j < s.atoms.size(); ++j) {
        CHECK(std::abs(s.mass(j) - before[j]) <= 1e-10);
      }
      const auto m = moments(s, cfg.threshold);
      CHECK(std::abs(m.q - s.q) <= 1e-10);
      CHECK(std::abs(m.r - s.r) <= 1e-10);
    }
  }
  for (std::size_t j = 0; j < s.atoms.size(); ++j) CHECK(std::abs(s.mass(j) - 1.0) <= 1e-8);
}

TEST_CASE("snapshots land on the record times") {
  auto cfg = reference_config();
  cfg.t_max = 1.0;
  const std::vector<double> times{0.0, 0.33, 1.0};
  const auto sol = solve_pde(cfg, reference_initial(cfg), times, 0.1);
  REQUIRE(sol.snapshots.size() == 3);
  for (std::size_t i = 0; i < times.size(); ++i) {
    CHECK(sol.snapshots[i].t == doctest::Approx(times[i]).epsilon(1e-12));
    const auto m = moments(sol.snapshots[i], cfg.threshold);
    CHECK(std::abs(m.q - sol.snapshots[i].q) <= 1e-10);
  }
  REQUIRE(sol.series.size() == 11);
  CHECK(sol.series.back().t == doctest::Approx(1.0));
  CHECK(sol.dt_max <= stable_dt(reference_initial(cfg), cfg) * 1.5);
}

TEST_CASE("without thresholding the overlap follows the closed form") {
  auto cfg = reference_config();
  cfg.threshold = Threshold::none();
  auto run = [&](int n) {
    cfg.grid = Grid{-6.0, 8.0, n};
    const auto init = initial_density(1.0 / std::sqrt(2.0), 0.5, cfg.grid,
                                      Prior::two_point(kRho).atoms(), cfg.threshold);
    const double q0 = init.q;
    const auto sol = solve_pde(cfg, init, std::vector<double>{}, 0.05);
    double worst = 0.0;
    for (const auto& s : sol.series) {
      worst = std::max(worst, std::abs(s.q - closed_form_q(s.t, q0, {cfg.tau, cfg.omega})));
    }
    return worst;
  };
  const double coarse = run(350);
  const double fine = run(700);
  CHECK(fine <= 5e-3);
  CHECK(fine < coarse);
}

TEST_CASE("halving dx and dt changes the overlap at t = 15 by at most 1e-3") {
  auto cfg = reference_config();
  const auto prior = Prior::two_point(kRho);
  const auto atoms = prior.atoms();
  auto final_q = [&](int n, double dt) {
    cfg.grid = Grid{-6.0, 8.0, n};
    cfg.dt = dt;
    const auto init =
        initial_density(1.0 / std::sqrt(2.0), 0.5, cfg.grid, atoms, cfg.threshold);
    return solve_pde(cfg, init, std::vector<double>{}, 15.0).series.back().q;
  };
  const double dt = 6e-4;
  CHECK(std::abs(final_q(700, dt) - final_q(1400, dt / 4.0)) <= 1e-3);
}

}  // TEST_SUITE
