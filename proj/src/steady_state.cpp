#include "ospca/steady_state.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "ospca/error.hpp"
#include "ospca/special.hpp"

namespace ospca {

namespace {

// Relative size below which h is treated as exactly zero.
constexpr double kFlatH = 1e-14;

struct SideMoments {
  double weight_pos = 0.0;  // relative mass of x > 0
  double weight_neg = 0.0;
  double mean = 0.0;
  double mean_abs = 0.0;
  double log_z = 0.0;
};

// Conditional moments of exp(-[h x^2 + beta |x| - tilt x] / g).
SideMoments side_moments(double g, double h, double beta, double tilt) {
  SideMoments m;
  if (h <= kFlatH * g) {
    const double a_pos = (beta - tilt) / g;
    const double a_neg = (beta + tilt) / g;
    if (!(a_pos > 0.0 && a_neg > 0.0)) {
      fail(ErrorCode::Numerical,
           "steady density: h = 0 requires beta > |tau omega Q xi| to be normalizable");
    }
    const double z = 1.0 / a_pos + 1.0 / a_neg;
    m.weight_pos = (1.0 / a_pos) / z;
    m.weight_neg = (1.0 / a_neg) / z;
    m.mean = (1.0 / (a_pos * a_pos) - 1.0 / (a_neg * a_neg)) / z;
    m.mean_abs = (1.0 / (a_pos * a_pos) + 1.0 / (a_neg * a_neg)) / z;
    m.log_z = std::log(z);
    return m;
  }
  const double s = std::sqrt(g / h);
  const double scale = 2.0 * std::sqrt(g * h);
  const double z_pos = (beta - tilt) / scale;
  const double z_neg = (beta + tilt) / scale;
  const double lf_pos = log_scaled_erfc(z_pos);
  const double lf_neg = log_scaled_erfc(z_neg);
  const double top = std::max(lf_pos, lf_neg);
  const double w_pos = std::exp(lf_pos - top);
  const double w_neg = std::exp(lf_neg - top);
  const double total = w_pos + w_neg;
  const double r_pos = scaled_erfc_residual(z_pos);
  const double r_neg = scaled_erfc_residual(z_neg);
  m.weight_pos = w_pos / total;
  m.weight_neg = w_neg / total;
  m.mean = s * (w_pos * r_pos - w_neg * r_neg) / total;
  m.mean_abs = s * (w_pos * r_pos + w_neg * r_neg) / total;
  m.log_z = std::log(0.5 * std::numbers::pi * s) + top + std::log(total);
  return m;
}

void check_state(double q, double r) {
  require(std::isfinite(q) && std::isfinite(r), ErrorCode::Precondition,
          "steady state: Q and R must be finite");
}

}  // namespace

void SteadyConfig::validate() const {
  require(std::isfinite(tau) && tau > 0.0, ErrorCode::Config, "steady: tau must be > 0");
  require(std::isfinite(omega) && omega >= 0.0, ErrorCode::Config,
          "steady: omega must be >= 0");
  require(std::isfinite(beta) && beta >= 0.0, ErrorCode::Config, "steady: beta must be >= 0");
}

BoltzmannCoefficients boltzmann_coefficients(double q, double r, const SteadyConfig& cfg) {
  BoltzmannCoefficients c;
  c.g = 0.5 * cfg.tau * cfg.tau * (1.0 + cfg.omega * q * q);
  c.h = 0.5 * (cfg.tau * cfg.omega * q * q - r + c.g);
  return c;
}

double SteadyDensity::operator()(double x) const {
  const double exponent = -(h_ * x * x + beta_ * std::abs(x) - tilt_ * x) / g_;
  return std::exp(exponent - log_z_);
}

SteadyDensity steady_density(double xi, double q, double r, const SteadyConfig& cfg) {
  check_state(q, r);
  const auto c = boltzmann_coefficients(q, r, cfg);
  if (c.h < -kFlatH * c.g) {
    std::ostringstream msg;
    msg << "steady density: h(Q, R) = " << c.h << " < 0 is not normalizable";
    fail(ErrorCode::Numerical, msg.str());
  }
  SteadyDensity d;
  d.g_ = c.g;
  d.h_ = c.h <= kFlatH * c.g ? 0.0 : c.h;
  d.beta_ = cfg.beta;
  d.tilt_ = cfg.tau * cfg.omega * q * xi;
  const SideMoments m = side_moments(d.g_, d.h_, d.beta_, d.tilt_);
  d.log_z_ = m.log_z;
  d.mean_ = m.mean;
  d.mean_abs_ = m.mean_abs;
  return d;
}

MacroState fp_rhs(double q, double r, const SteadyConfig& cfg, std::span<const Atom> atoms) {
  check_state(q, r);
  const auto c = boltzmann_coefficients(q, r, cfg);
  if (!(c.h > 0.0)) {
    std::ostringstream msg;
    msg << "fp_rhs: h(Q, R) = " << c.h << " must be > 0";
    fail(ErrorCode::Numerical, msg.str());
  }
  MacroState out;
  double e_abs = 0.0;
  for (const auto& a : atoms) {
    const SideMoments m = side_moments(c.g, c.h, cfg.beta, cfg.tau * cfg.omega * q * a.value);
    out.q += a.weight * a.value * m.mean;
    e_abs += a.weight * m.mean_abs;
  }
  out.r = cfg.beta * e_abs;
  return out;
}

MacroState fp_rhs_quadrature(double q, double r, const SteadyConfig& cfg,
                             std::span<const Atom> atoms) {
  check_state(q, r);
  const auto c = boltzmann_coefficients(q, r, cfg);
  require(c.h > 0.0, ErrorCode::Numerical, "fp_rhs_quadrature: h(Q, R) must be > 0");
  const double g = c.g;
  const double h = c.h;
  const double beta = cfg.beta;

  boost::math::quadrature::exp_sinh<double> half_line;
  boost::math::quadrature::tanh_sinh<double> finite;
  constexpr double tol = 1e-15;

  MacroState out;
  double e_abs = 0.0;
  for (const auto& a : atoms) {
    const double tilt = cfg.tau * cfg.omega * q * a.value;
    double tops[2];
    double mass[2];
    double moment1[2];
    // Each half line is integrated in the reflected variable u = sign * x >= 0.
    for (int side = 0; side < 2; ++side) {
      const double sign = side == 0 ? 1.0 : -1.0;
      const double slope = beta - sign * tilt;  // exponent: -(h u^2 + slope u) / g
      const double peak = std::max(0.0, -slope / (2.0 * h));
      const double top = -(h * peak * peak + slope * peak) / g;
      const double curvature = std::sqrt(2.0 * h / g);
      const double edge_slope = peak > 0.0 ? 0.0 : slope / g;
      const double width = 1.0 / std::max(curvature, edge_slope);
      auto density = [&](double u) { return std::exp(-(h * u * u + slope * u) / g - top); };
      auto integrate = [&](auto moment) {
        auto tail = [&](double v) {
          const double u = peak + width * v;
          return moment(u) * density(u);
        };
        double total = width * half_line.integrate(tail, 0.0,
                                                   std::numeric_limits<double>::infinity(),
                                                   tol);
        if (peak > 0.0) {
          auto body = [&](double u) { return moment(u) * density(u); };
          total += finite.integrate(body, 0.0, peak, tol);
        }
        return total;
      };
      tops[side] = top;
      mass[side] = integrate([](double) { return 1.0; });
      moment1[side] = integrate([](double u) { return u; });
    }
    const double top = std::max(tops[0], tops[1]);
    const double w0 = std::exp(tops[0] - top);
    const double w1 = std::exp(tops[1] - top);
    const double z = w0 * mass[0] + w1 * mass[1];
    const double first = w0 * moment1[0] - w1 * moment1[1];
    const double absolute = w0 * moment1[0] + w1 * moment1[1];
    out.q += a.weight * a.value * first / z;
    e_abs += a.weight * absolute / z;
  }
  out.r = beta * e_abs;
  return out;
}

const char* to_string(Branch branch) noexcept {
  return branch == Branch::Informative ? "informative" : "uninformative";
}

MacroState start_from_h(double q0, double h0, const SteadyConfig& cfg) {
  const double g = 0.5 * cfg.tau * cfg.tau * (1.0 + cfg.omega * q0 * q0);
  return {q0, cfg.tau * cfg.omega * q0 * q0 + g - 2.0 * h0};
}

FixedPoint solve_fixed_point(const SteadyConfig& cfg, std::span<const Atom> atoms,
                             MacroState init, const FixedPointOptions& options) {
  cfg.validate();
  require(options.damping > 0.0 && options.damping <= 1.0, ErrorCode::Config,
          "steady: damping must lie in (0, 1]");
  require(options.tol > 0.0 && options.max_iter >= 1, ErrorCode::Config,
          "steady: tol must be > 0 and max_iter >= 1");
  require(options.h_min > 0.0, ErrorCode::Config, "steady: h_min must be > 0");
  check_state(init.q, init.r);

  auto project = [&](MacroState s) {
    const auto c = boltzmann_coefficients(s.q, s.r, cfg);
    if (c.h < options.h_min) s.r = cfg.tau * cfg.omega * s.q * s.q + c.g - 2.0 * options.h_min;
    return s;
  };
  auto branch_of = [&](double q) {
    return std::abs(q) <= options.eps_q ? Branch::Uninformative : Branch::Informative;
  };

  const MacroState laplace{0.0, 0.5 * cfg.tau * cfg.tau};
  MacroState s = project(init);
  FixedPoint best;
  best.residual = std::numeric_limits<double>::infinity();

  for (int it = 1; it <= options.max_iter; ++it) {
    const MacroState next = fp_rhs(s.q, s.r, cfg, atoms);
    const double residual = std::max(std::abs(next.q - s.q), std::abs(next.r - s.r));
    if (residual < best.residual) {
      best = {s.q, s.r, residual, branch_of(s.q), false, it};
    }
    if (residual <= options.tol) {
      best.converged = true;
      return best;
    }
    const double lambda = options.damping;
    s = project({(1.0 - lambda) * s.q + lambda * next.q, (1.0 - lambda) * s.r + lambda * next.r});

    const auto c = boltzmann_coefficients(s.q, s.r, cfg);
    const bool at_floor = c.h <= options.h_min * (1.0 + 1e-9);
    if (cfg.beta > 0.0 && at_floor && std::abs(s.q) <= options.eps_q) {
      // The exact uninformative point sits at h = 0, below the floor the
      // iteration can reach; it satisfies the fixed-point system exactly.
      return {laplace.q, laplace.r, 0.0, Branch::Uninformative, true, it};
    }
  }
  best.branch = branch_of(best.q);
  return best;
}

std::vector<SweepPoint> sweep_omega(const SteadyConfig& base, std::span<const Atom> atoms,
                                    std::span<const double> omegas,
                                    const SweepOptions& options) {
  base.validate();
  require(!options.init_q.empty(), ErrorCode::Config, "sweep: need at least one start");
  for (std::size_t i = 1; i < omegas.size(); ++i) {
    require(omegas[i] > omegas[i - 1], ErrorCode::Config, "sweep: omega grid must increase");
  }

  std::vector<SweepPoint> out(omegas.size());
  auto solve_one = [&](std::size_t i) {
    SteadyConfig cfg = base;
    cfg.omega = omegas[i];
    SweepPoint pt;
    pt.omega = omegas[i];
    bool have = false;
    for (double q0 : options.init_q) {
      const FixedPoint fp =
          solve_fixed_point(cfg, atoms, start_from_h(q0, options.init_h, cfg), options.fixed_point);
      if (!fp.converged) continue;
      const double mag = std::abs(fp.q);
      const bool seen = std::any_of(pt.distinct_q.begin(), pt.distinct_q.end(),
                                    [&](double v) { return std::abs(v - mag) <= 1e-6; });
      if (!seen) pt.distinct_q.push_back(mag);
      if (!have || mag > pt.q_star) {
        pt.q_star = mag;
        pt.r_star = fp.r;
        have = true;
      }
    }
    std::sort(pt.distinct_q.begin(), pt.distinct_q.end());
    pt.converged = have;
    pt.branch = have && pt.q_star > options.fixed_point.eps_q ? Branch::Informative
                                                              : Branch::Uninformative;
    if (pt.branch == Branch::Uninformative) pt.q_star = 0.0;
    out[i] = std::move(pt);
  };

  const int workers =
      std::clamp(options.threads, 1, std::max(1, static_cast<int>(omegas.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < omegas.size(); ++i) solve_one(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mutex;
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < omegas.size(); i = next++) {
          try {
            solve_one(i);
          } catch (...) {
            std::lock_guard lock(mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

CriticalEstimate estimate_critical_omega(std::span<const SweepPoint> sweep, double eps_pt) {
  CriticalEstimate est;
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    if (sweep[i].converged && sweep[i].q_star > eps_pt) {
      est.omega_c = sweep[i].omega;
      if (i > 0) {
        est.uncertainty = sweep[i].omega - sweep[i - 1].omega;
      } else if (sweep.size() > 1) {
        est.uncertainty = sweep[1].omega - sweep[0].omega;
      }
      break;
    }
  }
  return est;
}

std::vector<double> linspace(double lo, double hi, int n) {
  require(n >= 1, ErrorCode::Config, "linspace: n must be >= 1");
  std::vector<double> v(static_cast<std::size_t>(n));
  if (n == 1) {
    v[0] = lo;
    return v;
  }
  for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
  v.back() = hi;
  return v;
}

}  // namespace ospca
