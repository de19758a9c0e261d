#include "ospca/model.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/random/normal_distribution.hpp>

#include "ospca/error.hpp"

namespace ospca {

namespace {

void check_rho(double rho) {
  require(std::isfinite(rho) && rho > 0.0 && rho <= 1.0, ErrorCode::Config,
          "prior: rho must lie in (0, 1], got " + std::to_string(rho));
}

}  // namespace

Prior Prior::two_point(double rho) {
  check_rho(rho);
  std::vector<Atom> atoms;
  if (rho < 1.0) atoms.push_back({0.0, 1.0 - rho});
  atoms.push_back({1.0 / std::sqrt(rho), rho});
  return Prior(PriorKind::TwoPoint, rho, std::move(atoms));
}

Prior Prior::signed_two_point(double rho) {
  check_rho(rho);
  const double a = 1.0 / std::sqrt(rho);
  std::vector<Atom> atoms;
  atoms.push_back({-a, rho / 2.0});
  if (rho < 1.0) atoms.push_back({0.0, 1.0 - rho});
  atoms.push_back({a, rho / 2.0});
  return Prior(PriorKind::TwoPoint, rho, std::move(atoms));
}

Prior Prior::bernoulli_gaussian(double rho) {
  check_rho(rho);
  return Prior(PriorKind::BernoulliGaussian, rho, {});
}

Prior Prior::discrete(std::vector<Atom> atoms) {
  require(!atoms.empty(), ErrorCode::Config, "prior: discrete prior needs atoms");
  double rho = 0.0;
  for (const auto& a : atoms) {
    require(std::isfinite(a.value) && std::isfinite(a.weight) && a.weight >= 0.0,
            ErrorCode::Config, "prior: atoms must have finite values and weights >= 0");
    if (a.value != 0.0) rho += a.weight;
  }
  Prior prior(PriorKind::DiscreteAtoms, rho, std::move(atoms));
  prior.validate();
  return prior;
}

double Prior::mean() const {
  if (kind_ == PriorKind::BernoulliGaussian) return 0.0;
  double m = 0.0;
  for (const auto& a : atoms_) m += a.weight * a.value;
  return m;
}

double Prior::second_moment() const {
  if (kind_ == PriorKind::BernoulliGaussian) return 1.0;
  double m = 0.0;
  for (const auto& a : atoms_) m += a.weight * a.value * a.value;
  return m;
}

double Prior::variance_of_square() const {
  double m4 = 0.0;
  if (kind_ == PriorKind::BernoulliGaussian) {
    m4 = rho_ * 3.0 / (rho_ * rho_);  // rho * E[N(0, 1/rho)^4]
  } else {
    for (const auto& a : atoms_) m4 += a.weight * std::pow(a.value, 4);
  }
  const double m2 = second_moment();
  return m4 - m2 * m2;
}

void Prior::validate() const {
  check_rho(rho_);
  if (kind_ == PriorKind::BernoulliGaussian) return;
  double total = 0.0;
  for (const auto& a : atoms_) total += a.weight;
  require(std::abs(total - 1.0) <= 1e-12, ErrorCode::Config,
          "prior: weights sum to " + std::to_string(total) + ", expected 1");
  const double m2 = second_moment();
  require(std::abs(m2 - 1.0) <= 1e-10, ErrorCode::Config,
          "prior: second moment is " + std::to_string(m2) + ", expected 1");
}

std::string Prior::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case PriorKind::TwoPoint: os << "two-point"; break;
    case PriorKind::BernoulliGaussian: os << "Bernoulli-Gaussian"; break;
    case PriorKind::DiscreteAtoms: os << "discrete"; break;
  }
  os << "(rho=" << rho_ << ", atoms=" << atoms_.size() << ")";
  return os.str();
}

GaussHermiteRule gauss_hermite(int n) {
  require(n >= 1, ErrorCode::Config, "gauss_hermite: need at least one node");
  // Newton iteration on the orthonormal Hermite recurrence; the initial
  // guesses are the classical asymptotic ones.
  const double pim4 = 1.0 / std::pow(std::numbers::pi, 0.25);
  GaussHermiteRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const int m = (n + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < m; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * rule.nodes[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * rule.nodes[1];
    } else {
      z = 2.0 * z - rule.nodes[i - 2];
    }
    double pp = 0.0;
    bool converged = false;
    for (int it = 0; it < 100; ++it) {
      double p1 = pim4;
      double p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) {
        converged = true;
        break;
      }
    }
    require(converged, ErrorCode::Numerical, "gauss_hermite: Newton iteration failed");
    rule.nodes[i] = z;
    rule.nodes[n - 1 - i] = -z;
    rule.weights[i] = 2.0 / (pp * pp);
    rule.weights[n - 1 - i] = rule.weights[i];
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

Prior discretize_prior(const Prior& prior, int n_nodes) {
  require(n_nodes >= 1, ErrorCode::Config, "discretize_prior: n_nodes must be >= 1");
  if (prior.is_discrete()) return prior;

  const double rho = prior.rho();
  const double sigma = 1.0 / std::sqrt(rho);
  const auto rule = gauss_hermite(n_nodes);
  std::vector<Atom> atoms;
  if (rho < 1.0) atoms.push_back({0.0, 1.0 - rho});
  const double inv_sqrt_pi = 1.0 / std::sqrt(std::numbers::pi);
  for (int k = 0; k < n_nodes; ++k) {
    atoms.push_back({std::sqrt(2.0) * sigma * rule.nodes[k], rho * rule.weights[k] * inv_sqrt_pi});
  }
  double total = 0.0;
  double m2 = 0.0;
  for (const auto& a : atoms) {
    total += a.weight;
    m2 += a.weight * a.value * a.value;
  }
  require(std::abs(m2 - 1.0) <= 1e-8 && std::abs(total - 1.0) <= 1e-12, ErrorCode::Numerical,
          "discretize_prior: quadrature inadequate with " + std::to_string(n_nodes) +
              " nodes (second moment " + std::to_string(m2) + ")");
  // Renormalize the last few ulps so the strict invariants hold.
  for (auto& a : atoms) a.weight /= total;
  return Prior::discrete(std::move(atoms));
}

double SignalVector::norm_squared() const {
  double s = 0.0;
  for (double v : xi) s += v * v;
  return s;
}

void SampleStreamConfig::validate() const {
  require(std::isfinite(omega) && omega >= 0.0, ErrorCode::Config,
          "model.omega must be >= 0");
  require(p >= 2, ErrorCode::Config, "model.p must be >= 2");
}

SignalVector draw_signal(const Prior& prior, std::size_t p, Xoshiro256pp& rng) {
  require(p >= 2, ErrorCode::Config, "draw_signal: p must be >= 2");
  prior.validate();
  SignalVector s;
  s.xi.resize(p);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (prior.kind() == PriorKind::BernoulliGaussian) {
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(prior.rho()));
    for (auto& v : s.xi) v = unif(rng) < prior.rho() ? normal(rng) : 0.0;
    return s;
  }
  const auto atoms = prior.atoms();
  for (auto& v : s.xi) {
    double u = unif(rng);
    std::size_t j = 0;
    while (j + 1 < atoms.size() && u >= atoms[j].weight) {
      u -= atoms[j].weight;
      ++j;
    }
    v = atoms[j].value;
  }
  return s;
}

SignalVector draw_signal(const Prior& prior, std::size_t p, std::uint64_t seed) {
  Xoshiro256pp rng(stream_key(seed, 0, StreamPurpose::Signal));
  return draw_signal(prior, p, rng);
}

void spiked_sample(std::span<const double> xi, double omega, double c,
                   std::span<const double> noise, std::span<double> y) {
  const std::size_t p = xi.size();
  require(p >= 2 && noise.size() == p && y.size() == p, ErrorCode::Precondition,
          "spiked_sample: length mismatch");
  const double s = std::sqrt(omega / static_cast<double>(p)) * c;
  for (std::size_t i = 0; i < p; ++i) y[i] = s * xi[i] + noise[i];
}

void next_sample(const SignalVector& signal, double omega, Xoshiro256pp& rng,
                 std::span<double> y) {
  boost::random::normal_distribution<double> normal;
  const double c = normal(rng);
  for (auto& v : y) v = normal(rng);
  spiked_sample(signal.xi, omega, c, y, y);
}

}  // namespace ospca
