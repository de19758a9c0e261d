#pragma once

// Sparse prior, signal generation and the spiked-covariance sample stream.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ospca/rng.hpp"

namespace ospca {

enum class PriorKind { TwoPoint, BernoulliGaussian, DiscreteAtoms };

struct Atom {
  double value = 0.0;
  double weight = 0.0;
};

/// Marginal law of one coordinate of the spike:
///   (1 - rho) * delta(xi) + rho * u(xi),  with  E[xi^2] = 1.
/// Discrete priors carry explicit atoms; BernoulliGaussian uses
/// u = N(0, 1/rho) and gets atoms only through discretize_prior().
class Prior {
 public:
  /// (1 - rho) at 0, rho at +1/sqrt(rho).
  static Prior two_point(double rho);
  /// (1 - rho) at 0, rho/2 at each of +-1/sqrt(rho).
  static Prior signed_two_point(double rho);
  static Prior bernoulli_gaussian(double rho);
  /// Arbitrary atoms; rho is the total weight of the nonzero atoms.
  static Prior discrete(std::vector<Atom> atoms);

  PriorKind kind() const noexcept { return kind_; }
  double rho() const noexcept { return rho_; }
  bool is_discrete() const noexcept { return kind_ != PriorKind::BernoulliGaussian; }
  std::span<const Atom> atoms() const noexcept { return atoms_; }

  double mean() const;
  double second_moment() const;
  /// Var(xi^2); used for concentration bounds on ||xi||^2 / p.
  double variance_of_square() const;

  /// Throws ErrorCode::Config when the weights or the second moment are off.
  void validate() const;

  std::string describe() const;

 private:
  Prior(PriorKind kind, double rho, std::vector<Atom> atoms)
      : kind_(kind), rho_(rho), atoms_(std::move(atoms)) {}

  PriorKind kind_;
  double rho_;
  std::vector<Atom> atoms_;
};

/// Gauss-Hermite rule for the weight exp(-t^2).
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

GaussHermiteRule gauss_hermite(int n_nodes);

/// Replaces the Gaussian part of a Bernoulli-Gaussian prior by n_nodes
/// Gauss-Hermite atoms; discrete priors are returned unchanged.
Prior discretize_prior(const Prior& prior, int n_nodes);

struct SignalVector {
  std::vector<double> xi;

  std::size_t p() const noexcept { return xi.size(); }
  double norm_squared() const;
};

struct SampleStreamConfig {
  double omega = 1.0;
  std::size_t p = 10000;
  std::uint64_t seed = 1;

  void validate() const;
};

SignalVector draw_signal(const Prior& prior, std::size_t p, Xoshiro256pp& rng);
SignalVector draw_signal(const Prior& prior, std::size_t p, std::uint64_t seed);

/// y = sqrt(omega/p) * c * xi + a. `noise` may alias `y`.
void spiked_sample(std::span<const double> xi, double omega, double c,
                   std::span<const double> noise, std::span<double> y);

/// Draws c ~ N(0,1) and a ~ N(0, I_p) from `rng` and writes one sample into y.
void next_sample(const SignalVector& signal, double omega, Xoshiro256pp& rng,
                 std::span<double> y);

}  // namespace ospca
