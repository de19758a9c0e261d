#pragma once

// Online estimator: Oja's rule with an optional element-wise soft
// threshold, plus the metrics recorded along a trajectory.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ospca/model.hpp"

namespace ospca {

struct Threshold {
  enum class Kind { None, Soft };

  Kind kind = Kind::None;
  double beta = 0.0;

  static Threshold none() { return {}; }
  static Threshold soft(double beta) { return {Kind::Soft, beta}; }

  bool is_none() const noexcept { return kind == Kind::None; }
};

/// phi(x): 0 for None, beta*sgn(x) for Soft, with sgn(0) = 0.
inline double phi_eval(double x, const Threshold& threshold) noexcept {
  if (threshold.kind == Threshold::Kind::None) return 0.0;
  return x > 0.0 ? threshold.beta : (x < 0.0 ? -threshold.beta : 0.0);
}

/// eta(x) = x - phi(x)/p, applied in place.
void eta_map(std::span<double> x, const Threshold& threshold, std::size_t p);
std::vector<double> eta_map(std::span<const double> x, const Threshold& threshold,
                            std::size_t p);

struct AlgoConfig {
  double tau = 0.5;
  Threshold threshold;

  void validate() const;
};

struct EstimateState {
  std::vector<double> x;
  std::uint64_t k = 0;
};

/// One update:  x~ = x + (tau/p) y (y^T x);  x' = sqrt(p) eta(x~)/||eta(x~)||.
/// Throws ErrorCode::DegenerateState when eta(x~) vanishes.
void oist_step(EstimateState& state, std::span<const double> y, const AlgoConfig& cfg);
EstimateState oist_step(const EstimateState& state, std::span<const double> y,
                        const AlgoConfig& cfg);

/// x^T xi / (||x|| ||xi||). Throws ErrorCode::Precondition on a zero vector.
double cosine_similarity(std::span<const double> x, std::span<const double> xi);

struct HistogramSpec {
  std::vector<double> edges;

  static HistogramSpec uniform(double lo, double hi, int bins);
  std::size_t bins() const noexcept { return edges.empty() ? 0 : edges.size() - 1; }
  double center(std::size_t b) const { return 0.5 * (edges[b] + edges[b + 1]); }
  double width(std::size_t b) const { return edges[b + 1] - edges[b]; }
  void validate() const;
};

/// Binned density of {x_i : xi_i == atom}. `empty` marks atoms with no
/// coordinate in range; their density is left at zero.
struct AtomHistogram {
  double xi_atom = 0.0;
  std::size_t in_range = 0;
  std::size_t out_of_range = 0;
  bool empty = true;
  std::vector<std::size_t> counts;
  std::vector<double> density;
};

std::vector<AtomHistogram> joint_histogram(std::span<const double> x,
                                           const SignalVector& signal,
                                           std::span<const Atom> atoms,
                                           const HistogramSpec& spec);

/// Pools several histograms of the same atom (counts are added).
AtomHistogram pool_histograms(std::span<const AtomHistogram> parts,
                              const HistogramSpec& spec);

/// Fraction of coordinates whose support estimate |x_i| > theta disagrees
/// with xi_i != 0.
double misclassification_rate(std::span<const double> x, std::span<const double> xi,
                              double theta);

/// i.i.d. law of the initial estimate entries.
struct InitialLaw {
  double mean = 0.70710678118654752;
  double variance = 0.5;
};

struct TrajectoryOptions {
  double t_max = 15.0;
  std::vector<double> record_times;     // rescaled times t = k/p
  std::vector<double> histogram_times;  // subset of times with histograms
  HistogramSpec bins;
  double theta = 0.0;  // misclassification threshold; <= 0 selects the default
  int replicas = 1;
  int first_replica = 0;
  int threads = 1;
};

struct TrajectoryPoint {
  double t = 0.0;
  std::uint64_t k = 0;
  double q = 0.0;
  double misclass = 0.0;
};

struct HistogramSnapshot {
  double t = 0.0;
  std::vector<AtomHistogram> atoms;
};

struct TrajectoryRecord {
  int replica = 0;
  std::uint64_t seed = 0;
  std::vector<TrajectoryPoint> points;
  std::vector<HistogramSnapshot> histograms;
};

/// Number of steps taken before time t is recorded: floor(p t).
std::uint64_t steps_at(double t, std::size_t p);

/// Default misclassification threshold: half the smallest nonzero |atom|,
/// or 1/(2 sqrt(rho)) for continuous priors.
double default_theta(const Prior& prior);

TrajectoryRecord run_replica(const Prior& prior, const SampleStreamConfig& stream,
                             const AlgoConfig& algo, const InitialLaw& x0,
                             const TrajectoryOptions& options, int replica);

/// Runs options.replicas independent replicas, each a deterministic
/// function of (stream.seed, replica id).
std::vector<TrajectoryRecord> run_trajectory(const Prior& prior,
                                             const SampleStreamConfig& stream,
                                             const AlgoConfig& algo,
                                             const InitialLaw& x0,
                                             const TrajectoryOptions& options);

struct SummaryRow {
  double t = 0.0;
  double q_mean = 0.0;
  double q_std = 0.0;  // sample standard deviation across replicas
  int n_replicas = 0;
};

std::vector<SummaryRow> summarize(std::span<const TrajectoryRecord> records);

}  // namespace ospca
