#include "ospca/online_sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

#include "ospca/error.hpp"

namespace ospca {

void eta_map(std::span<double> x, const Threshold& threshold, std::size_t p) {
  require(p >= 2, ErrorCode::Precondition, "eta_map: p must be >= 2");
  if (threshold.is_none()) return;
  const double inv_p = 1.0 / static_cast<double>(p);
  for (auto& v : x) v -= phi_eval(v, threshold) * inv_p;
}

std::vector<double> eta_map(std::span<const double> x, const Threshold& threshold,
                            std::size_t p) {
  std::vector<double> out(x.begin(), x.end());
  eta_map(std::span<double>(out), threshold, p);
  return out;
}

void AlgoConfig::validate() const {
  require(std::isfinite(tau) && tau > 0.0, ErrorCode::Config, "algorithm.tau must be > 0");
  require(threshold.is_none() || (std::isfinite(threshold.beta) && threshold.beta >= 0.0),
          ErrorCode::Config, "algorithm.beta must be >= 0");
}

void oist_step(EstimateState& state, std::span<const double> y, const AlgoConfig& cfg) {
  auto& x = state.x;
  const std::size_t p = x.size();
  require(p >= 2 && y.size() == p, ErrorCode::Precondition, "oist_step: length mismatch");

  double proj = 0.0;
  for (std::size_t i = 0; i < p; ++i) proj += y[i] * x[i];
  const double pd = static_cast<double>(p);
  const double gain = cfg.tau / pd * proj;

  double norm2 = 0.0;
  if (cfg.threshold.is_none()) {
    for (std::size_t i = 0; i < p; ++i) {
      const double v = x[i] + gain * y[i];
      x[i] = v;
      norm2 += v * v;
    }
  } else {
    const double shrink = cfg.threshold.beta / pd;
    for (std::size_t i = 0; i < p; ++i) {
      double v = x[i] + gain * y[i];
      v -= v > 0.0 ? shrink : (v < 0.0 ? -shrink : 0.0);
      x[i] = v;
      norm2 += v * v;
    }
  }
  if (!(norm2 > 0.0) || !std::isfinite(norm2)) {
    fail(ErrorCode::DegenerateState,
         "oist_step: estimate vanished after thresholding at step " +
             std::to_string(state.k + 1));
  }
  const double scale = std::sqrt(pd / norm2);
  for (auto& v : x) v *= scale;
  ++state.k;
}

EstimateState oist_step(const EstimateState& state, std::span<const double> y,
                        const AlgoConfig& cfg) {
  EstimateState next = state;
  oist_step(next, y, cfg);
  return next;
}

double cosine_similarity(std::span<const double> x, std::span<const double> xi) {
  require(x.size() == xi.size(), ErrorCode::Precondition, "cosine_similarity: length mismatch");
  double xx = 0.0;
  double ss = 0.0;
  double xs = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx += x[i] * x[i];
    ss += xi[i] * xi[i];
    xs += x[i] * xi[i];
  }
  require(xx > 0.0 && ss > 0.0, ErrorCode::Precondition,
          "cosine_similarity: undefined for a zero vector");
  return std::clamp(xs / std::sqrt(xx * ss), -1.0, 1.0);
}

HistogramSpec HistogramSpec::uniform(double lo, double hi, int bins) {
  require(bins >= 1 && std::isfinite(lo) && std::isfinite(hi) && hi > lo, ErrorCode::Config,
          "histogram: need bins >= 1 and hi > lo");
  HistogramSpec spec;
  spec.edges.resize(bins + 1);
  for (int b = 0; b <= bins; ++b) spec.edges[b] = lo + (hi - lo) * b / bins;
  return spec;
}

void HistogramSpec::validate() const {
  require(edges.size() >= 2, ErrorCode::Config, "histogram: need at least one bin");
  for (std::size_t b = 1; b < edges.size(); ++b) {
    require(edges[b] > edges[b - 1], ErrorCode::Config,
            "histogram: bin edges must be strictly increasing");
  }
}

namespace {

void finish_density(AtomHistogram& h, const HistogramSpec& spec) {
  h.density.assign(spec.bins(), 0.0);
  h.empty = h.in_range == 0;
  if (h.empty) return;
  for (std::size_t b = 0; b < spec.bins(); ++b) {
    h.density[b] = static_cast<double>(h.counts[b]) /
                   (static_cast<double>(h.in_range) * spec.width(b));
  }
}

}  // namespace

std::vector<AtomHistogram> joint_histogram(std::span<const double> x,
                                           const SignalVector& signal,
                                           std::span<const Atom> atoms,
                                           const HistogramSpec& spec) {
  spec.validate();
  require(x.size() == signal.p(), ErrorCode::Precondition, "joint_histogram: length mismatch");
  std::vector<AtomHistogram> out(atoms.size());
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    out[j].xi_atom = atoms[j].value;
    out[j].counts.assign(spec.bins(), 0);
  }
  const double lo = spec.edges.front();
  const double hi = spec.edges.back();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto it = std::find_if(atoms.begin(), atoms.end(),
                                 [&](const Atom& a) { return a.value == signal.xi[i]; });
    require(it != atoms.end(), ErrorCode::Precondition,
            "joint_histogram: signal entry is not an atom of the prior");
    auto& h = out[static_cast<std::size_t>(it - atoms.begin())];
    const double v = x[i];
    if (!(v >= lo && v <= hi)) {
      ++h.out_of_range;
      continue;
    }
    auto b = static_cast<std::size_t>(
        std::upper_bound(spec.edges.begin(), spec.edges.end(), v) - spec.edges.begin());
    b = std::min(b == 0 ? 0 : b - 1, spec.bins() - 1);
    ++h.counts[b];
    ++h.in_range;
  }
  for (auto& h : out) finish_density(h, spec);
  return out;
}

AtomHistogram pool_histograms(std::span<const AtomHistogram> parts, const HistogramSpec& spec) {
  AtomHistogram pooled;
  pooled.counts.assign(spec.bins(), 0);
  for (const auto& part : parts) {
    require(part.counts.size() == spec.bins(), ErrorCode::Precondition,
            "pool_histograms: bin count mismatch");
    pooled.xi_atom = part.xi_atom;
    pooled.in_range += part.in_range;
    pooled.out_of_range += part.out_of_range;
    for (std::size_t b = 0; b < spec.bins(); ++b) pooled.counts[b] += part.counts[b];
  }
  finish_density(pooled, spec);
  return pooled;
}

double misclassification_rate(std::span<const double> x, std::span<const double> xi,
                              double theta) {
  require(theta > 0.0, ErrorCode::Precondition, "misclassification_rate: theta must be > 0");
  require(x.size() == xi.size() && !x.empty(), ErrorCode::Precondition,
          "misclassification_rate: length mismatch");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool detected = std::abs(x[i]) > theta;
    const bool support = xi[i] != 0.0;
    if (detected != support) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(x.size());
}

std::uint64_t steps_at(double t, std::size_t p) {
  require(t >= 0.0, ErrorCode::Precondition, "steps_at: t must be >= 0");
  // Relative slack so that e.g. t = 0.1, p = 10 gives exactly one step.
  return static_cast<std::uint64_t>(std::floor(t * static_cast<double>(p) * (1.0 + 1e-12)));
}

double default_theta(const Prior& prior) {
  if (!prior.is_discrete()) return 0.5 / std::sqrt(prior.rho());
  double smallest = 0.0;
  for (const auto& a : prior.atoms()) {
    if (a.value != 0.0 && a.weight > 0.0 &&
        (smallest == 0.0 || std::abs(a.value) < smallest)) {
      smallest = std::abs(a.value);
    }
  }
  return smallest > 0.0 ? 0.5 * smallest : 0.5 / std::sqrt(prior.rho());
}

TrajectoryRecord run_replica(const Prior& prior, const SampleStreamConfig& stream,
                             const AlgoConfig& algo, const InitialLaw& x0,
                             const TrajectoryOptions& options, int replica) {
  stream.validate();
  algo.validate();
  require(x0.variance >= 0.0 && std::isfinite(x0.mean), ErrorCode::Config,
          "simulation: invalid initial law");
  require(options.t_max >= 0.0, ErrorCode::Config, "simulation.t_max must be >= 0");
  const std::size_t p = stream.p;
  const auto rep = static_cast<std::uint64_t>(replica);

  TrajectoryRecord record;
  record.replica = replica;
  record.seed = stream.seed;

  Xoshiro256pp signal_rng(stream_key(stream.seed, rep, StreamPurpose::Signal));
  const SignalVector signal = draw_signal(prior, p, signal_rng);

  EstimateState state;
  state.x.resize(p);
  {
    Xoshiro256pp init_rng(stream_key(stream.seed, rep, StreamPurpose::InitialEstimate));
    std::normal_distribution<double> normal(x0.mean, std::sqrt(x0.variance));
    double norm2 = 0.0;
    for (auto& v : state.x) {
      v = normal(init_rng);
      norm2 += v * v;
    }
    require(norm2 > 0.0, ErrorCode::Config, "simulation: initial estimate is zero");
    const double scale = std::sqrt(static_cast<double>(p) / norm2);
    for (auto& v : state.x) v *= scale;
  }

  const double theta = options.theta > 0.0 ? options.theta : default_theta(prior);
  const std::uint64_t total_steps = steps_at(options.t_max, p);

  struct Checkpoint {
    std::uint64_t k;
    double t;
    bool metrics;
    bool histogram;
  };
  std::vector<Checkpoint> checkpoints;
  for (double t : options.record_times) {
    if (t <= options.t_max + 1e-12) checkpoints.push_back({steps_at(t, p), t, true, false});
  }
  for (double t : options.histogram_times) {
    if (t <= options.t_max + 1e-12) checkpoints.push_back({steps_at(t, p), t, false, true});
  }
  std::stable_sort(checkpoints.begin(), checkpoints.end(),
                   [](const Checkpoint& a, const Checkpoint& b) { return a.k < b.k; });

  const bool discrete = prior.is_discrete();
  auto visit = [&](const Checkpoint& cp) {
    if (cp.metrics) {
      record.points.push_back({cp.t, state.k, cosine_similarity(state.x, signal.xi),
                               misclassification_rate(state.x, signal.xi, theta)});
    }
    if (cp.histogram && discrete) {
      record.histograms.push_back(
          {cp.t, joint_histogram(state.x, signal, prior.atoms(), options.bins)});
    }
  };

  std::vector<double> y(p);
  std::size_t next = 0;
  while (next < checkpoints.size() && checkpoints[next].k == 0) visit(checkpoints[next++]);
  try {
    for (std::uint64_t k = 1; k <= total_steps; ++k) {
      Xoshiro256pp rng(stream_key(stream.seed, rep, StreamPurpose::Sample, k));
      next_sample(signal, stream.omega, rng, y);
      oist_step(state, y, algo);
      while (next < checkpoints.size() && checkpoints[next].k == k) visit(checkpoints[next++]);
    }
  } catch (const Error& e) {
    fail(e.code(), "replica " + std::to_string(replica) + ": " + e.what());
  }
  return record;
}

std::vector<TrajectoryRecord> run_trajectory(const Prior& prior,
                                             const SampleStreamConfig& stream,
                                             const AlgoConfig& algo, const InitialLaw& x0,
                                             const TrajectoryOptions& options) {
  require(options.replicas >= 1, ErrorCode::Config, "simulation.replicas must be >= 1");
  std::vector<TrajectoryRecord> out(static_cast<std::size_t>(options.replicas));
  const int workers = std::clamp(options.threads, 1, options.replicas);

  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int r = next++; r < options.replicas; r = next++) {
      try {
        out[static_cast<std::size_t>(r)] =
            run_replica(prior, stream, algo, x0, options, options.first_replica + r);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

std::vector<SummaryRow> summarize(std::span<const TrajectoryRecord> records) {
  std::vector<SummaryRow> rows;
  if (records.empty()) return rows;
  const std::size_t n_points = records.front().points.size();
  for (const auto& r : records) {
    require(r.points.size() == n_points, ErrorCode::Precondition,
            "summarize: replicas recorded different time grids");
  }
  const int n = static_cast<int>(records.size());
  for (std::size_t i = 0; i < n_points; ++i) {
    double mean = 0.0;
    for (const auto& r : records) mean += r.points[i].q;
    mean /= n;
    double var = 0.0;
    for (const auto& r : records) var += (r.points[i].q - mean) * (r.points[i].q - mean);
    var = n > 1 ? var / (n - 1) : 0.0;
    rows.push_back({records.front().points[i].t, mean, std::sqrt(var), n});
  }
  return rows;
}

}  // namespace ospca
