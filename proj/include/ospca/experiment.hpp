#pragma once

// Declarative experiment configuration and the five commands that turn a
// configuration into result tables.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ospca/model.hpp"
#include "ospca/online_sim.hpp"
#include "ospca/pde_limit.hpp"
#include "ospca/steady_state.hpp"

namespace ospca {

struct ExperimentConfig {
  struct Model {
    std::string prior = "two_point";  // two_point | two_point_signed | bernoulli_gaussian | discrete
    double rho = 0.05;
    std::vector<Atom> atoms;  // discrete only
    double omega = 1.0;
    std::size_t p = 10000;
    int quadrature_nodes = 21;
  } model;

  struct Algorithm {
    double tau = 0.5;
    std::string threshold = "soft";  // none | soft
    double beta = 0.27;
  } algorithm;

  struct Simulation {
    double t_max = 15.0;
    int replicas = 120;
    std::uint64_t seed = 1;
    std::vector<double> record_times;  // empty: every record_interval
    double record_interval = 0.5;
    std::vector<double> histogram_times{1.0, 15.0};
    std::optional<double> histogram_min;  // default -2
    std::optional<double> histogram_max;  // default 2 + 1/sqrt(rho)
    int histogram_bins = 101;
    std::optional<double> theta;
    double x0_mean = 0.70710678118654752;
    double x0_variance = 0.5;
  } simulation;

  struct Pde {
    double x_min = -6.0;
    double x_max = 8.0;
    int n = 700;
    std::optional<double> dt;  // empty = "auto"
    double cfl = 0.9;
    double t_max = 15.0;
    std::vector<double> record_times{1.0, 15.0};
    double moments_interval = 0.05;
    std::string scheme = "exponential";  // exponential | upwind
  } pde;

  struct Oja {
    std::optional<double> q0;  // default: overlap implied by the x0 law
    double t_max = 15.0;
    double interval = 0.05;
  } oja;

  struct Steady {
    std::vector<double> init_q{0.2, 0.5, 0.9};
    double init_h = 3e-3;
    double damping = 0.5;
    double tol = 1e-10;
    int max_iter = 10000;
    bool density = false;
    double density_x_min = -4.0;
    double density_x_max = 8.0;
    int density_n = 1201;
  } steady;

  struct Sweep {
    double omega_min = 0.05;
    double omega_max = 1.0;
    int n_points = 40;
  } sweep;

  struct Output {
    std::string directory = "out";
    std::string format = "csv";  // csv | json
  } output;

  int threads = 1;

  /// Checks every module precondition; throws ErrorCode::Config naming the field.
  void validate() const;

  Prior prior() const;
  Threshold threshold() const;
  AlgoConfig algo() const;
  SteadyConfig steady_config() const;
  PdeConfig pde_config() const;
  InitialLaw initial_law() const;
  /// Cosine similarity implied by the x0 law: mean E[xi] / sqrt(mean^2 + var).
  double implied_initial_overlap() const;
};

ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies a "section.key=value" override; the value is parsed as JSON
/// when possible and as a bare string otherwise.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);
void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value);

using Cell = std::variant<double, std::int64_t, std::string>;

struct Table {
  std::string name;  // file stem, e.g. "trajectory"
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

struct RunResult {
  std::string command;
  std::vector<Table> tables;
  std::vector<std::string> warnings;
  nlohmann::json details;  // solver diagnostics recorded in the manifest
};

RunResult cmd_simulate(const ExperimentConfig& cfg);
RunResult cmd_pde(const ExperimentConfig& cfg);
RunResult cmd_oja_theory(const ExperimentConfig& cfg);
RunResult cmd_steady(const ExperimentConfig& cfg);
RunResult cmd_sweep(const ExperimentConfig& cfg);

/// Dispatches on "simulate" | "pde" | "oja-theory" | "steady" | "sweep".
RunResult run_command(const ExperimentConfig& cfg, const std::string& command);

/// printf("%.17g"); nan and inf are spelled out.
std::string format_number(double value);

std::string to_csv(const Table& table);
nlohmann::json to_json(const Table& table);

/// Writes one file per table plus manifest.json into cfg.output.directory.
void write_result(const RunResult& result, const ExperimentConfig& cfg,
                  double wall_seconds);

const char* version() noexcept;

}  // namespace ospca
