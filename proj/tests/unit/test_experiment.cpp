#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ospca/error.hpp"
#include "ospca/experiment.hpp"

using namespace ospca;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an ospca::Error");
  return ErrorCode::Io;
}

const Table& table(const RunResult& r, const std::string& name) {
  for (const auto& t : r.tables) {
    if (t.name == name) return t;
  }
  FAIL("missing table " << name);
  return r.tables.front();
}

double number(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return *d;
  return static_cast<double>(std::get<std::int64_t>(c));
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ospca_unit_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("defaults are the reference experiment") {
  const ExperimentConfig c;
  CHECK(c.model.rho == 0.05);
  CHECK(c.algorithm.tau == 0.5);
  CHECK(c.algorithm.beta == 0.27);
  CHECK(c.model.omega == 1.0);
  CHECK(c.model.p == 10000);
  CHECK(c.simulation.replicas == 120);
  CHECK_NOTHROW(c.validate());
  CHECK(c.implied_initial_overlap() == doctest::Approx(std::sqrt(0.05 / 2.0)));
}

TEST_CASE("JSON round trip preserves the configuration") {
  ExperimentConfig c;
  c.model.prior = "discrete";
  c.model.atoms = {{0.0, 0.8}, {std::sqrt(5.0), 0.2}};
  c.pde.dt = 1e-4;
  c.simulation.theta = 0.7;
  c.threads = 3;
  const auto doc = config_to_json(c);
  const auto back = config_from_json(doc);
  CHECK(config_to_json(back) == doc);
  CHECK(back.pde.dt.value() == 1e-4);
  CHECK(back.model.atoms.size() == 2);
  CHECK(doc["pde"]["dt"] == 1e-4);
  CHECK(config_to_json(ExperimentConfig{})["pde"]["dt"] == "auto");
}

TEST_CASE("partial files override only what they name") {
  const auto c = config_from_json(nlohmann::json::parse(
      R"({"model": {"omega": 2.0}, "pde": {"dt": "auto", "n": 800}, "threads": 2})"));
  CHECK(c.model.omega == 2.0);
  CHECK(c.pde.n == 800);
  CHECK_FALSE(c.pde.dt.has_value());
  CHECK(c.threads == 2);
  CHECK(c.algorithm.beta == 0.27);
}

TEST_CASE("unknown keys and wrong types are configuration errors") {
  using nlohmann::json;
  CHECK(code_of([] { config_from_json(json::parse(R"({"modle": {}})")); }) == ErrorCode::Config);
  CHECK(code_of([] { config_from_json(json::parse(R"({"model": {"omgea": 1}})")); }) ==
        ErrorCode::Config);
  CHECK(code_of([] { config_from_json(json::parse(R"({"model": {"omega": "big"}})")); }) ==
        ErrorCode::Config);
}

TEST_CASE("overrides parse JSON values and reject unknown keys") {
  ExperimentConfig c;
  apply_override(c, "model.omega=0.3");
  apply_override(c, "algorithm.threshold=none");
  apply_override(c, "simulation.record_times=[0, 1, 2]");
  apply_override(c, "threads", "4");
  CHECK(c.model.omega == 0.3);
  CHECK(c.algorithm.threshold == "none");
  CHECK(c.simulation.record_times.size() == 3);
  CHECK(c.threads == 4);
  CHECK(code_of([&] { apply_override(c, "model.nope=1"); }) == ErrorCode::Config);
  CHECK(code_of([&] { apply_override(c, "no_equals_sign"); }) == ErrorCode::Config);
}

TEST_CASE("validation names the offending field") {
  ExperimentConfig c;
  c.algorithm.tau = -1.0;
  try {
    c.validate();
    FAIL("expected a configuration error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Config);
    CHECK(std::string(e.what()).find("algorithm.tau") != std::string::npos);
  }
  ExperimentConfig d;
  d.output.format = "xml";
  CHECK(code_of([&] { d.validate(); }) == ErrorCode::Config);
  ExperimentConfig e;
  e.pde.record_times = {20.0};
  CHECK(code_of([&] { e.validate(); }) == ErrorCode::Config);
}

TEST_CASE("numbers are written with 17 significant digits") {
  CHECK(format_number(0.1) == "0.10000000000000001");
  CHECK(format_number(1.0) == "1");
  CHECK(format_number(-2.5e-20) == "-2.4999999999999999e-20");
  CHECK(std::stod(format_number(std::numbers::sqrt2)) == std::numbers::sqrt2);
}

TEST_CASE("CSV has a header and quotes text when needed") {
  Table t{"x", {"a", "b", "c"}, {{1.5, std::int64_t{2}, std::string("p,q")}}};
  CHECK(to_csv(t) == "a,b,c\n1.5,2,\"p,q\"\n");
  const auto j = to_json(t);
  CHECK(j["columns"].size() == 3);
  CHECK(j["rows"][0][1] == 2);
}

TEST_CASE("simulate without steps records the initial overlap") {
  ExperimentConfig c;
  c.simulation.replicas = 1;
  c.simulation.t_max = 0.0;
  c.simulation.histogram_times = {};
  c.model.p = 10000;
  const auto r = cmd_simulate(c);
  const auto& traj = table(r, "trajectory");
  REQUIRE(traj.rows.size() == 1);
  CHECK(number(traj.rows[0][1]) == 0.0);
  CHECK(std::abs(number(traj.rows[0][2]) - std::sqrt(0.05 / 2.0)) <= 0.03);
  CHECK(table(r, "summary").columns ==
        std::vector<std::string>{"t", "Q_mean", "Q_std", "n_replicas"});
  CHECK(table(r, "histograms").columns ==
        std::vector<std::string>{"replica", "t", "xi_atom", "bin_center", "density"});
}

TEST_CASE("simulate warns when the initial overlap vanishes") {
  ExperimentConfig c;
  c.model.prior = "two_point_signed";
  c.simulation.replicas = 1;
  c.simulation.t_max = 0.0;
  c.simulation.histogram_times = {};
  c.model.p = 200;
  const auto r = cmd_simulate(c);
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("pde and oja-theory refuse a zero initial overlap") {
  ExperimentConfig c;
  c.simulation.x0_mean = 0.0;
  CHECK(code_of([&] { cmd_pde(c); }) == ErrorCode::Config);
  CHECK(code_of([&] { cmd_oja_theory(c); }) == ErrorCode::Config);
  c.oja.q0 = 0.2;
  CHECK_NOTHROW(cmd_oja_theory(c));
}

TEST_CASE("oja-theory curve plateaus at the steady state") {
  ExperimentConfig c;
  c.oja.t_max = 60.0;
  const auto r = cmd_oja_theory(c);
  const auto& t = table(r, "oja_theory");
  CHECK(number(t.rows.front()[1]) == doctest::Approx(std::sqrt(0.05 / 2.0)).epsilon(1e-12));
  for (std::size_t i = 1; i < t.rows.size(); ++i) {
    CHECK(number(t.rows[i][1]) >= number(t.rows[i - 1][1]));
    if (number(t.rows[i][0]) <= 15.0) CHECK(number(t.rows[i][1]) > number(t.rows[i - 1][1]));
  }
  CHECK(std::abs(number(t.rows.back()[1]) - 0.77460) <= 1e-5);
}

TEST_CASE("pde without thresholding agrees with oja-theory") {
  ExperimentConfig c;
  c.algorithm.threshold = "none";
  c.pde.record_times = {};
  const auto pde = table(cmd_pde(c), "moments");
  const auto theory = table(cmd_oja_theory(c), "oja_theory");
  REQUIRE(pde.rows.size() == theory.rows.size());
  for (std::size_t i = 0; i < pde.rows.size(); ++i) {
    CHECK(number(pde.rows[i][0]) == doctest::Approx(number(theory.rows[i][0])));
    CHECK(std::abs(number(pde.rows[i][1]) - number(theory.rows[i][1])) <= 5e-3);
  }
}

TEST_CASE("pde records the resolved step") {
  ExperimentConfig c;
  c.pde.t_max = 0.5;
  c.pde.record_times = {0.5};
  const auto r = cmd_pde(c);
  CHECK(r.details["dt"]["mode"] == "auto");
  CHECK(r.details["dt"]["max"].get<double>() > 0.0);
  CHECK(table(r, "densities").rows.size() == 2 * 700);
}

TEST_CASE("steady at low signal is uninformative with a Laplace density") {
  ExperimentConfig c;
  c.model.omega = 0.15;
  c.steady.density = true;
  const auto r = cmd_steady(c);
  for (const auto& row : table(r, "steady").rows) {
    CHECK(std::get<std::string>(row[4]) == "uninformative");
  }
  const auto& dens = table(r, "steady_density");
  for (const auto& row : dens.rows) {
    const double x = number(row[1]);
    CHECK(number(row[2]) == doctest::Approx(1.08 * std::exp(-2.16 * std::abs(x))).epsilon(1e-8));
  }
}

TEST_CASE("sweep reports both curves and critical values") {
  ExperimentConfig c;
  const auto r = cmd_sweep(c);
  CHECK(table(r, "sweep").rows.size() == 40);
  CHECK(table(r, "sweep_oja").rows.size() == 40);
  CHECK(r.details["critical"]["omega_c"].get<double>() < 0.25);
}

TEST_CASE("results are written with a manifest") {
  ExperimentConfig c;
  c.output.directory = scratch_dir("write").string();
  const auto r = cmd_oja_theory(c);
  write_result(r, c, 0.25);
  const auto manifest = nlohmann::json::parse(slurp(fs::path(c.output.directory) / "manifest.json"));
  CHECK(manifest["command"] == "oja-theory");
  CHECK(manifest["version"] == version());
  CHECK(manifest["seed"] == 1);
  CHECK(manifest["wall_seconds"] == 0.25);
  CHECK(manifest["config"] == config_to_json(c));
  const auto csv = slurp(fs::path(c.output.directory) / "oja_theory.csv");
  CHECK(csv.rfind("t,Q\n", 0) == 0);

  c.output.format = "json";
  write_result(r, c, 0.0);
  const auto j = nlohmann::json::parse(slurp(fs::path(c.output.directory) / "oja_theory.json"));
  CHECK(j["columns"] == nlohmann::json::array({"t", "Q"}));
  fs::remove_all(c.output.directory);
}

TEST_CASE("unknown command") {
  CHECK(code_of([] { run_command(ExperimentConfig{}, "plot"); }) == ErrorCode::Config);
}

}  // TEST_SUITE
