// Command-line front end. Talks to the library only through the C API.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ospca/ospca.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

int exit_code(ospca_status status) {
  switch (status) {
    case OSPCA_OK:
      return kExitOk;
    case OSPCA_ERR_CONFIG:
    case OSPCA_ERR_INVALID_ARGUMENT:
      return kExitConfig;
    case OSPCA_ERR_NUMERICAL:
      return kExitNumerical;
    case OSPCA_ERR_IO:
      return kExitIo;
    case OSPCA_ERR_INTERNAL:
      return kExitInternal;
  }
  return kExitInternal;
}

std::string json_string(const std::string& raw) {
  std::string out = "\"";
  for (char ch : raw) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out + "\"";
}

int report(ospca_status status) {
  std::fprintf(stderr, "ospca: %s: %s\n", ospca_status_string(status), ospca_last_error());
  return exit_code(status);
}

struct Options {
  std::string config_path;
  std::string output_dir;
  std::string seed;
  std::string threads;
  std::string format;
  std::vector<std::string> overrides;
  bool density = false;
};

class ConfigHandle {
 public:
  ~ConfigHandle() { ospca_config_destroy(ptr); }
  ospca_config* ptr = nullptr;
};

class ResultHandle {
 public:
  ~ResultHandle() { ospca_result_destroy(ptr); }
  ospca_result* ptr = nullptr;
};

int run(const std::string& command, const Options& opt) {
  ConfigHandle cfg;
  ospca_status st = opt.config_path.empty() ? ospca_config_create(&cfg.ptr)
                                            : ospca_config_load(opt.config_path.c_str(), &cfg.ptr);
  if (st != OSPCA_OK) return report(st);

  for (const auto& assignment : opt.overrides) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::fprintf(stderr, "ospca: --set expects section.key=value, got \"%s\"\n",
                   assignment.c_str());
      return kExitConfig;
    }
    const std::string key = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    if ((st = ospca_config_set(cfg.ptr, key.c_str(), value.c_str())) != OSPCA_OK) {
      return report(st);
    }
  }

  const std::pair<const char*, const std::string*> flags[] = {
      {"output.directory", &opt.output_dir},
      {"simulation.seed", &opt.seed},
      {"threads", &opt.threads},
  };
  for (const auto& [key, value] : flags) {
    if (value->empty()) continue;
    const std::string text =
        std::string(key) == "output.directory" ? json_string(*value) : *value;
    if ((st = ospca_config_set(cfg.ptr, key, text.c_str())) != OSPCA_OK) return report(st);
  }
  if (!opt.format.empty() &&
      (st = ospca_config_set(cfg.ptr, "output.format", opt.format.c_str())) != OSPCA_OK) {
    return report(st);
  }
  if (opt.density && (st = ospca_config_set(cfg.ptr, "steady.density", "true")) != OSPCA_OK) {
    return report(st);
  }
  if ((st = ospca_config_validate(cfg.ptr)) != OSPCA_OK) return report(st);

  const auto start = std::chrono::steady_clock::now();
  ResultHandle result;
  if ((st = ospca_run(cfg.ptr, command.c_str(), &result.ptr)) != OSPCA_OK) return report(st);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  for (size_t i = 0; i < ospca_result_warning_count(result.ptr); ++i) {
    std::fprintf(stderr, "ospca: warning: %s\n", ospca_result_warning(result.ptr, i));
  }
  if ((st = ospca_result_write(result.ptr, cfg.ptr, wall)) != OSPCA_OK) return report(st);

  for (size_t t = 0; t < ospca_result_table_count(result.ptr); ++t) {
    size_t rows = 0;
    size_t cols = 0;
    ospca_result_table_shape(result.ptr, t, &rows, &cols);
    std::printf("%s: %zu rows\n", ospca_result_table_name(result.ptr, t), rows);
  }
  std::printf("%s finished in %.3f s\n", command.c_str(), wall);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online sparse PCA: simulation, limiting PDE, closed forms and steady states"};
  app.set_version_flag("--version", std::string(ospca_version()));
  app.require_subcommand(1);

  Options opt;
  app.add_option("--config", opt.config_path, "JSON configuration file")
      ->check(CLI::ExistingFile);
  app.add_option("--output", opt.output_dir, "output directory");
  app.add_option("--seed", opt.seed, "base random seed")->check(CLI::NonNegativeNumber);
  app.add_option("--threads", opt.threads, "worker thread cap")->check(CLI::PositiveNumber);
  app.add_option("--format", opt.format, "table format")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--set", opt.overrides, "override a configuration value: section.key=value")
      ->take_all();

  const std::pair<const char*, const char*> commands[] = {
      {"simulate", "Monte Carlo runs of the online estimator"},
      {"pde", "finite-volume solution of the limiting equations"},
      {"oja-theory", "closed-form overlap dynamics without thresholding"},
      {"steady", "fixed points of the steady-state equations"},
      {"sweep", "steady-state overlap across signal-to-noise ratios"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    if (std::string(name) == "steady") {
      sub->add_flag("--density", opt.density, "also write the stationary densities");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  return run(app.get_subcommands().front()->get_name(), opt);
}
