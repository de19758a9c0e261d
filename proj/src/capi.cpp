#include "ospca/ospca.h"

#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>

#include "ospca/error.hpp"
#include "ospca/experiment.hpp"
#include "ospca/oja_analytic.hpp"
#include "ospca/special.hpp"
#include "ospca/steady_state.hpp"

struct ospca_config {
  ospca::ExperimentConfig cfg;
};

struct ospca_result {
  ospca::RunResult run;
  // Cell text is materialized on demand and kept alive for the caller.
  mutable std::string scratch;
};

namespace {

thread_local std::string last_error;

ospca_status status_for(ospca::ErrorCode code) {
  switch (code) {
    case ospca::ErrorCode::Config:
      return OSPCA_ERR_CONFIG;
    case ospca::ErrorCode::Precondition:
      return OSPCA_ERR_INVALID_ARGUMENT;
    case ospca::ErrorCode::Numerical:
    case ospca::ErrorCode::DegenerateState:
    case ospca::ErrorCode::StepSize:
      return OSPCA_ERR_NUMERICAL;
    case ospca::ErrorCode::Io:
      return OSPCA_ERR_IO;
  }
  return OSPCA_ERR_INTERNAL;
}

ospca_status set_error(ospca_status status, const std::string& message) {
  last_error = message;
  return status;
}

template <class F>
ospca_status guarded(F&& body) {
  try {
    body();
    return OSPCA_OK;
  } catch (const ospca::Error& e) {
    return set_error(status_for(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(OSPCA_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(OSPCA_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(OSPCA_ERR_INTERNAL, "unknown error");
  }
}

ospca_status null_argument(const char* name) {
  return set_error(OSPCA_ERR_INVALID_ARGUMENT, std::string(name) + " must not be NULL");
}

const ospca::Table* table_at(const ospca_result* result, size_t table) {
  if (!result || table >= result->run.tables.size()) return nullptr;
  return &result->run.tables[table];
}

const ospca::Cell* cell_at(const ospca_result* result, size_t table, size_t row,
                           size_t column) {
  const auto* t = table_at(result, table);
  if (!t || row >= t->rows.size() || column >= t->rows[row].size()) return nullptr;
  return &t->rows[row][column];
}

}  // namespace

extern "C" {

const char* ospca_version(void) { return ospca::version(); }

const char* ospca_last_error(void) { return last_error.c_str(); }

const char* ospca_status_string(ospca_status status) {
  switch (status) {
    case OSPCA_OK:
      return "ok";
    case OSPCA_ERR_INVALID_ARGUMENT:
      return "invalid argument";
    case OSPCA_ERR_CONFIG:
      return "configuration error";
    case OSPCA_ERR_NUMERICAL:
      return "numerical failure";
    case OSPCA_ERR_IO:
      return "i/o error";
    case OSPCA_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

ospca_status ospca_config_create(ospca_config** out) {
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] { *out = new ospca_config{}; });
}

ospca_status ospca_config_load(const char* path, ospca_config** out) {
  if (!path) return null_argument("path");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] { *out = new ospca_config{ospca::load_config(path)}; });
}

ospca_status ospca_config_parse(const char* json, ospca_config** out) {
  if (!json) return null_argument("json");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(json);
    } catch (const nlohmann::json::parse_error& e) {
      ospca::fail(ospca::ErrorCode::Config, std::string("configuration: ") + e.what());
    }
    *out = new ospca_config{ospca::config_from_json(doc)};
  });
}

ospca_status ospca_config_set(ospca_config* cfg, const char* key, const char* value) {
  if (!cfg) return null_argument("cfg");
  if (!key) return null_argument("key");
  if (!value) return null_argument("value");
  return guarded([&] { ospca::apply_override(cfg->cfg, key, value); });
}

ospca_status ospca_config_validate(const ospca_config* cfg) {
  if (!cfg) return null_argument("cfg");
  return guarded([&] { cfg->cfg.validate(); });
}

ospca_status ospca_config_to_json(const ospca_config* cfg, char* buf, size_t capacity,
                                  size_t* needed) {
  if (!cfg) return null_argument("cfg");
  std::string text;
  const ospca_status st = guarded([&] { text = ospca::config_to_json(cfg->cfg).dump(2); });
  if (st != OSPCA_OK) return st;
  if (needed) *needed = text.size() + 1;
  if (!buf || capacity < text.size() + 1) {
    return set_error(OSPCA_ERR_INVALID_ARGUMENT, "buffer too small for configuration JSON");
  }
  std::memcpy(buf, text.c_str(), text.size() + 1);
  return OSPCA_OK;
}

void ospca_config_destroy(ospca_config* cfg) { delete cfg; }

ospca_status ospca_run(const ospca_config* cfg, const char* command, ospca_result** out) {
  if (!cfg) return null_argument("cfg");
  if (!command) return null_argument("command");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    auto result = std::make_unique<ospca_result>();
    result->run = ospca::run_command(cfg->cfg, command);
    *out = result.release();
  });
}

ospca_status ospca_result_write(const ospca_result* result, const ospca_config* cfg,
                                double wall_seconds) {
  if (!result) return null_argument("result");
  if (!cfg) return null_argument("cfg");
  return guarded([&] { ospca::write_result(result->run, cfg->cfg, wall_seconds); });
}

size_t ospca_result_table_count(const ospca_result* result) {
  return result ? result->run.tables.size() : 0;
}

const char* ospca_result_table_name(const ospca_result* result, size_t table) {
  const auto* t = table_at(result, table);
  return t ? t->name.c_str() : nullptr;
}

ospca_status ospca_result_table_shape(const ospca_result* result, size_t table, size_t* rows,
                                      size_t* columns) {
  const auto* t = table_at(result, table);
  if (!t) return set_error(OSPCA_ERR_INVALID_ARGUMENT, "no such table");
  if (rows) *rows = t->rows.size();
  if (columns) *columns = t->columns.size();
  return OSPCA_OK;
}

const char* ospca_result_column_name(const ospca_result* result, size_t table, size_t column) {
  const auto* t = table_at(result, table);
  if (!t || column >= t->columns.size()) return nullptr;
  return t->columns[column].c_str();
}

ospca_status ospca_result_value(const ospca_result* result, size_t table, size_t row,
                                size_t column, double* out) {
  if (!out) return null_argument("out");
  const auto* cell = cell_at(result, table, row, column);
  if (!cell) return set_error(OSPCA_ERR_INVALID_ARGUMENT, "cell index out of range");
  if (const auto* d = std::get_if<double>(cell)) {
    *out = *d;
  } else if (const auto* i = std::get_if<std::int64_t>(cell)) {
    *out = static_cast<double>(*i);
  } else {
    return set_error(OSPCA_ERR_INVALID_ARGUMENT, "cell holds text, not a number");
  }
  return OSPCA_OK;
}

const char* ospca_result_text(const ospca_result* result, size_t table, size_t row,
                              size_t column) {
  const auto* cell = cell_at(result, table, row, column);
  if (!cell) return nullptr;
  if (const auto* d = std::get_if<double>(cell)) {
    result->scratch = ospca::format_number(*d);
  } else if (const auto* i = std::get_if<std::int64_t>(cell)) {
    result->scratch = std::to_string(*i);
  } else {
    result->scratch = std::get<std::string>(*cell);
  }
  return result->scratch.c_str();
}

size_t ospca_result_warning_count(const ospca_result* result) {
  return result ? result->run.warnings.size() : 0;
}

const char* ospca_result_warning(const ospca_result* result, size_t index) {
  if (!result || index >= result->run.warnings.size()) return nullptr;
  return result->run.warnings[index].c_str();
}

void ospca_result_destroy(ospca_result* result) { delete result; }

double ospca_scaled_erfc(double x) { return ospca::scaled_erfc(x); }

ospca_status ospca_oja_closed_form(double tau, double omega, double q0, double t, double* out) {
  if (!out) return null_argument("out");
  return guarded([&] { *out = ospca::closed_form_q(t, q0, {tau, omega}); });
}

ospca_status ospca_oja_steady_state(double tau, double omega, double* out) {
  if (!out) return null_argument("out");
  return guarded([&] { *out = ospca::steady_state_q({tau, omega}); });
}

ospca_status ospca_solve_fixed_point(const ospca_config* cfg, double q0, double r0,
                                     ospca_fixed_point* out) {
  if (!cfg) return null_argument("cfg");
  if (!out) return null_argument("out");
  return guarded([&] {
    const auto& c = cfg->cfg;
    c.validate();
    const auto prior = ospca::discretize_prior(c.prior(), c.model.quadrature_nodes);
    ospca::FixedPointOptions opts;
    opts.damping = c.steady.damping;
    opts.tol = c.steady.tol;
    opts.max_iter = c.steady.max_iter;
    const auto fp = ospca::solve_fixed_point(c.steady_config(), prior.atoms(), {q0, r0}, opts);
    *out = {fp.q,
            fp.r,
            fp.residual,
            fp.converged ? 1 : 0,
            fp.branch == ospca::Branch::Informative ? 1 : 0,
            fp.iterations};
  });
}

}  // extern "C"
