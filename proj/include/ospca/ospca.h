/*
 * C interface to the ospca library: configuration handles, experiment
 * commands, result tables and a few numeric primitives. Every function
 * returns an ospca_status; on failure ospca_last_error() describes the
 * problem (thread-local, valid until the next failing call).
 */
#ifndef OSPCA_OSPCA_H
#define OSPCA_OSPCA_H

#include <stddef.h>

#if defined(_WIN32)
#define OSPCA_API __declspec(dllexport)
#else
#define OSPCA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ospca_status {
  OSPCA_OK = 0,
  OSPCA_ERR_INVALID_ARGUMENT = 1,
  OSPCA_ERR_CONFIG = 2,
  OSPCA_ERR_NUMERICAL = 3,
  OSPCA_ERR_IO = 4,
  OSPCA_ERR_INTERNAL = 5
} ospca_status;

typedef struct ospca_config ospca_config;
typedef struct ospca_result ospca_result;

typedef struct ospca_fixed_point {
  double q;
  double r;
  double residual;
  int converged;
  int informative;
  int iterations;
} ospca_fixed_point;

OSPCA_API const char* ospca_version(void);
OSPCA_API const char* ospca_last_error(void);
OSPCA_API const char* ospca_status_string(ospca_status status);

/* Configuration. Defaults reproduce the reference experiment
 * (rho = 0.05, tau = 0.5, beta = 0.27, omega = 1, p = 10000). */
OSPCA_API ospca_status ospca_config_create(ospca_config** out);
OSPCA_API ospca_status ospca_config_load(const char* path, ospca_config** out);
OSPCA_API ospca_status ospca_config_parse(const char* json, ospca_config** out);
OSPCA_API ospca_status ospca_config_set(ospca_config* cfg, const char* key,
                                        const char* value);
OSPCA_API ospca_status ospca_config_validate(const ospca_config* cfg);
/* Copies the resolved configuration as JSON into buf (NUL-terminated).
 * *needed receives the required size including the terminator. */
OSPCA_API ospca_status ospca_config_to_json(const ospca_config* cfg, char* buf,
                                            size_t capacity, size_t* needed);
OSPCA_API void ospca_config_destroy(ospca_config* cfg);

/* Commands: "simulate", "pde", "oja-theory", "steady", "sweep". */
OSPCA_API ospca_status ospca_run(const ospca_config* cfg, const char* command,
                                 ospca_result** out);
/* Writes every table and manifest.json into the configured output directory. */
OSPCA_API ospca_status ospca_result_write(const ospca_result* result,
                                          const ospca_config* cfg,
                                          double wall_seconds);
OSPCA_API size_t ospca_result_table_count(const ospca_result* result);
OSPCA_API const char* ospca_result_table_name(const ospca_result* result, size_t table);
OSPCA_API ospca_status ospca_result_table_shape(const ospca_result* result, size_t table,
                                                size_t* rows, size_t* columns);
OSPCA_API const char* ospca_result_column_name(const ospca_result* result, size_t table,
                                               size_t column);
/* Numeric cell value; OSPCA_ERR_INVALID_ARGUMENT for text cells. */
OSPCA_API ospca_status ospca_result_value(const ospca_result* result, size_t table,
                                          size_t row, size_t column, double* out);
/* Cell as text, formatted exactly as in the CSV output. */
OSPCA_API const char* ospca_result_text(const ospca_result* result, size_t table,
                                        size_t row, size_t column);
OSPCA_API size_t ospca_result_warning_count(const ospca_result* result);
OSPCA_API const char* ospca_result_warning(const ospca_result* result, size_t index);
OSPCA_API void ospca_result_destroy(ospca_result* result);

/* Numeric primitives. */
OSPCA_API double ospca_scaled_erfc(double x);
OSPCA_API ospca_status ospca_oja_closed_form(double tau, double omega, double q0,
                                             double t, double* out);
OSPCA_API ospca_status ospca_oja_steady_state(double tau, double omega, double* out);
/* Damped fixed-point iteration with the prior, tau, omega and beta of cfg. */
OSPCA_API ospca_status ospca_solve_fixed_point(const ospca_config* cfg, double q0,
                                               double r0, ospca_fixed_point* out);

#ifdef __cplusplus
}
#endif

#endif /* OSPCA_OSPCA_H */
