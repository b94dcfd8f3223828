#ifndef RISJCAS_H
#define RISJCAS_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define RJ_API __declspec(dllexport)
#else
#define RJ_API __attribute__((visibility("default")))
#endif

typedef enum rj_status {
  RJ_OK = 0,
  RJ_ERR_ARGUMENT = 1,   /* null pointer, bad enum text, short buffer */
  RJ_ERR_CONFIG = 2,     /* parse or validation failure */
  RJ_ERR_NUMERICAL = 3,  /* singular reflection, optimizer abort */
  RJ_ERR_DOMAIN = 4,     /* value outside a function's domain */
  RJ_ERR_IO = 5,
  RJ_ERR_INTERNAL = 6
} rj_status;

typedef struct rj_config rj_config;
typedef struct rj_problem rj_problem;

RJ_API const char* rj_version(void);

/* Message and config line (1-based, 0 if unknown) of the last failure on the
   calling thread. */
RJ_API const char* rj_last_error(void);
RJ_API int rj_last_error_line(void);

RJ_API rj_status rj_config_default(rj_config** out);
RJ_API rj_status rj_config_load(const char* path, rj_config** out);
RJ_API rj_status rj_config_parse(const char* yaml_text, rj_config** out);
RJ_API void rj_config_free(rj_config* config);

RJ_API rj_status rj_config_set_seeds(rj_config* config, int count);
RJ_API rj_status rj_config_set_threads(rj_config* config, int threads);
/* "pc" or "conv" */
RJ_API rj_status rj_config_set_model(rj_config* config, const char* model);
/* "mono" or "bi" */
RJ_API rj_status rj_config_set_mode(rj_config* config, const char* mode);
RJ_API rj_status rj_config_set_bits(rj_config* config, const int* bits, size_t count);

/* Output directory named in the config; valid until the config changes. */
RJ_API const char* rj_config_output_dir(const rj_config* config);

/* Canonical YAML. Writes at most `capacity` bytes including the terminator;
   `needed` receives the full length plus one. */
RJ_API rj_status rj_config_to_yaml(const rj_config* config, char* buffer,
                                   size_t capacity, size_t* needed);
RJ_API rj_status rj_config_validate(const rj_config* config);
/* 40 hex digits plus terminator. */
RJ_API rj_status rj_config_hash(const rj_config* config, char out[41]);

RJ_API rj_status rj_run_sweep(const rj_config* config, const char* out_dir,
                              int* rows_written);
RJ_API rj_status rj_run_quant_study(const rj_config* config, const char* out_dir);

/* One channel realisation of the configured scene. */
RJ_API rj_status rj_problem_create(const rj_config* config, uint64_t seed,
                                   rj_problem** out);
RJ_API void rj_problem_free(rj_problem* problem);
RJ_API int rj_problem_ris_elements(const rj_problem* problem);
/* Alpha-averaged objective for phases given as radians (length M), with the
   per-alpha covariances re-solved. */
RJ_API rj_status rj_problem_objective(const rj_problem* problem, const double* phases,
                                      double* objective);
/* Runs the configured optimisation; writes the final phases (radians) and the
   alpha-averaged objective. */
RJ_API rj_status rj_problem_optimize(const rj_problem* problem, double* phases_out,
                                     double* objective);

RJ_API rj_status rj_quantizer_step(int bits, double signal_variance, double* delta);
RJ_API rj_status rj_mse_optimal_step(int bits, double* delta);

/* Scattering matrix of a side x side RIS with the given spacing in
   wavelengths; re/im receive M*M entries, column-major. */
RJ_API rj_status rj_scattering_matrix(int side, double spacing_wavelengths,
                                      int quadrature_order, double* re, double* im);

#ifdef __cplusplus
}
#endif

#endif
