/* C interface to the mvgf library. Every function returns a status code; on
 * failure mvgf_last_error() describes the cause for the calling thread.
 * Handles are opaque and owned by the caller, release them with the matching
 * _destroy function. Strings returned by the library stay valid until the
 * owning handle is destroyed or modified. */
#ifndef MVGF_H
#define MVGF_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(MVGF_BUILDING)
#    define MVGF_API __declspec(dllexport)
#  else
#    define MVGF_API __declspec(dllimport)
#  endif
#else
#  define MVGF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mvgf_status {
  MVGF_OK = 0,
  /* The run completed but its own checks did not hold (verify, reproduce, particles). */
  MVGF_CHECK_FAILED = 1,
  MVGF_VALIDATION_ERROR = 2,
  MVGF_NUMERICAL_ERROR = 3,
  MVGF_INTERNAL_ERROR = 4
} mvgf_status;

/* Scalar functions of a model, see mvgf_model_eval. */
typedef enum mvgf_function {
  MVGF_FN_B = 0,   /* mobility b(s) */
  MVGF_FN_F = 1,   /* diffusion nonlinearity f(s) */
  MVGF_FN_G = 2,   /* g(s) */
  MVGF_FN_ETA = 3, /* eta(s), the internal energy density */
  MVGF_FN_PHI = 4, /* eta(s) / s */
  MVGF_FN_H = 5,   /* s b(s) */
  MVGF_FN_PSI = 6  /* s b(s) / f'(s) */
} mvgf_function;

typedef struct mvgf_model mvgf_model;
typedef struct mvgf_field mvgf_field;
typedef struct mvgf_curve mvgf_curve;
typedef struct mvgf_config mvgf_config;
typedef struct mvgf_report mvgf_report;

MVGF_API const char* mvgf_version(void);
/* Message of the last failed call on this thread, "" if none. */
MVGF_API const char* mvgf_last_error(void);

/* Models: family is linear, fermi-dirac, bose or power; parameter is gamma for
 * bose and alpha for power and ignored otherwise. Potential Phi = x^2 / 2. */
MVGF_API mvgf_status mvgf_model_create(const char* family, double parameter, mvgf_model** out);
MVGF_API void mvgf_model_destroy(mvgf_model* model);
MVGF_API mvgf_status mvgf_model_eval(const mvgf_model* model, mvgf_function which, double s, double* out);
/* One-dimensional critical mass of a Bose model; +inf when there is none.
 * Other families give MVGF_VALIDATION_ERROR. */
MVGF_API mvgf_status mvgf_model_critical_mass(const mvgf_model* model, double* out);

/* Densities on the uniform cell-centred grid of [-half_width, half_width]. */
MVGF_API mvgf_status mvgf_field_create(double half_width, size_t n_cells, const double* values, double time,
                                       mvgf_field** out);
/* Named initial density, e.g. {"kind": "gaussian", "mean": 2, "variance": 1}. */
MVGF_API mvgf_status mvgf_field_initial(const mvgf_model* model, double half_width, size_t n_cells,
                                        const char* initial_json, mvgf_field** out);
MVGF_API void mvgf_field_destroy(mvgf_field* field);
MVGF_API size_t mvgf_field_size(const mvgf_field* field);
MVGF_API double mvgf_field_time(const mvgf_field* field);
MVGF_API double mvgf_field_mass(const mvgf_field* field);
/* Copies min(capacity, size) values into out. */
MVGF_API mvgf_status mvgf_field_values(const mvgf_field* field, double* out, size_t capacity);

/* Finite-volume evolution to t_end with `snapshots` evenly spaced snapshots
 * (the initial density included). */
MVGF_API mvgf_status mvgf_evolve(const mvgf_model* model, const mvgf_field* init, double t_end, size_t snapshots,
                                 mvgf_curve** out);
MVGF_API void mvgf_curve_destroy(mvgf_curve* curve);
MVGF_API size_t mvgf_curve_size(const mvgf_curve* curve);
MVGF_API mvgf_status mvgf_curve_time(const mvgf_curve* curve, size_t k, double* out);
/* New field handle holding a copy of snapshot k. */
MVGF_API mvgf_status mvgf_curve_field(const mvgf_curve* curve, size_t k, mvgf_field** out);

/* Functionals. Relative entropy is F(p) - F(q) and needs equal masses. */
MVGF_API mvgf_status mvgf_free_energy(const mvgf_model* model, const mvgf_field* p, double* out);
MVGF_API mvgf_status mvgf_dissipation(const mvgf_model* model, const mvgf_field* p, double* out);
MVGF_API mvgf_status mvgf_relative_entropy(const mvgf_model* model, const mvgf_field* p, const mvgf_field* q,
                                           double* out);

/* Transport distance with n_time time steps and default controls. */
MVGF_API mvgf_status mvgf_wh_distance(const mvgf_model* model, const mvgf_field* p0, const mvgf_field* p1,
                                      size_t n_time, double* out);
MVGF_API mvgf_status mvgf_w2_quantile(const mvgf_field* p0, const mvgf_field* p1, double* out);

/* Experiment configs: JSON with sections model, grid, initial, time,
 * particles, transport and output. json may be NULL for the defaults. */
MVGF_API mvgf_status mvgf_config_create(const char* json, mvgf_config** out);
MVGF_API mvgf_status mvgf_config_load(const char* path, mvgf_config** out);
MVGF_API void mvgf_config_destroy(mvgf_config* config);
/* Dotted key such as "particles.n"; the value is parsed as JSON when possible. */
MVGF_API mvgf_status mvgf_config_set(mvgf_config* config, const char* key, const char* value);
MVGF_API mvgf_status mvgf_config_validate(const mvgf_config* config);
/* Canonical JSON, owned by the config handle. */
MVGF_API const char* mvgf_config_json(mvgf_config* config);
MVGF_API uint64_t mvgf_config_hash(const mvgf_config* config);

/* Runs one subcommand: fpe-solve, energy-report, particles, metric-derivative,
 * wh-distance, reproduce (argument fig1..fig8) or verify (argument: comma
 * separated criteria or NULL for all). Returns MVGF_CHECK_FAILED with a report
 * when the run finished but its checks did not hold. */
MVGF_API mvgf_status mvgf_run(const mvgf_config* config, const char* command, const char* argument,
                              mvgf_report** out);
MVGF_API void mvgf_report_destroy(mvgf_report* report);
MVGF_API const char* mvgf_report_text(const mvgf_report* report);
MVGF_API int mvgf_report_passed(const mvgf_report* report);
MVGF_API size_t mvgf_report_file_count(const mvgf_report* report);
MVGF_API const char* mvgf_report_file(const mvgf_report* report, size_t k);

#ifdef __cplusplus
}
#endif

#endif /* MVGF_H */
