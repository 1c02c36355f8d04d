/*
 * C interface to the SDMA surrogate fitting library.
 *
 * All objects are opaque handles created by a load, fit, or export call
 * and released with the matching _free function. Every fallible function returns
 * an sdma_status; on failure sdma_last_error() holds a message for the
 * calling thread until its next failing call.
 *
 * Values are log space unless a function takes an sdma_space argument.
 */
#ifndef SDMA_SDMA_H_
#define SDMA_SDMA_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(SDMA_BUILDING_LIBRARY)
#define SDMA_API __declspec(dllexport)
#else
#define SDMA_API __declspec(dllimport)
#endif
#else
#define SDMA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sdma_status {
  SDMA_OK = 0,
  SDMA_ERR_INVALID_ARGUMENT = 1,
  SDMA_ERR_IO = 2,
  SDMA_ERR_MALFORMED_ROW = 3,
  SDMA_ERR_NON_POSITIVE_VALUE = 4,
  SDMA_ERR_EMPTY_FILE = 5,
  SDMA_ERR_NON_FINITE_SAMPLE = 6,
  SDMA_ERR_DIMENSION_MISMATCH = 7,
  SDMA_ERR_NON_FINITE_RESIDUAL = 8,
  SDMA_ERR_LINEAR_SOLVE_FAILURE = 9,
  SDMA_ERR_NON_FINITE_GRADIENT = 10,
  SDMA_ERR_DEGENERATE_DATA = 11,
  SDMA_ERR_COEFFICIENT_OVERFLOW = 12,
  SDMA_ERR_NAME_ARITY_MISMATCH = 13,
  SDMA_ERR_UNSUPPORTED_CLASS = 14,
  SDMA_ERR_FORMAT = 15,
  SDMA_ERR_BUFFER_TOO_SMALL = 16,
  SDMA_ERR_INTERNAL = 99
} sdma_status;

typedef enum sdma_space { SDMA_SPACE_LINEAR = 0, SDMA_SPACE_LOG = 1 } sdma_space;

typedef enum sdma_class {
  SDMA_CLASS_MA = 0,
  SDMA_CLASS_SMA = 1,
  SDMA_CLASS_DMA = 2,
  SDMA_CLASS_SDMA = 3
} sdma_class;

typedef enum sdma_operator { SDMA_OP_EQ = 0, SDMA_OP_LEQ = 1, SDMA_OP_GEQ = 2 } sdma_operator;

typedef enum sdma_termination {
  SDMA_TERM_GRAD_TOL = 0,
  SDMA_TERM_STEP_TOL = 1,
  SDMA_TERM_COST_TOL = 2,
  SDMA_TERM_MAX_ITER = 3
} sdma_termination;

typedef struct sdma_dataset sdma_dataset;
typedef struct sdma_model sdma_model;
typedef struct sdma_fit_result sdma_fit_result;
typedef struct sdma_constraints sdma_constraints;

typedef struct sdma_lm_config {
  size_t max_iterations;
  double lambda_init;
  double lambda_up;
  double lambda_down;
  double grad_tol;
  double step_tol;
  double cost_tol;
} sdma_lm_config;

typedef struct sdma_fit_spec {
  sdma_class function_class;
  size_t k_terms;
  size_t m_terms;
  size_t restarts;
  uint64_t rng_seed;
  size_t threads; /* 0 = hardware concurrency; does not affect results */
  sdma_lm_config lm;
} sdma_fit_spec;

SDMA_API const char* sdma_version(void);
SDMA_API const char* sdma_status_string(sdma_status status);
SDMA_API const char* sdma_last_error(void);
/* Nonzero for errors caused by bad input (files, flags, shapes) as opposed
 * to numerical failures during fitting or export. */
SDMA_API int sdma_status_is_input_error(sdma_status status);

/* ---- datasets ---------------------------------------------------------- */

SDMA_API sdma_status sdma_dataset_load_csv(const char* path, sdma_space space, sdma_dataset** out);
/* x is row-major n_points x n_dims. */
SDMA_API sdma_status sdma_dataset_from_arrays(const double* x, const double* y, size_t n_points,
                                              size_t n_dims, sdma_space space, sdma_dataset** out);
/* `count` evenly spaced samples of max(-6x-6, x^4-3x^2) on [-2, 2]. */
SDMA_API sdma_status sdma_dataset_demo2d(size_t count, sdma_dataset** out);
SDMA_API sdma_status sdma_dataset_write_csv(const sdma_dataset* data, const char* path, sdma_space space);
SDMA_API size_t sdma_dataset_n_points(const sdma_dataset* data);
SDMA_API size_t sdma_dataset_n_dims(const sdma_dataset* data);
/* Copies point j (log space) into x_out[n_dims] and its output into *y_out. */
SDMA_API sdma_status sdma_dataset_point(const sdma_dataset* data, size_t j, double* x_out, double* y_out);
SDMA_API void sdma_dataset_free(sdma_dataset* data);

/* ---- fitting ----------------------------------------------------------- */

/* Fills the defaults: SDMA, K = M = 5, 30 restarts, seed 0, default LM. */
SDMA_API void sdma_fit_spec_init(sdma_fit_spec* spec);
SDMA_API sdma_status sdma_fit(const sdma_dataset* data, const sdma_fit_spec* spec, sdma_fit_result** out);
SDMA_API double sdma_fit_result_rms(const sdma_fit_result* result);
SDMA_API size_t sdma_fit_result_restarts(const sdma_fit_result* result);
SDMA_API size_t sdma_fit_result_best_index(const sdma_fit_result* result);
SDMA_API sdma_termination sdma_fit_result_termination(const sdma_fit_result* result);
SDMA_API size_t sdma_fit_result_iterations(const sdma_fit_result* result);
/* Copies up to `capacity` per-restart costs; *count receives the total. */
SDMA_API sdma_status sdma_fit_result_restart_costs(const sdma_fit_result* result, double* costs,
                                                   size_t capacity, size_t* count);
SDMA_API size_t sdma_fit_result_warning_count(const sdma_fit_result* result);
SDMA_API const char* sdma_fit_result_warning(const sdma_fit_result* result, size_t index);
/* New model handle owned by the caller; carries the fit summary. */
SDMA_API sdma_status sdma_fit_result_model(const sdma_fit_result* result, sdma_model** out);
SDMA_API void sdma_fit_result_free(sdma_fit_result* result);
SDMA_API const char* sdma_termination_string(sdma_termination t);

/* ---- models ------------------------------------------------------------ */

SDMA_API sdma_status sdma_model_load(const char* path, sdma_model** out);
SDMA_API sdma_status sdma_model_save(const sdma_model* model, const char* path);
/* gamma layout: [b (K), a (K*N), log alpha, h (M), g (M*N), log beta],
 * entries present per class. m_terms is ignored for MA/SMA. */
SDMA_API sdma_status sdma_model_from_gamma(sdma_class cls, size_t k_terms, size_t m_terms,
                                           size_t n_dims, const double* gamma, size_t length,
                                           sdma_model** out);
SDMA_API sdma_status sdma_model_gamma(const sdma_model* model, double* gamma, size_t capacity,
                                      size_t* length);
SDMA_API sdma_class sdma_model_class(const sdma_model* model);
SDMA_API size_t sdma_model_n_dims(const sdma_model* model);
SDMA_API size_t sdma_model_k_terms(const sdma_model* model);
SDMA_API size_t sdma_model_m_terms(const sdma_model* model);
/* Log-space model output f(x). */
SDMA_API sdma_status sdma_model_eval(const sdma_model* model, const double* x, size_t n_dims, double* y_out);
SDMA_API sdma_status sdma_model_rms(const sdma_model* model, const sdma_dataset* data, double* rms_out);
/* Reads an N or N+1 column CSV, writes "inputs..., prediction" rows to
 * output_path ("-" for stdout). Inputs are echoed in `space`; the
 * prediction is exp(f) for SDMA_SPACE_LINEAR and f for SDMA_SPACE_LOG. */
SDMA_API sdma_status sdma_model_eval_csv(const sdma_model* model, const char* input_path,
                                         sdma_space space, const char* output_path);
SDMA_API void sdma_model_free(sdma_model* model);

/* ---- SP export --------------------------------------------------------- */

/* SDMA models give the three-constraint SP set; SMA models a single GP
 * constraint; MA/DMA fail with SDMA_ERR_UNSUPPORTED_CLASS. */
SDMA_API sdma_status sdma_export(const sdma_model* model, sdma_operator original, sdma_constraints** out);
SDMA_API sdma_status sdma_constraints_load(const char* path, sdma_constraints** out);
/* var_names may be NULL for the defaults u1..uN. */
SDMA_API sdma_status sdma_constraints_save(const sdma_constraints* cs, const char* path,
                                           const char* const* var_names, size_t n_names);
/* Writes a NUL-terminated rendering into buf; *needed receives the size
 * including the terminator. Returns SDMA_ERR_BUFFER_TOO_SMALL when
 * capacity < *needed. */
SDMA_API sdma_status sdma_constraints_render(const sdma_constraints* cs, const char* const* var_names,
                                             size_t n_names, char* buf, size_t capacity, size_t* needed);
/* ops[0] for w, ops[1] for p_convex, ops[2] for p_concave. */
SDMA_API sdma_status sdma_constraints_operators(const sdma_constraints* cs, sdma_operator ops[3]);
SDMA_API int sdma_constraints_is_gp(const sdma_constraints* cs);
SDMA_API size_t sdma_constraints_n_dims(const sdma_constraints* cs);
/* Right-hand side for w at a positive original-space point u. */
SDMA_API sdma_status sdma_constraints_eval(const sdma_constraints* cs, const double* u, size_t n_dims,
                                           double* w_out);
SDMA_API void sdma_constraints_free(sdma_constraints* cs);

#ifdef __cplusplus
}  // extern "C"
#endif

#endif  // SDMA_SDMA_H_
