/* elgm: approximate Bayesian inference for extended latent Gaussian models.
 *
 * C interface to the shared library. All objects are opaque handles created
 * and destroyed through these functions; every fallible call returns an
 * elgm_status, with a thread-local detail message available from
 * elgm_last_error(). Handles are immutable after creation and safe to share
 * across threads.
 */
#ifndef ELGM_H
#define ELGM_H

#include <stdint.h>

#if defined(_WIN32)
#  define ELGM_API __declspec(dllexport)
#else
#  define ELGM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum elgm_status {
  ELGM_OK = 0,
  ELGM_ERR_INVALID_ARGUMENT = 1,
  ELGM_ERR_INVALID_ORDER = 2,
  ELGM_ERR_CAPACITY = 3,
  ELGM_ERR_NOT_POSITIVE_DEFINITE = 4,
  ELGM_ERR_INVALID_START = 5,
  ELGM_ERR_NO_CONVERGENCE = 6,
  ELGM_ERR_DEGENERATE_POSTERIOR = 7,
  ELGM_ERR_DOMAIN = 8,
  ELGM_ERR_PARSE = 9,
  ELGM_ERR_IO = 10,
  ELGM_ERR_INTERNAL = 11,
} elgm_status;

typedef struct elgm_table elgm_table;
typedef struct elgm_model elgm_model;
typedef struct elgm_fit elgm_fit;
typedef struct elgm_samples elgm_samples;

ELGM_API const char* elgm_version(void);
/* Detail message for the most recent failure on this thread. */
ELGM_API const char* elgm_last_error(void);
/* Short machine-parseable class name for a status code. */
ELGM_API const char* elgm_status_name(elgm_status status);

/* ---- column tables -------------------------------------------------- */

/* Schema: comma-separated name:type with type in {real, int, category},
 * e.g. "y:int,x0:real,g1:int". */
ELGM_API elgm_status elgm_table_read_csv(const char* path, const char* schema,
                                         elgm_table** out);
ELGM_API elgm_status elgm_table_write_csv(const elgm_table* table, const char* path);
ELGM_API int64_t elgm_table_rows(const elgm_table* table);
ELGM_API int elgm_table_cols(const elgm_table* table);
ELGM_API const char* elgm_table_col_name(const elgm_table* table, int col);
/* Column values coerced to double (categories yield their codes). `buf` must
 * hold elgm_table_rows entries. */
ELGM_API elgm_status elgm_table_col_reals(const elgm_table* table, const char* name,
                                          double* buf);
/* Category columns carry text levels; other columns return 0/NULL. The
 * returned pointer stays valid while the table lives. */
ELGM_API int elgm_table_col_is_text(const elgm_table* table, int col);
ELGM_API const char* elgm_table_cell_text(const elgm_table* table, int col,
                                          int64_t row);
ELGM_API void elgm_table_free(elgm_table* table);

/* ---- simulation ------------------------------------------------------ */

/* Simulators: conjugate (n, ybar), gaussian-scale (n, theta),
 * bernoulli-glmm (n, d1, d2, beta, sigma1, sigma2), cox-ph (n, beta,
 * frailty_sd, d, censor_q), poisson-aggregate (regions, cells, beta, sigma,
 * cells_total). `params` is "key=value,..." with ';' separating vector
 * entries. truth_kv (optional) receives a key-value text owned by the
 * caller; release it with elgm_string_free. */
ELGM_API elgm_status elgm_simulate(const char* name, const char* params, uint64_t seed,
                                   elgm_table** table_out, char** truth_kv);
ELGM_API void elgm_string_free(char* s);

/* ---- models ----------------------------------------------------------- */

/* Models: conjugate, gaussian-scale, bernoulli-glmm, cox-ph,
 * poisson-aggregate. Column conventions match the simulators' output. */
ELGM_API elgm_status elgm_model_create(const char* name, const elgm_table* data,
                                       elgm_model** out);
ELGM_API int elgm_model_latent_dim(const elgm_model* model);
ELGM_API int elgm_model_hyper_dim(const elgm_model* model);
ELGM_API void elgm_model_free(elgm_model* model);

/* ---- fitting ----------------------------------------------------------- */

typedef struct elgm_fit_config {
  int k;               /* quadrature points per dimension (default 3)     */
  double tol_inner;    /* inner gradient inf-norm tolerance (1e-8)        */
  double tol_outer;    /* outer gradient inf-norm tolerance (1e-6)        */
  int max_iter;        /* outer iteration cap (100)                       */
  uint64_t seed;       /* recorded into the fit for reproducibility       */
  int threads;         /* parallel independent node solves (1)            */
} elgm_fit_config;

ELGM_API void elgm_fit_config_default(elgm_fit_config* config);
ELGM_API elgm_status elgm_fit_run(const elgm_model* model, const elgm_fit_config* config,
                                  elgm_fit** out);
ELGM_API int elgm_fit_converged(const elgm_fit* fit);
ELGM_API double elgm_fit_log_evidence(const elgm_fit* fit);
ELGM_API int elgm_fit_hyper_dim(const elgm_fit* fit);
ELGM_API int elgm_fit_latent_dim(const elgm_fit* fit);
ELGM_API int64_t elgm_fit_num_nodes(const elgm_fit* fit);
/* buf sized elgm_fit_hyper_dim / elgm_fit_num_nodes respectively. */
ELGM_API elgm_status elgm_fit_theta_hat(const elgm_fit* fit, double* buf);
ELGM_API elgm_status elgm_fit_lambda(const elgm_fit* fit, double* buf);
/* Adapted grid nodes, row-major (num_nodes x hyper_dim). */
ELGM_API elgm_status elgm_fit_nodes(const elgm_fit* fit, double* buf);
/* Posterior summary table: name, mean, sd, q2.5, q50, q97.5 on both the
 * unconstrained and natural scales. */
ELGM_API elgm_status elgm_fit_summaries(const elgm_fit* fit, elgm_table** out);
/* Fit metadata as key-value text (format.version, config echo, theta_hat,
 * Hessian, log evidence, lambda, timings). Caller frees via
 * elgm_string_free. */
ELGM_API elgm_status elgm_fit_metadata_kv(const elgm_fit* fit, const char* config_echo_kv,
                                          char** out);
/* Log joint mixture density at a latent point w of length latent_dim. */
ELGM_API elgm_status elgm_fit_log_density(const elgm_fit* fit, const double* w, int m,
                                          double* out);
ELGM_API void elgm_fit_free(elgm_fit* fit);

/* ---- sampling ---------------------------------------------------------- */

ELGM_API elgm_status elgm_sample(const elgm_fit* fit, int64_t count, uint64_t seed,
                                 elgm_samples** out);
ELGM_API int64_t elgm_samples_count(const elgm_samples* samples);
ELGM_API int elgm_samples_dim(const elgm_samples* samples);
/* Row-major draws (count x dim) and the grid node chosen for each draw. */
ELGM_API elgm_status elgm_samples_draws(const elgm_samples* samples, double* buf);
ELGM_API elgm_status elgm_samples_nodes(const elgm_samples* samples, int64_t* buf);
ELGM_API elgm_status elgm_samples_to_table(const elgm_samples* samples, elgm_table** out);
ELGM_API void elgm_samples_free(elgm_samples* samples);

/* ---- validation --------------------------------------------------------- */

/* Fit the model, build a brute-force trapezoid oracle over every joint
 * coordinate (latent dim + hyper dim <= 4), and report the one-sample KS
 * statistic of `count` posterior draws against each oracle marginal. The
 * result table has columns name,ks. */
ELGM_API elgm_status elgm_validate(const elgm_model* model, const elgm_fit_config* config,
                                   int64_t count, uint64_t seed, elgm_table** ks_out);
/* Two-sample KS statistic (max distance between empirical CDFs). */
ELGM_API elgm_status elgm_ks_two_sample(const double* a, int64_t na, const double* b,
                                        int64_t nb, double* out);

#ifdef __cplusplus
}
#endif

#endif /* ELGM_H */
