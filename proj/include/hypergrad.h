/* C interface to the hypergrad library: joint weight / regularization-
 * hyperparameter optimization for lasso and group-lasso regression by
 * hyper-subgradient descent on the leave-one-out validation error.
 *
 * Conventions:
 *  - every function returns HG_OK (0) on success or a negative HG_ERR_*
 *    code; hg_last_error() returns a thread-local message for the most
 *    recent failure on the calling thread;
 *  - objects are opaque handles created by hg_*_create/load/run functions
 *    and released with the matching hg_*_free (NULL-safe);
 *  - output parameters come last and may be NULL when marked optional.
 */
#ifndef HYPERGRAD_H
#define HYPERGRAD_H

#ifdef __cplusplus
extern "C" {
#endif

#define HG_OK 0
#define HG_ERR_NULL (-1)       /* required pointer argument was NULL */
#define HG_ERR_INVALID (-2)    /* precondition or dimension violation */
#define HG_ERR_PARSE (-3)      /* malformed CSV or config text */
#define HG_ERR_CONFIG (-4)     /* experiment config constraint violation */
#define HG_ERR_IO (-5)         /* filesystem failure */
#define HG_ERR_SINGULAR (-6)   /* singular sensitivity system (direct mode) */
#define HG_ERR_RUNTIME (-7)    /* unexpected internal failure */

typedef struct hg_dataset hg_dataset;
typedef struct hg_regularizer hg_regularizer;
typedef struct hg_curve hg_curve;
typedef struct hg_trajectory hg_trajectory;
typedef struct hg_config hg_config;

const char* hg_version(void);
const char* hg_last_error(void);

/* ---- datasets ---------------------------------------------------------- */

/* inputs is row-major n x p; labels has length n. */
int hg_dataset_create(const double* inputs, const double* labels, int n, int p,
                      hg_dataset** out);
int hg_dataset_load_csv(const char* path, int has_header, hg_dataset** out);
int hg_dataset_save_csv(const hg_dataset* d, const char* path);
int hg_dataset_shape(const hg_dataset* d, int* n, int* p);
/* x (length p, optional) and y (optional) receive row i. */
int hg_dataset_row(const hg_dataset* d, int i, double* x, double* y);
void hg_dataset_free(hg_dataset* d);

/* Seed-deterministic sparse-regression data; w_true (length dim) optional. */
int hg_generate_synthetic(int dim, int sparsity, int n_train, int n_test,
                          double snr, unsigned long long seed,
                          hg_dataset** train, hg_dataset** test,
                          double* w_true);

/* ---- regularizers ------------------------------------------------------ */

int hg_regularizer_lasso(hg_regularizer** out);
/* group_sizes must sum to dim; groups are contiguous in coordinate order. */
int hg_regularizer_group_lasso(const int* group_sizes, int n_groups, int dim,
                               hg_regularizer** out);
void hg_regularizer_free(hg_regularizer* r);

/* ---- inner solver ------------------------------------------------------ */

/* Proximal gradient descent on the full dataset at the given lambda, step
 * size 1/rho(phi). w (length p) receives the solution; when warm is nonzero
 * its incoming content seeds the solve. iters/residual/converged optional. */
int hg_pgd_solve(const hg_dataset* d, const hg_regularizer* reg, double lambda,
                 double tol, int max_iters, double* w, int warm, int* iters,
                 double* residual, int* converged);
/* Smallest lambda that zeroes all lasso weights (||r||_inf). */
int hg_lambda_max(const hg_dataset* d, double* out);

/* ---- validation -------------------------------------------------------- */

/* scheme strings: "loo", "kfold:<k>[:<seed>]", "heldout:<fraction>". */
int hg_validation_error(const hg_dataset* d, const hg_regularizer* reg,
                        const char* scheme, double lambda, double inner_tol,
                        double* out);
int hg_test_error(const hg_dataset* test, const double* w, int p, double* out);

int hg_grid_search(const hg_dataset* d, const hg_regularizer* reg,
                   const char* scheme, const double* lambdas, int n_lambdas,
                   double inner_tol, const hg_dataset* test, hg_curve** out);
int hg_curve_size(const hg_curve* c, int* out);
/* test_err receives NaN when the curve has no test column. */
int hg_curve_point(const hg_curve* c, int i, double* lambda, double* loo_err,
                   double* test_err);
int hg_curve_argmin(const hg_curve* c, int* index);
int hg_curve_save_csv(const hg_curve* c, const char* path);
void hg_curve_free(hg_curve* c);

/* ---- hyper-subgradient descent ----------------------------------------- */

typedef struct hg_hyper_options {
    double beta;            /* outer step size */
    double lambda_init;     /* < 0: auto (0.1 * lambda_max) */
    int max_outer;          /* <= 0: mode default (100 batch, 20000 online) */
    double outer_tol;
    double min_lambda_step; /* batch-mode movement stop; 0 disables */
    double inner_tol;
    int inner_max_iters;
    int z_mode;             /* 0 direct, 1 least-squares, 2 iterative */
    int threads;            /* batch fold solves; 1 = fully sequential */
} hg_hyper_options;

int hg_hyper_options_init(hg_hyper_options* opts);

int hg_hsgd_run(const hg_dataset* d, const hg_regularizer* reg,
                const char* scheme, const hg_hyper_options* opts,
                hg_trajectory** out);
int hg_ohsgd_run(const hg_dataset* d, const hg_regularizer* reg,
                 const char* scheme, const hg_hyper_options* opts,
                 hg_trajectory** out);

int hg_fd_hypergradient(const hg_dataset* d, const hg_regularizer* reg,
                        const char* scheme, double lambda, double delta,
                        double inner_tol, double* out);

int hg_trajectory_size(const hg_trajectory* t, long* out);
/* Any output pointer may be NULL. fold_j is -1 for batch records. */
int hg_trajectory_row(const hg_trajectory* t, long i, long* k, int* fold_j,
                      double* lambda, double* lambda_trailing_avg,
                      double* hypergrad, long* cum_inner_iters);
int hg_trajectory_lambda_star(const hg_trajectory* t, double* out);
int hg_trajectory_total_inner_iters(const hg_trajectory* t, long* out);
int hg_trajectory_save_csv(const hg_trajectory* t, const char* path);
void hg_trajectory_free(hg_trajectory* t);

/* ---- experiment harness ------------------------------------------------ */

int hg_config_create(hg_config** out);
int hg_config_load(const char* path, hg_config** out);
int hg_config_set(hg_config* cfg, const char* key, const char* value);
int hg_config_validate(hg_config* cfg);
/* Canonical key=value echo; the returned pointer stays valid until the next
 * hg_config_echo call on the same handle or hg_config_free. */
const char* hg_config_echo(hg_config* cfg);
int hg_experiment_run(const hg_config* cfg);
void hg_config_free(hg_config* cfg);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* HYPERGRAD_H */
