#include "hypergrad.h"

#include "hypergrad/errors.hpp"
#include "hypergrad/experiment.hpp"

#include <cmath>
#include <cstring>
#include <memory>
#include <string>

using namespace hypergrad;

struct hg_dataset {
    Dataset data;
};
struct hg_regularizer {
    Regularizer reg = Regularizer::lasso();
};
struct hg_curve {
    ErrorCurve curve;
};
struct hg_trajectory {
    HyperTrajectory traj;
};
struct hg_config {
    ExperimentConfig cfg;
    std::string echo; // owned storage for hg_config_echo
};

namespace {

thread_local std::string g_last_error;

int fail(int code, const std::string& msg) {
    g_last_error = msg;
    return code;
}

// Runs `body`, translating exceptions into status codes.
template <typename Fn>
int guarded(Fn&& body) {
    try {
        return body();
    } catch (const ParseError& e) {
        return fail(HG_ERR_PARSE, e.what());
    } catch (const ConfigError& e) {
        return fail(HG_ERR_CONFIG, e.what());
    } catch (const SingularSystemError& e) {
        return fail(HG_ERR_SINGULAR, e.what());
    } catch (const IoError& e) {
        return fail(HG_ERR_IO, e.what());
    } catch (const InvalidArgument& e) {
        return fail(HG_ERR_INVALID, e.what());
    } catch (const std::exception& e) {
        return fail(HG_ERR_RUNTIME, e.what());
    } catch (...) {
        return fail(HG_ERR_RUNTIME, "unknown error");
    }
}

int require(const void* ptr) {
    if (ptr == nullptr) {
        return fail(HG_ERR_NULL, "required argument is NULL");
    }
    return HG_OK;
}

HyperConfig to_hyper_config(const hg_hyper_options& opts, bool online) {
    HyperConfig hc;
    hc.beta = opts.beta;
    if (opts.lambda_init >= 0.0) {
        hc.lambda_init = opts.lambda_init;
    }
    hc.max_outer = opts.max_outer > 0 ? opts.max_outer : (online ? 20000 : 100);
    hc.outer_tol = opts.outer_tol;
    hc.min_lambda_step = opts.min_lambda_step;
    hc.inner.tol = opts.inner_tol;
    hc.inner.max_iters = opts.inner_max_iters;
    switch (opts.z_mode) {
    case 0:
        hc.z_mode = ZMode::LinearSolve;
        break;
    case 1:
        hc.z_mode = ZMode::LeastSquares;
        break;
    case 2:
        hc.z_mode = ZMode::Iterative;
        break;
    default:
        throw InvalidArgument("z_mode must be 0, 1 or 2");
    }
    return hc;
}

} // namespace

extern "C" {

const char* hg_version(void) { return "1.0.0"; }

const char* hg_last_error(void) { return g_last_error.c_str(); }

/* ---- datasets ---------------------------------------------------------- */

int hg_dataset_create(const double* inputs, const double* labels, int n, int p,
                      hg_dataset** out) {
    if (int rc = require(inputs); rc != HG_OK) return rc;
    if (int rc = require(labels); rc != HG_OK) return rc;
    if (int rc = require(out); rc != HG_OK) return rc;
    return guarded([&]() {
        if (n < 1 || p < 1) {
            throw InvalidArgument("dataset: n and p must be >= 1");
        }
        Eigen::MatrixXd x(n, p);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < p; ++j) {
                x(i, j) = inputs[static_cast<std::size_t>(i) * p + j];
            }
        }
        Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(labels, n);
        *out = new hg_dataset{Dataset(std::move(x), std::move(y))};
        return HG_OK;
    });
}

int hg_dataset_load_csv(const char* path, int has_header, hg_dataset** out) {
    if (int rc = require(path); rc != HG_OK) return rc;
    if (int rc = require(out); rc != HG_OK) return rc;
    return guarded([&]() {
        *out = new hg_dataset{load_csv(path, has_header != 0)};
        return HG_OK;
    });
}

int hg_dataset_save_csv(const hg_dataset* d, const char* path) {
    if (int rc = require(d); rc != HG_OK) return rc;
    if (int rc = require(path); rc != HG_OK) return rc;
    return guarded([&]() {
        save_csv(d->data, path);
        return HG_OK;
    });
}

int hg_dataset_shape(const hg_dataset* d, int* n, int* p) {
    if (int rc = require(d); rc != HG_OK) return rc;
    if (n != nullptr) *n = d->data.rows();
    if (p != nullptr) *p = d->data.cols();
    return HG_OK;
}

int hg_dataset_row(const hg_dataset* d, int i, double* x, double* y) {
    if (int rc = require(d); rc != HG_OK) return rc;
    if (i < 0 || i >= d->data.rows()) {
        return fail(HG_ERR_INVALID, "dataset row index out of range");
    }
    if (x != nullptr) {
        for (int j = 0; j < d->data.cols(); ++j) {
            x[j] = d->data.inputs(i, j);
        }
    }
    if (y != nullptr) {
        *y = d->data.labels(i);
    }
    return HG_OK;
}

void hg_dataset_free(hg_dataset* d) { delete d; }

int hg_generate_synthetic(int dim, int sparsity, int n_train, int n_test,
                          double snr, unsigned long long seed,
                          hg_dataset** train, hg_dataset** test,
                          double* w_true) {
    if (int rc = require(train); rc != HG_OK) return rc;
    if (int rc = require(test); rc != HG_OK) return rc;
    return guarded([&]() {
        SyntheticSpec spec;
        spec.dim = dim;
        spec.sparsity = sparsity;
        spec.n_train = n_train;
        spec.n_test = n_test;
        spec.snr = snr;
        spec.seed = seed;
        SyntheticData syn = generate_synthetic(spec);
        if (w_true != nullptr) {
            for (int i = 0; i < dim; ++i) {
                w_true[i] = syn.w_true(i);
            }
        }
        *train = new hg_dataset{std::move(syn.train)};
        *test = new hg_dataset{std::move(syn.test)};
        return HG_OK;
    });
}

/* ---- regularizers ------------------------------------------------------ */

int hg_regularizer_lasso(hg_regularizer** out) {
    if (int rc = require(out); rc != HG_OK) return rc;
    *out = new hg_regularizer{Regularizer::lasso()};
    return HG_OK;
}

int hg_regularizer_group_lasso(const int* group_sizes, int n_groups, int dim,
                               hg_regularizer** out) {
    if (int rc = require(group_sizes); rc != HG_OK) return rc;
    if (int rc = require(out); rc != HG_OK) return rc;
    return guarded([&]() {
        if (n_groups < 1) {
            throw InvalidArgument("group lasso: need at least one group");
        }
        std::vector<int> sizes(group_sizes, group_sizes + n_groups);
        GroupStructure gs = GroupStructure::contiguous(sizes);
        if (gs.dim() != dim) {
            throw InvalidArgument("group lasso: sizes sum to " +
                                  std::to_string(gs.dim()) + " but dim = " +
                                  std::to_string(dim));
        }
        *out = new hg_regularizer{Regularizer::group_lasso(std::move(gs))};
        return HG_OK;
    });
}

void hg_regularizer_free(hg_regularizer* r) { delete r; }

/* ---- inner solver ------------------------------------------------------ */

int hg_pgd_solve(const hg_dataset* d, const hg_regularizer* reg, double lambda,
                 double tol, int max_iters, double* w, int warm, int* iters,
                 double* residual, int* converged) {
    if (int rc = require(d); rc != HG_OK) return rc;
    if (int rc = require(reg); rc != HG_OK) return rc;
    if (int rc = require(w); rc != HG_OK) return rc;
    return guarded([&]() {
        const SufficientStats stats = compute_stats(d->data);
        PgdConfig cfg;
        cfg.alpha = 1.0 / spectral_radius(stats.phi);
        cfg.tol = tol;
        cfg.max_iters = max_iters;
        Eigen::VectorXd start;
        const Eigen::VectorXd* start_ptr = nullptr;
        if (warm != 0) {
            start = Eigen::Map<const Eigen::VectorXd>(w, d->data.cols());
            start_ptr = &start;
        }
        PgdResult res = pgd_solve(stats, reg->reg, lambda, cfg, start_ptr);
        for (int j = 0; j < d->data.cols(); ++j) {
            w[j] = res.w(j);
        }
        if (iters != nullptr) *iters = res.iters;
        if (residual != nullptr) *residual = res.residual;
        if (converged != nullptr) *converged = res.converged ? 1 : 0;
        return HG_OK;
    });
}

int hg_lambda_max(const hg_dataset* d, double* out) {
    if (int rc = require(d); rc != HG_OK) return rc;
    if (int rc = require(out); rc != HG_OK) return rc;
    return guarded([&]() {
        *out = lambda_max(compute_stats(d->data));
        return HG_OK;
    });
}

/* ---- validation -------------------------------------------------------- */

int hg_validation_error(const hg_dataset* d, const hg_regularizer* reg,
                        const char* scheme, double lambda, double inner_tol,
                        double* out) {
    if (int rc = require(d); rc != HG_OK) return rc;
    if (int rc = require(reg); rc != HG_OK) return rc;
    if (int rc = require(scheme); rc != HG_OK) return rc;
    if (int rc = require(out); rc != HG_OK) return rc;
    return guarded([&]() {
        PgdConfig cfg;
        cfg.tol = inner_tol;
        *out = validation_error(d->data, reg->reg, parse_scheme(scheme), lambda, cfg);
        return HG_OK;
    });
}

int hg_test_error(const hg_dataset* test, const double* w, int p, double* out) {
    if (int rc = require(test); rc != HG_OK) return rc;
    if (int rc = require(w); rc != HG_OK) return rc;
    if (int rc = require(out); rc != HG_OK) return rc;
    return guarded([&]() {
        Eigen::VectorXd wv = Eigen::Map<const Eigen::VectorXd>(w, p);
        *out = test_error(test->data, wv);
        return HG_OK;
    });
}

int hg_grid_search(const hg_dataset* d, const hg_regularizer* reg,
                   const char* scheme, const double* lambdas, int n_lambdas,
                   double inner_tol, const hg_dataset* test, hg_curve** out) {
    if (int rc = require(d); rc != HG_OK) return rc;
    if (int rc = require(reg); rc != HG_OK) return rc;
    if (int rc = require(scheme); rc != HG_OK) return rc;
    if (int rc = require(lambdas); rc != HG_OK) return rc;
    if (int rc = require(out); rc != HG_OK) return rc;
    return guarded([&]() {
        if (n_lambdas < 1) {
            throw InvalidArgument("grid search: empty grid");
        }
        std::vector<double> grid(lambdas, lambdas + n_lambdas);
        PgdConfig cfg;
        cfg.tol = inner_tol;
        ErrorCurve curve =
            grid_search(d->data, reg->reg, parse_scheme(scheme), std::move(grid),
                        cfg, test != nullptr ? &test->data : nullptr);
        *out = new hg_curve{std::move(curve)};
        return HG_OK;
    });
}

int hg_curve_size(const hg_curve* c, int* out) {
    if (int rc = require(c); rc != HG_OK) return rc;
    if (int rc = require(out); rc != HG_OK) return rc;
    *out = static_cast<int>(c->curve.points.size());
    return HG_OK;
}

int hg_curve_point(const hg_curve* c, int i, double* lambda, double* loo_err,
                   double* test_err) {
    if (int rc = require(c); rc != HG_OK) return rc;
    if (i < 0 || i >= static_cast<int>(c->curve.points.size())) {
        return fail(HG_ERR_INVALID, "curve index out of range");
    }
    const auto& pt = c->curve.points[static_cast<std::size_t>(i)];
    if (lambda != nullptr) *lambda = pt.lambda;
    if (loo_err != nullptr) *loo_err = pt.loo_error;
    if (test_err != nullptr) {
        *test_err = pt.test_error.value_or(std::nan(""));
    }
    return HG_OK;
}

int hg_curve_argmin(const hg_curve* c, int* index) {
    if (int rc = require(c); rc != HG_OK) return rc;
    if (int rc = require(index); rc != HG_OK) return rc;
    *index = c->curve.argmin;
    return HG_OK;
}

int hg_curve_save_csv(const hg_curve* c, const char* path) {
    if (int rc = require(c); rc != HG_OK) return rc;
    if (int rc = require(path); rc != HG_OK) return rc;
    return guarded([&]() {
        write_curve_csv(c->curve, path);
        return HG_OK;
    });
}

void hg_curve_free(hg_curve* c) { delete c; }

/* ---- hyper-subgradient descent ----------------------------------------- */

int hg_hyper_options_init(hg_hyper_options* opts) {
    if (int rc = require(opts); rc != HG_OK) return rc;
    opts->beta = 6e-5;
    opts->lambda_init = -1.0;
    opts->max_outer = 0;
    opts->outer_tol = 0.0;
    opts->min_lambda_step = 0.0;
    opts->inner_tol = 1e-3;
    opts->inner_max_iters = 50000;
    opts->z_mode = 0;
    opts->threads = 1;
    return HG_OK;
}

int hg_hsgd_run(const hg_dataset* d, const hg_regularizer* reg,
                const char* scheme, const hg_hyper_options* opts,
                hg_trajectory** out) {
    if (int rc = require(d); rc != HG_OK) return rc;
    if (int rc = require(reg); rc != HG_OK) return rc;
    if (int rc = require(scheme); rc != HG_OK) return rc;
    if (int rc = require(opts); rc != HG_OK) return rc;
    if (int rc = require(out); rc != HG_OK) return rc;
    return guarded([&]() {
        HyperConfig hc = to_hyper_config(*opts, false);
        HyperTrajectory traj = hsgd_run(d->data, reg->reg, parse_scheme(scheme),
                                        hc, opts->threads);
        *out = new hg_trajectory{std::move(traj)};
        return HG_OK;
    });
}

int hg_ohsgd_run(const hg_dataset* d, const hg_regularizer* reg,
                 const char* scheme, const hg_hyper_options* opts,
                 hg_trajectory** out) {
    if (int rc = require(d); rc != HG_OK) return rc;
    if (int rc = require(reg); rc != HG_OK) return rc;
    if (int rc = require(scheme); rc != HG_OK) return rc;
    if (int rc = require(opts); rc != HG_OK) return rc;
    if (int rc = require(out); rc != HG_OK) return rc;
    return guarded([&]() {
        HyperConfig hc = to_hyper_config(*opts, true);
        HyperTrajectory traj =
            ohsgd_run(d->data, reg->reg, parse_scheme(scheme), hc);
        *out = new hg_trajectory{std::move(traj)};
        return HG_OK;
    });
}

int hg_fd_hypergradient(const hg_dataset* d, const hg_regularizer* reg,
                        const char* scheme, double lambda, double delta,
                        double inner_tol, double* out) {
    if (int rc = require(d); rc != HG_OK) return rc;
    if (int rc = require(reg); rc != HG_OK) return rc;
    if (int rc = require(scheme); rc != HG_OK) return rc;
    if (int rc = require(out); rc != HG_OK) return rc;
    return guarded([&]() {
        *out = fd_hypergradient(d->data, reg->reg, parse_scheme(scheme), lambda,
                                delta, inner_tol);
        return HG_OK;
    });
}

int hg_trajectory_size(const hg_trajectory* t, long* out) {
    if (int rc = require(t); rc != HG_OK) return rc;
    if (int rc = require(out); rc != HG_OK) return rc;
    *out = static_cast<long>(t->traj.records.size());
    return HG_OK;
}

int hg_trajectory_row(const hg_trajectory* t, long i, long* k, int* fold_j,
                      double* lambda, double* lambda_trailing_avg,
                      double* hypergrad, long* cum_inner_iters) {
    if (int rc = require(t); rc != HG_OK) return rc;
    if (i < 0 || i >= static_cast<long>(t->traj.records.size())) {
        return fail(HG_ERR_INVALID, "trajectory index out of range");
    }
    const auto& rec = t->traj.records[static_cast<std::size_t>(i)];
    if (k != nullptr) *k = rec.k;
    if (fold_j != nullptr) *fold_j = rec.fold_j;
    if (lambda != nullptr) *lambda = rec.lambda;
    if (lambda_trailing_avg != nullptr) *lambda_trailing_avg = rec.lambda_trailing_avg;
    if (hypergrad != nullptr) *hypergrad = rec.hypergrad;
    if (cum_inner_iters != nullptr) *cum_inner_iters = rec.cum_inner_iters;
    return HG_OK;
}

int hg_trajectory_lambda_star(const hg_trajectory* t, double* out) {
    if (int rc = require(t); rc != HG_OK) return rc;
    if (int rc = require(out); rc != HG_OK) return rc;
    *out = t->traj.lambda_star;
    return HG_OK;
}

int hg_trajectory_total_inner_iters(const hg_trajectory* t, long* out) {
    if (int rc = require(t); rc != HG_OK) return rc;
    if (int rc = require(out); rc != HG_OK) return rc;
    *out = t->traj.total_inner_iters;
    return HG_OK;
}

int hg_trajectory_save_csv(const hg_trajectory* t, const char* path) {
    if (int rc = require(t); rc != HG_OK) return rc;
    if (int rc = require(path); rc != HG_OK) return rc;
    return guarded([&]() {
        write_trajectory_csv(t->traj, path);
        return HG_OK;
    });
}

void hg_trajectory_free(hg_trajectory* t) { delete t; }

/* ---- experiment harness ------------------------------------------------ */

int hg_config_create(hg_config** out) {
    if (int rc = require(out); rc != HG_OK) return rc;
    *out = new hg_config{};
    return HG_OK;
}

int hg_config_load(const char* path, hg_config** out) {
    if (int rc = require(path); rc != HG_OK) return rc;
    if (int rc = require(out); rc != HG_OK) return rc;
    return guarded([&]() {
        auto cfg = std::make_unique<hg_config>();
        cfg->cfg = parse_config_file(path);
        *out = cfg.release();
        return HG_OK;
    });
}

int hg_config_set(hg_config* cfg, const char* key, const char* value) {
    if (int rc = require(cfg); rc != HG_OK) return rc;
    if (int rc = require(key); rc != HG_OK) return rc;
    if (int rc = require(value); rc != HG_OK) return rc;
    return guarded([&]() {
        config_set(cfg->cfg, key, value);
        return HG_OK;
    });
}

int hg_config_validate(hg_config* cfg) {
    if (int rc = require(cfg); rc != HG_OK) return rc;
    return guarded([&]() {
        validate_config(cfg->cfg);
        return HG_OK;
    });
}

const char* hg_config_echo(hg_config* cfg) {
    if (cfg == nullptr) {
        return "";
    }
    cfg->echo = config_echo(cfg->cfg);
    return cfg->echo.c_str();
}

int hg_experiment_run(const hg_config* cfg) {
    if (int rc = require(cfg); rc != HG_OK) return rc;
    return guarded([&]() {
        run_experiment(cfg->cfg);
        return HG_OK;
    });
}

void hg_config_free(hg_config* cfg) { delete cfg; }

} // extern "C"
