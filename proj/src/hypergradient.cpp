#include "hypergrad/hypergradient.hpp"

#include "hypergrad/errors.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <vector>

namespace hypergrad {

namespace {

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// System matrix I - A~ (I - alpha phi). A~ is a 0/1 diagonal, so inactive
// coordinates contribute plain identity rows.
Eigen::MatrixXd z_system_matrix(const SufficientStats& stats,
                                const SubJacobian& sub, double alpha) {
    const auto p = stats.phi.rows();
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(p, p) - alpha * stats.phi;
    m = (sub.a_diag.asDiagonal() * m).eval();
    m = (Eigen::MatrixXd::Identity(p, p) - m).eval();
    return m;
}

double trailing_average(const std::vector<double>& history, std::size_t window) {
    const std::size_t n = std::min(window, history.size());
    double sum = 0.0;
    for (std::size_t i = history.size() - n; i < history.size(); ++i) {
        sum += history[i];
    }
    return sum / static_cast<double>(n);
}

struct RunState {
    HyperTrajectory trajectory;
    std::vector<double> lambda_history;
    long cum_inner = 0;
};

void push_record(RunState& state, long k, int fold_j, double lambda,
                 std::size_t window, double hypergrad, int fallbacks,
                 int nonconverged, std::optional<double> loo) {
    state.lambda_history.push_back(lambda);
    TrajectoryRecord rec;
    rec.k = k;
    rec.fold_j = fold_j;
    rec.lambda = lambda;
    rec.lambda_trailing_avg = trailing_average(state.lambda_history, window);
    rec.hypergrad = hypergrad;
    rec.cum_inner_iters = state.cum_inner;
    rec.loo_error = loo;
    rec.ls_fallbacks = fallbacks;
    rec.nonconverged = nonconverged;
    state.trajectory.records.push_back(std::move(rec));
    state.trajectory.total_ls_fallbacks += fallbacks;
    state.trajectory.total_nonconverged += nonconverged;
}

} // namespace

ZMode parse_z_mode(const std::string& text) {
    if (text == "linear_solve") {
        return ZMode::LinearSolve;
    }
    if (text == "least_squares") {
        return ZMode::LeastSquares;
    }
    if (text == "iterative") {
        return ZMode::Iterative;
    }
    throw InvalidArgument("z_mode: expected linear_solve, least_squares or "
                          "iterative, got '" + text + "'");
}

std::string z_mode_to_string(ZMode m) {
    switch (m) {
    case ZMode::LinearSolve:
        return "linear_solve";
    case ZMode::LeastSquares:
        return "least_squares";
    case ZMode::Iterative:
        return "iterative";
    }
    return "linear_solve";
}

Eigen::VectorXd z_tilde(const SufficientStats& stats_j, const SubJacobian& sub,
                        double alpha, ZMode mode) {
    if (!(alpha > 0.0)) {
        throw InvalidArgument("z_tilde: alpha must be > 0");
    }
    const auto p = stats_j.phi.rows();
    if (sub.a_diag.size() != p || sub.b.size() != p) {
        throw InvalidArgument("z_tilde: sub-Jacobian dimension mismatch");
    }
    switch (mode) {
    case ZMode::LinearSolve: {
        // Rows with a_diag = 0 are identity rows, so the system is exactly
        // block triangular: z_n = b_n there, and the active block solves
        // alpha phi[A,A] z_A = b_A - alpha phi[A,I] z_I.
        std::vector<Eigen::Index> active;
        active.reserve(static_cast<std::size_t>(p));
        for (Eigen::Index n = 0; n < p; ++n) {
            if (sub.a_diag(n) != 0.0) {
                active.push_back(n);
            }
        }
        Eigen::VectorXd z = sub.b;
        const auto n_active = static_cast<Eigen::Index>(active.size());
        if (n_active == 0) {
            return z;
        }
        Eigen::MatrixXd block(n_active, n_active);
        Eigen::VectorXd rhs(n_active);
        for (Eigen::Index i = 0; i < n_active; ++i) {
            const Eigen::Index row = active[static_cast<std::size_t>(i)];
            double coupled = 0.0;
            Eigen::Index col_idx = 0;
            for (Eigen::Index col = 0; col < p; ++col) {
                if (col_idx < n_active &&
                    active[static_cast<std::size_t>(col_idx)] == col) {
                    block(i, col_idx) = alpha * stats_j.phi(row, col);
                    ++col_idx;
                } else if (sub.a_diag(col) == 0.0) {
                    coupled += alpha * stats_j.phi(row, col) * sub.b(col);
                }
            }
            rhs(i) = sub.b(row) - coupled;
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(block);
        if (!lu.isInvertible()) {
            throw SingularSystemError("z_tilde: singular sensitivity system "
                                      "(active rank " + std::to_string(lu.rank()) +
                                      " of " + std::to_string(n_active) + ")");
        }
        const Eigen::VectorXd z_active = lu.solve(rhs);
        for (Eigen::Index i = 0; i < n_active; ++i) {
            z(active[static_cast<std::size_t>(i)]) = z_active(i);
        }
        return z;
    }
    case ZMode::LeastSquares: {
        const Eigen::MatrixXd m = z_system_matrix(stats_j, sub, alpha);
        // Minimum-norm least-squares solution.
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(m);
        return cod.solve(sub.b);
    }
    case ZMode::Iterative: {
        Eigen::MatrixXd t = Eigen::MatrixXd::Identity(p, p) - alpha * stats_j.phi;
        t = (sub.a_diag.asDiagonal() * t).eval();
        Eigen::VectorXd z = Eigen::VectorXd::Zero(p);
        const int max_iters = 10 * static_cast<int>(p);
        for (int it = 0; it < max_iters; ++it) {
            Eigen::VectorXd next = t * z + sub.b;
            const double delta = (next - z).lpNorm<Eigen::Infinity>();
            z = std::move(next);
            if (delta <= 1e-10) {
                break;
            }
        }
        return z;
    }
    }
    throw InvalidArgument("z_tilde: unknown mode");
}

Eigen::VectorXd val_gradient(const Eigen::VectorXd& x_j, double y_j,
                             const Eigen::VectorXd& w) {
    if (x_j.size() != w.size()) {
        throw InvalidArgument("val_gradient: dimension mismatch");
    }
    return x_j * (x_j.dot(w) - y_j);
}

FoldHypergrad fold_hypergradient(const Dataset& d, const Fold& fold,
                                 const Regularizer& reg, double alpha,
                                 double lambda, const PgdConfig& inner,
                                 ZMode z_mode, Eigen::VectorXd* warm) {
    PgdConfig cfg = inner;
    cfg.alpha = alpha;
    const Eigen::VectorXd* start =
        (warm != nullptr && warm->size() > 0) ? warm : nullptr;
    PgdResult res = pgd_solve(fold.stats, reg, lambda, cfg, start);

    const SubJacobian sub = subderivatives(reg, res.w_f, alpha, lambda);
    FoldHypergrad out;
    Eigen::VectorXd z;
    try {
        z = z_tilde(fold.stats, sub, alpha, z_mode);
    } catch (const SingularSystemError&) {
        z = z_tilde(fold.stats, sub, alpha, ZMode::LeastSquares);
        out.used_fallback = true;
    }

    Eigen::VectorXd grad_sum = Eigen::VectorXd::Zero(d.cols());
    for (int j : fold.val_indices) {
        grad_sum += val_gradient(d.inputs.row(j).transpose(), d.labels(j), res.w);
    }
    out.component = z.dot(grad_sum);
    out.inner_iters = res.iters;
    out.converged = res.converged;
    if (warm != nullptr) {
        *warm = std::move(res.w);
    }
    return out;
}

HsgdStepResult hsgd_step(double lambda, const Dataset& d, const FoldSet& folds,
                         const Regularizer& reg, double alpha,
                         const HyperConfig& cfg, WarmCache& cache,
                         long& cum_inner_iters, int threads) {
    if (lambda < 0.0) {
        throw InvalidArgument("hsgd_step: lambda must be >= 0");
    }
    const auto n_folds = folds.folds.size();
    if (cache.w.size() != n_folds) {
        cache.reset(n_folds);
    }
    std::vector<FoldHypergrad> parts(n_folds);
    detail::parallel_for(static_cast<int>(n_folds), threads, [&](int fi) {
        auto idx = static_cast<std::size_t>(fi);
        parts[idx] = fold_hypergradient(d, folds.folds[idx], reg, alpha, lambda,
                                        cfg.inner, cfg.z_mode, &cache.w[idx]);
        cache.valid[idx] = 1;
    });

    HsgdStepResult out;
    int fallbacks = 0;
    int nonconverged = 0;
    for (const auto& part : parts) { // ascending fold order
        out.hypergrad += part.component;
        cum_inner_iters += part.inner_iters;
        fallbacks += part.used_fallback ? 1 : 0;
        nonconverged += part.converged ? 0 : 1;
    }
    out.lambda_next = std::max(0.0, lambda - cfg.beta * out.hypergrad);
    out.record.fold_j = -1;
    out.record.lambda = out.lambda_next;
    out.record.hypergrad = out.hypergrad;
    out.record.cum_inner_iters = cum_inner_iters;
    out.record.ls_fallbacks = fallbacks;
    out.record.nonconverged = nonconverged;
    return out;
}

HyperTrajectory hsgd_run(const Dataset& d, const Regularizer& reg,
                         const ValidationScheme& scheme,
                         const HyperConfig& cfg, int threads,
                         bool record_loo) {
    if (!(cfg.beta > 0.0)) {
        throw InvalidArgument("hsgd_run: beta must be > 0");
    }
    const SufficientStats stats = compute_stats(d);
    const FoldSet folds = make_folds(scheme, d, stats);
    const double alpha =
        cfg.inner.alpha > 0.0 ? cfg.inner.alpha : 1.0 / spectral_radius(stats.phi);

    RunState state;
    state.trajectory.alpha = alpha;
    double lambda = cfg.lambda_init.value_or(0.1 * lambda_max(stats));
    if (lambda < 0.0) {
        throw InvalidArgument("hsgd_run: lambda_init must be >= 0");
    }
    state.trajectory.lambda_init = lambda;

    WarmCache cache;
    for (long k = 1; k <= cfg.max_outer; ++k) {
        HsgdStepResult step = hsgd_step(lambda, d, folds, reg, alpha, cfg, cache,
                                        state.cum_inner, threads);
        const double moved = std::abs(step.lambda_next - lambda);
        lambda = step.lambda_next;
        std::optional<double> loo;
        if (record_loo) {
            WarmCache scratch;
            loo = validation_error_on_folds(d, folds, reg, lambda, alpha,
                                            cfg.inner, &scratch, threads)
                      .error;
        }
        push_record(state, k, -1, lambda, 1, step.hypergrad,
                    step.record.ls_fallbacks, step.record.nonconverged, loo);
        if (std::abs(step.hypergrad) <= cfg.outer_tol) {
            break;
        }
        if (cfg.min_lambda_step > 0.0 && moved <= cfg.min_lambda_step) {
            break;
        }
    }
    state.trajectory.total_inner_iters = state.cum_inner;
    state.trajectory.lambda_star =
        state.trajectory.records.empty()
            ? lambda
            : state.trajectory.records.back().lambda_trailing_avg;
    return state.trajectory;
}

HyperTrajectory ohsgd_run(const Dataset& d, const Regularizer& reg,
                          const ValidationScheme& scheme,
                          const HyperConfig& cfg, bool record_loo) {
    if (!(cfg.beta > 0.0)) {
        throw InvalidArgument("ohsgd_run: beta must be > 0");
    }
    const SufficientStats stats = compute_stats(d);
    const FoldSet folds = make_folds(scheme, d, stats);
    const double alpha =
        cfg.inner.alpha > 0.0 ? cfg.inner.alpha : 1.0 / spectral_radius(stats.phi);
    const auto n_folds = folds.folds.size();

    RunState state;
    state.trajectory.alpha = alpha;
    double lambda = cfg.lambda_init.value_or(0.1 * lambda_max(stats));
    if (lambda < 0.0) {
        throw InvalidArgument("ohsgd_run: lambda_init must be >= 0");
    }
    state.trajectory.lambda_init = lambda;

    WarmCache cache;
    cache.reset(n_folds);
    double prev_sweep_avg = lambda;
    for (long k = 1; k <= cfg.max_outer; ++k) {
        const auto j = static_cast<std::size_t>(k % static_cast<long>(n_folds));
        FoldHypergrad part =
            fold_hypergradient(d, folds.folds[j], reg, alpha, lambda, cfg.inner,
                               cfg.z_mode, &cache.w[j]);
        cache.valid[j] = 1;
        state.cum_inner += part.inner_iters;
        lambda = std::max(0.0, lambda - cfg.beta * part.component);
        std::optional<double> loo;
        if (record_loo) {
            WarmCache scratch;
            loo = validation_error_on_folds(d, folds, reg, lambda, alpha,
                                            cfg.inner, &scratch)
                      .error;
        }
        push_record(state, k, static_cast<int>(j), lambda, n_folds,
                    part.component, part.used_fallback ? 1 : 0,
                    part.converged ? 0 : 1, loo);
        // Sweep boundary: stop once the trailing average settles.
        if (k % static_cast<long>(n_folds) == 0) {
            const double avg = state.trajectory.records.back().lambda_trailing_avg;
            if (cfg.outer_tol > 0.0 && k >= 2 * static_cast<long>(n_folds) &&
                std::abs(avg - prev_sweep_avg) <= cfg.outer_tol) {
                break;
            }
            prev_sweep_avg = avg;
        }
    }
    state.trajectory.total_inner_iters = state.cum_inner;
    state.trajectory.lambda_star =
        state.trajectory.records.empty()
            ? lambda
            : state.trajectory.records.back().lambda_trailing_avg;
    return state.trajectory;
}

double fd_hypergradient(const Dataset& d, const Regularizer& reg,
                        const ValidationScheme& scheme, double lambda,
                        double delta, double tol) {
    if (!(delta > 0.0)) {
        throw InvalidArgument("fd_hypergradient: delta must be > 0");
    }
    if (lambda - delta < 0.0) {
        throw InvalidArgument("fd_hypergradient: lambda - delta must be >= 0");
    }
    const SufficientStats stats = compute_stats(d);
    const FoldSet folds = make_folds(scheme, d, stats);
    const double alpha = 1.0 / spectral_radius(stats.phi);
    PgdConfig cfg;
    cfg.tol = tol;
    const double hi =
        validation_error_on_folds(d, folds, reg, lambda + delta, alpha, cfg).error;
    const double lo =
        validation_error_on_folds(d, folds, reg, lambda - delta, alpha, cfg).error;
    return (hi - lo) / (2.0 * delta);
}

void write_trajectory_csv(const HyperTrajectory& t, const std::string& path) {
    std::string out = "k,fold_j,lambda,lambda_trailing_avg,hypergrad,cum_inner_iters\n";
    for (const auto& rec : t.records) {
        out += std::to_string(rec.k);
        out += ',';
        out += std::to_string(rec.fold_j);
        out += ',';
        out += format_double(rec.lambda);
        out += ',';
        out += format_double(rec.lambda_trailing_avg);
        out += ',';
        out += format_double(rec.hypergrad);
        out += ',';
        out += std::to_string(rec.cum_inner_iters);
        out += '\n';
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("write_trajectory_csv: cannot open '" + path + "'");
    }
    f << out;
    if (!f) {
        throw IoError("write_trajectory_csv: write failed for '" + path + "'");
    }
}

} // namespace hypergrad
