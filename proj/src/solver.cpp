#include "hypergrad/solver.hpp"

#include "hypergrad/errors.hpp"

#include <cmath>

namespace hypergrad {

namespace {

// Distance from zero to g + lambda * dOmega(w) given a precomputed g.
double residual_from_gradient(const Eigen::VectorXd& g, const Regularizer& reg,
                              double lambda, const Eigen::VectorXd& w) {
    double sq = 0.0;
    if (!reg.is_group()) {
        for (Eigen::Index n = 0; n < w.size(); ++n) {
            double c;
            if (w(n) != 0.0) {
                c = g(n) + lambda * (w(n) > 0.0 ? 1.0 : -1.0);
            } else {
                c = std::max(std::abs(g(n)) - lambda, 0.0);
            }
            sq += c * c;
        }
        return std::sqrt(sq);
    }
    const auto& gs = reg.groups();
    for (int k = 0; k < gs.group_count(); ++k) {
        double w_sq = 0.0;
        double g_sq = 0.0;
        for (int idx : gs.group(k)) {
            w_sq += w(idx) * w(idx);
            g_sq += g(idx) * g(idx);
        }
        const double w_norm = std::sqrt(w_sq);
        if (w_norm != 0.0) {
            for (int idx : gs.group(k)) {
                const double c = g(idx) + lambda * w(idx) / w_norm;
                sq += c * c;
            }
        } else {
            const double c = std::max(std::sqrt(g_sq) - lambda, 0.0);
            sq += c * c;
        }
    }
    return std::sqrt(sq);
}

} // namespace

Eigen::VectorXd forward_step(const SufficientStats& stats,
                             const Eigen::VectorXd& w, double alpha) {
    if (w.size() != stats.r.size()) {
        throw InvalidArgument("forward_step: dimension mismatch");
    }
    return w - alpha * (stats.phi * w - stats.r);
}

double objective(const SufficientStats& stats, const Regularizer& reg,
                 double lambda, const Eigen::VectorXd& w, double label_energy) {
    if (w.size() != stats.r.size()) {
        throw InvalidArgument("objective: dimension mismatch");
    }
    const double quad = w.dot(stats.phi * w) - 2.0 * stats.r.dot(w) + label_energy;
    return quad + lambda * penalty(reg, w);
}

double subgradient_residual(const SufficientStats& stats,
                            const Regularizer& reg, double lambda,
                            const Eigen::VectorXd& w) {
    if (w.size() != stats.r.size()) {
        throw InvalidArgument("subgradient_residual: dimension mismatch");
    }
    const Eigen::VectorXd g = stats.phi * w - stats.r;
    return residual_from_gradient(g, reg, lambda, w);
}

PgdResult pgd_solve(const SufficientStats& stats, const Regularizer& reg,
                    double lambda, const PgdConfig& cfg,
                    const Eigen::VectorXd* warm_start) {
    if (!(cfg.alpha > 0.0)) {
        throw InvalidArgument("pgd_solve: alpha must be > 0");
    }
    if (!(cfg.tol > 0.0) || cfg.max_iters < 1) {
        throw InvalidArgument("pgd_solve: tol must be > 0 and max_iters >= 1");
    }
    if (lambda < 0.0) {
        throw InvalidArgument("pgd_solve: lambda must be >= 0");
    }
    const auto p = stats.r.size();
    Eigen::VectorXd w;
    if (warm_start != nullptr && warm_start->size() > 0) {
        if (warm_start->size() != p) {
            throw InvalidArgument("pgd_solve: warm start dimension mismatch");
        }
        w = *warm_start;
    } else {
        w = Eigen::VectorXd::Zero(p);
    }

    const double kappa = cfg.alpha * lambda;
    PgdResult result;
    // One matvec per iteration: the gradient at the fresh iterate serves the
    // stopping test and the next forward step.
    Eigen::VectorXd grad = stats.phi * w - stats.r;
    for (int it = 1; it <= cfg.max_iters; ++it) {
        result.w_f = w - cfg.alpha * grad;
        w = prox(reg, result.w_f, kappa);
        result.iters = it;
        grad = stats.phi * w - stats.r;
        result.residual = residual_from_gradient(grad, reg, lambda, w);
        if (result.residual <= cfg.tol) {
            result.converged = true;
            break;
        }
    }
    result.w = std::move(w);
    return result;
}

double lambda_max(const SufficientStats& stats) {
    return stats.r.lpNorm<Eigen::Infinity>();
}

} // namespace hypergrad
