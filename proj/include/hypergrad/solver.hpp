#pragma once

#include "hypergrad/dataset.hpp"
#include "hypergrad/regularizer.hpp"

namespace hypergrad {

/// Inner-solver settings. alpha <= 0 means "let the caller resolve it"
/// (high-level drivers use 1/spectral_radius(phi) of the full training
/// stats); pgd_solve itself requires alpha > 0.
struct PgdConfig {
    double alpha = 0.0;
    double tol = 1e-3;
    int max_iters = 50000;
};

struct PgdResult {
    Eigen::VectorXd w;   // final iterate
    Eigen::VectorXd w_f; // pre-prox point; w == prox(w_f, alpha*lambda) exactly
    int iters = 0;
    double residual = 0.0;
    bool converged = false;
};

/// Gradient step w - alpha (phi w - r).
Eigen::VectorXd forward_step(const SufficientStats& stats,
                             const Eigen::VectorXd& w, double alpha);

/// Quadratic-plus-penalty value
///   w^T phi w - 2 r^T w + label_energy + lambda * Omega(w),
/// i.e. the mean squared error plus penalty. Note the solver's fixed point
/// 0 in (phi w - r) + lambda dOmega(w) is the minimizer of this function
/// with penalty weight 2*lambda (the gradient step carries phi w - r, half
/// the mean-square gradient).
double objective(const SufficientStats& stats, const Regularizer& reg,
                 double lambda, const Eigen::VectorXd& w, double label_energy);

/// Euclidean distance from zero to the subdifferential
/// (phi w - r) + lambda dOmega(w) at w.
double subgradient_residual(const SufficientStats& stats,
                            const Regularizer& reg, double lambda,
                            const Eigen::VectorXd& w);

/// Proximal gradient descent: iterate w <- prox(forward_step(w), alpha*lambda)
/// from `warm_start` (or zero) until subgradient_residual <= tol or
/// max_iters. Always performs at least one iteration so the returned (w, w_f)
/// pair is prox-consistent. Non-convergence is reported in the result, not
/// thrown.
PgdResult pgd_solve(const SufficientStats& stats, const Regularizer& reg,
                    double lambda, const PgdConfig& cfg,
                    const Eigen::VectorXd* warm_start = nullptr);

/// Smallest lambda that zeroes every lasso weight: ||r||_inf.
double lambda_max(const SufficientStats& stats);

} // namespace hypergrad
