#pragma once

#include "hypergrad/validation.hpp"

namespace hypergrad {

/// How the sensitivity system (I - A~ (I - alpha phi_j)) z = B~ is solved.
enum class ZMode {
    LinearSolve,  // dense LU; throws SingularSystemError when singular
    LeastSquares, // minimum-norm least-squares solution
    Iterative,    // fixed-point recursion z <- A~(I - alpha phi_j) z + B~
};

ZMode parse_z_mode(const std::string& text);
std::string z_mode_to_string(ZMode m);

/// Sensitivity of the solver fixed point with respect to lambda: solves
/// (I - A~ (I - alpha phi_j)) z = B~ for the sub-Jacobians evaluated at
/// w_f* = F(w*). LinearSolve throws SingularSystemError on a singular
/// system; the descent drivers catch it and retry with LeastSquares.
Eigen::VectorXd z_tilde(const SufficientStats& stats_j, const SubJacobian& sub,
                        double alpha, ZMode mode);

/// Validation-loss gradient x_j (x_j^T w - y_j). This is half the gradient
/// of the squared error (y_j - x_j^T w)^2; the factor is a fixed convention
/// here and only rescales the outer step size.
Eigen::VectorXd val_gradient(const Eigen::VectorXd& x_j, double y_j,
                             const Eigen::VectorXd& w);

/// Outer-loop settings for hyper-subgradient descent.
struct HyperConfig {
    double beta = 6e-5;                 // constant outer step size
    std::optional<double> lambda_init;  // unset: 0.1 * lambda_max
    int max_outer = 100;                // cap on outer steps k
    double outer_tol = 0.0;             // batch: stop on |hypergrad| <= tol;
                                        // online: stop when the trailing
                                        // average moves <= tol over a sweep
    double min_lambda_step = 0.0;       // batch: also stop when |dlambda|
                                        // falls below this (0 disables)
    PgdConfig inner;                    // alpha resolved to 1/rho(phi)
    ZMode z_mode = ZMode::LinearSolve;
};

/// One outer-iteration record. fold_j is -1 for batch steps; hypergrad is
/// the batch sum (HSGD) or the single stochastic component (OHSGD);
/// lambda_trailing_avg averages lambda over the trailing window used for the
/// reported lambda_star (|V| iterates online, the last iterate in batch mode).
struct TrajectoryRecord {
    long k = 0;
    int fold_j = -1;
    double lambda = 0.0;
    double lambda_trailing_avg = 0.0;
    double hypergrad = 0.0;
    long cum_inner_iters = 0;
    std::optional<double> loo_error;
    int ls_fallbacks = 0;   // singular direct solves downgraded this step
    int nonconverged = 0;   // inner solves that hit max_iters this step
};

struct HyperTrajectory {
    std::vector<TrajectoryRecord> records;
    double lambda_init = 0.0;
    double lambda_star = 0.0; // final trailing average
    double alpha = 0.0;       // inner step size used
    long total_inner_iters = 0;
    int total_ls_fallbacks = 0;
    int total_nonconverged = 0;
};

/// CSV serialization with the harness column set
/// k,fold_j,lambda,lambda_trailing_avg,hypergrad,cum_inner_iters.
void write_trajectory_csv(const HyperTrajectory& t, const std::string& path);

struct FoldHypergrad {
    double component = 0.0; // z~^T sum_{j in fold} x_j (x_j^T w - y_j)
    int inner_iters = 0;
    bool converged = true;
    bool used_fallback = false;
};

/// Hyper-subgradient contribution of one fold at the given lambda. `warm`
/// (when non-null) supplies the inner warm start and receives the solution.
FoldHypergrad fold_hypergradient(const Dataset& d, const Fold& fold,
                                 const Regularizer& reg, double alpha,
                                 double lambda, const PgdConfig& inner,
                                 ZMode z_mode, Eigen::VectorXd* warm);

struct HsgdStepResult {
    double lambda_next = 0.0;
    double hypergrad = 0.0; // batch sum over folds
    TrajectoryRecord record;
};

/// One batch step: per-fold solves (parallelizable; components reduced in
/// ascending fold order), batch hyper-subgradient, projected lambda update
/// lambda <- [lambda - beta * sum_j h_j]_+.
HsgdStepResult hsgd_step(double lambda, const Dataset& d, const FoldSet& folds,
                         const Regularizer& reg, double alpha,
                         const HyperConfig& cfg, WarmCache& cache,
                         long& cum_inner_iters, int threads = 1);

/// Batch hyper-subgradient descent on the validation error.
HyperTrajectory hsgd_run(const Dataset& d, const Regularizer& reg,
                         const ValidationScheme& scheme,
                         const HyperConfig& cfg, int threads = 1,
                         bool record_loo = false);

/// Online variant: step k touches fold j(k) = k mod |V| only, warm-starting
/// from that fold's previous solution; lambda_star is the average of lambda
/// over the final |V| iterates.
HyperTrajectory ohsgd_run(const Dataset& d, const Regularizer& reg,
                          const ValidationScheme& scheme,
                          const HyperConfig& cfg, bool record_loo = false);

/// Central finite difference of the validation error,
/// (V(lambda+delta) - V(lambda-delta)) / (2 delta), with inner solves at
/// tolerance `tol`. Exact-hypergradient checks relate it to the batch sum by
/// sum_j h_j = (|V|/2) * dV/dlambda (lasso, away from kinks).
double fd_hypergradient(const Dataset& d, const Regularizer& reg,
                        const ValidationScheme& scheme, double lambda,
                        double delta, double tol);

} // namespace hypergrad
