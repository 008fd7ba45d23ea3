#include "hypergrad/hypergradient.hpp"

#include "hypergrad/errors.hpp"
#include "oracles.hpp"

#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>

using namespace hypergrad;

namespace {

Dataset random_dataset(int n, int p, std::uint64_t seed) {
    return Dataset(oracles::random_matrix(n, p, seed),
                   oracles::random_vector(n, seed + 8000));
}

// Two scalar samples whose LOO error has an interior optimum at lambda = 2.5:
// fold 1 trains on (x=2, y=1) (phi=4, r=2) and validates (x=1, y=3);
// fold 2 trains on (x=1, y=3) (phi=1, r=3) and validates (x=2, y=1).
Dataset scalar_toy() {
    Eigen::MatrixXd x(2, 1);
    x << 1, 2;
    Eigen::VectorXd y(2);
    y << 3, 1;
    return Dataset(x, y);
}

double scalar_lasso(double phi, double r, double lambda) {
    if (r > lambda) {
        return (r - lambda) / phi;
    }
    if (r < -lambda) {
        return (r + lambda) / phi;
    }
    return 0.0;
}

// Dense-grid argmin of the scalar toy's closed-form LOO error.
double toy_grid_argmin(double step) {
    double best_lambda = 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (double lam = 0.0; lam <= 4.0; lam += step) {
        const double w1 = scalar_lasso(4.0, 2.0, lam);
        const double w2 = scalar_lasso(1.0, 3.0, lam);
        const double err = 0.5 * ((3.0 - w1) * (3.0 - w1) +
                                  (1.0 - 2.0 * w2) * (1.0 - 2.0 * w2));
        if (err < best) {
            best = err;
            best_lambda = lam;
        }
    }
    return best_lambda;
}

} // namespace

TEST_CASE("scalar z_tilde equals the analytic lasso sensitivity") {
    // active coordinate: A~ = [1], B~ = [-alpha], phi = [phi]
    const double phi = 2.3;
    const double alpha = 1.0 / phi;
    SufficientStats stats;
    stats.phi = Eigen::MatrixXd::Constant(1, 1, phi);
    stats.r = Eigen::VectorXd::Constant(1, 2.0);
    stats.count = 5;
    SubJacobian sub;
    sub.a_diag = Eigen::VectorXd::Constant(1, 1.0);
    sub.b = Eigen::VectorXd::Constant(1, -alpha);
    for (const ZMode mode :
         {ZMode::LinearSolve, ZMode::LeastSquares, ZMode::Iterative}) {
        const Eigen::VectorXd z = z_tilde(stats, sub, alpha, mode);
        CHECK(z(0) == doctest::Approx(-1.0 / phi).epsilon(1e-9));
    }
    // matches d/dlambda of the closed-form solution w*(lambda) = (r-lambda)/phi
    const double h = 1e-6;
    const double fd = (scalar_lasso(phi, 2.0, 0.5 + h) -
                       scalar_lasso(phi, 2.0, 0.5 - h)) /
                      (2 * h);
    CHECK(z_tilde(stats, sub, alpha, ZMode::LinearSolve)(0) ==
          doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("fully thresholded coordinates have zero sensitivity") {
    const Dataset d = random_dataset(12, 4, 1);
    const SufficientStats stats = compute_stats(d);
    const double alpha = 1.0 / spectral_radius(stats.phi);
    SubJacobian sub;
    sub.a_diag = Eigen::VectorXd::Zero(4);
    sub.b = Eigen::VectorXd::Zero(4);
    for (const ZMode mode :
         {ZMode::LinearSolve, ZMode::LeastSquares, ZMode::Iterative}) {
        CHECK(z_tilde(stats, sub, alpha, mode).isZero(0.0));
    }
}

TEST_CASE("z_tilde matches a finite difference of the solver fixed point") {
    // strongly convex instance so the lasso solution path is unique
    const Dataset d = random_dataset(60, 10, 2);
    const SufficientStats stats = compute_stats(d);
    const double alpha = 1.0 / spectral_radius(stats.phi);
    const Regularizer reg = Regularizer::lasso();
    PgdConfig cfg;
    cfg.alpha = alpha;
    cfg.tol = 1e-12;
    cfg.max_iters = 1000000;
    const double lambda = 0.3 * lambda_max(stats);

    const PgdResult at = pgd_solve(stats, reg, lambda, cfg);
    // keep clear of kinks so the sub-Jacobian is the true Jacobian
    for (int n = 0; n < 10; ++n) {
        REQUIRE(std::abs(std::abs(at.w_f(n)) - alpha * lambda) > 1e-5);
    }
    const SubJacobian sub = subderivatives(reg, at.w_f, alpha, lambda);
    const Eigen::VectorXd z = z_tilde(stats, sub, alpha, ZMode::LinearSolve);

    const double delta = 1e-5;
    const PgdResult hi = pgd_solve(stats, reg, lambda + delta, cfg);
    const PgdResult lo = pgd_solve(stats, reg, lambda - delta, cfg);
    const Eigen::VectorXd fd = (hi.w - lo.w) / (2 * delta);
    CHECK((z - fd).lpNorm<Eigen::Infinity>() <= 1e-4);
}

TEST_CASE("group z_tilde equals the analytic sensitivity on isotropic data") {
    // phi = c*I: the active-group solution is w(lambda) = (r/c)[1 - lambda/||r||]+
    // with derivative -r/(c ||r||), and the diagonal sub-Jacobian choice is
    // exact there.
    const int p = 4;
    const double c = 1.8;
    SufficientStats stats;
    stats.phi = c * Eigen::MatrixXd::Identity(p, p);
    stats.r = oracles::random_vector(p, 55);
    stats.count = 40;
    const Regularizer reg =
        Regularizer::group_lasso(GroupStructure::contiguous({p}));
    const double alpha = 1.0 / c;
    const double lambda = 0.4 * stats.r.norm();

    PgdConfig cfg;
    cfg.alpha = alpha;
    cfg.tol = 1e-12;
    cfg.max_iters = 200000;
    const PgdResult res = pgd_solve(stats, reg, lambda, cfg);
    const SubJacobian sub = subderivatives(reg, res.w_f, alpha, lambda);
    const Eigen::VectorXd z = z_tilde(stats, sub, alpha, ZMode::LinearSolve);
    const Eigen::VectorXd expected = -stats.r / (c * stats.r.norm());
    CHECK((z - expected).lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("direct and iterative z modes agree under contraction") {
    // large lambda keeps the active set small, so the recursion contracts fast
    const Dataset d = random_dataset(50, 10, 3);
    const SufficientStats stats = compute_stats(d);
    const double alpha = 1.0 / spectral_radius(stats.phi);
    const Regularizer reg = Regularizer::lasso();
    PgdConfig cfg;
    cfg.alpha = alpha;
    cfg.tol = 1e-12;
    cfg.max_iters = 500000;
    const double lambda = 0.6 * lambda_max(stats);
    const PgdResult at = pgd_solve(stats, reg, lambda, cfg);
    const SubJacobian sub = subderivatives(reg, at.w_f, alpha, lambda);

    // contraction certificate for the fixed-point recursion
    Eigen::MatrixXd t = Eigen::MatrixXd::Identity(10, 10) - alpha * stats.phi;
    t = sub.a_diag.asDiagonal() * t;
    const Eigen::MatrixXd tt = t.transpose() * t;
    REQUIRE(std::sqrt(oracles::top_eigenvalue(tt)) < 0.9);

    const Eigen::VectorXd direct = z_tilde(stats, sub, alpha, ZMode::LinearSolve);
    const Eigen::VectorXd iterative = z_tilde(stats, sub, alpha, ZMode::Iterative);
    CHECK((direct - iterative).lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("rank-deficient active systems raise in direct mode") {
    // N-1 < P makes phi_j singular; lambda = 0 activates every coordinate
    const Dataset d = random_dataset(5, 8, 4);
    const SufficientStats stats = compute_stats(d);
    const double alpha = 1.0 / spectral_radius(stats.phi);
    SubJacobian sub;
    sub.a_diag = Eigen::VectorXd::Ones(8);
    sub.b = -alpha * Eigen::VectorXd::Ones(8);
    CHECK_THROWS_AS(z_tilde(stats, sub, alpha, ZMode::LinearSolve),
                    SingularSystemError);
    // the least-squares route still produces a finite answer
    const Eigen::VectorXd z = z_tilde(stats, sub, alpha, ZMode::LeastSquares);
    CHECK(z.allFinite());
}

TEST_CASE("fold_hypergradient falls back to least squares when singular") {
    const Dataset d = random_dataset(6, 8, 5);
    const SufficientStats stats = compute_stats(d);
    const FoldSet folds = make_folds(ValidationScheme::loo(), d, stats);
    const double alpha = 1.0 / spectral_radius(stats.phi);
    PgdConfig inner;
    inner.tol = 1e-10;
    inner.max_iters = 200000;
    const FoldHypergrad part =
        fold_hypergradient(d, folds.folds[0], Regularizer::lasso(), alpha, 0.0,
                           inner, ZMode::LinearSolve, nullptr);
    CHECK(part.used_fallback);
    CHECK(std::isfinite(part.component));
}

TEST_CASE("val_gradient basics") {
    Eigen::VectorXd x(2);
    x << 1, 0;
    Eigen::VectorXd w(2);
    w << 2, 5;
    CHECK(val_gradient(x, 2.0, w).isZero(0.0)); // x.w == y
    const Eigen::VectorXd g = val_gradient(x, 0.0, w);
    CHECK(g(0) == 2.0);
    CHECK(g(1) == 0.0);
}

TEST_CASE("val_gradient is the half squared-error gradient") {
    const Eigen::VectorXd x = oracles::random_vector(6, 6);
    const Eigen::VectorXd w = oracles::random_vector(6, 7);
    const double y = 0.4;
    const Eigen::VectorXd g = val_gradient(x, y, w);
    const double h = 1e-6;
    for (int n = 0; n < 6; ++n) {
        Eigen::VectorXd up = w;
        Eigen::VectorXd down = w;
        up(n) += h;
        down(n) -= h;
        const auto half_sq = [&](const Eigen::VectorXd& v) {
            const double resid = y - x.dot(v);
            return 0.5 * resid * resid;
        };
        const double fd = (half_sq(up) - half_sq(down)) / (2 * h);
        CHECK(g(n) == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("hsgd_step keeps lambda fixed at a stationary point") {
    const Dataset d = random_dataset(10, 3, 8);
    const SufficientStats stats = compute_stats(d);
    const FoldSet folds = make_folds(ValidationScheme::loo(), d, stats);
    const double alpha = 1.0 / spectral_radius(stats.phi);
    double lam = 0.0;
    for (const Fold& f : folds.folds) {
        lam = std::max(lam, lambda_max(f.stats));
    }
    lam *= 1.5; // every fold fully shrunk: hypergradient is exactly zero
    HyperConfig cfg;
    cfg.beta = 0.1;
    cfg.inner.tol = 1e-10;
    WarmCache cache;
    long cum = 0;
    const HsgdStepResult step =
        hsgd_step(lam, d, folds, Regularizer::lasso(), alpha, cfg, cache, cum);
    CHECK(step.hypergrad == 0.0);
    CHECK(step.lambda_next == lam);
}

TEST_CASE("hsgd_step projects negative lambda onto zero") {
    const Dataset d = scalar_toy();
    const SufficientStats stats = compute_stats(d);
    const FoldSet folds = make_folds(ValidationScheme::loo(), d, stats);
    const double alpha = 1.0 / spectral_radius(stats.phi);
    HyperConfig cfg;
    cfg.beta = 100.0; // step far past the constraint
    cfg.inner.tol = 1e-10;
    WarmCache cache;
    long cum = 0;
    // at lambda = 2.6 the toy hypergradient is positive (= 4*lambda - 10)
    const HsgdStepResult step = hsgd_step(2.6, d, folds, Regularizer::lasso(),
                                          alpha, cfg, cache, cum);
    CHECK(step.hypergrad > 0.0);
    CHECK(step.lambda_next == 0.0);
}

TEST_CASE("hsgd on the scalar toy finds the grid-search optimum") {
    const Dataset d = scalar_toy();
    HyperConfig cfg;
    cfg.beta = 0.2;
    cfg.lambda_init = 1.0;
    cfg.max_outer = 400;
    cfg.outer_tol = 1e-10;
    cfg.inner.tol = 1e-12;
    cfg.inner.max_iters = 100000;
    const HyperTrajectory traj =
        hsgd_run(d, Regularizer::lasso(), ValidationScheme::loo(), cfg);
    const double lambda_grid = toy_grid_argmin(1e-4);
    CHECK(std::abs(traj.lambda_star - lambda_grid) <= 2e-4);
    CHECK(std::abs(traj.lambda_star - 2.5) <= 2e-4); // known optimum
}

TEST_CASE("hsgd stops immediately at a stationary start") {
    const Dataset d = random_dataset(8, 3, 9);
    const SufficientStats stats = compute_stats(d);
    const FoldSet folds = make_folds(ValidationScheme::loo(), d, stats);
    double lam = 0.0;
    for (const Fold& f : folds.folds) {
        lam = std::max(lam, lambda_max(f.stats));
    }
    HyperConfig cfg;
    cfg.beta = 0.05;
    cfg.lambda_init = 2.0 * lam;
    cfg.max_outer = 50;
    cfg.inner.tol = 1e-10;
    const HyperTrajectory traj =
        hsgd_run(d, Regularizer::lasso(), ValidationScheme::loo(), cfg);
    CHECK(traj.records.size() == 1);
    CHECK(traj.lambda_star == 2.0 * lam);
}

TEST_CASE("hsgd lands within one grid step of the loo argmin") {
    const Dataset d = random_dataset(20, 5, 10);
    const SufficientStats stats = compute_stats(d);

    PgdConfig inner;
    inner.tol = 1e-8;
    const std::vector<double> grid = default_lambda_grid(stats, 200, 1e-3);
    const ErrorCurve curve = grid_search(d, Regularizer::lasso(),
                                         ValidationScheme::loo(), grid, inner);
    const double lambda_grid =
        curve.points[static_cast<std::size_t>(curve.argmin)].lambda;

    HyperConfig cfg;
    cfg.inner.tol = 1e-8;
    // probe step so the first update moves lambda by ~2% of lambda_max
    const FoldSet folds = make_folds(ValidationScheme::loo(), d, stats);
    const double alpha = 1.0 / spectral_radius(stats.phi);
    cfg.beta = 1.0;
    WarmCache probe_cache;
    long probe_cum = 0;
    const HsgdStepResult probe =
        hsgd_step(0.1 * lambda_max(stats), d, folds, Regularizer::lasso(), alpha,
                  cfg, probe_cache, probe_cum);
    cfg.beta = 0.02 * lambda_max(stats) / std::max(std::abs(probe.hypergrad), 1e-12);
    cfg.max_outer = 600;
    cfg.min_lambda_step = 1e-7;
    const HyperTrajectory traj =
        hsgd_run(d, Regularizer::lasso(), ValidationScheme::loo(), cfg);
    const double ratio = std::pow(1e3, 1.0 / 199.0); // one log-grid step
    CHECK(traj.lambda_star >= lambda_grid / ratio);
    CHECK(traj.lambda_star <= lambda_grid * ratio);
}

TEST_CASE("hsgd trajectories rise early and flatten out") {
    SyntheticSpec spec;
    spec.dim = 40;
    spec.sparsity = 5;
    spec.n_train = 80;
    spec.n_test = 2;
    spec.snr = 0.5;
    spec.seed = 2024;
    const SyntheticData syn = generate_synthetic(spec);
    HyperConfig cfg;
    cfg.beta = 6e-5;
    cfg.max_outer = 120;
    cfg.inner.tol = 1e-3;
    const HyperTrajectory traj =
        hsgd_run(syn.train, Regularizer::lasso(), ValidationScheme::loo(), cfg);
    REQUIRE(traj.records.size() == 120);
    const double travel =
        std::abs(traj.lambda_star - traj.lambda_init);
    REQUIRE(travel > 0.0);
    // most of the movement happens in the first half...
    const double mid = traj.records[59].lambda;
    CHECK(std::abs(mid - traj.lambda_init) >= 0.8 * travel);
    // ...and the tail stays inside a narrow band around the final value
    for (std::size_t i = 90; i < traj.records.size(); ++i) {
        CHECK(std::abs(traj.records[i].lambda - traj.lambda_star) <=
              0.1 * travel);
    }
}

TEST_CASE("ohsgd with a single fold takes the same update steps as hsgd") {
    const Dataset d = random_dataset(10, 3, 11);
    HyperConfig cfg;
    cfg.beta = 0.005;
    cfg.max_outer = 25;
    cfg.inner.tol = 1e-9;
    const ValidationScheme held = ValidationScheme::held_out(0.3);
    const HyperTrajectory batch =
        hsgd_run(d, Regularizer::lasso(), held, cfg);
    const HyperTrajectory online =
        ohsgd_run(d, Regularizer::lasso(), held, cfg);
    // Identical updates; only the stopping rules differ between the two.
    const std::size_t common =
        std::min(batch.records.size(), online.records.size());
    REQUIRE(common >= 5);
    for (std::size_t i = 0; i < common; ++i) {
        CHECK(batch.records[i].lambda == online.records[i].lambda);
        CHECK(batch.records[i].hypergrad == online.records[i].hypergrad);
        CHECK(batch.records[i].cum_inner_iters ==
              online.records[i].cum_inner_iters);
    }
}

TEST_CASE("stochastic components at frozen lambda sum to the batch value") {
    const Dataset d = random_dataset(9, 4, 12);
    const SufficientStats stats = compute_stats(d);
    const ValidationScheme scheme = ValidationScheme::k_fold(3, 5);
    const FoldSet folds = make_folds(scheme, d, stats);
    const double alpha = 1.0 / spectral_radius(stats.phi);

    HyperConfig cfg;
    cfg.beta = 1e-18; // freeze lambda for one sweep
    cfg.lambda_init = 0.15 * lambda_max(stats);
    cfg.max_outer = 3;
    cfg.inner.tol = 1e-11;
    const HyperTrajectory online =
        ohsgd_run(d, Regularizer::lasso(), scheme, cfg);
    REQUIRE(online.records.size() == 3);
    double stochastic_sum = 0.0;
    for (const auto& rec : online.records) {
        stochastic_sum += rec.hypergrad;
    }

    WarmCache cache;
    long cum = 0;
    const HsgdStepResult batch =
        hsgd_step(*cfg.lambda_init, d, folds, Regularizer::lasso(), alpha, cfg,
                  cache, cum);
    CHECK(stochastic_sum / 3.0 ==
          doctest::Approx(batch.hypergrad / 3.0).epsilon(1e-12));
}

TEST_CASE("trajectory bookkeeping invariants") {
    const Dataset d = random_dataset(12, 4, 13);
    HyperConfig cfg;
    cfg.beta = 0.05;
    cfg.max_outer = 40;
    cfg.inner.tol = 1e-8;
    for (const bool online : {false, true}) {
        const HyperTrajectory traj =
            online ? ohsgd_run(d, Regularizer::lasso(), ValidationScheme::loo(), cfg)
                   : hsgd_run(d, Regularizer::lasso(), ValidationScheme::loo(), cfg);
        REQUIRE(!traj.records.empty());
        long prev_cum = 0;
        long prev_k = 0;
        for (const auto& rec : traj.records) {
            CHECK(rec.lambda >= 0.0);
            CHECK(rec.cum_inner_iters >= prev_cum);
            CHECK(rec.k == prev_k + 1);
            prev_cum = rec.cum_inner_iters;
            prev_k = rec.k;
            if (online) {
                CHECK(rec.fold_j >= 0);
                CHECK(rec.fold_j < d.rows());
            } else {
                CHECK(rec.fold_j == -1);
            }
        }
        CHECK(traj.records.back().cum_inner_iters == traj.total_inner_iters);
        CHECK(traj.lambda_star == traj.records.back().lambda_trailing_avg);
    }
}

TEST_CASE("ohsgd cycles folds in index order and averages the last sweep") {
    const Dataset d = random_dataset(5, 2, 14);
    HyperConfig cfg;
    cfg.beta = 0.01;
    cfg.max_outer = 10; // two full sweeps over 5 folds
    cfg.inner.tol = 1e-9;
    const HyperTrajectory traj =
        ohsgd_run(d, Regularizer::lasso(), ValidationScheme::loo(), cfg);
    REQUIRE(traj.records.size() == 10);
    for (std::size_t i = 0; i < traj.records.size(); ++i) {
        const long k = traj.records[i].k;
        CHECK(traj.records[i].fold_j == static_cast<int>(k % 5));
    }
    double avg = 0.0;
    for (std::size_t i = 5; i < 10; ++i) {
        avg += traj.records[i].lambda;
    }
    avg /= 5.0;
    CHECK(traj.lambda_star == doctest::Approx(avg).epsilon(1e-15));
}

TEST_CASE("fd_hypergradient matches the analytic derivative on a smooth patch") {
    // strong signal, tiny lambda: every coordinate stays active in every fold,
    // so each fold solution is w_j(lambda) = phi_j^{-1} (r_j - lambda s_j)
    Eigen::MatrixXd x = oracles::random_matrix(12, 3, 15);
    Eigen::VectorXd w_true(3);
    w_true << 5, -4, 6;
    Eigen::VectorXd y = x * w_true;
    const Dataset d(x, y);
    const SufficientStats stats = compute_stats(d);
    const double lambda = 0.005 * lambda_max(stats);

    PgdConfig cfg;
    cfg.tol = 1e-12;
    cfg.max_iters = 1000000;
    const FoldSet folds = make_folds(ValidationScheme::loo(), d, stats);
    const double alpha = 1.0 / spectral_radius(stats.phi);
    double analytic = 0.0;
    for (std::size_t j = 0; j < folds.folds.size(); ++j) {
        const Fold& fold = folds.folds[j];
        PgdConfig inner = cfg;
        inner.alpha = alpha;
        const PgdResult res = pgd_solve(fold.stats, Regularizer::lasso(), lambda, inner);
        Eigen::VectorXd sign(3);
        for (int n = 0; n < 3; ++n) {
            REQUIRE(res.w(n) != 0.0);
            sign(n) = res.w(n) > 0.0 ? 1.0 : -1.0;
        }
        const Eigen::VectorXd dw = fold.stats.phi.ldlt().solve(-sign);
        const int vi = fold.val_indices[0];
        const double resid = d.labels(vi) - d.inputs.row(vi).dot(res.w);
        analytic += 2.0 * resid * (-d.inputs.row(vi).dot(dw));
    }
    analytic /= static_cast<double>(d.rows());

    const double fd = fd_hypergradient(d, Regularizer::lasso(),
                                       ValidationScheme::loo(), lambda, 1e-6,
                                       1e-12);
    CHECK(fd == doctest::Approx(analytic).epsilon(1e-5));
}

TEST_CASE("fixed-point and finite-difference hypergradients agree") {
    const Dataset d = random_dataset(14, 6, 16);
    const SufficientStats stats = compute_stats(d);
    const FoldSet folds = make_folds(ValidationScheme::loo(), d, stats);
    const double alpha = 1.0 / spectral_radius(stats.phi);
    const double lambda = 0.25 * lambda_max(stats);

    HyperConfig cfg;
    cfg.beta = 1.0;
    cfg.inner.tol = 1e-11;
    cfg.inner.max_iters = 500000;
    WarmCache cache;
    long cum = 0;
    const HsgdStepResult step = hsgd_step(lambda, d, folds, Regularizer::lasso(),
                                          alpha, cfg, cache, cum);
    const double fd = fd_hypergradient(d, Regularizer::lasso(),
                                       ValidationScheme::loo(), lambda, 1e-5,
                                       1e-11);
    // batch sum vs (|V|/2) * dV/dlambda
    const double scaled_fd = 0.5 * static_cast<double>(d.rows()) * fd;
    CHECK(std::abs(step.hypergrad - scaled_fd) /
              std::max(1.0, std::abs(scaled_fd)) <=
          1e-3);
}

TEST_CASE("fd_hypergradient validates its arguments") {
    const Dataset d = random_dataset(6, 2, 17);
    CHECK_THROWS_AS(fd_hypergradient(d, Regularizer::lasso(),
                                     ValidationScheme::loo(), 0.1, 0.2, 1e-6),
                    InvalidArgument);
    CHECK_THROWS_AS(fd_hypergradient(d, Regularizer::lasso(),
                                     ValidationScheme::loo(), 0.1, 0.0, 1e-6),
                    InvalidArgument);
}

TEST_CASE("record_loo attaches the validation error to each record") {
    const Dataset d = random_dataset(8, 3, 18);
    HyperConfig cfg;
    cfg.beta = 0.02;
    cfg.max_outer = 5;
    cfg.inner.tol = 1e-9;
    const HyperTrajectory traj = hsgd_run(d, Regularizer::lasso(),
                                          ValidationScheme::loo(), cfg, 1,
                                          /*record_loo=*/true);
    PgdConfig inner;
    inner.tol = 1e-9;
    for (const auto& rec : traj.records) {
        REQUIRE(rec.loo_error.has_value());
        const double direct = validation_error(d, Regularizer::lasso(),
                                               ValidationScheme::loo(),
                                               rec.lambda, inner);
        CHECK(*rec.loo_error == doctest::Approx(direct).epsilon(1e-9));
    }
}

TEST_CASE("z_mode strings round-trip") {
    CHECK(parse_z_mode("linear_solve") == ZMode::LinearSolve);
    CHECK(parse_z_mode("least_squares") == ZMode::LeastSquares);
    CHECK(parse_z_mode("iterative") == ZMode::Iterative);
    CHECK(z_mode_to_string(ZMode::Iterative) == "iterative");
    CHECK_THROWS_AS(parse_z_mode("direct"), InvalidArgument);
}
