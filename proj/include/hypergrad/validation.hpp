#pragma once

#include "hypergrad/solver.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hypergrad {

/// How validation samples and their training batches are formed.
struct ValidationScheme {
    enum class Kind { HeldOut, KFold, Loo };

    Kind kind = Kind::Loo;
    double fraction = 0.2;    // held-out validation share
    int n_folds = 10;         // k-fold
    std::uint64_t seed = 0;   // k-fold shuffle seed

    static ValidationScheme loo() { return {}; }
    static ValidationScheme held_out(double fraction);
    static ValidationScheme k_fold(int n_folds, std::uint64_t seed);
};

/// Parse "loo", "kfold:<k>[:<seed>]", or "heldout:<fraction>".
ValidationScheme parse_scheme(const std::string& text);
std::string scheme_to_string(const ValidationScheme& s);

/// One validation fold: the validation sample indices plus the sufficient
/// statistics (and label energy) of its training batch.
struct Fold {
    std::vector<int> val_indices;
    SufficientStats stats;
    double label_energy = 0.0;
};

struct FoldSet {
    std::vector<Fold> folds;
    int total_val() const;
};

/// Held-out: one fold, validation = trailing round(fraction*N) rows.
/// K-fold: seeded shuffle split into n_folds near-equal parts.
/// LOO: N folds with per-fold stats produced by rank-one downdates.
FoldSet make_folds(const ValidationScheme& scheme, const Dataset& d,
                   const SufficientStats& global_stats);

/// Per-fold warm starts carried across repeated solves.
struct WarmCache {
    std::vector<Eigen::VectorXd> w;
    std::vector<char> valid;
    void reset(std::size_t n) {
        w.assign(n, Eigen::VectorXd());
        valid.assign(n, 0);
    }
    bool empty() const { return w.empty(); }
};

struct ValidationOutcome {
    double error = 0.0;
    int nonconverged_folds = 0;
    long inner_iters = 0;
};

/// Mean squared validation error at lambda, (1/|V|) sum (y_j - x_j^T w_j)^2,
/// each w_j solved on its fold's training batch. cfg.alpha <= 0 resolves to
/// 1/spectral_radius of the fold-set's parent stats (pass via `alpha`).
ValidationOutcome validation_error_on_folds(const Dataset& d,
                                            const FoldSet& folds,
                                            const Regularizer& reg,
                                            double lambda, double alpha,
                                            const PgdConfig& cfg,
                                            WarmCache* cache = nullptr,
                                            int threads = 1);

/// Convenience form building folds from the scheme.
double validation_error(const Dataset& d, const Regularizer& reg,
                        const ValidationScheme& scheme, double lambda,
                        const PgdConfig& cfg);

struct CurvePoint {
    double lambda = 0.0;
    double loo_error = 0.0;
    std::optional<double> test_error;
};

struct ErrorCurve {
    std::vector<CurvePoint> points; // lambda strictly increasing
    int argmin = 0;                 // index of smallest loo_error
    bool any_nonconverged = false;
    long total_inner_iters = 0;
};

/// Validation error per grid lambda (descending warm-started sweep,
/// ascending output), plus test error of the full-train solution per lambda
/// when `test` is given.
ErrorCurve grid_search(const Dataset& d, const Regularizer& reg,
                       const ValidationScheme& scheme,
                       std::vector<double> grid, const PgdConfig& cfg,
                       const Dataset* test = nullptr, int threads = 1);

/// Mean squared prediction error on a held-out set.
double test_error(const Dataset& test, const Eigen::VectorXd& w);

/// size logarithmically spaced lambdas in [min_factor*lambda_max, lambda_max].
std::vector<double> default_lambda_grid(const SufficientStats& stats,
                                        int size = 50,
                                        double min_factor = 1e-3);

/// CSV serialization: header `lambda,loo_error[,test_error]`, shortest
/// round-trip numerals.
void write_curve_csv(const ErrorCurve& curve, const std::string& path);

} // namespace hypergrad
