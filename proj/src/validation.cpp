#include "hypergrad/validation.hpp"

#include "hypergrad/errors.hpp"
#include "hypergrad/rng.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

namespace hypergrad {

namespace {

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

Fold make_fold(const Dataset& d, std::vector<int> val_indices) {
    // Training batch = complement of the fold's validation rows.
    std::vector<char> is_val(static_cast<std::size_t>(d.rows()), 0);
    for (int idx : val_indices) {
        is_val[static_cast<std::size_t>(idx)] = 1;
    }
    const int batch = d.rows() - static_cast<int>(val_indices.size());
    if (batch < 1) {
        throw InvalidArgument("make_folds: a fold has an empty training batch");
    }
    Eigen::MatrixXd x(batch, d.cols());
    Eigen::VectorXd y(batch);
    int row = 0;
    for (int i = 0; i < d.rows(); ++i) {
        if (!is_val[static_cast<std::size_t>(i)]) {
            x.row(row) = d.inputs.row(i);
            y(row) = d.labels(i);
            ++row;
        }
    }
    Fold fold;
    fold.val_indices = std::move(val_indices);
    Dataset batch_data(std::move(x), std::move(y));
    fold.stats = compute_stats(batch_data);
    fold.label_energy = batch_data.label_energy();
    return fold;
}

} // namespace

ValidationScheme ValidationScheme::held_out(double fraction) {
    if (!(fraction > 0.0) || !(fraction < 1.0)) {
        throw InvalidArgument("held_out: fraction must lie in (0, 1)");
    }
    ValidationScheme s;
    s.kind = Kind::HeldOut;
    s.fraction = fraction;
    return s;
}

ValidationScheme ValidationScheme::k_fold(int n_folds, std::uint64_t seed) {
    if (n_folds < 2) {
        throw InvalidArgument("k_fold: n_folds must be >= 2");
    }
    ValidationScheme s;
    s.kind = Kind::KFold;
    s.n_folds = n_folds;
    s.seed = seed;
    return s;
}

ValidationScheme parse_scheme(const std::string& text) {
    if (text == "loo") {
        return ValidationScheme::loo();
    }
    if (text.rfind("kfold:", 0) == 0) {
        const std::string rest = text.substr(6);
        const auto colon = rest.find(':');
        try {
            const int k = std::stoi(rest.substr(0, colon));
            std::uint64_t seed = 0;
            if (colon != std::string::npos) {
                seed = std::stoull(rest.substr(colon + 1));
            }
            return ValidationScheme::k_fold(k, seed);
        } catch (const std::logic_error&) {
            throw InvalidArgument("scheme: cannot parse '" + text + "'");
        }
    }
    if (text.rfind("heldout:", 0) == 0) {
        try {
            return ValidationScheme::held_out(std::stod(text.substr(8)));
        } catch (const std::logic_error&) {
            throw InvalidArgument("scheme: cannot parse '" + text + "'");
        }
    }
    throw InvalidArgument("scheme: expected loo, kfold:<k>[:<seed>] or "
                          "heldout:<fraction>, got '" + text + "'");
}

std::string scheme_to_string(const ValidationScheme& s) {
    switch (s.kind) {
    case ValidationScheme::Kind::Loo:
        return "loo";
    case ValidationScheme::Kind::KFold:
        return "kfold:" + std::to_string(s.n_folds) + ":" + std::to_string(s.seed);
    case ValidationScheme::Kind::HeldOut:
        return "heldout:" + format_double(s.fraction);
    }
    return "loo";
}

int FoldSet::total_val() const {
    int total = 0;
    for (const auto& f : folds) {
        total += static_cast<int>(f.val_indices.size());
    }
    return total;
}

FoldSet make_folds(const ValidationScheme& scheme, const Dataset& d,
                   const SufficientStats& global_stats) {
    const int n = d.rows();
    FoldSet out;
    switch (scheme.kind) {
    case ValidationScheme::Kind::Loo: {
        if (n < 2) {
            throw InvalidArgument("make_folds: LOO needs at least two samples");
        }
        out.folds.reserve(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j) {
            Fold fold;
            fold.val_indices = {j};
            fold.stats = loo_downdate(global_stats, d.inputs.row(j).transpose(),
                                      d.labels(j));
            fold.label_energy = (n * d.label_energy() - d.labels(j) * d.labels(j)) /
                                static_cast<double>(n - 1);
            out.folds.push_back(std::move(fold));
        }
        return out;
    }
    case ValidationScheme::Kind::KFold: {
        if (scheme.n_folds > n) {
            throw InvalidArgument("make_folds: n_folds = " +
                                  std::to_string(scheme.n_folds) + " exceeds N = " +
                                  std::to_string(n));
        }
        std::vector<int> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        Rng rng(scheme.seed);
        for (int i = n - 1; i > 0; --i) {
            const auto j = static_cast<int>(
                rng.uniform_below(static_cast<std::uint64_t>(i + 1)));
            std::swap(order[static_cast<std::size_t>(i)],
                      order[static_cast<std::size_t>(j)]);
        }
        for (int f = 0; f < scheme.n_folds; ++f) {
            std::vector<int> val;
            for (int i = f; i < n; i += scheme.n_folds) {
                val.push_back(order[static_cast<std::size_t>(i)]);
            }
            std::sort(val.begin(), val.end());
            out.folds.push_back(make_fold(d, std::move(val)));
        }
        return out;
    }
    case ValidationScheme::Kind::HeldOut: {
        const int n_val = std::max(1, static_cast<int>(std::lround(
                                          scheme.fraction * static_cast<double>(n))));
        if (n_val >= n) {
            throw InvalidArgument("make_folds: held-out fraction leaves no "
                                  "training rows");
        }
        std::vector<int> val(static_cast<std::size_t>(n_val));
        std::iota(val.begin(), val.end(), n - n_val); // trailing rows validate
        out.folds.push_back(make_fold(d, std::move(val)));
        return out;
    }
    }
    throw InvalidArgument("make_folds: unknown scheme");
}

ValidationOutcome validation_error_on_folds(const Dataset& d,
                                            const FoldSet& folds,
                                            const Regularizer& reg,
                                            double lambda, double alpha,
                                            const PgdConfig& cfg,
                                            WarmCache* cache, int threads) {
    const auto n_folds = folds.folds.size();
    if (cache != nullptr && cache->w.size() != n_folds) {
        cache->reset(n_folds);
    }
    PgdConfig inner = cfg;
    inner.alpha = cfg.alpha > 0.0 ? cfg.alpha : alpha;
    if (!(inner.alpha > 0.0)) {
        throw InvalidArgument("validation_error: no usable step size");
    }

    std::vector<double> errors(n_folds, 0.0);
    std::vector<int> bad(n_folds, 0);
    std::vector<long> iters(n_folds, 0);
    detail::parallel_for(static_cast<int>(n_folds), threads, [&](int fi) {
        const Fold& fold = folds.folds[static_cast<std::size_t>(fi)];
        const Eigen::VectorXd* warm = nullptr;
        if (cache != nullptr && cache->valid[static_cast<std::size_t>(fi)]) {
            warm = &cache->w[static_cast<std::size_t>(fi)];
        }
        PgdResult res = pgd_solve(fold.stats, reg, lambda, inner, warm);
        double err = 0.0;
        for (int j : fold.val_indices) {
            const double resid = d.labels(j) - d.inputs.row(j).dot(res.w);
            err += resid * resid;
        }
        errors[static_cast<std::size_t>(fi)] = err;
        bad[static_cast<std::size_t>(fi)] = res.converged ? 0 : 1;
        iters[static_cast<std::size_t>(fi)] = res.iters;
        if (cache != nullptr) {
            cache->w[static_cast<std::size_t>(fi)] = std::move(res.w);
            cache->valid[static_cast<std::size_t>(fi)] = 1;
        }
    });

    ValidationOutcome out;
    for (std::size_t i = 0; i < n_folds; ++i) { // deterministic reduction order
        out.error += errors[i];
        out.nonconverged_folds += bad[i];
        out.inner_iters += iters[i];
    }
    out.error /= static_cast<double>(folds.total_val());
    return out;
}

double validation_error(const Dataset& d, const Regularizer& reg,
                        const ValidationScheme& scheme, double lambda,
                        const PgdConfig& cfg) {
    if (lambda < 0.0) {
        throw InvalidArgument("validation_error: lambda must be >= 0");
    }
    const SufficientStats stats = compute_stats(d);
    const FoldSet folds = make_folds(scheme, d, stats);
    const double alpha =
        cfg.alpha > 0.0 ? cfg.alpha : 1.0 / spectral_radius(stats.phi);
    return validation_error_on_folds(d, folds, reg, lambda, alpha, cfg).error;
}

ErrorCurve grid_search(const Dataset& d, const Regularizer& reg,
                       const ValidationScheme& scheme,
                       std::vector<double> grid, const PgdConfig& cfg,
                       const Dataset* test, int threads) {
    if (grid.empty()) {
        throw InvalidArgument("grid_search: empty grid");
    }
    for (double v : grid) {
        if (v < 0.0) {
            throw InvalidArgument("grid_search: negative lambda in grid");
        }
    }
    std::sort(grid.begin(), grid.end());
    if (std::adjacent_find(grid.begin(), grid.end()) != grid.end()) {
        throw InvalidArgument("grid_search: duplicate lambda in grid");
    }

    const SufficientStats stats = compute_stats(d);
    const FoldSet folds = make_folds(scheme, d, stats);
    const double alpha =
        cfg.alpha > 0.0 ? cfg.alpha : 1.0 / spectral_radius(stats.phi);

    ErrorCurve curve;
    curve.points.resize(grid.size());
    WarmCache cache;
    Eigen::VectorXd full_warm; // full-train path for the test column
    PgdConfig inner = cfg;
    inner.alpha = alpha;
    // Sweep lambda descending so warm starts track the regularization path.
    for (auto i = static_cast<long>(grid.size()) - 1; i >= 0; --i) {
        const double lam = grid[static_cast<std::size_t>(i)];
        const ValidationOutcome v = validation_error_on_folds(
            d, folds, reg, lam, alpha, inner, &cache, threads);
        CurvePoint& pt = curve.points[static_cast<std::size_t>(i)];
        pt.lambda = lam;
        pt.loo_error = v.error;
        curve.any_nonconverged = curve.any_nonconverged || v.nonconverged_folds > 0;
        curve.total_inner_iters += v.inner_iters;
        if (test != nullptr) {
            const Eigen::VectorXd* warm = full_warm.size() > 0 ? &full_warm : nullptr;
            PgdResult res = pgd_solve(stats, reg, lam, inner, warm);
            pt.test_error = test_error(*test, res.w);
            curve.any_nonconverged = curve.any_nonconverged || !res.converged;
            curve.total_inner_iters += res.iters;
            full_warm = std::move(res.w);
        }
    }
    curve.argmin = 0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        if (curve.points[i].loo_error <
            curve.points[static_cast<std::size_t>(curve.argmin)].loo_error) {
            curve.argmin = static_cast<int>(i);
        }
    }
    return curve;
}

double test_error(const Dataset& test, const Eigen::VectorXd& w) {
    if (w.size() != test.cols()) {
        throw InvalidArgument("test_error: weight dimension mismatch");
    }
    const Eigen::VectorXd resid = test.labels - test.inputs * w;
    return resid.squaredNorm() / static_cast<double>(test.rows());
}

std::vector<double> default_lambda_grid(const SufficientStats& stats, int size,
                                        double min_factor) {
    if (size < 1) {
        throw InvalidArgument("default_lambda_grid: size must be >= 1");
    }
    if (!(min_factor > 0.0) || min_factor > 1.0) {
        throw InvalidArgument("default_lambda_grid: min_factor must lie in (0, 1]");
    }
    const double lam_max = lambda_max(stats);
    std::vector<double> grid(static_cast<std::size_t>(size));
    if (size == 1) {
        grid[0] = lam_max;
        return grid;
    }
    const double log_min = std::log(min_factor * lam_max);
    const double log_max = std::log(lam_max);
    for (int i = 0; i < size; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(size - 1);
        grid[static_cast<std::size_t>(i)] = std::exp(log_min + t * (log_max - log_min));
    }
    grid.back() = lam_max; // exact endpoint
    return grid;
}

void write_curve_csv(const ErrorCurve& curve, const std::string& path) {
    const bool has_test =
        !curve.points.empty() && curve.points.front().test_error.has_value();
    std::string out = has_test ? "lambda,loo_error,test_error\n"
                               : "lambda,loo_error\n";
    for (const auto& pt : curve.points) {
        out += format_double(pt.lambda);
        out += ',';
        out += format_double(pt.loo_error);
        if (has_test) {
            out += ',';
            out += format_double(pt.test_error.value());
        }
        out += '\n';
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("write_curve_csv: cannot open '" + path + "'");
    }
    f << out;
    if (!f) {
        throw IoError("write_curve_csv: write failed for '" + path + "'");
    }
}

} // namespace hypergrad
