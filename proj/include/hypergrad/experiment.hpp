#pragma once

#include "hypergrad/hypergradient.hpp"

#include <string>
#include <vector>

namespace hypergrad {

/// Fully keyed experiment configuration. Every field maps 1:1 to a config
/// file key (and a CLI flag); validate() fills mode-dependent defaults and
/// rejects constraint violations with the offending field name.
struct ExperimentConfig {
    std::string mode = "hsgd"; // hsgd | ohsgd | grid | exp1 | exp2
    std::uint64_t seed = 1;

    // synthetic data (ignored when train_csv is given)
    int dim = 100;
    int sparsity = 10;
    int n_train = 200;
    int n_test = 2000;
    double snr = 0.3;

    // optional external data
    std::string train_csv;
    std::string test_csv;
    bool csv_has_header = false;

    // regularizer
    std::string regularizer = "lasso"; // lasso | group
    std::vector<int> group_sizes;      // required for group

    // validation scheme
    std::string scheme = "loo"; // loo | kfold | heldout
    int kfold_k = 10;
    std::optional<std::uint64_t> kfold_seed; // default: seed
    double heldout_fraction = 0.2;

    // outer loop
    double beta = 6e-5;
    std::optional<double> lambda_init; // unset: 0.1 * lambda_max
    std::optional<int> max_outer;      // unset: mode default (see validate)
    double outer_tol = 0.0;
    double min_lambda_step = 0.0;
    std::string z_mode = "linear_solve";

    // inner loop
    double inner_tol = 1e-3;
    int inner_max_iters = 50000;

    // sweeps (unset: defaults below; an explicitly empty list is an error
    // for the modes that use it)
    std::optional<std::vector<double>> betas; // exp1; exp2 accepts one entry
    std::optional<std::vector<double>> tols;  // exp2

    // grid mode
    int grid_size = 50;
    double grid_min_factor = 1e-3;

    std::string output_dir = "out";
    int threads = 1;

    int max_outer_hsgd() const { return max_outer.value_or(100); }
    int max_outer_ohsgd() const { return max_outer.value_or(20000); }
    std::vector<double> betas_or_default() const {
        return betas.value_or(std::vector<double>{6e-5, 2e-5, 2e-4});
    }
    std::vector<double> tols_or_default() const {
        return tols.value_or(std::vector<double>{1e-1, 1e-3, 1e-6});
    }
    /// exp2 step size: the single betas entry when given, else `beta`.
    double exp2_beta() const {
        return (betas.has_value() && betas->size() == 1) ? betas->front() : beta;
    }
};

/// Parse `key = value` lines ('#' comments, blank lines allowed). Unknown
/// keys and malformed values raise ConfigError with the field path.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

/// Apply one key=value override (same keys as the file format).
void config_set(ExperimentConfig& cfg, const std::string& key,
                const std::string& value);

/// Constraint checks (sparsity <= dim, nonempty sweeps per mode, group sizes
/// summing to dim, ...). Throws ConfigError naming the field(s).
void validate_config(const ExperimentConfig& cfg);

/// Canonical `key = value` listing of the resolved configuration.
std::string config_echo(const ExperimentConfig& cfg);

struct RunSummary {
    std::string algorithm; // hsgd | ohsgd
    double beta = 0.0;
    double inner_tol = 0.0;
    double lambda_star = 0.0;
    double lambda_init = 0.0;
    long outer_iters = 0;
    long cum_inner_iters = 0;
    std::string trajectory_file;
};

struct ExperimentResult {
    std::vector<RunSummary> runs;
    std::optional<double> grid_argmin_lambda;
    long total_inner_iters = 0;
    double wall_time_seconds = 0.0;
    std::vector<std::string> files; // everything written, relative to output_dir
    std::string output_dir;
};

/// Runs the configured experiment and writes trajectory/curve CSVs, the
/// dataset (when generated), and summary.json under cfg.output_dir.
/// Throws ConfigError for invalid configuration (including an unusable
/// output directory) and Error subclasses for runtime failures.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

} // namespace hypergrad
