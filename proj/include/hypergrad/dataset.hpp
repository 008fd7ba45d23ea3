#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

namespace hypergrad {

/// Supervised regression data: row i of `inputs` is the sample x_i, labels(i)
/// its scalar target. Entries must be finite; dimensions must agree.
struct Dataset {
    Eigen::MatrixXd inputs; // N x P
    Eigen::VectorXd labels; // N

    Dataset() = default;
    Dataset(Eigen::MatrixXd x, Eigen::VectorXd y);

    int rows() const { return static_cast<int>(inputs.rows()); }
    int cols() const { return static_cast<int>(inputs.cols()); }

    /// Mean squared label, (1/N) sum y_i^2. Pairs with SufficientStats when
    /// evaluating quadratic objectives.
    double label_energy() const;
};

/// Averaged second moments of a sample batch:
///   phi = (1/count) sum x_i x_i^T,   r = (1/count) sum y_i x_i.
struct SufficientStats {
    Eigen::MatrixXd phi; // P x P, symmetric PSD
    Eigen::VectorXd r;   // P
    int count = 0;
};

SufficientStats compute_stats(const Dataset& d);

/// Removes one aggregated sample by the rank-one identity
///   phi_j = (N*phi - x x^T)/(N-1),  r_j = (N*r - y x)/(N-1).
SufficientStats loo_downdate(const SufficientStats& s,
                             const Eigen::Ref<const Eigen::VectorXd>& x,
                             double y);

/// Largest eigenvalue of a symmetric PSD matrix by power iteration
/// (deterministic all-ones start, relative tolerance `tol`, 10000 iteration
/// cap). Throws InvalidArgument for an all-zero matrix.
double spectral_radius(const Eigen::MatrixXd& phi, double tol = 1e-6);

/// Generator settings for the synthetic sparse-regression data used by the
/// experiment harness: x_i iid standard normal, w_true `sparsity`-sparse with
/// standard-normal values on a uniformly random support, and
/// y_i = w_true^T x_i + eps_i with noise variance ||w_true||^2 / snr so the
/// signal-to-noise power ratio equals `snr`.
struct SyntheticSpec {
    int dim = 100;
    int sparsity = 10;
    int n_train = 200;
    int n_test = 2000;
    double snr = 0.3;
    std::uint64_t seed = 1;

    void validate() const; // throws InvalidArgument
};

struct SyntheticData {
    Dataset train;
    Dataset test;
    Eigen::VectorXd w_true;
};

/// Pure function of its SyntheticSpec: the same settings yield bit-identical
/// data (inputs, support, weights and noise are drawn from fixed substreams
/// of spec.seed).
SyntheticData generate_synthetic(const SyntheticSpec& spec);

/// Reads `P feature columns + 1 label column` CSV ('.' decimal, comma
/// separated). Throws ParseError with a 1-based line number on malformed
/// rows, inconsistent widths, or an empty file.
Dataset load_csv(const std::string& path, bool has_header = false);

/// Writes the canonical CSV form: shortest round-trip decimal per field,
/// '\n' line ends, no header unless requested. load_csv(save_csv(d)) is
/// value-exact and save(load(f)) is byte-identical for canonical files.
void save_csv(const Dataset& d, const std::string& path, bool header = false);

} // namespace hypergrad
