#include "hypergrad/dataset.hpp"

#include "hypergrad/errors.hpp"
#include "hypergrad/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace hypergrad {

namespace {

// Substream ids of SyntheticSpec.seed.
enum : std::uint64_t {
    kStreamTrainInputs = 0,
    kStreamSupport = 1,
    kStreamWeights = 2,
    kStreamTrainNoise = 3,
    kStreamTestInputs = 4,
    kStreamTestNoise = 5,
};

void append_double(std::string& out, double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

bool parse_double(std::string_view field, double& out) {
    // from_chars rejects leading whitespace; fields are pre-trimmed.
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

Eigen::MatrixXd gaussian_matrix(int rows, int cols, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            m(i, j) = rng.gaussian();
        }
    }
    return m;
}

} // namespace

Dataset::Dataset(Eigen::MatrixXd x, Eigen::VectorXd y)
    : inputs(std::move(x)), labels(std::move(y)) {
    if (inputs.rows() != labels.size()) {
        throw InvalidArgument("dataset: " + std::to_string(inputs.rows()) +
                              " input rows vs " + std::to_string(labels.size()) +
                              " labels");
    }
    if (inputs.rows() < 1 || inputs.cols() < 1) {
        throw InvalidArgument("dataset: needs at least one sample and one feature");
    }
    if (!inputs.allFinite() || !labels.allFinite()) {
        throw InvalidArgument("dataset: non-finite entry");
    }
}

double Dataset::label_energy() const {
    return labels.squaredNorm() / static_cast<double>(labels.size());
}

SufficientStats compute_stats(const Dataset& d) {
    if (d.rows() < 1) {
        throw InvalidArgument("compute_stats: empty dataset");
    }
    const double inv_n = 1.0 / static_cast<double>(d.rows());
    SufficientStats s;
    s.phi = (d.inputs.transpose() * d.inputs) * inv_n;
    s.phi = ((s.phi + s.phi.transpose()) * 0.5).eval(); // exact symmetry
    s.r = (d.inputs.transpose() * d.labels) * inv_n;
    s.count = d.rows();
    return s;
}

SufficientStats loo_downdate(const SufficientStats& s,
                             const Eigen::Ref<const Eigen::VectorXd>& x,
                             double y) {
    if (s.count < 2) {
        throw InvalidArgument("loo_downdate: need at least two aggregated samples");
    }
    if (x.size() != s.r.size()) {
        throw InvalidArgument("loo_downdate: sample dimension mismatch");
    }
    const double n = static_cast<double>(s.count);
    const double inv = 1.0 / (n - 1.0);
    SufficientStats out;
    out.phi = (n * s.phi - x * x.transpose()) * inv;
    out.r = (n * s.r - y * x) * inv;
    out.count = s.count - 1;
    return out;
}

double spectral_radius(const Eigen::MatrixXd& phi, double tol) {
    const auto p = phi.rows();
    if (p == 0 || phi.cols() != p) {
        throw InvalidArgument("spectral_radius: matrix must be square and nonempty");
    }
    if (phi.isZero(0.0)) {
        throw InvalidArgument("spectral_radius: zero matrix");
    }
    Eigen::VectorXd v = Eigen::VectorXd::Ones(p) / std::sqrt(static_cast<double>(p));
    // If the start vector lies in the null space, fall back to basis vectors.
    Eigen::VectorXd u = phi * v;
    for (int j = 0; u.norm() == 0.0 && j < p; ++j) {
        v = Eigen::VectorXd::Unit(p, j);
        u = phi * v;
    }
    double value = 0.0;
    const int max_iters = 10000;
    for (int it = 0; it < max_iters; ++it) {
        const double norm = u.norm();
        if (norm == 0.0) {
            return 0.0;
        }
        v = u / norm;
        u = phi * v;
        const double next = v.dot(u); // Rayleigh quotient; eigenvalues are >= 0
        if (std::abs(next - value) <= tol * std::abs(next)) {
            return next;
        }
        value = next;
    }
    return value;
}

void SyntheticSpec::validate() const {
    if (dim < 1) {
        throw InvalidArgument("synthetic: dim must be >= 1");
    }
    if (sparsity < 0 || sparsity > dim) {
        throw InvalidArgument("synthetic: sparsity must lie in [0, dim]");
    }
    if (n_train < 2) {
        throw InvalidArgument("synthetic: n_train must be >= 2");
    }
    if (n_test < 1) {
        throw InvalidArgument("synthetic: n_test must be >= 1");
    }
    if (!(snr > 0.0)) {
        throw InvalidArgument("synthetic: snr must be > 0");
    }
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();

    // Support: partial Fisher-Yates over 0..dim-1, sorted afterwards.
    Rng support_rng = substream(spec.seed, kStreamSupport);
    std::vector<int> indices(spec.dim);
    for (int i = 0; i < spec.dim; ++i) {
        indices[i] = i;
    }
    for (int i = 0; i < spec.sparsity; ++i) {
        const auto j = i + static_cast<int>(support_rng.uniform_below(
                               static_cast<std::uint64_t>(spec.dim - i)));
        std::swap(indices[i], indices[j]);
    }
    std::vector<int> support(indices.begin(), indices.begin() + spec.sparsity);
    std::sort(support.begin(), support.end());

    Rng weight_rng = substream(spec.seed, kStreamWeights);
    Eigen::VectorXd w_true = Eigen::VectorXd::Zero(spec.dim);
    for (int idx : support) {
        w_true(idx) = weight_rng.gaussian();
    }

    // Signal power over x ~ N(0, I) is ||w_true||^2; the noise variance is
    // chosen so signal/noise equals snr as a linear power ratio.
    const double signal_var = w_true.squaredNorm();
    const double noise_std = std::sqrt(signal_var / spec.snr);

    Rng train_input_rng = substream(spec.seed, kStreamTrainInputs);
    Rng train_noise_rng = substream(spec.seed, kStreamTrainNoise);
    Eigen::MatrixXd x_train = gaussian_matrix(spec.n_train, spec.dim, train_input_rng);
    Eigen::VectorXd y_train = x_train * w_true;
    for (int i = 0; i < spec.n_train; ++i) {
        y_train(i) += noise_std * train_noise_rng.gaussian();
    }

    Rng test_input_rng = substream(spec.seed, kStreamTestInputs);
    Rng test_noise_rng = substream(spec.seed, kStreamTestNoise);
    Eigen::MatrixXd x_test = gaussian_matrix(spec.n_test, spec.dim, test_input_rng);
    Eigen::VectorXd y_test = x_test * w_true;
    for (int i = 0; i < spec.n_test; ++i) {
        y_test(i) += noise_std * test_noise_rng.gaussian();
    }

    SyntheticData out;
    out.train = Dataset(std::move(x_train), std::move(y_train));
    out.test = Dataset(std::move(x_test), std::move(y_test));
    out.w_true = std::move(w_true);
    return out;
}

Dataset load_csv(const std::string& path, bool has_header) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("load_csv: cannot open '" + path + "'");
    }
    std::vector<std::vector<double>> rows;
    std::string line;
    long line_no = 0;
    long width = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (has_header && line_no == 1) {
            continue;
        }
        std::string_view rest = line;
        if (trim(rest).empty()) {
            throw ParseError("blank row", line_no);
        }
        std::vector<double> values;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            const std::string_view field =
                trim(std::string_view(line).substr(start, comma - start));
            double v = 0.0;
            if (!parse_double(field, v)) {
                throw ParseError("field " + std::to_string(values.size() + 1) +
                                     ": not a number: '" + std::string(field) + "'",
                                 line_no);
            }
            values.push_back(v);
            if (comma == std::string::npos) {
                break;
            }
            start = comma + 1;
        }
        if (width < 0) {
            width = static_cast<long>(values.size());
            if (width < 2) {
                throw ParseError("need at least one feature and a label", line_no);
            }
        } else if (static_cast<long>(values.size()) != width) {
            throw ParseError("expected " + std::to_string(width) + " fields, got " +
                                 std::to_string(values.size()),
                             line_no);
        }
        rows.push_back(std::move(values));
    }
    if (rows.empty()) {
        throw ParseError("load_csv: '" + path + "' has no data rows");
    }
    const int n = static_cast<int>(rows.size());
    const int p = static_cast<int>(width) - 1;
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) {
            x(i, j) = rows[i][j];
        }
        y(i) = rows[i][p];
    }
    return Dataset(std::move(x), std::move(y));
}

void save_csv(const Dataset& d, const std::string& path, bool header) {
    std::string out;
    out.reserve(static_cast<std::size_t>(d.rows()) * (d.cols() + 1) * 12);
    if (header) {
        for (int j = 0; j < d.cols(); ++j) {
            out += "x" + std::to_string(j) + ",";
        }
        out += "y\n";
    }
    for (int i = 0; i < d.rows(); ++i) {
        for (int j = 0; j < d.cols(); ++j) {
            append_double(out, d.inputs(i, j));
            out += ',';
        }
        append_double(out, d.labels(i));
        out += '\n';
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("save_csv: cannot open '" + path + "' for writing");
    }
    f << out;
    if (!f) {
        throw IoError("save_csv: write failed for '" + path + "'");
    }
}

} // namespace hypergrad
