#include "hypergrad/experiment.hpp"

#include "hypergrad/errors.hpp"

#include "json.hpp"

#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;

namespace hypergrad {

namespace {

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double_field(const std::string& key, const std::string& value) {
    double out = 0.0;
    const char* last = value.data() + value.size();
    auto res = std::from_chars(value.data(), last, out);
    if (res.ec != std::errc() || res.ptr != last) {
        throw ConfigError(key, "expected a number, got '" + value + "'");
    }
    return out;
}

long parse_int_field(const std::string& key, const std::string& value) {
    long out = 0;
    const char* last = value.data() + value.size();
    auto res = std::from_chars(value.data(), last, out);
    if (res.ec != std::errc() || res.ptr != last) {
        throw ConfigError(key, "expected an integer, got '" + value + "'");
    }
    return out;
}

std::uint64_t parse_uint_field(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    const char* last = value.data() + value.size();
    auto res = std::from_chars(value.data(), last, out);
    if (res.ec != std::errc() || res.ptr != last) {
        throw ConfigError(key, "expected a nonnegative integer, got '" + value + "'");
    }
    return out;
}

bool parse_bool_field(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") {
        return true;
    }
    if (value == "false" || value == "0" || value == "no") {
        return false;
    }
    throw ConfigError(key, "expected true/false, got '" + value + "'");
}

std::string trim_copy(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) {
        ++a;
    }
    while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) {
        --b;
    }
    return s.substr(a, b - a);
}

std::vector<double> parse_double_list(const std::string& key,
                                      const std::string& value) {
    std::vector<double> out;
    if (trim_copy(value).empty()) {
        return out;
    }
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = value.find(',', start);
        out.push_back(
            parse_double_field(key, trim_copy(value.substr(start, comma - start))));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    if (trim_copy(value).empty()) {
        return out;
    }
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = value.find(',', start);
        out.push_back(static_cast<int>(
            parse_int_field(key, trim_copy(value.substr(start, comma - start)))));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

std::string join_doubles(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) {
            out += ',';
        }
        out += format_double(values[i]);
    }
    return out;
}

std::string join_ints(const std::vector<int>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) {
            out += ',';
        }
        out += std::to_string(values[i]);
    }
    return out;
}

// Canonical key order shared by config_echo and summary.json.
std::vector<std::pair<std::string, std::string>>
echo_pairs(const ExperimentConfig& c) {
    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("mode", c.mode);
    kv.emplace_back("seed", std::to_string(c.seed));
    kv.emplace_back("dim", std::to_string(c.dim));
    kv.emplace_back("sparsity", std::to_string(c.sparsity));
    kv.emplace_back("n_train", std::to_string(c.n_train));
    kv.emplace_back("n_test", std::to_string(c.n_test));
    kv.emplace_back("snr", format_double(c.snr));
    kv.emplace_back("train_csv", c.train_csv);
    kv.emplace_back("test_csv", c.test_csv);
    kv.emplace_back("csv_has_header", c.csv_has_header ? "true" : "false");
    kv.emplace_back("regularizer", c.regularizer);
    kv.emplace_back("group_sizes", join_ints(c.group_sizes));
    kv.emplace_back("scheme", c.scheme);
    kv.emplace_back("kfold_k", std::to_string(c.kfold_k));
    kv.emplace_back("kfold_seed", std::to_string(c.kfold_seed.value_or(c.seed)));
    kv.emplace_back("heldout_fraction", format_double(c.heldout_fraction));
    kv.emplace_back("beta", format_double(c.beta));
    kv.emplace_back("lambda_init", c.lambda_init.has_value()
                                       ? format_double(*c.lambda_init)
                                       : "auto");
    kv.emplace_back("max_outer", c.max_outer.has_value()
                                     ? std::to_string(*c.max_outer)
                                     : "auto");
    kv.emplace_back("outer_tol", format_double(c.outer_tol));
    kv.emplace_back("min_lambda_step", format_double(c.min_lambda_step));
    kv.emplace_back("z_mode", c.z_mode);
    kv.emplace_back("inner_tol", format_double(c.inner_tol));
    kv.emplace_back("inner_max_iters", std::to_string(c.inner_max_iters));
    kv.emplace_back("betas", join_doubles(c.betas_or_default()));
    kv.emplace_back("tols", join_doubles(c.tols_or_default()));
    kv.emplace_back("grid_size", std::to_string(c.grid_size));
    kv.emplace_back("grid_min_factor", format_double(c.grid_min_factor));
    kv.emplace_back("output_dir", c.output_dir);
    kv.emplace_back("threads", std::to_string(c.threads));
    return kv;
}

} // namespace

void config_set(ExperimentConfig& cfg, const std::string& key,
                const std::string& value) {
    if (key == "mode") {
        cfg.mode = value;
    } else if (key == "seed") {
        cfg.seed = parse_uint_field(key, value);
    } else if (key == "dim") {
        cfg.dim = static_cast<int>(parse_int_field(key, value));
    } else if (key == "sparsity") {
        cfg.sparsity = static_cast<int>(parse_int_field(key, value));
    } else if (key == "n_train") {
        cfg.n_train = static_cast<int>(parse_int_field(key, value));
    } else if (key == "n_test") {
        cfg.n_test = static_cast<int>(parse_int_field(key, value));
    } else if (key == "snr") {
        cfg.snr = parse_double_field(key, value);
    } else if (key == "train_csv") {
        cfg.train_csv = value;
    } else if (key == "test_csv") {
        cfg.test_csv = value;
    } else if (key == "csv_has_header") {
        cfg.csv_has_header = parse_bool_field(key, value);
    } else if (key == "regularizer") {
        cfg.regularizer = value;
    } else if (key == "group_sizes") {
        cfg.group_sizes = parse_int_list(key, value);
    } else if (key == "scheme") {
        cfg.scheme = value;
    } else if (key == "kfold_k") {
        cfg.kfold_k = static_cast<int>(parse_int_field(key, value));
    } else if (key == "kfold_seed") {
        cfg.kfold_seed = parse_uint_field(key, value);
    } else if (key == "heldout_fraction") {
        cfg.heldout_fraction = parse_double_field(key, value);
    } else if (key == "beta") {
        cfg.beta = parse_double_field(key, value);
    } else if (key == "lambda_init") {
        if (value == "auto") {
            cfg.lambda_init.reset();
        } else {
            cfg.lambda_init = parse_double_field(key, value);
        }
    } else if (key == "max_outer") {
        if (value == "auto") {
            cfg.max_outer.reset();
        } else {
            cfg.max_outer = static_cast<int>(parse_int_field(key, value));
        }
    } else if (key == "outer_tol") {
        cfg.outer_tol = parse_double_field(key, value);
    } else if (key == "min_lambda_step") {
        cfg.min_lambda_step = parse_double_field(key, value);
    } else if (key == "z_mode") {
        cfg.z_mode = value;
    } else if (key == "inner_tol") {
        cfg.inner_tol = parse_double_field(key, value);
    } else if (key == "inner_max_iters") {
        cfg.inner_max_iters = static_cast<int>(parse_int_field(key, value));
    } else if (key == "betas") {
        cfg.betas = parse_double_list(key, value);
    } else if (key == "tols") {
        cfg.tols = parse_double_list(key, value);
    } else if (key == "grid_size") {
        cfg.grid_size = static_cast<int>(parse_int_field(key, value));
    } else if (key == "grid_min_factor") {
        cfg.grid_min_factor = parse_double_field(key, value);
    } else if (key == "output_dir") {
        cfg.output_dir = value;
    } else if (key == "threads") {
        cfg.threads = static_cast<int>(parse_int_field(key, value));
    } else {
        throw ConfigError(key, "unknown key");
    }
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim_copy(line);
        if (stripped.empty() || stripped[0] == '#') {
            continue;
        }
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no),
                              "expected 'key = value', got '" + stripped + "'");
        }
        const std::string key = trim_copy(stripped.substr(0, eq));
        const std::string value = trim_copy(stripped.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("line " + std::to_string(line_no), "empty key");
        }
        config_set(cfg, key, value);
    }
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("config: cannot open '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

void validate_config(const ExperimentConfig& cfg) {
    const bool external_data = !cfg.train_csv.empty();
    if (cfg.mode != "hsgd" && cfg.mode != "ohsgd" && cfg.mode != "grid" &&
        cfg.mode != "exp1" && cfg.mode != "exp2") {
        throw ConfigError("mode", "expected hsgd, ohsgd, grid, exp1 or exp2, "
                                  "got '" + cfg.mode + "'");
    }
    if (!external_data) {
        if (cfg.dim < 1) {
            throw ConfigError("dim", "must be >= 1");
        }
        if (cfg.sparsity < 0 || cfg.sparsity > cfg.dim) {
            throw ConfigError("sparsity", "sparsity (" + std::to_string(cfg.sparsity) +
                                          ") must lie in [0, dim] (dim = " +
                                          std::to_string(cfg.dim) + ")");
        }
        if (cfg.n_train < 2) {
            throw ConfigError("n_train", "must be >= 2");
        }
        if (cfg.n_test < 1) {
            throw ConfigError("n_test", "must be >= 1");
        }
        if (!(cfg.snr > 0.0)) {
            throw ConfigError("snr", "must be > 0");
        }
    }
    if (cfg.regularizer != "lasso" && cfg.regularizer != "group") {
        throw ConfigError("regularizer", "expected lasso or group, got '" +
                                             cfg.regularizer + "'");
    }
    if (cfg.regularizer == "group") {
        if (cfg.group_sizes.empty()) {
            throw ConfigError("group_sizes", "required for regularizer = group");
        }
        int total = 0;
        for (int s : cfg.group_sizes) {
            if (s < 1) {
                throw ConfigError("group_sizes", "sizes must be positive");
            }
            total += s;
        }
        if (!external_data && total != cfg.dim) {
            throw ConfigError("group_sizes", "sizes sum to " + std::to_string(total) +
                                             " but dim = " + std::to_string(cfg.dim));
        }
    }
    if (cfg.scheme != "loo" && cfg.scheme != "kfold" && cfg.scheme != "heldout") {
        throw ConfigError("scheme", "expected loo, kfold or heldout, got '" +
                                        cfg.scheme + "'");
    }
    if (cfg.scheme == "kfold" && cfg.kfold_k < 2) {
        throw ConfigError("kfold_k", "must be >= 2");
    }
    if (cfg.scheme == "heldout" &&
        (!(cfg.heldout_fraction > 0.0) || !(cfg.heldout_fraction < 1.0))) {
        throw ConfigError("heldout_fraction", "must lie in (0, 1)");
    }
    if (!(cfg.beta > 0.0)) {
        throw ConfigError("beta", "must be > 0");
    }
    if (cfg.lambda_init.has_value() && *cfg.lambda_init < 0.0) {
        throw ConfigError("lambda_init", "must be >= 0 (or 'auto')");
    }
    if (cfg.max_outer.has_value() && *cfg.max_outer < 1) {
        throw ConfigError("max_outer", "must be >= 1 (or 'auto')");
    }
    if (cfg.outer_tol < 0.0) {
        throw ConfigError("outer_tol", "must be >= 0");
    }
    if (cfg.min_lambda_step < 0.0) {
        throw ConfigError("min_lambda_step", "must be >= 0");
    }
    if (!(cfg.inner_tol > 0.0)) {
        throw ConfigError("inner_tol", "must be > 0");
    }
    if (cfg.inner_max_iters < 1) {
        throw ConfigError("inner_max_iters", "must be >= 1");
    }
    if (cfg.z_mode != "linear_solve" && cfg.z_mode != "least_squares" &&
        cfg.z_mode != "iterative") {
        throw ConfigError("z_mode", "expected linear_solve, least_squares or "
                                    "iterative, got '" + cfg.z_mode + "'");
    }
    if (cfg.mode == "exp1") {
        const auto betas = cfg.betas_or_default();
        if (betas.empty()) {
            throw ConfigError("betas", "nonempty sweep required for mode = exp1");
        }
        for (double b : betas) {
            if (!(b > 0.0)) {
                throw ConfigError("betas", "entries must be > 0");
            }
        }
    }
    if (cfg.mode == "exp2") {
        if (cfg.betas.has_value() && cfg.betas->size() != 1) {
            throw ConfigError("betas", "exp2 takes a single beta (got " +
                                           std::to_string(cfg.betas->size()) +
                                           " entries); set `beta` for sweeps "
                                           "over tolerances only");
        }
        if (!(cfg.exp2_beta() > 0.0)) {
            throw ConfigError("betas", "beta must be > 0");
        }
        const auto tols = cfg.tols_or_default();
        if (tols.empty()) {
            throw ConfigError("tols", "nonempty sweep required for mode = exp2");
        }
        for (double t : tols) {
            if (!(t > 0.0)) {
                throw ConfigError("tols", "entries must be > 0");
            }
        }
    }
    if (cfg.mode == "grid") {
        if (cfg.grid_size < 1) {
            throw ConfigError("grid_size", "must be >= 1");
        }
        if (!(cfg.grid_min_factor > 0.0) || cfg.grid_min_factor > 1.0) {
            throw ConfigError("grid_min_factor", "must lie in (0, 1]");
        }
    }
    if (cfg.threads < 1) {
        throw ConfigError("threads", "must be >= 1");
    }
    if (cfg.output_dir.empty()) {
        throw ConfigError("output_dir", "must not be empty");
    }
}

std::string config_echo(const ExperimentConfig& cfg) {
    std::string out;
    for (const auto& [key, value] : echo_pairs(cfg)) {
        out += key;
        out += " = ";
        out += value;
        out += '\n';
    }
    return out;
}

namespace {

struct PreparedData {
    Dataset train;
    std::optional<Dataset> test;
    bool generated = false;
};

PreparedData prepare_data(const ExperimentConfig& cfg) {
    PreparedData out;
    if (!cfg.train_csv.empty()) {
        out.train = load_csv(cfg.train_csv, cfg.csv_has_header);
        if (!cfg.test_csv.empty()) {
            out.test = load_csv(cfg.test_csv, cfg.csv_has_header);
            if (out.test->cols() != out.train.cols()) {
                throw ConfigError("test_csv", "feature count differs from train_csv");
            }
        }
        return out;
    }
    SyntheticSpec spec;
    spec.dim = cfg.dim;
    spec.sparsity = cfg.sparsity;
    spec.n_train = cfg.n_train;
    spec.n_test = cfg.n_test;
    spec.snr = cfg.snr;
    spec.seed = cfg.seed;
    SyntheticData syn = generate_synthetic(spec);
    out.train = std::move(syn.train);
    out.test = std::move(syn.test);
    out.generated = true;
    return out;
}

Regularizer build_regularizer(const ExperimentConfig& cfg, int dim) {
    if (cfg.regularizer == "lasso") {
        return Regularizer::lasso();
    }
    int total = 0;
    for (int s : cfg.group_sizes) {
        total += s;
    }
    if (total != dim) {
        throw ConfigError("group_sizes", "sizes sum to " + std::to_string(total) +
                                         " but the dataset has " +
                                         std::to_string(dim) + " features");
    }
    return Regularizer::group_lasso(GroupStructure::contiguous(cfg.group_sizes));
}

ValidationScheme build_scheme(const ExperimentConfig& cfg) {
    if (cfg.scheme == "loo") {
        return ValidationScheme::loo();
    }
    if (cfg.scheme == "kfold") {
        return ValidationScheme::k_fold(cfg.kfold_k, cfg.kfold_seed.value_or(cfg.seed));
    }
    return ValidationScheme::held_out(cfg.heldout_fraction);
}

HyperConfig build_hyper(const ExperimentConfig& cfg, bool online) {
    HyperConfig hc;
    hc.beta = cfg.beta;
    hc.lambda_init = cfg.lambda_init;
    hc.max_outer = online ? cfg.max_outer_ohsgd() : cfg.max_outer_hsgd();
    hc.outer_tol = cfg.outer_tol;
    hc.min_lambda_step = cfg.min_lambda_step;
    hc.inner.tol = cfg.inner_tol;
    hc.inner.max_iters = cfg.inner_max_iters;
    hc.z_mode = parse_z_mode(cfg.z_mode);
    return hc;
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    validate_config(cfg);
    const auto t0 = std::chrono::steady_clock::now();

    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) {
        throw ConfigError("output_dir", "cannot create '" + cfg.output_dir +
                                            "': " + ec.message());
    }
    const auto out_path = [&](const std::string& name) {
        return (fs::path(cfg.output_dir) / name).string();
    };

    ExperimentResult result;
    result.output_dir = cfg.output_dir;

    PreparedData data = prepare_data(cfg);
    const Regularizer reg = build_regularizer(cfg, data.train.cols());
    const ValidationScheme scheme = build_scheme(cfg);
    const SufficientStats stats = compute_stats(data.train);

    if (data.generated) {
        save_csv(data.train, out_path("train.csv"));
        result.files.push_back("train.csv");
        save_csv(*data.test, out_path("test.csv"));
        result.files.push_back("test.csv");
    }

    const auto run_one = [&](const std::string& algo, double beta,
                             double inner_tol, const std::string& file) {
        HyperConfig hc = build_hyper(cfg, algo == "ohsgd");
        hc.beta = beta;
        hc.inner.tol = inner_tol;
        HyperTrajectory traj =
            algo == "ohsgd" ? ohsgd_run(data.train, reg, scheme, hc)
                            : hsgd_run(data.train, reg, scheme, hc, cfg.threads);
        write_trajectory_csv(traj, out_path(file));
        result.files.push_back(file);
        RunSummary rs;
        rs.algorithm = algo;
        rs.beta = beta;
        rs.inner_tol = inner_tol;
        rs.lambda_star = traj.lambda_star;
        rs.lambda_init = traj.lambda_init;
        rs.outer_iters = static_cast<long>(traj.records.size());
        rs.cum_inner_iters = traj.total_inner_iters;
        rs.trajectory_file = file;
        result.runs.push_back(rs);
        result.total_inner_iters += traj.total_inner_iters;
        std::cout << algo << " beta=" << format_double(beta)
                  << " inner_tol=" << format_double(inner_tol)
                  << ": lambda_star=" << format_double(traj.lambda_star) << " ("
                  << traj.records.size() << " outer, " << traj.total_inner_iters
                  << " inner iters)\n";
    };

    if (cfg.mode == "hsgd") {
        run_one("hsgd", cfg.beta, cfg.inner_tol, "trajectory.csv");
    } else if (cfg.mode == "ohsgd") {
        run_one("ohsgd", cfg.beta, cfg.inner_tol, "trajectory.csv");
    } else if (cfg.mode == "exp1") {
        for (double beta : cfg.betas_or_default()) {
            run_one("hsgd", beta, cfg.inner_tol,
                    "trajectory_hsgd_beta" + format_double(beta) + ".csv");
            run_one("ohsgd", beta, cfg.inner_tol,
                    "trajectory_ohsgd_beta" + format_double(beta) + ".csv");
        }
    } else if (cfg.mode == "exp2") {
        for (double tol : cfg.tols_or_default()) {
            run_one("ohsgd", cfg.exp2_beta(), tol,
                    "trajectory_ohsgd_tol" + format_double(tol) + ".csv");
        }
    } else if (cfg.mode == "grid") {
        PgdConfig inner;
        inner.tol = cfg.inner_tol;
        inner.max_iters = cfg.inner_max_iters;
        const std::vector<double> grid =
            default_lambda_grid(stats, cfg.grid_size, cfg.grid_min_factor);
        const Dataset* test = data.test.has_value() ? &*data.test : nullptr;
        ErrorCurve curve =
            grid_search(data.train, reg, scheme, grid, inner, test, cfg.threads);
        write_curve_csv(curve, out_path("curve.csv"));
        result.files.push_back("curve.csv");
        result.grid_argmin_lambda =
            curve.points[static_cast<std::size_t>(curve.argmin)].lambda;
        result.total_inner_iters += curve.total_inner_iters;
        std::cout << "grid: argmin lambda=" << format_double(*result.grid_argmin_lambda)
                  << " over " << curve.points.size() << " points\n";
    }

    const auto t1 = std::chrono::steady_clock::now();
    result.wall_time_seconds =
        std::chrono::duration<double>(t1 - t0).count();

    nlohmann::ordered_json summary;
    summary["mode"] = cfg.mode;
    summary["seed"] = cfg.seed;
    if (result.runs.size() == 1) {
        summary["lambda_star"] = result.runs.front().lambda_star;
        summary["lambda_init"] = result.runs.front().lambda_init;
    }
    if (!result.runs.empty()) {
        nlohmann::ordered_json runs = nlohmann::ordered_json::array();
        for (const auto& rs : result.runs) {
            nlohmann::ordered_json j;
            j["algorithm"] = rs.algorithm;
            j["beta"] = rs.beta;
            j["inner_tol"] = rs.inner_tol;
            j["lambda_star"] = rs.lambda_star;
            j["lambda_init"] = rs.lambda_init;
            j["outer_iters"] = rs.outer_iters;
            j["cum_inner_iters"] = rs.cum_inner_iters;
            j["trajectory_file"] = rs.trajectory_file;
            runs.push_back(std::move(j));
        }
        summary["runs"] = std::move(runs);
    }
    if (result.grid_argmin_lambda.has_value()) {
        summary["grid_argmin_lambda"] = *result.grid_argmin_lambda;
    }
    summary["total_inner_iters"] = result.total_inner_iters;
    summary["wall_time_seconds"] = result.wall_time_seconds;
    nlohmann::ordered_json echo;
    for (const auto& [key, value] : echo_pairs(cfg)) {
        echo[key] = value;
    }
    summary["config"] = std::move(echo);
    summary["files"] = result.files;

    {
        std::ofstream f(out_path("summary.json"), std::ios::binary);
        if (!f) {
            throw IoError("summary: cannot open '" + out_path("summary.json") + "'");
        }
        f << summary.dump(2) << '\n';
        if (!f) {
            throw IoError("summary: write failed");
        }
    }
    result.files.push_back("summary.json");
    std::cout << "wrote " << result.files.size() << " files to " << cfg.output_dir
              << "\n";
    return result;
}

} // namespace hypergrad
