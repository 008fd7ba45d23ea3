// Experiment harness front end. All functionality lives behind the shared
// library's C interface; this binary only parses flags, forwards them as
// config overrides, and maps status codes to exit codes (0 success,
// 2 config error, 3 runtime failure).

#include "hypergrad.h"

#include "CLI11.hpp"

#include <cstdlib>
#include <iostream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct ConfigHandle {
    hg_config* ptr = nullptr;
    ~ConfigHandle() { hg_config_free(ptr); }
};

int exit_code_for(int status) {
    switch (status) {
    case HG_ERR_PARSE:
    case HG_ERR_CONFIG:
        return kExitConfig;
    default:
        return kExitRuntime;
    }
}

// Flags mirror config-file keys one to one; collected values are forwarded
// verbatim through hg_config_set.
void add_option_flags(CLI::App& cmd,
                      std::vector<std::pair<std::string, std::string>>& overrides) {
    static const std::vector<std::pair<std::string, std::string>> keys = {
        {"--mode", "mode"},
        {"--seed", "seed"},
        {"--dim", "dim"},
        {"--sparsity", "sparsity"},
        {"--n-train", "n_train"},
        {"--n-test", "n_test"},
        {"--snr", "snr"},
        {"--train-csv", "train_csv"},
        {"--test-csv", "test_csv"},
        {"--csv-has-header", "csv_has_header"},
        {"--regularizer", "regularizer"},
        {"--group-sizes", "group_sizes"},
        {"--scheme", "scheme"},
        {"--kfold-k", "kfold_k"},
        {"--kfold-seed", "kfold_seed"},
        {"--heldout-fraction", "heldout_fraction"},
        {"--beta", "beta"},
        {"--lambda-init", "lambda_init"},
        {"--max-outer", "max_outer"},
        {"--outer-tol", "outer_tol"},
        {"--min-lambda-step", "min_lambda_step"},
        {"--z-mode", "z_mode"},
        {"--inner-tol", "inner_tol"},
        {"--inner-max-iters", "inner_max_iters"},
        {"--betas", "betas"},
        {"--tols", "tols"},
        {"--grid-size", "grid_size"},
        {"--grid-min-factor", "grid_min_factor"},
        {"--threads", "threads"},
    };
    for (const auto& [flag, key] : keys) {
        const std::string key_copy = key;
        cmd.add_option_function<std::string>(
               flag,
               [&overrides, key_copy](const std::string& value) {
                   overrides.emplace_back(key_copy, value);
               },
               "config key " + key)
            ->expected(1);
    }
}

int build_config(const std::string& config_path,
                 const std::vector<std::pair<std::string, std::string>>& overrides,
                 const std::string& out_dir, ConfigHandle& handle) {
    int rc = config_path.empty() ? hg_config_create(&handle.ptr)
                                 : hg_config_load(config_path.c_str(), &handle.ptr);
    if (rc != HG_OK) {
        std::cerr << "error: " << hg_last_error() << "\n";
        return exit_code_for(rc);
    }
    // Precedence: flag > HYPERGRAD_OUT > config file > default.
    if (const char* env_out = std::getenv("HYPERGRAD_OUT");
        env_out != nullptr && env_out[0] != '\0') {
        rc = hg_config_set(handle.ptr, "output_dir", env_out);
        if (rc != HG_OK) {
            std::cerr << "error: " << hg_last_error() << "\n";
            return exit_code_for(rc);
        }
    }
    if (!out_dir.empty()) {
        rc = hg_config_set(handle.ptr, "output_dir", out_dir.c_str());
        if (rc != HG_OK) {
            std::cerr << "error: " << hg_last_error() << "\n";
            return exit_code_for(rc);
        }
    }
    for (const auto& [key, value] : overrides) {
        rc = hg_config_set(handle.ptr, key.c_str(), value.c_str());
        if (rc != HG_OK) {
            std::cerr << "error: " << hg_last_error() << "\n";
            return exit_code_for(rc);
        }
    }
    rc = hg_config_validate(handle.ptr);
    if (rc != HG_OK) {
        std::cerr << "error: invalid config: " << hg_last_error() << "\n";
        return exit_code_for(rc);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"joint lasso / group-lasso weight and regularization-"
                 "hyperparameter optimization"};
    app.set_version_flag("--version", std::string(hg_version()));
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::vector<std::pair<std::string, std::string>> overrides;

    CLI::App* run = app.add_subcommand("run", "run the configured experiment");
    run->add_option("--config", config_path, "config file (key = value lines)");
    run->add_option("--out", out_dir, "output directory (also via HYPERGRAD_OUT)");
    add_option_flags(*run, overrides);

    CLI::App* validate =
        app.add_subcommand("validate", "check a config and print the resolved form");
    validate->add_option("--config", config_path, "config file (key = value lines)");
    validate->add_option("--out", out_dir, "output directory");
    add_option_flags(*validate, overrides);

    CLI11_PARSE(app, argc, argv);

    ConfigHandle handle;
    if (int rc = build_config(config_path, overrides, out_dir, handle); rc != 0) {
        return rc;
    }

    if (validate->parsed()) {
        std::cout << hg_config_echo(handle.ptr);
        return 0;
    }

    const int rc = hg_experiment_run(handle.ptr);
    if (rc != HG_OK) {
        std::cerr << "error: " << hg_last_error() << "\n";
        return exit_code_for(rc);
    }
    return 0;
}
