// Exercises the shared library strictly through the C header.
#include "hypergrad.h"

#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

struct Handles {
    hg_dataset* train = nullptr;
    hg_dataset* test = nullptr;
    hg_regularizer* lasso = nullptr;
    ~Handles() {
        hg_dataset_free(train);
        hg_dataset_free(test);
        hg_regularizer_free(lasso);
    }
};

} // namespace

TEST_CASE("version and null-argument handling") {
    CHECK(hg_version() != nullptr);
    CHECK(hg_dataset_create(nullptr, nullptr, 2, 2, nullptr) == HG_ERR_NULL);
    CHECK(hg_dataset_shape(nullptr, nullptr, nullptr) == HG_ERR_NULL);
    CHECK(hg_regularizer_lasso(nullptr) == HG_ERR_NULL);
    hg_dataset_free(nullptr);      // null-safe
    hg_regularizer_free(nullptr);  // null-safe
    hg_trajectory_free(nullptr);   // null-safe
}

TEST_CASE("dataset round trip through arrays and csv") {
    const double inputs[6] = {1, 0, 0, 1, 2, 2};
    const double labels[3] = {3, 5, 7};
    hg_dataset* d = nullptr;
    REQUIRE(hg_dataset_create(inputs, labels, 3, 2, &d) == HG_OK);
    int n = 0;
    int p = 0;
    CHECK(hg_dataset_shape(d, &n, &p) == HG_OK);
    CHECK(n == 3);
    CHECK(p == 2);
    double x[2];
    double y = 0;
    CHECK(hg_dataset_row(d, 2, x, &y) == HG_OK);
    CHECK(x[0] == 2.0);
    CHECK(y == 7.0);
    CHECK(hg_dataset_row(d, 3, x, &y) == HG_ERR_INVALID);

    const std::string path = temp_path("hg_capi_ds.csv");
    CHECK(hg_dataset_save_csv(d, path.c_str()) == HG_OK);
    hg_dataset* loaded = nullptr;
    REQUIRE(hg_dataset_load_csv(path.c_str(), 0, &loaded) == HG_OK);
    CHECK(hg_dataset_row(loaded, 2, x, &y) == HG_OK);
    CHECK(x[1] == 2.0);
    CHECK(y == 7.0);
    hg_dataset_free(loaded);
    hg_dataset_free(d);
}

TEST_CASE("csv parse errors surface code and message") {
    const std::string path = temp_path("hg_capi_bad.csv");
    {
        std::ofstream f(path);
        f << "1,oops,3\n";
    }
    hg_dataset* d = nullptr;
    CHECK(hg_dataset_load_csv(path.c_str(), 0, &d) == HG_ERR_PARSE);
    CHECK(std::string(hg_last_error()).find("line 1") != std::string::npos);
    CHECK(d == nullptr);
}

TEST_CASE("synthetic generation is seed deterministic through the c api") {
    Handles h1;
    Handles h2;
    std::vector<double> w1(20);
    std::vector<double> w2(20);
    REQUIRE(hg_generate_synthetic(20, 4, 30, 10, 0.5, 99, &h1.train, &h1.test,
                                  w1.data()) == HG_OK);
    REQUIRE(hg_generate_synthetic(20, 4, 30, 10, 0.5, 99, &h2.train, &h2.test,
                                  w2.data()) == HG_OK);
    CHECK(w1 == w2);
    double xa[20];
    double xb[20];
    double ya = 0;
    double yb = 0;
    for (int i = 0; i < 30; ++i) {
        CHECK(hg_dataset_row(h1.train, i, xa, &ya) == HG_OK);
        CHECK(hg_dataset_row(h2.train, i, xb, &yb) == HG_OK);
        CHECK(std::memcmp(xa, xb, sizeof(xa)) == 0);
        CHECK(ya == yb);
    }
    // invalid specs fail cleanly
    hg_dataset* bad_train = nullptr;
    hg_dataset* bad_test = nullptr;
    CHECK(hg_generate_synthetic(10, 20, 30, 10, 0.5, 1, &bad_train, &bad_test,
                                nullptr) == HG_ERR_INVALID);
}

TEST_CASE("group regularizer construction checks the partition") {
    const int sizes[2] = {3, 3};
    hg_regularizer* reg = nullptr;
    CHECK(hg_regularizer_group_lasso(sizes, 2, 6, &reg) == HG_OK);
    hg_regularizer_free(reg);
    reg = nullptr;
    CHECK(hg_regularizer_group_lasso(sizes, 2, 7, &reg) == HG_ERR_INVALID);
    CHECK(std::string(hg_last_error()).find("dim") != std::string::npos);
}

TEST_CASE("solver, lambda_max and validation error through the c api") {
    Handles h;
    REQUIRE(hg_generate_synthetic(8, 2, 40, 10, 2.0, 7, &h.train, &h.test,
                                  nullptr) == HG_OK);
    REQUIRE(hg_regularizer_lasso(&h.lasso) == HG_OK);

    double lam_max = 0.0;
    REQUIRE(hg_lambda_max(h.train, &lam_max) == HG_OK);
    CHECK(lam_max > 0.0);

    std::vector<double> w(8, 0.0);
    int iters = 0;
    double residual = 0.0;
    int converged = 0;
    REQUIRE(hg_pgd_solve(h.train, h.lasso, 0.1 * lam_max, 1e-9, 100000,
                         w.data(), 0, &iters, &residual, &converged) == HG_OK);
    CHECK(converged == 1);
    CHECK(residual <= 1e-9);
    CHECK(iters >= 1);
    // warm start from the solution converges immediately
    int warm_iters = 0;
    REQUIRE(hg_pgd_solve(h.train, h.lasso, 0.1 * lam_max, 1e-9, 100000,
                         w.data(), 1, &warm_iters, nullptr, nullptr) == HG_OK);
    CHECK(warm_iters <= iters);

    double err = 0.0;
    REQUIRE(hg_validation_error(h.train, h.lasso, "loo", 0.1 * lam_max, 1e-8,
                                &err) == HG_OK);
    CHECK(err > 0.0);
    CHECK(hg_validation_error(h.train, h.lasso, "nope", 0.1, 1e-8, &err) ==
          HG_ERR_INVALID);

    double terr = 0.0;
    REQUIRE(hg_test_error(h.test, w.data(), 8, &terr) == HG_OK);
    CHECK(terr > 0.0);
}

TEST_CASE("group-lasso solves work through the c api") {
    Handles h;
    REQUIRE(hg_generate_synthetic(12, 4, 40, 10, 2.0, 17, &h.train, &h.test,
                                  nullptr) == HG_OK);
    const int sizes[3] = {4, 4, 4};
    hg_regularizer* group = nullptr;
    REQUIRE(hg_regularizer_group_lasso(sizes, 3, 12, &group) == HG_OK);
    double lam_max = 0.0;
    REQUIRE(hg_lambda_max(h.train, &lam_max) == HG_OK);
    std::vector<double> w(12, 0.0);
    double residual = 0.0;
    int converged = 0;
    REQUIRE(hg_pgd_solve(h.train, group, 0.2 * lam_max, 1e-9, 200000, w.data(),
                         0, nullptr, &residual, &converged) == HG_OK);
    CHECK(converged == 1);
    CHECK(residual <= 1e-9);
    hg_hyper_options opts;
    REQUIRE(hg_hyper_options_init(&opts) == HG_OK);
    opts.beta = 1e-3;
    opts.max_outer = 10;
    opts.inner_tol = 1e-6;
    hg_trajectory* traj = nullptr;
    REQUIRE(hg_hsgd_run(h.train, group, "loo", &opts, &traj) == HG_OK);
    double star = -1.0;
    CHECK(hg_trajectory_lambda_star(traj, &star) == HG_OK);
    CHECK(star >= 0.0);
    hg_trajectory_free(traj);
    hg_regularizer_free(group);
}

TEST_CASE("grid search handle exposes points and argmin") {
    Handles h;
    REQUIRE(hg_generate_synthetic(6, 2, 20, 12, 1.0, 11, &h.train, &h.test,
                                  nullptr) == HG_OK);
    REQUIRE(hg_regularizer_lasso(&h.lasso) == HG_OK);
    double lam_max = 0.0;
    REQUIRE(hg_lambda_max(h.train, &lam_max) == HG_OK);
    const std::vector<double> grid = {0.05 * lam_max, 0.2 * lam_max,
                                      0.6 * lam_max, lam_max};
    hg_curve* curve = nullptr;
    REQUIRE(hg_grid_search(h.train, h.lasso, "loo", grid.data(),
                           static_cast<int>(grid.size()), 1e-8, h.test,
                           &curve) == HG_OK);
    int size = 0;
    CHECK(hg_curve_size(curve, &size) == HG_OK);
    CHECK(size == 4);
    int argmin = -1;
    CHECK(hg_curve_argmin(curve, &argmin) == HG_OK);
    CHECK(argmin >= 0);
    CHECK(argmin < 4);
    double best_loo = 1e300;
    for (int i = 0; i < size; ++i) {
        double lambda = 0;
        double loo = 0;
        double test = 0;
        CHECK(hg_curve_point(curve, i, &lambda, &loo, &test) == HG_OK);
        CHECK(lambda == grid[static_cast<std::size_t>(i)]);
        CHECK(std::isfinite(test)); // test column present
        best_loo = std::min(best_loo, loo);
    }
    double argmin_loo = 0;
    CHECK(hg_curve_point(curve, argmin, nullptr, &argmin_loo, nullptr) == HG_OK);
    CHECK(argmin_loo == best_loo);
    const std::string path = temp_path("hg_capi_curve.csv");
    CHECK(hg_curve_save_csv(curve, path.c_str()) == HG_OK);
    hg_curve_free(curve);
}

TEST_CASE("hsgd and ohsgd runs expose trajectories") {
    Handles h;
    REQUIRE(hg_generate_synthetic(10, 3, 24, 10, 1.0, 13, &h.train, &h.test,
                                  nullptr) == HG_OK);
    REQUIRE(hg_regularizer_lasso(&h.lasso) == HG_OK);
    hg_hyper_options opts;
    REQUIRE(hg_hyper_options_init(&opts) == HG_OK);
    opts.beta = 1e-3;
    opts.max_outer = 12;
    opts.inner_tol = 1e-7;

    hg_trajectory* batch = nullptr;
    REQUIRE(hg_hsgd_run(h.train, h.lasso, "loo", &opts, &batch) == HG_OK);
    long size = 0;
    CHECK(hg_trajectory_size(batch, &size) == HG_OK);
    CHECK(size >= 1);
    long k = 0;
    int fold = 0;
    double lambda = -1;
    double avg = -1;
    double grad = 0;
    long cum = 0;
    CHECK(hg_trajectory_row(batch, 0, &k, &fold, &lambda, &avg, &grad, &cum) ==
          HG_OK);
    CHECK(k == 1);
    CHECK(fold == -1);
    CHECK(lambda >= 0.0);
    CHECK(cum >= 1);
    double star = -1;
    CHECK(hg_trajectory_lambda_star(batch, &star) == HG_OK);
    CHECK(star >= 0.0);
    const std::string path = temp_path("hg_capi_traj.csv");
    CHECK(hg_trajectory_save_csv(batch, path.c_str()) == HG_OK);
    hg_trajectory_free(batch);

    hg_trajectory* online = nullptr;
    opts.max_outer = 48; // two sweeps
    REQUIRE(hg_ohsgd_run(h.train, h.lasso, "loo", &opts, &online) == HG_OK);
    CHECK(hg_trajectory_size(online, &size) == HG_OK);
    CHECK(size == 48);
    CHECK(hg_trajectory_row(online, 0, &k, &fold, &lambda, &avg, &grad, &cum) ==
          HG_OK);
    CHECK(fold == 1); // fold index k mod |V| with k = 1
    long total = 0;
    CHECK(hg_trajectory_total_inner_iters(online, &total) == HG_OK);
    CHECK(total >= size);
    hg_trajectory_free(online);

    double fd = 0.0;
    REQUIRE(hg_fd_hypergradient(h.train, h.lasso, "loo", 0.05, 1e-5, 1e-9,
                                &fd) == HG_OK);
    CHECK(std::isfinite(fd));
}

TEST_CASE("config lifecycle, overrides and validation through the c api") {
    hg_config* cfg = nullptr;
    REQUIRE(hg_config_create(&cfg) == HG_OK);
    CHECK(hg_config_validate(cfg) == HG_OK); // defaults are valid
    CHECK(hg_config_set(cfg, "mode", "grid") == HG_OK);
    CHECK(hg_config_set(cfg, "grid_size", "7") == HG_OK);
    CHECK(hg_config_set(cfg, "no_such_key", "1") == HG_ERR_CONFIG);
    CHECK(std::string(hg_last_error()).find("no_such_key") != std::string::npos);
    CHECK(hg_config_set(cfg, "sparsity", "500") == HG_OK);
    CHECK(hg_config_validate(cfg) == HG_ERR_CONFIG);
    CHECK(hg_config_set(cfg, "sparsity", "10") == HG_OK);
    CHECK(hg_config_validate(cfg) == HG_OK);
    const std::string echo = hg_config_echo(cfg);
    CHECK(echo.find("mode = grid") != std::string::npos);
    CHECK(echo.find("grid_size = 7") != std::string::npos);
    hg_config_free(cfg);
}

TEST_CASE("experiment run through the c api writes artifacts") {
    const std::string dir = temp_path("hg_capi_exp");
    std::filesystem::remove_all(dir);
    hg_config* cfg = nullptr;
    REQUIRE(hg_config_create(&cfg) == HG_OK);
    CHECK(hg_config_set(cfg, "mode", "ohsgd") == HG_OK);
    CHECK(hg_config_set(cfg, "dim", "8") == HG_OK);
    CHECK(hg_config_set(cfg, "sparsity", "2") == HG_OK);
    CHECK(hg_config_set(cfg, "n_train", "12") == HG_OK);
    CHECK(hg_config_set(cfg, "n_test", "6") == HG_OK);
    CHECK(hg_config_set(cfg, "beta", "1e-3") == HG_OK);
    CHECK(hg_config_set(cfg, "max_outer", "24") == HG_OK);
    CHECK(hg_config_set(cfg, "inner_tol", "1e-5") == HG_OK);
    CHECK(hg_config_set(cfg, "output_dir", dir.c_str()) == HG_OK);
    REQUIRE(hg_experiment_run(cfg) == HG_OK);
    CHECK(std::filesystem::exists(dir + "/trajectory.csv"));
    CHECK(std::filesystem::exists(dir + "/summary.json"));
    hg_config_free(cfg);
}
