#include "hypergrad/regularizer.hpp"

#include "hypergrad/errors.hpp"

#include <cmath>

namespace hypergrad {

GroupStructure::GroupStructure(std::vector<std::vector<int>> groups, int dim)
    : groups_(std::move(groups)), dim_(dim) {
    if (dim_ < 1) {
        throw InvalidArgument("group structure: dim must be >= 1");
    }
    coord_group_.assign(static_cast<std::size_t>(dim_), -1);
    for (std::size_t g = 0; g < groups_.size(); ++g) {
        if (groups_[g].empty()) {
            throw InvalidArgument("group structure: group " + std::to_string(g) +
                                  " is empty");
        }
        for (int idx : groups_[g]) {
            if (idx < 0 || idx >= dim_) {
                throw InvalidArgument("group structure: index " + std::to_string(idx) +
                                      " out of range [0, " + std::to_string(dim_) + ")");
            }
            if (coord_group_[idx] != -1) {
                throw InvalidArgument("group structure: index " + std::to_string(idx) +
                                      " appears in two groups");
            }
            coord_group_[idx] = static_cast<int>(g);
        }
    }
    for (int i = 0; i < dim_; ++i) {
        if (coord_group_[i] == -1) {
            throw InvalidArgument("group structure: index " + std::to_string(i) +
                                  " not covered by any group");
        }
    }
}

GroupStructure GroupStructure::contiguous(const std::vector<int>& sizes) {
    std::vector<std::vector<int>> groups;
    int next = 0;
    for (int size : sizes) {
        if (size < 1) {
            throw InvalidArgument("group structure: sizes must be positive");
        }
        std::vector<int> g(static_cast<std::size_t>(size));
        for (int i = 0; i < size; ++i) {
            g[i] = next++;
        }
        groups.push_back(std::move(g));
    }
    return GroupStructure(std::move(groups), next);
}

namespace {

void check_dim(const Regularizer& reg, const Eigen::VectorXd& w) {
    if (reg.is_group() && reg.groups().dim() != w.size()) {
        throw InvalidArgument("regularizer: group structure covers " +
                              std::to_string(reg.groups().dim()) +
                              " coordinates, vector has " + std::to_string(w.size()));
    }
}

} // namespace

double penalty(const Regularizer& reg, const Eigen::VectorXd& w) {
    check_dim(reg, w);
    if (!reg.is_group()) {
        return w.lpNorm<1>();
    }
    double total = 0.0;
    const auto& gs = reg.groups();
    for (int g = 0; g < gs.group_count(); ++g) {
        double sq = 0.0;
        for (int idx : gs.group(g)) {
            sq += w(idx) * w(idx);
        }
        total += std::sqrt(sq);
    }
    return total;
}

Eigen::VectorXd prox(const Regularizer& reg, const Eigen::VectorXd& w_f,
                     double kappa) {
    if (kappa < 0.0) {
        throw InvalidArgument("prox: kappa must be >= 0");
    }
    check_dim(reg, w_f);
    Eigen::VectorXd out(w_f.size());
    if (!reg.is_group()) {
        for (Eigen::Index n = 0; n < w_f.size(); ++n) {
            const double mag = std::abs(w_f(n));
            out(n) = mag > kappa ? w_f(n) * (1.0 - kappa / mag) : 0.0;
        }
        return out;
    }
    const auto& gs = reg.groups();
    for (int g = 0; g < gs.group_count(); ++g) {
        double sq = 0.0;
        for (int idx : gs.group(g)) {
            sq += w_f(idx) * w_f(idx);
        }
        const double norm = std::sqrt(sq);
        const double factor = norm > kappa ? 1.0 - kappa / norm : 0.0;
        for (int idx : gs.group(g)) {
            out(idx) = factor * w_f(idx);
        }
    }
    return out;
}

SubJacobian subderivatives(const Regularizer& reg, const Eigen::VectorXd& w_f,
                           double alpha, double lambda) {
    if (!(alpha > 0.0)) {
        throw InvalidArgument("subderivatives: alpha must be > 0");
    }
    if (lambda < 0.0) {
        throw InvalidArgument("subderivatives: lambda must be >= 0");
    }
    check_dim(reg, w_f);
    const double threshold = alpha * lambda;
    SubJacobian sub;
    sub.a_diag.resize(w_f.size());
    sub.b.resize(w_f.size());
    if (!reg.is_group()) {
        for (Eigen::Index n = 0; n < w_f.size(); ++n) {
            const double v = w_f(n);
            sub.a_diag(n) = std::abs(v) >= threshold ? 1.0 : 0.0;
            const double up = v >= threshold ? 1.0 : 0.0;
            const double down = v <= -threshold ? 1.0 : 0.0;
            sub.b(n) = alpha * (down - up);
        }
        return sub;
    }
    const auto& gs = reg.groups();
    for (int g = 0; g < gs.group_count(); ++g) {
        double sq = 0.0;
        for (int idx : gs.group(g)) {
            sq += w_f(idx) * w_f(idx);
        }
        const double norm = std::sqrt(sq);
        const bool active = norm >= threshold && norm > 0.0;
        for (int idx : gs.group(g)) {
            sub.a_diag(idx) = norm >= threshold ? 1.0 : 0.0;
            sub.b(idx) = active ? -alpha * w_f(idx) / norm : 0.0;
        }
    }
    return sub;
}

} // namespace hypergrad
