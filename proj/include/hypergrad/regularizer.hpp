#pragma once

#include <Eigen/Dense>
#include <vector>

namespace hypergrad {

/// Partition of coordinate indices {0..P-1} into disjoint nonempty groups.
class GroupStructure {
public:
    GroupStructure() = default;
    /// Explicit index sets; must form a partition of {0..dim-1}.
    GroupStructure(std::vector<std::vector<int>> groups, int dim);
    /// Contiguous groups of the given sizes, in order.
    static GroupStructure contiguous(const std::vector<int>& sizes);

    int dim() const { return dim_; }
    int group_count() const { return static_cast<int>(groups_.size()); }
    const std::vector<int>& group(int g) const { return groups_[g]; }
    int group_of(int coord) const { return coord_group_[coord]; }

private:
    std::vector<std::vector<int>> groups_;
    std::vector<int> coord_group_;
    int dim_ = 0;
};

/// Penalty family: l1 (lasso) or l2,1 over a group partition (group lasso).
class Regularizer {
public:
    enum class Kind { Lasso, GroupLasso };

    static Regularizer lasso() { return Regularizer(Kind::Lasso, {}); }
    static Regularizer group_lasso(GroupStructure gs) {
        return Regularizer(Kind::GroupLasso, std::move(gs));
    }

    Kind kind() const { return kind_; }
    bool is_group() const { return kind_ == Kind::GroupLasso; }
    const GroupStructure& groups() const { return groups_; }

private:
    Regularizer(Kind k, GroupStructure gs) : kind_(k), groups_(std::move(gs)) {}
    Kind kind_;
    GroupStructure groups_;
};

/// Omega(w): ||w||_1, or sum of group l2 norms.
double penalty(const Regularizer& reg, const Eigen::VectorXd& w);

/// Proximity operator of kappa * Omega at w_f. Lasso is entrywise
/// soft-thresholding w_f [1 - kappa/|w_f|]_+; group lasso shrinks each group
/// by its norm. Zero entries/groups map to zero.
Eigen::VectorXd prox(const Regularizer& reg, const Eigen::VectorXd& w_f,
                     double kappa);

/// Chosen subderivatives of the prox output with respect to its input point
/// (diagonal, a_diag) and to lambda (b), evaluated at w_f. Indicators use
/// non-strict thresholds, so a_diag is 1 exactly when the magnitude (or
/// group norm) reaches alpha*lambda; b is zero wherever a_diag is zero.
struct SubJacobian {
    Eigen::VectorXd a_diag; // entries in {0,1}
    Eigen::VectorXd b;
};

SubJacobian subderivatives(const Regularizer& reg, const Eigen::VectorXd& w_f,
                           double alpha, double lambda);

} // namespace hypergrad
