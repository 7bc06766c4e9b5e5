#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace cfolio {

enum class ConstraintSet {
    TwoConstraint,   // full investment + long-only
    ThreeConstraint  // + expected return >= equal-weight average (EWO)
};

// Global-minimum-variance program data. ewo_floor is derived: the mean of
// expected_returns under ThreeConstraint, unused otherwise.
struct QpProblem {
    Eigen::MatrixXd covariance;
    Eigen::VectorXd expected_returns;
    ConstraintSet constraint_set = ConstraintSet::TwoConstraint;
    double ewo_floor = 0.0;

    QpProblem() = default;
    QpProblem(Eigen::MatrixXd cov, Eigen::VectorXd mu, ConstraintSet cs);

    long d() const { return covariance.rows(); }
};

struct PortfolioWeights {
    Eigen::VectorXd weights;
    double objective = 0.0;          // w' Sigma w
    std::vector<int> active_set;     // asset indices pinned at zero
    bool ewo_active = false;
    double kkt_residual = 0.0;
    enum class Status { Optimal, DegenerateFallback } status = Status::Optimal;
    bool regularized = false;  // ridge added to a near-singular covariance
};

// Active-set solve of min w' Sigma w over the constraint set. Optional warm
// start from the previous window's solution.
PortfolioWeights solve_gmv(const QpProblem& problem,
                           const PortfolioWeights* warm_start = nullptr);

PortfolioWeights equal_weights(long d);
PortfolioWeights equal_weights(long d, const Eigen::MatrixXd& covariance);

// RC_i = w_i (Sigma w)_i / (w' Sigma w); components sum to 1.
Eigen::VectorXd risk_contributions(const Eigen::VectorXd& weights,
                                   const Eigen::MatrixXd& covariance);

// Unbiased (n-1) estimators over the rows of a window matrix.
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& returns);
Eigen::VectorXd sample_means(const Eigen::MatrixXd& returns);

}  // namespace cfolio
