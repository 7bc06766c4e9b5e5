#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "cfolio/sgt.hpp"

namespace cfolio {

// Empirical beta copula for one estimation window: the column-wise ranks of
// the data are its only state. Each column is a strict permutation of 1..n;
// ties are broken deterministically (by row order) and counted.
struct EbcModel {
    long n = 0;
    long d = 0;
    Eigen::MatrixXi rank_matrix;  // n x d, entries in 1..n
    long ties_broken = 0;
};

// U[t][j] = F_j(returns[t][j]) under the fitted marginals, clamped to
// [1e-12, 1 - 1e-12].
Eigen::MatrixXd pseudo_uniforms(const Eigen::MatrixXd& window_returns,
                                const std::vector<SgtParams>& fits);

EbcModel fit_ebc(const Eigen::MatrixXd& u);

// C(u) = (1/n) sum_i prod_j I_{u_j}(R_ij, n+1-R_ij).
double ebc_cdf(const EbcModel& model, const Eigen::VectorXd& u);

// Mixture sampler: uniform row index, then independent Beta(R_ij, n+1-R_ij)
// per coordinate. Deterministic for a given seed, including under sharded
// parallel generation.
Eigen::MatrixXd ebc_sample(const EbcModel& model, long count,
                           std::uint64_t seed);

// Monte Carlo replication budget from the largest covariance eigenvalue:
// smallest integer m >= 16 with m / ln(ln m) >= 2*lambda_max / epsilon^2.
struct McBudget {
    double lambda_max = 0.0;
    double epsilon = 0.0;
    long m_required = 0;
};

McBudget mc_budget(const Eigen::MatrixXd& covariance, double epsilon);

// Copula draws pushed through the marginal quantile functions.
Eigen::MatrixXd joint_return_sample(const EbcModel& model,
                                    const std::vector<SgtParams>& fits,
                                    long count, std::uint64_t seed);

}  // namespace cfolio
