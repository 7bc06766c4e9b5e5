#include "cfolio/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cfolio/errors.hpp"

namespace cfolio {

QpProblem::QpProblem(Eigen::MatrixXd cov, Eigen::VectorXd mu, ConstraintSet cs)
    : covariance(std::move(cov)), expected_returns(std::move(mu)),
      constraint_set(cs) {
    if (covariance.rows() != covariance.cols()) {
        throw MatrixError("QpProblem: covariance must be square");
    }
    if (expected_returns.size() != covariance.rows()) {
        throw SizeError("QpProblem: expected_returns dimension mismatch");
    }
    const double asym =
        (covariance - covariance.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10) {
        throw MatrixError("QpProblem: covariance asymmetric beyond 1e-10");
    }
    if (covariance.diagonal().minCoeff() < -1e-14) {
        throw MatrixError("QpProblem: negative variance on the diagonal");
    }
    if (constraint_set == ConstraintSet::ThreeConstraint) {
        ewo_floor = expected_returns.mean();
    }
}

namespace {

constexpr double kActiveTol = 1e-12;
constexpr double kMultiplierTol = 1e-10;

struct WorkingSet {
    std::vector<char> at_bound;  // weight pinned to zero
    bool ewo = false;            // EWO held at equality
};

struct EqpSolution {
    Eigen::VectorXd w;
    double nu_budget = 0.0;
    double nu_ewo = 0.0;
    bool ok = false;
};

// Equality-constrained subproblem on the working set: minimize w' S w with
// bound-pinned coordinates removed and the budget (and possibly EWO) row kept
// as equalities. Solved as a dense KKT system.
EqpSolution solve_eqp(const Eigen::MatrixXd& S, const Eigen::VectorXd& mu,
                      double ewo_floor, const WorkingSet& ws) {
    const long d = S.rows();
    std::vector<long> free_idx;
    for (long i = 0; i < d; ++i) {
        if (ws.at_bound[static_cast<std::size_t>(i)] == 0) free_idx.push_back(i);
    }
    const long nf = static_cast<long>(free_idx.size());
    const long k = ws.ewo ? 2 : 1;

    EqpSolution sol;
    sol.w = Eigen::VectorXd::Zero(d);
    if (nf == 0) return sol;  // no free coordinate left; caller handles

    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nf + k, nf + k);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf + k);
    for (long a = 0; a < nf; ++a) {
        for (long b = 0; b < nf; ++b) {
            kkt(a, b) = 2.0 * S(free_idx[a], free_idx[b]);
        }
        kkt(a, nf) = -1.0;
        kkt(nf, a) = 1.0;
        if (ws.ewo) {
            kkt(a, nf + 1) = -mu[free_idx[a]];
            kkt(nf + 1, a) = mu[free_idx[a]];
        }
    }
    rhs[nf] = 1.0;
    if (ws.ewo) rhs[nf + 1] = ewo_floor;

    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (!lu.isInvertible()) return sol;
    const Eigen::VectorXd z = lu.solve(rhs);
    for (long a = 0; a < nf; ++a) sol.w[free_idx[a]] = z[a];
    sol.nu_budget = z[nf];
    sol.nu_ewo = ws.ewo ? z[nf + 1] : 0.0;
    sol.ok = true;
    return sol;
}

Eigen::VectorXd cold_start(const Eigen::VectorXd& mu, ConstraintSet cs) {
    const long d = mu.size();
    if (cs == ConstraintSet::TwoConstraint) {
        return Eigen::VectorXd::Constant(d, 1.0 / static_cast<double>(d));
    }
    // The max-return vertex always satisfies the EWO floor.
    long best = 0;
    for (long i = 1; i < d; ++i) {
        if (mu[i] > mu[best]) best = i;
    }
    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    w[best] = 1.0;
    return w;
}

}  // namespace

PortfolioWeights solve_gmv(const QpProblem& problem,
                           const PortfolioWeights* warm_start) {
    const long d = problem.d();
    if (d < 1) throw SizeError("solve_gmv: empty problem");

    Eigen::MatrixXd S =
        0.5 * (problem.covariance + problem.covariance.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    if (es.info() != Eigen::Success) {
        throw MatrixError("solve_gmv: eigen decomposition failed");
    }
    const double lambda_min = es.eigenvalues().minCoeff();
    const double lambda_max = es.eigenvalues().maxCoeff();
    if (lambda_min < -1e-8 * std::max(1.0, lambda_max)) {
        throw MatrixError("solve_gmv: covariance indefinite beyond repair");
    }
    PortfolioWeights result;
    const double ridge = std::max(0.0, 1e-10 - lambda_min);
    if (ridge > 0.0) {
        S.diagonal().array() += ridge;
        result.regularized = true;
    }

    const Eigen::VectorXd& mu = problem.expected_returns;
    const bool three = problem.constraint_set == ConstraintSet::ThreeConstraint;
    const double floor = problem.ewo_floor;

    // Feasible start: reuse the previous solution when it projects cleanly,
    // otherwise the cold-start point.
    Eigen::VectorXd w;
    bool warmed = false;
    if (warm_start != nullptr && warm_start->weights.size() == d) {
        Eigen::VectorXd cand = warm_start->weights.cwiseMax(0.0);
        const double s = cand.sum();
        if (s > 1e-8) {
            cand /= s;
            if (three && mu.dot(cand) < floor) {
                const double mu_best = mu.maxCoeff();
                const double gap = mu_best - mu.dot(cand);
                if (gap > 1e-300) {
                    const double alpha =
                        std::min(1.0, (floor - mu.dot(cand)) / gap);
                    long best = 0;
                    for (long i = 1; i < d; ++i) {
                        if (mu[i] > mu[best]) best = i;
                    }
                    cand *= (1.0 - alpha);
                    cand[best] += alpha;
                }
            }
            if (!three || mu.dot(cand) >= floor - 1e-12) {
                w = cand;
                warmed = true;
            }
        }
    }
    if (!warmed) w = cold_start(mu, problem.constraint_set);

    WorkingSet ws;
    ws.at_bound.assign(static_cast<std::size_t>(d), 0);
    for (long i = 0; i < d; ++i) {
        if (w[i] <= kActiveTol) {
            ws.at_bound[static_cast<std::size_t>(i)] = 1;
            w[i] = 0.0;
        }
    }
    ws.ewo = three && std::fabs(mu.dot(w) - floor) <= kActiveTol;

    double nu_budget = 0.0;
    double nu_ewo = 0.0;
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(d);
    bool optimal = false;

    const int max_iter = 100 * static_cast<int>(d + 2);
    for (int iter = 0; iter < max_iter; ++iter) {
        const EqpSolution eqp = solve_eqp(S, mu, floor, ws);
        if (!eqp.ok) {
            // Singular working set. A redundant EWO row (mu proportional to
            // the budget row on the free coordinates) is the usual cause;
            // dropping it is safe because the step logic re-adds it when the
            // floor would actually be crossed. Otherwise release the
            // lowest-index pinned weight.
            if (ws.ewo) {
                ws.ewo = false;
                continue;
            }
            bool released = false;
            for (long i = 0; i < d && !released; ++i) {
                if (ws.at_bound[static_cast<std::size_t>(i)] != 0) {
                    ws.at_bound[static_cast<std::size_t>(i)] = 0;
                    released = true;
                }
            }
            if (!released) break;
            continue;
        }

        const Eigen::VectorXd step = eqp.w - w;
        if (step.cwiseAbs().maxCoeff() <= kActiveTol) {
            // At the working-set optimum; inspect multipliers.
            nu_budget = eqp.nu_budget;
            nu_ewo = eqp.nu_ewo;
            const Eigen::VectorXd grad = 2.0 * S * w;
            eta.setZero();
            long worst = -1;
            double worst_val = -kMultiplierTol;
            for (long i = 0; i < d; ++i) {
                if (ws.at_bound[static_cast<std::size_t>(i)] == 0) continue;
                eta[i] = grad[i] - nu_budget - (ws.ewo ? nu_ewo * mu[i] : 0.0);
                if (eta[i] < worst_val) {
                    worst_val = eta[i];
                    worst = i;
                }
            }
            bool drop_ewo = false;
            if (ws.ewo && nu_ewo < worst_val) {
                worst_val = nu_ewo;
                drop_ewo = true;
            }
            if (worst < 0 && !drop_ewo) {
                optimal = true;
                break;
            }
            if (drop_ewo) {
                ws.ewo = false;
            } else {
                ws.at_bound[static_cast<std::size_t>(worst)] = 0;
            }
            continue;
        }

        // Longest feasible step toward the subproblem optimum.
        double alpha = 1.0;
        long blocking = -1;
        bool block_ewo = false;
        for (long i = 0; i < d; ++i) {
            if (ws.at_bound[static_cast<std::size_t>(i)] != 0) continue;
            if (step[i] < -1e-300) {
                const double a = -w[i] / step[i];
                if (a < alpha) {
                    alpha = a;
                    blocking = i;
                }
            }
        }
        if (three && !ws.ewo) {
            const double g = mu.dot(step);
            if (g < -1e-300) {
                const double a = (floor - mu.dot(w)) / g;
                if (a < alpha) {
                    alpha = a;
                    blocking = -1;
                    block_ewo = true;
                }
            }
        }
        alpha = std::max(alpha, 0.0);
        w += alpha * step;
        if (block_ewo) {
            ws.ewo = true;
        } else if (blocking >= 0) {
            ws.at_bound[static_cast<std::size_t>(blocking)] = 1;
            w[blocking] = 0.0;
        }
    }

    // Clean output: exact zeros below threshold, renormalized budget.
    for (long i = 0; i < d; ++i) {
        if (w[i] < 1e-10) w[i] = 0.0;
    }
    const double total = w.sum();
    if (total <= 0.0) throw DegenerateError("solve_gmv: zero weight vector");
    w /= total;

    result.weights = w;
    result.objective = w.dot(S * w);
    result.status = optimal ? PortfolioWeights::Status::Optimal
                            : PortfolioWeights::Status::DegenerateFallback;
    for (long i = 0; i < d; ++i) {
        if (w[i] == 0.0) result.active_set.push_back(static_cast<int>(i));
    }
    result.ewo_active = ws.ewo;

    // KKT residual across stationarity, feasibility, dual signs, and
    // complementary slackness.
    const Eigen::VectorXd grad = 2.0 * S * w;
    double resid = std::fabs(w.sum() - 1.0);
    resid = std::max(resid, std::max(0.0, -w.minCoeff()));
    if (three) resid = std::max(resid, std::max(0.0, floor - mu.dot(w)));
    Eigen::VectorXd stat = grad;
    stat.array() -= nu_budget;
    if (three) stat -= nu_ewo * mu;
    for (long i = 0; i < d; ++i) {
        if (w[i] == 0.0) {
            resid = std::max(resid, std::max(0.0, -stat[i]));  // dual sign
        } else {
            resid = std::max(resid, std::fabs(stat[i]));  // stationarity
        }
        resid = std::max(resid, std::fabs(w[i] * stat[i]));  // slackness
    }
    if (three) {
        resid = std::max(resid, std::max(0.0, -nu_ewo));
        if (!ws.ewo) resid = std::max(resid, std::fabs(nu_ewo));
    }
    result.kkt_residual = resid;
    return result;
}

PortfolioWeights equal_weights(long d) {
    if (d < 1) throw SizeError("equal_weights: need d >= 1");
    PortfolioWeights out;
    out.weights = Eigen::VectorXd::Constant(d, 1.0 / static_cast<double>(d));
    out.objective = std::numeric_limits<double>::quiet_NaN();
    return out;
}

PortfolioWeights equal_weights(long d, const Eigen::MatrixXd& covariance) {
    PortfolioWeights out = equal_weights(d);
    if (covariance.rows() != d || covariance.cols() != d) {
        throw SizeError("equal_weights: covariance dimension mismatch");
    }
    out.objective = out.weights.dot(covariance * out.weights);
    return out;
}

Eigen::VectorXd risk_contributions(const Eigen::VectorXd& weights,
                                   const Eigen::MatrixXd& covariance) {
    if (covariance.rows() != weights.size() ||
        covariance.cols() != weights.size()) {
        throw SizeError("risk_contributions: dimension mismatch");
    }
    const Eigen::VectorXd sw = covariance * weights;
    const double total = weights.dot(sw);
    if (!(total > 0.0)) {
        throw DegenerateError("risk_contributions: zero portfolio variance");
    }
    return weights.cwiseProduct(sw) / total;
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& returns) {
    const long n = returns.rows();
    if (n < 2) throw SizeError("sample_covariance: need at least 2 rows");
    const Eigen::RowVectorXd mean = returns.colwise().mean();
    const Eigen::MatrixXd centered = returns.rowwise() - mean;
    Eigen::MatrixXd cov =
        (centered.transpose() * centered) / static_cast<double>(n - 1);
    return 0.5 * (cov + cov.transpose());
}

Eigen::VectorXd sample_means(const Eigen::MatrixXd& returns) {
    if (returns.rows() < 1) throw SizeError("sample_means: empty input");
    return returns.colwise().mean().transpose();
}

}  // namespace cfolio
