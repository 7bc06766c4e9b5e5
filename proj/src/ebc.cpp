#include "cfolio/ebc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfolio/rng.hpp"
#include "cfolio/special.hpp"

namespace cfolio {

Eigen::MatrixXd pseudo_uniforms(const Eigen::MatrixXd& window_returns,
                                const std::vector<SgtParams>& fits) {
    if (static_cast<long>(fits.size()) != window_returns.cols()) {
        throw SizeError("pseudo_uniforms: one fit per column required");
    }
    Eigen::MatrixXd u(window_returns.rows(), window_returns.cols());
    for (long j = 0; j < window_returns.cols(); ++j) {
        for (long t = 0; t < window_returns.rows(); ++t) {
            const double v = sgt_cdf(window_returns(t, j), fits[j]);
            u(t, j) = std::clamp(v, 1e-12, 1.0 - 1e-12);
        }
    }
    return u;
}

EbcModel fit_ebc(const Eigen::MatrixXd& u) {
    const long n = u.rows();
    const long d = u.cols();
    if (n < 2) throw SizeError("fit_ebc: need at least 2 rows");

    EbcModel model;
    model.n = n;
    model.d = d;
    model.rank_matrix.resize(n, d);
    std::vector<long> order(static_cast<std::size_t>(n));
    for (long j = 0; j < d; ++j) {
        std::iota(order.begin(), order.end(), 0L);
        // Row index as tiebreak makes the rank permutation strict and
        // deterministic (the infinitesimal-jitter policy).
        std::stable_sort(order.begin(), order.end(), [&](long a, long b) {
            return u(a, j) < u(b, j);
        });
        for (long r = 0; r < n; ++r) {
            model.rank_matrix(order[static_cast<std::size_t>(r)], j) =
                static_cast<int>(r + 1);
        }
        for (long r = 1; r < n; ++r) {
            if (u(order[static_cast<std::size_t>(r)], j) ==
                u(order[static_cast<std::size_t>(r - 1)], j)) {
                ++model.ties_broken;
            }
        }
    }
    return model;
}

double ebc_cdf(const EbcModel& model, const Eigen::VectorXd& u) {
    if (u.size() != model.d) throw SizeError("ebc_cdf: dimension mismatch");
    for (long j = 0; j < u.size(); ++j) {
        if (!(u[j] >= 0.0 && u[j] <= 1.0)) {
            throw DomainError("ebc_cdf: point outside the unit cube");
        }
    }
    const long n = model.n;
    // Order-statistic beta CDF values are shared across rows: column j only
    // ever needs F_{n,r}(u_j) for r = 1..n.
    Eigen::MatrixXd beta_cdf(n, model.d);
    for (long j = 0; j < model.d; ++j) {
        for (long r = 1; r <= n; ++r) {
            beta_cdf(r - 1, j) = reg_inc_beta(static_cast<double>(r),
                                              static_cast<double>(n - r + 1),
                                              u[j]);
        }
    }
    double acc = 0.0;
    for (long i = 0; i < n; ++i) {
        double prod = 1.0;
        for (long j = 0; j < model.d; ++j) {
            prod *= beta_cdf(model.rank_matrix(i, j) - 1, j);
        }
        acc += prod;
    }
    return acc / static_cast<double>(n);
}

Eigen::MatrixXd ebc_sample(const EbcModel& model, long count,
                           std::uint64_t seed) {
    if (count < 1) throw SizeError("ebc_sample: count must be >= 1");
    Eigen::MatrixXd out(count, model.d);
    // Fixed-size shards with derived seeds: the result is identical whether
    // the shards run serially or in parallel.
    constexpr long kShard = 8192;
    const long n_shards = (count + kShard - 1) / kShard;
#pragma omp parallel for schedule(static)
    for (long s = 0; s < n_shards; ++s) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(s)));
        const long lo = s * kShard;
        const long hi = std::min(count, lo + kShard);
        for (long i = lo; i < hi; ++i) {
            const long row = std::min<long>(
                model.n - 1,
                static_cast<long>(rng.uniform() * static_cast<double>(model.n)));
            for (long j = 0; j < model.d; ++j) {
                const double r =
                    static_cast<double>(model.rank_matrix(row, j));
                out(i, j) = rng.beta(r, static_cast<double>(model.n) - r + 1.0);
            }
        }
    }
    return out;
}

McBudget mc_budget(const Eigen::MatrixXd& covariance, double epsilon) {
    if (!(epsilon > 0.0)) throw DomainError("mc_budget: epsilon must be > 0");
    if (covariance.rows() != covariance.cols()) {
        throw MatrixError("mc_budget: covariance must be square");
    }
    const double asym =
        (covariance - covariance.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10) {
        throw MatrixError("mc_budget: covariance asymmetric beyond tolerance");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance);
    if (es.info() != Eigen::Success) {
        throw MatrixError("mc_budget: eigen decomposition failed");
    }
    const double lambda_min = es.eigenvalues().minCoeff();
    if (lambda_min < -1e-10) {
        throw MatrixError("mc_budget: covariance indefinite beyond tolerance");
    }
    const double lambda_max = std::max(0.0, es.eigenvalues().maxCoeff());

    McBudget budget;
    budget.lambda_max = lambda_max;
    budget.epsilon = epsilon;
    const double target = 2.0 * lambda_max / (epsilon * epsilon);
    const auto admissible = [&](long m) {
        return static_cast<double>(m) /
                   std::log(std::log(static_cast<double>(m))) >=
               target;
    };
    long lo = 16;
    if (admissible(lo)) {
        budget.m_required = lo;
        return budget;
    }
    long hi = lo;
    while (!admissible(hi)) {
        hi *= 2;
        if (hi > (1L << 60)) throw DomainError("mc_budget: target unreachable");
    }
    // m/ln(ln m) is increasing on [16, inf), so bisection finds the minimum.
    while (hi - lo > 1) {
        const long mid = lo + (hi - lo) / 2;
        if (admissible(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    budget.m_required = hi;
    return budget;
}

Eigen::MatrixXd joint_return_sample(const EbcModel& model,
                                    const std::vector<SgtParams>& fits,
                                    long count, std::uint64_t seed) {
    if (static_cast<long>(fits.size()) != model.d) {
        throw SizeError("joint_return_sample: one fit per dimension required");
    }
    Eigen::MatrixXd u = ebc_sample(model, count, seed);
    for (long j = 0; j < model.d; ++j) {
#pragma omp parallel for schedule(static)
        for (long i = 0; i < count; ++i) {
            u(i, j) = sgt_quantile(
                std::clamp(u(i, j), 1e-12, 1.0 - 1e-12), fits[j]);
        }
    }
    return u;
}

}  // namespace cfolio
