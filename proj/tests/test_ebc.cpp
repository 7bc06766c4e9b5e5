#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "cfolio/ebc.hpp"
#include "cfolio/errors.hpp"
#include "cfolio/qp.hpp"
#include "cfolio/rng.hpp"
#include "cfolio/stats.hpp"
#include "test_support.hpp"

using namespace cfolio;

namespace {

EbcModel independence_model(long d) {
    EbcModel m;
    m.n = 1;
    m.d = d;
    m.rank_matrix = Eigen::MatrixXi::Ones(1, d);
    return m;
}

Eigen::MatrixXd random_uniform_matrix(long n, long d, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd u(n, d);
    for (long i = 0; i < n; ++i) {
        for (long j = 0; j < d; ++j) u(i, j) = rng.uniform();
    }
    return u;
}

// Literal evaluation of the copula from its definition: mean over rows of
// products of binomial-tail order-statistic CDFs.
double ebc_cdf_literal(const EbcModel& model, const Eigen::VectorXd& u) {
    double acc = 0.0;
    for (long i = 0; i < model.n; ++i) {
        double prod = 1.0;
        for (long j = 0; j < model.d; ++j) {
            prod *= oracle::binomial_tail(model.n, model.rank_matrix(i, j), u[j]);
        }
        acc += prod;
    }
    return acc / static_cast<double>(model.n);
}

std::vector<double> col(const Eigen::MatrixXd& m, long j) {
    std::vector<double> out(static_cast<std::size_t>(m.rows()));
    for (long i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m(i, j);
    return out;
}

}  // namespace

TEST_CASE("pseudo uniforms map the fitted mean to one half") {
    const SgtParams prm = make_sgt_params(0.002, 0.015, 0.0, 2.0, 6.0);
    Eigen::MatrixXd window = Eigen::MatrixXd::Constant(60, 1, prm.mu);
    const Eigen::MatrixXd u = pseudo_uniforms(window, {prm});
    for (long i = 0; i < u.rows(); ++i) {
        CHECK(u(i, 0) == doctest::Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("pseudo uniforms preserve order and stay inside the open cube") {
    const SgtParams prm = make_sgt_params(0.0, 1.0, 0.3, 2.0, 5.0);
    Eigen::MatrixXd window(5, 1);
    window << -2.0, -1.0, 0.0, 1.0, 2.0;
    const Eigen::MatrixXd u = pseudo_uniforms(window, {prm});
    for (long i = 1; i < 5; ++i) CHECK(u(i, 0) > u(i - 1, 0));
    CHECK(u.minCoeff() >= 1e-12);
    CHECK(u.maxCoeff() <= 1.0 - 1e-12);

    CHECK_THROWS_AS(pseudo_uniforms(window, std::vector<SgtParams>{prm, prm}),
                    SizeError);
}

TEST_CASE("pseudo uniforms of fitted samples look uniform") {
    const SgtParams truth = make_sgt_params(0.0, 0.02, 0.3, 1.8, 7.0);
    const auto draw = sgt_sample(truth, 250, 321);
    Eigen::MatrixXd window(250, 1);
    for (int i = 0; i < 250; ++i) window(i, 0) = draw[static_cast<std::size_t>(i)];
    const FitReport fit = sgt_fit(draw);
    const Eigen::MatrixXd u = pseudo_uniforms(window, {fit.params});
    CHECK(ad_uniform_test(col(u, 0)).p_value > 0.05);
}

TEST_CASE("rank matrix basics") {
    Eigen::MatrixXd u(3, 1);
    u << 0.1, 0.9, 0.5;
    const EbcModel model = fit_ebc(u);
    CHECK(model.n == 3);
    CHECK(model.rank_matrix(0, 0) == 1);
    CHECK(model.rank_matrix(1, 0) == 3);
    CHECK(model.rank_matrix(2, 0) == 2);
    CHECK(model.ties_broken == 0);

    CHECK_THROWS_AS(fit_ebc(Eigen::MatrixXd::Constant(1, 2, 0.5)), SizeError);
}

TEST_CASE("ranks are invariant under strictly increasing maps") {
    const Eigen::MatrixXd u = random_uniform_matrix(40, 3, 17);
    Eigen::MatrixXd v = u;
    for (long i = 0; i < v.rows(); ++i) {
        v(i, 0) = std::exp(v(i, 0));
        v(i, 1) = std::atan(3.0 * v(i, 1));
        v(i, 2) = v(i, 2) * v(i, 2) * v(i, 2) + v(i, 2);
    }
    CHECK(fit_ebc(u).rank_matrix == fit_ebc(v).rank_matrix);
}

TEST_CASE("ties are broken deterministically and counted") {
    Eigen::MatrixXd u(4, 1);
    u << 0.5, 0.2, 0.5, 0.9;
    const EbcModel model = fit_ebc(u);
    CHECK(model.ties_broken == 1);
    // Row order breaks the tie: first 0.5 gets the lower rank.
    CHECK(model.rank_matrix(0, 0) == 2);
    CHECK(model.rank_matrix(2, 0) == 3);
    std::vector<int> sorted;
    for (long i = 0; i < 4; ++i) sorted.push_back(model.rank_matrix(i, 0));
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{1, 2, 3, 4});
}

TEST_CASE("concordant columns share one rank vector") {
    Eigen::MatrixXd u(5, 2);
    u << 0.1, 0.2, 0.3, 0.35, 0.5, 0.6, 0.7, 0.75, 0.9, 0.95;
    const EbcModel model = fit_ebc(u);
    CHECK(model.rank_matrix.col(0) == model.rank_matrix.col(1));
}

TEST_CASE("n = 1 collapses to the independence copula") {
    for (long d : {2L, 3L}) {
        const EbcModel model = independence_model(d);
        Rng rng(5);
        for (int trial = 0; trial < 20; ++trial) {
            Eigen::VectorXd u(d);
            double prod = 1.0;
            for (long j = 0; j < d; ++j) {
                u[j] = rng.uniform();
                prod *= u[j];
            }
            CHECK(ebc_cdf(model, u) == doctest::Approx(prod).epsilon(1e-14));
        }
    }
}

TEST_CASE("copula margins are exactly uniform") {
    for (long n : {3L, 50L}) {
        for (long d : {2L, 3L}) {
            const EbcModel model = fit_ebc(random_uniform_matrix(n, d, 100 + n + d));
            for (long j = 0; j < d; ++j) {
                for (double uj : {0.05, 0.3, 0.62, 0.97}) {
                    Eigen::VectorXd u = Eigen::VectorXd::Ones(d);
                    u[j] = uj;
                    CHECK(std::fabs(ebc_cdf(model, u) - uj) <= 1e-12);
                }
            }
        }
    }
}

TEST_CASE("copula cdf matches the literal binomial summation") {
    Eigen::MatrixXd u(3, 2);
    u << 0.1, 0.15, 0.5, 0.55, 0.9, 0.95;  // concordant: ranks (1,1),(2,2),(3,3)
    const EbcModel model = fit_ebc(u);
    Eigen::VectorXd pt(2);
    pt << 0.5, 0.5;
    CHECK(ebc_cdf(model, pt) ==
          doctest::Approx(ebc_cdf_literal(model, pt)).epsilon(1e-13));

    const EbcModel rnd = fit_ebc(random_uniform_matrix(25, 3, 9));
    Rng rng(10);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd q(3);
        for (long j = 0; j < 3; ++j) q[j] = rng.uniform();
        CHECK(ebc_cdf(rnd, q) ==
              doctest::Approx(ebc_cdf_literal(rnd, q)).epsilon(1e-12));
    }
}

TEST_CASE("copula is grounded, monotone, and 2-increasing") {
    for (long n : {1L, 3L, 50L}) {
        const EbcModel model = n == 1
                                   ? independence_model(2)
                                   : fit_ebc(random_uniform_matrix(n, 2, 31 + n));
        // Grounded: a zero coordinate forces zero.
        Eigen::VectorXd z(2);
        z << 0.0, 0.7;
        CHECK(ebc_cdf(model, z) == 0.0);
        z << 0.4, 0.0;
        CHECK(ebc_cdf(model, z) == 0.0);

        // Componentwise monotone along a grid.
        double prev = -1.0;
        for (double a = 0.0; a <= 1.0001; a += 0.2) {
            Eigen::VectorXd u(2);
            u << std::min(a, 1.0), 0.6;
            const double c = ebc_cdf(model, u);
            CHECK(c >= prev - 1e-14);
            prev = c;
        }

        // 2-increasing on all axis-aligned rectangles from a 5x5 grid.
        const double g[5] = {0.1, 0.3, 0.5, 0.7, 0.9};
        for (int i1 = 0; i1 < 5; ++i1) {
            for (int i2 = i1 + 1; i2 < 5; ++i2) {
                for (int j1 = 0; j1 < 5; ++j1) {
                    for (int j2 = j1 + 1; j2 < 5; ++j2) {
                        Eigen::VectorXd bb(2), ab(2), ba(2), aa(2);
                        bb << g[i2], g[j2];
                        ab << g[i1], g[j2];
                        ba << g[i2], g[j1];
                        aa << g[i1], g[j1];
                        const double mass = ebc_cdf(model, bb) -
                                            ebc_cdf(model, ab) -
                                            ebc_cdf(model, ba) +
                                            ebc_cdf(model, aa);
                        CHECK(mass >= -1e-12);
                    }
                }
            }
        }
    }
}

TEST_CASE("copula cdf invariant under monotone marginal transforms") {
    const Eigen::MatrixXd u = random_uniform_matrix(30, 2, 77);
    Eigen::MatrixXd v = u;
    for (long i = 0; i < v.rows(); ++i) v(i, 0) = std::log(v(i, 0) + 1.0);
    const EbcModel a = fit_ebc(u);
    const EbcModel b = fit_ebc(v);
    Eigen::VectorXd pt(2);
    pt << 0.42, 0.77;
    CHECK(ebc_cdf(a, pt) == ebc_cdf(b, pt));
}

TEST_CASE("sampler is deterministic") {
    const EbcModel model = fit_ebc(random_uniform_matrix(20, 2, 55));
    const Eigen::MatrixXd s1 = ebc_sample(model, 100, 9001);
    const Eigen::MatrixXd s2 = ebc_sample(model, 100, 9001);
    CHECK(s1 == s2);
    const Eigen::MatrixXd s3 = ebc_sample(model, 100, 9002);
    CHECK(s1 != s3);
    // Sharded generation: count above one shard boundary stays deterministic.
    const Eigen::MatrixXd big1 = ebc_sample(model, 10000, 4);
    const Eigen::MatrixXd big2 = ebc_sample(model, 10000, 4);
    CHECK(big1 == big2);
}

TEST_CASE("sampler empirical CDF agrees with the copula CDF") {
    const EbcModel model = fit_ebc(random_uniform_matrix(40, 2, 202));
    const long count = 100000;
    const Eigen::MatrixXd draws = ebc_sample(model, count, 321);
    const double g[3] = {0.25, 0.5, 0.75};
    for (double ga : g) {
        for (double gb : g) {
            Eigen::VectorXd pt(2);
            pt << ga, gb;
            const double expected = ebc_cdf(model, pt);
            long hits = 0;
            for (long i = 0; i < count; ++i) {
                if (draws(i, 0) <= ga && draws(i, 1) <= gb) ++hits;
            }
            const double observed =
                static_cast<double>(hits) / static_cast<double>(count);
            const double se = std::sqrt(expected * (1.0 - expected) /
                                        static_cast<double>(count));
            CHECK(std::fabs(observed - expected) <= 3.0 * se + 1e-12);
        }
    }
}

TEST_CASE("concordant model produces strongly dependent samples") {
    Eigen::MatrixXd u(50, 2);
    Rng rng(13);
    for (long i = 0; i < 50; ++i) {
        const double base = rng.uniform();
        u(i, 0) = base;
        u(i, 1) = base;  // identical ranks
    }
    const EbcModel model = fit_ebc(u);
    const Eigen::MatrixXd draws = ebc_sample(model, 100000, 88);
    CHECK(spearman(col(draws, 0), col(draws, 1)) > 0.9);
}

TEST_CASE("Kolmogorov distance shrinks with the sample count") {
    const EbcModel model = fit_ebc(random_uniform_matrix(30, 2, 404));
    const double g[3] = {0.25, 0.5, 0.75};
    auto ks_on_grid = [&](long count, std::uint64_t seed) {
        const Eigen::MatrixXd draws = ebc_sample(model, count, seed);
        double worst = 0.0;
        for (double ga : g) {
            for (double gb : g) {
                Eigen::VectorXd pt(2);
                pt << ga, gb;
                long hits = 0;
                for (long i = 0; i < count; ++i) {
                    if (draws(i, 0) <= ga && draws(i, 1) <= gb) ++hits;
                }
                worst = std::max(
                    worst, std::fabs(static_cast<double>(hits) /
                                         static_cast<double>(count) -
                                     ebc_cdf(model, pt)));
            }
        }
        return worst;
    };
    CHECK(ks_on_grid(100000, 5150) < ks_on_grid(1000, 5150));
}

TEST_CASE("mc budget floor, monotonicity, and scan agreement") {
    // Tiny eigenvalue: the floor binds.
    Eigen::MatrixXd small = Eigen::MatrixXd::Identity(2, 2) * 1e-9;
    CHECK(mc_budget(small, 1.0).m_required == 16);

    Eigen::MatrixXd cov(2, 2);
    cov << 2e-3, 0.0, 0.0, 1e-3;
    const McBudget budget = mc_budget(cov, 8e-4);
    CHECK(budget.lambda_max == doctest::Approx(2e-3).epsilon(1e-12));

    // Linear-scan oracle for the minimal admissible m.
    const double target = 2.0 * budget.lambda_max / (8e-4 * 8e-4);
    long m = 16;
    while (static_cast<double>(m) / std::log(std::log(static_cast<double>(m))) <
           target) {
        ++m;
    }
    CHECK(budget.m_required == m);
    CHECK(budget.m_required <= 100000);

    // Doubling epsilon never increases the requirement.
    const McBudget looser = mc_budget(cov, 1.6e-3);
    CHECK(looser.m_required <= budget.m_required);
}

TEST_CASE("mc budget validates the covariance") {
    Eigen::MatrixXd asym(2, 2);
    asym << 1.0, 0.5, 0.1, 1.0;
    CHECK_THROWS_AS(mc_budget(asym, 0.1), MatrixError);
    Eigen::MatrixXd indef(2, 2);
    indef << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3, -1
    CHECK_THROWS_AS(mc_budget(indef, 0.1), MatrixError);
    Eigen::MatrixXd ok = Eigen::MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(mc_budget(ok, 0.0), DomainError);
}

TEST_CASE("joint return sample honours the marginals") {
    const SgtParams pa = make_sgt_params(0.001, 0.01, 0.0, 2.0, 8.0);
    const SgtParams pb = make_sgt_params(-0.002, 0.02, 0.0, 2.0, 8.0);
    const EbcModel model = fit_ebc(random_uniform_matrix(50, 2, 606));
    const long count = 100000;
    const Eigen::MatrixXd draws = joint_return_sample(model, {pa, pb}, count, 7);
    const Moments ma = sample_moments(col(draws, 0));
    const Moments mb = sample_moments(col(draws, 1));
    CHECK(std::fabs(ma.mean - pa.mu) <=
          4.0 * pa.sigma / std::sqrt(static_cast<double>(count)));
    CHECK(std::fabs(mb.mean - pb.mu) <=
          4.0 * pb.sigma / std::sqrt(static_cast<double>(count)));
}

TEST_CASE("joint return sample reproduces the source rank correlation") {
    // Dependent source window.
    Rng rng(99);
    const long n = 200;
    Eigen::MatrixXd window(n, 2);
    for (long i = 0; i < n; ++i) {
        const double f = rng.normal();
        window(i, 0) = 0.01 * (0.8 * f + 0.6 * rng.normal());
        window(i, 1) = 0.02 * (0.8 * f + 0.6 * rng.normal());
    }
    const SgtParams pa = make_sgt_params(0.0, 0.01, 0.0, 2.0, 8.0);
    const SgtParams pb = make_sgt_params(0.0, 0.02, 0.0, 2.0, 8.0);
    const Eigen::MatrixXd u = pseudo_uniforms(window, {pa, pb});
    const EbcModel model = fit_ebc(u);
    const Eigen::MatrixXd draws = joint_return_sample(model, {pa, pb}, 100000, 11);

    const double source_rho = spearman(col(window, 0), col(window, 1));
    const double sampled_rho = spearman(col(draws, 0), col(draws, 1));
    CHECK(std::fabs(sampled_rho - source_rho) <= 0.05);
}

TEST_CASE("one-dimensional model reduces to the marginal") {
    const SgtParams prm = make_sgt_params(0.0, 1.0, 0.2, 2.0, 6.0);
    const EbcModel model = fit_ebc(random_uniform_matrix(60, 1, 808));
    const Eigen::MatrixXd draws = joint_return_sample(model, {prm}, 5000, 15);
    std::vector<double> u(5000);
    for (long i = 0; i < 5000; ++i) u[static_cast<std::size_t>(i)] = sgt_cdf(draws(i, 0), prm);
    CHECK(ad_uniform_test(u).p_value > 0.05);
}

TEST_CASE("covariance of budget-sized draws is stable to 2 epsilon") {
    // Unit-scale marginals so lambda_max is O(1) and the budget is modest.
    const SgtParams prm = make_sgt_params(0.0, 1.0, 0.0, 2.0, 8.0);
    const EbcModel model = fit_ebc(random_uniform_matrix(50, 2, 111));
    const double eps = 0.05;
    const Eigen::MatrixXd pilot = joint_return_sample(model, {prm, prm}, 5000, 1);
    const McBudget budget = mc_budget(sample_covariance(pilot), eps);
    const long m = budget.m_required;
    const Eigen::MatrixXd d1 = joint_return_sample(model, {prm, prm}, m, 21);
    const Eigen::MatrixXd d2 = joint_return_sample(model, {prm, prm}, m, 22);
    const Eigen::MatrixXd c1 = sample_covariance(d1);
    const Eigen::MatrixXd c2 = sample_covariance(d2);
    CHECK((c1 - c2).cwiseAbs().maxCoeff() <= 2.0 * eps);
}
