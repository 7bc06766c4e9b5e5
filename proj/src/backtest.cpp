#include "cfolio/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <span>

#include "cfolio/ebc.hpp"
#include "cfolio/rng.hpp"
#include "cfolio/stats.hpp"

namespace cfolio {

const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::EqWeights: return "eq_weights";
        case Strategy::DataCov3Constraint: return "data_cov_3constraint";
        case Strategy::CopulaCov2Constraint: return "copula_cov_2constraint";
        case Strategy::CopulaCov3Constraint: return "copula_cov_3constraint";
    }
    return "unknown";
}

std::optional<Strategy> strategy_from_name(const std::string& name) {
    if (name == "eq_weights") return Strategy::EqWeights;
    if (name == "data_cov_3constraint") return Strategy::DataCov3Constraint;
    if (name == "copula_cov_2constraint") return Strategy::CopulaCov2Constraint;
    if (name == "copula_cov_3constraint") return Strategy::CopulaCov3Constraint;
    return std::nullopt;
}

void BacktestConfig::validate() const {
    if (window_length < 50) throw DomainError("config: window_length must be >= 50");
    if (rebalance_frequency < 1) {
        throw DomainError("config: rebalance_frequency must be >= 1");
    }
    if (strategies.empty()) throw DomainError("config: no strategies selected");
    if (!(epsilon > 0.0)) throw DomainError("config: epsilon must be > 0");
    if (mc_cap < 16) throw DomainError("config: mc_cap must be >= 16");
    if (pilot_size < 2) throw DomainError("config: pilot_size must be >= 2");
    if (refit_interval < 1) throw DomainError("config: refit_interval must be >= 1");
    if (!std::is_sorted(regime_splits.begin(), regime_splits.end())) {
        throw DomainError("config: regime_splits must be sorted");
    }
}

std::vector<long> window_schedule(long n_returns, long L, long f) {
    if (L < 1 || f < 1) throw DomainError("window_schedule: L and f must be >= 1");
    if (n_returns <= L) {
        throw SizeError("window_schedule: insufficient data (need more returns than L)");
    }
    const long count = (n_returns - L) / f;
    if (count < 1) {
        throw SizeError("window_schedule: no window has an evaluable next period");
    }
    std::vector<long> starts(static_cast<std::size_t>(count));
    for (long k = 0; k < count; ++k) starts[static_cast<std::size_t>(k)] = k * f;
    return starts;
}

namespace {

bool uses_copula(const BacktestConfig& cfg) {
    for (Strategy s : cfg.strategies) {
        if (s == Strategy::CopulaCov2Constraint ||
            s == Strategy::CopulaCov3Constraint) {
            return true;
        }
    }
    return false;
}

std::vector<SgtParams> fit_params(const std::vector<FitReport>& fits) {
    std::vector<SgtParams> out;
    out.reserve(fits.size());
    for (const auto& f : fits) out.push_back(f.params);
    return out;
}

struct MarginalFits {
    std::vector<FitReport> reports;          // one per asset
    std::vector<std::string> failed_assets;  // tickers whose fit diverged
    bool ok() const { return failed_assets.empty(); }
};

MarginalFits fit_window_marginals(const Eigen::MatrixXd& window,
                                  const std::vector<std::string>& assets) {
    MarginalFits out;
    out.reports.resize(static_cast<std::size_t>(window.cols()));
    for (long j = 0; j < window.cols(); ++j) {
        const Eigen::VectorXd col = window.col(j);
        const std::span<const double> view(col.data(),
                                           static_cast<std::size_t>(col.size()));
        try {
            out.reports[static_cast<std::size_t>(j)] = sgt_fit(view);
        } catch (const FitError& e) {
            out.reports[static_cast<std::size_t>(j)] = e.best();
            out.failed_assets.push_back(assets[static_cast<std::size_t>(j)]);
        }
    }
    return out;
}

struct WindowEstimates {
    long index = 0;
    long t = 0;
    bool failed = false;
    std::string fail_reason;

    Eigen::VectorXd window_mean;
    Eigen::MatrixXd window_cov;
    Eigen::VectorXd eval_mean;
    Eigen::MatrixXd eval_cov;

    bool copula_requested = false;
    bool copula_fallback = false;
    std::vector<std::string> fit_failures;
    Eigen::MatrixXd copula_cov;
    long mc_draws = 0;
    double mc_lambda_max = 0.0;
    std::vector<FitReport> fits;
    bool fits_reused = false;

    std::vector<AssetRollingPoint> asset_stats;
    std::vector<DependencePoint> pair_stats;  // (i<j) in column order
};

DependencePoint window_dependence(const Eigen::MatrixXd& window, long a, long b,
                                  const std::string& date) {
    DependencePoint pt;
    pt.date = date;
    const Eigen::VectorXd xa = window.col(a);
    const Eigen::VectorXd xb = window.col(b);
    const std::span<const double> sa(xa.data(), static_cast<std::size_t>(xa.size()));
    const std::span<const double> sb(xb.data(), static_cast<std::size_t>(xb.size()));
    try {
        pt.pearson = pearson(sa, sb);
        pt.spearman = spearman(sa, sb);
        pt.kendall = kendall_tau(sa, sb);
    } catch (const UndefinedCorrelationError&) {
        pt.defined = false;
        pt.pearson = pt.spearman = pt.kendall = 0.0;
    }
    return pt;
}

WindowEstimates estimate_window(const ReturnPanel& returns, long idx, long t,
                                const BacktestConfig& cfg,
                                const MarginalFits* shared_fits,
                                bool fits_reused) {
    const long L = cfg.window_length;
    const long f = cfg.rebalance_frequency;
    const long d = returns.d();

    WindowEstimates est;
    est.index = idx;
    est.t = t;

    const Eigen::MatrixXd window = returns.returns.middleRows(t, L);
    const Eigen::MatrixXd eval = returns.returns.middleRows(t + f, L);
    est.window_mean = sample_means(window);
    est.window_cov = sample_covariance(window);
    est.eval_mean = sample_means(eval);
    est.eval_cov = sample_covariance(eval);

    const std::string& date = returns.dates[static_cast<std::size_t>(t + L - 1)];
    est.asset_stats.resize(static_cast<std::size_t>(d));
    for (long j = 0; j < d; ++j) {
        const Eigen::VectorXd col = window.col(j);
        const Moments m = sample_moments(
            std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
        auto& ap = est.asset_stats[static_cast<std::size_t>(j)];
        ap.date = date;
        ap.mean = m.mean;
        ap.sd = m.sd;
        ap.sharpe = m.sd > 0.0 ? m.mean / m.sd : 0.0;
    }
    for (long a = 0; a < d; ++a) {
        for (long b = a + 1; b < d; ++b) {
            est.pair_stats.push_back(window_dependence(window, a, b, date));
        }
    }

    if (!uses_copula(cfg)) return est;
    est.copula_requested = true;
    est.fits_reused = fits_reused;

    const MarginalFits* fits = shared_fits;
    MarginalFits own;
    if (fits == nullptr) {
        own = fit_window_marginals(window, returns.assets);
        fits = &own;
    }
    est.fits = fits->reports;
    est.fit_failures = fits->failed_assets;
    if (!fits->ok()) {
        est.copula_fallback = true;
        return est;
    }

    try {
        const std::vector<SgtParams> params = fit_params(fits->reports);
        const Eigen::MatrixXd u = pseudo_uniforms(window, params);
        const EbcModel model = fit_ebc(u);
        const std::uint64_t base =
            derive_seed(cfg.seed, static_cast<std::uint64_t>(idx));
        const long pilot_n = std::min(cfg.pilot_size, cfg.mc_cap);
        const Eigen::MatrixXd pilot =
            joint_return_sample(model, params, pilot_n, derive_seed(base, 1));
        const McBudget budget = mc_budget(sample_covariance(pilot), cfg.epsilon);
        est.mc_lambda_max = budget.lambda_max;
        est.mc_draws = std::min(budget.m_required, cfg.mc_cap);
        const Eigen::MatrixXd draws =
            joint_return_sample(model, params, est.mc_draws, derive_seed(base, 2));
        est.copula_cov = sample_covariance(draws);
    } catch (const Error& e) {
        est.copula_fallback = true;
        est.fit_failures.push_back(std::string("copula stage: ") + e.what());
    }
    return est;
}

// Optimizer + scoring stage; runs in window order so warm starts chain.
RebalancePoint score_window(const WindowEstimates& est,
                            const BacktestConfig& cfg,
                            std::vector<std::optional<PortfolioWeights>>& warm) {
    const long d = est.window_mean.size();
    RebalancePoint point;
    point.index = est.index;
    point.window_start = est.t;
    point.date = est.asset_stats.empty() ? std::string()
                                         : est.asset_stats.front().date;
    point.marginal_fits = est.fits;
    point.fits_reused = est.fits_reused;

    for (std::size_t s = 0; s < cfg.strategies.size(); ++s) {
        const Strategy strat = cfg.strategies[s];
        StrategyResult res;

        const bool copula_strat = strat == Strategy::CopulaCov2Constraint ||
                                  strat == Strategy::CopulaCov3Constraint;
        const bool use_fallback = copula_strat && est.copula_fallback;
        const Eigen::MatrixXd& cov =
            copula_strat && !use_fallback ? est.copula_cov : est.window_cov;

        if (strat == Strategy::EqWeights) {
            PortfolioWeights ew = equal_weights(d, est.window_cov);
            res.weights = ew.weights;
            res.objective = ew.objective;
            res.diagnostics.qp_status = "closed-form";
        } else {
            const ConstraintSet cs = strat == Strategy::CopulaCov2Constraint
                                         ? ConstraintSet::TwoConstraint
                                         : ConstraintSet::ThreeConstraint;
            const QpProblem problem(cov, est.window_mean, cs);
            const PortfolioWeights* ws = warm[s] ? &*warm[s] : nullptr;
            PortfolioWeights sol = solve_gmv(problem, ws);
            res.weights = sol.weights;
            res.objective = sol.objective;
            res.diagnostics.cov_regularized = sol.regularized;
            res.diagnostics.kkt_residual = sol.kkt_residual;
            res.diagnostics.qp_status =
                sol.status == PortfolioWeights::Status::Optimal
                    ? "optimal"
                    : "degenerate-fallback";
            warm[s] = std::move(sol);
        }

        if (copula_strat) {
            res.diagnostics.fallback = use_fallback;
            res.diagnostics.fit_failures = est.fit_failures;
            res.diagnostics.mc_draws = est.mc_draws;
            res.diagnostics.mc_lambda_max = est.mc_lambda_max;
        }

        res.next_period_return = res.weights.dot(est.eval_mean);
        const double eval_var = res.weights.dot(est.eval_cov * res.weights);
        res.sharpe = eval_var > 0.0
                         ? res.next_period_return / std::sqrt(eval_var)
                         : 0.0;
        try {
            res.risk_contributions = risk_contributions(res.weights, cov);
        } catch (const DegenerateError&) {
            res.risk_contributions = Eigen::VectorXd::Zero(d);
        }
        point.per_strategy.push_back(std::move(res));
    }
    return point;
}

StrategyAggregate aggregate_strategy(const std::vector<RebalancePoint>& points,
                                     std::size_t s) {
    StrategyAggregate agg;
    for (const auto& pt : points) {
        agg.avg_return += pt.per_strategy[s].next_period_return;
        agg.avg_sharpe += pt.per_strategy[s].sharpe;
        ++agg.n_windows;
    }
    if (agg.n_windows > 0) {
        agg.avg_return /= static_cast<double>(agg.n_windows);
        agg.avg_sharpe /= static_cast<double>(agg.n_windows);
    }
    return agg;
}

std::vector<std::vector<double>> win_matrix(
    const std::vector<RebalancePoint>& points, std::size_t n_strats,
    bool use_sharpe) {
    std::vector<std::vector<double>> m(n_strats,
                                       std::vector<double>(n_strats, 0.0));
    if (points.empty()) return m;
    for (const auto& pt : points) {
        for (std::size_t a = 0; a < n_strats; ++a) {
            for (std::size_t b = 0; b < n_strats; ++b) {
                const double va = use_sharpe ? pt.per_strategy[a].sharpe
                                             : pt.per_strategy[a].next_period_return;
                const double vb = use_sharpe ? pt.per_strategy[b].sharpe
                                             : pt.per_strategy[b].next_period_return;
                if (va > vb) m[a][b] += 1.0;
            }
        }
    }
    for (auto& row : m) {
        for (double& v : row) v = 100.0 * v / static_cast<double>(points.size());
    }
    return m;
}

BacktestReport assemble_report(const ReturnPanel& returns,
                               const BacktestConfig& cfg,
                               const std::vector<long>& schedule,
                               std::vector<WindowEstimates>&& estimates,
                               std::vector<RebalancePoint>&& points,
                               std::vector<std::pair<long, std::string>>&& failures) {
    BacktestReport report;
    report.config = cfg;
    report.assets = returns.assets;
    report.points = std::move(points);

    const std::size_t n_strats = cfg.strategies.size();
    for (std::size_t s = 0; s < n_strats; ++s) {
        report.aggregates.push_back(aggregate_strategy(report.points, s));
    }
    report.higher_return_pct = win_matrix(report.points, n_strats, false);
    report.higher_sharpe_pct = win_matrix(report.points, n_strats, true);

    // Regimes: k splits make k+1 half-open date ranges.
    const auto& splits = cfg.regime_splits;
    for (std::size_t r = 0; r <= splits.size(); ++r) {
        RegimeAggregate regime;
        regime.start = r == 0 ? std::string() : splits[r - 1];
        regime.end = r == splits.size() ? std::string() : splits[r];
        std::vector<RebalancePoint> subset;
        for (const auto& pt : report.points) {
            const bool after_start = regime.start.empty() || pt.date >= regime.start;
            const bool before_end = regime.end.empty() || pt.date < regime.end;
            if (after_start && before_end) subset.push_back(pt);
        }
        for (std::size_t s = 0; s < n_strats; ++s) {
            regime.per_strategy.push_back(aggregate_strategy(subset, s));
        }
        regime.higher_return_pct = win_matrix(subset, n_strats, false);
        regime.higher_sharpe_pct = win_matrix(subset, n_strats, true);
        report.regimes.push_back(std::move(regime));
    }

    // Rolling series come straight from the estimates (every scheduled
    // window, including ones whose strategy evaluation failed).
    const long d = returns.d();
    report.rolling_assets.assign(static_cast<std::size_t>(d), {});
    for (long a = 0; a < d; ++a) {
        for (long b = a + 1; b < d; ++b) {
            BacktestReport::PairSeries ps;
            ps.a = a;
            ps.b = b;
            report.rolling_pairs.push_back(std::move(ps));
        }
    }
    for (const auto& est : estimates) {
        if (est.asset_stats.empty()) continue;  // window failed before stats
        for (long a = 0; a < d; ++a) {
            report.rolling_assets[static_cast<std::size_t>(a)].push_back(
                est.asset_stats[static_cast<std::size_t>(a)]);
        }
        for (std::size_t k = 0; k < est.pair_stats.size(); ++k) {
            report.rolling_pairs[k].series.push_back(est.pair_stats[k]);
        }
    }

    for (auto& [idx, reason] : failures) {
        report.failed_windows.push_back(idx);
        report.failure_reasons.push_back(std::move(reason));
    }
    if (10 * report.failed_windows.size() > schedule.size()) {
        throw Error("backtest: more than 10% of windows failed");
    }
    return report;
}

BacktestReport run_backtest_impl(const ReturnPanel& returns,
                                 const BacktestConfig& cfg, bool parallel) {
    cfg.validate();
    const std::vector<long> schedule =
        window_schedule(returns.n(), cfg.window_length, cfg.rebalance_frequency);
    const long n_windows = static_cast<long>(schedule.size());
    const bool copula = uses_copula(cfg);

    // Phase 0: marginal fits at the refit cadence.
    std::vector<MarginalFits> fits(copula ? schedule.size() : 0);
    std::vector<char> fit_done(schedule.size(), 0);
    if (copula) {
#pragma omp parallel for schedule(dynamic) if (parallel)
        for (long i = 0; i < n_windows; ++i) {
            if (i % cfg.refit_interval != 0) continue;
            const Eigen::MatrixXd window = returns.returns.middleRows(
                schedule[static_cast<std::size_t>(i)], cfg.window_length);
            fits[static_cast<std::size_t>(i)] =
                fit_window_marginals(window, returns.assets);
            fit_done[static_cast<std::size_t>(i)] = 1;
        }
    }

    // Phase 1: per-window estimation (marginals -> copula -> Monte Carlo
    // covariance), independent across windows.
    std::vector<WindowEstimates> estimates(schedule.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (long i = 0; i < n_windows; ++i) {
        const long refit_idx = (i / cfg.refit_interval) * cfg.refit_interval;
        const MarginalFits* shared =
            copula && fit_done[static_cast<std::size_t>(refit_idx)] != 0
                ? &fits[static_cast<std::size_t>(refit_idx)]
                : nullptr;
        try {
            estimates[static_cast<std::size_t>(i)] = estimate_window(
                returns, i, schedule[static_cast<std::size_t>(i)], cfg, shared,
                refit_idx != i);
        } catch (const std::exception& e) {
            estimates[static_cast<std::size_t>(i)].index = i;
            estimates[static_cast<std::size_t>(i)].failed = true;
            estimates[static_cast<std::size_t>(i)].fail_reason = e.what();
        }
    }

    // Phase 2: ordered optimizer pass with per-strategy warm starts.
    std::vector<RebalancePoint> points;
    std::vector<std::pair<long, std::string>> failures;
    std::vector<std::optional<PortfolioWeights>> warm(cfg.strategies.size());
    for (long i = 0; i < n_windows; ++i) {
        auto& est = estimates[static_cast<std::size_t>(i)];
        if (est.failed) {
            failures.emplace_back(i, est.fail_reason);
            continue;
        }
        try {
            points.push_back(score_window(est, cfg, warm));
        } catch (const std::exception& e) {
            failures.emplace_back(i, e.what());
        }
    }

    return assemble_report(returns, cfg, schedule, std::move(estimates),
                           std::move(points), std::move(failures));
}

}  // namespace

RebalancePoint evaluate_window(const ReturnPanel& returns, long t,
                               const BacktestConfig& config) {
    config.validate();
    const long L = config.window_length;
    const long f = config.rebalance_frequency;
    if (t < 0 || t % f != 0 || t + L + f > returns.n()) {
        throw DomainError("evaluate_window: t is not a valid schedule start");
    }
    const long idx = t / f;
    WindowEstimates est = estimate_window(returns, idx, t, config, nullptr, false);
    std::vector<std::optional<PortfolioWeights>> warm(config.strategies.size());
    return score_window(est, config, warm);
}

std::vector<DependencePoint> rolling_dependence(const ReturnPanel& returns,
                                                long L, long f, long asset_a,
                                                long asset_b) {
    if (asset_a < 0 || asset_b < 0 || asset_a >= returns.d() ||
        asset_b >= returns.d()) {
        throw SizeError("rolling_dependence: asset index out of range");
    }
    const std::vector<long> schedule = window_schedule(returns.n(), L, f);
    std::vector<DependencePoint> out;
    out.reserve(schedule.size());
    for (long t : schedule) {
        const Eigen::MatrixXd window = returns.returns.middleRows(t, L);
        out.push_back(window_dependence(
            window, asset_a, asset_b,
            returns.dates[static_cast<std::size_t>(t + L - 1)]));
    }
    return out;
}

BacktestReport run_backtest(const ReturnPanel& returns,
                            const BacktestConfig& config) {
    return run_backtest_impl(returns, config, config.parallel);
}

BacktestReport run_backtest_serial(const ReturnPanel& returns,
                                   const BacktestConfig& config) {
    config.validate();
    const std::vector<long> schedule = window_schedule(
        returns.n(), config.window_length, config.rebalance_frequency);
    const bool copula = uses_copula(config);

    std::vector<WindowEstimates> estimates;
    estimates.reserve(schedule.size());
    std::vector<RebalancePoint> points;
    std::vector<std::pair<long, std::string>> failures;
    std::vector<std::optional<PortfolioWeights>> warm(config.strategies.size());

    MarginalFits latest_fits;
    long latest_fit_index = -1;
    for (long i = 0; i < static_cast<long>(schedule.size()); ++i) {
        WindowEstimates est;
        est.index = i;
        try {
            const MarginalFits* shared = nullptr;
            bool reused = false;
            if (copula) {
                if (i % config.refit_interval == 0) {
                    const Eigen::MatrixXd window = returns.returns.middleRows(
                        schedule[static_cast<std::size_t>(i)],
                        config.window_length);
                    latest_fits = fit_window_marginals(window, returns.assets);
                    latest_fit_index = i;
                }
                shared = &latest_fits;
                reused = latest_fit_index != i;
            }
            est = estimate_window(returns, i,
                                  schedule[static_cast<std::size_t>(i)], config,
                                  shared, reused);
        } catch (const std::exception& e) {
            est.failed = true;
            est.fail_reason = e.what();
        }
        if (est.failed) {
            failures.emplace_back(i, est.fail_reason);
            estimates.push_back(std::move(est));
            continue;
        }
        try {
            points.push_back(score_window(est, config, warm));
        } catch (const std::exception& e) {
            failures.emplace_back(i, e.what());
        }
        estimates.push_back(std::move(est));
    }
    return assemble_report(returns, config, schedule, std::move(estimates),
                           std::move(points), std::move(failures));
}

}  // namespace cfolio
