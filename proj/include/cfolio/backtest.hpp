#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cfolio/market_data.hpp"
#include "cfolio/qp.hpp"
#include "cfolio/sgt.hpp"

namespace cfolio {

enum class Strategy {
    EqWeights,
    DataCov3Constraint,
    CopulaCov2Constraint,
    CopulaCov3Constraint,
};

const char* strategy_name(Strategy s);
std::optional<Strategy> strategy_from_name(const std::string& name);

struct BacktestConfig {
    long window_length = 250;      // L, trading days
    long rebalance_frequency = 1;  // f, days between rebalances
    std::vector<Strategy> strategies = {
        Strategy::EqWeights, Strategy::DataCov3Constraint,
        Strategy::CopulaCov2Constraint, Strategy::CopulaCov3Constraint};
    double epsilon = 8e-4;     // Monte Carlo accuracy target
    long mc_cap = 200000;      // hard ceiling on replications
    long pilot_size = 10000;   // pilot draw for the eigenvalue estimate
    std::uint64_t seed = 42;
    std::vector<std::string> regime_splits = {"2020-03-01", "2022-03-01"};
    long refit_interval = 1;   // marginal refit cadence in rebalance steps
    bool parallel = true;

    void validate() const;
};

struct StrategyDiagnostics {
    bool fallback = false;  // copula covariance replaced by the sample one
    std::vector<std::string> fit_failures;
    long mc_draws = 0;
    double mc_lambda_max = 0.0;
    bool cov_regularized = false;
    std::string qp_status;  // "optimal", "degenerate-fallback", "closed-form"
    double kkt_residual = 0.0;
};

struct StrategyResult {
    Eigen::VectorXd weights;
    double objective = 0.0;
    double next_period_return = 0.0;
    double sharpe = 0.0;
    Eigen::VectorXd risk_contributions;
    StrategyDiagnostics diagnostics;
};

struct RebalancePoint {
    long index = 0;         // position in the schedule
    long window_start = 0;  // 0-based first return row of the estimation window
    std::string date;       // last estimation-window date
    std::vector<StrategyResult> per_strategy;  // config.strategies order
    std::vector<FitReport> marginal_fits;      // per asset; empty without copulas
    bool fits_reused = false;
};

// 0-based start rows t with evaluation span t+f .. t+L+f-1 inside the panel;
// count = floor((n_returns - L) / f).
std::vector<long> window_schedule(long n_returns, long L, long f);

// One rebalance point, cold-started. t is the 0-based first row of the
// estimation window and must come from window_schedule.
RebalancePoint evaluate_window(const ReturnPanel& returns, long t,
                               const BacktestConfig& config);

struct DependencePoint {
    std::string date;
    double pearson = 0.0;
    double spearman = 0.0;
    double kendall = 0.0;
    bool defined = true;
};

// Window-by-window correlation triple for one asset pair.
std::vector<DependencePoint> rolling_dependence(const ReturnPanel& returns,
                                                long L, long f, long asset_a,
                                                long asset_b);

struct StrategyAggregate {
    double avg_return = 0.0;
    double avg_sharpe = 0.0;
    long n_windows = 0;
};

struct RegimeAggregate {
    std::string start;  // inclusive; empty = panel start
    std::string end;    // exclusive; empty = panel end
    std::vector<StrategyAggregate> per_strategy;
    // Percentages in [0,100]: entry (a,b) = share of regime windows where
    // strategy a beat strategy b.
    std::vector<std::vector<double>> higher_return_pct;
    std::vector<std::vector<double>> higher_sharpe_pct;
};

struct AssetRollingPoint {
    std::string date;
    double mean = 0.0;
    double sd = 0.0;
    double sharpe = 0.0;
};

struct BacktestReport {
    BacktestConfig config;
    std::vector<std::string> assets;
    std::vector<RebalancePoint> points;
    std::vector<StrategyAggregate> aggregates;  // config.strategies order
    std::vector<std::vector<double>> higher_return_pct;  // strategy x strategy
    std::vector<std::vector<double>> higher_sharpe_pct;
    std::vector<RegimeAggregate> regimes;
    // Rolling data statistics over every scheduled window (independent of
    // strategy evaluation outcomes).
    std::vector<std::vector<AssetRollingPoint>> rolling_assets;  // [asset][win]
    struct PairSeries {
        long a = 0;
        long b = 0;
        std::vector<DependencePoint> series;
    };
    std::vector<PairSeries> rolling_pairs;
    std::vector<long> failed_windows;            // schedule indices
    std::vector<std::string> failure_reasons;    // parallel to failed_windows
};

// Rolling backtest. Window estimation runs in OpenMP blocks when
// config.parallel is set; the optimizer stage stays ordered so warm starts
// chain window to window. Output is byte-identical to run_backtest_serial.
BacktestReport run_backtest(const ReturnPanel& returns,
                            const BacktestConfig& config);

// Plain ordered reference loop, kept for testing and benchmarking.
BacktestReport run_backtest_serial(const ReturnPanel& returns,
                                   const BacktestConfig& config);

}  // namespace cfolio
