#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "cfolio/backtest.hpp"
#include "cfolio/fetch.hpp"
#include "cfolio/market_data.hpp"
#include "cfolio/parallel.hpp"
#include "cfolio/report.hpp"

namespace {

using cfolio::BacktestConfig;
using json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct RunOptions {
    std::string input;
    std::string out_dir;
    std::string freq;  // "daily" | "weekly"
    std::vector<std::string> strategies;
    std::vector<std::string> formats = {"csv", "json"};
    BacktestConfig cfg;
};

long freq_to_days(const std::string& freq) {
    if (freq == "daily") return 1;
    if (freq == "weekly") return 5;
    throw cfolio::DomainError("freq must be 'daily' or 'weekly', got '" + freq +
                              "'");
}

std::vector<cfolio::Strategy> parse_strategies(
    const std::vector<std::string>& names) {
    std::vector<cfolio::Strategy> out;
    for (const auto& name : names) {
        const auto s = cfolio::strategy_from_name(name);
        if (!s) {
            throw cfolio::DomainError(
                "unknown strategy '" + name +
                "'; valid: eq_weights, data_cov_3constraint, "
                "copula_cov_2constraint, copula_cov_3constraint");
        }
        out.push_back(*s);
    }
    return out;
}

// Flat key-value config document mirroring the CLI flags. CLI flags override.
void apply_config_file(const std::string& path, RunOptions& opts) {
    std::ifstream in(path);
    if (!in) throw cfolio::IoError("cannot open config file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw cfolio::ParseError(std::string("config: ") + e.what(), 0);
    }
    for (const auto& [key, value] : doc.items()) {
        if (key == "input") {
            opts.input = value.get<std::string>();
        } else if (key == "out") {
            opts.out_dir = value.get<std::string>();
        } else if (key == "freq") {
            opts.freq = value.get<std::string>();
        } else if (key == "window_length") {
            opts.cfg.window_length = value.get<long>();
        } else if (key == "rebalance_frequency") {
            opts.cfg.rebalance_frequency = value.get<long>();
        } else if (key == "strategies") {
            opts.strategies = value.get<std::vector<std::string>>();
        } else if (key == "epsilon") {
            opts.cfg.epsilon = value.get<double>();
        } else if (key == "mc_cap") {
            opts.cfg.mc_cap = value.get<long>();
        } else if (key == "pilot_size") {
            opts.cfg.pilot_size = value.get<long>();
        } else if (key == "seed") {
            opts.cfg.seed = value.get<std::uint64_t>();
        } else if (key == "regime_splits") {
            opts.cfg.regime_splits = value.get<std::vector<std::string>>();
        } else if (key == "refit_interval") {
            opts.cfg.refit_interval = value.get<long>();
        } else if (key == "formats") {
            opts.formats = value.get<std::vector<std::string>>();
        } else if (key == "parallel") {
            opts.cfg.parallel = value.get<bool>();
        } else {
            throw cfolio::DomainError("config: unknown key '" + key + "'");
        }
    }
}

bool is_url(const std::string& s) {
    return s.rfind("http://", 0) == 0 || s.rfind("https://", 0) == 0;
}

cfolio::LoadResult load_input(const std::string& input) {
    if (is_url(input)) {
        return cfolio::load_prices_text(cfolio::fetch_csv(input));
    }
    return cfolio::load_prices(input);
}

int run_backtest_cmd(const RunOptions& opts_in, const CLI::App& sub) {
    RunOptions opts = opts_in;
    if (opts.input.empty()) {
        std::cerr << "error: no input given (use --input or a config file)\n"
                  << sub.help() << '\n';
        return kExitUsage;
    }
    if (opts.out_dir.empty()) {
        std::cerr << "error: no output directory given (use --out)\n"
                  << sub.help() << '\n';
        return kExitUsage;
    }
    bool want_csv = false, want_json = false;
    for (const auto& f : opts.formats) {
        if (f == "csv") {
            want_csv = true;
        } else if (f == "json") {
            want_json = true;
        } else {
            std::cerr << "error: unknown format '" << f << "' (csv|json)\n";
            return kExitUsage;
        }
    }
    if (!want_csv && !want_json) {
        std::cerr << "error: formats must include csv and/or json\n";
        return kExitUsage;
    }

    cfolio::ReturnPanel returns;
    try {
        if (!opts.freq.empty()) {
            opts.cfg.rebalance_frequency = freq_to_days(opts.freq);
        }
        if (!opts.strategies.empty()) {
            opts.cfg.strategies = parse_strategies(opts.strategies);
        }
        opts.cfg.validate();
        const cfolio::LoadResult loaded = load_input(opts.input);
        returns = cfolio::log_returns(loaded.panel);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        const cfolio::BacktestReport report =
            cfolio::run_backtest(returns, opts.cfg);
        cfolio::write_report_files(report, opts.out_dir, want_csv, want_json);
        std::cout << "backtest complete: " << report.points.size()
                  << " rebalance points";
        if (!report.failed_windows.empty()) {
            std::cout << " (" << report.failed_windows.size()
                      << " windows failed)";
        }
        std::cout << "; outputs in " << opts.out_dir << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

int run_fit_marginal_cmd(const std::string& input, const std::string& asset,
                         const std::string& window, long grid_points) {
    cfolio::ReturnPanel returns;
    long start = 0, length = 0;
    long col = -1;
    try {
        const auto colon = window.find(':');
        if (colon == std::string::npos) {
            throw cfolio::DomainError("--window must be start:len (1-based)");
        }
        start = std::stol(window.substr(0, colon));
        length = std::stol(window.substr(colon + 1));
        const cfolio::LoadResult loaded = load_input(input);
        returns = cfolio::log_returns(loaded.panel);
        for (std::size_t j = 0; j < returns.assets.size(); ++j) {
            if (returns.assets[j] == asset) col = static_cast<long>(j);
        }
        if (col < 0) {
            std::string tickers;
            for (const auto& a : returns.assets) tickers += " " + a;
            throw cfolio::DomainError("unknown asset '" + asset +
                                      "'; available:" + tickers);
        }
        if (start < 1 || length < 50 || start - 1 + length > returns.n()) {
            throw cfolio::DomainError(
                "--window out of range (1-based start, len >= 50, within " +
                std::to_string(returns.n()) + " returns)");
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        const Eigen::VectorXd col_data =
            returns.returns.block(start - 1, col, length, 1);
        const std::span<const double> view(
            col_data.data(), static_cast<std::size_t>(col_data.size()));
        const cfolio::FitReport fit = cfolio::sgt_fit(view);

        std::cout << "asset,window_start,window_length,mu,sigma,lambda,p,q,"
                     "log_likelihood,converged,iterations,ad_statistic,"
                     "ad_p_value\n";
        std::cout << asset << ',' << start << ',' << length << ','
                  << cfolio::format_double(fit.params.mu) << ','
                  << cfolio::format_double(fit.params.sigma) << ','
                  << cfolio::format_double(fit.params.lambda) << ','
                  << cfolio::format_double(fit.params.p) << ','
                  << cfolio::format_double(fit.params.q) << ','
                  << cfolio::format_double(fit.log_likelihood) << ','
                  << (fit.converged ? 1 : 0) << ',' << fit.iterations << ','
                  << cfolio::format_double(fit.ad.statistic) << ','
                  << cfolio::format_double(fit.ad.p_value) << "\n\n";

        std::cout << "x,pdf\n";
        const double lo = fit.params.mu - 6.0 * fit.params.sigma;
        const double hi = fit.params.mu + 6.0 * fit.params.sigma;
        for (long g = 0; g < grid_points; ++g) {
            const double x =
                lo + (hi - lo) * static_cast<double>(g) /
                         static_cast<double>(grid_points - 1);
            std::cout << cfolio::format_double(x) << ','
                      << cfolio::format_double(cfolio::sgt_pdf(x, fit.params))
                      << '\n';
        }
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

int run_validate_cmd(const std::string& input) {
    try {
        const cfolio::LoadResult loaded = load_input(input);
        const auto& q = loaded.quality;
        std::cout << "assets aligned: " << q.aligned_assets << '\n';
        std::cout << "dates aligned: " << q.aligned_dates
                  << " (dropped: " << q.dropped_dates << ")\n";
        std::cout << "gaps forward-filled: " << q.fills.size() << '\n';
        for (const auto& fill : q.fills) {
            std::cout << "  fill " << fill.asset << " " << fill.date << '\n';
        }
        std::cout << "assets rejected: " << q.rejected.size() << '\n';
        for (const auto& rej : q.rejected) {
            std::cout << "  reject " << rej.asset << ": " << rej.reason << '\n';
        }
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}

}  // namespace

int main(int argc, char** argv) {
    cfolio::apply_thread_cap_from_env();

    CLI::App app{"Semiparametric copula portfolio backtester"};
    app.require_subcommand(1);

    // backtest
    auto* bt = app.add_subcommand("backtest", "Run the rolling-window backtest");
    RunOptions opts;
    std::string config_path;
    std::string input_flag, out_flag, freq_flag;
    std::vector<std::string> strategies_flag, formats_flag;
    long window_flag = 0, mc_cap_flag = 0, pilot_flag = 0, refit_flag = 0;
    double epsilon_flag = 0.0;
    std::uint64_t seed_flag = 0;
    std::vector<std::string> regime_flag;
    bool serial_flag = false;
    bt->add_option("--input", input_flag, "CSV path or http(s) URL");
    bt->add_option("--config", config_path, "JSON config file");
    bt->add_option("--freq", freq_flag, "Rebalancing frequency: daily|weekly");
    bt->add_option("--window-length", window_flag, "Rolling window length L");
    bt->add_option("--strategies", strategies_flag,
                   "Comma-separated strategy list")
        ->delimiter(',');
    bt->add_option("--epsilon", epsilon_flag, "Monte Carlo accuracy target");
    bt->add_option("--mc-cap", mc_cap_flag, "Replication ceiling");
    bt->add_option("--pilot", pilot_flag, "Pilot draw size");
    bt->add_option("--seed", seed_flag, "Random seed");
    bt->add_option("--regime-splits", regime_flag,
                   "Regime boundary dates (ISO-8601)")
        ->delimiter(',');
    bt->add_option("--refit-interval", refit_flag,
                   "Marginal refit cadence in rebalance steps");
    bt->add_option("--formats", formats_flag, "Outputs: csv,json")
        ->delimiter(',');
    bt->add_flag("--serial", serial_flag, "Disable OpenMP window parallelism");
    bt->add_option("--out", out_flag, "Output directory");

    // fit-marginal
    auto* fm = app.add_subcommand("fit-marginal",
                                  "Fit one asset over one window and print the "
                                  "parameters and a density grid");
    std::string fm_input, fm_asset, fm_window;
    long fm_grid = 201;
    fm->add_option("--input", fm_input, "CSV path or http(s) URL")->required();
    fm->add_option("--asset", fm_asset, "Ticker")->required();
    fm->add_option("--window", fm_window, "start:len (1-based return index)")
        ->required();
    fm->add_option("--grid-points", fm_grid, "Density grid size");

    // validate
    auto* vd = app.add_subcommand("validate",
                                  "Run ingestion alignment and report quality");
    std::string vd_input;
    vd->add_option("--input", vd_input, "CSV path or http(s) URL")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (bt->parsed()) {
        try {
            if (!config_path.empty()) apply_config_file(config_path, opts);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return kExitUsage;
        }
        if (!input_flag.empty()) opts.input = input_flag;
        if (!out_flag.empty()) opts.out_dir = out_flag;
        if (!freq_flag.empty()) opts.freq = freq_flag;
        if (!strategies_flag.empty()) opts.strategies = strategies_flag;
        if (!formats_flag.empty()) opts.formats = formats_flag;
        if (bt->count("--window-length") > 0) opts.cfg.window_length = window_flag;
        if (bt->count("--epsilon") > 0) opts.cfg.epsilon = epsilon_flag;
        if (bt->count("--mc-cap") > 0) opts.cfg.mc_cap = mc_cap_flag;
        if (bt->count("--pilot") > 0) opts.cfg.pilot_size = pilot_flag;
        if (bt->count("--seed") > 0) opts.cfg.seed = seed_flag;
        if (bt->count("--regime-splits") > 0) opts.cfg.regime_splits = regime_flag;
        if (bt->count("--refit-interval") > 0) opts.cfg.refit_interval = refit_flag;
        if (serial_flag) opts.cfg.parallel = false;
        return run_backtest_cmd(opts, *bt);
    }
    if (fm->parsed()) {
        return run_fit_marginal_cmd(fm_input, fm_asset, fm_window, fm_grid);
    }
    if (vd->parsed()) {
        return run_validate_cmd(vd_input);
    }
    std::cerr << app.help() << '\n';
    return kExitUsage;
}
