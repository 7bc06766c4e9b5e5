#include "cfolio/report.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace cfolio {

namespace {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

ordered_json config_json(const BacktestConfig& cfg) {
    ordered_json j;
    j["window_length"] = cfg.window_length;
    j["rebalance_frequency"] = cfg.rebalance_frequency;
    ordered_json strats = ordered_json::array();
    for (Strategy s : cfg.strategies) strats.push_back(strategy_name(s));
    j["strategies"] = strats;
    j["epsilon"] = cfg.epsilon;
    j["mc_cap"] = cfg.mc_cap;
    j["pilot_size"] = cfg.pilot_size;
    j["seed"] = cfg.seed;
    j["regime_splits"] = cfg.regime_splits;
    j["refit_interval"] = cfg.refit_interval;
    j["parallel"] = cfg.parallel;
    return j;
}

ordered_json vector_json(const Eigen::VectorXd& v) {
    ordered_json arr = ordered_json::array();
    for (long i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

ordered_json aggregate_json(const StrategyAggregate& a, const char* name) {
    ordered_json j;
    j["strategy"] = name;
    j["avg_return"] = a.avg_return;
    j["avg_sharpe"] = a.avg_sharpe;
    j["n_windows"] = a.n_windows;
    return j;
}

ordered_json fit_json(const FitReport& f, const std::string& asset) {
    ordered_json j;
    j["asset"] = asset;
    j["mu"] = f.params.mu;
    j["sigma"] = f.params.sigma;
    j["lambda"] = f.params.lambda;
    j["p"] = f.params.p;
    j["q"] = f.params.q;
    j["log_likelihood"] = f.log_likelihood;
    j["converged"] = f.converged;
    j["iterations"] = f.iterations;
    j["ad_statistic"] = f.ad.statistic;
    j["ad_p_value"] = f.ad.p_value;
    return j;
}

}  // namespace

std::string report_to_json(const BacktestReport& report) {
    const auto& cfg = report.config;
    ordered_json j;
    j["config"] = config_json(cfg);
    j["assets"] = report.assets;

    ordered_json points = ordered_json::array();
    for (const auto& pt : report.points) {
        ordered_json p;
        p["index"] = pt.index;
        p["window_start"] = pt.window_start + 1;  // 1-based in serialized form
        p["date"] = pt.date;
        ordered_json strats = ordered_json::array();
        for (std::size_t s = 0; s < cfg.strategies.size(); ++s) {
            const StrategyResult& r = pt.per_strategy[s];
            ordered_json sj;
            sj["name"] = strategy_name(cfg.strategies[s]);
            sj["weights"] = vector_json(r.weights);
            sj["objective"] = r.objective;
            sj["next_period_return"] = r.next_period_return;
            sj["sharpe"] = r.sharpe;
            sj["risk_contributions"] = vector_json(r.risk_contributions);
            ordered_json dj;
            dj["fallback"] = r.diagnostics.fallback;
            dj["fit_failures"] = r.diagnostics.fit_failures;
            dj["mc_draws"] = r.diagnostics.mc_draws;
            dj["mc_lambda_max"] = r.diagnostics.mc_lambda_max;
            dj["cov_regularized"] = r.diagnostics.cov_regularized;
            dj["qp_status"] = r.diagnostics.qp_status;
            dj["kkt_residual"] = r.diagnostics.kkt_residual;
            sj["diagnostics"] = dj;
            strats.push_back(sj);
        }
        p["strategies"] = strats;
        p["fits_reused"] = pt.fits_reused;
        ordered_json fits = ordered_json::array();
        for (std::size_t a = 0; a < pt.marginal_fits.size(); ++a) {
            fits.push_back(fit_json(pt.marginal_fits[a], report.assets[a]));
        }
        p["marginal_fits"] = fits;
        points.push_back(p);
    }
    j["points"] = points;

    ordered_json aggs = ordered_json::array();
    for (std::size_t s = 0; s < report.aggregates.size(); ++s) {
        aggs.push_back(aggregate_json(report.aggregates[s],
                                      strategy_name(cfg.strategies[s])));
    }
    j["aggregates"] = aggs;
    j["higher_return_pct"] = report.higher_return_pct;
    j["higher_sharpe_pct"] = report.higher_sharpe_pct;

    ordered_json regimes = ordered_json::array();
    for (const auto& regime : report.regimes) {
        ordered_json rj;
        rj["start"] = regime.start;
        rj["end"] = regime.end;
        ordered_json ra = ordered_json::array();
        for (std::size_t s = 0; s < regime.per_strategy.size(); ++s) {
            ra.push_back(aggregate_json(regime.per_strategy[s],
                                        strategy_name(cfg.strategies[s])));
        }
        rj["aggregates"] = ra;
        rj["higher_return_pct"] = regime.higher_return_pct;
        rj["higher_sharpe_pct"] = regime.higher_sharpe_pct;
        regimes.push_back(rj);
    }
    j["regimes"] = regimes;

    ordered_json rolling;
    ordered_json assets = ordered_json::array();
    for (std::size_t a = 0; a < report.rolling_assets.size(); ++a) {
        ordered_json aj;
        aj["asset"] = report.assets[a];
        ordered_json series = ordered_json::array();
        for (const auto& pt : report.rolling_assets[a]) {
            ordered_json e;
            e["date"] = pt.date;
            e["mean"] = pt.mean;
            e["sd"] = pt.sd;
            e["sharpe"] = pt.sharpe;
            series.push_back(e);
        }
        aj["series"] = series;
        assets.push_back(aj);
    }
    rolling["assets"] = assets;
    ordered_json pairs = ordered_json::array();
    for (const auto& ps : report.rolling_pairs) {
        ordered_json pj;
        pj["assets"] = {report.assets[static_cast<std::size_t>(ps.a)],
                        report.assets[static_cast<std::size_t>(ps.b)]};
        ordered_json series = ordered_json::array();
        for (const auto& pt : ps.series) {
            ordered_json e;
            e["date"] = pt.date;
            e["pearson"] = pt.pearson;
            e["spearman"] = pt.spearman;
            e["kendall"] = pt.kendall;
            e["defined"] = pt.defined;
            series.push_back(e);
        }
        pj["series"] = series;
        pairs.push_back(pj);
    }
    rolling["pairs"] = pairs;
    j["rolling"] = rolling;

    ordered_json failures = ordered_json::array();
    for (std::size_t i = 0; i < report.failed_windows.size(); ++i) {
        ordered_json fj;
        fj["index"] = report.failed_windows[i];
        fj["reason"] = report.failure_reasons[i];
        failures.push_back(fj);
    }
    j["failed_windows"] = failures;
    return j.dump(2) + "\n";
}

namespace {

// Reference strategy for the Table-2 style pairwise rows: the sample
// covariance model when it ran, otherwise the naive portfolio, otherwise the
// first strategy.
std::size_t baseline_index(const BacktestConfig& cfg) {
    for (std::size_t s = 0; s < cfg.strategies.size(); ++s) {
        if (cfg.strategies[s] == Strategy::DataCov3Constraint) return s;
    }
    for (std::size_t s = 0; s < cfg.strategies.size(); ++s) {
        if (cfg.strategies[s] == Strategy::EqWeights) return s;
    }
    return 0;
}

}  // namespace

std::string summary_csv(const BacktestReport& report) {
    const auto& cfg = report.config;
    const std::size_t base = baseline_index(cfg);
    std::ostringstream out;
    out << "metric";
    for (Strategy s : cfg.strategies) out << ',' << strategy_name(s);
    out << '\n';

    out << "Average Return (%)";
    for (const auto& a : report.aggregates) {
        out << ',' << format_double(100.0 * a.avg_return);
    }
    out << '\n';

    out << "Average Sharpe Ratio (%)";
    for (const auto& a : report.aggregates) {
        out << ',' << format_double(100.0 * a.avg_sharpe);
    }
    out << '\n';

    out << "No. of Windows";
    for (const auto& a : report.aggregates) out << ',' << a.n_windows;
    out << '\n';

    out << "% Higher Return Windows";
    for (std::size_t s = 0; s < cfg.strategies.size(); ++s) {
        out << ',';
        if (s != base) out << format_double(report.higher_return_pct[s][base]);
    }
    out << '\n';

    out << "% Higher Sharpe Ratio Windows";
    for (std::size_t s = 0; s < cfg.strategies.size(); ++s) {
        out << ',';
        if (s != base) out << format_double(report.higher_sharpe_pct[s][base]);
    }
    out << '\n';
    return out.str();
}

std::string weights_csv(const BacktestReport& report) {
    std::ostringstream out;
    out << "date,strategy,asset,weight\n";
    for (const auto& pt : report.points) {
        for (std::size_t s = 0; s < report.config.strategies.size(); ++s) {
            const auto& w = pt.per_strategy[s].weights;
            for (long a = 0; a < w.size(); ++a) {
                out << pt.date << ','
                    << strategy_name(report.config.strategies[s]) << ','
                    << report.assets[static_cast<std::size_t>(a)] << ','
                    << format_double(w[a]) << '\n';
            }
        }
    }
    return out.str();
}

std::string rolling_metrics_csv(const BacktestReport& report) {
    std::ostringstream out;
    out << "date,asset_pair,mean,sd,sharpe,pearson,spearman,kendall\n";
    for (std::size_t a = 0; a < report.rolling_assets.size(); ++a) {
        for (const auto& pt : report.rolling_assets[a]) {
            out << pt.date << ',' << report.assets[a] << ','
                << format_double(pt.mean) << ',' << format_double(pt.sd) << ','
                << format_double(pt.sharpe) << ",,,\n";
        }
    }
    for (const auto& ps : report.rolling_pairs) {
        const std::string label =
            report.assets[static_cast<std::size_t>(ps.a)] + "|" +
            report.assets[static_cast<std::size_t>(ps.b)];
        for (const auto& pt : ps.series) {
            out << pt.date << ',' << label << ",,,,";
            if (pt.defined) {
                out << format_double(pt.pearson) << ','
                    << format_double(pt.spearman) << ','
                    << format_double(pt.kendall);
            } else {
                out << ",,";
            }
            out << '\n';
        }
    }
    return out.str();
}

std::string risk_contributions_csv(const BacktestReport& report) {
    std::ostringstream out;
    out << "date,strategy,asset,risk_contribution\n";
    for (const auto& pt : report.points) {
        for (std::size_t s = 0; s < report.config.strategies.size(); ++s) {
            const auto& rc = pt.per_strategy[s].risk_contributions;
            for (long a = 0; a < rc.size(); ++a) {
                out << pt.date << ','
                    << strategy_name(report.config.strategies[s]) << ','
                    << report.assets[static_cast<std::size_t>(a)] << ','
                    << format_double(rc[a]) << '\n';
            }
        }
    }
    return out.str();
}

std::string fit_diagnostics_csv(const BacktestReport& report) {
    std::ostringstream out;
    out << "date,window_start,asset,mu,sigma,lambda,p,q,log_likelihood,"
           "converged,iterations,ad_statistic,ad_p_value,reused\n";
    for (const auto& pt : report.points) {
        for (std::size_t a = 0; a < pt.marginal_fits.size(); ++a) {
            const FitReport& f = pt.marginal_fits[a];
            out << pt.date << ',' << pt.window_start + 1 << ','
                << report.assets[a] << ',' << format_double(f.params.mu) << ','
                << format_double(f.params.sigma) << ','
                << format_double(f.params.lambda) << ','
                << format_double(f.params.p) << ',' << format_double(f.params.q)
                << ',' << format_double(f.log_likelihood) << ','
                << (f.converged ? 1 : 0) << ',' << f.iterations << ','
                << format_double(f.ad.statistic) << ','
                << format_double(f.ad.p_value) << ','
                << (pt.fits_reused ? 1 : 0) << '\n';
        }
    }
    return out.str();
}

void write_report_files(const BacktestReport& report, const std::string& out_dir,
                        bool write_csv, bool write_json) {
    const fs::path dir(out_dir);
    std::vector<fs::path> written;
    auto emit = [&](const char* name, const std::string& payload) {
        const fs::path path = dir / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot open output file: " + path.string());
        out << payload;
        out.flush();
        if (!out) throw IoError("write failed: " + path.string());
        written.push_back(path);
    };
    try {
        fs::create_directories(dir);
        if (write_json) emit("report.json", report_to_json(report));
        if (write_csv) {
            emit("summary.csv", summary_csv(report));
            emit("weights.csv", weights_csv(report));
            emit("rolling_metrics.csv", rolling_metrics_csv(report));
            emit("risk_contributions.csv", risk_contributions_csv(report));
            emit("fit_diagnostics.csv", fit_diagnostics_csv(report));
        }
    } catch (...) {
        std::error_code ec;
        for (const auto& p : written) fs::remove(p, ec);
        throw;
    }
}

}  // namespace cfolio
