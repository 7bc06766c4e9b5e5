#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "cfolio/market_data.hpp"
#include "cfolio/rng.hpp"

namespace cfolio {

// Deterministic synthetic price panel: one-factor correlated returns with
// per-asset volatility, weekday calendar. Used by tests, the benchmark, and
// the bundled demo fixture.
struct SyntheticSpec {
    long n_days = 600;  // price rows (returns = n_days - 1)
    long d = 3;
    std::uint64_t seed = 2024;
    double factor_load = 0.5;
    double base_vol = 0.012;
    std::string start_date = "2019-01-02";
};

inline std::vector<std::string> weekday_dates(const std::string& start,
                                              long count) {
    namespace chr = std::chrono;
    const int y = std::stoi(start.substr(0, 4));
    const unsigned mo = static_cast<unsigned>(std::stoi(start.substr(5, 2)));
    const unsigned da = static_cast<unsigned>(std::stoi(start.substr(8, 2)));
    chr::sys_days cursor{
        chr::year_month_day(chr::year(y), chr::month(mo), chr::day(da))};
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(count));
    while (static_cast<long>(out.size()) < count) {
        const chr::weekday wd(cursor);
        if (wd != chr::Saturday && wd != chr::Sunday) {
            const chr::year_month_day ymd(cursor);
            char buf[16];
            std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u",
                          static_cast<int>(ymd.year()),
                          static_cast<unsigned>(ymd.month()),
                          static_cast<unsigned>(ymd.day()));
            out.emplace_back(buf);
        }
        cursor += chr::days(1);
    }
    return out;
}

inline PricePanel synthetic_price_panel(const SyntheticSpec& spec = {}) {
    Rng rng(spec.seed);
    const long n = spec.n_days;
    const long d = spec.d;
    Eigen::MatrixXd prices(n, d);
    std::vector<double> level(static_cast<std::size_t>(d), 100.0);
    for (long j = 0; j < d; ++j) {
        level[static_cast<std::size_t>(j)] = 60.0 + 25.0 * static_cast<double>(j);
        prices(0, j) = level[static_cast<std::size_t>(j)];
    }
    for (long t = 1; t < n; ++t) {
        const double factor = rng.normal();
        for (long j = 0; j < d; ++j) {
            const double vol =
                spec.base_vol * (1.0 + 0.6 * static_cast<double>(j));
            const double shock = spec.factor_load * factor +
                                 std::sqrt(1.0 - spec.factor_load *
                                                     spec.factor_load) *
                                     rng.normal();
            const double drift = 1e-4 * (1.0 + static_cast<double>(j));
            prices(t, j) = prices(t - 1, j) * std::exp(drift + vol * shock);
        }
    }
    std::vector<std::string> assets;
    for (long j = 0; j < d; ++j) {
        assets.push_back("AST" + std::to_string(j + 1));
    }
    return PricePanel(weekday_dates(spec.start_date, n), std::move(assets),
                      std::move(prices));
}

}  // namespace cfolio
