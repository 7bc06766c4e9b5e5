#pragma once

#include <string>

#include "cfolio/backtest.hpp"

namespace cfolio {

// Shortest round-trip decimal form (std::to_chars); NaN renders empty so CSV
// cells stay blank for undefined values.
std::string format_double(double v);

// Full report as deterministic, indented JSON.
std::string report_to_json(const BacktestReport& report);

// Individual CSV payloads (used by write_report_files and by tests).
std::string summary_csv(const BacktestReport& report);
std::string weights_csv(const BacktestReport& report);
std::string rolling_metrics_csv(const BacktestReport& report);
std::string risk_contributions_csv(const BacktestReport& report);
std::string fit_diagnostics_csv(const BacktestReport& report);

// Writes report.json and/or the five CSV files into out_dir. On failure,
// removes whatever it already wrote and rethrows.
void write_report_files(const BacktestReport& report, const std::string& out_dir,
                        bool write_csv, bool write_json);

}  // namespace cfolio
