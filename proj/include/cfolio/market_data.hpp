#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace cfolio {

// Date-aligned adjusted close prices: one row per trading date, one column
// per asset. Construction validates strictly increasing dates and strictly
// positive, finite prices.
struct PricePanel {
    std::vector<std::string> dates;   // ISO-8601, strictly increasing
    std::vector<std::string> assets;  // ticker strings
    Eigen::MatrixXd prices;           // n_dates x n_assets

    PricePanel() = default;
    PricePanel(std::vector<std::string> dates_, std::vector<std::string> assets_,
               Eigen::MatrixXd prices_);

    long n_dates() const { return prices.rows(); }
    long n_assets() const { return prices.cols(); }
};

// Daily log returns; one fewer row than the price panel that produced it.
struct ReturnPanel {
    std::vector<std::string> dates;  // date of each return (the later day)
    std::vector<std::string> assets;
    Eigen::MatrixXd returns;  // n x d

    ReturnPanel() = default;
    ReturnPanel(std::vector<std::string> dates_, std::vector<std::string> assets_,
                Eigen::MatrixXd returns_);

    long n() const { return returns.rows(); }
    long d() const { return returns.cols(); }
};

// What ingestion had to do to align the data.
struct DataQualityReport {
    struct Fill {
        std::string asset;
        std::string date;
    };
    struct Rejection {
        std::string asset;
        std::string reason;
    };
    std::vector<Fill> fills;            // forward-filled isolated gaps
    std::vector<Rejection> rejected;    // assets dropped before alignment
    long dropped_dates = 0;             // calendar dates removed by intersection
    long aligned_dates = 0;
    long aligned_assets = 0;
};

struct LoadResult {
    PricePanel panel;
    DataQualityReport quality;
};

// Parse CSV text in either layout:
//   long: date,asset,adj_close
//   wide: date,<ticker1>,<ticker2>,...
// detected from the header row. Assets missing more than 5% of the union
// calendar are rejected; isolated single-day gaps are forward-filled; any
// date still not covered by every kept asset is dropped.
LoadResult load_prices_text(const std::string& csv_text);

// File wrapper around load_prices_text.
LoadResult load_prices(const std::string& path);

ReturnPanel log_returns(const PricePanel& prices);

}  // namespace cfolio
