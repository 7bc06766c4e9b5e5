#include "cfolio/market_data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cfolio/errors.hpp"

namespace cfolio {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (std::isspace(static_cast<unsigned char>(s[b])) != 0)) ++b;
    while (e > b && (std::isspace(static_cast<unsigned char>(s[e - 1])) != 0)) --e;
    return s.substr(b, e - b);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

bool is_iso_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
        if (std::isdigit(static_cast<unsigned char>(s[i])) == 0) return false;
    }
    const int month = std::stoi(s.substr(5, 2));
    const int day = std::stoi(s.substr(8, 2));
    return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

double parse_price(const std::string& cell, long line_no) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(cell, &pos);
    } catch (const std::exception&) {
        throw ParseError("unparseable price '" + cell + "'", line_no);
    }
    if (pos != cell.size()) {
        throw ParseError("trailing characters in price '" + cell + "'", line_no);
    }
    if (!std::isfinite(v)) throw ParseError("non-finite price", line_no);
    if (v <= 0.0) {
        throw DomainError("non-positive price " + cell + " at line " +
                          std::to_string(line_no));
    }
    return v;
}

using AssetSeries = std::map<std::string, double>;  // date -> price

struct RawData {
    std::vector<std::string> assets;               // input order
    std::map<std::string, AssetSeries> by_asset;
};

RawData parse_long(const std::vector<std::string>& lines) {
    RawData raw;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const long line_no = static_cast<long>(i) + 1;
        if (trim(lines[i]).empty()) continue;
        const auto cells = split_csv_line(lines[i]);
        if (cells.size() != 3) {
            throw ParseError("expected 3 columns (date,asset,adj_close)", line_no);
        }
        if (!is_iso_date(cells[0])) {
            throw ParseError("bad date '" + cells[0] + "'", line_no);
        }
        if (cells[1].empty()) throw ParseError("empty asset name", line_no);
        const double price = parse_price(cells[2], line_no);
        auto [it, inserted] = raw.by_asset[cells[1]].emplace(cells[0], price);
        (void)it;
        if (!inserted) {
            throw ParseError("duplicate observation for " + cells[1] + " on " +
                                 cells[0],
                             line_no);
        }
        if (std::find(raw.assets.begin(), raw.assets.end(), cells[1]) ==
            raw.assets.end()) {
            raw.assets.push_back(cells[1]);
        }
    }
    return raw;
}

RawData parse_wide(const std::vector<std::string>& lines,
                   const std::vector<std::string>& header) {
    RawData raw;
    raw.assets.assign(header.begin() + 1, header.end());
    for (const auto& a : raw.assets) {
        if (a.empty()) throw ParseError("empty ticker in header", 1);
        raw.by_asset[a];
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const long line_no = static_cast<long>(i) + 1;
        if (trim(lines[i]).empty()) continue;
        const auto cells = split_csv_line(lines[i]);
        if (cells.size() != header.size()) {
            throw ParseError("expected " + std::to_string(header.size()) +
                                 " columns",
                             line_no);
        }
        if (!is_iso_date(cells[0])) {
            throw ParseError("bad date '" + cells[0] + "'", line_no);
        }
        for (std::size_t j = 1; j < cells.size(); ++j) {
            if (cells[j].empty()) continue;  // missing observation
            const double price = parse_price(cells[j], line_no);
            auto [it, inserted] =
                raw.by_asset[raw.assets[j - 1]].emplace(cells[0], price);
            (void)it;
            if (!inserted) {
                throw ParseError("duplicate date " + cells[0], line_no);
            }
        }
    }
    return raw;
}

constexpr double kMaxMissingFraction = 0.05;

LoadResult align(const RawData& raw) {
    LoadResult out;
    DataQualityReport& quality = out.quality;

    // Reference calendar: dates covered by at least half of the assets. One
    // asset on a disjoint calendar then scores ~100% missing instead of
    // dragging every other asset's missing fraction up with it.
    std::map<std::string, std::size_t> presence;
    for (const auto& [asset, series] : raw.by_asset) {
        (void)asset;
        for (const auto& [date, price] : series) {
            (void)price;
            ++presence[date];
        }
    }
    if (presence.empty()) throw AlignmentError("no observations to align");
    std::vector<std::string> reference;
    for (const auto& [date, count] : presence) {
        if (2 * count >= raw.by_asset.size()) reference.push_back(date);
    }
    if (reference.empty()) {
        throw AlignmentError(
            "no common trading calendar (date sets are mostly disjoint)");
    }
    const double n_ref = static_cast<double>(reference.size());

    std::vector<std::string> kept;
    for (const auto& asset : raw.assets) {
        const auto& series = raw.by_asset.at(asset);
        if (series.size() < 2) {
            quality.rejected.push_back({asset, "fewer than 2 observations"});
            continue;
        }
        long missing = 0;
        for (const auto& date : reference) {
            if (series.count(date) == 0) ++missing;
        }
        if (static_cast<double>(missing) / n_ref > kMaxMissingFraction) {
            std::ostringstream reason;
            reason << "missing " << missing << " of " << reference.size()
                   << " reference dates";
            quality.rejected.push_back({asset, reason.str()});
            continue;
        }
        kept.push_back(asset);
    }
    if (kept.empty()) {
        throw AlignmentError("date alignment left no usable assets");
    }

    // Calendar = union over kept assets.
    std::vector<std::string> calendar;
    {
        std::set<std::string> dates;
        for (const auto& asset : kept) {
            for (const auto& [date, price] : raw.by_asset.at(asset)) {
                (void)price;
                dates.insert(date);
            }
        }
        calendar.assign(dates.begin(), dates.end());
    }

    // Forward-fill isolated single-day gaps; anything else forces the date
    // out of the calendar (intersection behavior).
    const std::size_t n_cal = calendar.size();
    const std::size_t d = kept.size();
    Eigen::MatrixXd grid(static_cast<long>(n_cal), static_cast<long>(d));
    std::vector<char> row_ok(n_cal, 1);
    for (std::size_t j = 0; j < d; ++j) {
        const auto& series = raw.by_asset.at(kept[j]);
        for (std::size_t i = 0; i < n_cal; ++i) {
            const auto it = series.find(calendar[i]);
            if (it != series.end()) {
                grid(static_cast<long>(i), static_cast<long>(j)) = it->second;
                continue;
            }
            const bool prev_present =
                i > 0 && series.count(calendar[i - 1]) > 0;
            const bool next_present =
                i + 1 < n_cal && series.count(calendar[i + 1]) > 0;
            if (prev_present && next_present) {
                grid(static_cast<long>(i), static_cast<long>(j)) =
                    series.at(calendar[i - 1]);
                quality.fills.push_back({kept[j], calendar[i]});
            } else {
                row_ok[i] = 0;
            }
        }
    }

    std::vector<std::string> final_dates;
    std::vector<long> keep_rows;
    for (std::size_t i = 0; i < n_cal; ++i) {
        if (row_ok[i] != 0) {
            final_dates.push_back(calendar[i]);
            keep_rows.push_back(static_cast<long>(i));
        } else {
            ++quality.dropped_dates;
        }
    }
    if (final_dates.size() < 2) {
        throw AlignmentError("empty or single-date intersection after alignment");
    }

    Eigen::MatrixXd prices(static_cast<long>(final_dates.size()),
                           static_cast<long>(d));
    for (std::size_t i = 0; i < keep_rows.size(); ++i) {
        prices.row(static_cast<long>(i)) = grid.row(keep_rows[i]);
    }

    quality.aligned_dates = static_cast<long>(final_dates.size());
    quality.aligned_assets = static_cast<long>(d);
    out.panel = PricePanel(std::move(final_dates), std::move(kept),
                           std::move(prices));
    return out;
}

}  // namespace

PricePanel::PricePanel(std::vector<std::string> dates_,
                       std::vector<std::string> assets_, Eigen::MatrixXd prices_)
    : dates(std::move(dates_)), assets(std::move(assets_)),
      prices(std::move(prices_)) {
    if (prices.rows() != static_cast<long>(dates.size()) ||
        prices.cols() != static_cast<long>(assets.size())) {
        throw SizeError("PricePanel: shape mismatch");
    }
    for (std::size_t i = 1; i < dates.size(); ++i) {
        if (!(dates[i - 1] < dates[i])) {
            throw DomainError("PricePanel: dates not strictly increasing at " +
                              dates[i]);
        }
    }
    for (long i = 0; i < prices.rows(); ++i) {
        for (long j = 0; j < prices.cols(); ++j) {
            const double v = prices(i, j);
            if (!std::isfinite(v) || v <= 0.0) {
                throw DomainError("PricePanel: non-positive or non-finite price");
            }
        }
    }
}

ReturnPanel::ReturnPanel(std::vector<std::string> dates_,
                         std::vector<std::string> assets_,
                         Eigen::MatrixXd returns_)
    : dates(std::move(dates_)), assets(std::move(assets_)),
      returns(std::move(returns_)) {
    if (returns.rows() != static_cast<long>(dates.size()) ||
        returns.cols() != static_cast<long>(assets.size())) {
        throw SizeError("ReturnPanel: shape mismatch");
    }
    if (!returns.allFinite()) {
        throw DomainError("ReturnPanel: non-finite return");
    }
}

LoadResult load_prices_text(const std::string& csv_text) {
    std::vector<std::string> lines;
    {
        std::stringstream ss(csv_text);
        std::string line;
        while (std::getline(ss, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            lines.push_back(line);
        }
    }
    if (lines.empty()) throw ParseError("empty input", 1);

    const auto header = split_csv_line(lines[0]);
    if (header.size() < 2 || lower(header[0]) != "date") {
        throw ParseError("header must start with a 'date' column", 1);
    }

    RawData raw;
    if (header.size() == 3 && lower(header[1]) == "asset" &&
        lower(header[2]) == "adj_close") {
        raw = parse_long(lines);
    } else {
        raw = parse_wide(lines, header);
    }
    if (raw.by_asset.empty()) throw AlignmentError("no data rows");
    return align(raw);
}

LoadResult load_prices(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open input file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_prices_text(ss.str());
}

ReturnPanel log_returns(const PricePanel& prices) {
    if (prices.n_dates() < 2) {
        throw SizeError("log_returns: need at least 2 price rows");
    }
    const long n = prices.n_dates() - 1;
    const long d = prices.n_assets();
    Eigen::MatrixXd r(n, d);
    for (long t = 0; t < n; ++t) {
        for (long j = 0; j < d; ++j) {
            r(t, j) = std::log(prices.prices(t + 1, j)) -
                      std::log(prices.prices(t, j));
        }
    }
    std::vector<std::string> dates(prices.dates.begin() + 1, prices.dates.end());
    return ReturnPanel(std::move(dates), prices.assets, std::move(r));
}

}  // namespace cfolio
