#include "cfolio/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfolio/errors.hpp"

namespace cfolio {

namespace {

void require_finite(std::span<const double> x, const char* who) {
    for (double v : x) {
        if (!std::isfinite(v)) {
            throw DomainError(std::string(who) + ": input contains a non-finite value");
        }
    }
}

}  // namespace

RankVector ranks(std::span<const double> x) {
    if (x.empty()) throw SizeError("ranks: empty input");
    require_finite(x, "ranks");

    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });

    RankVector out;
    out.ranks.assign(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        // Midrank over the tied block [i, j].
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) out.ranks[order[k]] = r;
        if (j > i) out.has_ties = true;
        i = j + 1;
    }
    return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw SizeError("pearson: length mismatch");
    if (x.size() < 2) throw SizeError("pearson: need at least 2 observations");
    require_finite(x, "pearson");
    require_finite(y, "pearson");

    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);

    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw UndefinedCorrelationError("pearson: zero-variance input");
    }
    const double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw SizeError("spearman: length mismatch");
    const RankVector rx = ranks(x);
    const RankVector ry = ranks(y);
    return pearson(rx.ranks, ry.ranks);
}

namespace {

// Counts strict inversions of v by merge sort; v ends up sorted.
std::uint64_t count_inversions(std::vector<double>& v, std::vector<double>& buf,
                               std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::uint64_t inv = count_inversions(v, buf, lo, mid) +
                        count_inversions(v, buf, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            inv += mid - i;
            buf[k++] = v[j++];
        } else {
            buf[k++] = v[i++];
        }
    }
    while (i < mid) buf[k++] = v[i++];
    while (j < hi) buf[k++] = v[j++];
    std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo),
              buf.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return inv;
}

// Sum of t*(t-1)/2 over maximal tied runs of a sorted sequence.
template <typename Vec, typename Eq>
std::uint64_t tied_pairs(const Vec& v, Eq eq) {
    std::uint64_t total = 0;
    std::size_t i = 0;
    while (i < v.size()) {
        std::size_t j = i;
        while (j + 1 < v.size() && eq(v[j + 1], v[i])) ++j;
        const std::uint64_t t = j - i + 1;
        total += t * (t - 1) / 2;
        i = j + 1;
    }
    return total;
}

}  // namespace

double kendall_tau(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw SizeError("kendall_tau: length mismatch");
    if (x.size() < 2) throw SizeError("kendall_tau: need at least 2 observations");
    require_finite(x, "kendall_tau");
    require_finite(y, "kendall_tau");

    const std::size_t n = x.size();
    std::vector<std::pair<double, double>> pts(n);
    for (std::size_t i = 0; i < n; ++i) pts[i] = {x[i], y[i]};
    std::sort(pts.begin(), pts.end());

    const std::uint64_t n0 =
        static_cast<std::uint64_t>(n) * (n - 1) / 2;
    const std::uint64_t n1 = tied_pairs(
        pts, [](const auto& a, const auto& b) { return a.first == b.first; });
    const std::uint64_t n3 = tied_pairs(
        pts, [](const auto& a, const auto& b) { return a == b; });

    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = pts[i].second;
    std::vector<double> buf(n);
    const std::uint64_t swaps = count_inversions(ys, buf, 0, n);
    // ys is now sorted; reuse it for the y-tie count.
    const std::uint64_t n2 =
        tied_pairs(ys, [](double a, double b) { return a == b; });

    const double denom = std::sqrt(static_cast<double>(n0 - n1)) *
                         std::sqrt(static_cast<double>(n0 - n2));
    if (denom == 0.0) {
        throw UndefinedCorrelationError("kendall_tau: zero-variance input");
    }
    const double cmd = static_cast<double>(n0 - n1) +
                       static_cast<double>(n3) - static_cast<double>(n2) -
                       2.0 * static_cast<double>(swaps);
    return std::clamp(cmd / denom, -1.0, 1.0);
}

namespace {

// Asymptotic CDF of the Anderson-Darling statistic (Marsaglia's adinf).
double ad_asymptotic_cdf(double z) {
    if (z <= 0.0) return 0.0;
    if (z < 2.0) {
        return std::exp(-1.2337141 / z) / std::sqrt(z) *
               (2.00012 +
                (0.247105 -
                 (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) *
                     z) *
                    z);
    }
    return std::exp(
        -std::exp(1.0776 -
                  (2.30695 -
                   (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) *
                       z) *
                      z));
}

}  // namespace

AdResult ad_uniform_test(std::span<const double> u) {
    if (u.size() < 8) throw SizeError("ad_uniform_test: need n >= 8");
    for (double v : u) {
        if (!(v >= 0.0) || !(v <= 1.0)) {
            throw DomainError("ad_uniform_test: entry outside [0, 1]");
        }
    }
    const std::size_t n = u.size();
    std::vector<double> s(u.begin(), u.end());
    for (double& v : s) v = std::clamp(v, 1e-12, 1.0 - 1e-12);
    std::sort(s.begin(), s.end());

    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = 2.0 * static_cast<double>(i + 1) - 1.0;
        acc += w * (std::log(s[i]) + std::log1p(-s[n - 1 - i]));
    }
    AdResult out;
    out.n = n;
    out.statistic = -static_cast<double>(n) - acc / static_cast<double>(n);
    out.p_value = std::clamp(1.0 - ad_asymptotic_cdf(out.statistic), 0.0, 1.0);
    return out;
}

double sample_skewness(std::span<const double> x) {
    if (x.size() < 3) throw SizeError("sample_skewness: need n >= 3");
    require_finite(x, "sample_skewness");
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double m2 = 0.0, m3 = 0.0;
    for (double v : x) {
        const double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    if (m2 == 0.0) throw DegenerateError("sample_skewness: zero variance");
    const double g1 = m3 / std::pow(m2, 1.5);
    return g1 * std::sqrt(n * (n - 1.0)) / (n - 2.0);
}

Moments sample_moments(std::span<const double> x) {
    if (x.empty()) throw SizeError("sample_moments: empty input");
    require_finite(x, "sample_moments");
    Moments m;
    const double n = static_cast<double>(x.size());
    for (double v : x) m.mean += v;
    m.mean /= n;
    if (x.size() >= 2) {
        double ss = 0.0;
        for (double v : x) {
            const double d = v - m.mean;
            ss += d * d;
        }
        m.sd = std::sqrt(ss / (n - 1.0));
    }
    return m;
}

}  // namespace cfolio
