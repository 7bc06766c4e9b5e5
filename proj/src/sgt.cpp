#include "cfolio/sgt.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "cfolio/rng.hpp"
#include "cfolio/special.hpp"

namespace cfolio {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_raw(double sigma, double lambda, double p, double q) {
    if (!(sigma > 0.0)) throw DomainError("sgt: sigma must be > 0");
    if (!(lambda > -1.0 && lambda < 1.0)) {
        throw DomainError("sgt: lambda must be in (-1, 1)");
    }
    if (!(p > 0.0) || !(q > 0.0)) throw DomainError("sgt: p, q must be > 0");
}

}  // namespace

std::pair<double, double> centering_terms(double sigma, double lambda, double p,
                                          double q) {
    validate_raw(sigma, lambda, p, q);
    if (!(p * q > 2.0)) {
        throw DomainError("sgt: variance requires p*q > 2");
    }
    const double lb1 = log_beta(1.0 / p, q);
    const double r2 = std::exp(log_beta(2.0 / p, q - 1.0 / p) - lb1);
    const double r3 = std::exp(log_beta(3.0 / p, q - 2.0 / p) - lb1);
    const double inner = (3.0 * lambda * lambda + 1.0) * r3 -
                         4.0 * lambda * lambda * r2 * r2;
    if (!(inner > 0.0)) {
        throw DomainError("sgt: degenerate variance-adjustment term");
    }
    const double v = std::pow(q, -1.0 / p) / std::sqrt(inner);
    const double m = 2.0 * v * sigma * lambda * std::pow(q, 1.0 / p) * r2;
    return {m, v};
}

SgtParams make_sgt_params(double mu, double sigma, double lambda, double p,
                          double q) {
    if (!std::isfinite(mu)) throw DomainError("sgt: mu must be finite");
    const auto [m, v] = centering_terms(sigma, lambda, p, q);
    SgtParams out;
    out.mu = mu;
    out.sigma = sigma;
    out.lambda = lambda;
    out.p = p;
    out.q = q;
    out.m_shift = m;
    out.v_scale = v;
    return out;
}

namespace {

// log of the side-dependent power term w = |z|^p / (q (v sigma)^p (1+lambda s)^p).
double log_w_term(double abs_z, double side_scale, const SgtParams& prm) {
    return prm.p * (std::log(abs_z) - std::log(prm.v_scale * prm.sigma) -
                    std::log(side_scale)) -
           std::log(prm.q);
}

double log_norm_const(const SgtParams& prm) {
    return std::log(prm.p) - std::log(2.0) -
           std::log(prm.v_scale * prm.sigma) - std::log(prm.q) / prm.p -
           log_beta(1.0 / prm.p, prm.q);
}

// log1p(exp(t)) without overflow.
double log1p_exp(double t) {
    if (t > 33.0) return t;
    return std::log1p(std::exp(t));
}

}  // namespace

double sgt_log_pdf(double x, const SgtParams& prm) {
    const double z = x - prm.mu + prm.m_shift;
    const double side = z < 0.0 ? 1.0 - prm.lambda : 1.0 + prm.lambda;
    double tail = 0.0;
    if (z != 0.0) {
        tail = (1.0 / prm.p + prm.q) * log1p_exp(log_w_term(std::fabs(z), side, prm));
    }
    return log_norm_const(prm) - tail;
}

double sgt_pdf(double x, const SgtParams& prm) {
    return std::exp(sgt_log_pdf(x, prm));
}

namespace {

// CDF by quadrature from the exact anchor F(mu - m) = (1-lambda)/2.
double sgt_cdf_quadrature(double x, const SgtParams& prm) {
    const double anchor = prm.mu - prm.m_shift;
    const double base = 0.5 * (1.0 - prm.lambda);
    const double mass = adaptive_simpson(
        [&](double t) { return sgt_pdf(t, prm); }, std::min(anchor, x),
        std::max(anchor, x), 1e-12);
    return x >= anchor ? base + mass : base - mass;
}

}  // namespace

double sgt_cdf(double x, const SgtParams& prm) {
    const double z = x - prm.mu + prm.m_shift;
    if (z == 0.0) return 0.5 * (1.0 - prm.lambda);
    const double side = z < 0.0 ? 1.0 - prm.lambda : 1.0 + prm.lambda;
    const double log_w = log_w_term(std::fabs(z), side, prm);
    // 1/(1+w) computed stably on both ends of the w range.
    double y_comp;
    if (log_w > 0.0) {
        y_comp = std::exp(-log1p_exp(log_w));
    } else {
        y_comp = 1.0 / (1.0 + std::exp(log_w));
    }
    bool ok = true;
    double tail = reg_inc_beta_try(prm.q, 1.0 / prm.p, y_comp, &ok);
    if (!ok) return std::clamp(sgt_cdf_quadrature(x, prm), 0.0, 1.0);
    const double f = z < 0.0 ? 0.5 * (1.0 - prm.lambda) * tail
                             : 1.0 - 0.5 * (1.0 + prm.lambda) * tail;
    return std::clamp(f, 0.0, 1.0);
}

double sgt_quantile(double u, const SgtParams& prm) {
    if (!(u > 0.0 && u < 1.0)) {
        throw DomainError("sgt_quantile: u must be in (0, 1)");
    }
    const double anchor = prm.mu - prm.m_shift;
    const double f_anchor = 0.5 * (1.0 - prm.lambda);

    // Bracket by geometric expansion from the mode split point.
    double lo = anchor, hi = anchor;
    double flo = f_anchor, fhi = f_anchor;
    double step = prm.sigma;
    if (u < f_anchor) {
        for (int i = 0; i < 4000 && flo > u; ++i) {
            hi = lo;
            fhi = flo;
            lo = anchor - step;
            flo = sgt_cdf(lo, prm);
            step *= 2.0;
        }
    } else {
        for (int i = 0; i < 4000 && fhi < u; ++i) {
            lo = hi;
            flo = fhi;
            hi = anchor + step;
            fhi = sgt_cdf(hi, prm);
            step *= 2.0;
        }
    }

    // Safeguarded Newton within [lo, hi].
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double f = sgt_cdf(x, prm);
        const double resid = f - u;
        if (std::fabs(resid) <= 1e-14) return x;
        if (resid > 0.0) {
            hi = x;
        } else {
            lo = x;
        }
        const double dens = sgt_pdf(x, prm);
        double x_next = dens > 0.0 ? x - resid / dens : x;
        if (!(x_next > lo && x_next < hi)) {
            x_next = 0.5 * (lo + hi);
        }
        if (hi - lo <= 8.0 * std::numeric_limits<double>::epsilon() *
                           std::max(1.0, std::fabs(x))) {
            return x_next;
        }
        x = x_next;
    }
    return x;
}

std::vector<double> sgt_sample(const SgtParams& prm, std::size_t count,
                               std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = sgt_quantile(rng.uniform(), prm);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Maximum likelihood fitting
// ---------------------------------------------------------------------------

namespace {

// Optimizer works on transformed coordinates so every box constraint turns
// into an unconstrained axis: theta = (mu, log sigma, atanh lambda, log p,
// log q). The p*q > 2 moment barrier stays explicit.
struct Transformed {
    std::array<double, 5> theta;
};

constexpr double kLambdaCap = 12.0;  // atanh(lambda) clamp; |lambda| < 1 - 1e-10

std::optional<SgtParams> decode(const std::array<double, 5>& theta) {
    const double mu = theta[0];
    const double sigma = std::exp(theta[1]);
    const double lambda = std::tanh(std::clamp(theta[2], -kLambdaCap, kLambdaCap));
    const double p = std::exp(theta[3]);
    const double q = std::exp(theta[4]);
    if (!std::isfinite(mu) || !std::isfinite(sigma) || sigma <= 0.0) {
        return std::nullopt;
    }
    if (p < 0.05 || p > 500.0 || q < 0.05 || q > 1e9) return std::nullopt;
    if (!(p * q > 2.0 + 1e-9)) return std::nullopt;
    try {
        return make_sgt_params(mu, sigma, lambda, p, q);
    } catch (const DomainError&) {
        return std::nullopt;
    }
}

double neg_log_likelihood(std::span<const double> x,
                          const std::array<double, 5>& theta) {
    const auto prm = decode(theta);
    if (!prm) return kInf;
    const double log_c = std::log(prm->p) - std::log(2.0) -
                         std::log(prm->v_scale * prm->sigma) -
                         std::log(prm->q) / prm->p -
                         log_beta(1.0 / prm->p, prm->q);
    const double exponent = 1.0 / prm->p + prm->q;
    double nll = -static_cast<double>(x.size()) * log_c;
    for (const double xi : x) {
        const double z = xi - prm->mu + prm->m_shift;
        if (z == 0.0) continue;
        const double side = z < 0.0 ? 1.0 - prm->lambda : 1.0 + prm->lambda;
        const double lw = log_w_term(std::fabs(z), side, *prm);
        nll += exponent * log1p_exp(lw);
        if (!std::isfinite(nll)) return kInf;
    }
    return nll;
}

struct NmResult {
    std::array<double, 5> theta{};
    double value = kInf;
    bool converged = false;
    int iterations = 0;
};

// Standard Nelder-Mead on 5 coordinates.
NmResult nelder_mead(std::span<const double> x,
                     const std::array<double, 5>& start,
                     const std::array<double, 5>& scale, int max_iter) {
    constexpr int kDim = 5;
    using Point = std::array<double, 5>;
    std::array<Point, kDim + 1> simplex;
    std::array<double, kDim + 1> fv;
    simplex[0] = start;
    fv[0] = neg_log_likelihood(x, start);
    for (int i = 0; i < kDim; ++i) {
        simplex[i + 1] = start;
        simplex[i + 1][i] += scale[i];
        fv[i + 1] = neg_log_likelihood(x, simplex[i + 1]);
    }

    NmResult res;
    auto order = [&] {
        std::array<int, kDim + 1> idx{};
        for (int i = 0; i <= kDim; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(),
                  [&](int a, int b) { return fv[a] < fv[b]; });
        std::array<Point, kDim + 1> s2;
        std::array<double, kDim + 1> f2;
        for (int i = 0; i <= kDim; ++i) {
            s2[i] = simplex[idx[i]];
            f2[i] = fv[idx[i]];
        }
        simplex = s2;
        fv = f2;
    };
    order();

    int it = 0;
    for (; it < max_iter; ++it) {
        // Convergence on both objective spread and simplex extent.
        double fspread = std::fabs(fv[kDim] - fv[0]);
        double xspread = 0.0;
        for (int i = 0; i < kDim; ++i) {
            xspread = std::max(xspread,
                               std::fabs(simplex[kDim][i] - simplex[0][i]));
        }
        if (fspread <= 1e-10 * (1.0 + std::fabs(fv[0])) && xspread <= 1e-8) {
            res.converged = true;
            break;
        }

        Point centroid{};
        for (int i = 0; i < kDim; ++i) {
            for (int j = 0; j < kDim; ++j) centroid[j] += simplex[i][j];
        }
        for (int j = 0; j < kDim; ++j) centroid[j] /= kDim;

        auto blend = [&](double t) {
            Point p;
            for (int j = 0; j < kDim; ++j) {
                p[j] = centroid[j] + t * (centroid[j] - simplex[kDim][j]);
            }
            return p;
        };

        const Point refl = blend(1.0);
        const double f_refl = neg_log_likelihood(x, refl);
        if (f_refl < fv[0]) {
            const Point expd = blend(2.0);
            const double f_expd = neg_log_likelihood(x, expd);
            if (f_expd < f_refl) {
                simplex[kDim] = expd;
                fv[kDim] = f_expd;
            } else {
                simplex[kDim] = refl;
                fv[kDim] = f_refl;
            }
        } else if (f_refl < fv[kDim - 1]) {
            simplex[kDim] = refl;
            fv[kDim] = f_refl;
        } else {
            const bool outside = f_refl < fv[kDim];
            const Point contr = blend(outside ? 0.5 : -0.5);
            const double f_contr = neg_log_likelihood(x, contr);
            if (f_contr < (outside ? f_refl : fv[kDim])) {
                simplex[kDim] = contr;
                fv[kDim] = f_contr;
            } else {
                // Shrink toward the best vertex.
                for (int i = 1; i <= kDim; ++i) {
                    for (int j = 0; j < kDim; ++j) {
                        simplex[i][j] =
                            simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
                    }
                    fv[i] = neg_log_likelihood(x, simplex[i]);
                }
            }
        }
        order();
    }
    res.theta = simplex[0];
    res.value = fv[0];
    res.iterations = it;
    return res;
}

}  // namespace

FitReport sgt_fit(std::span<const double> x, const std::optional<SgtParams>& init) {
    if (x.size() < 50) throw SizeError("sgt_fit: need at least 50 observations");
    const Moments mom = sample_moments(x);
    if (!(mom.sd > 1e-12)) {
        FitReport empty;
        throw FitError("sgt_fit: near-constant sample", empty);
    }

    std::array<double, 5> theta0{};
    if (init) {
        theta0 = {init->mu, std::log(init->sigma),
                  std::atanh(std::clamp(init->lambda, -0.999999, 0.999999)),
                  std::log(init->p), std::log(init->q)};
    } else {
        theta0 = {mom.mean, std::log(mom.sd), 0.0, std::log(2.0), std::log(2.0)};
    }
    const std::array<double, 5> scale{0.1 * mom.sd, 0.2, 0.2, 0.25, 0.5};

    constexpr int kMaxRestarts = 5;
    NmResult best;
    int total_iters = 0;
    Rng jitter(0x5eedf17ULL);  // fixed stream; fits must be reproducible

    for (int r = 0; r < kMaxRestarts; ++r) {
        std::array<double, 5> start = theta0;
        if (r > 0) {
            for (int j = 0; j < 5; ++j) {
                start[j] += 2.0 * scale[j] * (2.0 * jitter.uniform() - 1.0);
            }
        }
        NmResult run = nelder_mead(x, start, scale, 3000);
        total_iters += run.iterations;
        const bool improved = run.value < best.value - 1e-7;
        if (run.value < best.value) best = run;
        // Two runs minimum; continue only while runs keep improving or
        // nothing has converged yet.
        if (r >= 1 && best.converged && !improved) break;
    }

    const auto prm = decode(best.theta);
    if (!prm || !std::isfinite(best.value)) {
        FitReport incumbent;
        incumbent.converged = false;
        incumbent.iterations = total_iters;
        if (prm) incumbent.params = *prm;
        incumbent.log_likelihood = -best.value;
        throw FitError("sgt_fit: all restarts diverged", incumbent);
    }

    FitReport report;
    report.params = *prm;
    report.log_likelihood = -best.value;
    report.converged = best.converged;
    report.iterations = total_iters;
    std::vector<double> u(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) u[i] = sgt_cdf(x[i], *prm);
    report.ad = ad_uniform_test(u);
    return report;
}

}  // namespace cfolio
