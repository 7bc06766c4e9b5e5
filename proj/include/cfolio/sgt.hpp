#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cfolio/errors.hpp"
#include "cfolio/stats.hpp"

namespace cfolio {

// Skewed Generalized T parameters. mu/sigma are the distribution's mean and
// standard deviation (mean-centering and variance adjustment are always
// applied), lambda in (-1,1) controls skew, p and q control tail weight.
// The variance exists only when p*q > 2, which construction enforces.
struct SgtParams {
    double mu = 0.0;
    double sigma = 1.0;
    double lambda = 0.0;
    double p = 2.0;
    double q = 100.0;
    // Derived: mean-centering shift and variance-adjustment scale.
    double m_shift = 0.0;
    double v_scale = 1.0;
};

// Validates ranges, computes m_shift / v_scale.
SgtParams make_sgt_params(double mu, double sigma, double lambda, double p,
                          double q);

// The centering terms (m, v) alone; requires p*q > 2.
std::pair<double, double> centering_terms(double sigma, double lambda, double p,
                                          double q);

double sgt_log_pdf(double x, const SgtParams& params);
double sgt_pdf(double x, const SgtParams& params);

// Distribution function; incomplete-beta closed form with an adaptive
// quadrature fallback anchored at the mode split point.
double sgt_cdf(double x, const SgtParams& params);

// Inverse CDF for u in (0,1): bracketing plus safeguarded Newton.
double sgt_quantile(double u, const SgtParams& params);

// Inverse-transform sampling with a seeded generator.
std::vector<double> sgt_sample(const SgtParams& params, std::size_t count,
                               std::uint64_t seed);

struct FitReport {
    SgtParams params;
    double log_likelihood = 0.0;
    bool converged = false;
    int iterations = 0;
    AdResult ad;  // uniformity of the fitted CDF transform of the sample
};

// All restarts diverged; carries the best point reached.
class FitError : public Error {
public:
    FitError(const std::string& what, FitReport best)
        : Error(what), best_(std::move(best)) {}
    const FitReport& best() const { return best_; }

private:
    FitReport best_;
};

// Maximum likelihood over (mu, log sigma, atanh lambda, log p, log q) by
// Nelder-Mead with jittered restarts. Default start: sample mean, sample sd,
// lambda = 0, p = q = 2.
FitReport sgt_fit(std::span<const double> x,
                  const std::optional<SgtParams>& init = std::nullopt);

}  // namespace cfolio
