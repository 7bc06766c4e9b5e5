#include "cfolio/special.hpp"

#include <cmath>
#include <limits>

#include "cfolio/errors.hpp"

namespace cfolio {

double log_beta(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) {
        throw DomainError("log_beta requires a > 0 and b > 0");
    }
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

namespace {

// Modified Lentz continued fraction for the incomplete beta function.
// Valid for x < (a+1)/(a+b+2); the caller applies the symmetry relation
// otherwise. Large shape parameters (q ~ 1e6 in the distribution code)
// need a generous iteration cap.
double betacf(double a, double b, double x, bool* converged) {
    constexpr int kMaxIter = 20000;
    constexpr double kEps = 1e-16;
    const double tiny = std::numeric_limits<double>::min() / kEps;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) {
            *converged = true;
            return h;
        }
    }
    *converged = false;
    return h;
}

}  // namespace

double reg_inc_beta_try(double a, double b, double x, bool* converged) {
    if (!(a > 0.0) || !(b > 0.0)) {
        throw DomainError("reg_inc_beta requires a > 0 and b > 0");
    }
    if (!(x >= 0.0) || !(x <= 1.0)) {
        throw DomainError("reg_inc_beta requires x in [0, 1]");
    }
    *converged = true;
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;

    const double log_front = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x, converged) / a;
    }
    return 1.0 - front * betacf(b, a, 1.0 - x, converged) / b;
}

double reg_inc_beta(double a, double b, double x) {
    bool ok = true;
    const double v = reg_inc_beta_try(a, b, x, &ok);
    if (!ok) {
        throw Error("incomplete beta continued fraction did not converge");
    }
    return v;
}

namespace {

double simpson_rule(const std::function<double(double)>& f, double a, double fa,
                    double b, double fb, double* fm_out) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    *fm_out = fm;
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double simpson_recurse(const std::function<double(double)>& f, double a,
                       double fa, double b, double fb, double fm, double whole,
                       double tol, int depth) {
    const double m = 0.5 * (a + b);
    double flm = 0.0, frm = 0.0;
    const double left = simpson_rule(f, a, fa, m, fm, &flm);
    const double right = simpson_rule(f, m, fm, b, fb, &frm);
    const double delta = left + right - whole;
    if (depth <= 0 || std::fabs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    return simpson_recurse(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1) +
           simpson_recurse(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double tol, int max_depth) {
    if (a == b) return 0.0;
    const double fa = f(a);
    const double fb = f(b);
    double fm = 0.0;
    const double whole = simpson_rule(f, a, fa, b, fb, &fm);
    return simpson_recurse(f, a, fa, b, fb, fm, whole, tol, max_depth);
}

}  // namespace cfolio
