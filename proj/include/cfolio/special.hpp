#pragma once

#include <functional>

namespace cfolio {

// ln B(a, b) for a, b > 0, via log-gamma.
double log_beta(double a, double b);

// Regularized incomplete beta I_x(a, b). Continued-fraction evaluation;
// sets *converged to false instead of throwing when the fraction stalls.
double reg_inc_beta_try(double a, double b, double x, bool* converged);

// Throwing wrapper around reg_inc_beta_try.
double reg_inc_beta(double a, double b, double x);

// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance tol.
double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double tol, int max_depth = 60);

}  // namespace cfolio
