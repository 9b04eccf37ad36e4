#pragma once
// Special functions needed by the samplers and tests: regularized lower
// incomplete gamma (linear and log-space forms), its inverse by bracketed
// bisection, beta-binomial log pmf, chi-square quantiles, normal cdf.
//
// The log-space forms matter: the concentration parameters exercised here go
// down to 1e-4 and below, where gamma quantiles underflow double precision.

#include <cmath>
#include <limits>
#include <stdexcept>

namespace haate {

namespace detail {

// log of the series part of P(a,x): log( sum_{k>=0} x^k / prod_{i=1..k}(a+i) )
// valid (and fast) for x < a + 1.
inline double log_gamma_series_tail(double a, double x) {
    double term = 1.0;
    double sum = 1.0;
    double ap = a;
    for (int k = 0; k < 500; ++k) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-17) break;
    }
    return std::log(sum);
}

// Continued fraction for Q(a,x) = 1 - P(a,x), valid for x >= a + 1 (Lentz).
inline double upper_gamma_cf(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) break;
    }
    return h;
}

}  // namespace detail

// log P(a, e^t) where P is the regularized lower incomplete gamma function.
// Monotone increasing in t; exact far into the underflow region of P itself.
inline double log_reg_lower_gamma(double a, double log_x) {
    if (!(a > 0.0)) throw std::invalid_argument("log_reg_lower_gamma: shape must be positive");
    if (log_x == -std::numeric_limits<double>::infinity()) return -std::numeric_limits<double>::infinity();
    const double x = std::exp(log_x);
    if (x < a + 1.0) {
        // P = x^a e^-x / Gamma(a+1) * series
        return a * log_x - x - std::lgamma(a + 1.0) + detail::log_gamma_series_tail(a, x);
    }
    const double log_q = -x + a * log_x - std::lgamma(a) + std::log(detail::upper_gamma_cf(a, x));
    const double q = std::exp(log_q);
    if (q >= 1.0) return -std::numeric_limits<double>::infinity();
    return std::log1p(-q);
}

// P(a, x), regularized lower incomplete gamma.
inline double reg_lower_gamma(double a, double x) {
    if (!(a > 0.0)) throw std::invalid_argument("reg_lower_gamma: shape must be positive");
    if (x <= 0.0) return 0.0;
    return std::exp(log_reg_lower_gamma(a, std::log(x)));
}

// Inverse of P(a, .) in log space: returns t with P(a, e^t) = u, solved by
// bracketed bisection on the monotone map t -> log P(a, e^t).
inline double inv_reg_lower_gamma_log(double a, double u) {
    if (!(a > 0.0)) throw std::invalid_argument("inv_reg_lower_gamma_log: shape must be positive");
    if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("inv_reg_lower_gamma_log: u must be in (0,1)");
    const double target = std::log(u);

    // For x -> 0, log P ~ a log x - lgamma(a+1), so this starting point is a
    // slight overestimate of t; pad and then verify both ends of the bracket.
    double lo = (target + std::lgamma(a + 1.0)) / a - 1.0;
    double hi = std::log(a + 40.0 * std::sqrt(a) + 40.0);
    while (log_reg_lower_gamma(a, lo) > target) lo -= 16.0;
    while (log_reg_lower_gamma(a, hi) < target) hi += 1.0;

    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (log_reg_lower_gamma(a, mid) < target)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-14 * std::max(1.0, std::abs(mid))) break;
    }
    return 0.5 * (lo + hi);
}

inline double inv_reg_lower_gamma(double a, double u) {
    return std::exp(inv_reg_lower_gamma_log(a, u));
}

// Quantile of the chi-square distribution with df degrees of freedom.
inline double chi_square_quantile(double p, double df) {
    return 2.0 * inv_reg_lower_gamma(0.5 * df, p);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double log_binomial_coefficient(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// log pmf of the beta-binomial distribution with n trials and shape (a, b).
inline double beta_binomial_log_pmf(int k, int n, double a, double b) {
    if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
    return log_binomial_coefficient(n, k) + std::lgamma(k + a) + std::lgamma(n - k + b) -
           std::lgamma(n + a + b) + std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
}

inline double beta_binomial_pmf(int k, int n, double a, double b) {
    return std::exp(beta_binomial_log_pmf(k, n, a, b));
}

}  // namespace haate
