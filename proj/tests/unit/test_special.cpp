#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "haate/special.hpp"

using namespace haate;

TEST_CASE("regularized lower gamma matches closed forms", "[special]") {
    // P(1, x) = 1 - exp(-x)
    for (double x : {0.25, 0.5, 1.0, 3.0, 10.0})
        CHECK(reg_lower_gamma(1.0, x) == Catch::Approx(1.0 - std::exp(-x)).margin(1e-13));
    // P(1/2, x) = erf(sqrt(x))
    for (double x : {0.1, 0.7, 1.2, 4.0})
        CHECK(reg_lower_gamma(0.5, x) == Catch::Approx(std::erf(std::sqrt(x))).margin(1e-12));
    CHECK(reg_lower_gamma(2.5, 0.0) == 0.0);
}

TEST_CASE("log-space lower gamma agrees with linear form and goes deep", "[special]") {
    CHECK(log_reg_lower_gamma(0.7, std::log(0.9)) ==
          Catch::Approx(std::log(reg_lower_gamma(0.7, 0.9))).margin(1e-12));
    // far below double underflow for P itself: P(3e-4, x) with log x = -5000
    const double lp = log_reg_lower_gamma(3e-4, -5000.0);
    CHECK(lp == Catch::Approx(3e-4 * -5000.0 - std::lgamma(1.0 + 3e-4)).margin(1e-6));
}

TEST_CASE("inverse lower gamma round-trips across shapes", "[special]") {
    for (double a : {3e-4, 0.01, 0.1, 1.0, 7.5, 100.0}) {
        for (double u : {1e-6, 0.05, 0.2, 0.5, 0.9, 1.0 - 1e-6}) {
            const double lx = inv_reg_lower_gamma_log(a, u);
            CHECK(std::exp(log_reg_lower_gamma(a, lx)) == Catch::Approx(u).epsilon(1e-9));
        }
    }
    CHECK(inv_reg_lower_gamma(1.0, 0.5) == Catch::Approx(std::log(2.0)).margin(1e-12));
    CHECK_THROWS(inv_reg_lower_gamma_log(1.0, 0.0));
    CHECK_THROWS(inv_reg_lower_gamma_log(-1.0, 0.5));
}

TEST_CASE("chi-square quantiles match tabulated values", "[special]") {
    CHECK(chi_square_quantile(0.95, 1) == Catch::Approx(3.841459).margin(5e-6));
    CHECK(chi_square_quantile(0.999, 10) == Catch::Approx(29.58830).margin(5e-5));
    CHECK(chi_square_quantile(0.5, 2) == Catch::Approx(2.0 * std::log(2.0)).margin(1e-10));
}

TEST_CASE("beta-binomial pmf normalizes and matches the uniform case", "[special]") {
    for (auto [n, a, b] : {std::tuple{50, 0.1, 0.2}, {10, 1.0, 2.0}, {50, 333.0, 667.0}}) {
        double sum = 0.0;
        for (int k = 0; k <= n; ++k) sum += beta_binomial_pmf(k, n, a, b);
        CHECK(sum == Catch::Approx(1.0).margin(1e-11));
    }
    // a = b = 1 is uniform on 0..n
    for (int k = 0; k <= 12; ++k)
        CHECK(beta_binomial_pmf(k, 12, 1.0, 1.0) == Catch::Approx(1.0 / 13).margin(1e-12));
    CHECK(beta_binomial_pmf(-1, 10, 1.0, 1.0) == 0.0);
    CHECK(beta_binomial_pmf(11, 10, 1.0, 1.0) == 0.0);
}

TEST_CASE("normal cdf reference points", "[special]") {
    CHECK(normal_cdf(0.0) == Catch::Approx(0.5).margin(1e-15));
    CHECK(normal_cdf(1.959964) == Catch::Approx(0.975).margin(1e-6));
    CHECK(normal_cdf(1.6448536269514722) == Catch::Approx(0.95).margin(1e-9));
}
