#pragma once
// Linear-in-means outcome model with cluster-correlated Gaussian errors.
//
// E[Y | arm a, proportions p] = beta_a + sum_l slope(a,l) * p_l, with
// slope(a,l) = delta_base[a][l] * c. Errors decompose additively into a
// cluster effect u_j ~ N(0, tau^2) and a unit effect e_ji ~ N(0, sigma^2),
// which realizes Var = sigma^2 + tau^2 within units and Cov = tau^2 between
// units of the same cluster.

#include <cmath>
#include <span>
#include <vector>

#include "haate/core.hpp"
#include "haate/rng.hpp"

namespace haate {

struct OutcomeMatrix {
    int J = 0;
    int n = 0;
    std::vector<double> y;  // J*n, row-major by cluster

    double at(int j, int i) const { return y[static_cast<std::size_t>(j) * n + i]; }
};

inline double effective_slope(const DgpParams& params, int m, int l) {
    const int M = params.arms() - 1;
    if (m < 0 || m > M || l < 1 || l > M)
        throw Error(Errc::index_out_of_range, "effective_slope: arm index out of range");
    return params.delta_base[static_cast<std::size_t>(m)][static_cast<std::size_t>(l - 1)] * params.c;
}

// tau^2 = sigma^2 * rho_u / (1 - rho_u), so that rho_u = tau^2 / (tau^2 + sigma^2)
inline double tau_squared(const DgpParams& params) {
    if (!(params.rho_u >= 0.0 && params.rho_u < 1.0))
        throw Error(Errc::out_of_range, "tau_squared: rho_u must be in [0,1)");
    return params.sigma2 * params.rho_u / (1.0 - params.rho_u);
}

inline double expected_outcome(const DgpParams& params, int a, std::span<const double> p) {
    const int M = params.arms() - 1;
    if (a < 0 || a > M) throw Error(Errc::index_out_of_range, "expected_outcome: bad arm");
    if (p.size() != static_cast<std::size_t>(M + 1))
        throw Error(Errc::index_out_of_range, "expected_outcome: proportion vector has wrong length");
    double mu = params.beta[static_cast<std::size_t>(a)];
    for (int l = 1; l <= M; ++l) mu += effective_slope(params, a, l) * p[static_cast<std::size_t>(l)];
    return mu;
}

// Psi(m-bar, 0-bar) = (beta_m + slope(m,m)) - beta_0
inline double true_haate(const DgpParams& params, int m) {
    const int M = params.arms() - 1;
    if (m < 1 || m > M) throw Error(Errc::index_out_of_range, "true_haate: arm must be in 1..M");
    return params.beta[static_cast<std::size_t>(m)] + effective_slope(params, m, m) - params.beta[0];
}

// Y_ji = E[Y | A_ji, p_j] + u_j + e_ji. Cluster j consumes derived stream (j).
inline OutcomeMatrix simulate_outcomes(const AssignmentMatrix& assignment, const DgpParams& params,
                                       RngStream stream) {
    validate_dgp(params);
    if (params.arms() != assignment.M + 1)
        throw Error(Errc::index_out_of_range, "simulate_outcomes: params/assignment arm mismatch");
    const double tau = std::sqrt(tau_squared(params));
    const double sigma = std::sqrt(params.sigma2);

    OutcomeMatrix out;
    out.J = assignment.J;
    out.n = assignment.n;
    out.y.resize(static_cast<std::size_t>(assignment.J) * assignment.n);
    const int arms = assignment.M + 1;
    for (int j = 0; j < assignment.J; ++j) {
        Rng rng(stream.derived(static_cast<std::uint64_t>(j)));
        const double u_j = tau * rng.normal();
        std::span<const double> p{assignment.proportions.data() + static_cast<std::size_t>(j) * arms,
                                  static_cast<std::size_t>(arms)};
        for (int i = 0; i < assignment.n; ++i) {
            const double mu = expected_outcome(params, assignment.label(j, i), p);
            out.y[static_cast<std::size_t>(j) * assignment.n + i] = mu + u_j + sigma * rng.normal();
        }
    }
    return out;
}

}  // namespace haate
