#pragma once
// Two-stage randomization: a Dirichlet probability vector per cluster, then
// independent unit-level assignment from it. Includes the closed-form
// intra-cluster correlation map rho_m(alpha_bar) = 1/sqrt((M+1)*alpha_bar + 1),
// its inverse, and an ANOVA estimator of the realized indicator correlation.
//
// Dirichlet draws are done in log space (gamma normalization via log-sum-exp),
// which keeps the tiny-concentration regime exact: near the cluster-randomized
// pole the draws degenerate to one-hot vectors instead of 0/0.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "haate/core.hpp"
#include "haate/rng.hpp"

namespace haate {

// floor keeping probabilities strictly inside (0,1) so downstream logs stay finite
inline constexpr double probability_floor = 1e-300;
inline constexpr double probability_ceiling = 1.0 - 1e-16;

// rho_m(alpha_bar) = 1 / sqrt((M+1)*alpha_bar + 1), strictly decreasing from 1 to 0.
inline double treatment_icc(double alpha_bar, int M) {
    if (!(alpha_bar > 0.0)) throw Error(Errc::non_positive_alpha, "treatment_icc: alpha_bar must be > 0");
    if (M < 1) throw Error(Errc::empty_arms, "treatment_icc: M must be >= 1");
    return 1.0 / std::sqrt(static_cast<double>(M + 1) * alpha_bar + 1.0);
}

// inverse of treatment_icc: alpha_bar with treatment_icc(alpha_bar, M) == rho_target
inline double alpha_for_icc(double rho_target, int M) {
    if (!(rho_target > 0.0 && rho_target < 1.0))
        throw Error(Errc::out_of_range, "alpha_for_icc: target must be in (0,1)");
    if (M < 1) throw Error(Errc::empty_arms, "alpha_for_icc: M must be >= 1");
    return (1.0 / (rho_target * rho_target) - 1.0) / static_cast<double>(M + 1);
}

namespace detail {

// log-sum-exp normalization of log gamma draws into a clamped simplex vector
inline void log_draws_to_simplex(std::span<double> log_draws, std::span<double> out) {
    double max_log = log_draws[0];
    for (double v : log_draws) max_log = std::max(max_log, v);
    double sum = 0.0;
    for (std::size_t k = 0; k < log_draws.size(); ++k) {
        out[k] = std::exp(log_draws[k] - max_log);
        sum += out[k];
    }
    for (std::size_t k = 0; k < log_draws.size(); ++k) {
        out[k] = std::clamp(out[k] / sum, probability_floor, probability_ceiling);
    }
}

inline void draw_dirichlet_into(std::span<const double> alpha, Rng& rng, std::span<double> out,
                                std::span<double> scratch) {
    for (std::size_t k = 0; k < alpha.size(); ++k) scratch[k] = rng.log_gamma(alpha[k]);
    log_draws_to_simplex(scratch, out);
}

inline int draw_categorical(std::span<const double> probs, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t m = 0; m + 1 < probs.size(); ++m) {
        acc += probs[m];
        if (u < acc) return static_cast<int>(m);
    }
    return static_cast<int>(probs.size()) - 1;
}

}  // namespace detail

// One draw from Dirichlet(alpha) via normalized Gamma(alpha_k, 1) variates.
inline std::vector<double> draw_dirichlet(std::span<const double> alpha, RngStream stream) {
    if (alpha.empty()) throw Error(Errc::empty_arms, "draw_dirichlet: alpha is empty");
    for (double a : alpha)
        if (!(a > 0.0)) throw Error(Errc::non_positive_alpha, "draw_dirichlet: alpha must be > 0");
    Rng rng(stream);
    std::vector<double> out(alpha.size());
    std::vector<double> scratch(alpha.size());
    detail::draw_dirichlet_into(alpha, rng, out, scratch);
    return out;
}

// Stage one: pi_j ~ Dirichlet(alpha) per cluster. Stage two: labels i.i.d.
// categorical(pi_j) within each cluster. Cluster j consumes the derived
// stream (j), so cluster rows are reproducible independently of one another.
inline AssignmentMatrix assign_two_stage(const DesignSpec& spec, RngStream stream) {
    validate_design(spec);
    AssignmentMatrix a;
    a.J = spec.J;
    a.n = spec.n;
    a.M = spec.M;
    a.labels.resize(static_cast<std::size_t>(spec.J) * spec.n);
    a.cluster_probs.resize(static_cast<std::size_t>(spec.J) * spec.arms());
    std::vector<double> scratch(spec.arms());
    for (int j = 0; j < spec.J; ++j) {
        Rng rng(stream.derived(static_cast<std::uint64_t>(j)));
        std::span<double> probs{a.cluster_probs.data() + static_cast<std::size_t>(j) * spec.arms(),
                                static_cast<std::size_t>(spec.arms())};
        detail::draw_dirichlet_into(spec.alpha, rng, probs, scratch);
        for (int i = 0; i < spec.n; ++i) {
            a.labels[static_cast<std::size_t>(j) * spec.n + i] =
                static_cast<std::int32_t>(detail::draw_categorical(probs, rng));
        }
    }
    recompute_proportions(a);
    return a;
}

// One-way ANOVA estimator of the intra-cluster correlation of the indicator
// 1{A = arm}: (MSB - MSW) / (MSB + (n-1) MSW), clamped to [-1/(n-1), 1].
// Returns nullopt when the indicator is constant over all units.
inline std::optional<double> empirical_icc(const AssignmentMatrix& a, int arm) {
    if (a.J < 2 || a.n < 2)
        throw Error(Errc::degenerate_geometry, "empirical_icc: needs J >= 2 and n >= 2");
    if (arm < 0 || arm > a.M) throw Error(Errc::index_out_of_range, "empirical_icc: bad arm");

    const double n = a.n;
    double grand = 0.0;
    std::vector<double> cluster_mean(a.J, 0.0);
    for (int j = 0; j < a.J; ++j) {
        int count = 0;
        for (int i = 0; i < a.n; ++i) count += (a.label(j, i) == arm);
        cluster_mean[j] = count / n;
        grand += cluster_mean[j];
    }
    grand /= a.J;

    double ssb = 0.0, ssw = 0.0;
    for (int j = 0; j < a.J; ++j) {
        const double d = cluster_mean[j] - grand;
        ssb += n * d * d;
        // indicator within-cluster sum of squares: n p (1 - p)
        ssw += n * cluster_mean[j] * (1.0 - cluster_mean[j]);
    }
    const double msb = ssb / (a.J - 1);
    const double msw = ssw / (static_cast<double>(a.J) * (a.n - 1));
    const double denom = msb + (n - 1.0) * msw;
    if (denom == 0.0) return std::nullopt;
    return std::clamp((msb - msw) / denom, -1.0 / (n - 1.0), 1.0);
}

}  // namespace haate
