#pragma once
// Shared domain types: experiment geometry, realized assignments, outcome
// model parameters, and estimated contrasts. All are immutable value types.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace haate {

enum class Errc {
    non_positive_alpha,
    degenerate_geometry,
    empty_arms,
    out_of_range,
    index_out_of_range,
    dimension_unsupported,
    empty_table,
    empty_input,
    singular_gram,
    all_columns_dropped,
    non_finite_input,
    missing_beta_column,
    zero_denominator,
    unbalanced_alpha,
    degenerate_variance,
    parse_error,
    io_error,
};

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

enum class AssignMode { two_stage_dirichlet, sobol_dirichlet };

// Experiment geometry and randomization intensity. Arms are 0..M with arm 0
// fixed as the control; alpha holds one Dirichlet concentration per arm.
struct DesignSpec {
    int J = 0;                  // clusters
    int n = 0;                  // units per cluster
    int M = 0;                  // non-control arms
    std::vector<double> alpha;  // size M+1
    AssignMode mode = AssignMode::two_stage_dirichlet;
    int sobol_k = 0;  // precomputed draws, sobol mode only

    static DesignSpec balanced(int J, int n, int M, double alpha_bar,
                               AssignMode mode = AssignMode::two_stage_dirichlet, int sobol_k = 0) {
        DesignSpec s;
        s.J = J;
        s.n = n;
        s.M = M;
        s.alpha.assign(static_cast<std::size_t>(M + 1), alpha_bar);
        s.mode = mode;
        s.sobol_k = sobol_k;
        return s;
    }

    int arms() const noexcept { return M + 1; }

    bool has_balanced_alpha(double rel_tol = 1e-12) const noexcept {
        if (alpha.empty()) return false;
        for (double a : alpha)
            if (std::abs(a - alpha.front()) > rel_tol * std::abs(alpha.front())) return false;
        return true;
    }

    // total concentration sum(alpha); equals (M+1)*alpha_bar when balanced
    double scaled_alpha() const noexcept {
        double s = 0.0;
        for (double a : alpha) s += a;
        return s;
    }

    bool operator==(const DesignSpec&) const = default;
};

inline void validate_design(const DesignSpec& spec) {
    if (spec.M < 1) throw Error(Errc::empty_arms, "design needs at least one non-control arm (M >= 1)");
    if (spec.J < 2 || spec.n < 2)
        throw Error(Errc::degenerate_geometry,
                    "design needs J >= 2 clusters and n >= 2 units per cluster");
    if (spec.alpha.size() != static_cast<std::size_t>(spec.M + 1))
        throw Error(Errc::non_positive_alpha, "alpha must have exactly M+1 entries");
    for (double a : spec.alpha)
        if (!(a > 0.0) || !std::isfinite(a))
            throw Error(Errc::non_positive_alpha, "all Dirichlet concentrations must be > 0");
    if (spec.mode == AssignMode::sobol_dirichlet && spec.sobol_k < 1)
        throw Error(Errc::out_of_range, "sobol mode needs K >= 1 precomputed draws");
}

// Realized per-cluster treatment labels, the Dirichlet probability vectors
// that generated them, and the per-cluster label proportions.
struct AssignmentMatrix {
    int J = 0;
    int n = 0;
    int M = 0;
    std::vector<std::int32_t> labels;   // J*n, row-major by cluster
    std::vector<double> cluster_probs;  // J*(M+1), row-major
    std::vector<double> proportions;    // J*(M+1), row-major

    std::int32_t label(int j, int i) const { return labels[static_cast<std::size_t>(j) * n + i]; }
    double prob(int j, int m) const { return cluster_probs[static_cast<std::size_t>(j) * (M + 1) + m]; }
    double proportion(int j, int m) const { return proportions[static_cast<std::size_t>(j) * (M + 1) + m]; }
};

// Fills proportions from labels: proportion(j,m) = count of m in cluster j / n.
inline void recompute_proportions(AssignmentMatrix& a) {
    a.proportions.assign(static_cast<std::size_t>(a.J) * (a.M + 1), 0.0);
    for (int j = 0; j < a.J; ++j) {
        for (int i = 0; i < a.n; ++i) {
            a.proportions[static_cast<std::size_t>(j) * (a.M + 1) + a.label(j, i)] += 1.0;
        }
        for (int m = 0; m <= a.M; ++m) {
            auto& p = a.proportions[static_cast<std::size_t>(j) * (a.M + 1) + m];
            p /= static_cast<double>(a.n);
        }
    }
}

// Outcome model parameters. Slopes factor as delta_base[m][l] * c so the
// interference magnitude is one dial; beta[m] is the intercept of arm m.
struct DgpParams {
    std::vector<double> beta;                     // size M+1
    std::vector<std::vector<double>> delta_base;  // (M+1) rows, M columns
    double c = 0.0;                               // interference multiplier
    double sigma2 = 1.0;                          // unit-level error variance
    double rho_u = 0.0;                           // intra-cluster error correlation

    int arms() const noexcept { return static_cast<int>(beta.size()); }

    bool operator==(const DgpParams&) const = default;
};

// The simulation-default parameterization: three arms, intercepts (5, 7.5, 2.5),
// base slopes (0.5,-0.5; 1,-1; 2.5,-2.5), unit error variance 1.
inline DgpParams default_dgp_params(double c = 0.0, double rho_u = 0.0) {
    DgpParams p;
    p.beta = {5.0, 7.5, 2.5};
    p.delta_base = {{0.5, -0.5}, {1.0, -1.0}, {2.5, -2.5}};
    p.c = c;
    p.sigma2 = 1.0;
    p.rho_u = rho_u;
    return p;
}

inline void validate_dgp(const DgpParams& p) {
    if (p.beta.size() < 2) throw Error(Errc::empty_arms, "dgp needs at least two arms");
    if (p.delta_base.size() != p.beta.size())
        throw Error(Errc::index_out_of_range, "delta_base must have one row per arm");
    for (const auto& row : p.delta_base)
        if (row.size() != p.beta.size() - 1)
            throw Error(Errc::index_out_of_range, "delta_base rows must have M columns");
    if (!(p.sigma2 > 0.0)) throw Error(Errc::out_of_range, "sigma2 must be positive");
    if (!(p.rho_u >= 0.0 && p.rho_u < 1.0)) throw Error(Errc::out_of_range, "rho_u must be in [0,1)");
    if (!(p.c >= 0.0)) throw Error(Errc::out_of_range, "interference multiplier c must be >= 0");
}

enum class Estimator { linear_in_means, difference_in_means };

inline const char* estimator_name(Estimator e) noexcept {
    return e == Estimator::linear_in_means ? "lm" : "dm";
}

// default two-sided critical value: standard normal 97.5% quantile
inline constexpr double default_critical_value = 1.959964;

// An estimated "arm m vs control" effect with its confidence interval.
// slope_dropped records a linear-in-means fit whose own-arm slope column was
// removed for rank reasons, which degrades the contrast to difference-in-means
// form.
struct Contrast {
    int arm = 0;
    double estimate = 0.0;
    double se = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    Estimator estimator = Estimator::difference_in_means;
    bool slope_dropped = false;

    bool operator==(const Contrast&) const = default;
};

}  // namespace haate
