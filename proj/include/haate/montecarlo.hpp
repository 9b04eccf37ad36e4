#pragma once
// Simulation harness: per-cell Monte Carlo summaries over a
// (rho_u, c, scaled_alpha) grid, minimum-RMSE design selection, and the
// closed-form large-J expectation of the difference-in-means bias.
//
// Conventions fixed here:
//  - scaled_alpha is the total Dirichlet concentration (M+1)*alpha_bar; a
//    cell samples with per-arm concentration scaled_alpha / (M+1).
//  - the rho_m reported for a cell is the design-grid label
//    1/sqrt((M+1)*scaled_alpha + 1), i.e. treatment_icc evaluated at the
//    summed concentration. It indexes designs on the familiar grid; the
//    realized indicator correlation is smaller (see empirical_icc).
//  - bias averages (estimate - truth) over iterations and over the M
//    contrasts; rmse pools squared errors before the square root.
//  - coverage counts lower one-sided 95% intervals,
//    estimate - z_cover * se <= truth. Two-sided bookkeeping is available
//    through HarnessOptions.
//
// Cell seeds are a splittable hash of (base_seed, cell coordinates), so
// adding grid points never perturbs existing cells' streams, and any
// parallel schedule yields bitwise-identical output.

#include <atomic>
#include <cmath>
#include <cstring>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "haate/core.hpp"
#include "haate/dgp.hpp"
#include "haate/estimate.hpp"
#include "haate/randomize.hpp"
#include "haate/rng.hpp"

namespace haate {

struct SweepGrid {
    std::vector<double> rho_u_values;
    std::vector<double> c_values;
    std::vector<double> scaled_alpha_values;  // interpreted as (M+1) * alpha_bar
    int iterations = 1000;
    std::uint64_t base_seed = 0;

    // the full default grid exercised by the shipped configuration
    static SweepGrid full_default() {
        SweepGrid g;
        g.rho_u_values = {0.0, 0.1, 0.3, 0.5, 0.8};
        g.c_values = {0.0, 0.1, 0.5, 1.0};
        g.scaled_alpha_values = {0.001, 0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6,
                                 0.7,   0.8,  0.9,  1.0, 2.0, 3.0, 10.0, 1000.0};
        return g;
    }

    std::size_t cell_count() const {
        return rho_u_values.size() * c_values.size() * scaled_alpha_values.size();
    }
};

struct EstimatorSummary {
    double bias = 0.0;
    double rmse = 0.0;
    double mean_se = 0.0;
    double coverage = 0.0;
    // pooled across iterations and contrasts; kept for oracle comparisons
    double error_variance = 0.0;
    double mc_se_of_bias = 0.0;
};

struct CellSummary {
    double rho_u = 0.0;
    double c = 0.0;
    double scaled_alpha = 0.0;
    double rho_m = 0.0;  // design-grid label, treatment_icc(scaled_alpha, M)
    std::vector<double> truths;  // truths[m-1] = true HAATE of arm m
    EstimatorSummary lm;
    EstimatorSummary dm;
    int iterations_completed = 0;
    int iterations_failed = 0;
    std::string error;  // nonempty when the whole cell failed
};

struct HarnessOptions {
    double z_ci = default_critical_value;  // two-sided CI half-width multiplier
    double z_cover = 1.6448536269514722;   // one-sided coverage critical value
    bool two_sided_coverage = false;
    double rank_tol = 1e-10;
    ClusterCorrection correction = ClusterCorrection::CR1;
    int retry_budget = 5;
};

// E[p_l | A_i = m] under balanced Dirichlet-multinomial assignment:
// (1/n) * (1{l=m} + (n-1) * (alpha_bar + 1{l=m}) / ((M+1) alpha_bar + 1)).
inline double conditional_proportion_mean(int n, int M, double alpha_bar, int l, int m) {
    const double own = (l == m) ? 1.0 : 0.0;
    const double total = static_cast<double>(M + 1) * alpha_bar;
    return (own + (n - 1.0) * (alpha_bar + own) / (total + 1.0)) / static_cast<double>(n);
}

// Large-J expectation of (DM estimate - true HAATE) for arm m.
inline double analytic_dm_bias(const DesignSpec& spec, const DgpParams& params, int m) {
    validate_design(spec);
    validate_dgp(params);
    if (!spec.has_balanced_alpha())
        throw Error(Errc::unbalanced_alpha, "analytic_dm_bias: balanced alpha required");
    if (m < 1 || m > spec.M) throw Error(Errc::index_out_of_range, "analytic_dm_bias: bad arm");
    const double alpha_bar = spec.alpha.front();

    auto conditional_mean = [&](int arm) {
        double mu = params.beta[static_cast<std::size_t>(arm)];
        for (int l = 1; l <= spec.M; ++l)
            mu += effective_slope(params, arm, l) *
                  conditional_proportion_mean(spec.n, spec.M, alpha_bar, l, arm);
        return mu;
    };
    return conditional_mean(m) - conditional_mean(0) - true_haate(params, m);
}

// average of analytic_dm_bias over the M contrasts
inline double analytic_dm_bias_averaged(const DesignSpec& spec, const DgpParams& params) {
    double sum = 0.0;
    for (int m = 1; m <= spec.M; ++m) sum += analytic_dm_bias(spec, params, m);
    return sum / spec.M;
}

namespace detail {

struct Accumulator {
    double sum_err = 0.0;
    double sum_err2 = 0.0;
    double sum_se = 0.0;
    double covered = 0.0;
    long count = 0;

    void add(double err, double se, bool cover) {
        sum_err += err;
        sum_err2 += err * err;
        sum_se += se;
        covered += cover ? 1.0 : 0.0;
        ++count;
    }

    EstimatorSummary summary() const {
        EstimatorSummary s;
        if (count == 0) return s;
        const double k = static_cast<double>(count);
        s.bias = sum_err / k;
        s.rmse = std::sqrt(sum_err2 / k);
        s.mean_se = sum_se / k;
        s.coverage = covered / k;
        s.error_variance = std::max(sum_err2 / k - s.bias * s.bias, 0.0);
        s.mc_se_of_bias = std::sqrt(s.error_variance / k);
        return s;
    }
};

inline std::uint64_t cell_coordinate_hash(double rho_u, double c, double scaled_alpha) {
    auto bits = [](double v) {
        std::uint64_t u;
        std::memcpy(&u, &v, sizeof u);
        return u;
    };
    std::uint64_t h = 0x63656c6cULL;  // arbitrary tag
    h = hash_combine(h, bits(rho_u));
    h = hash_combine(h, bits(c));
    h = hash_combine(h, bits(scaled_alpha));
    return h;
}

}  // namespace detail

// One grid cell: `iterations` replications of assign -> simulate -> fit both
// estimators -> accumulate bias / rmse / mean se / coverage per contrast.
// Deterministic given (spec, params, iterations, base_seed). Iterations whose
// fit degenerates (an arm entirely absent) are retried on a derived stream up
// to options.retry_budget times, then counted as failed.
inline CellSummary run_cell(const DesignSpec& spec, const DgpParams& params, int iterations,
                            std::uint64_t base_seed, const HarnessOptions& options = {}) {
    validate_design(spec);
    validate_dgp(params);
    if (iterations < 1) throw Error(Errc::out_of_range, "run_cell: iterations must be >= 1");
    if (params.arms() != spec.arms())
        throw Error(Errc::index_out_of_range, "run_cell: spec/params arm mismatch");

    CellSummary cell;
    cell.rho_u = params.rho_u;
    cell.c = params.c;
    cell.scaled_alpha = spec.scaled_alpha();
    cell.rho_m = treatment_icc(cell.scaled_alpha, spec.M);
    cell.truths.resize(static_cast<std::size_t>(spec.M));
    for (int m = 1; m <= spec.M; ++m)
        cell.truths[static_cast<std::size_t>(m - 1)] = true_haate(params, m);

    detail::Accumulator acc_lm, acc_dm;
    const RngStream root{base_seed, 0};

    auto covered = [&](double estimate, double se, double truth) {
        if (options.two_sided_coverage)
            return std::abs(estimate - truth) <= options.z_ci * se;
        return estimate - truth <= options.z_cover * se;
    };

    for (int iter = 0; iter < iterations; ++iter) {
        bool done = false;
        for (int attempt = 0; attempt <= options.retry_budget && !done; ++attempt) {
            const RngStream draw = root.derived(static_cast<std::uint64_t>(iter)).derived(
                static_cast<std::uint64_t>(attempt));
            try {
                const AssignmentMatrix assignment = assign_two_stage(spec, draw.derived(0));
                const OutcomeMatrix outcomes = simulate_outcomes(assignment, params, draw.derived(1));

                const DesignMatrix lm_x = build_lm_matrix(assignment);
                const FitResult lm_fit = ols_fit(lm_x, outcomes, options.rank_tol, options.correction);
                const DesignMatrix dm_x = build_dm_matrix(assignment);
                const FitResult dm_fit = ols_fit(dm_x, outcomes, options.rank_tol, options.correction);

                for (int m = 1; m <= spec.M; ++m) {
                    const double truth = cell.truths[static_cast<std::size_t>(m - 1)];
                    const Contrast lc = haate_contrast_lm(lm_fit, m, options.z_ci);
                    const Contrast dc = haate_contrast_dm(dm_fit, m, options.z_ci);
                    acc_lm.add(lc.estimate - truth, lc.se, covered(lc.estimate, lc.se, truth));
                    acc_dm.add(dc.estimate - truth, dc.se, covered(dc.estimate, dc.se, truth));
                }
                done = true;
            } catch (const Error& e) {
                if (e.code() != Errc::all_columns_dropped && e.code() != Errc::missing_beta_column)
                    throw;
            }
        }
        if (done)
            ++cell.iterations_completed;
        else
            ++cell.iterations_failed;
    }

    cell.lm = acc_lm.summary();
    cell.dm = acc_dm.summary();
    return cell;
}

// Full grid sweep. Output is in lexicographic grid order (rho_u outermost,
// scaled_alpha innermost) regardless of worker count or schedule; per-cell
// errors are recorded in the cell and do not stop the sweep.
inline std::vector<CellSummary> sweep(const SweepGrid& grid, const DesignSpec& spec_template,
                                      const DgpParams& params_template,
                                      const HarnessOptions& options = {}, int n_threads = 1) {
    if (grid.rho_u_values.empty()) throw Error(Errc::empty_input, "sweep: empty rho_u axis");
    if (grid.c_values.empty()) throw Error(Errc::empty_input, "sweep: empty c axis");
    if (grid.scaled_alpha_values.empty())
        throw Error(Errc::empty_input, "sweep: empty scaled_alpha axis");
    if (grid.iterations < 1) throw Error(Errc::out_of_range, "sweep: iterations must be >= 1");

    struct CellSpec {
        double rho_u, c, scaled_alpha;
    };
    std::vector<CellSpec> cells;
    cells.reserve(grid.cell_count());
    for (double rho_u : grid.rho_u_values)
        for (double c : grid.c_values)
            for (double g : grid.scaled_alpha_values) cells.push_back({rho_u, c, g});

    std::vector<CellSummary> results(cells.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= cells.size()) return;
            const CellSpec& cs = cells[idx];
            DesignSpec spec = spec_template;
            spec.alpha.assign(static_cast<std::size_t>(spec.M + 1),
                              cs.scaled_alpha / static_cast<double>(spec.M + 1));
            DgpParams params = params_template;
            params.rho_u = cs.rho_u;
            params.c = cs.c;
            const std::uint64_t cell_seed = hash_combine(
                grid.base_seed, detail::cell_coordinate_hash(cs.rho_u, cs.c, cs.scaled_alpha));
            try {
                results[idx] = run_cell(spec, params, grid.iterations, cell_seed, options);
            } catch (const std::exception& e) {
                CellSummary failed;
                failed.rho_u = cs.rho_u;
                failed.c = cs.c;
                failed.scaled_alpha = cs.scaled_alpha;
                failed.rho_m = treatment_icc(cs.scaled_alpha, spec_template.M);
                failed.error = e.what();
                results[idx] = std::move(failed);
            }
        }
    };

    const int workers = std::max(1, n_threads);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return results;
}

struct DesignChoice {
    double rho_u = 0.0;
    double c = 0.0;
    double scaled_alpha = 0.0;
    double rho_m = 0.0;
    CellSummary cell;
    bool flat = false;  // RMSE nearly constant across the alpha axis
};

// Argmin of RMSE over the scaled_alpha axis within each (rho_u, c) stratum.
// Ties break toward larger rho_m: among equals, the cluster-randomized pole
// keeps correct coverage, so it is the safer default.
inline std::vector<DesignChoice> select_min_rmse(const std::vector<CellSummary>& cells,
                                                 Estimator which, double flat_rel_tol = 0.1) {
    if (cells.empty()) throw Error(Errc::empty_input, "select_min_rmse: no cells");
    auto rmse_of = [&](const CellSummary& cs) {
        return which == Estimator::linear_in_means ? cs.lm.rmse : cs.dm.rmse;
    };

    std::vector<DesignChoice> out;
    std::vector<std::pair<double, double>> seen;
    for (const auto& cell : cells) {
        if (!cell.error.empty()) continue;
        const std::pair<double, double> key{cell.rho_u, cell.c};
        if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
        seen.push_back(key);

        const CellSummary* best = nullptr;
        double worst = 0.0;
        for (const auto& other : cells) {
            if (!other.error.empty() || other.rho_u != key.first || other.c != key.second) continue;
            worst = std::max(worst, rmse_of(other));
            if (best == nullptr || rmse_of(other) < rmse_of(*best) ||
                (rmse_of(other) == rmse_of(*best) && other.rho_m > best->rho_m))
                best = &other;
        }
        DesignChoice choice;
        choice.rho_u = key.first;
        choice.c = key.second;
        choice.scaled_alpha = best->scaled_alpha;
        choice.rho_m = best->rho_m;
        choice.cell = *best;
        choice.flat = (worst - rmse_of(*best)) <= flat_rel_tol * rmse_of(*best);
        out.push_back(std::move(choice));
    }
    return out;
}

}  // namespace haate
