#pragma once
// OLS estimation of the outcome models with rank-deficiency handling and
// cluster-robust (sandwich) variance.
//
// The linear-in-means layout has one intercept column per arm (no global
// intercept) followed by M slope columns per arm, Delta(m,l) = p_l * 1{A=m}.
// The difference-in-means layout keeps only the arm columns. The fit uses a
// column-pivoted Householder QR in which arm columns are pivot-protected:
// when the design degenerates (homogeneous clusters make Delta(m,m) collinear
// with Beta(m)), the slope columns are the ones dropped, and the
// linear-in-means contrast degrades to the difference-in-means form.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "haate/core.hpp"
#include "haate/dgp.hpp"

namespace haate {

struct ColumnTag {
    enum class Kind { beta, delta };
    Kind kind = Kind::beta;
    int m = 0;  // arm
    int l = 0;  // interfering arm, delta only

    static ColumnTag beta_col(int m) { return {Kind::beta, m, 0}; }
    static ColumnTag delta_col(int m, int l) { return {Kind::delta, m, l}; }

    bool operator==(const ColumnTag&) const = default;

    std::string name() const {
        if (kind == Kind::beta) return "beta_" + std::to_string(m);
        return "delta_" + std::to_string(m) + "_" + std::to_string(l);
    }
};

struct DesignMatrix {
    Eigen::MatrixXd x;
    std::vector<ColumnTag> tags;
    std::vector<std::int32_t> cluster_index;  // one entry per row
    int n_clusters = 0;
};

inline DesignMatrix build_dm_matrix(const AssignmentMatrix& a) {
    const int arms = a.M + 1;
    const Eigen::Index rows = static_cast<Eigen::Index>(a.J) * a.n;
    DesignMatrix dm;
    dm.x = Eigen::MatrixXd::Zero(rows, arms);
    dm.tags.reserve(static_cast<std::size_t>(arms));
    for (int m = 0; m < arms; ++m) dm.tags.push_back(ColumnTag::beta_col(m));
    dm.cluster_index.resize(static_cast<std::size_t>(rows));
    dm.n_clusters = a.J;
    Eigen::Index r = 0;
    for (int j = 0; j < a.J; ++j) {
        for (int i = 0; i < a.n; ++i, ++r) {
            dm.x(r, a.label(j, i)) = 1.0;
            dm.cluster_index[static_cast<std::size_t>(r)] = j;
        }
    }
    return dm;
}

inline DesignMatrix build_lm_matrix(const AssignmentMatrix& a) {
    const int arms = a.M + 1;
    const Eigen::Index rows = static_cast<Eigen::Index>(a.J) * a.n;
    DesignMatrix dm;
    dm.x = Eigen::MatrixXd::Zero(rows, arms + static_cast<Eigen::Index>(arms) * a.M);
    dm.tags.reserve(static_cast<std::size_t>(arms + arms * a.M));
    for (int m = 0; m < arms; ++m) dm.tags.push_back(ColumnTag::beta_col(m));
    for (int m = 0; m < arms; ++m)
        for (int l = 1; l <= a.M; ++l) dm.tags.push_back(ColumnTag::delta_col(m, l));
    dm.cluster_index.resize(static_cast<std::size_t>(rows));
    dm.n_clusters = a.J;
    Eigen::Index r = 0;
    for (int j = 0; j < a.J; ++j) {
        for (int i = 0; i < a.n; ++i, ++r) {
            const int m = a.label(j, i);
            dm.x(r, m) = 1.0;
            for (int l = 1; l <= a.M; ++l)
                dm.x(r, arms + static_cast<Eigen::Index>(m) * a.M + (l - 1)) = a.proportion(j, l);
            dm.cluster_index[static_cast<std::size_t>(r)] = j;
        }
    }
    return dm;
}

enum class ClusterCorrection { CR0, CR1 };

struct FitResult {
    Eigen::VectorXd coefficients;       // aligned with `retained`, original column order
    std::vector<ColumnTag> retained;
    std::vector<ColumnTag> dropped;
    Eigen::VectorXd residuals;
    Eigen::MatrixXd vcov;               // cluster-robust, retained x retained
    int n_clusters = 0;

    // kept for sandwich recomputation with a different correction
    Eigen::MatrixXd x_retained;
    Eigen::MatrixXd gram_inverse;
    std::vector<std::int32_t> cluster_index;

    bool has(const ColumnTag& tag) const {
        return std::find(retained.begin(), retained.end(), tag) != retained.end();
    }
    int index_of(const ColumnTag& tag) const {
        const auto it = std::find(retained.begin(), retained.end(), tag);
        return it == retained.end() ? -1 : static_cast<int>(it - retained.begin());
    }
    double coefficient(const ColumnTag& tag) const {
        const int idx = index_of(tag);
        if (idx < 0) throw Error(Errc::index_out_of_range, "fit has no column " + tag.name());
        return coefficients(idx);
    }
};

inline Eigen::MatrixXd cluster_robust_vcov(const FitResult& fit,
                                           ClusterCorrection correction = ClusterCorrection::CR1) {
    const Eigen::Index p = fit.x_retained.cols();
    const Eigen::Index rows = fit.x_retained.rows();
    if (fit.n_clusters < 2)
        throw Error(Errc::degenerate_geometry, "cluster_robust_vcov: needs at least two clusters");
    if (fit.gram_inverse.rows() != p)
        throw Error(Errc::singular_gram, "cluster_robust_vcov: missing Gram inverse");

    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd score(p);
    Eigen::Index start = 0;
    while (start < rows) {
        const std::int32_t cluster = fit.cluster_index[static_cast<std::size_t>(start)];
        Eigen::Index stop = start + 1;
        while (stop < rows && fit.cluster_index[static_cast<std::size_t>(stop)] == cluster) ++stop;
        score.noalias() = fit.x_retained.middleRows(start, stop - start).transpose() *
                          fit.residuals.segment(start, stop - start);
        meat.noalias() += score * score.transpose();
        start = stop;
    }

    double factor = 1.0;
    if (correction == ClusterCorrection::CR1) {
        const double J = fit.n_clusters;
        const double N = static_cast<double>(rows);
        factor = (J / (J - 1.0)) * ((N - 1.0) / (N - static_cast<double>(p)));
    }
    Eigen::MatrixXd v = factor * fit.gram_inverse * meat * fit.gram_inverse;
    return 0.5 * (v + v.transpose());
}

// Least squares with pivot-protected column dropping. Columns whose pivot
// magnitude falls below tol * leading pivot are dropped; beta columns are
// eliminated first so degeneracy always removes delta columns before them.
inline FitResult ols_fit(const DesignMatrix& dm, const OutcomeMatrix& outcomes, double tol = 1e-10,
                         ClusterCorrection correction = ClusterCorrection::CR1) {
    const Eigen::Index rows = dm.x.rows();
    const Eigen::Index p = dm.x.cols();
    if (static_cast<Eigen::Index>(outcomes.y.size()) != rows)
        throw Error(Errc::index_out_of_range, "ols_fit: row count mismatch");
    if (!dm.x.allFinite()) throw Error(Errc::non_finite_input, "ols_fit: non-finite design matrix");

    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(outcomes.y.data(), rows);
    if (!y.allFinite()) throw Error(Errc::non_finite_input, "ols_fit: non-finite outcomes");

    const Eigen::Index n_protected =
        std::count_if(dm.tags.begin(), dm.tags.end(),
                      [](const ColumnTag& t) { return t.kind == ColumnTag::Kind::beta; });

    Eigen::MatrixXd a = dm.x;  // factored in place
    Eigen::VectorXd qty = y;
    std::vector<Eigen::Index> phase_one, phase_two;
    for (Eigen::Index c = 0; c < p; ++c)
        (c < n_protected ? phase_one : phase_two).push_back(c);

    std::vector<Eigen::Index> pivot_order;
    std::vector<Eigen::Index> dropped_cols;
    double leading_pivot = 0.0;
    Eigen::Index rank = 0;
    Eigen::VectorXd householder(rows);

    auto eliminate = [&](std::vector<Eigen::Index>& candidates) {
        while (!candidates.empty() && rank < rows) {
            std::size_t best_pos = 0;
            double best_norm2 = -1.0;
            for (std::size_t k = 0; k < candidates.size(); ++k) {
                const double norm2 = a.col(candidates[k]).tail(rows - rank).squaredNorm();
                if (norm2 > best_norm2) {
                    best_norm2 = norm2;
                    best_pos = k;
                }
            }
            const double pivot = std::sqrt(std::max(best_norm2, 0.0));
            if (leading_pivot == 0.0) leading_pivot = pivot;
            if (!(pivot > tol * leading_pivot)) {
                for (Eigen::Index c : candidates) dropped_cols.push_back(c);
                candidates.clear();
                return;
            }
            const Eigen::Index col = candidates[best_pos];
            candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(best_pos));

            // Householder reflector for rows [rank, rows) of the pivot column
            const Eigen::Index len = rows - rank;
            auto seg = a.col(col).segment(rank, len);
            const double alpha = seg(0) >= 0.0 ? -pivot : pivot;
            householder.segment(rank, len) = seg;
            householder(rank) -= alpha;
            const double vnorm2 = householder.segment(rank, len).squaredNorm();
            if (vnorm2 > 0.0) {
                const auto v = householder.segment(rank, len);
                auto reflect = [&](Eigen::Ref<Eigen::VectorXd> target) {
                    const double proj = 2.0 * v.dot(target.segment(rank, len)) / vnorm2;
                    target.segment(rank, len) -= proj * v;
                };
                for (Eigen::Index c : phase_one) reflect(a.col(c));
                for (Eigen::Index c : phase_two) reflect(a.col(c));
                reflect(qty);
            }
            seg.setZero();
            seg(0) = alpha;
            pivot_order.push_back(col);
            ++rank;
        }
    };
    eliminate(phase_one);
    eliminate(phase_two);

    if (rank == 0) throw Error(Errc::all_columns_dropped, "ols_fit: every column fell below tolerance");

    // back-substitute R z = Q'y on the pivoted columns
    Eigen::MatrixXd r_factor(rank, rank);
    for (Eigen::Index jc = 0; jc < rank; ++jc)
        r_factor.col(jc) = a.col(pivot_order[static_cast<std::size_t>(jc)]).head(rank);
    const Eigen::VectorXd z =
        r_factor.triangularView<Eigen::Upper>().solve(qty.head(rank));

    // report retained columns in original order
    std::vector<Eigen::Index> order(static_cast<std::size_t>(rank));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Eigen::Index u, Eigen::Index v) {
        return pivot_order[static_cast<std::size_t>(u)] < pivot_order[static_cast<std::size_t>(v)];
    });

    FitResult fit;
    fit.n_clusters = dm.n_clusters;
    fit.cluster_index = dm.cluster_index;
    fit.coefficients.resize(rank);
    fit.x_retained.resize(rows, rank);
    fit.retained.reserve(static_cast<std::size_t>(rank));
    for (Eigen::Index k = 0; k < rank; ++k) {
        const Eigen::Index piv = order[static_cast<std::size_t>(k)];
        const Eigen::Index original = pivot_order[static_cast<std::size_t>(piv)];
        fit.coefficients(k) = z(piv);
        fit.retained.push_back(dm.tags[static_cast<std::size_t>(original)]);
        fit.x_retained.col(k) = dm.x.col(original);
    }
    std::sort(dropped_cols.begin(), dropped_cols.end());
    for (Eigen::Index c : dropped_cols) fit.dropped.push_back(dm.tags[static_cast<std::size_t>(c)]);

    fit.residuals = y - fit.x_retained * fit.coefficients;

    // (X'X)^-1 from R: invert in pivot order, then permute into report order
    Eigen::MatrixXd r_inv = r_factor.triangularView<Eigen::Upper>().solve(
        Eigen::MatrixXd::Identity(rank, rank));
    Eigen::MatrixXd gram_inv_pivot = r_inv * r_inv.transpose();
    fit.gram_inverse.resize(rank, rank);
    for (Eigen::Index u = 0; u < rank; ++u)
        for (Eigen::Index v = 0; v < rank; ++v)
            fit.gram_inverse(u, v) = gram_inv_pivot(order[static_cast<std::size_t>(u)],
                                                    order[static_cast<std::size_t>(v)]);
    if (!fit.gram_inverse.allFinite())
        throw Error(Errc::singular_gram, "ols_fit: Gram matrix not invertible at tolerance");

    fit.vcov = cluster_robust_vcov(fit, correction);
    return fit;
}

namespace detail {

inline Contrast contrast_from_lambda(const FitResult& fit, const Eigen::VectorXd& lambda, int arm,
                                     Estimator which, bool slope_dropped, double z) {
    const double estimate = lambda.dot(fit.coefficients);
    const double var = lambda.dot(fit.vcov * lambda);
    const double se = std::sqrt(std::max(var, 0.0));
    Contrast c;
    c.arm = arm;
    c.estimate = estimate;
    c.se = se;
    c.ci_lo = estimate - z * se;
    c.ci_hi = estimate + z * se;
    c.estimator = which;
    c.slope_dropped = slope_dropped;
    return c;
}

}  // namespace detail

// beta_m + delta_mm - beta_0; a dropped delta_mm contributes zero and is flagged.
inline Contrast haate_contrast_lm(const FitResult& fit, int m, double z = default_critical_value) {
    const int i0 = fit.index_of(ColumnTag::beta_col(0));
    const int im = fit.index_of(ColumnTag::beta_col(m));
    if (i0 < 0 || im < 0)
        throw Error(Errc::missing_beta_column, "haate_contrast_lm: arm intercept column missing");
    const int is = fit.index_of(ColumnTag::delta_col(m, m));
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(fit.coefficients.size());
    lambda(i0) = -1.0;
    lambda(im) = 1.0;
    if (is >= 0) lambda(is) = 1.0;
    return detail::contrast_from_lambda(fit, lambda, m, Estimator::linear_in_means, is < 0, z);
}

// beta_m - beta_0 on the arm-indicator model.
inline Contrast haate_contrast_dm(const FitResult& fit, int m, double z = default_critical_value) {
    const int i0 = fit.index_of(ColumnTag::beta_col(0));
    const int im = fit.index_of(ColumnTag::beta_col(m));
    if (i0 < 0 || im < 0)
        throw Error(Errc::missing_beta_column, "haate_contrast_dm: arm intercept column missing");
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(fit.coefficients.size());
    lambda(i0) = -1.0;
    lambda(im) = 1.0;
    return detail::contrast_from_lambda(fit, lambda, m, Estimator::difference_in_means, false, z);
}

struct RatioEffect {
    double ratio = 0.0;
    double se = 0.0;
};

// Delta-method standard error for a ratio of means.
inline RatioEffect ratio_effect(double mean_t, double mean_c, double var_t, double var_c,
                                double cov_tc) {
    if (mean_c == 0.0) throw Error(Errc::zero_denominator, "ratio_effect: control mean is zero");
    const double ratio = mean_t / mean_c;
    const double rel = var_t / (mean_t * mean_t) + var_c / (mean_c * mean_c) -
                       2.0 * cov_tc / (mean_t * mean_c);
    return RatioEffect{ratio, std::abs(ratio) * std::sqrt(std::max(rel, 0.0))};
}

}  // namespace haate
