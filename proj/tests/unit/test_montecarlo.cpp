#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>

#include "haate/montecarlo.hpp"

using namespace haate;

namespace {

bool bitwise_equal(const CellSummary& a, const CellSummary& b) {
    auto est_eq = [](const EstimatorSummary& u, const EstimatorSummary& v) {
        return u.bias == v.bias && u.rmse == v.rmse && u.mean_se == v.mean_se &&
               u.coverage == v.coverage;
    };
    return a.rho_u == b.rho_u && a.c == b.c && a.scaled_alpha == b.scaled_alpha &&
           a.rho_m == b.rho_m && a.truths == b.truths && est_eq(a.lm, b.lm) && est_eq(a.dm, b.dm) &&
           a.iterations_completed == b.iterations_completed;
}

}  // namespace

TEST_CASE("analytic dm bias closed form at the unit-randomization pole", "[montecarlo]") {
    const auto spec = DesignSpec::balanced(100, 50, 2, 1000.0 / 3.0);
    const auto params = default_dgp_params(1.0);
    // per-arm biases are -980/1001 and 2450/1001; the contrast average is 735/1001
    CHECK(analytic_dm_bias(spec, params, 1) == Catch::Approx(-980.0 / 1001.0).margin(1e-12));
    CHECK(analytic_dm_bias(spec, params, 2) == Catch::Approx(2450.0 / 1001.0).margin(1e-12));
    CHECK(analytic_dm_bias_averaged(spec, params) == Catch::Approx(735.0 / 1001.0).margin(1e-12));
}

TEST_CASE("analytic dm bias vanishes without interference and at the cluster pole",
          "[montecarlo]") {
    const auto no_interference = default_dgp_params(0.0, 0.5);
    for (double g : {0.01, 1.0, 1000.0}) {
        const auto spec = DesignSpec::balanced(100, 50, 2, g / 3.0);
        CHECK(analytic_dm_bias_averaged(spec, no_interference) == 0.0);
    }
    // alpha -> 0 recovers the HAATE: E[p_l | A=m] -> 1{l=m}
    const auto tiny = DesignSpec::balanced(100, 50, 2, 1e-9);
    CHECK(std::abs(analytic_dm_bias_averaged(tiny, default_dgp_params(1.0))) < 1e-6);
}

TEST_CASE("analytic dm bias requires balanced alpha", "[montecarlo]") {
    DesignSpec spec = DesignSpec::balanced(100, 50, 2, 1.0);
    spec.alpha[2] = 2.0;
    try {
        analytic_dm_bias(spec, default_dgp_params(1.0), 1);
        FAIL("expected unbalanced_alpha");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::unbalanced_alpha);
    }
}

TEST_CASE("conditional proportion means sum to one", "[montecarlo]") {
    for (double alpha_bar : {1e-4, 0.3, 333.0}) {
        for (int m = 0; m <= 2; ++m) {
            double sum = 0.0;
            for (int l = 0; l <= 2; ++l) sum += conditional_proportion_mean(50, 2, alpha_bar, l, m);
            CHECK(sum == Catch::Approx(1.0).margin(1e-12));
        }
    }
}

TEST_CASE("run_cell is deterministic", "[montecarlo]") {
    const auto spec = DesignSpec::balanced(30, 10, 2, 0.5);
    const auto params = default_dgp_params(0.5, 0.3);
    const auto a = run_cell(spec, params, 50, 314159);
    const auto b = run_cell(spec, params, 50, 314159);
    REQUIRE(bitwise_equal(a, b));
    CHECK(a.iterations_completed == 50);
    CHECK(a.rho_m == treatment_icc(spec.scaled_alpha(), 2));
    CHECK(a.truths[0] == true_haate(params, 1));
}

TEST_CASE("monte carlo dm bias matches the analytic oracle", "[montecarlo][mc]") {
    const auto spec = DesignSpec::balanced(100, 50, 2, 1000.0 / 3.0);
    for (double c : {0.0, 0.5}) {
        const auto params = default_dgp_params(c, 0.1);
        const auto cell = run_cell(spec, params, 400, 2718);
        const double oracle = analytic_dm_bias_averaged(spec, params);
        INFO("c=" << c << " mc=" << cell.dm.bias << " oracle=" << oracle);
        CHECK(std::abs(cell.dm.bias - oracle) <= 4 * cell.dm.mc_se_of_bias);
        // the lm estimator stays unbiased
        CHECK(std::abs(cell.lm.bias) <= 4 * cell.lm.mc_se_of_bias);
    }
}

TEST_CASE("dm is unbiased near cluster-level randomization", "[montecarlo][mc]") {
    const auto spec = DesignSpec::balanced(100, 50, 2, 0.01 / 3.0);
    const auto params = default_dgp_params(1.0, 0.3);
    const auto cell = run_cell(spec, params, 400, 99);
    const double oracle = analytic_dm_bias_averaged(spec, params);
    CHECK(std::abs(oracle) < 0.01);  // nearly the HAATE already
    CHECK(std::abs(cell.dm.bias - oracle) <= 4 * cell.dm.mc_se_of_bias);
}

TEST_CASE("rmse decomposition identity", "[montecarlo]") {
    const auto spec = DesignSpec::balanced(40, 20, 2, 1.0);
    const auto cell = run_cell(spec, default_dgp_params(0.5, 0.5), 80, 5);
    for (const auto& est : {cell.lm, cell.dm}) {
        CHECK(est.rmse >= std::abs(est.bias));
        CHECK(est.rmse * est.rmse - est.bias * est.bias ==
              Catch::Approx(est.error_variance).epsilon(1e-10));
    }
}

TEST_CASE("coverage bookkeeping: one-sided floors at one half under opposed biases",
          "[montecarlo][mc]") {
    const auto spec = DesignSpec::balanced(100, 50, 2, 1000.0 / 3.0);
    const auto params = default_dgp_params(1.0, 0.0);
    HarnessOptions one_sided;
    const auto cell = run_cell(spec, params, 120, 808, one_sided);
    CHECK(cell.dm.coverage == Catch::Approx(0.5).margin(1e-12));
    HarnessOptions two_sided;
    two_sided.two_sided_coverage = true;
    const auto cell2 = run_cell(spec, params, 120, 808, two_sided);
    CHECK(cell2.dm.coverage == Catch::Approx(0.0).margin(1e-12));
    // the unbiased lm estimator is near nominal either way
    CHECK(cell.lm.coverage > 0.9);
    CHECK(cell2.lm.coverage > 0.9);
}

TEST_CASE("singleton sweep equals run_cell under the derived seed", "[montecarlo]") {
    SweepGrid grid;
    grid.rho_u_values = {0.3};
    grid.c_values = {0.5};
    grid.scaled_alpha_values = {2.0};
    grid.iterations = 25;
    grid.base_seed = 777;
    const auto spec = DesignSpec::balanced(20, 10, 2, 1.0);
    const auto cells = sweep(grid, spec, default_dgp_params());
    REQUIRE(cells.size() == 1);

    DesignSpec cell_spec = DesignSpec::balanced(20, 10, 2, 2.0 / 3.0);
    DgpParams cell_params = default_dgp_params(0.5, 0.3);
    const std::uint64_t seed =
        hash_combine(grid.base_seed, detail::cell_coordinate_hash(0.3, 0.5, 2.0));
    const auto direct = run_cell(cell_spec, cell_params, 25, seed);
    REQUIRE(bitwise_equal(cells.front(), direct));
}

TEST_CASE("sweep covers the full default grid", "[montecarlo][slowish]") {
    SweepGrid grid = SweepGrid::full_default();
    grid.iterations = 50;
    grid.base_seed = 11;
    const auto spec = DesignSpec::balanced(30, 10, 2, 1.0);
    const auto cells = sweep(grid, spec, default_dgp_params(), {}, 2);
    REQUIRE(cells.size() == 340);  // 5 x 4 x 17
    for (const auto& cell : cells) {
        REQUIRE(cell.error.empty());
        REQUIRE(cell.iterations_completed == 50);
    }
    // lexicographic order: rho_u outermost, scaled_alpha innermost
    CHECK(cells[0].rho_u == 0.0);
    CHECK(cells[0].c == 0.0);
    CHECK(cells[0].scaled_alpha == 0.001);
    CHECK(cells[1].scaled_alpha == 0.01);
    CHECK(cells[17].c == 0.1);
    CHECK(cells[68].rho_u == 0.1);
}

TEST_CASE("sweep output is independent of thread count", "[montecarlo]") {
    SweepGrid grid;
    grid.rho_u_values = {0.0, 0.5};
    grid.c_values = {0.1};
    grid.scaled_alpha_values = {0.5, 1000.0};
    grid.iterations = 20;
    grid.base_seed = 4242;
    const auto spec = DesignSpec::balanced(20, 10, 2, 1.0);
    const auto params = default_dgp_params();
    const auto act1 = sweep(grid, spec, params, {}, 1);
    const auto act3 = sweep(grid, spec, params, {}, 3);
    const auto act8 = sweep(grid, spec, params, {}, 8);
    REQUIRE(act1.size() == act3.size());
    for (std::size_t k = 0; k < act1.size(); ++k) {
        REQUIRE(bitwise_equal(act1[k], act3[k]));
        REQUIRE(bitwise_equal(act1[k], act8[k]));
    }
}

TEST_CASE("adding grid points does not perturb existing cells", "[montecarlo]") {
    SweepGrid small;
    small.rho_u_values = {0.1};
    small.c_values = {0.0};
    small.scaled_alpha_values = {1.0};
    small.iterations = 15;
    small.base_seed = 31337;
    SweepGrid larger = small;
    larger.scaled_alpha_values = {0.5, 1.0, 3.0};
    const auto spec = DesignSpec::balanced(20, 10, 2, 1.0);
    const auto params = default_dgp_params();
    const auto a = sweep(small, spec, params);
    const auto b = sweep(larger, spec, params);
    REQUIRE(bitwise_equal(a[0], b[1]));
}

TEST_CASE("sweep records invalid cells and keeps going", "[montecarlo]") {
    SweepGrid grid;
    grid.rho_u_values = {0.0};
    grid.c_values = {0.0};
    grid.scaled_alpha_values = {1.0};
    grid.iterations = 5;
    DesignSpec bad = DesignSpec::balanced(1, 10, 2, 1.0);  // J too small
    const auto cells = sweep(grid, bad, default_dgp_params());
    REQUIRE(cells.size() == 1);
    CHECK_FALSE(cells[0].error.empty());

    SweepGrid empty_axis = grid;
    empty_axis.c_values.clear();
    CHECK_THROWS_AS(sweep(empty_axis, DesignSpec::balanced(10, 5, 2, 1.0), default_dgp_params()),
                    Error);
}

TEST_CASE("select_min_rmse picks the argmin and breaks ties upward", "[montecarlo]") {
    auto make = [](double rho_u, double c, double g, double rmse_dm, double rmse_lm) {
        CellSummary cell;
        cell.rho_u = rho_u;
        cell.c = c;
        cell.scaled_alpha = g;
        cell.rho_m = treatment_icc(g, 2);
        cell.dm.rmse = rmse_dm;
        cell.lm.rmse = rmse_lm;
        return cell;
    };
    std::vector<CellSummary> cells{
        make(0.1, 0.0, 0.01, 0.09, 0.09),
        make(0.1, 0.0, 1.0, 0.05, 0.07),
        make(0.1, 0.0, 1000.0, 0.036, 0.60),
        make(0.5, 0.0, 0.01, 0.04, 0.04),
        make(0.5, 0.0, 1.0, 0.04, 0.05),  // tie with previous on dm
    };
    const auto dm_choice = select_min_rmse(cells, Estimator::difference_in_means);
    REQUIRE(dm_choice.size() == 2);
    CHECK(dm_choice[0].scaled_alpha == 1000.0);
    CHECK_FALSE(dm_choice[0].flat);
    // tie broken toward the larger rho_m (smaller alpha)
    CHECK(dm_choice[1].scaled_alpha == 0.01);
    const auto lm_choice = select_min_rmse(cells, Estimator::linear_in_means);
    CHECK(lm_choice[0].scaled_alpha == 1.0);
    CHECK_THROWS_AS(select_min_rmse({}, Estimator::difference_in_means), Error);
}

TEST_CASE("failed iterations are retried and reported", "[montecarlo]") {
    // J=2, n=2, three arms: most iterations miss an arm entirely, so the fit
    // throws missing_beta_column and retries kick in
    const auto spec = DesignSpec::balanced(2, 2, 2, 0.05);
    const auto cell = run_cell(spec, default_dgp_params(0.0, 0.0), 40, 12);
    CHECK(cell.iterations_completed + cell.iterations_failed == 40);
    CHECK(cell.iterations_completed > 0);
    CHECK(cell.iterations_failed > 0);
}
