#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <set>
#include <vector>

#include "haate/sobol.hpp"

using namespace haate;

TEST_CASE("first sobol point is the center of the cube", "[sobol]") {
    SobolSequence seq(8);
    std::vector<double> pt(8);
    seq.next(pt);
    for (double u : pt) CHECK(u == 0.5);
}

TEST_CASE("second sobol point has quarter coordinates", "[sobol]") {
    SobolSequence seq(6);
    std::vector<double> pt(6);
    seq.next(pt);
    seq.next(pt);
    for (double u : pt) CHECK((u == 0.25 || u == 0.75));
}

TEST_CASE("every dimension is a valid digital (0,1)-sequence", "[sobol]") {
    // points 1..255 of each 1-D projection must occupy the 255 dyadic buckets
    // 1/256..255/256 exactly once (the skipped zero point owns bucket 0)
    SobolSequence seq(sobol_max_dimensions);
    std::vector<double> pt(sobol_max_dimensions);
    std::vector<std::array<int, 256>> hits(sobol_max_dimensions);
    for (auto& h : hits) h.fill(0);
    for (int i = 1; i <= 255; ++i) {
        seq.next(pt);
        for (int d = 0; d < sobol_max_dimensions; ++d)
            hits[static_cast<std::size_t>(d)][static_cast<std::size_t>(pt[d] * 256)]++;
    }
    for (int d = 0; d < sobol_max_dimensions; ++d) {
        REQUIRE(hits[static_cast<std::size_t>(d)][0] == 0);
        for (int b = 1; b < 256; ++b) REQUIRE(hits[static_cast<std::size_t>(d)][b] == 1);
    }
}

TEST_CASE("sobol table: K=1 maps the center point to the uniform vector", "[sobol]") {
    for (double alpha_bar : {1e-4, 0.3, 1.0, 50.0}) {
        const auto spec = DesignSpec::balanced(10, 5, 2, alpha_bar, AssignMode::sobol_dirichlet, 1);
        const auto table = build_sobol_table(spec, 1);
        for (int m = 0; m <= 2; ++m)
            CHECK(table.at(0, m) == Catch::Approx(1.0 / 3.0).margin(1e-12));
    }
}

TEST_CASE("sobol table rows live on the simplex", "[sobol]") {
    const auto spec = DesignSpec::balanced(10, 5, 3, 0.8, AssignMode::sobol_dirichlet, 64);
    const auto table = build_sobol_table(spec, 64);
    for (int r = 0; r < table.K; ++r) {
        double sum = 0.0;
        for (int m = 0; m <= table.M; ++m) {
            CHECK(table.at(r, m) > 0.0);
            CHECK(table.at(r, m) < 1.0);
            sum += table.at(r, m);
        }
        REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("sobol table coordinate means estimate the dirichlet mean", "[sobol]") {
    const auto spec = DesignSpec::balanced(10, 5, 2, 1.0, AssignMode::sobol_dirichlet, 256);
    const auto table = build_sobol_table(spec, 256);
    for (int m = 0; m <= 2; ++m) {
        double mean = 0.0;
        for (int r = 0; r < table.K; ++r) mean += table.at(r, m);
        CHECK(mean / table.K == Catch::Approx(1.0 / 3.0).margin(0.02));
    }
}

TEST_CASE("sobol table generation is deterministic and symmetric across arms", "[sobol]") {
    const auto spec = DesignSpec::balanced(10, 5, 2, 0.5, AssignMode::sobol_dirichlet, 128);
    const auto t1 = build_sobol_table(spec, 128);
    const auto t2 = build_sobol_table(spec, 128);
    REQUIRE(t1.vectors == t2.vectors);
    // balanced alpha: every column has the same quasi-random mean up to QMC error
    std::vector<double> means(3, 0.0);
    for (int r = 0; r < t1.K; ++r)
        for (int m = 0; m <= 2; ++m) means[static_cast<std::size_t>(m)] += t1.at(r, m) / t1.K;
    for (int m = 1; m <= 2; ++m) CHECK(means[static_cast<std::size_t>(m)] == Catch::Approx(means[0]).margin(0.03));
}

TEST_CASE("sobol dimension limit", "[sobol]") {
    CHECK_THROWS_AS(SobolSequence(sobol_max_dimensions + 1), Error);
    const auto wide = DesignSpec::balanced(10, 5, sobol_max_dimensions, 1.0,
                                           AssignMode::sobol_dirichlet, 4);
    try {
        build_sobol_table(wide, 4);
        FAIL("expected dimension_unsupported");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::dimension_unsupported);
    }
}

TEST_CASE("assign_from_table with a single uniform row is unit-level randomization",
          "[sobol][mc]") {
    const auto spec = DesignSpec::balanced(10, 5, 2, 1.0, AssignMode::sobol_dirichlet, 1);
    const auto table = build_sobol_table(spec, 1);
    std::vector<std::string> ids;
    for (int j = 0; j < 300; ++j) ids.push_back("cluster-" + std::to_string(j));
    std::vector<int> sizes(ids.size(), 50);
    const auto d = assign_from_table(ids, sizes, table, RngStream{17, 0});
    long counts[3] = {0, 0, 0};
    long total = 0;
    for (const auto& row : d.labels)
        for (auto lab : row) {
            counts[lab]++;
            ++total;
        }
    const double se = std::sqrt((2.0 / 9.0) / static_cast<double>(total));
    for (long count : counts)
        CHECK(static_cast<double>(count) / total == Catch::Approx(1.0 / 3.0).margin(3 * se));
}

TEST_CASE("assign_from_table is deterministic and idempotent on duplicate ids", "[sobol]") {
    const auto spec = DesignSpec::balanced(10, 5, 2, 0.2, AssignMode::sobol_dirichlet, 16);
    const auto table = build_sobol_table(spec, 16);
    const std::vector<std::string> ids{"a", "b", "a", "c"};
    const std::vector<int> sizes{7, 9, 7, 4};
    const auto d1 = assign_from_table(ids, sizes, table, RngStream{23, 1});
    const auto d2 = assign_from_table(ids, sizes, table, RngStream{23, 1});
    REQUIRE(d1.labels == d2.labels);
    REQUIRE(d1.row_index == d2.row_index);
    // identical ids land on the same row with the same labels
    CHECK(d1.row_index[0] == d1.row_index[2]);
    CHECK(d1.labels[0] == d1.labels[2]);
    // different seed, different assignment (with overwhelming probability)
    const auto d3 = assign_from_table(ids, sizes, table, RngStream{24, 1});
    CHECK(d1.labels != d3.labels);
}

TEST_CASE("assign_from_table rejects an empty table", "[sobol]") {
    SobolDrawTable empty;
    try {
        assign_from_table({"x"}, {3}, empty, RngStream{1, 1});
        FAIL("expected empty_table");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::empty_table);
    }
}
