#include <catch2/catch_amalgamated.hpp>

#include "haate/core.hpp"
#include "haate/io.hpp"
#include "haate/randomize.hpp"
#include "haate/rng.hpp"

using namespace haate;

TEST_CASE("validate_design accepts the standard geometry", "[core]") {
    REQUIRE_NOTHROW(validate_design(DesignSpec::balanced(100, 50, 2, 1.0)));
}

TEST_CASE("validate_design rejects degenerate geometry", "[core]") {
    try {
        validate_design(DesignSpec::balanced(1, 50, 2, 1.0));
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::degenerate_geometry);
    }
    try {
        validate_design(DesignSpec::balanced(100, 1, 2, 1.0));
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::degenerate_geometry);
    }
}

TEST_CASE("validate_design rejects non-positive alpha and empty arms", "[core]") {
    try {
        validate_design(DesignSpec::balanced(100, 50, 2, 0.0));
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::non_positive_alpha);
    }
    DesignSpec mixed = DesignSpec::balanced(100, 50, 2, 1.0);
    mixed.alpha[1] = -0.5;
    CHECK_THROWS_AS(validate_design(mixed), Error);
    try {
        validate_design(DesignSpec::balanced(100, 50, 0, 1.0));
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::empty_arms);
    }
}

TEST_CASE("design json serialization round-trips exactly", "[core][json]") {
    Rng rng(RngStream{20260810, 1});
    for (int rep = 0; rep < 200; ++rep) {
        const int M = 1 + static_cast<int>(rng.next_u64() % 4);
        DesignSpec spec;
        spec.J = 2 + static_cast<int>(rng.next_u64() % 500);
        spec.n = 2 + static_cast<int>(rng.next_u64() % 200);
        spec.M = M;
        for (int m = 0; m <= M; ++m)
            spec.alpha.push_back(std::exp(14.0 * (rng.uniform() - 0.5)));  // 1e-3 .. 1e3
        if (rng.uniform() < 0.5) {
            spec.mode = AssignMode::sobol_dirichlet;
            spec.sobol_k = 1 + static_cast<int>(rng.next_u64() % 1024);
        }
        const auto text = to_json(spec).dump();
        const DesignSpec back = design_from_json(nlohmann::json::parse(text));
        REQUIRE(back == spec);
    }
}

TEST_CASE("dgp json serialization round-trips exactly", "[core][json]") {
    Rng rng(RngStream{20260810, 2});
    for (int rep = 0; rep < 200; ++rep) {
        const int M = 1 + static_cast<int>(rng.next_u64() % 4);
        DgpParams p;
        for (int m = 0; m <= M; ++m) p.beta.push_back(10.0 * (rng.uniform() - 0.5));
        for (int m = 0; m <= M; ++m) {
            std::vector<double> row;
            for (int l = 0; l < M; ++l) row.push_back(5.0 * (rng.uniform() - 0.5));
            p.delta_base.push_back(std::move(row));
        }
        p.c = rng.uniform() * 2.0;
        p.sigma2 = 0.01 + rng.uniform() * 4.0;
        p.rho_u = rng.uniform() * 0.95;
        const auto text = to_json(p).dump();
        const DgpParams back = dgp_from_json(nlohmann::json::parse(text));
        REQUIRE(back == p);
    }
}

TEST_CASE("proportions from labels are exact rationals with denominator n", "[core]") {
    Rng rng(RngStream{20260810, 3});
    for (int rep = 0; rep < 50; ++rep) {
        AssignmentMatrix a;
        a.J = 2 + static_cast<int>(rng.next_u64() % 20);
        a.n = 2 + static_cast<int>(rng.next_u64() % 40);
        a.M = 1 + static_cast<int>(rng.next_u64() % 3);
        a.labels.resize(static_cast<std::size_t>(a.J) * a.n);
        for (auto& lab : a.labels) lab = static_cast<std::int32_t>(rng.next_u64() % (a.M + 1));
        recompute_proportions(a);
        for (int j = 0; j < a.J; ++j) {
            int total = 0;
            for (int m = 0; m <= a.M; ++m) {
                int count = 0;
                for (int i = 0; i < a.n; ++i) count += (a.label(j, i) == m);
                total += count;
                // bitwise equal to count / n, the exact rational representative
                REQUIRE(a.proportion(j, m) == static_cast<double>(count) / a.n);
            }
            REQUIRE(total == a.n);
        }
    }
}

TEST_CASE("default critical value is the normal 97.5% quantile", "[core]") {
    CHECK(default_critical_value == Catch::Approx(1.959964).epsilon(1e-9));
}

TEST_CASE("derived rng streams reproduce and separate", "[core][rng]") {
    const RngStream a{42, 7};
    Rng r1(a), r2(a);
    for (int k = 0; k < 100; ++k) REQUIRE(r1.next_u64() == r2.next_u64());
    Rng r3(a.derived(1)), r4(a.derived(2));
    int same = 0;
    for (int k = 0; k < 64; ++k) same += (r3.next_u64() == r4.next_u64());
    CHECK(same == 0);
}
