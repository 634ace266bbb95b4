#include <doctest.h>

#include <cmath>

#include "rdlab/errors.hpp"
#include "rdlab/systems.hpp"

using namespace rdlab;

TEST_SUITE_BEGIN("systems");

TEST_CASE("pure doubling geometry: gamma, N, D, Z from the geometric series") {
    CircleFamily fam = make_circle_family(2, {{0.0, "none"}});
    const FiberGeometry& g = fam.geometry[0];
    CHECK(g.gamma == doctest::Approx(2.0));
    CHECK(g.holder_bound == doctest::Approx(2.0));
    CHECK(g.degree == 2);
    CHECK(g.z_value == doctest::Approx(1.0));  // sum of 2^-j
    CHECK(g.xi == doctest::Approx(0.5));
    CHECK_FALSE(g.neutral);
}

TEST_CASE("perturbed doubling: certified minimum of 2 + 0.02 pi cos") {
    CircleFamily fam = make_circle_family(2, {{0.01, "sin"}});
    double expect = 2.0 - 0.02 * M_PI;
    CHECK(fam.geometry[0].gamma == doctest::Approx(expect).epsilon(0.02));
    CHECK(fam.geometry[0].gamma <= expect + 1e-9);  // certified from below
    CHECK(fam.geometry[0].holder_bound >= 2.0 + 0.02 * M_PI - 1e-9);
}

TEST_CASE("neutral state allowed when some state expands") {
    CircleFamily fam = make_circle_family(2, {{1.0, "neutral"}, {0.0, "none"}});
    CHECK(fam.geometry[0].neutral);
    CHECK(fam.geometry[0].gamma == doctest::Approx(1.0));
    CHECK(fam.geometry[1].gamma == doctest::Approx(2.0));
    // a family with only neutral fibers is rejected
    CHECK_THROWS_AS(make_circle_family(2, {{1.0, "neutral"}}), ModelError);
}

TEST_CASE("non-expanding parameters are rejected") {
    // eps so large that min(2 + eps g') < 1
    CHECK_THROWS_AS(make_circle_family(2, {{1.2, "neutral"}}), ModelError);
    CHECK_THROWS_AS(make_circle_family(1, {{0.0, "none"}}), ArgumentError);
}

TEST_CASE("branch preimages invert the map") {
    CircleFamily fam = make_circle_family(3, {{0.02, "sin"}});
    for (double x : {0.0, 0.17, 0.5, 0.93}) {
        auto ys = circle_preimages(fam.system, 0, x);
        CHECK(ys.size() == 3);
        for (double y : ys)
            CHECK(circle_dist(circle_apply(fam.system, 0, y), x) <= 1e-12);
    }
}

TEST_CASE("pairing property: matched branches contract by 1/gamma") {
    CircleFamily fam = make_circle_family(2, {{0.01, "sin"}});
    double gamma = fam.geometry[0].gamma, xi = fam.geometry[0].xi;
    for (int t = 0; t < 40; ++t) {
        double x = double(t) / 40.0;
        double xp = x + 0.4 * xi * 0.5;  // scaled metric: arc shift = d/2
        if (xp >= 1.0) continue;         // branch labels rotate across the wrap
        auto ys = circle_preimages(fam.system, 0, x);
        auto yps = circle_preimages(fam.system, 0, xp);
        double d = circle_dist(x, xp);
        REQUIRE(d <= xi);
        for (std::size_t b = 0; b < ys.size(); ++b) {
            CHECK(circle_dist(ys[b], yps[b]) <= d / gamma + 1e-9);
            CHECK(circle_dist(ys[b], yps[b]) <= xi + 1e-12);
        }
    }
}

TEST_CASE("sft family pins the symbolic geometry") {
    CircleFamily fam = make_sft_family({2, 2}, {{{1, 1}, {1, 1}}, {{0, 1}, {1, 1}}});
    const double e = std::exp(1.0);
    CHECK(fam.geometry[0].gamma == doctest::Approx(e));
    CHECK(fam.geometry[0].xi == doctest::Approx(1.0 / e));
    CHECK(fam.geometry[0].holder_bound == doctest::Approx(e));
    CHECK(fam.geometry[0].degree == 2);
    CHECK(fam.geometry[0].cover_count == 2);
}

TEST_CASE("sft validation: zero rows and primitivity") {
    CHECK_THROWS_AS(make_sft_family({2}, {{{0, 0}, {1, 1}}}), ModelError);
    CHECK_THROWS_AS(make_sft_family({2}, {{{1, 0}, {0, 1}}}), ModelError);  // identity cycles
    // golden-mean shift alone is primitive: A^2 > 0
    CHECK_NOTHROW(make_sft_family({2}, {{{0, 1}, {1, 1}}}));
}

TEST_CASE("covering times of the doubling map: m = 1 at R = 1") {
    CircleFamily fam = make_circle_family(2, {{0.0, "none"}});
    EnvironmentModel env = make_iid({1.0}, 1);
    EnvPath path = sample_path(env, 0, 256, 1);
    auto recs = covering_times(fam, path, 1.0, 64, 192);
    for (const auto& r : recs) {
        // xi = 1/2, so min{n: 2 * 2^-n <= 1} = 1, and j = min{n: m <= n} = 1
        CHECK(r.m == 1);
        CHECK(r.j == 1);
    }
    CHECK(covering_tail_ok(recs, 8));
}

TEST_CASE("constant covering time M forces j = M") {
    // k=2 map slowed by a neutral perturbation: several steps to cover, the
    // same count at every index of a constant path
    CircleFamily fam = make_circle_family(2, {{0.5, "neutral"}});
    EnvironmentModel env = make_iid({1.0}, 1);
    EnvPath path = sample_path(env, 0, 512, 1);
    auto recs = covering_times(fam, path, 1.0, 128, 256);
    int M = recs.front().m;
    for (const auto& r : recs) {
        CHECK(r.m == M);
        CHECK(r.j == M);  // min{n >= 1: M <= n} = M on a constant path
    }
}

TEST_CASE("sft covering from matrix positivity") {
    // constant golden-mean environment: A^2 = [[1,1],[1,2]] > 0, so m = 2
    CircleFamily fam = make_sft_family({2}, {{{0, 1}, {1, 1}}});
    EnvironmentModel env = make_iid({1.0}, 1);
    EnvPath path = sample_path(env, 0, 128, 1);
    auto recs = covering_times(fam, path, 1.0, 16, 96);
    for (const auto& r : recs) CHECK(r.m == 2);
    // positive matrices cover in one step
    CircleFamily full = make_sft_family({2}, {{{1, 1}, {1, 1}}});
    auto recs2 = covering_times(full, path, 1.0, 16, 96);
    for (const auto& r : recs2) {
        CHECK(r.m == 1);
        CHECK(r.j == 1);
    }
}

TEST_CASE("path geometry recursion matches the frozen value on constant paths") {
    CircleFamily fam = make_circle_family(2, {{0.0, "none"}});
    EnvironmentModel env = make_iid({1.0}, 1);
    EnvPath path = sample_path(env, 0, 256, 1);
    PathGeometry g = path_geometry(fam, path, 64, 128);
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(g.z[i] == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(g.xi[i] == doctest::Approx(0.5).epsilon(1e-9));
    }
    CHECK_THROWS_AS(path_geometry(fam, path, 0, 10), WindowError);
}

TEST_CASE("weierstrass field is rough but bounded") {
    CircleFamily fam = make_circle_family(2, {{0.0, "none"}});
    RandomFunction w = weierstrass_function(0.5, 12, 3);
    double sup = 0.0;
    for (int i = 0; i < 512; ++i)
        sup = std::max(sup, std::abs(w.eval(fam.system, 0, i / 512.0)));
    CHECK(sup > 0.5);
    CHECK(sup < 10.0);
}

TEST_CASE("coboundary field evaluates u - u o T") {
    CircleFamily fam = make_circle_family(2, {{0.0, "none"}});
    RandomFunction f = coboundary_function();
    double x = 0.3;
    double expect = std::cos(2 * M_PI * x) - std::cos(2 * M_PI * circle_apply(fam.system, 0, x));
    CHECK(f.eval(fam.system, 0, x) == doctest::Approx(expect));
}

TEST_SUITE_END();
