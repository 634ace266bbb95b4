#include <doctest.h>

#include <cmath>

#include "rdlab/blocks.hpp"
#include "rdlab/cones.hpp"
#include "rdlab/environment.hpp"
#include "rdlab/errors.hpp"

using namespace rdlab;

namespace {

CellGeometry grid_cells(int n) {
    CellGeometry c;
    c.circle = true;
    c.count = n;
    return c;
}

ConeSpec orthant_cone() {
    ConeSpec c;
    c.kind = ConeKind::orthant;
    return c;
}

ConeSpec log_cone(double s, double Q, double alpha, double xi) {
    ConeSpec c;
    c.kind = ConeKind::log_oscillation;
    c.s = s;
    c.Q = Q;
    c.alpha = alpha;
    c.xi = xi;
    return c;
}

}  // namespace

TEST_SUITE_BEGIN("cones");

TEST_CASE("orthant metric closed form") {
    CellGeometry cells = grid_cells(2);
    Eigen::VectorXd f(2), g(2);
    f << 1.0, 2.0;
    g << 2.0, 1.0;
    CHECK(hilbert_metric(f, g, orthant_cone(), cells) == doctest::Approx(std::log(4.0)));
    CHECK(hilbert_metric(f, 3.0 * f, orthant_cone(), cells) == doctest::Approx(0.0));
    Eigen::VectorXd bad(2);
    bad << 1.0, 0.0;
    CHECK_THROWS_AS(hilbert_metric(bad, g, orthant_cone(), cells), MembershipError);
}

TEST_CASE("projective metric axioms on sampled members") {
    CellGeometry cells = grid_cells(12);
    ConeSpec cone = log_cone(3.0, 1.0, 1.0, 0.5);
    Rng rng(4);
    auto member = [&](int seed) {
        Eigen::VectorXd u(12);
        Rng r{std::uint64_t(seed)};
        for (int i = 0; i < 12; ++i) u(i) = r.uniform(-0.3, 0.3);
        double v = vector_holder_seminorm(u.cast<std::complex<double>>(), cells, cone.alpha,
                                          cone.xi);
        if (v > 0.0) u *= 0.8 * cone.s * cone.Q / v;
        return Eigen::VectorXd(u.array().exp());
    };
    for (int t = 0; t < 10; ++t) {
        Eigen::VectorXd a = member(3 * t), b = member(3 * t + 1), c = member(3 * t + 2);
        double dab = hilbert_metric(a, b, cone, cells);
        double dba = hilbert_metric(b, a, cone, cells);
        CHECK(dab == doctest::Approx(dba).epsilon(1e-8));
        double scale = 0.5 + rng.uniform();
        CHECK(hilbert_metric(a, scale * b, cone, cells) == doctest::Approx(dab).epsilon(1e-8));
        double dac = hilbert_metric(a, c, cone, cells);
        double dcb = hilbert_metric(c, b, cone, cells);
        CHECK(dab <= dac + dcb + 1e-8);
    }
}

TEST_CASE("positive matrices contract the orthant metric by tanh(diam/4)") {
    CellGeometry cells = grid_cells(2);
    Rng rng(9);
    for (int t = 0; t < 25; ++t) {
        Eigen::MatrixXd A(2, 2);
        for (int i = 0; i < 4; ++i) A(i / 2, i % 2) = rng.uniform(0.1, 1.0);
        double diam = orthant_image_diameter(A);
        double coef = std::tanh(diam / 4.0);
        for (int p = 0; p < 30; ++p) {
            Eigen::VectorXd f(2), g(2);
            f << rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0);
            g << rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0);
            double before = hilbert_metric(f, g, orthant_cone(), cells);
            if (before < 1e-12) continue;
            double after = hilbert_metric((A * f).eval(), (A * g).eval(), orthant_cone(), cells);
            CHECK(after <= coef * before + 1e-9);
        }
    }
}

TEST_CASE("membership margins") {
    CellGeometry cells = grid_cells(16);
    ConeSpec cone = log_cone(3.0, 1.0, 1.0, 0.5);

    Eigen::VectorXd flat = Eigen::VectorXd::Constant(16, 2.5);
    Membership m = cone_membership(flat, cone, cells);
    CHECK(m.member);
    CHECK(m.margin == doctest::Approx(1.0));

    ConeSpec kc;
    kc.kind = ConeKind::kappa;
    kc.kappa = 1.0 / std::sqrt(2.0);
    CHECK(cone_membership(flat, kc, cells).member);

    // constructed boundary violation: v(log g) = 1.01 s Q
    Eigen::VectorXd u(16);
    for (int i = 0; i < 16; ++i) u(i) = std::cos(2.0 * M_PI * cells.rep(i));
    double v = vector_holder_seminorm(u.cast<std::complex<double>>(), cells, 1.0, 0.5);
    u *= 1.01 * cone.s * cone.Q / v;
    Membership bad = cone_membership(u.array().exp(), cone, cells);
    CHECK_FALSE(bad.member);
    CHECK(bad.margin == doctest::Approx(-0.01).epsilon(1e-6));
}

TEST_CASE("unit-norm kappa members sit above the inf bound") {
    CellGeometry cells = grid_cells(24);
    double kappa = 1.0 / std::sqrt(2.0);
    ConeSpec kc;
    kc.kind = ConeKind::kappa;
    kc.kappa = kappa;
    Rng rng(7);
    for (int t = 0; t < 24; ++t) {
        Eigen::VectorXd w(24);
        for (int i = 0; i < 24; ++i)
            w(i) = std::cos(2.0 * M_PI * (cells.rep(i) + rng.uniform()));
        double v = vector_holder_seminorm(w.cast<std::complex<double>>(), cells, 1.0, 1.0);
        double sup = w.cwiseAbs().maxCoeff();
        double c = 0.9 * kappa / (v + kappa * sup);
        Eigen::VectorXd g = Eigen::VectorXd::Ones(24) + c * w;
        REQUIRE(cone_membership(g, kc, cells).member);
        g /= vector_alpha_norm(g.cast<std::complex<double>>(), cells, 1.0, 1.0);
        CHECK(g.minCoeff() >= 1.0 / (2.0 * kappa + 1.0) - 1e-9);
    }
}

TEST_CASE("decomposition: members, negatives, and the constructive shift") {
    CellGeometry cells = grid_cells(16);
    ConeSpec cone = log_cone(3.0, 1.0, 1.0, 0.5);

    Eigen::VectorXd flat = Eigen::VectorXd::Constant(16, 1.0);
    Decomposition d0 = decompose(flat, cone, cells);
    CHECK((d0.parts[0] - flat).cwiseAbs().maxCoeff() == 0.0);
    CHECK(d0.parts[1].cwiseAbs().maxCoeff() == 0.0);

    Decomposition dneg = decompose(Eigen::VectorXd(-flat), cone, cells);
    CHECK((dneg.parts[1] + flat).cwiseAbs().maxCoeff() == 0.0);

    Eigen::VectorXd g(16);
    for (int i = 0; i < 16; ++i) g(i) = std::cos(2.0 * M_PI * cells.rep(i));
    Decomposition dg = decompose(g, cone, cells);
    Eigen::VectorXd sum = dg.parts[0] + dg.parts[1] + dg.parts[2] + dg.parts[3];
    CHECK((sum - g).cwiseAbs().maxCoeff() <= 1e-12);
    for (int p = 0; p < 4; ++p) {
        if (dg.parts[p].cwiseAbs().maxCoeff() == 0.0) continue;
        bool in_plus = cone_membership(dg.parts[p], cone, cells).member;
        bool in_minus = cone_membership(Eigen::VectorXd(-dg.parts[p]), cone, cells).member;
        CHECK((in_plus || in_minus));
    }
    CHECK(dg.norm_sum <= dg.norm_bound);

    Decomposition dz = decompose(Eigen::VectorXd::Zero(16), cone, cells);
    for (int p = 0; p < 4; ++p) CHECK(dz.parts[p].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("contraction ledger of the uniform doubling cocycle") {
    CircleFamily fam = make_circle_family(2, {{0.0, "none"}});
    EnvironmentModel env = make_iid({1.0}, 1);
    EnvPath path = sample_path(env, 0, 400, 1);
    Discretization disc{DiscScheme::ulam, 48};
    CocycleWindow w = build_window(fam, path, neg_log_deriv_potential(), disc, 0, 400);
    RPFTriplet trip = solve_triplet(w, 48, 1e-8);
    CocycleWindow norm = normalized_window(w, trip);
    NormalizedPotential np = normalized_potential(trip, fam, path, neg_log_deriv_potential(),
                                                  disc, 3.0);
    PathGeometry geo = path_geometry(fam, path, trip.begin, path.end());
    auto cover = covering_times(fam, path, 1.0, trip.begin,
                                trip.begin + long(trip.lambdas.size()));
    ContractionLedger led = contraction_ledger(fam, path, norm, trip, np, cover, geo);

    for (char a : led.in_A) CHECK(a == 1);  // constant system: every index is good
    CHECK(led.prob_A0 >= 0.25);
    CHECK(led.c >= 0.0);
    CHECK(led.U > 0.0);
    // envelope follows the pure-exponential hit count on the M0 grid
    for (std::size_t n = 0; n < led.envelope.size(); ++n) {
        double hits = double(led.cumulative[n]);
        CHECK(led.envelope[n] == doctest::Approx(led.U * std::exp(-led.c * hits)));
    }
    CHECK(led.measured_diam <= led.D0);
    CHECK(led.measured_contraction <= led.tanh_quarter + 1e-9);
    // sup-norm decay dominated by the ledger envelope (both scaled to [0,2])
    CellGeometry cells = make_cells(fam.system, disc);
    Eigen::VectorXd wv(48);
    RandomFunction wei = weierstrass_function(1.0, 10, 5);
    for (int c = 0; c < 48; ++c) wv(c) = wei.eval(fam.system, 0, cells.rep(c));
    DecayReport rep = decay_rate(norm, trip, {{"w", wv}}, int(led.envelope.size()), 1.0, cells);
    for (std::size_t n = 0; n < led.envelope.size(); ++n)
        CHECK(rep.decay[n] <= 2.0 * std::min(1.0, led.envelope[n]) + 1e-12);
}

TEST_CASE("kappa-cone invariance bookkeeping") {
    // zeta formula value from the stated constants
    CellGeometry cells = grid_cells(32);
    CircleFamily fam = make_circle_family(2, {{0.0, "none"}});
    EnvironmentModel env = make_iid({1.0}, 1);
    EnvPath path = sample_path(env, 0, 256, 1);
    Discretization disc{DiscScheme::ulam, 32};
    CocycleWindow w = build_window(fam, path, neg_log_deriv_potential(), disc, 0, 256);
    RPFTriplet trip = solve_triplet(w, 32, 1e-8);
    CocycleWindow norm = normalized_window(w, trip);

    std::vector<Eigen::MatrixXd> blocks;
    std::vector<Eigen::VectorXd> mus;
    for (int j = 0; j < 3; ++j) {
        blocks.push_back(compose(norm, trip.begin + 6 * j, 6).entries.real());
        mus.push_back(trip.mu(trip.begin + 6 * j));
    }
    KappaReport rep = kappa_invariance_check(blocks, mus, 0.1, 1.0 / std::sqrt(2.0), cells, 1.0);
    CHECK(rep.zeta == doctest::Approx(0.45008).epsilon(1e-3));
    CHECK(rep.zeta < 1.0);
    CHECK(rep.eps_measured <= 0.1);
    CHECK(rep.worst_margin >= 0.0);
    CHECK(rep.ok);
    CHECK_THROWS_AS(kappa_invariance_check(blocks, mus, 0.17, 1.0 / std::sqrt(2.0), cells, 1.0),
                    ArgumentError);
    CHECK_THROWS_AS(kappa_invariance_check(blocks, mus, 0.2, 1.0 / std::sqrt(2.0), cells, 1.0),
                    ArgumentError);
}

TEST_CASE("sampling functional dominates the alpha norm on cone members") {
    CellGeometry cells = grid_cells(32);
    ConeSpec cone = log_cone(3.0, 1.0, 1.0, 0.5);
    // xi-cover: every fourth representative (scaled distance to a neighbor
    // cell is 2/32 per step, so 4 steps stay within xi = 0.5)
    std::vector<int> cover;
    for (int i = 0; i < 32; i += 4) cover.push_back(i);

    Eigen::VectorXd flat = Eigen::VectorXd::Ones(32);
    SamplingFunctionalBound r1 = sampling_functional_bound(flat, cone, cover, cells);
    CHECK(r1.holds);
    CHECK(r1.k_times_l >= double(cover.size()));  // l(1) = #points, K >= 1

    Eigen::VectorXd u(32);
    for (int i = 0; i < 32; ++i) u(i) = 0.2 * std::sin(2.0 * M_PI * cells.rep(i));
    Eigen::VectorXd g = u.array().exp();
    REQUIRE(cone_membership(g, cone, cells).member);
    SamplingFunctionalBound r2 = sampling_functional_bound(g, cone, cover, cells);
    CHECK(r2.holds);

    CHECK_THROWS_AS(sampling_functional_bound(g, cone, {}, cells), ArgumentError);
    // single point is not a xi-cover at xi = 0.5 on the scaled circle
    CHECK_THROWS_AS(sampling_functional_bound(g, cone, {0}, cells), ArgumentError);
}

TEST_CASE("single-point cover at xi = 1 bounds the sup through the oscillation") {
    CellGeometry cells = grid_cells(32);
    ConeSpec cone = log_cone(3.0, 1.0, 1.0, 1.0);
    Eigen::VectorXd u(32);
    for (int i = 0; i < 32; ++i) u(i) = 0.15 * std::cos(2.0 * M_PI * cells.rep(i));
    Eigen::VectorXd g = u.array().exp();
    REQUIRE(cone_membership(g, cone, cells).member);
    SamplingFunctionalBound r = sampling_functional_bound(g, cone, {0}, cells);
    CHECK(r.holds);
    // member oscillation: g(x0) >= e^{-sQ} sup g
    CHECK(g(0) >= std::exp(-cone.s * cone.Q) * g.maxCoeff() - 1e-12);
}

TEST_SUITE_END();
