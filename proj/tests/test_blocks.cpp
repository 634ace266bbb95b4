#include <doctest.h>

#include <cmath>

#include "rdlab/blocks.hpp"
#include "rdlab/environment.hpp"
#include "rdlab/errors.hpp"

using namespace rdlab;

namespace {

struct BlockSetup {
    CircleFamily fam;
    EnvPath path;
    CocycleWindow window;
    RPFTriplet trip;
    CocycleWindow norm;
};

BlockSetup doubling_blocks(int res, long len) {
    BlockSetup s{make_circle_family(2, {{0.0, "none"}}), {}, {}, {}, {}};
    EnvironmentModel env = make_iid({1.0}, 1);
    s.path = sample_path(env, 0, len, 1);
    s.window = build_window(s.fam, s.path, neg_log_deriv_potential(), {DiscScheme::ulam, res},
                            0, len);
    s.trip = solve_triplet(s.window, 48, 1e-8);
    s.norm = normalized_window(s.window, s.trip);
    return s;
}

VisitRecord every_other_visits(long len) {
    VisitRecord rec;
    rec.level_set_id = "even";
    rec.path_length = len;
    for (long k = 2; k < len; k += 2) rec.visit_indices.push_back(k);  // m_k = 2k
    return rec;
}

}  // namespace

TEST_SUITE_BEGIN("blocks");

TEST_CASE("schedule recursion against the hand-computed example") {
    // eps0 = 0.1 gives u0 = 21; C1 = 1, beta = 2, eps = 1:
    // n1 = floor(sqrt 21) = 4, n2 = floor(sqrt 21 * sqrt 4) = 9,
    // n3 = floor(sqrt 21 * sqrt 13) = 16
    BlockSchedule s = build_schedule(1.0, 2.0, 1.0, 0.1, 5);
    CHECK(s.u0 == doctest::Approx(21.0));
    CHECK(s.n_sizes[0] == 4);
    CHECK(s.n_sizes[1] == 9);
    CHECK(s.cum[1] == 13);
    CHECK(s.n_sizes[2] == 16);
    CHECK(s.cum[2] == 29);
    CHECK(s.sandwich_ok);
}

TEST_CASE("schedule with vanishing eps has constant block sizes") {
    BlockSchedule s = build_schedule(1.0, 2.0, 1e-9, 0.1, 50);
    for (long n : s.n_sizes) CHECK(n == 4);
    for (std::size_t j = 0; j < s.cum.size(); ++j) CHECK(s.cum[j] == 4 * long(j + 1));
}

TEST_CASE("schedule sandwich on a small parameter grid") {
    for (double C1 : {1.0, 4.0}) {
        for (double beta : {1.5, 2.0, 3.0}) {
            for (double frac : {0.25, 0.5}) {
                BlockSchedule s = build_schedule(C1, beta, frac * beta, 0.1, 2000);
                CHECK(s.sandwich_ok);
            }
        }
    }
}

TEST_CASE("schedule rejects divergent parameters") {
    CHECK_THROWS_AS(build_schedule(1.0, 2.0, 2.0, 0.1, 10), ArgumentError);
    CHECK_THROWS_AS(build_schedule(1.0, 2.0, 2.5, 0.1, 10), ArgumentError);
    CHECK_THROWS_AS(build_schedule(1.0, 2.0, 1.0, 0.2, 10), ArgumentError);
    CHECK_THROWS_AS(build_schedule(0.5, 2.0, 1.0, 0.1, 10), ArgumentError);
}

TEST_CASE("visit growth fit on the arithmetic sequence m_k = 2k") {
    std::vector<long> m;
    for (long k = 1; k <= 200; ++k) m.push_back(2 * k);
    VisitGrowthFit f = fit_visit_growth(m);
    CHECK(f.eta0 == doctest::Approx(0.0).epsilon(0.02));
    CHECK(f.E2 == doctest::Approx(2.0).epsilon(0.05));
    CHECK(f.delta == doctest::Approx(0.0).epsilon(0.02));
    CHECK(f.E3 == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("induced indices from m_k = 2k") {
    BlockSetup s = doubling_blocks(32, 700);
    long len = s.norm.end() - s.norm.begin();
    BlockSchedule sched = build_schedule(1.0, 2.0, 1.0, 0.1, 4);
    InducedBlocks blocks = induce(s.norm, s.trip, every_other_visits(len), sched,
                                  make_cells(s.fam.system, {DiscScheme::ulam, 32}), 1.0);
    // ell_j = m_{N_j} = 2 N_j
    CHECK(blocks.ell[1] == 2 * sched.cum[0]);
    CHECK(blocks.ell[2] == 2 * sched.cum[1]);
    CHECK(blocks.max_L_gap <= 2);
    // L_n = max{k: 2 N_k <= n}
    CHECK(blocks.L_of[2 * sched.cum[0]] == 1);
    CHECK(blocks.L_of[2 * sched.cum[0] + 1] == 1);
    CHECK(blocks.worst_power_ratio <= 1.0);
}

TEST_CASE("single-block schedule reduces to a plain composition") {
    BlockSetup s = doubling_blocks(32, 400);
    long len = s.norm.end() - s.norm.begin();
    BlockSchedule sched = build_schedule(1.0, 2.0, 1.0, 0.1, 1);
    InducedBlocks blocks = induce(s.norm, s.trip, every_other_visits(len), sched,
                                  make_cells(s.fam.system, {DiscScheme::ulam, 32}), 1.0);
    Eigen::MatrixXd direct = compose(s.norm, s.norm.begin(), blocks.ell[1]).entries.real();
    CHECK((blocks.block_ops[0] - direct).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("induce demands enough visits") {
    BlockSetup s = doubling_blocks(32, 400);
    BlockSchedule sched = build_schedule(16.0, 2.0, 1.0, 0.1, 6);
    VisitRecord tiny;
    tiny.path_length = 10;
    tiny.visit_indices = {2, 4, 6};
    CHECK_THROWS_AS(induce(s.norm, s.trip, tiny, sched,
                           make_cells(s.fam.system, {DiscScheme::ulam, 32}), 1.0),
                    WindowError);
}

TEST_CASE("block triplet: trivial at z = 0, analytic derivative, rank-one decay") {
    BlockSetup s = doubling_blocks(32, 900);
    long len = s.norm.end() - s.norm.begin();
    VisitRecord all;
    all.path_length = len;
    for (long k = 1; k < len; ++k) all.visit_indices.push_back(k);  // every index visits
    BlockSchedule sched = build_schedule(4.0, 2.0, 1.0, 0.1, 6);
    InducedBlocks blocks = induce(s.norm, s.trip, all, sched,
                                  make_cells(s.fam.system, {DiscScheme::ulam, 32}), 1.0);
    REQUIRE(blocks.block_ops.size() >= 4);
    CHECK(blocks.worst_power_ratio <= 1.0);

    int J = 2;
    BlockTriplet bt = block_triplet(s.fam, s.path, neg_log_deriv_potential(), cosine_function(),
                                    {DiscScheme::ulam, 32}, s.trip, blocks, J, {});
    CHECK(bt.z0_lambda_dev <= 1e-8);
    CHECK(bt.z0_h_dev <= 1e-8);
    CHECK(bt.z0_nu_dev <= 1e-8);
    for (double r : bt.res_nu_one) CHECK(r <= 1e-8);
    for (double r : bt.res_nu_h) CHECK(r <= 1e-8);
    CHECK(bt.decay_ratio <= 0.2);

    // central finite difference of lambda at 0 against the quadrature mean
    double dz = bt.delta_J / 8.0;
    BlockTriplet plus = block_triplet(s.fam, s.path, neg_log_deriv_potential(), cosine_function(),
                                      {DiscScheme::ulam, 32}, s.trip, blocks, J, {{dz, 0.0}});
    BlockTriplet minus = block_triplet(s.fam, s.path, neg_log_deriv_potential(), cosine_function(),
                                       {DiscScheme::ulam, 32}, s.trip, blocks, J, {{-dz, 0.0}});
    for (int j = 0; j <= J; ++j) {
        std::complex<double> fd =
            (plus.lambdas[0][std::size_t(j)] - minus.lambdas[0][std::size_t(j)]) / (2.0 * dz);
        double oracle = block_mean_birkhoff(s.fam, s.path, cosine_function(), s.trip,
                                            blocks.origin + blocks.ell[std::size_t(j)],
                                            blocks.origin + blocks.ell[std::size_t(j + 1)]);
        CHECK(std::abs(fd.real() - oracle) <= 1e-4);
        CHECK(std::abs(fd.imag()) <= 1e-8);
    }

    // grid points outside the verified radius are rejected
    CHECK_THROWS_AS(block_triplet(s.fam, s.path, neg_log_deriv_potential(), cosine_function(),
                                  {DiscScheme::ulam, 32}, s.trip, blocks, J,
                                  {{2.0 * bt.delta_J, 0.0}}),
                    ArgumentError);
}

TEST_CASE("moment bound: zero observable and the Gaussian fourth-moment scale") {
    BlockSetup s = doubling_blocks(64, 700);
    MomentBound z = moment_bound_check(s.fam, s.path, zero_function(), s.trip,
                                       s.trip.begin, 64, 4.0, 1.0, 0.5, 500);
    CHECK(z.lhs == doctest::Approx(0.0));
    CHECK(z.lhs <= z.rhs);

    // S_n/sqrt(n) approaches N(0, 1/2): ||.||_4 / sqrt(n) -> 3^{1/4} sigma
    MomentBound m = moment_bound_check(s.fam, s.path, cosine_function(), s.trip,
                                       s.trip.begin, 256, 4.0, 2.0, 0.1, 4000);
    double expect = std::pow(3.0, 0.25) * std::sqrt(0.5);
    CHECK(m.lhs / std::sqrt(256.0) == doctest::Approx(expect).epsilon(0.2));
    CHECK(m.stable);

    // coboundary sums stay bounded in n
    MomentBound c1 = moment_bound_check(s.fam, s.path, coboundary_function(), s.trip,
                                        s.trip.begin, 32, 4.0, 2.0, 0.1, 2000);
    MomentBound c2 = moment_bound_check(s.fam, s.path, coboundary_function(), s.trip,
                                        s.trip.begin, 512, 4.0, 2.0, 0.1, 2000);
    CHECK(c2.lhs <= c1.lhs * 1.5 + 0.5);
}

TEST_CASE("normalized and induced sums drift apart no faster than the gap exponent") {
    BlockSetup s = doubling_blocks(48, 1200);
    long len = s.norm.end() - s.norm.begin();
    VisitRecord all;
    all.path_length = len;
    for (long k = 1; k < len; ++k) all.visit_indices.push_back(k);
    BlockSchedule sched = build_schedule(4.0, 2.0, 0.5, 0.1, 16);
    InducedBlocks blocks = induce(s.norm, s.trip, all, sched,
                                  make_cells(s.fam.system, {DiscScheme::ulam, 48}), 1.0);
    // empirical L^4 distance between the self-normalized sums at n and ell_{L_n}
    Rng rng(5);
    CellGeometry cells = make_cells(s.fam.system, {DiscScheme::ulam, 48});
    Eigen::VectorXd mu0 = s.trip.mu(s.trip.begin);
    std::vector<double> lx, ly;
    for (long n : {64L, 128L, 256L, 512L}) {
        if (n >= long(blocks.L_of.size())) break;
        long elln = blocks.ell[std::size_t(blocks.L_of[std::size_t(n)])];
        double acc = 0.0;
        int mc = 3000;
        std::vector<double> sn, sl;
        for (int t = 0; t < mc; ++t) {
            double x = sample_mu_point(mu0, cells, rng);
            double a = 0.0;
            for (long k = 0; k < n; ++k) {
                if (k == elln) sl.push_back(a);
                a += std::cos(2.0 * M_PI * x);
                x = circle_orbit_step(s.fam.system, 0, x, rng);
            }
            if (elln == n) sl.push_back(a);
            sn.push_back(a);
        }
        double s2n = 0.0, s2l = 0.0;
        for (double v : sn) s2n += v * v;
        for (double v : sl) s2l += v * v;
        s2n = std::sqrt(s2n / mc);
        s2l = std::sqrt(s2l / mc);
        for (int t = 0; t < mc; ++t)
            acc += std::pow(std::abs(sn[std::size_t(t)] / s2n - sl[std::size_t(t)] / s2l), 4.0);
        double lp = std::pow(acc / mc, 0.25);
        if (lp > 1e-9) {
            lx.push_back(std::log(double(n)));
            ly.push_back(std::log(lp));
        }
    }
    REQUIRE(lx.size() >= 3);
    double slope = fit_line(lx, ly).slope;
    // one-sided envelope: no slower than the predicted gap exponent plus slack
    double eta = (sched.eps + blocks.growth.delta * sched.beta) / sched.beta;
    double zeta = std::max(sched.beta * sched.eps / (sched.beta - sched.eps),
                           (sched.eps) / (sched.beta - sched.eps));
    double predicted = eta + zeta - 0.5;
    CHECK(slope <= predicted + 0.25 * std::max(0.1, std::abs(predicted)));
}

TEST_SUITE_END();
