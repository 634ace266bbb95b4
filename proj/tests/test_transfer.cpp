#include <doctest.h>

#include <cmath>

#include "rdlab/environment.hpp"
#include "rdlab/errors.hpp"
#include "rdlab/transfer.hpp"

using namespace rdlab;

namespace {

CircleFamily doubling() { return make_circle_family(2, {{0.0, "none"}}); }

Discretization ulam(int res) { return {DiscScheme::ulam, res}; }

}  // namespace

TEST_SUITE_BEGIN("transfer");

TEST_CASE("full 2-shift with zero potential gives the all-ones matrix") {
    CircleFamily fam = make_sft_family({2}, {{{1, 1}, {1, 1}}});
    OperatorMatrix op = build_operator(fam, 0, zero_function(), {DiscScheme::cylinder, 2});
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) CHECK(op.entries(r, c).real() == doctest::Approx(1.0));
}

TEST_CASE("doubling Ulam operator against the direct preimage oracle") {
    // source cell j maps onto target cells 2j and 2j+1 (mod k); the midpoint
    // preimages give one weight exp(-log 2) per branch
    CircleFamily fam = doubling();
    int k = 16;
    OperatorMatrix op = build_operator(fam, 0, neg_log_deriv_potential(), ulam(k));
    for (int j = 0; j < k; ++j) {
        double colmass = 0.0;
        for (int t = 0; t < k; ++t) {
            double v = op.entries(t, j).real();
            colmass += v;
            bool expected = (t == (2 * j) % k) || (t == (2 * j + 1) % k);
            CHECK(v == doctest::Approx(expected ? 0.5 : 0.0).epsilon(1e-12));
        }
        CHECK(colmass == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("zero twist with no observable equals the plain build bit-for-bit") {
    CircleFamily fam = doubling();
    RandomFunction f = cosine_function();
    OperatorMatrix a = build_operator(fam, 0, neg_log_deriv_potential(), ulam(32));
    OperatorMatrix b = build_operator(fam, 0, neg_log_deriv_potential(), ulam(32), {0.0, 0.0}, &f);
    CHECK((a.entries - b.entries).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(build_operator(fam, 0, zero_function(), ulam(32), {0.0, 0.1}), ArgumentError);
}

TEST_CASE("plain operators have nonnegative entries; twisted ones are dominated") {
    CircleFamily fam = make_circle_family(2, {{0.02, "sin"}});
    RandomFunction f = cosine_function();
    OperatorMatrix plain = build_operator(fam, 0, neg_log_deriv_potential(), ulam(24));
    std::complex<double> z{0.03, 0.07};
    OperatorMatrix tw = build_operator(fam, 0, neg_log_deriv_potential(), ulam(24), z, &f);
    double fsup = 1.0;
    for (int r = 0; r < plain.rows(); ++r)
        for (int c = 0; c < plain.cols(); ++c) {
            CHECK(plain.entries(r, c).real() >= 0.0);
            CHECK(std::abs(tw.entries(r, c)) <=
                  std::exp(std::abs(z.real()) * fsup) * plain.entries(r, c).real() + 1e-12);
        }
}

TEST_CASE("compose: identity, ordering, and stochasticity") {
    CircleFamily fam = make_sft_family({2, 2}, {{{1, 1}, {1, 1}}, {{0, 1}, {1, 1}}});
    EnvironmentModel env = make_iid({0.5, 0.5}, 1);
    EnvPath path = sample_path(env, 0, 8, 3);
    // force a known two-state sequence
    path.states = {0, 1, 0, 1, 0, 1, 0, 1};
    CocycleWindow w = build_window(fam, path, zero_function(), {DiscScheme::cylinder, 2}, 0, 8);

    OperatorMatrix id = compose(w, 2, 0);
    CHECK(id.entries.isApprox(Eigen::MatrixXcd::Identity(2, 2)));

    // result must be B * A for A at index 0, B at index 1
    Eigen::MatrixXcd expect = w.op(1).entries * w.op(0).entries;
    CHECK(compose(w, 0, 2).entries.isApprox(expect));
    Eigen::MatrixXcd wrong = w.op(0).entries * w.op(1).entries;
    CHECK_FALSE(compose(w, 0, 2).entries.isApprox(wrong));

    CHECK_THROWS_AS(compose(w, 0, 9), ArgumentError);
}

TEST_CASE("normalize: explicit stochastic forms and honest residuals") {
    CircleFamily fam2 = make_sft_family({2}, {{{1, 1}, {1, 1}}});
    OperatorMatrix raw = build_operator(fam2, 0, zero_function(), {DiscScheme::cylinder, 2});
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(2);
    OperatorMatrix L = normalize(raw, 2.0, ones, ones);
    CHECK(L.normalized);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) CHECK(L.entries(r, c).real() == doctest::Approx(0.5));

    // doubling with the log-derivative potential is already stochastic
    CircleFamily fam = doubling();
    OperatorMatrix rawd = build_operator(fam, 0, neg_log_deriv_potential(), ulam(32));
    Eigen::VectorXd onesd = Eigen::VectorXd::Ones(32);
    OperatorMatrix Ld = normalize(rawd, 1.0, onesd, onesd);
    CHECK(l1_residual(Ld) <= 1e-10);
    CHECK((Ld.entries - rawd.entries).cwiseAbs().maxCoeff() <= 1e-15);

    // a 10% wrong lambda is reported, not silently repaired
    OperatorMatrix bad = normalize(rawd, 1.1, onesd, onesd);
    CHECK_FALSE(bad.normalized);
    CHECK(l1_residual(bad) == doctest::Approx(1.0 - 1.0 / 1.1).epsilon(1e-10));

    CHECK_THROWS_AS(normalize(rawd, -1.0, onesd, onesd), ArgumentError);
    Eigen::VectorXd negh = onesd;
    negh(0) = -1.0;
    CHECK_THROWS_AS(normalize(rawd, 1.0, negh, onesd), ArgumentError);
}

TEST_CASE("normalized window fixes constants at every length") {
    CircleFamily fam = make_circle_family(2, {{0.01, "sin"}, {0.0, "none"}});
    EnvironmentModel env = make_iid({0.5, 0.5}, 5);
    EnvPath path = sample_path(env, 0, 32, 9);
    CocycleWindow w = build_window(fam, path, neg_log_deriv_potential(), ulam(16), 0, 32);
    // crude per-op normalization with lambda = column mass of the constant
    CocycleWindow norm;
    norm.start_offset = 0;
    for (auto& opp : w.ops) {
        Eigen::VectorXd ones = Eigen::VectorXd::Ones(opp->cols());
        double lam = (opp->entries.real() * ones).mean();
        auto L = std::make_shared<OperatorMatrix>(
            normalize(*opp, lam, ones, (opp->entries.real() * ones) / lam));
        norm.ops.push_back(L);
    }
    OperatorMatrix prod = compose(norm, 0, 32);
    Eigen::VectorXcd img = prod.entries * Eigen::VectorXcd::Ones(16);
    for (int i = 0; i < img.size(); ++i) CHECK(std::abs(img(i) - 1.0) <= 1e-8);
}

TEST_CASE("duality residual: exact cases and a deliberate mismatch") {
    CircleFamily fam = doubling();
    int k = 32;
    Discretization disc = ulam(k);
    OperatorMatrix raw = build_operator(fam, 0, neg_log_deriv_potential(), disc);
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(k);
    OperatorMatrix L = normalize(raw, 1.0, ones, ones);
    Eigen::VectorXd leb = Eigen::VectorXd::Constant(k, 1.0 / k);

    CHECK(duality_residual(fam, 0, disc, L, leb, leb, ones, ones) <= 1e-12);

    Eigen::VectorXd ind = Eigen::VectorXd::Zero(k);
    ind(5) = 1.0;
    CHECK(duality_residual(fam, 0, disc, L, leb, leb, ones, ind) <= 1e-10);

    // non-equivariant measure: residual bounded away from zero, reported
    Eigen::VectorXd point = Eigen::VectorXd::Zero(k);
    point(0) = 1.0;
    double r = duality_residual(fam, 0, disc, L, leb, point, ones, ind);
    CHECK(r >= 1e-3);
    Eigen::VectorXd badmass = leb * 0.5;
    CHECK_THROWS_AS(duality_residual(fam, 0, disc, L, badmass, leb, ones, ind), ArgumentError);
}

TEST_CASE("perturbation bound vanishes at z = 0") {
    CircleFamily fam = doubling();
    EnvironmentModel env = make_iid({1.0}, 1);
    EnvPath path = sample_path(env, 0, 128, 1);
    PerturbationBound pb = perturbation_bound(fam, path, neg_log_deriv_potential(),
                                              cosine_function(), ulam(32), 64, 3, {0.0, 0.0});
    CHECK(pb.lhs_norm == doctest::Approx(0.0));
    CHECK(pb.rhs_bound == doctest::Approx(0.0));
}

TEST_CASE("oscillation sum matches the hand-evaluated geometric weights") {
    // constant expansion 2, n = 2: Q(f) = v (2^-2 + 2^-1) = 0.75 v
    CircleFamily fam = doubling();
    EnvironmentModel env = make_iid({1.0}, 1);
    EnvPath path = sample_path(env, 0, 128, 1);
    PerturbationBound pb = perturbation_bound(fam, path, zero_function(), cosine_function(),
                                              ulam(32), 64, 2, {0.0, 0.01});
    PathGeometry geo = path_geometry(fam, path, 64, 67);
    FieldNorms nm = field_norms(fam, 0, cosine_function(), 1.0, geo.xi[0], 8 * 32);
    CHECK(pb.q_f == doctest::Approx(0.75 * nm.seminorm).epsilon(1e-9));
    CHECK(pb.gamma_product == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("perturbation inequality holds for a twisted doubling cocycle") {
    CircleFamily fam = doubling();
    EnvironmentModel env = make_iid({1.0}, 1);
    EnvPath path = sample_path(env, 0, 128, 1);
    PerturbationBound pb = perturbation_bound(fam, path, neg_log_deriv_potential(),
                                              cosine_function(), ulam(48), 64, 3, {0.0, 0.01});
    CHECK(pb.lhs_norm > 0.0);
    CHECK(pb.lhs_norm <= pb.rhs_bound * 1.05);
}

TEST_SUITE_END();
