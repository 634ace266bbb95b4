#include "rdlab/rpf.hpp"

#include <algorithm>
#include <cmath>

#include "rdlab/errors.hpp"
#include "rdlab/util.hpp"

namespace rdlab {

RPFTriplet solve_triplet(const CocycleWindow& window, long burn_in, double tol) {
    long len = window.end() - window.begin();
    if (len < 2 * burn_in + 1)
        throw ArgumentError("window must cover 2*burn_in plus a reporting range");
    for (const auto& op : window.ops)
        if (op->twist != std::complex<double>(0.0, 0.0))
            throw ArgumentError("triplet solves require untwisted operators");

    long rb = window.begin() + burn_in;
    long re = window.end() - burn_in;

    // A single sweep is exactly equivariant whatever its seed, so the honest
    // convergence measure is the dependence on the seed: every sweep runs from
    // two seeds and the residual is their distance at the reported indices.

    // adjoint pullback from the far end: nu_i for all i, trusted for i <= re
    std::vector<Eigen::VectorXd> nu_all(std::size_t(len + 1)), nu_alt(std::size_t(len + 1));
    {
        int dim = window.op(window.end() - 1).rows();
        Eigen::VectorXd u = Eigen::VectorXd::Constant(dim, 1.0 / double(dim));
        Eigen::VectorXd u2(dim);
        for (int c = 0; c < dim; ++c) u2(c) = (c % 2 == 0) ? 1.5 : 0.5;
        u2 /= u2.sum();
        nu_all[std::size_t(len)] = u;
        nu_alt[std::size_t(len)] = u2;
        for (long i = window.end() - 1; i >= window.begin(); --i) {
            auto step = [&](Eigen::VectorXd& v) {
                v = (window.op(i).entries.real().transpose() * v).eval();
                double mass = v.sum();
                if (!(mass > 0.0)) throw ConvergenceError("adjoint iteration lost mass", 1.0);
                v /= mass;
            };
            step(u);
            step(u2);
            nu_all[std::size_t(i - window.begin())] = u;
            nu_alt[std::size_t(i - window.begin())] = u2;
        }
    }

    // forward pullback of 1 with sup normalization: h_i for i >= rb
    RPFTriplet trip;
    trip.begin = rb;
    std::vector<Eigen::VectorXd> h_all(std::size_t(re - rb + 1)), h_alt(std::size_t(re - rb + 1));
    {
        int dim0 = window.op(window.begin()).cols();
        Eigen::VectorXd v = Eigen::VectorXd::Ones(dim0);
        Eigen::VectorXd v2(dim0);
        for (int c = 0; c < dim0; ++c) v2(c) = (c % 2 == 0) ? 1.8 : 0.6;
        for (long i = window.begin(); i <= re; ++i) {
            if (i >= rb) {
                const Eigen::VectorXd& nui = nu_all[std::size_t(i - window.begin())];
                double scale = nui.dot(v), scale2 = nui.dot(v2);
                if (!(scale > 0.0) || !(scale2 > 0.0))
                    throw ConvergenceError("pullback lost positivity", 1.0);
                h_all[std::size_t(i - rb)] = v / scale;
                h_alt[std::size_t(i - rb)] = v2 / scale2;
            }
            if (i < re) {
                auto step = [&](Eigen::VectorXd& w) {
                    w = (window.op(i).entries.real() * w).eval();
                    double sup = w.maxCoeff();
                    if (!(sup > 0.0)) throw ConvergenceError("pullback lost positivity", 1.0);
                    w /= sup;
                };
                step(v);
                step(v2);
            }
        }
    }

    // h/nu live on [rb, re], lambda and the residuals on [rb, re)
    for (long i = rb; i <= re; ++i) {
        trip.h.push_back(h_all[std::size_t(i - rb)]);
        trip.nu.push_back(nu_all[std::size_t(i - window.begin())]);
    }
    double worst = 0.0;
    for (long i = rb; i < re; ++i) {
        const Eigen::VectorXd& hi = trip.h[std::size_t(i - rb)];
        const Eigen::VectorXd& nui = trip.nu[std::size_t(i - rb)];
        const Eigen::VectorXd& nunext = trip.nu[std::size_t(i + 1 - rb)];
        Eigen::VectorXd img = window.op(i).entries.real() * hi;
        double lam = nunext.dot(img) / nui.dot(hi);
        double eig = (hi - h_alt[std::size_t(i - rb)]).cwiseAbs().maxCoeff() /
                     hi.cwiseAbs().maxCoeff();
        double dual = (nui - nu_alt[std::size_t(i - window.begin())]).cwiseAbs().sum();
        trip.lambdas.push_back(lam);
        trip.eigen_residual.push_back(eig);
        trip.dual_residual.push_back(dual);
        trip.normalization_residual.push_back(std::abs(nui.dot(hi) - 1.0));
        worst = std::max({worst, eig, dual});
    }

    if (worst > tol)
        throw ConvergenceError("triplet eigen residual above tolerance after burn-in", worst);
    return trip;
}

CocycleWindow normalized_window(const CocycleWindow& plain, const RPFTriplet& trip) {
    CocycleWindow out;
    out.start_offset = trip.begin;
    for (long i = trip.begin; i + 1 < trip.begin + long(trip.h.size()); ++i) {
        auto op = std::make_shared<OperatorMatrix>(
            normalize(plain.op(i), trip.lambdas[trip.pos(i)], trip.h[trip.pos(i)],
                      trip.h[trip.pos(i) + 1]));
        op->fiber_index = i;
        out.ops.push_back(std::move(op));
    }
    return out;
}

NormalizedPotential normalized_potential(const RPFTriplet& trip, const CircleFamily& fam,
                                         const EnvPath& path, const RandomFunction& phi,
                                         const Discretization& disc, double s,
                                         double residual_tol) {
    for (double r : trip.eigen_residual)
        if (r > residual_tol)
            throw PreconditionError("triplet residuals above tolerance for potential normalization");
    for (const auto& hv : trip.h)
        if (hv.minCoeff() <= 0.0) throw ArgumentError("nonpositive h");

    const FiberedSystem& sys = fam.system;
    double alpha = sys.holder_alpha;
    CellGeometry cells = make_cells(sys, disc);

    {
        bool any = false;
        for (const auto& g : fam.geometry) any = any || g.gamma > 1.0;
        if (!any) throw TruncationError("oscillation series cannot be truncated: no expansion");
    }

    long rb = trip.begin;
    long re = trip.begin + long(trip.lambdas.size());  // lambda range; h extends one past

    // per-state data
    std::vector<double> stateH(std::size_t(sys.state_count));
    for (int st = 0; st < sys.state_count; ++st) {
        FieldNorms nm = field_norms(fam, st, phi, alpha, 1.0);
        stateH[std::size_t(st)] = std::max(1.0, nm.sup + nm.seminorm);
    }
    auto gamma_at = [&](long i) { return fam.geometry[std::size_t(path.at(i))].gamma; };
    auto H_at = [&](long i) { return stateH[std::size_t(path.at(i))]; };
    auto N_at = [&](long i) { return fam.geometry[std::size_t(path.at(i))].holder_bound; };

    // forward recursions Q_{i+1} = gamma_i^-a (H_i + Q_i) seeded at the path
    // start; the seed error decays with the same product that must fall below
    // 1e-12 before the reported range
    long p0 = path.begin();
    double decay_to_rb = 1.0;
    for (long i = p0; i < rb; ++i) decay_to_rb *= std::pow(gamma_at(i), -alpha);
    if (decay_to_rb > 1e-10)
        throw WindowError("not enough backlog to truncate the oscillation series", rb - p0 + 512);

    std::vector<double> Qarr(std::size_t(re - p0 + 1), 0.0);
    for (long i = p0; i < re; ++i)
        Qarr[std::size_t(i - p0 + 1)] =
            std::pow(gamma_at(i), -alpha) * (H_at(i) + Qarr[std::size_t(i - p0)]);
    std::vector<double> Ht(std::size_t(re - p0), 0.0);
    for (long i = p0; i < re; ++i)
        Ht[std::size_t(i - p0)] = H_at(i) + s * Qarr[std::size_t(i - p0)] +
                                  s * Qarr[std::size_t(i - p0 + 1)] * N_at(i);
    std::vector<double> Qt(std::size_t(re - p0 + 1), 0.0);
    for (long i = p0; i < re; ++i)
        Qt[std::size_t(i - p0 + 1)] =
            std::pow(gamma_at(i), -alpha) * (Ht[std::size_t(i - p0)] + Qt[std::size_t(i - p0)]);

    NormalizedPotential np;
    np.begin = rb;
    np.s = s;
    for (long i = rb; i < re; ++i) {
        const Eigen::VectorXd& hi = trip.h[trip.pos(i)];
        const Eigen::VectorXd& hnext = trip.h[trip.pos(i) + 1];
        double lam = trip.lambdas[trip.pos(i)];
        int st = path.at(i);
        Eigen::VectorXd pt(cells.count);
        for (int c = 0; c < cells.count; ++c) {
            double rep = cells.rep(c);
            double hc;
            if (sys.family == Family::circle) {
                double img = circle_apply(sys, st, rep);
                hc = hnext(cells.cell_of(img));
                pt(c) = phi.eval(sys, st, rep) + std::log(hi(c)) - std::log(hc) + std::log(lam);
            } else {
                const auto& A = sys.sft_matrices[std::size_t(st)];
                int succ = 0;
                for (int b = 0; b < cells.count; ++b)
                    if (A[std::size_t(c)][std::size_t(b)]) { succ = b; break; }
                hc = hnext(succ);
                pt(c) = phi.eval_symbol(sys, st, c) + std::log(hi(c)) - std::log(hc) + std::log(lam);
            }
        }
        np.phi_tilde.push_back(pt);
        np.H.push_back(H_at(i));
        np.Q.push_back(Qarr[std::size_t(i - p0)]);
        np.H_tilde.push_back(Ht[std::size_t(i - p0)]);
        np.Q_tilde.push_back(Qt[std::size_t(i - p0)]);
        OperatorMatrix plain = build_operator(fam, st, phi, disc);
        OperatorMatrix L = normalize(plain, lam, hi, hnext);
        np.branch_residual.push_back(l1_residual(L));
    }
    return np;
}

DecayReport decay_rate(const CocycleWindow& normalized, const RPFTriplet& trip,
                       const std::vector<std::pair<std::string, Eigen::VectorXd>>& tests,
                       int n_max, double alpha, const CellGeometry& cells) {
    if (tests.empty()) throw ArgumentError("no test functions");
    long from = normalized.begin();
    if (from + n_max > normalized.end())
        throw ArgumentError("n_max exceeds the normalized window");

    DecayReport rep;
    rep.ns.resize(std::size_t(n_max));
    rep.decay.assign(std::size_t(n_max), 0.0);
    for (int n = 1; n <= n_max; ++n) rep.ns[std::size_t(n - 1)] = n;

    Eigen::VectorXd mu0 = trip.mu(from);
    for (const auto& [label, g] : tests) {
        rep.test_labels.push_back(label);
        double gnorm = vector_alpha_norm(g.cast<std::complex<double>>(), cells, alpha, 1.0);
        if (gnorm <= 0.0) gnorm = 1.0;
        double mean = mu0.dot(g);
        Eigen::VectorXd v = g;
        for (int n = 1; n <= n_max; ++n) {
            v = (normalized.op(from + n - 1).entries.real() * v).eval();
            double dev = (v.array() - mean).abs().maxCoeff();
            rep.decay[std::size_t(n - 1)] = std::max(rep.decay[std::size_t(n - 1)], dev / gnorm);
        }
    }

    // quenched correlations of the first pair against the fitted envelope
    {
        const Eigen::VectorXd& f = tests[0].second;
        const Eigen::VectorXd& g2 = tests.size() > 1 ? tests[1].second : tests[0].second;
        Eigen::VectorXd fbar = f.array() - mu0.dot(f);
        double fnorm = vector_alpha_norm(f.cast<std::complex<double>>(), cells, alpha, 1.0);
        Eigen::VectorXd v = fbar;
        for (int n = 1; n <= n_max; ++n) {
            v = (normalized.op(from + n - 1).entries.real() * v).eval();
            Eigen::VectorXd mun = trip.mu(from + n);
            rep.corr.push_back(std::abs(mun.dot(v.cwiseProduct(g2))));
            rep.corr_envelope.push_back(mun.dot(g2.cwiseAbs()) * fnorm);  // scaled later by R n^-beta
        }
    }

    // fits on the last half of the above-floor segment
    const double floor_lvl = 1e-14;
    int valid = 0;
    while (valid < n_max && rep.decay[std::size_t(valid)] > floor_lvl) ++valid;
    rep.valid_count = valid;
    int lo = valid / 2, hi = valid;
    if (hi - lo >= 3) {
        std::vector<double> xs_n, xs_logn, ys;
        for (int i = lo; i < hi; ++i) {
            xs_n.push_back(double(rep.ns[std::size_t(i)]));
            xs_logn.push_back(std::log(double(rep.ns[std::size_t(i)])));
            ys.push_back(std::log(rep.decay[std::size_t(i)]));
        }
        LineFit fe = fit_line(xs_n, ys);
        LineFit fp = fit_line(xs_logn, ys);
        rep.exp_rate = fe.slope;
        rep.poly_rate = fp.slope;
        rep.exp_rss = fe.rss;
        rep.poly_rss = fp.rss;
        if (fe.rss < 0.64 * fp.rss) rep.regime = "exponential";
        else if (fp.rss < 0.64 * fe.rss) rep.regime = "polynomial";
        else rep.regime = "indeterminate";
    } else {
        rep.regime = "indeterminate";
    }

    rep.beta_fit = std::max(0.0, -rep.poly_rate);
    double runmax_mid = 0.0, runmax_end = 0.0;
    for (int i = 0; i < valid; ++i) {
        double v = std::pow(double(rep.ns[std::size_t(i)]), rep.beta_fit) * rep.decay[std::size_t(i)];
        if (i < (valid + 1) / 2) runmax_mid = std::max(runmax_mid, v);
        runmax_end = std::max(runmax_end, v);
    }
    rep.envelope_R = runmax_end;
    rep.envelope_stable = valid >= 4 && runmax_end <= 1.10 * runmax_mid;
    for (std::size_t i = 0; i < rep.corr_envelope.size(); ++i)
        rep.corr_envelope[i] *= rep.envelope_R * std::pow(double(i + 1), -rep.beta_fit);
    return rep;
}

}  // namespace rdlab
