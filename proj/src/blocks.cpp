#include "rdlab/blocks.hpp"

#include <algorithm>
#include <cmath>

#include "rdlab/errors.hpp"
#include "rdlab/util.hpp"

namespace rdlab {

BlockSchedule build_schedule(double C1, double beta, double eps, double eps0, long j_max) {
    if (C1 < 1.0) throw ArgumentError("C1 must be >= 1");
    if (!(eps0 > 0.0 && eps0 < 0.17)) throw ArgumentError("eps0 must lie in (0, 0.17)");
    if (!(eps > 0.0 && eps < beta)) throw ArgumentError("need 0 < eps < beta, else the schedule diverges");
    if (j_max < 1) throw ArgumentError("j_max must be >= 1");

    BlockSchedule s;
    s.C1 = C1;
    s.beta = beta;
    s.eps = eps;
    s.eps0 = eps0;
    s.u0 = 2.0 / eps0 + 1.0;
    long double base = powl((long double)(s.u0 * C1), (long double)(1.0 / beta));
    s.C4 = double(base);
    s.C3 = double(base) - 1.0;
    double expo = beta / (beta - eps);
    s.A1 = 0.5 * std::pow((beta - eps) / beta, expo) * s.C3;
    s.A2 = std::pow(s.C4, expo);
    s.A1p = s.C3 * std::pow(s.A1, eps / beta);
    s.A2p = s.C4 * std::pow(s.A2, eps / beta);

    s.n_sizes.reserve(std::size_t(j_max));
    s.cum.reserve(std::size_t(j_max));
    long N = 0;
    s.sandwich_ok = true;
    for (long j = 1; j <= j_max; ++j) {
        long n;
        if (j == 1) n = long(floorl(base));
        else n = long(floorl(base * powl((long double)N, (long double)(eps / beta))));
        if (n < 1) n = 1;  // floor can only reach 0 through round-off; base > 1
        N += n;
        s.n_sizes.push_back(n);
        s.cum.push_back(N);
        double lo = s.A1 * std::pow(double(j), expo);
        double hi = s.A2 * std::pow(double(j), expo);
        if (double(N) < lo || double(N) > hi) {
            if (s.sandwich_ok) s.first_violation = j;
            s.sandwich_ok = false;
        }
    }
    return s;
}

VisitGrowthFit fit_visit_growth(const std::vector<long>& visit_indices) {
    VisitGrowthFit f;
    std::size_t n = visit_indices.size();
    if (n == 0) return f;
    // m_k <= E2 k^{1+eta0}: slope of log m_k against log k, envelope constant
    std::vector<double> lk, lm;
    for (std::size_t k = 0; k < n; ++k) {
        lk.push_back(std::log(double(k + 1)));
        lm.push_back(std::log(double(std::max<long>(1, visit_indices[k]))));
    }
    LineFit fit = fit_line(lk, lm);
    f.eta0 = std::max(0.0, fit.slope - 1.0);
    f.E2 = 1.0;
    for (std::size_t k = 0; k < n; ++k)
        f.E2 = std::max(f.E2, double(visit_indices[k]) / std::pow(double(k + 1), 1.0 + f.eta0));
    // gaps m_{k+1} - m_k <= E3 k^delta
    if (n >= 3) {
        std::vector<double> gk, gg;
        for (std::size_t k = 0; k + 1 < n; ++k) {
            gk.push_back(std::log(double(k + 1)));
            gg.push_back(std::log(double(std::max<long>(1, visit_indices[k + 1] - visit_indices[k]))));
        }
        f.delta = std::max(0.0, fit_line(gk, gg).slope);
    }
    f.E3 = 1.0;
    for (std::size_t k = 0; k + 1 < n; ++k)
        f.E3 = std::max(f.E3, double(visit_indices[k + 1] - visit_indices[k]) /
                                  std::pow(double(k + 1), f.delta));
    return f;
}

namespace {

// sampled ||Op - mu x 1||_alpha over trig test functions
double sampled_rank_one_distance(const Eigen::MatrixXd& op, const Eigen::VectorXd& mu,
                                 const CellGeometry& cells, double alpha, Rng& rng,
                                 int samples = 24) {
    double worst = 0.0;
    for (int t = 0; t < samples; ++t) {
        Eigen::VectorXd g(cells.count);
        double f1 = 1.0 + double(rng.uniform_index(4));
        double ph = rng.uniform(0.0, 1.0);
        double mix = rng.uniform(-1.0, 1.0);
        for (int i = 0; i < cells.count; ++i) {
            double x = cells.rep(i);
            g(i) = std::cos(2.0 * M_PI * (f1 * x + ph)) + mix * std::sin(2.0 * M_PI * x);
        }
        double ng = vector_alpha_norm(g.cast<std::complex<double>>(), cells, alpha, 1.0);
        if (ng <= 0.0) continue;
        Eigen::VectorXd dev = op * g - Eigen::VectorXd::Constant(op.rows(), mu.dot(g));
        worst = std::max(worst,
                         vector_alpha_norm(dev.cast<std::complex<double>>(), cells, alpha, 1.0) / ng);
    }
    return worst;
}

}  // namespace

InducedBlocks induce(const CocycleWindow& normalized, const RPFTriplet& trip,
                     const VisitRecord& visits, const BlockSchedule& sched,
                     const CellGeometry& cells, double alpha, double E4, double a_drift) {
    InducedBlocks out;
    out.origin = normalized.begin();
    out.eps0 = sched.eps0;

    // m_0 = 0 prepended; m_k from the record
    std::vector<long> m;
    m.push_back(0);
    for (long v : visits.visit_indices) m.push_back(v);

    long avail = normalized.end() - normalized.begin();
    long demand = sched.cum.back();
    if (demand + 1 > long(m.size()) || m[std::size_t(std::min<long>(demand, long(m.size()) - 1))] > avail)
        throw WindowError("schedule demand exceeds the visit record",
                          demand + 1 <= long(m.size()) ? m[std::size_t(demand)] : 4 * demand);

    out.ell.push_back(0);
    for (long Nj : sched.cum) {
        if (Nj >= long(m.size())) break;
        long lj = m[std::size_t(Nj)];
        if (out.origin + lj > normalized.end()) break;
        out.ell.push_back(lj);
    }
    if (out.ell.size() < 2)
        throw WindowError("no complete block fits the window", 4 * sched.cum.front());

    for (std::size_t j = 0; j + 1 < out.ell.size(); ++j) {
        OperatorMatrix A = compose(normalized, out.origin + out.ell[j],
                                   out.ell[j + 1] - out.ell[j]);
        out.block_ops.push_back(A.entries.real());
    }

    // L_n = max{k: ell_k <= n}
    long top = out.ell.back();
    out.L_of.assign(std::size_t(top + 1), 0);
    for (long n2 = 0; n2 <= top; ++n2) {
        long k = 0;
        while (k + 1 < long(out.ell.size()) && out.ell[std::size_t(k + 1)] <= n2) ++k;
        out.L_of[std::size_t(n2)] = k;
    }
    for (long n2 = 0; n2 < top; ++n2)
        out.max_L_gap = std::max(out.max_L_gap,
                                 int(out.L_of[std::size_t(n2 + 1)] - out.L_of[std::size_t(n2)]));

    out.growth = fit_visit_growth(visits.visit_indices);
    out.beta = sched.beta;
    out.eps = sched.eps;
    double beta = sched.beta, eps = sched.eps;
    double eta0 = out.growth.eta0, delta = out.growth.delta;
    out.Q1 = 0.5 * std::pow(out.growth.E2, -1.0 / (1.0 + eta0)) *
             std::pow(sched.A2, -(beta - eps) / beta);
    out.Q2 = std::pow(sched.A1, -(beta - eps) / beta);
    out.Q3 = std::pow(2.0, (eps + delta * beta) / (beta - eps)) * out.growth.E3 * sched.A2p *
             std::pow(sched.A2, delta);
    out.D3 = out.Q3 * std::pow(out.Q2, (eps + delta * beta) / (beta - eps));
    out.D4 = out.D3 * E4;
    (void)a_drift;

    double gap_expo = (eps + delta * beta) / beta;
    for (long n2 = 1; n2 <= top; ++n2) {
        double gap = double(n2 - out.ell[std::size_t(out.L_of[std::size_t(n2)])]);
        out.gap_envelope_worst = std::max(out.gap_envelope_worst,
                                          gap / (out.D3 * std::pow(double(n2), gap_expo)));
    }

    // eps0-contraction of each block and of short block powers
    Rng rng(23);
    std::size_t B = out.block_ops.size();
    for (std::size_t j = 0; j < B; ++j) {
        Eigen::VectorXd mu = trip.mu(out.origin + out.ell[j]);
        double d = sampled_rank_one_distance(out.block_ops[j], mu, cells, alpha, rng);
        out.worst_block_eps = std::max(out.worst_block_eps, d);
    }
    for (std::size_t j = 0; j < B; ++j) {
        Eigen::MatrixXd P = out.block_ops[j];
        Eigen::VectorXd mu = trip.mu(out.origin + out.ell[j]);
        for (std::size_t n2 = 1; n2 <= 5 && j + n2 <= B; ++n2) {
            if (n2 > 1) P = out.block_ops[j + n2 - 1] * P;
            double d = sampled_rank_one_distance(P, mu, cells, alpha, rng);
            out.worst_power_ratio = std::max(out.worst_power_ratio,
                                             d / std::pow(sched.eps0, double(n2)));
        }
    }
    return out;
}

double block_mean_birkhoff(const CircleFamily& fam, const EnvPath& path,
                           const RandomFunction& observable, const RPFTriplet& trip,
                           long abs_from, long abs_to) {
    if (fam.system.family != Family::circle)
        throw ArgumentError("orbit quadrature implemented for circle systems");
    Eigen::VectorXd mu = trip.mu(abs_from);
    int n = int(mu.size());
    double acc = 0.0;
    for (int c = 0; c < n; ++c) {
        double x = (double(c) + 0.5) / double(n);
        double s = 0.0;
        for (long k = abs_from; k < abs_to; ++k) {
            s += observable.eval(fam.system, path.at(k), x);
            x = circle_apply(fam.system, path.at(k), x);
        }
        acc += mu(c) * s;
    }
    return acc;
}

double sample_mu_point(const Eigen::VectorXd& mu, const CellGeometry& cells, Rng& rng) {
    double u = rng.uniform() * mu.sum();
    double accum = 0.0;
    int cell = int(mu.size()) - 1;
    for (int i = 0; i < mu.size(); ++i) {
        accum += mu(i);
        if (u < accum) { cell = i; break; }
    }
    return (double(cell) + rng.uniform()) / double(cells.count);
}

BlockTriplet block_triplet(const CircleFamily& fam, const EnvPath& path,
                           const RandomFunction& potential, const RandomFunction& observable,
                           const Discretization& disc, const RPFTriplet& trip,
                           const InducedBlocks& blocks, int J,
                           const std::vector<std::complex<double>>& z_grid_in,
                           double radius_lead) {
    const long B = long(blocks.block_ops.size());
    if (J < 1 || J >= B) throw ArgumentError("J must leave a plain tail of blocks");
    CellGeometry cells = make_cells(fam.system, disc);
    double alpha = fam.system.holder_alpha;

    BlockTriplet bt;

    // exponents from the fitted growth parameters; a = 0 and kappa = 0 since
    // per-state fields and expansions are uniformly bounded here
    double a_fit = 0.0, kappa_fit = 0.0;
    double beta = blocks.beta, eps = blocks.eps;
    double eta0 = blocks.growth.eta0, delta = blocks.growth.delta;
    bt.zeta1 = (beta * (a_fit * (1.0 + eta0) + delta) + eps) / (beta - eps);
    bt.zeta2 = (a_fit + kappa_fit) * beta * (1.0 + eta0) / (beta - eps);

    // measured constants: ||U_j||_inf <= E5 (j+1)^{zeta1} on a refined grid
    int refined = std::min(2048, 8 * cells.count);
    for (long j = 0; j < std::min<long>(B, J + 2); ++j) {
        double sup = 0.0;
        for (int i = 0; i < refined; ++i) {
            double x = double(i) / double(refined), acc = 0.0;
            for (long k = blocks.origin + blocks.ell[std::size_t(j)];
                 k < blocks.origin + blocks.ell[std::size_t(j + 1)]; ++k) {
                acc += observable.eval(fam.system, path.at(k), x);
                x = circle_apply(fam.system, path.at(k), x);
            }
            sup = std::max(sup, std::abs(acc));
        }
        bt.E5 = std::max(bt.E5, sup / std::pow(double(j + 1), bt.zeta1));
    }

    // twisted block builder: normalized twisted composition over block j
    auto twisted_block = [&](long j, std::complex<double> z) {
        long a = blocks.origin + blocks.ell[std::size_t(j)];
        long b = blocks.origin + blocks.ell[std::size_t(j + 1)];
        Eigen::MatrixXcd P;
        bool first = true;
        for (long i = a; i < b; ++i) {
            OperatorMatrix raw = build_operator(fam, path.at(i), potential, disc, z, &observable);
            OperatorMatrix L = normalize(raw, trip.lambdas[trip.pos(i)], trip.h[trip.pos(i)],
                                         trip.h[trip.pos(i) + 1]);
            P = first ? L.entries : (L.entries * P).eval();
            first = false;
        }
        return P;
    };

    // E9 from the measured twisted-vs-plain block distance at a probe twist
    {
        std::complex<double> zp(0.0, 0.01);
        Rng rng(41);
        for (long j = 0; j <= J; ++j) {
            Eigen::MatrixXcd D = twisted_block(j, zp) -
                                 blocks.block_ops[std::size_t(j)].cast<std::complex<double>>();
            double worst = 0.0;
            for (int t = 0; t < 16; ++t) {
                Eigen::VectorXcd g(cells.count);
                double f1 = 1.0 + double(rng.uniform_index(3));
                double ph = rng.uniform(0.0, 1.0);
                for (int i = 0; i < cells.count; ++i)
                    g(i) = std::cos(2.0 * M_PI * (f1 * cells.rep(i) + ph));
                double ng = vector_alpha_norm(g, cells, alpha, 1.0);
                if (ng <= 0.0) continue;
                worst = std::max(worst, vector_alpha_norm((D * g).eval(), cells, alpha, 1.0) / ng);
            }
            double denom = std::abs(zp) * std::exp(bt.E5 * std::abs(zp) * std::pow(double(j), bt.zeta1)) *
                           std::pow(double(j + 1), bt.zeta1 + bt.zeta2);
            bt.E9 = std::max(bt.E9, worst / denom);
        }
    }
    bt.delta_J = radius_lead * std::min(bt.E5 > 0 ? 1.0 / bt.E5 : 1e6,
                                        bt.E9 > 0 ? 1.0 / bt.E9 : 1e6) *
                 std::pow(double(J + 1), -(bt.zeta1 + bt.zeta2));

    std::vector<std::complex<double>> z_grid = z_grid_in;
    if (z_grid.empty()) {
        z_grid.push_back({0.0, 0.0});
        for (int k = 0; k < 8; ++k) {
            double th = 2.0 * M_PI * double(k) / 8.0;
            z_grid.push_back(0.5 * bt.delta_J * std::complex<double>(std::cos(th), std::sin(th)));
        }
    }
    for (auto z : z_grid)
        if (std::abs(z) > bt.delta_J + 1e-15)
            throw ArgumentError("z-grid point outside the verified domain V_J");
    bt.z_grid = z_grid;

    // per z: exact backward (nu, lambda) sweep anchored in the plain tail,
    // forward h sweep from h_0 = 1
    Eigen::VectorXd mu_end = trip.mu(blocks.origin + blocks.ell.back());
    for (auto z : z_grid) {
        std::vector<Eigen::MatrixXcd> A;
        A.resize(std::size_t(B));
        for (long j = 0; j < B; ++j)
            A[std::size_t(j)] = (j <= J && z != std::complex<double>(0.0, 0.0))
                                    ? twisted_block(j, z)
                                    : blocks.block_ops[std::size_t(j)].cast<std::complex<double>>();
        std::vector<Eigen::VectorXcd> nu;
        nu.resize(std::size_t(B + 1));
        std::vector<std::complex<double>> lam;
        lam.resize(std::size_t(B));
        nu[std::size_t(B)] = mu_end.cast<std::complex<double>>();
        for (long j = B - 1; j >= 0; --j) {
            Eigen::VectorXcd w = A[std::size_t(j)].transpose() * nu[std::size_t(j + 1)];
            std::complex<double> l = w.sum();  // nu_{j+1}(A_j 1)
            if (std::abs(l) < 1e-300) throw ConvergenceError("block sweep lost mass", 1.0);
            lam[std::size_t(j)] = l;
            nu[std::size_t(j)] = w / l;
        }
        std::vector<Eigen::VectorXcd> h;
        h.resize(std::size_t(B + 1));
        h[0] = Eigen::VectorXcd::Ones(cells.count);
        for (long j = 0; j < B; ++j)
            h[std::size_t(j + 1)] = A[std::size_t(j)] * h[std::size_t(j)] / lam[std::size_t(j)];

        double r1 = 0.0, rh = 0.0;
        for (long j = 0; j <= B; ++j) {
            r1 = std::max(r1, std::abs(nu[std::size_t(j)].sum() - 1.0));
            rh = std::max(rh, std::abs(nu[std::size_t(j)].dot(h[std::size_t(j)].conjugate()) - 1.0));
        }
        bt.res_nu_one.push_back(r1);
        bt.res_nu_h.push_back(rh);
        bt.lambdas.push_back(lam);
        if (z == std::complex<double>(0.0, 0.0)) {
            for (long j = 0; j < B; ++j) {
                bt.z0_lambda_dev = std::max(bt.z0_lambda_dev, std::abs(lam[std::size_t(j)] - 1.0));
                Eigen::VectorXcd hd = h[std::size_t(j)].array() - 1.0;
                bt.z0_h_dev = std::max(bt.z0_h_dev, hd.cwiseAbs().maxCoeff());
                Eigen::VectorXcd nd = nu[std::size_t(j)] -
                                      trip.mu(blocks.origin + blocks.ell[std::size_t(j)])
                                          .cast<std::complex<double>>();
                bt.z0_nu_dev = std::max(bt.z0_nu_dev, nd.cwiseAbs().maxCoeff());
            }
        }
        std::vector<std::complex<double>> h0row;
        for (int i = 0; i < std::min(4, cells.count); ++i) h0row.push_back(h[1](i));
        bt.h0_values.push_back(h0row);

        // rank-one decay of the joined cocycle at this z (checked at the
        // largest grid modulus and at 0)
        if (std::abs(z) == 0.0 || std::abs(std::abs(z) - bt.delta_J * 0.5) < 1e-12) {
            Rng rng(51);
            std::vector<double> logs;
            std::vector<double> xs;
            Eigen::MatrixXcd P;
            std::complex<double> lprod(1.0, 0.0);
            long nmax = std::min<long>(8, B);
            for (long n2 = 1; n2 <= nmax; ++n2) {
                P = n2 == 1 ? A[0] : (A[std::size_t(n2 - 1)] * P).eval();
                lprod *= lam[std::size_t(n2 - 1)];
                double worst = 0.0;
                for (int t = 0; t < 16; ++t) {
                    Eigen::VectorXcd g(cells.count);
                    double f1 = 1.0 + double(rng.uniform_index(3));
                    double ph = rng.uniform(0.0, 1.0);
                    for (int i = 0; i < cells.count; ++i)
                        g(i) = std::cos(2.0 * M_PI * (f1 * cells.rep(i) + ph));
                    double ng = vector_alpha_norm(g, cells, alpha, 1.0);
                    if (ng <= 0.0) continue;
                    std::complex<double> nug = nu[0].dot(g.conjugate());
                    Eigen::VectorXcd dev = P * g / lprod - nug * h[std::size_t(n2)];
                    worst = std::max(worst, vector_alpha_norm(dev, cells, alpha, 1.0) / ng);
                }
                if (worst > 1e-300) {
                    logs.push_back(std::log(worst));
                    xs.push_back(double(n2));
                }
                bt.R0_fit = std::max(bt.R0_fit, worst / std::pow(2.0 * blocks.eps0, double(n2)));
            }
            if (xs.size() >= 3) {
                double ratio = std::exp(fit_line(xs, logs).slope);
                bt.decay_ratio = std::max(bt.decay_ratio, ratio);
            }
        }
    }
    return bt;
}

MomentBound moment_bound_check(const CircleFamily& fam, const EnvPath& path,
                               const RandomFunction& observable, const RPFTriplet& trip,
                               long j_abs, int n, double p, double CE12, double zeta,
                               int mc_samples, std::uint64_t seed) {
    if (fam.system.family != Family::circle)
        throw ArgumentError("orbit sampling implemented for circle systems");
    if (p <= 2.0) throw ArgumentError("p must exceed 2");
    Eigen::VectorXd mu = trip.mu(j_abs);
    CellGeometry cells;
    cells.circle = true;
    cells.count = int(mu.size());

    const int n_chunks = 64;
    int per = (mc_samples + n_chunks - 1) / n_chunks;
    struct Acc {
        double sum = 0.0;
        std::vector<double> vals;
    };
    std::function<Acc(std::size_t)> job = [&](std::size_t chunk) {
        Acc a;
        Rng rng(mix_seed(seed, chunk));
        for (int t = 0; t < per; ++t) {
            if (long(chunk) * per + t >= mc_samples) break;
            double x = sample_mu_point(mu, cells, rng);
            double s = 0.0;
            for (long k = j_abs; k < j_abs + n; ++k) {
                s += observable.eval(fam.system, path.at(k), x);
                x = circle_orbit_step(fam.system, path.at(k), x, rng);
            }
            a.sum += s;
            a.vals.push_back(s);
        }
        return a;
    };
    auto accs = chunked_map<Acc>(n_chunks, job, default_thread_count());
    double mean = 0.0;
    long cnt = 0;
    for (const auto& a : accs) { mean += a.sum; cnt += long(a.vals.size()); }
    mean /= double(cnt);
    double mp = 0.0, mp2 = 0.0;
    for (const auto& a : accs)
        for (double v : a.vals) {
            double e = std::pow(std::abs(v - mean), p);
            mp += e;
            mp2 += e * e;
        }
    mp /= double(cnt);
    mp2 /= double(cnt);
    MomentBound out;
    out.lhs = std::pow(mp, 1.0 / p);
    double se_mp = std::sqrt(std::max(0.0, mp2 - mp * mp) / double(cnt));
    out.rel_se = mp > 0.0 ? se_mp / (p * mp) : 0.0;  // delta method on x^{1/p}
    out.stable = out.rel_se <= 0.20;
    out.rhs = CE12 * std::pow(double(j_abs - trip.begin + n), zeta) * std::sqrt(double(n));
    return out;
}

}  // namespace rdlab
