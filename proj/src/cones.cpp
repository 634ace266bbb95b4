#include "rdlab/cones.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rdlab/errors.hpp"
#include "rdlab/util.hpp"

namespace rdlab {

namespace {

constexpr double INF = std::numeric_limits<double>::infinity();

// unordered constraint pairs at distance <= r_cap; all pairs up to 64 cells,
// local plus strided subsample above (same policy as the seminorm)
std::vector<std::pair<int, int>> constraint_pairs(const CellGeometry& cells, double r_cap) {
    std::vector<std::pair<int, int>> out;
    int n = cells.count;
    auto keep = [&](int i, int j) {
        double d = cells.dist(i, j);
        if (d > 0.0 && d <= r_cap) out.emplace_back(i, j);
    };
    if (n <= 64) {
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) keep(i, j);
        return out;
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j <= std::min(n - 1, i + 8); ++j) keep(i, j);
    int stride = (n + 47) / 48;
    for (int i = 0; i < n; i += stride)
        for (int j = i + stride; j < n; j += stride) keep(i, j);
    return out;
}

double seminorm(const Eigen::VectorXd& v, const CellGeometry& cells, double alpha,
                double r_cap) {
    return vector_holder_seminorm(v.cast<std::complex<double>>(), cells, alpha, r_cap);
}

}  // namespace

Membership cone_membership(const Eigen::VectorXd& g, const ConeSpec& cone,
                           const CellGeometry& cells) {
    Membership m;
    double gmin = g.minCoeff(), gmax = g.maxCoeff();
    switch (cone.kind) {
        case ConeKind::orthant: {
            m.member = gmin > 0.0;
            m.margin = gmax > 0.0 ? gmin / gmax : -1.0;
            if (!m.member) m.violated = "positivity";
            return m;
        }
        case ConeKind::log_oscillation: {
            if (gmin <= 0.0) {
                m.member = false;
                m.margin = -1.0;
                m.violated = "positivity";
                return m;
            }
            Eigen::VectorXd lg = g.array().log();
            double attained = seminorm(lg, cells, cone.alpha, cone.xi);
            double bound = cone.s * cone.Q;
            m.member = attained <= bound;
            m.margin = bound > 0.0 ? (bound - attained) / bound : (attained == 0.0 ? 0.0 : -1.0);
            if (!m.member) m.violated = "log-oscillation exceeds s*Q";
            return m;
        }
        case ConeKind::kappa: {
            if (gmin < 0.0) {
                m.member = false;
                m.margin = -1.0;
                m.violated = "nonnegativity";
                return m;
            }
            double attained = seminorm(g, cells, cone.alpha, 1.0);
            double bound = cone.kappa * gmin;
            m.member = attained <= bound;
            m.margin = bound > 0.0 ? (bound - attained) / bound : (attained == 0.0 ? 0.0 : -1.0);
            if (!m.member) m.violated = "oscillation exceeds kappa * inf";
            return m;
        }
        case ConeKind::bounded_ratio: {
            if (gmin < 0.0) {
                m.member = false;
                m.margin = -1.0;
                m.violated = "nonnegativity";
                return m;
            }
            double bound = cone.C * gmin;
            m.member = gmax <= bound;
            m.margin = bound > 0.0 ? (bound - gmax) / bound : (gmax == 0.0 ? 0.0 : -1.0);
            if (!m.member) m.violated = "sup exceeds C * inf";
            return m;
        }
    }
    return m;
}

namespace {

// feasible-t interval endpoints for the log-oscillation cone, by exact ratio
// enumeration; returns sup{t: f - t g in C}
double log_osc_alpha_sup(const Eigen::VectorXd& f, const Eigen::VectorXd& g,
                         const ConeSpec& cone, const CellGeometry& cells) {
    double hi = INF, lo = -INF;
    for (int i = 0; i < g.size(); ++i) hi = std::min(hi, f(i) / g(i));
    for (auto [i, j] : constraint_pairs(cells, cone.xi)) {
        double w = std::exp(cone.s * cone.Q * std::pow(cells.dist(i, j), cone.alpha));
        // both orientations of (x, y)
        for (int o = 0; o < 2; ++o) {
            int x = o ? j : i, y = o ? i : j;
            double coef = w * g(y) - g(x);
            double rhs = w * f(y) - f(x);
            if (coef > 0.0) hi = std::min(hi, rhs / coef);
            else if (coef < 0.0) lo = std::max(lo, rhs / coef);
            else if (rhs < 0.0) return -INF;  // infeasible for every t
        }
    }
    return lo <= hi ? hi : -INF;
}

double log_osc_beta_inf(const Eigen::VectorXd& f, const Eigen::VectorXd& g,
                        const ConeSpec& cone, const CellGeometry& cells) {
    double lo = -INF, hi = INF;
    for (int i = 0; i < g.size(); ++i) lo = std::max(lo, f(i) / g(i));
    for (auto [i, j] : constraint_pairs(cells, cone.xi)) {
        double w = std::exp(cone.s * cone.Q * std::pow(cells.dist(i, j), cone.alpha));
        for (int o = 0; o < 2; ++o) {
            int x = o ? j : i, y = o ? i : j;
            double coef = g(x) - w * g(y);
            double rhs = f(x) - w * f(y);
            if (coef > 0.0) hi = std::min(hi, rhs / coef);
            else if (coef < 0.0) lo = std::max(lo, rhs / coef);
            else if (rhs > 0.0) return INF;
        }
    }
    return lo <= hi ? lo : INF;
}

// bisection on the membership interval (kappa / bounded-ratio cones)
double bisect_alpha_sup(const Eigen::VectorXd& f, const Eigen::VectorXd& g,
                        const ConeSpec& cone, const CellGeometry& cells) {
    double hi = INF;
    for (int i = 0; i < g.size(); ++i)
        if (g(i) > 0.0) hi = std::min(hi, f(i) / g(i));
    if (!std::isfinite(hi)) return 0.0;
    if (cone_membership(f - hi * g, cone, cells).member) return hi;
    double lo = 0.0;
    for (int it = 0; it < 120; ++it) {
        double mid = 0.5 * (lo + hi);
        if (cone_membership(f - mid * g, cone, cells).member) lo = mid;
        else hi = mid;
    }
    return lo;
}

double bisect_beta_inf(const Eigen::VectorXd& f, const Eigen::VectorXd& g,
                       const ConeSpec& cone, const CellGeometry& cells) {
    double lo = 0.0;
    for (int i = 0; i < g.size(); ++i)
        if (g(i) > 0.0) lo = std::max(lo, f(i) / g(i));
    if (cone_membership(lo * g - f, cone, cells).member) return lo;
    double hi = std::max(1.0, 2.0 * lo);
    while (!cone_membership(hi * g - f, cone, cells).member) {
        hi *= 2.0;
        if (hi > 1e14) return INF;
    }
    for (int it = 0; it < 120; ++it) {
        double mid = 0.5 * (lo + hi);
        if (cone_membership(mid * g - f, cone, cells).member) hi = mid;
        else lo = mid;
    }
    return hi;
}

}  // namespace

double hilbert_metric(const Eigen::VectorXd& f, const Eigen::VectorXd& g,
                      const ConeSpec& cone, const CellGeometry& cells) {
    Membership mf = cone_membership(f, cone, cells);
    if (!mf.member) throw MembershipError("first argument not in cone: " + mf.violated);
    Membership mg = cone_membership(g, cone, cells);
    if (!mg.member) throw MembershipError("second argument not in cone: " + mg.violated);

    if (cone.kind == ConeKind::orthant) {
        double rmin = INF, rmax = 0.0;
        for (int i = 0; i < f.size(); ++i) {
            double r = f(i) / g(i);
            rmin = std::min(rmin, r);
            rmax = std::max(rmax, r);
        }
        return std::log(rmax / rmin);
    }
    double a, b;
    if (cone.kind == ConeKind::log_oscillation) {
        a = log_osc_alpha_sup(f, g, cone, cells);
        b = log_osc_beta_inf(f, g, cone, cells);
    } else {
        a = bisect_alpha_sup(f, g, cone, cells);
        b = bisect_beta_inf(f, g, cone, cells);
    }
    if (!(a > 0.0) || !std::isfinite(b)) return INF;
    double d = std::log(b / a);
    return d < 0.0 ? 0.0 : d;  // clip bisection round-off on proportional pairs
}

double orthant_image_diameter(const Eigen::MatrixXd& A) {
    if (A.minCoeff() <= 0.0)
        throw ArgumentError("image diameter formula needs strictly positive entries");
    int n = int(A.cols());
    double diam = 0.0;
    for (int k = 0; k < n; ++k)
        for (int l = k + 1; l < n; ++l) {
            double rmax = 0.0, rmin = INF;
            for (int i = 0; i < A.rows(); ++i) {
                double r = A(i, k) / A(i, l);
                rmax = std::max(rmax, r);
                rmin = std::min(rmin, r);
            }
            diam = std::max(diam, std::log(rmax / rmin));
        }
    return diam;
}

Decomposition decompose(const Eigen::VectorXd& g, const ConeSpec& cone,
                        const CellGeometry& cells) {
    if (cone.kind != ConeKind::log_oscillation)
        throw ArgumentError("decomposition is defined for the log-oscillation cone");
    Decomposition out;
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(g.size());
    out.parts = {zero, zero, zero, zero};
    double sq = cone.s * cone.Q;
    double gnorm = vector_alpha_norm(g.cast<std::complex<double>>(), cells, cone.alpha, 1.0);
    out.norm_bound = 12.0 / cone.xi * (1.0 + 4.0 / sq) * gnorm;
    if (gnorm == 0.0) return out;

    auto norm_of = [&](const Eigen::VectorXd& v) {
        return vector_alpha_norm(v.cast<std::complex<double>>(), cells, cone.alpha, 1.0);
    };
    if (cone_membership(g, cone, cells).member) {
        out.parts[0] = g;
        out.norm_sum = norm_of(g);
        return out;
    }
    if (cone_membership(-g, cone, cells).member) {
        out.parts[1] = g;
        out.norm_sum = norm_of(g);
        return out;
    }
    // shift: g + R is a member once R >= ||g||_inf + v(g)/(sQ)
    double v = seminorm(g, cells, cone.alpha, cone.xi);
    double R = g.cwiseAbs().maxCoeff() + v / sq;
    out.parts[0] = g.array() + R;
    out.parts[1] = Eigen::VectorXd::Constant(g.size(), -R);
    out.norm_sum = norm_of(out.parts[0]) + R;
    return out;
}

namespace {

// pseudo-random members of a log-oscillation cone: exponentials of trig noise
// scaled to an 0.8 margin, plus the constant function
std::vector<Eigen::VectorXd> sample_members(const ConeSpec& cone, const CellGeometry& cells,
                                            int count, Rng& rng) {
    std::vector<Eigen::VectorXd> out;
    out.push_back(Eigen::VectorXd::Ones(cells.count));
    for (int s = 0; s + 1 < count; ++s) {
        Eigen::VectorXd u(cells.count);
        double f1 = 1.0 + double(rng.uniform_index(3));
        double ph = rng.uniform(0.0, 1.0);
        double a2 = rng.uniform(-1.0, 1.0);
        for (int i = 0; i < cells.count; ++i) {
            double x = cells.rep(i);
            u(i) = std::cos(2.0 * M_PI * (f1 * x + ph)) + a2 * std::sin(2.0 * M_PI * x);
        }
        double v = seminorm(u, cells, cone.alpha, cone.xi);
        if (v > 0.0) u *= 0.8 * cone.s * cone.Q / v;
        else u.setZero();
        out.push_back(u.array().exp());
    }
    return out;
}

}  // namespace

ContractionLedger contraction_ledger(const CircleFamily& fam, const EnvPath& path,
                                     const CocycleWindow& normalized,
                                     const RPFTriplet& trip, const NormalizedPotential& np,
                                     const std::vector<CoveringTimes>& cover,
                                     const PathGeometry& geo, const LedgerOptions& opt) {
    (void)fam;
    (void)path;
    if (cover.empty() || np.size() == 0) throw ArgumentError("empty covering or potential data");
    long nb = np.begin, ne = np.begin + long(np.size());
    long cb = cover.front().index, ce = cover.front().index + long(cover.size());
    double s = np.s;

    auto m_at = [&](long i) { return cover[std::size_t(i - cb)].m; };
    auto j_at = [&](long i) { return cover[std::size_t(i - cb)].j; };
    auto H_at = [&](long i) { return np.H[np.pos(i)]; };
    auto Q_at = [&](long i) { return np.Q[np.pos(i)]; };
    auto Qt_at = [&](long i) { return np.Q_tilde[np.pos(i)]; };
    auto Ht_at = [&](long i) { return np.H_tilde[np.pos(i)]; };
    auto lnD_at = [&](long i) { return std::log(double(geo.degree[geo.pos(i)])); };
    auto s2_at = [&](long i) {  // s''_i, uses index i-1
        return (2.0 * s / (s - 1.0)) * Qt_at(i - 1) / (2.0 * Ht_at(i - 1)) + 1.0 +
               (s + 1.0) / (s - 1.0);
    };

    ContractionLedger led;

    // thresholds from empirical frequencies at the 3/4 targets
    const int cap = 64;
    {
        long lo = cb, hi = ce;
        long total = hi - lo;
        if (total < 8) throw CalibrationError("too few covering records");
        if (opt.M0 > 0) led.M0 = opt.M0;
        else {
            for (int M = 1; M <= cap; ++M) {
                long cnt = 0;
                for (long i = lo; i < hi; ++i)
                    if (m_at(i) <= M) ++cnt;
                if (double(cnt) > 0.75 * double(total)) { led.M0 = M; break; }
            }
            if (led.M0 == 0) throw CalibrationError("P(m <= M0) > 3/4 unattainable up to cap");
        }
        if (opt.J0 > 0) led.J0 = opt.J0;
        else {
            long jhi = ce - led.M0;
            if (jhi <= lo) throw CalibrationError("window too short for J0 calibration");
            for (int J = 1; J <= cap; ++J) {
                long cnt = 0;
                for (long i = lo; i < jhi; ++i)
                    if (std::max(j_at(i), j_at(i + led.M0)) <= J) ++cnt;
                if (double(cnt) > 0.75 * double(jhi - lo)) { led.J0 = J; break; }
            }
            if (led.J0 == 0) throw CalibrationError("P(J <= J0) > 3/4 unattainable up to cap");
        }
    }
    int M0 = led.M0, J0 = led.J0;

    long lb = std::max({cb, nb + J0 + 1, geo.begin});
    long le = std::min({ce - M0, ne - M0});
    if (le - lb < 8) throw CalibrationError("ledger range too short after thresholds");
    led.begin = lb;

    // d-bar_{J0,M0}(i); the k <= J0 maximum is attained at k = J0
    auto d_of = [&](long i, int J, int M) {
        double sumHD = 0.0, qmax = 0.0;
        for (long t = -J; t <= M; ++t) {
            sumHD += H_at(i + t) + lnD_at(i + t);
            qmax = std::max(qmax, Q_at(i + t));
        }
        double R = 3.0 * sumHD + 2.0 * s * qmax;
        double lnDn = 0.0;
        for (long t = 0; t < M; ++t) lnDn += lnD_at(i + t);
        return 4.0 * R + 2.0 * lnDn + 2.0 * std::log(s2_at(i + M)) + 2.0 * s * Qt_at(i);
    };
    for (long i = lb; i < le; ++i) led.d_values.push_back(d_of(i, J0, M0));

    if (opt.D0 > 0.0) led.D0 = opt.D0;
    else {
        std::vector<double> sorted = led.d_values;
        std::sort(sorted.begin(), sorted.end());
        std::size_t idx = std::size_t(0.75 * double(sorted.size()));
        while (idx + 1 <= std::size_t(0.75 * double(sorted.size()))) ++idx;
        if (idx >= sorted.size()) throw CalibrationError("D0 quantile out of range");
        led.D0 = sorted[idx] + 1.0;
    }

    long nA = 0, nA0 = 0;
    for (long i = lb; i < le; ++i) {
        double dv = led.d_values[std::size_t(i - lb)];
        bool base = m_at(i) <= M0 && std::max(j_at(i), j_at(i + M0)) <= J0;
        bool inA = base && dv <= led.D0;
        led.in_A.push_back(char(inA));
        if (inA) ++nA;
        if (base && dv <= led.D0 - 1.0) ++nA0;
    }
    led.prob_A = double(nA) / double(le - lb);
    led.prob_A0 = double(nA0) / double(le - lb);

    led.c = neg_log_tanh(led.D0);
    led.tanh_D0 = std::tanh(led.D0);
    led.tanh_quarter = std::tanh(led.D0 / 4.0);

    // U = d_{m(start)}(start) with the pathwise J_n = max(j_i, j_{i+n});
    // backward indices escaping the stored range are clamped to its edge
    {
        auto clamp_idx = [&](long i) { return std::max(nb, std::min(ne - 1, i)); };
        long i0 = lb;
        int n = m_at(i0);
        int ji0 = j_at(i0);
        int jin = (i0 + n < ce) ? j_at(i0 + n) : ji0;
        int Jn = std::min<long>(std::max(ji0, jin), i0 - nb);
        double sumHD = 0.0;
        for (long t = -Jn; t <= n; ++t) sumHD += H_at(clamp_idx(i0 + t)) + lnD_at(i0 + t >= geo.begin ? i0 + t : geo.begin);
        double R = 3.0 * sumHD + s * (Q_at(clamp_idx(i0 - ji0)) + Q_at(clamp_idx(i0 + n - jin)));
        double lnDn = 0.0;
        for (long t = 0; t < n; ++t) lnDn += lnD_at(i0 + t);
        led.U = 4.0 * R + 2.0 * lnDn + 2.0 * std::log(s2_at(i0 + n)) + 2.0 * s * Qt_at(i0);
    }

    // A-hit counts on the M0 grid and the decay envelope
    {
        long i0 = lb;
        int m0 = m_at(i0);
        long horizon = le - lb;
        long hits = 0;
        long next_j = m0;
        for (long n = 1; n <= horizon; ++n) {
            long jmax = (n - 1) / M0;
            while (next_j <= jmax && i0 + M0 * next_j < le) {
                if (led.in_A[std::size_t(M0 * next_j)]) ++hits;
                ++next_j;
            }
            led.cumulative.push_back(hits);
            led.envelope.push_back(led.U * std::exp(-led.c * double(hits)));
        }
    }

    // measured projective diameters of M0-step images at a few A-indices
    {
        Rng rng(opt.seed);
        int tried = 0;
        for (long i = lb; i < le && tried < 2; ++i) {
            if (!led.in_A[std::size_t(i - lb)]) continue;
            if (i < normalized.begin() || i + M0 > normalized.end()) continue;
            ++tried;
            CellGeometry cells;
            cells.circle = fam.system.family == Family::circle;
            cells.count = int(trip.h[trip.pos(i)].size());
            ConeSpec src;
            src.kind = ConeKind::log_oscillation;
            src.s = s;
            src.Q = Qt_at(i);
            src.alpha = fam.system.holder_alpha;
            src.xi = geo.xi[geo.pos(i)];
            ConeSpec dst = src;
            dst.Q = Qt_at(i + M0);
            dst.xi = geo.xi[geo.pos(i + M0)];
            auto members = sample_members(src, cells, opt.diam_samples, rng);
            std::vector<Eigen::VectorXd> images;
            for (const auto& g : members) {
                Eigen::VectorXcd v = g.cast<std::complex<double>>();
                v = apply_window(normalized, i, M0, v);
                images.push_back(v.real());
            }
            for (std::size_t a = 0; a < members.size(); ++a)
                for (std::size_t b = a + 1; b < members.size(); ++b) {
                    double before = hilbert_metric(members[a], members[b], src, cells);
                    double after = hilbert_metric(images[a], images[b], dst, cells);
                    led.measured_diam = std::max(led.measured_diam, after);
                    if (std::isfinite(before) && before > 1e-9)
                        led.measured_contraction =
                            std::max(led.measured_contraction, after / before);
                }
        }
    }
    return led;
}

KappaReport kappa_invariance_check(const std::vector<Eigen::MatrixXd>& block_ops,
                                   const std::vector<Eigen::VectorXd>& mus,
                                   double eps0, double kappa, const CellGeometry& cells,
                                   double alpha, std::uint64_t seed) {
    double limit = kappa / ((2.0 * kappa + 1.0) * (kappa + 1.0));
    if (!(eps0 > 0.0 && eps0 < std::min(0.17, limit)))
        throw ArgumentError("eps0 outside the admissible contraction range");
    if (block_ops.size() != mus.size()) throw ArgumentError("block/measure count mismatch");

    KappaReport rep;
    rep.zeta = eps0 / (kappa * (1.0 / (2.0 * kappa + 1.0) - eps0));

    Rng rng(seed);
    auto norm_of = [&](const Eigen::VectorXd& v) {
        return vector_alpha_norm(v.cast<std::complex<double>>(), cells, alpha, 1.0);
    };

    // sampled operator distance to the rank-one limit
    for (std::size_t j = 0; j < block_ops.size(); ++j) {
        for (int t = 0; t < 32; ++t) {
            Eigen::VectorXd g(cells.count);
            double f1 = 1.0 + double(rng.uniform_index(4));
            double ph = rng.uniform(0.0, 1.0);
            for (int i = 0; i < cells.count; ++i)
                g(i) = std::cos(2.0 * M_PI * (f1 * cells.rep(i) + ph));
            double ng = norm_of(g);
            if (ng <= 0.0) continue;
            Eigen::VectorXd dev = block_ops[j] * g -
                                  Eigen::VectorXd::Constant(block_ops[j].rows(), mus[j].dot(g));
            rep.eps_measured = std::max(rep.eps_measured, norm_of(dev) / ng);
        }
    }

    // cone members 1 + w with v_alpha(w) scaled to a 0.8 margin
    double worst = INF;
    for (std::size_t j = 0; j < block_ops.size(); ++j) {
        for (int t = 0; t < 32; ++t) {
            Eigen::VectorXd w(cells.count);
            double f1 = 1.0 + double(rng.uniform_index(3));
            double ph = rng.uniform(0.0, 1.0);
            for (int i = 0; i < cells.count; ++i)
                w(i) = std::cos(2.0 * M_PI * (f1 * cells.rep(i) + ph));
            double v = seminorm(w, cells, alpha, 1.0);
            double sup = w.cwiseAbs().maxCoeff();
            double c = 0.8 * kappa / (v + kappa * sup);
            Eigen::VectorXd g = Eigen::VectorXd::Ones(cells.count) + c * w;
            Eigen::VectorXd y = block_ops[j] * g;
            double bound = kappa * rep.zeta * y.minCoeff();
            double att = seminorm(y, cells, alpha, 1.0);
            worst = std::min(worst, bound > 0.0 ? (bound - att) / bound : -1.0);
        }
    }
    rep.worst_margin = worst;
    rep.ok = rep.eps_measured <= eps0 && rep.worst_margin >= 0.0;
    return rep;
}

SamplingFunctionalBound sampling_functional_bound(const Eigen::VectorXd& g,
                                                  const ConeSpec& cone,
                                                  const std::vector<int>& sample_cells,
                                                  const CellGeometry& cells) {
    if (sample_cells.empty()) throw ArgumentError("empty sample set");
    for (int i = 0; i < cells.count; ++i) {
        bool covered = false;
        for (int sc : sample_cells)
            if (cells.dist(i, sc) <= cone.xi || i == sc) { covered = true; break; }
        if (!covered) throw ArgumentError("sample points do not form a xi-cover");
    }
    SamplingFunctionalBound out;
    out.alpha_norm = vector_alpha_norm(g.cast<std::complex<double>>(), cells, cone.alpha, 1.0);
    double l = 0.0;
    for (int sc : sample_cells) l += g(sc);
    double sq = cone.s * cone.Q;
    double e1 = std::exp(sq * std::pow(cone.xi, cone.alpha));
    double K = 3.0 * (e1 + sq * e1 * e1) / cone.xi;
    out.k_times_l = K * l;
    out.holds = out.alpha_norm <= out.k_times_l;
    return out;
}

}  // namespace rdlab
