#include "rdlab/systems.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "rdlab/errors.hpp"
#include "rdlab/util.hpp"

namespace rdlab {

namespace {
constexpr double TWO_PI = 6.283185307179586476925286766559;
constexpr double XI_SCALE = 0.5;  // (1/2) min(1, injectivity radius) on the scaled circle

double fract(double x) {
    double f = x - std::floor(x);
    return f >= 1.0 ? 0.0 : f;
}

struct Shape {
    double (*g)(double);
    double (*gp)(double);
    double gpp_sup;  // sup |g''|
};

double g_none(double) { return 0.0; }
double gp_none(double) { return 0.0; }
double g_sin(double x) { return std::sin(TWO_PI * x); }
double gp_sin(double x) { return TWO_PI * std::cos(TWO_PI * x); }
double g_neutral(double x) { return -std::sin(TWO_PI * x) / TWO_PI; }
double gp_neutral(double x) { return -std::cos(TWO_PI * x); }

Shape shape_of(const std::string& name) {
    if (name == "none") return {g_none, gp_none, 0.0};
    if (name == "sin") return {g_sin, gp_sin, TWO_PI * TWO_PI};
    if (name == "neutral") return {g_neutral, gp_neutral, TWO_PI};
    throw ArgumentError("unknown circle perturbation shape: " + name);
}

}  // namespace

double circle_dist(double x, double y) {
    double d = std::abs(fract(x) - fract(y));
    return 2.0 * std::min(d, 1.0 - d);
}

double circle_apply(const FiberedSystem& sys, int state, double x) {
    const CircleMapSpec& m = sys.maps[std::size_t(state)];
    Shape s = shape_of(m.shape);
    return fract(double(sys.k_base) * x + m.eps * s.g(x));
}

double circle_deriv(const FiberedSystem& sys, int state, double x) {
    const CircleMapSpec& m = sys.maps[std::size_t(state)];
    Shape s = shape_of(m.shape);
    return double(sys.k_base) + m.eps * s.gp(x);
}

std::vector<double> circle_preimages(const FiberedSystem& sys, int state, double x) {
    const CircleMapSpec& m = sys.maps[std::size_t(state)];
    Shape s = shape_of(m.shape);
    int k = sys.k_base;
    std::vector<double> ys;
    ys.reserve(std::size_t(k));
    // lift L(y) = k y + eps g(y) is strictly increasing with L(0)=0, L(1)=k
    for (int b = 0; b < k; ++b) {
        double target = x + double(b);
        double lo = 0.0, hi = 1.0;
        double y = (x + double(b)) / double(k);
        for (int it = 0; it < 100; ++it) {
            double val = double(k) * y + m.eps * s.g(y) - target;
            if (std::abs(val) < 1e-15) break;
            double dv = double(k) + m.eps * s.gp(y);
            if (val > 0.0) hi = y; else lo = y;
            double step = y - val / dv;
            y = (step > lo && step < hi) ? step : 0.5 * (lo + hi);
        }
        ys.push_back(fract(y));
    }
    return ys;
}

double circle_orbit_step(const FiberedSystem& sys, int state, double x, Rng& rng) {
    const CircleMapSpec& m = sys.maps[std::size_t(state)];
    if (m.eps == 0.0) {
        std::uint64_t u = std::uint64_t(x * 0x1.0p64) + rng.uniform_index(1ULL << 11);
        u = u * std::uint64_t(sys.k_base) +
            rng.uniform_index(std::uint64_t(sys.k_base));
        return double(u >> 11) * 0x1.0p-53;
    }
    return circle_apply(sys, state, x);
}

CircleFamily make_circle_family(int k_base, const std::vector<CircleMapSpec>& perturbations,
                                double holder_alpha) {
    if (k_base < 2) throw ArgumentError("k_base must be >= 2");
    if (perturbations.empty()) throw ArgumentError("at least one state required");
    if (!(holder_alpha > 0.0 && holder_alpha <= 1.0)) throw ArgumentError("alpha in (0,1]");

    CircleFamily fam;
    fam.system.family = Family::circle;
    fam.system.holder_alpha = holder_alpha;
    fam.system.state_count = int(perturbations.size());
    fam.system.k_base = k_base;
    fam.system.maps = perturbations;

    bool any_expanding = false;
    for (int st = 0; st < fam.system.state_count; ++st) {
        const CircleMapSpec& spec = perturbations[std::size_t(st)];
        Shape s = shape_of(spec.shape);
        double lip = std::abs(spec.eps) * s.gpp_sup;  // Lipschitz constant of T'

        long grid = 1024;
        double vmin = 0.0, vmax = 0.0, slack = 0.0;
        for (;;) {
            vmin = std::numeric_limits<double>::infinity();
            vmax = -vmin;
            for (long i = 0; i < grid; ++i) {
                double d = double(k_base) + spec.eps * s.gp(double(i) / double(grid));
                vmin = std::min(vmin, d);
                vmax = std::max(vmax, d);
            }
            slack = lip / (2.0 * double(grid));
            if (slack <= 0.01 * vmin || grid >= (1L << 21)) break;
            grid *= 8;
        }
        if (vmin < 1.0 - 1e-12)
            throw ModelError("non-expanding circle map: sampled min |T'| = " + std::to_string(vmin));

        FiberGeometry geo;
        geo.slack = slack;
        // sampled minimum touching 1 means a genuinely neutral fiber
        geo.gamma = std::max(1.0, vmin - slack);
        geo.neutral = geo.gamma <= 1.0 + 1e-9;
        geo.holder_bound = vmax + slack;
        geo.degree = k_base;
        if (geo.gamma > 1.0) {
            double gi = 1.0 / geo.gamma;
            geo.z_value = gi / (1.0 - gi);  // frozen-state backward series
            geo.xi = XI_SCALE * std::min(1.0, 1.0 / geo.z_value);
        } else {
            geo.z_value = std::numeric_limits<double>::infinity();
            geo.xi = 0.0;  // pathwise value must be used
        }
        geo.cover_count = geo.xi > 0.0 ? int(std::ceil(1.0 / geo.xi)) : 0;
        if (geo.gamma > 1.0) any_expanding = true;
        fam.geometry.push_back(geo);
    }
    if (!any_expanding)
        throw ModelError("no state with strict expansion (P(gamma > 1) = 0)");
    return fam;
}

namespace {

using BoolMat = std::vector<std::vector<char>>;

BoolMat bool_mul(const BoolMat& a, const BoolMat& b) {
    std::size_t n = a.size(), m = b[0].size(), k = b.size();
    BoolMat c(n, std::vector<char>(m, 0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t l = 0; l < k; ++l)
            if (a[i][l])
                for (std::size_t j = 0; j < m; ++j)
                    if (b[l][j]) c[i][j] = 1;
    return c;
}

bool all_positive(const BoolMat& a) {
    for (const auto& row : a)
        for (char v : row)
            if (!v) return false;
    return true;
}

}  // namespace

CircleFamily make_sft_family(const std::vector<int>& alphabet_sizes,
                             const std::vector<std::vector<std::vector<int>>>& matrices,
                             double holder_alpha) {
    if (alphabet_sizes.empty() || alphabet_sizes.size() != matrices.size())
        throw ArgumentError("alphabet/matrix count mismatch");
    int d = alphabet_sizes[0];
    for (int a : alphabet_sizes)
        if (a != d) throw ModelError("state-keyed matrices require a uniform alphabet size");
    if (d < 1) throw ModelError("empty alphabet");

    for (const auto& A : matrices) {
        if (int(A.size()) != d) throw ModelError("matrix row count mismatch");
        for (const auto& row : A) {
            if (int(row.size()) != d) throw ModelError("matrix column count mismatch");
            for (int v : row)
                if (v != 0 && v != 1) throw ModelError("matrix entries must be 0/1");
        }
        for (int i = 0; i < d; ++i) {
            bool row_ok = false, col_ok = false;
            for (int j = 0; j < d; ++j) {
                if (A[std::size_t(i)][std::size_t(j)]) row_ok = true;
                if (A[std::size_t(j)][std::size_t(i)]) col_ok = true;
            }
            if (!row_ok) throw ModelError("zero row in transition matrix");
            if (!col_ok) throw ModelError("zero column in transition matrix");
        }
    }

    // every state path must reach an all-positive product within the cutoff:
    // walk the set of non-positive boolean patterns; a revisited pattern means
    // an arbitrarily long non-positive product exists
    const int cutoff = 64;
    std::vector<BoolMat> bmats;
    for (const auto& A : matrices) {
        BoolMat b(std::size_t(d), std::vector<char>(std::size_t(d), 0));
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) b[std::size_t(i)][std::size_t(j)] = char(A[std::size_t(i)][std::size_t(j)]);
        bmats.push_back(b);
    }
    std::set<BoolMat> frontier, seen;
    for (const auto& b : bmats)
        if (!all_positive(b)) frontier.insert(b);
    seen = frontier;
    for (int step = 1; !frontier.empty(); ++step) {
        if (step > cutoff)
            throw ModelError("primitivity error: product not positive within cutoff 64");
        std::set<BoolMat> next;
        for (const auto& p : frontier)
            for (const auto& b : bmats) {
                BoolMat q = bool_mul(b, p);
                if (all_positive(q)) continue;
                if (seen.count(q))
                    throw ModelError("primitivity error: non-positive product cycle");
                next.insert(q);
                seen.insert(q);
            }
        frontier.swap(next);
    }

    CircleFamily fam;
    fam.system.family = Family::sft;
    fam.system.holder_alpha = holder_alpha;
    fam.system.state_count = int(matrices.size());
    fam.system.alphabet_sizes = alphabet_sizes;
    fam.system.sft_matrices = matrices;
    const double e = std::exp(1.0);
    for (int st = 0; st < fam.system.state_count; ++st) {
        FiberGeometry geo;
        geo.gamma = e;
        geo.xi = 1.0 / e;
        geo.z_value = 0.0;
        geo.holder_bound = e;
        geo.degree = d;
        geo.cover_count = d;  // one ball of radius 1/e per leading symbol
        fam.geometry.push_back(geo);
    }
    return fam;
}

PathGeometry path_geometry(const CircleFamily& fam, const EnvPath& path,
                           long report_begin, long report_end) {
    if (report_begin < path.begin() || report_end > path.end() || report_begin >= report_end)
        throw ArgumentError("report range outside path window");
    PathGeometry g;
    g.begin = report_begin;
    long n = report_end - report_begin;
    g.gamma.reserve(std::size_t(n));

    auto state_at = [&](long i) { return path.at(i); };

    if (fam.system.family == Family::sft) {
        for (long i = report_begin; i < report_end; ++i) {
            const FiberGeometry& geo = fam.geometry[std::size_t(state_at(i))];
            g.gamma.push_back(geo.gamma);
            g.xi.push_back(geo.xi);
            g.z.push_back(0.0);
            g.holder_bound.push_back(geo.holder_bound);
            g.degree.push_back(geo.degree);
        }
        return g;
    }

    // seed the backward series at report_begin, then advance by recursion
    double z0 = 0.0;
    {
        double prod = 1.0, sum = 0.0;
        long idx = report_begin;
        bool converged = false;
        while (idx > path.begin()) {
            --idx;
            prod /= fam.geometry[std::size_t(state_at(idx))].gamma;
            sum += prod;
            if (prod < 1e-12 * std::max(1.0, sum)) { converged = true; break; }
        }
        if (!converged)
            throw WindowError("backward expansion series not resolved; extend the window left",
                              report_begin - path.begin() + 256);
        z0 = sum;
    }
    double z = z0;
    for (long i = report_begin; i < report_end; ++i) {
        const FiberGeometry& geo = fam.geometry[std::size_t(state_at(i))];
        g.gamma.push_back(geo.gamma);
        g.z.push_back(z);
        g.xi.push_back(XI_SCALE * std::min(1.0, 1.0 / z));
        g.holder_bound.push_back(geo.holder_bound);
        g.degree.push_back(geo.degree);
        z = (1.0 + z) / geo.gamma;
    }
    return g;
}

std::vector<CoveringTimes> covering_times(const CircleFamily& fam, const EnvPath& path,
                                          double R_const, long report_begin,
                                          long report_end) {
    if (R_const <= 0.0) throw ArgumentError("R_const must be positive");
    if (report_begin < path.begin() || report_end > path.end() || report_begin >= report_end)
        throw ArgumentError("report range outside path window");

    // earliest index whose backward expansion seed resolves; the slack before
    // report_begin doubles as lookback room for the reversed covering time
    long g_start = path.begin();
    PathGeometry geo;
    if (fam.system.family == Family::circle) {
        g_start = -1;
        for (long g0 = path.begin() + 1; g0 <= report_begin; ++g0) {
            double prod = 1.0, sum = 0.0;
            long idx = g0;
            bool conv = false;
            while (idx > path.begin()) {
                --idx;
                prod /= fam.geometry[std::size_t(path.at(idx))].gamma;
                sum += prod;
                if (prod < 1e-12 * std::max(1.0, sum)) { conv = true; break; }
            }
            if (conv) { g_start = g0; break; }
        }
        if (g_start < 0)
            throw WindowError("window too short to seed the expansion series",
                              long(path.size()) + 512);
        geo = path_geometry(fam, path, g_start, path.end());
    } else {
        geo = path_geometry(fam, path, path.begin(), path.end());
    }

    // covering time per index
    const int sft_cutoff = 64;
    std::vector<int> m_all;
    long m_begin = g_start;
    for (long i = g_start; i < report_end; ++i) {
        int m = -1;
        if (fam.system.family == Family::circle) {
            double inv_xi = 1.0 / geo.xi[geo.pos(i)];
            double prod = 1.0;
            for (long k = 0; i + k < path.end(); ++k) {
                prod /= geo.gamma[geo.pos(i + k)];
                if (inv_xi * prod <= R_const) { m = int(k + 1); break; }
            }
            if (m < 0)
                throw WindowError("covering time unresolved; extend the window right",
                                  long(path.size()) + 512);
        } else {
            const auto& mats = fam.system.sft_matrices;
            int d = fam.system.alphabet_sizes[0];
            BoolMat prod(std::size_t(d), std::vector<char>(std::size_t(d), 0));
            bool first = true;
            for (long k = 0; i + k < path.end() && k < sft_cutoff; ++k) {
                const auto& A = mats[std::size_t(path.at(i + k))];
                BoolMat b(std::size_t(d), std::vector<char>(std::size_t(d), 0));
                for (int r = 0; r < d; ++r)
                    for (int c = 0; c < d; ++c) b[std::size_t(r)][std::size_t(c)] = char(A[std::size_t(r)][std::size_t(c)]);
                prod = first ? b : bool_mul(b, prod);
                first = false;
                if (all_positive(prod)) { m = int(k + 1); break; }
            }
            if (m < 0) {
                if (i + sft_cutoff >= path.end())
                    throw WindowError("covering time unresolved; extend the window right",
                                      long(path.size()) + 512);
                throw ModelError("primitivity error: product not positive within cutoff 64");
            }
        }
        m_all.push_back(m);
    }

    auto m_at = [&](long i) -> int { return m_all[std::size_t(i - m_begin)]; };

    std::vector<CoveringTimes> out;
    for (long i = report_begin; i < report_end; ++i) {
        CoveringTimes ct;
        ct.index = i;
        ct.m = m_at(i);
        int j = -1;
        for (long nn = 1; i - nn >= m_begin; ++nn) {
            if (m_at(i - nn) <= nn) { j = int(nn); break; }
        }
        if (j < 0)
            throw WindowError("reversed covering time unresolved; extend the window left",
                              long(path.size()) + 512);
        ct.j = j;
        out.push_back(ct);
    }
    return out;
}

bool covering_tail_ok(const std::vector<CoveringTimes>& recs, int k_max) {
    if (recs.empty()) return true;
    double n = double(recs.size());
    for (int k = 0; k <= k_max; ++k) {
        double pj = 0.0, pm = 0.0;
        for (const auto& r : recs) {
            if (r.j > k) pj += 1.0;
            if (r.m > k) pm += 1.0;
        }
        // allow one-sample slack: both are frequencies over the same window
        if (pj / n > pm / n + 1.0 / n) return false;
    }
    return true;
}

double RandomFunction::eval(const FiberedSystem& sys, int state, double x) const {
    switch (kind) {
        case FieldKind::zero: return 0.0;
        case FieldKind::constant: return constant;
        case FieldKind::cosine: return amplitude * std::cos(TWO_PI * freq * x);
        case FieldKind::sine: return amplitude * std::sin(TWO_PI * freq * x);
        case FieldKind::weierstrass: {
            double v = 0.0;
            for (int j = 0; j < w_levels; ++j) {
                double phase = double(splitmix64(w_seed + std::uint64_t(j)) >> 11) * 0x1.0p-53;
                v += std::pow(2.0, -double(j) * w_alpha) *
                     std::cos(TWO_PI * (std::ldexp(1.0, j) * x + phase));
            }
            return amplitude * v;
        }
        case FieldKind::neg_log_deriv:
            return -std::log(std::abs(circle_deriv(sys, state, x)));
        case FieldKind::coboundary_cosine:
            return amplitude * (std::cos(TWO_PI * x) -
                                std::cos(TWO_PI * circle_apply(sys, state, x)));
        case FieldKind::per_symbol:
            throw ArgumentError("per_symbol field is not a circle function");
    }
    return 0.0;
}

double RandomFunction::eval_symbol(const FiberedSystem&, int state, int symbol) const {
    switch (kind) {
        case FieldKind::zero: return 0.0;
        case FieldKind::constant: return constant;
        case FieldKind::per_symbol: return symbol_values[std::size_t(state)][std::size_t(symbol)];
        default: throw ArgumentError("field kind not defined on symbol space");
    }
}

RandomFunction zero_function() {
    RandomFunction f;
    f.kind = FieldKind::zero;
    f.label = "zero";
    return f;
}

RandomFunction cosine_function(double amplitude, double freq) {
    RandomFunction f;
    f.kind = FieldKind::cosine;
    f.amplitude = amplitude;
    f.freq = freq;
    f.label = "cos";
    return f;
}

RandomFunction weierstrass_function(double alpha, int levels, std::uint64_t seed) {
    RandomFunction f;
    f.kind = FieldKind::weierstrass;
    f.w_alpha = alpha;
    f.w_levels = levels;
    f.w_seed = seed;
    f.label = "weierstrass";
    return f;
}

RandomFunction neg_log_deriv_potential() {
    RandomFunction f;
    f.kind = FieldKind::neg_log_deriv;
    f.label = "-log|T'|";
    return f;
}

RandomFunction coboundary_function(double amplitude) {
    RandomFunction f;
    f.kind = FieldKind::coboundary_cosine;
    f.amplitude = amplitude;
    f.label = "coboundary";
    return f;
}

RandomFunction per_symbol_function(const std::vector<std::vector<double>>& values) {
    RandomFunction f;
    f.kind = FieldKind::per_symbol;
    f.symbol_values = values;
    f.label = "per-symbol";
    return f;
}

}  // namespace rdlab
