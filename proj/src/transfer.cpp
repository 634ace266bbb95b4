#include "rdlab/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "rdlab/errors.hpp"
#include "rdlab/util.hpp"

namespace rdlab {

CellGeometry make_cells(const FiberedSystem& sys, const Discretization& disc) {
    CellGeometry cells;
    if (sys.family == Family::circle) {
        if (disc.scheme != DiscScheme::ulam) throw ArgumentError("circle systems use ulam cells");
        if (disc.resolution < 2) throw ArgumentError("resolution must be >= 2");
        cells.circle = true;
        cells.count = disc.resolution;
    } else {
        if (disc.scheme != DiscScheme::cylinder) throw ArgumentError("sft systems use cylinder cells");
        int d = sys.alphabet_sizes[0];
        if (disc.resolution != d)
            throw ArgumentError("depth-1 cylinder count must equal the alphabet size");
        cells.circle = false;
        cells.count = d;
    }
    return cells;
}

OperatorMatrix build_operator(const CircleFamily& fam, int state,
                              const RandomFunction& potential, const Discretization& disc,
                              std::complex<double> twist_z, const RandomFunction* observable) {
    if (twist_z != std::complex<double>(0.0, 0.0) && observable == nullptr)
        throw ArgumentError("twist requires an observable");
    const FiberedSystem& sys = fam.system;
    CellGeometry cells = make_cells(sys, disc);
    OperatorMatrix op;
    op.twist = twist_z;
    op.entries = Eigen::MatrixXcd::Zero(cells.count, cells.count);

    if (sys.family == Family::circle) {
        for (int t = 0; t < cells.count; ++t) {
            double x = cells.rep(t);
            for (double y : circle_preimages(sys, state, x)) {
                double w = potential.eval(sys, state, y);
                std::complex<double> expo(w, 0.0);
                if (observable) expo += twist_z * observable->eval(sys, state, y);
                op.entries(t, cells.cell_of(y)) += std::exp(expo);
            }
        }
    } else {
        const auto& A = sys.sft_matrices[std::size_t(state)];
        for (int a = 0; a < cells.count; ++a) {
            std::complex<double> expo(potential.eval_symbol(sys, state, a), 0.0);
            if (observable) expo += twist_z * observable->eval_symbol(sys, state, a);
            std::complex<double> w = std::exp(expo);
            for (int b = 0; b < cells.count; ++b)
                if (A[std::size_t(a)][std::size_t(b)]) op.entries(b, a) += w;
        }
    }
    return op;
}

CocycleWindow build_window(const CircleFamily& fam, const EnvPath& path,
                           const RandomFunction& potential, const Discretization& disc,
                           long from, long to, std::complex<double> twist_z,
                           const RandomFunction* observable) {
    if (from < path.begin() || to > path.end() || from > to)
        throw ArgumentError("window range outside path");
    CocycleWindow w;
    w.start_offset = from;
    std::map<int, std::shared_ptr<const OperatorMatrix>> cache;
    for (long i = from; i < to; ++i) {
        int st = path.at(i);
        auto it = cache.find(st);
        if (it == cache.end()) {
            auto op = std::make_shared<OperatorMatrix>(
                build_operator(fam, st, potential, disc, twist_z, observable));
            it = cache.emplace(st, std::move(op)).first;
        }
        w.ops.push_back(it->second);
    }
    return w;
}

OperatorMatrix compose(const CocycleWindow& window, long from, long n) {
    if (n < 0 || from < window.begin() || from + n > window.end())
        throw ArgumentError("composition range escapes the window");
    if (n == 0) {
        int dim;
        if (from < window.end()) dim = window.op(from).cols();
        else dim = window.op(from - 1).rows();
        OperatorMatrix id;
        id.fiber_index = from;
        id.entries = Eigen::MatrixXcd::Identity(dim, dim);
        id.normalized = true;
        return id;
    }
    OperatorMatrix out;
    out.fiber_index = from;
    out.entries = window.op(from).entries;
    out.twist = window.op(from).twist;
    bool norm = window.op(from).normalized;
    for (long i = from + 1; i < from + n; ++i) {
        if (window.op(i).cols() != out.entries.rows())
            throw ArgumentError("incompatible fiber dimensions in composition");
        out.entries = window.op(i).entries * out.entries;
        norm = norm && window.op(i).normalized;
    }
    out.normalized = norm;
    return out;
}

Eigen::VectorXcd apply_window(const CocycleWindow& window, long from, long n,
                              const Eigen::VectorXcd& v) {
    if (n < 0 || from < window.begin() || from + n > window.end())
        throw ArgumentError("application range escapes the window");
    Eigen::VectorXcd out = v;
    for (long i = from; i < from + n; ++i) out = window.op(i).entries * out;
    return out;
}

OperatorMatrix normalize(const OperatorMatrix& op, double lambda,
                         const Eigen::VectorXd& h_source, const Eigen::VectorXd& h_target) {
    if (lambda <= 0.0) throw ArgumentError("lambda must be positive");
    if (h_source.minCoeff() <= 0.0 || h_target.minCoeff() <= 0.0)
        throw ArgumentError("h must be strictly positive");
    if (h_source.size() != op.entries.cols() || h_target.size() != op.entries.rows())
        throw ArgumentError("h dimension mismatch");
    OperatorMatrix out = op;
    for (int r = 0; r < out.rows(); ++r)
        for (int c = 0; c < out.cols(); ++c)
            out.entries(r, c) *= h_source(c) / (lambda * h_target(r));
    if (op.twist == std::complex<double>(0.0, 0.0))
        out.normalized = l1_residual(out) <= 1e-10;
    else
        out.normalized = false;
    return out;
}

double l1_residual(const OperatorMatrix& op) {
    Eigen::VectorXcd ones = Eigen::VectorXcd::Ones(op.cols());
    Eigen::VectorXcd img = op.entries * ones;
    double r = 0.0;
    for (int i = 0; i < img.size(); ++i) r = std::max(r, std::abs(img(i) - 1.0));
    return r;
}

namespace {

// y with lift(y) = t, t in [0, k); lift(y) = k y + eps g(y)
double inverse_lift(const FiberedSystem& sys, int state, double t) {
    int b = int(std::floor(t));
    if (b < 0) b = 0;
    if (b >= sys.k_base) b = sys.k_base - 1;
    double frac = t - double(b);
    auto pre = circle_preimages(sys, state, frac);
    double y = pre[std::size_t(b)];
    // preimages are reduced mod 1; branch b of value 0 may come back as 1
    if (b > 0 && y == 0.0) y = 1.0;
    return y;
}

}  // namespace

double duality_residual(const CircleFamily& fam, int state, const Discretization& disc,
                        const OperatorMatrix& op, const Eigen::VectorXd& mu_source,
                        const Eigen::VectorXd& mu_target, const Eigen::VectorXd& g,
                        const Eigen::VectorXd& f) {
    CellGeometry cells = make_cells(fam.system, disc);
    auto check_measure = [&](const Eigen::VectorXd& mu) {
        if (mu.minCoeff() < -1e-15) throw ArgumentError("measure must be nonnegative");
        if (std::abs(mu.sum() - 1.0) > 1e-10) throw ArgumentError("measure mass must be 1");
    };
    check_measure(mu_source);
    check_measure(mu_target);

    double lhs = 0.0;
    if (fam.system.family == Family::circle) {
        // exact cell average of f o T via branch inverses of cell endpoints
        const FiberedSystem& sys = fam.system;
        int n = cells.count, k = sys.k_base;
        double w = 1.0 / double(n);
        for (int y = 0; y < n; ++y) {
            double a = double(y) * w, b = double(y + 1) * w;
            double avg = 0.0;
            for (int c = 0; c < n; ++c) {
                if (f(c) == 0.0) continue;
                double c0 = double(c) * w, c1 = double(c + 1) * w;
                double len = 0.0;
                for (int br = 0; br < k; ++br) {
                    double lo = inverse_lift(sys, state, double(br) + c0);
                    double hi = inverse_lift(sys, state, double(br) + c1);
                    len += std::max(0.0, std::min(hi, b) - std::max(lo, a));
                }
                avg += f(c) * len / w;
            }
            lhs += g(y) * avg * mu_source(y);
        }
    } else {
        // admissibility-uniform projection of f o T on depth-1 cylinders
        const auto& A = fam.system.sft_matrices[std::size_t(state)];
        for (int a = 0; a < cells.count; ++a) {
            double s = 0.0;
            int cnt = 0;
            for (int b = 0; b < cells.count; ++b)
                if (A[std::size_t(a)][std::size_t(b)]) { s += f(b); ++cnt; }
            lhs += g(a) * (cnt > 0 ? s / double(cnt) : 0.0) * mu_source(a);
        }
    }

    Eigen::VectorXd Lg = (op.entries * g.cast<std::complex<double>>()).real();
    double rhs = 0.0;
    for (int x = 0; x < cells.count; ++x) rhs += Lg(x) * f(x) * mu_target(x);
    return std::abs(lhs - rhs);
}

FieldNorms field_norms(const CircleFamily& fam, int state, const RandomFunction& field,
                       double alpha, double r_cap, int grid) {
    FieldNorms out;
    const FiberedSystem& sys = fam.system;
    if (sys.family == Family::sft) {
        int d = sys.alphabet_sizes[0];
        std::vector<double> vals(std::size_t(d), 0.0);
        for (int a = 0; a < d; ++a) vals[std::size_t(a)] = field.eval_symbol(sys, state, a);
        for (double v : vals) out.sup = std::max(out.sup, std::abs(v));
        // depth-1 symbol functions: distinct leading symbols sit at distance 1
        if (r_cap >= 1.0)
            for (int a = 0; a < d; ++a)
                for (int b = a + 1; b < d; ++b)
                    out.seminorm = std::max(out.seminorm,
                                            std::abs(vals[std::size_t(a)] - vals[std::size_t(b)]));
        return out;
    }
    std::vector<double> vals(std::size_t(grid), 0.0);
    for (int i = 0; i < grid; ++i) vals[std::size_t(i)] = field.eval(sys, state, double(i) / double(grid));
    for (double v : vals) out.sup = std::max(out.sup, std::abs(v));
    int stride = grid <= 1024 ? 1 : grid / 1024;
    for (int i = 0; i < grid; ++i) {
        double xi_ = double(i) / double(grid);
        for (int j = i + 1; j < grid; j += (j - i > 16 ? stride : 1)) {
            double d = circle_dist(xi_, double(j) / double(grid));
            if (d <= 0.0 || d > r_cap) continue;
            out.seminorm = std::max(out.seminorm,
                                    std::abs(vals[std::size_t(i)] - vals[std::size_t(j)]) /
                                        std::pow(d, alpha));
        }
    }
    return out;
}

double vector_sup(const Eigen::VectorXcd& v) {
    double s = 0.0;
    for (int i = 0; i < v.size(); ++i) s = std::max(s, std::abs(v(i)));
    return s;
}

// all pairs up to 64 cells; above that, local pairs plus a strided global
// subsample (the norm is only used for inequality verification)
double vector_holder_seminorm(const Eigen::VectorXcd& v, const CellGeometry& cells,
                              double alpha, double r_cap) {
    int n = cells.count;
    double s = 0.0;
    auto probe = [&](int i, int j) {
        double d = cells.dist(i, j);
        if (d <= 0.0 || d > r_cap) return;
        s = std::max(s, std::abs(v(i) - v(j)) / std::pow(d, alpha));
    };
    if (n <= 64) {
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) probe(i, j);
        return s;
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j <= std::min(n - 1, i + 8); ++j) probe(i, j);
    int stride = (n + 47) / 48;
    for (int i = 0; i < n; i += stride)
        for (int j = i + stride; j < n; j += stride) probe(i, j);
    return s;
}

PerturbationBound perturbation_bound(const CircleFamily& fam, const EnvPath& path,
                                     const RandomFunction& potential,
                                     const RandomFunction& observable,
                                     const Discretization& disc, long from, long n,
                                     std::complex<double> z, std::uint64_t sample_seed) {
    if (n < 1) throw ArgumentError("n must be >= 1");
    const FiberedSystem& sys = fam.system;
    CellGeometry cells = make_cells(sys, disc);
    double alpha = sys.holder_alpha;
    PathGeometry geo = path_geometry(fam, path, from, from + n + 1);

    CocycleWindow plain = build_window(fam, path, potential, disc, from, from + n);
    CocycleWindow twisted = build_window(fam, path, potential, disc, from, from + n, z, &observable);
    Eigen::MatrixXcd D = compose(twisted, from, n).entries - compose(plain, from, n).entries;

    double xi_src = geo.xi[geo.pos(from)];
    double xi_tgt = geo.xi[geo.pos(from + n)];

    // sampled operator norm over a documented family of unit test functions
    Rng rng(sample_seed);
    double lhs = 0.0;
    auto push = [&](const Eigen::VectorXcd& g) {
        double ng = vector_alpha_norm(g, cells, alpha, xi_src);
        if (ng <= 0.0) return;
        Eigen::VectorXcd dg = D * g;
        lhs = std::max(lhs, vector_alpha_norm(dg, cells, alpha, xi_tgt) / ng);
    };
    push(Eigen::VectorXcd::Ones(cells.count));
    {
        Eigen::VectorXcd g(cells.count);
        for (int i = 0; i < cells.count; ++i)
            g(i) = std::cos(2.0 * M_PI * cells.rep(i));
        push(g);
        RandomFunction w = weierstrass_function(alpha, 10, 77);
        for (int i = 0; i < cells.count; ++i)
            g(i) = sys.family == Family::circle ? w.eval(sys, path.at(from), cells.rep(i))
                                                : rng.uniform(-1.0, 1.0);
        push(g);
    }
    for (int s = 0; s < 64; ++s) {
        Eigen::VectorXcd g(cells.count);
        double a0 = rng.uniform(-1.0, 1.0), a1 = rng.uniform(-1.0, 1.0);
        double f1 = 1.0 + double(rng.uniform_index(4));
        double ph = rng.uniform(0.0, 1.0);
        for (int i = 0; i < cells.count; ++i) {
            double x = cells.rep(i);
            g(i) = std::complex<double>(
                a0 * std::cos(2.0 * M_PI * (f1 * x + ph)),
                a1 * std::sin(2.0 * M_PI * (f1 * x - ph)));
        }
        push(g);
    }

    // analytic side
    PerturbationBound out;
    out.lhs_norm = lhs;
    double gprod = 1.0;
    for (long i = from; i < from + n; ++i) gprod /= geo.gamma[geo.pos(i)];
    out.gamma_product = gprod;

    auto q_sum = [&](const RandomFunction& h) {
        double q = 0.0;
        for (long k = 0; k < n; ++k) {
            double tailprod = 1.0;
            for (long s2 = from + k; s2 < from + n; ++s2) tailprod /= geo.gamma[geo.pos(s2)];
            FieldNorms nm = field_norms(fam, path.at(from + k), h, alpha, geo.xi[geo.pos(from + k)],
                                        std::min(4096, 8 * cells.count));
            q += nm.seminorm * std::pow(tailprod, alpha);
        }
        return q;
    };
    out.q_phi = q_sum(potential);
    out.q_f = q_sum(observable);

    // sup of the Birkhoff sum of f on a refined source grid, exact orbits
    double ssup = 0.0;
    int refined = std::min(4096, 8 * cells.count);
    if (sys.family == Family::circle) {
        for (int i = 0; i < refined; ++i) {
            double x = double(i) / double(refined), acc = 0.0;
            for (long k = 0; k < n; ++k) {
                acc += observable.eval(sys, path.at(from + k), x);
                x = circle_apply(sys, path.at(from + k), x);
            }
            ssup = std::max(ssup, std::abs(acc));
        }
    } else {
        double per = 0.0;
        for (long k = 0; k < n; ++k) {
            FieldNorms nm = field_norms(fam, path.at(from + k), observable, alpha, 1.0);
            per += nm.sup;
        }
        ssup = per;
    }
    out.sup_snf = ssup;

    Eigen::VectorXcd Ln1 = apply_window(plain, from, n, Eigen::VectorXcd::Ones(cells.count));
    double ln1_sup = vector_sup(Ln1);

    out.rhs_bound = std::abs(z) * std::exp(std::abs(z.real()) * ssup) * ln1_sup *
                    ((1.0 + std::pow(gprod, alpha) + 2.0 * out.q_phi) * ssup + out.q_f);
    return out;
}

}  // namespace rdlab
