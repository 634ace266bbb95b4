#include "rdlab/limits.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>

#include "rdlab/errors.hpp"

namespace rdlab {

namespace {

Eigen::VectorXd field_on_cells(const CircleFamily& fam, int state,
                               const RandomFunction& f, const CellGeometry& cells) {
    Eigen::VectorXd v(cells.count);
    for (int i = 0; i < cells.count; ++i)
        v(i) = fam.system.family == Family::circle
                   ? f.eval(fam.system, state, cells.rep(i))
                   : f.eval_symbol(fam.system, state, i);
    return v;
}

}  // namespace

TwistedSweep::TwistedSweep(const CircleFamily& fam, const EnvPath& path,
                           const RandomFunction& potential, const RandomFunction& observable,
                           const Discretization& disc, const RPFTriplet& trip, bool centered)
    : fam_(fam), path_(path), potential_(potential), observable_(observable), disc_(disc),
      trip_(trip), centered_(centered) {
    CellGeometry cells = make_cells(fam.system, disc);
    mean_prefix_.push_back(0.0);
    for (long i = trip.begin; i < trip.begin + long(trip.lambdas.size()); ++i) {
        Eigen::VectorXd fv = field_on_cells(fam, path.at(i), observable, cells);
        mean_prefix_.push_back(mean_prefix_.back() + trip_.mu(i).dot(fv));
    }
}

double TwistedSweep::mean_sum(long n) const { return mean_prefix_[std::size_t(n)]; }

std::vector<std::complex<double>> TwistedSweep::imaginary(double t,
                                                          const std::vector<long>& ns) const {
    long n_max = *std::max_element(ns.begin(), ns.end());
    if (n_max > long(trip_.lambdas.size()))
        throw ArgumentError("checkpoint beyond the triplet range");
    CellGeometry cells = make_cells(fam_.system, disc_);
    std::complex<double> z(0.0, t);

    std::map<int, Eigen::MatrixXcd> raw;
    Eigen::VectorXcd v = trip_.h[0].cast<std::complex<double>>();
    std::map<long, std::complex<double>> at;
    auto record = [&](long n) {
        std::complex<double> acc(0.0, 0.0);
        const Eigen::VectorXd& mu = trip_.nu[std::size_t(n)].cwiseProduct(trip_.h[std::size_t(n)]);
        for (int c = 0; c < cells.count; ++c) acc += mu(c) * v(c) / trip_.h[std::size_t(n)](c);
        if (centered_) acc *= std::exp(std::complex<double>(0.0, -t * mean_sum(n)));
        at[n] = acc;
    };
    std::vector<long> sorted = ns;
    std::sort(sorted.begin(), sorted.end());
    std::size_t next = 0;
    while (next < sorted.size() && sorted[next] == 0) { record(0); ++next; }
    for (long k = 0; k < n_max; ++k) {
        int st = path_.at(trip_.begin + k);
        auto it = raw.find(st);
        if (it == raw.end())
            it = raw.emplace(st, build_operator(fam_, st, potential_, disc_, z, &observable_).entries)
                     .first;
        v = (it->second * v) / trip_.lambdas[std::size_t(k)];
        while (next < sorted.size() && sorted[next] == k + 1) { record(k + 1); ++next; }
    }
    std::vector<std::complex<double>> out;
    for (long n : ns) out.push_back(at.at(n));
    return out;
}

double TwistedSweep::real_log(double zr, long n) const {
    if (n > long(trip_.lambdas.size())) throw ArgumentError("checkpoint beyond the triplet range");
    CellGeometry cells = make_cells(fam_.system, disc_);
    std::map<int, Eigen::MatrixXd> raw;
    Eigen::VectorXd v = trip_.h[0];
    double log_scale = 0.0;
    for (long k = 0; k < n; ++k) {
        int st = path_.at(trip_.begin + k);
        auto it = raw.find(st);
        if (it == raw.end())
            it = raw.emplace(st, build_operator(fam_, st, potential_, disc_,
                                                {zr, 0.0}, &observable_)
                                     .entries.real())
                     .first;
        v = (it->second * v) / trip_.lambdas[std::size_t(k)];
        double sup = v.maxCoeff();
        if (!(sup > 0.0)) throw ConvergenceError("twisted sweep lost positivity", 1.0);
        log_scale += std::log(sup);
        v /= sup;
    }
    double acc = 0.0;
    const Eigen::VectorXd mu = trip_.nu[std::size_t(n)].cwiseProduct(trip_.h[std::size_t(n)]);
    for (int c = 0; c < cells.count; ++c) acc += mu(c) * v(c) / trip_.h[std::size_t(n)](c);
    double out = log_scale + std::log(acc);
    if (centered_) out -= zr * mean_sum(n);
    return out;
}

std::complex<double> char_fn(const CircleFamily& fam, const EnvPath& path,
                             const RandomFunction& potential, const RandomFunction& observable,
                             const Discretization& disc, const RPFTriplet& trip, double t,
                             long n) {
    TwistedSweep sweep(fam, path, potential, observable, disc, trip, true);
    return sweep.imaginary(t, {n})[0];
}

VarianceReport variance(const CircleFamily& fam, const EnvPath& path,
                        const RandomFunction& potential, const RandomFunction& observable,
                        const Discretization& disc, const RPFTriplet& trip,
                        const std::vector<long>& n_grid, int k_max) {
    if (n_grid.empty() || k_max < 1) throw ArgumentError("empty grid or bad k_max");
    long n_max = *std::max_element(n_grid.begin(), n_grid.end());
    if (n_max > long(trip.lambdas.size()))
        throw ArgumentError("variance grid exceeds the triplet range");
    CellGeometry cells = make_cells(fam.system, disc);

    // real normalized operators along the range
    std::vector<Eigen::MatrixXd> L;
    for (long i = trip.begin; i < trip.begin + n_max; ++i) {
        OperatorMatrix raw = build_operator(fam, path.at(i), potential, disc);
        L.push_back(normalize(raw, trip.lambdas[trip.pos(i)], trip.h[trip.pos(i)],
                              trip.h[trip.pos(i) + 1])
                        .entries.real());
    }

    VarianceReport rep;
    rep.ns = n_grid;
    rep.sigma2_over_n.assign(n_grid.size(), 0.0);
    std::vector<double> bacc(std::size_t(k_max), 0.0);
    std::vector<long> bcnt(std::size_t(k_max), 0);

    std::deque<Eigen::VectorXd> lagged;  // lagged[d-1] = L^d f-bar_{j-d} at fiber j
    double I = 0.0, J = 0.0;
    std::size_t gi = 0;
    std::vector<std::pair<long, double>> sig2;
    std::vector<long> sorted = n_grid;
    std::sort(sorted.begin(), sorted.end());
    for (long j = 0; j < n_max; ++j) {
        Eigen::VectorXd mu = trip.mu(trip.begin + j);
        Eigen::VectorXd f = field_on_cells(fam, path.at(trip.begin + j), observable, cells);
        Eigen::VectorXd fbar = f.array() - mu.dot(f);
        I += mu.dot(fbar.cwiseProduct(fbar));
        for (std::size_t d = 0; d < lagged.size(); ++d) {
            double term = mu.dot(lagged[d].cwiseProduct(fbar));
            J += term;
            bacc[d] += term;
            bcnt[d] += 1;
        }
        for (auto& w : lagged) w = (L[std::size_t(j)] * w).eval();
        lagged.push_front((L[std::size_t(j)] * fbar).eval());
        if (long(lagged.size()) > k_max) lagged.pop_back();
        while (gi < sorted.size() && sorted[gi] == j + 1) {
            sig2.emplace_back(j + 1, I + 2.0 * J);
            ++gi;
        }
    }
    for (std::size_t g = 0; g < n_grid.size(); ++g)
        for (auto& [n, s2] : sig2)
            if (n == n_grid[g]) rep.sigma2_over_n[g] = s2 / double(n);

    rep.mean_f2 = I / double(n_max);
    double bsum = 0.0;
    for (int d = 0; d < k_max; ++d) {
        double b = bcnt[std::size_t(d)] > 0 ? bacc[std::size_t(d)] / double(bcnt[std::size_t(d)]) : 0.0;
        rep.b_k.push_back(b);
        bsum += b;
    }
    rep.sigma2_series = rep.mean_f2 + 2.0 * bsum;

    // envelope |b(k)| <= C k^-beta and the truncation tail
    {
        std::vector<double> lk, lb;
        for (int d = 0; d < k_max; ++d)
            if (std::abs(rep.b_k[std::size_t(d)]) > 1e-13) {
                lk.push_back(std::log(double(d + 1)));
                lb.push_back(std::log(std::abs(rep.b_k[std::size_t(d)])));
            }
        if (lk.size() >= 3) {
            LineFit f = fit_line(lk, lb);
            rep.envelope_beta = -f.slope;
            for (int d = 0; d < k_max; ++d)
                rep.envelope_C = std::max(rep.envelope_C,
                                          std::abs(rep.b_k[std::size_t(d)]) *
                                              std::pow(double(d + 1), rep.envelope_beta));
            if (rep.envelope_beta > 1.0)
                rep.tail_bound = 2.0 * rep.envelope_C *
                                 std::pow(double(k_max), 1.0 - rep.envelope_beta) /
                                 (rep.envelope_beta - 1.0);
            else
                rep.tail_bound = std::numeric_limits<double>::infinity();
            if (rep.tail_bound > 0.01 * std::max(1e-12, std::abs(rep.sigma2_series)))
                throw TruncationError("k_max too small: correlation tail above 1% of the series");
        } else {
            rep.tail_bound = 0.0;  // correlations at rounding level
        }
    }

    // convergence slope of |Sigma^2_n / n - Sigma^2|
    {
        std::vector<double> lx, ly;
        double floor_lvl = 1e-12 * std::max(1.0, std::abs(rep.sigma2_series));
        for (std::size_t g = 0; g < rep.ns.size(); ++g) {
            double dev = std::abs(rep.sigma2_over_n[g] - rep.sigma2_series);
            if (dev > floor_lvl) {
                lx.push_back(std::log(double(rep.ns[g])));
                ly.push_back(std::log(dev));
            }
        }
        if (lx.size() >= 3) rep.convergence_slope = fit_line(lx, ly).slope;
        else rep.below_noise = true;
    }
    return rep;
}

namespace {

// partial Birkhoff sums of mu-sampled orbits at the grid checkpoints
std::vector<std::vector<double>> orbit_sums(const CircleFamily& fam, const EnvPath& path,
                                            const RandomFunction& observable,
                                            const RPFTriplet& trip,
                                            const std::vector<long>& n_grid, long mc_samples,
                                            std::uint64_t seed) {
    if (fam.system.family != Family::circle)
        throw ArgumentError("orbit sampling implemented for circle systems");
    long n_max = *std::max_element(n_grid.begin(), n_grid.end());
    CellGeometry cells;
    cells.circle = true;
    cells.count = int(trip.h[0].size());
    Eigen::VectorXd mu0 = trip.mu(trip.begin);
    std::vector<long> sorted = n_grid;
    std::sort(sorted.begin(), sorted.end());

    const int n_chunks = 64;
    long per = (mc_samples + n_chunks - 1) / n_chunks;
    using Chunk = std::vector<std::vector<double>>;
    std::function<Chunk(std::size_t)> job = [&](std::size_t chunk) {
        Chunk out(n_grid.size());
        Rng rng(mix_seed(seed, chunk));
        for (long s = 0; s < per; ++s) {
            if (long(chunk) * per + s >= mc_samples) break;
            double x = sample_mu_point(mu0, cells, rng);
            double acc = 0.0;
            std::size_t gi = 0;
            for (long k = 0; k < n_max; ++k) {
                int st = path.at(trip.begin + k);
                acc += observable.eval(fam.system, st, x);
                x = circle_orbit_step(fam.system, st, x, rng);
                while (gi < sorted.size() && sorted[gi] == k + 1) {
                    out[gi].push_back(acc);
                    ++gi;
                }
            }
        }
        return out;
    };
    auto chunks = chunked_map<Chunk>(n_chunks, job, default_thread_count());
    std::vector<std::vector<double>> merged(n_grid.size());
    for (auto& ch : chunks)
        for (std::size_t g = 0; g < ch.size(); ++g)
            merged[g].insert(merged[g].end(), ch[g].begin(), ch[g].end());
    // reorder from sorted back to the caller's grid order
    std::vector<std::vector<double>> out(n_grid.size());
    for (std::size_t g = 0; g < n_grid.size(); ++g) {
        auto it = std::find(sorted.begin(), sorted.end(), n_grid[g]);
        out[g] = merged[std::size_t(it - sorted.begin())];
    }
    return out;
}

double ks_distance(std::vector<double>& xs) {
    std::sort(xs.begin(), xs.end());
    double m = double(xs.size()), d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double F = std_normal_cdf(xs[i]);
        d = std::max(d, std::max(double(i + 1) / m - F, F - double(i) / m));
    }
    return d;
}

}  // namespace

CLTReport clt_report(const CircleFamily& fam, const EnvPath& path,
                     const RandomFunction& potential, const RandomFunction& observable,
                     const Discretization& disc, const RPFTriplet& trip,
                     const std::vector<long>& n_grid, long mc_samples, double esseen_c,
                     SigmaMode sigma_mode, std::uint64_t seed, int quad_intervals) {
    if (n_grid.empty()) throw ArgumentError("empty n grid");

    CLTReport rep;
    rep.rows.resize(n_grid.size());
    for (std::size_t g = 0; g < n_grid.size(); ++g) rep.rows[g].n = n_grid[g];

    auto sums = orbit_sums(fam, path, observable, trip, n_grid, mc_samples, seed);

    // normalization Sigma_n
    if (sigma_mode == SigmaMode::operators) {
        VarianceReport var = variance(fam, path, potential, observable, disc, trip, n_grid,
                                      std::min<int>(64, int(n_grid.front())));
        if (var.sigma2_series <= 1e-10)
            throw PreconditionError("degenerate variance: use the coboundary analysis");
        for (std::size_t g = 0; g < n_grid.size(); ++g)
            rep.rows[g].sigma_n = std::sqrt(var.sigma2_over_n[g] * double(n_grid[g]));
    } else {
        for (std::size_t g = 0; g < n_grid.size(); ++g) {
            MeanSe ms = mean_se(sums[g]);
            double ss = 0.0;
            for (double v : sums[g]) ss += (v - ms.mean) * (v - ms.mean);
            rep.rows[g].sigma_n = std::sqrt(ss / double(sums[g].size() - 1));
            if (rep.rows[g].sigma_n <= 1e-8)
                throw PreconditionError("degenerate variance: use the coboundary analysis");
        }
    }

    for (std::size_t g = 0; g < n_grid.size(); ++g) {
        MeanSe ms = mean_se(sums[g]);
        std::vector<double> normd;
        normd.reserve(sums[g].size());
        for (double v : sums[g]) normd.push_back((v - ms.mean) / rep.rows[g].sigma_n);
        rep.rows[g].ks = ks_distance(normd);
        rep.rows[g].T = esseen_c * rep.rows[g].sigma_n;
    }

    // Esseen integral on the scale-invariant grid s = t / Sigma_n, Simpson
    TwistedSweep sweep(fam, path, potential, observable, disc, trip, true);
    {
        int Nq = quad_intervals;
        if (Nq % 2 == 1) ++Nq;
        double h = esseen_c / double(Nq);
        using Col = std::vector<double>;  // integrand per grid n at one s
        std::function<Col(std::size_t)> job = [&](std::size_t k) {
            Col col(n_grid.size(), 0.0);
            double s = h * double(k + 1);
            auto phis = sweep.imaginary(s, n_grid);
            for (std::size_t g = 0; g < n_grid.size(); ++g) {
                double t = s * rep.rows[g].sigma_n;
                col[g] = std::abs(phis[g] - std::exp(-0.5 * t * t)) / s;
            }
            return col;
        };
        auto cols = chunked_map<Col>(std::size_t(Nq), job, default_thread_count());
        for (std::size_t g = 0; g < n_grid.size(); ++g) {
            double simpson = 0.0;  // f(0) = 0 at the left endpoint
            for (int k = 1; k <= Nq; ++k) {
                double w = (k == Nq) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
                simpson += w * cols[std::size_t(k - 1)][g];
            }
            simpson *= h / 3.0;
            rep.rows[g].esseen = 2.0 * simpson + (24.0 / M_PI) / rep.rows[g].T;
        }
        // characteristic function trace at the largest n
        long n_top = *std::max_element(n_grid.begin(), n_grid.end());
        std::size_t g_top = 0;
        for (std::size_t g = 0; g < n_grid.size(); ++g)
            if (n_grid[g] == n_top) g_top = g;
        for (int k = 0; k <= 16; ++k) {
            double s = esseen_c * double(k) / 16.0;
            std::complex<double> phi =
                k == 0 ? std::complex<double>(1.0, 0.0) : sweep.imaginary(s, {n_top})[0];
            rep.char_ts.push_back(s * rep.rows[g_top].sigma_n);
            rep.char_values.push_back(phi);
        }
    }

    {
        std::vector<double> lx, ly;
        for (const auto& r : rep.rows) {
            lx.push_back(std::log(double(r.n)));
            ly.push_back(std::log(std::max(1e-300, r.ks)));
        }
        LineFit f = fit_line(lx, ly);
        rep.be_slope = f.slope;
        rep.be_r2 = f.r2;
    }
    return rep;
}

MDPReport mdp_report(const CircleFamily& fam, const EnvPath& path,
                     const RandomFunction& potential, const RandomFunction& observable,
                     const Discretization& disc, const RPFTriplet& trip, double sigma,
                     double a_expo, const std::vector<double>& t_grid,
                     const std::vector<std::pair<double, double>>& gammas,
                     const std::vector<long>& n_grid, long mc_samples, double domain_radius,
                     std::uint64_t seed) {
    if (!(a_expo > 0.0 && a_expo < 0.5))
        throw ArgumentError("a_n = n^q needs 0 < q < 1/2 (a_n -> infinity, a_n = o(sqrt n))");
    if (sigma <= 0.0) throw ArgumentError("sigma must be positive");
    MDPReport rep;
    rep.gammas = gammas;

    long n_top = *std::max_element(n_grid.begin(), n_grid.end());
    TwistedSweep sweep(fam, path, potential, observable, disc, trip, true);
    for (long n : n_grid) {
        double an = std::pow(double(n), a_expo);
        std::vector<double> cums;
        for (double t : t_grid) {
            double z = t * an / (sigma * std::sqrt(double(n)));
            if (domain_radius > 0.0 && std::abs(z) > domain_radius) {
                if (n == n_top)
                    throw ArgumentError("t grid escapes the verified twist domain at the largest n");
                z = z > 0.0 ? domain_radius : -domain_radius;
                rep.clipped = true;
            }
            double cum = (t == 0.0 ? 0.0 : sweep.real_log(z, n)) / (an * an);
            rep.cumulants.push_back({t, n, cum, std::abs(cum - 0.5 * t * t)});
            cums.push_back(cum);
        }
        // convexity along the (sorted) t grid
        std::vector<std::pair<double, double>> tc;
        for (std::size_t i = 0; i < t_grid.size(); ++i) tc.emplace_back(t_grid[i], cums[i]);
        std::sort(tc.begin(), tc.end());
        for (std::size_t i = 1; i + 1 < tc.size(); ++i) {
            double dd = (tc[i + 1].second - tc[i].second) / (tc[i + 1].first - tc[i].first) -
                        (tc[i].second - tc[i - 1].second) / (tc[i].first - tc[i - 1].first);
            if (dd < -1e-10) rep.convexity_ok = false;
        }
    }

    // interval rates by Monte Carlo across the grid
    auto sums = orbit_sums(fam, path, observable, trip, n_grid, mc_samples, seed);
    for (auto [lo, hi] : gammas) {
        std::vector<double> lnp, a2;
        double at_top = 0.0;
        for (std::size_t g = 0; g < n_grid.size(); ++g) {
            long n = n_grid[g];
            double an = std::pow(double(n), a_expo);
            MeanSe ms = mean_se(sums[g]);
            long cnt = 0;
            for (double v : sums[g]) {
                double w = (v - ms.mean) / (sigma * std::sqrt(double(n)) * an);
                if (w >= lo && w <= hi) ++cnt;
            }
            double p = double(cnt) / double(sums[g].size());
            double rate = p > 0.0 ? std::log(p) / (an * an) : -std::numeric_limits<double>::infinity();
            if (n == n_top) at_top = rate;
            if (p > 0.0) {
                lnp.push_back(std::log(p));
                a2.push_back(an * an);
            }
        }
        rep.set_rate_mc.push_back(at_top);
        rep.set_rate_slope.push_back(lnp.size() >= 2 ? fit_line(a2, lnp).slope : 0.0);
        auto inf_half_sq = [](double lo2, double hi2) {
            if (lo2 <= 0.0 && hi2 >= 0.0) return 0.0;
            double d = std::min(std::abs(lo2), std::abs(hi2));
            return 0.5 * d * d;
        };
        rep.set_rate_closure.push_back(-inf_half_sq(lo, hi));
        rep.set_rate_interior.push_back(-inf_half_sq(lo, hi));
    }
    return rep;
}

GrowthFit growth_fit(const std::vector<double>& series, double drift_a, double p, double eps) {
    if (series.empty()) throw ArgumentError("empty series");
    if (!(eps > 1.0 / p)) throw ArgumentError("need eps > 1/p");
    GrowthFit out;
    double half_sup = 0.0;
    for (std::size_t k = 0; k < series.size(); ++k) {
        double v = std::pow(double(k + 1), -drift_a - eps) * series[k];
        out.A = std::max(out.A, v);
        if (k < series.size() / 2) half_sup = std::max(half_sup, v);
    }
    out.diverging = series.size() >= 8 && out.A > 1.2 * half_sup;
    return out;
}

}  // namespace rdlab
