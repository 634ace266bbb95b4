#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rdlab/environment.hpp"

namespace rdlab {

// Circle metric scaled so diam = 1 (twice the arc distance on a unit-length
// circle). Symbol-space metric is exp(-first disagreement).
double circle_dist(double x, double y);

enum class Family { circle, sft };

// x -> k x + eps * g(x) mod 1 with g in {none, sin, neutral};
// "neutral" is -sin(2 pi x)/(2 pi), which brings min T' down to k-1.
struct CircleMapSpec {
    double eps = 0.0;
    std::string shape = "none";
};

struct FiberedSystem {
    Family family = Family::circle;
    double holder_alpha = 1.0;
    int state_count = 1;

    // circle family
    int k_base = 2;
    std::vector<CircleMapSpec> maps;  // per environment state

    // sft family: square 0-1 matrices keyed by the current state
    std::vector<int> alphabet_sizes;
    std::vector<std::vector<std::vector<int>>> sft_matrices;
};

struct FiberGeometry {
    double gamma = 1.0;        // certified min expansion
    double xi = 1.0;           // pairing scale
    double z_value = 0.0;      // backward series value if the state froze (circle)
    double holder_bound = 1.0; // N: certified max expansion
    int degree = 1;
    int cover_count = 1;       // balls of radius xi needed to cover the fiber
    bool neutral = false;      // sampled minimum of T' touches 1
    double slack = 0.0;        // Lipschitz certification slack on gamma/N
};

struct CoveringTimes {
    long index = 0;
    int m = 0;  // covering time
    int j = 0;  // reversed covering time
};

struct CircleFamily {
    FiberedSystem system;
    std::vector<FiberGeometry> geometry;  // per state
};

CircleFamily make_circle_family(int k_base, const std::vector<CircleMapSpec>& perturbations,
                                double holder_alpha = 1.0);

CircleFamily make_sft_family(const std::vector<int>& alphabet_sizes,
                             const std::vector<std::vector<std::vector<int>>>& matrices,
                             double holder_alpha = 1.0);

double circle_apply(const FiberedSystem& sys, int state, double x);
double circle_deriv(const FiberedSystem& sys, int state, double x);
// full set of branch preimages of x, ordered by branch
std::vector<double> circle_preimages(const FiberedSystem& sys, int state, double x);

class Rng;

// One Monte Carlo step of the fiber map. Exactly k-linear maps shift the
// mantissa, so they run in 64-bit fixed point with a random refill of the
// unseen low bits; this keeps long orbits distributionally exact instead of
// collapsing onto the fixed point after ~53 doublings.
double circle_orbit_step(const FiberedSystem& sys, int state, double x, Rng& rng);

// Per-index pairing data along a realized path. For circle systems xi is the
// pathwise value from the truncated backward expansion series.
struct PathGeometry {
    long begin = 0;
    std::vector<double> gamma, xi, z, holder_bound;
    std::vector<int> degree;

    std::size_t size() const { return gamma.size(); }
    long end() const { return begin + long(gamma.size()); }
    std::size_t pos(long absolute) const { return std::size_t(absolute - begin); }
};

PathGeometry path_geometry(const CircleFamily& fam, const EnvPath& path,
                           long report_begin, long report_end);

// m and j per index in [report_begin, report_end); throws WindowError when the
// window cannot resolve one of the minima.
std::vector<CoveringTimes> covering_times(const CircleFamily& fam, const EnvPath& path,
                                          double R_const, long report_begin,
                                          long report_end);

// empirical check P(j > k) <= P(m > k) on the reported indices, k <= k_max
bool covering_tail_ok(const std::vector<CoveringTimes>& recs, int k_max);

enum class FieldKind {
    zero,
    constant,
    cosine,       // amplitude * cos(2 pi freq x)
    sine,
    weierstrass,  // sum 2^{-j a} cos(2 pi 2^j x + phase_j), exactly a-Holder
    neg_log_deriv,
    coboundary_cosine,  // u - u o T_state with u = amplitude cos(2 pi x)
    per_symbol
};

struct RandomFunction {
    FieldKind kind = FieldKind::zero;
    double amplitude = 1.0;
    double freq = 1.0;
    double constant = 0.0;
    double w_alpha = 1.0;
    int w_levels = 12;
    std::uint64_t w_seed = 11;
    std::vector<std::vector<double>> symbol_values;  // per state, per symbol
    std::string label;

    double eval(const FiberedSystem& sys, int state, double x) const;
    double eval_symbol(const FiberedSystem& sys, int state, int symbol) const;
};

RandomFunction zero_function();
RandomFunction cosine_function(double amplitude = 1.0, double freq = 1.0);
RandomFunction weierstrass_function(double alpha, int levels = 12, std::uint64_t seed = 11);
RandomFunction neg_log_deriv_potential();
RandomFunction coboundary_function(double amplitude = 1.0);
RandomFunction per_symbol_function(const std::vector<std::vector<double>>& values);

}  // namespace rdlab
