#pragma once

#include <Eigen/Dense>

#include <array>
#include <string>
#include <vector>

#include "rdlab/rpf.hpp"

namespace rdlab {

enum class ConeKind { orthant, log_oscillation, kappa, bounded_ratio };

struct ConeSpec {
    ConeKind kind = ConeKind::orthant;
    double s = 3.0;      // log-oscillation: v_{alpha,xi}(ln g) <= s*Q
    double Q = 1.0;
    double C = 2.0;      // bounded ratio: max g <= C min g
    double kappa = 0.7071067811865476;  // kappa-cone: v_alpha(g) <= kappa inf g
    double alpha = 1.0;
    double xi = 1.0;
};

struct Membership {
    bool member = false;
    double margin = 0.0;  // (bound - attained) / bound, worst constraint
    std::string violated;
};

Membership cone_membership(const Eigen::VectorXd& g, const ConeSpec& cone,
                           const CellGeometry& cells);

// Projective distance between cone rays. Orthant and log-oscillation cones
// use exact ratio enumeration over the discrete constraint set; kappa and
// bounded-ratio cones use bisection on the two-sided scalar feasibility
// problem. Returns +inf for boundary pairs. Throws MembershipError when an
// input is not in the cone.
double hilbert_metric(const Eigen::VectorXd& f, const Eigen::VectorXd& g,
                      const ConeSpec& cone, const CellGeometry& cells);

// exact projective diameter of the image of the positive orthant under a
// strictly positive matrix (max over column pairs)
double orthant_image_diameter(const Eigen::MatrixXd& A);

struct Decomposition {
    std::array<Eigen::VectorXd, 4> parts;  // sum equals g, each in C or -C
    double norm_sum = 0.0;                 // sum of alpha-norms of the parts
    double norm_bound = 0.0;               // U ||g||_alpha with U = 12 xi^-1 (1 + 4/(sQ))
};

Decomposition decompose(const Eigen::VectorXd& g, const ConeSpec& cone,
                        const CellGeometry& cells);

struct ContractionLedger {
    long begin = 0;
    int M0 = 0, J0 = 0;
    double D0 = 0.0;
    double c = 0.0;       // -ln tanh(D0)
    double U = 0.0;       // d_{m(start)}(start)
    double prob_A = 0.0, prob_A0 = 0.0;
    std::vector<char> in_A;          // per ledger index
    std::vector<double> d_values;    // d-bar_{J0,M0} per index
    std::vector<long> cumulative;    // A-hits counted along the M0 grid, per n
    std::vector<double> envelope;    // U exp(-c * hits(n)) per n
    // measured cross-checks at sampled A-indices
    double measured_diam = 0.0;
    double measured_contraction = 0.0;
    double tanh_D0 = 0.0;
    double tanh_quarter = 0.0;  // tanh(D0/4), the classical coefficient
};

struct LedgerOptions {
    int M0 = -1;     // -1: calibrate to P(m <= M0) > 3/4
    int J0 = -1;
    double D0 = -1.0;
    int diam_samples = 64;
    std::uint64_t seed = 31;
};

// Contracting-set bookkeeping: thresholds at the 3/4 empirical targets, the
// A-indicator, the contraction exponent and the pathwise decay envelope, plus
// measured projective diameters of M0-step images at A-indices.
ContractionLedger contraction_ledger(const CircleFamily& fam, const EnvPath& path,
                                     const CocycleWindow& normalized,
                                     const RPFTriplet& trip, const NormalizedPotential& np,
                                     const std::vector<CoveringTimes>& cover,
                                     const PathGeometry& geo,
                                     const LedgerOptions& opt = {});

struct KappaReport {
    double zeta = 0.0;
    double eps_measured = 0.0;   // max_j sampled ||A_j - mu_j|| in the alpha norm
    double worst_margin = 0.0;   // target-cone margin over sampled members
    bool ok = false;
};

// A_j C_{j,kappa} into C_{j+1,kappa*zeta} on sampled members, with
// zeta = eps0 / (kappa ((2 kappa + 1)^{-1} - eps0))
KappaReport kappa_invariance_check(const std::vector<Eigen::MatrixXd>& block_ops,
                                   const std::vector<Eigen::VectorXd>& mus,
                                   double eps0, double kappa, const CellGeometry& cells,
                                   double alpha, std::uint64_t seed = 9);

struct SamplingFunctionalBound {
    double alpha_norm = 0.0;
    double k_times_l = 0.0;  // K * l(g)
    bool holds = false;
};

// ||g||_alpha <= K l(g) with K = 3 (e^{s xi^a Q~} + s Q~ e^{2 s xi^a Q~}) / xi
// and l(g) the sum of g over a xi-cover of representatives
SamplingFunctionalBound sampling_functional_bound(const Eigen::VectorXd& g,
                                                  const ConeSpec& cone,
                                                  const std::vector<int>& sample_cells,
                                                  const CellGeometry& cells);

}  // namespace rdlab
