#pragma once

#include <complex>
#include <vector>

#include "rdlab/cones.hpp"
#include "rdlab/rpf.hpp"
#include "rdlab/util.hpp"

namespace rdlab {

struct BlockSchedule {
    double C1 = 1.0, beta = 2.0, eps = 1.0, eps0 = 0.1;
    double u0 = 21.0;  // 2/eps0 + 1
    std::vector<long> n_sizes;  // n_1 .. n_jmax
    std::vector<long> cum;      // N_1 .. N_jmax
    double C3 = 0.0, C4 = 0.0, A1 = 0.0, A2 = 0.0, A1p = 0.0, A2p = 0.0;
    bool sandwich_ok = false;   // A1 j^{b/(b-e)} <= N_j <= A2 j^{b/(b-e)} for all j
    long first_violation = 0;
};

// n_{j+1} = floor((u0 C1)^{1/beta} N_j^{eps/beta}); integer arithmetic after
// the real-valued powers
BlockSchedule build_schedule(double C1, double beta, double eps, double eps0, long j_max);

struct VisitGrowthFit {
    double E2 = 1.0, eta0 = 0.0;  // m_k <= E2 k^{1+eta0}
    double E3 = 1.0, delta = 0.0; // m_{k+1}-m_k <= E3 k^delta
};

VisitGrowthFit fit_visit_growth(const std::vector<long>& visit_indices);

struct InducedBlocks {
    long origin = 0;             // absolute index playing m_0 = 0
    std::vector<long> ell;       // ell_j = m_{N_j} (relative to origin), ell_0 = 0
    std::vector<Eigen::MatrixXd> block_ops;  // A_j over block B_j
    std::vector<long> L_of;      // L_n for n = 0..ell.back()
    int max_L_gap = 0;           // max L_{n+1} - L_n (lemma bound: 2)
    VisitGrowthFit growth;
    double beta = 2.0, eps = 1.0;  // copied from the schedule
    double Q1 = 0.0, Q2 = 0.0, Q3 = 0.0, D3 = 0.0, D4 = 0.0;
    double gap_envelope_worst = 0.0;  // sup_n (n - ell_{L_n}) / (D3 n^{(eps+delta*beta)/beta})
    double eps0 = 0.1;
    double worst_block_eps = 0.0;     // max_j sampled ||A_j - mu_{ell_j}||_alpha
    double worst_power_ratio = 0.0;   // max_{j,n<=5} ||A_j^n - mu|| / eps0^n
};

// Recomposes the normalized cocycle between visits (m_0 = 0, then the visit
// record) and joins blocks along the schedule. Visit indices are relative to
// the window start. Throws WindowError when the schedule demand m_{N_jmax}
// is not covered.
InducedBlocks induce(const CocycleWindow& normalized, const RPFTriplet& trip,
                     const VisitRecord& visits, const BlockSchedule& sched,
                     const CellGeometry& cells, double alpha,
                     double E4 = 1.0, double a_drift = 0.0);

struct BlockTriplet {
    std::vector<std::complex<double>> z_grid;
    double delta_J = 0.0;  // V_J radius from the measured constants
    double E5 = 0.0, E9 = 0.0, zeta1 = 0.0, zeta2 = 0.0;
    // per z-grid entry
    std::vector<std::vector<std::complex<double>>> lambdas;  // blocks 0..J-ish
    std::vector<double> res_nu_one;  // max_j |nu_j(1) - 1|
    std::vector<double> res_nu_h;    // max_j |nu_j(h_j) - 1|
    // z = 0 reduction to the base triplet
    double z0_lambda_dev = 0.0, z0_h_dev = 0.0, z0_nu_dev = 0.0;
    // rank-one decay of the joined cocycle
    double decay_ratio = 0.0;  // fitted geometric ratio (target <= 2 eps0)
    double R0_fit = 0.0;
    std::vector<std::vector<std::complex<double>>> h0_values;  // h_j entries sample (diagnostic)
};

// Twisted joined blocks up to index J, plain after; triplets from one exact
// backward (nu, lambda) sweep anchored in the plain tail and one forward h
// sweep from h_0 = 1. Throws when a grid point leaves V_J.
BlockTriplet block_triplet(const CircleFamily& fam, const EnvPath& path,
                           const RandomFunction& potential, const RandomFunction& observable,
                           const Discretization& disc, const RPFTriplet& trip,
                           const InducedBlocks& blocks, int J,
                           const std::vector<std::complex<double>>& z_grid_in,
                           double radius_lead = 0.1);

// mean of the block Birkhoff sum U_j under mu_{ell_j}, exact on the cells
double block_mean_birkhoff(const CircleFamily& fam, const EnvPath& path,
                           const RandomFunction& observable, const RPFTriplet& trip,
                           long abs_from, long abs_to);

// x ~ mu (cell proportional to mass, uniform inside the cell); circle systems
double sample_mu_point(const Eigen::VectorXd& mu, const CellGeometry& cells, Rng& rng);

struct MomentBound {
    double lhs = 0.0;     // MC estimate of || S_{j,n} f - mean ||_{L^p}
    double rhs = 0.0;     // C E12 (j+n)^zeta n^{1/2}
    double rel_se = 0.0;  // delta-method standard error of lhs, relative
    bool stable = true;   // rel_se <= 20%
};

MomentBound moment_bound_check(const CircleFamily& fam, const EnvPath& path,
                               const RandomFunction& observable, const RPFTriplet& trip,
                               long j_abs, int n, double p, double CE12, double zeta,
                               int mc_samples = 4000, std::uint64_t seed = 17);

}  // namespace rdlab
