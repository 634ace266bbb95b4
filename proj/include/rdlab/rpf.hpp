#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "rdlab/transfer.hpp"

namespace rdlab {

// (lambda_i, h_i, nu_i) along a window, normalized so nu_i(h_i) = 1 and
// |nu_i| = 1. Index i is absolute; reported range excludes the burn-in.
struct RPFTriplet {
    long begin = 0;
    std::vector<double> lambdas;
    std::vector<Eigen::VectorXd> h;
    std::vector<Eigen::VectorXd> nu;
    std::vector<double> eigen_residual;
    std::vector<double> dual_residual;
    std::vector<double> normalization_residual;

    std::size_t size() const { return lambdas.size(); }
    long end() const { return begin + long(lambdas.size()); }
    std::size_t pos(long absolute) const { return std::size_t(absolute - begin); }
    Eigen::VectorXd mu(long absolute) const {
        std::size_t p = pos(absolute);
        return h[p].cwiseProduct(nu[p]);
    }
};

// h by backward pullback of 1 with running sup-normalization, nu by adjoint
// pullback from the window end, lambda recovered from the duality relation.
// Throws ConvergenceError when the eigen residual exceeds tol after burn_in.
RPFTriplet solve_triplet(const CocycleWindow& window, long burn_in, double tol);

// plain window restricted to the triplet range with each operator normalized;
// covers [trip.begin, trip.end()-1)
CocycleWindow normalized_window(const CocycleWindow& plain, const RPFTriplet& trip);

struct NormalizedPotential {
    long begin = 0;
    double s = 3.0;
    std::vector<Eigen::VectorXd> phi_tilde;  // values on cells per index
    std::vector<double> H;        // max(1, ||phi||_alpha) per index
    std::vector<double> Q;        // backward oscillation series with H
    std::vector<double> H_tilde;  // H + s Q_i + s Q_{i+1} N_i
    std::vector<double> Q_tilde;  // backward series with H_tilde
    std::vector<double> branch_residual;  // || sum_branches e^{phi~} - 1 ||_inf per index

    std::size_t size() const { return phi_tilde.size(); }
    std::size_t pos(long absolute) const { return std::size_t(absolute - begin); }
};

// phi~ = phi + ln h - ln(h_next o T) + ln lambda on cell representatives, with
// the oscillation series Q, Q~ truncated at relative 1e-12 (requires
// E[gamma^-alpha] < 1 on the family's states).
NormalizedPotential normalized_potential(const RPFTriplet& trip, const CircleFamily& fam,
                                         const EnvPath& path, const RandomFunction& phi,
                                         const Discretization& disc, double s = 3.0,
                                         double residual_tol = 1e-6);

struct DecayReport {
    std::vector<std::string> test_labels;
    std::vector<int> ns;
    std::vector<double> decay;       // sup over tests of ||L^n g - mu(g)||_inf / ||g||_alpha
    std::vector<double> corr;        // |mu(f_bar (g o T^n))| for the first test pair
    std::vector<double> corr_envelope;
    int valid_count = 0;             // table prefix above the noise floor
    double exp_rate = 0.0;           // slope of log decay against n
    double poly_rate = 0.0;          // slope of log decay against log n
    double exp_rss = 0.0, poly_rss = 0.0;
    std::string regime;              // exponential | polynomial | indeterminate
    double beta_fit = 0.0;
    double envelope_R = 0.0;         // max n^{beta_fit} decay(n) on the valid range
    bool envelope_stable = false;
};

// Regime fits run on the last half of the above-noise-floor segment
// (floor 1e-14); ties within a 0.8 rms margin are reported indeterminate.
DecayReport decay_rate(const CocycleWindow& normalized, const RPFTriplet& trip,
                       const std::vector<std::pair<std::string, Eigen::VectorXd>>& tests,
                       int n_max, double alpha, const CellGeometry& cells);

}  // namespace rdlab
