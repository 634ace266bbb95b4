#pragma once

#include <complex>
#include <vector>

#include "rdlab/blocks.hpp"
#include "rdlab/rpf.hpp"

namespace rdlab {

// E[e^{z S_n}] computed through raw twisted operators with the triplet's
// telescoped normalization: one matrix per environment state, lambda-scaled
// steps, boundary contraction with mu_n / h_n. `centered` subtracts the
// per-fiber means from the Birkhoff sum.
class TwistedSweep {
public:
    TwistedSweep(const CircleFamily& fam, const EnvPath& path,
                 const RandomFunction& potential, const RandomFunction& observable,
                 const Discretization& disc, const RPFTriplet& trip, bool centered = true);

    // values E[e^{z S_n}] for purely imaginary z = i t at each checkpoint
    std::vector<std::complex<double>> imaginary(double t, const std::vector<long>& ns) const;
    // ln E[e^{z S_n}] for real z, sup-renormalized
    double real_log(double z, long n) const;
    // per-fiber mean of the observable under mu_i (available after build)
    double mean_sum(long n) const;  // sum of mu_i(f_i) over the first n fibers

private:
    const CircleFamily& fam_;
    const EnvPath& path_;
    const RandomFunction& potential_;
    const RandomFunction& observable_;
    Discretization disc_;
    const RPFTriplet& trip_;
    bool centered_;
    std::vector<double> mean_prefix_;
};

// single-point characteristic function E[e^{i t S-bar_n}]
std::complex<double> char_fn(const CircleFamily& fam, const EnvPath& path,
                             const RandomFunction& potential, const RandomFunction& observable,
                             const Discretization& disc, const RPFTriplet& trip, double t,
                             long n);

struct VarianceReport {
    std::vector<long> ns;
    std::vector<double> sigma2_over_n;  // Sigma^2_{omega,n} / n
    double sigma2_series = 0.0;
    double mean_f2 = 0.0;               // averaged mu(f-bar^2)
    std::vector<double> b_k;            // lag correlations, k = 1..k_max
    double envelope_C = 0.0, envelope_beta = 0.0;
    double tail_bound = 0.0;
    double convergence_slope = 0.0;
    bool below_noise = false;           // deviations at rounding level on the grid
};

// Sigma^2_{omega,n} from the exact pairwise decomposition (lags truncated at
// k_max, tail bounded by the fitted envelope); throws TruncationError when
// the tail bound exceeds 1% of the series value.
VarianceReport variance(const CircleFamily& fam, const EnvPath& path,
                        const RandomFunction& potential, const RandomFunction& observable,
                        const Discretization& disc, const RPFTriplet& trip,
                        const std::vector<long>& n_grid, int k_max);

enum class SigmaMode { operators, sample };

struct CLTRow {
    long n = 0;
    double sigma_n = 0.0;  // ||S-bar_n||_{L^2}
    double ks = 0.0;
    double esseen = 0.0;   // integral + (24/pi)/T with T = c sigma-hat_n
    double T = 0.0;
};

struct CLTReport {
    std::vector<CLTRow> rows;
    double be_slope = 0.0;
    double be_r2 = 0.0;
    std::vector<double> char_ts;
    std::vector<std::complex<double>> char_values;  // at the largest grid n
};

CLTReport clt_report(const CircleFamily& fam, const EnvPath& path,
                     const RandomFunction& potential, const RandomFunction& observable,
                     const Discretization& disc, const RPFTriplet& trip,
                     const std::vector<long>& n_grid, long mc_samples,
                     double esseen_c = 1.0, SigmaMode sigma_mode = SigmaMode::operators,
                     std::uint64_t seed = 29, int quad_intervals = 128);

struct MDPRow {
    double t = 0.0;
    long n = 0;
    double scaled_cumulant = 0.0;  // (1/a_n^2) ln E[e^{t a_n S-bar_n/(sigma sqrt n)}]
    double limit_error = 0.0;      // |cumulant - t^2/2|
};

struct MDPReport {
    std::vector<MDPRow> cumulants;
    bool convexity_ok = true;
    bool clipped = false;
    std::vector<std::pair<double, double>> gammas;
    std::vector<double> set_rate_mc;        // at the largest n
    std::vector<double> set_rate_slope;     // regression of ln P against a_n^2
    std::vector<double> set_rate_closure;   // -inf over the closure of x^2/2
    std::vector<double> set_rate_interior;
};

// a_n = n^{a_expo}, W_n = S-bar_n / (sigma sqrt(n) a_n); exact cumulants via
// real twists inside the verified domain, interval rates by Monte Carlo.
MDPReport mdp_report(const CircleFamily& fam, const EnvPath& path,
                     const RandomFunction& potential, const RandomFunction& observable,
                     const Discretization& disc, const RPFTriplet& trip, double sigma,
                     double a_expo, const std::vector<double>& t_grid,
                     const std::vector<std::pair<double, double>>& gammas,
                     const std::vector<long>& n_grid, long mc_samples,
                     double domain_radius = 0.0,  // 0: unrestricted
                     std::uint64_t seed = 37);

struct GrowthFit {
    double A = 0.0;  // sup_k k^{-a-eps} W_k
    bool diverging = false;
};

GrowthFit growth_fit(const std::vector<double>& series, double drift_a, double p, double eps);

}  // namespace rdlab
