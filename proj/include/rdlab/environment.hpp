#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace rdlab {

enum class EnvKind { iid, markov };

// Stationary base process over finitely many states. The two-sided shift is
// realized through finite windows indexed by an absolute offset.
struct EnvironmentModel {
    EnvKind kind = EnvKind::iid;
    int state_count = 1;
    std::vector<std::vector<double>> transition;  // row-stochastic, markov only
    std::vector<double> marginal;                 // stationary law of one coordinate
    std::uint64_t seed = 0;

    void validate() const;  // throws ModelError on bad stochastic data
};

EnvironmentModel make_iid(const std::vector<double>& marginal, std::uint64_t seed);
// stationary marginal computed from the transition matrix
EnvironmentModel make_markov(const std::vector<std::vector<double>>& transition,
                             std::uint64_t seed);

// Finite window of a two-sided realization. Indices outside the window are
// errors rather than lazily extended.
struct EnvPath {
    long offset = 0;
    std::vector<int> states;

    long begin() const { return offset; }
    long end() const { return offset + long(states.size()); }
    int at(long absolute_index) const;  // throws WindowError outside the window
    std::size_t size() const { return states.size(); }
};

EnvPath sample_path(const EnvironmentModel& env, long offset, long length,
                    std::uint64_t seed);

struct MixingProfile {
    std::function<double(int)> alpha_bound;  // upper bound on alpha(n)
    std::function<double(int)> psi_u_bound;  // upper bound on psi_U(n)
    double rho = 0.0;        // second-largest transition eigenvalue modulus
    double alpha_prefactor = 0.0;  // C with alpha(n) <= C rho^n
    std::string provenance;  // "analytic" | "assumed"

    // |E prod U_j - prod E U_j| <= 4 sum alpha(gap_i), blocks valued in [0,1]
    double block_product_bound(const std::vector<int>& gaps) const;
    // E prod Y_i <= (1+psi_U(L))^{d-1} prod E Y_i, d nonnegative blocks, gap L
    double psi_product_factor(int gap, int block_count) const;
};

// Analytic bounds from the transition spectrum; throws ModelError for a
// reducible (or periodic) chain.
MixingProfile mixing_bounds(const EnvironmentModel& env);

// exponent 1 - x(M+1) from the polynomial product-decay estimate
inline double product_decay_exponent(double M, double x) { return 1.0 - x * (M + 1.0); }

struct ProductDecayRow {
    int n;
    double mc_estimate;
    double mc_se;
    double lemma_bound;
};

// Monte Carlo means of prod_{j<n} g(theta^j omega) against the applicable
// analytic bound. g is a per-state table with values in [0,1], E[g] < 1.
std::vector<ProductDecayRow> product_decay(const EnvironmentModel& env,
                                           const std::vector<double>& g,
                                           int n_max, int mc_samples,
                                           std::uint64_t seed = 1);

struct VisitRecord {
    std::string level_set_id;
    std::vector<long> visit_indices;  // relative hit indices, starting at lag 1
    long path_length = 0;
};

// Hitting times of the level set along the path; lag-0 is excluded so the
// first entry is the classical first visiting time. Throws if no visits.
VisitRecord visiting_times(const EnvPath& path, const std::vector<char>& level_set,
                           const std::string& id = "A");

struct VisitDiagnostics {
    double kac_slope = 0.0;      // least-squares slope of m_k against k
    double kac_expected = 0.0;   // 1 / P(A)
    double envelope_sup = 0.0;   // sup_k m_k / k^{1+1/p+delta}
};

VisitDiagnostics visit_diagnostics(const VisitRecord& rec, double prob_A, double p,
                                   double delta);

struct IndicatorExpBound {
    double mc_estimate;
    double mc_se;
    double bound;       // c1 * n^{2 - eps*a} + tail(n)
    double fitted_c1;
    double attained_prob;  // level-set mass actually used
};

// E[exp(-c sum_{j<=n} 1_A(theta^{k j} omega))] against the mixing bound.
// A is the prefix of states whose mass is closest to A_prob.
IndicatorExpBound indicator_exp_bound(const EnvironmentModel& env, double A_prob,
                                      double c, int k_stride, int n,
                                      int mc_samples = 20000,
                                      double eps = 0.9, double a = 4.0,
                                      std::uint64_t seed = 2);

}  // namespace rdlab
