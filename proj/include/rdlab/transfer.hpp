#pragma once

#include <Eigen/Dense>

#include <complex>
#include <memory>
#include <vector>

#include "rdlab/systems.hpp"

namespace rdlab {

enum class DiscScheme { ulam, cylinder };

struct Discretization {
    DiscScheme scheme = DiscScheme::ulam;
    int resolution = 2;  // circle: cell count; sft: cell count (= alphabet size, depth-1)
};

// Cell layout of one fiber. Circle cells are uniform intervals with midpoint
// representatives; sft cells are depth-1 cylinders keyed by the leading symbol.
struct CellGeometry {
    bool circle = true;
    int count = 0;

    double rep(int i) const { return (double(i) + 0.5) / double(count); }
    double dist(int i, int j) const {
        if (i == j) return 0.0;
        return circle ? circle_dist(rep(i), rep(j)) : 1.0;
    }
    int cell_of(double x) const {
        int c = int(std::floor(x * double(count)));
        if (c < 0) c = 0;
        if (c >= count) c = count - 1;
        return c;
    }
};

CellGeometry make_cells(const FiberedSystem& sys, const Discretization& disc);

struct OperatorMatrix {
    long fiber_index = 0;              // source fiber position in its window
    Eigen::MatrixXcd entries;          // rows: target cells, cols: source cells
    std::complex<double> twist{0.0, 0.0};
    bool normalized = false;

    int rows() const { return int(entries.rows()); }
    int cols() const { return int(entries.cols()); }
};

// weight e^{phi(y) + z f(y)} summed over preimage branches, midpoint collocation
OperatorMatrix build_operator(const CircleFamily& fam, int state,
                              const RandomFunction& potential, const Discretization& disc,
                              std::complex<double> twist_z = {0.0, 0.0},
                              const RandomFunction* observable = nullptr);

struct CocycleWindow {
    long start_offset = 0;
    std::vector<std::shared_ptr<const OperatorMatrix>> ops;  // ops[i]: fiber start+i -> start+i+1

    long begin() const { return start_offset; }
    long end() const { return start_offset + long(ops.size()); }
    const OperatorMatrix& op(long absolute) const {
        return *ops[std::size_t(absolute - start_offset)];
    }
};

// one operator per path index, shared per environment state
CocycleWindow build_window(const CircleFamily& fam, const EnvPath& path,
                           const RandomFunction& potential, const Discretization& disc,
                           long from, long to, std::complex<double> twist_z = {0.0, 0.0},
                           const RandomFunction* observable = nullptr);

// n-step left-ordered product starting at `from`; n = 0 gives the identity
OperatorMatrix compose(const CocycleWindow& window, long from, long n);

// v at fiber `from` pushed forward n steps
Eigen::VectorXcd apply_window(const CocycleWindow& window, long from, long n,
                              const Eigen::VectorXcd& v);

// g -> L(g h_src) / (lambda h_tgt); no silent fixup, the L1 residual is measured
OperatorMatrix normalize(const OperatorMatrix& op, double lambda,
                         const Eigen::VectorXd& h_source, const Eigen::VectorXd& h_target);

// sup norm of M 1 - 1 (real part)
double l1_residual(const OperatorMatrix& op);

// |int g (f o T) dmu_src - int (Lg) f dmu_tgt| on the discretization; f o T is
// the exact Ulam cell average for circle maps
double duality_residual(const CircleFamily& fam, int state, const Discretization& disc,
                        const OperatorMatrix& op, const Eigen::VectorXd& mu_source,
                        const Eigen::VectorXd& mu_target, const Eigen::VectorXd& g,
                        const Eigen::VectorXd& f);

// sup and alpha-Holder seminorm (pairs at distance <= r_cap) of a field,
// sampled on a refined grid; stride documented for large resolutions
struct FieldNorms {
    double sup = 0.0;
    double seminorm = 0.0;  // v_{alpha, r_cap}
};
FieldNorms field_norms(const CircleFamily& fam, int state, const RandomFunction& field,
                       double alpha, double r_cap, int grid = 512);

// discrete alpha-Holder norm data for a cell vector
double vector_sup(const Eigen::VectorXcd& v);
double vector_holder_seminorm(const Eigen::VectorXcd& v, const CellGeometry& cells,
                              double alpha, double r_cap);
inline double vector_alpha_norm(const Eigen::VectorXcd& v, const CellGeometry& cells,
                                double alpha, double r_cap) {
    return vector_sup(v) + vector_holder_seminorm(v, cells, alpha, r_cap);
}

struct PerturbationBound {
    double lhs_norm = 0.0;   // sampled ||L^n_z - L^n|| in the alpha,xi operator norm
    double rhs_bound = 0.0;  // analytic bound assembled from the geometry
    double gamma_product = 0.0;
    double q_phi = 0.0;
    double q_f = 0.0;
    double sup_snf = 0.0;
};

// twisted-vs-plain n-step difference against the analytic perturbation bound
PerturbationBound perturbation_bound(const CircleFamily& fam, const EnvPath& path,
                                     const RandomFunction& potential,
                                     const RandomFunction& observable,
                                     const Discretization& disc, long from, long n,
                                     std::complex<double> z,
                                     std::uint64_t sample_seed = 5);

}  // namespace rdlab
