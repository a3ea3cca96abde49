#pragma once

#include <Eigen/Dense>
#include <vector>

#include "hypolab/dirichlet.hpp"
#include "hypolab/domain_grid.hpp"
#include "hypolab/operator_core.hpp"

namespace hypolab {

/// One leg of a control path: fixed control coefficients xi in R^{1+N},
/// integrated for `duration` along  gamma' = xi_0 X_0 + sum_i xi_i X_i.
struct PathSegment {
    Eigen::VectorXd xi;
    double duration = 0.0;
    std::vector<Eigen::VectorXd> samples;  // polyline including endpoints
    double step_doubling_error = 0.0;      // per unit time
};

struct ControlPath {
    std::vector<Eigen::VectorXd> start_end;  // [start, end]
    std::vector<PathSegment> segments;

    const Eigen::VectorXd& start() const { return start_end[0]; }
    const Eigen::VectorXd& end() const { return start_end[1]; }
    /// Largest gap between consecutive segment endpoints.
    double chain_gap() const;
};

/// RK4 with fixed step dt; throws LeftDomain when the trajectory leaves the
/// bounding box. Returns the polyline; a step-doubling error estimate is
/// written to *err_per_time if given.
std::vector<Eigen::VectorXd> integral_curve(const VectorFieldSet& fields,
                                            const Eigen::VectorXd& x_start,
                                            const Eigen::VectorXd& xi, double t_end, double dt,
                                            const Box& bounds, double* err_per_time = nullptr);

struct ReachReport {
    MaskPtr mask;
    std::vector<char> reached;   // per interior row
    long reached_count = 0;
    bool complete = false;       // every interior cell reached
    bool budget_exhausted = false;
    std::vector<long> parent;    // interior row of the discoverer, -1 at the root
    std::vector<Eigen::VectorXd> leg_xi;      // control used to enter the cell
    std::vector<double> leg_duration;
    long start_row = -1;

    /// Reconstructs and re-validates the path from the start cell.
    ControlPath path_to(const OperatorSpec& spec, long interior_row) const;
};

/// Breadth-first reachability over interior cells with the finite control
/// dictionary {±X_1,...,±X_N, ±X_0}; every claimed cell carries a validated
/// leg back to its discoverer. Deterministic: the frontier is ordered by
/// interior row, candidate merges resolve by (frontier position, move id).
ReachReport reachable_set(const OperatorSpec& spec, const Eigen::VectorXd& x_start,
                          MaskPtr mask, long step_budget = 1'000'000);

struct SmpReport {
    bool interior_max_attained = false;
    bool pass = true;
    double deviation = 0.0;  // max over the reachable set of (max u - u)
    double tol = 0.0;
    long argmax_node = -1;
    double interior_max = 0.0;
    double boundary_max = 0.0;
    long reached_count = 0;
};

/// Maximum propagation: when a discrete subsolution attains its sup in the
/// interior, it must be constant (within tol = tol_scale * osc(u)) on the
/// reachable set of the argmax cell.
SmpReport smp_test(const Field& u, const OperatorSpec& spec, MaskPtr mask,
                   double tol_scale = 1e-7, double subsolution_tol = 1e-9,
                   long step_budget = 1'000'000);

struct HopfCertificate {
    Eigen::VectorXd y, nu;
    double lambda = 0.0;
    double lw_at_y = 0.0;   // L applied to the barrier at y, analytic formula
    double quad = 0.0;      // <A(y) nu, nu>
    double sum_term = 0.0;  // sum_j (a_jj(y) - b_j(y) nu_j)
    double threshold = 0.0; // sum_term / (2 quad)
};

/// Barrier w(x) = exp(-lambda |x-(y+nu)|^2) - exp(-lambda |nu|^2) with
/// lambda = 2 max(1, threshold), which makes L w(y) strictly positive.
HopfCertificate hopf_certificate(const OperatorSpec& spec, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& nu);

/// Discrete cross-check: the assembled flux stencil applied to the sampled
/// barrier at y; agrees with lw_at_y to O(h^2).
double hopf_discrete_crosscheck(const OperatorSpec& spec, const HopfCertificate& cert, double h);

struct CharReport {
    bool characteristic = false;
    double value = 0.0;  // <A(y) nu, nu>
};

CharReport characteristic_test(const OperatorSpec& spec, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& nu, double tol_char = 1e-14);

}  // namespace hypolab
