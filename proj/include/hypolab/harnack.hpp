#pragma once

#include <Eigen/Dense>
#include <vector>

#include "hypolab/dirichlet.hpp"

namespace hypolab {

/// Discrete harmonic-measure matrix: p[x][z] is the value at interior row x
/// of the solution with boundary data = indicator of boundary node z. Only
/// the `active` boundary nodes (those with stencil coupling into some
/// interior row) carry columns; the remaining boundary nodes never enter the
/// discrete solve and have identically zero harmonic measure. The columns
/// generate the nonnegative discrete harmonic cone, which makes the
/// extremized ratio constants below exact (mediant inequality).
struct PoissonKernel {
    SystemPtr sys;
    std::vector<long> active;  // boundary rows with coupling, ascending
    Eigen::MatrixXd p;         // n_int x active.size()

    Eigen::VectorXd row_sums() const;
    double min_entry() const;
    /// Superposes boundary data (full boundary vector): u_int = p * phi|active.
    Eigen::VectorXd superpose(const Eigen::VectorXd& phi_boundary) const;
};

PoissonKernel poisson_kernel(SystemPtr sys);

/// Interior nodes of the mask inside the closed ball (grid node ids).
std::vector<long> ball_compact(const DomainMask& mask, const Eigen::VectorXd& center,
                               double radius);

struct WeakConstant {
    double c = 1.0;
    long witness_z = -1;  // column index into pk.active
    long witness_x = -1;  // interior row
};

/// C(y0) = max over boundary z and x in K of p[x][z] / p[y0][z]; exact for
/// the discrete cone. K holds grid node ids of interior nodes.
WeakConstant weak_constant(const PoissonKernel& pk, const std::vector<long>& K, long y0_node);

struct StrongConstant {
    double m = 1.0;
    long witness_z = -1;
    long witness_x1 = -1;  // interior rows
    long witness_x2 = -1;
};

/// M(K) = max over z, x1, x2 in K of p[x1][z] / p[x2][z]; always >= 1.
StrongConstant strong_constant(const PoissonKernel& pk, const std::vector<long>& K);

struct DerivativeTable {
    int m = 0;
    double constant = 0.0;              // max_z sum_{|alpha|<=m} sup_K |D^a p_z| / p[y0][z]
    std::vector<double> per_order;      // contribution of each |alpha| at the witness z
    long witness_z = -1;
};

/// Upper bound for the derivative Harnack constant over the cone; centered
/// differences up to order m <= 4, K at index distance >= m+1 from the
/// boundary.
DerivativeTable derivative_constant(const PoissonKernel& pk, const std::vector<long>& K,
                                    long y0_node, int m);

struct ChainReport {
    int p = 0;
    double bound = 1.0;  // 3^p
    std::vector<long> centers;  // grid node ids in cover order
    std::vector<double> radii;
};

/// Per-node radii delta(x) such that every Poisson column stays within
/// [1/2, 3/2] of its center value on the ball, then a greedy ordered cover of
/// K with the chaining property; the cone then satisfies M(K) <= 3^p.
ChainReport chain_of_balls(const PoissonKernel& pk, const std::vector<long>& K, double delta);

}  // namespace hypolab
