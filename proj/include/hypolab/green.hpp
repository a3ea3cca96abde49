#pragma once

#include <Eigen/Dense>
#include <array>
#include <memory>
#include <vector>

#include "hypolab/dirichlet.hpp"

namespace hypolab {

/// Discrete Green kernel k[x][y] over interior nodes: k = (-W M)^{-1} with
/// M the interior matrix and W = diag(nu_weights), so G f = k (W f) solves
/// the zero-boundary problem. Symmetric to factorization accuracy whenever
/// W M is (diagonal-A systems).
struct GreenMatrix {
    SystemPtr sys;
    Eigen::MatrixXd k;           // n_int x columns.size()
    std::vector<long> columns;   // interior rows realized as columns
    Eigen::VectorXd weights;     // nu_weights copy

    bool full() const { return static_cast<long>(columns.size()) == k.rows(); }
    /// G f over interior nodes (full mode).
    Eigen::VectorXd apply(const Eigen::VectorXd& f_interior) const;
    double max_relative_asymmetry() const;  // full mode
    double min_entry() const;
    Eigen::VectorXd row_masses() const;     // G(1) per interior node
    double total_mass() const;              // sum_x row_mass(x) * w_x
};

GreenMatrix green_matrix(SystemPtr sys, long dense_cap = 20'000);
/// Column-subset mode for grids above the dense cap.
GreenMatrix green_matrix(SystemPtr sys, const std::vector<long>& interior_columns);

struct ReproductionReport {
    double residual_g_of_l = 0.0;  // |G(L_eps phi) + phi|_inf
    double residual_l_of_g = 0.0;  // |L_eps(G phi) + phi|_inf
    double phi_norm = 0.0;
};

/// Checks G_eps(L_eps phi) = -phi = L_eps(G_eps phi) for phi vanishing on the
/// boundary and on a two-node collar.
ReproductionReport verify_reproduction(const GreenMatrix& gm, const Field& phi);

struct DecayProfile {
    std::vector<long> resolutions;
    std::vector<double> collar_max;  // max of k(x,.) over the one-node collar
    bool strictly_decreasing = false;
};

/// Rebuilds the mask at each resolution and tracks the boundary-collar
/// maximum of k(x, .) for the interior node nearest to x.
DecayProfile verify_boundary_decay(const OperatorSpec& spec, const ShapeInfo& shape,
                                   const std::vector<std::array<double, 2>>& bounds,
                                   const std::vector<long>& resolutions,
                                   const Eigen::VectorXd& x);

struct MarginReport {
    double min_margin = 0.0;  // min over interior of u - eps * G u
    long witness = -1;
    double sup_u = 0.0;
    double harmonic_residual = 0.0;
};

/// Comparison bound: u(x) >= eps * sum_y u(y) k(x,y) w_y for nonnegative u
/// that is discrete L-harmonic on a mask strictly containing gm's mask.
MarginReport comparison_bound(const GreenMatrix& gm, const Field& u_enclosing,
                              double harmonic_tol = 1e-9);

}  // namespace hypolab
