#pragma once

#include <Eigen/Sparse>
#include <functional>
#include <memory>

#include "hypolab/domain_grid.hpp"
#include "hypolab/operator_core.hpp"

namespace hypolab {

/// Conservative finite-difference system for L - c - eps on a mask. Rows are
/// indexed by interior nodes and evaluate the discrete (L - c - eps)u; the
/// couplings into boundary nodes are folded into boundary_map, keeping the
/// interior matrix square (and W-symmetric for diagonal A, the discrete form
/// of the self-adjointness in L^2(d nu)).
struct StencilSystem {
    MaskPtr mask;
    Eigen::SparseMatrix<double> matrix;        // n_int x n_int
    Eigen::SparseMatrix<double> boundary_map;  // n_int x n_bnd
    Eigen::VectorXd nu_weights;                // V(x) * prod(h) per interior node
    bool diag_a = true;   // A diagonal at every stencil evaluation
    bool mmatrix = false; // sign pattern verified at assembly
    double epsilon = 0.0;

    /// max |W M - (W M)^T| / max |W M| with W = diag(nu_weights).
    double w_symmetry_defect() const;
    /// Row sums of matrix + boundary_map (the discrete L(1), equal to -(c+eps)
    /// up to roundoff for conservative fluxes).
    Eigen::VectorXd l_one() const;
};

using SystemPtr = std::shared_ptr<const StencilSystem>;

StencilSystem assemble(const OperatorSpec& spec, MaskPtr mask);
inline StencilSystem assemble(const OperatorSpec& spec, const DomainMask& mask) {
    return assemble(spec, std::make_shared<DomainMask>(mask));
}

/// Elliptic regularization P_n = P + (1/n) * Delta_h.
StencilSystem regularize(const StencilSystem& sys, long n);

struct MmatrixReport {
    bool pass = false;
    bool offdiag_ok = false;
    bool rowsum_ok = false;
    double min_offdiag = 0.0;
    double max_rowsum = 0.0;
    std::vector<std::array<long, 2>> violations;  // (row, col), capped
};

MmatrixReport check_mmatrix(const StencilSystem& sys);

/// w-reduction  L~ u = w L(w u)  with  w(x) = 1 - m |x - x0|^2, valid on the
/// ball |x - x0| < 1/sqrt(m). Discretely this is an exact diagonal scaling of
/// the assembled system.
struct TildeTransform {
    OperatorSpec spec;
    Eigen::VectorXd x0;
    double m = 1.0;

    double w(const Eigen::VectorXd& x) const;
    /// Analytic zero-order term L~(1)(x) = w^2 gamma - 2m trace A - 2m <b, x-x0>
    /// with gamma = -(c + eps) and b the non-divergence first-order coefficients.
    double l_one(const Eigen::VectorXd& x) const;
    StencilSystem transform(const StencilSystem& sys) const;
};

TildeTransform tilde_transform(const OperatorSpec& spec, const Eigen::VectorXd& x0, double m);

/// Discrete (L - c - eps) of a callable field at one point, using the same
/// flux formulas as assemble(); the independent route for cross-checks.
double apply_flux_stencil(const OperatorSpec& spec, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& h,
                          const std::function<double(const Eigen::VectorXd&)>& u);

/// Coefficients with magnitude below this are flushed to exactly zero, so the
/// infinitely-degenerate gallery profiles yield exactly degenerate rows.
inline constexpr double kCoefficientFlush = 1e-300;

}  // namespace hypolab
