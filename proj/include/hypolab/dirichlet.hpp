#pragma once

#include <Eigen/Sparse>
#include <memory>
#include <vector>

#include "hypolab/discretize.hpp"

namespace hypolab {

/// Grid function on a mask: values at interior and boundary nodes.
struct Field {
    MaskPtr mask;
    Eigen::VectorXd interior;  // by interior row
    Eigen::VectorXd boundary;  // by boundary row

    double at_node(long node) const;
    double sup_norm() const;
    double interior_max() const;
    double boundary_max() const;
    double min_value() const;
    double oscillation() const;  // max - min over interior + boundary
};

Field make_field(MaskPtr mask, const std::function<double(const Eigen::VectorXd&)>& fn);
Field constant_field(MaskPtr mask, double value);

struct SolveOptions {
    long direct_cap = 300'000;   // above this, fall back to CG (diagonal-A systems)
    double residual_tol = 1e-10; // relative residual accepted from a solve
};

/// Factor-once solver for a StencilSystem; the factorization is immutable and
/// can serve many right-hand sides (Green/Poisson construction).
class DirichletSolver {
public:
    explicit DirichletSolver(SystemPtr sys, SolveOptions opt = {});

    /// Solves (discrete L_eps) u = -f with u = phi on the boundary.
    Field solve(const Field& f, const Field& phi) const;
    /// Raw interior solve: matrix * u = rhs, with the residual contract.
    Eigen::VectorXd solve_interior(const Eigen::VectorXd& rhs) const;
    /// Batched interior solves, one column at a time against the shared
    /// factorization.
    Eigen::MatrixXd solve_interior(const Eigen::MatrixXd& rhs) const;

    const StencilSystem& system() const { return *sys_; }
    SystemPtr system_ptr() const { return sys_; }
    bool iterative() const { return iterative_; }

private:
    SystemPtr sys_;
    SolveOptions opt_;
    bool iterative_ = false;
    std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu_;
    Eigen::SparseMatrix<double> spd_;  // -W*matrix for the CG path
    Eigen::VectorXd w_;
    double mat_scale_ = 0.0;
};

/// One-shot convenience solve.
Field solve(SystemPtr sys, const Field& f, const Field& phi, SolveOptions opt = {});
Field solve(const StencilSystem& sys, const Field& f, const Field& phi, SolveOptions opt = {});

struct LadderReport {
    std::vector<long> n_list;
    std::vector<Field> solutions;
    std::vector<double> sup_norms;
    std::vector<double> dist_to_limit;     // sup distance to the unregularized solve
    std::vector<double> consecutive_dist;  // |u_{n_k} - u_{n_{k+1}}|_inf
    Field limit;
    double c0 = 0.0;        // certified constant: discrete L(1) <= -c0 for every rung
    bool c0_certified = false;
    bool uniform_bound_ok = false;  // |u_n| <= max(|phi|, |f|/c0) for every n
};

/// Appendix ladder: solve with P_n = P + (1/n) Delta_h for each n, check the
/// uniform sup bound and the Cauchy behavior toward the unregularized solve.
LadderReport regularization_ladder(const OperatorSpec& spec, MaskPtr mask, const Field& f,
                                   const Field& phi, const std::vector<long>& n_list);

struct WmpReport {
    bool subsolution = false;      // (L u)_i >= -tol at all interior nodes
    bool boundary_nonpos = false;  // u <= tol on the boundary
    bool implication_pass = true;  // u <= tol' everywhere when both hold
    long witness = -1;             // violating node, if any
    bool sup_applicable = false;   // u >= 0 subsolution: sup check applies
    bool sup_pass = true;          // sup over closure attained on the boundary
    double interior_max = 0.0;
    double boundary_max = 0.0;
    double min_residual = 0.0;
};

/// Checks the weak-maximum-principle implication and, for nonnegative
/// subsolutions, that the sup over the closure equals the boundary sup.
WmpReport wmp_check(const StencilSystem& sys, const Field& u, double tol = 1e-10);

}  // namespace hypolab
