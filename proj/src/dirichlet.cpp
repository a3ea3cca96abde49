#include "hypolab/dirichlet.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <cmath>

#include "hypolab/errors.hpp"

namespace hypolab {

double Field::at_node(long node) const {
    if (mask->status[node] == NodeStatus::Interior) return interior[mask->interior_index[node]];
    if (mask->status[node] == NodeStatus::Boundary) return boundary[mask->boundary_index[node]];
    throw PreconditionViolated("field value requested at an exterior node");
}

double Field::sup_norm() const {
    double s = interior.size() ? interior.cwiseAbs().maxCoeff() : 0.0;
    if (boundary.size()) s = std::max(s, boundary.cwiseAbs().maxCoeff());
    return s;
}

double Field::interior_max() const {
    return interior.size() ? interior.maxCoeff() : -std::numeric_limits<double>::infinity();
}

double Field::boundary_max() const {
    return boundary.size() ? boundary.maxCoeff() : -std::numeric_limits<double>::infinity();
}

double Field::min_value() const {
    double m = interior.size() ? interior.minCoeff() : std::numeric_limits<double>::infinity();
    if (boundary.size()) m = std::min(m, boundary.minCoeff());
    return m;
}

double Field::oscillation() const {
    double mx = std::max(interior_max(), boundary_max());
    return mx - min_value();
}

Field make_field(MaskPtr mask, const std::function<double(const Eigen::VectorXd&)>& fn) {
    Field f;
    f.mask = mask;
    f.interior.resize(mask->n_interior());
    f.boundary.resize(mask->n_boundary());
    for (long r = 0; r < mask->n_interior(); ++r)
        f.interior[r] = fn(mask->grid.coords(mask->interior[r]));
    for (long r = 0; r < mask->n_boundary(); ++r)
        f.boundary[r] = fn(mask->grid.coords(mask->boundary[r]));
    if (!f.interior.allFinite() || !f.boundary.allFinite())
        throw CoefficientError("field has non-finite values");
    return f;
}

Field constant_field(MaskPtr mask, double value) {
    Field f;
    f.mask = mask;
    f.interior = Eigen::VectorXd::Constant(mask->n_interior(), value);
    f.boundary = Eigen::VectorXd::Constant(mask->n_boundary(), value);
    return f;
}

DirichletSolver::DirichletSolver(SystemPtr sys, SolveOptions opt)
    : sys_(std::move(sys)), opt_(opt) {
    const long n = sys_->matrix.rows();
    w_ = sys_->nu_weights;
    mat_scale_ = 0.0;
    for (int k = 0; k < sys_->matrix.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(sys_->matrix, k); it; ++it)
            mat_scale_ = std::max(mat_scale_, std::abs(it.value()));
    if (n > opt_.direct_cap && sys_->diag_a) {
        // CG on the W-symmetrized system; only diagonal-A systems are
        // symmetric there.
        iterative_ = true;
        spd_ = -(Eigen::SparseMatrix<double>(w_.asDiagonal() * sys_->matrix));
        spd_.makeCompressed();
        return;
    }
    lu_ = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
    lu_->compute(sys_->matrix);
    if (lu_->info() != Eigen::Success)
        throw SingularSystem(
            "sparse factorization failed (eps = 0 with c = 0 on a degenerate mesh?)");
}

Eigen::VectorXd DirichletSolver::solve_interior(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd u;
    if (iterative_) {
        Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
        cg.setTolerance(opt_.residual_tol * 1e-2);
        cg.setMaxIterations(20L * spd_.rows());
        cg.compute(spd_);
        u = cg.solve(Eigen::VectorXd(-(w_.asDiagonal() * rhs)));
        if (cg.info() != Eigen::Success) throw SolverDiverged("conjugate gradient stalled");
    } else {
        u = lu_->solve(rhs);
    }
    if (!u.allFinite()) throw SingularSystem("solve produced non-finite values");
    if (u.size()) {
        double res = (sys_->matrix * u - rhs).cwiseAbs().maxCoeff();
        double scale = std::max(rhs.cwiseAbs().maxCoeff(),
                                mat_scale_ * u.cwiseAbs().maxCoeff());
        if (scale > 0.0 && res > opt_.residual_tol * scale)
            throw SolverDiverged("relative residual above tolerance");
    }
    return u;
}

Eigen::MatrixXd DirichletSolver::solve_interior(const Eigen::MatrixXd& rhs) const {
    Eigen::MatrixXd out(rhs.rows(), rhs.cols());
    for (long c = 0; c < rhs.cols(); ++c)
        out.col(c) = solve_interior(Eigen::VectorXd(rhs.col(c)));
    return out;
}

Field DirichletSolver::solve(const Field& f, const Field& phi) const {
    const DomainMask& mask = *sys_->mask;
    if (f.mask->grid.total != mask.grid.total || phi.mask->grid.total != mask.grid.total)
        throw PreconditionViolated("field masks do not match the system mask");
    Eigen::VectorXd rhs = -f.interior - sys_->boundary_map * phi.boundary;
    Field u;
    u.mask = sys_->mask;
    u.interior = solve_interior(rhs);
    u.boundary = phi.boundary;
    return u;
}

Field solve(SystemPtr sys, const Field& f, const Field& phi, SolveOptions opt) {
    return DirichletSolver(std::move(sys), opt).solve(f, phi);
}

Field solve(const StencilSystem& sys, const Field& f, const Field& phi, SolveOptions opt) {
    return DirichletSolver(std::make_shared<StencilSystem>(sys), opt).solve(f, phi);
}

LadderReport regularization_ladder(const OperatorSpec& spec, MaskPtr mask, const Field& f,
                                   const Field& phi, const std::vector<long>& n_list) {
    if (n_list.empty()) throw PreconditionViolated("ladder needs at least one n");
    for (size_t i = 1; i < n_list.size(); ++i)
        if (n_list[i] <= n_list[i - 1])
            throw PreconditionViolated("ladder n_list must be increasing");

    StencilSystem base = assemble(spec, mask);
    LadderReport rep;
    rep.n_list = n_list;
    rep.limit = solve(base, f, phi);

    // Certify a uniform c0 > 0 with discrete L(1) <= -c0 across the whole
    // ladder; regularization adds a stencil with zero row sums.
    double max_l1 = base.l_one().maxCoeff();
    rep.c0 = -max_l1;
    rep.c0_certified = rep.c0 > 0.0;
    const double bound =
        std::max(phi.sup_norm(), rep.c0 > 0.0 ? f.sup_norm() / rep.c0
                                              : std::numeric_limits<double>::infinity());

    rep.uniform_bound_ok = true;
    for (long n : n_list) {
        StencilSystem sysn = regularize(base, n);
        Field un = solve(sysn, f, phi);
        rep.sup_norms.push_back(un.sup_norm());
        double dist = (un.interior - rep.limit.interior).cwiseAbs().maxCoeff();
        rep.dist_to_limit.push_back(dist);
        if (!rep.solutions.empty()) {
            double cd =
                (un.interior - rep.solutions.back().interior).cwiseAbs().maxCoeff();
            rep.consecutive_dist.push_back(cd);
        }
        if (rep.c0_certified && un.sup_norm() > bound * (1.0 + 1e-12) + 1e-300)
            rep.uniform_bound_ok = false;
        rep.solutions.push_back(std::move(un));
    }
    return rep;
}

WmpReport wmp_check(const StencilSystem& sys, const Field& u, double tol) {
    WmpReport rep;
    Eigen::VectorXd residual = sys.matrix * u.interior + sys.boundary_map * u.boundary;
    rep.min_residual = residual.size() ? residual.minCoeff() : 0.0;
    rep.subsolution = rep.min_residual >= -tol;
    rep.boundary_max = u.boundary_max();
    rep.interior_max = u.interior_max();
    rep.boundary_nonpos = rep.boundary_max <= tol;

    double scale = std::max(1.0, u.sup_norm());
    if (rep.subsolution && rep.boundary_nonpos) {
        double tol_out = tol + 1e-12 * scale;
        if (rep.interior_max > tol_out) {
            rep.implication_pass = false;
            long arg = 0;
            u.interior.maxCoeff(&arg);
            rep.witness = u.mask->interior[arg];
        }
    }

    if (rep.subsolution && u.min_value() >= -tol) {
        rep.sup_applicable = true;
        double sup_all = std::max(rep.interior_max, rep.boundary_max);
        if (sup_all - rep.boundary_max > 1e-10 * scale) {
            rep.sup_pass = false;
            if (rep.witness < 0) {
                long arg = 0;
                u.interior.maxCoeff(&arg);
                rep.witness = u.mask->interior[arg];
            }
        }
    }
    return rep;
}

}  // namespace hypolab
