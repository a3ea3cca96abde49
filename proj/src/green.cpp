#include "hypolab/green.hpp"

#include <cmath>

#include "hypolab/errors.hpp"
#include "hypolab/parallel.hpp"

namespace hypolab {

namespace {

GreenMatrix build(SystemPtr sys, const std::vector<long>& cols) {
    DirichletSolver solver(sys);
    const long n = sys->matrix.rows();
    GreenMatrix gm;
    gm.sys = sys;
    gm.columns = cols;
    gm.weights = sys->nu_weights;
    gm.k.resize(n, static_cast<long>(cols.size()));
    // Column y solves  matrix * g = -e_y / w_y : a unit nu-mass source at y.
    constexpr long kChunk = 256;
    for (size_t c0 = 0; c0 < cols.size(); c0 += kChunk) {
        long width = std::min<long>(kChunk, static_cast<long>(cols.size() - c0));
        Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, width);
        for (long j = 0; j < width; ++j) {
            long y = cols[c0 + j];
            rhs(y, j) = -1.0 / gm.weights[y];
        }
        gm.k.middleCols(static_cast<long>(c0), width) = solver.solve_interior(rhs);
    }
    return gm;
}

}  // namespace

GreenMatrix green_matrix(SystemPtr sys, long dense_cap) {
    const long n = sys->matrix.rows();
    if (n > dense_cap)
        throw PreconditionViolated(
            "interior node count exceeds the dense cap; use column-subset mode");
    std::vector<long> cols(n);
    for (long i = 0; i < n; ++i) cols[i] = i;
    return build(std::move(sys), cols);
}

GreenMatrix green_matrix(SystemPtr sys, const std::vector<long>& interior_columns) {
    for (long c : interior_columns)
        if (c < 0 || c >= sys->matrix.rows())
            throw PreconditionViolated("column index out of range");
    return build(std::move(sys), interior_columns);
}

Eigen::VectorXd GreenMatrix::apply(const Eigen::VectorXd& f_interior) const {
    if (!full()) throw PreconditionViolated("apply requires a full Green matrix");
    return k * weights.cwiseProduct(f_interior);
}

double GreenMatrix::max_relative_asymmetry() const {
    if (!full()) throw PreconditionViolated("asymmetry check requires full mode");
    const long n = k.rows();
    const bool par = exec_policy().parallel;
    std::vector<double> row_defect(n, 0.0), row_scale(n, 0.0);
#pragma omp parallel for if (par) schedule(static)
    for (long i = 0; i < n; ++i) {
        double d = 0.0, s = 0.0;
        for (long j = 0; j < n; ++j) {
            d = std::max(d, std::abs(k(i, j) - k(j, i)));
            s = std::max(s, std::abs(k(i, j)));
        }
        row_defect[i] = d;
        row_scale[i] = s;
    }
    double defect = 0.0, scale = 0.0;
    for (long i = 0; i < n; ++i) {
        defect = std::max(defect, row_defect[i]);
        scale = std::max(scale, row_scale[i]);
    }
    return scale > 0.0 ? defect / scale : 0.0;
}

double GreenMatrix::min_entry() const {
    return k.size() ? k.minCoeff() : 0.0;
}

Eigen::VectorXd GreenMatrix::row_masses() const {
    if (!full()) throw PreconditionViolated("row masses require full mode");
    return k * weights;
}

double GreenMatrix::total_mass() const {
    return row_masses().dot(weights);
}

ReproductionReport verify_reproduction(const GreenMatrix& gm, const Field& phi) {
    const StencilSystem& sys = *gm.sys;
    const DomainMask& mask = *sys.mask;
    if (!gm.full()) throw PreconditionViolated("reproduction check requires full mode");
    if (phi.boundary.size() && phi.boundary.cwiseAbs().maxCoeff() != 0.0)
        throw PreconditionViolated("phi must vanish on the boundary");

    // Collar of width >= 2: interior nodes within Chebyshev distance 2 of a
    // non-interior node must carry zeros (discrete stand-in for compact
    // support).
    const int dim = mask.grid.dim;
    std::vector<std::vector<long>> offsets;
    {
        std::vector<long> off(dim, -2);
        while (true) {
            offsets.push_back(off);
            int d = 0;
            while (d < dim && off[d] == 2) off[d++] = -2;
            if (d == dim) break;
            ++off[d];
        }
    }
    for (long r = 0; r < mask.n_interior(); ++r) {
        if (phi.interior[r] == 0.0) continue;
        auto idx = mask.grid.unflatten(mask.interior[r]);
        for (const auto& off : offsets) {
            long nb = 0;
            bool in_grid = true;
            for (int d = 0; d < dim; ++d) {
                long j = idx[d] + off[d];
                if (j < 0 || j >= mask.grid.res[d]) {
                    in_grid = false;
                    break;
                }
                nb += j * mask.grid.stride[d];
            }
            if (!in_grid || mask.status[nb] != NodeStatus::Interior)
                throw PreconditionViolated("phi must vanish on a two-node collar");
        }
    }

    ReproductionReport rep;
    rep.phi_norm = phi.sup_norm();
    Eigen::VectorXd l_phi = sys.matrix * phi.interior;  // boundary data is zero
    rep.residual_g_of_l = (gm.apply(l_phi) + phi.interior).cwiseAbs().maxCoeff();
    Eigen::VectorXd g_phi = gm.apply(phi.interior);
    rep.residual_l_of_g = (sys.matrix * g_phi + phi.interior).cwiseAbs().maxCoeff();
    return rep;
}

DecayProfile verify_boundary_decay(const OperatorSpec& spec, const ShapeInfo& shape,
                                   const std::vector<std::array<double, 2>>& bounds,
                                   const std::vector<long>& resolutions,
                                   const Eigen::VectorXd& x) {
    if (resolutions.size() < 2)
        throw PreconditionViolated("decay profile needs at least two resolutions");
    DecayProfile profile;
    profile.resolutions = resolutions;
    for (long res : resolutions) {
        Grid grid = build_grid(bounds, std::vector<long>(bounds.size(), res));
        auto mask = std::make_shared<DomainMask>(build_mask(shape, grid));
        auto sys = std::make_shared<StencilSystem>(assemble(spec, mask));
        DirichletSolver solver(sys);
        long row = mask->interior_index[mask->grid.nearest_node(x)];
        if (row < 0) throw PreconditionViolated("x is not interior at this resolution");
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(mask->n_interior());
        rhs[row] = -1.0 / sys->nu_weights[row];
        Eigen::VectorXd col = solver.solve_interior(rhs);  // k(., x) = k(x, .) by symmetry
        double cmax = 0.0;
        for (long id : mask->collar()) cmax = std::max(cmax, col[mask->interior_index[id]]);
        profile.collar_max.push_back(cmax);
    }
    profile.strictly_decreasing = true;
    for (size_t i = 1; i < profile.collar_max.size(); ++i)
        profile.strictly_decreasing =
            profile.strictly_decreasing && profile.collar_max[i] < profile.collar_max[i - 1];
    return profile;
}

MarginReport comparison_bound(const GreenMatrix& gm, const Field& u_enclosing,
                              double harmonic_tol) {
    const StencilSystem& sys = *gm.sys;
    const DomainMask& mask = *sys.mask;
    const DomainMask& big = *u_enclosing.mask;
    if (!gm.full()) throw PreconditionViolated("comparison bound requires full mode");
    if (big.grid.total != mask.grid.total)
        throw PreconditionViolated("enclosing field must live on the same grid");

    // Strict containment: every node of the closed small mask is interior in
    // the enclosing mask (Omega' contains the closure of Omega).
    for (long id : mask.interior)
        if (big.status[id] != NodeStatus::Interior)
            throw PreconditionViolated("enclosing mask does not contain the interior");
    for (long id : mask.boundary)
        if (big.status[id] != NodeStatus::Interior)
            throw PreconditionViolated("enclosing mask does not strictly contain the closure");

    const long n = mask.n_interior();
    Eigen::VectorXd u_int(n), u_bnd(mask.n_boundary());
    for (long r = 0; r < n; ++r) u_int[r] = u_enclosing.at_node(mask.interior[r]);
    for (long r = 0; r < mask.n_boundary(); ++r)
        u_bnd[r] = u_enclosing.at_node(mask.boundary[r]);

    double sup_u = std::max(u_int.cwiseAbs().maxCoeff(), u_bnd.cwiseAbs().maxCoeff());
    if (u_int.minCoeff() < -1e-12 * std::max(1.0, sup_u) ||
        u_bnd.minCoeff() < -1e-12 * std::max(1.0, sup_u))
        throw PreconditionViolated("u must be nonnegative");

    // Discrete L-harmonicity on the small mask: the assembled rows carry
    // (L - c - eps)u, so add eps*u back (c = 0 in comparison runs). The
    // residual is normalized by the stencil scale times |u|.
    Eigen::VectorXd residual =
        sys.matrix * u_int + sys.boundary_map * u_bnd + sys.epsilon * u_int;
    double mat_scale = 0.0;
    for (int kk = 0; kk < sys.matrix.outerSize(); ++kk)
        for (Eigen::SparseMatrix<double>::InnerIterator it(sys.matrix, kk); it; ++it)
            mat_scale = std::max(mat_scale, std::abs(it.value()));
    MarginReport rep;
    rep.harmonic_residual = residual.size()
                                ? residual.cwiseAbs().maxCoeff() /
                                      std::max(1.0, mat_scale * std::max(1.0, sup_u))
                                : 0.0;
    rep.sup_u = sup_u;
    if (rep.harmonic_residual > harmonic_tol)
        throw PreconditionViolated("u is not discrete-L-harmonic on the small mask");

    Eigen::VectorXd margin = u_int - sys.epsilon * gm.apply(u_int);
    rep.min_margin = margin.minCoeff(&rep.witness);
    rep.witness = mask.interior[rep.witness];
    return rep;
}

}  // namespace hypolab
