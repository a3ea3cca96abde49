#include "hypolab/discretize.hpp"

#include <cmath>
#include <vector>

#include "hypolab/errors.hpp"
#include "hypolab/parallel.hpp"

namespace hypolab {

namespace {

double flush(double v) {
    return std::abs(v) < kCoefficientFlush ? 0.0 : v;
}

double geometric_mean(double p, double q) {
    return flush(std::sqrt(std::max(p, 0.0) * std::max(q, 0.0)));
}

struct RowEntry {
    long col;      // interior row or boundary row
    bool boundary;
    double val;
};

// One assembled row; `diag` accumulates separately so the row sum cancels
// flux terms exactly.
struct RowBuffer {
    std::vector<RowEntry> entries;
    double diag = 0.0;

    void add(long col, bool bnd, double v) {
        for (auto& e : entries)
            if (e.col == col && e.boundary == bnd) {
                e.val += v;
                return;
            }
        entries.push_back({col, bnd, v});
    }
};

}  // namespace

StencilSystem assemble(const OperatorSpec& spec, MaskPtr mask) {
    const Grid& g = mask->grid;
    const int dim = g.dim;
    const long n_int = mask->n_interior();
    const double cell = g.spacing.prod();

    StencilSystem sys;
    sys.mask = mask;
    sys.epsilon = spec.epsilon;
    sys.nu_weights.resize(n_int);

    std::vector<RowBuffer> rows(n_int);
    std::vector<char> diag_flags(n_int, 1);
    const bool par = exec_policy().parallel;

    std::string error_msg;
#pragma omp parallel for if (par) schedule(static)
    for (long r = 0; r < n_int; ++r) {
        try {
            const long id = mask->interior[r];
            const Eigen::VectorXd x = g.coords(id);
            const Eigen::MatrixXd A = spec.eval_a(x);
            const double vx = spec.eval_v(x);
            RowBuffer& row = rows[r];

            // Face evaluations: A and V at the 2*dim axis neighbors; the
            // diagonal fluxes and the cross stencils both read from these.
            std::vector<Eigen::MatrixXd> a_face(2 * dim);
            std::vector<double> v_face(2 * dim);
            for (int d = 0; d < dim; ++d)
                for (int s = 0; s < 2; ++s) {
                    Eigen::VectorXd xn = x;
                    xn[d] += (s == 0 ? -1.0 : 1.0) * g.spacing[d];
                    a_face[2 * d + s] = spec.eval_a(xn);
                    v_face[2 * d + s] = spec.eval_v(xn);
                }

            bool diag_here = true;
            auto check_diag = [&](const Eigen::MatrixXd& M) {
                for (int i = 0; i < dim; ++i)
                    for (int j = 0; j < dim; ++j)
                        if (i != j && M(i, j) != 0.0) diag_here = false;
            };
            check_diag(A);
            for (const auto& M : a_face) check_diag(M);

            auto place = [&](long node, double v) {
                if (mask->status[node] == NodeStatus::Interior)
                    row.add(mask->interior_index[node], false, v);
                else
                    row.add(mask->boundary_index[node], true, v);
            };

            // Two-point conservative fluxes with geometric-mean midpoint
            // coefficients (V a_dd at the two endpoints).
            for (int d = 0; d < dim; ++d) {
                const double h = g.spacing[d];
                const double gd_here = vx * A(d, d);
                for (int s = 0; s < 2; ++s) {
                    double gd_there = v_face[2 * d + s] * a_face[2 * d + s](d, d);
                    double coef = geometric_mean(gd_here, gd_there) / (vx * h * h);
                    if (!std::isfinite(coef))
                        throw CoefficientError("non-finite flux coefficient");
                    if (coef != 0.0) {
                        place(id + (s == 0 ? -1L : 1L) * g.stride[d], coef);
                        row.diag -= coef;
                    }
                }
            }

            // Cross terms (i != j): centered 4-corner stencil on V a_ij,
            // driven by the face values of the coefficient.
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j) {
                    if (i == j) continue;
                    const double hi = g.spacing[i];
                    const double hj = g.spacing[j];
                    for (int s = 0; s < 2; ++s) {
                        const double si = (s == 0 ? -1.0 : 1.0);
                        double gf = v_face[2 * i + s] * a_face[2 * i + s](i, j);
                        double base = si * gf / (4.0 * hi * hj * vx);
                        if (!std::isfinite(base))
                            throw CoefficientError("non-finite cross coefficient");
                        if (base == 0.0) continue;
                        for (long sj : {-1L, 1L}) {
                            long nb = id + (s == 0 ? -1L : 1L) * g.stride[i] +
                                      sj * g.stride[j];
                            place(nb, static_cast<double>(sj) * base);
                        }
                    }
                }
            if (!diag_here) diag_flags[r] = 0;

            row.diag -= spec.eval_c(x) + spec.epsilon;
            sys.nu_weights[r] = vx * cell;
        } catch (const std::exception& e) {
#pragma omp critical
            if (error_msg.empty()) error_msg = e.what();
        }
    }
    if (!error_msg.empty()) throw CoefficientError(error_msg);

    sys.diag_a = true;
    for (long r = 0; r < n_int; ++r) sys.diag_a = sys.diag_a && diag_flags[r];

    std::vector<Eigen::Triplet<double>> mat_trip, bnd_trip;
    for (long r = 0; r < n_int; ++r) {
        mat_trip.emplace_back(r, r, rows[r].diag);
        for (const auto& e : rows[r].entries) {
            if (e.boundary)
                bnd_trip.emplace_back(r, e.col, e.val);
            else
                mat_trip.emplace_back(r, e.col, e.val);
        }
    }
    sys.matrix.resize(n_int, n_int);
    sys.matrix.setFromTriplets(mat_trip.begin(), mat_trip.end());
    sys.boundary_map.resize(n_int, mask->n_boundary());
    sys.boundary_map.setFromTriplets(bnd_trip.begin(), bnd_trip.end());
    sys.matrix.makeCompressed();
    sys.boundary_map.makeCompressed();
    sys.mmatrix = check_mmatrix(sys).pass;
    return sys;
}

double StencilSystem::w_symmetry_defect() const {
    Eigen::SparseMatrix<double> wm = nu_weights.asDiagonal() * matrix;
    Eigen::SparseMatrix<double> diff = wm - Eigen::SparseMatrix<double>(wm.transpose());
    double scale = 0.0;
    for (int k = 0; k < wm.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(wm, k); it; ++it)
            scale = std::max(scale, std::abs(it.value()));
    double defect = 0.0;
    for (int k = 0; k < diff.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(diff, k); it; ++it)
            defect = std::max(defect, std::abs(it.value()));
    return scale > 0.0 ? defect / scale : 0.0;
}

Eigen::VectorXd StencilSystem::l_one() const {
    Eigen::VectorXd ones_int = Eigen::VectorXd::Ones(matrix.rows());
    Eigen::VectorXd ones_bnd = Eigen::VectorXd::Ones(boundary_map.cols());
    return matrix * ones_int + boundary_map * ones_bnd;
}

StencilSystem regularize(const StencilSystem& sys, long n) {
    if (n < 1) throw PreconditionViolated("regularize requires n >= 1");
    const DomainMask& mask = *sys.mask;
    const Grid& g = mask.grid;
    const long n_int = mask.n_interior();
    const double scale = 1.0 / static_cast<double>(n);

    std::vector<Eigen::Triplet<double>> mat_trip, bnd_trip;
    for (long r = 0; r < n_int; ++r) {
        const long id = mask.interior[r];
        double diag = 0.0;
        for (int d = 0; d < g.dim; ++d) {
            const double w = scale / (g.spacing[d] * g.spacing[d]);
            for (long s : {-1L, 1L}) {
                long nb = id + s * g.stride[d];
                if (mask.status[nb] == NodeStatus::Interior)
                    mat_trip.emplace_back(r, mask.interior_index[nb], w);
                else
                    bnd_trip.emplace_back(r, mask.boundary_index[nb], w);
                diag -= w;
            }
        }
        mat_trip.emplace_back(r, r, diag);
    }
    Eigen::SparseMatrix<double> lap(n_int, n_int), lap_bnd(n_int, mask.n_boundary());
    lap.setFromTriplets(mat_trip.begin(), mat_trip.end());
    lap_bnd.setFromTriplets(bnd_trip.begin(), bnd_trip.end());

    StencilSystem out = sys;
    out.matrix = sys.matrix + lap;
    out.boundary_map = sys.boundary_map + lap_bnd;
    out.matrix.makeCompressed();
    out.boundary_map.makeCompressed();
    out.mmatrix = check_mmatrix(out).pass;
    return out;
}

MmatrixReport check_mmatrix(const StencilSystem& sys) {
    MmatrixReport rep;
    rep.min_offdiag = 0.0;
    rep.offdiag_ok = true;
    for (int k = 0; k < sys.matrix.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(sys.matrix, k); it; ++it) {
            if (it.row() == it.col()) continue;
            if (it.value() < rep.min_offdiag) rep.min_offdiag = it.value();
            if (it.value() < 0.0) {
                rep.offdiag_ok = false;
                if (rep.violations.size() < 16)
                    rep.violations.push_back({static_cast<long>(it.row()),
                                              static_cast<long>(it.col())});
            }
        }
    for (int k = 0; k < sys.boundary_map.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(sys.boundary_map, k); it; ++it)
            if (it.value() < 0.0) {
                rep.offdiag_ok = false;
                rep.min_offdiag = std::min(rep.min_offdiag, it.value());
                if (rep.violations.size() < 16)
                    rep.violations.push_back({static_cast<long>(it.row()), -1});
            }

    // Weak diagonal dominance: row sums of the full stencil stay <= -eps, up
    // to roundoff of the cancelled fluxes.
    Eigen::VectorXd rowsum = sys.l_one();
    Eigen::VectorXd rowabs = Eigen::VectorXd::Zero(sys.matrix.rows());
    for (int k = 0; k < sys.matrix.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(sys.matrix, k); it; ++it)
            rowabs[it.row()] += std::abs(it.value());
    rep.max_rowsum = rowsum.size() ? rowsum.maxCoeff() : 0.0;
    rep.rowsum_ok = true;
    for (long r = 0; r < rowsum.size(); ++r) {
        double slack = 1e-12 * (1.0 + rowabs[r]);
        if (rowsum[r] > -sys.epsilon * (1.0 - 1e-12) + slack) rep.rowsum_ok = false;
    }
    rep.pass = rep.offdiag_ok && rep.rowsum_ok;
    return rep;
}

double TildeTransform::w(const Eigen::VectorXd& x) const {
    return 1.0 - m * (x - x0).squaredNorm();
}

double TildeTransform::l_one(const Eigen::VectorXd& x) const {
    double wx = w(x);
    if (wx <= 0.0)
        throw OutsideBallOfValidity("point outside the ball where w > 0");
    double gamma = -(spec.eval_c(x) + spec.epsilon);
    Eigen::VectorXd b = extract_fields(spec).b(x);
    return wx * wx * gamma - 2.0 * m * spec.eval_a(x).trace() - 2.0 * m * b.dot(x - x0);
}

StencilSystem TildeTransform::transform(const StencilSystem& sys) const {
    const DomainMask& mask = *sys.mask;
    const long n_int = mask.n_interior();
    const long n_bnd = mask.n_boundary();
    Eigen::VectorXd w_int(n_int), w_bnd(n_bnd);
    for (long r = 0; r < n_int; ++r) {
        w_int[r] = w(mask.grid.coords(mask.interior[r]));
        if (w_int[r] <= 0.0)
            throw OutsideBallOfValidity("mask leaves the ball where w > 0");
    }
    for (long r = 0; r < n_bnd; ++r) {
        w_bnd[r] = w(mask.grid.coords(mask.boundary[r]));
        if (w_bnd[r] <= 0.0)
            throw OutsideBallOfValidity("mask leaves the ball where w > 0");
    }
    StencilSystem out = sys;
    out.matrix = w_int.asDiagonal() * sys.matrix * w_int.asDiagonal();
    out.boundary_map = w_int.asDiagonal() * sys.boundary_map * w_bnd.asDiagonal();
    out.matrix.makeCompressed();
    out.boundary_map.makeCompressed();
    out.epsilon = 0.0;  // the transformed zero-order term is w * L(w), not a shift
    out.mmatrix = check_mmatrix(out).pass;
    return out;
}

TildeTransform tilde_transform(const OperatorSpec& spec, const Eigen::VectorXd& x0, double m) {
    if (m <= 0.0) throw PreconditionViolated("tilde_transform requires m > 0");
    return TildeTransform{spec, x0, m};
}

double apply_flux_stencil(const OperatorSpec& spec, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& h,
                          const std::function<double(const Eigen::VectorXd&)>& u) {
    const int dim = spec.dim;
    const Eigen::MatrixXd A = spec.eval_a(x);
    const double vx = spec.eval_v(x);
    const double ux = u(x);
    double acc = 0.0;
    for (int d = 0; d < dim; ++d) {
        const double gd_here = vx * A(d, d);
        for (int s : {-1, 1}) {
            Eigen::VectorXd xn = x;
            xn[d] += s * h[d];
            double gd_there = spec.eval_v(xn) * spec.eval_a(xn)(d, d);
            double coef = geometric_mean(gd_here, gd_there) / (vx * h[d] * h[d]);
            acc += coef * (u(xn) - ux);
        }
    }
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            if (i == j) continue;
            for (int si : {-1, 1}) {
                Eigen::VectorXd xf = x;
                xf[i] += si * h[i];
                double gf = spec.eval_v(xf) * spec.eval_a(xf)(i, j);
                double base = si * gf / (4.0 * h[i] * h[j] * vx);
                if (base == 0.0) continue;
                for (int sj : {-1, 1}) {
                    Eigen::VectorXd xc = xf;
                    xc[j] += sj * h[j];
                    acc += sj * base * u(xc);
                }
            }
        }
    return acc - (spec.eval_c(x) + spec.epsilon) * ux;
}

}  // namespace hypolab
