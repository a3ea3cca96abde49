#include "hypolab/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hypolab/errors.hpp"
#include "hypolab/parallel.hpp"

namespace hypolab {

namespace {

Eigen::VectorXd control_field(const VectorFieldSet& fields, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& xi) {
    // xi_0 X_0 + sum_i xi_i X_i with X_i = row i of a.
    Eigen::VectorXd out = Eigen::VectorXd::Zero(x.size());
    if (xi[0] != 0.0) out += xi[0] * fields.x0(x);
    Eigen::MatrixXd A;
    bool have_a = false;
    for (int i = 1; i < xi.size(); ++i) {
        if (xi[i] == 0.0) continue;
        if (!have_a) {
            A = fields.spec.eval_a(x);
            have_a = true;
        }
        out += xi[i] * A.row(i - 1).transpose();
    }
    return out;
}

bool in_box(const Box& b, const Eigen::VectorXd& x) {
    for (int d = 0; d < x.size(); ++d)
        if (x[d] < b.lo[d] || x[d] > b.hi[d]) return false;
    return true;
}

Eigen::VectorXd rk4_step(const VectorFieldSet& fields, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& xi, double dt) {
    Eigen::VectorXd k1 = control_field(fields, x, xi);
    Eigen::VectorXd k2 = control_field(fields, x + 0.5 * dt * k1, xi);
    Eigen::VectorXd k3 = control_field(fields, x + 0.5 * dt * k2, xi);
    Eigen::VectorXd k4 = control_field(fields, x + dt * k3, xi);
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Eigen::VectorXd integrate_plain(const VectorFieldSet& fields, const Eigen::VectorXd& x_start,
                                const Eigen::VectorXd& xi, double t_end, double dt) {
    Eigen::VectorXd x = x_start;
    double t = 0.0;
    while (t < t_end - 1e-15 * t_end) {
        double step = std::min(dt, t_end - t);
        x = rk4_step(fields, x, xi, step);
        t += step;
    }
    return x;
}

}  // namespace

double ControlPath::chain_gap() const {
    double gap = 0.0;
    for (size_t s = 1; s < segments.size(); ++s)
        gap = std::max(gap, (segments[s].samples.front() -
                             segments[s - 1].samples.back())
                                .norm());
    return gap;
}

std::vector<Eigen::VectorXd> integral_curve(const VectorFieldSet& fields,
                                            const Eigen::VectorXd& x_start,
                                            const Eigen::VectorXd& xi, double t_end, double dt,
                                            const Box& bounds, double* err_per_time) {
    if (dt <= 0.0) throw PreconditionViolated("integral_curve requires dt > 0");
    std::vector<Eigen::VectorXd> poly{x_start};
    Eigen::VectorXd x = x_start;
    double t = 0.0;
    while (t < t_end - 1e-15 * std::max(t_end, 1.0)) {
        double step = std::min(dt, t_end - t);
        x = rk4_step(fields, x, xi, step);
        t += step;
        if (!in_box(bounds, x)) {
            std::ostringstream os;
            os << "trajectory left the domain at t = " << t;
            throw LeftDomain(os.str());
        }
        poly.push_back(x);
    }
    if (err_per_time) {
        Eigen::VectorXd x_half = integrate_plain(fields, x_start, xi, t_end, dt * 0.5);
        *err_per_time = (x - x_half).norm() / std::max(t_end, 1e-300);
    }
    return poly;
}

namespace {

struct Move {
    Eigen::VectorXd xi;
    int id;
};

std::vector<Move> control_dictionary(int dim) {
    std::vector<Move> moves;
    int id = 0;
    for (int i = 1; i <= dim; ++i)
        for (double s : {1.0, -1.0}) {
            Eigen::VectorXd xi = Eigen::VectorXd::Zero(dim + 1);
            xi[i] = s;
            moves.push_back({xi, id++});
        }
    for (double s : {1.0, -1.0}) {
        Eigen::VectorXd xi = Eigen::VectorXd::Zero(dim + 1);
        xi[0] = s;
        moves.push_back({xi, id++});
    }
    return moves;
}

constexpr double kDegenerateField = 1e-12;
constexpr int kLegSteps = 8;

}  // namespace

ReachReport reachable_set(const OperatorSpec& spec, const Eigen::VectorXd& x_start, MaskPtr mask,
                          long step_budget) {
    const Grid& g = mask->grid;
    VectorFieldSet fields = extract_fields(spec);
    Box box{g.lo, g.hi};
    const double step_len = g.spacing.minCoeff();

    long start_node = g.nearest_node(x_start);
    if (mask->status[start_node] != NodeStatus::Interior)
        throw PreconditionViolated("start point is not an interior cell");

    ReachReport rep;
    rep.mask = mask;
    const long n = mask->n_interior();
    rep.reached.assign(n, 0);
    rep.parent.assign(n, -1);
    rep.leg_xi.assign(n, Eigen::VectorXd());
    rep.leg_duration.assign(n, 0.0);
    rep.start_row = mask->interior_index[start_node];
    rep.reached[rep.start_row] = 1;
    rep.reached_count = 1;

    auto moves = control_dictionary(g.dim);
    std::vector<long> frontier{rep.start_row};
    long budget = step_budget;

    struct Candidate {
        long row;        // discovered interior row
        long parent;     // frontier row
        int move;
        double duration;
    };

    const bool par = exec_policy().parallel;
    while (!frontier.empty() && budget > 0) {
        const long fsize = static_cast<long>(frontier.size());
        const long legs_wanted = fsize * static_cast<long>(moves.size());
        const long legs_allowed = std::min(legs_wanted, budget);
        std::vector<Candidate> found(static_cast<size_t>(legs_allowed), {-1, -1, 0, 0.0});

#pragma omp parallel for if (par) schedule(static)
        for (long leg = 0; leg < legs_allowed; ++leg) {
            const long fi = leg / static_cast<long>(moves.size());
            const int mi = static_cast<int>(leg % static_cast<long>(moves.size()));
            const long row = frontier[fi];
            const Eigen::VectorXd x = g.coords(mask->interior[row]);
            const Move& mv = moves[mi];
            Eigen::VectorXd endpoint;
            double duration = 0.0;
            try {
                Eigen::VectorXd vel = control_field(fields, x, mv.xi);
                double mag = vel.norm();
                // Near-degenerate legs are skipped rather than integrated
                // with enormous durations; incompleteness is reported
                // honestly.
                if (mag < kDegenerateField || !std::isfinite(mag)) continue;
                duration = step_len / mag;
                endpoint = integrate_plain(fields, x, mv.xi, duration, duration / kLegSteps);
            } catch (const std::exception&) {
                continue;
            }
            if (!in_box(box, endpoint)) continue;
            long node = g.nearest_node(endpoint);
            if (mask->status[node] != NodeStatus::Interior) continue;
            long target = mask->interior_index[node];
            if (target == row) continue;
            found[leg] = Candidate{target, row, mv.id, duration};
        }
        budget -= legs_allowed;
        if (legs_allowed < legs_wanted) rep.budget_exhausted = true;

        std::vector<long> next;
        for (long leg = 0; leg < legs_allowed; ++leg) {
            const Candidate& c = found[leg];
            if (c.row < 0 || rep.reached[c.row]) continue;
            rep.reached[c.row] = 1;
            ++rep.reached_count;
            rep.parent[c.row] = c.parent;
            rep.leg_xi[c.row] = moves[static_cast<size_t>(c.move)].xi;
            rep.leg_duration[c.row] = c.duration;
            next.push_back(c.row);
        }
        std::sort(next.begin(), next.end());
        frontier = std::move(next);
    }
    if (!frontier.empty() && budget <= 0) rep.budget_exhausted = true;
    rep.complete = rep.reached_count == n;
    return rep;
}

ControlPath ReachReport::path_to(const OperatorSpec& spec, long interior_row) const {
    if (!reached[interior_row]) throw PreconditionViolated("cell was not reached");
    VectorFieldSet fields = extract_fields(spec);
    const Grid& g = mask->grid;
    Box box{g.lo, g.hi};
    std::vector<long> chain;
    for (long r = interior_row; r != -1; r = parent[r]) chain.push_back(r);
    std::reverse(chain.begin(), chain.end());

    ControlPath path;
    path.start_end = {g.coords(mask->interior[chain.front()]),
                      g.coords(mask->interior[chain.back()])};
    Eigen::VectorXd cursor = path.start();
    for (size_t i = 1; i < chain.size(); ++i) {
        long r = chain[i];
        PathSegment seg;
        seg.xi = leg_xi[r];
        seg.duration = leg_duration[r];
        double err = 0.0;
        seg.samples = integral_curve(fields, cursor, seg.xi, seg.duration,
                                     seg.duration / kLegSteps, box, &err);
        seg.step_doubling_error = err;
        cursor = seg.samples.back();
        path.segments.push_back(std::move(seg));
    }
    path.start_end[1] = cursor;
    return path;
}

SmpReport smp_test(const Field& u, const OperatorSpec& spec, MaskPtr mask, double tol_scale,
                   double subsolution_tol, long step_budget) {
    StencilSystem sys = assemble(spec, mask);
    Eigen::VectorXd residual = sys.matrix * u.interior + sys.boundary_map * u.boundary;
    double mat_scale = 0.0;
    for (int k = 0; k < sys.matrix.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(sys.matrix, k); it; ++it)
            mat_scale = std::max(mat_scale, std::abs(it.value()));
    double res_tol = subsolution_tol * std::max(1.0, mat_scale * std::max(1.0, u.sup_norm()));
    if (residual.minCoeff() < -res_tol)
        throw PreconditionViolated("u is not a discrete subsolution");

    SmpReport rep;
    rep.interior_max = u.interior_max();
    rep.boundary_max = u.boundary_max();
    rep.tol = tol_scale * u.oscillation();
    if (rep.interior_max < rep.boundary_max - rep.tol) {
        rep.interior_max_attained = false;  // the generic case
        return rep;
    }
    rep.interior_max_attained = true;
    Eigen::Index arg = 0;
    u.interior.maxCoeff(&arg);
    rep.argmax_node = mask->interior[arg];
    ReachReport reach =
        reachable_set(spec, mask->grid.coords(rep.argmax_node), mask, step_budget);
    rep.reached_count = reach.reached_count;
    double sup = std::max(rep.interior_max, rep.boundary_max);
    for (long r = 0; r < mask->n_interior(); ++r)
        if (reach.reached[r]) rep.deviation = std::max(rep.deviation, sup - u.interior[r]);
    rep.pass = rep.deviation <= rep.tol;
    return rep;
}

HopfCertificate hopf_certificate(const OperatorSpec& spec, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& nu) {
    HopfCertificate cert;
    cert.y = y;
    cert.nu = nu;
    Eigen::MatrixXd A = spec.eval_a(y);
    cert.quad = nu.dot(A * nu);
    if (cert.quad <= 0.0)
        throw CharacteristicDirection("<A(y)nu,nu> <= 0: the degenerate case of the lemma");
    VectorFieldSet fields = extract_fields(spec);
    Eigen::VectorXd b = fields.b(y);
    cert.sum_term = A.trace() - b.dot(nu);
    cert.threshold = cert.sum_term / (2.0 * cert.quad);
    cert.lambda = 2.0 * std::max(1.0, cert.threshold);
    cert.lw_at_y = cert.lambda * cert.lambda * std::exp(-cert.lambda * nu.squaredNorm()) *
                   (4.0 * cert.quad - (2.0 / cert.lambda) * cert.sum_term);
    return cert;
}

double hopf_discrete_crosscheck(const OperatorSpec& spec, const HopfCertificate& cert,
                                double h) {
    Eigen::VectorXd center = cert.y + cert.nu;
    double lambda = cert.lambda;
    double offset = std::exp(-lambda * cert.nu.squaredNorm());
    auto barrier = [&](const Eigen::VectorXd& x) {
        return std::exp(-lambda * (x - center).squaredNorm()) - offset;
    };
    Eigen::VectorXd spacing = Eigen::VectorXd::Constant(spec.dim, h);
    // The stencil carries -(c + eps) w(y); the lemma's formula is for L alone.
    OperatorSpec plain = spec.with_epsilon(0.0).with_c([](const Eigen::VectorXd&) {
        return 0.0;
    });
    return apply_flux_stencil(plain, cert.y, spacing, barrier);
}

CharReport characteristic_test(const OperatorSpec& spec, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& nu, double tol_char) {
    if (nu.norm() == 0.0) throw PreconditionViolated("nu must be nonzero");
    CharReport rep;
    rep.value = nu.dot(spec.eval_a(y) * nu);
    rep.characteristic = rep.value <= tol_char * nu.squaredNorm();
    return rep;
}

}  // namespace hypolab
