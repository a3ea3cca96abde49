#include "hypolab/harnack.hpp"

#include <algorithm>
#include <cmath>

#include "hypolab/errors.hpp"
#include "hypolab/parallel.hpp"

namespace hypolab {

PoissonKernel poisson_kernel(SystemPtr sys) {
    DirichletSolver solver(sys);
    const long n = sys->matrix.rows();
    const long nb = sys->boundary_map.cols();
    PoissonKernel pk;
    pk.sys = sys;
    // Boundary nodes without stencil coupling never enter the solve; their
    // harmonic measure is identically zero and they carry no column.
    std::vector<char> coupled(nb, 0);
    for (int k = 0; k < sys->boundary_map.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(sys->boundary_map, k); it; ++it)
            if (it.value() != 0.0) coupled[it.col()] = 1;
    for (long z = 0; z < nb; ++z)
        if (coupled[z]) pk.active.push_back(z);

    const long na = static_cast<long>(pk.active.size());
    pk.p.resize(n, na);
    // Column z solves with boundary data = indicator of z and f = 0:
    // matrix * u = -boundary_map * e_z.
    constexpr long kChunk = 256;
    for (long c0 = 0; c0 < na; c0 += kChunk) {
        long width = std::min(kChunk, na - c0);
        Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, width);
        for (long j = 0; j < width; ++j)
            rhs.col(j) = -Eigen::VectorXd(sys->boundary_map.col(pk.active[c0 + j]));
        pk.p.middleCols(c0, width) = solver.solve_interior(rhs);
    }
    return pk;
}

Eigen::VectorXd PoissonKernel::row_sums() const {
    return p.rowwise().sum();
}

double PoissonKernel::min_entry() const {
    return p.size() ? p.minCoeff() : 0.0;
}

Eigen::VectorXd PoissonKernel::superpose(const Eigen::VectorXd& phi_boundary) const {
    Eigen::VectorXd data(active.size());
    for (size_t i = 0; i < active.size(); ++i) data[static_cast<long>(i)] = phi_boundary[active[i]];
    return p * data;
}

std::vector<long> ball_compact(const DomainMask& mask, const Eigen::VectorXd& center,
                               double radius) {
    std::vector<long> K;
    for (long id : mask.interior)
        if ((mask.grid.coords(id) - center).norm() <= radius) K.push_back(id);
    return K;
}

namespace {

std::vector<long> interior_rows(const DomainMask& mask, const std::vector<long>& K) {
    std::vector<long> rows;
    rows.reserve(K.size());
    for (long node : K) {
        long r = mask.interior_index[node];
        if (r < 0) throw PreconditionViolated("compact set must consist of interior nodes");
        rows.push_back(r);
    }
    return rows;
}

void require_positive_basepoint(const PoissonKernel& pk, long y0_row) {
    for (long z = 0; z < pk.p.cols(); ++z)
        if (pk.p(y0_row, z) <= 0.0)
            throw DegenerateBasepoint(
                "p[y0][z] vanishes: the discrete maximum principle fails to propagate "
                "(reducible system?)");
}

}  // namespace

WeakConstant weak_constant(const PoissonKernel& pk, const std::vector<long>& K, long y0_node) {
    const DomainMask& mask = *pk.sys->mask;
    auto rows = interior_rows(mask, K);
    long y0 = mask.interior_index[y0_node];
    if (y0 < 0) throw PreconditionViolated("y0 must be an interior node");
    require_positive_basepoint(pk, y0);

    const long nz = pk.p.cols();
    std::vector<double> best(nz, -1.0);
    std::vector<long> best_x(nz, -1);
    const bool par = exec_policy().parallel;
#pragma omp parallel for if (par) schedule(static)
    for (long z = 0; z < nz; ++z) {
        double denom = pk.p(y0, z);
        for (long x : rows) {
            double r = pk.p(x, z) / denom;
            if (r > best[z]) {
                best[z] = r;
                best_x[z] = x;
            }
        }
    }
    WeakConstant out;
    out.c = -1.0;
    for (long z = 0; z < nz; ++z)
        if (best[z] > out.c) {
            out.c = best[z];
            out.witness_z = z;
            out.witness_x = best_x[z];
        }
    return out;
}

StrongConstant strong_constant(const PoissonKernel& pk, const std::vector<long>& K) {
    const DomainMask& mask = *pk.sys->mask;
    auto rows = interior_rows(mask, K);
    const long nz = pk.p.cols();
    std::vector<double> best(nz, -1.0);
    std::vector<long> best_x1(nz, -1), best_x2(nz, -1);
    const bool par = exec_policy().parallel;
#pragma omp parallel for if (par) schedule(static)
    for (long z = 0; z < nz; ++z) {
        double hi = -std::numeric_limits<double>::infinity();
        double lo = std::numeric_limits<double>::infinity();
        long hi_x = -1, lo_x = -1;
        for (long x : rows) {
            double v = pk.p(x, z);
            if (v > hi) {
                hi = v;
                hi_x = x;
            }
            if (v < lo) {
                lo = v;
                lo_x = x;
            }
        }
        if (lo <= 0.0)
            best[z] = std::numeric_limits<double>::infinity();
        else
            best[z] = hi / lo;
        best_x1[z] = hi_x;
        best_x2[z] = lo_x;
    }
    StrongConstant out;
    out.m = -1.0;
    for (long z = 0; z < nz; ++z)
        if (best[z] > out.m) {
            out.m = best[z];
            out.witness_z = z;
            out.witness_x1 = best_x1[z];
            out.witness_x2 = best_x2[z];
        }
    if (!std::isfinite(out.m))
        throw DegenerateBasepoint("a Poisson column vanishes on K");
    out.m = std::max(out.m, 1.0);
    return out;
}

namespace {

// 1-D centered difference taps per derivative order (offset, weight/h^k).
struct Tap {
    int offset;
    double weight;
};

std::vector<Tap> taps_1d(int order, double h) {
    switch (order) {
        case 0: return {{0, 1.0}};
        case 1: return {{-1, -0.5 / h}, {1, 0.5 / h}};
        case 2: return {{-1, 1.0 / (h * h)}, {0, -2.0 / (h * h)}, {1, 1.0 / (h * h)}};
        case 3: {
            double s = 1.0 / (2.0 * h * h * h);
            return {{-2, -s}, {-1, 2.0 * s}, {1, -2.0 * s}, {2, s}};
        }
        case 4: {
            double s = 1.0 / (h * h * h * h);
            return {{-2, s}, {-1, -4.0 * s}, {0, 6.0 * s}, {1, -4.0 * s}, {2, s}};
        }
        default: throw PreconditionViolated("derivative order must be <= 4");
    }
}

// Tensor product of per-axis taps for the multi-index alpha.
struct StencilTap {
    std::vector<int> offset;
    double weight;
};

std::vector<StencilTap> stencil_for(const std::vector<int>& alpha, const Eigen::VectorXd& h) {
    std::vector<StencilTap> acc{{std::vector<int>(alpha.size(), 0), 1.0}};
    for (size_t d = 0; d < alpha.size(); ++d) {
        auto taps = taps_1d(alpha[d], h[static_cast<long>(d)]);
        std::vector<StencilTap> next;
        for (const auto& st : acc)
            for (const auto& t : taps) {
                StencilTap n = st;
                n.offset[d] += t.offset;
                n.weight *= t.weight;
                next.push_back(std::move(n));
            }
        acc = std::move(next);
    }
    return acc;
}

void multi_indices(int dim, int max_order, std::vector<std::vector<int>>& out) {
    std::vector<int> alpha(dim, 0);
    while (true) {
        int total = 0;
        for (int a : alpha) total += a;
        if (total <= max_order) out.push_back(alpha);
        int d = 0;
        while (d < dim && alpha[d] == max_order) alpha[d++] = 0;
        if (d == dim) break;
        ++alpha[d];
    }
}

}  // namespace

DerivativeTable derivative_constant(const PoissonKernel& pk, const std::vector<long>& K,
                                    long y0_node, int m) {
    if (m < 0 || m > 4) throw PreconditionViolated("derivative order must be in [0, 4]");
    const DomainMask& mask = *pk.sys->mask;
    const Grid& g = mask.grid;
    auto rows = interior_rows(mask, K);
    long y0 = mask.interior_index[y0_node];
    if (y0 < 0) throw PreconditionViolated("y0 must be an interior node");
    require_positive_basepoint(pk, y0);

    // Collar check: the full index box of radius m+1 around every K node
    // must be interior (covers every tensor stencil tap).
    {
        std::vector<int> off(g.dim, -(m + 1));
        std::vector<std::vector<int>> box_offsets;
        while (true) {
            box_offsets.push_back(off);
            int d = 0;
            while (d < g.dim && off[d] == m + 1) off[d++] = -(m + 1);
            if (d == g.dim) break;
            ++off[d];
        }
        for (long node : K) {
            auto idx = g.unflatten(node);
            for (const auto& o : box_offsets) {
                long nb = 0;
                for (int d = 0; d < g.dim; ++d) {
                    long j = idx[d] + o[d];
                    if (j < 0 || j >= g.res[d])
                        throw CollarViolation("K too close to the grid border");
                    nb += j * g.stride[d];
                }
                if (mask.status[nb] != NodeStatus::Interior)
                    throw CollarViolation("K within m+1 nodes of the boundary");
            }
        }
    }

    std::vector<std::vector<int>> alphas;
    multi_indices(g.dim, m, alphas);
    // Keep |alpha| <= m only (multi_indices enumerates the box).
    std::erase_if(alphas, [m](const std::vector<int>& a) {
        int t = 0;
        for (int v : a) t += v;
        return t > m;
    });

    std::vector<std::vector<StencilTap>> stencils;
    stencils.reserve(alphas.size());
    for (const auto& a : alphas) stencils.push_back(stencil_for(a, g.spacing));

    const long nz = pk.p.cols();
    std::vector<double> totals(nz, 0.0);
    std::vector<std::vector<double>> orders(nz, std::vector<double>(m + 1, 0.0));
    const bool par = exec_policy().parallel;
#pragma omp parallel for if (par) schedule(static)
    for (long z = 0; z < nz; ++z) {
        double total = 0.0;
        std::vector<double> per_order(m + 1, 0.0);
        for (size_t ai = 0; ai < alphas.size(); ++ai) {
            int order = 0;
            for (int v : alphas[ai]) order += v;
            double sup = 0.0;
            for (size_t kix = 0; kix < K.size(); ++kix) {
                long node = K[kix];
                double val = 0.0;
                for (const auto& tap : stencils[ai]) {
                    long nb = node;
                    for (int d = 0; d < g.dim; ++d) nb += tap.offset[d] * g.stride[d];
                    val += tap.weight * pk.p(mask.interior_index[nb], z);
                }
                sup = std::max(sup, std::abs(val));
            }
            total += sup;
            per_order[order] += sup;
        }
        totals[z] = total / pk.p(y0, z);
        for (int o = 0; o <= m; ++o) orders[z][o] = per_order[o] / pk.p(y0, z);
    }

    DerivativeTable table;
    table.m = m;
    table.constant = -1.0;
    for (long z = 0; z < nz; ++z)
        if (totals[z] > table.constant) {
            table.constant = totals[z];
            table.witness_z = z;
        }
    table.per_order = orders[table.witness_z];
    return table;
}

ChainReport chain_of_balls(const PoissonKernel& pk, const std::vector<long>& K, double delta) {
    if (delta <= 0.0) throw PreconditionViolated("delta must be positive");
    const DomainMask& mask = *pk.sys->mask;
    const Grid& g = mask.grid;
    auto rows = interior_rows(mask, K);
    const double min_radius = g.max_spacing();
    const long nz = pk.p.cols();

    // Interior rows within radius r of each center are tested against the
    // two-sided [1/2, 3/2] bound for every Poisson column; radii shrink
    // geometrically from the cap.
    std::vector<double> radius(K.size(), 0.0);
    std::vector<std::vector<long>> members(K.size());  // positions in K covered
    const bool par = exec_policy().parallel;
    std::vector<char> failed(K.size(), 0);

#pragma omp parallel for if (par) schedule(dynamic)
    for (long ki = 0; ki < static_cast<long>(K.size()); ++ki) {
        Eigen::VectorXd cx = g.coords(K[ki]);
        long crow = rows[ki];
        // One scan: distance to the nearest interior node violating the
        // two-sided bound, then the largest halved radius strictly below it.
        double dviol = std::numeric_limits<double>::infinity();
        for (long id : mask.interior) {
            double dist = (g.coords(id) - cx).norm();
            if (dist > delta || dist >= dviol) continue;
            long xr = mask.interior_index[id];
            for (long z = 0; z < nz; ++z) {
                double c = pk.p(crow, z);
                double v = pk.p(xr, z);
                if (v < 0.5 * c || v > 1.5 * c) {
                    dviol = dist;
                    break;
                }
            }
        }
        double r = delta;
        while (r >= dviol) r *= 0.5;
        if (r < min_radius) {
            failed[ki] = 1;
            continue;
        }
        radius[ki] = r;
        for (size_t kj = 0; kj < K.size(); ++kj)
            if ((g.coords(K[kj]) - cx).norm() <= r) members[ki].push_back(static_cast<long>(kj));
    }
    for (size_t ki = 0; ki < K.size(); ++ki)
        if (failed[ki])
            throw ChainFailure("no admissible radius at node " + std::to_string(K[ki]));

    // Greedy ordered cover with the chaining property: each new ball must
    // share a covered K node with the union built so far; ties break by the
    // smallest K position.
    std::vector<char> covered(K.size(), 0);
    std::vector<char> used(K.size(), 0);
    ChainReport rep;
    long first = 0;  // smallest node id in K
    for (size_t ki = 1; ki < K.size(); ++ki)
        if (K[ki] < K[first]) first = static_cast<long>(ki);
    auto take = [&](long ki) {
        used[ki] = 1;
        for (long pos : members[ki]) covered[pos] = 1;
        rep.centers.push_back(K[ki]);
        rep.radii.push_back(radius[ki]);
        ++rep.p;
    };
    take(first);
    while (true) {
        long remaining = 0;
        for (char c : covered)
            if (!c) ++remaining;
        if (remaining == 0) break;
        long best = -1, best_gain = 0;
        for (size_t ki = 0; ki < K.size(); ++ki) {
            if (used[ki]) continue;
            bool touches = false;
            long gain = 0;
            for (long pos : members[ki]) {
                if (covered[pos]) touches = true;
                else ++gain;
            }
            if (!touches || gain == 0) continue;
            if (gain > best_gain) {
                best_gain = gain;
                best = static_cast<long>(ki);
            }
        }
        if (best < 0)
            throw ChainFailure("cover cannot be chained across K");
        take(best);
    }
    rep.bound = std::pow(3.0, rep.p);
    return rep;
}

}  // namespace hypolab
