#include "hypolab/domain_grid.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "hypolab/errors.hpp"
#include "hypolab/parallel.hpp"

namespace hypolab {

long Grid::flatten(std::span<const long> idx) const {
    long id = 0;
    for (int d = 0; d < dim; ++d) id += idx[d] * stride[d];
    return id;
}

std::vector<long> Grid::unflatten(long id) const {
    std::vector<long> idx(dim);
    for (int d = 0; d < dim; ++d) {
        idx[d] = id % res[d];
        id /= res[d];
    }
    return idx;
}

Eigen::VectorXd Grid::coords(long id) const {
    Eigen::VectorXd x(dim);
    for (int d = 0; d < dim; ++d) {
        long i = id % res[d];
        id /= res[d];
        x[d] = lo[d] + i * spacing[d];
    }
    return x;
}

Eigen::VectorXd Grid::coords(std::span<const long> idx) const {
    Eigen::VectorXd x(dim);
    for (int d = 0; d < dim; ++d) x[d] = lo[d] + idx[d] * spacing[d];
    return x;
}

long Grid::nearest_node(const Eigen::VectorXd& x) const {
    std::vector<long> idx(dim);
    for (int d = 0; d < dim; ++d) {
        long i = std::lround((x[d] - lo[d]) / spacing[d]);
        idx[d] = std::clamp(i, 0L, res[d] - 1);
    }
    return flatten(idx);
}

bool Grid::on_border(std::span<const long> idx) const {
    for (int d = 0; d < dim; ++d)
        if (idx[d] == 0 || idx[d] == res[d] - 1) return true;
    return false;
}

Grid build_grid(const std::vector<std::array<double, 2>>& bounds,
                const std::vector<long>& resolution, long node_cap) {
    if (bounds.size() != resolution.size() || bounds.empty())
        throw ConfigError("grid bounds and resolution must have the same nonzero dimension");
    Grid g;
    g.dim = static_cast<int>(bounds.size());
    g.lo.resize(g.dim);
    g.hi.resize(g.dim);
    g.spacing.resize(g.dim);
    g.res = resolution;
    g.stride.resize(g.dim);
    g.total = 1;
    for (int d = 0; d < g.dim; ++d) {
        if (resolution[d] < 3)
            throw GridTooSmall("resolution must be >= 3 per axis");
        if (bounds[d][0] >= bounds[d][1])
            throw ConfigError("grid bounds must satisfy lo < hi per axis");
        g.lo[d] = bounds[d][0];
        g.hi[d] = bounds[d][1];
        g.spacing[d] = (bounds[d][1] - bounds[d][0]) / static_cast<double>(resolution[d] - 1);
        g.stride[d] = g.total;
        if (g.total > node_cap / resolution[d] + 1)
            throw GridTooLarge("grid exceeds the node cap");
        g.total *= resolution[d];
    }
    if (g.total > node_cap) throw GridTooLarge("grid exceeds the node cap");
    return g;
}

bool ShapeInfo::inside(const Eigen::VectorXd& x) const {
    switch (kind) {
        case Kind::Lens: {
            double r = 1.0 / lens_eps + lens_eps * lens_eps;
            Eigen::VectorXd cp = x0 + h0 / lens_eps;
            Eigen::VectorXd cm = x0 - h0 / lens_eps;
            return (x - cp).norm() < r && (x - cm).norm() < r;
        }
        case Kind::Ball:
            return (x - center).norm() < radius;
        case Kind::Box:
            for (int d = 0; d < x.size(); ++d)
                if (x[d] <= box_lo[d] || x[d] >= box_hi[d]) return false;
            return true;
        case Kind::Custom:
            throw PreconditionViolated("custom shapes cannot be re-rasterized");
    }
    return false;
}

namespace {

// King-move neighborhood (axis + diagonal) as index offsets; the zero offset
// is excluded.
std::vector<std::vector<long>> king_offsets(int dim) {
    std::vector<std::vector<long>> out;
    std::vector<long> off(dim, -1);
    while (true) {
        bool all_zero = std::all_of(off.begin(), off.end(), [](long o) { return o == 0; });
        if (!all_zero) out.push_back(off);
        int d = 0;
        while (d < dim && off[d] == 1) off[d++] = -1;
        if (d == dim) break;
        ++off[d];
    }
    return out;
}

DomainMask classify(const Grid& grid, const std::vector<char>& inside, const ShapeInfo& shape) {
    DomainMask mask;
    mask.grid = grid;
    mask.shape = shape;
    mask.status.assign(grid.total, NodeStatus::Exterior);
    const bool par = exec_policy().parallel;

    // Interior: strictly inside and not on the grid border (every interior
    // node keeps a full stencil).
#pragma omp parallel for if (par) schedule(static)
    for (long id = 0; id < grid.total; ++id) {
        if (!inside[id]) continue;
        auto idx = grid.unflatten(id);
        if (!grid.on_border(idx)) mask.status[id] = NodeStatus::Interior;
    }

    auto offsets = king_offsets(grid.dim);
#pragma omp parallel for if (par) schedule(static)
    for (long id = 0; id < grid.total; ++id) {
        if (mask.status[id] == NodeStatus::Interior) continue;
        auto idx = grid.unflatten(id);
        for (const auto& off : offsets) {
            long nb = 0;
            bool ok = true;
            for (int d = 0; d < grid.dim; ++d) {
                long j = idx[d] + off[d];
                if (j < 0 || j >= grid.res[d]) {
                    ok = false;
                    break;
                }
                nb += j * grid.stride[d];
            }
            if (ok && mask.status[nb] == NodeStatus::Interior) {
                mask.status[id] = NodeStatus::Boundary;
                break;
            }
        }
    }

    mask.interior_index.assign(grid.total, -1);
    mask.boundary_index.assign(grid.total, -1);
    for (long id = 0; id < grid.total; ++id) {
        if (mask.status[id] == NodeStatus::Interior) {
            mask.interior_index[id] = static_cast<long>(mask.interior.size());
            mask.interior.push_back(id);
        } else if (mask.status[id] == NodeStatus::Boundary) {
            mask.boundary_index[id] = static_cast<long>(mask.boundary.size());
            mask.boundary.push_back(id);
        }
    }
    if (mask.interior.empty()) throw EmptyDomain("mask has no interior nodes");

    // Edge-connectivity of the interior; multi-component masks are rejected.
    std::vector<char> seen(grid.total, 0);
    std::deque<long> queue{mask.interior.front()};
    seen[mask.interior.front()] = 1;
    long count = 1;
    while (!queue.empty()) {
        long id = queue.front();
        queue.pop_front();
        auto idx = grid.unflatten(id);
        for (int d = 0; d < grid.dim; ++d) {
            for (long s : {-1L, 1L}) {
                long j = idx[d] + s;
                if (j < 0 || j >= grid.res[d]) continue;
                long nb = id + s * grid.stride[d];
                if (!seen[nb] && mask.status[nb] == NodeStatus::Interior) {
                    seen[nb] = 1;
                    ++count;
                    queue.push_back(nb);
                }
            }
        }
    }
    if (count != mask.n_interior())
        throw MultiComponentDomain("interior splits into multiple components");
    return mask;
}

DomainMask rasterize(const Grid& grid, const std::function<bool(const Eigen::VectorXd&)>& inside,
                     const ShapeInfo& shape) {
    std::vector<char> flags(grid.total, 0);
    const bool par = exec_policy().parallel;
#pragma omp parallel for if (par) schedule(static)
    for (long id = 0; id < grid.total; ++id) flags[id] = inside(grid.coords(id)) ? 1 : 0;
    return classify(grid, flags, shape);
}

}  // namespace

std::vector<long> DomainMask::collar() const {
    std::vector<long> out;
    for (long id : interior) {
        auto idx = grid.unflatten(id);
        bool near = false;
        for (int d = 0; d < grid.dim && !near; ++d)
            for (long s : {-1L, 1L}) {
                long j = idx[d] + s;
                if (j < 0 || j >= grid.res[d]) continue;
                if (status[id + s * grid.stride[d]] == NodeStatus::Boundary) {
                    near = true;
                    break;
                }
            }
        if (near) out.push_back(id);
    }
    return out;
}

DomainMask lens_domain(const Eigen::VectorXd& x0, const Eigen::VectorXd& h0, double lens_eps,
                       const Grid& grid) {
    if (std::abs(h0.norm() - 1.0) > 1e-12)
        throw PreconditionViolated("lens axis h0 must be a unit vector");
    if (lens_eps <= 0.0) throw PreconditionViolated("lens_eps must be positive");
    ShapeInfo shape;
    shape.kind = ShapeInfo::Kind::Lens;
    shape.x0 = x0;
    shape.h0 = h0;
    shape.lens_eps = lens_eps;
    shape.label = "lens";
    return rasterize(grid, [&shape](const Eigen::VectorXd& x) { return shape.inside(x); }, shape);
}

DomainMask ball_domain(const Eigen::VectorXd& center, double radius, const Grid& grid) {
    if (radius <= 0.0) throw PreconditionViolated("ball radius must be positive");
    ShapeInfo shape;
    shape.kind = ShapeInfo::Kind::Ball;
    shape.center = center;
    shape.radius = radius;
    shape.label = "ball";
    return rasterize(grid, [&shape](const Eigen::VectorXd& x) { return shape.inside(x); }, shape);
}

DomainMask box_domain(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, const Grid& grid) {
    ShapeInfo shape;
    shape.kind = ShapeInfo::Kind::Box;
    shape.box_lo = lo;
    shape.box_hi = hi;
    shape.label = "box";
    return rasterize(grid, [&shape](const Eigen::VectorXd& x) { return shape.inside(x); }, shape);
}

DomainMask mask_from_predicate(const Grid& grid,
                               const std::function<bool(const Eigen::VectorXd&)>& inside,
                               const std::string& label) {
    ShapeInfo shape;
    shape.kind = ShapeInfo::Kind::Custom;
    shape.label = label;
    return rasterize(grid, inside, shape);
}

DomainMask build_mask(const ShapeInfo& shape, const Grid& grid) {
    switch (shape.kind) {
        case ShapeInfo::Kind::Lens: return lens_domain(shape.x0, shape.h0, shape.lens_eps, grid);
        case ShapeInfo::Kind::Ball: return ball_domain(shape.center, shape.radius, grid);
        case ShapeInfo::Kind::Box: return box_domain(shape.box_lo, shape.box_hi, grid);
        case ShapeInfo::Kind::Custom:
            throw PreconditionViolated("custom shapes cannot be re-rasterized");
    }
    throw PreconditionViolated("unreachable");
}

namespace {

// The ball hangs off the boundary node into the exterior; it must miss every
// interior node. Boundary nodes other than y are not scanned: rasterized
// boundary collars scatter up to ~h*sqrt(N) outside the analytic surface, so
// a node slightly deeper outside would sit inside any outward ball anchored
// at y, and no boundary node would ever admit a certificate.
std::optional<ExteriorBall> try_direction(const DomainMask& mask, long y_node,
                                          const Eigen::VectorXd& dir) {
    double len = dir.norm();
    if (len == 0.0) return std::nullopt;
    const Grid& g = mask.grid;
    Eigen::VectorXd y = g.coords(y_node);
    Eigen::VectorXd nu = dir / len * (4.0 * g.max_spacing());
    Eigen::VectorXd ctr = y + nu;
    double rad = nu.norm();
    double margin = std::numeric_limits<double>::infinity();
    for (long id : mask.interior) {
        double m = (g.coords(id) - ctr).norm() - rad;
        margin = std::min(margin, m);
        if (margin <= 1e-12 * rad) return std::nullopt;
    }
    ExteriorBall ball;
    ball.y_node = y_node;
    ball.y = y;
    ball.nu = nu;
    ball.certificate = margin;
    return ball;
}

std::vector<Eigen::VectorXd> candidate_directions(const DomainMask& mask,
                                                  const Eigen::VectorXd& y) {
    const ShapeInfo& s = mask.shape;
    std::vector<Eigen::VectorXd> dirs;
    if (s.kind == ShapeInfo::Kind::Lens) {
        double r = 1.0 / s.lens_eps + s.lens_eps * s.lens_eps;
        Eigen::VectorXd cp = s.x0 + s.h0 / s.lens_eps;
        Eigen::VectorXd cm = s.x0 - s.h0 / s.lens_eps;
        // Outward radial from whichever sphere the node sits on (farther
        // outside first), then the bisector for nodes near the rim.
        double dp = (y - cp).norm() - r;
        double dm = (y - cm).norm() - r;
        Eigen::VectorXd rp = (y - cp).normalized();
        Eigen::VectorXd rm = (y - cm).normalized();
        if (dp >= dm) {
            dirs.push_back(rp);
            dirs.push_back(rm);
        } else {
            dirs.push_back(rm);
            dirs.push_back(rp);
        }
        if ((rp + rm).norm() > 0) dirs.push_back((rp + rm).normalized());
        return dirs;
    }
    if (s.kind == ShapeInfo::Kind::Ball) {
        dirs.push_back((y - s.center).normalized());
        return dirs;
    }
    // Box / custom: radial from the interior centroid, then every nonzero
    // sign-pattern direction.
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(mask.grid.dim);
    for (long id : mask.interior) centroid += mask.grid.coords(id);
    centroid /= static_cast<double>(mask.n_interior());
    if ((y - centroid).norm() > 0) dirs.push_back((y - centroid).normalized());
    std::vector<long> signs(mask.grid.dim, -1);
    while (true) {
        Eigen::VectorXd d(mask.grid.dim);
        for (int k = 0; k < mask.grid.dim; ++k) d[k] = static_cast<double>(signs[k]);
        if (d.norm() > 0) dirs.push_back(d.normalized());
        int k = 0;
        while (k < mask.grid.dim && signs[k] == 1) signs[k++] = -1;
        if (k == mask.grid.dim) break;
        ++signs[k];
    }
    return dirs;
}

}  // namespace

std::optional<ExteriorBall> exterior_ball(const DomainMask& mask, long boundary_node) {
    if (mask.status[boundary_node] != NodeStatus::Boundary)
        throw PreconditionViolated("exterior_ball requires a boundary node");
    Eigen::VectorXd y = mask.grid.coords(boundary_node);
    for (const auto& dir : candidate_directions(mask, y)) {
        auto ball = try_direction(mask, boundary_node, dir);
        if (ball) return ball;
    }
    return std::nullopt;
}

}  // namespace hypolab
