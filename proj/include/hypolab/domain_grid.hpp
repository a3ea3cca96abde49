#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hypolab {

struct Grid {
    int dim = 0;
    Eigen::VectorXd lo, hi, spacing;
    std::vector<long> res;      // nodes per axis, >= 3
    std::vector<long> stride;   // axis 0 fastest
    long total = 0;

    long flatten(std::span<const long> idx) const;
    std::vector<long> unflatten(long id) const;
    Eigen::VectorXd coords(long id) const;
    Eigen::VectorXd coords(std::span<const long> idx) const;
    long nearest_node(const Eigen::VectorXd& x) const;
    bool on_border(std::span<const long> idx) const;
    double max_spacing() const { return spacing.maxCoeff(); }
};

Grid build_grid(const std::vector<std::array<double, 2>>& bounds,
                const std::vector<long>& resolution, long node_cap = 2'000'000);

enum class NodeStatus : std::uint8_t { Exterior = 0, Boundary = 1, Interior = 2 };

/// Shape provenance; `make` rebuilds the mask on any grid (used by
/// refinement studies).
struct ShapeInfo {
    enum class Kind { Lens, Ball, Box, Custom } kind = Kind::Custom;
    Eigen::VectorXd x0, h0;  // lens
    double lens_eps = 0.0;
    Eigen::VectorXd center;  // ball
    double radius = 0.0;
    Eigen::VectorXd box_lo, box_hi;
    std::string label = "custom";

    bool inside(const Eigen::VectorXd& x) const;  // strict membership, not for Custom
};

struct DomainMask {
    Grid grid;
    ShapeInfo shape;
    std::vector<NodeStatus> status;    // per grid node
    std::vector<long> interior;        // node ids, ascending
    std::vector<long> boundary;        // node ids, ascending
    std::vector<long> interior_index;  // node id -> row in `interior`, or -1
    std::vector<long> boundary_index;

    long n_interior() const { return static_cast<long>(interior.size()); }
    long n_boundary() const { return static_cast<long>(boundary.size()); }
    bool is_interior(long node) const { return status[node] == NodeStatus::Interior; }
    /// Interior nodes with at least one axis neighbor on the boundary.
    std::vector<long> collar() const;
};

using MaskPtr = std::shared_ptr<const DomainMask>;

/// Bony lens  B(x0 + h0/eps, 1/eps + eps^2) ∩ B(x0 - h0/eps, 1/eps + eps^2);
/// interior nodes are strictly inside both balls (and off the grid border).
DomainMask lens_domain(const Eigen::VectorXd& x0, const Eigen::VectorXd& h0, double lens_eps,
                       const Grid& grid);
DomainMask ball_domain(const Eigen::VectorXd& center, double radius, const Grid& grid);
DomainMask box_domain(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, const Grid& grid);
/// Rasterizes an arbitrary strict-membership predicate (tests use this for
/// re-entrant shapes).
DomainMask mask_from_predicate(const Grid& grid,
                               const std::function<bool(const Eigen::VectorXd&)>& inside,
                               const std::string& label = "custom");
DomainMask build_mask(const ShapeInfo& shape, const Grid& grid);

struct ExteriorBall {
    long y_node = -1;
    Eigen::VectorXd y;
    Eigen::VectorXd nu;
    /// min over interior nodes of dist(node, y+nu) - |nu|; the ball misses
    /// every interior node and touches the mask only at y when this is > 0.
    double certificate = 0.0;
};

/// Finds an outward ball at a boundary node: analytic radial direction for
/// lens/ball shapes, a candidate-direction search otherwise. |nu| is four
/// grid spacings. Returns nullopt when no candidate passes (a re-entrant
/// discrete corner).
std::optional<ExteriorBall> exterior_ball(const DomainMask& mask, long boundary_node);

}  // namespace hypolab
