#pragma once

#include <Eigen/Sparse>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hypolab/dirichlet.hpp"
#include "hypolab/green.hpp"
#include "hypolab/propagation.hpp"

namespace hypolab {

std::uint64_t fnv1a(const std::string& text);
std::string hex64(std::uint64_t value);

/// Axis pair + fixed indices selecting a 2-D slice of an N-D grid.
struct Slice {
    int axis_x = 0;
    int axis_y = 1;
    std::vector<long> fixed;  // index per axis; entries for axis_x/axis_y ignored

    static Slice middle(const Grid& grid, int ax = 0, int ay = 1);
};

void write_field_csv(const std::filesystem::path& path, const Field& field);
void write_mask_csv(const std::filesystem::path& path, const DomainMask& mask);

/// P2 grayscale; masks use 3 levels (exterior 0, boundary 128, interior 255).
void write_mask_pgm(const std::filesystem::path& path, const DomainMask& mask,
                    const Slice& slice);
void write_field_pgm(const std::filesystem::path& path, const Field& field, const Slice& slice);

void write_field_svg(const std::filesystem::path& path, const Field& field, const Slice& slice,
                     const std::string& title, const std::string& config_hash);
void write_paths_svg(const std::filesystem::path& path, const DomainMask& mask,
                     const std::vector<ControlPath>& paths, const Slice& slice,
                     const std::string& title, const std::string& config_hash);
void write_paths_csv(const std::filesystem::path& path, const std::vector<ControlPath>& paths);

void write_matrix_market(const std::filesystem::path& path,
                         const Eigen::SparseMatrix<double>& m);
/// basepath.mtx + basepath.boundary.mtx + basepath.json (nu weights, flags).
void write_system(const std::filesystem::path& basepath, const StencilSystem& sys);

/// Little-endian binary: magic "GKMX", u32 version, u64 rows, u64 cols, then
/// row-major f64 entries; sidecar JSON with eps/grid/shape metadata.
void write_green_binary(const std::filesystem::path& basepath, const GreenMatrix& gm);
Eigen::MatrixXd read_green_binary(const std::filesystem::path& path);

}  // namespace hypolab
