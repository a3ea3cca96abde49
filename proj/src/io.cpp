#include "hypolab/io.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hypolab/errors.hpp"

namespace hypolab {

namespace {

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out.is_open()) throw ConfigError("cannot write " + path.string());
    out << std::setprecision(17);
    return out;
}

// Compact 5-stop colormap (dark blue -> teal -> green -> yellow).
std::array<int, 3> colormap(double t) {
    static const double stops[5][3] = {{68, 1, 84},
                                       {59, 82, 139},
                                       {33, 145, 140},
                                       {94, 201, 98},
                                       {253, 231, 37}};
    t = std::clamp(t, 0.0, 1.0) * 4.0;
    int lo = std::min(3, static_cast<int>(t));
    double f = t - lo;
    std::array<int, 3> c;
    for (int i = 0; i < 3; ++i)
        c[i] = static_cast<int>(std::lround(stops[lo][i] * (1.0 - f) + stops[lo + 1][i] * f));
    return c;
}

struct SliceView {
    long nx = 0, ny = 0;
    std::vector<double> values;  // row-major [j][i], NaN = outside
    double vmin = 0.0, vmax = 0.0;
};

SliceView slice_field(const Field& field, const Slice& slice) {
    const Grid& g = field.mask->grid;
    SliceView view;
    view.nx = g.res[slice.axis_x];
    view.ny = g.res[slice.axis_y];
    view.values.assign(view.nx * view.ny, std::numeric_limits<double>::quiet_NaN());
    view.vmin = std::numeric_limits<double>::infinity();
    view.vmax = -view.vmin;
    std::vector<long> idx(g.dim);
    for (int d = 0; d < g.dim; ++d)
        idx[d] = slice.fixed.empty() ? g.res[d] / 2 : slice.fixed[d];
    for (long j = 0; j < view.ny; ++j)
        for (long i = 0; i < view.nx; ++i) {
            idx[slice.axis_x] = i;
            idx[slice.axis_y] = j;
            long node = g.flatten(idx);
            if (field.mask->status[node] == NodeStatus::Exterior) continue;
            double v = field.at_node(node);
            view.values[j * view.nx + i] = v;
            view.vmin = std::min(view.vmin, v);
            view.vmax = std::max(view.vmax, v);
        }
    if (view.vmin > view.vmax) {
        view.vmin = 0.0;
        view.vmax = 0.0;
    }
    return view;
}

void svg_header(std::ostream& out, long w, long h) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
}

void svg_legend(std::ostream& out, long x, long y, long h, double vmin, double vmax) {
    const int steps = 24;
    double cell = static_cast<double>(h) / steps;
    for (int s = 0; s < steps; ++s) {
        auto c = colormap(1.0 - static_cast<double>(s) / (steps - 1));
        out << "<rect x=\"" << x << "\" y=\"" << y + s * cell << "\" width=\"16\" height=\""
            << cell + 0.5 << "\" fill=\"rgb(" << c[0] << "," << c[1] << "," << c[2]
            << ")\"/>\n";
    }
    out << "<text x=\"" << x + 20 << "\" y=\"" << y + 10
        << "\" font-size=\"11\" font-family=\"monospace\">" << vmax << "</text>\n";
    out << "<text x=\"" << x + 20 << "\" y=\"" << y + h
        << "\" font-size=\"11\" font-family=\"monospace\">" << vmin << "</text>\n";
}

}  // namespace

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

std::string hex64(std::uint64_t value) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << value;
    return os.str();
}

Slice Slice::middle(const Grid& grid, int ax, int ay) {
    Slice s;
    s.axis_x = ax;
    s.axis_y = ay;
    s.fixed.resize(grid.dim);
    for (int d = 0; d < grid.dim; ++d) s.fixed[d] = grid.res[d] / 2;
    return s;
}

void write_field_csv(const std::filesystem::path& path, const Field& field) {
    auto out = open_out(path);
    const Grid& g = field.mask->grid;
    out << "node";
    for (int d = 0; d < g.dim; ++d) out << ",x" << d + 1;
    out << ",status,value\n";
    for (long id = 0; id < g.total; ++id) {
        auto st = field.mask->status[id];
        if (st == NodeStatus::Exterior) continue;
        Eigen::VectorXd x = g.coords(id);
        out << id;
        for (int d = 0; d < g.dim; ++d) out << "," << x[d];
        out << "," << (st == NodeStatus::Interior ? "interior" : "boundary") << ","
            << field.at_node(id) << "\n";
    }
}

void write_mask_csv(const std::filesystem::path& path, const DomainMask& mask) {
    auto out = open_out(path);
    const Grid& g = mask.grid;
    out << "node";
    for (int d = 0; d < g.dim; ++d) out << ",x" << d + 1;
    out << ",status\n";
    static const char* names[] = {"exterior", "boundary", "interior"};
    for (long id = 0; id < g.total; ++id) {
        Eigen::VectorXd x = g.coords(id);
        out << id;
        for (int d = 0; d < g.dim; ++d) out << "," << x[d];
        out << "," << names[static_cast<int>(mask.status[id])] << "\n";
    }
}

void write_mask_pgm(const std::filesystem::path& path, const DomainMask& mask,
                    const Slice& slice) {
    const Grid& g = mask.grid;
    auto out = open_out(path);
    long nx = g.res[slice.axis_x], ny = g.res[slice.axis_y];
    out << "P2\n" << nx << " " << ny << "\n255\n";
    std::vector<long> idx(g.dim);
    for (int d = 0; d < g.dim; ++d)
        idx[d] = slice.fixed.empty() ? g.res[d] / 2 : slice.fixed[d];
    for (long j = ny - 1; j >= 0; --j) {
        for (long i = 0; i < nx; ++i) {
            idx[slice.axis_x] = i;
            idx[slice.axis_y] = j;
            int level[] = {0, 128, 255};
            out << level[static_cast<int>(mask.status[g.flatten(idx)])]
                << (i + 1 == nx ? "" : " ");
        }
        out << "\n";
    }
}

void write_field_pgm(const std::filesystem::path& path, const Field& field, const Slice& slice) {
    SliceView view = slice_field(field, slice);
    auto out = open_out(path);
    out << "P2\n" << view.nx << " " << view.ny << "\n255\n";
    double span = view.vmax - view.vmin;
    for (long j = view.ny - 1; j >= 0; --j) {
        for (long i = 0; i < view.nx; ++i) {
            double v = view.values[j * view.nx + i];
            int g = 0;
            if (std::isfinite(v)) g = span > 0 ? 25 + static_cast<int>(230.0 * (v - view.vmin) / span) : 128;
            out << g << (i + 1 == view.nx ? "" : " ");
        }
        out << "\n";
    }
}

void write_field_svg(const std::filesystem::path& path, const Field& field, const Slice& slice,
                     const std::string& title, const std::string& config_hash) {
    SliceView view = slice_field(field, slice);
    double cell = std::max(2.0, 640.0 / static_cast<double>(std::max(view.nx, view.ny)));
    long w = static_cast<long>(view.nx * cell) + 90;
    long h = static_cast<long>(view.ny * cell) + 40;
    auto out = open_out(path);
    svg_header(out, w, h);
    out << "<text x=\"4\" y=\"14\" font-size=\"12\" font-family=\"monospace\">" << title
        << "</text>\n";
    out << "<text x=\"4\" y=\"28\" font-size=\"9\" font-family=\"monospace\">config "
        << config_hash << "</text>\n";
    double span = view.vmax - view.vmin;
    for (long j = 0; j < view.ny; ++j)
        for (long i = 0; i < view.nx; ++i) {
            double v = view.values[j * view.nx + i];
            if (!std::isfinite(v)) continue;
            auto c = colormap(span > 0 ? (v - view.vmin) / span : 0.5);
            double px = i * cell;
            double py = 32 + (view.ny - 1 - j) * cell;
            out << "<rect x=\"" << px << "\" y=\"" << py << "\" width=\"" << cell + 0.5
                << "\" height=\"" << cell + 0.5 << "\" fill=\"rgb(" << c[0] << "," << c[1]
                << "," << c[2] << ")\"/>\n";
        }
    svg_legend(out, static_cast<long>(view.nx * cell) + 8, 32,
               static_cast<long>(view.ny * cell), view.vmin, view.vmax);
    out << "</svg>\n";
}

void write_paths_svg(const std::filesystem::path& path, const DomainMask& mask,
                     const std::vector<ControlPath>& paths, const Slice& slice,
                     const std::string& title, const std::string& config_hash) {
    const Grid& g = mask.grid;
    long nx = g.res[slice.axis_x], ny = g.res[slice.axis_y];
    double cell = std::max(2.0, 640.0 / static_cast<double>(std::max(nx, ny)));
    long w = static_cast<long>(nx * cell) + 90;
    long h = static_cast<long>(ny * cell) + 40;
    auto out = open_out(path);
    svg_header(out, w, h);
    out << "<text x=\"4\" y=\"14\" font-size=\"12\" font-family=\"monospace\">" << title
        << "</text>\n";
    out << "<text x=\"4\" y=\"28\" font-size=\"9\" font-family=\"monospace\">config "
        << config_hash << "</text>\n";
    std::vector<long> idx(g.dim);
    for (int d = 0; d < g.dim; ++d)
        idx[d] = slice.fixed.empty() ? g.res[d] / 2 : slice.fixed[d];
    for (long j = ny - 1; j >= 0; --j)
        for (long i = 0; i < nx; ++i) {
            idx[slice.axis_x] = i;
            idx[slice.axis_y] = j;
            auto st = mask.status[g.flatten(idx)];
            if (st == NodeStatus::Exterior) continue;
            const char* fill = st == NodeStatus::Interior ? "#dfe8f0" : "#7d8ea0";
            out << "<rect x=\"" << i * cell << "\" y=\"" << 32 + (ny - 1 - j) * cell
                << "\" width=\"" << cell + 0.5 << "\" height=\"" << cell + 0.5 << "\" fill=\""
                << fill << "\"/>\n";
        }
    auto to_px = [&](const Eigen::VectorXd& x) {
        double i = (x[slice.axis_x] - g.lo[slice.axis_x]) / g.spacing[slice.axis_x];
        double j = (x[slice.axis_y] - g.lo[slice.axis_y]) / g.spacing[slice.axis_y];
        return std::pair<double, double>(i * cell + cell / 2,
                                         32 + (ny - 1 - j) * cell + cell / 2);
    };
    const char* colors[] = {"#c0392b", "#2980b9", "#27ae60", "#8e44ad", "#d35400"};
    int ci = 0;
    for (const auto& p : paths) {
        out << "<polyline fill=\"none\" stroke=\"" << colors[ci % 5]
            << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& seg : p.segments)
            for (const auto& pt : seg.samples) {
                auto [px, py] = to_px(pt);
                out << px << "," << py << " ";
            }
        out << "\"/>\n";
        ++ci;
    }
    out << "</svg>\n";
}

void write_paths_csv(const std::filesystem::path& path, const std::vector<ControlPath>& paths) {
    auto out = open_out(path);
    out << "path,segment,sample";
    if (!paths.empty() && !paths[0].segments.empty())
        for (long d = 0; d < paths[0].segments[0].samples[0].size(); ++d)
            out << ",x" << d + 1;
    out << "\n";
    for (size_t p = 0; p < paths.size(); ++p)
        for (size_t s = 0; s < paths[p].segments.size(); ++s) {
            const auto& seg = paths[p].segments[s];
            for (size_t q = 0; q < seg.samples.size(); ++q) {
                out << p << "," << s << "," << q;
                for (long d = 0; d < seg.samples[q].size(); ++d)
                    out << "," << seg.samples[q][d];
                out << "\n";
            }
        }
}

void write_matrix_market(const std::filesystem::path& path,
                         const Eigen::SparseMatrix<double>& m) {
    auto out = open_out(path);
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << m.rows() << " " << m.cols() << " " << m.nonZeros() << "\n";
    for (int k = 0; k < m.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it)
            out << it.row() + 1 << " " << it.col() + 1 << " " << it.value() << "\n";
}

void write_system(const std::filesystem::path& basepath, const StencilSystem& sys) {
    write_matrix_market(basepath.string() + ".mtx", sys.matrix);
    write_matrix_market(basepath.string() + ".boundary.mtx", sys.boundary_map);
    nlohmann::json j;
    j["schema_version"] = 1;
    j["epsilon"] = sys.epsilon;
    j["diag_a"] = sys.diag_a;
    j["mmatrix"] = sys.mmatrix;
    j["n_interior"] = sys.matrix.rows();
    j["n_boundary"] = sys.boundary_map.cols();
    j["nu_weights"] = std::vector<double>(sys.nu_weights.data(),
                                          sys.nu_weights.data() + sys.nu_weights.size());
    auto out = open_out(basepath.string() + ".json");
    out << j.dump(2) << "\n";
}

void write_green_binary(const std::filesystem::path& basepath, const GreenMatrix& gm) {
    auto out = open_out(basepath.string() + ".gk", true);
    const char magic[4] = {'G', 'K', 'M', 'X'};
    out.write(magic, 4);
    std::uint32_t version = 1;
    std::uint64_t rows = static_cast<std::uint64_t>(gm.k.rows());
    std::uint64_t cols = static_cast<std::uint64_t>(gm.k.cols());
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&rows), 8);
    out.write(reinterpret_cast<const char*>(&cols), 8);
    for (long i = 0; i < gm.k.rows(); ++i)
        for (long j = 0; j < gm.k.cols(); ++j) {
            double v = gm.k(i, j);
            out.write(reinterpret_cast<const char*>(&v), 8);
        }

    nlohmann::json meta;
    meta["schema_version"] = 1;
    meta["epsilon"] = gm.sys->epsilon;
    meta["rows"] = rows;
    meta["cols"] = cols;
    meta["columns"] = gm.columns;
    meta["shape"] = gm.sys->mask->shape.label;
    meta["resolution"] = gm.sys->mask->grid.res;
    auto mout = open_out(basepath.string() + ".json");
    mout << meta.dump(2) << "\n";
}

Eigen::MatrixXd read_green_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.is_open()) throw ConfigError("cannot read " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (std::string(magic, 4) != "GKMX") throw ConfigError("bad green matrix magic");
    std::uint32_t version = 0;
    std::uint64_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&rows), 8);
    in.read(reinterpret_cast<char*>(&cols), 8);
    Eigen::MatrixXd k(rows, cols);
    for (std::uint64_t i = 0; i < rows; ++i)
        for (std::uint64_t j = 0; j < cols; ++j) {
            double v;
            in.read(reinterpret_cast<char*>(&v), 8);
            k(static_cast<long>(i), static_cast<long>(j)) = v;
        }
    if (!in.good()) throw ConfigError("truncated green matrix file");
    return k;
}

}  // namespace hypolab
