#pragma once

// Triangulations of rectangular and L-shaped design domains, plus the
// element geometry queries used by assembly and filtering.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace topopt {

struct PointLoad {
    int node = -1;
    Eigen::Vector2d force = Eigen::Vector2d::Zero();
};

// Traction integrated along a boundary edge with the P1 trace.
struct EdgeLoad {
    int n0 = -1, n1 = -1;
    Eigen::Vector2d traction = Eigen::Vector2d::Zero(); // force per unit length
};

enum class RectSplit { Diagonal, Crossed };

struct Mesh {
    std::vector<Eigen::Vector2d> nodes;
    std::vector<std::array<int, 3>> triangles;
    std::vector<int> dirichlet_x; // node indices with u_x fixed
    std::vector<int> dirichlet_y; // node indices with u_y fixed
    std::vector<PointLoad> point_loads;
    std::vector<EdgeLoad> edge_loads;

    int node_count() const { return static_cast<int>(nodes.size()); }
    int element_count() const { return static_cast<int>(triangles.size()); }

    double signed_area(int e) const {
        const auto& t = triangles[e];
        const Eigen::Vector2d a = nodes[t[1]] - nodes[t[0]];
        const Eigen::Vector2d b = nodes[t[2]] - nodes[t[0]];
        return 0.5 * (a.x() * b.y() - a.y() * b.x());
    }

    void validate() const {
        if (nodes.empty() || triangles.empty())
            throw std::invalid_argument("mesh: empty");
        for (const auto& t : triangles)
            for (int n : t)
                if (n < 0 || n >= node_count())
                    throw std::invalid_argument("mesh: triangle index out of range");
        for (int e = 0; e < element_count(); ++e)
            if (signed_area(e) <= 0.0)
                throw std::invalid_argument("mesh: non-positive triangle area");
        if (dirichlet_x.empty() && dirichlet_y.empty())
            throw std::invalid_argument("mesh: empty Dirichlet set");
    }

    int nearest_node(const Eigen::Vector2d& p) const {
        int best = 0;
        double bd = std::numeric_limits<double>::max();
        for (int i = 0; i < node_count(); ++i) {
            const double d = (nodes[i] - p).squaredNorm();
            if (d < bd) { bd = d; best = i; }
        }
        return best;
    }

    std::vector<int> nodes_where(const std::function<bool(const Eigen::Vector2d&)>& pred) const {
        std::vector<int> out;
        for (int i = 0; i < node_count(); ++i)
            if (pred(nodes[i])) out.push_back(i);
        return out;
    }
};

inline std::vector<double> element_areas(const Mesh& mesh) {
    std::vector<double> a(mesh.element_count());
    for (int e = 0; e < mesh.element_count(); ++e) a[e] = mesh.signed_area(e);
    return a;
}

inline std::vector<Eigen::Vector2d> element_centroids(const Mesh& mesh) {
    std::vector<Eigen::Vector2d> c(mesh.element_count());
    for (int e = 0; e < mesh.element_count(); ++e) {
        const auto& t = mesh.triangles[e];
        c[e] = (mesh.nodes[t[0]] + mesh.nodes[t[1]] + mesh.nodes[t[2]]) / 3.0;
    }
    return c;
}

// Structured grid on [0,width]x[0,height]. Diagonal split: 2 triangles per
// cell. Crossed split adds cell centers (4 triangles per cell), which avoids
// directional bias in orientation optimization.
inline Mesh build_rect_mesh(double width, double height, int nx, int ny,
                            RectSplit split = RectSplit::Diagonal) {
    if (width <= 0.0 || height <= 0.0)
        throw std::invalid_argument("build_rect_mesh: dimensions must be positive");
    if (nx < 1 || ny < 1)
        throw std::invalid_argument("build_rect_mesh: nx, ny must be >= 1");
    Mesh m;
    const double dx = width / nx, dy = height / ny;
    auto gid = [&](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i)
            m.nodes.emplace_back(i * dx, j * dy);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const int a = gid(i, j), b = gid(i + 1, j), c = gid(i + 1, j + 1), d = gid(i, j + 1);
            if (split == RectSplit::Diagonal) {
                m.triangles.push_back({a, b, c});
                m.triangles.push_back({a, c, d});
            } else {
                const int ctr = static_cast<int>(m.nodes.size());
                m.nodes.emplace_back((i + 0.5) * dx, (j + 0.5) * dy);
                m.triangles.push_back({a, b, ctr});
                m.triangles.push_back({b, c, ctr});
                m.triangles.push_back({c, d, ctr});
                m.triangles.push_back({d, a, ctr});
            }
        }
    return m;
}

// Square of side `size` minus its upper-right quadrant; n cells per side.
inline Mesh build_lshape_mesh(double size, int n, RectSplit split = RectSplit::Diagonal) {
    if (size <= 0.0) throw std::invalid_argument("build_lshape_mesh: size must be positive");
    if (n < 2 || n % 2 != 0) throw std::invalid_argument("build_lshape_mesh: n must be even and >= 2");
    Mesh m;
    const double d = size / n;
    const double half = size / 2.0;
    std::vector<int> gid((n + 1) * (n + 1), -1);
    auto keep_node = [&](int i, int j) {
        return i * d <= half + 1e-12 || j * d <= half + 1e-12;
    };
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i)
            if (keep_node(i, j)) {
                gid[j * (n + 1) + i] = static_cast<int>(m.nodes.size());
                m.nodes.emplace_back(i * d, j * d);
            }
    auto g = [&](int i, int j) { return gid[j * (n + 1) + i]; };
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const bool in_l = (i + 0.5) * d < half || (j + 0.5) * d < half;
            if (!in_l) continue;
            const int a = g(i, j), b = g(i + 1, j), c = g(i + 1, j + 1), dd = g(i, j + 1);
            if (split == RectSplit::Diagonal) {
                m.triangles.push_back({a, b, c});
                m.triangles.push_back({a, c, dd});
            } else {
                const int ctr = static_cast<int>(m.nodes.size());
                m.nodes.emplace_back((i + 0.5) * d, (j + 0.5) * d);
                m.triangles.push_back({a, b, ctr});
                m.triangles.push_back({b, c, ctr});
                m.triangles.push_back({c, dd, ctr});
                m.triangles.push_back({dd, a, ctr});
            }
        }
    return m;
}

// Text import: node count, `x y` lines, triangle count, `i j k` lines (0-based).
inline Mesh read_mesh_text(std::istream& in) {
    Mesh m;
    int nn = 0, ne = 0;
    if (!(in >> nn) || nn <= 0) throw std::invalid_argument("mesh import: bad node count");
    m.nodes.resize(nn);
    for (int i = 0; i < nn; ++i)
        if (!(in >> m.nodes[i].x() >> m.nodes[i].y()))
            throw std::invalid_argument("mesh import: bad node line");
    if (!(in >> ne) || ne <= 0) throw std::invalid_argument("mesh import: bad triangle count");
    m.triangles.resize(ne);
    for (int e = 0; e < ne; ++e)
        if (!(in >> m.triangles[e][0] >> m.triangles[e][1] >> m.triangles[e][2]))
            throw std::invalid_argument("mesh import: bad triangle line");
    return m;
}

inline Mesh read_mesh_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("mesh import: cannot open " + path);
    return read_mesh_text(in);
}

inline void write_mesh_text(const Mesh& m, std::ostream& out) {
    const auto prec = out.precision(17);
    out << m.node_count() << "\n";
    for (const auto& p : m.nodes) out << p.x() << " " << p.y() << "\n";
    out.precision(prec);
    out << m.element_count() << "\n";
    for (const auto& t : m.triangles) out << t[0] << " " << t[1] << " " << t[2] << "\n";
}

} // namespace topopt
