#pragma once

// Result exporters: per-element CSV (round-trippable), legacy ASCII VTK,
// and a simple SVG rendering (class color fill, stripe hatching along theta
// for anisotropic classes, grey for isotropic).

#include "topopt/fem.hpp"
#include "topopt/mesh.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace topopt {

namespace detail {
inline std::string g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
inline bool blank_line(const std::string& s) {
    return s.find_first_not_of(" \t\r") == std::string::npos;
}
} // namespace detail

// Columns: elem, area, cx, cy, z_i..., m_i..., theta_i..., zhat_i...,
// class_label, m_combined with m_combined = sum_i zhat_i mhat_i.
inline void export_csv(const Mesh& mesh, const DesignField& control, const DesignField& physical,
                       const std::vector<MaterialClass>& classes, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("export_csv: cannot write " + path);
    const int N = control.materials();
    out << "elem,area,cx,cy";
    for (int i = 0; i < N; ++i) out << ",z_" << i + 1;
    for (int i = 0; i < N; ++i) out << ",m_" << i + 1;
    for (int i = 0; i < N; ++i) out << ",theta_" << i + 1;
    for (int i = 0; i < N; ++i) out << ",zhat_" << i + 1;
    out << ",class_label,m_combined\n";
    const auto areas = element_areas(mesh);
    const auto cents = element_centroids(mesh);
    for (int e = 0; e < mesh.element_count(); ++e) {
        out << e << ',' << detail::g17(areas[e]) << ',' << detail::g17(cents[e].x()) << ','
            << detail::g17(cents[e].y());
        for (int i = 0; i < N; ++i) out << ',' << detail::g17(control.z[i][e]);
        for (int i = 0; i < N; ++i) out << ',' << detail::g17(control.m[i][e]);
        for (int i = 0; i < N; ++i) out << ',' << detail::g17(control.theta[i][e]);
        for (int i = 0; i < N; ++i) out << ',' << detail::g17(physical.z[i][e]);
        int winner = -1;
        double best = 0.5;
        double m_comb = 0.0;
        for (int i = 0; i < N; ++i) {
            if (physical.z[i][e] > best) {
                best = physical.z[i][e];
                winner = i;
            }
            m_comb += physical.z[i][e] * physical.m[i][e];
        }
        out << ',' << (winner >= 0 ? classes[winner].label : "void") << ','
            << detail::g17(m_comb) << '\n';
    }
}

// Reload the control fields from an exported CSV (column layout above).
inline DesignField read_design_csv(const std::string& path, int n_materials) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_design_csv: cannot open " + path);
    std::string line;
    std::getline(in, line);  // header
    DesignField d;
    d.z.assign(n_materials, {});
    d.m.assign(n_materials, {});
    d.theta.assign(n_materials, {});
    while (std::getline(in, line)) {
        if (detail::blank_line(line)) continue;
        std::istringstream is(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(is, cell, ',')) cells.push_back(cell);
        if (static_cast<int>(cells.size()) < 4 + 4 * n_materials + 2)
            throw std::runtime_error("read_design_csv: short row in " + path);
        for (int i = 0; i < n_materials; ++i) d.z[i].push_back(std::stod(cells[4 + i]));
        for (int i = 0; i < n_materials; ++i)
            d.m[i].push_back(std::stod(cells[4 + n_materials + i]));
        for (int i = 0; i < n_materials; ++i)
            d.theta[i].push_back(std::stod(cells[4 + 2 * n_materials + i]));
    }
    return d;
}

inline void export_vtk(const Mesh& mesh, const DesignField& physical,
                       const std::vector<MaterialClass>& classes, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("export_vtk: cannot write " + path);
    out << "# vtk DataFile Version 3.0\ntopopt design\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << mesh.node_count() << " double\n";
    for (const auto& p : mesh.nodes) out << p.x() << ' ' << p.y() << " 0\n";
    out << "CELLS " << mesh.element_count() << ' ' << 4 * mesh.element_count() << '\n';
    for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    out << "CELL_TYPES " << mesh.element_count() << '\n';
    for (int e = 0; e < mesh.element_count(); ++e) out << "5\n";
    out << "CELL_DATA " << mesh.element_count() << '\n';
    const int N = physical.materials();
    for (int i = 0; i < N; ++i) {
        out << "SCALARS z_" << classes[i].label << " double 1\nLOOKUP_TABLE default\n";
        for (int e = 0; e < mesh.element_count(); ++e) out << physical.z[i][e] << '\n';
    }
    out << "SCALARS m_combined double 1\nLOOKUP_TABLE default\n";
    for (int e = 0; e < mesh.element_count(); ++e) {
        double mc = 0.0;
        for (int i = 0; i < N; ++i) mc += physical.z[i][e] * physical.m[i][e];
        out << mc << '\n';
    }
    out << "SCALARS theta double 1\nLOOKUP_TABLE default\n";
    for (int e = 0; e < mesh.element_count(); ++e) {
        int winner = 0;
        for (int i = 1; i < N; ++i)
            if (physical.z[i][e] > physical.z[winner][e]) winner = i;
        out << physical.theta[winner][e] << '\n';
    }
}

inline void render_svg(const Mesh& mesh, const DesignField& physical,
                       const std::vector<MaterialClass>& classes, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("render_svg: cannot write " + path);
    Eigen::Vector2d lo = mesh.nodes[0], hi = mesh.nodes[0];
    for (const auto& p : mesh.nodes) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double scale = 800.0 / std::max(hi.x() - lo.x(), hi.y() - lo.y());
    auto X = [&](double x) { return (x - lo.x()) * scale; };
    auto Y = [&](double y) { return (hi.y() - y) * scale; };  // flip y for SVG
    static const char* palette[] = {"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b"};
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << (hi.x() - lo.x()) * scale
        << "\" height=\"" << (hi.y() - lo.y()) * scale << "\">\n";
    const int N = physical.materials();
    const auto cents = element_centroids(mesh);
    for (int e = 0; e < mesh.element_count(); ++e) {
        int winner = -1;
        double best = 0.5;
        for (int i = 0; i < N; ++i)
            if (physical.z[i][e] > best) {
                best = physical.z[i][e];
                winner = i;
            }
        const auto& t = mesh.triangles[e];
        std::string fill = "#ffffff";
        if (winner >= 0)
            fill = classes[winner].isotropic ? "#808080" : palette[winner % 6];
        out << "<polygon points=\"";
        for (int a = 0; a < 3; ++a)
            out << X(mesh.nodes[t[a]].x()) << ',' << Y(mesh.nodes[t[a]].y()) << ' ';
        out << "\" fill=\"" << fill << "\" stroke=\"none\"/>\n";
        if (winner >= 0 && !classes[winner].isotropic) {
            // hatch line through the centroid along theta
            const double th = physical.theta[winner][e];
            const double r = 0.4 * std::sqrt(element_areas(mesh)[e]);
            out << "<line x1=\"" << X(cents[e].x() - r * std::cos(th)) << "\" y1=\""
                << Y(cents[e].y() - r * std::sin(th)) << "\" x2=\""
                << X(cents[e].x() + r * std::cos(th)) << "\" y2=\""
                << Y(cents[e].y() + r * std::sin(th))
                << "\" stroke=\"#000000\" stroke-width=\"0.5\"/>\n";
        }
    }
    out << "</svg>\n";
}

} // namespace topopt
