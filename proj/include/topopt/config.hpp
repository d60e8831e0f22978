#pragma once

// Config-driven problem setup: INI-style parsing, the three case-study
// presets (mbb, square, lshape), material sets (single isotropic,
// rotated copies of a base tensor, copolymer database), and budget rules.

#include "topopt/homogenize.hpp"
#include "topopt/oc.hpp"

#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace topopt {

struct ProblemConfig {
    // mesh
    std::string preset;        // "mbb" | "square" | "lshape" | "" (file)
    std::string mesh_file;
    double width = 0.0, height = 0.0;  // 0 = preset default
    int nx = 0, ny = 0;
    // materials
    std::string material_kind;  // "single" | "rotated_copies" | "database"
    double E = 1000.0, nu = 0.3, rho = 1.0;
    std::vector<double> angles;
    std::array<double, 4> base_tensor = {665.5, 332.8, 142.6, 95.2};
    std::string database_path;
    // problem
    double mass_fraction = 0.4;       // used when mass_absolute unset
    std::optional<double> mass_absolute;
    double r_min = 0.0;               // 0 = preset default
    double load_magnitude = 1.0;
    // homogenize subcommand
    double gamma = 20.0;
    int grid = 128;
    PhaseElasticity phases;
    std::string database_out;
    // misc
    OCParams oc;
    std::string out_dir = ".";
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, ',')) out.push_back(std::stod(trim(item)));
    return out;
}

} // namespace detail

// Key-value sections; '#' starts a comment; unknown keys rejected with the
// offending name.
inline ProblemConfig parse_config(const std::string& text) {
    ProblemConfig c;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::invalid_argument("config line " + std::to_string(lineno) + ": bad section header");
            section = line.substr(1, line.size() - 2);
            static const std::set<std::string> known = {"mesh", "materials", "problem", "oc",
                                                        "homogenize", "output"};
            if (!known.count(section))
                throw std::invalid_argument("config: unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        auto bad = [&]() -> std::invalid_argument {
            return std::invalid_argument("config: unknown key '" + key + "' in section [" + section + "]");
        };
        if (section == "mesh") {
            if (key == "preset") c.preset = val;
            else if (key == "file") c.mesh_file = val;
            else if (key == "width") c.width = std::stod(val);
            else if (key == "height") c.height = std::stod(val);
            else if (key == "nx") c.nx = std::stoi(val);
            else if (key == "ny") c.ny = std::stoi(val);
            else throw bad();
        } else if (section == "materials") {
            if (key == "kind") c.material_kind = val;
            else if (key == "E") c.E = std::stod(val);
            else if (key == "nu") c.nu = std::stod(val);
            else if (key == "rho") c.rho = std::stod(val);
            else if (key == "angles") c.angles = detail::parse_list(val);
            else if (key == "base_tensor") {
                const auto v = detail::parse_list(val);
                if (v.size() != 4)
                    throw std::invalid_argument("config: base_tensor needs 4 entries (xxxx,yyyy,xxyy,xyxy)");
                std::copy(v.begin(), v.end(), c.base_tensor.begin());
            } else if (key == "database") c.database_path = val;
            else throw bad();
        } else if (section == "problem") {
            if (key == "mass_fraction") c.mass_fraction = std::stod(val);
            else if (key == "mass") c.mass_absolute = std::stod(val);
            else if (key == "r_min") c.r_min = std::stod(val);
            else if (key == "load") c.load_magnitude = std::stod(val);
            else throw bad();
        } else if (section == "oc") {
            if (key == "max_iters") c.oc.max_iters = std::stoi(val);
            else if (key == "seed") c.oc.seed = unsigned(std::stoul(val));
            else if (key == "z_min") c.oc.z_min = std::stod(val);
            else if (key == "eps_tol") c.oc.eps_tol = std::stod(val);
            else if (key == "move_limit") c.oc.zeta_z = c.oc.zeta_m = std::stod(val);
            else if (key == "random_theta") c.oc.random_theta_init = (val == "1" || val == "true");
            else throw bad();
        } else if (section == "homogenize") {
            if (key == "gamma") c.gamma = std::stod(val);
            else if (key == "grid") c.grid = std::stoi(val);
            else if (key == "E_A") c.phases.E_A = std::stod(val);
            else if (key == "nu_A") c.phases.nu_A = std::stod(val);
            else if (key == "E_B") c.phases.E_B = std::stod(val);
            else if (key == "nu_B") c.phases.nu_B = std::stod(val);
            else if (key == "rho_A") c.phases.rho_A = std::stod(val);
            else if (key == "rho_B") c.phases.rho_B = std::stod(val);
            else if (key == "out") c.database_out = val;
            else throw bad();
        } else if (section == "output") {
            if (key == "dir") c.out_dir = val;
            else throw bad();
        } else {
            throw std::invalid_argument("config: key '" + key + "' outside any section");
        }
    }
    return c;
}

// Preset geometry, boundary conditions, and filter radii (domain sizes and
// radii from the case studies; loads and supports are config contract).
inline Problem build_problem(const ProblemConfig& cfg) {
    Problem prob;
    double w = cfg.width, h = cfg.height, r_min = cfg.r_min;
    int nx = cfg.nx, ny = cfg.ny;
    if (cfg.preset == "mbb") {
        if (w <= 0) w = 20.0;
        if (h <= 0) h = 4.0;
        if (nx <= 0) nx = 100;
        if (ny <= 0) ny = 20;
        if (r_min <= 0) r_min = 0.15;
        prob.mesh = build_rect_mesh(w, h, nx, ny, RectSplit::Crossed);
        // simply supported: bottom-left pinned, bottom-right roller; load top-center
        const int bl = prob.mesh.nearest_node({0, 0});
        const int br = prob.mesh.nearest_node({w, 0});
        prob.mesh.dirichlet_x = {bl};
        prob.mesh.dirichlet_y = {bl, br};
        prob.mesh.point_loads.push_back(
            {prob.mesh.nearest_node({w / 2, h}), {0.0, -cfg.load_magnitude}});
    } else if (cfg.preset == "square") {
        if (w <= 0) w = 8.0;
        if (h <= 0) h = 8.0;
        if (nx <= 0) nx = 40;
        if (ny <= 0) ny = 40;
        if (r_min <= 0) r_min = 0.1;
        prob.mesh = build_rect_mesh(w, h, nx, ny, RectSplit::Crossed);
        // four corners pinned; load at the domain center
        std::vector<int> corners = {prob.mesh.nearest_node({0, 0}), prob.mesh.nearest_node({w, 0}),
                                    prob.mesh.nearest_node({0, h}), prob.mesh.nearest_node({w, h})};
        prob.mesh.dirichlet_x = corners;
        prob.mesh.dirichlet_y = corners;
        prob.mesh.point_loads.push_back(
            {prob.mesh.nearest_node({w / 2, h / 2}), {0.0, -cfg.load_magnitude}});
    } else if (cfg.preset == "lshape") {
        double size = w > 0 ? w : 8.0;
        int n = nx > 0 ? nx : 32;
        if (r_min <= 0) r_min = 0.1;
        prob.mesh = build_lshape_mesh(size, n, RectSplit::Crossed);
        // clamp the top edge of the remaining column; load mid-height of the right edge
        prob.mesh.dirichlet_x = prob.mesh.nodes_where(
            [&](const Eigen::Vector2d& p) { return p.y() == size && p.x() <= size / 2 + 1e-12; });
        prob.mesh.dirichlet_y = prob.mesh.dirichlet_x;
        prob.mesh.point_loads.push_back(
            {prob.mesh.nearest_node({size, size / 4}), {0.0, -cfg.load_magnitude}});
    } else if (!cfg.mesh_file.empty()) {
        prob.mesh = read_mesh_file(cfg.mesh_file);
        if (r_min <= 0)
            throw std::invalid_argument("config: r_min required for file meshes");
    } else {
        throw std::invalid_argument("config: mesh needs 'preset' or 'file'");
    }
    prob.r_min = r_min;

    if (cfg.material_kind == "single" || cfg.material_kind.empty()) {
        prob.classes.push_back(
            fixed_material("solid", isotropic_tensor(cfg.E, cfg.nu), cfg.rho, true));
    } else if (cfg.material_kind == "rotated_copies") {
        std::vector<double> angles = cfg.angles;
        if (angles.empty())
            angles = {0.0, std::numbers::pi / 4, std::numbers::pi / 2, 3 * std::numbers::pi / 4};
        const Tensor4 base = Tensor4::from_entries(cfg.base_tensor[0], cfg.base_tensor[1],
                                                   cfg.base_tensor[2], cfg.base_tensor[3]);
        for (size_t i = 0; i < angles.size(); ++i)
            prob.classes.push_back(fixed_material("rot_" + std::to_string(i),
                                                  rotate_tensor(base, angles[i]), cfg.rho,
                                                  /*isotropic=*/true));
    } else if (cfg.material_kind == "database") {
        const HomogenizedDatabase db = read_database_file(cfg.database_path);
        prob.classes = database_material_classes(db);
    } else {
        throw std::invalid_argument("config: unknown materials kind '" + cfg.material_kind + "'");
    }

    double area = 0.0;
    for (double a : element_areas(prob.mesh)) area += a;
    if (cfg.mass_absolute) {
        prob.mass_budget = *cfg.mass_absolute;
    } else {
        double rho_max = 0.0;
        for (const auto& mc : prob.classes)
            rho_max = std::max(rho_max, mc.density(mc.m_upper));
        prob.mass_budget = cfg.mass_fraction * area * rho_max;
    }
    if (prob.mass_budget <= 0.0)
        throw std::invalid_argument(
            "config: mass budget must be positive and satisfy the feasibility bound "
            "Mbar > |Omega| z_min sum_i rho_i");
    return prob;
}

} // namespace topopt
