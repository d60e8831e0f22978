// Command-line driver: optimize / homogenize / check / render.

#include "topopt/config.hpp"
#include "topopt/export.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace topopt;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// exit codes: 0 converged/ok, 2 max-iterations, 3 solver/setup failure
constexpr int kExitMaxIters = 2;
constexpr int kExitFailure = 3;

int cmd_optimize(const std::string& config_path, int seed_override, int max_iters_override,
                 const std::string& out_override) {
    ProblemConfig cfg = parse_config(read_file(config_path));
    if (seed_override >= 0) cfg.oc.seed = unsigned(seed_override);
    if (max_iters_override > 0) cfg.oc.max_iters = max_iters_override;
    if (!out_override.empty()) cfg.out_dir = out_override;
    const Problem prob = build_problem(cfg);
    const OptimizationResult res = run(prob, cfg.oc);

    fs::create_directories(cfg.out_dir);
    std::ofstream(fs::path(cfg.out_dir) / "iterations.csv") << res.csv_log;
    export_csv(prob.mesh, res.control, res.physical, prob.classes,
               (fs::path(cfg.out_dir) / "design.csv").string());
    export_vtk(prob.mesh, res.physical, prob.classes,
               (fs::path(cfg.out_dir) / "design.vtk").string());
    render_svg(prob.mesh, res.rounded, prob.classes,
               (fs::path(cfg.out_dir) / "design.svg").string());
    std::cout << "termination: " << res.termination << "\n"
              << "iterations: " << res.iterations << "\n"
              << "compliance: " << res.compliance_history.back() << "\n"
              << "rounded_compliance: " << res.rounded_compliance << "\n"
              << "mass: " << res.mass_history.back() << "\n";
    return res.termination == "converged" ? 0 : kExitMaxIters;
}

int cmd_homogenize(const std::string& config_path, int seed_override,
                   const std::string& out_override) {
    ProblemConfig cfg = parse_config(read_file(config_path));
    std::string out = !out_override.empty() ? out_override : cfg.database_out;
    if (out.empty()) {
        if (const char* cache = std::getenv("TOPOPT_DB_CACHE"))
            out = (fs::path(cache) / "database.txt").string();
        else
            out = "database.txt";
    }
    const unsigned seed = seed_override >= 0 ? unsigned(seed_override) : cfg.oc.seed + 1;
    const HomogenizedDatabase db =
        build_database(copolymer_intervals(), cfg.gamma, cfg.grid, cfg.phases, seed);
    fs::create_directories(fs::path(out).parent_path().empty() ? "."
                                                               : fs::path(out).parent_path());
    write_database_file(db, out);
    std::cout << "database written: " << out << "\n";
    return 0;
}

int cmd_check(const std::string& config_path) {
    const ProblemConfig cfg = parse_config(read_file(config_path));
    const Problem prob = build_problem(cfg);
    prob.validate(cfg.oc);
    std::cout << "config ok: " << prob.mesh.element_count() << " elements, "
              << prob.classes.size() << " material classes, budget " << prob.mass_budget << "\n";
    return 0;
}

int cmd_render(const std::string& csv_path, const std::string& svg_path,
               const std::string& config_path) {
    const ProblemConfig cfg = parse_config(read_file(config_path));
    const Problem prob = build_problem(cfg);
    const FilterOperator H(prob.mesh, prob.r_min);
    const DesignField control =
        read_design_csv(csv_path, static_cast<int>(prob.classes.size()));
    render_svg(prob.mesh, filter_design(H, control, prob.classes), prob.classes, svg_path);
    std::cout << "svg written: " << svg_path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"2D multimaterial anisotropic topology optimization"};
    app.require_subcommand(1);
    int seed = -1, max_iters = 0, threads = 1;
    std::string out;
    app.add_option("--seed", seed, "override RNG seed");
    app.add_option("--max-iters", max_iters, "override outer iteration cap");
    app.add_option("--out", out, "override output directory / file");
    app.add_option("--threads", threads, "worker threads (results are thread-count independent)");

    std::string config_path, csv_path, svg_path;
    auto* opt = app.add_subcommand("optimize", "run a topology optimization case");
    opt->add_option("config,--config", config_path, "config file")->required();
    auto* hom = app.add_subcommand("homogenize", "build a copolymer homogenized database");
    hom->add_option("config,--config", config_path, "config file")->required();
    auto* chk = app.add_subcommand("check", "validate a config without solving");
    chk->add_option("config,--config", config_path, "config file")->required();
    auto* ren = app.add_subcommand("render", "render a design CSV to SVG");
    ren->add_option("csv,--csv", csv_path, "design CSV")->required();
    ren->add_option("svg,--svg", svg_path, "output SVG")->required();
    ren->add_option("--config", config_path, "config file describing the mesh")->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (opt->parsed()) return cmd_optimize(config_path, seed, max_iters, out);
        if (hom->parsed()) return cmd_homogenize(config_path, seed, out);
        if (chk->parsed()) return cmd_check(config_path);
        if (ren->parsed()) return cmd_render(csv_path, svg_path, config_path);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitFailure;
    }
    return 0;
}
