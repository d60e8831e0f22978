#include "topopt/config.hpp"
#include "topopt/export.hpp"
#include "topopt/fem.hpp"
#include "topopt/filter.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <numbers>
#include <random>

using namespace topopt;
using Catch::Approx;

TEST_CASE("config parsing: presets, sections, comments") {
    const std::string text =
        "# case study\n"
        "[mesh]\n"
        "preset = mbb\n"
        "nx = 60  # coarse\n"
        "ny = 12\n"
        "[problem]\n"
        "mass_fraction = 0.5\n"
        "[oc]\n"
        "max_iters = 42\n"
        "seed = 9\n";
    const ProblemConfig c = parse_config(text);
    CHECK(c.preset == "mbb");
    CHECK(c.nx == 60);
    CHECK(c.ny == 12);
    CHECK(c.mass_fraction == Approx(0.5));
    CHECK(c.oc.max_iters == 42);
    CHECK(c.oc.seed == 9u);
    // untouched defaults
    CHECK(c.r_min == 0.0);
    CHECK(c.gamma == Approx(20.0));
    CHECK(c.grid == 128);
}

TEST_CASE("config parsing rejects unknown keys and sections by name") {
    CHECK_THROWS_WITH(parse_config("[mesh]\nflavor = 3\n"),
                      Catch::Matchers::ContainsSubstring("flavor"));
    CHECK_THROWS_WITH(parse_config("[warp]\n"), Catch::Matchers::ContainsSubstring("warp"));
    CHECK_THROWS_AS(parse_config("preset = mbb\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("[mesh]\npreset mbb\n"), std::invalid_argument);
}

TEST_CASE("mbb preset geometry and budget") {
    ProblemConfig c = parse_config("[mesh]\npreset = mbb\nnx = 40\nny = 8\n");
    const Problem p = build_problem(c);
    CHECK(p.r_min == Approx(0.15));
    REQUIRE(p.classes.size() == 1);
    // 20 x 4 domain, volume fraction 0.4, rho = 1
    CHECK(p.mass_budget == Approx(0.4 * 20.0 * 4.0));
    CHECK_FALSE(p.mesh.dirichlet_y.empty());
    REQUIRE(p.mesh.point_loads.size() == 1);
    CHECK(p.mesh.point_loads[0].force.y() == Approx(-1.0));
    const auto& ln = p.mesh.nodes[p.mesh.point_loads[0].node];
    CHECK(ln.x() == Approx(10.0));
    CHECK(ln.y() == Approx(4.0));
    p.validate(OCParams{});
}

TEST_CASE("square and lshape presets") {
    {
        ProblemConfig c = parse_config("[mesh]\npreset = square\nnx = 16\nny = 16\n");
        const Problem p = build_problem(c);
        CHECK(p.r_min == Approx(0.1));
        CHECK(p.mesh.dirichlet_x.size() == 4);
        CHECK(p.mass_budget == Approx(0.4 * 64.0));
        p.validate(OCParams{});
    }
    {
        ProblemConfig c = parse_config("[mesh]\npreset = lshape\nnx = 12\n");
        const Problem p = build_problem(c);
        // three quarters of an 8 x 8 square
        double area = 0.0;
        for (double a : element_areas(p.mesh)) area += a;
        CHECK(area == Approx(48.0));
        CHECK(p.mass_budget == Approx(0.4 * 48.0));
        p.validate(OCParams{});
    }
}

TEST_CASE("material kinds") {
    SECTION("single isotropic") {
        ProblemConfig c = parse_config(
            "[mesh]\npreset = square\nnx = 8\nny = 8\n[materials]\nkind = single\nE = 500\nnu = 0.25\nrho = 2\n");
        const Problem p = build_problem(c);
        REQUIRE(p.classes.size() == 1);
        CHECK(p.classes[0].isotropic);
        CHECK(p.classes[0].density(0.0) == Approx(2.0));
        CHECK(p.classes[0].stiffness(0.0).cxxxx() ==
              Approx(isotropic_tensor(500.0, 0.25).cxxxx()));
    }
    SECTION("rotated copies default to four angles") {
        ProblemConfig c = parse_config(
            "[mesh]\npreset = square\nnx = 8\nny = 8\n[materials]\nkind = rotated_copies\n");
        const Problem p = build_problem(c);
        REQUIRE(p.classes.size() == 4);
        const Tensor4 base = Tensor4::from_entries(665.5, 332.8, 142.6, 95.2);
        CHECK(p.classes[0].stiffness(0.0).cxxxx() == Approx(base.cxxxx()));
        // 90-degree copy swaps the normal moduli
        CHECK(p.classes[2].stiffness(0.0).cxxxx() == Approx(base.cyyyy()));
        CHECK(p.classes[2].stiffness(0.0).cyyyy() == Approx(base.cxxxx()));
    }
    SECTION("unknown kind rejected") {
        ProblemConfig c =
            parse_config("[mesh]\npreset = square\nnx = 8\nny = 8\n[materials]\nkind = magic\n");
        CHECK_THROWS_WITH(build_problem(c), Catch::Matchers::ContainsSubstring("magic"));
    }
}

TEST_CASE("budget validation") {
    ProblemConfig c =
        parse_config("[mesh]\npreset = square\nnx = 8\nny = 8\n[problem]\nmass_fraction = 0\n");
    CHECK_THROWS_AS(build_problem(c), std::invalid_argument);
    ProblemConfig c2 =
        parse_config("[mesh]\npreset = square\nnx = 8\nny = 8\n[problem]\nmass = 0.0001\n");
    const Problem p2 = build_problem(c2);
    // positive but below the z_min floor: caught by Problem::validate
    CHECK_THROWS_AS(p2.validate(OCParams{}), std::invalid_argument);
}

TEST_CASE("design CSV round trip preserves the physical state") {
    ProblemConfig cfg = parse_config("[mesh]\npreset = square\nnx = 10\nny = 10\n");
    const Problem prob = build_problem(cfg);
    OCParams par;
    DesignField d = initial_design(prob, par);
    // perturb so the file is not trivially uniform
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& zi : d.z)
        for (auto& v : zi) v = 0.05 + 0.2 * u(rng);
    for (auto& v : d.m[0]) v += 0.01 * u(rng);

    const FilterOperator H(prob.mesh, prob.r_min);
    const DesignField pd = filter_design(H, d, prob.classes);
    const std::string path = "design_roundtrip_test.csv";
    export_csv(prob.mesh, d, pd, prob.classes, path);
    const DesignField r = read_design_csv(path, d.materials());
    std::remove(path.c_str());

    REQUIRE(r.elements() == d.elements());
    for (int i = 0; i < d.materials(); ++i)
        for (int e = 0; e < d.elements(); ++e) {
            CHECK(r.z[i][e] == Approx(d.z[i][e]).margin(1e-12));
            CHECK(r.m[i][e] == Approx(d.m[i][e]).margin(1e-12));
        }

    // the recovered design produces the same compliance
    const DesignField pr = filter_design(H, r, prob.classes);
    const double cd = solve_equilibrium(prob.mesh, pd, prob.classes, 3.0).compliance;
    const double cr = solve_equilibrium(prob.mesh, pr, prob.classes, 3.0).compliance;
    CHECK(cr == Approx(cd).epsilon(1e-9));
}
