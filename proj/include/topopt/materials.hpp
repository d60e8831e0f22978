#pragma once

// Parametrized material classes and interpolated homogenized databases.

#include "topopt/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace topopt {

// A class of materials parametrized by a scalar m in [m_lower, m_upper].
// angular_period is pi for orthotropic classes, 2*pi for generic ones;
// isotropic classes are theta-independent and carry no period.
struct MaterialClass {
    std::string label;
    double m_lower = 0.0;
    double m_upper = 0.0;
    bool isotropic = false;
    double angular_period = M_PI;
    std::function<Tensor4(double)> stiffness;
    std::function<Tensor4(double)> stiffness_dm;
    std::function<double(double)> density;
    std::function<double(double)> density_dm;

    void validate() const {
        if (!(m_lower < m_upper)) throw std::invalid_argument("material class: m_lower must be < m_upper");
        if (!stiffness || !density) throw std::invalid_argument("material class: missing callbacks");
    }
};

// A material whose tensor does not depend on m (fixed tensor, fixed density).
inline MaterialClass fixed_material(const std::string& label, const Tensor4& c, double rho,
                                    bool isotropic = false, double period = M_PI) {
    MaterialClass mc;
    mc.label = label;
    mc.m_lower = -1.0;
    mc.m_upper = 1.0;
    mc.isotropic = isotropic;
    mc.angular_period = period;
    mc.stiffness = [c](double) { return c; };
    mc.stiffness_dm = [](double) { return Tensor4(); };
    mc.density = [rho](double) { return rho; };
    mc.density_dm = [](double) { return 0.0; };
    return mc;
}

// rho(m) = (rhoA+rhoB)/2 + (rhoA-rhoB)/2 * m; equals rhoA at m=1, rhoB at m=-1.
inline double density_affine(double rhoA, double rhoB, double m) {
    if (std::abs(m) > 1.0 + 1e-12)
        throw std::invalid_argument("density_affine: |m| must be <= 1");
    return 0.5 * (rhoA + rhoB) + 0.5 * (rhoA - rhoB) * m;
}

// One interpolation interval: three samples (endpoints + midpoint) and the
// per-entry quadratic Lagrange interpolant through them.
struct DatabaseInterval {
    std::string label;
    bool isotropic = false;
    std::array<double, 3> m = {0.0, 0.0, 0.0};
    std::array<Tensor4, 3> samples;
    std::array<unsigned, 3> seeds = {0, 0, 0};

    bool contains(double q, double tol) const { return q >= m[0] - tol && q <= m[2] + tol; }
};

struct HomogenizedDatabase {
    std::vector<DatabaseInterval> intervals;
    double rhoA = 1.0, rhoB = 1.0;
    double gamma = 20.0;
    int grid = 0;

    static constexpr double kEdgeTol = 1e-9;

    const DatabaseInterval& interval_for(double m) const {
        for (const auto& iv : intervals)
            if (iv.contains(m, kEdgeTol)) return iv;
        std::ostringstream os;
        os << "database: m=" << m << " outside valid intervals:";
        for (const auto& iv : intervals)
            os << " " << iv.label << " [" << iv.m[0] << ", " << iv.m[2] << "]";
        throw std::out_of_range(os.str());
    }

    const DatabaseInterval& interval_labeled(const std::string& label) const {
        for (const auto& iv : intervals)
            if (iv.label == label) return iv;
        throw std::out_of_range("database: no interval labeled " + label);
    }
};

namespace detail {

inline std::array<double, 3> lagrange_weights(const std::array<double, 3>& x, double q) {
    return {(q - x[1]) * (q - x[2]) / ((x[0] - x[1]) * (x[0] - x[2])),
            (q - x[0]) * (q - x[2]) / ((x[1] - x[0]) * (x[1] - x[2])),
            (q - x[0]) * (q - x[1]) / ((x[2] - x[0]) * (x[2] - x[1]))};
}

inline std::array<double, 3> lagrange_weights_dm(const std::array<double, 3>& x, double q) {
    return {(2.0 * q - x[1] - x[2]) / ((x[0] - x[1]) * (x[0] - x[2])),
            (2.0 * q - x[0] - x[2]) / ((x[1] - x[0]) * (x[1] - x[2])),
            (2.0 * q - x[0] - x[1]) / ((x[2] - x[0]) * (x[2] - x[1]))};
}

} // namespace detail

inline Tensor4 interp_database(const HomogenizedDatabase& db, double m) {
    const auto& iv = db.interval_for(m);
    const auto w = detail::lagrange_weights(iv.m, m);
    return iv.samples[0] * w[0] + iv.samples[1] * w[1] + iv.samples[2] * w[2];
}

inline Tensor4 interp_database_derivative(const HomogenizedDatabase& db, double m) {
    const auto& iv = db.interval_for(m);
    const auto w = detail::lagrange_weights_dm(iv.m, m);
    return iv.samples[0] * w[0] + iv.samples[1] * w[1] + iv.samples[2] * w[2];
}

inline double interp_database_density(const HomogenizedDatabase& db, double m) {
    return density_affine(db.rhoA, db.rhoB, m);
}

// Material classes backed by a copolymer database, one per interval.
inline std::vector<MaterialClass> database_material_classes(const HomogenizedDatabase& db) {
    std::vector<MaterialClass> out;
    for (const auto& iv : db.intervals) {
        MaterialClass mc;
        mc.label = iv.label;
        mc.m_lower = iv.m[0];
        mc.m_upper = iv.m[2];
        mc.isotropic = iv.isotropic;
        mc.angular_period = M_PI; // stripes are orthotropic
        const HomogenizedDatabase* dbp = &db;
        mc.stiffness = [dbp](double m) { return interp_database(*dbp, m); };
        mc.stiffness_dm = [dbp](double m) { return interp_database_derivative(*dbp, m); };
        const double ra = db.rhoA, rb = db.rhoB;
        mc.density = [ra, rb](double m) { return density_affine(ra, rb, m); };
        mc.density_dm = [ra, rb](double) { return 0.5 * (ra - rb); };
        out.push_back(std::move(mc));
    }
    return out;
}

// --- serialization (structured text; doubles printed with %.17g so that a
// --- reload reproduces every value bit-exactly) ---

namespace detail {
inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
} // namespace detail

inline void write_database(const HomogenizedDatabase& db, std::ostream& out) {
    using detail::fmt_double;
    out << "topopt-homogenized-database 1\n";
    out << "gamma " << fmt_double(db.gamma) << "\n";
    out << "grid " << db.grid << "\n";
    out << "density " << fmt_double(db.rhoA) << " " << fmt_double(db.rhoB) << "\n";
    out << "intervals " << db.intervals.size() << "\n";
    for (const auto& iv : db.intervals) {
        out << "interval " << iv.label << " " << (iv.isotropic ? 1 : 0) << "\n";
        out << "m " << fmt_double(iv.m[0]) << " " << fmt_double(iv.m[1]) << " "
            << fmt_double(iv.m[2]) << "\n";
        out << "seeds " << iv.seeds[0] << " " << iv.seeds[1] << " " << iv.seeds[2] << "\n";
        for (const auto& s : iv.samples) {
            out << "tensor " << fmt_double(s.cxxxx()) << " " << fmt_double(s.cyyyy()) << " "
                << fmt_double(s.cxxyy()) << " " << fmt_double(s.cxyxy()) << " "
                << fmt_double(s.cxxxy()) << " " << fmt_double(s.cyyxy()) << "\n";
        }
    }
}

inline HomogenizedDatabase read_database(std::istream& in) {
    HomogenizedDatabase db;
    std::string tag;
    int version = 0;
    if (!(in >> tag >> version) || tag != "topopt-homogenized-database" || version != 1)
        throw std::invalid_argument("database: bad header");
    std::size_t n = 0;
    auto expect = [&](const char* want) {
        if (!(in >> tag) || tag != want)
            throw std::invalid_argument(std::string("database: expected '") + want + "'");
    };
    expect("gamma"); in >> db.gamma;
    expect("grid"); in >> db.grid;
    expect("density"); in >> db.rhoA >> db.rhoB;
    expect("intervals"); in >> n;
    db.intervals.resize(n);
    for (auto& iv : db.intervals) {
        int iso = 0;
        expect("interval"); in >> iv.label >> iso;
        iv.isotropic = iso != 0;
        expect("m"); in >> iv.m[0] >> iv.m[1] >> iv.m[2];
        expect("seeds"); in >> iv.seeds[0] >> iv.seeds[1] >> iv.seeds[2];
        for (auto& s : iv.samples) {
            double cxxxx, cyyyy, cxxyy, cxyxy, cxxxy, cyyxy;
            expect("tensor");
            in >> cxxxx >> cyyyy >> cxxyy >> cxyxy >> cxxxy >> cyyxy;
            s = Tensor4::from_entries(cxxxx, cyyyy, cxxyy, cxyxy, cxxxy, cyyxy);
        }
    }
    if (!in) throw std::invalid_argument("database: truncated file");
    return db;
}

inline void write_database_file(const HomogenizedDatabase& db, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("database: cannot write " + path);
    write_database(db, out);
}

inline HomogenizedDatabase read_database_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("database: cannot open " + path);
    return read_database(in);
}

} // namespace topopt
