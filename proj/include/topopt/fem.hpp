#pragma once

// P1 linear-elastic equilibrium, compliance, mass, and per-element energy
// sensitivities for all design variables. Design fields are P0 (one value
// per element per material class), so one-point quadrature is exact.

#include "topopt/materials.hpp"
#include "topopt/mesh.hpp"
#include "topopt/tensor.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <stdexcept>
#include <vector>

namespace topopt {

using Field = std::vector<double>;            // one value per element
using PerMaterialField = std::vector<Field>;  // [material][element]

struct DesignField {
    PerMaterialField z, m, theta;

    static DesignField uniform(int n_mat, int n_elem, double z0, const std::vector<MaterialClass>& classes) {
        DesignField d;
        d.z.assign(n_mat, Field(n_elem, z0));
        d.m.resize(n_mat);
        d.theta.assign(n_mat, Field(n_elem, 0.0));
        for (int i = 0; i < n_mat; ++i)
            d.m[i].assign(n_elem, 0.5 * (classes[i].m_lower + classes[i].m_upper));
        return d;
    }

    int materials() const { return static_cast<int>(z.size()); }
    int elements() const { return z.empty() ? 0 : static_cast<int>(z[0].size()); }
};

// Constant strain-displacement matrix of a P1 triangle, tensorial strain
// convention (exx, eyy, exy).
inline Eigen::Matrix<double, 3, 6> p1_strain_matrix(const Mesh& mesh, int e) {
    const auto& t = mesh.triangles[e];
    const Eigen::Vector2d& p0 = mesh.nodes[t[0]];
    const Eigen::Vector2d& p1 = mesh.nodes[t[1]];
    const Eigen::Vector2d& p2 = mesh.nodes[t[2]];
    const double det = (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (p1.y() - p0.y());
    // gradients of the three barycentric hat functions
    const double dN[3][2] = {
        {(p1.y() - p2.y()) / det, (p2.x() - p1.x()) / det},
        {(p2.y() - p0.y()) / det, (p0.x() - p2.x()) / det},
        {(p0.y() - p1.y()) / det, (p1.x() - p0.x()) / det}};
    Eigen::Matrix<double, 3, 6> B = Eigen::Matrix<double, 3, 6>::Zero();
    for (int a = 0; a < 3; ++a) {
        B(0, 2 * a) = dN[a][0];
        B(1, 2 * a + 1) = dN[a][1];
        B(2, 2 * a) = 0.5 * dN[a][1];
        B(2, 2 * a + 1) = 0.5 * dN[a][0];
    }
    return B;
}

// Element stiffness for a unit tensor contribution: |e| B' D B.
inline Eigen::Matrix<double, 6, 6> element_stiffness(const Mesh& mesh, int e, const Tensor4& c) {
    const Eigen::Matrix<double, 3, 6> B = p1_strain_matrix(mesh, e);
    return mesh.signed_area(e) * (B.transpose() * c.quadratic_form() * B);
}

// Per-element physical tensor sum_i zhat^p Q(theta_hat) E_i(m_hat).
inline Tensor4 element_tensor(const DesignField& physical, const std::vector<MaterialClass>& classes,
                              double p, int e) {
    Tensor4 c;
    for (int i = 0; i < physical.materials(); ++i) {
        const Tensor4 ci = classes[i].stiffness(physical.m[i][e]);
        const Tensor4 cr = classes[i].isotropic ? ci : rotate_tensor(ci, physical.theta[i][e]);
        c = c + cr * std::pow(physical.z[i][e], p);
    }
    return c;
}

struct LinearSystem {
    Eigen::SparseMatrix<double> K;       // reduced to free dofs
    std::vector<int> dof_map;            // full dof -> reduced index, -1 if fixed
    int n_free = 0;
};

inline std::vector<int> dirichlet_dof_map(const Mesh& mesh) {
    std::vector<int> map(2 * mesh.node_count(), 0);
    for (int n : mesh.dirichlet_x) map[2 * n] = -1;
    for (int n : mesh.dirichlet_y) map[2 * n + 1] = -1;
    int next = 0;
    for (auto& v : map) v = (v == -1) ? -1 : next++;
    return map;
}

inline LinearSystem assemble_stiffness(const Mesh& mesh, const DesignField& physical,
                                       const std::vector<MaterialClass>& classes, double p) {
    if (mesh.dirichlet_x.empty() && mesh.dirichlet_y.empty())
        throw std::runtime_error("assemble_stiffness: empty Dirichlet set, singular system");
    LinearSystem sys;
    sys.dof_map = dirichlet_dof_map(mesh);
    for (int v : sys.dof_map) sys.n_free += (v >= 0);

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(36 * mesh.element_count());
    for (int e = 0; e < mesh.element_count(); ++e) {
        const Eigen::Matrix<double, 6, 6> Ke = element_stiffness(mesh, e, element_tensor(physical, classes, p, e));
        const auto& t = mesh.triangles[e];
        int dofs[6];
        for (int a = 0; a < 3; ++a) {
            dofs[2 * a] = sys.dof_map[2 * t[a]];
            dofs[2 * a + 1] = sys.dof_map[2 * t[a] + 1];
        }
        for (int r = 0; r < 6; ++r)
            for (int c = 0; c < 6; ++c)
                if (dofs[r] >= 0 && dofs[c] >= 0)
                    trip.emplace_back(dofs[r], dofs[c], Ke(r, c));
    }
    sys.K.resize(sys.n_free, sys.n_free);
    sys.K.setFromTriplets(trip.begin(), trip.end());
    return sys;
}

inline Eigen::VectorXd assemble_load(const Mesh& mesh) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(2 * mesh.node_count());
    for (const auto& pl : mesh.point_loads) {
        f[2 * pl.node] += pl.force.x();
        f[2 * pl.node + 1] += pl.force.y();
    }
    for (const auto& el : mesh.edge_loads) {
        const double len = (mesh.nodes[el.n1] - mesh.nodes[el.n0]).norm();
        for (int n : {el.n0, el.n1}) {
            f[2 * n] += 0.5 * len * el.traction.x();
            f[2 * n + 1] += 0.5 * len * el.traction.y();
        }
    }
    return f;
}

struct EquilibriumState {
    Eigen::VectorXd U;  // full-length displacement (fixed dofs zero)
    Eigen::VectorXd f;  // full-length load vector
    double compliance = 0.0;
    double residual = 0.0;
};

class EquilibriumSolver {
public:
    // Factorizes once; reusable for multiple right-hand sides.
    explicit EquilibriumSolver(const LinearSystem& sys) : sys_(&sys) {
        solver_.compute(sys.K);
        if (solver_.info() != Eigen::Success)
            throw std::runtime_error("equilibrium: Cholesky factorization failed (matrix not SPD?)");
    }

    EquilibriumState solve(const Eigen::VectorXd& f_full) const {
        EquilibriumState st;
        st.f = f_full;
        Eigen::VectorXd fr(sys_->n_free);
        for (int d = 0; d < f_full.size(); ++d)
            if (sys_->dof_map[d] >= 0) fr[sys_->dof_map[d]] = f_full[d];
        const Eigen::VectorXd ur = solver_.solve(fr);
        if (solver_.info() != Eigen::Success)
            throw std::runtime_error("equilibrium: solve failed");
        st.U = Eigen::VectorXd::Zero(f_full.size());
        for (int d = 0; d < f_full.size(); ++d)
            if (sys_->dof_map[d] >= 0) st.U[d] = ur[sys_->dof_map[d]];
        const double fn = fr.norm();
        st.residual = fn > 0.0 ? (sys_->K * ur - fr).norm() / fn : 0.0;
        if (st.residual > 1e-8)
            throw std::runtime_error("equilibrium: residual " + std::to_string(st.residual));
        st.compliance = f_full.dot(st.U);
        return st;
    }

private:
    const LinearSystem* sys_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
};

inline EquilibriumState solve_equilibrium(const Mesh& mesh, const DesignField& physical,
                                          const std::vector<MaterialClass>& classes, double p) {
    const LinearSystem sys = assemble_stiffness(mesh, physical, classes, p);
    return EquilibriumSolver(sys).solve(assemble_load(mesh));
}

// M = sum_i sum_l |e_l| zhat_{i,l} rho_i(mhat_{i,l}).
inline double total_mass(const Mesh& mesh, const DesignField& physical,
                         const std::vector<MaterialClass>& classes) {
    double M = 0.0;
    for (int e = 0; e < mesh.element_count(); ++e) {
        const double a = mesh.signed_area(e);
        for (int i = 0; i < physical.materials(); ++i)
            M += a * physical.z[i][e] * classes[i].density(physical.m[i][e]);
    }
    return M;
}

// Energies U' dK/d(.) U for each variable family, evaluated at the physical
// design. All positively oriented: s_z and s_m carry the full prefactors of
// the stiffness derivative; the compliance gradient is their negative.
struct Sensitivities {
    PerMaterialField s_z, s_m, s_theta;
};

inline Sensitivities element_energy_sensitivities(const Mesh& mesh, const DesignField& physical,
                                                  const std::vector<MaterialClass>& classes,
                                                  double p, const Eigen::VectorXd& U) {
    const int N = physical.materials(), Ne = physical.elements();
    Sensitivities s;
    s.s_z.assign(N, Field(Ne, 0.0));
    s.s_m.assign(N, Field(Ne, 0.0));
    s.s_theta.assign(N, Field(Ne, 0.0));
    for (int e = 0; e < Ne; ++e) {
        const Eigen::Matrix<double, 3, 6> B = p1_strain_matrix(mesh, e);
        const auto& t = mesh.triangles[e];
        Eigen::Matrix<double, 6, 1> ue;
        for (int a = 0; a < 3; ++a) {
            ue[2 * a] = U[2 * t[a]];
            ue[2 * a + 1] = U[2 * t[a] + 1];
        }
        const Eigen::Vector3d eps = B * ue;
        const double area = mesh.signed_area(e);
        for (int i = 0; i < N; ++i) {
            const double zh = physical.z[i][e], mh = physical.m[i][e], th = physical.theta[i][e];
            const Tensor4 ci = classes[i].stiffness(mh);
            const Tensor4 cr = classes[i].isotropic ? ci : rotate_tensor(ci, th);
            s.s_z[i][e] = p * std::pow(zh, p - 1.0) * area * cr.energy(eps);
            const Tensor4 dci = classes[i].stiffness_dm(mh);
            const Tensor4 dcr = classes[i].isotropic ? dci : rotate_tensor(dci, th);
            s.s_m[i][e] = std::pow(zh, p) * area * dcr.energy(eps);
            if (!classes[i].isotropic)
                s.s_theta[i][e] = std::pow(zh, p) * area * rotate_tensor_derivative(ci, th).energy(eps);
        }
    }
    return s;
}

inline double compliance(const EquilibriumState& st) { return st.compliance; }

} // namespace topopt
