#pragma once

// Generalized Optimality Criteria driver: damped fixed-point updates for
// (z, m) with nested bisection on the mass multiplier Lambda and per-element
// overlap multipliers mu_l, steepest-descent orientation update with Armijo
// line search, SIMP continuation on p, and binary post-processing.

#include "topopt/fem.hpp"
#include "topopt/filter.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace topopt {

struct OCParams {
    double z_min = 1e-3;
    double delta = 1e-3;           // m-update shift
    double zeta_z = 0.05;          // z move limit
    double zeta_m = 0.05;          // m move limit
    double eta = 0.5;              // damping exponent
    int p_hold_iters = 30;         // p = 1 for this many iterations
    int p_ramp_iters = 30;         // then linear ramp ...
    double p_final = 3.0;          // ... to this value
    double eps_scale = 1e-9;       // stabilizer, times mean element energy
    double eps_tol = 1e-4;         // relative constraint tolerance
    int max_iters = 300;
    double dz_converged = 0.01;    // stop when max |dz| falls below
    double theta_step = 1.0;       // initial step as a fraction of the max angle move
    double theta_backtrack = 0.5;
    double theta_armijo = 1e-4;
    int theta_max_backtracks = 12;
    double theta_max_move = std::numbers::pi / 8.0;
    bool random_theta_init = false;
    unsigned seed = 0;
};

struct Problem {
    Mesh mesh;
    std::vector<MaterialClass> classes;
    double r_min = 0.0;
    double mass_budget = 0.0;  // Mbar

    void validate(const OCParams& p) const {
        mesh.validate();
        if (classes.empty()) throw std::invalid_argument("problem: no material classes");
        for (const auto& c : classes) c.validate();
        if (r_min <= 0.0) throw std::invalid_argument("problem: r_min must be positive");
        const int N = static_cast<int>(classes.size());
        if (!(p.z_min > 0.0 && p.z_min < 1.0 / N))
            throw std::invalid_argument("params: need 0 < z_min < 1/N");
        double area = 0.0;
        for (double a : element_areas(mesh)) area += a;
        double rho_lo = 0.0;
        for (const auto& c : classes) rho_lo += c.density(c.m_upper);
        if (!(mass_budget > area * p.z_min * rho_lo))
            throw std::invalid_argument("problem: mass budget infeasible (violates Mbar > |Omega| z_min sum rho_i)");
    }
};

// p = 1 for the first p_hold_iters iterations, then a linear ramp over the
// next p_ramp_iters reaching p_final at iteration hold + ramp - 1.
inline double continuation_p(int iteration, const OCParams& par = {}) {
    if (iteration < par.p_hold_iters) return 1.0;
    const int t = iteration - par.p_hold_iters;
    if (t >= par.p_ramp_iters - 1) return par.p_final;
    return 1.0 + (par.p_final - 1.0) * double(t) / double(par.p_ramp_iters - 1);
}

// Fixed data for one outer iteration's multiplier search: filtered gradients
// and filtered mass weights, all per (material, element) on control indices.
struct UpdateData {
    PerMaterialField gz;   // (Hhat' s_z)_{i,l}  — numerator of B
    PerMaterialField gm;   // (Hhat' s_m)_{i,l}  — numerator of D
    PerMaterialField wz;   // (Hhat' (|e| rho_i(mhat)))_l      — Lambda weight in B
    PerMaterialField wm;   // (Hhat' (|e| rho_i'(mhat) zhat))_l — Lambda weight in D
    double eps = 0.0;      // stabilizer
};

inline UpdateData make_update_data(const Mesh& mesh, const FilterOperator& H,
                                   const DesignField& physical,
                                   const std::vector<MaterialClass>& classes,
                                   const Sensitivities& s, double compliance,
                                   const OCParams& par) {
    UpdateData d;
    const int N = physical.materials(), Ne = physical.elements();
    const auto areas = element_areas(mesh);
    d.gz.resize(N);
    d.gm.resize(N);
    d.wz.resize(N);
    d.wm.resize(N);
    for (int i = 0; i < N; ++i) {
        d.gz[i] = H.apply_transpose(s.s_z[i]);
        d.gm[i] = H.apply_transpose(s.s_m[i]);
        Field rz(Ne), rm(Ne);
        for (int e = 0; e < Ne; ++e) {
            rz[e] = areas[e] * classes[i].density(physical.m[i][e]);
            rm[e] = areas[e] * classes[i].density_dm(physical.m[i][e]) * physical.z[i][e];
        }
        d.wz[i] = H.apply_transpose(rz);
        d.wm[i] = H.apply_transpose(rm);
    }
    d.eps = par.eps_scale * std::max(compliance, 0.0) / std::max(Ne, 1);
    if (d.eps <= 0.0) d.eps = par.eps_scale;
    return d;
}

// One damped, move-limited fixed-point update (Remark 3) for every (i, l),
// at given multipliers. mu is per element.
inline void update_zm(const DesignField& raw, const UpdateData& d,
                      const std::vector<MaterialClass>& classes, double Lambda,
                      const Field& mu, const OCParams& par,
                      PerMaterialField& z_out, PerMaterialField& m_out) {
    const int N = raw.materials(), Ne = raw.elements();
    z_out.assign(N, Field(Ne));
    m_out.assign(N, Field(Ne));
    for (int i = 0; i < N; ++i) {
        const double ml = classes[i].m_lower, mu_b = classes[i].m_upper;
        for (int e = 0; e < Ne; ++e) {
            const double B = (d.gz[i][e] + d.eps) / (Lambda * d.wz[i][e] + mu[e] + d.eps);
            const double z = raw.z[i][e];
            const double zc = std::pow(B, par.eta) * z;
            z_out[i][e] = std::clamp(zc, std::max(par.z_min, z - par.zeta_z),
                                     std::min(1.0, z + par.zeta_z));
            const double D = (d.gm[i][e] + d.eps) / (Lambda * d.wm[i][e] + d.eps);
            const double m = raw.m[i][e];
            const double mt = ml - par.delta + std::pow(D, par.eta) * (m - ml + par.delta);
            m_out[i][e] = std::clamp(mt, std::max(ml, m - par.zeta_m),
                                     std::min(mu_b, m + par.zeta_m));
        }
    }
}

namespace detail {
// z candidates of a single element at (Lambda, mu_l); returns Z_l = sum_i z'.
inline double element_z_sum(const DesignField& raw, const UpdateData& d, double Lambda,
                            double mu_l, int e, const OCParams& par, double* z_out = nullptr) {
    double Z = 0.0;
    for (int i = 0; i < raw.materials(); ++i) {
        const double B = (d.gz[i][e] + d.eps) / (Lambda * d.wz[i][e] + mu_l + d.eps);
        const double z = raw.z[i][e];
        const double zc = std::clamp(std::pow(B, par.eta) * z,
                                     std::max(par.z_min, z - par.zeta_z),
                                     std::min(1.0, z + par.zeta_z));
        if (z_out) z_out[i] = zc;
        Z += zc;
    }
    return Z;
}
} // namespace detail

// Per-element overlap multiplier: smallest mu_l >= 0 with Z_l(Lambda, mu_l) <= 1.
// Z_l is non-increasing in mu_l (Prop. 2a), so plain bisection applies.
inline double inner_bisection_mu(int e, double Lambda, const DesignField& raw,
                                 const UpdateData& d, const OCParams& par,
                                 double warm_start = 1.0) {
    const double tol = par.eps_tol;
    if (detail::element_z_sum(raw, d, Lambda, 0.0, e, par) <= 1.0 + tol) return 0.0;
    double hi = std::max(warm_start, d.eps);
    int doublings = 0;
    while (detail::element_z_sum(raw, d, Lambda, hi, e, par) > 1.0) {
        hi *= 2.0;
        if (++doublings > 200)
            throw std::runtime_error("inner_bisection_mu: bracket expansion failed");
    }
    double lo = 0.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double Z = detail::element_z_sum(raw, d, Lambda, mid, e, par);
        if (std::abs(Z - 1.0) <= tol) return mid;
        (Z > 1.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct LambdaResult {
    double Lambda = 0.0;
    Field mu;
    PerMaterialField z, m;  // accepted control candidates
    double mass = 0.0;      // mass of the filtered candidates
};

// Full update at one Lambda: m first (mu does not enter it), then per-element
// mu loops for z; mass evaluated on the filtered candidate fields.
namespace detail {
inline LambdaResult evaluate_lambda(double Lambda, const Mesh& mesh, const FilterOperator& H,
                                    const DesignField& raw, const UpdateData& d,
                                    const std::vector<MaterialClass>& classes,
                                    const OCParams& par, const Field& mu_warm) {
    LambdaResult r;
    r.Lambda = Lambda;
    const int N = raw.materials(), Ne = raw.elements();
    // m-update (mu does not enter D)
    PerMaterialField ztmp;
    update_zm(raw, d, classes, Lambda, Field(Ne, 0.0), par, ztmp, r.m);
    // per-element mu bisections for z
    r.mu.assign(Ne, 0.0);
    r.z.assign(N, Field(Ne));
    std::vector<double> zl(N);
    for (int e = 0; e < Ne; ++e) {
        r.mu[e] = inner_bisection_mu(e, Lambda, raw, d, par,
                                     mu_warm.empty() ? 1.0 : std::max(mu_warm[e], 1e-12));
        element_z_sum(raw, d, Lambda, r.mu[e], e, par, zl.data());
        for (int i = 0; i < N; ++i) r.z[i][e] = zl[i];
    }
    // mass of filtered candidates
    const auto areas = element_areas(mesh);
    for (int i = 0; i < N; ++i) {
        const Field zh = H.apply(r.z[i]);
        const Field mh = H.apply(r.m[i]);
        for (int e = 0; e < Ne; ++e) r.mass += areas[e] * zh[e] * classes[i].density(mh[e]);
    }
    return r;
}
} // namespace detail

// Outer bisection: Lambda = 0 if the budget is slack, else the unique Lambda
// with M(Lambda) = Mbar (M non-increasing in Lambda, Prop. 2c).
inline LambdaResult outer_bisection_lambda(const Mesh& mesh, const FilterOperator& H,
                                           const DesignField& raw, const UpdateData& d,
                                           const std::vector<MaterialClass>& classes,
                                           double Mbar, const OCParams& par,
                                           double Lambda_prev = 1.0,
                                           const Field& mu_warm = {}) {
    const double tol = par.eps_tol * Mbar;
    auto eval = [&](double L) {
        return detail::evaluate_lambda(L, mesh, H, raw, d, classes, par, mu_warm);
    };
    LambdaResult at0 = eval(0.0);
    if (at0.mass <= Mbar + tol) return at0;
    double lo = 0.0, hi = std::max(Lambda_prev, 1e-12);
    LambdaResult rhi = eval(hi);
    int doublings = 0;
    while (rhi.mass > Mbar) {
        lo = hi;
        hi *= 2.0;
        rhi = eval(hi);
        if (++doublings > 200)
            throw std::runtime_error("outer_bisection_lambda: bracket expansion failed");
    }
    LambdaResult best = rhi;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        best = eval(mid);
        if (std::abs(best.mass - Mbar) <= tol) return best;
        (best.mass > Mbar ? lo : hi) = mid;
    }
    return best;
}

// Steepest descent on the control angles with Armijo backtracking; the
// compliance callback must filter + solve at the trial angles.
inline bool update_theta(PerMaterialField& theta, const PerMaterialField& grad,
                         const std::vector<MaterialClass>& classes, const OCParams& par,
                         double compliance_now,
                         const std::function<double(const PerMaterialField&)>& evaluate_compliance) {
    const int N = static_cast<int>(theta.size());
    double gmax = 0.0, gnorm2 = 0.0;
    for (int i = 0; i < N; ++i) {
        if (classes[i].isotropic) continue;
        for (double g : grad[i]) {
            gmax = std::max(gmax, std::abs(g));
            gnorm2 += g * g;
        }
    }
    if (gmax == 0.0) return false;
    // largest step honoring the per-element angle cap, scaled by theta_step;
    // this keeps the search invariant to the magnitude of the gradient
    double alpha = par.theta_step * par.theta_max_move / gmax;
    for (int bt = 0; bt < par.theta_max_backtracks; ++bt, alpha *= par.theta_backtrack) {
        PerMaterialField trial = theta;
        for (int i = 0; i < N; ++i) {
            if (classes[i].isotropic) continue;
            const double T = classes[i].angular_period;
            for (size_t e = 0; e < trial[i].size(); ++e) {
                double t = theta[i][e] - alpha * grad[i][e];
                t = std::fmod(t, T);
                if (t < 0.0) t += T;
                trial[i][e] = t;
            }
        }
        const double c = evaluate_compliance(trial);
        if (c <= compliance_now - par.theta_armijo * alpha * gnorm2) {
            theta = std::move(trial);
            return true;
        }
    }
    return false;
}

// Branch-wise violation of the discrete optimality system.
inline double kkt_residual(const DesignField& raw, double Lambda, const Field& mu,
                           const UpdateData& d, const std::vector<MaterialClass>& classes,
                           double Mbar, double mass, const PerMaterialField& gtheta,
                           double compliance, const OCParams& par) {
    double res = 0.0;
    const int N = raw.materials(), Ne = raw.elements();
    for (int i = 0; i < N; ++i) {
        for (int e = 0; e < Ne; ++e) {
            const double B = (d.gz[i][e] + d.eps) / (Lambda * d.wz[i][e] + mu[e] + d.eps);
            if (raw.z[i][e] <= par.z_min + par.eps_tol)
                res = std::max(res, std::max(0.0, B - 1.0));
            else if (raw.z[i][e] >= 1.0 - par.eps_tol)
                res = std::max(res, std::max(0.0, 1.0 - B));
            else
                res = std::max(res, std::abs(B - 1.0));
            const double D = (d.gm[i][e] + d.eps) / (Lambda * d.wm[i][e] + d.eps);
            const double m = raw.m[i][e];
            if (m <= classes[i].m_lower + par.eps_tol)
                res = std::max(res, std::max(0.0, D - 1.0));
            else if (m >= classes[i].m_upper - par.eps_tol)
                res = std::max(res, std::max(0.0, 1.0 - D));
            else
                res = std::max(res, std::abs(D - 1.0));
            if (!classes[i].isotropic && !gtheta.empty())
                res = std::max(res, std::abs(gtheta[i][e]) / (1.0 + std::abs(compliance)));
        }
    }
    // complementarity gaps
    double zsum_gap = 0.0;
    for (int e = 0; e < Ne; ++e) {
        double Z = 0.0;
        for (int i = 0; i < N; ++i) Z += raw.z[i][e];
        zsum_gap = std::max(zsum_gap, mu[e] * std::abs(1.0 - Z));
    }
    res = std::max(res, zsum_gap);
    res = std::max(res, Lambda * std::abs(Mbar - mass) / std::max(Mbar, 1e-300));
    return res;
}

struct OptimizationResult {
    DesignField control, physical;
    std::vector<double> compliance_history, mass_history, lambda_history;
    int iterations = 0;
    std::string termination;
    std::string csv_log;  // iter, p, compliance, mass, Lambda, max_dz, kkt_residual
    DesignField rounded;
    double rounded_compliance = 0.0;
    double kkt = 0.0;
};

// Round z to {0, 1} (ties toward 0; at most one winner per element, largest z
// first), keep m and theta, recompute compliance at the rounded design.
// Void elements get z = z_min to keep the stiffness matrix SPD.
inline DesignField postprocess_round(const DesignField& physical, const OCParams& par) {
    DesignField r = physical;
    const int N = physical.materials(), Ne = physical.elements();
    for (int e = 0; e < Ne; ++e) {
        int winner = -1;
        double best = 0.5;  // strict: z must exceed 0.5 to round up
        for (int i = 0; i < N; ++i)
            if (physical.z[i][e] > best) {
                best = physical.z[i][e];
                winner = i;
            }
        for (int i = 0; i < N; ++i) r.z[i][e] = (i == winner) ? 1.0 : par.z_min;
    }
    return r;
}

inline DesignField initial_design(const Problem& prob, const OCParams& par) {
    const int N = static_cast<int>(prob.classes.size());
    const int Ne = prob.mesh.element_count();
    double area = 0.0;
    for (double a : element_areas(prob.mesh)) area += a;
    double rho_mid = 0.0;
    for (const auto& c : prob.classes) rho_mid += c.density(0.5 * (c.m_lower + c.m_upper)) / N;
    double z0 = prob.mass_budget / (area * N * rho_mid);
    z0 = std::clamp(z0, par.z_min, 1.0 / N);
    DesignField d = DesignField::uniform(N, Ne, z0, prob.classes);
    if (par.random_theta_init) {
        std::mt19937 rng(par.seed);
        for (int i = 0; i < N; ++i) {
            if (prob.classes[i].isotropic) continue;
            std::uniform_real_distribution<double> u(0.0, prob.classes[i].angular_period);
            for (auto& t : d.theta[i]) t = u(rng);
        }
    }
    return d;
}

inline OptimizationResult run(const Problem& prob, const OCParams& par = {}) {
    prob.validate(par);
    const FilterOperator H(prob.mesh, prob.r_min);
    const Eigen::VectorXd f = assemble_load(prob.mesh);
    DesignField raw = initial_design(prob, par);
    const int N = raw.materials(), Ne = raw.elements();

    OptimizationResult out;
    std::ostringstream log;
    log << "iter,p,compliance,mass,Lambda,max_dz,kkt_residual\n";

    auto solve_at = [&](const DesignField& phys, double p) {
        const LinearSystem sys = assemble_stiffness(prob.mesh, phys, prob.classes, p);
        return EquilibriumSolver(sys).solve(f);
    };

    double Lambda_prev = 1.0;
    Field mu_prev;
    std::string reason = "max_iterations";
    int iter = 0;
    for (; iter < par.max_iters; ++iter) {
        const double p = continuation_p(iter, par);
        DesignField phys = filter_design(H, raw, prob.classes);
        const EquilibriumState st = solve_at(phys, p);
        const Sensitivities s =
            element_energy_sensitivities(prob.mesh, phys, prob.classes, p, st.U);
        const UpdateData d =
            make_update_data(prob.mesh, H, phys, prob.classes, s, st.compliance, par);

        LambdaResult lr = outer_bisection_lambda(prob.mesh, H, raw, d, prob.classes,
                                                 prob.mass_budget, par, Lambda_prev, mu_prev);
        double max_dz = 0.0;
        for (int i = 0; i < N; ++i)
            for (int e = 0; e < Ne; ++e)
                max_dz = std::max(max_dz, std::abs(lr.z[i][e] - raw.z[i][e]));
        raw.z = lr.z;
        raw.m = lr.m;
        Lambda_prev = std::max(lr.Lambda, 1e-12);
        mu_prev = lr.mu;

        // orientation update (once per outer iteration, after the Lambda loop)
        bool any_aniso = false;
        for (const auto& c : prob.classes) any_aniso |= !c.isotropic;
        PerMaterialField gtheta(N);
        if (any_aniso) {
            for (int i = 0; i < N; ++i) {
                if (prob.classes[i].isotropic) {
                    gtheta[i].assign(Ne, 0.0);
                    continue;
                }
                // dC/dtheta_l = -circular chain rule of s_theta
                gtheta[i] = circular_chain_rule(H, raw.theta[i], prob.classes[i].angular_period,
                                                s.s_theta[i]);
                for (auto& g : gtheta[i]) g = -g;
            }
            update_theta(raw.theta, gtheta, prob.classes, par, st.compliance,
                         [&](const PerMaterialField& trial) {
                             DesignField r2 = raw;
                             r2.theta = trial;
                             return solve_at(filter_design(H, r2, prob.classes), p).compliance;
                         });
        }

        const double kkt = kkt_residual(raw, lr.Lambda, lr.mu, d, prob.classes,
                                        prob.mass_budget, lr.mass, gtheta, st.compliance, par);
        out.compliance_history.push_back(st.compliance);
        out.mass_history.push_back(lr.mass);
        out.lambda_history.push_back(lr.Lambda);
        out.kkt = kkt;
        log << iter << ',' << p << ',' << st.compliance << ',' << lr.mass << ','
            << lr.Lambda << ',' << max_dz << ',' << kkt << '\n';

        if (max_dz < par.dz_converged && p >= par.p_final) {
            reason = "converged";
            ++iter;
            break;
        }
    }

    out.iterations = iter;
    out.termination = reason;
    out.control = raw;
    out.physical = filter_design(H, raw, prob.classes);
    {
        const EquilibriumState st = solve_at(out.physical, par.p_final);
        out.compliance_history.push_back(st.compliance);
    }
    out.rounded = postprocess_round(out.physical, par);
    out.rounded_compliance = solve_at(out.rounded, par.p_final).compliance;
    out.csv_log = log.str();
    return out;
}

} // namespace topopt
