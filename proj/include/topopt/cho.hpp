#pragma once

// Cahn-Hilliard-Oono pattern simulation on a rectangular periodic cell:
//   phi_t = Lap(mu) - (phi - m),  mu = -gamma^-2 Lap(phi) + F'(phi),
// with F(s) = 1/4 (1 - s^2)^2, solved pseudo-spectrally with a semi-implicit
// convexity-splitting step (stabilization kappa). The scheme's fixed points
// are exact discrete steady states, so large steps are safe for equilibration.

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace topopt {

struct PeriodicCell {
    int nx = 0, ny = 0;
    double Lx = 0.0, Ly = 0.0;
    double gamma = 0.0, m = 0.0;
    std::vector<double> phi;  // row-major, phi[iy * nx + ix]

    int size() const { return nx * ny; }
    double mean() const {
        double s = 0.0;
        for (double v : phi) s += v;
        return s / size();
    }
};

enum class PatternType { A_SPOTS, STRIPES, B_SPOTS };

// Pattern class from the monomer proportion alone (thresholds m1 = 0.2,
// m2 = 0.6). Exact endpoints +-m1 go with the spot side; |m| >= m2 is the
// disordered regime and an error.
inline PatternType classify_pattern(double m) {
    constexpr double m1 = 0.2, m2 = 0.6;
    if (std::abs(m) >= m2)
        throw std::domain_error("classify_pattern: |m| >= 0.6 is the disorder region");
    if (m <= -m1) return PatternType::A_SPOTS;
    if (m >= m1) return PatternType::B_SPOTS;
    return PatternType::STRIPES;
}

enum class ChoSeed { Uniform, Noise, Stripes, Spots };

namespace detail {

class Spectral2D {
public:
    Spectral2D(int nx, int ny) : nx_(nx), ny_(ny), nk_(nx / 2 + 1) {
        real_ = fftw_alloc_real(size_t(nx) * ny);
        cplx_ = fftw_alloc_complex(size_t(nk_) * ny);
        fwd_ = fftw_plan_dft_r2c_2d(ny, nx, real_, cplx_, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_c2r_2d(ny, nx, cplx_, real_, FFTW_ESTIMATE);
    }
    ~Spectral2D() {
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(real_);
        fftw_free(cplx_);
    }
    Spectral2D(const Spectral2D&) = delete;
    Spectral2D& operator=(const Spectral2D&) = delete;

    // forward: real (nx*ny) -> spectrum (nk*ny), unnormalized
    void forward(const std::vector<double>& in, std::vector<std::complex<double>>& out) {
        std::copy(in.begin(), in.end(), real_);
        fftw_execute(fwd_);
        out.assign(reinterpret_cast<std::complex<double>*>(cplx_),
                   reinterpret_cast<std::complex<double>*>(cplx_) + size_t(nk_) * ny_);
    }
    // inverse with 1/(nx*ny) normalization
    void inverse(const std::vector<std::complex<double>>& in, std::vector<double>& out) {
        std::copy(in.begin(), in.end(), reinterpret_cast<std::complex<double>*>(cplx_));
        fftw_execute(bwd_);
        out.assign(real_, real_ + size_t(nx_) * ny_);
        const double scale = 1.0 / (double(nx_) * ny_);
        for (auto& v : out) v *= scale;
    }
    int nk() const { return nk_; }

private:
    int nx_, ny_, nk_;
    double* real_;
    fftw_complex* cplx_;
    fftw_plan fwd_, bwd_;
};

inline double wavenumber(int idx, int n, double L) {
    const int f = (idx <= n / 2) ? idx : idx - n;
    return 2.0 * std::numbers::pi * f / L;
}

} // namespace detail

// Ohta-Kawasaki Lyapunov functional per unit area:
//   mean( 1/(2 gamma^2) |grad phi|^2 + F(phi) ) + 1/2 sum_{k!=0} |phihat_k|^2 / k^2
// (phihat normalized so phihat_0 = mean phi).
inline double ok_energy(const PeriodicCell& c) {
    detail::Spectral2D fft(c.nx, c.ny);
    std::vector<std::complex<double>> ph;
    fft.forward(c.phi, ph);
    const double norm = 1.0 / (double(c.nx) * c.ny);
    double grad = 0.0, nonlocal = 0.0;
    for (int iy = 0; iy < c.ny; ++iy)
        for (int ik = 0; ik < fft.nk(); ++ik) {
            const double kx = detail::wavenumber(ik, c.nx, c.Lx);
            const double ky = detail::wavenumber(iy, c.ny, c.Ly);
            const double k2 = kx * kx + ky * ky;
            if (k2 == 0.0) continue;
            // r2c stores only kx >= 0; interior columns represent two modes
            const double mult = (ik == 0 || (c.nx % 2 == 0 && ik == c.nx / 2)) ? 1.0 : 2.0;
            const double p = std::norm(ph[size_t(iy) * fft.nk() + ik]) * norm * norm * mult;
            grad += k2 * p;
            nonlocal += p / k2;
        }
    double well = 0.0;
    for (double v : c.phi) {
        const double w = 1.0 - v * v;
        well += 0.25 * w * w;
    }
    well /= c.size();
    return grad / (2.0 * c.gamma * c.gamma) + well + 0.5 * nonlocal;
}

inline PeriodicCell make_seeded_cell(double m, double gamma, int nx, int ny, double Lx,
                                     double Ly, unsigned seed, ChoSeed mode,
                                     double stripe_period = 0.0) {
    PeriodicCell c;
    c.nx = nx;
    c.ny = ny;
    c.Lx = Lx;
    c.Ly = Ly;
    c.gamma = gamma;
    c.m = m;
    c.phi.assign(size_t(nx) * ny, m);
    const double pi2 = 2.0 * std::numbers::pi;
    if (mode == ChoSeed::Uniform) {
        return c;  // phi == m exactly: a homogeneous equilibrium
    }
    if (mode == ChoSeed::Noise) {
        std::mt19937 rng(seed);
        std::uniform_real_distribution<double> u(-0.05, 0.05);
        for (auto& v : c.phi) v += u(rng);
    } else if (mode == ChoSeed::Stripes) {
        const int q = std::max(1, int(std::lround(Ly / std::max(stripe_period, 1e-12))));
        for (int iy = 0; iy < ny; ++iy) {
            const double a = 0.5 * std::cos(pi2 * q * iy / ny);
            for (int ix = 0; ix < nx; ++ix) c.phi[size_t(iy) * nx + ix] += a;
        }
    } else {  // two-spot seed for a sqrt(3):1 hexagonal re-tiling
        const double sign = (m > 0.0) ? -1.0 : 1.0;  // minority phase in the spots
        const double cx[2] = {0.25 * Lx, 0.75 * Lx};
        const double cy[2] = {0.25 * Ly, 0.75 * Ly};
        const double r2 = 0.02 * std::min(Lx, Ly) * std::min(Lx, Ly);
        for (int iy = 0; iy < ny; ++iy)
            for (int ix = 0; ix < nx; ++ix) {
                const double x = Lx * ix / nx, y = Ly * iy / ny;
                for (int sct = 0; sct < 2; ++sct) {
                    double dx = std::remainder(x - cx[sct], Lx);
                    double dy = std::remainder(y - cy[sct], Ly);
                    c.phi[size_t(iy) * nx + ix] +=
                        sign * 0.5 * std::exp(-(dx * dx + dy * dy) / r2);
                }
            }
    }
    // enforce mean(phi) = m exactly; the scheme then conserves it
    const double shift = m - c.mean();
    for (auto& v : c.phi) v += shift;
    return c;
}

struct ChoOptions {
    double dt = 1.0;
    double max_time = 40000.0;
    double kappa = 2.0;            // convexity-splitting stabilizer (>= max F'')
    double stationary_tol = 1e-6;  // on ||phi^{n+1} - phi^n||_inf / dt
    ChoSeed seed_mode = ChoSeed::Noise;
    double stripe_period = 0.0;    // for ChoSeed::Stripes (0 = one period per Ly)
};

// Advance an existing cell to stationarity (or max_time); returns the number
// of accepted steps. Usable for step-by-step monitoring with small max_time.
inline long evolve_cho(PeriodicCell& c, const ChoOptions& opt = {}) {
    const int nx = c.nx, ny = c.ny;
    const double m = c.m, gamma = c.gamma, Lx = c.Lx, Ly = c.Ly;
    detail::Spectral2D fft(nx, ny);
    const int nk = fft.nk();

    std::vector<double> denom(size_t(nk) * ny), k2v(size_t(nk) * ny);
    for (int iy = 0; iy < ny; ++iy)
        for (int ik = 0; ik < nk; ++ik) {
            const double kx = detail::wavenumber(ik, nx, Lx);
            const double ky = detail::wavenumber(iy, ny, Ly);
            const double k2 = kx * kx + ky * ky;
            k2v[size_t(iy) * nk + ik] = k2;
            denom[size_t(iy) * nk + ik] =
                1.0 / opt.dt + k2 * k2 / (gamma * gamma) + opt.kappa * k2 + 1.0;
        }

    std::vector<std::complex<double>> ph, fh;
    std::vector<double> fp(c.phi.size()), next;
    const long steps = std::max(1L, std::lround(opt.max_time / opt.dt));
    long taken = 0;
    for (long n = 0; n < steps; ++n) {
        for (size_t j = 0; j < c.phi.size(); ++j) {
            const double v = c.phi[j];
            fp[j] = v * v * v - v;  // F'(phi)
        }
        fft.forward(c.phi, ph);
        fft.forward(fp, fh);
        for (size_t j = 0; j < ph.size(); ++j) {
            const double k2 = k2v[j];
            ph[j] = (ph[j] * (1.0 / opt.dt + opt.kappa * k2) - k2 * fh[j]) / denom[j];
        }
        // pin the mean exactly (k = 0 update has fixed point m)
        ph[0] = std::complex<double>(m * double(nx) * ny, 0.0);
        fft.inverse(ph, next);
        double dmax = 0.0, amax = 0.0;
        for (size_t j = 0; j < next.size(); ++j) {
            dmax = std::max(dmax, std::abs(next[j] - c.phi[j]));
            amax = std::max(amax, std::abs(next[j]));
        }
        c.phi.swap(next);
        ++taken;
        if (amax > 2.0)
            throw std::runtime_error("solve_cho: instability (|phi| > 2), reduce dt");
        if (dmax / opt.dt <= opt.stationary_tol) break;
    }
    return taken;
}

inline PeriodicCell solve_cho(double m, double gamma, int nx, int ny, double Lx, double Ly,
                              unsigned seed, const ChoOptions& opt = {}) {
    if (std::abs(m) >= 1.0) throw std::invalid_argument("solve_cho: need |m| < 1");
    if (gamma <= 0.0) throw std::invalid_argument("solve_cho: need gamma > 0");
    PeriodicCell c = make_seeded_cell(m, gamma, nx, ny, Lx, Ly, seed, opt.seed_mode,
                                      opt.stripe_period > 0.0 ? opt.stripe_period : Ly);
    evolve_cho(c, opt);
    return c;
}

// ---- pattern analysis ---------------------------------------------------

struct ComponentInfo {
    int cells = 0;
    bool wraps = false;  // winds around the torus in some direction
};

// Connected components of {phi > 0} (phase A) or {phi < 0} (phase B) with
// 4-connectivity on the periodic grid. A component "wraps" when the BFS
// revisits a cell with a different unwrapped offset (nonzero winding), which
// distinguishes stripes (wrapping bands) from compact spots.
inline std::vector<ComponentInfo> connected_components(const PeriodicCell& c, bool phase_a) {
    const int nx = c.nx, ny = c.ny;
    std::vector<int> label(c.phi.size(), -1);
    std::vector<ComponentInfo> comps;
    std::vector<std::array<long, 2>> off(c.phi.size());
    for (int start = 0; start < c.size(); ++start) {
        const bool in = phase_a ? (c.phi[start] > 0.0) : (c.phi[start] < 0.0);
        if (!in || label[start] >= 0) continue;
        ComponentInfo info;
        const int id = static_cast<int>(comps.size());
        std::queue<int> q;
        q.push(start);
        label[start] = id;
        off[start] = {0, 0};
        while (!q.empty()) {
            const int cur = q.front();
            q.pop();
            ++info.cells;
            const int ix = cur % nx, iy = cur / nx;
            const int nbr[4][2] = {{ix + 1, iy}, {ix - 1, iy}, {ix, iy + 1}, {ix, iy - 1}};
            for (auto& nb : nbr) {
                const int jx = (nb[0] + nx) % nx, jy = (nb[1] + ny) % ny;
                const int j = jy * nx + jx;
                const bool jin = phase_a ? (c.phi[j] > 0.0) : (c.phi[j] < 0.0);
                if (!jin) continue;
                const std::array<long, 2> o = {off[cur][0] + (nb[0] - ix),
                                               off[cur][1] + (nb[1] - iy)};
                if (label[j] < 0) {
                    label[j] = id;
                    off[j] = o;
                    q.push(j);
                } else if (off[j] != o) {
                    info.wraps = true;
                }
            }
        }
        comps.push_back(info);
    }
    return comps;
}

struct PatternStats {
    std::vector<ComponentInfo> comps_a, comps_b;
    double kx = 0.0, ky = 0.0;       // dominant wavevector (k != 0, peak power)
    double direction_fraction = 0.0; // non-DC power within 15 deg of +-dominant direction
    double periods = 0.0;            // |k| L / 2 pi along the dominant direction
};

inline PatternStats analyze_pattern(const PeriodicCell& c) {
    PatternStats st;
    st.comps_a = connected_components(c, true);
    st.comps_b = connected_components(c, false);
    detail::Spectral2D fft(c.nx, c.ny);
    std::vector<std::complex<double>> ph;
    fft.forward(c.phi, ph);
    double best = -1.0, total = 0.0;
    std::vector<std::array<double, 3>> modes;  // kx, ky, power
    for (int iy = 0; iy < c.ny; ++iy)
        for (int ik = 0; ik < fft.nk(); ++ik) {
            const double kx = detail::wavenumber(ik, c.nx, c.Lx);
            const double ky = detail::wavenumber(iy, c.ny, c.Ly);
            if (kx == 0.0 && ky == 0.0) continue;
            const double mult = (ik == 0 || (c.nx % 2 == 0 && ik == c.nx / 2)) ? 1.0 : 2.0;
            const double p = std::norm(ph[size_t(iy) * fft.nk() + ik]) * mult;
            total += p;
            modes.push_back({kx, ky, p});
            if (p > best) {
                best = p;
                st.kx = kx;
                st.ky = ky;
            }
        }
    const double kn = std::hypot(st.kx, st.ky);
    double aligned = 0.0;
    for (const auto& mo : modes) {
        const double mn = std::hypot(mo[0], mo[1]);
        const double cosang = std::abs(mo[0] * st.kx + mo[1] * st.ky) / (mn * kn);
        if (cosang >= std::cos(15.0 * std::numbers::pi / 180.0)) aligned += mo[2];
    }
    st.direction_fraction = total > 0.0 ? aligned / total : 0.0;
    // cell extent along the dominant direction
    const double ux = st.kx / kn, uy = st.ky / kn;
    const double extent = std::abs(ux) * c.Lx + std::abs(uy) * c.Ly;
    st.periods = kn * extent / (2.0 * std::numbers::pi);
    return st;
}

// Detect the realized pattern from the field. Stripes: minority-phase
// components wrap and the spectrum is concentrated along one direction.
// Spots: >= 2 compact minority components. Anything else is ambiguous.
inline PatternType detect_pattern(const PeriodicCell& c) {
    const PatternStats st = analyze_pattern(c);
    const bool minority_is_b = c.m > 0.0;
    const auto& minority = (c.m >= 0.0) ? st.comps_b : st.comps_a;
    int compact = 0, wrapping = 0;
    for (const auto& comp : minority) (comp.wraps ? wrapping : compact)++;
    if (wrapping == 0 && compact >= 2)
        return minority_is_b ? PatternType::B_SPOTS : PatternType::A_SPOTS;
    if (wrapping >= 1 && st.direction_fraction > 0.6) return PatternType::STRIPES;
    throw std::runtime_error(
        "detect_pattern: ambiguous FFT signature (direction fraction " +
        std::to_string(st.direction_fraction) + ", minority components " +
        std::to_string(minority.size()) + ", wrapping " + std::to_string(wrapping) + ")");
}

// Intrinsic stripe period: minimize the 1D Ohta-Kawasaki energy density of a
// single-period equilibrium profile over the period length L.
inline double estimate_stripe_period(double gamma, double m = 0.0, int n = 128,
                                     double L_lo = 0.5, double L_hi = 4.0) {
    auto energy_at = [&](double L) {
        ChoOptions opt;
        opt.seed_mode = ChoSeed::Stripes;
        opt.stripe_period = L;  // exactly one period in the box
        opt.max_time = 4000.0;
        opt.dt = 1.0;
        // 1D profile represented on an n x 1 grid (Ly = L carries the stripes)
        const PeriodicCell c = solve_cho(m, gamma, 1, n, 1.0 / n, L, 0, opt);
        return ok_energy(c);
    };
    // coarse scan then golden-section refinement
    const int coarse = 14;
    double bestL = L_lo, bestE = energy_at(L_lo);
    for (int i = 1; i <= coarse; ++i) {
        const double L = L_lo + (L_hi - L_lo) * i / coarse;
        const double E = energy_at(L);
        if (E < bestE) {
            bestE = E;
            bestL = L;
        }
    }
    const double step = (L_hi - L_lo) / coarse;
    double a = std::max(L_lo, bestL - step), b = std::min(L_hi, bestL + step);
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = energy_at(x1), f2 = energy_at(x2);
    for (int it = 0; it < 20 && (b - a) > 1e-3; ++it) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = energy_at(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = energy_at(x2);
        }
    }
    return 0.5 * (a + b);
}

// Raw phi-field dump: ASCII header line "nx ny Lx Ly", then row-major
// 8-byte doubles.
inline void write_phi_dump(const PeriodicCell& c, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("write_phi_dump: cannot open " + path);
    std::fprintf(f, "%d %d %.17g %.17g\n", c.nx, c.ny, c.Lx, c.Ly);
    std::fwrite(c.phi.data(), sizeof(double), c.phi.size(), f);
    std::fclose(f);
}

inline PeriodicCell read_phi_dump(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("read_phi_dump: cannot open " + path);
    PeriodicCell c;
    if (std::fscanf(f, "%d %d %lg %lg", &c.nx, &c.ny, &c.Lx, &c.Ly) != 4 ||
        std::fgetc(f) != '\n') {
        std::fclose(f);
        throw std::runtime_error("write_phi_dump: bad header in " + path);
    }
    c.phi.resize(size_t(c.nx) * c.ny);
    const size_t got = std::fread(c.phi.data(), sizeof(double), c.phi.size(), f);
    std::fclose(f);
    if (got != c.phi.size()) throw std::runtime_error("read_phi_dump: truncated " + path);
    return c;
}

} // namespace topopt
