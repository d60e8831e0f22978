#pragma once

// 2D fourth-order stiffness tensors with minor and major symmetries.
//
// Storage convention (used everywhere in this project): a symmetric 3x3
// matrix S in the basis (e^xx, e^yy, e^xy), holding the raw components
//   S(0,0)=C_xxxx  S(1,1)=C_yyyy  S(0,1)=C_xxyy
//   S(0,2)=C_xxxy  S(1,2)=C_yyxy  S(2,2)=C_xyxy .
// The off-diagonal strain component is kept tensorial (not doubled), so
// the stress response to a strain vector (exx, eyy, exy) is
//   sigma = S * diag(1,1,2) * eps
// and the energy density is eps' * diag(1,1,2) * S * diag(1,1,2) * eps.
// Spectral checks (definiteness, rotation invariants) go through the
// Mandel form, where rotations act orthogonally.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <stdexcept>

namespace topopt {

class Tensor4 {
public:
    Tensor4() : s_(Eigen::Matrix3d::Zero()) {}
    explicit Tensor4(const Eigen::Matrix3d& s) : s_(0.5 * (s + s.transpose())) {}

    static Tensor4 from_entries(double cxxxx, double cyyyy, double cxxyy,
                                double cxyxy, double cxxxy = 0.0, double cyyxy = 0.0) {
        Eigen::Matrix3d s;
        s << cxxxx, cxxyy, cxxxy,
             cxxyy, cyyyy, cyyxy,
             cxxxy, cyyxy, cxyxy;
        return Tensor4(s);
    }

    const Eigen::Matrix3d& mat() const { return s_; }
    Eigen::Matrix3d& mat() { return s_; }

    double cxxxx() const { return s_(0, 0); }
    double cyyyy() const { return s_(1, 1); }
    double cxxyy() const { return s_(0, 1); }
    double cxyxy() const { return s_(2, 2); }
    double cxxxy() const { return s_(0, 2); }
    double cyyxy() const { return s_(1, 2); }

    // Raw component access, indices in {0,1} = {x,y}.
    double operator()(int i, int j, int k, int l) const {
        return s_(voigt(i, j), voigt(k, l));
    }

    // Action on a tensorial strain vector (exx, eyy, exy): returns the
    // tensorial stress vector (sxx, syy, sxy).
    Eigen::Vector3d stress(const Eigen::Vector3d& eps) const {
        return s_ * Eigen::Vector3d(eps[0], eps[1], 2.0 * eps[2]);
    }

    // Energy density  C eps : eps  for a tensorial strain vector.
    double energy(const Eigen::Vector3d& eps) const {
        const Eigen::Vector3d sig = stress(eps);
        return sig[0] * eps[0] + sig[1] * eps[1] + 2.0 * sig[2] * eps[2];
    }

    // Quadratic-form matrix D such that  C eps : eps = eps' D eps  for
    // tensorial strain vectors; this is what element stiffness uses.
    Eigen::Matrix3d quadratic_form() const {
        const Eigen::Vector3d w(1.0, 1.0, 2.0);
        return w.asDiagonal() * s_ * w.asDiagonal();
    }

    // Mandel representation: rotations act orthogonally on it, so its
    // eigenvalues are frame-invariant and characterize definiteness.
    Eigen::Matrix3d mandel() const {
        const double r2 = std::sqrt(2.0);
        Eigen::Matrix3d m = s_;
        m(0, 2) *= r2; m(2, 0) *= r2;
        m(1, 2) *= r2; m(2, 1) *= r2;
        m(2, 2) *= 2.0;
        return m;
    }

    bool positive_definite(double tol = 0.0) const {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(mandel());
        return es.eigenvalues().minCoeff() > tol;
    }

    Tensor4 operator+(const Tensor4& o) const { return Tensor4(s_ + o.s_); }
    Tensor4 operator-(const Tensor4& o) const { return Tensor4(s_ - o.s_); }
    Tensor4 operator*(double a) const { return Tensor4(s_ * a); }

private:
    static int voigt(int i, int j) { return (i == j) ? i : 2; }
    Eigen::Matrix3d s_;
};

inline Tensor4 operator*(double a, const Tensor4& t) { return t * a; }

// Plane-strain isotropic tensor from Young modulus and Poisson ratio.
inline Tensor4 isotropic_tensor(double E, double nu) {
    if (E <= 0.0) throw std::invalid_argument("isotropic_tensor: E must be positive");
    if (nu <= -1.0 || nu >= 0.5)
        throw std::invalid_argument("isotropic_tensor: nu must lie in (-1, 0.5)");
    const double lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    const double mu = E / (2.0 * (1.0 + nu));
    return Tensor4::from_entries(lam + 2.0 * mu, lam + 2.0 * mu, lam, mu);
}

inline Tensor4 isotropic_from_lame(double lam, double mu) {
    return Tensor4::from_entries(lam + 2.0 * mu, lam + 2.0 * mu, lam, mu);
}

namespace detail {

// (Q C)_ijkl = R_ip R_jq R_kr R_ls C_pqrs with the given two R factors
// split so the same loop serves the rotation and its theta-derivative.
inline Tensor4 rotate_with(const Tensor4& c, const Eigen::Matrix2d& r1,
                           const Eigen::Matrix2d& r2,
                           const Eigen::Matrix2d& r3,
                           const Eigen::Matrix2d& r4) {
    double out[2][2][2][2] = {};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k)
          for (int l = 0; l < 2; ++l) {
            double acc = 0.0;
            for (int p = 0; p < 2; ++p)
              for (int q = 0; q < 2; ++q)
                for (int rr = 0; rr < 2; ++rr)
                  for (int ss = 0; ss < 2; ++ss)
                    acc += r1(i, p) * r2(j, q) * r3(k, rr) * r4(l, ss) * c(p, q, rr, ss);
            out[i][j][k][l] = acc;
          }
    return Tensor4::from_entries(out[0][0][0][0], out[1][1][1][1], out[0][0][1][1],
                                 out[0][1][0][1], out[0][0][0][1], out[1][1][0][1]);
}

inline Eigen::Matrix2d rot2(double theta) {
    Eigen::Matrix2d r;
    r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    return r;
}

inline Eigen::Matrix2d drot2(double theta) {
    Eigen::Matrix2d r;
    r << -std::sin(theta), -std::cos(theta), std::cos(theta), -std::sin(theta);
    return r;
}

} // namespace detail

// Counter-clockwise rotation of the material by theta.
inline Tensor4 rotate_tensor(const Tensor4& c, double theta) {
    const Eigen::Matrix2d r = detail::rot2(theta);
    return detail::rotate_with(c, r, r, r, r);
}

// Component-wise derivative of theta -> rotate_tensor(c, theta).
inline Tensor4 rotate_tensor_derivative(const Tensor4& c, double theta) {
    const Eigen::Matrix2d r = detail::rot2(theta);
    const Eigen::Matrix2d dr = detail::drot2(theta);
    Tensor4 out = detail::rotate_with(c, dr, r, r, r);
    out = out + detail::rotate_with(c, r, dr, r, r);
    out = out + detail::rotate_with(c, r, r, dr, r);
    out = out + detail::rotate_with(c, r, r, r, dr);
    return out;
}

} // namespace topopt
