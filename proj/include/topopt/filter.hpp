#pragma once

// Density filtering on element centroids. The filter operator
//   Hhat_{lr} = K(x_l - x_r) |e_r| / sum_s K(x_l - x_s) |e_s|,
// with cone kernel K(x) = max(0, r_min - |x|), is row-stochastic and stored
// in CSR form. Linear fields (z, m) are filtered directly; angles use the
// circular (vector) mean with period T.

#include "topopt/fem.hpp"
#include "topopt/mesh.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace topopt {

class FilterOperator {
public:
    FilterOperator() = default;

    FilterOperator(const Mesh& mesh, double r_min) : r_min_(r_min) {
        if (r_min <= 0.0) throw std::invalid_argument("filter: r_min must be positive");
        const auto cent = element_centroids(mesh);
        const auto areas = element_areas(mesh);
        const int n = mesh.element_count();
        row_ptr_.assign(n + 1, 0);
        // Uniform grid bucketing keeps construction near-linear.
        Eigen::Vector2d lo = cent[0], hi = cent[0];
        for (const auto& c : cent) {
            lo = lo.cwiseMin(c);
            hi = hi.cwiseMax(c);
        }
        const double cell = r_min;
        const int gx = std::max(1, int((hi.x() - lo.x()) / cell) + 1);
        const int gy = std::max(1, int((hi.y() - lo.y()) / cell) + 1);
        std::vector<std::vector<int>> buckets(size_t(gx) * gy);
        auto bucket_of = [&](const Eigen::Vector2d& c) {
            int bx = std::min(gx - 1, std::max(0, int((c.x() - lo.x()) / cell)));
            int by = std::min(gy - 1, std::max(0, int((c.y() - lo.y()) / cell)));
            return by * gx + bx;
        };
        for (int e = 0; e < n; ++e) buckets[bucket_of(cent[e])].push_back(e);

        for (int l = 0; l < n; ++l) {
            const int bx = std::min(gx - 1, std::max(0, int((cent[l].x() - lo.x()) / cell)));
            const int by = std::min(gy - 1, std::max(0, int((cent[l].y() - lo.y()) / cell)));
            double denom = 0.0;
            const size_t row_start = col_.size();
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int x = bx + dx, y = by + dy;
                    if (x < 0 || x >= gx || y < 0 || y >= gy) continue;
                    for (int r : buckets[size_t(y) * gx + x]) {
                        const double k = r_min - (cent[l] - cent[r]).norm();
                        if (k <= 0.0) continue;
                        col_.push_back(r);
                        val_.push_back(k * areas[r]);
                        denom += k * areas[r];
                    }
                }
            for (size_t idx = row_start; idx < val_.size(); ++idx) val_[idx] /= denom;
            row_ptr_[l + 1] = static_cast<int>(col_.size());
        }
    }

    int rows() const { return static_cast<int>(row_ptr_.size()) - 1; }
    double radius() const { return r_min_; }

    // y = Hhat x
    Field apply(const Field& x) const {
        Field y(rows(), 0.0);
        for (int l = 0; l < rows(); ++l)
            for (int k = row_ptr_[l]; k < row_ptr_[l + 1]; ++k)
                y[l] += val_[k] * x[col_[k]];
        return y;
    }

    // y = Hhat' x (adjoint, for chain rules d/dx_l sum_s Hhat_{sl} g_s)
    Field apply_transpose(const Field& x) const {
        Field y(rows(), 0.0);
        for (int l = 0; l < rows(); ++l)
            for (int k = row_ptr_[l]; k < row_ptr_[l + 1]; ++k)
                y[col_[k]] += val_[k] * x[l];
        return y;
    }

    // Circular filtering of a T-periodic angle field:
    //   thetahat_l = (T / 2pi) atan2(S_l, C_l),
    //   S_l = sum_r Hhat_{lr} sin(2pi theta_r / T), C_l analogous.
    // atan2(0, 0) is defined as 0.
    Field apply_circular(const Field& theta, double period) const {
        const double w = 2.0 * std::numbers::pi / period;
        Field s(theta.size()), c(theta.size());
        for (size_t e = 0; e < theta.size(); ++e) {
            s[e] = std::sin(w * theta[e]);
            c[e] = std::cos(w * theta[e]);
        }
        const Field S = apply(s), C = apply(c);
        Field out(rows());
        for (int l = 0; l < rows(); ++l)
            out[l] = (S[l] == 0.0 && C[l] == 0.0) ? 0.0 : std::atan2(S[l], C[l]) / w;
        return out;
    }

    // Rows as (col, weight) pairs for inspection/testing.
    std::vector<std::pair<int, double>> row(int l) const {
        std::vector<std::pair<int, double>> r;
        for (int k = row_ptr_[l]; k < row_ptr_[l + 1]; ++k) r.emplace_back(col_[k], val_[k]);
        return r;
    }

private:
    double r_min_ = 0.0;
    std::vector<int> row_ptr_, col_;
    std::vector<double> val_;
};

// Chain rule through the circular filter: given g_s = dJ/dthetahat_s
// (sensitivity w.r.t. the filtered angle), returns dJ/dtheta_l.
// With u_s = S_s, v_s = C_s and w = 2pi/T:
//   dthetahat_s/dtheta_l = Hhat_{sl} (C_s cos(w theta_l) + S_s sin(w theta_l))
//                          / (S_s^2 + C_s^2).
inline Field circular_chain_rule(const FilterOperator& H, const Field& theta, double period,
                                 const Field& g) {
    const double w = 2.0 * std::numbers::pi / period;
    Field s(theta.size()), c(theta.size());
    for (size_t e = 0; e < theta.size(); ++e) {
        s[e] = std::sin(w * theta[e]);
        c[e] = std::cos(w * theta[e]);
    }
    const Field S = H.apply(s), C = H.apply(c);
    Field gc(g.size()), gs(g.size());
    for (size_t l = 0; l < g.size(); ++l) {
        const double n2 = S[l] * S[l] + C[l] * C[l];
        const double scale = n2 > 0.0 ? g[l] / n2 : 0.0;
        gc[l] = scale * C[l];
        gs[l] = scale * S[l];
    }
    const Field a = H.apply_transpose(gc);  // sum_s Hhat_{sl} g_s C_s / n2
    const Field b = H.apply_transpose(gs);  // sum_s Hhat_{sl} g_s S_s / n2
    Field out(theta.size());
    for (size_t l = 0; l < theta.size(); ++l)
        out[l] = a[l] * c[l] + b[l] * s[l];
    return out;
}

// Filtered physical design from raw variables: zhat = Hhat z, mhat = Hhat m,
// thetahat = circular filter (anisotropic classes only).
inline DesignField filter_design(const FilterOperator& H, const DesignField& raw,
                                 const std::vector<MaterialClass>& classes) {
    DesignField phys;
    const int N = raw.materials();
    phys.z.resize(N);
    phys.m.resize(N);
    phys.theta.resize(N);
    for (int i = 0; i < N; ++i) {
        phys.z[i] = H.apply(raw.z[i]);
        phys.m[i] = H.apply(raw.m[i]);
        phys.theta[i] = classes[i].isotropic ? raw.theta[i]
                                             : H.apply_circular(raw.theta[i], classes[i].angular_period);
    }
    return phys;
}

} // namespace topopt
