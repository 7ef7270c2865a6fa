#pragma once

#include "core.hpp"

namespace reachkit {

struct DiamondDomain {
    double alpha = 2.0;
    double scale = 1.0;
    int dim = 1;

    DiamondDomain() = default;
    DiamondDomain(double a, double s = 1.0, int d = 1) : alpha(a), scale(s), dim(d) {
        if (!(a > 0) || !(s > 0) || d < 1) throw Error("geometry", "diamond needs alpha > 0, scale > 0, dim >= 1");
    }

    // |a| + alpha |b|, the gauge whose level set `scale` is the boundary
    double gauge(const cplx* z) const {
        double ra = 0, rb = 0;
        for (int j = 0; j < dim; ++j) {
            ra += z[j].real() * z[j].real();
            rb += z[j].imag() * z[j].imag();
        }
        return std::sqrt(ra) + alpha * std::sqrt(rb);
    }

    // Omega_{alpha'} lies inside Omega_alpha (same scale) exactly when alpha' >= alpha.
    bool contains_domain(const DiamondDomain& o) const {
        return o.dim == dim && o.alpha >= alpha * (1 - 1e-14) && o.scale <= scale * (1 + 1e-14);
    }
};

inline bool diamond_contains(const DiamondDomain& D, const ComplexPoint& z, bool closure) {
    if (int(z.dim()) != D.dim) throw Error("geometry", "dimension mismatch");
    CVec c = z.as_complex();
    double g = D.gauge(c.data());
    return closure ? g <= D.scale : g < D.scale;
}

inline bool diamond_contains(const DiamondDomain& D, const CVec& z, bool closure, double slack = 0.0) {
    if (int(z.size()) != D.dim) throw Error("geometry", "dimension mismatch");
    double g = D.gauge(z.data());
    return closure ? g <= D.scale * (1 + slack) + slack : g < D.scale;
}

inline bool diamond_contains(const DiamondDomain& D, cplx z, bool closure, double slack = 0.0) {
    return diamond_contains(D, CVec{z}, closure, slack);
}

namespace detail {

inline std::vector<RVec> sphere_directions(int d, int k) {
    std::vector<RVec> dirs;
    if (d == 1) {
        dirs.push_back({1.0});
        return dirs;
    }
    if (d == 2) {
        for (int j = 0; j < k; ++j) {
            double th = 2 * pi * j / k;
            dirs.push_back({std::cos(th), std::sin(th)});
        }
        return dirs;
    }
    // Fibonacci lattice on S^2
    const double ga = pi * (3.0 - std::sqrt(5.0));
    for (int j = 0; j < k; ++j) {
        double zc = 1.0 - 2.0 * (j + 0.5) / k;
        double r = std::sqrt(std::max(0.0, 1 - zc * zc));
        dirs.push_back({r * std::cos(ga * j), r * std::sin(ga * j), zc});
    }
    return dirs;
}

}  // namespace detail

// d = 1: points spread uniformly along the four faces, starting at each vertex.
// d >= 2: (direction of a) x (direction of b) x (position along the 1-d cross-section).
inline std::vector<CVec> boundary_sample_c(const DiamondDomain& D, int n) {
    if (n < 4) throw Error("geometry", "boundary_sample needs n >= 4");
    std::vector<CVec> pts;
    const double s = D.scale, bt = D.scale / D.alpha;
    if (D.dim == 1) {
        const cplx v[4] = {cplx(s, 0), cplx(0, bt), cplx(-s, 0), cplx(0, -bt)};
        int per = n / 4, extra = n % 4;
        for (int f = 0; f < 4; ++f) {
            int m = per + (f < extra ? 1 : 0);
            for (int j = 0; j < m; ++j) {
                double u = double(j) / m;
                pts.push_back({v[f] + u * (v[(f + 1) % 4] - v[f])});
            }
        }
        return pts;
    }
    int k = std::max(2, int(std::round(std::cbrt(double(n)))));
    int m = std::max(4, (n + k * k - 1) / (k * k));
    auto dirs = detail::sphere_directions(D.dim, k);
    for (const auto& u : dirs)
        for (const auto& v : dirs)
            for (int j = 0; j <= m; ++j) {
                double lam = double(j) / m;
                CVec z(D.dim);
                for (int c = 0; c < D.dim; ++c) z[c] = cplx(lam * s * u[c], (1 - lam) * bt * v[c]);
                pts.push_back(std::move(z));
            }
    return pts;
}

inline std::vector<ComplexPoint> boundary_sample(const DiamondDomain& D, int n) {
    std::vector<ComplexPoint> out;
    for (const auto& z : boundary_sample_c(D, n)) out.emplace_back(z);
    return out;
}

enum class WickDirection { forward, inverse };

inline cplx wick_map(double alpha1, cplx z, WickDirection dir) {
    if (!(alpha1 > 0 && alpha1 < 1)) throw Error("geometry", "wick_map needs alpha1 in (0,1)");
    return dir == WickDirection::forward ? I * z / alpha1 : -alpha1 * I * z;
}

inline ComplexPoint wick_map(double alpha1, const ComplexPoint& z, WickDirection dir) {
    CVec c = z.as_complex();
    for (auto& v : c) v = wick_map(alpha1, v, dir);
    return ComplexPoint(c);
}

// Householder reflection sending B to |B| e1, followed by a flip of the last axis so det = +1.
inline Eigen::MatrixXd rotation_to_e1(const RVec& B) {
    const int d = int(B.size());
    Eigen::MatrixXd R = Eigen::MatrixXd::Identity(d, d);
    double nb = norm2(B);
    if (nb == 0.0) return R;
    if (d == 1) {
        if (B[0] < 0) R(0, 0) = -1.0;
        return R;
    }
    Eigen::VectorXd v(d);
    for (int j = 0; j < d; ++j) v(j) = B[j];
    v(0) -= nb;
    double vv = v.squaredNorm();
    if (vv <= 1e-30 * nb * nb) return R;
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(d, d) - 2.0 * v * v.transpose() / vv;
    H.row(d - 1) *= -1.0;
    return H;
}

}  // namespace reachkit
