#pragma once

#include "core.hpp"

namespace reachkit {

enum class CutoffProfile { quintic, bump };

// Radial cutoff: 1 on |x| <= r_inner, 0 on |x| >= r_outer, with exact derivatives.
struct Cutoff {
    CutoffProfile profile = CutoffProfile::quintic;
    double r_inner = 1.0;
    double r_outer = 2.0;

    // transition profile p(s), s in [0,1], with p(0) = 1, p(1) = 0; returns p, p', p''
    std::array<double, 3> profile_derivs(double s) const {
        if (s <= 0) return {1.0, 0.0, 0.0};
        if (s >= 1) return {0.0, 0.0, 0.0};
        if (profile == CutoffProfile::quintic) {
            double s2 = s * s, s3 = s2 * s;
            double v = 1.0 - (10 * s3 - 15 * s3 * s + 6 * s3 * s2);
            double d1 = -(30 * s2 - 60 * s3 + 30 * s3 * s);
            double d2 = -(60 * s - 180 * s2 + 120 * s3);
            return {v, d1, d2};
        }
        // exp(-1/u) smooth step; derivatives of a/(a+b), a = e(1-s), b = e(s)
        auto e = [](double u, double& e1, double& e2) {
            double v = std::exp(-1.0 / u);
            e1 = v / (u * u);
            e2 = v * (1.0 / (u * u * u * u) - 2.0 / (u * u * u));
            return v;
        };
        double a1, a2, b1, b2;
        double a = e(1 - s, a1, a2), b = e(s, b1, b2);
        a1 = -a1;  // d/ds of e(1-s)
        double S = a + b, S1 = a1 + b1, S2 = a2 + b2;
        double v = a / S;
        double d1 = (a1 * S - a * S1) / (S * S);
        double d2 = (a2 * S - a * S2) / (S * S) - 2.0 * S1 * (a1 * S - a * S1) / (S * S * S);
        return {v, d1, d2};
    }

    // eta(r), eta'(r), eta''(r)
    std::array<double, 3> radial(double r) const {
        double L = r_outer - r_inner;
        auto p = profile_derivs((r - r_inner) / L);
        return {p[0], p[1] / L, p[2] / (L * L)};
    }

    double value(const double* x, int d) const {
        double r2 = 0;
        for (int j = 0; j < d; ++j) r2 += x[j] * x[j];
        return radial(std::sqrt(r2))[0];
    }
    double value(double x) const { return radial(std::abs(x))[0]; }

    void gradient(const double* x, int d, double* g) const {
        double r2 = 0;
        for (int j = 0; j < d; ++j) r2 += x[j] * x[j];
        double r = std::sqrt(r2);
        auto q = radial(r);
        for (int j = 0; j < d; ++j) g[j] = (r > 0) ? q[1] * x[j] / r : 0.0;
    }
    double derivative(double x) const {
        double r = std::abs(x);
        return radial(r)[1] * (x >= 0 ? 1.0 : -1.0);
    }

    double laplacian(const double* x, int d) const {
        double r2 = 0;
        for (int j = 0; j < d; ++j) r2 += x[j] * x[j];
        double r = std::sqrt(r2);
        auto q = radial(r);
        if (r <= r_inner || r >= r_outer) return 0.0;
        return q[2] + (d - 1) * q[1] / r;
    }
    double second_derivative(double x) const { return radial(std::abs(x))[2]; }
};

inline Cutoff cutoff(CutoffProfile profile, double r_inner, double r_outer) {
    if (!(r_inner < r_outer)) throw Error("cutoff", "r_inner must be below r_outer");
    return Cutoff{profile, r_inner, r_outer};
}

}  // namespace reachkit
