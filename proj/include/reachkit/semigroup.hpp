#pragma once

#include "analytic.hpp"

namespace reachkit {

struct HeatKernelParams {
    double t = 1.0;
    int dim = 1;
};

struct QuadratureRule {
    int order = 16;           // Gauss-Legendre points per panel
    double halfwidth = 12.0;  // truncation radius in units of sqrt(t)
    int panels = 16;
    double tol = 1e-10;

    void validate() const {
        if (halfwidth < 6 || panels < 8 || order < 2) throw Error("semigroup", "quadrature rule below minimum resolution");
    }
};

enum class CaseTag { real, exterior_only, contour_1d, nd_case_1, nd_case_2a, nd_case_2b, nd_case_2c };

inline const char* case_name(CaseTag c) {
    switch (c) {
        case CaseTag::real: return "real";
        case CaseTag::exterior_only: return "exterior-only";
        case CaseTag::contour_1d: return "1d-contour";
        case CaseTag::nd_case_1: return "nd-case-1";
        case CaseTag::nd_case_2a: return "nd-case-2a";
        case CaseTag::nd_case_2b: return "nd-case-2b";
        case CaseTag::nd_case_2c: return "nd-case-2c";
    }
    return "?";
}

struct ComplexEvalReport {
    cplx value = 0;
    cplx y1_part = 0;
    cplx y2_part = 0;
    bool has_gradient = false;
    CVec gradient, z1_part, z2_part;
    CaseTag case_tag = CaseTag::real;
    double truncation_bound = 0;
};

inline cplx kernel(const HeatKernelParams& p, const CVec& z) {
    if (!(p.t > 0)) throw Error("semigroup", "kernel needs t > 0");
    return std::pow(4 * pi * p.t, -0.5 * p.dim) * std::exp(-csquare(z.data(), z.size()) / (4 * p.t));
}

inline cplx kernel1(double t, cplx u) { return std::exp(-u * u / (4 * t)) / std::sqrt(4 * pi * t); }

// Mass outside |u| <= H sqrt(t) of the 1-d Gaussian.
inline double gaussian_tail(double H) { return std::erfc(0.5 * H); }

namespace detail {

// Single heat kernel G_1(t, u) with its z-derivative -u/(2t) G.
struct GaussKernel {
    double t;
    double tmax() const { return t; }
    double tmin() const { return t; }
    void eval(cplx u, cplx& k, cplx& kg) const {
        k = std::exp(-u * u / (4 * t)) / std::sqrt(4 * pi * t);
        kg = -u / (2 * t) * k;
    }
};

// Breakpoints on [0, L] clustered at 0: geometric from hmin up to hmax, then uniform hmax.
inline RVec peak_breaks(double L, double hmin, double hmax) {
    RVec br{0.0};
    if (!(L > 0)) return br;
    hmin = std::max(hmin, 1e-12 * L);
    hmax = std::max(hmax, hmin);
    double h = hmin;
    while (br.back() < L) {
        double nx = br.back() + h;
        if (nx >= L * (1 - 1e-9) || L - nx < 0.25 * h) nx = L;
        br.push_back(nx);
        h = std::min(2 * h, hmax);
    }
    return br;
}

struct Parts {
    cplx v1 = 0, v2 = 0, g1 = 0, g2 = 0;
    double data_max = 0;
};

// Quadrature over x0 > rho and x0 < -rho: fn(x0, weight * K(z - x0), weight * dK(z - x0)).
template <class Kern, class Fn>
void visit_exterior(const Kern& K, cplx z, double rho, const QuadratureRule& rule, Fn&& fn) {
    const double a = z.real(), b = z.imag();
    const double H = rule.halfwidth;
    const double reach = std::sqrt(b * b + H * H * K.tmax());
    const double smin = std::sqrt(K.tmin()), smax = std::sqrt(K.tmax());
    RVec x, w;
    for (int side = -1; side <= 1; side += 2) {
        // distance from the edge rho to the far truncation point
        double far = (side > 0) ? a + reach : -(a - reach);
        double L = far - rho;
        if (!(L > 0)) continue;
        double gap = std::max(rho - side * a, 0.0);
        double hmin = 0.25 * std::min(smin, gap > 0 ? 2 * K.tmin() / gap : smin);
        RVec br = peak_breaks(L, hmin, 1.5 * smax);
        composite_nodes(br, rule.order, x, w);
        for (std::size_t i = 0; i < x.size(); ++i) {
            double x0 = side * (rho + x[i]);
            cplx kv, kg;
            K.eval(z - x0, kv, kg);
            fn(x0, w[i] * kv, w[i] * kg);
        }
    }
}

template <class Kern, class RealData>
void exterior_real(const Kern& K, cplx z, double rho, RealData&& yr, const QuadratureRule& rule, Parts& out) {
    visit_exterior(K, z, rho, rule, [&](double x0, cplx kv, cplx kg) {
        cplx y = yr(x0);
        out.data_max = std::max(out.data_max, std::abs(y));
        out.v1 += kv * y;
        out.g1 += kg * y;
    });
}

// int over [lo, hi] of K(z - x0) yr(x0) dx0 with real x0, accumulated into the chosen part.
template <class Kern, class RealData>
void segment_real(const Kern& K, cplx z, double lo, double hi, RealData&& yr, const QuadratureRule& rule, Parts& out,
                  bool into_second) {
    if (!(hi > lo)) return;
    const double smax = std::sqrt(K.tmax()), smin = std::sqrt(K.tmin());
    const double a = z.real(), b = z.imag();
    const double reach = std::sqrt(b * b + rule.halfwidth * rule.halfwidth * K.tmax());
    double l = std::max(lo, a - reach), h = std::min(hi, a + reach);
    if (!(h > l)) return;
    // cluster toward the projection of z onto the segment from both sides
    double c = std::clamp(a, l, h);
    RVec br;
    RVec left = peak_breaks(c - l, 0.25 * smin, 1.5 * smax), right = peak_breaks(h - c, 0.25 * smin, 1.5 * smax);
    for (auto it = left.rbegin(); it != left.rend(); ++it) br.push_back(c - *it);
    for (std::size_t i = 1; i < right.size(); ++i) br.push_back(c + right[i]);
    RVec x, w;
    composite_nodes(br, rule.order, x, w);
    for (std::size_t i = 0; i < x.size(); ++i) {
        cplx kv, kg;
        K.eval(z - x[i], kv, kg);
        cplx y = yr(x[i]);
        out.data_max = std::max(out.data_max, std::abs(y));
        if (into_second) {
            out.v2 += w[i] * kv * y;
            out.g2 += w[i] * kg * y;
        } else {
            out.v1 += w[i] * kv * y;
            out.g1 += w[i] * kg * y;
        }
    }
}

// Interior part pushed onto the two sides of the triangle with base [-rho, rho] and summit z:
// fn(w, jacobian * weight * K(z - w), jacobian * weight * dK(z - w)).
template <class Kern, class Fn>
void visit_triangle(const Kern& K, cplx z, double rho, const QuadratureRule& rule, Fn&& fn) {
    const double H = rule.halfwidth;
    const double smax = std::sqrt(K.tmax()), smin = std::sqrt(K.tmin());
    RVec x, w;
    for (int side = -1; side <= 1; side += 2) {
        cplx e = z - side * rho;  // summit minus base vertex
        double len = std::abs(e);
        if (len < 1e-300) continue;
        double re2 = std::max((e * e).real(), 0.0);
        double smaxs = (re2 > 0) ? std::min(1.0, H * smax / std::sqrt(re2)) : 1.0;
        RVec br = peak_breaks(smaxs, 0.25 * smin / len, 1.5 * smax / len);
        composite_nodes(br, rule.order, x, w);
        // left side runs -rho -> z, right side z -> rho
        cplx jac = -double(side) * e;
        for (std::size_t i = 0; i < x.size(); ++i) {
            cplx u = x[i] * e;  // z - w
            cplx kv, kg;
            K.eval(u, kv, kg);
            fn(z - u, w[i] * jac * kv, w[i] * jac * kg);
        }
    }
}

template <class Kern, class CplxData>
void triangle(const Kern& K, cplx z, double rho, CplxData&& ye, const QuadratureRule& rule, Parts& out) {
    visit_triangle(K, z, rho, rule, [&](cplx w, cplx kv, cplx kg) {
        cplx y = ye(w);
        out.data_max = std::max(out.data_max, std::abs(y));
        out.v2 += kv * y;
        out.g2 += kg * y;
    });
}

}  // namespace detail

// y0 convolved with the heat kernel at a real point (tensor Gauss-Legendre, truncated).
inline ComplexEvalReport propagate_real_report(const AnalyticField& y0, double t, const RVec& x,
                                               const QuadratureRule& rule = {}, bool with_gradient = false) {
    rule.validate();
    const int d = y0.dim;
    if (int(x.size()) != d) throw Error("semigroup", "dimension mismatch");
    ComplexEvalReport rep;
    rep.case_tag = CaseTag::real;
    rep.has_gradient = with_gradient;
    rep.gradient.assign(d, 0.0);
    rep.z1_part.assign(d, 0.0);
    rep.z2_part.assign(d, 0.0);
    if (t == 0.0) {
        rep.value = rep.y1_part = y0.real_at(x.data());
        if (with_gradient && y0.grad) {
            CVec z(x.begin(), x.end());
            y0.grad(z.data(), rep.gradient.data());
            rep.z1_part = rep.gradient;
        }
        return rep;
    }
    if (!(t > 0)) throw Error("semigroup", "negative time");
    double tail = d * gaussian_tail(rule.halfwidth);
    if (tail > rule.tol) throw Error("semigroup", "rule too coarse: truncation error " + std::to_string(tail));
    const double W = rule.halfwidth * std::sqrt(t);
    int panels = d == 1 ? rule.panels : std::max(8, rule.panels / (d == 2 ? 2 : 4));
    int order = d == 3 ? std::min(rule.order, 10) : rule.order;
    RVec nx, nw;
    composite_nodes(uniform_breaks(-W, W, panels), order, nx, nw);
    const int m = int(nx.size());
    std::vector<int> idx(d, 0);
    RVec pt(d);
    cplx acc = 0;
    CVec gacc(d, 0.0);
    double dmax = 0;
    while (true) {
        double wt = 1, r2 = 0;
        for (int j = 0; j < d; ++j) {
            pt[j] = x[j] + nx[idx[j]];
            wt *= nw[idx[j]];
            r2 += nx[idx[j]] * nx[idx[j]];
        }
        double g = std::pow(4 * pi * t, -0.5 * d) * std::exp(-r2 / (4 * t));
        if (g > 0) {
            cplx y = y0.real_at(pt.data());
            dmax = std::max(dmax, std::abs(y));
            acc += wt * g * y;
            if (with_gradient)
                for (int j = 0; j < d; ++j) gacc[j] += wt * (nx[idx[j]] / (2 * t)) * g * y;
        }
        int j = 0;
        while (j < d && ++idx[j] == m) idx[j++] = 0;
        if (j == d) break;
    }
    rep.value = rep.y1_part = acc;
    rep.gradient = rep.z1_part = gacc;
    rep.truncation_bound = dmax * tail;
    return rep;
}

inline cplx propagate_real(const AnalyticField& y0, double t, const RVec& x, const QuadratureRule& rule = {}) {
    return propagate_real_report(y0, t, x, rule, false).value;
}
inline cplx propagate_real(const AnalyticField& y0, double t, double x, const QuadratureRule& rule = {}) {
    return propagate_real_report(y0, t, RVec{x}, rule, false).value;
}

// Exterior part over |x0| > 1 plus the interior part moved onto the triangle sides.
inline ComplexEvalReport propagate_complex_1d(const AnalyticField& y0, double alpha, double t, cplx z,
                                              const QuadratureRule& rule = {}, bool with_gradient = true) {
    rule.validate();
    if (y0.dim != 1) throw Error("semigroup", "propagate_complex_1d needs d = 1");
    if (!(alpha > 1)) throw Error("semigroup", "alpha must exceed 1");
    DiamondDomain D(alpha, 1.0, 1);
    if (!diamond_contains(D, z, true, 1e-12)) throw Error("semigroup", "point outside the closed diamond");
    check_validity(y0, D);
    ComplexEvalReport rep;
    rep.has_gradient = with_gradient;
    rep.gradient.assign(1, 0.0);
    rep.z1_part.assign(1, 0.0);
    rep.z2_part.assign(1, 0.0);
    if (t == 0.0) {
        rep.value = rep.y2_part = y0(z);
        rep.case_tag = z.imag() == 0 ? CaseTag::real : CaseTag::contour_1d;
        if (with_gradient && y0.grad) y0.grad(&z, rep.gradient.data());
        return rep;
    }
    if (!(t > 0)) throw Error("semigroup", "negative time");
    detail::GaussKernel K{t};
    detail::Parts P;
    auto yr = [&](double x) { return y0.real_at(x); };
    auto ye = [&](cplx w) { return y0(w); };
    detail::exterior_real(K, z, 1.0, yr, rule, P);
    detail::triangle(K, z, 1.0, ye, rule, P);
    rep.y1_part = P.v1;
    rep.y2_part = P.v2;
    rep.value = P.v1 + P.v2;
    rep.z1_part[0] = P.g1;
    rep.z2_part[0] = P.g2;
    rep.gradient[0] = P.g1 + P.g2;
    rep.truncation_bound = 2 * P.data_max * gaussian_tail(rule.halfwidth);
    if (z.imag() == 0)
        rep.case_tag = CaseTag::real;
    else if (P.v2 == cplx(0.0) && P.g2 == cplx(0.0))
        rep.case_tag = CaseTag::exterior_only;
    else
        rep.case_tag = CaseTag::contour_1d;
    return rep;
}

// Interior part computed on the straight segment [-1, 1]; only usable when t is not small
// relative to Im(z)^2, since the integrand then carries exp(Im(z)^2 / 4t).
inline cplx interior_segment_part(const AnalyticField& y0, double t, cplx z, const QuadratureRule& rule = {}) {
    detail::GaussKernel K{t};
    detail::Parts P;
    QuadratureRule wide = rule;
    wide.halfwidth = 1e6;
    detail::segment_real(K, z, -1.0, 1.0, [&](double x) { return y0(cplx(x)); }, wide, P, true);
    return P.v2;
}

// Rotation reduction: B is turned to |B| e1, the x' = (x2..xd) integral is a real tensor rule and
// each x' node dispatches the x1 integral into the cases of the estimate.
inline ComplexEvalReport propagate_complex_nd(const AnalyticField& y0, double alpha, double t, const CVec& Z,
                                              const QuadratureRule& rule = {}, bool with_gradient = true) {
    rule.validate();
    const int d = y0.dim;
    if (d < 2 || d > 3) throw Error("semigroup", "propagate_complex_nd supports d = 2, 3");
    if (int(Z.size()) != d) throw Error("semigroup", "dimension mismatch");
    if (!(alpha > 1)) throw Error("semigroup", "alpha must exceed 1");
    DiamondDomain D(alpha, 1.0, d);
    if (!diamond_contains(D, Z, true, 1e-12)) throw Error("semigroup", "point outside the closed diamond");
    check_validity(y0, D);
    ComplexEvalReport rep;
    rep.has_gradient = with_gradient;
    rep.gradient.assign(d, 0.0);
    rep.z1_part.assign(d, 0.0);
    rep.z2_part.assign(d, 0.0);
    if (t == 0.0) {
        rep.value = rep.y2_part = y0.at(Z);
        if (with_gradient && y0.grad) y0.grad(Z.data(), rep.gradient.data());
        rep.case_tag = CaseTag::nd_case_2b;
        return rep;
    }
    if (!(t > 0)) throw Error("semigroup", "negative time");

    RVec A(d), B(d);
    for (int j = 0; j < d; ++j) {
        A[j] = Z[j].real();
        B[j] = Z[j].imag();
    }
    Eigen::MatrixXd R = rotation_to_e1(B);
    Eigen::VectorXd Ae = Eigen::Map<Eigen::VectorXd>(A.data(), d);
    Eigen::VectorXd AR = R * Ae;
    const double B1 = norm2(B), A1 = AR(0);
    const cplx z1(A1, B1);
    Eigen::MatrixXd Rt = R.transpose();

    // data in rotated coordinates: y0B(w) = y0(R^T w)
    auto rot_c = [&](const cplx* w, cplx* v) {
        for (int i = 0; i < d; ++i) {
            v[i] = 0;
            for (int k = 0; k < d; ++k) v[i] += Rt(i, k) * w[k];
        }
    };
    auto rot_r = [&](const double* w, double* v) {
        for (int i = 0; i < d; ++i) {
            v[i] = 0;
            for (int k = 0; k < d; ++k) v[i] += Rt(i, k) * w[k];
        }
    };

    const int dp = d - 1;
    const double sq = std::sqrt(t), W = rule.halfwidth * sq;
    std::vector<RVec> xn(dp), xw(dp);
    for (int j = 0; j < dp; ++j) {
        double c = AR(j + 1);
        RVec br = uniform_breaks(c - W, c + W, dp == 1 ? rule.panels : std::max(8, rule.panels / 2));
        RVec extra{-1.0, 1.0};
        if (std::abs(A1) < 1) {
            extra.push_back(std::sqrt(1 - A1 * A1));
            extra.push_back(-std::sqrt(1 - A1 * A1));
        }
        double q = (1 - alpha * B1) * (1 - alpha * B1) - A1 * A1;
        if (q > 0 && 1 - alpha * B1 > 0) {
            extra.push_back(std::sqrt(q));
            extra.push_back(-std::sqrt(q));
        }
        br = merge_breaks(br, extra);
        composite_nodes(br, dp == 1 ? rule.order : std::min(rule.order, 12), xn[j], xw[j]);
    }

    double case_weight[4] = {0, 0, 0, 0};
    cplx v1 = 0, v2 = 0;
    CVec g1(d, 0.0), g2(d, 0.0);
    double dmax = 0;
    std::vector<int> idx(dp, 0);
    const int m0 = int(xn[0].size());
    std::vector<std::size_t> sizes(dp);
    for (int j = 0; j < dp; ++j) sizes[j] = xn[j].size();
    (void)m0;

    CVec wfull(d), vtmp(d);
    RVec xfull(d), xtmp(d);
    while (true) {
        RVec xp(dp);
        double wt = 1, r2 = 0, dist2 = 0;
        for (int j = 0; j < dp; ++j) {
            xp[j] = xn[j][idx[j]];
            wt *= xw[j][idx[j]];
            r2 += xp[j] * xp[j];
            double dj = AR(j + 1) - xp[j];
            dist2 += dj * dj;
        }
        double gp = std::pow(4 * pi * t, -0.5 * dp) * std::exp(-dist2 / (4 * t));
        if (gp > 0) {
            auto yr = [&](double x1) {
                xfull[0] = x1;
                for (int j = 0; j < dp; ++j) xfull[j + 1] = xp[j];
                rot_r(xfull.data(), xtmp.data());
                return y0.real_at(xtmp.data());
            };
            auto ye = [&](cplx w1) {
                wfull[0] = w1;
                for (int j = 0; j < dp; ++j) wfull[j + 1] = xp[j];
                rot_c(wfull.data(), vtmp.data());
                return y0.ext(vtmp.data());
            };
            detail::GaussKernel K{t};
            detail::Parts P;
            const double r = std::sqrt(r2);
            int cs;
            if (r >= 1) {
                cs = 0;
                detail::segment_real(K, z1, -1e300, 1e300, yr, rule, P, false);
            } else {
                const double rho = std::sqrt(1 - r2);
                detail::exterior_real(K, z1, rho, yr, rule, P);
                if (std::abs(A1) >= rho) {
                    cs = 1;
                    detail::segment_real(K, z1, -rho, rho, yr, rule, P, true);
                } else if (std::sqrt(A1 * A1 + r2) + alpha * B1 < 1) {
                    cs = 2;
                    detail::triangle(K, z1, rho, ye, rule, P);
                } else {
                    cs = 3;
                    // boundary contour b1(a1) = (1/alpha)(1 - sqrt(a1^2 + |x'|^2)), B1 >= 0 after rotation
                    int np = std::max(rule.panels, int(std::ceil(2 * rho / (0.75 * sq))));
                    RVec an, aw;
                    composite_nodes(uniform_breaks(-rho, rho, np), rule.order, an, aw);
                    for (std::size_t i = 0; i < an.size(); ++i) {
                        double a1 = an[i];
                        double s = std::sqrt(a1 * a1 + r2);
                        cplx w(a1, (1 - s) / alpha);
                        cplx dw(1.0, s > 0 ? -a1 / (alpha * s) : 0.0);
                        cplx kv, kg;
                        K.eval(z1 - w, kv, kg);
                        cplx y = ye(w);
                        P.data_max = std::max(P.data_max, std::abs(y));
                        P.v2 += aw[i] * dw * kv * y;
                        P.g2 += aw[i] * dw * kg * y;
                    }
                }
            }
            dmax = std::max(dmax, P.data_max);
            double cw = wt * gp;
            v1 += cw * P.v1;
            v2 += cw * P.v2;
            g1[0] += cw * P.g1;
            g2[0] += cw * P.g2;
            for (int j = 0; j < dp; ++j) {
                double f = -(AR(j + 1) - xp[j]) / (2 * t);
                g1[j + 1] += cw * f * P.v1;
                g2[j + 1] += cw * f * P.v2;
            }
            case_weight[cs] += cw * (std::abs(P.v1) + std::abs(P.v2));
        }
        int j = 0;
        while (j < dp && ++idx[j] == int(sizes[j])) idx[j++] = 0;
        if (j == dp) break;
    }
    rep.y1_part = v1;
    rep.y2_part = v2;
    rep.value = v1 + v2;
    // gradient back to the original frame: grad = R^T grad_rotated
    for (int i = 0; i < d; ++i) {
        rep.z1_part[i] = rep.z2_part[i] = 0;
        for (int k = 0; k < d; ++k) {
            rep.z1_part[i] += R(k, i) * g1[k];
            rep.z2_part[i] += R(k, i) * g2[k];
        }
        rep.gradient[i] = rep.z1_part[i] + rep.z2_part[i];
    }
    int best = int(std::max_element(case_weight, case_weight + 4) - case_weight);
    const CaseTag tags[4] = {CaseTag::nd_case_1, CaseTag::nd_case_2a, CaseTag::nd_case_2b, CaseTag::nd_case_2c};
    rep.case_tag = tags[best];
    rep.truncation_bound = 2 * d * dmax * gaussian_tail(rule.halfwidth);
    return rep;
}

// Dispatch on dimension; real points in d >= 2 go through the same rotated routine (B = 0).
inline ComplexEvalReport propagate_complex(const AnalyticField& y0, double alpha, double t, const CVec& Z,
                                           const QuadratureRule& rule = {}, bool with_gradient = true) {
    if (y0.dim == 1) return propagate_complex_1d(y0, alpha, t, Z[0], rule, with_gradient);
    return propagate_complex_nd(y0, alpha, t, Z, rule, with_gradient);
}

// The semigroup at a point of R^d or of the closed diamond; real points use the plain convolution.
inline ComplexEvalReport propagate_any(const AnalyticField& y0, double alpha, double t, const CVec& Z,
                                       const QuadratureRule& rule = {}, bool with_gradient = true) {
    bool real = std::all_of(Z.begin(), Z.end(), [](cplx v) { return v.imag() == 0.0; });
    if (real) {
        RVec x(Z.size());
        for (std::size_t j = 0; j < Z.size(); ++j) x[j] = Z[j].real();
        return propagate_real_report(y0, t, x, rule, with_gradient);
    }
    return propagate_complex(y0, alpha, t, Z, rule, with_gradient);
}

struct SemigroupConstants {
    double c_value = 0;     // sup ||T_t y0|| / ||y0||
    double c_gradient = 0;  // sup sqrt(t) ||grad T_t y0|| / ||y0||
    double c_laplacian = 0; // sup t ||Lap T_t y0|| / ||y0||
};

struct ConstantsSampling {
    int n_real = 400;
    int n_diamond = 400;
    double real_radius = 8.0;
};

// Measured analytic-semigroup constants over a family of closed-form data. The Laplacian uses
// T_t = T_{t/2} T_{t/2}: grad applied after propagating the gradient field, i.e. the gradient
// kernel of T_t acting on d_j y0, summed over j.
inline SemigroupConstants empirical_constants(double alpha, const std::vector<AnalyticField>& family,
                                              const RVec& t_grid, const QuadratureRule& rule = {},
                                              const ConstantsSampling& smp = {}) {
    SemigroupConstants out;
    if (family.empty()) return out;
    const int d = family[0].dim;
    DiamondDomain D(alpha, 1.0, d);
    auto dpts = boundary_sample_c(D, smp.n_diamond);
    auto rpts = real_grid(d, smp.real_radius, smp.n_real);
    std::vector<CVec> pts = dpts;
    for (auto& x : rpts) {
        CVec z(d);
        for (int j = 0; j < d; ++j) z[j] = x[j];
        pts.push_back(z);
    }
    const std::size_t nd = dpts.size();
    for (const auto& y0 : family) {
        double n0 = xalpha_norm(y0, D, smp.real_radius, 10000).total;
        if (n0 == 0) continue;
        std::vector<AnalyticField> dy;
        for (int j = 0; j < d; ++j) dy.push_back(fields::derivative(y0, j));
        for (double t : t_grid) {
            std::vector<double> v(pts.size()), g(pts.size()), l(pts.size());
            parallel_for(pts.size(), [&](std::size_t i) {
                auto r = propagate_any(y0, alpha, t, pts[i], rule, true);
                v[i] = std::abs(r.value);
                double gs = 0;
                for (auto c : r.gradient) gs += std::norm(c);
                g[i] = std::sqrt(gs);
                cplx lap = 0;
                for (int j = 0; j < d; ++j) lap += propagate_any(dy[j], alpha, t, pts[i], rule, true).gradient[j];
                l[i] = std::abs(lap);
            });
            auto supn = [&](const std::vector<double>& a) {
                double s1 = 0, s2 = 0;
                for (std::size_t i = 0; i < a.size(); ++i) (i < nd ? s1 : s2) = std::max(i < nd ? s1 : s2, a[i]);
                return s1 + s2;
            };
            out.c_value = std::max(out.c_value, supn(v) / n0);
            out.c_gradient = std::max(out.c_gradient, std::sqrt(t) * supn(g) / n0);
            out.c_laplacian = std::max(out.c_laplacian, t * supn(l) / n0);
        }
    }
    return out;
}

inline void write_reports_csv(const std::string& path, const std::vector<double>& ts, const std::vector<CVec>& zs,
                              const std::vector<ComplexEvalReport>& reps) {
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot open " + path);
    const int d = zs.empty() ? 1 : int(zs[0].size());
    out << "t";
    for (int j = 0; j < d; ++j) out << ",re_z" << j + 1 << ",im_z" << j + 1;
    out << ",re_value,im_value,re_y1,im_y1,re_y2,im_y2,case_tag\n" << std::setprecision(17);
    for (std::size_t i = 0; i < reps.size(); ++i) {
        out << ts[i];
        for (int j = 0; j < d; ++j) out << "," << zs[i][j].real() << "," << zs[i][j].imag();
        const auto& r = reps[i];
        out << "," << r.value.real() << "," << r.value.imag() << "," << r.y1_part.real() << "," << r.y1_part.imag()
            << "," << r.y2_part.real() << "," << r.y2_part.imag() << "," << case_name(r.case_tag) << "\n";
    }
}

}  // namespace reachkit
