#pragma once

#include "cutoff.hpp"
#include "geometry.hpp"

#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace reachkit {

enum class FieldKind { polynomial, complex_exponential, gaussian, rational, grid_sampled, composite };

inline const char* kind_name(FieldKind k) {
    switch (k) {
        case FieldKind::polynomial: return "polynomial";
        case FieldKind::complex_exponential: return "complex-exponential";
        case FieldKind::gaussian: return "gaussian";
        case FieldKind::rational: return "rational-with-pole-list";
        case FieldKind::grid_sampled: return "grid-sampled";
        case FieldKind::composite: return "composite";
    }
    return "?";
}

// An element of X_alpha: values on R^d plus a holomorphic extension on the validity diamond.
// `ext` must be holomorphic on `validity`; `real_eval` (when set) gives the values on R^d,
// otherwise ext is used on real points as well.
struct AnalyticField {
    int dim = 1;
    DiamondDomain validity{1.0, 1.0, 1};
    FieldKind kind = FieldKind::composite;
    std::string name;
    std::function<cplx(const cplx*)> ext;
    std::function<cplx(const double*)> real_eval;
    std::function<void(const cplx*, cplx*)> grad;
    double interp_error = 0.0;

    cplx operator()(cplx z) const { return ext(&z); }
    cplx at(const CVec& z) const { return ext(z.data()); }
    cplx real_at(const double* x) const {
        if (real_eval) return real_eval(x);
        CVec z(x, x + dim);
        return ext(z.data());
    }
    cplx real_at(double x) const { return real_at(&x); }
    bool has_gradient() const { return bool(grad); }
};

namespace fields {

inline DiamondDomain whole(int d) { return DiamondDomain(1e-6, 1.0, d); }

inline AnalyticField constant(cplx c, int d = 1) {
    AnalyticField f;
    f.dim = d;
    f.validity = whole(d);
    f.kind = FieldKind::polynomial;
    f.name = "constant";
    f.ext = [c](const cplx*) { return c; };
    f.grad = [d](const cplx*, cplx* g) {
        for (int j = 0; j < d; ++j) g[j] = 0.0;
    };
    return f;
}

// exp(i k.x)
inline AnalyticField fourier(const RVec& k) {
    const int d = int(k.size());
    AnalyticField f;
    f.dim = d;
    f.validity = whole(d);
    f.kind = FieldKind::complex_exponential;
    f.name = "fourier";
    f.ext = [k, d](const cplx* z) {
        cplx s = 0;
        for (int j = 0; j < d; ++j) s += k[j] * z[j];
        return std::exp(I * s);
    };
    f.grad = [k, d](const cplx* z, cplx* g) {
        cplx s = 0;
        for (int j = 0; j < d; ++j) s += k[j] * z[j];
        cplx e = std::exp(I * s);
        for (int j = 0; j < d; ++j) g[j] = I * k[j] * e;
    };
    return f;
}

// exp(c z), d = 1
inline AnalyticField exponential(cplx c) {
    AnalyticField f;
    f.validity = whole(1);
    f.kind = FieldKind::complex_exponential;
    f.name = "exp";
    f.ext = [c](const cplx* z) { return std::exp(c * z[0]); };
    f.grad = [c](const cplx* z, cplx* g) { g[0] = c * std::exp(c * z[0]); };
    return f;
}

// sum_k c_k z^k, d = 1
inline AnalyticField polynomial(CVec coeffs) {
    AnalyticField f;
    f.validity = whole(1);
    f.kind = FieldKind::polynomial;
    f.name = "polynomial";
    f.ext = [coeffs](const cplx* z) {
        cplx s = 0;
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) s = s * z[0] + *it;
        return s;
    };
    f.grad = [coeffs](const cplx* z, cplx* g) {
        cplx s = 0;
        for (std::size_t k = coeffs.size(); k-- > 1;) s = s * z[0] + double(k) * coeffs[k];
        g[0] = s;
    };
    return f;
}

// sum_k a_k cos(kx) + b_k sin(kx), k = 0..n
inline AnalyticField trig_polynomial(RVec a, RVec b) {
    AnalyticField f;
    f.validity = whole(1);
    f.kind = FieldKind::complex_exponential;
    f.name = "trig-polynomial";
    f.ext = [a, b](const cplx* z) {
        cplx s = 0;
        for (std::size_t k = 0; k < a.size(); ++k)
            s += a[k] * std::cos(double(k) * z[0]) + b[k] * std::sin(double(k) * z[0]);
        return s;
    };
    f.grad = [a, b](const cplx* z, cplx* g) {
        cplx s = 0;
        for (std::size_t k = 0; k < a.size(); ++k)
            s += double(k) * (-a[k] * std::sin(double(k) * z[0]) + b[k] * std::cos(double(k) * z[0]));
        g[0] = s;
    };
    return f;
}

// Heat kernel G_d(s, x) as initial datum.
inline AnalyticField gaussian(double s, int d = 1) {
    AnalyticField f;
    f.dim = d;
    f.validity = whole(d);
    f.kind = FieldKind::gaussian;
    f.name = "gaussian";
    f.ext = [s, d](const cplx* z) { return std::pow(4 * pi * s, -0.5 * d) * std::exp(-csquare(z, d) / (4 * s)); };
    f.grad = [s, d](const cplx* z, cplx* g) {
        cplx v = std::pow(4 * pi * s, -0.5 * d) * std::exp(-csquare(z, d) / (4 * s));
        for (int j = 0; j < d; ++j) g[j] = -z[j] / (2 * s) * v;
    };
    return f;
}

// scale * num(z) / prod_j (z - p_j), d = 1. The validity diamond must avoid every pole.
inline AnalyticField rational(CVec numerator, CVec poles, cplx scale, DiamondDomain validity) {
    for (auto p : poles)
        if (diamond_contains(validity, p, true))
            throw Error("analytic", "rational field has a pole inside its declared validity diamond");
    AnalyticField f;
    f.validity = validity;
    f.kind = FieldKind::rational;
    f.name = "rational";
    auto num = polynomial(numerator);
    f.ext = [num, poles, scale](const cplx* z) {
        cplx den = 1;
        for (auto p : poles) den *= (z[0] - p);
        return scale * num.ext(z) / den;
    };
    f.grad = [num, poles, scale](const cplx* z, cplx* g) {
        cplx den = 1, logd = 0;
        for (auto p : poles) {
            den *= (z[0] - p);
            logd += 1.0 / (z[0] - p);
        }
        cplx n0 = num.ext(z), n1;
        num.grad(z, &n1);
        g[0] = scale * (n1 - n0 * logd) / den;
    };
    return f;
}

inline AnalyticField scaled(cplx c, const AnalyticField& a) {
    AnalyticField f = a;
    f.kind = FieldKind::composite;
    f.ext = [c, e = a.ext](const cplx* z) { return c * e(z); };
    if (a.real_eval) f.real_eval = [c, r = a.real_eval](const double* x) { return c * r(x); };
    if (a.grad)
        f.grad = [c, g = a.grad, d = a.dim](const cplx* z, cplx* out) {
            g(z, out);
            for (int j = 0; j < d; ++j) out[j] *= c;
        };
    f.interp_error = std::abs(c) * a.interp_error;
    return f;
}

inline DiamondDomain intersect(const DiamondDomain& a, const DiamondDomain& b) {
    if (a.dim != b.dim) throw Error("analytic", "dimension mismatch in composite field");
    return DiamondDomain(std::max(a.alpha, b.alpha), std::min(a.scale, b.scale), a.dim);
}

inline AnalyticField sum(const AnalyticField& a, const AnalyticField& b) {
    AnalyticField f;
    f.dim = a.dim;
    f.validity = intersect(a.validity, b.validity);
    f.kind = FieldKind::composite;
    f.name = a.name + "+" + b.name;
    f.ext = [ea = a.ext, eb = b.ext](const cplx* z) { return ea(z) + eb(z); };
    if (a.real_eval || b.real_eval)
        f.real_eval = [a, b](const double* x) { return a.real_at(x) + b.real_at(x); };
    if (a.grad && b.grad)
        f.grad = [ga = a.grad, gb = b.grad, d = a.dim](const cplx* z, cplx* out) {
            CVec t(d);
            ga(z, out);
            gb(z, t.data());
            for (int j = 0; j < d; ++j) out[j] += t[j];
        };
    f.interp_error = a.interp_error + b.interp_error;
    return f;
}

// X_alpha is an algebra: the product is holomorphic on the intersection of validity diamonds.
inline AnalyticField product(const AnalyticField& a, const AnalyticField& b) {
    AnalyticField f;
    f.dim = a.dim;
    f.validity = intersect(a.validity, b.validity);
    f.kind = FieldKind::composite;
    f.name = a.name + "*" + b.name;
    f.ext = [ea = a.ext, eb = b.ext](const cplx* z) { return ea(z) * eb(z); };
    if (a.real_eval || b.real_eval)
        f.real_eval = [a, b](const double* x) { return a.real_at(x) * b.real_at(x); };
    if (a.grad && b.grad)
        f.grad = [a, b](const cplx* z, cplx* out) {
            const int d = a.dim;
            CVec ga(d), gb(d);
            a.grad(z, ga.data());
            b.grad(z, gb.data());
            cplx va = a.ext(z), vb = b.ext(z);
            for (int j = 0; j < d; ++j) out[j] = ga[j] * vb + va * gb[j];
        };
    return f;
}

// eta * f on R^d. The extension is f's own, which is legitimate because eta = 1 on the real
// section of the validity diamond (validity scale is clipped to r_inner).
inline AnalyticField cutoff_times(const Cutoff& eta, const AnalyticField& a) {
    AnalyticField f = a;
    f.kind = FieldKind::composite;
    f.name = "cutoff*" + a.name;
    f.validity = DiamondDomain(a.validity.alpha, std::min(a.validity.scale, eta.r_inner), a.dim);
    f.real_eval = [eta, a](const double* x) {
        double e = eta.value(x, a.dim);
        if (e == 0.0) return cplx(0.0);
        return e * a.real_at(x);
    };
    return f;
}

// Partial derivative field; needs the gradient oracle of `a`.
inline AnalyticField derivative(const AnalyticField& a, int j) {
    if (!a.grad) throw Error("analytic", "field '" + a.name + "' has no gradient oracle");
    AnalyticField f;
    f.dim = a.dim;
    f.validity = a.validity;
    f.kind = FieldKind::composite;
    f.name = "d" + std::to_string(j) + "(" + a.name + ")";
    f.ext = [g = a.grad, j, d = a.dim](const cplx* z) {
        CVec out(d);
        g(z, out.data());
        return out[j];
    };
    return f;
}

// Chebyshev series on [-r, r] evaluated at complex z by Clenshaw.
inline cplx chebyshev_eval(const CVec& c, double r, cplx z) {
    cplx x = z / r, b1 = 0, b2 = 0;
    for (std::size_t k = c.size(); k-- > 1;) {
        cplx b0 = 2.0 * x * b1 - b2 + c[k];
        b2 = b1;
        b1 = b0;
    }
    return x * b1 - b2 + c[0];
}

inline cplx chebyshev_deriv(const CVec& c, double r, cplx z) {
    const std::size_t n = c.size();
    if (n < 2) return 0.0;
    CVec d(n, 0.0);
    for (std::size_t k = n - 1; k-- > 0;) {
        cplx next = (k + 2 < n) ? d[k + 2] : cplx(0.0);
        d[k] = next + 2.0 * double(k + 1) * c[k + 1];
    }
    d[0] *= 0.5;
    d.pop_back();
    return chebyshev_eval(d, r, z) / r;
}

}  // namespace fields

struct ChebFit {
    CVec coeffs;
    double r = 1.0;
    double cond = 1.0;
    double max_residual = 0.0;
};

// Least-squares first-kind Chebyshev fit on [-r, r].
inline ChebFit chebyshev_fit(const RVec& xs, const CVec& vals, double r, int degree, double max_cond = 1e12) {
    const int n = int(xs.size()), m = degree + 1;
    if (n < m) throw Error("analytic", "chebyshev fit needs at least degree+1 samples");
    Eigen::MatrixXd V(n, m);
    for (int i = 0; i < n; ++i) {
        double x = xs[i] / r;
        double t0 = 1, t1 = x;
        V(i, 0) = 1;
        if (m > 1) V(i, 1) = x;
        for (int k = 2; k < m; ++k) {
            double t2 = 2 * x * t1 - t0;
            V(i, k) = t2;
            t0 = t1;
            t1 = t2;
        }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(V);
    auto sv = svd.singularValues();
    double cond = sv(0) / std::max(sv(m - 1), 1e-300);
    if (cond > max_cond)
        throw Error("analytic", "ill-conditioned fit, condition estimate " + std::to_string(cond));
    Eigen::MatrixXd rhs(n, 2);
    for (int i = 0; i < n; ++i) {
        rhs(i, 0) = vals[i].real();
        rhs(i, 1) = vals[i].imag();
    }
    Eigen::MatrixXd sol = V.colPivHouseholderQr().solve(rhs);
    ChebFit f;
    f.r = r;
    f.cond = cond;
    f.coeffs.resize(m);
    for (int k = 0; k < m; ++k) f.coeffs[k] = cplx(sol(k, 0), sol(k, 1));
    Eigen::MatrixXd res = V * sol - rhs;
    for (int i = 0; i < n; ++i) f.max_residual = std::max(f.max_residual, std::hypot(res(i, 0), res(i, 1)));
    return f;
}

namespace fields {

// Grid-sampled 1-d field: Chebyshev fit of real samples, continued to complex points by the
// series itself. The interpolation error bound is the fit residual plus the last coefficients.
inline AnalyticField grid_sampled(const RVec& xs, const CVec& vals, int degree, DiamondDomain validity) {
    double r = 0;
    for (double x : xs) r = std::max(r, std::abs(x));
    ChebFit fit = chebyshev_fit(xs, vals, r, degree);
    AnalyticField f;
    f.validity = validity;
    f.kind = FieldKind::grid_sampled;
    f.name = "grid-sampled";
    auto c = std::make_shared<CVec>(fit.coeffs);
    f.ext = [c, r](const cplx* z) { return chebyshev_eval(*c, r, z[0]); };
    f.grad = [c, r](const cplx* z, cplx* g) { g[0] = chebyshev_deriv(*c, r, z[0]); };
    double tail = 0;
    for (int k = std::max(0, degree - 2); k <= degree; ++k) tail += std::abs(fit.coeffs[k]);
    f.interp_error = fit.max_residual + tail;
    return f;
}

}  // namespace fields

struct XAlphaNormReport {
    double real_sup = 0;
    double diamond_sup = 0;
    double total = 0;
    long sample_count = 0;
};

inline void check_validity(const AnalyticField& f, const DiamondDomain& D) {
    if (!f.validity.contains_domain(D)) throw Error("analytic", "extension not declared holomorphic here");
}

// Real grid on [-R, R]^d with about n points in total.
inline std::vector<RVec> real_grid(int d, double R, int n) {
    int m = std::max(2, int(std::ceil(std::pow(double(n), 1.0 / d))));
    std::vector<RVec> pts;
    std::vector<int> idx(d, 0);
    while (true) {
        RVec x(d);
        for (int j = 0; j < d; ++j) x[j] = -R + 2 * R * idx[j] / (m - 1);
        pts.push_back(std::move(x));
        int j = 0;
        while (j < d && ++idx[j] == m) idx[j++] = 0;
        if (j == d) break;
    }
    return pts;
}

// Diamond points: boundary (where the max modulus sits) plus an interior grid for sampled kinds.
inline std::vector<CVec> diamond_samples(const DiamondDomain& D, int n) {
    auto pts = boundary_sample_c(D, n);
    if (D.dim == 1) {
        const int m = 21;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                cplx z(D.scale * (2.0 * i / (m - 1) - 1), D.scale / D.alpha * (2.0 * j / (m - 1) - 1));
                if (diamond_contains(D, z, false)) pts.push_back({z});
            }
    } else {
        DiamondDomain inner(D.alpha, 0.5 * D.scale, D.dim);
        for (auto& z : boundary_sample_c(inner, std::max(4, n / 8))) pts.push_back(z);
    }
    return pts;
}

inline XAlphaNormReport xalpha_norm(const AnalyticField& f, const DiamondDomain& D, double truncation_radius = 8.0,
                                    int n_samples = 10000) {
    if (f.dim != D.dim) throw Error("analytic", "dimension mismatch");
    check_validity(f, D);
    XAlphaNormReport rep;
    auto dpts = diamond_samples(D, n_samples);
    for (const auto& z : dpts) rep.diamond_sup = std::max(rep.diamond_sup, std::abs(f.at(z)));
    auto rpts = real_grid(f.dim, truncation_radius, n_samples);
    for (const auto& x : rpts) rep.real_sup = std::max(rep.real_sup, std::abs(f.real_at(x.data())));
    rep.total = rep.real_sup + rep.diamond_sup;
    rep.sample_count = long(dpts.size() + rpts.size());
    return rep;
}

// X_alpha^1 norm: f together with its partial derivatives.
inline XAlphaNormReport xalpha1_norm(const AnalyticField& f, const DiamondDomain& D, double truncation_radius = 8.0,
                                     int n_samples = 10000) {
    XAlphaNormReport rep = xalpha_norm(f, D, truncation_radius, n_samples);
    for (int j = 0; j < f.dim; ++j) {
        auto r = xalpha_norm(fields::derivative(f, j), D, truncation_radius, n_samples);
        rep.real_sup += r.real_sup;
        rep.diamond_sup += r.diamond_sup;
        rep.total += r.total;
        rep.sample_count += r.sample_count;
    }
    return rep;
}

struct DecayReport {
    double rho = 1.0;        // fitted geometric ratio; 0 for a finite expansion
    double rho_fit = 1.0;    // exp of the log-envelope slope over [1, kmax], kept when the fit is rejected
    bool geometric = false;  // false when the tail does not look geometric (fit rejected)
    bool finite_expansion = false;
    double slope_head = 0, slope_tail = 0;
    int kmax = 0;
    double cond = 1;
    RVec abs_coeffs;
};

// Geometric-decay certificate from interval Chebyshev coefficients.
inline DecayReport decay_rate(const RVec& xs, const CVec& vals, double r, int degree, double floor_rel = 1e-12) {
    ChebFit fit = chebyshev_fit(xs, vals, r, degree);
    DecayReport rep;
    rep.cond = fit.cond;
    const int m = degree + 1;
    rep.abs_coeffs.resize(m);
    double cmax = 0;
    for (int k = 0; k < m; ++k) {
        rep.abs_coeffs[k] = std::abs(fit.coeffs[k]);
        cmax = std::max(cmax, rep.abs_coeffs[k]);
    }
    if (cmax == 0) {
        rep.rho = rep.rho_fit = 0;
        rep.finite_expansion = rep.geometric = true;
        return rep;
    }
    const double floor = floor_rel * cmax;
    // running max from the right fills parity zeros of even/odd functions
    RVec env(m);
    double run = 0;
    for (int k = m - 1; k >= 0; --k) env[k] = run = std::max(run, rep.abs_coeffs[k]);
    int kmax = 0;
    for (int k = 0; k < m; ++k)
        if (rep.abs_coeffs[k] > floor) kmax = k;
    rep.kmax = kmax;
    double tail_max = (kmax + 1 < m) ? env[kmax + 1] : floor;
    if (kmax + 1 < m && tail_max < 1e-10 * rep.abs_coeffs[kmax] && kmax < degree - 1) {
        rep.rho = rep.rho_fit = 0;
        rep.finite_expansion = rep.geometric = true;
        return rep;
    }
    auto slope = [&](int a, int b) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int n = 0;
        for (int k = a; k <= b; ++k) {
            double y = std::log(env[k]);
            sx += k;
            sy += y;
            sxx += double(k) * k;
            sxy += k * y;
            ++n;
        }
        return (n * sxy - sx * sy) / (n * sxx - sx * sx);
    };
    const int k0 = 1;
    if (kmax - k0 < 4) {
        rep.rho = rep.rho_fit = 0;
        rep.finite_expansion = rep.geometric = true;
        return rep;
    }
    double s_all = slope(k0, kmax);
    int mid = (k0 + kmax) / 2;
    rep.slope_head = slope(k0, mid);
    rep.slope_tail = slope(mid, kmax);
    rep.rho = rep.rho_fit = std::exp(s_all);
    rep.geometric = s_all < 0 && std::abs(rep.slope_head - rep.slope_tail) <= 0.5 * std::abs(s_all);
    if (!rep.geometric) rep.rho = 1.0;
    return rep;
}

// Max over interior points of |d_y f - i d_x f| per coordinate plane, by centered differences.
inline double cauchy_riemann_residual(const AnalyticField& f, const DiamondDomain& D, double h, int n) {
    DiamondDomain inner(D.alpha, 0.6 * D.scale, D.dim);
    auto pts = boundary_sample_c(inner, std::max(4, n));
    DiamondDomain inner2(D.alpha, 0.3 * D.scale, D.dim);
    for (auto& z : boundary_sample_c(inner2, std::max(4, n / 2))) pts.push_back(z);
    double worst = 0;
    for (auto z : pts) {
        for (int j = 0; j < f.dim; ++j) {
            CVec zp = z, zm = z, zip = z, zim = z;
            zp[j] += h;
            zm[j] -= h;
            zip[j] += I * h;
            zim[j] -= I * h;
            cplx dx = (f.at(zp) - f.at(zm)) / (2 * h);
            cplx dy = (f.at(zip) - f.at(zim)) / (2 * h);
            worst = std::max(worst, std::abs(dy - I * dx));
        }
    }
    return worst;
}

// Columnar CSV: re(x_1..x_d), im(x_1..x_d), re(val), im(val).
inline void write_field_csv(const std::string& path, const std::vector<CVec>& pts, const CVec& vals) {
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot open " + path);
    const int d = pts.empty() ? 1 : int(pts[0].size());
    for (int j = 0; j < d; ++j) out << "re_x" << j + 1 << ",";
    for (int j = 0; j < d; ++j) out << "im_x" << j + 1 << ",";
    out << "re_val,im_val\n" << std::setprecision(17);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (int j = 0; j < d; ++j) out << pts[i][j].real() << ",";
        for (int j = 0; j < d; ++j) out << pts[i][j].imag() << ",";
        out << vals[i].real() << "," << vals[i].imag() << "\n";
    }
}

inline void read_field_csv(const std::string& path, std::vector<CVec>& pts, CVec& vals) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open " + path);
    std::string line;
    std::getline(in, line);
    int cols = 1 + int(std::count(line.begin(), line.end(), ','));
    if (cols < 4 || cols % 2) throw Error("io", "bad field CSV header in " + path);
    const int d = (cols - 2) / 2;
    pts.clear();
    vals.clear();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        RVec v;
        std::string cell;
        while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
        if (int(v.size()) != cols) throw Error("io", "ragged row in " + path);
        CVec z(d);
        for (int j = 0; j < d; ++j) z[j] = cplx(v[j], v[d + j]);
        pts.push_back(z);
        vals.emplace_back(v[2 * d], v[2 * d + 1]);
    }
}

}  // namespace reachkit
