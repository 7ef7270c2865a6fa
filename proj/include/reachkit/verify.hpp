#pragma once

// Experiment helpers shared by the command-line tool and the acceptance harness.

#include "reach.hpp"

namespace reachkit::verify {

struct Check {
    std::string name;
    double value = 0;
    double bound = 0;
    bool pass = false;
};

inline Check at_most(std::string name, double value, double bound) {
    return {std::move(name), value, bound, std::isfinite(value) && value <= bound};
}

// ---------------------------------------------------------------- accurate sups

// max of a continuous function on [a, b]: dense scan, then golden-section polishing of the best
// few samples.
template <class F>
double refined_max(F&& f, double a, double b, int n = 2048, int keep = 6) {
    RVec xs(n + 1), vs(n + 1);
    for (int i = 0; i <= n; ++i) {
        xs[i] = a + (b - a) * i / n;
        vs[i] = f(xs[i]);
    }
    std::vector<int> idx(n + 1);
    for (int i = 0; i <= n; ++i) idx[i] = i;
    std::partial_sort(idx.begin(), idx.begin() + std::min(keep, n + 1), idx.end(),
                      [&](int i, int j) { return vs[i] > vs[j]; });
    double best = vs[idx[0]];
    const double gr = 0.5 * (std::sqrt(5.0) - 1);
    for (int r = 0; r < std::min(keep, n + 1); ++r) {
        int i = idx[r];
        double lo = xs[std::max(0, i - 1)], hi = xs[std::min(n, i + 1)];
        double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
        double fc = f(c), fd = f(d);
        for (int it = 0; it < 60; ++it) {
            if (fc > fd) {
                hi = d;
                d = c;
                fd = fc;
                c = hi - gr * (hi - lo);
                fc = f(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + gr * (hi - lo);
                fd = f(d);
            }
        }
        best = std::max({best, fc, fd});
    }
    return best;
}

// sup over the real line of a 2 pi periodic field
inline double periodic_real_sup(const AnalyticField& f) {
    return refined_max([&](double x) { return std::abs(f.real_at(x)); }, -pi, pi);
}

// sup over the closed diamond (d = 1): maximum modulus puts it on the four faces
inline double diamond_sup(const AnalyticField& f, double alpha, double scale = 1.0) {
    const cplx v[4] = {cplx(scale, 0), cplx(0, scale / alpha), cplx(-scale, 0), cplx(0, -scale / alpha)};
    double best = 0;
    for (int k = 0; k < 4; ++k) {
        cplx a = v[k], b = v[(k + 1) % 4];
        best = std::max(best, refined_max([&](double s) { return std::abs(f(a + s * (b - a))); }, 0.0, 1.0, 512));
    }
    return best;
}

// ---------------------------------------------------------------- seeded families

// sum_{k <= n} a_k cos(kx) + b_k sin(kx) with n drawn in 1..max_degree and coefficients in [-1, 1].
inline std::vector<AnalyticField> random_trig_family(std::uint64_t seed, int count, int max_degree) {
    CounterRng rng(seed);
    std::uint64_t c = 0;
    std::vector<AnalyticField> out;
    for (int j = 0; j < count; ++j) {
        int n = 1 + int(rng.uniform(c++) * max_degree);
        n = std::min(n, max_degree);
        RVec a(n + 1), b(n + 1, 0.0);
        for (int k = 0; k <= n; ++k) {
            a[k] = rng.uniform(c++, -1, 1);
            if (k > 0) b[k] = rng.uniform(c++, -1, 1);
        }
        auto f = fields::trig_polynomial(a, b);
        f.name = "trig" + std::to_string(j);
        out.push_back(f);
    }
    return out;
}

// Closed diamond sample: boundary points plus the interior lattice points.
inline CVec diamond_points(double alpha, int n) {
    DiamondDomain D(alpha, 1.0, 1);
    int nb = std::max(4, (3 * n) / 5);
    CVec pts;
    for (const auto& z : boundary_sample_c(D, nb)) pts.push_back(z[0]);
    int m = 8;
    while (true) {
        CVec in;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                cplx z(2.0 * i / (m - 1) - 1, (2.0 * j / (m - 1) - 1) / alpha);
                if (diamond_contains(D, z, false)) in.push_back(z);
            }
        if (int(pts.size() + in.size()) >= n) {
            pts.insert(pts.end(), in.begin(), in.end());
            return pts;
        }
        ++m;
    }
}

// ---------------------------------------------------------------- explicit constants (d = 1)

struct ConstantRow {
    std::string field;
    double t = 0;
    double y0_sup = 0, y0e_sup = 0;
    double y1_max = 0, y2_max = 0, z1_max = 0, z2_max = 0;  // z parts already scaled by sqrt(pi t)/2
};

struct ConstantReport {
    std::vector<ConstantRow> rows;
    std::vector<Check> checks;
    int n_points = 0;
    double worst_ratio[4] = {0, 0, 0, 0};  // measured lhs / bound factor for y1, y2, z1, z2
};

inline double y2_factor(double alpha) { return 2 * std::sqrt((alpha * alpha + 1) / (alpha * alpha - 1)); }
inline double z2_factor(double alpha) { return std::sqrt((alpha * alpha + 1) / (alpha * alpha - 1)); }

inline ConstantReport estimate_constants(double alpha, const std::vector<AnalyticField>& family, const RVec& ts,
                                      int n_points, const QuadratureRule& rule = {}, double slack = 1e-6) {
    ConstantReport rep;
    CVec pts = diamond_points(alpha, n_points);
    rep.n_points = int(pts.size());
    const double f2 = y2_factor(alpha), g2 = z2_factor(alpha);
    double excess[4] = {-1e300, -1e300, -1e300, -1e300};
    for (const auto& y0 : family) {
        double s_real = periodic_real_sup(y0), s_ext = diamond_sup(y0, alpha);
        for (double t : ts) {
            std::vector<std::array<double, 4>> v(pts.size());
            parallel_for(pts.size(), [&](std::size_t i) {
                auto r = propagate_complex_1d(y0, alpha, t, pts[i], rule, true);
                double sc = std::sqrt(pi * t) / 2;
                v[i] = {std::abs(r.y1_part), std::abs(r.y2_part), sc * std::abs(r.z1_part[0]),
                        sc * std::abs(r.z2_part[0])};
            });
            ConstantRow row;
            row.field = y0.name;
            row.t = t;
            row.y0_sup = s_real;
            row.y0e_sup = s_ext;
            for (const auto& a : v) {
                row.y1_max = std::max(row.y1_max, a[0]);
                row.y2_max = std::max(row.y2_max, a[1]);
                row.z1_max = std::max(row.z1_max, a[2]);
                row.z2_max = std::max(row.z2_max, a[3]);
            }
            const double bounds[4] = {s_real, f2 * s_ext, s_real, g2 * s_ext};
            const double lhs[4] = {row.y1_max, row.y2_max, row.z1_max, row.z2_max};
            for (int j = 0; j < 4; ++j) {
                excess[j] = std::max(excess[j], lhs[j] - bounds[j]);
                if (bounds[j] > 0) rep.worst_ratio[j] = std::max(rep.worst_ratio[j], lhs[j] / bounds[j]);
            }
            rep.rows.push_back(row);
        }
    }
    const char* names[4] = {"y1_part <= ||y0||_inf", "y2_part <= 2 sqrt((a^2+1)/(a^2-1)) ||y0e||",
                            "sqrt(pi t)/2 z1_part <= ||y0||_inf", "sqrt(pi t)/2 z2_part <= sqrt((a^2+1)/(a^2-1)) ||y0e||"};
    for (int j = 0; j < 4; ++j) rep.checks.push_back(at_most(names[j], excess[j], slack));
    return rep;
}

// ---------------------------------------------------------------- closed-form oracles

// Worst relative error of the Fourier-mode oracle exp(-|k|^2 t) exp(i k.z).
inline double fourier_oracle_error(int d, double alpha, const RVec& ts, const std::vector<RVec>& ks,
                                   const std::vector<CVec>& zs, const QuadratureRule& rule = {}) {
    std::vector<std::tuple<RVec, double, CVec>> jobs;
    for (const auto& k : ks)
        for (double t : ts)
            for (const auto& z : zs) jobs.emplace_back(k, t, z);
    RVec err(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t i) {
        const auto& [k, t, z] = jobs[i];
        auto f = fields::fourier(k);
        double k2 = 0;
        cplx kz = 0;
        for (int j = 0; j < d; ++j) {
            k2 += k[j] * k[j];
            kz += k[j] * z[j];
        }
        cplx exact = std::exp(-k2 * t + I * kz);
        cplx got = propagate_any(f, alpha, t, z, rule, false).value;
        err[i] = std::abs(got - exact) / std::abs(exact);
    });
    return err.empty() ? 0.0 : *std::max_element(err.begin(), err.end());
}

// Worst relative error of T_t G(s) = G(s + t).
inline double gaussian_identity_error(int d, double alpha, double s, const RVec& ts, const std::vector<CVec>& zs,
                                      const QuadratureRule& rule = {}) {
    double worst = 0;
    auto g = fields::gaussian(s, d);
    for (double t : ts)
        for (const auto& z : zs) {
            cplx exact = kernel(HeatKernelParams{s + t, d}, z);
            cplx got = propagate_any(g, alpha, t, z, rule, false).value;
            worst = std::max(worst, std::abs(got - exact) / std::abs(exact));
        }
    return worst;
}

// Worst relative mismatch of T_{t+s} y0 and T_t(T_s y0) with T_s y0 in closed form.
inline double composition_error(int d, double alpha, const RVec& ts, const std::vector<CVec>& zs,
                                const QuadratureRule& rule = {}) {
    double worst = 0;
    const double s0 = 0.1;
    RVec k(d, 0.0);
    k[0] = 2.0;
    if (d > 1) k[1] = -1.0;
    double k2 = 0;
    for (double v : k) k2 += v * v;
    auto mode = fields::fourier(k);
    for (double t : ts)
        for (double s : {0.05, 0.2})
            for (const auto& z : zs) {
                cplx a = propagate_any(fields::gaussian(s0, d), alpha, t + s, z, rule, false).value;
                cplx b = propagate_any(fields::gaussian(s0 + s, d), alpha, t, z, rule, false).value;
                worst = std::max(worst, std::abs(a - b) / std::abs(a));
                cplx c = propagate_any(mode, alpha, t + s, z, rule, false).value;
                cplx e = std::exp(-k2 * s) * propagate_any(mode, alpha, t, z, rule, false).value;
                worst = std::max(worst, std::abs(c - e) / std::abs(c));
            }
    return worst;
}

// ---------------------------------------------------------------- case inequalities

// (1 - sqrt(A1^2 + |x'|^2))^2 - (|A1| - sqrt(1 - |x'|^2))^2, nonpositive for |x'| <= 1
inline double case2b_gap(double A1, double xp) {
    double l = 1 - std::sqrt(A1 * A1 + xp * xp);
    double r = std::abs(A1) - std::sqrt(std::max(0.0, 1 - xp * xp));
    return l * l - r * r;
}

// h_alpha(A, B1, x') for A = (A1, A'), needs (1 - alpha |B1|)^2 >= A1^2
inline double h_alpha(double alpha, double A1, const RVec& Ap, double B1, const RVec& xp) {
    double c = 1 - alpha * std::abs(B1);
    double ap2 = 0, dot = 0, xn2 = 0;
    for (std::size_t j = 0; j < Ap.size(); ++j) {
        ap2 += Ap[j] * Ap[j];
        dot += Ap[j] * xp[j];
        xn2 += xp[j] * xp[j];
    }
    return c * c - (A1 * A1 + ap2) + 2 * dot - 2 * std::sqrt(xn2) * std::sqrt(std::max(0.0, c * c - A1 * A1));
}

struct InequalityReport {
    long samples_2b = 0, samples_2c = 0;
    double worst_2b = -1e300, worst_2c = -1e300;
};

// Seeded samples: case 2b draws (A1 + i B1, x') with sqrt(A1^2 + |x'|^2) + alpha |B1| < 1; case 2c
// draws A + i B1 e1 in Omega_alpha and |x'| between sqrt((1 - alpha|B1|)^2 - A1^2) and sqrt(1 - A1^2).
inline InequalityReport case_inequalities(double alpha, long n, std::uint64_t seed) {
    InequalityReport rep;
    CounterRng rng(seed);
    std::uint64_t c = 0;
    while (rep.samples_2b < n) {
        int d = rng.uniform(c++) < 0.5 ? 2 : 3;
        RVec xp(d - 1);
        for (auto& v : xp) v = rng.uniform(c++, -1, 1);
        double A1 = rng.uniform(c++, -1, 1), B1 = rng.uniform(c++, -1, 1) / alpha;
        double r = norm2(xp);
        if (!(std::hypot(A1, r) + alpha * std::abs(B1) < 1)) continue;
        rep.worst_2b = std::max(rep.worst_2b, case2b_gap(A1, r));
        ++rep.samples_2b;
    }
    while (rep.samples_2c < n) {
        int d = rng.uniform(c++) < 0.5 ? 2 : 3;
        RVec A(d), xp(d - 1);
        for (auto& v : A) v = rng.uniform(c++, -1, 1);
        double B1 = rng.uniform(c++, -1, 1) / alpha;
        if (!(norm2(A) + alpha * std::abs(B1) < 1)) continue;
        double cc = 1 - alpha * std::abs(B1);
        double lo = std::sqrt(std::max(0.0, cc * cc - A[0] * A[0])), hi = std::sqrt(std::max(0.0, 1 - A[0] * A[0]));
        double r = rng.uniform(c++, lo, hi);
        RVec dir(d - 1);
        for (auto& v : dir) v = rng.uniform(c++, -1, 1);
        double nd = norm2(dir);
        if (nd == 0) continue;
        for (int j = 0; j < d - 1; ++j) xp[j] = r * dir[j] / nd;
        RVec Ap(A.begin() + 1, A.end());
        rep.worst_2c = std::max(rep.worst_2c, h_alpha(alpha, A[0], Ap, B1, xp));
        ++rep.samples_2c;
    }
    return rep;
}

// ---------------------------------------------------------------- analyticity constant

struct AnalyticityReport {
    RVec ts;
    RVec laplacian;  // sup over the family of t ||Lap T_t y0|| / ||y0|| per t
    double sup_coarse = 0, sup_fine = 0, change = 0;
};

// Fine grid geometric on [t_lo, t_hi] with 2 n - 1 points; the coarse grid takes every other one.
inline AnalyticityReport analyticity_sweep(double alpha, const std::vector<AnalyticField>& family, double t_lo,
                                           double t_hi, int n_coarse, const ConstantsSampling& smp,
                                           const QuadratureRule& rule = {}) {
    AnalyticityReport rep;
    const int nf = 2 * n_coarse - 1;
    for (int i = 0; i < nf; ++i) rep.ts.push_back(t_lo * std::pow(t_hi / t_lo, double(i) / (nf - 1)));
    for (int i = 0; i < nf; ++i) {
        double v = empirical_constants(alpha, family, {rep.ts[i]}, rule, smp).c_laplacian;
        rep.laplacian.push_back(v);
        rep.sup_fine = std::max(rep.sup_fine, v);
        if (i % 2 == 0) rep.sup_coarse = std::max(rep.sup_coarse, v);
    }
    rep.change = rep.sup_fine > 0 ? std::abs(rep.sup_fine - rep.sup_coarse) / rep.sup_fine : 0.0;
    return rep;
}

// ---------------------------------------------------------------- periodic Crank-Nicolson oracle

// y_t = y_xx - q y - W y_x + g(y, y_x) on [-pi, pi) with periodic boundary conditions; q and W
// time independent, g (if any) by AB2 extrapolation with a predictor-corrector first step.
struct PeriodicOracle {
    RVec x;
    CVec y;
};

inline PeriodicOracle periodic_crank_nicolson(const std::function<cplx(double)>& y0,
                                              const std::function<cplx(double)>& q,
                                              const std::function<cplx(double)>& W,
                                              const std::function<cplx(cplx, cplx)>& g, double T, int n, int steps) {
    const double h = 2 * pi / n, dt = T / steps;
    PeriodicOracle out;
    out.x.resize(n);
    for (int i = 0; i < n; ++i) out.x[i] = -pi + i * h;
    Eigen::MatrixXcd L = Eigen::MatrixXcd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        int im = (i + n - 1) % n, ip = (i + 1) % n;
        cplx w = W ? W(out.x[i]) : cplx(0.0), qq = q ? q(out.x[i]) : cplx(0.0);
        L(i, im) += 1.0 / (h * h) + w / (2 * h);
        L(i, ip) += 1.0 / (h * h) - w / (2 * h);
        L(i, i) += -2.0 / (h * h) - qq;
    }
    Eigen::MatrixXcd Id = Eigen::MatrixXcd::Identity(n, n);
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(Id - 0.5 * dt * L);
    Eigen::MatrixXcd Bm = Id + 0.5 * dt * L;
    Eigen::VectorXcd y(n);
    for (int i = 0; i < n; ++i) y(i) = y0(out.x[i]);
    auto gvec = [&](const Eigen::VectorXcd& v) {
        Eigen::VectorXcd r = Eigen::VectorXcd::Zero(n);
        if (!g) return r;
        for (int i = 0; i < n; ++i) r(i) = g(v(i), (v((i + 1) % n) - v((i + n - 1) % n)) / (2 * h));
        return r;
    };
    Eigen::VectorXcd gprev;
    for (int k = 0; k < steps; ++k) {
        Eigen::VectorXcd gc = gvec(y), G;
        if (!g)
            G = Eigen::VectorXcd::Zero(n);
        else if (k == 0) {
            Eigen::VectorXcd pred = lu.solve(Bm * y + dt * gc);
            G = 0.5 * (gc + gvec(pred));
        } else
            G = 1.5 * gc - 0.5 * gprev;
        y = lu.solve(Bm * y + dt * G);
        gprev = gc;
    }
    out.y.assign(y.data(), y.data() + n);
    return out;
}

// ---------------------------------------------------------------- smoothing certificate

struct SmoothingReport {
    double rho_full = 1, rho_half = 1, change = 1;
    bool geometric_full = false, geometric_half = false;
    int degree = 0;
    double discretization = 0;
    RVec abs_coeffs;
};

// Rough boundary control: independent uniform values in [-1, 1] at n_noise + 1 equispaced times on
// (0, T] at each end, and 0 at t = 0 so the data is compatible with the zero initial state.
// The state reached from 0 is fitted on [-window, window].
inline BoundaryTrace rough_trace(std::uint64_t seed, double T, int n_noise) {
    CounterRng rng(seed);
    BoundaryTrace u;
    for (int k = 0; k <= n_noise; ++k) {
        u.t.push_back(T * k / n_noise);
        u.left.push_back(k == 0 ? 0.0 : rng.uniform(2 * std::uint64_t(k), -1, 1));
        u.right.push_back(k == 0 ? 0.0 : rng.uniform(2 * std::uint64_t(k) + 1, -1, 1));
    }
    return u;
}

inline SmoothingReport smoothing_check(const BoundaryTrace& u, double T, double window, int degree, int cells,
                                       int steps) {
    LowerOrderTerms none;
    CVec coarse = forward_interval(u, none, std::nullopt, nullptr, T, cells, steps);
    CVec fine = forward_interval(u, none, std::nullopt, nullptr, T, 2 * cells, 4 * steps);
    RVec xs;
    CVec vs;
    double disc = 0, scale = 0;
    for (int i = 0; i <= cells; ++i) {
        double x = -1.0 + 2.0 * i / cells;
        if (std::abs(x) > window + 1e-12) continue;
        cplx v = fine[2 * i];
        xs.push_back(x);
        vs.push_back(v);
        disc = std::max(disc, std::abs(v - coarse[i]));
        scale = std::max(scale, std::abs(v));
    }
    SmoothingReport rep;
    rep.degree = degree;
    rep.discretization = scale > 0 ? disc / scale : 0.0;
    double floor = std::max(1e-10, 10 * rep.discretization);
    auto full = decay_rate(xs, vs, window, degree, floor);
    auto half = decay_rate(xs, vs, window, degree / 2, floor);
    rep.rho_full = full.rho_fit;
    rep.rho_half = half.rho_fit;
    rep.geometric_full = full.geometric;
    rep.geometric_half = half.geometric;
    rep.abs_coeffs = full.abs_coeffs;
    rep.change = rep.rho_full > 0 ? std::abs(rep.rho_half - rep.rho_full) / rep.rho_full : 0.0;
    return rep;
}

}  // namespace reachkit::verify
