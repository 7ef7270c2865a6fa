#pragma once

#include "mildsolver.hpp"
#include "nullcontrol.hpp"

#include <future>
#include <optional>

namespace reachkit {

// Cutoff value at a node of the transformed problem: the radial profile on the real line, 1 on
// the diamond (whose real section lies in B(1), where the cutoff is 1).
inline double cutoff_at(const Cutoff& eta, cplx z) { return z.imag() == 0.0 ? eta.value(z.real()) : 1.0; }

inline double cutoff_slope_at(const Cutoff& eta, cplx z) { return z.imag() == 0.0 ? eta.derivative(z.real()) : 0.0; }

// ytilde_1(x) = eta(x) y1(i x / alpha1); on Omega_{1/alpha1} the extension is y1(i z / alpha1).
inline AnalyticField build_tilde_target(const AnalyticField& y1, double alpha, double alpha1, const Cutoff& eta) {
    if (y1.dim != 1) throw Error("reach", "reachability pipeline supports d = 1");
    if (!(alpha > 0 && alpha < alpha1 && alpha1 < 1)) throw Error("reach", "need 0 < alpha < alpha1 < 1");
    if (!y1.validity.contains_domain(DiamondDomain(alpha, 1.0, 1)))
        throw Error("reach", "target validity too small: not declared holomorphic on Omega_alpha");
    if (eta.r_inner < 1.0 - 1e-12 || eta.r_outer >= alpha1 / alpha)
        throw Error("reach", "cutoff must equal 1 on B(1) and vanish beyond alpha1/alpha");
    AnalyticField f;
    f.dim = 1;
    f.validity = DiamondDomain(1.0 / alpha1, 1.0, 1);
    f.kind = FieldKind::composite;
    f.name = "tilde(" + y1.name + ")";
    f.interp_error = y1.interp_error;
    f.ext = [y1, alpha1](const cplx* z) {
        cplx w = I * z[0] / alpha1;
        return y1.ext(&w);
    };
    f.real_eval = [y1, alpha1, eta](const double* x) {
        double e = eta.value(*x);
        if (e == 0.0) return cplx(0.0);
        cplx w = I * (*x) / alpha1;
        return e * y1.ext(&w);
    };
    if (y1.grad)
        f.grad = [y1, alpha1, eta](const cplx* z, cplx* g) {
            cplx w = I * z[0] / alpha1, d;
            y1.grad(&w, &d);
            double e = cutoff_at(eta, z[0]), de = cutoff_slope_at(eta, z[0]);
            g[0] = (e == 0.0 && de == 0.0) ? cplx(0.0) : e * (I / alpha1) * d + de * y1.ext(&w);
        };
    return f;
}

namespace detail {

// c * eta(x) * F(i x / alpha1) as a field on Omega_{1/alpha1}
inline AnalyticField wick_pullback(const AnalyticField& F, double alpha1, const Cutoff& eta, cplx c,
                                   const std::string& name) {
    AnalyticField f;
    f.dim = 1;
    f.validity = DiamondDomain(1.0 / alpha1, 1.0, 1);
    f.kind = FieldKind::composite;
    f.name = name;
    f.ext = [F, alpha1, c](const cplx* z) {
        cplx w = I * z[0] / alpha1;
        return c * F.ext(&w);
    };
    f.real_eval = [F, alpha1, c, eta](const double* x) {
        double e = eta.value(*x);
        if (e == 0.0) return cplx(0.0);
        cplx w = I * (*x) / alpha1;
        return c * e * F.ext(&w);
    };
    return f;
}

inline void check_coefficient_reach(const AnalyticField& F, double alpha1, const Cutoff& eta) {
    if (F.dim != 1) throw Error("reach", "coefficients must be one-dimensional");
    cplx far = I * eta.r_outer / alpha1;
    if (!diamond_contains(F.validity, far, true) && F.validity.alpha > 1e-6)
        throw Error("reach", "coefficient validity too small for the Wick rotation");
}

}  // namespace detail

// Original time of transformed time tau: t = (T1 - tau) / alpha1^2 with T1 = alpha1^2 T.
inline double original_time(double tau, double alpha1, double T) { return T - tau / (alpha1 * alpha1); }

// qtilde = -eta q / alpha1^2, Wtilde = i eta W / alpha1, both at (original time, i x / alpha1).
inline LowerOrderTerms transform_coefficients(const LowerOrderTerms& lot, double alpha1, double T, const Cutoff& eta) {
    if (!(alpha1 > 0 && alpha1 < 1)) throw Error("reach", "alpha1 must lie in (0,1)");
    LowerOrderTerms out;
    const double a2 = alpha1 * alpha1;
    if (lot.q) {
        detail::check_coefficient_reach(lot.q(0.0), alpha1, eta);
        out.q = [q = lot.q, alpha1, T, eta, a2](double tau) {
            return detail::wick_pullback(q(original_time(tau, alpha1, T)), alpha1, eta, -1.0 / a2, "qtilde");
        };
    }
    if (lot.W) {
        detail::check_coefficient_reach(lot.W(0.0), alpha1, eta);
        out.W = [W = lot.W, alpha1, T, eta](double tau) {
            return detail::wick_pullback(W(original_time(tau, alpha1, T)), alpha1, eta, I / alpha1, "Wtilde");
        };
    }
    out.M = lot.M / a2;
    return out;
}

// gtilde(tau, z, s, sd) = -eta g(t, i z / alpha1, s, -i alpha1 sd) / alpha1^2.
inline SemilinearTerm transform_semilinearity(const SemilinearTerm& g, double alpha1, double T, const Cutoff& eta) {
    if (!g.g) throw Error("reach", "semilinear term has no oracle");
    if (!(alpha1 > 0 && alpha1 < 1)) throw Error("reach", "alpha1 must lie in (0,1)");
    SemilinearTerm out;
    const double a2 = alpha1 * alpha1;
    out.g = [gg = g.g, alpha1, a2, T, eta](double tau, cplx z, cplx s, cplx sd) {
        double e = cutoff_at(eta, z);
        if (e == 0.0) return cplx(0.0);
        return -e * gg(original_time(tau, alpha1, T), I * z / alpha1, s, -I * alpha1 * sd) / a2;
    };
    // |sd| <= eps / alpha1 keeps -i alpha1 sd in the original ball; eps is the smaller radius
    out.epsilon = g.epsilon;
    out.lipschitz_C0 = g.lipschitz_C0 / a2;
    if (std::abs(out.g(0.0, 0.3, 0.0, 0.0)) > 1e-14 || std::abs(out.g(0.5 * a2 * T, cplx(0.2, 0.1), 0.0, 0.0)) > 1e-14)
        throw Error("reach", "ball bookkeeping violation: gtilde(., ., 0, 0) != 0");
    return out;
}

// ---------------------------------------------------------------- problem and options

struct ReachProblem {
    AnalyticField y1;                 // target, holomorphic on Omega_alpha
    double alpha = 0.5;
    double alpha1 = 0;                // 0 selects the midpoint of (max(alpha, alpha0), 1)
    double alpha0 = 0;                // opening of the coefficient analyticity diamond
    double T = 0.5;
    LowerOrderTerms lot;
    std::optional<SemilinearTerm> g;  // semilinear mode when set
    std::optional<AnalyticField> y0;  // initial datum on (-1, 1), zero when unset
    double delta_alpha = 0;           // smallness budget for ||y1||_{W^{1,inf}(Omega_alpha)}; 0 = unchecked
    double delta0 = 0;                // smallness budget for ||y0||_{W^{1,inf}}; 0 = unchecked

    double resolved_alpha1() const {
        if (alpha1 > 0) return alpha1;
        return 0.5 * (std::max(alpha, alpha0) + 1.0);
    }
};

struct ReachOptions {
    double eta_margin = 0.05;
    MildOptions mild = [] {
        MildOptions o;
        o.steps = 48;
        return o;
    }();
    double control_inner = 2.0;     // control hats live in control_inner <= |x| <= control_outer
    double control_outer = 4.0;
    double control_spacing = 0.25;
    double penalty = 1e-12;         // relative to the largest eigenvalue of the observation Gramian
    double fixed_point_tol = 1e-9;  // relative change of the transformed trajectory
    int max_fixed_point = 60;
    int verify_cells = 100;         // coarse forward resolution; the fine one doubles both
    int verify_steps = 400;
    double eval_window = 0.9;
    int decay_degree = 24;
    // phase 1 of the nonzero-initial-data strategy
    double phase1_L = 3.0;
    double phase1_h = 0.02;
    double phase1_dt = 0.005;
    double phase1_omega = 1.5;
    double phase1_tol = 1e-2;       // relative L2 norm of the phase-1 final state on (-1, 1)
    HumOptions hum;
};

inline Cutoff reach_cutoff(double alpha, double alpha0, double alpha1, double margin) {
    double r = std::min(alpha1 / std::max(alpha, alpha0) - margin, 2.0);
    if (!(r > 1.0)) throw Error("reach", "alpha1 too close to alpha: no room for the cutoff collar");
    return cutoff(CutoffProfile::quintic, 1.0, r);
}

// ---------------------------------------------------------------- transformed control

struct TildeControl {
    std::shared_ptr<const MildEngine> engine;
    std::vector<CVec> y, gy;        // node values per step
    std::vector<CVec> coeff;        // diamond fits per step
    RVec hat_centers;
    Eigen::MatrixXcd c;             // hat x time-node coefficients
    double T1 = 0, alpha1 = 0;
    double free_obs = 0;            // max |observation| of the uncontrolled final state
    double final_obs = 0;           // same with the control
    double penalty_used = 0;
    int fixed_point_iterations = 0;
    double fixed_point_change = 0;

    cplx at(int k, cplx z) const {
        if (z.imag() == 0.0) return engine->eval(y[k], coeff[k], z);
        return fields::chebyshev_eval(coeff[k], 1.0, z);
    }
    double hat(double x, int j) const {
        double s = std::abs(x - hat_centers[j]) / spacing;
        return s < 1 ? 1 - s : 0.0;
    }
    double spacing = 0.25;
};

namespace detail {

inline RVec hat_centers(const ReachOptions& o) {
    RVec c;
    const int m = int(std::lround((o.control_outer - o.control_inner) / o.control_spacing));
    if (m < 2 || std::abs(m * o.control_spacing - (o.control_outer - o.control_inner)) > 1e-9)
        throw Error("reach", "control spacing must divide the control annulus");
    for (int j = 1; j < m; ++j) {
        double x = o.control_inner + j * o.control_spacing;
        c.push_back(-x);
        c.push_back(x);
    }
    std::sort(c.begin(), c.end());
    return c;
}

}  // namespace detail

// Penalized HUM for the transformed problem, written in the mild model: controls are hats in
// space times hats in time supported in control_inner <= |x| <= control_outer; the terminal
// state is observed on the real fit nodes and on the boundary of Omega_{1/alpha1}.
// Lower-order and semilinear terms enter as a source updated by fixed-point iteration.
inline TildeControl tilde_null_control(const AnalyticField& yt1, double alpha1, double T1, const LowerOrderTerms& lt,
                                       const std::optional<SemilinearTerm>& gt, const ReachOptions& o,
                                       double active_radius = 2.0) {
    if (o.control_inner < 2.0 - 1e-12) throw Error("reach", "control support must stay outside B(2)");
    TildeControl tc;
    tc.alpha1 = alpha1;
    tc.T1 = T1;
    tc.spacing = o.control_spacing;
    tc.hat_centers = detail::hat_centers(o);
    MildOptions mo = o.mild;
    mo.margin = std::max(mo.margin, o.control_outer + 1.0 - (1 + mo.rule.halfwidth * std::sqrt(T1)));
    tc.engine = make_engine(1.0 / alpha1, T1, mo);
    const MildEngine& E = *tc.engine;
    const int N = E.steps(), n = E.size(), nr = E.n_real(), nh = int(tc.hat_centers.size());

    std::vector<int> obs;
    for (int i = 0; i < n; ++i)
        if (i >= nr || std::abs(E.node(i).real()) <= 1.0 + 1e-12) obs.push_back(i);
    const int no = int(obs.size());

    std::vector<CVec> S, gS;
    E.semigroup(yt1, S, gS);

    // Hat responses. The engine is time invariant without lower-order terms, so a source
    // impulse at time node m reaches step N as the Fnew-injection propagated N - m + 1 steps
    // plus the Fold-injection propagated N - m steps.
    std::vector<CVec> phi(nh, CVec(n, 0.0));
    for (int j = 0; j < nh; ++j)
        for (int i = 0; i < nr; ++i) phi[j][i] = tc.hat(E.node(i).real(), j);
    std::vector<Eigen::MatrixXcd> RA(nh), RB(nh);
    parallel_for(std::size_t(2 * nh), [&](std::size_t idx) {
        int j = int(idx / 2);
        bool as_new = idx % 2 == 0;
        Eigen::MatrixXcd& R = as_new ? RA[j] : RB[j];
        R.setZero(no, N + 1);
        CVec zero(n, 0.0), D(n, 0.0), Dn, gD;
        E.step(zero, as_new ? zero : phi[j], as_new ? phi[j] : zero, Dn, gD);
        for (int r = 1; r <= N; ++r) {
            for (int a = 0; a < no; ++a) R(a, r) = Dn[obs[a]];
            if (r == N) break;
            D = Dn;
            E.step(D, zero, zero, Dn, gD);
        }
    });
    const int ncols = nh * (N + 1);
    Eigen::MatrixXcd P(no, ncols);
    for (int j = 0; j < nh; ++j)
        for (int m = 0; m <= N; ++m) {
            Eigen::VectorXcd col = Eigen::VectorXcd::Zero(no);
            if (m >= 1) col += RA[j].col(N - m + 1);
            if (m <= N - 1) col += RB[j].col(N - m);
            P.col(j * (N + 1) + m) = col;
        }
    Eigen::MatrixXcd G = P * P.adjoint();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G);
    if (es.info() != Eigen::Success) throw Error("reach", "observation Gramian eigensolver failed");
    const double lmax = std::max(es.eigenvalues().maxCoeff(), 1e-300);
    tc.penalty_used = o.penalty * lmax;
    Eigen::VectorXd inv = (es.eigenvalues().array().max(0.0) + tc.penalty_used).inverse();

    auto qv = sample_nodes(E, lt.q), Wv = sample_nodes(E, lt.W);
    const bool nonlinear = bool(lt.q) || bool(lt.W) || gt.has_value();
    std::vector<CVec> Nsrc(N + 1, CVec(n, 0.0));

    auto run = [&](const std::vector<CVec>& F, std::vector<CVec>& y, std::vector<CVec>& gy) {
        y = S;
        gy = gS;
        CVec D(n, 0.0), Dn, gD;
        for (int k = 1; k <= N; ++k) {
            E.step(D, F[k - 1], F[k], Dn, gD);
            for (int i = 0; i < n; ++i) {
                y[k][i] += Dn[i];
                gy[k][i] += gD[i];
            }
            D = Dn;
        }
    };
    auto guard = [&](const std::vector<CVec>& y, const std::vector<CVec>& gy) {
        if (!gt) return;
        for (int k = 0; k <= N; ++k)
            for (int i = 0; i < n; ++i) {
                if (i < nr && std::abs(E.node(i).real()) >= active_radius) continue;
                if (std::abs(y[k][i]) > gt->epsilon || std::abs(gy[k][i]) > gt->epsilon / alpha1)
                    throw Error("reach", "data not small enough: transformed trajectory left the eps-ball");
            }
    };

    std::vector<CVec> y, gy;
    double scale = 0;
    for (int it = 1; it <= o.max_fixed_point; ++it) {
        std::vector<CVec> yf, gyf;
        run(Nsrc, yf, gyf);
        Eigen::VectorXcd f(no);
        for (int a = 0; a < no; ++a) f(a) = yf[N][obs[a]];
        if (it == 1) tc.free_obs = f.cwiseAbs().maxCoeff();
        Eigen::VectorXcd lam = -(es.eigenvectors() * (inv.asDiagonal() * (es.eigenvectors().adjoint() * f)));
        Eigen::VectorXcd cv = P.adjoint() * lam;
        tc.c.resize(nh, N + 1);
        for (int j = 0; j < nh; ++j)
            for (int m = 0; m <= N; ++m) tc.c(j, m) = cv(j * (N + 1) + m);
        std::vector<CVec> F = Nsrc;
        for (int k = 0; k <= N; ++k)
            for (int j = 0; j < nh; ++j)
                for (int i = 0; i < nr; ++i) F[k][i] += tc.c(j, k) * phi[j][i];
        std::vector<CVec> yn, gyn;
        run(F, yn, gyn);
        guard(yn, gyn);
        tc.fixed_point_iterations = it;
        double change = 0;
        if (!y.empty())
            for (int k = 0; k <= N; ++k) {
                CVec d(n), dg(n);
                for (int i = 0; i < n; ++i) {
                    d[i] = yn[k][i] - y[k][i];
                    dg[i] = gyn[k][i] - gy[k][i];
                }
                change = std::max(change, E.norm(d) + E.norm(dg));
            }
        for (int k = 0; k <= N; ++k) scale = std::max(scale, E.norm(yn[k]));
        y = std::move(yn);
        gy = std::move(gyn);
        tc.fixed_point_change = change;
        if (!nonlinear) break;
        if (it > 1 && change <= o.fixed_point_tol * (1 + scale)) break;
        if (it == o.max_fixed_point)
            throw Error("reach", "fixed point for the transformed source did not converge; last change " +
                                     std::to_string(change));
        for (int k = 0; k <= N; ++k) {
            double tau = k * E.dt();
            for (int i = 0; i < n; ++i) {
                cplx s = 0;
                if (lt.q) s -= qv[k][i] * y[k][i];
                if (lt.W) s -= Wv[k][i] * gy[k][i];
                if (gt) s += gt->g(tau, E.node(i), y[k][i], gy[k][i]);
                Nsrc[k][i] = s;
            }
        }
    }
    tc.y = std::move(y);
    tc.gy = std::move(gy);
    tc.final_obs = 0;
    for (int a = 0; a < no; ++a) tc.final_obs = std::max(tc.final_obs, std::abs(tc.y[N][obs[a]]));
    for (int k = 0; k <= N; ++k) tc.coeff.push_back(E.fit(tc.y[k]));
    return tc;
}

// ---------------------------------------------------------------- boundary trace

struct BoundaryTrace {
    RVec t;                 // increasing
    CVec left, right;       // u(t, -1), u(t, 1)

    static cplx interp(const RVec& ts, const CVec& v, double t) {
        const int N = int(ts.size()) - 1;
        if (N < 1) return v.empty() ? cplx(0.0) : v[0];
        t = std::clamp(t, ts.front(), ts.back());
        int k = int(std::upper_bound(ts.begin(), ts.end(), t) - ts.begin()) - 1;
        k = std::clamp(k, 0, N - 1);
        if (N < 3) {
            double s = (t - ts[k]) / (ts[k + 1] - ts[k]);
            return (1 - s) * v[k] + s * v[k + 1];
        }
        int k0 = std::clamp(k - 1, 0, N - 3);
        cplx s = 0;
        for (int a = 0; a < 4; ++a) {
            double L = 1;
            for (int b = 0; b < 4; ++b)
                if (b != a) L *= (t - ts[k0 + b]) / (ts[k0 + a] - ts[k0 + b]);
            s += L * v[k0 + a];
        }
        return s;
    }
    cplx at_left(double tt) const { return interp(t, left, tt); }
    cplx at_right(double tt) const { return interp(t, right, tt); }

    double sup() const {
        double m = 0;
        for (auto v : left) m = std::max(m, std::abs(v));
        for (auto v : right) m = std::max(m, std::abs(v));
        return m;
    }

    // concatenation with `later` shifted by `offset`; the shared endpoint keeps the later value
    BoundaryTrace then(const BoundaryTrace& later, double offset) const {
        BoundaryTrace out = *this;
        if (!out.t.empty() && !later.t.empty() && std::abs(out.t.back() - (later.t.front() + offset)) < 1e-12) {
            out.t.pop_back();
            out.left.pop_back();
            out.right.pop_back();
        }
        for (std::size_t k = 0; k < later.t.size(); ++k) {
            out.t.push_back(later.t[k] + offset);
            out.left.push_back(later.left[k]);
            out.right.push_back(later.right[k]);
        }
        return out;
    }

    BoundaryTrace scaled(cplx c) const {
        BoundaryTrace out = *this;
        for (auto& v : out.left) v *= c;
        for (auto& v : out.right) v *= c;
        return out;
    }
};

// u(t, -+1) = ytilde(T1 - alpha1^2 t, +-i alpha1) on the engine steps.
inline BoundaryTrace extract_trace(const TildeControl& tc, double T) {
    BoundaryTrace u;
    const int N = tc.engine->steps();
    for (int k = N; k >= 0; --k) {
        u.t.push_back(original_time(k * tc.engine->dt(), tc.alpha1, T));
        u.left.push_back(tc.at(k, I * tc.alpha1));
        u.right.push_back(tc.at(k, -I * tc.alpha1));
    }
    u.t.front() = 0.0;
    u.t.back() = T;
    return u;
}

// ---------------------------------------------------------------- forward verification

struct ForwardReport {
    RVec x;                       // coarse nodes on [-1, 1]
    CVec coarse, fine, extrapolated;
    double linf_rel_coarse = 0, linf_rel_fine = 0, linf_rel = 0, l2_rel = 0;
    double target_sup = 0;
};

namespace detail {

// Complex tridiagonal solve: a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i.
inline void thomas(const CVec& a, CVec b, const CVec& c, CVec& d) {
    const std::size_t n = d.size();
    for (std::size_t i = 1; i < n; ++i) {
        cplx m = a[i] / b[i - 1];
        b[i] -= m * c[i - 1];
        d[i] -= m * d[i - 1];
    }
    d[n - 1] /= b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) d[i] = (d[i] - c[i] * d[i + 1]) / b[i];
}

}  // namespace detail

// Crank-Nicolson on (-1, 1) with Dirichlet data u; the semilinear term is extrapolated (AB2, with a
// predictor-corrector first step). Returns all nodes at the final time.
inline CVec forward_interval(const BoundaryTrace& u, const LowerOrderTerms& lot, const std::optional<SemilinearTerm>& g,
                             const std::function<cplx(double)>& y0, double T, int cells, int steps) {
    if (cells < 4 || steps < 1) throw Error("reach", "forward solver needs cells >= 4 and steps >= 1");
    const double h = 2.0 / cells, dt = T / steps;
    const int n = cells - 1;
    RVec xs(cells + 1);
    for (int i = 0; i <= cells; ++i) xs[i] = -1.0 + i * h;
    auto coefs = [&](double t, CVec& q, CVec& w) {
        q.assign(cells + 1, 0.0);
        w.assign(cells + 1, 0.0);
        if (lot.q) {
            AnalyticField f = lot.q(t);
            for (int i = 0; i <= cells; ++i) q[i] = f.real_at(xs[i]);
        }
        if (lot.W) {
            AnalyticField f = lot.W(t);
            for (int i = 0; i <= cells; ++i) w[i] = f.real_at(xs[i]);
        }
    };
    // (L y)_i = y_xx - q y - W y_x at interior i
    auto apply_L = [&](const CVec& y, const CVec& q, const CVec& w, int i) {
        return (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (h * h) - q[i] * y[i] - w[i] * (y[i + 1] - y[i - 1]) / (2 * h);
    };
    auto gvec = [&](double t, const CVec& y) {
        CVec out(cells + 1, 0.0);
        if (!g) return out;
        for (int i = 1; i < cells; ++i) out[i] = g->g(t, xs[i], y[i], (y[i + 1] - y[i - 1]) / (2 * h));
        return out;
    };
    CVec y(cells + 1);
    for (int i = 1; i < cells; ++i) y[i] = y0 ? y0(xs[i]) : cplx(0.0);
    y[0] = u.at_left(0.0);
    y[cells] = u.at_right(0.0);
    CVec q0, w0, q1, w1;
    coefs(0.0, q0, w0);
    CVec gprev;
    auto cn_step = [&](double t0, const CVec& yold, const CVec& G, CVec& ynew) {
        double t1 = t0 + dt;
        ynew.assign(cells + 1, 0.0);
        ynew[0] = u.at_left(t1);
        ynew[cells] = u.at_right(t1);
        CVec a(n), b(n), c(n), d(n);
        for (int r = 0; r < n; ++r) {
            int i = r + 1;
            cplx lo = 1.0 / (h * h) + w1[i] / (2 * h), hi = 1.0 / (h * h) - w1[i] / (2 * h);
            cplx di = -2.0 / (h * h) - q1[i];
            a[r] = -0.5 * dt * lo;
            b[r] = 1.0 - 0.5 * dt * di;
            c[r] = -0.5 * dt * hi;
            d[r] = yold[i] + 0.5 * dt * apply_L(yold, q0, w0, i) + dt * G[i];
            if (r == 0) d[r] += 0.5 * dt * lo * ynew[0];
            if (r == n - 1) d[r] += 0.5 * dt * hi * ynew[cells];
        }
        detail::thomas(a, b, c, d);
        for (int r = 0; r < n; ++r) ynew[r + 1] = d[r];
    };
    for (int k = 0; k < steps; ++k) {
        double t0 = k * dt;
        coefs(t0 + dt, q1, w1);
        CVec gcur = gvec(t0, y), G(cells + 1, 0.0), ynew;
        if (g) {
            if (k == 0) {
                CVec pred;
                cn_step(t0, y, gcur, pred);
                CVec gp = gvec(t0 + dt, pred);
                for (int i = 0; i <= cells; ++i) G[i] = 0.5 * (gcur[i] + gp[i]);
            } else {
                for (int i = 0; i <= cells; ++i) G[i] = 1.5 * gcur[i] - 0.5 * gprev[i];
            }
        }
        cn_step(t0, y, G, ynew);
        gprev = std::move(gcur);
        y = std::move(ynew);
        q0 = q1;
        w0 = w1;
    }
    return y;
}

// Final state at two resolutions plus Richardson extrapolation, compared with the target on
// |x| <= window.
inline ForwardReport verify_forward(const BoundaryTrace& u, const ReachProblem& pb, const ReachOptions& o) {
    std::function<cplx(double)> y0;
    if (pb.y0) y0 = [f = *pb.y0](double x) { return f.real_at(x); };
    auto coarse = std::async(std::launch::async, [&] {
        return forward_interval(u, pb.lot, pb.g, y0, pb.T, o.verify_cells, o.verify_steps);
    });
    CVec fine = forward_interval(u, pb.lot, pb.g, y0, pb.T, 2 * o.verify_cells, 2 * o.verify_steps);
    ForwardReport r;
    r.coarse = coarse.get();
    const int cells = o.verify_cells;
    for (int i = 0; i <= cells; ++i) {
        r.x.push_back(-1.0 + 2.0 * i / cells);
        r.fine.push_back(fine[2 * i]);
        r.extrapolated.push_back((4.0 * fine[2 * i] - r.coarse[i]) / 3.0);
    }
    double ec = 0, ef = 0, ee = 0, s2e = 0, s2t = 0;
    for (int i = 0; i <= cells; ++i) {
        double x = r.x[i];
        if (std::abs(x) > o.eval_window + 1e-12) continue;
        cplx tv = pb.y1.real_at(x);
        r.target_sup = std::max(r.target_sup, std::abs(tv));
        ec = std::max(ec, std::abs(r.coarse[i] - tv));
        ef = std::max(ef, std::abs(r.fine[i] - tv));
        ee = std::max(ee, std::abs(r.extrapolated[i] - tv));
        s2e += std::norm(r.extrapolated[i] - tv);
        s2t += std::norm(tv);
    }
    auto rel = [&](double e) { return r.target_sup > 0 ? e / r.target_sup : e; };
    r.linf_rel_coarse = rel(ec);
    r.linf_rel_fine = rel(ef);
    r.linf_rel = rel(ee);
    r.l2_rel = s2t > 0 ? std::sqrt(s2e / s2t) : std::sqrt(s2e);
    return r;
}

// ---------------------------------------------------------------- certificate

struct ReachCertificate {
    BoundaryTrace u;
    ForwardReport forward;
    double linf_rel = 0, l2_rel = 0;
    double control_norm = 0;        // sup |u|
    double target_norm = 0;         // ||y1||_{L^inf(Omega_alpha)}
    double control_ratio = 0;       // control_norm / target_norm
    DecayReport decay;
    double alpha1 = 0, T1 = 0;
    double initial_residual = 0;    // sup |ytilde(T1, -i alpha1 x)| on [-1, 1]
    double endpoint_residual = 0;   // sup |ytilde(0, -i alpha1 x) - y1(x)| on [-1, 1]
    double free_obs = 0, final_obs = 0;
    int fixed_point_iterations = 0;
    double phase1_final = 0;        // relative L2 norm after phase 1 (nonzero initial data only)
    int phase1_cg = 0;
    std::shared_ptr<const TildeControl> tilde;
};

namespace detail {

inline double target_sup_norm(const AnalyticField& y1, double alpha) {
    return xalpha_norm(y1, DiamondDomain(alpha, 1.0, 1), 1.0, 2000).diamond_sup;
}

inline void check_target_smallness(const ReachProblem& pb) {
    if (!(pb.delta_alpha > 0)) return;
    DiamondDomain D(pb.alpha, 1.0, 1);
    double s = xalpha_norm(pb.y1, D, 1.0, 2000).diamond_sup;
    if (pb.y1.grad) s += xalpha_norm(fields::derivative(pb.y1, 0), D, 1.0, 2000).diamond_sup;
    if (s > pb.delta_alpha)
        throw Error("reach", "data not small enough: ||y1||_{W^{1,inf}(Omega_alpha)} = " + std::to_string(s) +
                                 " exceeds delta_alpha");
}

// Coefficients below the verification accuracy carry no information, so they set the floor.
inline DecayReport achieved_decay(const ForwardReport& f, double window, int degree) {
    RVec xs;
    CVec vs;
    for (std::size_t i = 0; i < f.x.size(); ++i)
        if (std::abs(f.x[i]) <= window + 1e-12) {
            xs.push_back(f.x[i]);
            vs.push_back(f.extrapolated[i]);
        }
    return decay_rate(xs, vs, window, degree, std::max(1e-10, 10 * std::abs(f.linf_rel_fine - f.linf_rel)));
}

}  // namespace detail

// Zero initial data: transform, control the transformed problem, pull back and verify.
inline ReachCertificate synthesize(const ReachProblem& pb, const ReachOptions& o = {}) {
    if (pb.y1.dim != 1) throw Error("reach", "reachability pipeline supports d = 1");
    if (!(pb.T > 0)) throw Error("reach", "horizon must be positive");
    const double a1 = pb.resolved_alpha1();
    if (!(a1 > std::max(pb.alpha, pb.alpha0) && a1 < 1)) throw Error("reach", "alpha1 must lie in (max(alpha, alpha0), 1)");
    if (pb.g) detail::check_target_smallness(pb);
    Cutoff eta = reach_cutoff(pb.alpha, pb.alpha0, a1, o.eta_margin);
    const double T1 = a1 * a1 * pb.T;
    AnalyticField yt1 = build_tilde_target(pb.y1, pb.alpha, a1, eta);
    LowerOrderTerms lt = transform_coefficients(pb.lot, a1, pb.T, eta);
    std::optional<SemilinearTerm> gt;
    if (pb.g) gt = transform_semilinearity(*pb.g, a1, pb.T, eta);
    auto tc = std::make_shared<TildeControl>(tilde_null_control(yt1, a1, T1, lt, gt, o, eta.r_outer));

    ReachCertificate cert;
    cert.alpha1 = a1;
    cert.T1 = T1;
    cert.free_obs = tc->free_obs;
    cert.final_obs = tc->final_obs;
    cert.fixed_point_iterations = tc->fixed_point_iterations;
    const int N = tc->engine->steps();
    for (int i = 0; i <= 40; ++i) {
        double x = -1.0 + i / 20.0;
        cert.initial_residual = std::max(cert.initial_residual, std::abs(tc->at(N, -I * a1 * x)));
        cert.endpoint_residual = std::max(cert.endpoint_residual, std::abs(tc->at(0, -I * a1 * x) - pb.y1.real_at(x)));
    }
    cert.u = extract_trace(*tc, pb.T);
    cert.tilde = tc;
    cert.forward = verify_forward(cert.u, pb, o);
    cert.linf_rel = cert.forward.linf_rel;
    cert.l2_rel = cert.forward.l2_rel;
    cert.control_norm = cert.u.sup();
    cert.target_norm = detail::target_sup_norm(pb.y1, pb.alpha);
    cert.control_ratio = cert.target_norm > 0 ? cert.control_norm / cert.target_norm : 0.0;
    cert.decay = detail::achieved_decay(cert.forward, o.eval_window, o.decay_degree);
    return cert;
}

// Nonzero initial data: grid null control on (0, T/2) read off at x = +-1, then synthesize on (T/2, T).
inline ReachCertificate reach_with_initial(const ReachProblem& pb, const ReachOptions& o = {}) {
    if (!pb.y0) return synthesize(pb, o);
    const AnalyticField& y0 = *pb.y0;
    if (pb.g && pb.delta0 > 0) {
        double s = 0;
        for (int i = 0; i <= 400; ++i) {
            double x = -1.0 + i / 200.0;
            s = std::max(s, std::abs(y0.real_at(x)));
        }
        double ds = 0;
        for (int i = 0; i < 400; ++i) {
            double x = -1.0 + i / 200.0, hh = 1.0 / 200.0;
            ds = std::max(ds, std::abs(y0.real_at(x + hh) - y0.real_at(x)) / hh);
        }
        if (s + ds > pb.delta0) throw Error("reach", "data not small enough: ||y0||_{W^{1,inf}} exceeds delta0");
    }
    const double Th = 0.5 * pb.T;
    GridProblem P;
    P.L = o.phase1_L;
    P.h = o.phase1_h;
    P.dt = o.phase1_dt;
    P.T = Th;
    P.omega_inner = o.phase1_omega;
    if (pb.lot.q) P.q = [q = pb.lot.q](double t, double x) { return q(t).real_at(x); };
    if (pb.lot.W) P.W = [W = pb.lot.W](double t, double x) { return W(t).real_at(x); };
    P.validate();
    CVec v0 = sample_interior(P, [&](double x) { return std::abs(x) < 1.0 ? y0.real_at(x) : cplx(0.0); });
    ControlSolution sol = hum_control(P, v0, nullptr, o.hum);
    if (pb.g) {
        // the semilinear term enters phase 1 as a source frozen at the previous iterate
        const int n = P.interior();
        for (int it = 0; it < 30; ++it) {
            std::vector<CVec> f(P.intervals(), CVec(n, 0.0));
            for (int k = 0; k < P.intervals(); ++k)
                for (int i = 1; i <= n; ++i) {
                    double t = (k + 0.5) * P.dt;
                    cplx yv = 0.5 * (sol.Y.v[k][i] + sol.Y.v[k + 1][i]);
                    cplx yx = 0.25 * (sol.Y.v[k][i + 1] - sol.Y.v[k][i - 1] + sol.Y.v[k + 1][i + 1] - sol.Y.v[k + 1][i - 1]) / P.h;
                    f[k][i - 1] = pb.g->g(t, P.x(i), yv, yx);
                }
            ControlSolution next = hum_control(P, v0, &f, o.hum);
            double change = 0, scale = 0;
            for (std::size_t k = 0; k < next.Y.v.size(); ++k)
                for (std::size_t i = 0; i < next.Y.v[k].size(); ++i) {
                    change = std::max(change, std::abs(next.Y.v[k][i] - sol.Y.v[k][i]));
                    scale = std::max(scale, std::abs(next.Y.v[k][i]));
                }
            sol = std::move(next);
            if (change <= 1e-10 * (1 + scale)) break;
            if (it == 29) throw Error("reach", "phase-1 semilinear fixed point did not converge");
        }
    }
    BoundaryTrace u1;
    const int i_left = int(std::lround((P.L - 1.0) / P.h)), i_right = int(std::lround((P.L + 1.0) / P.h));
    double fin = 0, ini = 0;
    for (int k = 0; k <= P.intervals(); ++k) {
        u1.t.push_back(k * P.dt);
        u1.left.push_back(sol.Y.v[k][i_left]);
        u1.right.push_back(sol.Y.v[k][i_right]);
    }
    for (int i = i_left; i <= i_right; ++i) {
        fin += std::norm(sol.Y.v.back()[i]);
        ini += std::norm(sol.Y.v.front()[i]);
    }
    double phase1 = ini > 0 ? std::sqrt(fin / ini) : 0.0;
    if (phase1 > o.phase1_tol)
        throw Error("reach", "phase-1 final norm " + std::to_string(phase1) + " above tolerance");

    ReachProblem p2 = pb;
    p2.y0.reset();
    p2.T = Th;
    if (pb.lot.q) p2.lot.q = [q = pb.lot.q, Th](double t) { return q(t + Th); };
    if (pb.lot.W) p2.lot.W = [W = pb.lot.W, Th](double t) { return W(t + Th); };
    if (pb.g) {
        SemilinearTerm g2 = *pb.g;
        g2.g = [gg = pb.g->g, Th](double t, cplx x, cplx s, cplx sd) { return gg(t + Th, x, s, sd); };
        p2.g = g2;
    }
    ReachCertificate cert;
    bool zero_target = true;
    for (int i = 0; i <= 20 && zero_target; ++i) zero_target = pb.y1.real_at(-1.0 + i / 10.0) == 0.0;
    if (zero_target) {
        // nothing to reach: the second half keeps the boundary at zero
        BoundaryTrace u2;
        for (int k = 0; k <= P.intervals(); ++k) u2.t.push_back(k * P.dt);
        u2.left = u2.right = CVec(u2.t.size(), 0.0);
        cert.u = u2;
        cert.alpha1 = pb.resolved_alpha1();
    } else {
        cert = synthesize(p2, o);
    }
    cert.u = u1.then(cert.u, Th);
    cert.phase1_final = phase1;
    cert.phase1_cg = sol.cg_iterations;
    cert.forward = verify_forward(cert.u, pb, o);
    cert.linf_rel = cert.forward.linf_rel;
    cert.l2_rel = cert.forward.l2_rel;
    cert.control_norm = cert.u.sup();
    cert.target_norm = detail::target_sup_norm(pb.y1, pb.alpha);
    cert.control_ratio = cert.target_norm > 0 ? cert.control_norm / cert.target_norm : 0.0;
    cert.decay = detail::achieved_decay(cert.forward, o.eval_window, o.decay_degree);
    return cert;
}

}  // namespace reachkit
