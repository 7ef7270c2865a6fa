#pragma once

#include "semigroup.hpp"

#include <memory>

namespace reachkit {

// Time-indexed analytic field: t -> field at time t.
using TimeField = std::function<AnalyticField(double)>;

inline TimeField steady(AnalyticField f) {
    return [f = std::move(f)](double) { return f; };
}

struct LowerOrderTerms {
    TimeField q;  // order-0 potential, empty means 0
    TimeField W;  // order-1 potential (d = 1: one component), empty means 0
    double M = 0; // bound on sup_t (||q|| + ||W||)

    static LowerOrderTerms make(TimeField q, TimeField W, double M = 0) {
        LowerOrderTerms l;
        l.q = std::move(q);
        l.W = std::move(W);
        l.M = M;
        return l;
    }
};

struct SemilinearTerm {
    std::function<cplx(double t, cplx x, cplx s, cplx sd)> g;
    double epsilon = 0.1;
    double lipschitz_C0 = 0;
};

// Sampled checks of g(.,.,0,0) = 0 and of the Lipschitz bound on the eps-balls.
inline void check_semilinear(const SemilinearTerm& g, double T, std::uint64_t seed = 7, int n = 200) {
    if (!g.g) throw Error("mildsolver", "semilinear term has no oracle");
    CounterRng rng(seed);
    std::uint64_t c = 0;
    for (int i = 0; i < n; ++i) {
        double t = rng.uniform(c++, 0, T), x = rng.uniform(c++, -3, 3);
        if (std::abs(g.g(t, x, 0.0, 0.0)) > 1e-14) throw Error("mildsolver", "g(t, x, 0, 0) != 0");
        auto ball = [&] {
            double r = g.epsilon * std::sqrt(rng.uniform(c++)), th = 2 * pi * rng.uniform(c++);
            return std::polar(r, th);
        };
        cplx s1 = ball(), d1 = ball(), s2 = ball(), d2 = ball();
        double lhs = std::abs(g.g(t, x, s1, d1) - g.g(t, x, s2, d2));
        double rhs = g.lipschitz_C0 * std::sqrt(std::norm(s1 - s2) + std::norm(d1 - d2));
        if (lhs > rhs * (1 + 1e-12) + 1e-15) throw Error("mildsolver", "Lipschitz bound violated on the eps-ball");
    }
}

struct MildOptions {
    int steps = 40;
    double h = 0.02;          // real grid spacing
    int fit_degree = 24;      // Chebyshev degree of the diamond fits
    int n_boundary = 160;     // diamond boundary nodes
    double tol = 1e-10;       // Picard stopping tolerance (relative)
    int max_sweeps = 80;
    int max_halvings = 20;
    double safety = 2.0;      // C = safety * measured semigroup constant
    double constant = 0;      // measured constant; 0 = measure on first use
    double margin = 1.0;      // extra real window beyond 1 + 12 sqrt(T)
    QuadratureRule rule;
};

namespace detail {

// Keys cubic convolution kernel (a = -1/2).
inline double keys(double s) {
    s = std::abs(s);
    if (s < 1) return (1.5 * s - 2.5) * s * s + 1;
    if (s < 2) return ((-0.5 * s + 2.5) * s - 4) * s + 2;
    return 0.0;
}

struct TimeNode {
    double tau, w, v;
};

// int_0^dt (.) dtau with tau = dt v^2, v-panels graded geometrically toward 0.
inline std::vector<TimeNode> time_nodes(double dt, int levels = 12, int order = 6) {
    RVec br{0.0};
    for (int k = levels; k >= 0; --k) br.push_back(std::ldexp(1.0, -k));
    RVec x, w;
    composite_nodes(br, order, x, w);
    std::vector<TimeNode> out;
    for (std::size_t i = 0; i < x.size(); ++i) out.push_back({dt * x[i] * x[i], 2 * dt * x[i] * w[i], x[i]});
    return out;
}

// Breakpoints on [lo, hi] clustered at c from both sides.
inline RVec clustered_breaks(double lo, double hi, double c, double hmin, double hmax) {
    c = std::clamp(c, lo, hi);
    RVec br;
    RVec left = peak_breaks(c - lo, hmin, hmax), right = peak_breaks(hi - c, hmin, hmax);
    for (auto it = left.rbegin(); it != left.rend(); ++it) br.push_back(c - *it);
    for (std::size_t i = 1; i < right.size(); ++i) br.push_back(c + right[i]);
    return br;
}

}  // namespace detail

// Discrete one-step Duhamel operators on a real grid [-R, R] plus nodes on the boundary of the
// diamond. Fields are node vectors [grid values, diamond values]; within the diamond they are
// represented by a least-squares Chebyshev fit, on the real line by Keys cubic interpolation.
class MildEngine {
public:
    MildEngine(double alpha, double T, const MildOptions& o) : alpha_(alpha), opt_(o) {
        if (!(alpha > 1)) throw Error("mildsolver", "alpha must exceed 1");
        if (!(T > 0) || o.steps < 1) throw Error("mildsolver", "need T > 0 and steps >= 1");
        o.rule.validate();
        steps_ = o.steps;
        dt_ = T / steps_;
        h_ = o.h;
        double R = 1 + o.rule.halfwidth * std::sqrt(T) + o.margin;
        int half = int(std::ceil(R / h_));
        R_ = half * h_;
        nr_ = 2 * half + 1;
        xs_.resize(nr_);
        for (int i = 0; i < nr_; ++i) xs_[i] = -R_ + i * h_;
        DiamondDomain D(alpha, 1.0, 1);
        zs_.clear();
        for (const auto& z : boundary_sample_c(D, o.n_boundary)) zs_.push_back(z[0]);
        nc_ = int(zs_.size());
        n_ = nr_ + nc_;
        build_fit();
        build_real_rows();
        build_complex_rows();
    }

    double alpha() const { return alpha_; }
    double dt() const { return dt_; }
    int steps() const { return steps_; }
    double h() const { return h_; }
    double R() const { return R_; }
    int n_real() const { return nr_; }
    int n_complex() const { return nc_; }
    int size() const { return n_; }
    const RVec& grid() const { return xs_; }
    const CVec& diamond_nodes() const { return zs_; }
    cplx node(int i) const { return i < nr_ ? cplx(xs_[i]) : zs_[i - nr_]; }
    const MildOptions& options() const { return opt_; }

    // y0 propagated exactly to every step at every node.
    void semigroup(const AnalyticField& y0, std::vector<CVec>& S, std::vector<CVec>& gS) const {
        if (y0.dim != 1) throw Error("mildsolver", "mild engine supports d = 1");
        check_validity(y0, DiamondDomain(alpha_, 1.0, 1));
        S.assign(steps_ + 1, CVec(n_));
        gS.assign(steps_ + 1, CVec(n_));
        parallel_for(std::size_t(n_) * (steps_ + 1), [&](std::size_t idx) {
            int k = int(idx / n_), i = int(idx % n_);
            double t = k * dt_;
            ComplexEvalReport r = i < nr_ ? propagate_real_report(y0, t, RVec{xs_[i]}, opt_.rule, true)
                                          : propagate_complex_1d(y0, alpha_, t, zs_[i - nr_], opt_.rule, true);
            S[k][i] = r.value;
            cplx g = r.gradient[0];
            if (t == 0.0 && !y0.grad) g = 0.0;
            gS[k][i] = g;
        });
    }

    // D_new = T_dt D_prev + int_0^dt T_tau F(t_k - tau) dtau, F linear in time between Fold and Fnew.
    void step(const CVec& Dprev, const CVec& Fold, const CVec& Fnew, CVec& D, CVec& gD) const {
        D.assign(n_, 0.0);
        gD.assign(n_, 0.0);
        apply_real(wP_, Dprev, D);
        apply_real(gP_, Dprev, gD);
        apply_real(wA_, Fnew, D);
        apply_real(gA_, Fnew, gD);
        apply_real(wB_, Fold, D);
        apply_real(gB_, Fold, gD);
        Eigen::Map<const Eigen::VectorXcd> dp(Dprev.data(), n_), fo(Fold.data(), n_), fn(Fnew.data(), n_);
        Eigen::VectorXcd v = CP_ * dp + CA_ * fn + CB_ * fo;
        Eigen::VectorXcd g = CPg_ * dp + CAg_ * fn + CBg_ * fo;
        for (int i = 0; i < nc_; ++i) {
            D[nr_ + i] = v(i);
            gD[nr_ + i] = g(i);
        }
    }

    CVec fit(const CVec& v) const {
        Eigen::VectorXcd b(fit_idx_.size());
        for (std::size_t j = 0; j < fit_idx_.size(); ++j) b(j) = v[fit_idx_[j]];
        Eigen::VectorXcd c = fitop_ * b;
        return CVec(c.data(), c.data() + c.size());
    }

    bool in_diamond(cplx z) const { return diamond_contains(DiamondDomain(alpha_, 1.0, 1), z, true, 1e-12); }

    // Value of a node field at z: Keys interpolation for real z, the diamond fit otherwise.
    cplx eval(const CVec& v, const CVec& coeffs, cplx z) const {
        if (z.imag() == 0.0) {
            double x = z.real();
            if (std::abs(x) > R_) throw Error("mildsolver", "evaluation point outside the real window");
            cplx s = 0;
            stencil(x, [&](int j, double w) { s += w * v[j]; });
            return s;
        }
        if (!in_diamond(z)) throw Error("mildsolver", "evaluation point outside all validity regions");
        return fields::chebyshev_eval(coeffs, 1.0, z);
    }

    template <class Fn>
    void stencil(double x, Fn&& fn) const {
        double u = (x + R_) / h_;
        int j0 = int(std::floor(u));
        double s = u - j0;
        const double w[4] = {detail::keys(s + 1), detail::keys(s), detail::keys(1 - s), detail::keys(2 - s)};
        for (int q = 0; q < 4; ++q) {
            int j = j0 - 1 + q;
            if (j >= 0 && j < nr_ && w[q] != 0.0) fn(j, w[q]);
        }
    }

    // sup over grid + sup over diamond nodes, the X_alpha surrogate
    double norm(const CVec& v) const {
        double a = 0, b = 0;
        for (int i = 0; i < nr_; ++i) a = std::max(a, std::abs(v[i]));
        for (int i = nr_; i < n_; ++i) b = std::max(b, std::abs(v[i]));
        return a + b;
    }

private:
    double alpha_, dt_, h_, R_;
    int steps_, nr_, nc_, n_, M_ = 0;
    MildOptions opt_;
    RVec xs_;
    CVec zs_;
    std::vector<int> fit_idx_;
    Eigen::MatrixXcd fitop_;
    RVec wP_, gP_, wA_, gA_, wB_, gB_;
    Eigen::MatrixXcd CP_, CPg_, CA_, CAg_, CB_, CBg_;

    void build_fit() {
        for (int i = 0; i < nr_; ++i)
            if (std::abs(xs_[i]) <= 1.0 + 1e-12) fit_idx_.push_back(i);
        for (int i = 0; i < nc_; ++i) fit_idx_.push_back(nr_ + i);
        const int m = int(fit_idx_.size()), p = opt_.fit_degree + 1;
        Eigen::MatrixXcd V(m, p);
        for (int r = 0; r < m; ++r) {
            cplx z = node(fit_idx_[r]), t0 = 1.0, t1 = z;
            for (int c = 0; c < p; ++c) {
                V(r, c) = c == 0 ? t0 : t1;
                if (c >= 1) {
                    cplx t2 = 2.0 * z * t1 - t0;
                    t0 = t1;
                    t1 = t2;
                }
            }
        }
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(V);
        const auto& sv = svd.singularValues();
        if (sv(sv.size() - 1) <= 0 || sv(0) / sv(sv.size() - 1) > 1e12)
            throw Error("mildsolver", "diamond fit ill-conditioned; lower fit_degree");
        fitop_ = V.colPivHouseholderQr().solve(Eigen::MatrixXcd::Identity(m, m));
    }

    void apply_real(const RVec& w, const CVec& v, CVec& out) const {
        for (int i = 0; i < nr_; ++i) {
            cplx s = 0;
            int lo = std::max(-M_, i - (nr_ - 1)), hi = std::min(M_, i);
            for (int m = lo; m <= hi; ++m) s += w[m + M_] * v[i - m];
            out[i] += s;
        }
    }

    // int G(tau, m h - y) keys(y / h) dy and the same with the x-derivative of G
    void keys_weights(double tau, double scale, RVec& wv, RVec& wg, double lv, double lg) const {
        const double sq = std::sqrt(tau), H = opt_.rule.halfwidth;
        RVec x, w;
        for (int m = -M_; m <= M_; ++m) {
            double c = m * h_;
            double lo = std::max(-2 * h_, c - H * sq), hi = std::min(2 * h_, c + H * sq);
            if (!(hi > lo)) continue;
            RVec br = detail::clustered_breaks(lo, hi, c, 0.25 * std::min(sq, h_), std::min(1.5 * sq, h_));
            br = merge_breaks(br, RVec{-h_, 0.0, h_});
            composite_nodes(br, opt_.rule.order, x, w);
            double sv = 0, sg = 0;
            for (std::size_t q = 0; q < x.size(); ++q) {
                double u = c - x[q];
                double g = std::exp(-u * u / (4 * tau)) / std::sqrt(4 * pi * tau);
                double k = detail::keys(x[q] / h_);
                sv += w[q] * g * k;
                sg += w[q] * (-u / (2 * tau)) * g * k;
            }
            wv[m + M_] += scale * lv * sv;
            wg[m + M_] += scale * lg * sg;
        }
    }

    void build_real_rows() {
        M_ = int(std::ceil(opt_.rule.halfwidth * std::sqrt(dt_) / h_)) + 3;
        const int L = 2 * M_ + 1;
        wP_.assign(L, 0.0);
        gP_.assign(L, 0.0);
        keys_weights(dt_, 1.0, wP_, gP_, 1.0, 1.0);
        auto tn = detail::time_nodes(dt_);
        std::vector<RVec> pa(tn.size(), RVec(L, 0.0)), pga(tn.size(), RVec(L, 0.0)), pb(tn.size(), RVec(L, 0.0)),
            pgb(tn.size(), RVec(L, 0.0));
        parallel_for(tn.size(), [&](std::size_t q) {
            double v2 = tn[q].v * tn[q].v;
            keys_weights(tn[q].tau, tn[q].w, pa[q], pga[q], 1 - v2, 1 - v2);
            keys_weights(tn[q].tau, tn[q].w, pb[q], pgb[q], v2, v2);
        });
        wA_.assign(L, 0.0);
        gA_.assign(L, 0.0);
        wB_.assign(L, 0.0);
        gB_.assign(L, 0.0);
        for (std::size_t q = 0; q < tn.size(); ++q)
            for (int j = 0; j < L; ++j) {
                wA_[j] += pa[q][j];
                gA_[j] += pga[q][j];
                wB_[j] += pb[q][j];
                gB_[j] += pgb[q][j];
            }
    }

    // One diamond row: exterior part through the grid interpolant, triangle part through the fit.
    void complex_row(cplx z, double tau, double lv, Eigen::RowVectorXcd& row, Eigen::RowVectorXcd& grow,
                     Eigen::RowVectorXcd& crow, Eigen::RowVectorXcd& cgrow) const {
        detail::GaussKernel K{tau};
        detail::visit_exterior(K, z, 1.0, opt_.rule, [&](double x0, cplx kv, cplx kg) {
            stencil(x0, [&](int j, double w) {
                row(j) += lv * w * kv;
                grow(j) += lv * w * kg;
            });
        });
        const int p = opt_.fit_degree + 1;
        detail::visit_triangle(K, z, 1.0, opt_.rule, [&](cplx w, cplx kv, cplx kg) {
            cplx t0 = 1.0, t1 = w;
            for (int c = 0; c < p; ++c) {
                cplx tc = c == 0 ? t0 : t1;
                crow(c) += lv * kv * tc;
                cgrow(c) += lv * kg * tc;
                if (c >= 1) {
                    cplx t2 = 2.0 * w * t1 - t0;
                    t0 = t1;
                    t1 = t2;
                }
            }
        });
    }

    void build_complex_rows() {
        const int p = opt_.fit_degree + 1;
        CP_.setZero(nc_, n_);
        CPg_.setZero(nc_, n_);
        CA_.setZero(nc_, n_);
        CAg_.setZero(nc_, n_);
        CB_.setZero(nc_, n_);
        CBg_.setZero(nc_, n_);
        auto tn = detail::time_nodes(dt_);
        parallel_for(nc_, [&](std::size_t i) {
            cplx z = zs_[i];
            Eigen::RowVectorXcd r = Eigen::RowVectorXcd::Zero(n_), g = r, c = Eigen::RowVectorXcd::Zero(p), cg = c;
            auto finish = [&](Eigen::MatrixXcd& Mv, Eigen::MatrixXcd& Mg) {
                Eigen::RowVectorXcd fr = c * fitop_, fg = cg * fitop_;
                for (std::size_t j = 0; j < fit_idx_.size(); ++j) {
                    r(fit_idx_[j]) += fr(j);
                    g(fit_idx_[j]) += fg(j);
                }
                Mv.row(i) = r;
                Mg.row(i) = g;
                r.setZero();
                g.setZero();
                c.setZero();
                cg.setZero();
            };
            complex_row(z, dt_, 1.0, r, g, c, cg);
            finish(CP_, CPg_);
            for (const auto& q : tn) complex_row(z, q.tau, q.w * (1 - q.v * q.v), r, g, c, cg);
            finish(CA_, CAg_);
            for (const auto& q : tn) complex_row(z, q.tau, q.w * q.v * q.v, r, g, c, cg);
            finish(CB_, CBg_);
        });
    }
};

struct PicardLogEntry {
    int k_begin = 0, k_end = 0;  // subinterval in steps
    int sweep = 0;
    double difference = 0;
    double ratio = 0;       // difference / previous difference
    bool measured = false;  // previous difference above the noise floor
    bool accepted = false;  // false for sweeps of a subinterval abandoned by halving
};

struct MildTrajectory {
    std::shared_ptr<const MildEngine> engine;
    RVec times;
    std::vector<CVec> y, gy;    // node values per step
    std::vector<CVec> S, gS, D; // semigroup and Duhamel parts
    std::vector<CVec> coeff, gcoeff;
    std::vector<PicardLogEntry> iteration_log;
    double T0 = 0;              // final subinterval length
    double constant = 0;        // C used in the step condition
    int halvings = 0;

    double T() const { return times.back(); }

    void finalize() {
        coeff.clear();
        gcoeff.clear();
        for (std::size_t k = 0; k < y.size(); ++k) {
            coeff.push_back(engine->fit(y[k]));
            gcoeff.push_back(engine->fit(gy[k]));
        }
    }

    cplx at_step(int k, cplx z, bool gradient = false) const {
        return gradient ? engine->eval(gy[k], gcoeff[k], z) : engine->eval(y[k], coeff[k], z);
    }

    // cubic Lagrange in time over the four nearest steps
    cplx eval(double t, cplx z, bool gradient = false) const {
        const int N = int(times.size()) - 1;
        if (t < -1e-14 || t > T() * (1 + 1e-12)) throw Error("mildsolver", "time outside trajectory");
        double u = t / engine->dt();
        int k = int(std::round(u));
        if (std::abs(u - k) < 1e-12) return at_step(std::clamp(k, 0, N), z, gradient);
        if (N < 3) {
            int k0 = std::clamp(int(std::floor(u)), 0, N - 1);
            double s = u - k0;
            return (1 - s) * at_step(k0, z, gradient) + s * at_step(k0 + 1, z, gradient);
        }
        int k0 = std::clamp(int(std::floor(u)) - 1, 0, N - 3);
        cplx s = 0;
        for (int a = 0; a < 4; ++a) {
            double L = 1;
            for (int b = 0; b < 4; ++b)
                if (b != a) L *= (u - (k0 + b)) / double(a - b);
            s += L * at_step(k0 + a, z, gradient);
        }
        return s;
    }

    // State at step k as an element of X_alpha.
    AnalyticField state_field(int k) const {
        AnalyticField f;
        f.dim = 1;
        f.validity = DiamondDomain(engine->alpha(), 1.0, 1);
        f.kind = FieldKind::grid_sampled;
        f.name = "mild_state";
        auto self = std::make_shared<MildTrajectory>(*this);
        f.ext = [self, k](const cplx* z) { return self->at_step(k, *z); };
        f.real_eval = [self, k](const double* x) { return self->at_step(k, cplx(*x)); };
        f.grad = [self, k](const cplx* z, cplx* g) { g[0] = self->at_step(k, *z, true); };
        return f;
    }

    void write_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw Error("io", "cannot open " + path);
        out << "t,re_z1,im_z1,re_value,im_value,re_y1,im_y1,re_y2,im_y2,case_tag\n" << std::setprecision(17);
        const int n = engine->size();
        for (std::size_t k = 0; k < times.size(); ++k)
            for (int i = 0; i < n; ++i) {
                cplx z = engine->node(i);
                if (i < engine->n_real() && std::abs(z.real()) > 3.0) continue;
                out << times[k] << "," << z.real() << "," << z.imag() << "," << y[k][i].real() << "," << y[k][i].imag()
                    << "," << S[k][i].real() << "," << S[k][i].imag() << "," << D[k][i].real() << ","
                    << D[k][i].imag() << "," << (i < engine->n_real() ? "real" : "mild-diamond") << "\n";
            }
    }
};

// Measured analytic-semigroup constant max(C_value, C_gradient) at alpha, cached per alpha.
inline double measured_semigroup_constant(double alpha) {
    static std::mutex mtx;
    static std::map<double, double> cache;
    {
        std::lock_guard<std::mutex> g(mtx);
        auto it = cache.find(alpha);
        if (it != cache.end()) return it->second;
    }
    std::vector<AnalyticField> fam{fields::constant(1.0), fields::fourier({1.0}), fields::fourier({-2.0}),
                                   fields::gaussian(0.25)};
    ConstantsSampling smp;
    smp.n_real = 64;
    smp.n_diamond = 64;
    auto c = empirical_constants(alpha, fam, {0.01, 0.1, 1.0}, QuadratureRule{}, smp);
    double v = std::max({1.0, c.c_value, c.c_gradient});
    std::lock_guard<std::mutex> g(mtx);
    cache[alpha] = v;
    return v;
}

// Source at every node of step k given the current state and gradient.
using NodeSource = std::function<void(int k, const CVec& y, const CVec& gy, CVec& F)>;

// Smallness guard called on each iterate; throws to abort.
using IterateGuard = std::function<void(int k, const CVec& y, const CVec& gy)>;

namespace detail {

inline double surrogate_norm(const MildEngine& E, const CVec& y, const CVec& g, double t) {
    return E.norm(y) + std::sqrt(t) * E.norm(g);
}

// Picard iteration y = S + Duhamel(F(y)) on consecutive subintervals of `m` steps; `m` is halved
// whenever a reliably measured sweep ratio exceeds the target 1/2 (+5%).
inline void picard(const MildEngine& E, MildTrajectory& tr, const NodeSource& src, int m, const MildOptions& o,
                   const IterateGuard& guard) {
    const int N = E.steps(), n = E.size();
    std::vector<CVec> F(N + 1, CVec(n, 0.0));
    tr.y = tr.S;
    tr.gy = tr.gS;
    tr.D.assign(N + 1, CVec(n, 0.0));
    if (guard) guard(0, tr.y[0], tr.gy[0]);
    int ka = 0;
    while (ka < N) {
        int kb = std::min(N, ka + m);
        src(ka, tr.y[ka], tr.gy[ka], F[ka]);
        std::vector<CVec> Y(kb - ka, tr.y[ka]), G(kb - ka, tr.gy[ka]), Dn(kb - ka);
        const std::size_t log_start = tr.iteration_log.size();
        double prev = -1, scale = 0;
        bool done = false, restart = false;
        for (int sweep = 1; sweep <= o.max_sweeps; ++sweep) {
            CVec Dprev = tr.D[ka], Fold = F[ka], Fk(n), D, gD;
            double diff = 0;
            for (int j = 0; j < kb - ka; ++j) {
                int k = ka + 1 + j;
                src(k, Y[j], G[j], Fk);
                E.step(Dprev, Fold, Fk, D, gD);
                CVec yn(n), gn(n), dy(n), dg(n);
                for (int i = 0; i < n; ++i) {
                    yn[i] = tr.S[k][i] + D[i];
                    gn[i] = tr.gS[k][i] + gD[i];
                    dy[i] = yn[i] - Y[j][i];
                    dg[i] = gn[i] - G[j][i];
                }
                diff = std::max(diff, surrogate_norm(E, dy, dg, k * E.dt()));
                scale = std::max(scale, surrogate_norm(E, yn, gn, k * E.dt()));
                if (guard) guard(k, yn, gn);
                Y[j] = std::move(yn);
                G[j] = std::move(gn);
                Dn[j] = D;
                Dprev = std::move(D);
                Fold = Fk;
            }
            PicardLogEntry e;
            e.k_begin = ka;
            e.k_end = kb;
            e.sweep = sweep;
            e.difference = diff;
            e.measured = prev > 1e-9 * (1 + scale);
            e.ratio = prev > 0 ? diff / prev : 0.0;
            tr.iteration_log.push_back(e);
            if (e.measured && e.ratio > 0.55) {
                restart = true;
                break;
            }
            prev = diff;
            if (diff <= o.tol * (1 + scale)) {
                done = true;
                break;
            }
        }
        if (restart) {
            if (++tr.halvings > o.max_halvings || m == 1)
                throw Error("mildsolver", "no contraction after step halvings");
            m = std::max(1, m / 2);
            continue;
        }
        if (!done) throw Error("mildsolver", "Picard tolerance not reached; last difference " +
                                                 std::to_string(tr.iteration_log.back().difference));
        for (std::size_t l = log_start; l < tr.iteration_log.size(); ++l) tr.iteration_log[l].accepted = true;
        for (int j = 0; j < kb - ka; ++j) {
            tr.y[ka + 1 + j] = Y[j];
            tr.gy[ka + 1 + j] = G[j];
            tr.D[ka + 1 + j] = Dn[j];
        }
        ka = kb;
    }
    tr.T0 = m * E.dt();
}

}  // namespace detail

// Values of a time-indexed field at every node of every step (zero when the field is empty).
inline std::vector<CVec> sample_nodes(const MildEngine& E, const TimeField& f) {
    std::vector<CVec> out(E.steps() + 1, CVec(E.size(), 0.0));
    if (!f) return out;
    DiamondDomain D(E.alpha(), 1.0, 1);
    for (int k = 0; k <= E.steps(); ++k) {
        AnalyticField fk = f(k * E.dt());
        check_validity(fk, D);
        parallel_for(E.size(), [&](std::size_t i) {
            out[k][i] = int(i) < E.n_real() ? fk.real_at(E.node(int(i)).real()) : fk(E.node(int(i)));
        });
    }
    return out;
}

inline std::shared_ptr<const MildEngine> make_engine(double alpha, double T, const MildOptions& o) {
    return std::make_shared<const MildEngine>(alpha, T, o);
}

// Step-condition subinterval: largest T0 with C sqrt(T0) (sqrt(T0) a + b) <= 1/2, in steps.
inline int contraction_steps(double C, double a, double b, double dt, int N) {
    double lo = 0, hi = 1e6;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        (C * std::sqrt(mid) * (std::sqrt(mid) * a + b) <= 0.5 ? lo : hi) = mid;
    }
    return std::clamp(int(std::floor(lo / dt + 1e-9)), 1, N);
}

// y = T_t y0 + int_0^t T_{t-s}(f - q y - W y_x)(s) ds by Picard iteration.
inline MildTrajectory solve_linear(const AnalyticField& y0, const LowerOrderTerms& lot, const TimeField& f, double T,
                                   double alpha, const MildOptions& o = {},
                                   std::shared_ptr<const MildEngine> engine = nullptr) {
    if (!engine) engine = make_engine(alpha, T, o);
    const MildEngine& E = *engine;
    MildTrajectory tr;
    tr.engine = engine;
    for (int k = 0; k <= E.steps(); ++k) tr.times.push_back(k * E.dt());
    E.semigroup(y0, tr.S, tr.gS);
    auto qv = sample_nodes(E, lot.q), Wv = sample_nodes(E, lot.W), fv = sample_nodes(E, f);
    double nq = 0, nw = 0;
    for (auto& v : qv) nq = std::max(nq, E.norm(v));
    for (auto& v : Wv) nw = std::max(nw, E.norm(v));
    tr.constant = o.safety * (o.constant > 0 ? o.constant : measured_semigroup_constant(alpha));
    int m = contraction_steps(tr.constant, nq, nw, E.dt(), E.steps());
    NodeSource src = [&](int k, const CVec& y, const CVec& gy, CVec& F) {
        for (int i = 0; i < E.size(); ++i) F[i] = fv[k][i] - qv[k][i] * y[i] - Wv[k][i] * gy[i];
    };
    detail::picard(E, tr, src, m, o, nullptr);
    tr.finalize();
    return tr;
}

// y = T_t y0 + int_0^t T_{t-s}(g(y, y_x) + f)(s) ds inside the ball of radius R = 2 C delta.
inline MildTrajectory solve_semilinear(const AnalyticField& y0, const SemilinearTerm& g, const TimeField& f,
                                       double T, double alpha, double delta, const MildOptions& o = {},
                                       std::shared_ptr<const MildEngine> engine = nullptr) {
    check_semilinear(g, T);
    if (!engine) engine = make_engine(alpha, T, o);
    const MildEngine& E = *engine;
    MildTrajectory tr;
    tr.engine = engine;
    for (int k = 0; k <= E.steps(); ++k) tr.times.push_back(k * E.dt());
    E.semigroup(y0, tr.S, tr.gS);
    auto fv = sample_nodes(E, f);
    tr.constant = o.safety * (o.constant > 0 ? o.constant : measured_semigroup_constant(alpha));
    double size0 = std::max(E.norm(tr.S[0]), E.norm(tr.gS[0])), fn = 0;
    for (auto& v : fv) fn = std::max(fn, E.norm(v));
    if (size0 + fn > delta) throw Error("mildsolver", "data not small enough: ||y0|| + ||f|| exceeds delta");
    const double Rball = 2 * tr.constant * delta;
    if (Rball > g.epsilon) throw Error("mildsolver", "data not small enough: 2 C delta exceeds epsilon");
    int m = contraction_steps(tr.constant, g.lipschitz_C0, g.lipschitz_C0, E.dt(), E.steps());
    const int nr = E.n_real();
    NodeSource src = [&](int k, const CVec& y, const CVec& gy, CVec& F) {
        double t = k * E.dt();
        for (int i = 0; i < E.size(); ++i) F[i] = g.g(t, E.node(i), y[i], gy[i]) + fv[k][i];
    };
    IterateGuard guard = [&](int, const CVec& y, const CVec& gy) {
        for (int i = 0; i < E.size(); ++i) {
            if (i < nr && std::abs(E.node(i).real()) > E.R() - 1.0) continue;
            if (std::abs(y[i]) > g.epsilon || std::abs(gy[i]) > g.epsilon)
                throw Error("mildsolver", "data not small enough: iterate left the eps-ball");
        }
    };
    detail::picard(E, tr, src, m, o, guard);
    tr.finalize();
    return tr;
}

// Direct Duhamel evaluation at one point with graded time quadrature (tau = t v^2).
inline cplx duhamel_step(const AnalyticField& y0, const TimeField& f, double t, const CVec& Z, double alpha,
                         const QuadratureRule& rule = {}, int levels = 8, int order = 8) {
    if (t < 0) throw Error("mildsolver", "negative time");
    cplx v = propagate_any(y0, alpha, t, Z, rule, false).value;
    if (t == 0 || !f) return v;
    for (const auto& q : detail::time_nodes(t, levels, order))
        v += q.w * propagate_any(f(t - q.tau), alpha, q.tau, Z, rule, false).value;
    return v;
}

inline cplx duhamel_step(const AnalyticField& y0, const TimeField& f, double t, cplx z, double alpha,
                         const QuadratureRule& rule = {}) {
    return duhamel_step(y0, f, t, CVec{z}, alpha, rule);
}

struct ResidualReport {
    double residual_h = 0;   // max residual at (h_t, h_x)
    double residual_h2 = 0;  // max residual at (h_t/2, h_x/2)
    double order = 0;        // log2 of the ratio
};

using SpaceTimeEval = std::function<cplx(double t, double x)>;
using RightHandSide = std::function<cplx(double t, double x, cplx y, cplx yx)>;

// max |y_t - y_xx - rhs(t, x, y, y_x)| over interior samples with centered differences.
inline ResidualReport residual_check(const SpaceTimeEval& y, const RightHandSide& rhs, double T, double h_t,
                                     double h_x, double xwin = 0.9, int nt = 9, int nx = 19) {
    auto at = [&](double ht, double hx) {
        double worst = 0;
        for (int a = 0; a < nt; ++a) {
            double t = T * (0.1 + 0.8 * a / std::max(1, nt - 1));
            for (int b = 0; b < nx; ++b) {
                double x = -xwin + 2 * xwin * b / std::max(1, nx - 1);
                cplx c = y(t, x), xp = y(t, x + hx), xm = y(t, x - hx);
                cplx yt = (y(t + ht, x) - y(t - ht, x)) / (2 * ht);
                cplx yxx = (xp - 2.0 * c + xm) / (hx * hx);
                cplx yx = (xp - xm) / (2 * hx);
                worst = std::max(worst, std::abs(yt - yxx - rhs(t, x, c, yx)));
            }
        }
        return worst;
    };
    ResidualReport r;
    r.residual_h = at(h_t, h_x);
    r.residual_h2 = at(0.5 * h_t, 0.5 * h_x);
    r.order = (r.residual_h > 0 && r.residual_h2 > 0) ? std::log2(r.residual_h / r.residual_h2) : 0.0;
    return r;
}

inline RightHandSide linear_rhs(const LowerOrderTerms& lot, const TimeField& f) {
    return [lot, f](double t, double x, cplx y, cplx yx) {
        cplx r = f ? f(t).real_at(x) : cplx(0.0);
        if (lot.q) r -= lot.q(t).real_at(x) * y;
        if (lot.W) r -= lot.W(t).real_at(x) * yx;
        return r;
    };
}

inline RightHandSide semilinear_rhs(const SemilinearTerm& g, const TimeField& f) {
    return [g, f](double t, double x, cplx y, cplx yx) {
        cplx r = g.g(t, x, y, yx);
        if (f) r += f(t).real_at(x);
        return r;
    };
}

inline SpaceTimeEval trajectory_eval(const MildTrajectory& tr) {
    auto p = std::make_shared<MildTrajectory>(tr);
    return [p](double t, double x) { return p->eval(t, cplx(x)); };
}

}  // namespace reachkit
