#pragma once

#include "cutoff.hpp"

#include <Eigen/Sparse>

#include <limits>
#include <memory>

namespace reachkit {

// ---------------------------------------------------------------- Carleman weights

struct CarlemanWeights {
    double s = 1.0;
    double lambda = 1.0;
    double mu = 0.0;        // s lambda^2 e^{2 lambda}
    double T = 1.0;
    double T0w = 0.25;
    double T1w = 0.25;
    double beta = 0.75;
    double gamma = 0.5;
    double R_omega = 5.0;   // psi is radial on B(R_omega)

    // psi(x) = 7 - |x|^2 / R^2: range [6, 7] on the closed ball, constant 6 on the sphere
    double psi(double r) const { return 7.0 - (r * r) / (R_omega * R_omega); }
    double psi(const double* x, int d) const {
        double r2 = 0;
        for (int j = 0; j < d; ++j) r2 += x[j] * x[j];
        return 7.0 - r2 / (R_omega * R_omega);
    }
    double dpsi_dr(double r) const { return -2.0 * r / (R_omega * R_omega); }
};

inline CarlemanWeights make_weights(double s, double lambda, double T, double T0w, double T1w, double beta = 0.75,
                                    double R_omega = 5.0) {
    if (!(s >= 1) || !(lambda >= 1)) throw Error("nullcontrol", "Carleman weights need s >= 1 and lambda >= 1");
    if (!(T1w > 0 && T1w <= 0.25) || !(T0w > 0) || !(T0w + 2 * T1w < T))
        throw Error("nullcontrol", "plateau needs T1w <= 1/4 and T0w + 2 T1w < T");
    if (!(beta > 0 && beta < 1)) throw Error("nullcontrol", "beta must lie in (0, 1)");
    CarlemanWeights w;
    w.s = s;
    w.lambda = lambda;
    w.mu = s * lambda * lambda * std::exp(2 * lambda);
    w.T = T;
    w.T0w = T0w;
    w.T1w = T1w;
    w.beta = beta;
    w.R_omega = R_omega;
    return w;
}

// Smallest lambda >= 1 such that beta theta lambda e^{12 lambda} <= phi for psi <= 7.
inline double lambda0_beta(double beta) {
    auto ok = [&](double l) { return std::exp(-5 * l) <= (1 - beta) * l; };
    if (ok(1.0)) return 1.0;
    double lo = 1, hi = 2;
    while (!ok(hi)) hi *= 2;
    for (int i = 0; i < 100; ++i) {
        double m = 0.5 * (lo + hi);
        (ok(m) ? hi : lo) = m;
    }
    return hi;
}

// theta and its first two derivatives
inline std::array<double, 3> theta_derivs(const CarlemanWeights& w, double t) {
    if (t < 0) throw Error("nullcontrol", "theta needs t >= 0");
    if (t >= w.T) throw Error("nullcontrol", "theta blows up at t = T");
    const double T0 = w.T0w, T1 = w.T1w, T = w.T;
    if (t <= T0) {
        double u = 1 - t / T0;
        return {1 + std::pow(u, w.mu), -w.mu / T0 * std::pow(u, w.mu - 1),
                w.mu * (w.mu - 1) / (T0 * T0) * std::pow(u, w.mu - 2)};
    }
    if (t <= T - 2 * T1) return {1.0, 0.0, 0.0};
    if (t >= T - T1) {
        double r = T - t;
        return {1 / r, 1 / (r * r), 2 / (r * r * r)};
    }
    // quintic Hermite bridge from (1, 0, 0) to (1/T1, 1/T1^2, 2/T1^3)
    double u = (t - (T - 2 * T1)) / T1, c = 1 / T1;
    double u2 = u * u, u3 = u2 * u, u4 = u3 * u, u5 = u4 * u;
    double h3 = 10 * u3 - 15 * u4 + 6 * u5, d3 = 30 * u2 - 60 * u3 + 30 * u4, s3 = 60 * u - 180 * u2 + 120 * u3;
    double k = -3 * u3 + 5 * u4 - 2 * u5, dk = -9 * u2 + 20 * u3 - 10 * u4, sk = -18 * u + 60 * u2 - 40 * u3;
    double v = 1 + (c - 1) * h3 + c * k;
    double d1 = ((c - 1) * d3 + c * dk) / T1;
    double d2 = ((c - 1) * s3 + c * sk) / (T1 * T1);
    return {v, d1, d2};
}

inline double theta_eval(const CarlemanWeights& w, double t) { return theta_derivs(w, t)[0]; }

struct WeightValues {
    double phi = 0, xi = 0, Phi = 0;
};

inline WeightValues weight_eval(const CarlemanWeights& w, double t, const RVec& x) {
    double th = theta_eval(w, t);
    double ps = w.psi(x.data(), int(x.size()));
    WeightValues out;
    out.phi = th * (w.lambda * std::exp(12 * w.lambda) - std::exp(w.lambda * ps));
    out.xi = th * std::exp(w.lambda * ps);
    out.Phi = w.s * w.lambda * std::exp(12 * w.lambda) * th;
    return out;
}

inline const char* psi_deviation_note() {
    return "psi is radial with a critical point at the origin, so inf |grad psi| > 0 fails on the interior; "
           "weights are diagnostic only, the control comes from penalized HUM";
}

// ---------------------------------------------------------------- grid problem

using GridCoefficient = std::function<cplx(double t, double x)>;

struct GridProblem {
    double L = 6.0;            // box [-L, L]
    double h = 0.02;
    double dt = 0.01;
    double T = 1.0;
    double omega_inner = 2.0;  // control set: omega_inner < |x| < L
    GridCoefficient q, W;      // empty means 0

    int intervals() const { return int(std::lround(T / dt)); }
    int cells() const { return int(std::lround(2 * L / h)); }
    int interior() const { return cells() - 1; }
    double x(int i) const { return -L + i * h; }  // i = 0 .. cells()

    void validate() const {
        if (!(L > 1) || !(h > 0) || !(dt > 0) || !(T > 0)) throw Error("nullcontrol", "invalid grid problem");
        if (std::abs(cells() * h - 2 * L) > 1e-9 * L) throw Error("nullcontrol", "h must divide the box");
        if (std::abs(intervals() * dt - T) > 1e-9 * T) throw Error("nullcontrol", "dt must divide T");
        if (!(omega_inner >= 1) || !(omega_inner < L - h)) throw Error("nullcontrol", "control set empty or meets B(1)");
    }
};

// Values on the full grid (boundary nodes included) at every time level.
struct SpaceTimeField {
    RVec x, t;
    std::vector<CVec> v;  // v[k][i]

    cplx at(int k, double xx) const {
        double h = x[1] - x[0];
        double u = (xx - x.front()) / h;
        int i = std::clamp(int(std::floor(u)), 0, int(x.size()) - 2);
        double s = u - i;
        return (1 - s) * v[k][i] + s * v[k][i + 1];
    }
};

struct BoundaryData {
    std::function<cplx(double t)> left, right;  // empty means 0
};

namespace detail {

using SpMat = Eigen::SparseMatrix<cplx>;
using SpLU = Eigen::SparseLU<SpMat>;

// A(t) = -d_xx + q + W d_x on interior nodes, centered differences.
inline SpMat grid_operator(const GridProblem& P, double t, CVec& lo_coef, CVec& hi_coef) {
    const int n = P.interior();
    const double h = P.h;
    std::vector<Eigen::Triplet<cplx>> tr;
    lo_coef.assign(n, 0.0);
    hi_coef.assign(n, 0.0);
    for (int r = 0; r < n; ++r) {
        double xx = P.x(r + 1);
        cplx q = P.q ? P.q(t, xx) : cplx(0.0), w = P.W ? P.W(t, xx) : cplx(0.0);
        cplx lo = -1.0 / (h * h) - w / (2 * h), hi = -1.0 / (h * h) + w / (2 * h);
        tr.emplace_back(r, r, 2.0 / (h * h) + q);
        if (r > 0) tr.emplace_back(r, r - 1, lo);
        if (r + 1 < n) tr.emplace_back(r, r + 1, hi);
        lo_coef[r] = lo;
        hi_coef[r] = hi;
    }
    SpMat A(n, n);
    A.setFromTriplets(tr.begin(), tr.end());
    return A;
}

}  // namespace detail

// Crank-Nicolson for d_t y - d_xx y + q y + W d_x y = s on the box with Dirichlet data; `src[k]`
// is the source on interval k (constant in time), the discrete operators are kept so the adjoint is
// the exact transpose.
class CrankNicolson {
public:
    explicit CrankNicolson(GridProblem P) : P_(std::move(P)) {
        P_.validate();
        n_ = P_.interior();
        N_ = P_.intervals();
        const bool steady = !P_.q && !P_.W;
        const int levels = steady ? 1 : N_ + 1;
        A_.resize(levels);
        lo_.resize(levels);
        hi_.resize(levels);
        for (int k = 0; k < levels; ++k) A_[k] = detail::grid_operator(P_, k * P_.dt, lo_[k], hi_[k]);
        detail::SpMat Id(n_, n_);
        Id.setIdentity();
        Lf_.resize(levels);
        Lh_.resize(levels);
        for (int k = 0; k < levels; ++k) {
            detail::SpMat Lk = Id + (0.5 * P_.dt) * A_[k];
            Lf_[k] = std::make_shared<detail::SpLU>();
            Lf_[k]->compute(Lk);
            detail::SpMat LkH = Lk.adjoint();
            Lh_[k] = std::make_shared<detail::SpLU>();
            Lh_[k]->compute(LkH);
            if (Lf_[k]->info() != Eigen::Success || Lh_[k]->info() != Eigen::Success)
                throw Error("nullcontrol", "linear-solve failure in Crank-Nicolson factorization");
        }
    }

    const GridProblem& problem() const { return P_; }
    int interior() const { return n_; }
    int intervals() const { return N_; }

    // levels 0..N of interior values
    std::vector<CVec> forward(const CVec& y0, const std::vector<CVec>* src, const BoundaryData* bc = nullptr) const {
        std::vector<CVec> out(N_ + 1);
        out[0] = y0;
        Eigen::VectorXcd y = Eigen::Map<const Eigen::VectorXcd>(y0.data(), n_);
        for (int k = 0; k < N_; ++k) {
            Eigen::VectorXcd rhs = y - (0.5 * P_.dt) * (Ak(k) * y);
            if (src) rhs += P_.dt * Eigen::Map<const Eigen::VectorXcd>((*src)[k].data(), n_);
            if (bc) {
                double t0 = k * P_.dt, t1 = (k + 1) * P_.dt;
                auto g = [](const std::function<cplx(double)>& f, double t) { return f ? f(t) : cplx(0.0); };
                rhs(0) -= 0.5 * P_.dt * (lo(k)[0] * g(bc->left, t0) + lo(k + 1)[0] * g(bc->left, t1));
                rhs(n_ - 1) -= 0.5 * P_.dt * (hi(k)[n_ - 1] * g(bc->right, t0) + hi(k + 1)[n_ - 1] * g(bc->right, t1));
            }
            y = Lf(k + 1).solve(rhs);
            if (Lf(k + 1).info() != Eigen::Success) throw Error("nullcontrol", "linear-solve failure");
            out[k + 1] = CVec(y.data(), y.data() + n_);
        }
        return out;
    }

    // Transpose sweep from the terminal datum psi: p[k] pairs with the source on interval k, z0 with y0.
    void adjoint(const CVec& psi, std::vector<CVec>& p, CVec& z0) const {
        p.assign(N_, CVec());
        Eigen::VectorXcd z = Eigen::Map<const Eigen::VectorXcd>(psi.data(), n_);
        for (int k = N_ - 1; k >= 0; --k) {
            Eigen::VectorXcd pk = Lh(k + 1).solve(z);
            p[k] = CVec(pk.data(), pk.data() + n_);
            z = pk - (0.5 * P_.dt) * (Ak(k).adjoint() * pk);
        }
        z0 = CVec(z.data(), z.data() + n_);
    }

    // Interior values embedded in the full grid (boundary values from bc or zero).
    SpaceTimeField embed(const std::vector<CVec>& levels, const BoundaryData* bc = nullptr) const {
        SpaceTimeField f;
        for (int i = 0; i <= P_.cells(); ++i) f.x.push_back(P_.x(i));
        for (int k = 0; k < int(levels.size()); ++k) {
            double t = k * P_.dt;
            f.t.push_back(t);
            CVec v(n_ + 2, 0.0);
            for (int i = 0; i < n_; ++i) v[i + 1] = levels[k][i];
            if (bc && bc->left) v[0] = bc->left(t);
            if (bc && bc->right) v[n_ + 1] = bc->right(t);
            f.v.push_back(std::move(v));
        }
        return f;
    }

private:
    GridProblem P_;
    int n_ = 0, N_ = 0;
    std::vector<detail::SpMat> A_;
    std::vector<CVec> lo_, hi_;
    std::vector<std::shared_ptr<detail::SpLU>> Lf_, Lh_;

    const detail::SpMat& Ak(int k) const { return A_.size() == 1 ? A_[0] : A_[k]; }
    const CVec& lo(int k) const { return lo_.size() == 1 ? lo_[0] : lo_[k]; }
    const CVec& hi(int k) const { return hi_.size() == 1 ? hi_[0] : hi_[k]; }
    detail::SpLU& Lf(int k) const { return *(Lf_.size() == 1 ? Lf_[0] : Lf_[k]); }
    detail::SpLU& Lh(int k) const { return *(Lh_.size() == 1 ? Lh_[0] : Lh_[k]); }
};

inline double l2_grid(const CVec& v, double h) {
    double s = 0;
    for (auto c : v) s += std::norm(c);
    return std::sqrt(h * s);
}

inline cplx inner_grid(const CVec& a, const CVec& b, double h) {
    cplx s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return h * s;
}

// Interior samples of f(x) on the problem grid.
inline CVec sample_interior(const GridProblem& P, const std::function<cplx(double)>& f) {
    CVec v(P.interior());
    for (int i = 0; i < P.interior(); ++i) v[i] = f(P.x(i + 1));
    return v;
}

// Free solution of the uncontrolled problem with homogeneous Dirichlet data.
inline SpaceTimeField solve_forward(const GridProblem& P, const CVec& y0, const std::vector<CVec>* f_levels = nullptr,
                                    const BoundaryData* bc = nullptr) {
    CrankNicolson cn(P);
    std::vector<CVec> src;
    if (f_levels) {
        if (int(f_levels->size()) != P.intervals() + 1) throw Error("nullcontrol", "source needs one slice per level");
        for (int k = 0; k < P.intervals(); ++k) {
            CVec s(P.interior());
            for (int i = 0; i < P.interior(); ++i) s[i] = 0.5 * ((*f_levels)[k][i] + (*f_levels)[k + 1][i]);
            src.push_back(std::move(s));
        }
    }
    return cn.embed(cn.forward(y0, f_levels ? &src : nullptr, bc), bc);
}

// ---------------------------------------------------------------- penalized HUM

struct ControlSolution {
    SpaceTimeField Y;
    std::vector<CVec> H;           // per interval, interior nodes, zero off the mask
    CVec phiT;                     // adjoint terminal datum
    double final_norm = 0;
    double initial_norm = 0;
    int cg_iterations = 0;
    double duality_gap = 0;        // relative mismatch of the transposition identity
    std::vector<double> residual_history;
    std::map<std::string, double> weighted_norms;  // log10 of the weighted quantities
};

// Dual operator (Lambda + eps) phi = -Y_free(T) with Lambda = G G^*, G: control -> final state.
class HumOperator {
public:
    explicit HumOperator(const GridProblem& P) : cn_(P) {
        const auto& G = cn_.problem();
        mask_.assign(cn_.interior(), 0.0);
        for (int i = 0; i < cn_.interior(); ++i)
            if (std::abs(G.x(i + 1)) > G.omega_inner) mask_[i] = 1.0;
    }

    const CrankNicolson& solver() const { return cn_; }
    const RVec& mask() const { return mask_; }
    double h() const { return cn_.problem().h; }

    std::vector<CVec> control_from(const CVec& phi) const {
        std::vector<CVec> p;
        CVec z0;
        cn_.adjoint(phi, p, z0);
        for (auto& v : p)
            for (int i = 0; i < cn_.interior(); ++i) v[i] *= mask_[i];
        return p;
    }

    CVec apply(const CVec& phi, double eps) const {
        auto H = control_from(phi);
        CVec zero(cn_.interior(), 0.0);
        CVec y = cn_.forward(zero, &H).back();
        for (int i = 0; i < cn_.interior(); ++i) y[i] += eps * phi[i];
        return y;
    }

    // J(phi) = 1/2 <Lambda phi, phi> + eps/2 |phi|^2 + Re <Y_free(T), phi>
    double dual_functional(const CVec& phi, const CVec& yfree, double eps) const {
        CVec a = apply(phi, eps);
        return 0.5 * inner_grid(phi, a, h()).real() + inner_grid(yfree, phi, h()).real();
    }

    CVec dual_gradient(const CVec& phi, const CVec& yfree, double eps) const {
        CVec a = apply(phi, eps);
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += yfree[i];
        return a;
    }

private:
    CrankNicolson cn_;
    RVec mask_;
};

// log10 of sum_j exp(l_j) given natural logs
inline double log10_sum_exp(const RVec& l) {
    if (l.empty()) return -std::numeric_limits<double>::infinity();
    double m = *std::max_element(l.begin(), l.end());
    if (!std::isfinite(m)) return m;
    double s = 0;
    for (double v : l) s += std::exp(v - m);
    return (m + std::log(s)) / std::log(10.0);
}

inline std::map<std::string, double> weighted_norms(const GridProblem& P, const SpaceTimeField& Y,
                                                    const std::vector<CVec>& H, const CarlemanWeights& w) {
    RVec lY, lH, lG;
    const int N = P.intervals(), n = P.interior();
    for (int k = 0; k < N; ++k) {
        double t = (k + 0.5) * P.dt;
        double th = theta_eval(w, t);
        for (int i = 1; i <= n; ++i) {
            double x = P.x(i);
            double phi = weight_eval(w, t, RVec{x}).phi;
            cplx y = 0.5 * (Y.v[k][i] + Y.v[k + 1][i]);
            cplx gy = 0.25 * (Y.v[k][i + 1] - Y.v[k][i - 1] + Y.v[k + 1][i + 1] - Y.v[k + 1][i - 1]) / P.h;
            double base = std::log(P.h * P.dt) + 2 * w.s * phi;
            if (std::abs(y) > 0) lY.push_back(base + 3 * std::log(w.s) + 2 * std::log(std::abs(y)));
            if (std::abs(gy) > 0) lG.push_back(base + std::log(w.s) - 2 * std::log(th) + 2 * std::log(std::abs(gy)));
            cplx hv = H[k][i - 1];
            if (std::abs(hv) > 0) lH.push_back(base - 3 * std::log(th) + 2 * std::log(std::abs(hv)));
        }
    }
    return {{"log10_s3_Y", log10_sum_exp(lY)}, {"log10_theta-3_H", log10_sum_exp(lH)},
            {"log10_s_theta-2_gradY", log10_sum_exp(lG)}};
}

struct HumOptions {
    double penalty_eps = 1e-8;
    double cg_tol = 1e-3;      // relative residual of the final stage
    double stage_tol = 1e-1;   // relative residual of the warm-start stages
    int cg_max = 500;          // total over all stages
    bool continuation = true;  // 1e-4 -> 1e-6 -> ... -> penalty_eps, warm started
    CarlemanWeights weights = make_weights(1.0, 1.0, 1.0, 0.25, 0.25);
};

inline ControlSolution hum_control(const GridProblem& P, const CVec& y0, const std::vector<CVec>* f_intervals,
                                   const HumOptions& o = {}) {
    if (!(o.penalty_eps > 0)) throw Error("nullcontrol", "penalty_eps must be positive");
    HumOperator op(P);
    const auto& cn = op.solver();
    const int n = cn.interior();
    const double h = P.h;
    ControlSolution sol;
    sol.initial_norm = l2_grid(y0, h);
    CVec yfree = cn.forward(y0, f_intervals).back();
    CVec b(n);
    for (int i = 0; i < n; ++i) b[i] = -yfree[i];
    const double bnorm = l2_grid(b, h);
    CVec phi(n, 0.0);

    RVec eps_list;
    if (o.continuation)
        for (double e = 1e-4; e > o.penalty_eps * 1.0001; e *= 1e-2) eps_list.push_back(e);
    eps_list.push_back(o.penalty_eps);

    if (bnorm > 0) {
        for (std::size_t st = 0; st < eps_list.size(); ++st) {
            const double eps = eps_list[st];
            const double tol = st + 1 == eps_list.size() ? o.cg_tol : std::max(o.cg_tol, o.stage_tol);
            CVec r = op.apply(phi, eps);
            for (int i = 0; i < n; ++i) r[i] = b[i] - r[i];
            CVec d = r;
            double rr = inner_grid(r, r, h).real();
            double best = std::sqrt(rr);
            int since_best = 0;
            while (std::sqrt(rr) > tol * bnorm) {
                if (sol.cg_iterations >= o.cg_max) {
                    std::string hist;
                    for (std::size_t j = sol.residual_history.size() > 5 ? sol.residual_history.size() - 5 : 0;
                         j < sol.residual_history.size(); ++j)
                        hist += " " + std::to_string(sol.residual_history[j]);
                    throw Error("nullcontrol", "CG stagnation; last residuals" + hist);
                }
                CVec Ad = op.apply(d, eps);
                double dAd = inner_grid(d, Ad, h).real();
                if (!(dAd > 0)) throw Error("nullcontrol", "CG breakdown: operator not positive");
                double a = rr / dAd;
                for (int i = 0; i < n; ++i) {
                    phi[i] += a * d[i];
                    r[i] -= a * Ad[i];
                }
                double rr2 = inner_grid(r, r, h).real();
                for (int i = 0; i < n; ++i) d[i] = r[i] + (rr2 / rr) * d[i];
                rr = rr2;
                ++sol.cg_iterations;
                double rel = std::sqrt(rr) / bnorm;
                sol.residual_history.push_back(rel);
                if (std::sqrt(rr) < 0.999 * best) {
                    best = std::sqrt(rr);
                    since_best = 0;
                } else if (++since_best > 100000) {
                    throw Error("nullcontrol", "CG stagnation at relative residual " + std::to_string(rel));
                }
            }
        }
    }

    sol.phiT = phi;
    sol.H = op.control_from(phi);
    auto levels = cn.forward(y0, nullptr);
    {
        std::vector<CVec> src = sol.H;
        if (f_intervals)
            for (int k = 0; k < P.intervals(); ++k)
                for (int i = 0; i < n; ++i) src[k][i] += (*f_intervals)[k][i];
        levels = cn.forward(y0, &src);
    }
    sol.Y = cn.embed(levels);
    sol.final_norm = l2_grid(levels.back(), h);

    // transposition identity: <Y(T), phi> = <y0, z0> + sum_k dt <f_k + H_k, p_k>
    {
        std::vector<CVec> p;
        CVec z0;
        cn.adjoint(phi, p, z0);
        cplx rhs = inner_grid(z0, y0, h);
        for (int k = 0; k < P.intervals(); ++k) {
            CVec s = sol.H[k];
            if (f_intervals)
                for (int i = 0; i < n; ++i) s[i] += (*f_intervals)[k][i];
            rhs += P.dt * inner_grid(p[k], s, h);
        }
        cplx lhs = inner_grid(phi, levels.back(), h);
        double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
        sol.duality_gap = std::abs(lhs - rhs) / scale;
    }
    CarlemanWeights w = o.weights;
    if (w.T != P.T || w.R_omega != P.L) {
        double T1 = std::min(0.25, P.T / 4);
        w = make_weights(w.s, w.lambda, P.T, std::min(w.T0w, P.T / 4), T1, w.beta, P.L);
    }
    sol.weighted_norms = weighted_norms(P, sol.Y, sol.H, w);
    return sol;
}

// ---------------------------------------------------------------- gluing

struct GluedControl {
    SpaceTimeField y;
    SpaceTimeField h;  // full-grid control, per level
};

// Quintic time cutoff: 1 on [0, T/8], 0 on [T/4, T].
inline std::array<double, 2> rho_time(double t, double T) {
    Cutoff c{CutoffProfile::quintic, T / 8, T / 4};
    auto r = c.radial(t);
    return {r[0], r[1]};
}

// y = rho ycheck (1 - eta) + eta Y and the matching right-hand side h, where ycheck is the
// uncontrolled solution and Y the controlled one on the box.
inline GluedControl glue_control(const GridProblem& P, const ControlSolution& sol, const SpaceTimeField& ycheck,
                                 const Cutoff& eta, const std::vector<CVec>* f_levels = nullptr,
                                 std::function<std::array<double, 2>(double)> rho = nullptr) {
    if (eta.r_inner < 2.0 - 1e-12 || eta.r_outer > P.L) throw Error("nullcontrol", "cutoff support violation");
    if (!rho) rho = [T = P.T](double t) { return rho_time(t, T); };
    const int N = P.intervals(), cells = P.cells();
    const double h = P.h;
    GluedControl out;
    out.y = ycheck;
    out.h = ycheck;
    for (int k = 0; k <= N; ++k) {
        double t = k * P.dt;
        auto rr = rho(t);
        // control on the level: average of the adjacent intervals
        auto Hat = [&](int i) -> cplx {
            if (i <= 0 || i >= cells) return 0.0;
            if (k == 0) return sol.H[0][i - 1];
            if (k == N) return sol.H[N - 1][i - 1];
            return 0.5 * (sol.H[k - 1][i - 1] + sol.H[k][i - 1]);
        };
        for (int i = 0; i <= cells; ++i) {
            double x = P.x(i);
            auto e = eta.radial(std::abs(x));
            double ev = e[0], ed = (x >= 0 ? 1.0 : -1.0) * e[1], edd = e[2];
            const CVec& yc = ycheck.v[k];
            const CVec& Y = sol.Y.v[k];
            out.y.v[k][i] = rr[0] * yc[i] * (1 - ev) + ev * Y[i];
            cplx hv = 0;
            if (i > 0 && i < cells) {
                cplx gyc = (yc[i + 1] - yc[i - 1]) / (2 * h), gY = (Y[i + 1] - Y[i - 1]) / (2 * h);
                cplx W = P.W ? P.W(t, x) : cplx(0.0);
                cplx f = f_levels ? (*f_levels)[k][i - 1] : cplx(0.0);
                hv = rr[1] * yc[i] * (1 - ev) + rr[0] * (2 * ed * gyc + edd * yc[i] - yc[i] * W * ed) -
                     (1 - ev) * f + ev * Hat(i) + (-2 * ed * gY - edd * Y[i] + W * ed * Y[i]);
            }
            out.h.v[k][i] = hv;
        }
    }
    return out;
}

}  // namespace reachkit
