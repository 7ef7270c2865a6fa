// Acceptance harness: `acceptance --criterion N` runs one criterion, no argument runs all of them.
// Each criterion prints exactly one line "criterion N: PASS|FAIL ..." followed by indented details.

#include "reachkit/verify.hpp"

#include <chrono>
#include <cstdio>
#include <cstring>
#include <cfloat>
#include <map>

using namespace reachkit;
using verify::Check;

namespace {

struct Outcome {
    bool pass = true;
    std::string summary;
    std::vector<std::string> details;

    void require(const Check& c) {
        pass = pass && c.pass;
        char buf[256];
        std::snprintf(buf, sizeof buf, "%-58s value %.3e bound %.3e %s", c.name.c_str(), c.value, c.bound,
                      c.pass ? "ok" : "FAILED");
        details.push_back(buf);
    }
    void note(const std::string& s) { details.push_back(s); }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

CVec diamond_grid_1d(double alpha, double max_imag, int n) {
    CVec out;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            cplx z(-1 + 2.0 * i / (n - 1), max_imag * (-1 + 2.0 * j / (n - 1)));
            if (diamond_contains(DiamondDomain(alpha, 1.0, 1), z, true)) out.push_back(z);
        }
    for (auto& z : boundary_sample_c(DiamondDomain(alpha, 1.0, 1), 16)) out.push_back(z[0]);
    return out;
}

// ---------------------------------------------------------------- 1

Outcome criterion1() {
    Outcome o;
    auto family = verify::random_trig_family(20260101, 20, 8);
    auto rep = verify::estimate_constants(2.0, family, {1e-3, 1e-2, 1e-1, 1.0}, 1000);
    for (const auto& c : rep.checks) o.require(c);
    o.summary = fmt("%g fields x 4 times x %g points; measured ratios y1 %.3f y2 %.3f", family.size(), rep.n_points,
                    rep.worst_ratio[0], rep.worst_ratio[1]) +
                fmt(" z1 %.3f z2 %.3f", rep.worst_ratio[2], rep.worst_ratio[3]);
    return o;
}

// ---------------------------------------------------------------- 2

Outcome criterion2() {
    Outcome o;
    const RVec ts{1e-3, 1e-2, 0.1, 1.0};
    std::vector<RVec> k1;
    for (int k = -4; k <= 4; ++k) k1.push_back({double(k)});
    std::vector<CVec> z1;
    for (auto z : diamond_grid_1d(2.0, 0.45, 9))
        if (std::abs(z.imag()) <= 0.45 + 1e-12) z1.push_back({z});
    double e1 = verify::fourier_oracle_error(1, 2.0, ts, k1, z1);
    o.require(verify::at_most("Fourier modes d=1 |k|<=4, relative", e1, 1e-6));

    std::vector<RVec> k2{{1, 1}, {0, 4}, {-2, 3}, {2.5, -2.5}, {-1, 0}, {3, 2}};
    std::vector<CVec> z2{{cplx(0.1, 0.15), cplx(0.2, 0)},
                         {cplx(-0.3, 0.1), cplx(0.25, -0.1)},
                         {cplx(0.0, 0.0), cplx(0.5, 0.2)},
                         {cplx(0.4, 0.0), cplx(-0.2, 0.0)},
                         {cplx(-0.1, -0.2), cplx(0.05, 0.1)}};
    for (auto& z : z2)
        if (!diamond_contains(DiamondDomain(2.0, 1.0, 2), z, true)) throw Error("acceptance", "bad d=2 sample");
    double e2 = verify::fourier_oracle_error(2, 2.0, {1e-3, 0.05, 1.0}, k2, z2);
    o.require(verify::at_most("Fourier modes d=2 |k|<=4, relative", e2, 1e-6));

    double g1 = verify::gaussian_identity_error(1, 2.0, 0.2, ts, z1);
    double g2 = verify::gaussian_identity_error(2, 2.0, 0.2, {1e-2, 0.3}, z2);
    o.require(verify::at_most("Gaussian semigroup identity d=1, relative", g1, 1e-8));
    o.require(verify::at_most("Gaussian semigroup identity d=2, relative", g2, 1e-8));

    std::vector<CVec> zc1{{cplx(0.2, 0.3)}, {cplx(-0.5, 0.1)}, {cplx(0.0, -0.45)}, {cplx(0.7, 0.0)}};
    double c1 = verify::composition_error(1, 2.0, {1e-3, 0.1, 0.5}, zc1);
    double c2 = verify::composition_error(2, 2.0, {0.01, 0.3}, {z2[0], z2[2]});
    o.require(verify::at_most("composition T_{t+s} = T_t T_s d=1, relative", c1, 1e-6));
    o.require(verify::at_most("composition T_{t+s} = T_t T_s d=2, relative", c2, 1e-6));
    o.summary = fmt("Fourier %.1e / %.1e, Gaussian %.1e / %.1e", e1, e2, g1, g2) + fmt(", composition %.1e / %.1e", c1, c2);
    return o;
}

// ---------------------------------------------------------------- 3

Outcome criterion3() {
    Outcome o;
    auto rep = verify::case_inequalities(2.0, 100000, 3);
    o.require(verify::at_most("case 2b key inequality (lhs - rhs)", rep.worst_2b, 1e-12));
    o.require(verify::at_most("case 2c h_alpha", rep.worst_2c, 1e-12));
    o.summary = fmt("%g + %g samples; max 2b gap %.2e, max h_alpha %.2e", rep.samples_2b, rep.samples_2c, rep.worst_2b,
                    rep.worst_2c);
    return o;
}

// ---------------------------------------------------------------- 4

Outcome criterion4() {
    Outcome o;
    auto family = verify::random_trig_family(20260101, 20, 8);
    ConstantsSampling smp;
    smp.n_real = 64;
    smp.real_radius = pi;
    smp.n_diamond = 96;
    // the sweep runs past the k = 1 peak at t = 1 so the sup is interior
    auto rep = verify::analyticity_sweep(2.0, family, 1e-3, 8.0, 9, smp);
    o.require(verify::at_most("sup_t t ||Lap T_t y0|| / ||y0|| finite", rep.sup_fine, 1e6));
    o.require(verify::at_most("relative change under 2x t refinement", rep.change, 0.05));
    std::size_t arg = 0;
    for (std::size_t i = 0; i < rep.ts.size(); ++i)
        if (rep.laplacian[i] > rep.laplacian[arg]) arg = i;
    o.summary = fmt("sup coarse %.6f, fine %.6f (at t = %.3g), change %.2e", rep.sup_coarse, rep.sup_fine, rep.ts[arg],
                    rep.change);
    return o;
}

// ---------------------------------------------------------------- 5

Outcome criterion5() {
    Outcome o;
    auto lot = LowerOrderTerms::make(steady(fields::constant(1.0)), steady(fields::constant(1.0)));
    auto tr = solve_linear(fields::fourier({1.0}), lot, nullptr, 1.0, 2.0);
    double worst = 0;
    int n = 0;
    for (const auto& e : tr.iteration_log)
        if (e.accepted && e.measured) {
            worst = std::max(worst, e.ratio);
            ++n;
        }
    o.require(verify::at_most("max accepted sweep ratio", worst, 0.55));
    o.summary = fmt("%g measured sweeps, max ratio %.4f, subinterval T0 = %g, C = %g", n, worst, tr.T0, tr.constant) +
                fmt(", halvings %g", tr.halvings);
    return o;
}

// ---------------------------------------------------------------- 6

Outcome criterion6() {
    Outcome o;
    const double T = 0.5;
    auto cosx = fields::trig_polynomial({0.0, 1.0}, {0.0, 0.0});
    auto lot = LowerOrderTerms::make(steady(fields::scaled(0.3, cosx)), steady(fields::constant(0.2)));
    auto lin = solve_linear(cosx, lot, nullptr, T, 2.0);
    auto orc = verify::periodic_crank_nicolson([](double x) { return cplx(std::cos(x)); },
                                               [](double x) { return cplx(0.3 * std::cos(x)); },
                                               [](double) { return cplx(0.2); }, nullptr, T, 512, 1000);
    double e1 = 0;
    for (std::size_t i = 0; i < orc.x.size(); ++i)
        if (std::abs(orc.x[i]) <= 1) e1 = std::max(e1, std::abs(lin.eval(T, orc.x[i]) - orc.y[i]));
    o.require(verify::at_most("linear: L^inf(-1,1) mild vs Crank-Nicolson", e1, 1e-3));

    SemilinearTerm g;
    g.g = [](double, cplx, cplx s, cplx) { return s * s; };
    g.epsilon = 1.0;
    g.lipschitz_C0 = 2.0;
    auto semi = solve_semilinear(fields::scaled(0.05, cosx), g, nullptr, T, 2.0, 0.12);
    auto orc2 = verify::periodic_crank_nicolson([](double x) { return cplx(0.05 * std::cos(x)); }, nullptr, nullptr,
                                                [](cplx s, cplx) { return s * s; }, T, 512, 1000);
    double e2 = 0;
    for (std::size_t i = 0; i < orc2.x.size(); ++i)
        if (std::abs(orc2.x[i]) <= 1) e2 = std::max(e2, std::abs(semi.eval(T, orc2.x[i]) - orc2.y[i]));
    o.require(verify::at_most("semilinear s^2, y0 = 0.05 cos x: L^inf(-1,1)", e2, 1e-3));
    o.summary = fmt("linear %.2e, semilinear %.2e (oracle: periodic CN, 512 cells, 1000 steps)", e1, e2);
    return o;
}

// ---------------------------------------------------------------- 7

Outcome criterion7() {
    Outcome o;
    GridProblem P;  // box [-6, 6], omega = {|x| > 2}, T = 1
    P.h = 0.04;
    P.dt = 0.02;
    Cutoff bump = cutoff(CutoffProfile::bump, 0.0, 1.0);
    CVec y0 = sample_interior(P, [&](double x) { return cplx(bump.value(x)); });
    auto sol = hum_control(P, y0, nullptr);
    o.require(verify::at_most("||Y(T)|| / ||y0||", sol.final_norm / sol.initial_norm, 1e-3));
    o.require(verify::at_most("CG iterations", sol.cg_iterations, 500));
    o.require(verify::at_most("duality identity (relative)", sol.duality_gap, 1e-8));

    auto ycheck = solve_forward(P, y0);
    auto glued = glue_control(P, sol, ycheck, cutoff(CutoffProfile::quintic, 2.0, 3.0));
    const int N = P.intervals();
    double yT = 0, y00 = 0, inside = 0, init = 0;
    for (int i = 0; i <= P.cells(); ++i) {
        yT += std::norm(glued.y.v[N][i]);
        y00 += std::norm(glued.y.v[0][i]);
        if (i > 0 && i < P.cells()) init = std::max(init, std::abs(glued.y.v[0][i] - y0[i - 1]));
        if (std::abs(P.x(i)) < 2.0)
            for (int k = 0; k <= N; ++k) inside = std::max(inside, std::abs(glued.h.v[k][i]));
    }
    double rel = std::sqrt(yT / y00);
    o.require(verify::at_most("glued ||y(T)|| / ||y0||", rel, 1e-3));
    o.require(verify::at_most("glued y(0) - y0", init, 1e-14));
    o.require(verify::at_most("glued control on B(2)", inside, 0.0));

    // the glued pair solves the scheme only up to the discrete product rule
    std::vector<CVec> src;
    for (int k = 0; k <= N; ++k) src.emplace_back(glued.h.v[k].begin() + 1, glued.h.v[k].end() - 1);
    auto re = solve_forward(P, y0, &src);
    double rT = 0;
    for (int i = 0; i <= P.cells(); ++i) rT += std::norm(re.v[N][i]);
    o.note(fmt("re-simulated with the glued control as source: ||y(T)|| / ||y0|| = %.2e", std::sqrt(rT / y00)));
    o.summary = fmt("coarse tier h = %g dt = %g: ratio %.2e, CG %g", P.h, P.dt, sol.final_norm / sol.initial_norm,
                    sol.cg_iterations) +
                fmt(", gap %.1e, glued %.2e", sol.duality_gap, rel);
    return o;
}

// ---------------------------------------------------------------- 8

std::vector<std::pair<std::string, AnalyticField>> reach_targets() {
    return {{"1", fields::constant(1.0)},
            {"z", fields::polynomial({0.0, 1.0})},
            {"z^2", fields::polynomial({0.0, 0.0, 1.0})},
            {"e^z", fields::exponential(1.0)},
            {"1/(4-z^2)", fields::rational({1.0}, {2.0, -2.0}, -1.0, DiamondDomain(0.5, 1.9, 1))}};
}

Outcome criterion8() {
    Outcome o;
    RVec ratios;
    for (const auto& [name, y1] : reach_targets()) {
        ReachProblem pb;
        pb.y1 = y1;
        pb.alpha = 0.5;
        auto c = synthesize(pb);
        ReachOptions fine;
        fine.mild.steps = 64;
        auto c2 = synthesize(pb, fine);
        o.require(verify::at_most("target " + name + ": Richardson L^inf relative error", c.linf_rel, 1e-2));
        o.require(verify::at_most("target " + name + ": control ratio finite", c.control_ratio, DBL_MAX));
        ratios.push_back(c.control_ratio);
        o.note(fmt("    control_ratio %.4f (48 steps) vs %.4f (64 steps), relative change %.2e", c.control_ratio,
                   c2.control_ratio, std::abs(c2.control_ratio - c.control_ratio) / c.control_ratio));
    }
    double mean = 0;
    for (double r : ratios) mean += r / ratios.size();
    double spread = 0;
    for (double r : ratios) spread = std::max(spread, std::abs(r - mean) / mean);
    o.require(verify::at_most("control ratio within +-20% of the mean across targets", spread, 0.2));
    o.summary = fmt("control ratios %.3f %.3f %.3f %.3f", ratios[0], ratios[1], ratios[2], ratios[3]) +
                fmt(" %.3f; across-target spread %.2f", ratios[4], spread);
    return o;
}

// ---------------------------------------------------------------- 9

Outcome criterion9() {
    Outcome o;
    const double delta = 0.003;
    ReachProblem pb;
    pb.y1 = fields::scaled(delta, reach_targets()[4].second);
    pb.alpha = 0.5;
    SemilinearTerm g;
    g.g = [](double, cplx, cplx s, cplx) { return s * s; };
    g.epsilon = 1.0;
    g.lipschitz_C0 = 2.0;
    pb.g = g;
    auto c = synthesize(pb);
    o.require(verify::at_most("L^inf relative error on [-0.9, 0.9]", c.linf_rel, 5e-2));
    o.summary = fmt("delta = %g: error %.2e, %g fixed-point iterations, control ratio %.3f", delta, c.linf_rel,
                    c.fixed_point_iterations, c.control_ratio);
    return o;
}

// ---------------------------------------------------------------- 10

Outcome criterion10() {
    Outcome o;
    const double T = 0.5;
    auto u = verify::rough_trace(20260110, T, 100);
    auto rep = verify::smoothing_check(u, T, 0.9, 24, 400, 3200);
    o.require(verify::at_most("decay ratio at degree 24", rep.rho_full, 0.75));
    o.require(verify::at_most("relative change of the ratio at degree 12", rep.change, 0.10));
    o.note(std::string("geometric-shape test: degree 24 ") + (rep.geometric_full ? "yes" : "no") + ", degree 12 " +
           (rep.geometric_half ? "yes" : "no"));
    o.summary = fmt("100 noise knots per side: rho %.3f (degree 24), %.3f (degree 12), change %.3f", rep.rho_full,
                    rep.rho_half, rep.change) +
                fmt(", discretization %.1e", rep.discretization);
    return o;
}

// ---------------------------------------------------------------- 11

Outcome criterion11() {
    Outcome o;
    const double T = 1.0, T0w = 0.25, T1w = 0.25;
    auto w = make_weights(1.0, 1.0, T, T0w, T1w, 0.75, 5.0);
    o.require(verify::at_most("theta(0) - 2", std::abs(theta_eval(w, 0.0) - 2.0), 0.0));
    double plateau = 0;
    for (int i = 0; i <= 100; ++i) plateau = std::max(plateau, std::abs(theta_eval(w, T0w + (T - 2 * T1w - T0w) * i / 100) - 1.0));
    o.require(verify::at_most("plateau |theta - 1|", plateau, 0.0));
    o.require(verify::at_most("theta(T - T1w/2) - 2/T1w", std::abs(theta_eval(w, T - T1w / 2) - 2 / T1w), 0.0));
    double mu = w.s * w.lambda * w.lambda * std::exp(2 * w.lambda);
    o.require(verify::at_most("mu - s lambda^2 e^{2 lambda}", std::abs(w.mu - mu), 0.0));
    o.require(verify::at_most("mu - e^2 (s = lambda = 1)", std::abs(w.mu - std::exp(2.0)), 0.0));

    // jumps of theta and of its one-sided difference quotients across the plateau joints, step 1e-6
    double jv = 0, js = 0;
    for (double tj : {T0w, T - 2 * T1w}) {
        const double e = 1e-6;
        jv = std::max(jv, std::abs(theta_eval(w, tj + e) - theta_eval(w, tj - e)));
        double dl = (theta_eval(w, tj) - theta_eval(w, tj - e)) / e, dr = (theta_eval(w, tj + e) - theta_eval(w, tj)) / e;
        js = std::max(js, std::abs(dr - dl));
    }
    o.require(verify::at_most("theta jump across plateau joints", jv, 1e-8));
    o.require(verify::at_most("theta' jump across plateau joints", js, 1e-8));

    CounterRng rng(11);
    std::uint64_t c = 0;
    double worst_lo = -1e300, worst_hi = -1e300;
    const double l = w.lambda, top = l * std::exp(12 * l);
    if (lambda0_beta(w.beta) > l) throw Error("acceptance", "lambda below lambda_0(beta)");
    for (int i = 0; i < 10000; ++i) {
        double t = rng.uniform(c++, 0, T * (1 - 1e-9));
        double x = rng.uniform(c++, -w.R_omega, w.R_omega);
        auto v = weight_eval(w, t, RVec{x});
        double th = theta_eval(w, t);
        worst_lo = std::max(worst_lo, (w.beta * th * top - v.phi) / (th * top));
        worst_hi = std::max(worst_hi, (v.phi - th * top) / (th * top));
    }
    o.require(verify::at_most("beta theta lambda e^{12 lambda} - phi (relative)", worst_lo, 0.0));
    o.require(verify::at_most("phi - theta lambda e^{12 lambda} (relative)", worst_hi, 0.0));
    o.summary = fmt("theta(0) = %g, theta(T - T1w/2) = %g, mu = %.6f, 10^4 sandwich samples", theta_eval(w, 0.0),
                    theta_eval(w, T - T1w / 2), w.mu);
    return o;
}

using Runner = Outcome (*)();

}  // namespace

int main(int argc, char** argv) {
    std::map<int, Runner> all{{1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},
                              {5, criterion5}, {6, criterion6}, {7, criterion7}, {8, criterion8},
                              {9, criterion9}, {10, criterion10}, {11, criterion11}};
    std::vector<int> which;
    for (int i = 1; i < argc; ++i)
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) which.push_back(std::atoi(argv[++i]));
    if (which.empty())
        for (auto& [k, _] : all) which.push_back(k);
    bool ok = true;
    for (int k : which) {
        auto it = all.find(k);
        if (it == all.end()) {
            std::printf("criterion %d: FAIL unknown criterion\n", k);
            ok = false;
            continue;
        }
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = it->second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.summary = std::string("stage error: ") + e.what();
        }
        double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %d: %s  %s  [%.1f s]\n", k, o.pass ? "PASS" : "FAIL", o.summary.c_str(), sec);
        for (const auto& d : o.details) std::printf("    %s\n", d.c_str());
        std::fflush(stdout);
        ok = ok && o.pass;
    }
    return ok ? 0 : 1;
}
