#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "reachkit/nullcontrol.hpp"

using namespace reachkit;

namespace {

GridProblem box(double h, double dt, double T = 1.0) {
    GridProblem P;
    P.L = 6.0;
    P.h = h;
    P.dt = dt;
    P.T = T;
    P.omega_inner = 2.0;
    return P;
}

double max_error(const GridProblem& P, const SpaceTimeField& Y, const std::function<double(double, double)>& exact) {
    double e = 0;
    for (int k = 0; k <= P.intervals(); ++k)
        for (int i = 0; i <= P.cells(); ++i) e = std::max(e, std::abs(Y.v[k][i] - exact(k * P.dt, P.x(i))));
    return e;
}

}  // namespace

TEST_CASE("Carleman weights") {
    auto w = make_weights(1.0, 1.0, 1.0, 0.25, 0.25);
    CHECK(w.mu == doctest::Approx(std::exp(2.0)).epsilon(1e-15));
    CHECK(theta_eval(w, 0.0) == 2.0);
    for (double t : {0.25, 0.3, 0.5}) CHECK(theta_eval(w, t) == 1.0);
    CHECK(theta_eval(w, 1.0 - 0.125) == doctest::Approx(2 / 0.25).epsilon(1e-14));
    CHECK_THROWS_AS(theta_eval(w, 1.0), Error);

    // psi = 6.5 at |x| = R / sqrt(2), on the plateau
    RVec x{w.R_omega / std::sqrt(2.0)};
    auto v = weight_eval(w, 0.4, x);
    CHECK(v.phi == doctest::Approx(std::exp(12.0) - std::exp(6.5)).epsilon(1e-14));
    CHECK(v.xi == doctest::Approx(std::exp(6.5)).epsilon(1e-14));
    CHECK(v.Phi == doctest::Approx(std::exp(12.0)).epsilon(1e-14));

    const double beta = 0.75, l0 = lambda0_beta(beta);
    for (double lambda : {l0, 1.5 * l0, 3.0}) {
        auto wl = make_weights(2.0, lambda, 1.0, 0.25, 0.25, beta);
        for (double t : {0.0, 0.1, 0.4, 0.7, 0.9})
            for (double r : {0.0, 1.0, 3.0, 5.0}) {
                double th = theta_eval(wl, t), top = th * lambda * std::exp(12 * lambda);
                double phi = weight_eval(wl, t, RVec{r}).phi;
                CHECK(phi <= top * (1 + 1e-14));
                CHECK(phi >= beta * top * (1 - 1e-14));
            }
    }

    CHECK_THROWS_AS(make_weights(0.5, 1.0, 1.0, 0.25, 0.25), Error);
    CHECK_THROWS_AS(make_weights(1.0, 1.0, 1.0, 0.25, 0.5), Error);
    CHECK_THROWS_AS(make_weights(1.0, 1.0, 0.6, 0.25, 0.25), Error);
}

TEST_CASE("grid problem validation") {
    auto P = box(0.04, 0.02);
    CHECK_NOTHROW(P.validate());
    auto bad = P;
    bad.h = 0.07;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = P;
    bad.omega_inner = 0.5;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("forward solver") {
    const double L = 6.0, k = pi / (2 * L);
    auto mode = [&](double t, double x) { return std::exp(-k * k * t) * std::sin(k * (x + L)); };
    auto mode_err = [&](double h, double dt) {
        auto P = box(h, dt);
        auto Y = solve_forward(P, sample_interior(P, [&](double x) { return cplx(mode(0, x)); }));
        return max_error(P, Y, mode);
    };
    double e1 = mode_err(0.1, 0.05), e2 = mode_err(0.05, 0.025);
    CHECK(e1 <= 1e-3);
    CHECK(std::log2(e1 / e2) >= 1.9);

    // manufactured y = e^{-t} cos x with f = q y, Dirichlet data from the exact solution
    auto exact = [](double t, double x) { return std::exp(-t) * std::cos(x); };
    auto manu_err = [&](double h, double dt) {
        auto P = box(h, dt);
        P.q = [](double, double x) { return cplx(0.5 + 0.1 * x * x); };
        std::vector<CVec> f;
        for (int n = 0; n <= P.intervals(); ++n) {
            double t = n * P.dt;
            f.push_back(sample_interior(P, [&](double x) { return P.q(t, x) * exact(t, x); }));
        }
        BoundaryData bc;
        bc.left = [&](double t) { return cplx(exact(t, -6.0)); };
        bc.right = [&](double t) { return cplx(exact(t, 6.0)); };
        auto Y = solve_forward(P, sample_interior(P, [&](double x) { return cplx(exact(0, x)); }), &f, &bc);
        return max_error(P, Y, exact);
    };
    double m1 = manu_err(0.1, 0.05), m2 = manu_err(0.05, 0.025);
    CHECK(std::log2(m1 / m2) >= 1.9);

    auto P = box(0.1, 0.05);
    auto Z = solve_forward(P, CVec(P.interior(), 0.0));
    for (const auto& v : Z.v)
        for (auto c : v) CHECK(c == cplx(0.0));
}

TEST_CASE("penalized HUM") {
    auto P = box(0.1, 0.05);
    auto zero = hum_control(P, CVec(P.interior(), 0.0), nullptr);
    CHECK(zero.final_norm == 0.0);
    CHECK(zero.cg_iterations == 0);
    for (const auto& v : zero.H)
        for (auto c : v) CHECK(c == cplx(0.0));

    // directional derivatives of the dual functional against the operator action
    HumOperator op(P);
    const int n = P.interior();
    CounterRng rng(20260107);
    std::uint64_t c = 0;
    auto draw = [&] {
        CVec v(n);
        for (auto& e : v) e = cplx(rng.uniform(c++, -1, 1), rng.uniform(c++, -1, 1));
        return v;
    };
    CVec yfree = draw(), phi = draw();
    const double eps = 1e-4;
    CVec g = op.dual_gradient(phi, yfree, eps);
    double worst = 0;
    for (int r = 0; r < 10; ++r) {
        CVec d = draw(), p = phi, m = phi;
        const double s = 1e-3;
        for (int i = 0; i < n; ++i) {
            p[i] += s * d[i];
            m[i] -= s * d[i];
        }
        double fd = (op.dual_functional(p, yfree, eps) - op.dual_functional(m, yfree, eps)) / (2 * s);
        double an = inner_grid(g, d, P.h).real();
        worst = std::max(worst, std::abs(fd - an) / std::abs(an));
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("gluing") {
    auto P = box(0.1, 0.05);
    auto y0 = sample_interior(P, [](double x) { return cplx(std::exp(-x * x)); });
    auto ycheck = solve_forward(P, y0);
    ControlSolution sol;
    sol.Y = solve_forward(P, sample_interior(P, [](double x) { return cplx(std::cos(x)); }));
    sol.H.assign(P.intervals(), CVec(P.interior(), 0.0));
    Cutoff eta = cutoff(CutoffProfile::quintic, 2.0, 3.0);

    auto off = [](double) { return std::array<double, 2>{0.0, 0.0}; };
    auto g = glue_control(P, sol, ycheck, eta, nullptr, off);
    double worst = 0;
    for (int k = 0; k <= P.intervals(); ++k)
        for (int i = 0; i <= P.cells(); ++i)
            worst = std::max(worst, std::abs(g.y.v[k][i] - eta.value(std::abs(P.x(i))) * sol.Y.v[k][i]));
    CHECK(worst == 0.0);

    // with the default time cutoff y = ycheck on B(2) near t = 0 and the control vanishes on B(2)
    auto d = glue_control(P, sol, ycheck, eta);
    for (int i = 0; i <= P.cells(); ++i)
        if (std::abs(P.x(i)) <= 2.0) {
            CHECK(d.y.v[0][i] == sol.Y.v[0][i]);
            for (int k = 0; k <= P.intervals(); ++k) CHECK(d.h.v[k][i] == cplx(0.0));
        }
    CHECK_THROWS_AS(glue_control(P, sol, ycheck, cutoff(CutoffProfile::quintic, 1.0, 3.0)), Error);
}
