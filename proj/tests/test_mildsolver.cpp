#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "reachkit/mildsolver.hpp"

using namespace reachkit;

namespace {

const double alpha = 2.0;

AnalyticField cosine() { return fields::trig_polynomial({0.0, 1.0}, {0.0, 0.0}); }

MildOptions quick() {
    MildOptions o;
    o.steps = 20;
    return o;
}

SemilinearTerm square(double eps = 1.0) {
    SemilinearTerm g;
    g.g = [](double, cplx, cplx s, cplx) { return s * s; };
    g.epsilon = eps;
    g.lipschitz_C0 = 2 * eps;
    return g;
}

const std::vector<cplx> probes = {cplx(0.0), cplx(0.4), cplx(-0.7), cplx(0.2, 0.3), cplx(-0.3, -0.25)};

}  // namespace

TEST_CASE("duhamel step") {
    auto y0 = cosine();
    for (cplx z : {cplx(0.3), cplx(0.2, 0.3)})
        CHECK(std::abs(duhamel_step(y0, nullptr, 0.4, z, alpha) - propagate_any(y0, alpha, 0.4, {z}).value) <= 1e-14);

    auto zero = fields::constant(0.0);
    for (double t : {0.1, 0.5, 1.0})
        CHECK(std::abs(duhamel_step(zero, steady(fields::constant(1.0)), t, cplx(0.3, 0.1), alpha) - t) <= 1e-10);

    TimeField f = [](double s) { return fields::scaled(std::exp(-s), cosine()); };
    for (double t : {0.2, 0.8})
        for (cplx z : {cplx(0.5), cplx(0.1, 0.3)}) {
            cplx exact = t * std::exp(-t) * std::cos(z);
            CHECK(std::abs(duhamel_step(zero, f, t, z, alpha) - exact) <= 1e-8);
        }
    // k = 2 mode: (e^{-t} - e^{-4t}) / 3 cos(2x)
    auto c2 = fields::trig_polynomial({0.0, 0.0, 1.0}, {0.0, 0.0, 0.0});
    TimeField f2 = [c2](double s) { return fields::scaled(std::exp(-s), c2); };
    CHECK(std::abs(duhamel_step(zero, f2, 0.5, cplx(0.2), alpha) -
                   (std::exp(-0.5) - std::exp(-2.0)) / 3 * std::cos(0.4)) <= 1e-8);
    CHECK_THROWS_AS(duhamel_step(zero, f, -0.1, cplx(0.0), alpha), Error);
}

TEST_CASE("linear solver closed forms") {
    const double T = 0.5;
    auto y0 = cosine();
    auto engine = make_engine(alpha, T, quick());

    auto hom = solve_linear(y0, {}, nullptr, T, alpha, quick(), engine);
    for (cplx z : probes)
        CHECK(std::abs(hom.eval(T, z) - std::exp(-T) * std::cos(z)) <= 1e-8);

    const double c = 0.7;
    auto lot = LowerOrderTerms::make(steady(fields::constant(c)), nullptr);
    auto tr = solve_linear(y0, lot, nullptr, T, alpha, quick(), engine);
    // the piecewise-linear time source makes this second order in dt rather than exact
    auto if_error = [&](const MildTrajectory& s) {
        double e = 0;
        for (double t : {0.25, 0.5})
            for (cplx z : probes) e = std::max(e, std::abs(s.eval(t, z) - std::exp(-(c + 1) * t) * std::cos(z)));
        return e;
    };
    MildOptions half = quick();
    half.steps = 10;
    double e20 = if_error(tr), e10 = if_error(solve_linear(y0, lot, nullptr, T, alpha, half));
    CHECK(e20 <= 3e-5);
    CHECK(std::log2(e10 / e20) >= 1.9);
    CHECK(tr.halvings == 0);
    for (const auto& e : tr.iteration_log)
        if (e.accepted) CHECK(e.ratio <= 0.5 + 1e-12);

    // state(0) is the data and real points agree with complex evaluation on the real axis
    for (cplx z : probes) CHECK(std::abs(tr.eval(0.0, z) - y0(z)) <= 1e-8);

    // linearity in the data
    auto y1 = fields::exponential(cplx(0.0, 2.0));
    auto a = solve_linear(y1, lot, nullptr, T, alpha, quick(), engine);
    auto ab = solve_linear(fields::sum(fields::scaled(2.0, y0), fields::scaled(cplx(0, -1), y1)), lot, nullptr, T,
                           alpha, quick(), engine);
    for (cplx z : probes)
        CHECK(std::abs(ab.eval(T, z) - (2.0 * tr.eval(T, z) - cplx(0, 1) * a.eval(T, z))) <= 1e-9);
}

TEST_CASE("semilinear solver") {
    const double T = 0.5, c = 0.05;
    auto engine = make_engine(alpha, T, quick());
    auto tr = solve_semilinear(fields::constant(c), square(), nullptr, T, alpha, 0.12, quick(), engine);
    for (double t : {0.1, 0.3, 0.5})
        for (cplx z : probes) CHECK(std::abs(tr.eval(t, z) - c / (1 - c * t)) <= 1e-8);

    // g = 0 reduces to the homogeneous flow
    SemilinearTerm zero;
    zero.g = [](double, cplx, cplx, cplx) { return cplx(0.0); };
    zero.epsilon = 1.0;
    auto y0 = fields::scaled(0.05, cosine());
    auto h = solve_semilinear(y0, zero, nullptr, T, alpha, 0.12, quick(), engine);
    for (cplx z : probes) CHECK(std::abs(h.eval(T, z) - 0.05 * std::exp(-T) * std::cos(z)) <= 1e-9);

    CHECK_THROWS_WITH_AS(solve_semilinear(fields::constant(0.5), square(), nullptr, T, alpha, 0.12, quick(), engine),
                         doctest::Contains("data not small enough"), Error);
    SemilinearTerm shifted = square();
    shifted.g = [](double, cplx, cplx s, cplx) { return s * s + 1e-3; };
    CHECK_THROWS_AS(check_semilinear(shifted, T), Error);
    SemilinearTerm loose = square();
    loose.lipschitz_C0 = 0.1;
    CHECK_THROWS_AS(check_semilinear(loose, T), Error);
}

TEST_CASE("residual check") {
    SpaceTimeEval mode = [](double t, double x) { return cplx(std::exp(-4 * t) * std::cos(2 * x)); };
    RightHandSide none = [](double, double, cplx, cplx) { return cplx(0.0); };
    auto r = residual_check(mode, none, 0.5, 0.02, 0.02);
    CHECK(r.order >= 1.9);

    SpaceTimeEval zero = [](double, double) { return cplx(0.0); };
    auto z = residual_check(zero, none, 0.5, 0.02, 0.02);
    CHECK(z.residual_h == 0.0);
    CHECK(z.residual_h2 == 0.0);

    const double T = 0.5;
    auto lot = LowerOrderTerms::make(steady(fields::scaled(0.3, cosine())), steady(fields::constant(0.2)));
    auto tr = solve_linear(cosine(), lot, nullptr, T, alpha, quick());
    auto s = residual_check(trajectory_eval(tr), linear_rhs(lot, nullptr), T, 0.02, 0.02);
    CHECK(s.residual_h2 < s.residual_h);
}
