#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "reachkit/analytic.hpp"

#include <numbers>

using namespace reachkit;

namespace {

AnalyticField sine() { return fields::trig_polynomial({0.0, 0.0}, {0.0, 1.0}); }

AnalyticField conj_double() {
    AnalyticField f;
    f.validity = fields::whole(1);
    f.name = "conj";
    f.ext = [](const cplx* z) { return std::conj(*z); };
    return f;
}

void sample(double r, int n, const std::function<cplx(double)>& f, RVec& xs, CVec& vals) {
    xs.clear();
    vals.clear();
    for (int i = 0; i < n; ++i) {
        double x = -r * std::cos(std::numbers::pi * (i + 0.5) / n);
        xs.push_back(x);
        vals.push_back(f(x));
    }
}

}  // namespace

TEST_CASE("xalpha norm examples") {
    auto one = xalpha_norm(fields::constant(1.0), DiamondDomain(2.0));
    CHECK(one.total == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(one.total == one.real_sup + one.diamond_sup);

    auto s = xalpha_norm(sine(), DiamondDomain(2.0, 1.0, 1));
    CHECK(s.real_sup == doctest::Approx(1.0).epsilon(1e-6));
    // dense boundary maximum of sqrt(sin^2 a + sinh^2 b)
    double oracle = 0;
    for (const auto& z : boundary_sample_c(DiamondDomain(2.0), 100000)) {
        double a = z[0].real(), b = z[0].imag();
        oracle = std::max(oracle, std::sqrt(std::sin(a) * std::sin(a) + std::sinh(b) * std::sinh(b)));
    }
    CHECK(oracle == doctest::Approx(std::sin(1.0)).epsilon(1e-12));
    CHECK(s.diamond_sup == doctest::Approx(oracle).epsilon(1e-9));

    auto z = xalpha_norm(fields::polynomial({0.0, 1.0}), DiamondDomain(1.0), 1.0);
    CHECK(z.diamond_sup == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(z.real_sup == doctest::Approx(1.0).epsilon(1e-15));

    auto e = fields::rational({1.0}, {cplx(0, 1), cplx(0, -1)}, 1.0, DiamondDomain(2.0, 1.5, 1));
    CHECK_THROWS_WITH_AS(xalpha_norm(e, DiamondDomain(2.0, 2.5, 1)), doctest::Contains("not declared holomorphic"),
                         Error);
}

TEST_CASE("xalpha norm stabilizes and respects inclusion") {
    for (const auto& f : {sine(), fields::exponential(cplx(0.5, 0.2)), fields::gaussian(1.0)}) {
        auto a = xalpha_norm(f, DiamondDomain(2.0), 8.0, 10000);
        auto b = xalpha_norm(f, DiamondDomain(2.0), 8.0, 20000);
        CHECK(std::abs(b.total - a.total) <= 5e-3 * a.total);
        auto small = xalpha_norm(f, DiamondDomain(2.0, 0.7, 1), 8.0, 10000);
        CHECK(small.diamond_sup <= a.diamond_sup + 1e-10);
    }
}

TEST_CASE("xalpha1 norm adds the derivative") {
    // f = z^2 on the unit diamond of opening 1, truncation 1: |f| <= 1 and |f'| <= 2
    auto r = xalpha1_norm(fields::polynomial({0.0, 0.0, 1.0}), DiamondDomain(1.0), 1.0);
    CHECK(r.total == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("decay rate") {
    RVec xs;
    CVec vals;
    sample(1.0, 200, [](double x) { return cplx(1 - 2 * x + 0.5 * x * x * x); }, xs, vals);
    auto p = decay_rate(xs, vals, 1.0, 20);
    CHECK(p.rho == 0.0);
    CHECK(p.finite_expansion);

    sample(1.0, 400, [](double x) { return cplx(1.0 / (1 + x * x)); }, xs, vals);
    auto r = decay_rate(xs, vals, 1.0, 40);
    CHECK(r.geometric);
    CHECK(r.rho == doctest::Approx(1.0 / (1.0 + std::sqrt(2.0))).epsilon(0.02));

    sample(1.0, 400, [](double x) { return cplx(std::abs(x)); }, xs, vals);
    auto a = decay_rate(xs, vals, 1.0, 40);
    CHECK((!a.geometric || a.rho >= 0.9));

    CHECK_THROWS_AS(decay_rate({0.0, 0.5}, {1.0, 2.0}, 1.0, 8), Error);
}

TEST_CASE("cauchy-riemann residual") {
    DiamondDomain D(2.0);
    auto sq = fields::polynomial({0.0, 0.0, 1.0});
    double r1 = cauchy_riemann_residual(sq, D, 1e-2, 64);
    double r2 = cauchy_riemann_residual(sq, D, 5e-3, 64);
    CHECK(r1 <= 1e-2 * 1e-2 * 10);
    // z^2 is exact under centered differences up to rounding, so the order is measured on z^4 and e^z
    for (const auto& f : {fields::polynomial({0.0, 0.0, 0.0, 0.0, 1.0}), fields::exponential(1.0)}) {
        double a = cauchy_riemann_residual(f, D, 1e-2, 64);
        double b = cauchy_riemann_residual(f, D, 5e-3, 64);
        CHECK(std::log2(a / b) >= 1.9);
    }
    CHECK(r2 <= r1 + 1e-12);

    double c1 = cauchy_riemann_residual(conj_double(), D, 1e-2, 64);
    double c2 = cauchy_riemann_residual(conj_double(), D, 1e-3, 64);
    CHECK(c1 == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(c2 == doctest::Approx(2.0).epsilon(1e-10));

    CHECK(cauchy_riemann_residual(fields::constant(cplx(3, -1)), D, 1e-3, 64) <= 1e-14);
}

TEST_CASE("composite fields") {
    auto f = fields::sum(fields::exponential(1.0), fields::polynomial({0.0, 1.0}));
    auto g = fields::product(sine(), fields::exponential(cplx(0, 1)));
    for (cplx z : {cplx(0.3, 0.1), cplx(-0.5, 0.2)}) {
        CHECK(std::abs(f(z) - (std::exp(z) + z)) <= 1e-14);
        CHECK(std::abs(g(z) - std::sin(z) * std::exp(cplx(0, 1) * z)) <= 1e-14);
    }
    // real evaluation agrees with the extension on the real section
    for (const auto& h : {f, g, fields::gaussian(0.7), sine()}) {
        double worst = 0;
        for (double x = -3; x <= 3; x += 0.01) worst = std::max(worst, std::abs(h.real_at(x) - h(cplx(x))));
        CHECK(worst <= 1e-12);
    }
}
