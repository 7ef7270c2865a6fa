#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "reachkit/semigroup.hpp"
#include "reachkit/verify.hpp"

using namespace reachkit;
using namespace reachkit::verify;

TEST_CASE("heat kernel") {
    CHECK(std::abs(kernel({1 / (4 * pi), 1}, {0.0}) - 1.0) <= 1e-15);
    CHECK(std::abs(kernel({0.25, 1}, {cplx(0, 1)}) - std::exp(1.0) / std::sqrt(pi)) <= 1e-14);
    CHECK(std::abs(kernel({0.25, 1}, {cplx(0, 1)}) - 1.53362) <= 1e-5);
    CHECK_THROWS_AS(kernel({0.0, 1}, {0.0}), Error);
    CHECK_THROWS_AS(kernel({-1.0, 1}, {0.0}), Error);

    // mass one by Gauss-Legendre on +-12 sqrt(t)
    for (double t : {1e-3, 0.1, 2.0}) {
        RVec x, w;
        const double W = 12 * std::sqrt(t);
        composite_nodes(uniform_breaks(-W, W, 16), 16, x, w);
        cplx m = 0;
        for (std::size_t i = 0; i < x.size(); ++i) m += w[i] * kernel({t, 1}, {x[i]});
        CHECK(std::abs(m - 1.0) <= 1e-10);
    }
}

TEST_CASE("propagate at real points") {
    for (double t : {1e-3, 0.3, 5.0})
        for (double x : {-2.0, 0.0, 0.7}) CHECK(std::abs(propagate_real(fields::constant(1.0), t, x) - 1.0) <= 1e-10);

    auto c2 = fields::trig_polynomial({0.0, 0.0, 1.0}, {0.0, 0.0, 0.0});
    CHECK(std::abs(propagate_real(c2, 0.1, 0.3) - std::exp(-0.4) * std::cos(0.6)) <= 1e-10);

    auto g = fields::gaussian(0.2);
    for (double x : {0.0, 0.5, -1.3})
        CHECK(std::abs(propagate_real(g, 0.3, x) - kernel({0.5, 1}, {x})) <= 1e-10);

    // t = 0 returns the data
    CHECK(propagate_real(c2, 0.0, 0.3) == c2.real_at(0.3));

    QuadratureRule coarse;
    coarse.halfwidth = 6;
    CHECK_THROWS_WITH_AS(propagate_real(c2, 0.1, 0.3, coarse), doctest::Contains("rule too coarse"), Error);
    QuadratureRule thin;
    thin.panels = 4;
    CHECK_THROWS_AS(thin.validate(), Error);
    QuadratureRule narrow;
    narrow.halfwidth = 5;
    CHECK_THROWS_AS(narrow.validate(), Error);
}

TEST_CASE("propagate at complex points, d = 1") {
    const double alpha = 2.0;
    auto one = fields::constant(1.0);
    double worst = 0;
    for (const auto& z : boundary_sample_c(DiamondDomain(alpha), 16))
        for (double t : {1e-3, 0.1, 1.0}) {
            auto r = propagate_complex_1d(one, alpha, t, z[0]);
            worst = std::max(worst, std::abs(r.value - 1.0));
            CHECK(r.value == r.y1_part + r.y2_part);
        }
    CHECK(worst <= 1e-8);

    auto e = fields::fourier({1.0});
    cplx z(0.2, 0.3);
    auto r = propagate_complex_1d(e, alpha, 0.1, z);
    cplx exact = std::exp(-0.1) * std::exp(I * z);
    CHECK(std::abs(r.value - exact) <= 1e-6 * std::abs(exact));
    CHECK(std::abs(r.gradient[0] - I * exact) <= 1e-6 * std::abs(exact));
    CHECK(r.case_tag == CaseTag::contour_1d);

    // contour independence for entire data when the straight segment is usable
    for (double t : {0.2, 1.0}) {
        auto c = propagate_complex_1d(fields::exponential(cplx(0.5, 0.2)), alpha, t, cplx(0.1, 0.2));
        cplx seg = interior_segment_part(fields::exponential(cplx(0.5, 0.2)), t, cplx(0.1, 0.2));
        CHECK(std::abs(c.y2_part - seg) <= 1e-9);
    }

    CHECK_THROWS_AS(propagate_complex_1d(one, alpha, 0.1, cplx(0.5, 0.4)), Error);
    CHECK_THROWS_AS(propagate_complex_1d(one, 0.9, 0.1, cplx(0.1, 0.1)), Error);
    auto narrow = fields::rational({1.0}, {cplx(0, 0.8), cplx(0, -0.8)}, 1.0, DiamondDomain(2.0, 1.5, 1));
    CHECK_THROWS_AS(propagate_complex_1d(narrow, 1.2, 0.1, cplx(0.1, 0.1)), Error);
}

TEST_CASE("closed-form constant bounds at alpha = 2") {
    CHECK(y2_factor(2.0) == doctest::Approx(2 * std::sqrt(5.0 / 3.0)));
    CHECK(y2_factor(2.0) == doctest::Approx(2.582).epsilon(1e-3));
    auto fam = random_trig_family(11, 4, 6);
    auto rep = estimate_constants(2.0, fam, {1e-2, 0.1, 1.0}, 64);
    for (const auto& c : rep.checks) CHECK_MESSAGE(c.pass, c.name);
}

TEST_CASE("propagate at complex points, d = 2") {
    const double alpha = 2.0;
    auto one = fields::constant(1.0, 2);
    QuadratureRule rule;
    for (CVec Z : {CVec{cplx(0.1, 0.1), cplx(0.2, -0.05)}, CVec{cplx(-0.3, 0.0), cplx(0.1, 0.2)}}) {
        auto r = propagate_complex_nd(one, alpha, 0.05, Z, rule);
        CHECK(std::abs(r.value - 1.0) <= 1e-7);
    }
    auto f = fields::fourier({1.0, 1.0});
    CVec Z{cplx(0.1, 0.15), cplx(0.2, 0.0)};
    auto r = propagate_complex_nd(f, alpha, 0.05, Z, rule);
    cplx exact = std::exp(-2 * 0.05) * std::exp(I * (Z[0] + Z[1]));
    CHECK(std::abs(r.value - exact) <= 1e-6 * std::abs(exact));

    // B = 0 agrees with the real convolution
    auto g = fields::gaussian(0.3, 2);
    auto rr = propagate_complex_nd(g, alpha, 0.1, CVec{0.2, -0.1}, rule);
    CHECK(std::abs(rr.value - propagate_real(g, 0.1, RVec{0.2, -0.1})) <= 1e-8);
}

TEST_CASE("case inequalities") {
    auto rep = case_inequalities(2.0, 100000, 20260101);
    CHECK(rep.samples_2b == 100000);
    CHECK(rep.worst_2b <= 1e-12);
    CHECK(rep.worst_2c <= 1e-12);
}

TEST_CASE("empirical constants of the constant datum") {
    ConstantsSampling smp;
    smp.n_real = 40;
    smp.n_diamond = 40;
    auto c = empirical_constants(2.0, {fields::constant(1.0)}, {0.01, 0.1, 1.0}, {}, smp);
    CHECK(c.c_value == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(c.c_gradient <= 1e-8);
    CHECK(c.c_laplacian <= 1e-8);
}

TEST_CASE("strong continuity") {
    const double alpha = 2.0;
    auto y0 = fields::trig_polynomial({0.2, 1.0}, {0.0, 0.5});
    auto pts = boundary_sample_c(DiamondDomain(alpha), 32);
    double prev = 1e300;
    for (int k = 1; k <= 12; ++k) {
        double t = std::ldexp(1.0, -k), s = 0;
        for (const auto& z : pts) s = std::max(s, std::abs(propagate_complex_1d(y0, alpha, t, z[0], {}, false).value - y0(z[0])));
        for (double x = -8; x <= 8; x += 0.25) s = std::max(s, std::abs(propagate_real(y0, t, x) - y0.real_at(x)));
        CHECK(s <= prev);
        prev = s;
    }
    CHECK(prev <= 1e-3);
}
