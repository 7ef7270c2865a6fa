#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "reachkit/cutoff.hpp"
#include "reachkit/geometry.hpp"

using namespace reachkit;

TEST_CASE("diamond membership") {
    CHECK(diamond_contains(DiamondDomain(2.0), cplx(0.0), false));
    CHECK_FALSE(diamond_contains(DiamondDomain(2.0), cplx(0.5, 0.3), true));  // 0.5 + 0.6 = 1.1
    CHECK(diamond_contains(DiamondDomain(1.0), cplx(0.5, 0.4), false));       // 0.9
    // boundary belongs to the closure only
    CHECK(diamond_contains(DiamondDomain(2.0), cplx(0.5, 0.25), true));
    CHECK_FALSE(diamond_contains(DiamondDomain(2.0), cplx(0.5, 0.25), false));
    // d = 2 uses Euclidean norms of the real and imaginary parts
    CVec z{cplx(0.3, 0.1), cplx(0.4, 0.0)};
    CHECK(diamond_contains(DiamondDomain(2.0, 1.0, 2), z, true));  // 0.5 + 2 * 0.1
    CHECK_THROWS_AS(DiamondDomain(0.0), Error);
}

TEST_CASE("boundary samples") {
    auto has = [](const std::vector<CVec>& pts, cplx v) {
        for (const auto& p : pts)
            if (std::abs(p[0] - v) < 1e-14) return true;
        return false;
    };
    auto v1 = boundary_sample_c(DiamondDomain(1.0), 4);
    for (cplx v : {cplx(1, 0), cplx(-1, 0), cplx(0, 1), cplx(0, -1)}) CHECK(has(v1, v));
    auto v2 = boundary_sample_c(DiamondDomain(2.0), 4);
    for (cplx v : {cplx(1, 0), cplx(-1, 0), cplx(0, 0.5), cplx(0, -0.5)}) CHECK(has(v2, v));

    for (int d : {1, 2}) {
        DiamondDomain D(2.0, 1.0, d);
        double worst = 0;
        for (const auto& p : boundary_sample_c(D, 200)) worst = std::max(worst, std::abs(D.gauge(p.data()) - 1.0));
        CHECK(worst <= 1e-14);
    }
}

TEST_CASE("Wick map") {
    CHECK(std::abs(wick_map(0.8, cplx(0.5), WickDirection::forward) - cplx(0, 0.625)) < 1e-15);
    CHECK(diamond_contains(DiamondDomain(0.8), cplx(0, 0.625), false));
    CHECK(wick_map(0.8, cplx(0.0), WickDirection::forward) == cplx(0.0));

    const double a1 = 0.8;
    CounterRng rng(5);
    std::uint64_t c = 0;
    int drawn = 0;
    double worst = 0;
    while (drawn < 1000) {
        cplx z(rng.uniform(c++, -1, 1), rng.uniform(c++, -a1, a1));
        if (!diamond_contains(DiamondDomain(1 / a1), z, false)) continue;
        ++drawn;
        cplx w = wick_map(a1, z, WickDirection::forward);
        CHECK(diamond_contains(DiamondDomain(a1), w, true));
        worst = std::max(worst, std::abs(wick_map(a1, w, WickDirection::inverse) - z));
    }
    CHECK(worst <= 1e-15);
    CHECK_THROWS_AS(wick_map(1.2, cplx(0.1), WickDirection::forward), Error);
}

TEST_CASE("rotation to e1") {
    auto id1 = rotation_to_e1({1.0, 0.0});
    CHECK((id1 - Eigen::MatrixXd::Identity(2, 2)).norm() == 0.0);
    auto id0 = rotation_to_e1({0.0, 0.0, 0.0});
    CHECK((id0 - Eigen::MatrixXd::Identity(3, 3)).norm() == 0.0);

    for (RVec B : {RVec{0.0, 1.0}, RVec{0.3, -0.7}, RVec{0.2, 0.5, -0.4}}) {
        Eigen::VectorXd b = Eigen::Map<Eigen::VectorXd>(B.data(), B.size());
        auto R = rotation_to_e1(B);
        Eigen::VectorXd e = Eigen::VectorXd::Zero(B.size());
        e[0] = b.norm();
        CHECK((R * b - e).norm() <= 1e-14);
        CHECK((R.transpose() * R - Eigen::MatrixXd::Identity(B.size(), B.size())).norm() <= 1e-14);
    }
}

TEST_CASE("cutoff profiles") {
    for (auto prof : {CutoffProfile::quintic, CutoffProfile::bump}) {
        Cutoff c = cutoff(prof, 1.0, 2.0);
        for (double r : {0.0, 0.5, 1.0}) {
            auto v = c.radial(r);
            CHECK(v[0] == 1.0);
            CHECK(v[1] == 0.0);
            CHECK(v[2] == 0.0);
        }
        for (double r : {2.0, 2.5, 7.0}) {
            auto v = c.radial(r);
            CHECK(v[0] == 0.0);
            CHECK(v[1] == 0.0);
            CHECK(v[2] == 0.0);
        }
        CHECK(c.value(1.5) == doctest::Approx(0.5).epsilon(1e-14));
        // derivatives against centered differences inside the collar
        for (double r : {1.2, 1.5, 1.8}) {
            const double h = 1e-5;
            CHECK(c.radial(r)[1] == doctest::Approx((c.value(r + h) - c.value(r - h)) / (2 * h)).epsilon(1e-6));
            CHECK(c.radial(r)[2] ==
                  doctest::Approx((c.value(r + h) - 2 * c.value(r) + c.value(r - h)) / (h * h)).epsilon(1e-4));
        }
    }
    CHECK_THROWS_AS(cutoff(CutoffProfile::quintic, 2.0, 1.0), Error);

    // radial Laplacian in d = 2: f'' + f'/r
    Cutoff c = cutoff(CutoffProfile::quintic, 1.0, 2.0);
    double x[2] = {1.1, 0.6};
    double r = std::hypot(x[0], x[1]);
    auto v = c.radial(r);
    CHECK(c.laplacian(x, 2) == doctest::Approx(v[2] + v[1] / r).epsilon(1e-12));
}
