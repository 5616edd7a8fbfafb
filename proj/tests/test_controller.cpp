#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "satchain/controller.hpp"

using namespace satchain;

static HomogeneousController make(int n, std::vector<double> gains_1_to_n) {
    std::vector<double> l(1, 0.0);
    for (double g : gains_1_to_n) l.push_back(g);
    return HomogeneousController(chain_params(n), l);
}

TEST_CASE("n=2 chain matches the closed form w2 = |x2|^2 sgn + l1^2 x1") {
    auto ctl = make(2, {1.0, 1.0});
    auto e = ctl.eval(Vec{1.0, 1.0});
    CHECK(e.omega[0] == 1.0);
    CHECK(e.omega[1] == 2.0);
    CHECK(e.v[0] == -1.0);

    e = ctl.eval(Vec{-4.0, 3.0});
    CHECK(e.omega[0] == Catch::Approx(-2.0).epsilon(1e-15));
    CHECK(e.omega[1] == Catch::Approx(5.0).epsilon(1e-15)); // 9 - 4
    CHECK(e.P[2][1] == 1.0);
    CHECK(e.P[2][2] == Catch::Approx(6.0).epsilon(1e-15)); // 2 |x2|

    auto ctl2 = make(2, {3.0, 1.0});
    e = ctl2.eval(Vec{2.0, 1.0});
    CHECK(e.omega[1] == Catch::Approx(1.0 + 9.0 * 2.0).epsilon(1e-15));
    CHECK(e.P[2][1] == 9.0);
}

TEST_CASE("n=3 chain values at hand-checked points") {
    auto ctl = make(3, {1.0, 1.0, 1.0});
    auto e = ctl.eval(Vec{1.0, 0.0, 0.0});
    CHECK(e.omega[0] == 1.0);
    CHECK(e.omega[1] == 1.0); // |0|^{3/2} + x1
    CHECK(e.omega[2] == 1.0); // 0 + |1|^{4/3}
    CHECK(e.v[0] == -1.0);
    CHECK(e.v[1] == -1.0);

    // x picked so the top surface w3 = 0 is hit exactly
    auto ctl2 = make(3, {1.0, 2.0, 3.0});
    e = ctl2.eval(Vec{0.0, -1.0, 2.0});
    CHECK(e.omega[0] == 0.0);
    CHECK(e.omega[1] == -1.0);
    CHECK(e.omega[2] == Catch::Approx(0.0).margin(1e-14)); // 16 + 16*(-1)
    CHECK(e.v[1] == Catch::Approx(2.0).epsilon(1e-14));    // -2 |w2|^{1/3} sgn(w2)

    // sign control is the full interval on the surface
    auto u = ctl2.sign_control(Vec{0.0, -1.0, 2.0});
    CHECK(u.lo == -3.0);
    CHECK(u.hi == 3.0);
    u = ctl2.sign_control(Vec{1.0, 1.0, 1.0});
    CHECK(u.single());
    CHECK(u.lo == -3.0);
}

TEST_CASE("gradient table at a hand-worked n=3 point") {
    auto ctl = make(3, {1.0, 1.0, 1.0});
    auto e = ctl.eval(Vec{1.0, 1.0, 1.0});
    double w2 = 2.0;
    CHECK(e.omega[1] == w2);
    CHECK(e.omega[2] == Catch::Approx(1.0 + std::pow(2.0, 4.0 / 3.0)).epsilon(1e-15));
    CHECK(e.P[2][1] == 1.0);
    CHECK(e.P[2][2] == 1.5);                         // (3/2) |x2|^{1/2}
    double c2 = (4.0 / 3.0) * std::pow(w2, 1.0 / 3.0);
    CHECK(e.P[3][3] == 4.0);                         // 4 |x3|^3
    CHECK(e.P[3][2] == Catch::Approx(c2 * 1.5).epsilon(1e-14));
    CHECK(e.P[3][1] == Catch::Approx(c2).epsilon(1e-14));
}

TEST_CASE("gradient table matches central differences at generic points") {
    // Gains near 1 and |x_i| in [0.3, 1] keep every omega level O(1), so the
    // finite-difference cancellation noise stays far below the tolerance.
    for (int n : {2, 3, 4, 5}) {
        std::vector<double> gains;
        for (int i = 1; i <= n; ++i) gains.push_back(1.0 + 0.1 * i);
        auto ctl = make(n, gains);
        Rng rng(0x5eed0000u + static_cast<unsigned>(n));
        for (int trial = 0; trial < 8; ++trial) {
            Vec x(n);
            for (int i = 0; i < n; ++i) {
                double mag = rng.uniform(0.3, 1.0);
                x[i] = rng.next_unit() < 0.5 ? -mag : mag;
            }
            auto e = ctl.eval(x);
            const double h = 1e-5;
            for (int i = 2; i <= n; ++i) {
                for (int j = 1; j <= i; ++j) {
                    Vec xp = x, xm = x;
                    xp[j - 1] += h;
                    xm[j - 1] -= h;
                    double fd = (ctl.eval(xp).omega[i - 1] - ctl.eval(xm).omega[i - 1]) / (2 * h);
                    double got = e.P[static_cast<size_t>(i)][static_cast<size_t>(j)];
                    INFO("n=" << n << " trial=" << trial << " i=" << i << " j=" << j
                              << " fd=" << fd << " got=" << got);
                    CHECK(got == Catch::Approx(fd).epsilon(1e-6).margin(1e-6));
                }
            }
        }
    }
}

TEST_CASE("level-1 partial stays finite on the x1 = 0 plane") {
    auto ctl = make(3, {1.0, 1.0, 1.0});
    auto e = ctl.eval(Vec{0.0, 1.0, -1.0});
    CHECK(std::isfinite(e.P[2][1]));
    CHECK(e.P[2][1] == 1.0);
    CHECK(std::isfinite(e.P[3][1]));
    // the carry |w1|^{r1} = x1 collapse is exact even for tiny x1
    auto e2 = ctl.eval(Vec{1e-30, 1.0, -1.0});
    CHECK(e2.omega[1] == Catch::Approx(1.0 + 1e-30).epsilon(1e-15));
}

TEST_CASE("controller rejects malformed gain vectors") {
    CHECK_THROWS_AS(HomogeneousController(chain_params(3), {0.0, 1.0, 1.0}),
                    std::invalid_argument); // wrong length
    CHECK_THROWS_AS(HomogeneousController(chain_params(3), {0.0, 1.0, -1.0, 1.0}),
                    std::invalid_argument); // nonpositive gain
}
