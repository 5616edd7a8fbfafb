#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "satchain/lyapunov.hpp"

using namespace satchain;

namespace {

HomogeneousController make(int n, std::vector<double> gains) {
    gains.insert(gains.begin(), 0.0);
    return HomogeneousController(chain_params(n), std::move(gains));
}

} // namespace

TEST_CASE("level energies match hand-computed values") {
    // n=2, l1=1: beta = (1/2, 2)
    auto c2 = make(2, {1.0, 1.0});

    Vec x_a{4.0, 0.0};
    auto e_a = c2.eval(x_a);
    CHECK(detail::w_level(c2, e_a, x_a, 1) == Catch::Approx(16.0 / 3.0).epsilon(1e-14));

    Vec x_b{0.0, 2.0};
    auto e_b = c2.eval(x_b);
    CHECK(detail::w_level(c2, e_b, x_b, 2) == Catch::Approx(8.0 / 3.0).epsilon(1e-14));

    Vec x_c{0.0, 4.0};
    CHECK(lyap_eval(c2, x_c).V == Catch::Approx(64.0 / 3.0).epsilon(1e-14));

    // n=3, unit gains, x = (1,0,0): W = (3/5, 3/5, 4/5), V = 2
    auto c3 = make(3, {1.0, 1.0, 1.0});
    auto le = lyap_eval(c3, Vec{1.0, 0.0, 0.0});
    CHECK(le.W[0] == Catch::Approx(3.0 / 5.0).epsilon(1e-14));
    CHECK(le.W[1] == Catch::Approx(3.0 / 5.0).epsilon(1e-14));
    CHECK(le.W[2] == Catch::Approx(4.0 / 5.0).epsilon(1e-14));
    CHECK(le.V == Catch::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("every level energy is nonnegative and vanishes only with its bracket") {
    auto ctl = make(3, {1.0, 1.7, 2.4});
    Rng rng(11);
    for (int k = 0; k < 200; ++k) {
        Vec x(3);
        for (int i = 0; i < 3; ++i) x[i] = rng.uniform(-3.0, 3.0);
        auto le = lyap_eval(ctl, x);
        for (int i = 0; i < 3; ++i) CHECK(le.W[i] >= -1e-15);
        CHECK(le.V > 0.0);
    }
    // on {omega_2 = 0} the second bracket closes: x_2 = v_1
    Vec x{2.0, 0.0, 0.5};
    auto e = ctl.eval(x);
    x[1] = e.v[0];
    auto le = lyap_eval(ctl, x);
    CHECK(std::abs(le.W[1]) < 1e-15);
}

TEST_CASE("V is homogeneous of degree (2n-1)/n under the weighted dilation") {
    for (int n : {2, 3, 4}) {
        std::vector<double> gains;
        for (int i = 1; i <= n; ++i) gains.push_back(1.0 + 0.3 * i);
        auto ctl = make(n, gains);
        Rng rng(7 + static_cast<unsigned>(n));
        for (int k = 0; k < 200; ++k) {
            Vec x(n);
            for (int i = 0; i < n; ++i) x[i] = rng.uniform(-2.0, 2.0);
            double v = lyap_eval(ctl, x).V;
            if (v < 1e-12) continue;
            double eps = std::exp(rng.uniform(-3.0, 3.0));
            double vd = lyap_eval(ctl, dilate_level(ctl.cp, eps, x, n)).V;
            CHECK(vd == Catch::Approx(std::pow(eps, ctl.cp.deg_Vd) * v).epsilon(1e-9));
        }
    }
}

TEST_CASE("analytic gradient agrees with central differences") {
    auto ctl = make(3, {1.0, 1.4, 2.0});
    Rng rng(23);
    const double h = 1e-5;
    for (int k = 0; k < 20; ++k) {
        Vec x(3);
        for (int i = 0; i < 3; ++i) {
            double m = rng.uniform(0.4, 1.2);
            x[i] = rng.next_unit() < 0.5 ? -m : m;
        }
        auto le = lyap_eval(ctl, x);
        for (int j = 0; j < 3; ++j) {
            Vec xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            double fd = (lyap_eval(ctl, xp).V - lyap_eval(ctl, xm).V) / (2 * h);
            CHECK(le.grad[j] == Catch::Approx(fd).epsilon(1e-5).margin(1e-5));
        }
    }
}

TEST_CASE("the last partial of V equals the controller bracket exactly") {
    auto ctl = make(3, {1.0, 2.0, 3.0});
    Rng rng(31);
    for (int k = 0; k < 50; ++k) {
        Vec x(3);
        for (int i = 0; i < 3; ++i) x[i] = rng.uniform(-4.0, 4.0);
        auto le = lyap_eval(ctl, x);
        CHECK(le.grad[2] == le.chain.omega[2]);
    }
}

TEST_CASE("sphere landing puts any direction on the unit level set") {
    auto ctl = make(3, {1.0, 1.3, 1.9});
    Rng rng(41);
    for (int k = 0; k < 100; ++k) {
        Vec d = rng.direction(3);
        Vec s = sphere_point(ctl, d, 3);
        CHECK(V_level(ctl, s, 3) == Catch::Approx(1.0).epsilon(1e-12));
    }
    // prefix levels land on their own set
    Vec d2 = rng.direction(2);
    Vec s2 = sphere_point(ctl, d2, 2);
    CHECK(V_level(ctl, s2, 2) == Catch::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(sphere_point(ctl, Vec{0.0, 0.0, 0.0}, 3), std::invalid_argument);
}

TEST_CASE("prefix energy matches the full evaluation at the top level") {
    auto ctl = make(4, {1.0, 1.2, 1.5, 2.0});
    Rng rng(53);
    for (int k = 0; k < 20; ++k) {
        Vec x(4);
        for (int i = 0; i < 4; ++i) x[i] = rng.uniform(-2.0, 2.0);
        CHECK(V_level(ctl, x, 4) == Catch::Approx(lyap_eval(ctl, x).V).epsilon(1e-14));
    }
}

TEST_CASE("decay infimum is positive once the top gain dominates the drift") {
    auto ctl0 = make(2, {1.0, 1.0});
    // minimal top gain: sup over the sphere of D / |omega_n|
    auto ratio = [&](const Vec& x) {
        auto le = lyap_eval(ctl0, x);
        double w = std::abs(le.chain.omega[1]);
        if (w < 1e-12) return -1e300; // drift is negative near the bracket surface
        return drift_term(le, x) / w;
    };
    SearchOpts opts;
    opts.samples = 4000;
    auto sup = sphere_extremum(ctl0, 2, ratio, /*maximize=*/true, opts);
    REQUIRE(sup.value > 0.0);

    auto ctl = make(2, {1.0, 1.3 * sup.value});
    SearchOpts copts;
    copts.samples = 6000;
    auto cn = estimate_cn(ctl, copts, 0.05);
    CHECK(cn.raw_inf > 0.0);
    CHECK(cn.c_n == Catch::Approx(0.95 * cn.raw_inf));
    CHECK(V_level(ctl, cn.worst, 2) == Catch::Approx(1.0).epsilon(1e-10));

    // a top gain below the drift supremum cannot certify decay
    auto weak = make(2, {1.0, 0.5 * sup.value});
    auto cw = estimate_cn(weak, copts, 0.05);
    CHECK(cw.raw_inf < 0.0);
}

TEST_CASE("estimates are deterministic for a fixed seed") {
    auto ctl = make(2, {1.0, 2.0});
    SearchOpts opts;
    opts.samples = 2000;
    opts.seed = 99;
    auto a = estimate_cn(ctl, opts);
    auto b = estimate_cn(ctl, opts);
    CHECK(a.raw_inf == b.raw_inf);
    CHECK(a.c_n == b.c_n);
}

TEST_CASE("the derivative bound scales with degree zero in the level value") {
    auto ctl = make(3, {1.0, 1.5, 2.5});
    Rng rng(61);
    const double dv = ctl.cp.deg_Vdotd;
    for (int k = 0; k < 50; ++k) {
        Vec x(3);
        for (int i = 0; i < 3; ++i) x[i] = rng.uniform(-2.0, 2.0);
        auto le = lyap_eval(ctl, x);
        double f = std::abs(drift_term(le, x)) + 2.5 * std::abs(le.chain.omega[2]);
        if (f < 1e-10) continue;
        double eps = std::exp(rng.uniform(-2.0, 2.0));
        Vec xd = dilate_level(ctl.cp, eps, x, 3);
        auto ld = lyap_eval(ctl, xd);
        double fd = std::abs(drift_term(ld, xd)) + 2.5 * std::abs(ld.chain.omega[2]);
        CHECK(fd == Catch::Approx(std::pow(eps, dv) * f).epsilon(1e-9));
    }
}

TEST_CASE("per-coordinate bounds dominate the weighted powers everywhere") {
    auto ctl = make(3, {1.0, 1.5, 2.5});
    SearchOpts opts;
    opts.samples = 3000;
    auto c = per_coordinate_bounds(ctl, opts, 0.05);
    REQUIRE(c.size() == 4);
    Rng rng(71);
    for (int k = 0; k < 200; ++k) {
        Vec x(3);
        for (int i = 0; i < 3; ++i) x[i] = rng.uniform(-3.0, 3.0);
        double v = lyap_eval(ctl, x).V;
        for (int i = 1; i <= 3; ++i) {
            double bp1 = ctl.cp.betad[static_cast<size_t>(i - 1)] + 1.0;
            CHECK(std::pow(std::abs(x[i - 1]), bp1) <= c[static_cast<size_t>(i)] * v * (1 + 1e-9));
        }
    }
}

TEST_CASE("Young split constants satisfy their defining budget") {
    auto cp = chain_params(3);
    std::vector<double> m = {0.0, 2.0, 5.0}; // synthetic sup values, index 1..2
    double cn = 0.8;
    auto dm = der_mis_constants(cp, cn, m);
    CHECK(dm.C1 == Catch::Approx(0.4));
    double spent = 0;
    double worst = 0;
    for (int j = 1; j <= 2; ++j) {
        double aj = cp.alphad_i[static_cast<size_t>(j)];
        double ej = cp.etad_i[static_cast<size_t>(j)];
        double lam = dm.lambda[static_cast<size_t>(j)];
        spent += (1.0 / aj) * m[static_cast<size_t>(j)] / std::pow(lam, aj);
        worst = std::max(worst, std::pow(lam, ej) / ej);
    }
    CHECK(spent == Catch::Approx(0.4).epsilon(1e-12));
    CHECK(dm.C2 == Catch::Approx(worst).epsilon(1e-12));
    CHECK_THROWS_AS(der_mis_constants(cp, -1.0, m), std::invalid_argument);
}

TEST_CASE("quadratic layer evaluates norms and the glue functional") {
    Mat p = Mat::identity(2);
    Vec x{3.0, 4.0};
    CHECK(V0_eval(p, x) == Catch::Approx(5.0));

    auto ctl = make(2, {1.0, 1.0});
    double vn = lyap_eval(ctl, x).V;
    double w = W_eval(p, ctl, x);
    CHECK(w == Catch::Approx(std::min(5.0, std::pow(vn, ctl.cp.alphad))));
}

TEST_CASE("cholesky solve inverts a small SPD system") {
    Mat p(2);
    p(0, 0) = 4;
    p(0, 1) = 1;
    p(1, 0) = 1;
    p(1, 1) = 3;
    Mat l;
    REQUIRE(cholesky(p, l));
    Vec b{1.0, 2.0};
    Vec z = chol_solve(l, b);
    CHECK(z[0] == Catch::Approx(1.0 / 11.0).epsilon(1e-13));
    CHECK(z[1] == Catch::Approx(7.0 / 11.0).epsilon(1e-13));
    Vec back = mat_vec(p, z);
    CHECK(back[0] == Catch::Approx(1.0).epsilon(1e-13));
    CHECK(back[1] == Catch::Approx(2.0).epsilon(1e-13));

    Mat bad(2);
    bad(0, 0) = 1;
    bad(0, 1) = 2;
    bad(1, 0) = 2;
    bad(1, 1) = 1;
    Mat lf;
    CHECK_FALSE(cholesky(bad, lf));
}

TEST_CASE("switching-surface range brackets the sampled extrema") {
    auto ctl = make(2, {1.0, 2.0});
    Mat p = Mat::identity(2);
    SearchOpts opts;
    opts.samples = 3000;
    auto r = estimate_vA_VA(p, ctl, 0.7, opts, 1e-2);
    CHECK(r.raw_min > 0.0);
    CHECK(r.raw_min <= r.raw_max);
    CHECK(r.v_A == Catch::Approx(0.99 * r.raw_min));
    CHECK(r.V_A == Catch::Approx(1.01 * r.raw_max));
    // the sampled extrema really sit on the circle of radius A
    Rng rng(83);
    for (int k = 0; k < 100; ++k) {
        Vec y = rng.direction(2);
        Vec x(2);
        for (int i = 0; i < 2; ++i) x[i] = 0.7 * y[i];
        double v = lyap_eval(ctl, x).V;
        CHECK(v >= r.v_A * (1 - 1e-9));
        CHECK(v <= r.V_A * (1 + 1e-9));
    }
}

TEST_CASE("interpolation family constants for the cubic chain") {
    auto cp = chain_params(3); // alpha = 4/5
    auto f1 = mu_family(cp, 1.0, 2.0, 0.5, 1.0);
    CHECK(f1.alpha_mu == Catch::Approx(0.8));
    CHECK(f1.c_mu == Catch::Approx(0.5));
    CHECK(f1.l_mu == Catch::Approx(8.0));

    auto f2 = mu_family(cp, 1.0, 2.0, 0.5, 0.8);
    CHECK(f2.alpha_mu == Catch::Approx(0.75));
    CHECK(f2.c_mu == Catch::Approx(0.4));
    CHECK(f2.l_mu == Catch::Approx(4.0 * 0.8 * 2.0 * std::pow(0.5, -0.2)));

    CHECK_THROWS_AS(mu_family(cp, 1.0, 2.0, 0.5, 0.15), std::invalid_argument);
    CHECK_THROWS_AS(mu_family(cp, 1.0, 2.0, 0.5, 1.1), std::invalid_argument);
}
