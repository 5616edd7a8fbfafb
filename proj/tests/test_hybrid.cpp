#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "satchain/hybrid.hpp"
#include "satchain/pipeline.hpp"

using namespace satchain;

namespace {

PipelineOptions quick_opts() {
    PipelineOptions po;
    po.search.samples = 4000;
    po.search.refine_rounds = 30;
    return po;
}

// shared n=2 certificate; stable gains, tanh channel
const Certificate& cert2() {
    static const Certificate c = assemble_certificate(2, {0.0, 1.0, 2.5}, make_saturation("tanh"), quick_opts());
    return c;
}

} // namespace

TEST_CASE("branch selection splits exactly at the switching radius") {
    const Certificate& c = cert2();
    Vec dir{0.7, -0.4};
    const double v = V0_eval(c.core.P, dir);
    REQUIRE(v > 0);
    // V_0 is absolutely homogeneous of degree one, so scaling lands on the shell
    Vec on = (c.core.A / v) * dir;
    REQUIRE(V0_eval(c.core.P, on) == Catch::Approx(c.core.A).epsilon(1e-12));
    CHECK(pointwise_branch(c, 0.999 * on) == Branch::linear);
    CHECK(pointwise_branch(c, 1.001 * on) == Branch::homogeneous);

    // the shifted variant decides on x - y e_n
    Vec x = 1.001 * on;
    CHECK(shifted_pointwise_branch(c, x, 0.0) == Branch::homogeneous);
    Vec far{0.0, 5.0};
    CHECK(pointwise_branch(c, far) == Branch::homogeneous);
    CHECK(shifted_pointwise_branch(c, far, 5.0) == Branch::linear);
}

TEST_CASE("command bracket follows the active branch") {
    const Certificate& c = cert2();
    const HomogeneousController ctl = controller_of(c);
    Vec x{0.8, -0.5};

    CHECK(command_bracket(c, ctl, Branch::homogeneous, x) == ctl.omega_n(x));

    double kx = c.core.K[0] * x[0] + c.core.K[1] * x[1];
    CHECK(command_bracket(c, ctl, Branch::linear, x) ==
          Catch::Approx(kx / c.k_outer).epsilon(1e-15));

    // shifting y through x_n matches an explicit shift
    Vec xs = x;
    xs[1] -= 0.3;
    CHECK(shifted_bracket(c, ctl, Branch::homogeneous, x, 0.3) ==
          command_bracket(c, ctl, Branch::homogeneous, xs));
    CHECK(shifted_bracket(c, ctl, Branch::linear, x, 0.3) ==
          command_bracket(c, ctl, Branch::linear, xs));
}

TEST_CASE("channel output is the negatively scaled normalized saturation") {
    Certificate c;
    c.n = 2;
    c.l = {0.0, 1.0, 1.75};
    c.sat = make_saturation("standard");
    CHECK(channel_output(c, 0.0) == 0.0);
    CHECK(channel_output(c, 50.0) == Catch::Approx(-1.75).epsilon(1e-15));
    CHECK(channel_output(c, -50.0) == Catch::Approx(1.75).epsilon(1e-15));
    CHECK(channel_output(c, 0.25) == Catch::Approx(-1.75 * 0.25).epsilon(1e-15));

    c.sat = make_saturation("arctan"); // sigma_inf = pi/2 normalizes away
    CHECK(channel_output(c, 1e9) == Catch::Approx(-1.75).epsilon(1e-6));
}

TEST_CASE("outer command gain: floor of two, else the tail-error formula") {
    const ChainParams cp = chain_params(2);
    const SaturationSpec sat = make_saturation("tanh"); // C~ = 2

    // generous decay: the floor wins
    CHECK(choose_outer_gain(cp, sat, 2.5, 100.0, 1.0) == 2.0);

    // 2 (2 + C~) l_n / (c_n vA^{2/3}) with l_n=2.5, c_n=0.5, vA=0.1
    CHECK(choose_outer_gain(cp, sat, 2.5, 0.5, 0.1) ==
          Catch::Approx(185.66355334451113).epsilon(1e-12));

    CHECK_THROWS_AS(choose_outer_gain(cp, sat, 2.5, 0.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(choose_outer_gain(cp, sat, 2.5, 0.5, 0.0), std::invalid_argument);
}

TEST_CASE("channel difference gain tracks the steeper of slope and double sup") {
    CHECK(channel_difference_gain(make_saturation("tanh"), 1.75) == Catch::Approx(3.5));
    CHECK(channel_difference_gain(make_saturation("standard"), 1.0) == Catch::Approx(2.0));
    // arctan: lip/sigma_inf = 2/pi < 2 sup/sigma_inf = 2
    CHECK(channel_difference_gain(make_saturation("arctan"), 2.0) == Catch::Approx(4.0));
    // a steep channel (kscale = 3) is slope-dominated
    CHECK(channel_difference_gain(make_saturation("tanh", 3.0), 2.0) == Catch::Approx(6.0));
}

TEST_CASE("assembled certificate carries consistent constants") {
    const Certificate& c = cert2();
    CHECK(c.n == 2);
    CHECK(c.c_n > 0.9);
    CHECK(c.c_n < 1.1);
    CHECK(c.c_n == Catch::Approx((1.0 - c.c_n_margin) * c.c_n_raw).epsilon(1e-12));
    CHECK(c.core.A > 0);
    CHECK(c.v_A > 0);
    CHECK(c.v_A <= c.V_A);
    CHECK(c.k_outer >= 2.0);
    CHECK(c.channel_gain == Catch::Approx(5.0)); // tanh: 2 l_n

    REQUIRE(c.kc_table.size() == 4);
    for (size_t i = 1; i < c.kc_table.size(); ++i) {
        CHECK(c.kc_table[i].first > c.kc_table[i - 1].first);
        CHECK(c.kc_table[i].second > c.kc_table[i - 1].second); // K grows with the control bound
    }
    REQUIRE(c.C_coord.size() == 3);
    CHECK(c.C_coord[1] > 0);
    CHECK(c.C_coord[2] > 0);
    REQUIRE(c.dm_lambda.size() == 2);
    CHECK(c.dm_lambda[1] > 0);
    CHECK(c.dm_C1 == Catch::Approx(0.5 * c.c_n));
    CHECK(c.dm_C2 > 0);
}

TEST_CASE("third-order chain assembles once the cascade gains are feasible") {
    PipelineOptions po = quick_opts();
    const Certificate c = assemble_certificate(3, {0.0, 1.0, 1.5, 36.0}, make_saturation("standard"), po);
    CHECK(c.c_n > 0);
    CHECK(c.c_n < 0.8);
    CHECK(c.k_outer >= 2.0);
    CHECK(c.v_A > 0);
    CHECK(c.v_A <= c.V_A);
    REQUIRE(c.dm_lambda.size() == 3);
    CHECK(c.dm_lambda[1] > 0);
    CHECK(c.dm_lambda[2] > 0);
}

TEST_CASE("assembly rejects degenerate or unstable requests") {
    PipelineOptions po = quick_opts();
    CHECK_THROWS_AS(assemble_certificate(1, {0.0, 1.0}, make_saturation("tanh"), po),
                    std::invalid_argument);
    // top gain far too small: decay estimate comes out negative
    CHECK_THROWS_AS(assemble_certificate(2, {0.0, 1.0, 1.0}, make_saturation("tanh"), po),
                    std::runtime_error);
    // malformed gain vector
    CHECK_THROWS_AS(assemble_certificate(2, {1.0, 2.5}, make_saturation("tanh"), po),
                    std::invalid_argument);
}
