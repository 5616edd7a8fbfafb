#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "satchain/certificate.hpp"

using namespace satchain;

namespace {

Certificate sample_cert() {
    Certificate c;
    c.n = 2;
    c.sat = make_saturation("tanh");
    c.l = {0.0, 1.0, 1.75};
    c.c_n = 0.21;
    c.c_n_raw = 0.2211;
    c.c_n_margin = 0.05;
    c.c_n_samples = 20000;
    c.seed = 0x5eed5eedULL;
    c.density_warning = false;
    c.kc_table = {{1.0, 3.4}, {1.75, 4.9}};
    c.C_coord = {0.0, 1.9, 2.7};
    c.dm_C1 = 0.105;
    c.dm_C2 = 8.25;
    c.dm_lambda = {0.0, 1.4};
    c.dm_m = {0.0, 2.2};
    c.core = synthesize_linear_core(2, 1.75, c.sat);
    c.k_outer = 4.0;
    c.v_A = 0.11;
    c.V_A = 0.42;
    c.hysteresis = 0.0;
    c.channel_gain = 3.5;
    return c;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("certificate survives a save/load round trip") {
    const Certificate a = sample_cert();
    const std::string path = "/tmp/satchain_cert_roundtrip.json";
    save_certificate(path, a);
    const Certificate b = load_certificate(path);

    CHECK(b.n == a.n);
    CHECK(b.sat.name == a.sat.name);
    CHECK(b.sat.a1 == a.sat.a1);
    CHECK(b.sat.sigma_inf == a.sat.sigma_inf);
    CHECK(b.l == a.l);
    CHECK(b.c_n == a.c_n);
    CHECK(b.c_n_raw == a.c_n_raw);
    CHECK(b.seed == a.seed);
    CHECK(b.kc_table == a.kc_table);
    CHECK(b.C_coord == a.C_coord);
    CHECK(b.dm_C2 == a.dm_C2);
    CHECK(b.core.A == a.core.A);
    CHECK(b.core.c0 == a.core.c0);
    CHECK(b.core.base_point == a.core.base_point);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(b.core.P(i, j) == a.core.P(i, j));
    CHECK(b.k_outer == a.k_outer);
    CHECK(b.v_A == a.v_A);
    CHECK(b.channel_gain == a.channel_gain);

    // a second save of the loaded certificate is byte-identical
    const std::string path2 = "/tmp/satchain_cert_roundtrip2.json";
    save_certificate(path2, b);
    CHECK(slurp(path) == slurp(path2));
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("controller reconstruction uses the stored gains") {
    const Certificate c = sample_cert();
    auto ctl = controller_of(c);
    CHECK(ctl.n() == 2);
    CHECK(ctl.l[2] == 1.75);
}

TEST_CASE("unsupported schema versions are refused") {
    ordered_json j = to_json(sample_cert());
    j["schema_version"] = 2;
    CHECK_THROWS_WITH(certificate_from_json(j), Catch::Matchers::ContainsSubstring("schema_version"));
}

TEST_CASE("malformed payloads are refused") {
    {
        ordered_json j = to_json(sample_cert());
        j["l"] = std::vector<double>{1.0, 2.0, 3.0, 4.0}; // wrong length for n=2
        CHECK_THROWS_AS(certificate_from_json(j), std::invalid_argument);
    }
    {
        ordered_json j = to_json(sample_cert());
        j["linear_core"]["P"] = std::vector<std::vector<double>>{{1.0, 2.0}, {2.0, 1.0}}; // indefinite
        CHECK_THROWS_AS(certificate_from_json(j), std::invalid_argument);
    }
    {
        ordered_json j = to_json(sample_cert());
        j.erase("c_n");
        CHECK_THROWS_AS(certificate_from_json(j), nlohmann::json::exception);
    }
    {
        ordered_json j = to_json(sample_cert());
        j["n"] = 40;
        CHECK_THROWS_AS(certificate_from_json(j), std::invalid_argument);
    }
}

TEST_CASE("missing files and parse errors surface as runtime errors") {
    CHECK_THROWS_AS(load_certificate("/tmp/satchain_no_such_cert.json"), std::runtime_error);
    const std::string path = "/tmp/satchain_cert_garbage.json";
    std::ofstream(path) << "{ not json";
    CHECK_THROWS_WITH(load_certificate(path), Catch::Matchers::ContainsSubstring("parse error"));
    std::remove(path.c_str());
}
