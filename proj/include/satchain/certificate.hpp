#pragma once

#include <json.hpp>

#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "controller.hpp"
#include "linear_core.hpp"
#include "satfn.hpp"

// A certificate is everything the simulators and certifiers need to rebuild
// the closed loops and check the decay inequalities: chain gains, saturation
// data, the estimated constants with their sampling provenance, and the linear
// core. Serialization is nlohmann ordered_json so a given certificate always
// dumps to the same bytes; nothing time- or host-dependent goes in.

namespace satchain {

struct Certificate {
    int schema_version = 1;
    int n = 0;
    SaturationSpec sat;
    std::vector<double> l; // gains l[1..n]; l[0] unused

    // homogeneous decay estimate
    double c_n = 0;
    double c_n_raw = 0;
    double c_n_margin = 0;
    int c_n_samples = 0;
    std::uint64_t seed = 0;
    bool density_warning = false;

    // |V'| <= K V^{degV'/degV} constants per control bound
    std::vector<std::pair<double, double>> kc_table; // (u_bound, K)

    // |x_i|^{beta_{i-1}+1} <= C_coord[i] V
    std::vector<double> C_coord; // size n+1, index 1..n

    // matched-disturbance Young split
    double dm_C1 = 0;
    double dm_C2 = 0;
    std::vector<double> dm_lambda; // size n, index 1..n-1
    std::vector<double> dm_m;      // size n, index 1..n-1

    LinearCore core;

    // hybrid glue
    double k_outer = 0;     // command gain; inner command K'x enters as k*omega
    double v_A = 0;         // min of V_n on {V_0 = A}, shrunk
    double V_A = 0;         // max of V_n on {V_0 = A}, inflated
    double hysteresis = 0;  // switch back to the homogeneous branch at V_0 > A(1+h)
    double channel_gain = 0;// l_n * max(lip_norm, 2 sup_norm); <= 4 keeps the literal bounds
};

inline HomogeneousController controller_of(const Certificate& c) {
    return HomogeneousController(chain_params(c.n), c.l);
}

using ordered_json = nlohmann::ordered_json;

inline ordered_json to_json(const SaturationSpec& s) {
    ordered_json j;
    j["name"] = s.name;
    j["kscale"] = s.kscale;
    j["a1"] = s.a1;
    j["b1"] = s.b1;
    j["a2"] = s.a2;
    j["b2"] = s.b2;
    j["sigma_inf"] = s.sigma_inf;
    j["C_sigma"] = s.C_sigma;
    j["lipschitz"] = s.lipschitz;
    j["sup_abs"] = s.sup_abs;
    return j;
}

inline SaturationSpec sat_from_json(const ordered_json& j) {
    SaturationSpec s;
    s.name = j.at("name").get<std::string>();
    s.kscale = j.at("kscale").get<double>();
    s.a1 = j.at("a1").get<double>();
    s.b1 = j.at("b1").get<double>();
    s.a2 = j.at("a2").get<double>();
    s.b2 = j.at("b2").get<double>();
    s.sigma_inf = j.at("sigma_inf").get<double>();
    s.C_sigma = j.at("C_sigma").get<double>();
    s.lipschitz = j.at("lipschitz").get<double>();
    s.sup_abs = j.at("sup_abs").get<double>();
    validate_sector_params(s);
    return s;
}

inline ordered_json to_json(const LinearCore& c) {
    ordered_json j;
    j["n"] = c.n;
    std::vector<double> k(c.K.n);
    for (int i = 0; i < c.K.n; ++i) k[static_cast<size_t>(i)] = c.K[i];
    j["K"] = k;
    std::vector<std::vector<double>> p(static_cast<size_t>(c.n),
                                       std::vector<double>(static_cast<size_t>(c.n)));
    for (int i = 0; i < c.n; ++i)
        for (int jj = 0; jj < c.n; ++jj) p[static_cast<size_t>(i)][static_cast<size_t>(jj)] = c.P(i, jj);
    j["P"] = p;
    j["l_n"] = c.l_n;
    j["rho_lo"] = c.rho_lo;
    j["rho_hi"] = c.rho_hi;
    j["c0"] = c.c0;
    j["l0"] = c.l0;
    j["A"] = c.A;
    j["lambda_min_P"] = c.lambda_min_P;
    j["lambda_max_P"] = c.lambda_max_P;
    j["grid_max"] = c.grid_max;
    j["grid_lipschitz"] = c.grid_lipschitz;
    j["base_point"] = c.base_point;
    return j;
}

inline LinearCore core_from_json(const ordered_json& j) {
    LinearCore c;
    c.n = j.at("n").get<int>();
    if (c.n < 1 || c.n > kMaxN) throw std::invalid_argument("certificate: core dimension out of range");
    auto k = j.at("K").get<std::vector<double>>();
    if (static_cast<int>(k.size()) != c.n) throw std::invalid_argument("certificate: bad K size");
    c.K = Vec(c.n);
    for (int i = 0; i < c.n; ++i) c.K[i] = k[static_cast<size_t>(i)];
    auto p = j.at("P").get<std::vector<std::vector<double>>>();
    if (static_cast<int>(p.size()) != c.n) throw std::invalid_argument("certificate: bad P size");
    c.P = Mat(c.n);
    for (int i = 0; i < c.n; ++i) {
        if (static_cast<int>(p[static_cast<size_t>(i)].size()) != c.n)
            throw std::invalid_argument("certificate: bad P row");
        for (int jj = 0; jj < c.n; ++jj) c.P(i, jj) = p[static_cast<size_t>(i)][static_cast<size_t>(jj)];
    }
    Mat chol_check;
    if (!cholesky(c.P, chol_check))
        throw std::invalid_argument("certificate: P is not positive definite");
    c.l_n = j.at("l_n").get<double>();
    c.rho_lo = j.at("rho_lo").get<double>();
    c.rho_hi = j.at("rho_hi").get<double>();
    c.c0 = j.at("c0").get<double>();
    c.l0 = j.at("l0").get<double>();
    c.A = j.at("A").get<double>();
    c.lambda_min_P = j.at("lambda_min_P").get<double>();
    c.lambda_max_P = j.at("lambda_max_P").get<double>();
    c.grid_max = j.at("grid_max").get<double>();
    c.grid_lipschitz = j.at("grid_lipschitz").get<double>();
    c.base_point = j.at("base_point").get<std::string>();
    return c;
}

inline ordered_json to_json(const Certificate& c) {
    ordered_json j;
    j["schema_version"] = c.schema_version;
    j["n"] = c.n;
    j["saturation"] = to_json(c.sat);
    j["l"] = c.l;
    j["c_n"] = c.c_n;
    j["c_n_raw"] = c.c_n_raw;
    j["c_n_margin"] = c.c_n_margin;
    j["c_n_samples"] = c.c_n_samples;
    j["seed"] = c.seed;
    j["density_warning"] = c.density_warning;
    ordered_json kc = ordered_json::array();
    for (const auto& [ub, kk] : c.kc_table) kc.push_back({{"u_bound", ub}, {"K", kk}});
    j["kc_table"] = kc;
    j["C_coord"] = c.C_coord;
    j["dm_C1"] = c.dm_C1;
    j["dm_C2"] = c.dm_C2;
    j["dm_lambda"] = c.dm_lambda;
    j["dm_m"] = c.dm_m;
    j["linear_core"] = to_json(c.core);
    j["k_outer"] = c.k_outer;
    j["v_A"] = c.v_A;
    j["V_A"] = c.V_A;
    j["hysteresis"] = c.hysteresis;
    j["channel_gain"] = c.channel_gain;
    return j;
}

inline Certificate certificate_from_json(const ordered_json& j) {
    Certificate c;
    const int ver = j.at("schema_version").get<int>();
    if (ver != 1)
        throw std::invalid_argument("certificate: unsupported schema_version " + std::to_string(ver));
    c.schema_version = ver;
    c.n = j.at("n").get<int>();
    if (c.n < 1 || c.n > kMaxN) throw std::invalid_argument("certificate: n out of range");
    c.sat = sat_from_json(j.at("saturation"));
    c.l = j.at("l").get<std::vector<double>>();
    if (static_cast<int>(c.l.size()) != c.n + 1)
        throw std::invalid_argument("certificate: gain vector must have n+1 entries (l[0] unused)");
    c.c_n = j.at("c_n").get<double>();
    c.c_n_raw = j.at("c_n_raw").get<double>();
    c.c_n_margin = j.at("c_n_margin").get<double>();
    c.c_n_samples = j.at("c_n_samples").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.density_warning = j.at("density_warning").get<bool>();
    for (const auto& row : j.at("kc_table"))
        c.kc_table.emplace_back(row.at("u_bound").get<double>(), row.at("K").get<double>());
    c.C_coord = j.at("C_coord").get<std::vector<double>>();
    c.dm_C1 = j.at("dm_C1").get<double>();
    c.dm_C2 = j.at("dm_C2").get<double>();
    c.dm_lambda = j.at("dm_lambda").get<std::vector<double>>();
    c.dm_m = j.at("dm_m").get<std::vector<double>>();
    c.core = core_from_json(j.at("linear_core"));
    c.k_outer = j.at("k_outer").get<double>();
    c.v_A = j.at("v_A").get<double>();
    c.V_A = j.at("V_A").get<double>();
    c.hysteresis = j.at("hysteresis").get<double>();
    c.channel_gain = j.at("channel_gain").get<double>();
    return c;
}

inline void save_certificate(const std::string& path, const Certificate& c) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_certificate: cannot open " + path);
    out << to_json(c).dump(2) << "\n";
    if (!out) throw std::runtime_error("save_certificate: write failed for " + path);
}

inline Certificate load_certificate(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_certificate: cannot open " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("load_certificate: parse error in " + path + ": " + e.what());
    }
    return certificate_from_json(j);
}

} // namespace satchain
