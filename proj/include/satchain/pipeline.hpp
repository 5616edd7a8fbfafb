#pragma once

#include <stdexcept>
#include <vector>

#include "certificate.hpp"
#include "hybrid.hpp"
#include "linear_core.hpp"
#include "lyapunov.hpp"

namespace satchain {

struct PipelineOptions {
    SearchOpts search{};
    double cn_margin = 0.05;                       // headroom on the decay infimum
    double core_margin = 1e-2;                     // headroom on the quadratic layer
    double hysteresis = 0.05;                      // relative width of the switch-out shell
    std::vector<double> kc_u_bounds = {0.5, 1.0, 2.0, 5.0};
};

// Assemble the full certificate for given gains: decay estimate, coordinate and
// gradient constants, quadratic core, switching-shell range, hybrid glue.
// Throws when the decay infimum is not positive at these gains or when no
// common quadratic certificate exists for the saturation sector.
inline Certificate assemble_certificate(int n, const std::vector<double>& l,
                                        const SaturationSpec& sat,
                                        const PipelineOptions& po = {}) {
    if (n < 2)
        throw std::invalid_argument(
            "assemble_certificate: need n >= 2 (the n = 1 chain has homogeneity degree 0)");
    Certificate c;
    c.n = n;
    c.sat = sat;
    c.l = l;
    const HomogeneousController ctl = controller_of(c); // validates the gain vector

    const CnEstimate cn = estimate_cn(ctl, po.search, po.cn_margin);
    c.c_n = cn.c_n;
    c.c_n_raw = cn.raw_inf;
    c.c_n_margin = cn.margin;
    c.c_n_samples = cn.samples;
    c.seed = po.search.seed;
    c.density_warning = cn.density_warning;
    if (!(c.c_n > 0))
        throw std::runtime_error("assemble_certificate: decay estimate is not positive at these gains");

    for (double ub : po.kc_u_bounds)
        c.kc_table.emplace_back(ub, estimate_KC(ctl, ub, po.search, po.cn_margin));
    c.C_coord = per_coordinate_bounds(ctl, po.search, po.cn_margin);
    c.dm_m = grad_young_bounds(ctl, po.search, po.cn_margin);
    const DerMisConstants dm = der_mis_constants(ctl.cp, c.c_n, c.dm_m);
    c.dm_C1 = dm.C1;
    c.dm_C2 = dm.C2;
    c.dm_lambda = dm.lambda;

    c.core = synthesize_linear_core(n, l[static_cast<size_t>(n)], sat, po.core_margin);
    const VARange va = estimate_vA_VA(c.core.P, ctl, c.core.A, po.search);
    c.v_A = va.v_A;
    c.V_A = va.V_A;
    c.density_warning = c.density_warning || va.density_warning;

    c.k_outer = choose_outer_gain(ctl.cp, sat, l[static_cast<size_t>(n)], c.c_n, c.v_A);
    c.hysteresis = po.hysteresis;
    c.channel_gain = channel_difference_gain(sat, l[static_cast<size_t>(n)]);
    return c;
}

} // namespace satchain
