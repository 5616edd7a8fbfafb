#pragma once

#include <cmath>
#include <stdexcept>

#include "certificate.hpp"
#include "lyapunov.hpp"

// The hybrid feedback: outside the ball {V_0 <= A} the command bracket is the
// homogeneous omega_n; inside it is K'x / k, so the commanded input k*omega
// becomes the linear row K'x. The actuator applies
//   x_n' = -(l_n / sigma_inf) sigma(k omega(x) + d),
// i.e. the channel is the normalized saturation scaled by l_n.

namespace satchain {

enum class Branch { homogeneous, linear };

inline const char* branch_name(Branch b) {
    return b == Branch::homogeneous ? "homogeneous" : "linear";
}

// pointwise selection used for the initial state (and exactly the switching
// rule when the hysteresis width is zero)
inline Branch pointwise_branch(const Certificate& cert, const Vec& x) {
    return V0_eval(cert.core.P, x) <= cert.core.A ? Branch::linear : Branch::homogeneous;
}

// omega(x) fed to the actuator as k * omega
inline double command_bracket(const Certificate& cert, const HomogeneousController& ctl,
                              Branch b, const Vec& x) {
    if (b == Branch::homogeneous) return ctl.omega_n(x);
    double kx = 0;
    for (int j = 0; j < cert.n; ++j) kx += cert.core.K[j] * x[j];
    return kx / cert.k_outer;
}

// shifted bracket of the dynamic variant: omega(x - y e_n)
inline double shifted_bracket(const Certificate& cert, const HomogeneousController& ctl,
                              Branch b, const Vec& x, double y) {
    Vec xs = x;
    xs[cert.n - 1] -= y;
    return command_bracket(cert, ctl, b, xs);
}

inline Branch shifted_pointwise_branch(const Certificate& cert, const Vec& x, double y) {
    Vec xs = x;
    xs[cert.n - 1] -= y;
    return pointwise_branch(cert, xs);
}

// actuator: contribution of the saturated channel to x_n'
inline double channel_output(const Certificate& cert, double sat_arg) {
    const double ln = cert.l[static_cast<size_t>(cert.n)];
    return -(ln / cert.sat.sigma_inf) * cert.sat.eval(sat_arg);
}

// Outer command gain: k >= 2 and large enough that the saturation tail error
// (2 + C~)l_n / k stays below half the certified decay at the switching shell,
// (c_n/2) v_A^{degV'/degV}.
inline double choose_outer_gain(const ChainParams& cp, const SaturationSpec& sat, double l_n,
                                double c_n, double v_A) {
    if (!(c_n > 0) || !(v_A > 0))
        throw std::invalid_argument("choose_outer_gain: need positive c_n and v_A");
    const double tail = (2.0 + sat.C_sigma_norm()) * l_n;
    const double need = 2.0 * tail / (c_n * std::pow(v_A, cp.alphad));
    return std::max(2.0, need);
}

// l_n * max(lip~, 2 sup~): the factor turning min(1,|d|) into the channel
// difference bound; <= 4 keeps the literal "4 l_0 min(1,|d|)" form sound.
inline double channel_difference_gain(const SaturationSpec& sat, double l_n) {
    return l_n * std::max(sat.lipschitz_norm(), 2.0 * sat.sup_abs_norm());
}

} // namespace satchain
