#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace satchain {

// ------------------------------------------------------ scalar primitives ---

// |x|^a sign(x), continuous for a > 0.
inline double signed_power(double x, double a) {
    if (a <= 0) throw std::invalid_argument("signed_power: exponent must be > 0 (a = 0 is set-valued)");
    if (x == 0) return 0;
    return x > 0 ? std::pow(x, a) : -std::pow(-x, a);
}

// d/dx |x|^a sign(x) = a |x|^{a-1}; caller guards the a<1, x=0 blow-up.
inline double signed_power_slope(double x, double a) {
    return a * std::pow(std::abs(x), a - 1.0);
}

struct Interval {
    double lo = 0, hi = 0;
    bool single() const { return lo == hi; }
};

// sign as a set: {-1}, {+1}, or [-1,1] at zero.
inline Interval sign_set(double x) {
    if (x > 0) return {1, 1};
    if (x < 0) return {-1, -1};
    return {-1, 1};
}

// |x|^a sign(x) extended to a = 0, where it degenerates to sign_set.
inline Interval signed_power_set(double x, double a) {
    if (a == 0) return sign_set(x);
    double v = signed_power(x, a);
    return {v, v};
}

// Standard saturation s(x) = x / max(1, |x|).
inline double standard_sat(double x) { return x / std::max(1.0, std::abs(x)); }

// Boundary-layer sign: s(z/eps) = z / max(eps, |z|). The simulator's stand-in
// for the set-valued sign.
inline double sgn_eps(double z, double eps) { return z / std::max(eps, std::abs(z)); }

// --------------------------------------------------------- S-function spec ---
// sigma is sector-bounded between two scaled standard saturations,
//   a1 x s(x/b1) <= x sigma(x) <= a2 x s(x/b2),
// has opposite limits at +-inf, and approaches them at a 1/(1+|x|) rate with
// constant C_sigma.
struct SaturationSpec {
    std::string name;   // "standard" | "tanh" | "arctan"
    double kscale = 1;  // evaluates base(kscale * x)
    double a1 = 0, b1 = 0, a2 = 0, b2 = 0;
    double sigma_inf = 0; // limit at +inf
    double C_sigma = 0;   // tail-rate constant
    double lipschitz = 0; // global Lipschitz constant
    double sup_abs = 0;   // sup |sigma|

    double eval(double x) const {
        double z = kscale * x;
        if (name == "standard") return standard_sat(z);
        if (name == "tanh") return std::tanh(z);
        if (name == "arctan") return std::atan(z);
        throw std::invalid_argument("SaturationSpec: unknown base '" + name + "'");
    }

    double rho_lo() const { return a1 / b1; } // sector slope interval for |arg| <= min(1,b1,b2)
    double rho_hi() const { return a2 / b2; }

    // constants of the normalized channel sigma / sigma_inf
    double eval_norm(double x) const { return eval(x) / sigma_inf; }
    double C_sigma_norm() const { return C_sigma / sigma_inf; }
    double lipschitz_norm() const { return lipschitz / sigma_inf; }
    double sup_abs_norm() const { return sup_abs / sigma_inf; }
};

inline void validate_sector_params(const SaturationSpec& s) {
    if (!(s.a1 > 0) || !(s.a2 >= s.a1) || !(s.b1 > 0) || !(s.b2 > 0))
        throw std::invalid_argument("SaturationSpec: need 0 < a1 <= a2 and b1, b2 > 0");
    if (s.a1 / s.b1 > s.a2 / s.b2 + 1e-15)
        throw std::invalid_argument("SaturationSpec: sector slopes must satisfy a1/b1 <= a2/b2");
    if (!(s.sigma_inf > 0) || !(s.C_sigma > 0))
        throw std::invalid_argument("SaturationSpec: sigma_inf and C_sigma must be > 0");
}

inline SaturationSpec make_saturation(const std::string& name, double kscale = 1.0) {
    if (!(kscale > 0)) throw std::invalid_argument("make_saturation: kscale must be > 0");
    SaturationSpec s;
    s.name = name;
    const double pi = 3.14159265358979323846;
    if (name == "standard") {
        s.a1 = 1; s.b1 = 1; s.a2 = 1; s.b2 = 1;
        s.sigma_inf = 1; s.C_sigma = 2; s.lipschitz = 1; s.sup_abs = 1;
    } else if (name == "tanh") {
        s.a1 = std::tanh(1.0); s.b1 = 1; s.a2 = 1; s.b2 = 1;
        s.sigma_inf = 1; s.C_sigma = 2; s.lipschitz = 1; s.sup_abs = 1;
    } else if (name == "arctan") {
        s.a1 = pi / 4; s.b1 = 1; s.a2 = pi / 2; s.b2 = pi / 2;
        s.sigma_inf = pi / 2; s.C_sigma = 2; s.lipschitz = 1; s.sup_abs = pi / 2;
    } else {
        throw std::invalid_argument("make_saturation: unknown saturation '" + name + "'");
    }
    if (kscale != 1.0) {
        // sigma(k x): sector widths shrink by k, tail constant grows for k < 1.
        s.kscale = kscale;
        s.b1 /= kscale;
        s.b2 /= kscale;
        s.C_sigma /= std::min(1.0, kscale);
        s.lipschitz *= kscale;
    }
    validate_sector_params(s);
    return s;
}

// ------------------------------------------------------------ verification ---
struct SFunctionReport {
    double sector_lower_min = 0; // min over grid of x*sigma(x) - a1 x s(x/b1)
    double sector_upper_min = 0; // min over grid of a2 x s(x/b2) - x*sigma(x)
    double tail_min = 0;         // min over grid of C/(1+|x|) - |sigma(|x|) - sigma_inf|
    double odd_limit_max = 0;    // max over grid of |sigma(-x) + sigma(x)| beyond the knee
    double lipschitz_est = 0;    // max divided difference seen
    bool pass = false;
    std::string message;
};

// Grid certification of the S-function properties. Throws on malformed
// parameters; soft failures land in the report.
inline SFunctionReport verify_s_function(const SaturationSpec& s, int grid = 4001,
                                         double x_max = 200.0, double tol = 1e-12) {
    validate_sector_params(s);
    SFunctionReport r;
    r.sector_lower_min = 1e300;
    r.sector_upper_min = 1e300;
    r.tail_min = 1e300;

    double prev_x = 0, prev_v = s.eval(0.0);
    if (std::abs(prev_v) > tol) {
        r.message = "sigma(0) != 0";
        return r;
    }
    for (int i = 1; i <= grid; ++i) {
        // geometric-ish sweep: dense near 0, reaching x_max
        double t = static_cast<double>(i) / grid;
        double x = x_max * (std::exp(4.0 * t) - 1.0) / (std::exp(4.0) - 1.0);
        for (double sgn : {1.0, -1.0}) {
            double xx = sgn * x;
            double v = s.eval(xx);
            double lo = s.a1 * xx * standard_sat(xx / s.b1);
            double hi = s.a2 * xx * standard_sat(xx / s.b2);
            r.sector_lower_min = std::min(r.sector_lower_min, xx * v - lo);
            r.sector_upper_min = std::min(r.sector_upper_min, hi - xx * v);
        }
        double tail = s.C_sigma / (1.0 + x) - std::abs(s.eval(x) - s.sigma_inf);
        r.tail_min = std::min(r.tail_min, tail);
        r.odd_limit_max = std::max(r.odd_limit_max, std::abs(s.eval(-x) + s.eval(x)));
        double dd = std::abs(s.eval(x) - prev_v) / std::max(x - prev_x, 1e-300);
        r.lipschitz_est = std::max(r.lipschitz_est, dd);
        prev_x = x;
        prev_v = s.eval(x);
    }
    bool ok = r.sector_lower_min >= -tol && r.sector_upper_min >= -tol && r.tail_min >= -tol &&
              r.odd_limit_max <= 1e-9 && r.lipschitz_est <= s.lipschitz * (1 + 1e-6);
    r.pass = ok;
    r.message = ok ? "ok" : "sector/tail/symmetry check failed";
    return r;
}

} // namespace satchain
