#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "chain_params.hpp"
#include "controller.hpp"
#include "mat.hpp"
#include "util.hpp"

// Lyapunov layer for the homogeneous controller.
//
//   W_1 = |x_1|^{b0+1}/(b0+1)
//   W_i = (|x_i|^{b+1} - |v|^{b+1})/(b+1) - sgnpow(v,b) (x_i - v),  b = beta_{i-1}, v = v_{i-1}
//   V_i = W_1 + ... + W_i
//
// sgnpow(v_{i-1}, b) is evaluated as -l_{i-1}^b sgnpow(omega_{i-1}, r_{i-1}) so that
// the recursion omega_i = sgnpow(x_i, b) + l^b sgnpow(omega_{i-1}, r) and the W bracket
// round the same way; W_i then vanishes to machine precision on {omega_i = 0}.
//
// dV_n/dx_j = omega_j + sum_{i>j} (x_i - v_{i-1}) P[i][j], and dV_n/dx_n = omega_n
// exactly, which is what makes the control channel enter V' as omega_n * u.

namespace satchain {

struct LyapEval {
    double V = 0;   // V_n
    Vec grad;       // dV_n/dx_j, j = 1..n
    Vec W;          // W[i-1] = W_i
    ChainEval chain;
};

namespace detail {

inline double w_level(const HomogeneousController& ctl, const ChainEval& e, const Vec& x, int i) {
    const double b = ctl.cp.betad[static_cast<size_t>(i - 1)];
    if (i == 1) return std::pow(std::abs(x[0]), b + 1.0) / (b + 1.0);
    const double v = e.v[i - 2];
    // sgnpow(v, b) through the omega chain: one rounding path shared with omega_i.
    const double vb = -ctl.lpow[static_cast<size_t>(i - 1)] *
                      signed_power(e.omega[i - 2], ctl.cp.rd[static_cast<size_t>(i - 1)]);
    const double xi = x[i - 1];
    return (std::pow(std::abs(xi), b + 1.0) - std::pow(std::abs(v), b + 1.0)) / (b + 1.0) -
           vb * (xi - v);
}

} // namespace detail

// V_i on the first `level` coordinates (level = n gives the full V_n).
inline double V_level(const HomogeneousController& ctl, const Vec& x, int level) {
    if (level < 1 || level > ctl.n()) throw std::invalid_argument("V_level: level out of range");
    const ChainEval e = ctl.eval_prefix(x, level);
    double s = 0;
    for (int i = 1; i <= level; ++i) s += detail::w_level(ctl, e, x, i);
    return s;
}

inline LyapEval lyap_eval(const HomogeneousController& ctl, const Vec& x) {
    const int n = ctl.n();
    LyapEval out;
    out.chain = ctl.eval(x);
    out.W = Vec(n);
    out.grad = Vec(n);
    double v = 0;
    for (int i = 1; i <= n; ++i) {
        out.W[i - 1] = detail::w_level(ctl, out.chain, x, i);
        v += out.W[i - 1];
    }
    out.V = v;
    for (int j = 1; j <= n; ++j) {
        double g = out.chain.omega[j - 1];
        for (int i = j + 1; i <= n; ++i)
            g += (x[i - 1] - out.chain.v[i - 2]) * out.chain.P[static_cast<size_t>(i)][static_cast<size_t>(j)];
        out.grad[j - 1] = g;
    }
    return out;
}

// Anisotropic dilation x_i -> eps^{p_i} x_i on the first `level` coordinates.
inline Vec dilate_level(const ChainParams& cp, double eps, const Vec& x, int level) {
    Vec y(level);
    for (int i = 0; i < level; ++i) y[i] = std::pow(eps, cp.pd[static_cast<size_t>(i) + 1]) * x[i];
    return y;
}

// Lands dir on the level set {V_level = 1}: V_i is homogeneous of degree
// 1 + p_2 = deg V, so eps = V(dir)^{-1/degV} does it in one step.
inline Vec sphere_point(const HomogeneousController& ctl, const Vec& dir, int level) {
    const double val = V_level(ctl, dir, level);
    if (!(val > 0)) throw std::invalid_argument("sphere_point: direction with nonpositive V");
    const double eps = std::pow(val, -1.0 / ctl.cp.deg_Vd);
    return dilate_level(ctl.cp, eps, dir, level);
}

// D(x) = sum_{j<n} dV_n/dx_j x_{j+1}: the part of V' the control cannot touch.
inline double drift_term(const LyapEval& le, const Vec& x) {
    double s = 0;
    for (int j = 1; j < le.grad.n; ++j) s += le.grad[j - 1] * x[j];
    return s;
}

// --- extremum search over the compact homogeneity sphere ---------------------
//
// Quasi-random directions landed on {V_level = 1}, then a shrinking-step local
// polish of the best few candidates. Deterministic for a fixed seed. The
// coarse/full split feeds the sampling-density warning: if half the samples
// already tell a different story, the budget is too small for this geometry.

struct SearchOpts {
    int samples = 20000;
    int refine_points = 12;
    int refine_rounds = 80;
    std::uint64_t seed = 0x5eed5eedULL;
    double density_rel_tol = 0.05;
};

struct Extremum {
    double value = 0;        // refined extremal value
    double coarse_value = 0; // extremum over the first half of the samples
    double sampled_value = 0;// extremum before local refinement
    Vec arg;                 // where it was attained
    bool density_warning = false;
    int samples = 0;
};

template <class F>
Extremum sphere_extremum(const HomogeneousController& ctl, int level, F&& f, bool maximize,
                         const SearchOpts& opts = {}) {
    if (opts.samples < 2) throw std::invalid_argument("sphere_extremum: need at least 2 samples");
    Rng rng(opts.seed);
    const double sgn = maximize ? 1.0 : -1.0;

    struct Cand {
        double val;
        Vec x;
    };
    std::vector<Cand> top; // kept sorted, best (largest sgn*f) first
    const size_t keep = static_cast<size_t>(std::max(1, opts.refine_points));

    double coarse = 0;
    bool have_coarse = false;
    for (int k = 0; k < opts.samples; ++k) {
        const Vec x = sphere_point(ctl, rng.direction(level), level);
        const double val = sgn * f(x);
        if (top.size() < keep || val > top.back().val) {
            auto pos = std::find_if(top.begin(), top.end(),
                                    [&](const Cand& c) { return val > c.val; });
            top.insert(pos, Cand{val, x});
            if (top.size() > keep) top.pop_back();
        }
        if (k == opts.samples / 2 - 1) {
            coarse = top.front().val;
            have_coarse = true;
        }
    }
    const double sampled = top.front().val;

    // Local polish: random perturbations in direction space, re-landed on the
    // sphere, step shrinking on failure.
    Cand best = top.front();
    for (const Cand& c : top) {
        Cand cur = c;
        double step = 0.2;
        for (int r = 0; r < opts.refine_rounds; ++r) {
            Vec d = rng.direction(level);
            Vec probe(level);
            for (int i = 0; i < level; ++i) probe[i] = cur.x[i] + step * d[i];
            double vv;
            try {
                const Vec px = sphere_point(ctl, probe, level);
                vv = sgn * f(px);
                if (vv > cur.val) {
                    cur = Cand{vv, px};
                    continue;
                }
            } catch (const std::invalid_argument&) {
                // probe degenerated to V <= 0; shrink and retry
            }
            step *= 0.8;
        }
        if (cur.val > best.val) best = cur;
    }

    Extremum out;
    out.value = sgn * best.val;
    out.coarse_value = have_coarse ? sgn * coarse : out.value;
    out.sampled_value = sgn * sampled;
    out.arg = best.x;
    out.samples = opts.samples;
    const double denom = std::max({std::abs(out.value), std::abs(out.coarse_value), 1e-12});
    out.density_warning = std::abs(out.value - out.coarse_value) / denom > opts.density_rel_tol;
    return out;
}

// --- decay constant ----------------------------------------------------------
//
// decay(x) = l_n |omega_n| - D(x) on {V_n = 1}. With u in the sign-feedback
// channel, V' = D - l_n |omega_n| + omega_n (u + l_n sgn omega_n), so a positive
// infimum of decay certifies V' <= -c_n V^{degV'/degV} for every admissible u.

struct CnEstimate {
    double c_n = 0;      // (1 - margin) * raw_inf
    double raw_inf = 0;  // refined sample infimum of decay
    double margin = 0;
    Vec worst;           // sphere point attaining the infimum
    bool density_warning = false;
    int samples = 0;
};

inline CnEstimate estimate_cn(const HomogeneousController& ctl, const SearchOpts& opts = {},
                              double margin = 0.05) {
    const int n = ctl.n();
    const double ln = ctl.l[static_cast<size_t>(n)];
    auto decay = [&](const Vec& x) {
        const LyapEval le = lyap_eval(ctl, x);
        return ln * std::abs(le.chain.omega[n - 1]) - drift_term(le, x);
    };
    const Extremum ex = sphere_extremum(ctl, n, decay, /*maximize=*/false, opts);
    CnEstimate out;
    out.raw_inf = ex.value;
    out.margin = margin;
    out.c_n = (1.0 - margin) * ex.value;
    out.worst = ex.arg;
    out.density_warning = ex.density_warning;
    out.samples = ex.samples;
    return out;
}

// K such that |V'| <= K V^{degV'/degV} for the chain driven by any |u| <= u_bound.
// |D| + |omega_n| u_bound is homogeneous of degree deg V', so its sphere supremum
// is the constant; it does not depend on which sublevel set the bound is used on.
inline double estimate_KC(const HomogeneousController& ctl, double u_bound,
                          const SearchOpts& opts = {}, double margin = 0.05) {
    if (!(u_bound >= 0)) throw std::invalid_argument("estimate_KC: u_bound must be >= 0");
    const int n = ctl.n();
    auto f = [&](const Vec& x) {
        const LyapEval le = lyap_eval(ctl, x);
        return std::abs(drift_term(le, x)) + std::abs(le.chain.omega[n - 1]) * u_bound;
    };
    const Extremum ex = sphere_extremum(ctl, n, f, /*maximize=*/true, opts);
    return (1.0 + margin) * ex.value;
}

// C_i with |x_i|^{beta_{i-1}+1} <= C_i V_n; both sides are homogeneous of degree
// deg V, so the sphere supremum plus headroom is the constant.
inline std::vector<double> per_coordinate_bounds(const HomogeneousController& ctl,
                                                 const SearchOpts& opts = {},
                                                 double margin = 0.05) {
    const int n = ctl.n();
    std::vector<double> c(static_cast<size_t>(n) + 1, 0.0);
    SearchOpts o = opts;
    for (int i = 1; i <= n; ++i) {
        const double bp1 = ctl.cp.betad[static_cast<size_t>(i - 1)] + 1.0;
        o.seed = opts.seed + static_cast<std::uint64_t>(i) * 0x9e3779b97f4a7c15ULL;
        const Extremum ex = sphere_extremum(
            ctl, n, [&](const Vec& x) { return std::pow(std::abs(x[i - 1]), bp1); },
            /*maximize=*/true, o);
        c[static_cast<size_t>(i)] = (1.0 + margin) * ex.value;
    }
    return c;
}

// m_j = sup_{V_n=1} |dV_n/dx_j|^{alpha_j} (plus headroom), j = 1..n-1. Used to
// size the Young split of the gradient-times-disturbance terms.
inline std::vector<double> grad_young_bounds(const HomogeneousController& ctl,
                                             const SearchOpts& opts = {}, double margin = 0.05) {
    const int n = ctl.n();
    if (n < 2) throw std::invalid_argument("grad_young_bounds: need n >= 2");
    std::vector<double> m(static_cast<size_t>(n), 0.0);
    SearchOpts o = opts;
    for (int j = 1; j <= n - 1; ++j) {
        const double aj = ctl.cp.alphad_i[static_cast<size_t>(j)];
        o.seed = opts.seed + 0xa5a5a5a5ULL + static_cast<std::uint64_t>(j);
        const Extremum ex = sphere_extremum(
            ctl, n,
            [&](const Vec& x) { return std::pow(std::abs(lyap_eval(ctl, x).grad[j - 1]), aj); },
            /*maximize=*/true, o);
        m[static_cast<size_t>(j)] = (1.0 + margin) * ex.value;
    }
    return m;
}

// Matched-disturbance derivative constants: with g_j = dV_n/dx_j and Young
// |g_j d_j| <= (1/alpha_j)|g_j/lambda_j|^{alpha_j} + (1/eta_j)|lambda_j d_j|^{eta_j},
// lambda_j is sized so the first sum costs exactly c_n/2 V^alpha, split evenly
// across j. Then C1 = c_n/2 and C2 = max_j lambda_j^{eta_j}/eta_j.
struct DerMisConstants {
    double C1 = 0;
    double C2 = 0;
    std::vector<double> lambda; // index 1..n-1
};

inline DerMisConstants der_mis_constants(const ChainParams& cp, double c_n,
                                         const std::vector<double>& m) {
    const int n = cp.n;
    if (!(c_n > 0)) throw std::invalid_argument("der_mis_constants: need c_n > 0");
    if (m.size() != static_cast<size_t>(n)) throw std::invalid_argument("der_mis_constants: bad m size");
    DerMisConstants out;
    out.C1 = 0.5 * c_n;
    out.lambda.assign(static_cast<size_t>(n), 0.0);
    const double budget = 0.5 * c_n / static_cast<double>(n - 1);
    for (int j = 1; j <= n - 1; ++j) {
        const double aj = cp.alphad_i[static_cast<size_t>(j)];
        const double ej = cp.etad_i[static_cast<size_t>(j)];
        // (1/aj) m_j / lambda^aj = budget
        const double lam = std::pow(m[static_cast<size_t>(j)] / (aj * budget), 1.0 / aj);
        out.lambda[static_cast<size_t>(j)] = lam;
        out.C2 = std::max(out.C2, std::pow(lam, ej) / ej);
    }
    return out;
}

// --- quadratic layer ----------------------------------------------------------

inline double V0_eval(const Mat& p, const Vec& x) { return std::sqrt(quad_form(p, x)); }

// W = min(V_0, V_n^alpha): the glue functional of the hybrid analysis.
inline double W_eval(const Mat& p, const HomogeneousController& ctl, const Vec& x) {
    const double v0 = V0_eval(p, x);
    const double vn = V_level(ctl, x, ctl.n());
    return std::min(v0, std::pow(vn, ctl.cp.alphad));
}

// Extremum of f over the ellipsoid {V_0 = A}; sampling x = A y / sqrt(y'Py).
template <class F>
Extremum ellipsoid_extremum(const Mat& p, double A, int n, F&& f, bool maximize,
                            const SearchOpts& opts = {}) {
    if (!(A > 0)) throw std::invalid_argument("ellipsoid_extremum: A must be positive");
    Rng rng(opts.seed);
    const double sgn = maximize ? 1.0 : -1.0;
    Extremum out;
    out.samples = opts.samples;
    double best = -std::numeric_limits<double>::infinity();
    Vec bestx;
    double coarse = 0;
    for (int k = 0; k < opts.samples; ++k) {
        Vec y = rng.direction(n);
        const double q = std::sqrt(quad_form(p, y));
        Vec x(n);
        for (int i = 0; i < n; ++i) x[i] = A * y[i] / q;
        const double val = sgn * f(x);
        if (val > best) {
            best = val;
            bestx = x;
        }
        if (k == opts.samples / 2 - 1) coarse = best;
    }
    // Polish around the best point, staying on the ellipsoid.
    double step = 0.2;
    Vec cur = bestx;
    double curval = best;
    for (int r = 0; r < opts.refine_rounds; ++r) {
        Vec d = rng.direction(n);
        Vec probe(n);
        for (int i = 0; i < n; ++i) probe[i] = cur[i] + step * A * d[i];
        const double q = std::sqrt(quad_form(p, probe));
        if (q > 0) {
            for (int i = 0; i < n; ++i) probe[i] = A * probe[i] / q;
            const double vv = sgn * f(probe);
            if (vv > curval) {
                curval = vv;
                cur = probe;
                continue;
            }
        }
        step *= 0.8;
    }
    out.value = sgn * curval;
    out.coarse_value = sgn * coarse;
    out.sampled_value = sgn * best;
    out.arg = cur;
    const double denom = std::max({std::abs(out.value), std::abs(out.coarse_value), 1e-12});
    out.density_warning = std::abs(out.value - out.coarse_value) / denom > opts.density_rel_tol;
    return out;
}

// Range of V_n over the switching ellipsoid {V_0 = A}. v_A is reported shrunk
// and V_A inflated so downstream inequalities stay conservative.
struct VARange {
    double v_A = 0; // lower bound of min
    double V_A = 0; // upper bound of max
    double raw_min = 0;
    double raw_max = 0;
    bool density_warning = false;
};

inline VARange estimate_vA_VA(const Mat& p, const HomogeneousController& ctl, double A,
                              const SearchOpts& opts = {}, double margin = 1e-2) {
    const int n = ctl.n();
    auto vn = [&](const Vec& x) { return V_level(ctl, x, n); };
    const Extremum lo = ellipsoid_extremum(p, A, n, vn, /*maximize=*/false, opts);
    SearchOpts o2 = opts;
    o2.seed = opts.seed ^ 0xdecafULL;
    const Extremum hi = ellipsoid_extremum(p, A, n, vn, /*maximize=*/true, o2);
    VARange out;
    out.raw_min = lo.value;
    out.raw_max = hi.value;
    out.v_A = (1.0 - margin) * lo.value;
    out.V_A = (1.0 + margin) * hi.value;
    out.density_warning = lo.density_warning || hi.density_warning;
    return out;
}

// --- interpolation family -----------------------------------------------------
//
// Z_mu = V_n^mu satisfies Z' <= -c_mu Z^{alpha_mu} + l_mu |d| outside {V_0 <= A}
// with the constants below; mu = 1 recovers the homogeneous estimate and
// mu -> 1 - alpha trades decay rate against disturbance amplification.

struct MuFamily {
    double mu = 1;
    double c_mu = 0;
    double l_mu = 0;
    double alpha_mu = 0;
};

inline MuFamily mu_family(const ChainParams& cp, double c_n, double l_n, double v_A, double mu) {
    const double alpha = cp.alphad;
    if (!(mu > 1.0 - alpha) || mu > 1.0)
        throw std::invalid_argument("mu_family: mu must lie in (1 - alpha, 1]");
    if (!(v_A > 0)) throw std::invalid_argument("mu_family: v_A must be positive");
    MuFamily out;
    out.mu = mu;
    out.c_mu = mu * 0.5 * c_n;
    out.l_mu = 4.0 * mu * l_n * std::pow(v_A, mu - 1.0);
    out.alpha_mu = (mu - 1.0 + alpha) / mu;
    return out;
}

} // namespace satchain
