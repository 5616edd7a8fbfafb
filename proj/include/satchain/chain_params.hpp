#pragma once

#include <vector>

#include "rational.hpp"
#include "util.hpp"

namespace satchain {

// Exponent tables for the n-chain homogeneous design. Everything is exact
// rational; doubles are cached for the numeric paths.
//
// With weights p_i = (n-i+1)/n the feedback recursion and its Lyapunov
// functions are homogeneous: deg(V) = 1 + p_2 = (2n-1)/n, deg(Vdot) = 2 p_2.
// alpha_i / eta_i are Holder conjugates (1/alpha_i + 1/eta_i = 1).
struct ChainParams {
    int n = 0;

    std::vector<Rational> p;       // p[i], i = 1..n+1 (1-based; p[0] unused)
    std::vector<Rational> beta;    // beta[i], i = 0..n-1
    Rational alpha;                // 2(n-1)/(2n-1), in (0,1)
    std::vector<Rational> alpha_i; // alpha_i[i], i = 1..n-1
    std::vector<Rational> eta_i;   // eta_i[i],  i = 1..n-1
    std::vector<Rational> mu;      // mu[i], i = 1..n, each in (1-alpha, 1]
    std::vector<Rational> q;       // q[i] = p_{i+1}/(p_i beta_{i-1}), i = 1..n (q[n] = 0)
    std::vector<Rational> r;       // r[i] = q_i beta_i, i = 1..n-1 (all > 1)
    Rational deg_V;                // (2n-1)/n
    Rational deg_Vdot;             // 2(n-1)/n

    // cached doubles
    std::vector<double> pd, betad, alphad_i, etad_i, mud, qd, rd;
    double alphad = 0, deg_Vd = 0, deg_Vdotd = 0;
};

inline ChainParams chain_params(int n) {
    if (n == 1)
        throw std::invalid_argument(
            "chain_params: n=1 is degenerate (alpha = 0 kills the homogeneous decay "
            "V' <= -c V^alpha); use the linear core for n=1");
    if (n < 1 || n > kMaxN)
        throw std::invalid_argument("chain_params: n must be in [2, " + std::to_string(kMaxN) + "]");

    ChainParams cp;
    cp.n = n;
    const std::int64_t N = n;

    cp.p.resize(static_cast<size_t>(n) + 2);
    for (int i = 1; i <= n + 1; ++i) cp.p[static_cast<size_t>(i)] = Rational{N - i + 1, N};

    cp.beta.resize(static_cast<size_t>(n));
    cp.beta[0] = cp.p[2]; // beta_0 = p_2 < 1
    for (int i = 1; i <= n - 1; ++i) cp.beta[static_cast<size_t>(i)] = Rational{N - 1 + i, N - i};

    cp.alpha = Rational{2 * (N - 1), 2 * N - 1};

    cp.alpha_i.resize(static_cast<size_t>(n));
    cp.eta_i.resize(static_cast<size_t>(n));
    for (int i = 1; i <= n - 1; ++i) {
        cp.alpha_i[static_cast<size_t>(i)] = Rational{2 * (N - 1), N + i - 2}; // = 2p_2/(1+p_2-p_i)
        cp.eta_i[static_cast<size_t>(i)] = Rational{2 * (N - 1), N - i};       // = 2p_2/p_{i+1}
    }

    cp.mu.resize(static_cast<size_t>(n) + 1);
    for (int i = 1; i <= n; ++i) cp.mu[static_cast<size_t>(i)] = Rational{N - i + 2, 2 * N - 1};

    cp.q.resize(static_cast<size_t>(n) + 1);
    for (int i = 1; i <= n; ++i) cp.q[static_cast<size_t>(i)] = Rational{N - i, N + i - 2};

    cp.r.resize(static_cast<size_t>(n));
    for (int i = 1; i <= n - 1; ++i) cp.r[static_cast<size_t>(i)] = Rational{N + i - 1, N + i - 2};

    cp.deg_V = Rational{2 * N - 1, N};
    cp.deg_Vdot = Rational{2 * (N - 1), N};

    auto cache = [](const std::vector<Rational>& src, std::vector<double>& dst) {
        dst.resize(src.size());
        for (size_t i = 0; i < src.size(); ++i) dst[i] = src[i].value();
    };
    cache(cp.p, cp.pd);
    cache(cp.beta, cp.betad);
    cache(cp.alpha_i, cp.alphad_i);
    cache(cp.eta_i, cp.etad_i);
    cache(cp.mu, cp.mud);
    cache(cp.q, cp.qd);
    cache(cp.r, cp.rd);
    cp.alphad = cp.alpha.value();
    cp.deg_Vd = cp.deg_V.value();
    cp.deg_Vdotd = cp.deg_Vdot.value();
    return cp;
}

// Anisotropic dilation with weights p_i: (delta_eps x)_i = eps^{p_i} x_i.
inline Vec dilate(const ChainParams& cp, double eps, const Vec& x) {
    Vec y(x.n);
    for (int i = 0; i < x.n; ++i) y[i] = std::pow(eps, cp.pd[static_cast<size_t>(i) + 1]) * x[i];
    return y;
}

} // namespace satchain
