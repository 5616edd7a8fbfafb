#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "chain_params.hpp"
#include "disturbance.hpp"
#include "sim.hpp"

// Signal norms on finite-horizon traces: L_p by trapezoid quadrature, the
// drift functional N, the mismatched aggregate Gamma, and the tail-sup
// surrogate for limsup_{t->inf}.

namespace satchain {

inline bool is_inf_p(double p) { return std::isinf(p) && p > 0; }

struct LpNorm {
    double value = 0;
    double tail = 0; // same norm over the final tenth: a truncation-error proxy
};

inline LpNorm lp_norm(const std::vector<double>& t, const std::vector<double>& v, double p) {
    if (t.empty() || t.size() != v.size()) throw std::invalid_argument("lp_norm: bad trace");
    if (!(p >= 1)) throw std::invalid_argument("lp_norm: p must be in [1, inf]");
    const double T = t.back();
    const double tail_from = t.front() + 0.9 * (T - t.front());
    LpNorm out;
    if (is_inf_p(p)) {
        for (size_t k = 0; k < v.size(); ++k) {
            const double a = std::abs(v[k]);
            out.value = std::max(out.value, a);
            if (t[k] >= tail_from) out.tail = std::max(out.tail, a);
        }
        return out;
    }
    double acc = 0, acc_tail = 0;
    for (size_t k = 1; k < v.size(); ++k) {
        const double dt = t[k] - t[k - 1];
        if (dt < 0) throw std::invalid_argument("lp_norm: time must be nondecreasing");
        const double seg = 0.5 * dt * (std::pow(std::abs(v[k - 1]), p) + std::pow(std::abs(v[k]), p));
        acc += seg;
        if (t[k - 1] >= tail_from) acc_tail += seg;
    }
    out.value = std::pow(acc, 1.0 / p);
    out.tail = std::pow(acc_tail, 1.0 / p);
    return out;
}

template <class F>
LpNorm lp_norm_of(const Trajectory& tr, F f, double p) {
    std::vector<double> t, v;
    t.reserve(tr.samples.size());
    v.reserve(tr.samples.size());
    for (const Sample& s : tr.samples) {
        t.push_back(s.t);
        v.push_back(f(s));
    }
    return lp_norm(t, v, p);
}

// N(f) = limsup over window pairs of |int_{t1}^{t2} f|, surrogate: range of the
// cumulative integral over the tail  t >= tail_frac * T.
inline double N_functional(const std::vector<double>& t, const std::vector<double>& v,
                           double tail_frac = 0.8) {
    if (t.size() < 2 || t.size() != v.size()) throw std::invalid_argument("N_functional: bad trace");
    if (!(tail_frac >= 0) || !(tail_frac < 1))
        throw std::invalid_argument("N_functional: tail_frac must be in [0,1)");
    const double from = t.front() + tail_frac * (t.back() - t.front());
    double acc = 0;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    if (t.front() >= from) lo = hi = 0;
    for (size_t k = 1; k < v.size(); ++k) {
        acc += 0.5 * (t[k] - t[k - 1]) * (v[k - 1] + v[k]);
        if (t[k] >= from) {
            lo = std::min(lo, acc);
            hi = std::max(hi, acc);
        }
    }
    if (!(hi >= lo)) throw std::invalid_argument("N_functional: tail window holds no samples");
    return hi - lo;
}

inline double N_of_signal(const DisturbanceSignal& d, double T, double dt = 1e-3,
                          double tail_frac = 0.8) {
    if (!(T > 0) || !(dt > 0)) throw std::invalid_argument("N_of_signal: need T, dt > 0");
    if (d.state_dependent())
        throw std::invalid_argument("N_of_signal: signal is state-dependent");
    std::vector<double> t, v;
    const int m = static_cast<int>(std::ceil(T / dt));
    t.reserve(static_cast<size_t>(m) + 1);
    v.reserve(static_cast<size_t>(m) + 1);
    for (int k = 0; k <= m; ++k) {
        const double tk = std::min(T, k * dt);
        t.push_back(tk);
        v.push_back(d.eval(tk));
    }
    return N_functional(t, v, tail_frac);
}

// Gamma(E) = sup_t |E(t)|_2 + sum_i (sup_t |E_i(t)|)^{2 p_2 / p_{i+1}};
// comp[i-1] holds the i-th component, i = 1..n-1, on a shared grid.
inline double Gamma_functional(const ChainParams& cp,
                               const std::vector<std::vector<double>>& comp) {
    const int n = cp.n;
    if (static_cast<int>(comp.size()) != n - 1)
        throw std::invalid_argument("Gamma_functional: need n-1 component traces");
    if (comp.empty()) return 0;
    const size_t len = comp[0].size();
    if (len == 0) throw std::invalid_argument("Gamma_functional: empty trace");
    for (const auto& c : comp)
        if (c.size() != len) throw std::invalid_argument("Gamma_functional: ragged traces");

    double sup_vec = 0;
    for (size_t k = 0; k < len; ++k) {
        double s = 0;
        for (const auto& c : comp) s += c[k] * c[k];
        sup_vec = std::max(sup_vec, s);
    }
    double out = std::sqrt(sup_vec);
    for (int i = 1; i <= n - 1; ++i) {
        double sup_i = 0;
        for (double x : comp[static_cast<size_t>(i - 1)]) sup_i = std::max(sup_i, std::abs(x));
        const double expo = 2.0 * cp.pd[2] / cp.pd[static_cast<size_t>(i) + 1];
        out += std::pow(sup_i, expo);
    }
    return out;
}

inline double Gamma_of_signals(const ChainParams& cp, const std::vector<DisturbanceSignal>& E,
                               double T, double dt = 1e-3) {
    if (cp.n < 2) return 0;
    if (!(T > 0) || !(dt > 0)) throw std::invalid_argument("Gamma_of_signals: need T, dt > 0");
    std::vector<std::vector<double>> comp(static_cast<size_t>(cp.n - 1));
    const int m = static_cast<int>(std::ceil(T / dt));
    for (int i = 0; i < cp.n - 1; ++i) {
        auto& c = comp[static_cast<size_t>(i)];
        c.reserve(static_cast<size_t>(m) + 1);
        const bool have = i < static_cast<int>(E.size());
        if (have && E[static_cast<size_t>(i)].state_dependent())
            throw std::invalid_argument("Gamma_of_signals: signal is state-dependent");
        for (int k = 0; k <= m; ++k)
            c.push_back(have ? E[static_cast<size_t>(i)].eval(std::min(T, k * dt)) : 0.0);
    }
    return Gamma_functional(cp, comp);
}

// limsup surrogate: sup over the final `frac` window, flagged settled when
// doubling the window moves the sup by under 5% (with an absolute floor so a
// converged, noise-level tail counts as settled).
struct TailSup {
    double value = 0;
    double window_from = 0;
    bool settled = false;
};

inline TailSup tail_sup(const std::vector<double>& t, const std::vector<double>& v,
                        double frac = 0.2) {
    if (t.empty() || t.size() != v.size()) throw std::invalid_argument("tail_sup: bad trace");
    if (!(frac > 0) || !(frac <= 0.5))
        throw std::invalid_argument("tail_sup: frac must be in (0, 1/2]");
    const double span = t.back() - t.front();
    const double from1 = t.back() - frac * span;
    const double from2 = t.back() - 2 * frac * span;
    double sup1 = 0, sup2 = 0;
    for (size_t k = 0; k < v.size(); ++k) {
        const double a = std::abs(v[k]);
        if (t[k] >= from2) sup2 = std::max(sup2, a);
        if (t[k] >= from1) sup1 = std::max(sup1, a);
    }
    TailSup out;
    out.value = sup1;
    out.window_from = from1;
    out.settled = sup2 <= 1.05 * sup1 + 1e-9;
    return out;
}

template <class F>
TailSup tail_sup_of(const Trajectory& tr, F f, double frac = 0.2) {
    std::vector<double> t, v;
    t.reserve(tr.samples.size());
    v.reserve(tr.samples.size());
    for (const Sample& s : tr.samples) {
        t.push_back(s.t);
        v.push_back(f(s));
    }
    return tail_sup(t, v, frac);
}

} // namespace satchain
