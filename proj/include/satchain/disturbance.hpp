#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "util.hpp"

// Disturbance generators for the closed-loop scenarios. Signals are pure
// functions of time except adversarial-antisign, which opposes the current
// command bracket: d = -gain * omega(x(t)) + bias. Where a norm is analytic it
// is declared here; anything else reports NaN and the measuring side
// integrates the recorded trace instead.

namespace satchain {

struct DisturbanceSignal {
    enum class Kind {
        zero,
        constant_window,
        sinusoid,
        exponential_decay,
        band_limited_random,
        adversarial_antisign,
        tabulated
    };

    Kind kind = Kind::zero;
    double amp = 0;
    double t0 = 0, t1 = 0;       // constant_window support
    double omega = 0, phase = 0; // sinusoid: amp * sin(omega t + phase)
    double rate = 0;             // exponential_decay: amp * exp(-rate t)
    double gain = 0, bias = 0;   // adversarial_antisign
    std::vector<double> tab_t, tab_v;
    std::vector<double> bl_amp, bl_omega, bl_phase; // frozen band-limited modes

    bool state_dependent() const { return kind == Kind::adversarial_antisign; }

    double eval(double t, double bracket = 0.0) const {
        switch (kind) {
            case Kind::zero:
                return 0.0;
            case Kind::constant_window:
                return (t >= t0 && t <= t1) ? amp : 0.0;
            case Kind::sinusoid:
                return amp * std::sin(omega * t + phase);
            case Kind::exponential_decay:
                return amp * std::exp(-rate * t);
            case Kind::band_limited_random: {
                double s = 0;
                for (size_t m = 0; m < bl_amp.size(); ++m)
                    s += bl_amp[m] * std::sin(bl_omega[m] * t + bl_phase[m]);
                return s;
            }
            case Kind::adversarial_antisign:
                return -gain * bracket + bias;
            case Kind::tabulated: {
                if (tab_t.empty()) return 0.0;
                if (t <= tab_t.front()) return tab_v.front();
                if (t >= tab_t.back()) return tab_v.back();
                size_t hi = 1;
                while (tab_t[hi] < t) ++hi;
                const double w = (t - tab_t[hi - 1]) / (tab_t[hi] - tab_t[hi - 1]);
                return tab_v[hi - 1] + w * (tab_v[hi] - tab_v[hi - 1]);
            }
        }
        return 0.0;
    }

    // sup norm; for band-limited this is the amplitude-sum upper bound
    double norm_inf() const {
        switch (kind) {
            case Kind::zero:
                return 0.0;
            case Kind::constant_window:
            case Kind::sinusoid:
            case Kind::exponential_decay:
                return std::abs(amp);
            case Kind::band_limited_random: {
                double s = 0;
                for (double a : bl_amp) s += std::abs(a);
                return s;
            }
            case Kind::adversarial_antisign:
                return std::numeric_limits<double>::quiet_NaN();
            case Kind::tabulated: {
                double s = 0;
                for (double v : tab_v) s = std::max(s, std::abs(v));
                return s;
            }
        }
        return 0.0;
    }

    // analytic L_p over [0, inf) where it exists; NaN otherwise
    double norm_p(double p) const {
        if (!(p >= 1)) throw std::invalid_argument("norm_p: need p >= 1");
        switch (kind) {
            case Kind::zero:
                return 0.0;
            case Kind::constant_window:
                return std::abs(amp) * std::pow(t1 - t0, 1.0 / p);
            case Kind::exponential_decay:
                return std::abs(amp) * std::pow(p * rate, -1.0 / p);
            default:
                return std::numeric_limits<double>::quiet_NaN();
        }
    }
};

inline DisturbanceSignal zero_signal() { return {}; }

inline DisturbanceSignal constant_window(double amp, double t0, double t1) {
    if (!(t1 > t0)) throw std::invalid_argument("constant_window: need t1 > t0");
    DisturbanceSignal d;
    d.kind = DisturbanceSignal::Kind::constant_window;
    d.amp = amp;
    d.t0 = t0;
    d.t1 = t1;
    return d;
}

inline DisturbanceSignal sinusoid(double amp, double omega, double phase = 0.0) {
    if (!(omega > 0)) throw std::invalid_argument("sinusoid: need omega > 0");
    DisturbanceSignal d;
    d.kind = DisturbanceSignal::Kind::sinusoid;
    d.amp = amp;
    d.omega = omega;
    d.phase = phase;
    return d;
}

inline DisturbanceSignal exponential_decay(double amp, double rate) {
    if (!(rate > 0)) throw std::invalid_argument("exponential_decay: need rate > 0");
    DisturbanceSignal d;
    d.kind = DisturbanceSignal::Kind::exponential_decay;
    d.amp = amp;
    d.rate = rate;
    return d;
}

// modes drawn once at construction; the signal is then a fixed trigonometric
// sum, bit-reproducible for a given seed
inline DisturbanceSignal band_limited_random(double amp, double omega_lo, double omega_hi,
                                             int modes, std::uint64_t seed) {
    if (!(omega_hi >= omega_lo) || !(omega_lo > 0))
        throw std::invalid_argument("band_limited_random: need 0 < omega_lo <= omega_hi");
    if (modes < 1) throw std::invalid_argument("band_limited_random: need at least one mode");
    DisturbanceSignal d;
    d.kind = DisturbanceSignal::Kind::band_limited_random;
    d.amp = amp;
    Rng rng(seed);
    for (int m = 0; m < modes; ++m) {
        d.bl_amp.push_back(amp / modes);
        d.bl_omega.push_back(rng.uniform(omega_lo, omega_hi));
        d.bl_phase.push_back(rng.uniform(0.0, 6.283185307179586));
    }
    return d;
}

inline DisturbanceSignal adversarial_antisign(double gain, double bias = 0.0) {
    if (!(gain >= 0)) throw std::invalid_argument("adversarial_antisign: need gain >= 0");
    DisturbanceSignal d;
    d.kind = DisturbanceSignal::Kind::adversarial_antisign;
    d.gain = gain;
    d.bias = bias;
    return d;
}

inline DisturbanceSignal tabulated(std::vector<double> t, std::vector<double> v) {
    if (t.size() != v.size() || t.size() < 2)
        throw std::invalid_argument("tabulated: need matching t/v with at least two points");
    for (size_t i = 1; i < t.size(); ++i)
        if (!(t[i] > t[i - 1])) throw std::invalid_argument("tabulated: times must increase");
    DisturbanceSignal d;
    d.kind = DisturbanceSignal::Kind::tabulated;
    d.tab_t = std::move(t);
    d.tab_v = std::move(v);
    return d;
}

} // namespace satchain
