#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>

namespace satchain {

// Hard cap on the chain length; keeps state vectors on the stack.
inline constexpr int kMaxN = 12;

// Fixed-capacity state vector. Hot loops (RK stages, sphere sweeps) must not
// touch the heap.
struct Vec {
    // one slot beyond kMaxN: the dynamic-shift loop integrates (x, y) jointly
    std::array<double, kMaxN + 1> a{};
    int n = 0;

    Vec() = default;
    explicit Vec(int dim) : n(dim) {
        if (dim < 0 || dim > kMaxN + 1) throw std::invalid_argument("Vec: dimension out of range");
    }
    Vec(std::initializer_list<double> xs) : n(static_cast<int>(xs.size())) {
        if (n > kMaxN + 1) throw std::invalid_argument("Vec: dimension out of range");
        int i = 0;
        for (double v : xs) a[static_cast<size_t>(i++)] = v;
    }

    double& operator[](int i) { return a[static_cast<size_t>(i)]; }
    double operator[](int i) const { return a[static_cast<size_t>(i)]; }
    int size() const { return n; }

    double norm() const {
        double s = 0;
        for (int i = 0; i < n; ++i) s += a[static_cast<size_t>(i)] * a[static_cast<size_t>(i)];
        return std::sqrt(s);
    }
    double norm_inf() const {
        double m = 0;
        for (int i = 0; i < n; ++i) m = std::max(m, std::abs(a[static_cast<size_t>(i)]));
        return m;
    }
};

inline Vec operator+(Vec x, const Vec& y) {
    for (int i = 0; i < x.n; ++i) x[i] += y[i];
    return x;
}
inline Vec operator-(Vec x, const Vec& y) {
    for (int i = 0; i < x.n; ++i) x[i] -= y[i];
    return x;
}
inline Vec operator*(double c, Vec x) {
    for (int i = 0; i < x.n; ++i) x[i] *= c;
    return x;
}

// ------------------------------------------------------------------ rng ----
// splitmix64 + Box-Muller. std:: distributions are implementation-defined,
// which would make seeded outputs differ across standard libraries.
struct Rng {
    uint64_t state;
    explicit Rng(uint64_t seed) : state(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    // uniform in [0,1)
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }
    double normal() {
        // Box-Muller; discard the companion draw to stay stateless.
        double u1 = 0;
        do { u1 = next_unit(); } while (u1 <= 0x1.0p-60);
        double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }
    Vec direction(int n) {
        Vec d(n);
        double s = 0;
        do {
            for (int i = 0; i < n; ++i) d[i] = normal();
            s = d.norm();
        } while (s < 1e-12);
        return (1.0 / s) * d;
    }
};

inline double sq(double x) { return x * x; }

} // namespace satchain
