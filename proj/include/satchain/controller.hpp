#pragma once

#include <algorithm>
#include <vector>

#include "chain_params.hpp"
#include "satfn.hpp"
#include "util.hpp"

namespace satchain {

// Backstepping chain for the n-integrator:
//   omega_1 = |x_1|^{b0} sgn(x_1),    v_i = -l_i |omega_i|^{q_i} sgn(omega_i),
//   omega_{i+1} = |x_{i+1}|^{b_i} sgn - |v_i|^{b_i} sgn(v_i).
//
// The code never forms |v_i|^{b_i} from v_i: since q_i b_i = r_i,
//   omega_{i+1} = |x_{i+1}|^{b_i} sgn(x_{i+1}) + l_i^{b_i} |omega_i|^{r_i} sgn(omega_i),
// which keeps one rounding per level and makes |omega_1|^{r_1} collapse to
// x_1 exactly (b0 r_1 = 1 for every n).
//
// ChainEval also carries the partial-derivative table
//   P[i][j] = d omega_i / d x_j  (1 <= j <= i <= n),
// built by the chain rule P[i][j] = c_{i-1} P[i-1][j] with
// c_i = l_i^{b_i} r_i |omega_i|^{r_i - 1}. The one singular product,
// c_1 * (d omega_1/d x_1) at x_1 = 0, is replaced by its exact value
// P[2][1] = l_1^{b_1}.
struct ChainEval {
    int n = 0;
    Vec omega;                                   // omega[i-1] = omega_i
    Vec v;                                       // v[i-1] = v_i, i = 1..n-1
    std::array<std::array<double, kMaxN + 1>, kMaxN + 1> P{}; // 1-based
    std::array<double, kMaxN> c{};               // c[i] = chain factor, i = 1..n-1

    // v_{i-1} with the convention v_0 = 0
    double v_prev(int i) const { return i <= 1 ? 0.0 : v[i - 2]; }
};

struct HomogeneousController {
    ChainParams cp;
    std::vector<double> l;       // gains l[1..n]; l[0] unused
    std::vector<double> lpow;    // lpow[i] = l_i^{b_i}, i = 1..n-1

    HomogeneousController() = default;
    HomogeneousController(ChainParams params, std::vector<double> gains)
        : cp(std::move(params)), l(std::move(gains)) {
        if (static_cast<int>(l.size()) != cp.n + 1)
            throw std::invalid_argument("HomogeneousController: need gains l[1..n]");
        for (int i = 1; i <= cp.n; ++i)
            if (!(l[static_cast<size_t>(i)] > 0))
                throw std::invalid_argument("HomogeneousController: gains must be > 0");
        lpow.assign(static_cast<size_t>(cp.n), 0.0);
        for (int i = 1; i <= cp.n - 1; ++i)
            lpow[static_cast<size_t>(i)] =
                std::pow(l[static_cast<size_t>(i)], cp.betad[static_cast<size_t>(i)]);
    }

    int n() const { return cp.n; }

    // Chain restricted to the first `upto` coordinates (levels 1..upto). The
    // exponent tables stay those of the full n-chain, which is what the
    // induction over partial states needs.
    ChainEval eval_prefix(const Vec& x, int upto) const {
        const int N = upto;
        if (N < 1 || N > cp.n) throw std::invalid_argument("eval_prefix: level out of range");
        ChainEval e;
        e.n = N;
        e.omega = Vec(N);
        e.v = Vec(N);

        e.omega[0] = signed_power(x[0], cp.betad[0]);
        for (int i = 2; i <= N; ++i) {
            double own = signed_power(x[i - 1], cp.betad[static_cast<size_t>(i - 1)]);
            double carry = lpow[static_cast<size_t>(i - 1)] *
                           signed_power(e.omega[i - 2], cp.rd[static_cast<size_t>(i - 1)]);
            e.omega[i - 1] = own + carry;
        }
        for (int i = 1; i <= std::min(N, cp.n - 1); ++i)
            e.v[i - 1] = -l[static_cast<size_t>(i)] *
                         signed_power(e.omega[i - 1], cp.qd[static_cast<size_t>(i)]);

        for (int i = 2; i <= N; ++i) {
            double b = cp.betad[static_cast<size_t>(i - 1)];
            e.P[static_cast<size_t>(i)][static_cast<size_t>(i)] =
                b * std::pow(std::abs(x[i - 1]), b - 1.0);
        }
        for (int i = 1; i <= N - 1; ++i) {
            double r = cp.rd[static_cast<size_t>(i)];
            e.c[static_cast<size_t>(i)] =
                lpow[static_cast<size_t>(i)] * r * std::pow(std::abs(e.omega[i - 1]), r - 1.0);
        }
        if (N >= 2) e.P[2][1] = lpow[1];
        for (int i = 3; i <= N; ++i)
            for (int j = 1; j <= i - 1; ++j)
                e.P[static_cast<size_t>(i)][static_cast<size_t>(j)] =
                    e.c[static_cast<size_t>(i - 1)] * e.P[static_cast<size_t>(i - 1)][static_cast<size_t>(j)];
        return e;
    }

    ChainEval eval(const Vec& x) const { return eval_prefix(x, cp.n); }

    double omega_n(const Vec& x) const { return eval(x).omega[cp.n - 1]; }

    // terminal feedback u = -l_n sgn(omega_n); set-valued on the surface
    Interval sign_control(const Vec& x) const {
        double w = omega_n(x);
        double ln = l[static_cast<size_t>(cp.n)];
        auto s = sign_set(w);
        return {-ln * s.hi, -ln * s.lo};
    }
};

} // namespace satchain
