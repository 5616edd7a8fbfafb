#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mat.hpp"
#include "satfn.hpp"
#include "util.hpp"

// Linear core used inside the switching ball: u = K'x places the companion
// poles at -1, and a common quadratic form P certifies every closed loop
//   M_rho = J_n - rho l_n e_n K',   rho in [rho_lo, rho_hi],
// the interval being the hull of the saturation's raw sector slopes and the
// same slopes divided by sigma_inf (the channel applies sigma / sigma_inf).
// P is rescaled so the sampled grid satisfies
//   lambda_max(M'P + PM) <= -1 + 1e-9,
// after which V_0 = sqrt(x'Px) obeys V_0' <= -c_0 V_0 + l_0 |d| with
//   c_0 = (1-margin) / (2 lambda_max(P)),
//   l_0 = (1+margin) |P e_n| / sqrt(lambda_min(P)).

namespace satchain {

struct LinearCore {
    int n = 0;
    Vec K;          // feedback row, u = -K'x convention carried by the loops
    Mat P;
    double l_n = 1; // channel gain the core was certified against
    double rho_lo = 1;
    double rho_hi = 1;
    double c0 = 0;
    double l0 = 0;
    double A = 0;             // switching radius in V_0 units
    double lambda_min_P = 0;
    double lambda_max_P = 0;
    double grid_max = 0;      // max over grid of lambda_max(M'P + PM), after scaling
    double grid_lipschitz = 0;// max |d lambda / d rho| surrogate across grid cells
    std::string base_point;   // which rho produced the Lyapunov solve
};

namespace detail {

inline Eigen::MatrixXd closed_loop(int n, const Eigen::VectorXd& k, double gain) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) m(i, i + 1) = 1.0;
    for (int j = 0; j < n; ++j) m(n - 1, j) -= gain * k(j);
    return m;
}

// Solves M'P + PM = -I by the Kronecker identity (I ox M' + M' ox I) vec(P) = vec(-I).
inline Eigen::MatrixXd lyap_solve(const Eigen::MatrixXd& m) {
    const int n = static_cast<int>(m.rows());
    Eigen::MatrixXd mt = m.transpose();
    Eigen::MatrixXd big = Eigen::MatrixXd::Zero(n * n, n * n);
    // vec is column-stacked: vec(M'P) = (I ox M') vec(P), vec(PM) = (M' ox I) vec(P)
    for (int c = 0; c < n; ++c)
        big.block(c * n, c * n, n, n) += mt;
    for (int c = 0; c < n; ++c)
        for (int r = 0; r < n; ++r)
            big.block(r * n, c * n, n, n).diagonal().array() += mt(r, c);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n * n);
    for (int i = 0; i < n; ++i) rhs(i * n + i) = -1.0;
    Eigen::VectorXd v = big.fullPivLu().solve(rhs);
    Eigen::MatrixXd p(n, n);
    for (int c = 0; c < n; ++c)
        for (int r = 0; r < n; ++r) p(r, c) = v(c * n + r);
    // symmetrize away solver roundoff
    return 0.5 * (p + p.transpose());
}

inline double grid_max_lambda(const Eigen::MatrixXd& p, const Eigen::VectorXd& k, double l_n,
                              double rho_lo, double rho_hi, int points, double* lipschitz) {
    const int n = static_cast<int>(p.rows());
    double worst = -std::numeric_limits<double>::infinity();
    double prev = 0;
    double lip = 0;
    const double step = points > 1 ? (rho_hi - rho_lo) / (points - 1) : 0.0;
    for (int g = 0; g < points; ++g) {
        const double rho = rho_lo + step * g;
        Eigen::MatrixXd m = closed_loop(n, k, rho * l_n);
        Eigen::MatrixXd s = m.transpose() * p + p * m;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
        const double lam = es.eigenvalues().maxCoeff();
        if (g > 0 && step > 0) lip = std::max(lip, std::abs(lam - prev) / step);
        prev = lam;
        worst = std::max(worst, lam);
    }
    if (lipschitz) *lipschitz = lip;
    return worst;
}

} // namespace detail

// Largest A with |K'x| <= cap on the ellipsoid {x'Px <= A^2}: cap / sqrt(K'P^{-1}K).
inline double switching_radius(const Mat& p, const Vec& k, double cap) {
    Mat chol_l;
    if (!cholesky(p, chol_l))
        throw std::invalid_argument("switching_radius: form is not positive definite");
    const Vec pinvk = chol_solve(chol_l, k);
    double kpk = 0;
    for (int i = 0; i < p.n; ++i) kpk += k[i] * pinvk[i];
    return cap / std::sqrt(kpk);
}

// Binomial row: J_n - e_n K' has characteristic polynomial (s+1)^n.
inline Vec companion_gain(int n) {
    if (n < 1 || n > kMaxN) throw std::invalid_argument("companion_gain: n out of range");
    Vec k(n);
    double c = 1;
    for (int j = 0; j < n; ++j) {
        k[j] = c; // C(n, j)
        c = c * (n - j) / (j + 1);
    }
    return k;
}

inline LinearCore synthesize_linear_core(int n, double l_n, const SaturationSpec& sat,
                                         double margin = 1e-2, int grid_points = 101) {
    if (n < 1 || n > kMaxN) throw std::invalid_argument("synthesize_linear_core: n out of range");
    if (!(l_n > 0)) throw std::invalid_argument("synthesize_linear_core: l_n must be positive");

    const double raw_lo = sat.rho_lo();
    const double raw_hi = sat.rho_hi();
    const double rho_lo = std::min(raw_lo, raw_lo / sat.sigma_inf);
    const double rho_hi = std::max(raw_hi, raw_hi / sat.sigma_inf);

    const Vec kvec = companion_gain(n);
    Eigen::VectorXd k(n);
    for (int i = 0; i < n; ++i) k(i) = kvec[i];

    // Lyapunov solve at a base point; fall back to the interval ends if the
    // midpoint form does not certify the whole interval.
    struct Attempt {
        double rho;
        const char* name;
    };
    const Attempt attempts[] = {{0.5 * (rho_lo + rho_hi), "mid"}, {rho_lo, "lo"}, {rho_hi, "hi"}};
    Eigen::MatrixXd p;
    std::string base;
    double worst = 0;
    bool ok = false;
    for (const auto& att : attempts) {
        Eigen::MatrixXd m = detail::closed_loop(n, k, att.rho * l_n);
        Eigen::MatrixXd cand = detail::lyap_solve(m);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cand);
        if (es.eigenvalues().minCoeff() <= 0) continue;
        const double w = detail::grid_max_lambda(cand, k, l_n, rho_lo, rho_hi, grid_points, nullptr);
        if (w < 0) {
            p = cand;
            base = att.name;
            worst = w;
            ok = true;
            break;
        }
    }
    if (!ok)
        throw std::runtime_error(
            "synthesize_linear_core: no common quadratic certificate over rho in [" +
            std::to_string(rho_lo) + ", " + std::to_string(rho_hi) + "] at l_n = " +
            std::to_string(l_n));

    // scale so the sampled grid maximum sits at -1
    p *= 1.0 / (-worst);

    LinearCore core;
    core.n = n;
    core.K = kvec;
    core.P = Mat(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) core.P(i, j) = p(i, j);
    core.l_n = l_n;
    core.rho_lo = rho_lo;
    core.rho_hi = rho_hi;
    core.base_point = base;

    core.grid_max = detail::grid_max_lambda(p, k, l_n, rho_lo, rho_hi, grid_points, &core.grid_lipschitz);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p);
    core.lambda_min_P = es.eigenvalues().minCoeff();
    core.lambda_max_P = es.eigenvalues().maxCoeff();
    core.c0 = (1.0 - margin) / (2.0 * core.lambda_max_P);
    Eigen::VectorXd pe = p.col(n - 1);
    core.l0 = (1.0 + margin) * pe.norm() / std::sqrt(core.lambda_min_P);

    // switching radius: |K'x| <= min(1, b1, b2) on {V_0 <= A}
    core.A = switching_radius(core.P, core.K, std::min({1.0, sat.b1, sat.b2}));
    return core;
}

// --- trajectories of the rho-varying loop -------------------------------------
//
// x' = (J_n - rho(t) l_n e_n K') x + e_n d(t), integrated with fixed-step RK4.
// Accuracy only moves the sample points; the decay certificate evaluates the
// analytic derivative of V_0 at each sample.

struct LinearTrace {
    std::vector<double> t;
    std::vector<Vec> x;
    std::vector<double> rho;
    std::vector<double> d;
};

inline double v0_dot(const LinearCore& core, double rho, const Vec& x, double d) {
    const int n = core.n;
    Vec mx(n);
    for (int i = 0; i < n - 1; ++i) mx[i] = x[i + 1];
    double kx = 0;
    for (int j = 0; j < n; ++j) kx += core.K[j] * x[j];
    mx[n - 1] = -rho * core.l_n * kx;
    // V_0' = (x'P x' + x' P x)/(2 V_0) + (e_n'P x) d / V_0 with x' = Mx
    const double v0 = std::sqrt(quad_form(core.P, x));
    if (v0 == 0) return 0;
    double xpmx = 0;
    for (int i = 0; i < n; ++i) {
        double row = 0;
        for (int j = 0; j < n; ++j) row += core.P(i, j) * mx[j];
        xpmx += x[i] * row;
    }
    double pex = 0;
    for (int j = 0; j < n; ++j) pex += core.P(n - 1, j) * x[j];
    return xpmx / v0 + pex * d / v0;
}

template <class RhoFn, class DFn>
LinearTrace simulate_linear_rho(const LinearCore& core, RhoFn&& rho_of_t, DFn&& d_of_t, Vec x0,
                                double t_end, double dt = 1e-3) {
    if (!(dt > 0) || !(t_end > 0)) throw std::invalid_argument("simulate_linear_rho: bad time grid");
    const int n = core.n;
    auto deriv = [&](double t, const Vec& x) {
        Vec f(n);
        for (int i = 0; i < n - 1; ++i) f[i] = x[i + 1];
        double kx = 0;
        for (int j = 0; j < n; ++j) kx += core.K[j] * x[j];
        f[n - 1] = -rho_of_t(t) * core.l_n * kx + d_of_t(t);
        return f;
    };
    LinearTrace tr;
    Vec x = x0;
    double t = 0;
    const auto push = [&](double tt, const Vec& xx) {
        tr.t.push_back(tt);
        tr.x.push_back(xx);
        tr.rho.push_back(rho_of_t(tt));
        tr.d.push_back(d_of_t(tt));
    };
    push(0.0, x);
    while (t < t_end - 1e-15) {
        const double h = std::min(dt, t_end - t);
        const Vec k1 = deriv(t, x);
        const Vec k2 = deriv(t + 0.5 * h, x + (0.5 * h) * k1);
        const Vec k3 = deriv(t + 0.5 * h, x + (0.5 * h) * k2);
        const Vec k4 = deriv(t + h, x + h * k3);
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
        push(t, x);
    }
    return tr;
}

} // namespace satchain
