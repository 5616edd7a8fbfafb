#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

#include <satchain/certificate.hpp>
#include <satchain/linear_core.hpp>
#include <satchain/lyapunov.hpp>
#include <satchain/sim.hpp>

// Replays a recorded trajectory through the dissipation inequalities the
// certificate claims, sample by sample. The channel disturbance is recovered
// from the logged saturation argument (d = sat_in minus the nominal command),
// the left side is the analytic derivative of the level function along the
// recorded field, and slack = RHS - LHS. A negative minimum beyond tolerance
// falsifies the certificate on that run.
//
// Sample admission:
//   - x(t) = 0 carries no information (the inequalities hold along non
//     trivial arcs): counted in excluded_trivial.
//   - sign-loop samples inside the smoothing layer ran a regularized
//     selector rather than the set-valued sign; the sign-specific form
//     (der1) skips them and reports the count. The forms whose two sides
//     share the u term exactly (der0, der-mis) keep them: u cancels in the
//     slack, so the regularization does not enter.
//   - samples outside the inequality's region (wrong V_0 side, or carrying
//     a mismatched component the form does not model) are counted in
//     domain_violations and never fold into the minimum silently.

namespace satchain {

struct SlackReport {
    std::string name;
    std::string system;        // which loop produced the samples
    long samples = 0;          // samples offered
    long used = 0;             // samples entering the minimum
    long excluded_trivial = 0;
    long excluded_sliding = 0;
    long domain_violations = 0;
    double min_slack = std::numeric_limits<double>::infinity();
    double t_worst = 0;
    double tol = 1e-6;
    bool pass = false;
};

namespace detail {

enum class IneqForm { der0, der1, ineq1, ineq2, partial1, der_mis };

inline IneqForm parse_form(const std::string& name) {
    if (name == "der0") return IneqForm::der0;
    if (name == "der1") return IneqForm::der1;
    if (name == "ineq1") return IneqForm::ineq1;
    if (name == "ineq2") return IneqForm::ineq2;
    if (name == "partial1") return IneqForm::partial1;
    if (name == "der-mis") return IneqForm::der_mis;
    throw std::invalid_argument("certify_inequality: unknown inequality '" + name + "'");
}

inline double sgn(double z) { return z > 0 ? 1.0 : (z < 0 ? -1.0 : 0.0); }

inline void finish(SlackReport& rep, double tol) {
    rep.tol = tol;
    rep.pass = rep.used > 0 && rep.min_slack >= -tol;
}

} // namespace detail

inline SlackReport certify_inequality(const std::string& name, const Certificate& cert,
                                      const Trajectory& tr, double tol = 1e-6) {
    using detail::IneqForm;
    if (name == "der2")
        throw std::invalid_argument(
            "certify_inequality: der2 is evaluated on a linear-core trace, not a closed-loop "
            "trajectory");
    const IneqForm form = detail::parse_form(name);

    const bool sign_sys = tr.system == SystemKind::sign_loop;
    if (form == IneqForm::der1 && !sign_sys)
        throw std::invalid_argument("certify_inequality: der1 describes the sign loop");
    if ((form == IneqForm::ineq1 || form == IneqForm::ineq2 || form == IneqForm::partial1) &&
        sign_sys)
        throw std::invalid_argument("certify_inequality: " + name +
                                    " describes the saturated loops");

    const HomogeneousController ctl = controller_of(cert);
    const int n = cert.n;
    if (tr.n != n)
        throw std::invalid_argument(
            "certify_inequality: trajectory dimension does not match the certificate");

    const double ln = cert.l[static_cast<size_t>(n)];
    const double k = cert.k_outer;
    const double A = cert.core.A;
    const double alpha = ctl.cp.alphad;
    const double cs = cert.sat.C_sigma_norm();
    // disturbance gain of the V_0 inequality: the channel difference obeys
    // |u(a+d) - u(a)| <= channel_gain * min(1,|d|), and the floor of 4 keeps
    // the weaker classical constant when the channel is gentler than that.
    const double dist_gain = cert.core.l0 * std::max(4.0, cert.channel_gain);

    SlackReport rep;
    rep.name = name;
    rep.system = system_name(tr.system);
    rep.samples = static_cast<long>(tr.samples.size());

    for (size_t i = 0; i < tr.samples.size(); ++i) {
        const Sample& s = tr.samples[i];
        Vec xs(n);
        for (int j = 0; j < n; ++j) xs[j] = s.x[j];
        if (tr.has_y) xs[n - 1] -= s.y;
        if (xs.norm() == 0.0) {
            ++rep.excluded_trivial;
            continue;
        }
        if (s.sliding && form == IneqForm::der1) {
            ++rep.excluded_sliding;
            continue;
        }
        if (!std::isfinite(s.u) || !std::isfinite(s.sat_in))
            throw std::invalid_argument(
                "certify_inequality: sample without channel data (reparameterized trace?)");

        const Vec* Fr = (tr.has_y && i < tr.F.size()) ? &tr.F[i] : nullptr;
        if (form != IneqForm::der_mis && Fr != nullptr) {
            double fmax = 0;
            for (int j = 0; j < Fr->n; ++j) fmax = std::max(fmax, std::abs((*Fr)[j]));
            if (fmax > 1e-12) {
                ++rep.domain_violations;
                continue;
            }
        }

        double slack = 0;
        if (form == IneqForm::ineq2) {
            const double v0 = V0_eval(cert.core.P, xs);
            if (!(v0 <= A)) {
                ++rep.domain_violations;
                continue;
            }
            Vec f(n);
            for (int j = 0; j + 1 < n; ++j)
                f[j] = xs[j + 1] + (Fr != nullptr ? (*Fr)[j] : 0.0);
            f[n - 1] = s.u;
            double xpf = 0;
            for (int a = 0; a < n; ++a) {
                double row = 0;
                for (int b = 0; b < n; ++b) row += cert.core.P(a, b) * f[b];
                xpf += xs[a] * row;
            }
            const double lhs = xpf / v0;
            double kx = 0;
            for (int j = 0; j < n; ++j) kx += cert.core.K[j] * xs[j];
            const double d = s.sat_in - kx;
            const double rhs = -0.5 * cert.core.c0 * v0 + dist_gain * std::min(1.0, std::abs(d));
            slack = rhs - lhs;
        } else {
            if (form == IneqForm::ineq1) {
                const double v0 = V0_eval(cert.core.P, xs);
                if (!(v0 > A)) {
                    ++rep.domain_violations;
                    continue;
                }
            }
            const LyapEval le = lyap_eval(ctl, xs);
            const double wn = le.grad[n - 1];
            double lhs = wn * s.u;
            for (int j = 0; j + 1 < n; ++j)
                lhs += le.grad[j] * (xs[j + 1] + (Fr != nullptr ? (*Fr)[j] : 0.0));
            const double va = std::pow(le.V, alpha);

            double rhs = 0;
            switch (form) {
                case IneqForm::der0:
                    rhs = -cert.c_n * va + wn * (s.u + ln * detail::sgn(wn));
                    break;
                case IneqForm::der1: {
                    const double d = s.sat_in - wn;
                    rhs = -cert.c_n * va + 2.0 * ln * std::abs(d);
                    break;
                }
                case IneqForm::ineq1: {
                    const double d = s.sat_in - k * wn;
                    rhs = -0.5 * cert.c_n * va + 4.0 * ln * std::abs(d);
                    break;
                }
                case IneqForm::partial1: {
                    const double d = s.sat_in - k * wn;
                    rhs = -cert.c_n * va + (2.0 + cs) * ln / k +
                          2.0 * (1.0 + 2.0 / k) * ln * std::abs(d);
                    break;
                }
                case IneqForm::der_mis: {
                    double mis = 0;
                    if (Fr != nullptr)
                        for (int j = 1; j <= n - 1; ++j)
                            mis += std::pow(std::abs((*Fr)[j - 1]),
                                            ctl.cp.etad_i[static_cast<size_t>(j)]);
                    rhs = -cert.dm_C1 * va + wn * (s.u + ln * detail::sgn(wn)) +
                          cert.dm_C2 * mis;
                    break;
                }
                case IneqForm::ineq2:
                    break; // handled above
            }
            slack = rhs - lhs;
        }

        ++rep.used;
        if (slack < rep.min_slack) {
            rep.min_slack = slack;
            rep.t_worst = s.t;
        }
    }
    detail::finish(rep, tol);
    return rep;
}

// V_0 decay along the frozen linear core: rho is recorded by the trace, d is
// the matched input, both enter the analytic derivative directly.
inline SlackReport certify_der2(const LinearCore& core, const LinearTrace& trace,
                                double tol = 1e-6) {
    SlackReport rep;
    rep.name = "der2";
    rep.system = "linear-core";
    rep.samples = static_cast<long>(trace.t.size());
    for (size_t i = 0; i < trace.t.size(); ++i) {
        const Vec& x = trace.x[i];
        if (x.norm() == 0.0) {
            ++rep.excluded_trivial;
            continue;
        }
        const double rho = trace.rho[i];
        if (rho < core.rho_lo - 1e-12 || rho > core.rho_hi + 1e-12) {
            ++rep.domain_violations;
            continue;
        }
        const double d = trace.d[i];
        const double v0 = std::sqrt(quad_form(core.P, x));
        const double lhs = v0_dot(core, rho, x, d);
        const double rhs = -core.c0 * v0 + core.l0 * std::abs(d);
        const double slack = rhs - lhs;
        ++rep.used;
        if (slack < rep.min_slack) {
            rep.min_slack = slack;
            rep.t_worst = trace.t[i];
        }
    }
    detail::finish(rep, tol);
    return rep;
}

inline SlackReport certify_inequality(const std::string& name, const Certificate& cert,
                                      const LinearTrace& trace, double tol = 1e-6) {
    if (name != "der2")
        throw std::invalid_argument("certify_inequality: only der2 runs on linear-core traces");
    return certify_der2(cert.core, trace, tol);
}

// Z_mu = V_n^mu obeys dZ_mu/dt <= -c_mu Z_mu^{alpha_mu} + l_mu |d| on
// {V_0 > A}; the constants come from mu_family and inherit the certificate's
// v_A. Same recovery and admission rules as ineq1.
inline SlackReport certify_mu(const Certificate& cert, double mu, const Trajectory& tr,
                              double tol = 1e-6) {
    if (tr.system == SystemKind::sign_loop)
        throw std::invalid_argument("certify_mu: the Z_mu family describes the saturated loops");
    const HomogeneousController ctl = controller_of(cert);
    const int n = cert.n;
    if (tr.n != n)
        throw std::invalid_argument("certify_mu: trajectory dimension does not match the certificate");
    const double ln = cert.l[static_cast<size_t>(n)];
    const MuFamily mf = mu_family(ctl.cp, cert.c_n, ln, cert.v_A, mu);
    const double A = cert.core.A;

    SlackReport rep;
    char label[48];
    std::snprintf(label, sizeof label, "z-mu[mu=%.6g]", mu);
    rep.name = label;
    rep.system = system_name(tr.system);
    rep.samples = static_cast<long>(tr.samples.size());

    for (size_t i = 0; i < tr.samples.size(); ++i) {
        const Sample& s = tr.samples[i];
        Vec xs(n);
        for (int j = 0; j < n; ++j) xs[j] = s.x[j];
        if (tr.has_y) xs[n - 1] -= s.y;
        if (xs.norm() == 0.0) {
            ++rep.excluded_trivial;
            continue;
        }
        if (!std::isfinite(s.u) || !std::isfinite(s.sat_in))
            throw std::invalid_argument(
                "certify_mu: sample without channel data (reparameterized trace?)");
        const Vec* Fr = (tr.has_y && i < tr.F.size()) ? &tr.F[i] : nullptr;
        if (Fr != nullptr) {
            double fmax = 0;
            for (int j = 0; j < Fr->n; ++j) fmax = std::max(fmax, std::abs((*Fr)[j]));
            if (fmax > 1e-12) {
                ++rep.domain_violations;
                continue;
            }
        }
        const double v0 = V0_eval(cert.core.P, xs);
        if (!(v0 > A)) {
            ++rep.domain_violations;
            continue;
        }
        const LyapEval le = lyap_eval(ctl, xs);
        const double wn = le.grad[n - 1];
        double vdot = wn * s.u;
        for (int j = 0; j + 1 < n; ++j)
            vdot += le.grad[j] * (xs[j + 1] + (Fr != nullptr ? (*Fr)[j] : 0.0));
        const double d = s.sat_in - cert.k_outer * wn;
        const double lhs = mu * std::pow(le.V, mu - 1.0) * vdot;
        const double rhs = -mf.c_mu * std::pow(le.V, mu - 1.0 + ctl.cp.alphad) +
                           mf.l_mu * std::abs(d);
        const double slack = rhs - lhs;
        ++rep.used;
        if (slack < rep.min_slack) {
            rep.min_slack = slack;
            rep.t_worst = s.t;
        }
    }
    detail::finish(rep, tol);
    return rep;
}

} // namespace satchain
