#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "certificate.hpp"
#include "disturbance.hpp"
#include "hybrid.hpp"
#include "lyapunov.hpp"
#include "satfn.hpp"

// Closed-loop scenarios and their integrator.
//
// Four loops share one chain x_i' = x_{i+1} and differ in the last row:
//   sign-loop       x_n' = -l_n sgn_eps(omega_n + d)
//   sat-omega-loop  x_n' = -(l_n/sigma_inf) sigma(k omega_n + d)
//   hybrid-loop     x_n' = -(l_n/sigma_inf) sigma(k omega(x) + d)
//   external-loop   x_n' = -(l_n/sigma_inf) sigma(k omega(x - y e_n) + d) + d_n,
//                   x_j' += E_j,  y' = d_n
//
// The integrator is Dormand-Prince 4(5) with FSAL. The hybrid branch is a
// state machine: the right-hand side is frozen to the current branch during a
// step, and branch changes happen only at surface landings |V_0 - A| <= tol
// found by partial re-steps (regula falsi in the step fraction). The sign
// loop's discontinuity is regularized to a boundary layer of width eps_sm;
// samples inside the layer are flagged so certification can exclude them.

namespace satchain {

enum class SystemKind { sign_loop, sat_omega_loop, hybrid_loop, external_loop };

inline const char* system_name(SystemKind k) {
    switch (k) {
        case SystemKind::sign_loop: return "sign-loop";
        case SystemKind::sat_omega_loop: return "sat-omega-loop";
        case SystemKind::hybrid_loop: return "hybrid-loop";
        case SystemKind::external_loop: return "external-loop";
    }
    return "?";
}

struct SolverSettings {
    double atol = 1e-10;
    double rtol = 1e-8;
    double h_init = 1e-4;
    double h_min = 1e-14;
    double h_max = 0.1;
    double eps_sm = 1e-6;     // sign-loop boundary-layer width
    double event_tol = 1e-10; // |V_0 - A| at branch landings
    double log_dt = 0;        // 0 logs every accepted step
    double stop_norm = -1;    // stop once |x| <= this (disabled when < 0)
    long max_steps = 200000000;
    int max_events = 100000;
    double y_bound = 1e6;     // |y| beyond this flags the unbounded-shift warning
    std::size_t max_samples = 5000000;
};

struct Scenario {
    SystemKind system = SystemKind::hybrid_loop;
    Certificate cert;
    Vec x0;
    double T = 10;
    DisturbanceSignal d;              // enters the saturation argument
    std::vector<DisturbanceSignal> E; // mismatched components, size n-1
    DisturbanceSignal d_n;            // shift source of the external loop
    SolverSettings solver;
};

struct Sample {
    double t = 0;
    Vec x;
    double u = 0;      // applied channel value (the x_n' contribution)
    double sat_in = 0; // argument of the sign / saturation
    double V0 = 0;
    double Vn = 0;
    double W = 0;
    double y = 0;      // external loop shift state
    Branch branch = Branch::homogeneous;
    bool sliding = false;
};

struct Trajectory {
    int n = 0;
    SystemKind system = SystemKind::hybrid_loop;
    bool has_y = false;
    std::vector<Sample> samples;
    std::vector<Vec> F; // external loop: (d_1, ..., d_{n-2}, y + d_{n-1}) per sample
    int events = 0;
    long steps = 0;
    long rejected = 0;
    bool stopped_by_norm = false;
    bool y_bound_warning = false;
};

struct IntegrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

struct LoopContext {
    const Scenario* sc = nullptr;
    HomogeneousController ctl;
    int n = 0;
    int dim = 0; // n, or n+1 for the external loop
    Branch branch = Branch::homogeneous;

    double ln() const { return sc->cert.l[static_cast<size_t>(n)]; }

    struct Channel {
        double u;
        double sat_in;
    };

    Channel channel(double t, const Vec& s) const {
        const Certificate& c = sc->cert;
        Channel out{0, 0};
        switch (sc->system) {
            case SystemKind::sign_loop: {
                const double w = ctl.omega_n(s);
                out.sat_in = w + sc->d.eval(t, w);
                out.u = -ln() * sgn_eps(out.sat_in, sc->solver.eps_sm);
                break;
            }
            case SystemKind::sat_omega_loop: {
                const double w = ctl.omega_n(s);
                out.sat_in = c.k_outer * w + sc->d.eval(t, w);
                out.u = channel_output(c, out.sat_in);
                break;
            }
            case SystemKind::hybrid_loop: {
                const double w = command_bracket(c, ctl, branch, s);
                out.sat_in = c.k_outer * w + sc->d.eval(t, w);
                out.u = channel_output(c, out.sat_in);
                break;
            }
            case SystemKind::external_loop: {
                const double w = shifted_bracket(c, ctl, branch, s, s[dim - 1]);
                out.sat_in = c.k_outer * w + sc->d.eval(t, w);
                out.u = channel_output(c, out.sat_in);
                break;
            }
        }
        return out;
    }

    Vec rhs(double t, const Vec& s) const {
        Vec f(dim);
        for (int i = 0; i + 1 < n; ++i) f[i] = s[i + 1];
        const Channel ch = channel(t, s);
        f[n - 1] = ch.u;
        if (sc->system == SystemKind::external_loop) {
            const double dn = sc->d_n.eval(t);
            f[n - 1] += dn;
            for (int j = 0; j + 1 < n; ++j)
                if (j < static_cast<int>(sc->E.size())) f[j] += sc->E[static_cast<size_t>(j)].eval(t);
            f[dim - 1] = dn;
        }
        return f;
    }

    // branch surface value; negative inside the switching ball
    double surface(const Vec& s, double radius) const {
        Vec x(n);
        for (int i = 0; i < n; ++i) x[i] = s[i];
        if (sc->system == SystemKind::external_loop) x[n - 1] -= s[dim - 1];
        return V0_eval(sc->cert.core.P, x) - radius;
    }

    bool switching() const {
        return sc->system == SystemKind::hybrid_loop || sc->system == SystemKind::external_loop;
    }
};

// Dormand-Prince coefficients.
struct Dopri5 {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                            e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                            e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;
};

// One 5th-order solution of step h from (t, y) with stage 1 supplied.
// Returns y5 and fills k7 (= f(t+h, y5), the FSAL stage) and the error vector.
inline Vec dopri5_step(const LoopContext& ctx, double t, const Vec& y, const Vec& k1, double h,
                       Vec* k7, Vec* err) {
    using D = Dopri5;
    const Vec k2 = ctx.rhs(t + D::c2 * h, y + (h * D::a21) * k1);
    const Vec k3 = ctx.rhs(t + D::c3 * h, y + h * (D::a31 * k1 + D::a32 * k2));
    const Vec k4 = ctx.rhs(t + D::c4 * h, y + h * (D::a41 * k1 + D::a42 * k2 + D::a43 * k3));
    const Vec k5 = ctx.rhs(t + D::c5 * h, y + h * (D::a51 * k1 + D::a52 * k2 + D::a53 * k3 + D::a54 * k4));
    const Vec k6 =
        ctx.rhs(t + h, y + h * (D::a61 * k1 + D::a62 * k2 + D::a63 * k3 + D::a64 * k4 + D::a65 * k5));
    const Vec y5 = y + h * (D::b1 * k1 + D::b3 * k3 + D::b4 * k4 + D::b5 * k5 + D::b6 * k6);
    const Vec kend = ctx.rhs(t + h, y5);
    if (k7) *k7 = kend;
    if (err)
        *err = h * (D::e1 * k1 + D::e3 * k3 + D::e4 * k4 + D::e5 * k5 + D::e6 * k6 + D::e7 * kend);
    return y5;
}

} // namespace detail

inline Trajectory integrate(const Scenario& sc) {
    const Certificate& cert = sc.cert;
    const int n = cert.n;
    if (sc.x0.n != n) throw std::invalid_argument("integrate: x0 has wrong dimension");
    if (!(sc.T > 0)) throw std::invalid_argument("integrate: horizon must be positive");
    const SolverSettings& sv = sc.solver;

    detail::LoopContext ctx;
    ctx.sc = &sc;
    ctx.ctl = controller_of(cert);
    ctx.n = n;
    ctx.dim = sc.system == SystemKind::external_loop ? n + 1 : n;

    Vec s(ctx.dim);
    for (int i = 0; i < n; ++i) s[i] = sc.x0[i];
    if (sc.system == SystemKind::external_loop)
        s[ctx.dim - 1] = 0.0; // shift state starts at zero

    ctx.branch = ctx.switching() ? pointwise_branch(cert, sc.x0) : Branch::homogeneous;

    Trajectory tr;
    tr.n = n;
    tr.system = sc.system;
    tr.has_y = sc.system == SystemKind::external_loop;

    const auto record = [&](double t, const Vec& state) {
        if (tr.samples.size() >= sv.max_samples)
            throw IntegrationError("integrate: sample budget exhausted; increase log_dt");
        Sample smp;
        smp.t = t;
        smp.x = Vec(n);
        for (int i = 0; i < n; ++i) smp.x[i] = state[i];
        if (tr.has_y) smp.y = state[ctx.dim - 1];
        const auto ch = ctx.channel(t, state);
        smp.u = ch.u;
        smp.sat_in = ch.sat_in;
        // level columns are the switching observables: for the external loop they
        // are evaluated on the shifted state x - y e_n, the x columns stay raw
        Vec xs = smp.x;
        if (tr.has_y) xs[n - 1] -= smp.y;
        smp.V0 = V0_eval(cert.core.P, xs);
        smp.Vn = V_level(ctx.ctl, xs, n);
        smp.W = W_eval(cert.core.P, ctx.ctl, xs);
        smp.branch = ctx.branch;
        smp.sliding = sc.system == SystemKind::sign_loop && std::abs(ch.sat_in) <= sv.eps_sm;
        if (tr.has_y && n >= 2) {
            Vec f(n - 1);
            for (int j = 0; j + 1 < n; ++j)
                f[j] = j < static_cast<int>(sc.E.size()) ? sc.E[static_cast<size_t>(j)].eval(t) : 0.0;
            f[n - 2] += smp.y;
            tr.F.push_back(f);
        }
        tr.samples.push_back(smp);
    };

    double t = 0;
    double h = std::min(sv.h_init, sv.h_max);
    Vec k1 = ctx.rhs(t, s);
    record(t, s);
    // samples sit on the absolute grid k * log_dt (plus landings and the end)
    const auto grid_next = [&](double now) {
        return sv.log_dt > 0 ? sv.log_dt * (std::floor(now / sv.log_dt + 1e-9) + 1.0)
                             : std::numeric_limits<double>::infinity();
    };
    double next_log = grid_next(0.0);

    while (t < sc.T - 1e-15) {
        if (++tr.steps > sv.max_steps)
            throw IntegrationError("integrate: step budget exhausted before the horizon");
        double h_try = std::min(h, sc.T - t);
        h_try = std::min(h_try, next_log - t);

        Vec k7, errv;
        Vec cand = detail::dopri5_step(ctx, t, s, k1, h_try, &k7, &errv);

        double err = 0;
        for (int i = 0; i < ctx.dim; ++i) {
            const double sc_i = sv.atol + sv.rtol * std::max(std::abs(s[i]), std::abs(cand[i]));
            err = std::max(err, std::abs(errv[i]) / sc_i);
        }
        if (!(err <= 1.0) || !std::isfinite(err)) {
            tr.rejected++;
            const double shrink = std::isfinite(err) && err > 0
                                      ? std::max(0.2, 0.9 * std::pow(err, -0.2))
                                      : 0.2;
            h = h_try * shrink;
            if (h < sv.h_min) throw IntegrationError("integrate: step size underflow");
            continue;
        }

        double h_taken = h_try;
        bool landed = false;
        bool flip_at_end = false;
        if (ctx.switching() && tr.events < sv.max_events) {
            // trigger radii: enter the ball at A, leave it at A(1+hysteresis);
            // the width is part of the certified switching policy
            const double enter_r = cert.core.A;
            const double exit_r = cert.core.A * (1.0 + cert.hysteresis);
            const bool entering = ctx.branch == Branch::homogeneous;
            const double radius = entering ? enter_r : exit_r;
            const double g0 = ctx.surface(s, radius);
            const double g1 = ctx.surface(cand, radius);
            const double far1 = entering ? -g1 : g1;
            if (far1 > sv.event_tol) {
                if ((entering ? g0 : -g0) > sv.event_tol) {
                    // transversal crossing: land on the surface by regula falsi
                    // (Illinois) in the step fraction, re-stepping from s
                    double lo = 0, glo = g0, hi = 1, ghi = g1;
                    double theta = 0.5, gth = 0;
                    Vec yth = cand;
                    int side = 0;
                    for (int it = 0; it < 80; ++it) {
                        theta = hi - ghi * (hi - lo) / (ghi - glo);
                        if (!(theta > lo) || !(theta < hi)) theta = 0.5 * (lo + hi);
                        yth = detail::dopri5_step(ctx, t, s, k1, theta * h_try, nullptr, nullptr);
                        gth = ctx.surface(yth, radius);
                        if (std::abs(gth) <= sv.event_tol) break;
                        if ((gth > 0) == (glo > 0)) {
                            lo = theta;
                            glo = gth;
                            if (side == -1) ghi *= 0.5;
                            side = -1;
                        } else {
                            hi = theta;
                            ghi = gth;
                            if (side == 1) glo *= 0.5;
                            side = 1;
                        }
                        if (hi - lo < 1e-15) break;
                    }
                    cand = yth;
                    h_taken = theta * h_try;
                    landed = true;
                    tr.events++;
                } else if (std::abs(g0) <= sv.event_tol) {
                    // left the surface without ever being a full tolerance on the
                    // near side (a fresh landing, or x0 placed on the surface):
                    // no root to bracket, so switch at the end of the step
                    flip_at_end = true;
                    tr.events++;
                }
            }
        }

        t += h_taken;
        s = cand;
        if (landed || flip_at_end) {
            ctx.branch = ctx.branch == Branch::homogeneous ? Branch::linear : Branch::homogeneous;
            k1 = ctx.rhs(t, s); // branch changed; FSAL stage is stale
            record(t, s);       // branch switches are always logged
            next_log = grid_next(t);
        } else {
            k1 = k7;
            if (sv.log_dt <= 0 || t >= next_log - 1e-12 || t >= sc.T - 1e-15) {
                record(t, s);
                next_log = grid_next(t);
            }
        }

        if (tr.has_y && std::abs(s[ctx.dim - 1]) > sv.y_bound) tr.y_bound_warning = true;

        if (sv.stop_norm >= 0) {
            double nx = 0;
            for (int i = 0; i < n; ++i) nx += s[i] * s[i];
            if (std::sqrt(nx) <= sv.stop_norm) {
                if (tr.samples.back().t < t) record(t, s);
                tr.stopped_by_norm = true;
                break;
            }
        }

        if (!landed) {
            // the controller keeps its own step memory: a step clamped to a log
            // boundary or the horizon must not throttle the next one
            const double grow =
                err > 0 ? std::min(5.0, std::max(0.2, 0.9 * std::pow(err, -0.2))) : 5.0;
            const double next = grow * h_try;
            h = std::min(next < h_try ? next : std::max(h, next), sv.h_max);
        }
        if (h < sv.h_min) throw IntegrationError("integrate: step size underflow");
    }

    if (tr.samples.back().t < t) record(t, s);
    return tr;
}

// External-loop runner: same integration, named for what it adds (the
// co-integrated shift and the transformed mismatched trace).
inline Trajectory run_matched_shift(const Scenario& sc) {
    if (sc.system != SystemKind::external_loop)
        throw std::invalid_argument("run_matched_shift: scenario must use the external loop");
    return integrate(sc);
}

// Path rescaling z(t) = r D_r x(t/r), D_r = diag(r^{n-1}, ..., r, 1): maps sign-loop
// solutions to sign-loop solutions (with the disturbance rescaled accordingly).
// Only t and x are transformed; channel and level columns are dropped.
inline Trajectory reparameterize(const Trajectory& tr, double r) {
    if (!(r > 0)) throw std::invalid_argument("reparameterize: r must be positive");
    Trajectory out;
    out.n = tr.n;
    out.system = tr.system;
    out.has_y = false;
    out.samples.reserve(tr.samples.size());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const Sample& smp : tr.samples) {
        Sample z;
        z.t = r * smp.t;
        z.x = Vec(tr.n);
        for (int i = 0; i < tr.n; ++i) z.x[i] = std::pow(r, tr.n - i) * smp.x[i];
        z.u = nan;
        z.sat_in = nan;
        z.V0 = nan;
        z.Vn = nan;
        z.W = nan;
        z.branch = smp.branch;
        z.sliding = smp.sliding;
        out.samples.push_back(z);
    }
    return out;
}

// CSV schema: t,x1,...,xn,u,sat_in,V0,Vn,W[,y]; every field %.17g so identical
// runs produce identical bytes.
inline void write_csv(const std::string& path, const Trajectory& tr) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("write_csv: cannot open " + path);
    std::string header = "t";
    for (int i = 1; i <= tr.n; ++i) header += ",x" + std::to_string(i);
    header += ",u,sat_in,V0,Vn,W";
    if (tr.has_y) header += ",y";
    std::fprintf(f, "%s\n", header.c_str());
    for (const Sample& s : tr.samples) {
        std::fprintf(f, "%.17g", s.t);
        for (int i = 0; i < tr.n; ++i) std::fprintf(f, ",%.17g", s.x[i]);
        std::fprintf(f, ",%.17g,%.17g,%.17g,%.17g,%.17g", s.u, s.sat_in, s.V0, s.Vn, s.W);
        if (tr.has_y) std::fprintf(f, ",%.17g", s.y);
        std::fputc('\n', f);
    }
    if (std::fclose(f) != 0) throw std::runtime_error("write_csv: close failed for " + path);
}

} // namespace satchain
