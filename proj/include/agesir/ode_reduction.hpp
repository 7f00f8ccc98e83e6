#ifndef AGESIR_ODE_REDUCTION_HPP
#define AGESIR_ODE_REDUCTION_HPP

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "agesir/demography.hpp"
#include "agesir/quadrature.hpp"
#include "agesir/rk45.hpp"

namespace agesir {

/** Per-age-class constants of the age-discretized (NODE) model. */
struct ClassParams {
    int n = 0;
    std::vector<double> edges;         // a_0 = 0 < ... < a_n = L
    std::vector<double> N;             // class populations
    std::vector<double> rho;           // transfer rates, rho[n-1] forced to 0
    std::vector<double> mu, beta, gamma;
    double birth_rate = 0.0;
    double rho_n_residual = 0.0;       // raw recursion value at k = n before forcing

    double T(int k) const { return rho[k] + mu[k]; }
    double total_population() const {
        double s = 0.0;
        for (double v : N) s += v;
        return s;
    }
};

struct OdeState {
    std::vector<double> s, i;

    int size() const { return static_cast<int>(i.size()); }
    bool in_set_B(double slack = 0.0) const {
        for (int k = 0; k < size(); ++k)
            if (s[k] < -slack || i[k] < -slack || s[k] + i[k] > 1.0 + slack) return false;
        return true;
    }
};

/** Build N_k, interval-mean coefficients and the transfer-rate recursion.
 *
 *  N_k is the per-class integral of P. beta_k and gamma_k are plain interval
 *  means; mu_k is the P-weighted mean, which makes the recursion telescope to
 *  rho_k N_k = P(a_k) and keeps every transfer rate nonnegative (a plain mean
 *  of an increasing mu against a decreasing P overshoots and drives rho
 *  negative in the tail). Coefficients are clamped to [0, clamp_age] to keep
 *  the mortality integrable; clamp_age defaults to the start of the last
 *  class. rho_n is forced to 0 and the raw recursion value at k = n is kept
 *  as a consistency metric.
 */
inline ClassParams build_class_params(const std::vector<double>& edges, const RateFn& P,
                                      const VitalRates& rates, double clamp_age = -1.0) {
    int n = static_cast<int>(edges.size()) - 1;
    if (n < 1) throw std::invalid_argument("build_class_params: need at least one class");
    for (int k = 0; k < n; ++k)
        if (!(edges[k] < edges[k + 1]))
            throw std::invalid_argument("build_class_params: edges must be strictly increasing");
    if (clamp_age < 0.0) clamp_age = edges[n - 1];

    ClassParams cp;
    cp.n = n;
    cp.edges = edges;
    cp.birth_rate = rates.birth_rate;
    cp.N.resize(n);
    cp.mu.resize(n);
    cp.beta.resize(n);
    cp.gamma.resize(n);
    cp.rho.assign(n, 0.0);

    auto clamped_mean = [&](const RateFn& f, double a0, double a1) {
        double b0 = std::min(a0, clamp_age), b1 = std::min(a1, clamp_age);
        if (b1 <= b0) return f(b0);
        return integrate([&](double a) { return f(std::min(a, clamp_age)); }, b0, b1) / (b1 - b0);
    };

    for (int k = 0; k < n; ++k) {
        double a0 = edges[k], a1 = edges[k + 1];
        cp.N[k] = integrate(P, a0, a1);
        if (!(cp.N[k] > 0.0))
            throw std::runtime_error("build_class_params: nonpositive N at class " + std::to_string(k + 1));
        cp.mu[k] = integrate([&](double a) { return rates.mu(std::min(a, clamp_age)) * P(a); },
                             a0, a1) / cp.N[k];
        cp.beta[k] = clamped_mean(rates.beta, a0, a1);
        cp.gamma[k] = clamped_mean(rates.gamma, a0, a1);
    }

    cp.rho[0] = rates.birth_rate / cp.N[0] - cp.mu[0];
    for (int k = 1; k < n; ++k) cp.rho[k] = cp.rho[k - 1] * cp.N[k - 1] / cp.N[k] - cp.mu[k];
    cp.rho_n_residual = cp.rho[n - 1];
    cp.rho[n - 1] = 0.0;
    for (int k = 0; k + 1 < n; ++k)
        if (cp.rho[k] < 0.0)
            throw std::runtime_error("build_class_params: negative transfer rate at class " +
                                     std::to_string(k + 1) + " (inconsistent demography)");
    return cp;
}

/** Right-hand side of the NODE model with s_0 = 1, i_0 = 0. */
inline void ode_rhs(const OdeState& x, const std::vector<double>& theta, const ClassParams& cp,
                    std::vector<double>& ds, std::vector<double>& di) {
    int n = cp.n;
    if (x.size() != n || static_cast<int>(theta.size()) != n)
        throw std::invalid_argument("ode_rhs: dimension mismatch");
    ds.resize(n);
    di.resize(n);
    double force = 0.0;
    for (int j = 0; j < n; ++j) force += cp.N[j] * x.i[j];
    for (int k = 0; k < n; ++k) {
        double s_prev = k == 0 ? 1.0 : x.s[k - 1];
        double i_prev = k == 0 ? 0.0 : x.i[k - 1];
        double Tk = cp.T(k);
        ds[k] = Tk * s_prev - (Tk + theta[k] + cp.beta[k] * force) * x.s[k];
        di[k] = Tk * i_prev - (Tk + cp.gamma[k]) * x.i[k] + cp.beta[k] * x.s[k] * force;
    }
}

/** Flatten (s, i) to the integrator layout [i_1..i_n, s_1..s_n]. */
inline std::vector<double> pack_state(const OdeState& x) {
    std::vector<double> v(2 * x.size());
    for (int k = 0; k < x.size(); ++k) {
        v[k] = x.i[k];
        v[x.size() + k] = x.s[k];
    }
    return v;
}

inline OdeState unpack_state(const std::vector<double>& v) {
    int n = static_cast<int>(v.size()) / 2;
    OdeState x;
    x.i.assign(v.begin(), v.begin() + n);
    x.s.assign(v.begin() + n, v.end());
    return x;
}

/** Feedback policy for the NODE model: theta = policy(t, state). */
using OdePolicy = std::function<std::vector<double>(double t, const OdeState& x)>;

struct OdeTrajectory {
    std::vector<double> times;
    std::vector<OdeState> states;
    std::vector<std::vector<double>> thetas;
    bool converged = false;
    bool left_set_B = false;
    std::vector<std::string> diagnostics;
};

/** Adaptive Dormand-Prince integration of the NODE model under a feedback
 *  policy. The policy is evaluated at every RK stage (it is part of the
 *  vector field); any latch inside the policy should key off accepted states
 *  only, which is what the once-per-step call in the record loop provides.
 *  Terminates early with converged=true when the sup-norm of dx/dt falls
 *  below conv_tol. States exiting set B beyond 1e-6 are flagged, not fatal.
 */
inline OdeTrajectory integrate_adaptive(const OdeState& x0, const OdePolicy& policy,
                                        const ClassParams& cp, double t0, double t1,
                                        double rel_tol, double conv_tol = -1.0) {
    if (!(rel_tol > 0.0)) throw std::invalid_argument("integrate_adaptive: rel_tol must be positive");
    if (conv_tol < 0.0) conv_tol = rel_tol;
    if (!x0.in_set_B(1e-12)) throw std::invalid_argument("integrate_adaptive: x0 outside set B");

    Rhs rhs = [&](double t, const std::vector<double>& v, std::vector<double>& dv) {
        OdeState x = unpack_state(v);
        std::vector<double> theta = policy(t, x);
        std::vector<double> ds, di;
        ode_rhs(x, theta, cp, ds, di);
        dv.resize(v.size());
        for (int k = 0; k < cp.n; ++k) {
            dv[k] = di[k];
            dv[cp.n + k] = ds[k];
        }
    };

    Rk45Options opt;
    opt.rel_tol = rel_tol;
    opt.abs_tol = rel_tol * 1e-2;
    opt.h_max = (t1 - t0) / 10.0;

    OdeTrajectory traj;
    std::vector<double> v = pack_state(x0);
    double t = t0;
    double h = std::min(opt.h_init, opt.h_max);
    std::vector<double> dv(v.size());

    auto record = [&](double tt, const std::vector<double>& vv) {
        OdeState x = unpack_state(vv);
        traj.times.push_back(tt);
        traj.thetas.push_back(policy(tt, x));
        if (!x.in_set_B(1e-6) && !traj.left_set_B) {
            traj.left_set_B = true;
            traj.diagnostics.push_back("state left set B at t=" + std::to_string(tt));
        }
        traj.states.push_back(std::move(x));
    };

    record(t, v);
    while (t < t1) {
        h = std::min(h, t1 - t);
        Rk45StepResult r = rk45_step(rhs, t, v, h, opt);
        if (r.h_next < opt.h_min)
            throw std::runtime_error("integrate_adaptive: step size underflow at t=" + std::to_string(t));
        h = r.h_next;
        if (!r.accepted) continue;
        for (double q : v)
            if (!std::isfinite(q))
                throw std::runtime_error("integrate_adaptive: non-finite state at t=" + std::to_string(t));
        record(t, v);
        rhs(t, v, dv);
        double sup = 0.0;
        for (double q : dv) sup = std::max(sup, std::abs(q));
        if (sup < conv_tol) {
            traj.converged = true;
            break;
        }
    }
    return traj;
}

} // namespace agesir

#endif
