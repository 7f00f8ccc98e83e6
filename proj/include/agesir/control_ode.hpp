#ifndef AGESIR_CONTROL_ODE_HPP
#define AGESIR_CONTROL_ODE_HPP

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "agesir/ode_reduction.hpp"

namespace agesir {

/** Per-class feedback gains: characteristic roots -r1, -r2 give
 *  alpha1 = r1*r2 and alpha2 = r1 + r2. */
struct OdeGains {
    std::vector<double> r1, r2;

    static OdeGains uniform(int n, double r1v, double r2v) {
        if (!(r1v > 0.0) || !(r2v > 0.0))
            throw std::invalid_argument("OdeGains: root magnitudes must be positive");
        OdeGains g;
        g.r1.assign(n, r1v);
        g.r2.assign(n, r2v);
        return g;
    }
    double alpha1(int k) const { return r1[k] * r2[k]; }
    double alpha2(int k) const { return r1[k] + r2[k]; }
};

/** Drift vector field of the control-affine form, rows [f_1..f_n | f_{n+1}..f_{2n}]:
 *  infected rows first, susceptible rows second (theta-free). */
inline std::vector<double> lie_f(const OdeState& x, const ClassParams& cp) {
    int n = cp.n;
    if (x.size() != n) throw std::invalid_argument("lie_f: dimension mismatch");
    std::vector<double> f(2 * n);
    double force = 0.0;
    for (int j = 0; j < n; ++j) force += cp.N[j] * x.i[j];
    for (int k = 0; k < n; ++k) {
        double i_prev = k == 0 ? 0.0 : x.i[k - 1];
        double s_prev = k == 0 ? 1.0 : x.s[k - 1];
        double Tk = cp.T(k);
        f[k] = Tk * i_prev - (Tk + cp.gamma[k]) * x.i[k] + cp.beta[k] * x.s[k] * force;
        f[n + k] = Tk * s_prev - Tk * x.s[k] - cp.beta[k] * x.s[k] * force;
    }
    return f;
}

struct FeedbackMatrices {
    std::vector<double> A_diag; // diag(-beta_k s_k sum N_j i_j)
    std::vector<double> b;      // second Lie derivative of the output
    std::vector<double> v;      // -alpha2 f_k - alpha1 i_k
};

/** Builds A, b, v of the linearizing law. Throws outside the domain D
 *  (some s_k = 0 or sum N_j i_j = 0, where A is singular). */
inline FeedbackMatrices feedback_matrices(const OdeState& x, const ClassParams& cp,
                                          const OdeGains& gains) {
    int n = cp.n;
    double force = 0.0;
    for (int j = 0; j < n; ++j) force += cp.N[j] * x.i[j];
    if (force == 0.0)
        throw std::runtime_error("feedback_matrices: sum N_j i_j = 0, outside domain D");

    std::vector<double> f = lie_f(x, cp);
    FeedbackMatrices m;
    m.A_diag.resize(n);
    m.b.resize(n);
    m.v.resize(n);
    double force_f = 0.0; // sum N_j f_j over infected rows
    for (int j = 0; j < n; ++j) force_f += cp.N[j] * f[j];
    for (int k = 0; k < n; ++k) {
        if (x.s[k] == 0.0)
            throw std::runtime_error("feedback_matrices: s_" + std::to_string(k + 1) +
                                     " = 0, outside domain D");
        m.A_diag[k] = -cp.beta[k] * x.s[k] * force;
        double f_prev = k == 0 ? 0.0 : f[k - 1]; // f_0 = 0 convention
        double Tk = cp.T(k);
        m.b[k] = cp.beta[k] * x.s[k] * force_f + Tk * f_prev - (Tk + cp.gamma[k]) * f[k] +
                 cp.beta[k] * f[n + k] * force;
        m.v[k] = -gains.alpha2(k) * f[k] - gains.alpha1(k) * x.i[k];
    }
    return m;
}

/** u = A^{-1} (v - b); the feedback-linearizing vaccination law. */
inline std::vector<double> ode_feedback(const OdeState& x, const ClassParams& cp,
                                        const OdeGains& gains) {
    FeedbackMatrices m = feedback_matrices(x, cp, gains);
    std::vector<double> u(cp.n);
    for (int k = 0; k < cp.n; ++k) u[k] = (m.v[k] - m.b[k]) / m.A_diag[k];
    return u;
}

/** One-shot switch-off latch: control passes through until the first time
 *  total infection falls below delta, zero forever after. */
class SwitchOffLatch {
public:
    explicit SwitchOffLatch(double delta) : delta_(delta) {
        if (!(delta > 0.0 && delta < 1.0))
            throw std::invalid_argument("SwitchOffLatch: delta must be in (0,1)");
    }

    /** Update latch state from the current total infection; returns true
     *  while control is active. */
    bool engaged(double total_I) {
        if (!latched_ && total_I < delta_) latched_ = true;
        return !latched_;
    }
    bool latched() const { return latched_; }
    double delta() const { return delta_; }

private:
    double delta_;
    bool latched_ = false;
};

inline std::vector<double> switch_off(const std::vector<double>& u_raw, double total_I,
                                      SwitchOffLatch& latch) {
    if (latch.engaged(total_I)) return u_raw;
    return std::vector<double>(u_raw.size(), 0.0);
}

/** Componentwise max(u, 0). */
inline std::vector<double> saturate_nonneg(std::vector<double> u) {
    for (double& v : u) v = v < 0.0 ? 0.0 : v;
    return u;
}

/** The full practical ODE law: linearizing feedback, latched switch-off on
 *  sum N_j i_j, then nonnegative saturation. */
inline OdePolicy make_ode_closed_loop_policy(const ClassParams& cp, const OdeGains& gains,
                                             std::shared_ptr<SwitchOffLatch> latch) {
    return [&cp, gains, latch](double, const OdeState& x) {
        double total_I = 0.0;
        for (int j = 0; j < cp.n; ++j) total_I += cp.N[j] * x.i[j];
        if (latch->latched() || total_I < latch->delta()) {
            latch->engaged(total_I);
            return std::vector<double>(cp.n, 0.0);
        }
        return saturate_nonneg(ode_feedback(x, cp, gains));
    };
}

} // namespace agesir

#endif
