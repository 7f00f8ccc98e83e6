#ifndef AGESIR_PIDE_HPP
#define AGESIR_PIDE_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "agesir/age_grid.hpp"
#include "agesir/demography.hpp"
#include "agesir/quadrature.hpp"

namespace agesir {

enum class PideVariant { raw, normalized, homogeneous };

/** One time slice of the age-gridded SIR densities.
 *
 *  raw:          S, I, R are absolute densities, S+I+R = P(t,.)
 *  normalized:   S, I, R hold s, i, r in [0,1] with s+i+r = 1
 *  homogeneous:  S holds s_hat = s-1 in [-1,0], I holds i; R unused (zeros)
 */
struct FieldState {
    double t = 0.0;
    PideVariant variant = PideVariant::normalized;
    std::vector<double> S, I, R;

    int size() const { return static_cast<int>(I.size()); }
};

struct SchemeConfig {
    double dt;
    double T;
    AgeGrid grid;
    PideVariant variant = PideVariant::normalized;
};

/** CFL verdict: stable iff alpha * dt / da <= 1. */
inline bool check_cfl(const SchemeConfig& cfg, double alpha_units = 1.0) {
    return alpha_units * cfg.dt / cfg.grid.da() <= 1.0 + 1e-15;
}

/** Trapezoid of i(.)*weight(.) over the grid; the infection coupling term. */
inline double coupling_integral(std::span<const double> i_field, std::span<const double> weight,
                                const AgeGrid& grid) {
    if (static_cast<int>(i_field.size()) != grid.n_nodes ||
        static_cast<int>(weight.size()) != grid.n_nodes)
        throw std::invalid_argument("coupling_integral: field/grid length mismatch");
    return trapezoid_product(i_field, weight, grid.da());
}

namespace detail {

inline void require_step_preconditions(const FieldState& state, std::span<const double> theta,
                                       const SchemeConfig& cfg, double alpha) {
    if (!check_cfl(cfg, alpha)) throw std::runtime_error("step: CFL condition violated");
    if (state.size() != cfg.grid.n_nodes)
        throw std::invalid_argument("step: state/grid length mismatch");
    if (static_cast<int>(theta.size()) != cfg.grid.n_nodes)
        throw std::invalid_argument("step: control/grid length mismatch");
    for (double th : theta)
        if (th < 0.0) throw std::invalid_argument("step: negative control field");
}

/** upwind transport term: alpha * (f_j - f_{j-1}) / da, backward in age */
inline double upwind(std::span<const double> f, int j, double da, double alpha) {
    return alpha * (f[j] - f[j - 1]) / da;
}

} // namespace detail

/** One forward-time / backward-age step of the raw PIDE system (Eq. variant
 *  with absolute densities). Boundary S(t,0)=B, I(t,0)=0, R(t,0)=0 is
 *  imposed strongly after the interior update. */
inline FieldState step_raw(const FieldState& state, std::span<const double> theta,
                           const VitalRates& rates, const SchemeConfig& cfg) {
    double alpha = rates.alpha_units;
    detail::require_step_preconditions(state, theta, cfg, alpha);
    const AgeGrid& grid = cfg.grid;
    double da = grid.da(), dt = cfg.dt;

    // raw coupling: unweighted integral of I
    std::vector<double> ones(grid.n_nodes, 1.0);
    double int_I = coupling_integral(state.I, ones, grid);

    FieldState next = state;
    next.t = state.t + dt;
    for (int j = 1; j < grid.n_nodes; ++j) {
        double a = grid.node(j);
        double mu = rates.mu(a), beta = rates.beta(a), gamma = rates.gamma(a);
        double infection = beta * state.S[j] * int_I;
        next.S[j] = state.S[j] + dt * (-detail::upwind(state.S, j, da, alpha)
                                       - (theta[j] + mu) * state.S[j] - infection);
        next.I[j] = state.I[j] + dt * (-detail::upwind(state.I, j, da, alpha)
                                       - (mu + gamma) * state.I[j] + infection);
        next.R[j] = state.R[j] + dt * (-detail::upwind(state.R, j, da, alpha)
                                       + theta[j] * state.S[j] + gamma * state.I[j]
                                       - mu * state.R[j]);
    }
    next.S[0] = rates.birth_rate;
    next.I[0] = 0.0;
    next.R[0] = 0.0;
    return next;
}

/** One upwind step of the normalized system; coupling weighted by P(t,.). */
inline FieldState step_normalized(const FieldState& state, std::span<const double> theta,
                                  std::span<const double> P_field, const VitalRates& rates,
                                  const SchemeConfig& cfg) {
    double alpha = rates.alpha_units;
    detail::require_step_preconditions(state, theta, cfg, alpha);
    const AgeGrid& grid = cfg.grid;
    double da = grid.da(), dt = cfg.dt;
    double int_iP = coupling_integral(state.I, P_field, grid);

    FieldState next = state;
    next.t = state.t + dt;
    for (int j = 1; j < grid.n_nodes; ++j) {
        double a = grid.node(j);
        double beta = rates.beta(a), gamma = rates.gamma(a);
        double infection = beta * state.S[j] * int_iP;
        next.S[j] = state.S[j] + dt * (-detail::upwind(state.S, j, da, alpha)
                                       - theta[j] * state.S[j] - infection);
        next.I[j] = state.I[j] + dt * (-detail::upwind(state.I, j, da, alpha)
                                       - gamma * state.I[j] + infection);
        next.R[j] = state.R[j] + dt * (-detail::upwind(state.R, j, da, alpha)
                                       + theta[j] * state.S[j] + gamma * state.I[j]);
    }
    next.S[0] = 1.0;
    next.I[0] = 0.0;
    next.R[0] = 0.0;
    return next;
}

/** Shift s_hat = s - 1 between the normalized and homogeneous variants. */
inline FieldState shift_to_homogeneous(const FieldState& normalized) {
    FieldState out = normalized;
    out.variant = PideVariant::homogeneous;
    for (double& v : out.S) v -= 1.0;
    std::fill(out.R.begin(), out.R.end(), 0.0);
    return out;
}

inline FieldState shift_to_normalized(const FieldState& homogeneous) {
    FieldState out = homogeneous;
    out.variant = PideVariant::normalized;
    for (double& v : out.S) v += 1.0;
    for (int j = 0; j < out.size(); ++j) out.R[j] = 1.0 - out.S[j] - out.I[j];
    return out;
}

/** Homogeneous-BC step, realized as the exact shift of step_normalized.
 *
 *  The printed homogeneous s_hat equation carries a plus sign on the
 *  infection term; the change of variables from the normalized system yields
 *  a minus sign, and the shift identity below is what is implemented.
 */
inline FieldState step_homogeneous(const FieldState& state, std::span<const double> theta,
                                   std::span<const double> P_field, const VitalRates& rates,
                                   const SchemeConfig& cfg) {
    FieldState unshifted = shift_to_normalized(state);
    FieldState stepped = step_normalized(unshifted, theta, P_field, rates, cfg);
    return shift_to_homogeneous(stepped);
}

/** Control policy: queried once per time step with the current state. */
using ControlPolicy = std::function<std::vector<double>(const FieldState&)>;

struct Trajectory {
    std::vector<double> times;            // every step
    std::vector<double> total_I, total_S, total_R;
    std::vector<double> min_state, max_state;
    std::vector<FieldState> snapshots;    // strided
    std::vector<std::vector<double>> snapshot_theta;
    std::vector<std::string> violations;  // invariant breaches, with step index
};

inline std::vector<double> zero_control(const FieldState& s) {
    return std::vector<double>(s.I.size(), 0.0);
}

namespace detail {

inline void check_invariants(const FieldState& s, int step, double P_or_one_sum,
                             std::vector<std::string>& violations) {
    const double tol = 1e-6;
    double lo_S = s.variant == PideVariant::homogeneous ? -1.0 - tol : -tol;
    for (int j = 0; j < s.size(); ++j) {
        if (!std::isfinite(s.S[j]) || !std::isfinite(s.I[j]) || !std::isfinite(s.R[j]))
            throw std::runtime_error("simulate: NaN/Inf detected at step " + std::to_string(step) +
                                     ", node " + std::to_string(j));
        if (s.S[j] < lo_S || s.I[j] < -tol) {
            violations.push_back("step " + std::to_string(step) + " node " + std::to_string(j) +
                                 ": negativity");
            return;
        }
    }
    (void)P_or_one_sum;
}

} // namespace detail

/** March the selected variant over [t0, t0+T], querying the controller once
 *  per step. P_profile supplies the coupling weight for the normalized and
 *  homogeneous variants (typically the stationary density). */
inline Trajectory simulate(const FieldState& initial, const ControlPolicy& controller,
                           const SchemeConfig& cfg, const VitalRates& rates,
                           std::span<const double> P_profile = {}, int snapshot_stride = 0) {
    if (!check_cfl(cfg, rates.alpha_units)) throw std::runtime_error("simulate: CFL condition violated");
    const AgeGrid& grid = cfg.grid;
    int n_steps = static_cast<int>(std::llround(cfg.T / cfg.dt));
    if (snapshot_stride <= 0) snapshot_stride = std::max(1, n_steps / 200);

    std::vector<double> weight(grid.n_nodes, 1.0);
    if (!P_profile.empty()) weight.assign(P_profile.begin(), P_profile.end());
    bool raw = cfg.variant == PideVariant::raw;

    Trajectory traj;
    FieldState state = initial;
    state.variant = cfg.variant;
    for (int step = 0; step <= n_steps; ++step) {
        std::vector<double> theta = controller(state);
        double tI, tS, tR;
        if (raw) {
            tI = trapezoid(state.I, grid.da());
            tS = trapezoid(state.S, grid.da());
            tR = trapezoid(state.R, grid.da());
        } else {
            tI = trapezoid_product(state.I, weight, grid.da());
            tS = trapezoid_product(state.S, weight, grid.da());
            tR = trapezoid_product(state.R, weight, grid.da());
        }
        double lo = state.S[0], hi = state.S[0];
        for (int j = 0; j < state.size(); ++j) {
            lo = std::min({lo, state.S[j], state.I[j], state.R[j]});
            hi = std::max({hi, state.S[j], state.I[j], state.R[j]});
        }
        traj.times.push_back(state.t);
        traj.total_I.push_back(tI);
        traj.total_S.push_back(tS);
        traj.total_R.push_back(tR);
        traj.min_state.push_back(lo);
        traj.max_state.push_back(hi);
        detail::check_invariants(state, step, 0.0, traj.violations);
        if (step % snapshot_stride == 0 || step == n_steps) {
            traj.snapshots.push_back(state);
            traj.snapshot_theta.push_back(theta);
        }
        if (step == n_steps) break;
        switch (cfg.variant) {
            case PideVariant::raw: state = step_raw(state, theta, rates, cfg); break;
            case PideVariant::normalized: state = step_normalized(state, theta, weight, rates, cfg); break;
            case PideVariant::homogeneous: state = step_homogeneous(state, theta, weight, rates, cfg); break;
        }
    }
    return traj;
}

/** Built-in initial data: i0 is the clipped shifted Gaussian with i0(0)=0,
 *  s0 = 1 - i0, r0 = 0 (normalized variant). */
inline FieldState initial_conditions_builtin(const AgeGrid& grid) {
    FieldState s;
    s.t = 0.0;
    s.variant = PideVariant::normalized;
    s.S.resize(grid.n_nodes);
    s.I.resize(grid.n_nodes);
    s.R.assign(grid.n_nodes, 0.0);
    auto i_hat = [](double a) {
        double d = a - 0.5;
        return 0.5 * std::exp(-100.0 * d * d) * 1e-3;
    };
    double i_hat0 = i_hat(0.0);
    for (int j = 0; j < grid.n_nodes; ++j) {
        double v = i_hat(grid.node(j)) - i_hat0;
        s.I[j] = v > 0.0 ? v : 0.0;
        s.S[j] = 1.0 - s.I[j];
    }
    return s;
}

/** Rescale a normalized state to raw densities against a population profile. */
inline FieldState to_raw(const FieldState& normalized, std::span<const double> P_profile) {
    FieldState out = normalized;
    out.variant = PideVariant::raw;
    for (int j = 0; j < out.size(); ++j) {
        out.S[j] = normalized.S[j] * P_profile[j];
        out.I[j] = normalized.I[j] * P_profile[j];
        out.R[j] = normalized.R[j] * P_profile[j];
    }
    return out;
}

inline FieldState to_normalized(const FieldState& raw, std::span<const double> P_profile) {
    FieldState out = raw;
    out.variant = PideVariant::normalized;
    for (int j = 0; j < out.size(); ++j) {
        out.S[j] = raw.S[j] / P_profile[j];
        out.I[j] = raw.I[j] / P_profile[j];
        out.R[j] = raw.R[j] / P_profile[j];
    }
    return out;
}

} // namespace agesir

#endif
