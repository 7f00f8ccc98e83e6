#ifndef AGESIR_CONTROL_PIDE_HPP
#define AGESIR_CONTROL_PIDE_HPP

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "agesir/age_grid.hpp"
#include "agesir/control_ode.hpp"
#include "agesir/demography.hpp"
#include "agesir/pide.hpp"
#include "agesir/quadrature.hpp"
#include "agesir/rk45.hpp"

namespace agesir {

/** g(a) = -beta(a) d/da[(gamma(a)+mu(a))/beta(a)].
 *  Analytic when the rates carry derivatives, centered O(da^2) differences
 *  otherwise. */
inline double g_func(double a, const VitalRates& rates, const AgeGrid& grid) {
    double beta = rates.beta(a);
    if (!(beta > 0.0)) throw std::domain_error("g_func: beta(a) must be positive");
    double clamp = grid.clamp_age();
    if (rates.d_mu && rates.d_gamma && rates.d_beta) {
        double num_d = rates.d_gamma(a) + rates.d_mu(a);
        double h = rates.d_beta(a) / beta;
        return -num_d + (rates.gamma(a) + rates.mu(a)) * h;
    }
    double step = grid.da();
    double am = std::max(0.0, a - step), ap = std::min(clamp, a + step);
    auto ratio = [&](double x) { return (rates.gamma(x) + rates.mu(x)) / rates.beta(x); };
    return -beta * (ratio(ap) - ratio(am)) / (ap - am);
}

/** h(a) = beta'(a) / beta(a). */
inline double h_func(double a, const VitalRates& rates, const AgeGrid& grid) {
    double beta = rates.beta(a);
    if (!(beta > 0.0)) throw std::domain_error("h_func: beta(a) must be positive");
    if (rates.d_beta) return rates.d_beta(a) / beta;
    double step = grid.da();
    double am = std::max(0.0, a - step), ap = std::min(grid.clamp_age(), a + step);
    return (rates.beta(ap) - rates.beta(am)) / ((ap - am) * beta);
}

/** Gains and certificate constants of the PIDE vaccination law. */
struct PideGains {
    std::vector<double> alpha1_tilde; // on the grid nodes
    std::vector<double> alpha2_tilde;
    double c1 = 0.0, c2 = 0.0;  // certificate constants (0 until certified)
    double K = 0.0;             // bound on |kappa(a)|
    double delta = 1e-6;        // switch-off threshold
    double beta0B = 0.0;        // perturbation norm bound beta(0) * B
};

/** Positive-by-design gains: alpha2 = 3 nu + 2 Gamma + beta(a) N with
 *  nu = sup mu, Gamma = sup gamma over the clamped grid, and alpha1 chosen
 *  so the state-dependent bracket of the law cancels identically. */
inline PideGains positive_gain_design(const VitalRates& rates, const AgeGrid& grid,
                                      double N_total) {
    double nu = 0.0, Gam = 0.0;
    for (int j = 0; j < grid.n_nodes; ++j) {
        nu = std::max(nu, rates.mu(grid.node(j)));
        Gam = std::max(Gam, rates.gamma(grid.node(j)));
    }
    PideGains g;
    g.alpha1_tilde.resize(grid.n_nodes);
    g.alpha2_tilde.resize(grid.n_nodes);
    for (int j = 0; j < grid.n_nodes; ++j) {
        double a = grid.node(j);
        double a2 = 3.0 * nu + 2.0 * Gam + rates.beta(a) * N_total;
        double mg = rates.mu(a) + rates.gamma(a);
        g.alpha2_tilde[j] = a2;
        g.alpha1_tilde[j] = -mg * (mg - a2);
    }
    g.beta0B = rates.beta(0.0) * rates.birth_rate;
    return g;
}

/** The five-term vaccination law Theta(t,a) for the raw PIDE state.
 *
 *  Theta = alpha2~(a) + int beta S - 2 mu - gamma - beta(a) int I
 *          - [int (mu+gamma) I] / int I
 *          + I(t,a)/(beta S int I) * (alpha1~ + (mu+gamma)(mu+gamma-alpha2~))
 *
 *  (The integration variable of int beta S collides with the free age in the
 *  printed law; it is taken as int_0^L beta(b) S(t,b) db.)
 */
inline std::vector<double> pide_feedback(const FieldState& state, const VitalRates& rates,
                                         const PideGains& gains, const AgeGrid& grid) {
    if (state.variant != PideVariant::raw)
        throw std::invalid_argument("pide_feedback: expects the raw variant");
    int n = grid.n_nodes;
    double da = grid.da();
    double int_I = trapezoid(state.I, da);
    if (!(int_I > 0.0)) throw std::runtime_error("pide_feedback: int I must be positive");

    std::vector<double> betaS(n), muI(n);
    for (int j = 0; j < n; ++j) {
        double a = grid.node(j);
        betaS[j] = rates.beta(a) * state.S[j];
        muI[j] = (rates.mu(a) + rates.gamma(a)) * state.I[j];
    }
    double int_betaS = trapezoid(betaS, da);
    double int_muI = trapezoid(muI, da);

    std::vector<double> theta(n);
    for (int j = 0; j < n; ++j) {
        double a = grid.node(j);
        double mu = rates.mu(a), gamma = rates.gamma(a), beta = rates.beta(a);
        double bracket = gains.alpha1_tilde[j] + (mu + gamma) * (mu + gamma - gains.alpha2_tilde[j]);
        double last = 0.0;
        if (bracket != 0.0) {
            double denom = beta * state.S[j] * int_I;
            if (!(denom > 0.0))
                throw std::runtime_error("pide_feedback: beta*S vanishes at node " + std::to_string(j));
            last = state.I[j] / denom * bracket;
        }
        theta[j] = gains.alpha2_tilde[j] + int_betaS - 2.0 * mu - gamma - beta * int_I -
                   int_muI / int_I + last;
    }
    return theta;
}

/** Linearizing coordinates of the PIDE loop: I_bar = I,
 *  S_bar = -(gamma+mu) I + beta S int I. */
struct NormalFormFields {
    std::vector<double> I_bar, S_bar;
};

inline NormalFormFields pide_normal_form(const FieldState& state, const VitalRates& rates,
                                         const AgeGrid& grid) {
    if (state.variant != PideVariant::raw)
        throw std::invalid_argument("pide_normal_form: expects the raw variant");
    int n = grid.n_nodes;
    double int_I = trapezoid(state.I, grid.da());
    NormalFormFields nf;
    nf.I_bar = state.I;
    nf.S_bar.resize(n);
    for (int j = 0; j < n; ++j) {
        double a = grid.node(j);
        nf.S_bar[j] = -(rates.gamma(a) + rates.mu(a)) * state.I[j] +
                      rates.beta(a) * state.S[j] * int_I;
    }
    return nf;
}

/** Inverse map; requires int I_bar != 0 and beta > 0 on the grid. */
inline FieldState pide_normal_form_inverse(const NormalFormFields& nf, const VitalRates& rates,
                                           const AgeGrid& grid, double t = 0.0) {
    double int_I = trapezoid(nf.I_bar, grid.da());
    if (int_I == 0.0)
        throw std::runtime_error("pide_normal_form_inverse: int I_bar = 0, map not invertible");
    FieldState s;
    s.t = t;
    s.variant = PideVariant::raw;
    s.I = nf.I_bar;
    s.S.resize(grid.n_nodes);
    s.R.assign(grid.n_nodes, 0.0);
    for (int j = 0; j < grid.n_nodes; ++j) {
        double a = grid.node(j);
        double beta = rates.beta(a);
        if (!(beta > 0.0))
            throw std::runtime_error("pide_normal_form_inverse: beta vanishes at node " +
                                     std::to_string(j));
        s.S[j] = (nf.S_bar[j] + (rates.gamma(a) + rates.mu(a)) * nf.I_bar[j]) / (beta * int_I);
    }
    return s;
}

/** Growth bound omega = -(c2+K) + (1 + K(c1-1) - c2) * ||D_k||. */
inline double growth_bound(double c1, double c2, double K, double D_norm) {
    return -(c2 + K) + (1.0 + K * (c1 - 1.0) - c2) * D_norm;
}

struct CertificateVerdict {
    bool rel4 = false, rel5 = false, rel6 = false;
    double c1_lower = 0.0, c2_lower = 0.0, c2_upper = 0.0;
    double omega = 0.0;

    bool pass() const { return rel4 && rel5 && rel6; }
};

/** Evaluate the three certificate inequalities for given (c1, c2):
 *    rel4: c1 > max{1, sup(alpha1~ - g), beta0B/K}
 *    rel5: c2 > max{0, beta0B(1+K c1)/(1+beta0B) - K, sup(alpha2~ - h)}
 *    rel6: c2 <= K(c1 - 1)
 *  sup terms are taken over the clamped grid nodes.
 */
inline CertificateVerdict stability_conditions(const PideGains& gains,
                                               std::span<const double> g_profile,
                                               std::span<const double> h_profile) {
    if (!(gains.K > 0.0)) throw std::invalid_argument("stability_conditions: K must be positive");
    double sup1 = -std::numeric_limits<double>::infinity();
    double sup2 = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < gains.alpha1_tilde.size(); ++j) {
        sup1 = std::max(sup1, gains.alpha1_tilde[j] - g_profile[j]);
        sup2 = std::max(sup2, gains.alpha2_tilde[j] - h_profile[j]);
    }
    CertificateVerdict v;
    v.c1_lower = std::max({1.0, sup1, gains.beta0B / gains.K});
    v.c2_lower = std::max({0.0, gains.beta0B * (1.0 + gains.K * gains.c1) / (1.0 + gains.beta0B) - gains.K,
                           sup2});
    v.c2_upper = gains.K * (gains.c1 - 1.0);
    v.rel4 = gains.c1 > v.c1_lower;
    v.rel5 = gains.c2 > v.c2_lower;
    v.rel6 = gains.c2 <= v.c2_upper;
    v.omega = growth_bound(gains.c1, gains.c2, gains.K, gains.beta0B);
    return v;
}

/** Scan for feasible certificate constants. c1 is pushed just above its lower
 *  bound; c2 is placed between its bounds when the window is nonempty. */
inline std::optional<std::pair<double, double>> find_certificate(PideGains gains,
                                                                 std::span<const double> g_profile,
                                                                 std::span<const double> h_profile) {
    for (double margin : {1e-6, 1e-3, 1.0, 10.0, 100.0}) {
        gains.c1 = 0.0;
        gains.c2 = 0.0;
        CertificateVerdict probe = stability_conditions(gains, g_profile, h_profile);
        gains.c1 = probe.c1_lower * (1.0 + margin) + margin;
        probe = stability_conditions(gains, g_profile, h_profile);
        double lo = probe.c2_lower, hi = probe.c2_upper;
        if (lo < hi) {
            gains.c2 = 0.5 * (lo + hi);
            CertificateVerdict final_v = stability_conditions(gains, g_profile, h_profile);
            if (final_v.pass() && final_v.omega < 0.0) return std::make_pair(gains.c1, gains.c2);
        }
    }
    return std::nullopt;
}

struct RiccatiSolution {
    std::vector<double> kappa;   // on the grid nodes
    double K = 0.0;              // sup |kappa|
    bool blew_up = false;
    double blow_up_age = 0.0;
};

/** Integrate d kappa/da = -kappa^2 + H kappa - G from kappa(0) = kappa0 over
 *  the clamped grid with an adaptive embedded pair. Finite-age blow-up is
 *  reported, not thrown; callers retry with a different initial value. */
inline RiccatiSolution riccati_kappa(std::span<const double> G_profile,
                                     std::span<const double> H_profile, double kappa0,
                                     const AgeGrid& grid) {
    int n = grid.n_nodes;
    if (static_cast<int>(G_profile.size()) != n || static_cast<int>(H_profile.size()) != n)
        throw std::invalid_argument("riccati_kappa: profile/grid mismatch");

    auto G = [&](double a) { return detail::interp_profile(G_profile, grid, a); };
    auto H = [&](double a) { return detail::interp_profile(H_profile, grid, a); };

    Rhs rhs = [&](double a, const std::vector<double>& x, std::vector<double>& dx) {
        dx.resize(1);
        dx[0] = -x[0] * x[0] + H(a) * x[0] - G(a);
    };

    Rk45Options opt;
    opt.rel_tol = 1e-9;
    opt.abs_tol = 1e-12;
    opt.h_max = grid.da();
    opt.h_init = grid.da() * 1e-3;

    RiccatiSolution sol;
    sol.kappa.assign(n, 0.0);
    sol.kappa[0] = kappa0;
    std::vector<double> x{kappa0};
    double a = 0.0;
    double h_ctrl = opt.h_init;
    const double blow_limit = 1e12;
    for (int j = 1; j < n; ++j) {
        double target = grid.node(j);
        while (a < target) {
            // clip to the node boundary without letting the clip shrink the
            // controller's step estimate (a tiny clipped step is not underflow)
            bool clipped = target - a < h_ctrl;
            double h_try = clipped ? target - a : h_ctrl;
            Rk45StepResult r = rk45_step(rhs, a, x, h_try, opt);
            if (!std::isfinite(x[0]) || std::abs(x[0]) > blow_limit ||
                (!r.accepted && h_try < 2.0 * opt.h_min)) {
                sol.blew_up = true;
                sol.blow_up_age = a;
                return sol;
            }
            if (!clipped || !r.accepted) h_ctrl = std::max(r.h_next, opt.h_min);
        }
        sol.kappa[j] = x[0];
        sol.K = std::max(sol.K, std::abs(x[0]));
    }
    sol.K = std::max(sol.K, std::abs(kappa0));
    return sol;
}

/** Retry ladder over initial values; the underlying existence result gives no
 *  constructive kappa(0). */
inline RiccatiSolution riccati_kappa_with_retry(std::span<const double> G_profile,
                                                std::span<const double> H_profile,
                                                const AgeGrid& grid) {
    for (double k0 : {0.0, 1.0, -1.0, 10.0, -10.0, 100.0, -100.0, 1000.0, -1000.0}) {
        RiccatiSolution sol = riccati_kappa(G_profile, H_profile, k0, grid);
        if (!sol.blew_up) return sol;
    }
    throw std::runtime_error("riccati_kappa_with_retry: no bounded solution found on the retry grid");
}

/** G = -alpha1~ + g and H = -alpha2~ + h sampled on the grid. */
inline std::pair<std::vector<double>, std::vector<double>>
closed_loop_coefficients(const PideGains& gains, const VitalRates& rates, const AgeGrid& grid) {
    std::vector<double> G(grid.n_nodes), H(grid.n_nodes);
    for (int j = 0; j < grid.n_nodes; ++j) {
        double a = grid.node(j);
        G[j] = -gains.alpha1_tilde[j] + g_func(a, rates, grid);
        H[j] = -gains.alpha2_tilde[j] + h_func(a, rates, grid);
    }
    return {G, H};
}

/** Full practical PIDE law: feedback, latched switch-off on int I, then
 *  nonnegative saturation. */
inline ControlPolicy make_pide_closed_loop_policy(const VitalRates& rates, const PideGains& gains,
                                                  const AgeGrid& grid,
                                                  std::shared_ptr<SwitchOffLatch> latch) {
    return [&rates, gains, grid, latch](const FieldState& state) {
        double int_I = trapezoid(state.I, grid.da());
        if (latch->latched() || !latch->engaged(int_I))
            return std::vector<double>(grid.n_nodes, 0.0);
        return saturate_nonneg(pide_feedback(state, rates, gains, grid));
    };
}

} // namespace agesir

#endif
