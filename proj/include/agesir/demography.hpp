#ifndef AGESIR_DEMOGRAPHY_HPP
#define AGESIR_DEMOGRAPHY_HPP

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "agesir/age_grid.hpp"
#include "agesir/quadrature.hpp"

namespace agesir {

using RateFn = std::function<double(double)>;

/** Age-dependent demographic and epidemic coefficients.
 *
 *  Derivative slots may be empty; consumers that need d/da (the PIDE gain
 *  functions) fall back to centered finite differences.
 */
struct VitalRates {
    RateFn mu;       // per-capita mortality
    RateFn beta;     // transmission coefficient
    RateFn gamma;    // recovery rate
    double birth_rate = 0.0;
    double alpha_units = 1.0; // time/age balancing coefficient

    RateFn d_mu;     // optional analytic derivatives
    RateFn d_beta;
    RateFn d_gamma;

    void validate(const AgeGrid& grid) const {
        if (!(birth_rate > 0.0)) throw std::invalid_argument("VitalRates: birth rate must be positive");
        if (!(alpha_units > 0.0)) throw std::invalid_argument("VitalRates: alpha_units must be positive");
        for (int j = 0; j < grid.n_nodes; ++j) {
            double a = grid.node(j);
            if (mu(a) < 0.0 || beta(a) < 0.0 || gamma(a) < 0.0)
                throw std::invalid_argument("VitalRates: negative coefficient at a=" + std::to_string(a));
        }
    }
};

namespace builtin {

constexpr double kMaxAge = 1.0;

/** mu(a) = 1 / (10 (1-a)^2), singular at a = 1. */
inline double mortality_rate(double a) {
    if (a < 0.0 || a >= kMaxAge) throw std::domain_error("mortality_rate: age outside [0, 1)");
    double d = 1.0 - a;
    return 1.0 / (10.0 * d * d);
}

inline double d_mortality_rate(double a) {
    double d = 1.0 - a;
    return 0.2 / (d * d * d);
}

/** Survivorship l(a) = exp(-a / (10 (1-a))). */
inline double survival_function(double a) {
    if (a < 0.0 || a >= kMaxAge) throw std::domain_error("survival_function: age outside [0, 1)");
    return std::exp(-a / (10.0 * (1.0 - a)));
}

/** beta(a) = beta0 (sin(a) e^{-2a} + 1/100). */
inline double transmission_rate(double a, double beta0) {
    if (a < 0.0 || a >= kMaxAge) throw std::domain_error("transmission_rate: age outside [0, 1)");
    if (!(beta0 > 0.0)) throw std::invalid_argument("transmission_rate: beta0 must be positive");
    return beta0 * (std::sin(a) * std::exp(-2.0 * a) + 0.01);
}

inline double d_transmission_rate(double a, double beta0) {
    return beta0 * std::exp(-2.0 * a) * (std::cos(a) - 2.0 * std::sin(a));
}

} // namespace builtin

/** B = 1 / integral of l over the grid (composite trapezoid on the nodes). */
inline double birth_rate_normalizing(const RateFn& survival, const AgeGrid& grid) {
    std::vector<double> l(grid.n_nodes);
    for (int j = 0; j < grid.n_nodes; ++j) {
        l[j] = survival(grid.node(j));
        if (!std::isfinite(l[j]))
            throw std::runtime_error("birth_rate_normalizing: non-finite survival at node " + std::to_string(j));
    }
    double integral = trapezoid(l, grid.da());
    if (!(integral > 0.0)) throw std::runtime_error("birth_rate_normalizing: degenerate survival integral");
    return 1.0 / integral;
}

/** Built-in "okuwa-like" parameter profile; B is normalized on the supplied grid. */
inline VitalRates okuwa_like_rates(double beta0, const AgeGrid& grid) {
    VitalRates r;
    double clamp = grid.clamp_age();
    r.mu = [clamp](double a) { return builtin::mortality_rate(std::min(a, clamp)); };
    r.gamma = [](double) { return 100.0; };
    r.beta = [beta0](double a) { return builtin::transmission_rate(a, beta0); };
    r.d_mu = [clamp](double a) { return builtin::d_mortality_rate(std::min(a, clamp)); };
    r.d_gamma = [](double) { return 0.0; };
    r.d_beta = [beta0](double a) { return builtin::d_transmission_rate(a, beta0); };
    r.birth_rate = birth_rate_normalizing([](double a) { return builtin::survival_function(a); }, grid);
    r.alpha_units = 1.0;
    return r;
}

/** Integral of mu over [x0, x1], clamped so the integrand stays finite. */
inline double mortality_integral(const VitalRates& rates, double x0, double x1, double clamp) {
    auto f = [&](double a) { return rates.mu(std::min(a, clamp)); };
    return integrate(f, x0, x1);
}

/** Total-population density by characteristics.
 *
 *  P(t,a) = B exp(-(1/alpha) int_0^a mu)                for t >= a/alpha,
 *           P0(a - alpha t) exp(-(1/alpha) int_{a-at}^a mu)  otherwise.
 */
inline double population_density(double t, double a, const RateFn& P0, const VitalRates& rates,
                                 const AgeGrid& grid) {
    if (t < 0.0) throw std::domain_error("population_density: negative time");
    grid.require_inside(a, "population_density");
    double alpha = rates.alpha_units;
    double clamp = grid.clamp_age();
    if (t * alpha >= a)
        return rates.birth_rate * std::exp(-mortality_integral(rates, 0.0, a, clamp) / alpha);
    double a0 = a - alpha * t;
    return P0(a0) * std::exp(-mortality_integral(rates, a0, a, clamp) / alpha);
}

/** Stationary limit density c(a) = B exp(-(1/alpha) int_0^a mu) = B l(a). */
inline double stationary_density(double a, const VitalRates& rates, const AgeGrid& grid) {
    grid.require_inside(a, "stationary_density");
    return rates.birth_rate *
           std::exp(-mortality_integral(rates, 0.0, a, grid.clamp_age()) / rates.alpha_units);
}

/** Stationary density sampled on the grid nodes. */
inline std::vector<double> stationary_density_profile(const VitalRates& rates, const AgeGrid& grid) {
    std::vector<double> c(grid.n_nodes);
    for (int j = 0; j < grid.n_nodes; ++j) c[j] = stationary_density(grid.node(j), rates, grid);
    return c;
}

} // namespace agesir

#endif
