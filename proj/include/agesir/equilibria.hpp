#ifndef AGESIR_EQUILIBRIA_HPP
#define AGESIR_EQUILIBRIA_HPP

#include <cmath>
#include <string>
#include <vector>

#include "agesir/age_grid.hpp"
#include "agesir/demography.hpp"
#include "agesir/quadrature.hpp"

namespace agesir {

/** Gamma(b) = exp(-int_0^b gamma). */
inline double gamma_survival(double b, const VitalRates& rates) {
    if (b < 0.0) throw std::domain_error("gamma_survival: negative age");
    return std::exp(-integrate(rates.gamma, 0.0, b));
}

/** Basic reproduction number
 *      R(0) = int_0^L c(b) Gamma(b) int_0^b beta(sigma)/Gamma(sigma)
 *                 exp(-int_0^sigma Theta*) dsigma db.
 *
 *  The ratio Gamma(b)/Gamma(sigma) is evaluated as exp(-int_sigma^b gamma)
 *  in a single exponential; for gamma = 100 the direct division underflows.
 *  The double integral is grid-sensitive (the inner kernel decays on the
 *  1/gamma scale), so it is evaluated on an internal refinement of the age
 *  grid with at least 1000 nodes.
 */
inline double basic_reproduction_number(const VitalRates& rates, std::span<const double> theta_star,
                                        const AgeGrid& grid) {
    for (double th : theta_star)
        if (th < 0.0) throw std::invalid_argument("basic_reproduction_number: negative Theta*");

    int n = std::max(grid.n_nodes, 1000);
    AgeGrid fine(grid.max_age, n);
    double da = fine.da();
    double clamp = grid.clamp_age();

    std::vector<double> c(n), beta(n), gam(n), th(n);
    double mu_cum = 0.0;
    for (int j = 0; j < n; ++j) {
        double a = std::min(fine.node(j), clamp);
        if (j > 0)
            mu_cum += mortality_integral(rates, std::min(fine.node(j - 1), clamp), a, clamp);
        c[j] = rates.birth_rate * std::exp(-mu_cum / rates.alpha_units);
        beta[j] = rates.beta(a);
        gam[j] = rates.gamma(a);
        th[j] = theta_star.empty() ? 0.0 : detail::interp_profile(theta_star, grid, fine.node(j));
    }
    std::vector<double> gam_cum = cumulative_trapezoid(gam, da);
    std::vector<double> th_cum = cumulative_trapezoid(th, da);

    std::vector<double> inner(n, 0.0), integrand(n);
    std::vector<double> outer(n);
    for (int b = 0; b < n; ++b) {
        for (int s = 0; s <= b; ++s)
            integrand[s] = beta[s] * std::exp(-(gam_cum[b] - gam_cum[s]) - th_cum[s]);
        inner[b] = trapezoid(std::span<const double>(integrand.data(), b + 1), da);
        outer[b] = c[b] * inner[b];
    }
    return trapezoid(outer, da);
}

/** Disease-free equilibrium: s*(a) = exp(-int_0^a Theta*), i* = 0. */
inline std::pair<std::vector<double>, std::vector<double>>
disease_free_equilibrium(std::span<const double> theta_star, const AgeGrid& grid) {
    std::vector<double> th(grid.n_nodes, 0.0);
    if (!theta_star.empty()) {
        if (static_cast<int>(theta_star.size()) != grid.n_nodes)
            throw std::invalid_argument("disease_free_equilibrium: profile/grid mismatch");
        th.assign(theta_star.begin(), theta_star.end());
    }
    for (double v : th)
        if (v < 0.0) throw std::invalid_argument("disease_free_equilibrium: negative Theta*");
    std::vector<double> cum = cumulative_trapezoid(th, grid.da());
    std::vector<double> s_star(grid.n_nodes);
    for (int j = 0; j < grid.n_nodes; ++j) s_star[j] = std::exp(-cum[j]);
    return {s_star, std::vector<double>(grid.n_nodes, 0.0)};
}

enum class StabilityClass { dfe_stable, dfe_unstable_endemic_stable };

inline StabilityClass classify_stability(double R0) {
    if (!(R0 >= 0.0) || !std::isfinite(R0))
        throw std::invalid_argument("classify_stability: R0 must be finite and nonnegative");
    return R0 <= 1.0 ? StabilityClass::dfe_stable : StabilityClass::dfe_unstable_endemic_stable;
}

inline std::string to_string(StabilityClass c) {
    return c == StabilityClass::dfe_stable ? "DFE-stable" : "DFE-unstable-endemic-stable";
}

struct EquilibriumReport {
    double R0;
    std::vector<double> dfe_s;
    std::vector<double> dfe_i;
    bool endemic_exists;
    StabilityClass classification;
};

inline EquilibriumReport equilibrium_report(const VitalRates& rates,
                                            std::span<const double> theta_star,
                                            const AgeGrid& grid) {
    EquilibriumReport rep;
    rep.R0 = basic_reproduction_number(rates, theta_star, grid);
    auto [s_star, i_star] = disease_free_equilibrium(theta_star, grid);
    rep.dfe_s = std::move(s_star);
    rep.dfe_i = std::move(i_star);
    rep.classification = classify_stability(rep.R0);
    rep.endemic_exists = rep.R0 > 1.0;
    return rep;
}

} // namespace agesir

#endif
