#ifndef AGESIR_QUADRATURE_HPP
#define AGESIR_QUADRATURE_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace agesir {

/** Composite trapezoid of uniformly spaced samples. */
inline double trapezoid(std::span<const double> values, double dx) {
    if (values.size() < 2) return 0.0;
    double sum = 0.5 * (values.front() + values.back());
    for (std::size_t j = 1; j + 1 < values.size(); ++j) sum += values[j];
    return sum * dx;
}

/** Trapezoid of the pointwise product of two fields on the same grid. */
inline double trapezoid_product(std::span<const double> f, std::span<const double> g, double dx) {
    if (f.size() != g.size()) throw std::invalid_argument("trapezoid_product: length mismatch");
    if (f.size() < 2) return 0.0;
    double sum = 0.5 * (f.front() * g.front() + f.back() * g.back());
    for (std::size_t j = 1; j + 1 < f.size(); ++j) sum += f[j] * g[j];
    return sum * dx;
}

/** Running trapezoid: out[j] = integral of samples over [x_0, x_j]. */
inline std::vector<double> cumulative_trapezoid(std::span<const double> values, double dx) {
    std::vector<double> out(values.size(), 0.0);
    for (std::size_t j = 1; j < values.size(); ++j)
        out[j] = out[j - 1] + 0.5 * (values[j - 1] + values[j]) * dx;
    return out;
}

namespace detail {
inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double fa, double fm, double fb, double whole, double tol,
                                   int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) < 15.0 * tol) return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}
} // namespace detail

/** Adaptive Simpson quadrature for smooth coefficient functions.
 *
 *  Used where a pointwise-accurate integral of an analytic rate is needed
 *  (survival, characteristics, gamma attenuation). Field integrals on the age
 *  grid use the composite trapezoid above instead, so that they stay
 *  consistent with the transport scheme.
 */
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-10, int max_depth = 40) {
    if (a == b) return 0.0;
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    if (!std::isfinite(fa) || !std::isfinite(fb) || !std::isfinite(fm))
        throw std::domain_error("integrate: non-finite integrand");
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

} // namespace agesir

#endif
