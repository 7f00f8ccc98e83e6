#ifndef AGESIR_AGE_GRID_HPP
#define AGESIR_AGE_GRID_HPP

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace agesir {

/** Uniform half-open age grid on [0, max_age): nodes a_j = j*da, j = 0..n_nodes-1.
 *
 *  The right endpoint is excluded so that coefficients with a singularity at
 *  the maximum age (e.g. the built-in mortality) stay finite on every node.
 */
struct AgeGrid {
    double max_age;
    int n_nodes;

    AgeGrid(double L, int n) : max_age(L), n_nodes(n) {
        if (!(L > 0.0)) throw std::invalid_argument("AgeGrid: max_age must be positive");
        if (n < 2) throw std::invalid_argument("AgeGrid: need at least 2 nodes");
    }

    double da() const { return max_age / n_nodes; }
    double node(int j) const { return j * da(); }
    /** Last grid node; age-dependent coefficients are clamped here. */
    double clamp_age() const { return node(n_nodes - 1); }

    std::vector<double> nodes() const {
        std::vector<double> a(n_nodes);
        for (int j = 0; j < n_nodes; ++j) a[j] = node(j);
        return a;
    }

    bool contains(double a) const { return a >= 0.0 && a < max_age; }

    void require_inside(double a, const char* what) const {
        if (!contains(a))
            throw std::domain_error(std::string(what) + ": age " + std::to_string(a) +
                                    " outside [0, " + std::to_string(max_age) + ")");
    }
};

namespace detail {

/** Linear interpolation of a node profile, clamped at both ends. */
inline double interp_profile(std::span<const double> v, const AgeGrid& grid, double a) {
    if (v.empty()) return 0.0;
    double x = a / grid.da();
    int j = static_cast<int>(std::floor(x));
    if (j < 0) return v.front();
    if (j + 1 >= static_cast<int>(v.size())) return v.back();
    double w = x - j;
    return (1.0 - w) * v[j] + w * v[j + 1];
}

} // namespace detail

} // namespace agesir

#endif
