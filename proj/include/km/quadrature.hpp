#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "km/errors.hpp"

namespace km {

inline constexpr double kQuadratureTol = 1e-10;

namespace detail {

// Adaptive Simpson with Richardson correction. Exact for polynomials of
// degree <= 3 on a single panel, so the first whole-vs-halves comparison
// terminates immediately for cubics.
template <typename F>
double adaptive_simpson(const F& f, double a, double b, double fa, double fm,
                        double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double err = (left + right - whole) / 15.0;
    if (std::abs(err) <= tol) {
        return left + right + err;
    }
    if (depth <= 0) {
        throw IntegrationError("integrate: subdivision limit reached");
    }
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

} // namespace detail

/// Integrate f over [a, b] to absolute tolerance tol.
/// Throws IntegrationError when the subdivision limit is reached.
template <typename F>
double integrate(const F& f, double a, double b, double tol = kQuadratureTol,
                 int max_depth = 60) {
    if (a == b) return 0.0;
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

/// Integrate over [a, b] splitting at the given knots (kinks of the
/// integrand). Knots outside (a, b) are ignored; they need not be sorted.
template <typename F>
double integrate_with_knots(const F& f, double a, double b,
                            std::vector<double> knots,
                            double tol = kQuadratureTol, int max_depth = 60) {
    if (a == b) return 0.0;
    knots.push_back(a);
    knots.push_back(b);
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
    double total = 0.0;
    bool inside = false;
    double prev = a;
    for (double k : knots) {
        if (k <= a) continue;
        if (k > b) break;
        if (!inside) {
            prev = a;
            inside = true;
        }
        if (k > prev) {
            total += integrate(f, prev, k, tol, max_depth);
            prev = k;
        }
    }
    if (!inside) {
        return integrate(f, a, b, tol, max_depth);
    }
    if (prev < b) total += integrate(f, prev, b, tol, max_depth);
    return total;
}

/// Cumulative integral of f along sorted grid points, splitting each segment
/// at the interior knots. Returns values aligned with grid; result[0] is the
/// integral from 0 (or grid.front()) to grid[0], taken as 0 when the grid
/// starts at the lower limit.
template <typename F>
std::vector<double> cumulative_integral(const F& f,
                                        const std::vector<double>& grid,
                                        const std::vector<double>& knots,
                                        double tol = kQuadratureTol) {
    std::vector<double> out(grid.size(), 0.0);
    if (grid.empty()) return out;
    std::vector<double> sorted_knots(knots);
    std::sort(sorted_knots.begin(), sorted_knots.end());
    const double span = grid.back() - grid.front();
    double acc = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double a = grid[i - 1];
        const double b = grid[i];
        const double local_tol =
            span > 0.0 ? std::max(tol * (b - a) / span, 1e-16) : tol;
        std::vector<double> inner;
        for (double k : sorted_knots) {
            if (k > a && k < b) inner.push_back(k);
        }
        acc += integrate_with_knots(f, a, b, inner, local_tol);
        out[i] = acc;
    }
    return out;
}

} // namespace km
