#include "km/equilibria.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "km/errors.hpp"

namespace km {

namespace {

// Exact exponent function F(r) = scale * integral of mu over [0, r];
// mu is piecewise linear so the prefix integral is closed-form.
struct ExponentFn {
    const CompactRateFunction* mu;
    double scale;  // -1/v_plus for (+), 1/v_minus for (-); both positive

    double operator()(double r) const {
        return scale * mu->prefix_integral(r);
    }
    double limit() const { return scale * mu->integral(); }
};

std::vector<double> merge_knots(
    std::initializer_list<const CompactRateFunction*> fns) {
    std::vector<double> knots;
    for (const auto* f : fns) {
        if (!f) continue;
        knots.insert(knots.end(), f->breakpoints().begin(),
                     f->breakpoints().end());
    }
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
    return knots;
}

double weighted_integral(const CompactRateFunction& weight,
                         const ExponentFn& exponent,
                         const std::vector<double>& knots, double tol) {
    const double upper = weight.support_radius();
    if (upper <= 0.0) return 0.0;
    return integrate_with_knots(
        [&](double x) { return weight(x) * std::exp(-exponent(x)); }, 0.0,
        upper, knots, tol);
}

std::vector<double> uniform_grid(double r_max, double dr) {
    const std::size_t n = static_cast<std::size_t>(std::llround(r_max / dr));
    std::vector<double> grid(n + 1);
    for (std::size_t i = 0; i <= n; ++i) grid[i] = double(i) * dr;
    return grid;
}

// rho(r) = exp(F(r)) * (head - scale * C(r)), C(r) = cumulative integral of
// integrand(x) * exp(-F(x)). The bracket is nonincreasing, so its limit is
// the profile's residual level at large r.
struct BuiltProfile {
    std::vector<double> values;
    double tail_level;
};

template <typename Integrand>
BuiltProfile build_profile(const std::vector<double>& grid,
                           const ExponentFn& exponent, double head,
                           double scale, const Integrand& integrand,
                           double integrand_support,
                           const std::vector<double>& knots, double tol) {
    BuiltProfile out;
    const auto cumulative = cumulative_integral(
        [&](double x) { return integrand(x) * std::exp(-exponent(x)); }, grid,
        knots, tol);
    out.values.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double v = std::exp(exponent(grid[i])) * (head - scale * cumulative[i]);
        if (v < 0.0 && v > -1e-8) v = 0.0;
        out.values[i] = v;
    }
    double full = cumulative.back();
    if (integrand_support > grid.back()) {
        full += integrate_with_knots(
            [&](double x) { return integrand(x) * std::exp(-exponent(x)); },
            grid.back(), integrand_support, knots, tol);
    }
    out.tail_level = std::exp(exponent.limit()) * (head - scale * full);
    return out;
}

double trapezoid_mass(const std::vector<double>& grid,
                      const std::vector<double>& values) {
    double m = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        m += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
    }
    return m;
}

void finish_profile(EquilibriumProfile& prof) {
    prof.mass_plus = trapezoid_mass(prof.grid, prof.rho_plus);
    prof.mass_minus = trapezoid_mass(prof.grid, prof.rho_minus);
    prof.finite_mass = std::abs(prof.tail_plus) < kFiniteMassTol &&
                       std::abs(prof.tail_minus) < kFiniteMassTol;
}

const CompactRateFunction& kernel_or_zero(
    const std::optional<CompactRateFunction>& k) {
    static const CompactRateFunction zero = CompactRateFunction::zero();
    return k ? *k : zero;
}

} // namespace

CriticalConstants critical_constants(const MarketParams& p, double tol) {
    CriticalConstants cc;
    const ExponentFn f_plus{&p.mu_plus, -1.0 / p.v_plus};
    const ExponentFn f_minus{&p.mu_minus, 1.0 / p.v_minus};

    const auto knots_plus = merge_knots({&p.lambda_plus, &p.mu_plus});
    const auto knots_minus = merge_knots({&p.lambda_minus, &p.mu_minus});
    cc.lambda_hat_plus = weighted_integral(p.lambda_plus, f_plus, knots_plus,
                                           tol);
    cc.lambda_hat_minus = weighted_integral(p.lambda_minus, f_minus,
                                            knots_minus, tol);
    cc.gamma_cr_plus = cc.lambda_hat_plus / (-p.v_plus);
    cc.gamma_cr_minus = cc.lambda_hat_minus / p.v_minus;
    cc.sigma_plus = cc.lambda_hat_plus;
    cc.sigma_minus = cc.lambda_hat_minus;
    cc.gamma_cr = std::max(cc.gamma_cr_plus,
                           p.v_minus * cc.gamma_cr_minus / (-p.v_plus));

    if (p.p_minus_plus) {
        cc.alpha_mp = weighted_integral(
            *p.p_minus_plus, f_plus,
            merge_knots({&*p.p_minus_plus, &p.mu_plus}), tol);
    }
    if (p.p_plus_minus) {
        cc.alpha_pm = weighted_integral(
            *p.p_plus_minus, f_minus,
            merge_knots({&*p.p_plus_minus, &p.mu_minus}), tol);
    }
    if (cc.alpha_mp >= 1.0 || cc.alpha_pm >= 1.0) {
        throw RecyclingTooStrong(
            "critical_constants: recycling contraction factor >= 1 "
            "(alpha_mp = " + std::to_string(cc.alpha_mp) +
            ", alpha_pm = " + std::to_string(cc.alpha_pm) + ")");
    }
    cc.gamma_hat_cr =
        std::max(cc.gamma_cr_plus / (1.0 - cc.alpha_mp),
                 p.v_minus * cc.gamma_cr_minus /
                     (-p.v_plus * (1.0 - cc.alpha_pm)));

    const double r_hi =
        std::max({p.mu_plus.support_radius(), p.mu_minus.support_radius(),
                  1.0});
    cc.exponent_grid = uniform_grid(r_hi, r_hi / 256.0);
    cc.f_plus.resize(cc.exponent_grid.size());
    cc.f_minus.resize(cc.exponent_grid.size());
    for (std::size_t i = 0; i < cc.exponent_grid.size(); ++i) {
        cc.f_plus[i] = f_plus(cc.exponent_grid[i]);
        cc.f_minus[i] = f_minus(cc.exponent_grid[i]);
    }
    return cc;
}

namespace {

// Shared closed-form tabulation for every tier. The recycling sources are
// rolled into the integrands; src coefficients are 0 for the plain market.
EquilibriumProfile build_pair(const MarketParams& p, double gamma_plus,
                              double gamma_minus, double beta,
                              double src_coeff_plus, double src_coeff_minus,
                              GridSpec grid, double tol) {
    const ExponentFn f_plus{&p.mu_plus, -1.0 / p.v_plus};
    const ExponentFn f_minus{&p.mu_minus, 1.0 / p.v_minus};
    const CompactRateFunction& ker_mp = kernel_or_zero(p.p_minus_plus);
    const CompactRateFunction& ker_pm = kernel_or_zero(p.p_plus_minus);

    auto integrand_plus = [&](double x) {
        return p.lambda_plus(x) + src_coeff_plus * ker_mp(x);
    };
    auto integrand_minus = [&](double x) {
        return p.lambda_minus(x) + src_coeff_minus * ker_pm(x);
    };
    const double support_plus =
        std::max(p.lambda_plus.support_radius(), ker_mp.support_radius());
    const double support_minus =
        std::max(p.lambda_minus.support_radius(), ker_pm.support_radius());

    EquilibriumProfile prof;
    prof.grid = uniform_grid(grid.r_max, grid.dr);
    prof.gamma_plus = gamma_plus;
    prof.gamma_minus = gamma_minus;
    prof.beta = beta;

    auto plus = build_profile(prof.grid, f_plus, gamma_plus, -1.0 / p.v_plus,
                              integrand_plus, support_plus,
                              merge_knots({&p.lambda_plus, &p.mu_plus,
                                           &ker_mp}),
                              tol);
    auto minus = build_profile(prof.grid, f_minus, gamma_minus,
                               1.0 / p.v_minus, integrand_minus, support_minus,
                               merge_knots({&p.lambda_minus, &p.mu_minus,
                                            &ker_pm}),
                               tol);
    prof.rho_plus = std::move(plus.values);
    prof.rho_minus = std::move(minus.values);
    prof.tail_plus = plus.tail_level;
    prof.tail_minus = minus.tail_level;
    finish_profile(prof);
    return prof;
}

} // namespace

FixedPointResult fixed_point_single(const MarketParams& p, double gamma_plus,
                                    GridSpec grid, double tol) {
    MarketParams plain = p;
    plain.p_minus_plus.reset();
    plain.p_plus_minus.reset();
    const CriticalConstants cc = critical_constants(plain, tol);
    FixedPointResult res;
    res.threshold = cc.gamma_cr;
    if (gamma_plus < cc.gamma_cr - kThresholdBand) {
        return res;
    }
    res.exists = true;
    const double gamma_minus = -p.v_plus * gamma_plus / p.v_minus;
    res.profile =
        build_pair(plain, gamma_plus, gamma_minus, 0.0, 0.0, 0.0, grid, tol);
    return res;
}

StationaryPointResult stationary_point_single(const MarketParams& p,
                                              double gamma_plus,
                                              double gamma_minus,
                                              GridSpec grid, double tol) {
    MarketParams plain = p;
    plain.p_minus_plus.reset();
    plain.p_plus_minus.reset();
    const CriticalConstants cc = critical_constants(plain, tol);
    StationaryPointResult res;
    if (gamma_plus < cc.gamma_cr_plus - kThresholdBand) {
        res.violation = {Phase::Plus, gamma_plus, cc.gamma_cr_plus};
        return res;
    }
    if (gamma_minus < cc.gamma_cr_minus - kThresholdBand) {
        res.violation = {Phase::Minus, gamma_minus, cc.gamma_cr_minus};
        return res;
    }
    res.admissible = true;
    const double beta = (gamma_plus * p.v_plus + gamma_minus * p.v_minus) /
                        (gamma_plus + gamma_minus);
    res.profile =
        build_pair(plain, gamma_plus, gamma_minus, beta, 0.0, 0.0, grid, tol);
    return res;
}

FixedPointResult fixed_point_recycling(const MarketParams& p,
                                       double gamma_plus, GridSpec grid,
                                       double tol) {
    const CriticalConstants cc = critical_constants(p, tol);
    FixedPointResult res;
    res.threshold = cc.gamma_hat_cr;
    if (gamma_plus < cc.gamma_hat_cr - kThresholdBand) {
        return res;
    }
    res.exists = true;
    const double gamma_minus = -p.v_plus * gamma_plus / p.v_minus;
    // At a fixed point the reinjection flux equals -v_plus * gamma_plus.
    const double s = -p.v_plus * gamma_plus;
    res.profile = build_pair(p, gamma_plus, gamma_minus, 0.0, s, s, grid, tol);
    return res;
}

RecyclingStationaryResult stationary_point_recycling(const MarketParams& p,
                                                     GridSpec grid,
                                                     double tol) {
    const CriticalConstants cc = critical_constants(p, tol);
    const double vp = p.v_plus;
    const double vm = p.v_minus;
    const double a = cc.sigma_plus * cc.alpha_pm - cc.sigma_minus * cc.alpha_mp;
    const double quad_a = -a;
    const double quad_b =
        a * (vp + vm) + cc.sigma_minus * vp - cc.sigma_plus * vm;
    const double quad_c = -vp * vm * (a + cc.sigma_minus - cc.sigma_plus);

    const double branch_scale =
        std::max({std::abs(cc.sigma_plus * cc.alpha_pm),
                  std::abs(cc.sigma_minus * cc.alpha_mp), 1.0});

    RecyclingStationaryResult res;
    res.quad_a = quad_a;
    res.quad_b = quad_b;
    res.quad_c = quad_c;

    double beta;
    if (std::abs(a) <= 1e-12 * branch_scale) {
        res.linear_branch = true;
        const double denom = cc.sigma_minus / vm - cc.sigma_plus / vp;
        if (denom == 0.0) {
            throw RootSelectionAmbiguous(
                "stationary_point_recycling: all flux constants vanish; the "
                "boundary velocity is undetermined");
        }
        beta = (cc.sigma_minus - cc.sigma_plus) / denom;
    } else {
        const double disc = quad_b * quad_b - 4.0 * quad_a * quad_c;
        if (disc < 0.0) {
            throw RootSelectionAmbiguous(
                "stationary_point_recycling: negative discriminant");
        }
        const double sq = std::sqrt(disc);
        const double q =
            -0.5 * (quad_b + std::copysign(sq, quad_b));
        double roots[2];
        int n_roots = 0;
        if (q != 0.0) {
            roots[n_roots++] = quad_c / q;
            roots[n_roots++] = q / quad_a;
        } else {
            roots[n_roots++] = 0.0;
            roots[n_roots++] = -quad_b / quad_a;
        }
        const double eps = 1e-12 * (vm - vp);
        int inside = 0;
        beta = 0.0;
        for (int i = 0; i < n_roots; ++i) {
            if (roots[i] > vp + eps && roots[i] < vm - eps) {
                ++inside;
                beta = roots[i];
            }
        }
        if (inside != 1) {
            throw RootSelectionAmbiguous(
                "stationary_point_recycling: " + std::to_string(inside) +
                " admissible roots in (v_plus, v_minus)");
        }
    }
    res.quad_residual =
        std::abs((quad_a * beta + quad_b) * beta + quad_c);

    const double gamma_plus =
        cc.sigma_plus / (-vp * (1.0 - cc.alpha_mp) - beta * cc.alpha_mp);
    const double gamma_minus =
        cc.sigma_minus / (vm * (1.0 - cc.alpha_pm) + beta * cc.alpha_pm);
    if (!(gamma_plus > 0.0) || !(gamma_minus > 0.0)) {
        throw NegativeGamma(
            "stationary_point_recycling: boundary density not positive "
            "(gamma_plus = " + std::to_string(gamma_plus) +
            ", gamma_minus = " + std::to_string(gamma_minus) + ")");
    }
    const double flux_minus = (vm - beta) * gamma_minus;
    const double flux_plus = -(vp - beta) * gamma_plus;
    res.balance_residual = std::abs(flux_minus - flux_plus) /
                           std::max({std::abs(flux_minus),
                                     std::abs(flux_plus), 1e-300});
    if (res.balance_residual > 1e-8) {
        throw RootSelectionAmbiguous(
            "stationary_point_recycling: flux balance residual " +
            std::to_string(res.balance_residual));
    }
    res.profile = build_pair(p, gamma_plus, gamma_minus, beta, flux_minus,
                             flux_plus, grid, tol);
    return res;
}

NetworkConstants network_constants(const NetworkSpec& spec, double tol) {
    const std::size_t v = spec.size();
    NetworkConstants nc;
    nc.lambda_hat_plus.resize(v);
    nc.lambda_hat_minus.resize(v);
    nc.a_mp.assign(v, std::vector<double>(v, 0.0));
    nc.a_pm.assign(v, std::vector<double>(v, 0.0));
    for (std::size_t m = 0; m < v; ++m) {
        const MarketParams& p = spec.markets[m];
        const ExponentFn f_plus{&p.mu_plus, -1.0 / p.v_plus};
        const ExponentFn f_minus{&p.mu_minus, 1.0 / p.v_minus};
        nc.lambda_hat_plus[m] = weighted_integral(
            p.lambda_plus, f_plus, merge_knots({&p.lambda_plus, &p.mu_plus}),
            tol);
        nc.lambda_hat_minus[m] = weighted_integral(
            p.lambda_minus, f_minus,
            merge_knots({&p.lambda_minus, &p.mu_minus}), tol);
        for (std::size_t k = 0; k < v; ++k) {
            if (const auto* f = spec.kernel_minus_plus(k, m)) {
                nc.a_mp[k][m] = weighted_integral(
                    *f, f_plus, merge_knots({f, &p.mu_plus}), tol);
            }
            if (const auto* f = spec.kernel_plus_minus(k, m)) {
                nc.a_pm[k][m] = weighted_integral(
                    *f, f_minus, merge_knots({f, &p.mu_minus}), tol);
            }
        }
    }
    for (const Matrix* mat : {&nc.a_mp, &nc.a_pm}) {
        bool strict = false;
        for (std::size_t k = 0; k < v; ++k) {
            double row = 0.0;
            for (std::size_t m = 0; m < v; ++m) row += (*mat)[k][m];
            if (row > 1.0 + 1e-12) {
                throw SubstochasticityViolated(
                    "network_constants: routing row " + std::to_string(k) +
                    " has weighted mass " + std::to_string(row) + " > 1");
            }
            if (row < 1.0 - 1e-12) strict = true;
        }
        if (!strict) {
            throw SubstochasticityViolated(
                "network_constants: every routing row has weighted mass 1; "
                "at least one must be strictly below 1");
        }
    }
    return nc;
}

InequalitySolution solve_network_inequalities(
    const std::vector<double>& lambda_hat_plus,
    const std::vector<double>& lambda_hat_minus, const Matrix& a_mp,
    const Matrix& a_pm) {
    const std::size_t v = lambda_hat_plus.size();
    InequalitySolution sol;
    std::vector<double> s(v);
    bool all_zero = true;
    for (std::size_t m = 0; m < v; ++m) {
        s[m] = std::max(lambda_hat_plus[m], lambda_hat_minus[m]);
        if (s[m] > 0.0) all_zero = false;
    }
    if (all_zero) {
        s.assign(v, 1e-12);  // keep the canonical solution strictly positive
    }
    const std::vector<double> floor = s;

    auto column = [v](const Matrix& mat, const std::vector<double>& x,
                      std::size_t m) {
        double acc = 0.0;
        if (!mat.empty()) {
            for (std::size_t k = 0; k < v; ++k) acc += x[k] * mat[k][m];
        }
        return acc;
    };

    const long cap = 1000000;
    const double diverge_bound = 1e15;
    std::vector<double> next(v);
    for (sol.iterations = 0; sol.iterations < cap; ++sol.iterations) {
        double change = 0.0;
        double norm = 0.0;
        for (std::size_t m = 0; m < v; ++m) {
            const double t1 = lambda_hat_plus[m] + column(a_mp, s, m);
            const double t2 = lambda_hat_minus[m] + column(a_pm, s, m);
            next[m] = std::max({t1, t2, floor[m]});
            change = std::max(change, std::abs(next[m] - s[m]));
            norm = std::max(norm, std::abs(next[m]));
        }
        s.swap(next);
        sol.final_change = change;
        if (norm > diverge_bound) {
            sol.feasible = false;
            sol.s = s;
            return sol;
        }
        if (change <= 1e-15 * std::max(1.0, norm)) {
            sol.feasible = true;
            sol.s = s;
            return sol;
        }
    }
    sol.feasible = false;  // iteration cap without settling
    sol.s = s;
    return sol;
}

std::vector<EquilibriumProfile> fixed_point_network(const NetworkSpec& spec,
                                                    const std::vector<double>& s,
                                                    GridSpec grid, double tol) {
    const std::size_t v = spec.size();
    if (s.size() != v) {
        throw InequalitiesViolated(
            "fixed_point_network: parameter vector size mismatch");
    }
    const NetworkConstants nc = network_constants(spec, tol);
    for (std::size_t m = 0; m < v; ++m) {
        if (!(s[m] > 0.0)) {
            throw InequalitiesViolated(
                "fixed_point_network: s[" + std::to_string(m) +
                "] must be positive");
        }
        double lhs_plus = nc.lambda_hat_plus[m];
        double lhs_minus = nc.lambda_hat_minus[m];
        for (std::size_t k = 0; k < v; ++k) {
            lhs_plus += s[k] * nc.a_mp[k][m];
            lhs_minus += s[k] * nc.a_pm[k][m];
        }
        const double slack = 1e-9 * std::max(1.0, s[m]);
        if (s[m] + slack < lhs_plus || s[m] + slack < lhs_minus) {
            throw InequalitiesViolated(
                "fixed_point_network: s[" + std::to_string(m) +
                "] violates the feasibility inequalities");
        }
    }

    std::vector<EquilibriumProfile> out;
    out.reserve(v);
    for (std::size_t m = 0; m < v; ++m) {
        const MarketParams& p = spec.markets[m];
        const ExponentFn f_plus{&p.mu_plus, -1.0 / p.v_plus};
        const ExponentFn f_minus{&p.mu_minus, 1.0 / p.v_minus};

        std::vector<const CompactRateFunction*> mp_kernels(v, nullptr);
        std::vector<const CompactRateFunction*> pm_kernels(v, nullptr);
        for (std::size_t k = 0; k < v; ++k) {
            mp_kernels[k] = spec.kernel_minus_plus(k, m);
            pm_kernels[k] = spec.kernel_plus_minus(k, m);
        }
        auto integrand_plus = [&](double x) {
            double val = p.lambda_plus(x);
            for (std::size_t k = 0; k < v; ++k) {
                if (mp_kernels[k]) val += s[k] * (*mp_kernels[k])(x);
            }
            return val;
        };
        auto integrand_minus = [&](double x) {
            double val = p.lambda_minus(x);
            for (std::size_t k = 0; k < v; ++k) {
                if (pm_kernels[k]) val += s[k] * (*pm_kernels[k])(x);
            }
            return val;
        };
        double support_plus = p.lambda_plus.support_radius();
        double support_minus = p.lambda_minus.support_radius();
        std::vector<double> knots_plus = merge_knots({&p.lambda_plus,
                                                      &p.mu_plus});
        std::vector<double> knots_minus = merge_knots({&p.lambda_minus,
                                                       &p.mu_minus});
        for (std::size_t k = 0; k < v; ++k) {
            if (mp_kernels[k]) {
                support_plus =
                    std::max(support_plus, mp_kernels[k]->support_radius());
                knots_plus.insert(knots_plus.end(),
                                  mp_kernels[k]->breakpoints().begin(),
                                  mp_kernels[k]->breakpoints().end());
            }
            if (pm_kernels[k]) {
                support_minus =
                    std::max(support_minus, pm_kernels[k]->support_radius());
                knots_minus.insert(knots_minus.end(),
                                   pm_kernels[k]->breakpoints().begin(),
                                   pm_kernels[k]->breakpoints().end());
            }
        }
        std::sort(knots_plus.begin(), knots_plus.end());
        knots_plus.erase(std::unique(knots_plus.begin(), knots_plus.end()),
                         knots_plus.end());
        std::sort(knots_minus.begin(), knots_minus.end());
        knots_minus.erase(std::unique(knots_minus.begin(), knots_minus.end()),
                          knots_minus.end());

        EquilibriumProfile prof;
        prof.grid = uniform_grid(grid.r_max, grid.dr);
        prof.gamma_plus = s[m] / (-p.v_plus);
        prof.gamma_minus = s[m] / p.v_minus;
        prof.beta = 0.0;

        auto plus = build_profile(prof.grid, f_plus, prof.gamma_plus,
                                  -1.0 / p.v_plus, integrand_plus,
                                  support_plus, knots_plus, tol);
        auto minus = build_profile(prof.grid, f_minus, prof.gamma_minus,
                                   1.0 / p.v_minus, integrand_minus,
                                   support_minus, knots_minus, tol);
        prof.rho_plus = std::move(plus.values);
        prof.rho_minus = std::move(minus.values);
        prof.tail_plus = plus.tail_level;
        prof.tail_minus = minus.tail_level;
        finish_profile(prof);
        out.push_back(std::move(prof));
    }
    return out;
}

namespace {

template <typename SrcPlus, typename SrcMinus>
ResidualReport residual_core(const EquilibriumProfile& prof,
                             const MarketParams& p, const SrcPlus& src_plus,
                             const SrcMinus& src_minus,
                             const std::vector<double>& knots_plus,
                             const std::vector<double>& knots_minus) {
    ResidualReport rep;
    const auto& g = prof.grid;
    const std::size_t n = g.size();
    auto has_knot_inside = [](const std::vector<double>& knots, double lo,
                              double hi) {
        auto it = std::upper_bound(knots.begin(), knots.end(), lo);
        return it != knots.end() && *it < hi;
    };
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double lo = g[i - 1];
        const double hi = g[i + 1];
        const double r = g[i];
        const double two_dr = hi - lo;
        if (!has_knot_inside(knots_plus, lo, hi)) {
            const double d =
                (prof.rho_plus[i + 1] - prof.rho_plus[i - 1]) / two_dr;
            const double res = -p.v_plus * d - p.mu_plus(r) * prof.rho_plus[i] +
                               p.lambda_plus(r) + src_plus(r);
            rep.max_residual_plus =
                std::max(rep.max_residual_plus, std::abs(res));
            ++rep.points_checked;
        }
        if (!has_knot_inside(knots_minus, lo, hi)) {
            const double d =
                (prof.rho_minus[i + 1] - prof.rho_minus[i - 1]) / two_dr;
            const double res = p.v_minus * d -
                               p.mu_minus(r) * prof.rho_minus[i] +
                               p.lambda_minus(r) + src_minus(r);
            rep.max_residual_minus =
                std::max(rep.max_residual_minus, std::abs(res));
        }
    }
    rep.boundary_balance =
        std::abs((p.v_minus - prof.beta) * prof.gamma_minus +
                 (p.v_plus - prof.beta) * prof.gamma_plus);
    return rep;
}

} // namespace

ResidualReport verify_equilibrium(const EquilibriumProfile& prof,
                                  const MarketParams& p) {
    return residual_core(
        prof, p, [](double) { return 0.0; }, [](double) { return 0.0; },
        merge_knots({&p.lambda_plus, &p.mu_plus}),
        merge_knots({&p.lambda_minus, &p.mu_minus}));
}

ResidualReport verify_equilibrium_recycling(const EquilibriumProfile& prof,
                                            const MarketParams& p) {
    const CompactRateFunction& ker_mp = kernel_or_zero(p.p_minus_plus);
    const CompactRateFunction& ker_pm = kernel_or_zero(p.p_plus_minus);
    const double coeff_plus = (p.v_minus - prof.beta) * prof.gamma_minus;
    const double coeff_minus = -(p.v_plus - prof.beta) * prof.gamma_plus;
    return residual_core(
        prof, p, [&](double r) { return coeff_plus * ker_mp(r); },
        [&](double r) { return coeff_minus * ker_pm(r); },
        merge_knots({&p.lambda_plus, &p.mu_plus, &ker_mp}),
        merge_knots({&p.lambda_minus, &p.mu_minus, &ker_pm}));
}

ResidualReport verify_equilibrium_network(
    const std::vector<EquilibriumProfile>& profiles, const NetworkSpec& spec) {
    ResidualReport worst;
    const std::size_t v = spec.size();
    for (std::size_t m = 0; m < v; ++m) {
        const MarketParams& p = spec.markets[m];
        std::vector<double> s(v, 0.0);
        for (std::size_t k = 0; k < v; ++k) {
            s[k] = -spec.markets[k].v_plus * profiles[k].gamma_plus;
        }
        std::vector<double> knots_plus = merge_knots({&p.lambda_plus,
                                                      &p.mu_plus});
        std::vector<double> knots_minus = merge_knots({&p.lambda_minus,
                                                       &p.mu_minus});
        for (std::size_t k = 0; k < v; ++k) {
            if (const auto* f = spec.kernel_minus_plus(k, m)) {
                knots_plus.insert(knots_plus.end(), f->breakpoints().begin(),
                                  f->breakpoints().end());
            }
            if (const auto* f = spec.kernel_plus_minus(k, m)) {
                knots_minus.insert(knots_minus.end(),
                                   f->breakpoints().begin(),
                                   f->breakpoints().end());
            }
        }
        std::sort(knots_plus.begin(), knots_plus.end());
        std::sort(knots_minus.begin(), knots_minus.end());
        auto rep = residual_core(
            profiles[m], p,
            [&](double r) {
                double val = 0.0;
                for (std::size_t k = 0; k < v; ++k) {
                    if (const auto* f = spec.kernel_minus_plus(k, m)) {
                        val += s[k] * (*f)(r);
                    }
                }
                return val;
            },
            [&](double r) {
                double val = 0.0;
                for (std::size_t k = 0; k < v; ++k) {
                    if (const auto* f = spec.kernel_plus_minus(k, m)) {
                        val += s[k] * (*f)(r);
                    }
                }
                return val;
            },
            knots_plus, knots_minus);
        worst.max_residual_plus =
            std::max(worst.max_residual_plus, rep.max_residual_plus);
        worst.max_residual_minus =
            std::max(worst.max_residual_minus, rep.max_residual_minus);
        worst.boundary_balance =
            std::max(worst.boundary_balance, rep.boundary_balance);
        worst.points_checked += rep.points_checked;
    }
    return worst;
}

} // namespace km
