#pragma once

// Seeded random scenario generators shared by the unit and acceptance
// suites. Everything is deterministic given the engine state.

#include <algorithm>
#include <random>
#include <vector>

#include "km/market.hpp"

namespace kmtest {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Random piecewise-linear rate function on [0, r0] with 3..6 breakpoints,
/// nonnegative values, and guaranteed positive mass.
inline km::CompactRateFunction random_rate(std::mt19937_64& rng,
                                           double r0_lo = 0.5,
                                           double r0_hi = 2.0,
                                           double value_hi = 2.0) {
    const int n = 3 + int(uniform(rng, 0.0, 3.999));
    const double r0 = uniform(rng, r0_lo, r0_hi);
    std::vector<double> gaps(n - 1);
    double total = 0.0;
    for (double& g : gaps) {
        g = 0.05 + uniform(rng, 0.0, 1.0);
        total += g;
    }
    std::vector<double> bp{0.0};
    double acc = 0.0;
    for (int i = 0; i + 1 < n - 1; ++i) {
        acc += gaps[i] / total * r0;
        bp.push_back(acc);
    }
    bp.push_back(r0);
    std::vector<double> vals(bp.size());
    for (auto& v : vals) v = uniform(rng, 0.0, value_hi);
    vals.front() = std::max(vals.front(), 0.2);  // keep the mass positive
    vals.back() = 0.0;
    return km::CompactRateFunction(bp, vals);
}

/// Random kernel scaled to the requested total mass.
inline km::CompactRateFunction random_kernel(std::mt19937_64& rng,
                                             double mass) {
    km::CompactRateFunction raw = random_rate(rng, 0.4, 1.5, 1.0);
    const double m = raw.integral();
    return km::CompactRateFunction::scaled(raw, mass / m);
}

inline km::MarketParams random_market(std::mt19937_64& rng,
                                      bool with_mu = true) {
    km::MarketParams p;
    p.v_plus = -uniform(rng, 0.3, 2.5);
    p.v_minus = uniform(rng, 0.3, 2.5);
    p.lambda_plus = random_rate(rng);
    p.lambda_minus = random_rate(rng);
    if (with_mu) {
        p.mu_plus = random_rate(rng, 0.3, 1.5, 1.5);
        p.mu_minus = random_rate(rng, 0.3, 1.5, 1.5);
    }
    return p;
}

/// Attaches recycling kernels with masses drawn from [0.05, mass_hi];
/// masses below 1 keep the contraction factors below 1 as well.
inline void add_random_kernels(km::MarketParams& p, std::mt19937_64& rng,
                               double mass_hi = 0.85) {
    p.p_minus_plus = random_kernel(rng, uniform(rng, 0.05, mass_hi));
    p.p_plus_minus = random_kernel(rng, uniform(rng, 0.05, mass_hi));
}

} // namespace kmtest
