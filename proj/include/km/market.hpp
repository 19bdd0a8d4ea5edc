#pragma once

#include <optional>
#include <string>
#include <vector>

#include "km/rate_function.hpp"

namespace km {

/// Parameters of one elementary market. Sellers (+) live at x >= b and
/// drift down (v_plus < 0); buyers (-) live at x < b and drift up
/// (v_minus > 0). Rates depend on the distance r = |x - b| only.
struct MarketParams {
    double v_plus = -1.0;
    double v_minus = 1.0;
    CompactRateFunction lambda_plus;   // arrival intensity, (+) phase
    CompactRateFunction lambda_minus;  // arrival intensity, (-) phase
    CompactRateFunction mu_plus;       // death rate, (+) phase
    CompactRateFunction mu_minus;      // death rate, (-) phase
    // Recycling kernels; absent means no recycling for that direction.
    std::optional<CompactRateFunction> p_minus_plus;  // annihilated (-) -> (+)
    std::optional<CompactRateFunction> p_plus_minus;  // annihilated (+) -> (-)

    bool has_recycling() const {
        return p_minus_plus.has_value() || p_plus_minus.has_value();
    }
    /// Largest support radius over all rate functions.
    double support_radius() const;
};

/// All invariant violations (empty result means the market is valid).
std::vector<std::string> validate_market(const MarketParams& p);

/// Kernels routing annihilation flux from one market into another.
/// Same-sign transitions are not representable by construction.
struct RoutingKernels {
    std::optional<CompactRateFunction> minus_plus;  // into the (+) phase
    std::optional<CompactRateFunction> plus_minus;  // into the (-) phase
};

/// A set of elementary markets plus routing kernels. routing[k][m] carries
/// the part of market k's annihilation flux reinjected into market m;
/// an empty routing matrix means no coupling.
struct NetworkSpec {
    std::vector<MarketParams> markets;
    std::vector<std::vector<RoutingKernels>> routing;

    std::size_t size() const { return markets.size(); }
    const CompactRateFunction* kernel_minus_plus(std::size_t k,
                                                 std::size_t m) const;
    const CompactRateFunction* kernel_plus_minus(std::size_t k,
                                                 std::size_t m) const;
};

std::vector<std::string> validate_network(const NetworkSpec& spec);

} // namespace km
