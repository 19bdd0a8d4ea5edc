#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "km/fluid.hpp"
#include "km/market.hpp"

namespace km {

inline constexpr const char* kVersion = "1.0.0";

enum class ModelTier { Free, Single, Recycling, Network };

const char* tier_name(ModelTier tier);

/// Separable Gaussian component of a phase-space function.
struct GaussianBump {
    double amplitude = 1.0;
    double x_center = 0.0;
    double x_sigma = 1.0;
    double v_center = 0.0;
    double v_sigma = 1.0;
};

double eval_bumps(const std::vector<GaussianBump>& bumps, double x, double v);

struct FreeScenario {
    double x_min = -3.0;
    double x_max = 3.0;
    std::size_t nx = 400;
    double v0 = 1.0;
    std::size_t nv = 16;
    std::vector<GaussianBump> f0;
    std::vector<GaussianBump> lambda;
    std::vector<GaussianBump> mu;
};

struct InitialConditions {
    CompactRateFunction rho_plus;   // radial tabulation, mass per unit r
    CompactRateFunction rho_minus;
    double b = 0.0;
};

struct Numerics {
    double dr = 1e-3;
    double dt = 0.0;     // 0: derived from the CFL limit
    double t_end = 1.0;
    double r_max = 0.0;  // 0: derived from supports and the horizon
    std::uint64_t seed = 1;
    std::size_t replicas = 1;
    std::size_t sample_every = 10;
    double intensity = 1000.0;  // particle-engine density scale
    double bin_width = 0.05;
    BoundaryExtraction extraction = BoundaryExtraction::FirstCell;
};

struct ValidationConfig {
    bool persistence = true;          // fluid drift at the closed-form profile
    bool residuals = true;            // stationary-system residual check
    std::vector<double> n_ladder;     // particle-engine intensity ladder
    std::size_t replicas = 16;
    double drift_tol = 1e-3;
    double beta_tol = 1e-6;
    double slope_lo = -0.7;
    double slope_hi = -0.3;
    double residual_tol = 1e-5;
    double gamma_plus = -1.0;  // <0: use the computed critical density
    double window = 0.25;      // trailing time window for density averages
};

struct Scenario {
    ModelTier tier = ModelTier::Single;
    MarketParams market;
    NetworkSpec network;
    std::vector<InitialConditions> initial;  // one entry, or one per market
    FreeScenario free_field;
    Numerics numerics;
    ValidationConfig validation;
    std::string out_dir = "out";
    nlohmann::json raw;

    const MarketParams& market_at(std::size_t m) const;
    std::size_t market_count() const;
    /// Effective grid extent / time step after applying the derivation
    /// rules for zero-valued entries.
    double effective_r_max() const;
    double effective_dt() const;
    /// Largest admissible dt for the configured grid, independent of any
    /// dt the scenario pins.
    double cfl_dt_limit() const;
};

/// Collects every violation instead of stopping at the first.
std::vector<std::string> validate_scenario_json(const nlohmann::json& j);

/// Parses and validates; throws ConfigError carrying all violations
/// (newline separated) when the document is invalid.
Scenario parse_scenario(const nlohmann::json& j);
Scenario load_scenario(const std::string& path);

/// FNV-1a hash of the canonical (sorted-key) serialization.
std::uint64_t config_hash(const nlohmann::json& j);

/// Provenance record written next to every artifact set.
nlohmann::json run_manifest(const Scenario& s, const std::string& command,
                            double wall_seconds);

nlohmann::json rate_to_json(const CompactRateFunction& f);
CompactRateFunction rate_from_json(const nlohmann::json& j);

} // namespace km
