#pragma once

#include <string>
#include <vector>

#include "km/equilibria.hpp"
#include "km/fluid.hpp"
#include "km/scenario.hpp"

namespace km {

struct CheckResult {
    std::string name;
    bool passed = false;
    double measured = 0.0;
    double threshold = 0.0;
    std::string detail;
};

/// Initializes a solver state from a node-tabulated profile (linear
/// interpolation onto cell centers).
void load_equilibrium(FluidState& s, const EquilibriumProfile& prof);

/// Tier-appropriate closed-form equilibrium for a scenario; gamma_plus < 0
/// requests the critical density itself.
struct ScenarioEquilibrium {
    std::vector<EquilibriumProfile> profiles;  // one per market
    double gamma_plus = 0.0;
};
ScenarioEquilibrium scenario_equilibrium(const Scenario& s, GridSpec grid);

/// Fluid drift when started at the closed-form equilibrium: sup-norm
/// density drift and the largest |beta| seen over the run.
std::vector<CheckResult> check_persistence(const Scenario& s);

/// Stationary-system residuals for the scenario's equilibrium, including
/// the second-order scaling between dr and dr/2.
std::vector<CheckResult> check_residuals(const Scenario& s);

/// Particle-vs-fluid comparison over the configured intensity ladder:
/// fitted log-log slope of the L1 density distance, the boundary-position
/// agreement, and the per-bin normal-error band.
std::vector<CheckResult> check_particle_fluid(const Scenario& s);

/// Cumulative mass-budget audit of a full fluid run of the scenario.
std::vector<CheckResult> check_conservation(const Scenario& s);

/// Everything applicable to the scenario's tier and configuration.
std::vector<CheckResult> run_validation(const Scenario& s);

std::string format_check_line(const CheckResult& r);

} // namespace km
