#pragma once

#include <stdexcept>
#include <string>

namespace km {

// Numerical failures that abort a computation. Expected model outcomes
// (no fixed point, below-critical density, infeasible inequality system)
// are returned as data, not thrown.

struct IntegrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CflError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoMassAtBoundary : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RecyclingTooStrong : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RootSelectionAmbiguous : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NegativeGamma : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SubstochasticityViolated : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InequalitiesViolated : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace km
