#pragma once

#include <cstddef>
#include <vector>

#include "km/market.hpp"
#include "km/quadrature.hpp"

namespace km {

/// Thresholds and integral constants of one market, all computed by
/// quadrature at the given absolute tolerance. lambda_hat_plus equals
/// sigma_plus (and likewise for minus); both names are kept because the
/// single-market and network formulations use them in different roles.
struct CriticalConstants {
    double gamma_cr_plus = 0.0;   // minimal boundary density, (+) profile
    double gamma_cr_minus = 0.0;  // minimal boundary density, (-) profile
    double gamma_cr = 0.0;        // fixed-point threshold on gamma_plus
    double lambda_hat_plus = 0.0;
    double lambda_hat_minus = 0.0;
    double sigma_plus = 0.0;   // -v_plus * gamma_cr_plus
    double sigma_minus = 0.0;  // v_minus * gamma_cr_minus
    double alpha_mp = 0.0;     // recycling contraction, (-) -> (+)
    double alpha_pm = 0.0;     // recycling contraction, (+) -> (-)
    double gamma_hat_cr = 0.0; // fixed-point threshold with recycling
    // Exponent functions F_plus / F_minus tabulated on exponent_grid.
    std::vector<double> exponent_grid;
    std::vector<double> f_plus;
    std::vector<double> f_minus;
};

/// Throws RecyclingTooStrong when either alpha reaches 1.
CriticalConstants critical_constants(const MarketParams& p,
                                     double tol = kQuadratureTol);

/// Closed-form stationary/fixed-point density pair tabulated on a uniform
/// grid. beta = 0 for fixed points. Mass integrals cover [0, r_max]; the
/// tail levels are the analytic limits of the profiles at large r, and the
/// profile has finite total mass iff both vanish.
struct EquilibriumProfile {
    std::vector<double> grid;
    std::vector<double> rho_plus;
    std::vector<double> rho_minus;
    double gamma_plus = 0.0;
    double gamma_minus = 0.0;
    double beta = 0.0;
    bool finite_mass = false;
    double mass_plus = 0.0;
    double mass_minus = 0.0;
    double tail_plus = 0.0;
    double tail_minus = 0.0;
};

struct GridSpec {
    double r_max = 3.0;
    double dr = 1e-3;
};

inline constexpr double kFiniteMassTol = 1e-9;
inline constexpr double kThresholdBand = 1e-12;

struct FixedPointResult {
    bool exists = false;
    double threshold = 0.0;  // the critical density that gated the result
    EquilibriumProfile profile;
};

FixedPointResult fixed_point_single(const MarketParams& p, double gamma_plus,
                                    GridSpec grid = {},
                                    double tol = kQuadratureTol);

enum class Phase { Plus, Minus };

struct BelowCritical {
    Phase phase;
    double gamma;
    double required;
};

struct StationaryPointResult {
    bool admissible = false;
    BelowCritical violation{};  // set when not admissible
    EquilibriumProfile profile;
};

StationaryPointResult stationary_point_single(const MarketParams& p,
                                              double gamma_plus,
                                              double gamma_minus,
                                              GridSpec grid = {},
                                              double tol = kQuadratureTol);

FixedPointResult fixed_point_recycling(const MarketParams& p,
                                       double gamma_plus, GridSpec grid = {},
                                       double tol = kQuadratureTol);

/// Unique finite-mass stationary point of the recycling market. The
/// boundary velocity solves a quadratic flux-balance equation; when its
/// leading coefficient vanishes (relative to ~1e-12) the linear branch is
/// used. Throws RootSelectionAmbiguous on numerically degenerate root
/// configurations and NegativeGamma if a boundary density comes out
/// nonpositive (a bug detector; the model guarantees positivity).
struct RecyclingStationaryResult {
    EquilibriumProfile profile;
    bool linear_branch = false;
    double quad_a = 0.0;
    double quad_b = 0.0;
    double quad_c = 0.0;
    double quad_residual = 0.0;     // |a b^2 + b beta + c| at the root
    double balance_residual = 0.0;  // relative error of the third balance
};

RecyclingStationaryResult stationary_point_recycling(
    const MarketParams& p, GridSpec grid = {}, double tol = kQuadratureTol);

using Matrix = std::vector<std::vector<double>>;

/// Per-market arrival constants and routing matrices A[k][m] (flux leaving
/// market k, absorbed into market m, weighted by the destination's exponent
/// function). Throws SubstochasticityViolated unless every row sum is <= 1
/// and at least one is strictly below 1.
struct NetworkConstants {
    std::vector<double> lambda_hat_plus;
    std::vector<double> lambda_hat_minus;
    Matrix a_mp;
    Matrix a_pm;
};

NetworkConstants network_constants(const NetworkSpec& spec,
                                   double tol = kQuadratureTol);

/// Least componentwise solution of
///   s_m >= lambda_hat_plus_m  + sum_k s_k A_mp[k][m]
///   s_m >= lambda_hat_minus_m + sum_k s_k A_pm[k][m]
/// above the componentwise start max(lambda_hat_plus, lambda_hat_minus),
/// found by monotone iteration run to a machine-level fixed point.
/// Reports infeasible when the iteration diverges or fails to settle.
struct InequalitySolution {
    bool feasible = false;
    std::vector<double> s;
    long iterations = 0;
    double final_change = 0.0;
};

InequalitySolution solve_network_inequalities(
    const std::vector<double>& lambda_hat_plus,
    const std::vector<double>& lambda_hat_minus, const Matrix& a_mp,
    const Matrix& a_pm);

/// Network fixed point for a given positive solution s of the inequality
/// system (re-verified internally; throws InequalitiesViolated on failure).
std::vector<EquilibriumProfile> fixed_point_network(
    const NetworkSpec& spec, const std::vector<double>& s, GridSpec grid = {},
    double tol = kQuadratureTol);

/// Central-difference residuals of a tabulated profile substituted into the
/// stationary balance system. Grid points whose stencil straddles a
/// breakpoint of any rate function are skipped (the densities are only
/// piecewise smooth there, so a pointwise residual is not meaningful).
struct ResidualReport {
    double max_residual_plus = 0.0;
    double max_residual_minus = 0.0;
    double boundary_balance = 0.0;
    std::size_t points_checked = 0;
};

ResidualReport verify_equilibrium(const EquilibriumProfile& profile,
                                  const MarketParams& p);
ResidualReport verify_equilibrium_recycling(const EquilibriumProfile& profile,
                                            const MarketParams& p);
ResidualReport verify_equilibrium_network(
    const std::vector<EquilibriumProfile>& profiles, const NetworkSpec& spec);

} // namespace km
