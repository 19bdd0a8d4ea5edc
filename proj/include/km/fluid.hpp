#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "km/kernels.hpp"
#include "km/market.hpp"
#include "km/velocity_profile.hpp"

namespace km {

/// How the boundary densities rho_pm(0) are read off the first cells.
enum class BoundaryExtraction { FirstCell, TwoCellExtrapolation };

struct FluidOptions {
    BoundaryExtraction extraction = BoundaryExtraction::FirstCell;
    ExecMode exec = ExecMode::Auto;
    double degenerate_eps = 1e-12;  // boundary-density sum below this is 0/0
    double cfl_safety = 0.9;
};

/// Cell-averaged densities on a uniform radial grid r in [0, r_max], in the
/// frame attached to the boundary (r = 0 is the annihilation face). b is
/// reconstructed by integrating the boundary velocity.
struct FluidState {
    double dr = 1e-3;
    std::vector<double> rho_plus;
    std::vector<double> rho_minus;
    double b = 0.0;
    double beta = 0.0;
    double t = 0.0;
    bool degenerate_boundary = false;

    std::size_t cells() const { return rho_plus.size(); }
    double r_center(std::size_t i) const { return (double(i) + 0.5) * dr; }
    double r_max() const { return dr * double(cells()); }
    double mass_plus() const;
    double mass_minus() const;
};

FluidState make_fluid_state(double dr, std::size_t cells);

/// Tabulates a density function at cell centers.
void fill_density(std::vector<double>& rho, double dr,
                  const std::function<double(double)>& f);

/// Far-field horizon: support radius plus the distance mass can travel in
/// t_end plus a margin. Nothing beyond this returns to the boundary.
double recommended_r_max(const MarketParams& p, double t_end,
                         double margin = 0.5);

struct BoundaryDensities {
    double gamma_plus = 0.0;
    double gamma_minus = 0.0;
};
BoundaryDensities boundary_densities(const FluidState& s,
                                     BoundaryExtraction extraction);

struct BoundaryVelocity {
    double beta = 0.0;
    bool degenerate = false;  // both boundary densities at zero
};

/// Flux-balance boundary velocity for delta velocities:
/// beta = (rho_plus(0) v_plus + rho_minus(0) v_minus) / (rho_plus(0) + rho_minus(0)).
/// When the denominator is below eps any velocity in [v_plus, v_minus] moves
/// zero mass; the midpoint is returned with the degenerate flag set.
BoundaryVelocity boundary_velocity(double rho_plus_0, double rho_minus_0,
                                   double v_plus, double v_minus,
                                   double eps = 1e-12);

/// General flux balance: bisects g(beta) = inflow(+) - inflow(-) over
/// [-v0, v0]. g is nondecreasing; where it is flat the smallest balancing
/// velocity in the bracket is returned. Throws NoMassAtBoundary when both
/// profiles are identically zero.
double boundary_velocity_general(const VelocityProfile& f_plus,
                                 const VelocityProfile& f_minus);

/// Per-step discrete mass accounting. All terms are the sums actually used
/// by the update, so the closure error is pure floating-point noise.
struct MassBudget {
    double annihilated_plus = 0.0;
    double annihilated_minus = 0.0;
    double deaths_plus = 0.0;
    double deaths_minus = 0.0;
    double arrivals_plus = 0.0;
    double arrivals_minus = 0.0;
    double recycled_plus = 0.0;
    double recycled_minus = 0.0;
    double delta_plus = 0.0;
    double delta_minus = 0.0;

    double closure_error() const;
    double throughput() const;
    MassBudget& operator+=(const MassBudget& o);
};

struct StepInfo {
    double beta = 0.0;
    double nu = 0.0;  // annihilation flux feeding the recycling sources
    bool degenerate = false;
    MassBudget budget;
};

/// Single-market stepper with cell-center rate tables built once. Handles
/// both the plain and the recycling dynamics (absent kernels mean none).
/// const and safe to share across threads; states advance independently.
class FluidSolver {
  public:
    FluidSolver(MarketParams params, double dr, std::size_t cells,
                FluidOptions opt = {});

    const MarketParams& params() const { return params_; }
    const FluidOptions& options() const { return opt_; }
    double dr() const { return dr_; }
    std::size_t cells() const { return n_; }

    FluidState make_state() const { return make_fluid_state(dr_, n_); }

    StepInfo step(FluidState& s, double dt) const;

    /// Largest dt honoring the CFL condition for any admissible beta.
    double max_stable_dt() const;

    double annihilation_flux(const FluidState& s) const;

  private:
    friend class NetworkFluidSolver;

    MarketParams params_;
    FluidOptions opt_;
    double dr_;
    std::size_t n_;
    double max_mu_ = 0.0;
    std::vector<double> lambda_plus_, lambda_minus_, mu_plus_, mu_minus_;
    std::vector<double> kernel_mp_, kernel_pm_;  // empty when absent
    bool has_kernels_ = false;

    StepInfo step_with_sources(FluidState& s, double dt,
                               const std::vector<double>& src_plus,
                               const std::vector<double>& src_minus,
                               double beta, bool degenerate, double nu,
                               int market_tag) const;
};

struct NetworkFluidState {
    std::vector<FluidState> markets;
    double t = 0.0;
};

/// Synchronous network stepper. Cross-market sources use start-of-step
/// boundary data of all markets, so markets within a step can advance in
/// parallel without changing the result.
class NetworkFluidSolver {
  public:
    NetworkFluidSolver(NetworkSpec spec, double dr, std::size_t cells,
                       FluidOptions opt = {});

    const NetworkSpec& spec() const { return spec_; }
    std::size_t size() const { return markets_.size(); }
    const FluidSolver& market(std::size_t m) const { return markets_[m]; }

    NetworkFluidState make_state() const;
    std::vector<StepInfo> step(NetworkFluidState& s, double dt) const;
    double max_stable_dt() const;

  private:
    NetworkSpec spec_;
    FluidOptions opt_;
    double dr_;
    std::size_t n_;
    std::vector<FluidSolver> markets_;
    // kernel_mp_[k][m]: cell table of the kernel routing market k's flux
    // into market m's (+) phase; empty vector when absent.
    std::vector<std::vector<std::vector<double>>> kernel_mp_, kernel_pm_;
};

// One-shot spec-surface wrappers around the solver classes.
StepInfo step_single(FluidState& s, const MarketParams& p, double dt,
                     const FluidOptions& opt = {});
StepInfo step_recycling(FluidState& s, const MarketParams& p, double dt,
                        const FluidOptions& opt = {});
std::vector<StepInfo> step_network(NetworkFluidState& s,
                                   const NetworkSpec& spec, double dt,
                                   const FluidOptions& opt = {});
double annihilation_flux(const FluidState& s, const MarketParams& p,
                         const FluidOptions& opt = {});

} // namespace km
