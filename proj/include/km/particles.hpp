#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "km/market.hpp"
#include "km/rate_function.hpp"

namespace km {

/// Finite two-phase particle configuration. Positions are kept sorted
/// ascending; every (-) particle is strictly left of every (+) particle
/// after a step. b is the leftmost (+) position while that phase is
/// populated, and stays frozen at its last value otherwise.
struct ParticleEnsemble {
    std::vector<double> plus_positions;
    std::vector<double> minus_positions;
    double b = 0.0;
    double t = 0.0;
    std::mt19937_64 rng;

    bool plus_empty() const { return plus_positions.empty(); }
    std::size_t n_plus() const { return plus_positions.size(); }
    std::size_t n_minus() const { return minus_positions.size(); }
};

struct AnnihilationEvent {
    double t;
    double x;
};

struct StepStats {
    std::size_t arrivals_plus = 0;
    std::size_t arrivals_minus = 0;
    std::size_t deaths_plus = 0;
    std::size_t deaths_minus = 0;
    std::size_t annihilations = 0;
    std::size_t recycled_plus = 0;
    std::size_t recycled_minus = 0;
    bool plus_phase_empty = false;
    std::vector<AnnihilationEvent> events;
};

struct ParticleOptions {
    std::size_t max_sweep_events = 1000000;  // runaway-cascade guard
};

/// One time step: Poisson arrivals at radius drawn from the normalized
/// arrival intensity, exponential thinning at the start-of-step radius,
/// ballistic advection, then an annihilation sweep resolving boundary
/// crossings in collision-time order. With recycling kernels present each
/// annihilation reinjects, with probability equal to the kernel mass, a
/// particle of the opposite phase at a kernel-distributed radius from the
/// collision point.
class ParticleSimulator {
  public:
    explicit ParticleSimulator(MarketParams params, ParticleOptions opt = {});

    const MarketParams& params() const { return params_; }
    StepStats step(ParticleEnsemble& e, double dt) const;

  private:
    MarketParams params_;
    ParticleOptions opt_;
    PiecewiseLinearSampler arrivals_plus_;
    PiecewiseLinearSampler arrivals_minus_;
    PiecewiseLinearSampler recycle_plus_;   // radius of reinjected (+)
    PiecewiseLinearSampler recycle_minus_;  // radius of reinjected (-)
    double recycle_prob_plus_ = 0.0;
    double recycle_prob_minus_ = 0.0;
    bool mu_plus_zero_ = true;
    bool mu_minus_zero_ = true;
};

StepStats step_particles(ParticleEnsemble& e, const MarketParams& p,
                         double dt, const ParticleOptions& opt = {});

/// Per-phase histogram of radii |x - b| with the given bin width. Densities
/// are counts per unit r. n_bins = 0 sizes the histogram to the data.
struct EmpiricalDensity {
    double bin_width = 0.0;
    std::vector<double> plus;
    std::vector<double> minus;
};
EmpiricalDensity empirical_density(const ParticleEnsemble& e,
                                   double bin_width, std::size_t n_bins = 0);

struct DensitySnapshot {
    double t;
    EmpiricalDensity density;
};

struct SimTrajectory {
    std::vector<double> times;
    std::vector<double> b;
    std::vector<std::size_t> n_plus;
    std::vector<std::size_t> n_minus;
    std::vector<AnnihilationEvent> events;
    std::vector<DensitySnapshot> densities;
    // Closed or still-open stretches with no (+) particles (b frozen).
    std::vector<std::pair<double, double>> empty_plus_episodes;
    std::size_t total_arrivals_plus = 0;
    std::size_t total_arrivals_minus = 0;
    std::size_t total_deaths_plus = 0;
    std::size_t total_deaths_minus = 0;
    std::size_t total_annihilations = 0;
    std::size_t total_recycled_plus = 0;
    std::size_t total_recycled_minus = 0;
};

/// Initial Poisson clouds: counts ~ Poisson(intensity * mass(rho)), radii
/// distributed like the tabulated densities, placed at b0 +- r.
struct InitialDensitySpec {
    CompactRateFunction rho_plus;
    CompactRateFunction rho_minus;
    double b0 = 0.0;
};

struct ParticleRunConfig {
    double intensity = 1.0;  // density and arrival-rate scale
    std::uint64_t seed = 0;
    double t_end = 1.0;
    double dt = 1e-3;
    std::size_t sample_every = 10;  // steps between trajectory samples
    double bin_width = 0.05;
    std::size_t n_bins = 0;  // 0: size histograms to the data
};

/// Deterministic for a fixed seed. Arrival intensities are scaled by
/// config.intensity; death rates and recycling kernels are not.
SimTrajectory run_particles(const MarketParams& p,
                            const InitialDensitySpec& init,
                            const ParticleRunConfig& config,
                            const ParticleOptions& opt = {});

} // namespace km
