#include "km/particles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace km {

namespace {

double uniform01(std::mt19937_64& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

std::size_t poisson_count(std::mt19937_64& rng, double mean) {
    if (mean <= 0.0) return 0;
    std::poisson_distribution<long> dist(mean);
    const long n = dist(rng);
    return n > 0 ? static_cast<std::size_t>(n) : 0;
}

void sorted_insert(std::vector<double>& v, double x) {
    v.insert(std::upper_bound(v.begin(), v.end(), x), x);
}

} // namespace

ParticleSimulator::ParticleSimulator(MarketParams params, ParticleOptions opt)
    : params_(std::move(params)),
      opt_(opt),
      arrivals_plus_(params_.lambda_plus),
      arrivals_minus_(params_.lambda_minus),
      recycle_plus_(params_.p_minus_plus ? *params_.p_minus_plus
                                         : CompactRateFunction::zero()),
      recycle_minus_(params_.p_plus_minus ? *params_.p_plus_minus
                                          : CompactRateFunction::zero()) {
    recycle_prob_plus_ = recycle_plus_.total_mass();
    recycle_prob_minus_ = recycle_minus_.total_mass();
    mu_plus_zero_ = params_.mu_plus.is_zero();
    mu_minus_zero_ = params_.mu_minus.is_zero();
}

StepStats ParticleSimulator::step(ParticleEnsemble& e, double dt) const {
    StepStats stats;
    const double t0 = e.t;
    const double b0 = e.b;
    auto& plus = e.plus_positions;
    auto& minus = e.minus_positions;

    // 1) Poisson arrivals, placed at the start-of-step boundary.
    {
        const std::size_t n_new =
            poisson_count(e.rng, dt * arrivals_plus_.total_mass());
        for (std::size_t i = 0; i < n_new; ++i) {
            const double r = arrivals_plus_.sample(uniform01(e.rng));
            sorted_insert(plus, b0 + r);
        }
        stats.arrivals_plus = n_new;
        const std::size_t m_new =
            poisson_count(e.rng, dt * arrivals_minus_.total_mass());
        for (std::size_t i = 0; i < m_new; ++i) {
            const double r = arrivals_minus_.sample(uniform01(e.rng));
            sorted_insert(minus, b0 - r);
        }
        stats.arrivals_minus = m_new;
    }

    // 2) Exponential thinning at the start-of-step radius.
    auto thin = [&](std::vector<double>& xs, const CompactRateFunction& mu,
                    std::size_t& died) {
        std::size_t kept = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double rate = mu(std::abs(xs[i] - b0));
            bool survives = true;
            if (rate > 0.0) {
                survives = uniform01(e.rng) <= std::exp(-rate * dt);
            }
            if (survives) {
                xs[kept++] = xs[i];
            } else {
                ++died;
            }
        }
        xs.resize(kept);
    };
    if (!mu_plus_zero_) thin(plus, params_.mu_plus, stats.deaths_plus);
    if (!mu_minus_zero_) thin(minus, params_.mu_minus, stats.deaths_minus);

    // 3) Ballistic advection (order-preserving within each phase).
    for (double& x : plus) x += params_.v_plus * dt;
    for (double& x : minus) x += params_.v_minus * dt;

    // 4) Annihilation sweep. The current leftmost (+) / rightmost (-) pair
    // has the smallest gap, hence the earliest crossing time within the
    // step; reinjected particles join the working sets and may cross again.
    const double closing_speed = params_.v_minus - params_.v_plus;
    double last_collision_x = e.b;
    std::size_t guard = 0;
    while (!plus.empty() && !minus.empty() && plus.front() <= minus.back()) {
        if (++guard > opt_.max_sweep_events) {
            throw std::runtime_error(
                "step_particles: annihilation cascade exceeded the event "
                "guard");
        }
        const double p_pre = plus.front() - params_.v_plus * dt;
        const double m_pre = minus.back() - params_.v_minus * dt;
        const double tau =
            std::clamp((p_pre - m_pre) / closing_speed, 0.0, dt);
        const double x_col = p_pre + params_.v_plus * tau;
        plus.erase(plus.begin());
        minus.pop_back();
        ++stats.annihilations;
        stats.events.push_back({t0 + tau, x_col});
        last_collision_x = x_col;

        if (recycle_prob_plus_ > 0.0 &&
            uniform01(e.rng) < recycle_prob_plus_) {
            const double r = recycle_plus_.sample(uniform01(e.rng));
            sorted_insert(plus, x_col + r + params_.v_plus * (dt - tau));
            ++stats.recycled_plus;
        }
        if (recycle_prob_minus_ > 0.0 &&
            uniform01(e.rng) < recycle_prob_minus_) {
            const double r = recycle_minus_.sample(uniform01(e.rng));
            sorted_insert(minus, x_col - r + params_.v_minus * (dt - tau));
            ++stats.recycled_minus;
        }
    }

    // 5) Boundary update; frozen while the (+) phase is empty.
    if (!plus.empty()) {
        e.b = plus.front();
    } else if (stats.annihilations > 0) {
        e.b = last_collision_x;
    }
    stats.plus_phase_empty = plus.empty();
    e.t = t0 + dt;
    return stats;
}

StepStats step_particles(ParticleEnsemble& e, const MarketParams& p,
                         double dt, const ParticleOptions& opt) {
    return ParticleSimulator(p, opt).step(e, dt);
}

EmpiricalDensity empirical_density(const ParticleEnsemble& e,
                                   double bin_width, std::size_t n_bins) {
    EmpiricalDensity out;
    out.bin_width = bin_width;
    if (bin_width <= 0.0) return out;
    auto fill = [&](const std::vector<double>& xs, std::vector<double>& bins) {
        std::vector<std::size_t> counts(n_bins, 0);
        for (double x : xs) {
            const double r = std::abs(x - e.b);
            const std::size_t k = static_cast<std::size_t>(r / bin_width);
            if (k >= counts.size()) {
                if (n_bins > 0) continue;  // fixed layout: drop the overflow
                counts.resize(k + 1, 0);
            }
            ++counts[k];
        }
        bins.assign(counts.size(), 0.0);
        for (std::size_t i = 0; i < counts.size(); ++i) {
            bins[i] = double(counts[i]) / bin_width;
        }
    };
    fill(e.plus_positions, out.plus);
    fill(e.minus_positions, out.minus);
    return out;
}

SimTrajectory run_particles(const MarketParams& p,
                            const InitialDensitySpec& init,
                            const ParticleRunConfig& config,
                            const ParticleOptions& opt) {
    // Arrival intensities carry the density scale; per-particle death rates
    // and reinjection probabilities do not.
    MarketParams scaled = p;
    scaled.lambda_plus =
        CompactRateFunction::scaled(p.lambda_plus, config.intensity);
    scaled.lambda_minus =
        CompactRateFunction::scaled(p.lambda_minus, config.intensity);
    ParticleSimulator sim(scaled, opt);

    ParticleEnsemble e;
    e.rng.seed(config.seed);
    e.b = init.b0;

    const PiecewiseLinearSampler cloud_plus(init.rho_plus);
    const PiecewiseLinearSampler cloud_minus(init.rho_minus);
    const std::size_t n0_plus =
        poisson_count(e.rng, config.intensity * cloud_plus.total_mass());
    for (std::size_t i = 0; i < n0_plus; ++i) {
        e.plus_positions.push_back(init.b0 +
                                   cloud_plus.sample(uniform01(e.rng)));
    }
    const std::size_t n0_minus =
        poisson_count(e.rng, config.intensity * cloud_minus.total_mass());
    for (std::size_t i = 0; i < n0_minus; ++i) {
        e.minus_positions.push_back(init.b0 -
                                    cloud_minus.sample(uniform01(e.rng)));
    }
    std::sort(e.plus_positions.begin(), e.plus_positions.end());
    std::sort(e.minus_positions.begin(), e.minus_positions.end());
    if (!e.plus_positions.empty()) e.b = e.plus_positions.front();

    SimTrajectory traj;
    bool empty_open = false;
    auto update_episodes = [&](bool empty_now, double t) {
        if (empty_now && !empty_open) {
            traj.empty_plus_episodes.emplace_back(t, t);
            empty_open = true;
        } else if (empty_now && empty_open) {
            traj.empty_plus_episodes.back().second = t;
        } else if (!empty_now && empty_open) {
            empty_open = false;
        }
    };
    auto sample = [&](double t) {
        traj.times.push_back(t);
        traj.b.push_back(e.b);
        traj.n_plus.push_back(e.n_plus());
        traj.n_minus.push_back(e.n_minus());
        traj.densities.push_back(
            {t, empirical_density(e, config.bin_width, config.n_bins)});
    };

    update_episodes(e.plus_empty(), 0.0);
    sample(0.0);

    const std::size_t n_steps = static_cast<std::size_t>(
        std::llround(config.t_end / config.dt));
    for (std::size_t k = 0; k < n_steps; ++k) {
        StepStats st = sim.step(e, config.dt);
        traj.total_arrivals_plus += st.arrivals_plus;
        traj.total_arrivals_minus += st.arrivals_minus;
        traj.total_deaths_plus += st.deaths_plus;
        traj.total_deaths_minus += st.deaths_minus;
        traj.total_annihilations += st.annihilations;
        traj.total_recycled_plus += st.recycled_plus;
        traj.total_recycled_minus += st.recycled_minus;
        traj.events.insert(traj.events.end(), st.events.begin(),
                           st.events.end());
        update_episodes(st.plus_phase_empty, e.t);
        if ((k + 1) % config.sample_every == 0 || k + 1 == n_steps) {
            sample(e.t);
        }
    }
    return traj;
}

} // namespace km
