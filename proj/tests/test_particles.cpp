#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "km/particles.hpp"

#include "generators.hpp"

using km::CompactRateFunction;
using km::MarketParams;
using km::ParticleEnsemble;

namespace {

MarketParams quiet_market(double v_plus = -1.0, double v_minus = 1.0) {
    MarketParams p;
    p.v_plus = v_plus;
    p.v_minus = v_minus;
    return p;
}

MarketParams box_market() {
    MarketParams p = quiet_market();
    p.lambda_plus = CompactRateFunction::box(1.0, 1.0);
    p.lambda_minus = CompactRateFunction::box(1.0, 1.0);
    return p;
}

bool phases_separated(const ParticleEnsemble& e) {
    if (e.plus_positions.empty() || e.minus_positions.empty()) return true;
    return e.minus_positions.back() < e.plus_positions.front();
}

} // namespace

TEST_CASE("head-on pair annihilates at the midpoint") {
    km::ParticleSimulator sim(quiet_market());
    ParticleEnsemble e;
    e.plus_positions = {1.0};
    e.minus_positions = {-1.0};
    e.b = 1.0;

    std::vector<km::AnnihilationEvent> events;
    bool emptied = false;
    for (int k = 0; k < 5; ++k) {
        const auto st = sim.step(e, 0.25);
        events.insert(events.end(), st.events.begin(), st.events.end());
        if (k < 3) {
            // Boundary tracks the surviving (+) particle: b = 1 - t.
            REQUIRE(e.b == doctest::Approx(1.0 - 0.25 * (k + 1)));
        }
        emptied = emptied || st.plus_phase_empty;
    }
    REQUIRE(events.size() == 1);
    CHECK(events[0].t == doctest::Approx(1.0));
    CHECK(events[0].x == doctest::Approx(0.0));
    CHECK(e.plus_positions.empty());
    CHECK(e.minus_positions.empty());
    CHECK(emptied);
    CHECK(e.b == doctest::Approx(0.0));  // frozen at the collision point
}

TEST_CASE("free translation: counts constant, boundary follows the leftmost") {
    km::ParticleSimulator sim(quiet_market(-0.7, 1.0));
    ParticleEnsemble e;
    e.plus_positions = {0.5, 1.0, 2.0};
    e.b = 0.5;
    for (int k = 0; k < 40; ++k) sim.step(e, 0.05);
    CHECK(e.n_plus() == 3);
    CHECK(e.b == doctest::Approx(0.5 - 0.7 * 2.0).epsilon(1e-12));
}

TEST_CASE("far-apart phases keep exactly constant counts") {
    km::ParticleSimulator sim(quiet_market());
    ParticleEnsemble e;
    e.plus_positions = {5.0, 6.0, 7.0};
    e.minus_positions = {-5.0, -4.5};
    e.b = 5.0;
    // Gap of 9.5 > (v_minus - v_plus) * T = 2 * 2.
    for (int k = 0; k < 40; ++k) {
        const auto st = sim.step(e, 0.05);
        REQUIRE(st.annihilations == 0);
    }
    CHECK(e.n_plus() == 3);
    CHECK(e.n_minus() == 2);
}

TEST_CASE("fixed seed reproduces the trajectory bit for bit") {
    MarketParams p = box_market();
    p.mu_plus = CompactRateFunction::box(0.3, 1.0);
    p.mu_minus = CompactRateFunction::box(0.3, 1.0);
    km::InitialDensitySpec init;
    init.rho_plus = CompactRateFunction::wedge(1.0, 1.0);
    init.rho_minus = CompactRateFunction::wedge(1.0, 1.0);
    km::ParticleRunConfig cfg;
    cfg.intensity = 50.0;
    cfg.seed = 4242;
    cfg.t_end = 1.0;
    cfg.dt = 1e-2;
    const auto a = km::run_particles(p, init, cfg);
    const auto b = km::run_particles(p, init, cfg);
    REQUIRE(a.b.size() == b.b.size());
    for (std::size_t i = 0; i < a.b.size(); ++i) REQUIRE(a.b[i] == b.b[i]);
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t i = 0; i < a.events.size(); ++i) {
        REQUIRE(a.events[i].t == b.events[i].t);
        REQUIRE(a.events[i].x == b.events[i].x);
    }
}

TEST_CASE("empty start with no arrivals records an immediate episode") {
    MarketParams p = quiet_market();
    km::InitialDensitySpec init;  // zero densities
    km::ParticleRunConfig cfg;
    cfg.intensity = 0.0;
    cfg.t_end = 0.5;
    cfg.dt = 0.1;
    const auto traj = km::run_particles(p, init, cfg);
    REQUIRE(traj.empty_plus_episodes.size() == 1);
    CHECK(traj.empty_plus_episodes[0].first == 0.0);
    CHECK(traj.empty_plus_episodes[0].second == doctest::Approx(0.5));
    CHECK(traj.total_annihilations == 0);
}

TEST_CASE("per-step count balance and phase separation") {
    std::mt19937_64 rng(401);
    for (int trial = 0; trial < 5; ++trial) {
        MarketParams p = kmtest::random_market(rng);
        if (trial % 2 == 1) kmtest::add_random_kernels(p, rng);
        km::ParticleSimulator sim(p);
        ParticleEnsemble e;
        e.rng.seed(900 + trial);
        // Seed a populated, separated state.
        for (int i = 0; i < 60; ++i) {
            e.plus_positions.push_back(0.02 * i);
            e.minus_positions.push_back(-0.02 * i - 0.01);
        }
        std::sort(e.plus_positions.begin(), e.plus_positions.end());
        std::sort(e.minus_positions.begin(), e.minus_positions.end());
        e.b = e.plus_positions.front();
        for (int k = 0; k < 50; ++k) {
            const std::size_t np = e.n_plus();
            const std::size_t nm = e.n_minus();
            const auto st = sim.step(e, 0.01);
            REQUIRE(phases_separated(e));
            REQUIRE(long(e.n_plus()) - long(np) ==
                    long(st.arrivals_plus) + long(st.recycled_plus) -
                        long(st.deaths_plus) - long(st.annihilations));
            REQUIRE(long(e.n_minus()) - long(nm) ==
                    long(st.arrivals_minus) + long(st.recycled_minus) -
                        long(st.deaths_minus) - long(st.annihilations));
        }
    }
}

TEST_CASE("saturated recycling conserves counts through annihilation") {
    MarketParams p = quiet_market();
    p.p_minus_plus = CompactRateFunction::box(1.0, 0.5, 1e-9);
    p.p_plus_minus = CompactRateFunction::box(2.0, 0.5, 1e-9);
    // Kernel masses: 0.5 and 1.0.
    km::ParticleSimulator sim(p);
    ParticleEnsemble e;
    e.rng.seed(77);
    e.plus_positions = {0.05, 0.3, 0.6};
    e.minus_positions = {-0.6, -0.3, -0.05};
    e.b = 0.05;
    std::size_t annihilated = 0, recycled_m = 0;
    for (int k = 0; k < 30; ++k) {
        const auto st = sim.step(e, 0.05);
        annihilated += st.annihilations;
        recycled_m += st.recycled_minus;
        REQUIRE(phases_separated(e));
    }
    REQUIRE(annihilated > 0);
    // The (-) kernel has unit mass: every annihilation reinjects a buyer.
    CHECK(recycled_m == annihilated);
}

TEST_CASE("empirical density: single and double occupancy") {
    ParticleEnsemble e;
    e.b = 0.0;
    e.plus_positions = {0.5};
    auto d1 = km::empirical_density(e, 1.0);
    REQUIRE(d1.plus.size() == 1);
    CHECK(d1.plus[0] == doctest::Approx(1.0));

    e.plus_positions = {0.4, 0.6};
    auto d2 = km::empirical_density(e, 1.0);
    CHECK(d2.plus[0] == doctest::Approx(2.0));

    e.minus_positions = {-0.25};
    auto d3 = km::empirical_density(e, 0.5);
    REQUIRE(d3.minus.size() >= 1);
    CHECK(d3.minus[0] == doctest::Approx(2.0));  // one count / 0.5 width
}

TEST_CASE("empirical density of a Poisson cloud has matching moments") {
    std::mt19937_64 rng(409);
    const double rho0 = 40.0;
    const double width = 2.0;
    const double bin = 0.25;
    const int replicas = 300;
    std::vector<double> per_bin;
    double mean = 0.0;
    std::vector<std::vector<double>> samples;
    for (int rep = 0; rep < replicas; ++rep) {
        ParticleEnsemble e;
        e.b = 0.0;
        std::poisson_distribution<int> pois(rho0 * width);
        const int n = pois(rng);
        for (int i = 0; i < n; ++i) {
            e.plus_positions.push_back(kmtest::uniform(rng, 0.0, width));
        }
        std::sort(e.plus_positions.begin(), e.plus_positions.end());
        if (!e.plus_positions.empty()) e.b = 0.0;
        const auto d = km::empirical_density(
            e, bin, static_cast<std::size_t>(width / bin));
        samples.push_back(d.plus);
        for (double v : d.plus) mean += v;
    }
    const std::size_t n_bins = samples[0].size();
    mean /= double(replicas * n_bins);
    CHECK(mean == doctest::Approx(rho0).epsilon(0.05));
    // Variance of counts/bin is rho0*bin, so density variance is rho0/bin.
    double var = 0.0;
    for (const auto& row : samples) {
        for (double v : row) var += (v - rho0) * (v - rho0);
    }
    var /= double(replicas * n_bins);
    CHECK(var == doctest::Approx(rho0 / bin).epsilon(0.15));
}

TEST_CASE("arrival counts per step pass a Poisson goodness-of-fit") {
    MarketParams p = box_market();  // arrival mass 1 per phase per unit time
    km::ParticleSimulator sim(p);
    const double dt = 4.0;  // mean 4 arrivals per step (isolated draws)
    const double mean = dt * p.lambda_plus.integral();
    const int n_steps = 10000;
    std::vector<int> counts;
    ParticleEnsemble e;
    e.rng.seed(1234);
    for (int k = 0; k < n_steps; ++k) {
        e.plus_positions.clear();
        e.minus_positions.clear();
        e.b = 0.0;
        e.t = 0.0;
        // dt here is a sampling window, not a CFL-limited step; arrivals are
        // drawn before any transport happens.
        const auto st = sim.step(e, dt);
        counts.push_back(int(st.arrivals_plus));
    }
    // Bins 0..9 and >= 10; all expected counts exceed 5 at mean 4.
    std::vector<double> expected(11, 0.0);
    double pmf = std::exp(-mean);
    double cdf = 0.0;
    for (int k = 0; k < 10; ++k) {
        expected[k] = pmf * n_steps;
        cdf += pmf;
        pmf *= mean / double(k + 1);
    }
    expected[10] = (1.0 - cdf) * n_steps;
    std::vector<double> observed(11, 0.0);
    for (int c : counts) observed[std::min(c, 10)] += 1.0;
    double chi2 = 0.0;
    for (int k = 0; k <= 10; ++k) {
        REQUIRE(expected[k] >= 5.0);
        chi2 += (observed[k] - expected[k]) * (observed[k] - expected[k]) /
                expected[k];
    }
    // 1% critical value of chi-square with 10 degrees of freedom.
    CHECK(chi2 < 23.209);
}

TEST_CASE("symmetric market has no systematic boundary drift") {
    MarketParams p = box_market();
    km::InitialDensitySpec init;
    init.rho_plus = CompactRateFunction::wedge(1.0, 1.0);
    init.rho_minus = CompactRateFunction::wedge(1.0, 1.0);
    km::ParticleRunConfig cfg;
    cfg.intensity = 200.0;
    cfg.t_end = 2.0;
    cfg.dt = 2e-3;
    const int replicas = 12;
    std::vector<double> finals;
    for (int rep = 0; rep < replicas; ++rep) {
        cfg.seed = 5000 + rep;
        const auto traj = km::run_particles(p, init, cfg);
        finals.push_back(traj.b.back());
    }
    const double mean =
        std::accumulate(finals.begin(), finals.end(), 0.0) / replicas;
    double var = 0.0;
    for (double b : finals) var += (b - mean) * (b - mean);
    var /= double(replicas - 1);
    const double se = std::sqrt(var / replicas);
    CHECK(std::abs(mean) < 5.0 * se + 1e-6);
}
