#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "km/equilibria.hpp"
#include "km/errors.hpp"

#include "generators.hpp"

using km::CompactRateFunction;
using km::MarketParams;

namespace {

MarketParams box_market() {
    // v = -1/+1, arrival boxes of height 1 on [0,1], no deaths.
    MarketParams p;
    p.v_plus = -1.0;
    p.v_minus = 1.0;
    p.lambda_plus = CompactRateFunction::box(1.0, 1.0);
    p.lambda_minus = CompactRateFunction::box(1.0, 1.0);
    return p;
}

} // namespace

TEST_CASE("critical constants: zero arrivals give zero thresholds") {
    MarketParams p;
    p.v_plus = -1.0;
    p.v_minus = 1.0;
    const auto cc = km::critical_constants(p);
    CHECK(cc.gamma_cr_plus == 0.0);
    CHECK(cc.gamma_cr_minus == 0.0);
    CHECK(cc.gamma_cr == 0.0);
}

TEST_CASE("critical constants: box arrivals, no deaths") {
    const auto cc = km::critical_constants(box_market());
    // Analytic quadrature oracle: the box integrates to 1 (up to the
    // closing ramp, which is 1e-12 wide).
    CHECK(cc.gamma_cr_plus == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(cc.gamma_cr_minus == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(cc.gamma_cr == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(cc.sigma_plus == doctest::Approx(cc.lambda_hat_plus));
    CHECK(cc.sigma_minus == doctest::Approx(cc.lambda_hat_minus));
}

TEST_CASE("critical constants: box deaths damp the arrivals exponentially") {
    MarketParams p = box_market();
    p.mu_plus = CompactRateFunction::box(1.0, 1.0);
    const auto cc = km::critical_constants(p);
    // Closed-form antiderivative oracle: integral of exp(-x) over [0,1].
    CHECK(cc.gamma_cr_plus ==
          doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-8));
}

TEST_CASE("critical constants are monotone in the arrival intensity") {
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 25; ++trial) {
        MarketParams p = kmtest::random_market(rng);
        const auto cc = km::critical_constants(p);
        MarketParams bigger = p;
        bigger.lambda_plus = CompactRateFunction::scaled(
            p.lambda_plus, 1.0 + kmtest::uniform(rng, 0.0, 2.0));
        const auto cc2 = km::critical_constants(bigger);
        CHECK(cc2.gamma_cr_plus >= cc.gamma_cr_plus - 1e-12);
        CHECK(cc2.gamma_cr >= cc.gamma_cr - 1e-12);
    }
}

TEST_CASE("fixed point with zero rates is the constant-density pair") {
    MarketParams p;
    p.v_plus = -1.0;
    p.v_minus = 2.0;
    const auto res = km::fixed_point_single(p, 1.0, {2.0, 1e-2});
    REQUIRE(res.exists);
    CHECK(res.threshold == 0.0);
    for (double v : res.profile.rho_plus) CHECK(v == doctest::Approx(1.0));
    for (double v : res.profile.rho_minus) CHECK(v == doctest::Approx(0.5));
    CHECK(res.profile.gamma_minus == doctest::Approx(0.5));
    CHECK_FALSE(res.profile.finite_mass);
    CHECK(res.profile.beta == 0.0);
}

TEST_CASE("below the critical density there is no fixed point") {
    const auto res = km::fixed_point_single(box_market(), 0.9);
    CHECK_FALSE(res.exists);
    CHECK(res.threshold == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("at the critical density the fixed point has finite mass") {
    const auto cc = km::critical_constants(box_market());
    const auto res =
        km::fixed_point_single(box_market(), cc.gamma_cr, {3.0, 1e-3});
    REQUIRE(res.exists);
    CHECK(res.profile.finite_mass);
    CHECK(std::abs(res.profile.tail_plus) < 1e-9);
    CHECK(std::abs(res.profile.tail_minus) < 1e-9);
    // Triangular profiles: mass 1/2 each.
    CHECK(res.profile.mass_plus == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(res.profile.mass_minus == doctest::Approx(0.5).epsilon(1e-4));
    for (double v : res.profile.rho_plus) CHECK(v >= 0.0);
    for (double v : res.profile.rho_minus) CHECK(v >= 0.0);
}

TEST_CASE("threshold dichotomy on random markets") {
    std::mt19937_64 rng(103);
    for (int trial = 0; trial < 50; ++trial) {
        MarketParams p = kmtest::random_market(rng);
        const auto cc = km::critical_constants(p);
        const double above = cc.gamma_cr * (1.0 + 1e-9) + 1e-9;
        const double below = cc.gamma_cr * (1.0 - 1e-9) - 1e-9;
        const km::GridSpec grid{p.support_radius() + 1.0, 5e-3};
        const auto hi = km::fixed_point_single(p, above, grid);
        REQUIRE(hi.exists);
        for (double v : hi.profile.rho_plus) REQUIRE(v >= 0.0);
        for (double v : hi.profile.rho_minus) REQUIRE(v >= 0.0);
        const auto lo = km::fixed_point_single(p, below, grid);
        REQUIRE_FALSE(lo.exists);
    }
}

TEST_CASE("stationary point: arithmetic boundary velocity") {
    // gamma_plus = 2, gamma_minus = 1 with unit speeds: beta = -1/3.
    const auto res =
        km::stationary_point_single(box_market(), 2.0, 1.0, {2.0, 1e-2});
    REQUIRE(res.admissible);
    CHECK(res.profile.beta == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
    for (double v : res.profile.rho_plus) CHECK(v >= 0.0);
    for (double v : res.profile.rho_minus) CHECK(v >= 0.0);
}

TEST_CASE("stationary point with equal densities and mirrored speeds rests") {
    const auto res =
        km::stationary_point_single(box_market(), 1.5, 1.5, {2.0, 1e-2});
    REQUIRE(res.admissible);
    CHECK(res.profile.beta == 0.0);
}

TEST_CASE("stationary point rejects sub-critical boundary densities") {
    const auto res =
        km::stationary_point_single(box_market(), 0.5, 1.0, {2.0, 1e-2});
    REQUIRE_FALSE(res.admissible);
    CHECK(res.violation.phase == km::Phase::Plus);
    CHECK(res.violation.required == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("stationary point finite mass exactly at both critical densities") {
    MarketParams p = box_market();
    p.mu_plus = CompactRateFunction::box(0.5, 1.0);
    p.mu_minus = CompactRateFunction::box(0.25, 1.0);
    const auto cc = km::critical_constants(p);
    const auto at = km::stationary_point_single(p, cc.gamma_cr_plus,
                                                cc.gamma_cr_minus,
                                                {3.0, 1e-3});
    REQUIRE(at.admissible);
    CHECK(at.profile.finite_mass);
    const auto off = km::stationary_point_single(p, cc.gamma_cr_plus + 0.1,
                                                 cc.gamma_cr_minus,
                                                 {3.0, 1e-3});
    REQUIRE(off.admissible);
    CHECK_FALSE(off.profile.finite_mass);
}

TEST_CASE("recycling fixed point reduces to the plain one without kernels") {
    std::mt19937_64 rng(107);
    for (int trial = 0; trial < 10; ++trial) {
        MarketParams p = kmtest::random_market(rng);
        const auto cc = km::critical_constants(p);
        const double gamma = cc.gamma_cr + 0.25;
        const km::GridSpec grid{p.support_radius() + 0.5, 5e-3};
        const auto plain = km::fixed_point_single(p, gamma, grid);
        const auto recycled = km::fixed_point_recycling(p, gamma, grid);
        REQUIRE(plain.exists);
        REQUIRE(recycled.exists);
        CHECK(recycled.threshold ==
              doctest::Approx(plain.threshold).epsilon(1e-10));
        for (std::size_t i = 0; i < plain.profile.grid.size(); ++i) {
            REQUIRE(recycled.profile.rho_plus[i] ==
                    doctest::Approx(plain.profile.rho_plus[i])
                        .epsilon(1e-10));
            REQUIRE(recycled.profile.rho_minus[i] ==
                    doctest::Approx(plain.profile.rho_minus[i])
                        .epsilon(1e-10));
        }
    }
}

TEST_CASE("recycling threshold: half-mass reinjection doubles the bar") {
    MarketParams p = box_market();
    p.p_minus_plus = CompactRateFunction::box(0.5, 1.0);
    const auto cc = km::critical_constants(p);
    CHECK(cc.alpha_mp == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(cc.alpha_pm == 0.0);
    CHECK(cc.gamma_hat_cr == doctest::Approx(2.0).epsilon(1e-9));

    CHECK_FALSE(km::fixed_point_recycling(p, 1.5).exists);
    const auto res = km::fixed_point_recycling(p, 2.0, {3.0, 1e-3});
    REQUIRE(res.exists);
    CHECK(std::abs(res.profile.tail_plus) < 1e-8);
    for (double v : res.profile.rho_plus) CHECK(v >= 0.0);
    for (double v : res.profile.rho_minus) CHECK(v >= 0.0);
}

TEST_CASE("recycling stationary point reproduces the hand-derived root") {
    // Boxes with reinjection masses 0.4 / 0.2 give the quadratic
    // b^2 - 10 b - 1 = 0 with the admissible root 5 - sqrt(26).
    MarketParams p = box_market();
    p.p_minus_plus = CompactRateFunction::box(0.4, 1.0);
    p.p_plus_minus = CompactRateFunction::box(0.2, 1.0);
    const auto res = km::stationary_point_recycling(p, {3.0, 1e-3});
    const double expected = 5.0 - std::sqrt(26.0);
    CHECK(std::abs(res.profile.beta - expected) < 1e-9);
    CHECK_FALSE(res.linear_branch);
    const double scale = std::max(
        {1.0, std::abs(res.quad_a), std::abs(res.quad_b),
         std::abs(res.quad_c)});
    CHECK(res.quad_residual < 1e-12 * scale);
    CHECK(res.balance_residual < 1e-10);
    CHECK(res.profile.finite_mass);
}

TEST_CASE("fully symmetric recycling market rests (linear branch)") {
    MarketParams p = box_market();
    p.p_minus_plus = CompactRateFunction::box(0.3, 1.0);
    p.p_plus_minus = CompactRateFunction::box(0.3, 1.0);
    const auto res = km::stationary_point_recycling(p, {3.0, 1e-3});
    CHECK(res.linear_branch);
    CHECK(res.profile.beta == 0.0);
    CHECK(res.profile.gamma_plus ==
          doctest::Approx(res.profile.gamma_minus).epsilon(1e-12));
}

TEST_CASE("zero kernels collapse the quadratic to the two-parameter rest "
          "velocity") {
    std::mt19937_64 rng(109);
    for (int trial = 0; trial < 10; ++trial) {
        MarketParams p = kmtest::random_market(rng);
        const auto cc = km::critical_constants(p);
        if (cc.sigma_plus <= 0.0 || cc.sigma_minus <= 0.0) continue;
        const auto res = km::stationary_point_recycling(p, {3.0, 5e-3});
        CHECK(res.linear_branch);
        const double expected =
            (p.v_plus * cc.gamma_cr_plus + p.v_minus * cc.gamma_cr_minus) /
            (cc.gamma_cr_plus + cc.gamma_cr_minus);
        CHECK(std::abs(res.profile.beta - expected) < 1e-12 *
              std::max(1.0, std::abs(expected)));
    }
}

TEST_CASE("recycling stationary points on random markets") {
    std::mt19937_64 rng(113);
    for (int trial = 0; trial < 20; ++trial) {
        MarketParams p = kmtest::random_market(rng);
        kmtest::add_random_kernels(p, rng);
        const auto res = km::stationary_point_recycling(p, {3.0, 5e-3});
        CHECK(res.profile.beta > p.v_plus);
        CHECK(res.profile.beta < p.v_minus);
        CHECK(res.profile.gamma_plus > 0.0);
        CHECK(res.profile.gamma_minus > 0.0);
        const double scale = std::max(
            {1.0, std::abs(res.quad_a), std::abs(res.quad_b),
             std::abs(res.quad_c)});
        CHECK(res.quad_residual < 1e-12 * scale);
        CHECK(res.balance_residual < 1e-10);
        CHECK(res.profile.finite_mass);
    }
}

TEST_CASE("network constants reduce to the recycling ones for a self-loop") {
    std::mt19937_64 rng(127);
    MarketParams p = kmtest::random_market(rng);
    kmtest::add_random_kernels(p, rng);
    const auto cc = km::critical_constants(p);

    km::NetworkSpec spec;
    MarketParams stripped = p;
    stripped.p_minus_plus.reset();
    stripped.p_plus_minus.reset();
    spec.markets.push_back(stripped);
    spec.routing.assign(1, std::vector<km::RoutingKernels>(1));
    spec.routing[0][0].minus_plus = p.p_minus_plus;
    spec.routing[0][0].plus_minus = p.p_plus_minus;

    const auto nc = km::network_constants(spec);
    CHECK(nc.a_mp[0][0] == doctest::Approx(cc.alpha_mp).epsilon(1e-10));
    CHECK(nc.a_pm[0][0] == doctest::Approx(cc.alpha_pm).epsilon(1e-10));
    CHECK(nc.lambda_hat_plus[0] ==
          doctest::Approx(cc.lambda_hat_plus).epsilon(1e-10));
}

TEST_CASE("network constants: uniform 0.3 boxes and substochastic rows") {
    km::NetworkSpec spec;
    spec.markets.push_back(box_market());
    spec.markets.push_back(box_market());
    spec.routing.assign(2, std::vector<km::RoutingKernels>(2));
    for (std::size_t k = 0; k < 2; ++k) {
        for (std::size_t m = 0; m < 2; ++m) {
            spec.routing[k][m].minus_plus = CompactRateFunction::box(0.3, 1.0);
        }
    }
    const auto nc = km::network_constants(spec);
    for (std::size_t k = 0; k < 2; ++k) {
        double row = 0.0;
        for (std::size_t m = 0; m < 2; ++m) {
            CHECK(nc.a_mp[k][m] == doctest::Approx(0.3).epsilon(1e-9));
            row += nc.a_mp[k][m];
        }
        CHECK(row == doctest::Approx(0.6).epsilon(1e-9));
    }
}

TEST_CASE("network constants reject saturated routing rows") {
    km::NetworkSpec spec;
    spec.markets.push_back(box_market());
    spec.routing.assign(1, std::vector<km::RoutingKernels>(1));
    spec.routing[0][0].minus_plus = CompactRateFunction::box(1.0, 1.0);
    spec.routing[0][0].plus_minus = CompactRateFunction::box(1.0, 1.0);
    // No deaths: the weighted mass equals the full kernel mass of 1, so no
    // row is strictly substochastic.
    CHECK_THROWS_AS(km::network_constants(spec),
                    km::SubstochasticityViolated);
}

TEST_CASE("inequality solver: decoupled system") {
    const auto sol = km::solve_network_inequalities(
        {1.0, 0.25}, {0.5, 0.75}, {}, {});
    REQUIRE(sol.feasible);
    CHECK(sol.s[0] == 1.0);
    CHECK(sol.s[1] == 0.75);
}

TEST_CASE("inequality solver: scalar self-feedback gives s = 10") {
    const auto sol = km::solve_network_inequalities(
        {1.0}, {0.0}, {{0.9}}, {{0.0}});
    REQUIRE(sol.feasible);
    CHECK(std::abs(sol.s[0] - 10.0) <= 1e-12);
}

TEST_CASE("inequality solver: mirrored pair gives s = (2.5, 2.5)") {
    const km::Matrix a_mp{{0.0, 0.6}, {0.6, 0.0}};
    const auto sol =
        km::solve_network_inequalities({1.0, 1.0}, {0.0, 0.0}, a_mp, {});
    REQUIRE(sol.feasible);
    CHECK(std::abs(sol.s[0] - 2.5) <= 1e-12);
    CHECK(std::abs(sol.s[1] - 2.5) <= 1e-12);
}

TEST_CASE("inequality solver flags an infeasible absorbing loop") {
    // Row 0 feeds itself with full weight, so s0 >= 1 + s0 is impossible.
    const km::Matrix a_mp{{1.0, 0.0}, {0.3, 0.5}};
    const auto sol =
        km::solve_network_inequalities({1.0, 0.5}, {0.0, 0.0}, a_mp, {});
    CHECK_FALSE(sol.feasible);
}

TEST_CASE("inequality solver returns the least solution") {
    std::mt19937_64 rng(131);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t v = 2 + (trial % 3);
        km::Matrix a_mp(v, std::vector<double>(v));
        km::Matrix a_pm(v, std::vector<double>(v));
        std::vector<double> lp(v), lm(v);
        for (std::size_t k = 0; k < v; ++k) {
            double row_budget = kmtest::uniform(rng, 0.1, 0.9);
            for (std::size_t m = 0; m < v; ++m) {
                a_mp[k][m] = row_budget / double(v) *
                             kmtest::uniform(rng, 0.0, 1.0);
                a_pm[k][m] = row_budget / double(v) *
                             kmtest::uniform(rng, 0.0, 1.0);
            }
            lp[k] = kmtest::uniform(rng, 0.0, 2.0);
            lm[k] = kmtest::uniform(rng, 0.0, 2.0);
        }
        const auto sol = km::solve_network_inequalities(lp, lm, a_mp, a_pm);
        REQUIRE(sol.feasible);
        auto column = [&](const km::Matrix& mat, const std::vector<double>& x,
                          std::size_t m) {
            double acc = 0.0;
            for (std::size_t k = 0; k < x.size(); ++k) acc += x[k] * mat[k][m];
            return acc;
        };
        for (std::size_t m = 0; m < v; ++m) {
            REQUIRE(sol.s[m] + 1e-10 >= lp[m] + column(a_mp, sol.s, m));
            REQUIRE(sol.s[m] + 1e-10 >= lm[m] + column(a_pm, sol.s, m));
            // Least solution: any single-coordinate decrease breaks a bound.
            std::vector<double> dec = sol.s;
            dec[m] -= 1e-6;
            const bool broken =
                dec[m] < lp[m] + column(a_mp, dec, m) - 1e-12 ||
                dec[m] < lm[m] + column(a_pm, dec, m) - 1e-12 ||
                dec[m] < std::max(lp[m], lm[m]);
            REQUIRE(broken);
        }
    }
}

TEST_CASE("network fixed point reduces to the single-market one") {
    std::mt19937_64 rng(137);
    MarketParams p = kmtest::random_market(rng);
    const auto cc = km::critical_constants(p);
    const double gamma = cc.gamma_cr + 0.3;
    const km::GridSpec grid{p.support_radius() + 0.5, 5e-3};
    const auto single = km::fixed_point_single(p, gamma, grid);
    REQUIRE(single.exists);

    km::NetworkSpec spec;
    spec.markets.push_back(p);
    const double s = -p.v_plus * gamma;
    const auto profiles = km::fixed_point_network(spec, {s}, grid);
    REQUIRE(profiles.size() == 1);
    for (std::size_t i = 0; i < profiles[0].grid.size(); ++i) {
        REQUIRE(profiles[0].rho_plus[i] ==
                doctest::Approx(single.profile.rho_plus[i]).epsilon(1e-10));
        REQUIRE(profiles[0].rho_minus[i] ==
                doctest::Approx(single.profile.rho_minus[i]).epsilon(1e-10));
    }
    // The boundary balance holds exactly by construction.
    CHECK(p.v_minus * profiles[0].gamma_minus +
              p.v_plus * profiles[0].gamma_plus ==
          doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("network fixed point rejects an infeasible parameter vector") {
    km::NetworkSpec spec;
    spec.markets.push_back(box_market());
    CHECK_THROWS_AS(km::fixed_point_network(spec, {0.1}, {2.0, 1e-2}),
                    km::InequalitiesViolated);
}

TEST_CASE("two-market network fixed point satisfies the balance system") {
    km::NetworkSpec spec;
    MarketParams a = box_market();
    MarketParams b = box_market();
    b.mu_plus = CompactRateFunction::box(0.5, 1.0);
    b.mu_minus = CompactRateFunction::box(0.5, 1.0);
    spec.markets = {a, b};
    spec.routing.assign(2, std::vector<km::RoutingKernels>(2));
    spec.routing[0][1].minus_plus = CompactRateFunction::box(0.3, 1.0);
    spec.routing[1][0].minus_plus = CompactRateFunction::box(0.2, 1.0);
    spec.routing[0][1].plus_minus = CompactRateFunction::box(0.25, 1.0);

    const auto nc = km::network_constants(spec);
    const auto sol = km::solve_network_inequalities(
        nc.lambda_hat_plus, nc.lambda_hat_minus, nc.a_mp, nc.a_pm);
    REQUIRE(sol.feasible);
    const auto profiles =
        km::fixed_point_network(spec, sol.s, {3.0, 1e-3});
    const auto rep = km::verify_equilibrium_network(profiles, spec);
    CHECK(rep.max_residual_plus < 1e-6);
    CHECK(rep.max_residual_minus < 1e-6);
    CHECK(rep.boundary_balance < 1e-12);
    for (const auto& prof : profiles) {
        for (double v : prof.rho_plus) REQUIRE(v >= 0.0);
        for (double v : prof.rho_minus) REQUIRE(v >= 0.0);
    }
}

TEST_CASE("residual check: curved profiles, second-order scaling") {
    MarketParams p = box_market();
    p.mu_plus = CompactRateFunction::box(1.0, 1.0);
    p.mu_minus = CompactRateFunction::box(0.7, 1.0);
    const auto cc = km::critical_constants(p);
    const auto coarse = km::fixed_point_single(p, cc.gamma_cr + 0.2,
                                               {2.0, 1e-3});
    REQUIRE(coarse.exists);
    const auto rep1 = km::verify_equilibrium(coarse.profile, p);
    CHECK(rep1.max_residual_plus < 1e-5);
    CHECK(rep1.max_residual_minus < 1e-5);
    CHECK(rep1.points_checked > 100);

    const auto fine = km::fixed_point_single(p, cc.gamma_cr + 0.2,
                                             {2.0, 5e-4});
    const auto rep2 = km::verify_equilibrium(fine.profile, p);
    CHECK(rep1.max_residual_plus / rep2.max_residual_plus >= 3.5);
}

TEST_CASE("residual check detects a scaled profile through the balance") {
    const auto cc = km::critical_constants(box_market());
    auto res = km::fixed_point_single(box_market(), cc.gamma_cr + 0.5,
                                      {2.0, 1e-3});
    REQUIRE(res.exists);
    auto perturbed = res.profile;
    for (double& v : perturbed.rho_plus) v *= 1.1;
    perturbed.gamma_plus *= 1.1;
    const auto rep = km::verify_equilibrium(perturbed, box_market());
    // 0.1 * |v_plus| * gamma_plus with the original gamma.
    CHECK(rep.boundary_balance ==
          doctest::Approx(0.1 * res.profile.gamma_plus).epsilon(1e-9));
}

TEST_CASE("residual check: zero-rate constant profile has zero residual") {
    MarketParams p;
    p.v_plus = -1.0;
    p.v_minus = 2.0;
    const auto res = km::fixed_point_single(p, 1.0, {1.0, 1e-2});
    REQUIRE(res.exists);
    const auto rep = km::verify_equilibrium(res.profile, p);
    CHECK(rep.max_residual_plus == 0.0);
    CHECK(rep.max_residual_minus == 0.0);
    CHECK(rep.boundary_balance == 0.0);
}

TEST_CASE("recycling stationary profile passes the residual check") {
    MarketParams p = box_market();
    p.mu_plus = CompactRateFunction::box(0.4, 1.0);
    p.mu_minus = CompactRateFunction::box(0.6, 1.0);
    p.p_minus_plus = CompactRateFunction::box(0.4, 1.0);
    p.p_plus_minus = CompactRateFunction::box(0.2, 1.0);
    const auto res = km::stationary_point_recycling(p, {3.0, 1e-3});
    const auto rep = km::verify_equilibrium_recycling(res.profile, p);
    CHECK(rep.max_residual_plus < 1e-5);
    CHECK(rep.max_residual_minus < 1e-5);
    CHECK(rep.boundary_balance < 1e-10);
}
