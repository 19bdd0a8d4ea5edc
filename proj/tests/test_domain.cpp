#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "km/errors.hpp"
#include "km/market.hpp"
#include "km/quadrature.hpp"
#include "km/rate_function.hpp"
#include "km/velocity_profile.hpp"

#include "generators.hpp"

using km::CompactRateFunction;

TEST_CASE("rate evaluation: box interior, compact support, interpolation") {
    const auto box = CompactRateFunction({0.0, 1.0 - 1e-9, 1.0},
                                         {1.0, 1.0, 0.0});
    CHECK(box(0.5) == doctest::Approx(1.0));
    CHECK(box(1.0 + 5.0) == 0.0);
    CHECK(box(box.support_radius()) == 0.0);

    const auto wedge = CompactRateFunction::wedge(2.0, 1.0);
    CHECK(wedge(0.25) == doctest::Approx(1.5));
    CHECK(wedge(0.0) == 2.0);
    CHECK(wedge(1.0) == 0.0);
}

TEST_CASE("rate evaluation is continuous across breakpoints") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto f = kmtest::random_rate(rng);
        for (double bp : f.breakpoints()) {
            if (bp == 0.0) continue;
            const double eps = 1e-9;
            CHECK(f(bp - eps) == doctest::Approx(f(bp)).epsilon(1e-6));
        }
        CHECK(f(f.support_radius() + 0.1) == 0.0);
    }
}

TEST_CASE("quadrature: constants, exponentials, support truncation") {
    CHECK(km::integrate([](double) { return 1.0; }, 0.0, 1.0) ==
          doctest::Approx(1.0).epsilon(1e-12));

    // Closed-form antiderivative oracle: 1 - exp(-1).
    const double expected = 1.0 - std::exp(-1.0);
    CHECK(km::integrate([](double x) { return std::exp(-x); }, 0.0, 1.0) ==
          doctest::Approx(expected).epsilon(1e-12));

    const auto f = CompactRateFunction::box(1.0, 1.0);
    const double full = km::integrate([&](double r) { return f(r); }, 0.0,
                                      10.0, 1e-12);
    const double clipped = km::integrate([&](double r) { return f(r); }, 0.0,
                                         f.support_radius(), 1e-12);
    CHECK(full == doctest::Approx(clipped).epsilon(1e-10));
}

TEST_CASE("quadrature is exact on cubics (single panel)") {
    const double got =
        km::integrate([](double x) { return x * x * x; }, 0.0, 1.0);
    CHECK(std::abs(got - 0.25) < 1e-15);
}

TEST_CASE("quadrature reports non-convergence") {
    // sqrt is nowhere cubic, so the error estimate never vanishes; an
    // unreachable tolerance with a tiny depth budget must be reported.
    CHECK_THROWS_AS(
        km::integrate([](double x) { return std::sqrt(x); }, 0.0, 1.0,
                      1e-300, 3),
        km::IntegrationError);
}

TEST_CASE("prefix integral matches quadrature on random rates") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const auto f = kmtest::random_rate(rng);
        const double r = kmtest::uniform(rng, 0.0, f.support_radius() * 1.2);
        const double quad = km::integrate_with_knots(
            [&](double x) { return f(x); }, 0.0,
            std::min(r, f.support_radius()), f.breakpoints(), 1e-12);
        CHECK(f.prefix_integral(r) == doctest::Approx(quad).epsilon(1e-10));
    }
}

TEST_CASE("sampler draws land in support and follow the density") {
    std::mt19937_64 rng(23);
    const auto box = CompactRateFunction::box(1.0, 1.0);
    km::PiecewiseLinearSampler sampler(box);
    CHECK(sampler.total_mass() == doctest::Approx(1.0).epsilon(1e-9));
    double mean = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double r = sampler.sample(kmtest::uniform(rng, 0.0, 1.0));
        REQUIRE(r >= 0.0);
        REQUIRE(r <= box.support_radius());
        mean += r;
    }
    mean /= n;
    // Uniform on [0,1]: mean 1/2, sd of the mean ~ 0.29/sqrt(n).
    CHECK(std::abs(mean - 0.5) < 5.0 * 0.29 / std::sqrt(double(n)));

    // Inverse-CDF is monotone and hits the endpoints.
    CHECK(sampler.sample(0.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sampler.sample(0.999999) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("market validation accepts the reference setup") {
    km::MarketParams p;
    p.v_plus = -1.0;
    p.v_minus = 1.0;
    CHECK(km::validate_market(p).empty());
}

TEST_CASE("market validation rejects each single-invariant mutation") {
    std::mt19937_64 rng(29);
    km::MarketParams base = kmtest::random_market(rng);
    kmtest::add_random_kernels(base, rng);
    REQUIRE(km::validate_market(base).empty());

    {
        km::MarketParams p = base;
        p.v_plus = 1.0;
        const auto v = km::validate_market(p);
        REQUIRE(!v.empty());
        CHECK(v.front().find("v_plus") != std::string::npos);
    }
    {
        km::MarketParams p = base;
        p.v_minus = -0.5;
        CHECK(!km::validate_market(p).empty());
    }
    {
        km::MarketParams p = base;
        p.p_plus_minus =
            km::CompactRateFunction::scaled(*p.p_plus_minus,
                                            1.2 / p.p_plus_minus->integral());
        const auto v = km::validate_market(p);
        REQUIRE(!v.empty());
        bool found = false;
        for (const auto& msg : v) {
            if (msg.find("recycling mass exceeds 1") != std::string::npos) {
                found = true;
            }
        }
        CHECK(found);
    }
    {
        // Negative value inside a rate function.
        km::MarketParams p = base;
        auto bp = p.lambda_plus.breakpoints();
        auto vals = p.lambda_plus.values();
        vals[0] = -0.1;
        p.lambda_plus = km::CompactRateFunction(bp, vals);
        CHECK(!km::validate_market(p).empty());
    }
    {
        // Support that does not close at zero.
        km::MarketParams p = base;
        auto bp = p.lambda_plus.breakpoints();
        auto vals = p.lambda_plus.values();
        vals.back() = 0.3;
        p.lambda_plus = km::CompactRateFunction(bp, vals);
        CHECK(!km::validate_market(p).empty());
    }
}

TEST_CASE("validation returns every violation, not just the first") {
    km::MarketParams p;
    p.v_plus = 1.0;   // wrong sign
    p.v_minus = -1.0; // wrong sign
    const auto v = km::validate_market(p);
    CHECK(v.size() >= 2);
}

TEST_CASE("network validation: row mass and embedded kernels") {
    std::mt19937_64 rng(31);
    km::NetworkSpec spec;
    spec.markets.push_back(kmtest::random_market(rng));
    spec.markets.push_back(kmtest::random_market(rng));
    spec.routing.assign(2, std::vector<km::RoutingKernels>(2));
    spec.routing[0][0].minus_plus = kmtest::random_kernel(rng, 0.5);
    spec.routing[0][1].minus_plus = kmtest::random_kernel(rng, 0.4);
    CHECK(km::validate_network(spec).empty());

    spec.routing[0][1].minus_plus = kmtest::random_kernel(rng, 0.7);
    const auto v = km::validate_network(spec);  // row mass 1.2 > 1
    REQUIRE(!v.empty());
    CHECK(v.front().find("minus->plus mass exceeds 1") != std::string::npos);

    spec.routing[0][1].minus_plus = kmtest::random_kernel(rng, 0.4);
    spec.markets[0].p_minus_plus = kmtest::random_kernel(rng, 0.2);
    CHECK(!km::validate_network(spec).empty());
}

TEST_CASE("velocity profile: evaluation and validation") {
    km::VelocityProfile prof({-0.5, 0.0, 0.5}, {0.0, 2.0, 0.0}, 1.0);
    CHECK(prof.validate().empty());
    CHECK(prof(0.0) == 2.0);
    CHECK(prof(0.25) == doctest::Approx(1.0));
    CHECK(prof(0.9) == 0.0);
    CHECK(prof.mass() == doctest::Approx(1.0));

    km::VelocityProfile bad({-2.0, 0.0, 2.0}, {1.0, 2.0, 1.0}, 1.0);
    CHECK(!bad.validate().empty());  // nonzero beyond the velocity bound
}
