#include "qlinksim/phys.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace qlinksim;

TEST_CASE("survival probability")
{
    CHECK(survival_probability(0.0, ExponentialLoss{}) == 1.0);
    CHECK(survival_probability(0.0, DecibelLoss{}) == 1.0);
    // e^(-10/21) = 0.621145 (0.62126 is sometimes quoted; it is a misprint).
    CHECK(std::abs(survival_probability(10.0, ExponentialLoss{21.0}) - 0.621145) < 1e-5);
    CHECK(std::abs(survival_probability(10.0, DecibelLoss{0.2}) - 0.63096) < 1e-5);
    CHECK_THROWS_AS(survival_probability(-1.0, ExponentialLoss{}), std::invalid_argument);
}

TEST_CASE("survival is multiplicative over concatenated fiber")
{
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> len(0.0, 50.0);
    for (const LossModel& m : {LossModel{ExponentialLoss{21.0}}, LossModel{DecibelLoss{0.2}}})
    {
        for (int i = 0; i < 200; ++i)
        {
            const double a = len(gen);
            const double b = len(gen);
            const double joint = survival_probability(a + b, m);
            CHECK(joint == doctest::Approx(survival_probability(a, m) * survival_probability(b, m)).epsilon(1e-12));
            CHECK(joint > 0.0);
            CHECK(joint <= 1.0);
        }
    }
}

TEST_CASE("BSM success probability")
{
    PhysParams p;
    CHECK(std::abs(bsm_success_probability(10.0, p) - 0.31063) < 1e-4);
    CHECK(bsm_success_probability(0.0, p) == 0.5);
    p.p_bsa = 0.0;
    CHECK(bsm_success_probability(10.0, p) == 0.0);
}

TEST_CASE("fiber latency")
{
    PhysParams p;
    CHECK(one_way_latency(0.0, p).ticks == 0);
    // 10 km / 208189 km/s = 48.033277... microseconds.
    const long double exact = 10.0L / 208189.0L * 1e12L;
    const SimTime t10 = one_way_latency(10.0, p);
    CHECK(t10.ticks == 48'033'277);
    CHECK(std::fabs(static_cast<long double>(t10.ticks) - exact) <= 0.5L);
    CHECK(std::llabs(one_way_latency(20.0, p).ticks - 2 * t10.ticks) <= 1);
    CHECK_THROWS_AS(one_way_latency(-0.1, p), std::invalid_argument);
}

TEST_CASE("parameter validation")
{
    PhysParams p;
    CHECK_NOTHROW(p.validate());
    p.p_bsa = 0.6;
    CHECK_THROWS(p.validate());
    p = PhysParams{};
    p.c_fiber_km_s = 0.0;
    CHECK_THROWS(p.validate());
    p = PhysParams{};
    p.loss = ExponentialLoss{0.0};
    CHECK_THROWS(p.validate());
    p = PhysParams{};
    p.loss = DecibelLoss{-1.0};
    CHECK_THROWS(p.validate());
}

TEST_CASE("pulse period")
{
    CHECK(period_from_rate(1e6).ticks == 1'000'000);
    CHECK(period_from_rate(33512.0).ticks == std::llround(1e12 / 33512.0));
    CHECK_THROWS(period_from_rate(0.0));
}
