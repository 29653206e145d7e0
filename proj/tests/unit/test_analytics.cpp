#include "qlinksim/analytics.hpp"
#include "qlinksim/links.hpp"

#include <doctest.h>

#include <cmath>

using namespace qlinksim;

namespace
{
constexpr double c = 208189.0;
}

TEST_CASE("saturation threshold")
{
    CHECK(analytics::saturation_threshold(10.0, 0.310631, 1e6, c) == 30);
    CHECK(analytics::saturation_threshold(0.5, 0.5 * std::exp(-0.5 / 21.0), 1e6, c) == 3);
    CHECK(analytics::saturation_threshold(10.0, 0.310631, 1e-9, c) == 1);
}

TEST_CASE("latch window")
{
    CHECK(analytics::latch_window(10.0, 1e6, c) == 96);
    CHECK(analytics::latch_window(10.0, 33517.0, c) == 3);
    CHECK(analytics::latch_window(10.0, 0.0, c) == 0);
}

TEST_CASE("recurrence probability")
{
    CHECK(analytics::recurrence_probability(0.3106, 3) == doctest::Approx(0.6718).epsilon(5e-3 / 0.6718));
    const double p96 = analytics::recurrence_probability(0.3106, 96);
    CHECK(p96 <= 1.0);
    CHECK(1.0 - p96 < 1e-14);
    CHECK(analytics::recurrence_probability(0.3106, 0) == 0.0);
    // Oracle: direct product form.
    for (int m = 0; m < 40; ++m)
        CHECK(analytics::recurrence_probability(0.2, m) == doctest::Approx(1.0 - std::pow(0.8, m)).epsilon(1e-12));
}

TEST_CASE("recurrence is monotone in m and p")
{
    for (int m = 1; m < 50; ++m)
        CHECK(analytics::recurrence_probability(0.3, m) >= analytics::recurrence_probability(0.3, m - 1));
    for (int k = 1; k <= 10; ++k)
        CHECK(analytics::recurrence_probability(0.1 * k, 5) >= analytics::recurrence_probability(0.1 * (k - 1), 5));
}

TEST_CASE("latch model bundles window and probability")
{
    const auto m = analytics::latch_model(10.0, 0.310631, 1e6, c);
    CHECK(m.m == 96);
    CHECK(m.p_success == 0.310631);
    CHECK(m.p_at_least_one == doctest::Approx(1.0));
}

TEST_CASE("two-hop rate model")
{
    CHECK(analytics::predicted_two_hop_rate(1e-3, 0.0) == doctest::Approx(1000.0));
    CHECK(analytics::predicted_two_hop_rate(1e-3, 1e-3) == doctest::Approx(500.0));
}

TEST_CASE("adaptive rate lands at the saturation edge")
{
    // The ceiling in both formulas can overshoot N by one.
    for (int n : {1, 2, 4, 8, 16})
    {
        for (double span : {2.0, 10.0, 20.0, 40.0})
        {
            LinkSpec s;
            s.kind = LinkKind::AdaptiveMSM;
            s.span_km = span;
            s.mem_per_qnic = n;
            const double f = compute_adaptive_rate(s);
            const double p = bsm_success_probability(span / 2, s.params);
            const auto thr = analytics::saturation_threshold(span / 2, p, f, c);
            CHECK(thr <= n + 1);
            if (f < s.params.f_bsa_hz)
                CHECK(thr >= n);
        }
    }
}
