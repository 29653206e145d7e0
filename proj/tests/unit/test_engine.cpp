#include "qlinksim/engine.hpp"

#include <doctest.h>

#include <sstream>
#include <vector>

using namespace qlinksim;

namespace
{

// Records the order in which its events fire.
struct Recorder final : EventHandler
{
    std::vector<std::int64_t> fired;
    std::vector<std::int64_t> at;
    void handle(const Event& ev) override
    {
        fired.push_back(ev.arg0);
        at.push_back(ev.fire_at.ticks);
    }
    std::string_view entity_name() const override { return "recorder"; }
};

} // namespace

TEST_CASE("schedule enqueues and equal timestamps fire in insertion order")
{
    Engine e;
    Recorder r;
    e.schedule(SimTime{5}, EventKind::TrialEnd, &r, 1);
    e.schedule(SimTime{5}, EventKind::TrialEnd, &r, 2);
    e.schedule(SimTime{3}, EventKind::TrialEnd, &r, 0);
    CHECK(e.pending() == 3);
    while (e.step())
    {
    }
    CHECK(r.fired == std::vector<std::int64_t>{0, 1, 2});
    CHECK(r.at == std::vector<std::int64_t>{3, 5, 5});
}

TEST_CASE("many same-tick events keep FIFO order")
{
    Engine e;
    Recorder r;
    for (int i = 0; i < 1000; ++i)
        e.schedule(SimTime{i % 3}, EventKind::TrialEnd, &r, i);
    while (e.step())
    {
    }
    std::int64_t prev_t = -1;
    std::int64_t prev_arg = -1;
    for (std::size_t k = 0; k < r.fired.size(); ++k)
    {
        if (r.at[k] == prev_t)
            CHECK(r.fired[k] > prev_arg);
        CHECK(r.at[k] >= prev_t);
        prev_t = r.at[k];
        prev_arg = r.fired[k];
    }
}

TEST_CASE("scheduling in the past is a fault naming both timestamps")
{
    Engine e;
    Recorder r;
    e.schedule(SimTime{3}, EventKind::TrialEnd, &r);
    e.step();
    REQUIRE(e.now().ticks == 3);
    try
    {
        e.schedule(SimTime{2}, EventKind::TrialEnd, &r);
        FAIL("expected ProtocolFault");
    }
    catch (const ProtocolFault& f)
    {
        const std::string msg = f.what();
        CHECK(msg.find("t=2") != std::string::npos);
        CHECK(msg.find("t=3") != std::string::npos);
    }
}

TEST_CASE("run_until starves on an empty queue and names the predicate")
{
    Engine e;
    try
    {
        e.run_until([] { return false; }, "100 pairs delivered");
        FAIL("expected StarvedError");
    }
    catch (const StarvedError& s)
    {
        CHECK(std::string(s.what()).find("100 pairs delivered") != std::string::npos);
    }
}

TEST_CASE("run_until stops on TrialEnd")
{
    Engine e;
    Recorder r;
    e.schedule(SimTime{10}, EventKind::TrialEnd, &r);
    const SimTime t = e.run_until([&] { return !r.fired.empty(); }, "trial end");
    CHECK(t.ticks == 10);
}

TEST_CASE("event budget raises a timeout")
{
    struct Ticker final : EventHandler
    {
        Engine* e = nullptr;
        void handle(const Event& ev) override { e->schedule(ev.fire_at + SimTime{1}, EventKind::TrialEnd, this); }
        std::string_view entity_name() const override { return "ticker"; }
    } t;
    Engine e;
    t.e = &e;
    e.schedule(SimTime{0}, EventKind::TrialEnd, &t);
    CHECK_THROWS_AS(e.run_until([] { return false; }, "never", RunBudget{1000, 60.0}), TimeoutError);
}

TEST_CASE("trace lines are tab separated")
{
    Engine e;
    Recorder r;
    std::ostringstream os;
    e.set_trace(&os);
    e.schedule(SimTime{7}, EventKind::SwapCheck, &r, 4);
    e.step();
    CHECK(os.str() == "7\trecorder\tSwapCheck\t4,0,0,0\n");
}

TEST_CASE("SimTime rounds to the nearest picosecond, ties to even")
{
    CHECK(SimTime::from_seconds(0.0).ticks == 0);
    CHECK(SimTime::from_seconds(1e-12).ticks == 1);
    CHECK(SimTime::from_seconds(2.5e-12).ticks == 2);
    CHECK(SimTime::from_seconds(3.5e-12).ticks == 4);
}

TEST_CASE("bernoulli extremes and errors")
{
    RandomStream rng(42, "x");
    for (int i = 0; i < 1000; ++i)
    {
        CHECK_FALSE(rng.bernoulli(0.0));
        CHECK(rng.bernoulli(1.0));
    }
    CHECK_THROWS_AS(rng.bernoulli(-0.1), ProtocolFault);
    CHECK_THROWS_AS(rng.bernoulli(1.5), ProtocolFault);
}

TEST_CASE("bernoulli(0.5) over a million draws")
{
    RandomStream rng(7, "coin");
    int hits = 0;
    for (int i = 0; i < 1'000'000; ++i)
        hits += rng.bernoulli(0.5) ? 1 : 0;
    const double frac = hits / 1e6;
    CHECK(frac >= 0.498);
    CHECK(frac <= 0.502);
}

TEST_CASE("streams are reproducible and independent")
{
    RandomStream a1(99, "link0.left");
    RandomStream a2(99, "link0.left");
    RandomStream b(99, "link0.right");
    RandomStream a3(99, "link0.left");
    // Draining b must not perturb a3.
    for (int i = 0; i < 1000; ++i)
        b.next_u64();
    for (int i = 0; i < 100; ++i)
    {
        const auto v = a1.next_u64();
        CHECK(v == a2.next_u64());
        CHECK(v == a3.next_u64());
    }
    CHECK(RandomStream(99, "a").next_u64() != RandomStream(99, "b").next_u64());
    CHECK(RandomStream(1, "a").next_u64() != RandomStream(2, "a").next_u64());
}

TEST_CASE("uniform_below covers its range")
{
    RandomStream rng(3, "u");
    int counts[4] = {0, 0, 0, 0};
    for (int i = 0; i < 40'000; ++i)
        ++counts[rng.uniform_below(4)];
    for (int c : counts)
        CHECK(c == doctest::Approx(10'000).epsilon(0.05));
}
