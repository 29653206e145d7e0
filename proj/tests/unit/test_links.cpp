#include "qlinksim/links.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <vector>

using namespace qlinksim;

namespace
{

LinkSpec make_spec(LinkKind kind, double span, int n, double offset = 0.0)
{
    LinkSpec s;
    s.kind = kind;
    s.span_km = span;
    s.mem_per_qnic = n;
    s.midpoint_offset_km = offset;
    return s;
}

// Collects endpoints; optionally releases a pair once both ends reported.
struct Collector final : LinkListener
{
    Link* link = nullptr;
    bool release = true;
    std::vector<LinkEndpoint> seen;
    std::map<std::int64_t, LinkEndpoint> half;
    std::int64_t pairs = 0;
    std::int64_t frame_mismatch = 0;

    void on_link_endpoint(const LinkEndpoint& ep) override
    {
        seen.push_back(ep);
        auto [it, inserted] = half.emplace(ep.serial, ep);
        if (inserted)
            return;
        const LinkEndpoint first = it->second;
        half.erase(it);
        ++pairs;
        if (!(first.frame == ep.frame) || first.side == ep.side || first.slot != ep.partner_slot ||
            ep.slot != first.partner_slot)
            ++frame_mismatch;
        if (release)
        {
            link->release(first.side, first.slot);
            link->release(ep.side, ep.slot);
        }
    }
};

std::vector<std::pair<std::int64_t, std::string>> trace_lines(const std::string& text, const std::string& kind)
{
    std::vector<std::pair<std::int64_t, std::string>> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
    {
        std::istringstream ls(line);
        std::string t, entity, k, rest;
        std::getline(ls, t, '\t');
        std::getline(ls, entity, '\t');
        std::getline(ls, k, '\t');
        std::getline(ls, rest);
        if (k == kind)
            out.emplace_back(std::stoll(t), rest);
    }
    return out;
}

} // namespace

TEST_CASE("link spec validation and arms")
{
    const LinkSpec s = make_spec(LinkKind::MIM, 4.0, 2, 1.0);
    CHECK(s.arm_left_km() == 3.0);
    CHECK(s.arm_right_km() == 1.0);
    CHECK(s.arm_left_km() + s.arm_right_km() == s.span_km);
    CHECK_THROWS(make_spec(LinkKind::MIM, 0.0, 1).validate());
    CHECK_THROWS(make_spec(LinkKind::MIM, 4.0, 1, 2.0).validate());
    CHECK_THROWS(make_spec(LinkKind::MIM, 4.0, 0).validate());
    CHECK(parse_link_kind("aMSM") == LinkKind::AdaptiveMSM);
    CHECK_THROWS(parse_link_kind("XYZ"));
}

//---------------------------------------------------------------------------//
// MIM
//---------------------------------------------------------------------------//

TEST_CASE("MIM symmetric trains reach the BSA together")
{
    Engine e;
    MimLink link(0, make_spec(LinkKind::MIM, 1.0, 1), e, 1);
    link.start();
    e.step();
    e.step();
    const auto& l = link.current_train(Side::Left);
    const auto& r = link.current_train(Side::Right);
    REQUIRE(l.round == 0);
    REQUIRE(r.round == 0);
    CHECK(l.emitted_at == r.emitted_at);
    CHECK(l.slots.size() == 1);
    CHECK(r.slots.size() == 1);
    const SimTime lat = one_way_latency(0.5, PhysParams{});
    CHECK(l.emitted_at + lat == link.emission_time(Side::Left, lat) + lat);
}

TEST_CASE("MIM offset midpoint: the far node emits first")
{
    Engine e;
    MimLink link(0, make_spec(LinkKind::MIM, 4.0, 1, 1.0), e, 1);
    link.start();
    e.step();
    e.step();
    const PhysParams p;
    const SimTime skew = one_way_latency(3.0, p) - one_way_latency(1.0, p);
    CHECK(link.current_train(Side::Right).emitted_at - link.current_train(Side::Left).emitted_at == skew);
    // Arrival times agree.
    CHECK(link.current_train(Side::Left).emitted_at + one_way_latency(3.0, p) ==
          link.current_train(Side::Right).emitted_at + one_way_latency(1.0, p));
}

TEST_CASE("MIM photons are spaced by the BSA period")
{
    Engine e;
    std::ostringstream trace;
    e.set_trace(&trace);
    MimLink link(0, make_spec(LinkKind::MIM, 1.0, 4), e, 1);
    CHECK(link.photon_spacing().ticks == 1'000'000);
    link.start();
    e.run_until([&] { return e.processed() >= 3; }, "first detection");
    const auto det = trace_lines(trace.str(), "BsaDetection");
    REQUIRE(det.size() == 1);
    // Four photons: the last reaches the BSA three spacings after the first.
    CHECK(det[0].first == one_way_latency(0.5, PhysParams{}).ticks + 3'000'000);
}

TEST_CASE("MIM per-position success probability")
{
    const LinkSpec s = make_spec(LinkKind::MIM, 1.0, 1);
    Engine e;
    MimLink link(0, s, e, 1);
    CHECK(link.position_success_probability() ==
          doctest::Approx(0.5 * std::exp(-0.5 / 21.0) * std::exp(-0.5 / 21.0)).epsilon(1e-12));
    CHECK(link.position_success_probability() == doctest::Approx(0.4767).epsilon(1e-3));

    RandomStream rng(11, "bsa");
    const auto res = MimLink::process_train(100'000, 100'000, link.position_success_probability(), rng);
    std::size_t ok = 0;
    std::size_t xz = 0;
    for (const auto& r : res)
    {
        ok += r.success ? 1 : 0;
        xz += (r.success && r.frame.bits == 3) ? 1 : 0;
        CHECK((r.frame.bits == 0 || r.frame.bits == 3));
    }
    CHECK(std::abs(static_cast<double>(ok) / 1e5 - 0.4767) <= 0.005);
    CHECK(static_cast<double>(xz) / static_cast<double>(ok) == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("MIM with p_bsa = 0 never succeeds; unpaired positions fail")
{
    RandomStream rng(1, "bsa");
    for (const auto& r : MimLink::process_train(64, 64, 0.0, rng))
        CHECK_FALSE(r.success);
    const auto res = MimLink::process_train(2, 5, 1.0, rng);
    REQUIRE(res.size() == 5);
    CHECK(res[0].success);
    CHECK(res[1].success);
    for (std::size_t k = 2; k < 5; ++k)
        CHECK_FALSE(res[k].success);
}

TEST_CASE("MIM batch: successes lock, failures rejoin the next train")
{
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
    {
        Engine e;
        MimLink link(0, make_spec(LinkKind::MIM, 1.0, 3), e, seed);
        Collector c;
        c.link = &link;
        c.release = false;
        link.set_listener(&c);
        link.start();
        // Run to the second left train.
        e.run_until([&] { return link.current_train(Side::Left).round == 1; }, "second train");
        const int entangled = link.qnic(Side::Left).count(SlotState::Entangled);
        CHECK(static_cast<int>(link.current_train(Side::Left).slots.size()) == 3 - entangled);
        for (int slot : link.current_train(Side::Left).slots)
            CHECK(link.qnic(Side::Left).slot(slot).state == SlotState::AwaitingResult);
    }
}

TEST_CASE("MIM endpoints agree on serial, slots and frame")
{
    Engine e;
    MimLink link(0, make_spec(LinkKind::MIM, 3.0, 4, 0.7), e, 5);
    Collector c;
    c.link = &link;
    link.set_listener(&c);
    link.start();
    e.run_until([&] { return c.pairs >= 500; }, "500 pairs");
    CHECK(c.frame_mismatch == 0);
    CHECK(link.established_pairs() >= 500);
}

TEST_CASE("releasing a slot without a pair is a fault")
{
    Engine e;
    MimLink link(0, make_spec(LinkKind::MIM, 1.0, 1), e, 1);
    CHECK_THROWS_AS(link.release(Side::Left, 0), ProtocolFault);
}

//---------------------------------------------------------------------------//
// MSM
//---------------------------------------------------------------------------//

TEST_CASE("MSM source emits at the pulse period")
{
    Engine e;
    std::ostringstream trace;
    e.set_trace(&trace);
    MsmLink link(0, make_spec(LinkKind::MSM, 1.0, 1), e, 1);
    link.start();
    e.run_until([&] { return link.next_pair_index() >= 5; }, "five emissions");
    const auto em = trace_lines(trace.str(), "PhotonPairEmission");
    REQUIRE(em.size() == 5);
    for (std::size_t i = 0; i < em.size(); ++i)
        CHECK(em[i].first == static_cast<std::int64_t>(i) * 1'000'000);
}

TEST_CASE("MSM with N = 1 ignores photons while the memory is latched")
{
    Engine e;
    const LinkSpec s = make_spec(LinkKind::MSM, 20.0, 1);
    MsmLink link(0, s, e, 3);
    Collector c;
    c.link = &link;
    link.set_listener(&c);
    LatchProbe probe;
    link.attach_probe(&probe);
    link.start();
    e.run_until([&] { return link.next_pair_index() >= 20'000; }, "20k emissions");

    // A latch holds the memory for the full node-to-node delay (96 pulses at
    // 20 km), so at least the next 95 indices must be ignored.
    const std::int64_t hold = one_way_latency(20.0, s.params).ticks / 1'000'000;
    std::int64_t checked = 0;
    for (Side side : {Side::Left, Side::Right})
    {
        for (std::int64_t i = 0; i + hold < probe.complete_indices(); ++i)
        {
            if (probe.outcome(side, i) != LatchProbe::Outcome::Latched)
                continue;
            for (std::int64_t j = i + 1; j < i + hold; ++j)
                CHECK(probe.outcome(side, j) == LatchProbe::Outcome::Ignored);
            ++checked;
        }
    }
    CHECK(checked > 50);
}

TEST_CASE("MSM latch-fail release happens one span delay after the partner's decision")
{
    Engine e;
    const LinkSpec s = make_spec(LinkKind::MSM, 20.0, 1);
    MsmLink link(0, s, e, 9);
    Collector c;
    c.link = &link;
    link.set_listener(&c);
    LatchProbe probe;
    link.attach_probe(&probe);

    // Watch the left slot for AwaitingResult -> Free transitions.
    std::vector<std::pair<std::int64_t, std::int64_t>> frees; // (index, tick)
    std::int64_t tag = -1;
    e.set_post_event_hook([&](const Event&) {
        const MemorySlot& slot = link.qnic(Side::Left).slot(0);
        if (slot.state == SlotState::AwaitingResult)
            tag = slot.tag;
        else if (tag >= 0)
        {
            // Successful pairs are released by the collector in the same event.
            if (slot.state == SlotState::Free && probe.outcome(Side::Right, tag) != LatchProbe::Outcome::Latched)
                frees.emplace_back(tag, e.now().ticks);
            tag = -1;
        }
    });
    link.start();
    e.run_until([&] { return frees.size() >= 20; }, "20 latch-fail releases");

    const SimTime arm = one_way_latency(10.0, s.params);
    const SimTime span = one_way_latency(20.0, s.params);
    for (const auto& [index, tick] : frees)
    {
        CHECK(probe.outcome(Side::Left, index) == LatchProbe::Outcome::Latched);
        const auto right = probe.outcome(Side::Right, index);
        CHECK((right == LatchProbe::Outcome::Failed || right == LatchProbe::Outcome::Ignored));
        const SimTime decided = link.emission_period() * index + arm;
        CHECK(tick == (decided + span).ticks);
    }
}

TEST_CASE("MSM pairs form only on indices latched at both nodes")
{
    Engine e;
    MsmLink link(0, make_spec(LinkKind::MSM, 2.0, 4, 0.3), e, 4);
    Collector c;
    c.link = &link;
    link.set_listener(&c);
    LatchProbe probe;
    link.attach_probe(&probe);
    link.start();
    e.run_until([&] { return c.pairs >= 300; }, "300 pairs");
    CHECK(c.frame_mismatch == 0);
    for (const auto& ep : c.seen)
    {
        CHECK(probe.outcome(Side::Left, ep.serial) == LatchProbe::Outcome::Latched);
        CHECK(probe.outcome(Side::Right, ep.serial) == LatchProbe::Outcome::Latched);
    }
    // Conversely every doubly latched, completed index produced a pair.
    std::int64_t both = 0;
    std::int64_t horizon = 0;
    for (const auto& ep : c.seen)
        horizon = std::max(horizon, ep.serial);
    for (std::int64_t i = 0; i <= horizon; ++i)
        both += (probe.outcome(Side::Left, i) == LatchProbe::Outcome::Latched &&
                 probe.outcome(Side::Right, i) == LatchProbe::Outcome::Latched)
                    ? 1
                    : 0;
    CHECK(both == static_cast<std::int64_t>(c.pairs + c.half.size()));
}

TEST_CASE("adaptive EPPS rate")
{
    LinkSpec s = make_spec(LinkKind::AdaptiveMSM, 20.0, 1);
    const double f = compute_adaptive_rate(s);
    CHECK(std::abs(f - 33517.0) / 33517.0 <= 1e-3);
    // Oracle: N c / (2 p L) for L = 10 km.
    const double p = 0.5 * std::exp(-10.0 / 21.0);
    CHECK(f == std::ceil(208189.0 / (2.0 * p * 10.0)));

    s.mem_per_qnic = 1000;
    CHECK(compute_adaptive_rate(s) == 1e6);

    // Asymmetric 15 km / 5 km arms: the long arm sets the rate.
    LinkSpec a = make_spec(LinkKind::AdaptiveMSM, 20.0, 1, 5.0);
    const double p15 = 0.5 * std::exp(-15.0 / 21.0);
    const double p5 = 0.5 * std::exp(-5.0 / 21.0);
    const double f15 = std::ceil(208189.0 / (2.0 * p15 * 15.0));
    const double f5 = std::ceil(208189.0 / (2.0 * p5 * 5.0));
    CHECK(f15 < f5);
    CHECK(compute_adaptive_rate(a) == std::min(f15, f5));

    Engine e;
    MsmLink link(0, make_spec(LinkKind::AdaptiveMSM, 20.0, 1), e, 1);
    CHECK(link.effective_rate_hz() == f);
    MsmLink fixed(1, make_spec(LinkKind::MSM, 20.0, 64), e, 1);
    CHECK(fixed.effective_rate_hz() == 1e6);
}

TEST_CASE("latch probe recurrence counting")
{
    using O = LatchProbe::Outcome;
    LatchProbe p;
    // Left latches 0 while right fails; right latches 2.
    const O left[] = {O::Latched, O::Failed, O::Failed, O::Failed, O::Latched, O::Failed, O::Failed, O::Failed};
    const O right[] = {O::Failed, O::Failed, O::Latched, O::Ignored, O::Failed, O::Failed, O::Failed, O::Failed};
    for (int i = 0; i < 8; ++i)
    {
        p.record(Side::Left, i, left[i]);
        p.record(Side::Right, i, right[i]);
    }
    const auto st = p.recurrence(2);
    // Windows: left@0 recurs at 2; left@4 sees no right latch at 5, 6;
    // right@2 recurs when left latches 4.
    CHECK(st.windows == 3);
    CHECK(st.recurrences == 2);
}
