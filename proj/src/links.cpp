#include "qlinksim/links.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace qlinksim
{

std::string_view to_string(LinkKind kind)
{
    switch (kind)
    {
    case LinkKind::MIM: return "MIM";
    case LinkKind::MSM: return "MSM";
    case LinkKind::AdaptiveMSM: return "aMSM";
    }
    return "?";
}

LinkKind parse_link_kind(std::string_view text)
{
    if (text == "MIM" || text == "mim")
        return LinkKind::MIM;
    if (text == "MSM" || text == "msm")
        return LinkKind::MSM;
    if (text == "aMSM" || text == "amsm" || text == "adaptive" || text == "AdaptiveMSM")
        return LinkKind::AdaptiveMSM;
    throw std::invalid_argument("unknown link kind '" + std::string(text) + "' (expected MIM, MSM or aMSM)");
}

void LinkSpec::validate() const
{
    if (!(span_km > 0.0))
        throw std::invalid_argument("link span must be positive");
    if (!(std::abs(midpoint_offset_km) < span_km / 2.0))
        throw std::invalid_argument("midpoint offset must be strictly inside the span");
    if (mem_per_qnic < 1)
        throw std::invalid_argument("mem_per_qnic must be at least 1");
    if (mem_per_qnic >= (1 << 20))
        throw std::invalid_argument("mem_per_qnic too large");
    params.validate();
}

PauliFrame draw_link_frame(RandomStream& rng)
{
    return rng.uniform_below(2) == 0 ? PauliFrame{0} : PauliFrame{3};
}

//---------------------------------------------------------------------------//

Qnic::Qnic(int size)
{
    slots_.resize(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i)
        slots_[static_cast<std::size_t>(i)].id = i;
}

std::optional<int> Qnic::first_free() const
{
    for (const auto& s : slots_)
        if (s.state == SlotState::Free)
            return s.id;
    return std::nullopt;
}

int Qnic::count(SlotState st) const
{
    return static_cast<int>(
        std::count_if(slots_.begin(), slots_.end(), [st](const MemorySlot& s) { return s.state == st; }));
}

//---------------------------------------------------------------------------//

void LatchProbe::record(Side side, std::int64_t index, Outcome outcome)
{
    auto& v = outcomes_[index_of(side)];
    if (index >= static_cast<std::int64_t>(v.size()))
        v.resize(static_cast<std::size_t>(index) + 1, Outcome::Unseen);
    v[static_cast<std::size_t>(index)] = outcome;
}

LatchProbe::Outcome LatchProbe::outcome(Side side, std::int64_t index) const
{
    const auto& v = outcomes_[index_of(side)];
    if (index < 0 || index >= static_cast<std::int64_t>(v.size()))
        return Outcome::Unseen;
    return v[static_cast<std::size_t>(index)];
}

std::int64_t LatchProbe::complete_indices() const
{
    return static_cast<std::int64_t>(std::min(outcomes_[0].size(), outcomes_[1].size()));
}

LatchProbe::Statistic LatchProbe::recurrence(int m) const
{
    Statistic st;
    if (m < 0)
        throw std::invalid_argument("window length must be non-negative");
    for (Side a : {Side::Left, Side::Right})
    {
        const Side b = opposite(a);
        const auto& va = outcomes_[index_of(a)];
        const auto& vb = outcomes_[index_of(b)];
        const std::int64_t last = static_cast<std::int64_t>(vb.size()) - 1;
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(va.size()); ++i)
        {
            if (va[static_cast<std::size_t>(i)] != Outcome::Latched)
                continue;
            if (i + m > last)
                break;
            if (vb[static_cast<std::size_t>(i)] != Outcome::Failed)
                continue;
            ++st.windows;
            for (std::int64_t j = i + 1; j <= i + m; ++j)
            {
                if (vb[static_cast<std::size_t>(j)] == Outcome::Latched)
                {
                    ++st.recurrences;
                    break;
                }
            }
        }
    }
    return st;
}

//---------------------------------------------------------------------------//

Link::Link(int link_id, LinkSpec spec, Engine& engine, std::uint64_t trial_seed)
    : id_(link_id),
      spec_((spec.validate(), std::move(spec))),
      engine_(engine),
      trial_seed_(trial_seed),
      name_("link" + std::to_string(link_id)),
      qnics_{Qnic(spec_.mem_per_qnic), Qnic(spec_.mem_per_qnic)}
{
}

std::unique_ptr<Link> Link::create(int link_id, const LinkSpec& spec, Engine& engine, std::uint64_t trial_seed)
{
    if (spec.kind == LinkKind::MIM)
        return std::make_unique<MimLink>(link_id, spec, engine, trial_seed);
    return std::make_unique<MsmLink>(link_id, spec, engine, trial_seed);
}

void Link::release(Side side, int slot)
{
    MemorySlot& s = mutable_qnic(side).slot(slot);
    if (s.state != SlotState::Entangled)
    {
        std::ostringstream os;
        os << name_ << ": release of slot " << slot << " on the "
           << (side == Side::Left ? "left" : "right") << " node, which holds no pair";
        throw ProtocolFault(os.str());
    }
    s.state = SlotState::Free;
    s.tag = -1;
}

void Link::notify(const LinkEndpoint& ep)
{
    if (listener_ != nullptr)
        listener_->on_link_endpoint(ep);
}

//---------------------------------------------------------------------------//
// MIM
//---------------------------------------------------------------------------//

MimLink::MimLink(int link_id, const LinkSpec& spec, Engine& engine, std::uint64_t trial_seed)
    : Link(link_id, spec, engine, trial_seed),
      lat_{one_way_latency(spec_.arm_left_km(), spec_.params),
           one_way_latency(spec_.arm_right_km(), spec_.params)},
      lat_max_(std::max(lat_[0], lat_[1])),
      spacing_(period_from_rate(spec_.params.f_bsa_hz)),
      p_position_(spec_.params.p_bsa * survival_probability(spec_.arm_left_km(), spec_.params.loss) *
                  survival_probability(spec_.arm_right_km(), spec_.params.loss)),
      bsa_rng_(trial_seed, name_ + ".bsa")
{
}

SimTime MimLink::emission_time(Side s, SimTime bsa_arrival) const
{
    return bsa_arrival - lat_[index_of(s)];
}

void MimLink::start()
{
    round_ = 0;
    emitted_sides_ = 0;
    round_arrival_ = engine_.now() + lat_max_;
    for (Side s : {Side::Left, Side::Right})
        engine_.schedule(emission_time(s, round_arrival_), EventKind::TrainEmission, this, round_, index_of(s));
}

std::vector<MimLink::PositionResult> MimLink::process_train(std::size_t left_len,
                                                            std::size_t right_len,
                                                            double p_position,
                                                            RandomStream& rng)
{
    std::vector<PositionResult> out(std::max(left_len, right_len));
    const std::size_t paired = std::min(left_len, right_len);
    for (std::size_t k = 0; k < paired; ++k)
    {
        if (rng.bernoulli(p_position))
            out[k] = PositionResult{true, draw_link_frame(rng)};
    }
    return out;
}

void MimLink::handle(const Event& ev)
{
    switch (ev.kind)
    {
    case EventKind::TrainEmission: emit_train(static_cast<Side>(ev.arg1), ev.arg0); break;
    case EventKind::BsaDetection: detect(ev.arg0); break;
    case EventKind::ClassicalDelivery: on_batch(static_cast<Side>(ev.arg1), ev.arg0, SimTime{ev.arg2}); break;
    default: throw ProtocolFault(name_ + ": unexpected event " + std::string(to_string(ev.kind)));
    }
}

std::string MimLink::describe(const Event& ev) const
{
    std::ostringstream os;
    switch (ev.kind)
    {
    case EventKind::TrainEmission:
        os << "round=" << ev.arg0 << " side=" << (ev.arg1 == 0 ? "L" : "R");
        break;
    case EventKind::BsaDetection: os << "round=" << ev.arg0; break;
    case EventKind::ClassicalDelivery:
        os << "batch round=" << ev.arg0 << " to=" << (ev.arg1 == 0 ? "L" : "R") << " next=" << ev.arg2;
        break;
    default: os << ev.arg0;
    }
    return os.str();
}

void MimLink::emit_train(Side s, std::int64_t round)
{
    if (round != round_)
    {
        std::ostringstream os;
        os << name_ << ": train for round " << round << " emitted during round " << round_;
        throw ProtocolFault(os.str());
    }
    Train& train = trains_[index_of(s)];
    train.round = round;
    train.emitted_at = engine_.now();
    train.slots.clear();
    for (MemorySlot& slot : mutable_qnic(s).slots())
    {
        if (slot.state != SlotState::Free)
            continue;
        slot.state = SlotState::AwaitingResult;
        slot.tag = round;
        train.slots.push_back(slot.id);
    }

    if (++emitted_sides_ == 2)
    {
        const auto longest = static_cast<std::int64_t>(
            std::max(trains_[0].slots.size(), trains_[1].slots.size()));
        const SimTime last_photon = round_arrival_ + spacing_ * std::max<std::int64_t>(longest - 1, 0);
        engine_.schedule(last_photon, EventKind::BsaDetection, this, round);
    }
}

void MimLink::detect(std::int64_t round)
{
    batch_ = process_train(trains_[0].slots.size(), trains_[1].slots.size(), p_position_, bsa_rng_);
    batch_round_ = round;

    const SimTime next_arrival = engine_.now() + lat_max_ * 2;
    for (Side s : {Side::Left, Side::Right})
    {
        engine_.schedule(engine_.now() + lat_[index_of(s)], EventKind::ClassicalDelivery, this, round,
                         index_of(s), next_arrival.ticks);
    }
    round_ = round + 1;
    round_arrival_ = next_arrival;
    emitted_sides_ = 0;
}

void MimLink::on_batch(Side s, std::int64_t round, SimTime next_arrival)
{
    const Train& train = trains_[index_of(s)];
    if (train.round != round || batch_round_ != round)
    {
        std::ostringstream os;
        os << name_ << ": batch for round " << round << " does not match the outstanding train (round "
           << train.round << ")";
        throw ProtocolFault(os.str());
    }

    const Train& partner = trains_[index_of(opposite(s))];
    std::vector<LinkEndpoint> ready;
    Qnic& q = mutable_qnic(s);
    for (std::size_t k = 0; k < train.slots.size(); ++k)
    {
        MemorySlot& slot = q.slot(train.slots[k]);
        const PositionResult& r = batch_[k];
        if (r.success)
        {
            slot.state = SlotState::Entangled;
            LinkEndpoint ep;
            ep.link_id = id_;
            ep.serial = (round << 20) | static_cast<std::int64_t>(k);
            ep.side = s;
            ep.slot = slot.id;
            ep.partner_slot = partner.slots[k];
            ep.frame = r.frame;
            ep.established_at = engine_.now();
            ready.push_back(ep);
            if (s == Side::Left)
                ++established_pairs_;
        }
        else
        {
            slot.state = SlotState::Free;
            slot.tag = -1;
        }
    }

    for (const LinkEndpoint& ep : ready)
        notify(ep);

    // Scheduled after the listener ran so that slots it frees at this tick
    // (same-tick swaps, end-to-end consumption) join the next train.
    engine_.schedule(emission_time(s, next_arrival), EventKind::TrainEmission, this, round + 1, index_of(s));
}

//---------------------------------------------------------------------------//
// MSM
//---------------------------------------------------------------------------//

double compute_adaptive_rate(const LinkSpec& spec)
{
    const double c = spec.params.c_fiber_km_s;
    const double n = static_cast<double>(spec.mem_per_qnic);
    double rate = spec.params.f_bsa_hz;
    for (Side s : {Side::Left, Side::Right})
    {
        const double arm = spec.arm_km(s);
        const double p = bsm_success_probability(arm, spec.params);
        if (arm <= 0.0 || p <= 0.0)
            continue; // no constraint from this side
        rate = std::min(rate, std::ceil(n * c / (2.0 * p * arm)));
    }
    return rate;
}

MsmLink::MsmLink(int link_id, const LinkSpec& spec, Engine& engine, std::uint64_t trial_seed)
    : Link(link_id, spec, engine, trial_seed),
      rate_hz_(spec_.kind == LinkKind::AdaptiveMSM ? compute_adaptive_rate(spec_)
                                                   : spec_.params.f_epps_default_hz),
      period_(period_from_rate(rate_hz_)),
      arm_lat_{one_way_latency(spec_.arm_left_km(), spec_.params),
               one_way_latency(spec_.arm_right_km(), spec_.params)},
      notify_lat_(one_way_latency(spec_.arm_left_km() + spec_.arm_right_km(), spec_.params)),
      p_side_{bsm_success_probability(spec_.arm_left_km(), spec_.params),
              bsm_success_probability(spec_.arm_right_km(), spec_.params)},
      rng_{RandomStream(trial_seed, name_ + ".left"), RandomStream(trial_seed, name_ + ".right")}
{
    if (period_.ticks <= 0)
        throw std::invalid_argument(name_ + ": EPPS period rounds to zero ticks");
}

void MsmLink::start()
{
    engine_.schedule(engine_.now(), EventKind::PhotonPairEmission, this, next_index_);
}

void MsmLink::handle(const Event& ev)
{
    switch (ev.kind)
    {
    case EventKind::PhotonPairEmission: emit(ev.arg0); break;
    case EventKind::PhotonArrival: on_photon(static_cast<Side>(ev.arg1), ev.arg0); break;
    case EventKind::ClassicalDelivery:
        on_partner_result(static_cast<Side>(ev.arg1), ev.arg0, (ev.arg2 & 1) != 0,
                          PauliFrame{static_cast<std::uint8_t>((ev.arg2 >> 1) & 3)}, static_cast<int>(ev.arg3));
        break;
    default: throw ProtocolFault(name_ + ": unexpected event " + std::string(to_string(ev.kind)));
    }
}

std::string MsmLink::describe(const Event& ev) const
{
    std::ostringstream os;
    switch (ev.kind)
    {
    case EventKind::PhotonPairEmission: os << "index=" << ev.arg0; break;
    case EventKind::PhotonArrival: os << "index=" << ev.arg0 << " at=" << (ev.arg1 == 0 ? "L" : "R"); break;
    case EventKind::ClassicalDelivery:
        os << "result index=" << ev.arg0 << " to=" << (ev.arg1 == 0 ? "L" : "R")
           << " success=" << (ev.arg2 & 1) << " frame=" << ((ev.arg2 >> 1) & 3);
        break;
    default: os << ev.arg0;
    }
    return os.str();
}

void MsmLink::emit(std::int64_t index)
{
    next_index_ = index + 1;
    const SimTime now = engine_.now();
    engine_.schedule(now + arm_lat_[0], EventKind::PhotonArrival, this, index, 0);
    engine_.schedule(now + arm_lat_[1], EventKind::PhotonArrival, this, index, 1);
    engine_.schedule(now + period_, EventKind::PhotonPairEmission, this, index + 1);
}

void MsmLink::on_photon(Side s, std::int64_t index)
{
    const int si = index_of(s);
    if (index <= last_seen_[si])
    {
        std::ostringstream os;
        os << name_ << ": photon for pair index " << index << " arrived twice (last seen " << last_seen_[si]
           << ")";
        throw ProtocolFault(os.str());
    }
    last_seen_[si] = index;

    const SimTime deliver = engine_.now() + notify_lat_;
    const std::int64_t to = index_of(opposite(s));
    Qnic& q = mutable_qnic(s);
    const std::optional<int> free = q.first_free();
    if (!free)
    {
        if (probe_ != nullptr)
            probe_->record(s, index, LatchProbe::Outcome::Ignored);
        engine_.schedule(deliver, EventKind::ClassicalDelivery, this, index, to, 0, -1);
        return;
    }

    if (!rng_[si].bernoulli(p_side_[si]))
    {
        if (probe_ != nullptr)
            probe_->record(s, index, LatchProbe::Outcome::Failed);
        engine_.schedule(deliver, EventKind::ClassicalDelivery, this, index, to, 0, -1);
        return;
    }

    const PauliFrame frame = draw_link_frame(rng_[si]);
    MemorySlot& slot = q.slot(*free);
    slot.state = SlotState::AwaitingResult;
    slot.tag = index;
    latched_[si].push_back(Latch{index, slot.id, frame});
    if (probe_ != nullptr)
        probe_->record(s, index, LatchProbe::Outcome::Latched);
    engine_.schedule(deliver, EventKind::ClassicalDelivery, this, index, to, 1 | (frame.bits << 1), slot.id);
}

void MsmLink::on_partner_result(Side s, std::int64_t index, bool success, PauliFrame frame, int partner_slot)
{
    auto& pending = latched_[index_of(s)];
    if (pending.empty() || pending.front().index > index)
        return; // this node never latched that index
    if (pending.front().index < index)
    {
        std::ostringstream os;
        os << name_ << ": result for index " << index << " overtook the result for latched index "
           << pending.front().index;
        throw ProtocolFault(os.str());
    }

    const Latch latch = pending.front();
    pending.pop_front();
    MemorySlot& slot = mutable_qnic(s).slot(latch.slot);
    if (!success)
    {
        // Latch-fail: our memory held a photon whose partner was lost.
        slot.state = SlotState::Free;
        slot.tag = -1;
        return;
    }

    slot.state = SlotState::Entangled;
    if (s == Side::Left)
        ++established_pairs_;
    LinkEndpoint ep;
    ep.link_id = id_;
    ep.serial = index;
    ep.side = s;
    ep.slot = latch.slot;
    ep.partner_slot = partner_slot;
    ep.frame = latch.frame ^ frame;
    ep.established_at = engine_.now();
    notify(ep);
}

} // namespace qlinksim
