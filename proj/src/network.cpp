#include "qlinksim/network.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace qlinksim
{

void Topology::validate() const
{
    if (links.empty())
        throw std::invalid_argument("a chain needs at least two nodes");
    for (const auto& l : links)
        l.validate();
}

Topology Topology::chain(int nodes, const LinkSpec& link)
{
    if (nodes < 2)
        throw std::invalid_argument("a chain needs at least two nodes");
    Topology t;
    t.links.assign(static_cast<std::size_t>(nodes - 1), link);
    return t;
}

//---------------------------------------------------------------------------//

SwapSchedule SwapSchedule::build(int node_count)
{
    if (node_count < 2)
        throw std::invalid_argument("swap schedule needs at least two nodes");
    SwapSchedule s;
    s.entries_.resize(static_cast<std::size_t>(node_count));
    s.bisect(0, node_count - 1);
    return s;
}

int SwapSchedule::bisect(int lo, int hi)
{
    if (hi - lo < 2)
        return 0;
    const int mid = lo + (hi - lo) / 2;
    const int level = 1 + std::max(bisect(lo, mid), bisect(mid, hi));
    entries_[static_cast<std::size_t>(mid)] = SwapEntry{mid, level, lo, hi};
    return level;
}

int SwapSchedule::depth() const
{
    int d = 0;
    for (const auto& e : entries_)
        if (e)
            d = std::max(d, e->level);
    return d;
}

void EndpointView::apply(int new_remote, PauliFrame update)
{
    remote = remote > self ? std::max(remote, new_remote) : std::min(remote, new_remote);
    frame = frame ^ update;
}

//---------------------------------------------------------------------------//

ChainNetwork::ChainNetwork(Engine& engine,
                           const Topology& topology,
                           std::uint64_t trial_seed,
                           std::int64_t target_pairs)
    : engine_(engine),
      topology_((topology.validate(), topology)),
      target_(target_pairs),
      schedule_(SwapSchedule::build(topology.node_count()))
{
    if (target_pairs < 1)
        throw std::invalid_argument("target_pairs must be at least 1");

    const int m = topology_.node_count();
    position_.assign(static_cast<std::size_t>(m), SimTime{});
    for (int i = 0; i < m - 1; ++i)
    {
        const LinkSpec& spec = topology_.links[static_cast<std::size_t>(i)];
        links_.push_back(Link::create(i, spec, engine_, trial_seed));
        links_.back()->set_listener(this);
        qubits_.emplace_back(static_cast<std::size_t>(2 * spec.mem_per_qnic));
        position_[static_cast<std::size_t>(i + 1)] =
            position_[static_cast<std::size_t>(i)] + one_way_latency(spec.span_km, spec.params);
    }
    for (int n = 0; n < m; ++n)
        swap_rng_.emplace_back(trial_seed, "node" + std::to_string(n) + ".swap");
    eligible_[0].resize(static_cast<std::size_t>(m));
    eligible_[1].resize(static_cast<std::size_t>(m));
}

ChainNetwork::~ChainNetwork() = default;

void ChainNetwork::start()
{
    for (auto& l : links_)
        l->start();
}

SimTime ChainNetwork::path_latency(int a, int b) const
{
    if (a > b)
        std::swap(a, b);
    return position_.at(static_cast<std::size_t>(b)) - position_.at(static_cast<std::size_t>(a));
}

ChainNetwork::QubitRecord& ChainNetwork::record(const QubitLoc& q)
{
    const int n = topology_.links[static_cast<std::size_t>(q.link)].mem_per_qnic;
    return qubits_[static_cast<std::size_t>(q.link)][static_cast<std::size_t>(index_of(q.side) * n + q.slot)];
}

const ChainNetwork::QubitRecord& ChainNetwork::record(const QubitLoc& q) const
{
    const int n = topology_.links[static_cast<std::size_t>(q.link)].mem_per_qnic;
    return qubits_[static_cast<std::size_t>(q.link)][static_cast<std::size_t>(index_of(q.side) * n + q.slot)];
}

void ChainNetwork::on_link_endpoint(const LinkEndpoint& ep)
{
    const QubitLoc self{ep.link_id, ep.side, ep.slot};
    const QubitLoc partner{ep.link_id, opposite(ep.side), ep.partner_slot};
    QubitRecord& rec = record(self);

    if (!rec.held)
    {
        // First endpoint to confirm: open the pair and reserve the partner qubit.
        QubitRecord& prec = record(partner);
        if (prec.held)
        {
            std::ostringstream os;
            os << "link" << ep.link_id << " slot " << ep.partner_slot << " already belongs to pair " << prec.pair;
            throw ProtocolFault(os.str());
        }
        const std::int64_t id = next_pair_id_++;
        SegmentRecord seg;
        seg.ends[0] = ep.side == Side::Left ? self : partner;
        seg.ends[1] = ep.side == Side::Left ? partner : self;
        seg.frame = ep.frame;
        seg.created_at = engine_.now();
        pairs_.emplace(id, seg);
        ++created_;

        rec = QubitRecord{true, false, false, id, ep.serial, partner.node(), PauliFrame{}};
        prec = QubitRecord{true, false, false, id, ep.serial, self.node(), PauliFrame{}};
    }
    else if (rec.established || rec.serial != ep.serial)
    {
        std::ostringstream os;
        os << "link" << ep.link_id << ": endpoints disagree on the pair (serial " << rec.serial << " vs "
           << ep.serial << ")";
        throw ProtocolFault(os.str());
    }

    rec.established = true;
    rec.remote = partner.node();
    rec.frame = ep.frame;
    qubit_ready(self);
}

void ChainNetwork::qubit_ready(const QubitLoc& q)
{
    QubitRecord& rec = record(q);
    const int node = q.node();
    const int last = node_count() - 1;

    if ((node == 0 && rec.remote == last) || (node == last && rec.remote == 0))
    {
        SegmentRecord& seg = pairs_.at(rec.pair);
        const int end = node == 0 ? 0 : 1;
        seg.confirmed[end] = engine_.now();
        if (seg.confirmed[1 - end])
            complete(rec.pair);
        return;
    }

    const auto& entry = schedule_.entry(node);
    if (!entry || rec.queued)
        return;
    // Left QNIC faces lower-numbered nodes.
    const bool left_qnic = q.side == Side::Right;
    const int target = left_qnic ? entry->left_target : entry->right_target;
    if (rec.remote != target)
        return;
    rec.queued = true;
    eligible_[left_qnic ? 0 : 1][static_cast<std::size_t>(node)].push_back(q);
    engine_.schedule(engine_.now(), EventKind::SwapCheck, this, node);
}

void ChainNetwork::try_swaps(int node)
{
    auto& left = eligible_[0][static_cast<std::size_t>(node)];
    auto& right = eligible_[1][static_cast<std::size_t>(node)];
    while (!left.empty() && !right.empty())
    {
        const QubitLoc l = left.front();
        const QubitLoc r = right.front();
        left.pop_front();
        right.pop_front();
        swap(node, l, r);
    }
}

void ChainNetwork::swap(int node, const QubitLoc& left, const QubitLoc& right)
{
    const std::int64_t id_l = record(left).pair;
    const std::int64_t id_r = record(right).pair;
    const SegmentRecord seg_l = pairs_.at(id_l);
    const SegmentRecord seg_r = pairs_.at(id_r);
    const QubitLoc a = seg_l.ends[0];
    const QubitLoc b = seg_r.ends[1];
    if (!(seg_l.ends[1] == left) || !(seg_r.ends[0] == right))
        throw ProtocolFault("swap at node " + std::to_string(node) + " on qubits that are not pair ends");

    // Deterministic Bell measurement: four equally likely outcomes.
    const PauliFrame outcome{static_cast<std::uint8_t>(swap_rng_[static_cast<std::size_t>(node)].uniform_below(4))};

    const std::int64_t id = next_pair_id_++;
    SegmentRecord merged;
    merged.ends[0] = a;
    merged.ends[1] = b;
    merged.frame = seg_l.frame ^ seg_r.frame ^ outcome;
    merged.created_at = engine_.now();
    pairs_.erase(id_l);
    pairs_.erase(id_r);
    pairs_.emplace(id, merged);
    record(a).pair = id;
    record(b).pair = id;
    ++swaps_;

    free_qubit(left);
    free_qubit(right);

    const auto pack = [](const QubitLoc& q) { return (static_cast<std::int64_t>(index_of(q.side)) << 32) | q.slot; };
    engine_.schedule(engine_.now() + path_latency(node, a.node()), EventKind::ClassicalDelivery, this, a.link,
                     pack(a), b.node(), (seg_r.frame ^ outcome).bits);
    engine_.schedule(engine_.now() + path_latency(node, b.node()), EventKind::ClassicalDelivery, this, b.link,
                     pack(b), a.node(), (seg_l.frame ^ outcome).bits);
}

void ChainNetwork::deliver_correction(const QubitLoc& q, int new_remote, PauliFrame update)
{
    QubitRecord& rec = record(q);
    if (!rec.held || !rec.established)
    {
        std::ostringstream os;
        os << "swap correction for node " << q.node() << " link" << q.link << " slot " << q.slot
           << ", which holds no established pair";
        throw ProtocolFault(os.str());
    }
    EndpointView view{q.node(), rec.remote, rec.frame};
    view.apply(new_remote, update);
    rec.remote = view.remote;
    rec.frame = view.frame;
    qubit_ready(q);
}

void ChainNetwork::complete(std::int64_t pair_id)
{
    const SegmentRecord seg = pairs_.at(pair_id);
    const QubitRecord& l = record(seg.ends[0]);
    const QubitRecord& r = record(seg.ends[1]);
    if (!(l.frame == seg.frame) || !(r.frame == seg.frame))
        throw ProtocolFault("end-to-end pair " + std::to_string(pair_id) + " endpoints disagree on the Pauli frame");

    DeliveredPair d;
    d.left_confirmed = *seg.confirmed[0];
    d.right_confirmed = *seg.confirmed[1];
    d.completed_at = std::max(d.left_confirmed, d.right_confirmed);
    d.frame = seg.frame;
    deliveries_.push_back(d);

    pairs_.erase(pair_id);
    free_qubit(seg.ends[0]);
    free_qubit(seg.ends[1]);

    if (++delivered_ == target_)
    {
        completion_ = d.completed_at;
        engine_.schedule(engine_.now(), EventKind::TrialEnd, this);
    }
}

void ChainNetwork::free_qubit(const QubitLoc& q)
{
    record(q) = QubitRecord{};
    link(q.link).release(q.side, q.slot);
}

void ChainNetwork::handle(const Event& ev)
{
    switch (ev.kind)
    {
    case EventKind::SwapCheck: try_swaps(static_cast<int>(ev.arg0)); break;
    case EventKind::ClassicalDelivery:
    {
        const QubitLoc q{static_cast<int>(ev.arg0), static_cast<Side>(ev.arg1 >> 32),
                         static_cast<int>(ev.arg1 & 0xffffffff)};
        deliver_correction(q, static_cast<int>(ev.arg2), PauliFrame{static_cast<std::uint8_t>(ev.arg3)});
        break;
    }
    case EventKind::TrialEnd: finished_ = true; break;
    default: throw ProtocolFault("network: unexpected event " + std::string(to_string(ev.kind)));
    }
}

std::string ChainNetwork::describe(const Event& ev) const
{
    std::ostringstream os;
    switch (ev.kind)
    {
    case EventKind::SwapCheck: os << "node=" << ev.arg0; break;
    case EventKind::ClassicalDelivery:
    {
        const QubitLoc q{static_cast<int>(ev.arg0), static_cast<Side>(ev.arg1 >> 32),
                         static_cast<int>(ev.arg1 & 0xffffffff)};
        os << "correction node=" << q.node() << " link=" << q.link << " slot=" << q.slot
           << " remote=" << ev.arg2 << " frame=" << ev.arg3;
        break;
    }
    case EventKind::TrialEnd: os << "delivered=" << delivered_; break;
    default: os << ev.arg0;
    }
    return os.str();
}

void ChainNetwork::check_invariants() const
{
    std::int64_t held = 0;
    for (std::size_t li = 0; li < links_.size(); ++li)
    {
        const Link& l = *links_[li];
        const int n = l.spec().mem_per_qnic;
        for (Side s : {Side::Left, Side::Right})
        {
            const Qnic& q = l.qnic(s);
            if (q.count(SlotState::Free) + q.count(SlotState::AwaitingResult) + q.count(SlotState::Entangled) != n)
                throw ProtocolFault("slot conservation violated on " + std::string(l.entity_name()));
            for (const MemorySlot& slot : q.slots())
            {
                const QubitLoc loc{static_cast<int>(li), s, slot.id};
                const QubitRecord& rec = record(loc);
                const bool ent = slot.state == SlotState::Entangled;
                std::string problem;
                if (rec.held && rec.established && !ent)
                    problem = "pair qubit in a non-entangled slot";
                else if (ent && !(rec.held && rec.established))
                    problem = "entangled slot unknown to the network";
                else if (rec.held && !rec.established && slot.state != SlotState::AwaitingResult)
                    problem = "reserved qubit not awaiting its result";
                if (!problem.empty())
                {
                    std::ostringstream os;
                    os << problem << " (link" << li << (s == Side::Left ? " L" : " R") << " slot " << slot.id << ")";
                    throw ProtocolFault(os.str());
                }
                if (rec.held)
                {
                    ++held;
                    const auto it = pairs_.find(rec.pair);
                    if (it == pairs_.end() || !(it->second.ends[0] == loc || it->second.ends[1] == loc))
                        throw ProtocolFault("slot exclusivity violated: qubit points at a pair that does not own it");
                }
            }
        }
    }
    if (held != 2 * live_pairs())
        throw ProtocolFault("qubits held by pairs do not match twice the live pair count");
    if (created_ - swaps_ - delivered_ != live_pairs())
        throw ProtocolFault("swap conservation violated: created - swaps - delivered != live pairs");
}

} // namespace qlinksim
