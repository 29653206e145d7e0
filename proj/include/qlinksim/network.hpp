#pragma once

#include "qlinksim/engine.hpp"
#include "qlinksim/links.hpp"

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

namespace qlinksim
{

/// A linear chain: link i joins node i and node i + 1.
struct Topology
{
    std::vector<LinkSpec> links;

    int node_count() const { return static_cast<int>(links.size()) + 1; }
    void validate() const;

    /// `nodes - 1` copies of `link`.
    static Topology chain(int nodes, const LinkSpec& link);
};

struct SwapEntry
{
    int node = 0;
    int level = 0;
    int left_target = 0;
    int right_target = 0;
};

/// Recursive-bisection swap plan over nodes [0, M - 1] with floor midpoints.
class SwapSchedule
{
  public:
    static SwapSchedule build(int node_count);

    int node_count() const { return static_cast<int>(entries_.size()); }
    const std::optional<SwapEntry>& entry(int node) const { return entries_.at(static_cast<std::size_t>(node)); }
    int depth() const;

  private:
    int bisect(int lo, int hi);

    std::vector<std::optional<SwapEntry>> entries_;
};

/// Bookkeeping for one delivered end-to-end pair.
struct DeliveredPair
{
    SimTime left_confirmed{};
    SimTime right_confirmed{};
    SimTime completed_at{};
    PauliFrame frame{};
};

/// A qubit's address: the link whose QNIC holds it, which end of that link,
/// and the slot.
struct QubitLoc
{
    int link = 0;
    Side side = Side::Left;
    int slot = 0;

    int node() const { return side == Side::Left ? link : link + 1; }
    friend bool operator==(const QubitLoc&, const QubitLoc&) = default;
};

/// Pure correction algebra applied to an endpoint's local record. Remote
/// endpoints only move outward and frames compose by XOR, so the final view
/// does not depend on arrival order.
struct EndpointView
{
    int self = 0;
    int remote = 0;
    PauliFrame frame{};

    void apply(int new_remote, PauliFrame update);
};

/// Chain network: owns the links, runs bisection swapping, and counts
/// confirmed end-to-end pairs. A trial finishes when `target_pairs` pairs have
/// been confirmed at both end nodes.
class ChainNetwork final : public EventHandler, private LinkListener
{
  public:
    ChainNetwork(Engine& engine, const Topology& topology, std::uint64_t trial_seed, std::int64_t target_pairs);
    ~ChainNetwork() override;

    void start();

    bool finished() const { return finished_; }
    std::int64_t delivered() const { return delivered_; }
    std::int64_t target_pairs() const { return target_; }
    /// Tick at which the target-th pair was confirmed.
    SimTime completion_time() const { return completion_; }
    const std::vector<DeliveredPair>& deliveries() const { return deliveries_; }

    int node_count() const { return topology_.node_count(); }
    Link& link(int i) { return *links_.at(static_cast<std::size_t>(i)); }
    const Link& link(int i) const { return *links_.at(static_cast<std::size_t>(i)); }
    const SwapSchedule& schedule() const { return schedule_; }
    SimTime path_latency(int a, int b) const;

    std::int64_t link_pairs_created() const { return created_; }
    std::int64_t swaps_performed() const { return swaps_; }
    std::int64_t live_pairs() const { return static_cast<std::int64_t>(pairs_.size()); }

    /// Cross-check link slot states against the network's pair records.
    /// Throws ProtocolFault describing the first violation.
    void check_invariants() const;

    void handle(const Event& ev) override;
    std::string_view entity_name() const override { return "network"; }
    std::string describe(const Event& ev) const override;

  private:
    struct QubitRecord
    {
        bool held = false;
        bool established = false;
        bool queued = false;
        std::int64_t pair = -1;
        std::int64_t serial = -1;
        int remote = -1;
        PauliFrame frame{};
    };

    struct SegmentRecord
    {
        QubitLoc ends[2];
        PauliFrame frame{};
        SimTime created_at{};
        std::optional<SimTime> confirmed[2];
    };

    void on_link_endpoint(const LinkEndpoint& ep) override;

    QubitRecord& record(const QubitLoc& q);
    const QubitRecord& record(const QubitLoc& q) const;
    void qubit_ready(const QubitLoc& q);
    void try_swaps(int node);
    void swap(int node, const QubitLoc& left, const QubitLoc& right);
    void deliver_correction(const QubitLoc& q, int new_remote, PauliFrame update);
    void complete(std::int64_t pair_id);
    void free_qubit(const QubitLoc& q);

    Engine& engine_;
    Topology topology_;
    std::int64_t target_;
    SwapSchedule schedule_;
    std::vector<std::unique_ptr<Link>> links_;
    std::vector<std::vector<QubitRecord>> qubits_; // per link: [side * N + slot]
    std::vector<RandomStream> swap_rng_;           // per node
    std::vector<std::deque<QubitLoc>> eligible_[2]; // per node, [0] left QNIC, [1] right QNIC
    std::vector<SimTime> position_;                 // cumulative latency from node 0

    std::unordered_map<std::int64_t, SegmentRecord> pairs_;
    std::int64_t next_pair_id_ = 0;
    std::int64_t created_ = 0;
    std::int64_t swaps_ = 0;
    std::int64_t delivered_ = 0;
    std::vector<DeliveredPair> deliveries_;
    SimTime completion_{};
    bool finished_ = false;
};

} // namespace qlinksim
