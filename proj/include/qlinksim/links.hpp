#pragma once

#include "qlinksim/engine.hpp"
#include "qlinksim/phys.hpp"

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace qlinksim
{

enum class LinkKind : std::uint8_t
{
    MIM,         // midpoint BSA, batched results
    MSM,         // midpoint EPPS at the fixed default pulse rate
    AdaptiveMSM, // midpoint EPPS at the rate computed from memories and loss
};

std::string_view to_string(LinkKind kind);
LinkKind parse_link_kind(std::string_view text); // "MIM", "MSM", "aMSM"

inline bool is_msm(LinkKind k) { return k != LinkKind::MIM; }

enum class Side : std::uint8_t
{
    Left = 0,
    Right = 1,
};

inline Side opposite(Side s) { return s == Side::Left ? Side::Right : Side::Left; }
inline int index_of(Side s) { return static_cast<int>(s); }

struct LinkSpec
{
    LinkKind kind = LinkKind::MIM;
    double span_km = 1.0;
    /// Displacement of the support node (BSA or EPPS) from the span's center,
    /// positive toward the right node.
    double midpoint_offset_km = 0.0;
    int mem_per_qnic = 1;
    PhysParams params{};

    double arm_left_km() const { return span_km / 2.0 + midpoint_offset_km; }
    double arm_right_km() const { return span_km / 2.0 - midpoint_offset_km; }
    double arm_km(Side s) const { return s == Side::Left ? arm_left_km() : arm_right_km(); }

    void validate() const;
};

/// Two-bit Pauli correction record: bit 0 is X, bit 1 is Z.
struct PauliFrame
{
    std::uint8_t bits = 0;

    bool x() const { return (bits & 1u) != 0; }
    bool z() const { return (bits & 2u) != 0; }

    friend PauliFrame operator^(PauliFrame a, PauliFrame b)
    {
        return PauliFrame{static_cast<std::uint8_t>(a.bits ^ b.bits)};
    }
    friend bool operator==(PauliFrame, PauliFrame) = default;
};

/// Linear-optics BSM heralds one of two Bell states: no correction or X+Z.
PauliFrame draw_link_frame(RandomStream& rng);

enum class SlotState : std::uint8_t
{
    Free,
    AwaitingResult,
    Entangled,
};

struct MemorySlot
{
    int id = 0;
    SlotState state = SlotState::Free;
    /// MSM: latched pair index. MIM: train round. Meaningless when Free.
    std::int64_t tag = -1;
};

/// One node's bank of memories facing one link.
class Qnic
{
  public:
    explicit Qnic(int size);

    int size() const { return static_cast<int>(slots_.size()); }
    const MemorySlot& slot(int id) const { return slots_.at(id); }
    MemorySlot& slot(int id) { return slots_.at(id); }
    const std::vector<MemorySlot>& slots() const { return slots_; }
    std::vector<MemorySlot>& slots() { return slots_; }

    /// Lowest-numbered free slot, if any.
    std::optional<int> first_free() const;
    int count(SlotState s) const;

  private:
    std::vector<MemorySlot> slots_;
};

/// One endpoint of a freshly established link-level Bell pair, as seen by the
/// node that owns `slot`. Both endpoints report the same (link_id, serial).
struct LinkEndpoint
{
    int link_id = 0;
    std::int64_t serial = 0;
    Side side = Side::Left;
    int slot = 0;
    int partner_slot = 0;
    PauliFrame frame{};
    SimTime established_at{};
};

/// The network layer's view of a link. Endpoints are reported only after the
/// link's own state is consistent, so listeners may call Link::release.
class LinkListener
{
  public:
    virtual ~LinkListener() = default;
    virtual void on_link_endpoint(const LinkEndpoint& ep) = 0;
};

/// Optional MSM instrumentation: the local outcome of every photon at both
/// nodes, indexed by pair index.
class LatchProbe
{
  public:
    enum class Outcome : std::uint8_t
    {
        Unseen = 0,
        Ignored = 1, // memory full
        Failed = 2,  // attempted, local BSM failed
        Latched = 3,
    };

    void record(Side side, std::int64_t index, Outcome outcome);
    Outcome outcome(Side side, std::int64_t index) const;

    /// Number of indices whose outcome is known at both nodes.
    std::int64_t complete_indices() const;

    struct Statistic
    {
        std::int64_t windows = 0;
        std::int64_t recurrences = 0;
        double fraction() const
        {
            return windows == 0 ? 0.0 : static_cast<double>(recurrences) / static_cast<double>(windows);
        }
    };

    /// Windows opened by a latch at one node paired with a genuine local
    /// failure at the other on the same index; a window recurs if the failing
    /// node latches any of the next `m` indices. Both directions are pooled.
    Statistic recurrence(int m) const;

  private:
    std::vector<Outcome> outcomes_[2];
};

//---------------------------------------------------------------------------//

/// Base class of the link-level protocols. A link owns the two QNICs facing
/// it (left node's and right node's) and drives their slot state machines.
class Link : public EventHandler
{
  public:
    Link(int link_id, LinkSpec spec, Engine& engine, std::uint64_t trial_seed);
    ~Link() override = default;

    static std::unique_ptr<Link> create(int link_id,
                                        const LinkSpec& spec,
                                        Engine& engine,
                                        std::uint64_t trial_seed);

    int id() const { return id_; }
    const LinkSpec& spec() const { return spec_; }
    const Qnic& qnic(Side s) const { return qnics_[index_of(s)]; }

    void set_listener(LinkListener* l) { listener_ = l; }

    /// Schedule the first protocol events at t = now.
    virtual void start() = 0;

    /// Return an Entangled slot to the protocol once the network layer is done
    /// with its qubit.
    virtual void release(Side side, int slot);

    std::string_view entity_name() const override { return name_; }

    std::int64_t established_pairs() const { return established_pairs_; }

  protected:
    Qnic& mutable_qnic(Side s) { return qnics_[index_of(s)]; }
    void notify(const LinkEndpoint& ep);

    int id_;
    LinkSpec spec_;
    Engine& engine_;
    std::uint64_t trial_seed_;
    std::string name_;
    Qnic qnics_[2];
    LinkListener* listener_ = nullptr;
    std::int64_t established_pairs_ = 0;
};

//---------------------------------------------------------------------------//

/// Memory-Interference-Memory link. Both nodes fire trains of photons from
/// their free memories toward a midpoint BSA, which answers each train with
/// one batch of per-position results.
class MimLink final : public Link
{
  public:
    MimLink(int link_id, const LinkSpec& spec, Engine& engine, std::uint64_t trial_seed);

    void start() override;
    void handle(const Event& ev) override;
    std::string describe(const Event& ev) const override;

    /// Success probability of one train position with photons from both sides.
    double position_success_probability() const { return p_position_; }
    SimTime photon_spacing() const { return spacing_; }

    /// Emission tick of side `s` for a round whose photons reach the BSA at
    /// `bsa_arrival` (the farther node emits first).
    SimTime emission_time(Side s, SimTime bsa_arrival) const;

    struct Train
    {
        std::int64_t round = -1;
        SimTime emitted_at{};
        std::vector<int> slots; // slot at each train position
    };
    const Train& current_train(Side s) const { return trains_[index_of(s)]; }

    /// Per-position verdict of one BSA round; frame meaningful on success.
    struct PositionResult
    {
        bool success = false;
        PauliFrame frame{};
    };

    /// Evaluate one round at the BSA. Positions beyond the shorter train have
    /// no partner photon and fail without consuming randomness.
    static std::vector<PositionResult> process_train(std::size_t left_len,
                                                     std::size_t right_len,
                                                     double p_position,
                                                     RandomStream& rng);

  private:
    enum Msg : std::int64_t
    {
        BatchToNode = 1,
    };

    void emit_train(Side s, std::int64_t round);
    void detect(std::int64_t round);
    void on_batch(Side s, std::int64_t round, SimTime next_arrival);

    SimTime lat_[2];
    SimTime lat_max_;
    SimTime spacing_;
    double p_position_;
    RandomStream bsa_rng_;

    std::int64_t round_ = 0;
    SimTime round_arrival_{};
    int emitted_sides_ = 0;
    Train trains_[2];
    std::vector<PositionResult> batch_;
    std::int64_t batch_round_ = -1;
};

//---------------------------------------------------------------------------//

/// Memory-Source-Memory link. A free-running midpoint EPPS streams indexed
/// photon pairs; each node latches a memory on a local BSM success and tells
/// its partner about every index.
class MsmLink final : public Link
{
  public:
    MsmLink(int link_id, const LinkSpec& spec, Engine& engine, std::uint64_t trial_seed);

    void start() override;
    void handle(const Event& ev) override;
    std::string describe(const Event& ev) const override;

    double effective_rate_hz() const { return rate_hz_; }
    SimTime emission_period() const { return period_; }
    double side_success_probability(Side s) const { return p_side_[index_of(s)]; }
    std::int64_t next_pair_index() const { return next_index_; }

    void attach_probe(LatchProbe* probe) { probe_ = probe; }

    struct Latch
    {
        std::int64_t index = 0;
        int slot = 0;
        PauliFrame frame{};
    };

    /// Indices currently latched (AwaitingResult) at a node, oldest first.
    const std::deque<Latch>& latched(Side s) const { return latched_[index_of(s)]; }

  private:
    void emit(std::int64_t index);
    void on_photon(Side s, std::int64_t index);
    void on_partner_result(Side s, std::int64_t index, bool success, PauliFrame frame, int partner_slot);

    double rate_hz_;
    SimTime period_;
    SimTime arm_lat_[2];
    SimTime notify_lat_;
    double p_side_[2];
    RandomStream rng_[2];

    std::int64_t next_index_ = 0;
    std::int64_t last_seen_[2] = {-1, -1};
    std::deque<Latch> latched_[2];
    LatchProbe* probe_ = nullptr;
};

/// EPPS pulse rate for an adaptive MSM link: the smaller of each side's
/// saturation-matched rate and the BSA detection limit.
double compute_adaptive_rate(const LinkSpec& spec);

} // namespace qlinksim
