#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qlinksim
{

//---------------------------------------------------------------------------//
// Errors
//---------------------------------------------------------------------------//

/// A violated protocol or engine precondition. Always a bug in the caller.
class ProtocolFault : public std::logic_error
{
  public:
    using std::logic_error::logic_error;
};

/// The event queue ran dry before the stop predicate held.
class StarvedError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// A trial exceeded its event or wall-clock budget.
class TimeoutError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

//---------------------------------------------------------------------------//
// Time
//---------------------------------------------------------------------------//

/// Simulated time in integer picoseconds since trial start.
struct SimTime
{
    std::int64_t ticks = 0;

    static constexpr std::int64_t ticks_per_second = 1'000'000'000'000;

    constexpr auto operator<=>(const SimTime&) const = default;

    constexpr SimTime operator+(SimTime o) const { return SimTime{ticks + o.ticks}; }
    constexpr SimTime operator-(SimTime o) const { return SimTime{ticks - o.ticks}; }
    constexpr SimTime& operator+=(SimTime o)
    {
        ticks += o.ticks;
        return *this;
    }
    constexpr SimTime operator*(std::int64_t k) const { return SimTime{ticks * k}; }

    double seconds() const { return static_cast<double>(ticks) / ticks_per_second; }

    // Round-to-nearest picosecond, ties to even.
    static SimTime from_seconds(double s);
};

//---------------------------------------------------------------------------//
// Events
//---------------------------------------------------------------------------//

enum class EventKind : std::uint8_t
{
    PhotonPairEmission,
    PhotonArrival,
    TrainEmission,
    BsaDetection,
    ClassicalDelivery,
    SwapCheck,
    TrialEnd,
};

std::string_view to_string(EventKind kind);

struct Event;

/// Anything that owns events. The engine calls back into the target when an
/// event fires; payload words are interpreted by the target alone.
class EventHandler
{
  public:
    virtual ~EventHandler() = default;
    virtual void handle(const Event& ev) = 0;
    virtual std::string_view entity_name() const = 0;
    virtual std::string describe(const Event& ev) const;
};

struct Event
{
    SimTime fire_at;
    std::uint64_t seq = 0;
    EventKind kind = EventKind::TrialEnd;
    EventHandler* target = nullptr;
    std::int64_t arg0 = 0;
    std::int64_t arg1 = 0;
    std::int64_t arg2 = 0;
    std::int64_t arg3 = 0;
};

struct RunBudget
{
    std::uint64_t max_events = std::numeric_limits<std::uint64_t>::max();
    double max_wall_seconds = std::numeric_limits<double>::infinity();
};

/// Single-threaded discrete-event core. Events with equal timestamps fire in
/// insertion order.
class Engine
{
  public:
    Engine() = default;
    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    SimTime now() const { return now_; }

    // Returns the sequence number assigned to the event.
    std::uint64_t schedule(Event ev);
    std::uint64_t schedule(SimTime at,
                           EventKind kind,
                           EventHandler* target,
                           std::int64_t a0 = 0,
                           std::int64_t a1 = 0,
                           std::int64_t a2 = 0,
                           std::int64_t a3 = 0);

    /// Process events until `stop` holds (checked before the first event and
    /// after every event). Throws StarvedError if the queue empties first.
    SimTime run_until(const std::function<bool()>& stop,
                      std::string_view stop_description,
                      const RunBudget& budget = {});

    /// Fire at most one event. Returns false if the queue is empty.
    bool step();

    std::size_t pending() const { return queue_.size(); }
    std::uint64_t processed() const { return processed_; }

    /// One tab-separated line per processed event; nullptr disables.
    void set_trace(std::ostream* out) { trace_ = out; }

    /// Called after every processed event (used by invariant checking).
    void set_post_event_hook(std::function<void(const Event&)> hook)
    {
        post_hook_ = std::move(hook);
    }

  private:
    struct Later
    {
        bool operator()(const Event& a, const Event& b) const
        {
            if (a.fire_at != b.fire_at)
                return a.fire_at > b.fire_at;
            return a.seq > b.seq;
        }
    };

    void fire(const Event& ev);

    SimTime now_{};
    std::uint64_t next_seq_ = 0;
    std::uint64_t processed_ = 0;
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    std::ostream* trace_ = nullptr;
    std::function<void(const Event&)> post_hook_;
};

//---------------------------------------------------------------------------//
// Randomness
//---------------------------------------------------------------------------//

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Stable 64-bit id of an entity name (FNV-1a).
std::uint64_t entity_hash(std::string_view name);

/// Seeding rule shared by trials and entities: hash(parent, child).
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t child);

/// Per-entity random stream seeded from (trial seed, entity name). Streams are
/// independent objects: draining one never perturbs another.
class RandomStream
{
  public:
    RandomStream(std::uint64_t trial_seed, std::string_view entity);

    std::uint64_t entity_id() const { return entity_id_; }

    /// One draw; true with probability p.
    bool bernoulli(double p);

    /// One draw; uniform integer in [0, n).
    std::uint32_t uniform_below(std::uint32_t n);

    std::uint64_t next_u64() { return gen_(); }

  private:
    std::uint64_t entity_id_;
    std::mt19937_64 gen_;
};

} // namespace qlinksim
