#include "qlinksim/engine.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>

namespace qlinksim
{

SimTime SimTime::from_seconds(double s)
{
    // nearbyint honours the default FE_TONEAREST mode: ties go to even.
    return SimTime{static_cast<std::int64_t>(std::nearbyint(s * static_cast<double>(ticks_per_second)))};
}

std::string_view to_string(EventKind kind)
{
    switch (kind)
    {
    case EventKind::PhotonPairEmission: return "PhotonPairEmission";
    case EventKind::PhotonArrival: return "PhotonArrival";
    case EventKind::TrainEmission: return "TrainEmission";
    case EventKind::BsaDetection: return "BsaDetection";
    case EventKind::ClassicalDelivery: return "ClassicalDelivery";
    case EventKind::SwapCheck: return "SwapCheck";
    case EventKind::TrialEnd: return "TrialEnd";
    }
    return "Unknown";
}

std::string EventHandler::describe(const Event& ev) const
{
    std::ostringstream os;
    os << ev.arg0 << ',' << ev.arg1 << ',' << ev.arg2 << ',' << ev.arg3;
    return os.str();
}

std::uint64_t Engine::schedule(Event ev)
{
    if (ev.fire_at < now_)
    {
        std::ostringstream os;
        os << "cannot schedule " << to_string(ev.kind) << " at t=" << ev.fire_at.ticks
           << " ps: clock already at t=" << now_.ticks << " ps";
        throw ProtocolFault(os.str());
    }
    if (ev.target == nullptr)
        throw ProtocolFault("event scheduled without a target");
    ev.seq = next_seq_++;
    queue_.push(ev);
    return ev.seq;
}

std::uint64_t Engine::schedule(SimTime at,
                               EventKind kind,
                               EventHandler* target,
                               std::int64_t a0,
                               std::int64_t a1,
                               std::int64_t a2,
                               std::int64_t a3)
{
    Event ev;
    ev.fire_at = at;
    ev.kind = kind;
    ev.target = target;
    ev.arg0 = a0;
    ev.arg1 = a1;
    ev.arg2 = a2;
    ev.arg3 = a3;
    return schedule(ev);
}

void Engine::fire(const Event& ev)
{
    now_ = ev.fire_at;
    ++processed_;
    if (trace_ != nullptr)
    {
        *trace_ << ev.fire_at.ticks << '\t' << ev.target->entity_name() << '\t'
                << to_string(ev.kind) << '\t' << ev.target->describe(ev) << '\n';
    }
    ev.target->handle(ev);
    if (post_hook_)
        post_hook_(ev);
}

bool Engine::step()
{
    if (queue_.empty())
        return false;
    Event ev = queue_.top();
    queue_.pop();
    fire(ev);
    return true;
}

SimTime Engine::run_until(const std::function<bool()>& stop,
                          std::string_view stop_description,
                          const RunBudget& budget)
{
    using clock = std::chrono::steady_clock;
    const auto started = clock::now();
    const std::uint64_t first = processed_;

    while (!stop())
    {
        if (queue_.empty())
        {
            std::ostringstream os;
            os << "event queue starved at t=" << now_.ticks
               << " ps before stop condition held: " << stop_description;
            throw StarvedError(os.str());
        }
        const std::uint64_t done = processed_ - first;
        if (done >= budget.max_events)
        {
            std::ostringstream os;
            os << "event budget of " << budget.max_events << " exhausted at t=" << now_.ticks
               << " ps waiting for: " << stop_description;
            throw TimeoutError(os.str());
        }
        if ((done & 0xfff) == 0 && std::isfinite(budget.max_wall_seconds))
        {
            const std::chrono::duration<double> elapsed = clock::now() - started;
            if (elapsed.count() > budget.max_wall_seconds)
            {
                std::ostringstream os;
                os << "wall-clock budget of " << budget.max_wall_seconds
                   << " s exhausted at t=" << now_.ticks << " ps waiting for: " << stop_description;
                throw TimeoutError(os.str());
            }
        }
        step();
    }
    return now_;
}

//---------------------------------------------------------------------------//

std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t entity_hash(std::string_view name)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : name)
    {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t child)
{
    return mix64(parent ^ mix64(child));
}

RandomStream::RandomStream(std::uint64_t trial_seed, std::string_view entity)
    : entity_id_(entity_hash(entity)), gen_(derive_seed(trial_seed, entity_id_))
{
}

bool RandomStream::bernoulli(double p)
{
    if (!(p >= 0.0 && p <= 1.0))
    {
        std::ostringstream os;
        os << "bernoulli probability out of range: " << p;
        throw ProtocolFault(os.str());
    }
    // 53-bit uniform in [0, 1); p == 1 always succeeds, p == 0 never does.
    const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    return u < p;
}

std::uint32_t RandomStream::uniform_below(std::uint32_t n)
{
    return static_cast<std::uint32_t>(((gen_() >> 32) * static_cast<std::uint64_t>(n)) >> 32);
}

} // namespace qlinksim
