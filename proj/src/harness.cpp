#include "qlinksim/harness.hpp"

#include "qlinksim/analytics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace qlinksim
{

void RunConfig::validate() const
{
    topology.validate();
    if (target_pairs < 1)
        throw std::invalid_argument("target_pairs must be at least 1");
    if (trials < 1)
        throw std::invalid_argument("trials must be at least 1");
    if (threads < 1)
        throw std::invalid_argument("threads must be at least 1");
}

std::uint64_t trial_seed(std::uint64_t seed, int trial_index)
{
    return derive_seed(seed, static_cast<std::uint64_t>(trial_index));
}

RunResult summarize(std::int64_t target_pairs, std::vector<double> completion_s)
{
    RunResult r;
    r.per_trial_completion_s = std::move(completion_s);
    const auto n = r.per_trial_completion_s.size();
    if (n == 0)
        return r;
    std::vector<double> rates;
    rates.reserve(n);
    for (double t : r.per_trial_completion_s)
        rates.push_back(static_cast<double>(target_pairs) / t);
    r.rate_bp_s = std::accumulate(rates.begin(), rates.end(), 0.0) / static_cast<double>(n);
    if (n > 1)
    {
        double ss = 0.0;
        for (double x : rates)
            ss += (x - r.rate_bp_s) * (x - r.rate_bp_s);
        r.std_bp_s = std::sqrt(ss / static_cast<double>(n - 1));
    }
    return r;
}

TrialResult run_trial(const RunConfig& config, int trial_index, std::ostream* trace)
{
    Engine engine;
    engine.set_trace(trace);
    ChainNetwork net(engine, config.topology, trial_seed(config.seed, trial_index), config.target_pairs);
    if (config.check_invariants)
        engine.set_post_event_hook([&net](const Event&) { net.check_invariants(); });
    net.start();

    std::ostringstream what;
    what << config.target_pairs << " end-to-end pairs delivered (trial " << trial_index << ")";
    try
    {
        engine.run_until([&net] { return net.finished(); }, what.str(), config.budget);
    }
    catch (const TimeoutError& e)
    {
        throw TimeoutError("trial " + std::to_string(trial_index) + " timed out: " + e.what());
    }

    TrialResult out;
    out.completion_s = net.completion_time().seconds();
    out.events = engine.processed();
    out.deliveries = net.deliveries();
    return out;
}

RunResult run(const RunConfig& config, std::ostream* trace)
{
    config.validate();
    const int n = config.trials;
    std::vector<double> completion(static_cast<std::size_t>(n), 0.0);

    if (trace != nullptr || config.threads == 1 || n == 1)
    {
        for (int i = 0; i < n; ++i)
        {
            if (trace != nullptr)
                *trace << "# trial " << i << " seed " << trial_seed(config.seed, i) << '\n';
            completion[static_cast<std::size_t>(i)] = run_trial(config, i, trace).completion_s;
        }
        return summarize(config.target_pairs, std::move(completion));
    }

    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    const auto worker = [&] {
        for (int i = next++; i < n; i = next++)
        {
            try
            {
                completion[static_cast<std::size_t>(i)] = run_trial(config, i).completion_s;
            }
            catch (...)
            {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min(config.threads, n); ++t)
        pool.emplace_back(worker);
    for (auto& th : pool)
        th.join();
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return summarize(config.target_pairs, std::move(completion));
}

//---------------------------------------------------------------------------//

namespace
{

/// Releases every link pair as soon as both endpoints hold it.
class BareConsumer final : public LinkListener
{
  public:
    explicit BareConsumer(Link& link) : link_(link) {}

    void on_link_endpoint(const LinkEndpoint& ep) override
    {
        auto [it, inserted] = half_.emplace(ep.serial, ep);
        if (inserted)
            return;
        const LinkEndpoint first = it->second;
        half_.erase(it);
        link_.release(first.side, first.slot);
        link_.release(ep.side, ep.slot);
        ++delivered_;
    }

    std::int64_t delivered() const { return delivered_; }

  private:
    Link& link_;
    std::map<std::int64_t, LinkEndpoint> half_;
    std::int64_t delivered_ = 0;
};

} // namespace

RunResult run_bare_link(const LinkSpec& spec, std::int64_t target_pairs, int trials, std::uint64_t seed)
{
    if (target_pairs < 1 || trials < 1)
        throw std::invalid_argument("run_bare_link: target_pairs and trials must be positive");
    std::vector<double> completion;
    for (int i = 0; i < trials; ++i)
    {
        Engine engine;
        const auto link = Link::create(0, spec, engine, trial_seed(seed, i));
        BareConsumer consumer(*link);
        link->set_listener(&consumer);
        link->start();
        const SimTime t = engine.run_until([&] { return consumer.delivered() >= target_pairs; },
                                           "bare link pairs delivered", RunBudget{1'000'000'000, 60.0});
        completion.push_back(t.seconds());
    }
    return summarize(target_pairs, std::move(completion));
}

LatchMeasurement measure_latch_recurrence(const LinkSpec& spec, std::uint64_t seed, std::int64_t min_windows)
{
    if (!is_msm(spec.kind))
        throw std::invalid_argument("latch statistics need an MSM link");
    Engine engine;
    MsmLink link(0, spec, engine, trial_seed(seed, 0));
    BareConsumer consumer(link);
    LatchProbe probe;
    link.set_listener(&consumer);
    link.attach_probe(&probe);
    link.start();

    LatchMeasurement out;
    out.rate_hz = link.effective_rate_hz();
    out.p_side = link.side_success_probability(Side::Left);
    // Emissions per node-to-node notification delay (2L for symmetric arms).
    out.window = static_cast<std::int64_t>(std::floor(out.rate_hz * spec.span_km / spec.params.c_fiber_km_s));
    out.predicted = analytics::recurrence_probability(out.p_side, out.window);

    const SimTime chunk = link.emission_period() * 10'000;
    SimTime horizon = engine.now();
    for (;;)
    {
        horizon += chunk;
        engine.run_until([&] { return engine.now() >= horizon; }, "latch probe horizon");
        out.statistic = probe.recurrence(static_cast<int>(out.window));
        if (out.statistic.windows >= min_windows)
            return out;
        if (engine.processed() > 1'000'000'000)
            throw TimeoutError("latch probe could not collect enough windows");
    }
}

//---------------------------------------------------------------------------//
// Presets
//---------------------------------------------------------------------------//

std::string_view to_string(TwoHopMix mix)
{
    switch (mix)
    {
    case TwoHopMix::MimMim: return "MIM+MIM";
    case TwoHopMix::MsmMim: return "MSM+MIM";
    case TwoHopMix::MsmMsm: return "MSM+MSM";
    case TwoHopMix::AmsmMim: return "aMSM+MIM";
    case TwoHopMix::AmsmAmsm: return "aMSM+aMSM";
    }
    return "?";
}

TwoHopMix parse_two_hop_mix(std::string_view text)
{
    for (TwoHopMix m : {TwoHopMix::MimMim, TwoHopMix::MsmMim, TwoHopMix::MsmMsm, TwoHopMix::AmsmMim,
                        TwoHopMix::AmsmAmsm})
        if (to_string(m) == text)
            return m;
    throw std::invalid_argument("unknown two-hop mix '" + std::string(text) +
                                "' (expected MIM+MIM, MSM+MIM, MSM+MSM, aMSM+MIM or aMSM+aMSM)");
}

const std::vector<int>& default_memory_grid()
{
    static const std::vector<int> grid{1, 2, 4, 8, 16, 32, 64};
    return grid;
}

namespace
{

LinkSpec preset_link(LinkKind kind, double distance_km, int n_memories)
{
    LinkSpec spec;
    spec.kind = kind;
    spec.span_km = distance_km;
    spec.mem_per_qnic = n_memories;
    return spec;
}

} // namespace

RunConfig preset_experiment1(double distance_km, int n_memories, LinkKind kind)
{
    RunConfig c;
    c.experiment = "exp1";
    c.kind_or_mix = std::string(to_string(kind));
    c.distance_km = distance_km;
    c.n_memories = n_memories;
    c.topology = Topology::chain(2, preset_link(kind, distance_km, n_memories));
    return c;
}

RunConfig preset_experiment2(double distance_km, int n_memories, TwoHopMix mix)
{
    LinkKind first = LinkKind::MIM;
    LinkKind second = LinkKind::MIM;
    switch (mix)
    {
    case TwoHopMix::MimMim: break;
    case TwoHopMix::MsmMim: first = LinkKind::MSM; break;
    case TwoHopMix::MsmMsm: first = second = LinkKind::MSM; break;
    case TwoHopMix::AmsmMim: first = LinkKind::AdaptiveMSM; break;
    case TwoHopMix::AmsmAmsm: first = second = LinkKind::AdaptiveMSM; break;
    }
    RunConfig c;
    c.experiment = "exp2";
    c.kind_or_mix = std::string(to_string(mix));
    c.distance_km = distance_km;
    c.n_memories = n_memories;
    c.topology.links = {preset_link(first, distance_km, n_memories), preset_link(second, distance_km, n_memories)};
    return c;
}

RunConfig preset_experiment3(double distance_km, int n_memories, std::optional<int> replaced_link)
{
    if (replaced_link && (*replaced_link < 0 || *replaced_link > 4))
        throw std::invalid_argument("replaced_link must be none or 0..4");
    RunConfig c;
    c.experiment = "exp3";
    c.kind_or_mix = replaced_link ? "MSM+1MIM" : "MSM";
    c.distance_km = distance_km;
    c.n_memories = n_memories;
    c.replaced_link = replaced_link;
    c.topology = Topology::chain(10, preset_link(LinkKind::MSM, distance_km, n_memories));
    if (replaced_link)
        c.topology.links[static_cast<std::size_t>(*replaced_link)].kind = LinkKind::MIM;
    return c;
}

//---------------------------------------------------------------------------//
// CSV
//---------------------------------------------------------------------------//

ResultRow ResultRow::from(const RunConfig& config, const RunResult& result)
{
    ResultRow r;
    r.experiment = config.experiment;
    r.kind_or_mix = config.kind_or_mix;
    r.distance_km = config.distance_km;
    r.n_memories = config.n_memories;
    r.replaced_link = config.replaced_link;
    r.trials = config.trials;
    r.rate_bp_s = result.rate_bp_s;
    r.std_bp_s = result.std_bp_s;
    r.seed = config.seed;
    return r;
}

std::string format_sig6(double value)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", value);
    return buf;
}

void write_csv(std::ostream& out, const std::vector<ResultRow>& rows)
{
    out << csv_header << '\n';
    for (const auto& r : rows)
    {
        out << r.experiment << ',' << r.kind_or_mix << ',' << format_sig6(r.distance_km) << ',' << r.n_memories
            << ',' << (r.replaced_link ? std::to_string(*r.replaced_link) : std::string("none")) << ','
            << r.trials << ',' << format_sig6(r.rate_bp_s) << ',' << format_sig6(r.std_bp_s) << ',' << r.seed
            << '\n';
    }
}

void emit_csv(const std::string& path, const std::vector<ResultRow>& rows)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    write_csv(f, rows);
    f.flush();
    if (!f)
        throw std::runtime_error("failed writing '" + path + "'");
}

std::vector<ResultRow> read_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || line != csv_header)
        throw std::runtime_error("CSV header mismatch");
    std::vector<ResultRow> rows;
    while (std::getline(in, line))
    {
        if (line.empty())
            continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            f.push_back(cell);
        if (f.size() != 9)
            throw std::runtime_error("CSV row has " + std::to_string(f.size()) + " fields: " + line);
        ResultRow r;
        r.experiment = f[0];
        r.kind_or_mix = f[1];
        r.distance_km = std::stod(f[2]);
        r.n_memories = std::stoi(f[3]);
        if (f[4] != "none")
            r.replaced_link = std::stoi(f[4]);
        r.trials = std::stoi(f[5]);
        r.rate_bp_s = std::stod(f[6]);
        r.std_bp_s = std::stod(f[7]);
        r.seed = std::stoull(f[8]);
        rows.push_back(r);
    }
    return rows;
}

} // namespace qlinksim
