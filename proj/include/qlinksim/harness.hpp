#pragma once

#include "qlinksim/engine.hpp"
#include "qlinksim/links.hpp"
#include "qlinksim/network.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace qlinksim
{

/// Everything needed to reproduce one simulation instance. The descriptive
/// fields (experiment, kind_or_mix, ...) only label CSV rows.
struct RunConfig
{
    std::string experiment = "custom";
    std::string kind_or_mix;
    double distance_km = 0.0;
    int n_memories = 0;
    std::optional<int> replaced_link;

    Topology topology;
    std::int64_t target_pairs = 100;
    int trials = 100;
    std::uint64_t seed = 1;
    bool trace = false;

    /// Verify network invariants after every event (slow).
    bool check_invariants = false;
    /// Worker threads for independent trials; results do not depend on it.
    int threads = 1;
    RunBudget budget{1'000'000'000, 60.0};

    void validate() const;
};

struct TrialResult
{
    double completion_s = 0.0;
    std::uint64_t events = 0;
    std::vector<DeliveredPair> deliveries;
};

struct RunResult
{
    std::vector<double> per_trial_completion_s;
    double rate_bp_s = 0.0;
    double std_bp_s = 0.0;
};

/// Per-trial seed: hash(run seed, trial index).
std::uint64_t trial_seed(std::uint64_t seed, int trial_index);

/// Aggregate completion times into mean and sample standard deviation of
/// target_pairs / completion.
RunResult summarize(std::int64_t target_pairs, std::vector<double> completion_s);

TrialResult run_trial(const RunConfig& config, int trial_index, std::ostream* trace = nullptr);

/// Run `config.trials` independent trials. With a trace stream, trials run
/// sequentially and are separated by "# trial" comment lines.
RunResult run(const RunConfig& config, std::ostream* trace = nullptr);

/// Drive a single link with nothing but an end-to-end consumer attached: a
/// pair counts once both endpoints hold it and is released immediately.
RunResult run_bare_link(const LinkSpec& spec, std::int64_t target_pairs, int trials, std::uint64_t seed);

struct LatchMeasurement
{
    LatchProbe::Statistic statistic;
    std::int64_t window = 0;
    double p_side = 0.0;
    double predicted = 0.0;
    double rate_hz = 0.0;
};

/// Run a single MSM link with the latch probe attached until at least
/// `min_windows` latch-fail windows have been observed.
LatchMeasurement measure_latch_recurrence(const LinkSpec& spec, std::uint64_t seed, std::int64_t min_windows);

//---------------------------------------------------------------------------//
// Presets
//---------------------------------------------------------------------------//

enum class TwoHopMix : std::uint8_t
{
    MimMim,
    MsmMim,
    MsmMsm,
    AmsmMim,
    AmsmAmsm,
};

std::string_view to_string(TwoHopMix mix);
TwoHopMix parse_two_hop_mix(std::string_view text); // "MIM+MIM", "MSM+MIM", ...

/// Memory grid swept by the experiment presets.
const std::vector<int>& default_memory_grid();

RunConfig preset_experiment1(double distance_km, int n_memories, LinkKind kind);
RunConfig preset_experiment2(double distance_km, int n_memories, TwoHopMix mix);
/// Ten-node MSM chain; `replaced_link` in [0, 4] becomes MIM.
RunConfig preset_experiment3(double distance_km, int n_memories, std::optional<int> replaced_link);

//---------------------------------------------------------------------------//
// CSV
//---------------------------------------------------------------------------//

struct ResultRow
{
    std::string experiment;
    std::string kind_or_mix;
    double distance_km = 0.0;
    int n_memories = 0;
    std::optional<int> replaced_link;
    int trials = 0;
    double rate_bp_s = 0.0;
    double std_bp_s = 0.0;
    std::uint64_t seed = 0;

    static ResultRow from(const RunConfig& config, const RunResult& result);
};

inline constexpr const char* csv_header =
    "experiment,kind_or_mix,distance_km,n_memories,replaced_link,trials,rate_bp_s,std_bp_s,seed";

void write_csv(std::ostream& out, const std::vector<ResultRow>& rows);
/// Throws std::runtime_error if the file cannot be written.
void emit_csv(const std::string& path, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_csv(std::istream& in);

/// Floating-point text with six significant digits, as used in the CSV.
std::string format_sig6(double value);

} // namespace qlinksim
