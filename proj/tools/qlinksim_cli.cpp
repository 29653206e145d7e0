// Command-line driver: experiment presets, config-file runs, and the
// closed-form link analysis table.

#include "qlinksim/analytics.hpp"
#include "qlinksim/config.hpp"
#include "qlinksim/harness.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

namespace
{

using namespace qlinksim;

struct CommonOptions
{
    int trials = 100;
    std::uint64_t seed = 1;
    std::int64_t target_pairs = 100;
    int threads = 1;
    bool trace = false;
    std::string trace_out;
    std::string out;
};

void add_common(CLI::App* app, CommonOptions& o)
{
    app->add_option("--trials", o.trials, "Independent trials per configuration")->capture_default_str();
    app->add_option("--seed", o.seed, "Base random seed")->capture_default_str();
    app->add_option("--target-pairs", o.target_pairs, "End-to-end pairs per trial")->capture_default_str();
    app->add_option("--threads", o.threads, "Worker threads for independent trials")->capture_default_str();
    app->add_flag("--trace", o.trace, "Dump every processed event");
    app->add_option("--trace-out", o.trace_out, "Trace destination (default: standard error)");
    app->add_option("--out", o.out, "CSV output path (default: standard output)");
}

std::string hyphenate(std::string key)
{
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
}

class TraceSink
{
  public:
    TraceSink(bool enabled, const std::string& path)
    {
        if (!enabled)
            return;
        if (path.empty())
        {
            out_ = &std::cerr;
            return;
        }
        file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
        if (!*file_)
            throw std::runtime_error("cannot open trace file '" + path + "'");
        out_ = file_.get();
    }
    std::ostream* stream() const { return out_; }

  private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* out_ = nullptr;
};

void run_configs(std::vector<RunConfig> configs, const CommonOptions& o)
{
    TraceSink sink(o.trace, o.trace_out);
    std::vector<ResultRow> rows;
    for (auto& c : configs)
    {
        c.trials = o.trials;
        c.seed = o.seed;
        c.target_pairs = o.target_pairs;
        c.threads = o.threads;
        c.trace = o.trace;
        const RunResult r = run(c, sink.stream());
        rows.push_back(ResultRow::from(c, r));
        std::cerr << c.experiment << ' ' << c.kind_or_mix << " d=" << c.distance_km << "km N=" << c.n_memories
                  << (c.replaced_link ? " replaced=" + std::to_string(*c.replaced_link) : std::string())
                  << ": " << format_sig6(r.rate_bp_s) << " +/- " << format_sig6(r.std_bp_s) << " BP/s\n";
    }
    if (o.out.empty())
        write_csv(std::cout, rows);
    else
        emit_csv(o.out, rows);
}

void print_analysis(const RunConfig& c)
{
    std::printf("%-5s %-5s %9s %9s %5s %9s %6s %12s %6s %8s %6s %8s\n", "link", "kind", "arm_L_km", "arm_R_km",
                "N", "p_side", "N*", "f_adapt_hz", "m", "p_ge1", "m_ad", "p_ge1_ad");
    for (std::size_t i = 0; i < c.topology.links.size(); ++i)
    {
        const LinkSpec& l = c.topology.links[i];
        const double arm = std::max(l.arm_left_km(), l.arm_right_km());
        const double p = bsm_success_probability(arm, l.params);
        const double f_fixed = l.params.f_epps_default_hz;
        const double f_ad = compute_adaptive_rate(l);
        const double cf = l.params.c_fiber_km_s;
        const auto fixed = analytics::latch_model(arm, p, f_fixed, cf);
        const auto adapt = analytics::latch_model(arm, p, f_ad, cf);
        std::printf("%-5zu %-5s %9.4f %9.4f %5d %9.6f %6lld %12.0f %6lld %8.5f %6lld %8.5f\n", i,
                    std::string(to_string(l.kind)).c_str(), l.arm_left_km(), l.arm_right_km(), l.mem_per_qnic, p,
                    static_cast<long long>(analytics::saturation_threshold(arm, p, f_fixed, cf)), f_ad,
                    static_cast<long long>(fixed.m), fixed.p_at_least_one, static_cast<long long>(adapt.m),
                    adapt.p_at_least_one);
    }
}

std::vector<std::string> split_list(const std::vector<std::string>& items)
{
    std::vector<std::string> out;
    for (const auto& item : items)
    {
        std::stringstream ss(item);
        std::string part;
        while (std::getline(ss, part, ','))
            if (!part.empty())
                out.push_back(part);
    }
    return out;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Discrete-event simulator for MIM/MSM quantum link chains"};
    app.require_subcommand(1);

    // run / analyze: config file plus per-key overrides.
    std::string config_path;
    ConfigMap overrides;
    std::string run_out;
    std::string run_trace_out;
    bool run_trace = false;
    auto* run_cmd = app.add_subcommand("run", "Run the configuration in a key = value file");
    auto* analyze_cmd = app.add_subcommand("analyze", "Print the closed-form link model table for a config");
    for (auto* cmd : {run_cmd, analyze_cmd})
    {
        cmd->add_option("--config", config_path, "Configuration file")->required()->check(CLI::ExistingFile);
        for (const auto& key : config_keys())
        {
            if (key == "trace")
                continue;
            cmd->add_option_function<std::string>(
                "--" + hyphenate(key), [&overrides, key](const std::string& v) { overrides[key] = v; },
                "Override '" + key + "'");
        }
    }
    run_cmd->add_flag("--trace", run_trace, "Dump every processed event");
    run_cmd->add_option("--trace-out", run_trace_out, "Trace destination (default: standard error)");
    run_cmd->add_option("--out", run_out, "CSV output path (default: standard output)");

    // Experiment presets; omitted grids default to the full sweep.
    CommonOptions exp_opts;
    std::vector<double> distances;
    std::vector<int> memories;
    std::vector<std::string> kinds;
    std::vector<std::string> mixes;
    std::vector<std::string> replaced;
    auto* exp1 = app.add_subcommand("exp1", "Single link: MIM, MSM and adaptive MSM versus memory count");
    auto* exp2 = app.add_subcommand("exp2", "Two-hop chains with mixed link architectures");
    auto* exp3 = app.add_subcommand("exp3", "Ten-node MSM chain with one link replaced by MIM");
    for (auto* cmd : {exp1, exp2, exp3})
    {
        add_common(cmd, exp_opts);
        cmd->add_option("--distance-km", distances, "Node separation(s) in km")->delimiter(',');
        cmd->add_option("--n-memories", memories, "Memories per QNIC")->delimiter(',');
    }
    exp1->add_option("--kind", kinds, "MIM, MSM, aMSM")->delimiter(',');
    exp2->add_option("--mix", mixes, "MIM+MIM, MSM+MIM, MSM+MSM, aMSM+MIM, aMSM+aMSM")->delimiter(',');
    exp3->add_option("--replaced-link", replaced, "none or 0..4")->delimiter(',');

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        return app.exit(e);
    }

    try
    {
        if (*run_cmd || *analyze_cmd)
        {
            ConfigMap settings = read_config_file(config_path);
            for (const auto& [k, v] : overrides)
                settings[k] = v;
            if (*run_cmd && run_trace)
                settings["trace"] = "true";
            RunConfig c = build_config(settings);
            if (*analyze_cmd)
            {
                print_analysis(c);
                return 0;
            }
            CommonOptions o;
            o.trials = c.trials;
            o.seed = c.seed;
            o.target_pairs = c.target_pairs;
            o.threads = c.threads;
            o.trace = c.trace;
            o.trace_out = run_trace_out;
            o.out = run_out;
            run_configs({c}, o);
            return 0;
        }

        if (distances.empty())
            distances = {1.0, 20.0};
        std::vector<RunConfig> configs;
        if (*exp1)
        {
            if (memories.empty())
                memories = default_memory_grid();
            if (kinds.empty())
                kinds = {"MIM", "MSM", "aMSM"};
            for (const auto& k : split_list(kinds))
                for (double d : distances)
                    for (int n : memories)
                        configs.push_back(preset_experiment1(d, n, parse_link_kind(k)));
        }
        else if (*exp2)
        {
            if (memories.empty())
                memories = default_memory_grid();
            if (mixes.empty())
                mixes = {"MIM+MIM", "MSM+MIM", "MSM+MSM", "aMSM+MIM", "aMSM+aMSM"};
            for (const auto& m : split_list(mixes))
                for (double d : distances)
                    for (int n : memories)
                        configs.push_back(preset_experiment2(d, n, parse_two_hop_mix(m)));
        }
        else
        {
            if (memories.empty())
                memories = {4, 32};
            if (replaced.empty())
                replaced = {"none", "0", "1", "2", "3", "4"};
            for (double d : distances)
                for (int n : memories)
                    for (const auto& r : split_list(replaced))
                        configs.push_back(preset_experiment3(
                            d, n, r == "none" ? std::nullopt : std::optional<int>(std::stoi(r))));
        }
        run_configs(std::move(configs), exp_opts);
        return 0;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
