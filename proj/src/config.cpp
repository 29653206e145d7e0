#include "qlinksim/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace qlinksim
{
namespace
{

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

const std::set<std::string>& known_keys()
{
    static const std::set<std::string> keys(config_keys().begin(), config_keys().end());
    return keys;
}

double as_double(const std::string& key, const std::string& v)
{
    std::size_t used = 0;
    double d = 0;
    try
    {
        d = std::stod(v, &used);
    }
    catch (const std::exception&)
    {
        used = 0;
    }
    if (used != v.size() || v.empty())
        throw std::invalid_argument("setting '" + key + "': not a number: '" + v + "'");
    return d;
}

long long as_int(const std::string& key, const std::string& v)
{
    std::size_t used = 0;
    long long i = 0;
    try
    {
        i = std::stoll(v, &used);
    }
    catch (const std::exception&)
    {
        used = 0;
    }
    if (used != v.size() || v.empty())
        throw std::invalid_argument("setting '" + key + "': not an integer: '" + v + "'");
    return i;
}

bool as_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes" || v == "on")
        return true;
    if (v == "false" || v == "0" || v == "no" || v == "off")
        return false;
    throw std::invalid_argument("setting '" + key + "': not a boolean: '" + v + "'");
}

} // namespace

const std::vector<std::string>& config_keys()
{
    static const std::vector<std::string> keys{
        "experiment", "kind",    "mix",   "replaced_link", "links",  "distance_km",     "n_memories",
        "midpoint_offset_km",    "target_pairs",           "trials", "seed",            "trace",
        "threads",    "check_invariants", "c_fiber",       "p_bsa",  "f_bsa",           "f_epps",
        "loss",       "l0_km",   "alpha_db_per_km",        "max_events",                "max_wall_seconds",
    };
    return keys;
}

ConfigMap parse_config(std::istream& in)
{
    ConfigMap out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line))
    {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#')
            continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        if (key.empty())
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
        out[key] = trim(t.substr(eq + 1));
    }
    return out;
}

ConfigMap read_config_file(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw std::runtime_error("cannot open config file '" + path + "'");
    return parse_config(f);
}

RunConfig build_config(const ConfigMap& settings)
{
    for (const auto& [k, v] : settings)
        if (known_keys().count(k) == 0)
            throw std::invalid_argument("unknown setting '" + k + "'");

    const auto get = [&](const std::string& k) -> const std::string* {
        const auto it = settings.find(k);
        return it == settings.end() ? nullptr : &it->second;
    };
    const auto need = [&](const std::string& k) -> const std::string& {
        if (const auto* v = get(k))
            return *v;
        throw std::invalid_argument("missing setting '" + k + "'");
    };

    const std::string experiment = get("experiment") ? *get("experiment") : "custom";
    const double distance = as_double("distance_km", need("distance_km"));
    const int n = static_cast<int>(as_int("n_memories", need("n_memories")));

    RunConfig c;
    if (experiment == "exp1")
    {
        c = preset_experiment1(distance, n, parse_link_kind(need("kind")));
    }
    else if (experiment == "exp2")
    {
        c = preset_experiment2(distance, n, parse_two_hop_mix(need("mix")));
    }
    else if (experiment == "exp3")
    {
        std::optional<int> replaced;
        if (const auto* r = get("replaced_link"); r != nullptr && *r != "none")
            replaced = static_cast<int>(as_int("replaced_link", *r));
        c = preset_experiment3(distance, n, replaced);
    }
    else if (experiment == "custom")
    {
        std::stringstream ss(need("links"));
        std::string kind;
        LinkSpec base;
        base.span_km = distance;
        base.mem_per_qnic = n;
        while (std::getline(ss, kind, ','))
        {
            base.kind = parse_link_kind(trim(kind));
            c.topology.links.push_back(base);
        }
        c.experiment = "custom";
        c.kind_or_mix = need("links");
        c.distance_km = distance;
        c.n_memories = n;
    }
    else
    {
        throw std::invalid_argument("unknown experiment '" + experiment + "' (expected exp1, exp2, exp3 or custom)");
    }

    for (auto& link : c.topology.links)
    {
        PhysParams& p = link.params;
        if (const auto* v = get("midpoint_offset_km"))
            link.midpoint_offset_km = as_double("midpoint_offset_km", *v);
        if (const auto* v = get("c_fiber"))
            p.c_fiber_km_s = as_double("c_fiber", *v);
        if (const auto* v = get("p_bsa"))
            p.p_bsa = as_double("p_bsa", *v);
        if (const auto* v = get("f_bsa"))
            p.f_bsa_hz = as_double("f_bsa", *v);
        if (const auto* v = get("f_epps"))
            p.f_epps_default_hz = as_double("f_epps", *v);
        const std::string loss = get("loss") ? *get("loss") : "exponential";
        if (loss == "exponential")
        {
            ExponentialLoss e;
            if (const auto* v = get("l0_km"))
                e.l0_km = as_double("l0_km", *v);
            p.loss = e;
        }
        else if (loss == "decibel")
        {
            DecibelLoss d;
            if (const auto* v = get("alpha_db_per_km"))
                d.alpha_db_per_km = as_double("alpha_db_per_km", *v);
            p.loss = d;
        }
        else
        {
            throw std::invalid_argument("unknown loss model '" + loss + "' (expected exponential or decibel)");
        }
    }

    if (const auto* v = get("target_pairs"))
        c.target_pairs = as_int("target_pairs", *v);
    if (const auto* v = get("trials"))
        c.trials = static_cast<int>(as_int("trials", *v));
    if (const auto* v = get("seed"))
        c.seed = static_cast<std::uint64_t>(as_int("seed", *v));
    if (const auto* v = get("trace"))
        c.trace = as_bool("trace", *v);
    if (const auto* v = get("threads"))
        c.threads = static_cast<int>(as_int("threads", *v));
    if (const auto* v = get("check_invariants"))
        c.check_invariants = as_bool("check_invariants", *v);
    if (const auto* v = get("max_events"))
        c.budget.max_events = static_cast<std::uint64_t>(as_int("max_events", *v));
    if (const auto* v = get("max_wall_seconds"))
        c.budget.max_wall_seconds = as_double("max_wall_seconds", *v);

    c.validate();
    return c;
}

} // namespace qlinksim
