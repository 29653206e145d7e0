#include "qlinksim/analytics.hpp"
#include "qlinksim/config.hpp"
#include "qlinksim/harness.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace qlinksim;

namespace
{

py::dict result_dict(const RunResult& r)
{
    py::dict d;
    d["rate_bp_s"] = r.rate_bp_s;
    d["std_bp_s"] = r.std_bp_s;
    d["per_trial_completion_s"] = r.per_trial_completion_s;
    return d;
}

RunConfig with_run_options(RunConfig c, int trials, std::uint64_t seed, std::int64_t target_pairs, int threads)
{
    c.trials = trials;
    c.seed = seed;
    c.target_pairs = target_pairs;
    c.threads = threads;
    return c;
}

} // namespace

PYBIND11_MODULE(_qlinksim, m)
{
    m.doc() = "Discrete-event simulator for MIM/MSM quantum link chains";

    py::register_exception<ProtocolFault>(m, "ProtocolFault", PyExc_RuntimeError);
    py::register_exception<StarvedError>(m, "StarvedError", PyExc_RuntimeError);
    py::register_exception<TimeoutError>(m, "SimTimeoutError", PyExc_RuntimeError);

    py::enum_<LinkKind>(m, "LinkKind")
        .value("MIM", LinkKind::MIM)
        .value("MSM", LinkKind::MSM)
        .value("AdaptiveMSM", LinkKind::AdaptiveMSM);

    py::class_<PhysParams>(m, "PhysParams")
        .def(py::init<>())
        .def_readwrite("c_fiber_km_s", &PhysParams::c_fiber_km_s)
        .def_readwrite("p_bsa", &PhysParams::p_bsa)
        .def_readwrite("f_bsa_hz", &PhysParams::f_bsa_hz)
        .def_readwrite("f_epps_default_hz", &PhysParams::f_epps_default_hz)
        .def("use_exponential_loss", [](PhysParams& p, double l0) { p.loss = ExponentialLoss{l0}; },
             py::arg("l0_km") = 21.0)
        .def("use_decibel_loss", [](PhysParams& p, double a) { p.loss = DecibelLoss{a}; },
             py::arg("alpha_db_per_km") = 0.2);

    py::class_<LinkSpec>(m, "LinkSpec")
        .def(py::init([](LinkKind kind, double span_km, int mem_per_qnic, double offset, const PhysParams& params) {
                 LinkSpec s;
                 s.kind = kind;
                 s.span_km = span_km;
                 s.mem_per_qnic = mem_per_qnic;
                 s.midpoint_offset_km = offset;
                 s.params = params;
                 s.validate();
                 return s;
             }),
             py::arg("kind"), py::arg("span_km"), py::arg("mem_per_qnic") = 1, py::arg("midpoint_offset_km") = 0.0,
             py::arg("params") = PhysParams{})
        .def_readwrite("kind", &LinkSpec::kind)
        .def_readwrite("span_km", &LinkSpec::span_km)
        .def_readwrite("mem_per_qnic", &LinkSpec::mem_per_qnic)
        .def_readwrite("midpoint_offset_km", &LinkSpec::midpoint_offset_km)
        .def_readwrite("params", &LinkSpec::params)
        .def_property_readonly("arm_left_km", &LinkSpec::arm_left_km)
        .def_property_readonly("arm_right_km", &LinkSpec::arm_right_km);

    m.def("survival_probability", [](double d, const PhysParams& p) { return survival_probability(d, p.loss); },
          py::arg("distance_km"), py::arg("params") = PhysParams{});
    m.def("bsm_success_probability", &bsm_success_probability, py::arg("arm_km"), py::arg("params") = PhysParams{});
    m.def("one_way_latency_ps", [](double d, const PhysParams& p) { return one_way_latency(d, p).ticks; },
          py::arg("distance_km"), py::arg("params") = PhysParams{});
    m.def("compute_adaptive_rate", &compute_adaptive_rate, py::arg("spec"));

    m.def("saturation_threshold", &analytics::saturation_threshold, py::arg("arm_km"), py::arg("p_success"),
          py::arg("f_epps_hz"), py::arg("c_fiber_km_s") = 208189.0);
    m.def("latch_window", &analytics::latch_window, py::arg("arm_km"), py::arg("f_epps_hz"),
          py::arg("c_fiber_km_s") = 208189.0);
    m.def("recurrence_probability", &analytics::recurrence_probability, py::arg("p_success"), py::arg("m"));
    m.def("predicted_two_hop_rate", &analytics::predicted_two_hop_rate, py::arg("t_slow_link_s"),
          py::arg("t_es_delay_s"));

    m.def(
        "swap_schedule",
        [](int nodes) {
            const SwapSchedule s = SwapSchedule::build(nodes);
            py::dict out;
            for (int n = 0; n < nodes; ++n)
                if (const auto& e = s.entry(n))
                    out[py::int_(n)] = py::make_tuple(e->level, e->left_target, e->right_target);
            return out;
        },
        py::arg("nodes"), "Map of repeater node -> (level, left_target, right_target).");

    m.def(
        "run_chain",
        [](const std::vector<LinkSpec>& links, int trials, std::uint64_t seed, std::int64_t target_pairs,
           int threads, bool check_invariants) {
            RunConfig c;
            c.topology.links = links;
            c.check_invariants = check_invariants;
            RunResult r;
            {
                py::gil_scoped_release nogil;
                r = run(with_run_options(c, trials, seed, target_pairs, threads));
            }
            return result_dict(r);
        },
        py::arg("links"), py::arg("trials") = 100, py::arg("seed") = 1, py::arg("target_pairs") = 100,
        py::arg("threads") = 1, py::arg("check_invariants") = false);

    m.def(
        "run_experiment",
        [](const std::string& experiment, double distance_km, int n_memories, const std::string& variant,
           int trials, std::uint64_t seed, std::int64_t target_pairs, int threads) {
            RunConfig c;
            if (experiment == "exp1")
                c = preset_experiment1(distance_km, n_memories, parse_link_kind(variant));
            else if (experiment == "exp2")
                c = preset_experiment2(distance_km, n_memories, parse_two_hop_mix(variant));
            else if (experiment == "exp3")
                c = preset_experiment3(distance_km, n_memories,
                                       variant == "none" ? std::nullopt : std::optional<int>(std::stoi(variant)));
            else
                throw std::invalid_argument("unknown experiment '" + experiment + "'");
            c = with_run_options(c, trials, seed, target_pairs, threads);
            RunResult r;
            {
                py::gil_scoped_release nogil;
                r = run(c);
            }
            std::ostringstream csv;
            write_csv(csv, {ResultRow::from(c, r)});
            py::dict d = result_dict(r);
            d["csv"] = csv.str();
            return d;
        },
        py::arg("experiment"), py::arg("distance_km"), py::arg("n_memories"), py::arg("variant"),
        py::arg("trials") = 100, py::arg("seed") = 1, py::arg("target_pairs") = 100, py::arg("threads") = 1,
        "variant is the link kind (exp1), the mix (exp2) or the replaced link / 'none' (exp3).");

    m.def(
        "run_config",
        [](const std::map<std::string, std::string>& settings) {
            const RunConfig c = build_config(settings);
            RunResult r;
            {
                py::gil_scoped_release nogil;
                r = run(c);
            }
            return result_dict(r);
        },
        py::arg("settings"), "Run a configuration given as the key/value pairs of a config file.");

    m.def(
        "run_bare_link",
        [](const LinkSpec& spec, std::int64_t target_pairs, int trials, std::uint64_t seed) {
            return result_dict(run_bare_link(spec, target_pairs, trials, seed));
        },
        py::arg("spec"), py::arg("target_pairs") = 100, py::arg("trials") = 20, py::arg("seed") = 1);

    m.def(
        "measure_latch_recurrence",
        [](const LinkSpec& spec, std::uint64_t seed, std::int64_t min_windows) {
            const LatchMeasurement lm = measure_latch_recurrence(spec, seed, min_windows);
            py::dict d;
            d["windows"] = lm.statistic.windows;
            d["recurrences"] = lm.statistic.recurrences;
            d["fraction"] = lm.statistic.fraction();
            d["window"] = lm.window;
            d["p_side"] = lm.p_side;
            d["predicted"] = lm.predicted;
            d["rate_hz"] = lm.rate_hz;
            return d;
        },
        py::arg("spec"), py::arg("seed") = 1, py::arg("min_windows") = 10'000);
}
