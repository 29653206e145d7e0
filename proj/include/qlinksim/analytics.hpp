#pragma once

#include <cstdint>

namespace qlinksim::analytics
{

/// Memory count beyond which an MSM link stops speeding up:
/// ceil((2L / c) * p_success * f_epps).
std::int64_t saturation_threshold(double arm_km, double p_success, double f_epps_hz, double c_fiber_km_s);

/// Number of EPPS emissions that fit in one node-to-node notification delay:
/// floor(f_epps * 2L / c).
std::int64_t latch_window(double arm_km, double f_epps_hz, double c_fiber_km_s);

/// Probability of at least one local success in m independent attempts.
double recurrence_probability(double p_success, std::int64_t m);

/// Two-hop rate estimate dominated by the slower link: 1 / (t_slow + t_swap).
double predicted_two_hop_rate(double t_slow_link_s, double t_es_delay_s);

struct LatchModel
{
    std::int64_t m = 0;
    double p_success = 0.0;
    double p_at_least_one = 0.0;
};

LatchModel latch_model(double arm_km, double p_success, double f_epps_hz, double c_fiber_km_s);

} // namespace qlinksim::analytics
