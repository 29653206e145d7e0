#include "qlinksim/analytics.hpp"

#include <cmath>
#include <stdexcept>

namespace qlinksim::analytics
{

std::int64_t saturation_threshold(double arm_km, double p_success, double f_epps_hz, double c_fiber_km_s)
{
    if (!(arm_km > 0.0 && p_success > 0.0 && f_epps_hz > 0.0 && c_fiber_km_s > 0.0))
        throw std::invalid_argument("saturation_threshold: all inputs must be positive");
    return static_cast<std::int64_t>(std::ceil(2.0 * arm_km / c_fiber_km_s * p_success * f_epps_hz));
}

std::int64_t latch_window(double arm_km, double f_epps_hz, double c_fiber_km_s)
{
    if (!(arm_km >= 0.0 && f_epps_hz >= 0.0 && c_fiber_km_s > 0.0))
        throw std::invalid_argument("latch_window: inputs out of range");
    return static_cast<std::int64_t>(std::floor(f_epps_hz * 2.0 * arm_km / c_fiber_km_s));
}

double recurrence_probability(double p_success, std::int64_t m)
{
    if (!(p_success >= 0.0 && p_success <= 1.0) || m < 0)
        throw std::invalid_argument("recurrence_probability: need 0 <= p <= 1 and m >= 0");
    if (m == 0)
        return 0.0;
    if (p_success == 1.0)
        return 1.0;
    // 1 - (1 - p)^m without cancellation for small p.
    return -std::expm1(static_cast<double>(m) * std::log1p(-p_success));
}

double predicted_two_hop_rate(double t_slow_link_s, double t_es_delay_s)
{
    if (!(t_slow_link_s > 0.0) || !(t_es_delay_s >= 0.0))
        throw std::invalid_argument("predicted_two_hop_rate: need t_slow > 0 and t_es >= 0");
    return 1.0 / (t_slow_link_s + t_es_delay_s);
}

LatchModel latch_model(double arm_km, double p_success, double f_epps_hz, double c_fiber_km_s)
{
    LatchModel lm;
    lm.m = latch_window(arm_km, f_epps_hz, c_fiber_km_s);
    lm.p_success = p_success;
    lm.p_at_least_one = recurrence_probability(p_success, lm.m);
    return lm;
}

} // namespace qlinksim::analytics
