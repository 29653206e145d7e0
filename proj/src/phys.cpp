#include "qlinksim/phys.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace qlinksim
{
namespace
{

void require_distance(double distance_km, const char* what)
{
    if (!(distance_km >= 0.0) || !std::isfinite(distance_km))
    {
        std::ostringstream os;
        os << what << ": distance must be a finite non-negative length, got " << distance_km << " km";
        throw std::invalid_argument(os.str());
    }
}

} // namespace

void PhysParams::validate() const
{
    if (!(c_fiber_km_s > 0.0))
        throw std::invalid_argument("c_fiber must be positive");
    if (!(p_bsa >= 0.0 && p_bsa <= 0.5))
        throw std::invalid_argument("p_bsa must lie in [0, 0.5]");
    if (!(f_bsa_hz > 0.0))
        throw std::invalid_argument("f_bsa must be positive");
    if (!(f_epps_default_hz > 0.0))
        throw std::invalid_argument("f_epps must be positive");
    if (const auto* e = std::get_if<ExponentialLoss>(&loss); e != nullptr && !(e->l0_km > 0.0))
        throw std::invalid_argument("attenuation length l0_km must be positive");
    if (const auto* d = std::get_if<DecibelLoss>(&loss); d != nullptr && !(d->alpha_db_per_km >= 0.0))
        throw std::invalid_argument("alpha_db_per_km must be non-negative");
}

double survival_probability(double distance_km, const LossModel& loss)
{
    require_distance(distance_km, "survival_probability");
    if (const auto* e = std::get_if<ExponentialLoss>(&loss))
        return std::exp(-distance_km / e->l0_km);
    const auto& d = std::get<DecibelLoss>(loss);
    return std::pow(10.0, -d.alpha_db_per_km * distance_km / 10.0);
}

double bsm_success_probability(double arm_km, const PhysParams& params)
{
    return params.p_bsa * survival_probability(arm_km, params.loss);
}

SimTime one_way_latency(double distance_km, const PhysParams& params)
{
    require_distance(distance_km, "one_way_latency");
    return SimTime::from_seconds(distance_km / params.c_fiber_km_s);
}

SimTime period_from_rate(double hz)
{
    if (!(hz > 0.0))
        throw std::invalid_argument("pulse rate must be positive");
    return SimTime::from_seconds(1.0 / hz);
}

} // namespace qlinksim
