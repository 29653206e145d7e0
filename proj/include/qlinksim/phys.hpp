#pragma once

#include "qlinksim/engine.hpp"

#include <variant>

namespace qlinksim
{

/// p_fiber = exp(-L / l0)
struct ExponentialLoss
{
    double l0_km = 21.0;
};

/// p_fiber = 10^(-alpha L / 10)
struct DecibelLoss
{
    double alpha_db_per_km = 0.2;
};

using LossModel = std::variant<ExponentialLoss, DecibelLoss>;

struct PhysParams
{
    double c_fiber_km_s = 208189.0;
    double p_bsa = 0.5;
    double f_bsa_hz = 1e6;
    double f_epps_default_hz = 1e6;
    LossModel loss = ExponentialLoss{};

    // Throws std::invalid_argument on any out-of-range field.
    void validate() const;
};

double survival_probability(double distance_km, const LossModel& loss);

/// Probability that a single optical BSM on an arm of the given length
/// succeeds: p_bsa times the fiber survival probability.
double bsm_success_probability(double arm_km, const PhysParams& params);

/// Fiber propagation delay, shared by photons and classical messages.
SimTime one_way_latency(double distance_km, const PhysParams& params);

/// Pulse period of a source running at `hz`, rounded to the nearest tick.
SimTime period_from_rate(double hz);

} // namespace qlinksim
