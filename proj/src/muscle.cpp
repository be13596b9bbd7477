#include "sde/muscle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sde {

void MuscleParams::validate() const {
    if (!(sigma >= kSigmaLo && sigma <= kSigmaHi))
        throw std::domain_error("MuscleParams: sigma outside [0.5, 1.5]");
    if (!(nu >= kNuLo && nu <= kNuHi))
        throw std::domain_error("MuscleParams: nu outside [0.5, 1.5]");
    if (!(kappa >= kKappaLo && kappa <= kKappaHi))
        throw std::domain_error("MuscleParams: kappa outside [0.5, 2.0]");
    if (!(f0_ref > 0.0)) throw std::domain_error("MuscleParams: f0_ref must be positive");
    if (!(vmax_ref > 0.0)) throw std::domain_error("MuscleParams: vmax_ref must be positive");
    if (!(l_max > 1.0)) throw std::domain_error("MuscleParams: l_max must exceed 1");
}

double scale_peak_force(double sigma, double f0_ref) {
    if (!(sigma > 0.0)) throw std::domain_error("scale_peak_force: sigma must be positive");
    if (!(f0_ref > 0.0)) throw std::domain_error("scale_peak_force: f0_ref must be positive");
    return sigma * f0_ref;
}

double normalize_velocity(double v, double nu, double vmax_ref) {
    if (!(nu > 0.0)) throw std::domain_error("normalize_velocity: nu must be positive");
    if (!(vmax_ref > 0.0)) throw std::domain_error("normalize_velocity: vmax_ref must be positive");
    return v / (nu * vmax_ref);
}

double passive_force(double length, double kappa, double l_max) {
    if (!(length > 0.0)) throw std::domain_error("passive_force: length must be positive");
    if (!(kappa > 0.0)) throw std::domain_error("passive_force: kappa must be positive");
    if (!(l_max > 1.0)) throw std::domain_error("passive_force: l_max must exceed 1");
    // expm1 keeps the L -> 1+ limit exact; at L == l_max numerator and
    // denominator are the same expression, so the ratio is exactly 1.
    const double num = std::expm1(kappa * (length - 1.0));
    const double den = std::expm1(kappa * (l_max - 1.0));
    return std::max(0.0, num / den);
}

double active_force_length(double length) {
    if (!(length > 0.0)) throw std::domain_error("active_force_length: length must be positive");
    const double t = (length - 1.0) / kForceLengthHalfWidth;
    return std::clamp(1.0 - t * t, 0.0, 1.0);
}

double force_velocity(double v_tilde) {
    if (v_tilde >= 1.0) return 0.0;
    if (v_tilde >= 0.0)
        return (1.0 - v_tilde) / (1.0 + kForceVelocityCurvature * v_tilde);
    // lengthening: linear rise capped at the eccentric plateau
    return std::min(kEccentricPlateau, 1.0 - kEccentricSlope * v_tilde);
}

double muscle_force(const MuscleState& state, const MuscleParams& params) {
    if (!(state.length > 0.0)) throw std::domain_error("muscle_force: length must be positive");
    if (!(state.activation >= 0.0 && state.activation <= 1.0))
        throw std::domain_error("muscle_force: activation outside [0, 1]");
    const double v_tilde = normalize_velocity(state.velocity, params.nu, params.vmax_ref);
    const double active =
        active_force_length(state.length) * force_velocity(v_tilde) * state.activation;
    const double passive = passive_force(state.length, params.kappa, params.l_max);
    return -(active + passive) * scale_peak_force(params.sigma, params.f0_ref);
}

double activation_step(double a, double u, double dt, double tau) {
    if (!(dt > 0.0)) throw std::domain_error("activation_step: dt must be positive");
    if (!(a >= 0.0 && a <= 1.0)) throw std::domain_error("activation_step: a outside [0, 1]");
    if (!(u >= 0.0 && u <= 1.0)) throw std::domain_error("activation_step: u outside [0, 1]");
    return std::clamp(a + dt * (u - a) / tau, 0.0, 1.0);
}

}  // namespace sde
