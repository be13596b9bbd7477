#pragma once

namespace sde {

// Gap-ledger constants for the dimensionless muscle curves.
inline constexpr double kForceLengthHalfWidth = 0.5;   // F_L zero at L = 1 +/- w
inline constexpr double kForceVelocityCurvature = 4.0; // Hill hyperbola shape
inline constexpr double kEccentricPlateau = 1.5;       // F_V upper bound, lengthening
inline constexpr double kEccentricSlope = 1.0;         // plateau reached at v_tilde = -0.5
inline constexpr double kActivationTau = 0.05;         // s, symmetric rise/decay
inline constexpr double kDefaultLmax = 1.6;            // passive-force saturation length

// Evolutionary bounds on the physiological triad.
inline constexpr double kSigmaLo = 0.5, kSigmaHi = 1.5;
inline constexpr double kNuLo = 0.5, kNuHi = 1.5;
inline constexpr double kKappaLo = 0.5, kKappaHi = 2.0;
inline constexpr double kSigmaDefault = 1.0, kNuDefault = 1.0, kKappaDefault = 1.0;

// Per-muscle physiology: the evolvable triad plus reference constants.
struct MuscleParams {
    double sigma = 1.0;     // strength multiplier on f0_ref
    double nu = 1.0;        // velocity multiplier on vmax_ref
    double kappa = 1.0;     // passive-curve curvature
    double f0_ref = 1000.0; // N, reference peak isometric force
    double vmax_ref = 10.0; // rest-lengths/s, reference max shortening velocity
    double l_max = kDefaultLmax;

    void validate() const; // throws std::domain_error on violated invariants
};

// Instantaneous muscle state in normalized units.
struct MuscleState {
    double length = 1.0;     // L, rest length = 1
    double velocity = 0.0;   // rest-lengths/s, positive = shortening
    double activation = 0.0; // a in [0, 1]
};

// F0(sigma) = sigma * f0_ref
double scale_peak_force(double sigma, double f0_ref);

// v_tilde = v / (nu * vmax_ref)
double normalize_velocity(double v, double nu, double vmax_ref);

// F_P(L, kappa) = max(0, (e^{kappa (L-1)} - 1) / (e^{kappa (l_max-1)} - 1))
double passive_force(double length, double kappa, double l_max);

// Quadratic bell peaking at rest length, zero outside [1-w, 1+w].
double active_force_length(double length);

// Piecewise Hill force-velocity multiplier of the normalized velocity.
double force_velocity(double v_tilde);

// f_m = -(F_L(L) F_V(v_tilde) a + F_P(L, kappa)) * F0(sigma).
// Negative = tensile pull; callers that need torques take the magnitude.
double muscle_force(const MuscleState& state, const MuscleParams& params);

// First-order activation dynamics, forward Euler, clamped to [0, 1].
double activation_step(double a, double u, double dt, double tau = kActivationTau);

}  // namespace sde
