#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sde/muscle.hpp"
#include "sde/terrain.hpp"

namespace sde {

// Generalized coordinates:
// [x, z, pitch, L hip, L knee, L ankle, L toe, R hip, R knee, R ankle, R toe].
// The toe joints carry a passive spring and are spanned only by the
// dorsiflexor tendon; they give the muscle-length dynamics a fourth
// independent coordinate per leg.
inline constexpr int kJointsPerLeg = 4;
inline constexpr int kNumJoints = 2 * kJointsPerLeg;
inline constexpr int kNumDof = 3 + kNumJoints;
inline constexpr int kBodiesPerLeg = 4; // thigh, shank, foot, toe
inline constexpr int kNumBodies = 1 + 2 * kBodiesPerLeg;

// Integration and episode constants.
inline constexpr double kDtPhysics = 0.002;  // s
inline constexpr int kSubstepsPerControl = 10;
inline constexpr double kDtControl = kDtPhysics * kSubstepsPerControl;
inline constexpr int kHorizonControlSteps = 1000;
inline constexpr int kHorizonPhysicsSteps = kHorizonControlSteps * kSubstepsPerControl;

// Contact model (per foot endpoint).
inline constexpr double kContactStiffness = 2.0e4; // N/m
inline constexpr double kContactDamping = 500.0;   // N s/m
inline constexpr double kFrictionCoeff = 1.0;

// Soft joint limits.
inline constexpr double kJointLimitStiffness = 100.0; // N m / rad
inline constexpr double kJointLimitDamping = 0.5;     // N m s / rad

// Reward weights.
inline constexpr double kRewardForward = 1.0;
inline constexpr double kRewardBalance = 0.1;
inline constexpr double kBalancePitchScale = 0.25;
inline constexpr double kRewardEffort = 0.05;
inline constexpr double kFallPenalty = 10.0;

// Termination thresholds.
inline constexpr double kFallHeightFraction = 0.5;
inline constexpr double kFallPitchLimit = 1.0; // rad

inline constexpr double kGravity = 9.81;
inline constexpr double kMinNormalizedLength = 0.3;
inline constexpr double kResetPerturbation = 0.02; // rad

// Terrain look-ahead offsets in the observation, metres ahead of the torso.
inline constexpr std::array<double, 6> kLookaheadOffsets = {0.2, 0.4, 0.6, 0.8, 1.0, 1.2};

struct Vec2 {
    double x = 0.0, z = 0.0;
    Vec2 operator+(Vec2 o) const { return {x + o.x, z + o.z}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, z - o.z}; }
    Vec2 operator*(double s) const { return {x * s, z * s}; }
    double dot(Vec2 o) const { return x * o.x + z * o.z; }
};
// 90-degree CCW rotation; d/dtheta of a rotating lever arm.
inline Vec2 perp(Vec2 v) { return {-v.z, v.x}; }

struct SegmentDef {
    std::string name;
    double mass = 0.0;    // kg
    double length = 0.0;  // m
    double inertia = 0.0; // kg m^2 about COM
    double com_frac = 0.5;
};

struct JointDef {
    std::string name;
    double limit_lo = 0.0, limit_hi = 0.0; // rad
    double passive_stiffness = 0.0;        // N m / rad (toe springs)
    double passive_damping = 0.0;          // N m s / rad
};

struct MuscleDescriptor {
    std::string name;
    double rest_length_geom = 0.3; // m
    // signed constant moment arms over (hip, knee, ankle, toe) of its side
    std::array<double, kJointsPerLeg> moment_arms{};
    MuscleParams params;
    int group_id = 0; // symmetry group in [0, M)
    int side = 0;     // 0 = left, 1 = right
};

struct WalkerModel {
    // segments[0] = torso, then thigh/shank/foot/toe per side
    std::vector<SegmentDef> segments;
    // joints[0..3] = left hip/knee/ankle/toe, [4..7] = right
    std::vector<JointDef> joints;
    std::vector<MuscleDescriptor> muscles;
    std::vector<std::pair<int, int>> symmetry_pairs; // (left index, right index)
    double foot_heel_back = 0.05;  // m, heel behind the ankle
    double standing_height = 0.9;  // m, nominal hip height

    int num_muscles() const { return static_cast<int>(muscles.size()); }
    int num_groups() const;
    void validate() const; // throws std::invalid_argument

    static WalkerModel default_model();

    std::string to_json() const;
    static WalkerModel from_json(const std::string& text);
};

struct SimState {
    std::array<double, kNumDof> q{};
    std::array<double, kNumDof> qdot{};
    std::vector<double> activations;
    int t = 0; // physics-step index
    bool done = false;
    bool fell = false;
    bool fault = false;
};

// Normalized length of one muscle from the full coordinate vector.
double muscle_length(const std::array<double, kNumDof>& q, const MuscleDescriptor& d);
// Contraction velocity in rest-lengths/s, positive = shortening.
double muscle_velocity(const std::array<double, kNumDof>& qdot, const MuscleDescriptor& d);

// Map muscle force magnitudes to the actuated-joint torques.
std::array<double, kNumJoints> joint_torques(const std::vector<double>& force_magnitudes,
                                             const WalkerModel& model);

// One semi-implicit Euler physics step; mutates state in place.
void dynamics_step(SimState& state, const std::vector<double>& excitations,
                   const WalkerModel& model, const TerrainProfile& terrain, double dt);

// Forward dynamics given total applied joint torques; exposed so tests can
// compare the block-elimination solver against the dense reference.
void forward_dynamics(const WalkerModel& model, const SimState& state,
                      const std::array<double, kNumJoints>& applied_joint_torques,
                      const TerrainProfile& terrain, double dt, std::array<double, kNumDof>& qdd,
                      bool dense_reference = false);

double reward(const SimState& prev, const SimState& next, const std::vector<double>& excitations);

// Observation layout: [joint angles (8), joint velocities (8), torso z, pitch,
// xdot, zdot, pitchdot, torso clearance, look-ahead heights (6),
// per-muscle (length, velocity, activation), normalized morphology].
std::vector<double> observe(const SimState& state, const std::vector<double>& theta_normalized,
                            const WalkerModel& model, const TerrainProfile& terrain);
int observation_size(const WalkerModel& model, int theta_dim);

SimState reset(const WalkerModel& model, const TerrainProfile& terrain, std::uint64_t seed,
               double perturbation = kResetPerturbation);

// Index permutation that swaps the left and right halves of an observation.
std::vector<int> observation_mirror_permutation(const WalkerModel& model, int theta_dim);
// Swap left/right joint coordinates, velocities and activations.
SimState mirror_state(const SimState& state);

// FNV-1a hash over the applied muscle triads; constant within an episode.
std::uint64_t morphology_hash(const WalkerModel& model);

// Diagnostics for tests: world positions and mechanical energy (including the
// passive joint-spring energy).
struct WalkerDiagnostics {
    Vec2 heel[2], ball[2], toe_tip[2];
    Vec2 com; // whole-body centre of mass
    double kinetic_energy = 0.0;
    double potential_energy = 0.0;
    double com_momentum_x = 0.0;
};
WalkerDiagnostics diagnostics(const WalkerModel& model, const SimState& state);

// Stateful control-rate environment wrapper around the free functions.
class WalkerEnv {
public:
    WalkerEnv(WalkerModel model, TerrainProfile terrain);

    SimState& reset_env(std::uint64_t seed, double perturbation = kResetPerturbation);

    struct StepResult {
        double reward = 0.0;
        bool done = false;
        bool fell = false;
        bool fault = false;
    };
    // One control step (kSubstepsPerControl physics steps under constant
    // excitation). Horizon expiry terminates without the fall penalty.
    StepResult step(const std::vector<double>& excitations);

    const SimState& state() const { return state_; }
    void set_state(const SimState& s) { state_ = s; }
    WalkerModel& model() { return model_; }
    const WalkerModel& model() const { return model_; }
    const TerrainProfile& terrain() const { return terrain_; }

    void set_theta_observation(std::vector<double> theta_normalized);
    const std::vector<double>& theta_observation() const { return theta_norm_; }

    std::vector<double> observation() const;
    std::uint64_t morph_hash() const { return morphology_hash(model_); }
    int control_steps() const { return control_steps_; }

private:
    WalkerModel model_;
    TerrainProfile terrain_;
    SimState state_;
    std::vector<double> theta_norm_;
    int control_steps_ = 0;
};

}  // namespace sde
