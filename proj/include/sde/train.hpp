#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "sde/policy.hpp"
#include "sde/ppo.hpp"
#include "sde/spectral.hpp"
#include "sde/walker.hpp"

namespace sde {

// Dimension of the design policy's raw output for a mode (0 for Fixed; k for
// single-block ablations; 3k otherwise — with the identity basis of Direct
// mode this is 3M).
int design_action_dim(Mode mode, const SpectralBasis* basis);

struct ActionSample {
    std::vector<double> raw;      // pre-squash Gaussian sample
    std::vector<double> squashed; // latent code (design) or excitations (control)
    double log_prob = 0.0;        // density of the squashed action
    double value = 0.0;
};

// One-shot design action: tanh-squashed latent in [-kLatentRange, kLatentRange]^d.
ActionSample design_act(const GaussianPolicy& pi, const std::vector<double>& s0, Rng& rng,
                        bool deterministic = false);

// Control action: per-muscle excitations squashed into (0, 1).
ActionSample control_act(const GaussianPolicy& pi, const std::vector<double>& obs, Rng& rng,
                         bool deterministic = false);

// Assemble the full 3k latent vector from the mode's raw design output
// (single-block ablations zero the other two blocks).
LatentCode assemble_latent(Mode mode, const SpectralBasis& basis,
                           const std::vector<double>& squashed);

// Run one two-stage episode: sample/decode/apply the morphology at t = 0,
// then roll the controller to termination or horizon.
EpisodeRecord run_episode(WalkerEnv& env, const WalkerModel& base_model,
                          const GaussianPolicy* design, const GaussianPolicy& control,
                          const SpectralBasis* basis, Mode mode, Rng& rng,
                          bool deterministic = false);

struct CurvePoint {
    int iteration = 0;
    long env_steps = 0;
    double mean_return = 0.0;
    double std_return = 0.0;
    double eval_return = 0.0;
    bool has_morph = false;
    double mean_sigma = 0.0, mean_nu = 0.0, mean_kappa = 0.0;
    double explained_variance = 0.0;
    int faulted_episodes = 0;
};

struct EvalStats {
    int episodes = 0;
    double mean_return = 0.0;
    double std_return = 0.0;
    double fall_rate = 0.0;
    bool has_morph = false;
    std::vector<double> mean_theta; // 3M (empty in Fixed mode)
    double mean_sigma = 0.0, mean_nu = 0.0, mean_kappa = 0.0;
};

// Deterministic-action rollouts.
EvalStats evaluate_policies(const WalkerModel& base_model, const TerrainProfile& terrain,
                            const GaussianPolicy* design, const GaussianPolicy& control,
                            const SpectralBasis* basis, Mode mode, int episodes,
                            std::uint64_t seed);

struct TrainResult {
    std::vector<CurvePoint> curve;
    std::optional<GaussianPolicy> design;
    GaussianPolicy control;
    long total_env_steps = 0;
    int iterations = 0;
    int aborted_updates = 0;
};

class Trainer {
public:
    // basis must be present for every mode except Fixed (Direct builds its
    // identity basis upstream).
    Trainer(WalkerModel base_model, TerrainProfile terrain, std::optional<SpectralBasis> basis,
            TrainConfig cfg);

    // Collect whole episodes across workers until every worker reaches its
    // quota of min_steps / workers control steps; buffers merge in worker
    // order, so the result is independent of scheduling.
    RolloutBuffer collect(const GaussianPolicy* design, const GaussianPolicy& control,
                          int min_steps, std::uint64_t stream, bool parallel) const;

    TrainResult run(const std::function<void(const CurvePoint&)>& on_iteration = {});

    int observation_dim() const { return obs_dim_; }
    int design_dim() const { return design_dim_; }
    const TrainConfig& config() const { return cfg_; }
    const SpectralBasis* basis() const { return basis_ ? &*basis_ : nullptr; }
    const WalkerModel& base_model() const { return base_model_; }

private:
    WalkerModel base_model_;
    TerrainProfile terrain_;
    std::optional<SpectralBasis> basis_;
    TrainConfig cfg_;
    int obs_dim_ = 0;
    int design_dim_ = 0;
};

}  // namespace sde
