#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sde/policy.hpp"
#include "sde/rng.hpp"
#include "sde/terrain.hpp"

namespace sde {

enum class Mode { SDE, Fixed, Direct, SDE_sigma, SDE_nu, SDE_kappa, SDE_asym };

Mode mode_from_string(const std::string& s); // throws std::invalid_argument
std::string mode_to_string(Mode m);
inline bool mode_has_design(Mode m) { return m != Mode::Fixed; }
inline bool mode_needs_basis_file(Mode m) {
    return m != Mode::Fixed && m != Mode::Direct;
}

enum class Stage { design, control };

struct TrainConfig {
    Mode mode = Mode::SDE;
    TerrainKind terrain = TerrainKind::walk;
    int k = 5;
    std::uint64_t seed = 1;
    long step_budget = 1000000;
    int rollout_steps = 8192;
    int epochs = 4;
    int minibatch = 256;
    double learning_rate = 3e-4;
    double gamma = 0.99;
    double gae_lambda = 0.95;
    double clip = 0.2;
    double entropy_coef = 1e-3;
    double value_coef = 0.5;
    double max_grad_norm = 0.5;
    int workers = 2;
    bool parallel = true;
    int eval_every = 10;
    int eval_episodes = 5;
    int design_hidden = 64;
    int control_hidden = 128;
    double design_logstd_init = -0.7;
    double control_logstd_init = -0.5;

    void validate() const; // throws std::invalid_argument
};

struct StepRecord {
    Stage stage = Stage::control;
    std::vector<double> obs;
    std::vector<double> action_raw; // pre-squash Gaussian sample
    double log_prob = 0.0;          // squash-corrected density of the taken action
    double value = 0.0;
    double reward = 0.0;
    bool done = false; // terminal by fall (bootstrap suppressed)
};

struct EpisodeRecord {
    std::vector<StepRecord> steps; // design record first when present
    bool has_design = false;
    bool faulted = false;
    bool truncated = false; // ended by horizon; bootstrap_value applies
    double bootstrap_value = 0.0;
    std::vector<double> theta; // decoded morphology (empty in Fixed mode)
    std::uint64_t morph_hash = 0;
    bool morph_hash_consistent = true;
    int env_steps = 0;
    double undiscounted_return = 0.0;
};

struct RolloutBuffer {
    std::vector<EpisodeRecord> episodes;

    int total_env_steps() const;
    int design_record_count() const;
    int control_record_count() const;
    // Exactly one design record per episode at t = 0 (when the mode has a
    // design stage), control records after it, no interleaving.
    void check_two_stage(bool expect_design) const; // throws std::logic_error
};

struct GaeResult {
    std::vector<double> advantages;
    std::vector<double> returns;
};

// delta_t = r_t + gamma v_{t+1} (1 - done_t) - v_t,
// A_t = delta_t + gamma lambda (1 - done_t) A_{t+1}; v beyond the end is
// bootstrap_value.
GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                      const std::vector<bool>& dones, double gamma, double lambda,
                      double bootstrap_value = 0.0);

enum class SquashKind { symmetric, unit };

struct FlatBatch {
    int n = 0;
    int obs_dim = 0;
    int act_dim = 0;
    SquashKind squash = SquashKind::unit;
    double squash_range = 1.0; // for SquashKind::symmetric
    std::vector<double> obs;       // n x obs_dim
    std::vector<double> actions;   // n x act_dim, raw
    std::vector<double> old_logp;  // n
    std::vector<double> advantages;// n, normalized
    std::vector<double> returns;   // n
};

// Faulted episodes are dropped; advantages normalized per batch.
void build_batches(const RolloutBuffer& buffer, const TrainConfig& cfg, FlatBatch& design_batch,
                   FlatBatch& control_batch);

// Mean PPO loss over the index subset; accumulates d(loss)/d(params) into
// grad (resized and zeroed). Deterministic for any thread count.
double ppo_loss_and_grad(const GaussianPolicy& net, const FlatBatch& batch,
                         const std::vector<int>& indices, const TrainConfig& cfg,
                         std::vector<double>& grad, bool parallel);

struct UpdateStats {
    double control_loss = 0.0;
    double design_loss = 0.0;
    double entropy = 0.0;
    int design_records = 0;
    int control_records = 0;
    bool aborted = false;
};

// Clipped-surrogate update: the design policy sees only design records, the
// control policy only control records. A non-finite loss or gradient restores
// the pre-update parameters and flags the update.
UpdateStats ppo_update(GaussianPolicy* design, Adam* design_opt, GaussianPolicy& control,
                       Adam& control_opt, const RolloutBuffer& buffer, const TrainConfig& cfg,
                       Rng& rng, bool parallel);

}  // namespace sde
