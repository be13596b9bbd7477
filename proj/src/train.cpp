#include "sde/train.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sde/parallel.hpp"

namespace sde {

int design_action_dim(Mode mode, const SpectralBasis* basis) {
    if (mode == Mode::Fixed) return 0;
    if (basis == nullptr) throw std::invalid_argument("design_action_dim: basis required");
    switch (mode) {
        case Mode::SDE_sigma:
        case Mode::SDE_nu:
        case Mode::SDE_kappa:
            return basis->k;
        default:
            return 3 * basis->k;
    }
}

ActionSample design_act(const GaussianPolicy& pi, const std::vector<double>& s0, Rng& rng,
                        bool deterministic) {
    const GaussianPolicy::Forward f = pi.forward(s0);
    ActionSample a;
    a.raw = deterministic ? f.mean : pi.sample(f, rng);
    a.squashed.resize(a.raw.size());
    for (size_t i = 0; i < a.raw.size(); ++i) a.squashed[i] = squash_symmetric(a.raw[i], kLatentRange);
    a.log_prob = squashed_log_prob_symmetric(f.mean, f.logstd, a.raw, kLatentRange);
    a.value = f.value;
    return a;
}

ActionSample control_act(const GaussianPolicy& pi, const std::vector<double>& obs, Rng& rng,
                         bool deterministic) {
    const GaussianPolicy::Forward f = pi.forward(obs);
    ActionSample a;
    a.raw = deterministic ? f.mean : pi.sample(f, rng);
    a.squashed.resize(a.raw.size());
    for (size_t i = 0; i < a.raw.size(); ++i) a.squashed[i] = squash_unit(a.raw[i]);
    a.log_prob = squashed_log_prob_unit(f.mean, f.logstd, a.raw);
    a.value = f.value;
    return a;
}

LatentCode assemble_latent(Mode mode, const SpectralBasis& basis,
                           const std::vector<double>& squashed) {
    LatentCode z;
    z.k = basis.k;
    z.z.assign(3 * basis.k, 0.0);
    auto fill_block = [&](int block) {
        for (int i = 0; i < basis.k; ++i) z.z[block * basis.k + i] = squashed[i];
    };
    switch (mode) {
        case Mode::SDE_sigma: fill_block(0); break;
        case Mode::SDE_nu: fill_block(1); break;
        case Mode::SDE_kappa: fill_block(2); break;
        case Mode::Fixed:
            throw std::invalid_argument("assemble_latent: Fixed mode has no design action");
        default:
            if (static_cast<int>(squashed.size()) != 3 * basis.k)
                throw std::invalid_argument("assemble_latent: latent size mismatch");
            z.z = squashed;
            break;
    }
    return z;
}

EpisodeRecord run_episode(WalkerEnv& env, const WalkerModel& base_model,
                          const GaussianPolicy* design, const GaussianPolicy& control,
                          const SpectralBasis* basis, Mode mode, Rng& rng,
                          bool deterministic) {
    EpisodeRecord ep;
    env.model() = base_model;
    env.set_theta_observation(std::vector<double>(3 * (basis ? basis->m_groups
                                                              : base_model.num_groups()),
                                                  0.0));
    env.reset_env(rng.next_u64());

    if (mode_has_design(mode)) {
        if (design == nullptr || basis == nullptr)
            throw std::invalid_argument("run_episode: mode requires a design policy and basis");
        const std::vector<double> s0 = env.observation();
        const ActionSample a = design_act(*design, s0, rng, deterministic);
        const LatentCode z = assemble_latent(mode, *basis, a.squashed);
        const MorphologyVector theta = decode_morphology(z, *basis);
        env.model() = apply_morphology(theta, base_model);
        env.set_theta_observation(normalize_theta(theta));
        ep.theta = theta.theta;
        StepRecord rec;
        rec.stage = Stage::design;
        rec.obs = s0;
        rec.action_raw = a.raw;
        rec.log_prob = a.log_prob;
        rec.value = a.value;
        ep.steps.push_back(std::move(rec));
        ep.has_design = true;
    }
    ep.morph_hash = env.morph_hash();

    while (!env.state().done) {
        const std::vector<double> obs = env.observation();
        const ActionSample a = control_act(control, obs, rng, deterministic);
        const WalkerEnv::StepResult sr = env.step(a.squashed);
        StepRecord rec;
        rec.stage = Stage::control;
        rec.obs = obs;
        rec.action_raw = a.raw;
        rec.log_prob = a.log_prob;
        rec.value = a.value;
        rec.reward = sr.reward;
        rec.done = sr.fell; // horizon expiry bootstraps instead
        ep.steps.push_back(std::move(rec));
        ep.env_steps += 1;
        ep.undiscounted_return += sr.reward;
        if (env.morph_hash() != ep.morph_hash) ep.morph_hash_consistent = false;
        if (sr.fault) {
            ep.faulted = true;
            break;
        }
    }
    if (!ep.faulted && env.state().done && !env.state().fell) {
        ep.truncated = true;
        ep.bootstrap_value = control.forward(env.observation()).value;
    }
    return ep;
}

EvalStats evaluate_policies(const WalkerModel& base_model, const TerrainProfile& terrain,
                            const GaussianPolicy* design, const GaussianPolicy& control,
                            const SpectralBasis* basis, Mode mode, int episodes,
                            std::uint64_t seed) {
    EvalStats s;
    if (episodes <= 0) return s;
    s.episodes = episodes;
    std::vector<double> returns;
    returns.reserve(episodes);
    int falls = 0;
    std::vector<double> theta_sum;
    WalkerEnv env(base_model, terrain);
    for (int e = 0; e < episodes; ++e) {
        Rng rng(derive_seed(seed, 0xe7a1u, e));
        const EpisodeRecord ep =
            run_episode(env, base_model, design, control, basis, mode, rng, true);
        returns.push_back(ep.undiscounted_return);
        if (env.state().fell) ++falls;
        if (!ep.theta.empty()) {
            if (theta_sum.empty()) theta_sum.assign(ep.theta.size(), 0.0);
            for (size_t i = 0; i < ep.theta.size(); ++i) theta_sum[i] += ep.theta[i];
        }
    }
    double mean = 0.0;
    for (double r : returns) mean += r;
    mean /= episodes;
    double var = 0.0;
    for (double r : returns) var += (r - mean) * (r - mean);
    s.mean_return = mean;
    s.std_return = episodes > 1 ? std::sqrt(var / (episodes - 1)) : 0.0;
    s.fall_rate = static_cast<double>(falls) / episodes;
    if (!theta_sum.empty()) {
        s.has_morph = true;
        s.mean_theta.resize(theta_sum.size());
        for (size_t i = 0; i < theta_sum.size(); ++i) s.mean_theta[i] = theta_sum[i] / episodes;
    } else {
        // Fixed mode runs on the default morphology
        s.mean_theta = default_morphology(base_model.num_groups()).theta;
    }
    const int m = static_cast<int>(s.mean_theta.size()) / 3;
    for (int g = 0; g < m; ++g) {
        s.mean_sigma += s.mean_theta[g] / m;
        s.mean_nu += s.mean_theta[m + g] / m;
        s.mean_kappa += s.mean_theta[2 * m + g] / m;
    }
    return s;
}

Trainer::Trainer(WalkerModel base_model, TerrainProfile terrain,
                 std::optional<SpectralBasis> basis, TrainConfig cfg)
    : base_model_(std::move(base_model)), terrain_(std::move(terrain)), basis_(std::move(basis)),
      cfg_(cfg) {
    cfg_.validate();
    base_model_.validate();
    if (mode_has_design(cfg_.mode)) {
        if (!basis_) throw std::invalid_argument("Trainer: mode requires a spectral basis");
        basis_->validate();
        if (cfg_.mode == Mode::SDE_asym) {
            if (!basis_->per_muscle)
                throw std::invalid_argument("Trainer: SDE-Asym requires a per-muscle basis");
        } else if (basis_->per_muscle) {
            throw std::invalid_argument("Trainer: symmetric mode given a per-muscle basis");
        }
        const int expected_m =
            basis_->per_muscle ? base_model_.num_muscles() : base_model_.num_groups();
        if (basis_->m_groups != expected_m)
            throw std::invalid_argument("Trainer: basis group count does not match model");
    } else if (basis_) {
        basis_.reset(); // Fixed mode ignores any basis
    }
    const int theta_dim = 3 * (basis_ ? basis_->m_groups : base_model_.num_groups());
    obs_dim_ = observation_size(base_model_, theta_dim);
    design_dim_ = design_action_dim(cfg_.mode, basis_ ? &*basis_ : nullptr);
}

RolloutBuffer Trainer::collect(const GaussianPolicy* design, const GaussianPolicy& control,
                               int min_steps, std::uint64_t stream, bool parallel) const {
    const int workers = cfg_.workers;
    const int quota = (min_steps + workers - 1) / workers;
    std::vector<RolloutBuffer> parts(workers);
    parallel_for(workers, parallel, [&](int w) {
        Rng rng(derive_seed(stream, 0xc011u, w));
        WalkerEnv env(base_model_, terrain_);
        int steps = 0;
        while (steps < quota) {
            EpisodeRecord ep = run_episode(env, base_model_, design, control,
                                           basis_ ? &*basis_ : nullptr, cfg_.mode, rng, false);
            steps += ep.env_steps;
            parts[w].episodes.push_back(std::move(ep));
        }
    });
    RolloutBuffer merged;
    for (auto& p : parts)
        for (auto& e : p.episodes) merged.episodes.push_back(std::move(e));
    return merged;
}

TrainResult Trainer::run(const std::function<void(const CurvePoint&)>& on_iteration) {
    const bool has_design = mode_has_design(cfg_.mode);
    std::optional<GaussianPolicy> design;
    if (has_design)
        design.emplace(obs_dim_, cfg_.design_hidden, design_dim_,
                       derive_seed(cfg_.seed, 0xde51u), cfg_.design_logstd_init);
    GaussianPolicy control(obs_dim_, cfg_.control_hidden, base_model_.num_muscles(),
                           derive_seed(cfg_.seed, 0xc321u), cfg_.control_logstd_init);

    std::optional<Adam> design_opt;
    if (design) design_opt.emplace(design->param_count(), cfg_.learning_rate);
    Adam control_opt(control.param_count(), cfg_.learning_rate);
    Rng update_rng(derive_seed(cfg_.seed, 0x0bd7u));

    TrainResult result{.curve = {}, .design = std::nullopt, .control = control};
    long env_steps = 0;
    int iter = 0;
    double last_eval = 0.0;
    bool have_eval = false;
    while (env_steps < cfg_.step_budget) {
        if (iter % cfg_.eval_every == 0) {
            last_eval = evaluate_policies(base_model_, terrain_, design ? &*design : nullptr,
                                          control, basis_ ? &*basis_ : nullptr, cfg_.mode,
                                          cfg_.eval_episodes,
                                          derive_seed(cfg_.seed, 0xeeu, iter))
                            .mean_return;
            have_eval = true;
        }
        RolloutBuffer buffer = collect(design ? &*design : nullptr, control, cfg_.rollout_steps,
                                       derive_seed(cfg_.seed, 0x17e2u, iter), cfg_.parallel);
        env_steps += buffer.total_env_steps();

        CurvePoint pt;
        pt.iteration = iter;
        pt.env_steps = env_steps;
        pt.eval_return = have_eval ? last_eval : 0.0;
        {
            std::vector<double> returns;
            for (const auto& e : buffer.episodes) {
                if (e.faulted) {
                    ++pt.faulted_episodes;
                    continue;
                }
                returns.push_back(e.undiscounted_return);
            }
            if (!returns.empty()) {
                double mean = 0.0;
                for (double r : returns) mean += r;
                mean /= static_cast<double>(returns.size());
                double var = 0.0;
                for (double r : returns) var += (r - mean) * (r - mean);
                pt.mean_return = mean;
                pt.std_return = returns.size() > 1
                                    ? std::sqrt(var / static_cast<double>(returns.size() - 1))
                                    : 0.0;
            }
        }
        if (has_design) {
            pt.has_morph = true;
            pt.explained_variance = basis_->explained_variance;
            const int m = basis_->m_groups;
            int n = 0;
            for (const auto& e : buffer.episodes) {
                if (e.theta.empty()) continue;
                double s = 0.0, nu = 0.0, ka = 0.0;
                for (int g = 0; g < m; ++g) {
                    s += e.theta[g];
                    nu += e.theta[m + g];
                    ka += e.theta[2 * m + g];
                }
                pt.mean_sigma += s / m;
                pt.mean_nu += nu / m;
                pt.mean_kappa += ka / m;
                ++n;
            }
            if (n > 0) {
                pt.mean_sigma /= n;
                pt.mean_nu /= n;
                pt.mean_kappa /= n;
            }
        }

        const UpdateStats stats =
            ppo_update(design ? &*design : nullptr, design_opt ? &*design_opt : nullptr, control,
                       control_opt, buffer, cfg_, update_rng, cfg_.parallel);
        if (stats.aborted) ++result.aborted_updates;

        result.curve.push_back(pt);
        if (on_iteration) on_iteration(pt);
        ++iter;
    }
    result.design = std::move(design);
    result.control = std::move(control);
    result.total_env_steps = env_steps;
    result.iterations = iter;
    return result;
}

}  // namespace sde
