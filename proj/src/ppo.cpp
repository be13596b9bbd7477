#include "sde/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sde/mat.hpp"
#include "sde/parallel.hpp"

namespace sde {

Mode mode_from_string(const std::string& s) {
    if (s == "SDE") return Mode::SDE;
    if (s == "Fixed") return Mode::Fixed;
    if (s == "Direct") return Mode::Direct;
    if (s == "SDE-sigma") return Mode::SDE_sigma;
    if (s == "SDE-nu") return Mode::SDE_nu;
    if (s == "SDE-kappa") return Mode::SDE_kappa;
    if (s == "SDE-Asym") return Mode::SDE_asym;
    throw std::invalid_argument("unknown mode: " + s);
}

std::string mode_to_string(Mode m) {
    switch (m) {
        case Mode::SDE: return "SDE";
        case Mode::Fixed: return "Fixed";
        case Mode::Direct: return "Direct";
        case Mode::SDE_sigma: return "SDE-sigma";
        case Mode::SDE_nu: return "SDE-nu";
        case Mode::SDE_kappa: return "SDE-kappa";
        case Mode::SDE_asym: return "SDE-Asym";
    }
    return "SDE";
}

void TrainConfig::validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("config: gamma outside [0, 1)");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0))
        throw std::invalid_argument("config: lambda outside [0, 1]");
    if (!(clip > 0.0)) throw std::invalid_argument("config: clip must be positive");
    if (k < 1) throw std::invalid_argument("config: k must be at least 1");
    if (step_budget < 0) throw std::invalid_argument("config: negative step budget");
    if (rollout_steps < 1 || epochs < 1 || minibatch < 1)
        throw std::invalid_argument("config: rollout/epochs/minibatch must be positive");
    if (workers < 1) throw std::invalid_argument("config: workers must be positive");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("config: learning rate must be positive");
    if (eval_every < 1 || eval_episodes < 0)
        throw std::invalid_argument("config: invalid evaluation cadence");
}

int RolloutBuffer::total_env_steps() const {
    int s = 0;
    for (const auto& e : episodes) s += e.env_steps;
    return s;
}

int RolloutBuffer::design_record_count() const {
    int n = 0;
    for (const auto& e : episodes)
        if (e.has_design && !e.faulted) ++n;
    return n;
}

int RolloutBuffer::control_record_count() const {
    int n = 0;
    for (const auto& e : episodes)
        if (!e.faulted) n += static_cast<int>(e.steps.size()) - (e.has_design ? 1 : 0);
    return n;
}

void RolloutBuffer::check_two_stage(bool expect_design) const {
    for (const auto& e : episodes) {
        int design_count = 0;
        for (size_t i = 0; i < e.steps.size(); ++i) {
            if (e.steps[i].stage == Stage::design) {
                ++design_count;
                if (i != 0) throw std::logic_error("buffer: design record not at t = 0");
            }
        }
        if (expect_design) {
            if (design_count != 1 || !e.has_design)
                throw std::logic_error("buffer: episode must hold exactly one design record");
            if (e.steps.size() < 2) throw std::logic_error("buffer: episode has no control records");
        } else if (design_count != 0) {
            throw std::logic_error("buffer: unexpected design record in Fixed mode");
        }
        if (!e.morph_hash_consistent)
            throw std::logic_error("buffer: morphology changed within an episode");
    }
}

GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                      const std::vector<bool>& dones, double gamma, double lambda,
                      double bootstrap_value) {
    const size_t n = rewards.size();
    if (values.size() != n || dones.size() != n)
        throw std::invalid_argument("compute_gae: sequence lengths differ");
    GaeResult out;
    out.advantages.assign(n, 0.0);
    out.returns.assign(n, 0.0);
    double adv = 0.0;
    for (size_t i = n; i-- > 0;) {
        const double not_done = dones[i] ? 0.0 : 1.0;
        const double v_next = (i + 1 < n) ? values[i + 1] : bootstrap_value;
        const double delta = rewards[i] + gamma * v_next * not_done - values[i];
        adv = delta + gamma * lambda * not_done * adv;
        out.advantages[i] = adv;
        out.returns[i] = adv + values[i];
    }
    return out;
}

namespace {

void normalize_advantages(std::vector<double>& adv) {
    const size_t n = adv.size();
    if (n < 2) return;
    double mean = 0.0;
    for (double a : adv) mean += a;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    var /= static_cast<double>(n);
    const double std_dev = std::sqrt(var);
    if (std_dev < 1e-8) return;
    for (double& a : adv) a = (a - mean) / std_dev;
}

void push_record(FlatBatch& b, const StepRecord& s, double advantage, double ret) {
    b.obs.insert(b.obs.end(), s.obs.begin(), s.obs.end());
    b.actions.insert(b.actions.end(), s.action_raw.begin(), s.action_raw.end());
    b.old_logp.push_back(s.log_prob);
    b.advantages.push_back(advantage);
    b.returns.push_back(ret);
    ++b.n;
}

// log |dz/dx| of the squash map, subtracted from the base Gaussian log-density.
double squash_log_jacobian(const FlatBatch& b, const double* x) {
    double corr = 0.0;
    for (int i = 0; i < b.act_dim; ++i) {
        corr += log1m_tanh_sq(x[i]);
        corr += (b.squash == SquashKind::symmetric) ? std::log(b.squash_range) : std::log(0.5);
    }
    return corr;
}

}  // namespace

void build_batches(const RolloutBuffer& buffer, const TrainConfig& cfg, FlatBatch& design_batch,
                   FlatBatch& control_batch) {
    design_batch = FlatBatch{};
    control_batch = FlatBatch{};
    design_batch.squash = SquashKind::symmetric;
    design_batch.squash_range = 2.0;
    control_batch.squash = SquashKind::unit;

    for (const auto& e : buffer.episodes) {
        if (e.faulted || e.steps.empty()) continue;
        const size_t c0 = e.has_design ? 1 : 0;
        const size_t n_ctrl = e.steps.size() - c0;
        if (n_ctrl == 0) continue;

        if (control_batch.obs_dim == 0) {
            control_batch.obs_dim = static_cast<int>(e.steps[c0].obs.size());
            control_batch.act_dim = static_cast<int>(e.steps[c0].action_raw.size());
        }
        std::vector<double> rewards(n_ctrl), values(n_ctrl);
        std::vector<bool> dones(n_ctrl);
        for (size_t i = 0; i < n_ctrl; ++i) {
            rewards[i] = e.steps[c0 + i].reward;
            values[i] = e.steps[c0 + i].value;
            dones[i] = e.steps[c0 + i].done;
        }
        const double bootstrap = e.truncated ? e.bootstrap_value : 0.0;
        const GaeResult gae =
            compute_gae(rewards, values, dones, cfg.gamma, cfg.gae_lambda, bootstrap);
        for (size_t i = 0; i < n_ctrl; ++i)
            push_record(control_batch, e.steps[c0 + i], gae.advantages[i], gae.returns[i]);

        if (e.has_design) {
            if (design_batch.obs_dim == 0) {
                design_batch.obs_dim = static_cast<int>(e.steps[0].obs.size());
                design_batch.act_dim = static_cast<int>(e.steps[0].action_raw.size());
            }
            // episode-level credit: full discounted return against the
            // design value estimate
            double g = 0.0;
            double disc = 1.0;
            for (size_t i = 0; i < n_ctrl; ++i) {
                g += disc * rewards[i];
                disc *= cfg.gamma;
            }
            if (e.truncated) g += disc * e.bootstrap_value;
            push_record(design_batch, e.steps[0], g - e.steps[0].value, g);
        }
    }
    normalize_advantages(design_batch.advantages);
    normalize_advantages(control_batch.advantages);
}

double ppo_loss_and_grad(const GaussianPolicy& net, const FlatBatch& batch,
                         const std::vector<int>& indices, const TrainConfig& cfg,
                         std::vector<double>& grad, bool parallel) {
    const int n = static_cast<int>(indices.size());
    const int np = net.param_count();
    if (n == 0) {
        grad.assign(np, 0.0);
        return 0.0;
    }

    // loss rides in the last accumulator slot so it shares the deterministic
    // block reduction with the gradient
    std::vector<double> acc;
    constexpr int kBlock = 16;
    blocked_accumulate(n, np + 1, kBlock, parallel, acc, [&](int ii, std::vector<double>& a) {
        const int idx = indices[ii];
        const std::vector<double> obs(batch.obs.begin() + static_cast<size_t>(idx) * batch.obs_dim,
                                      batch.obs.begin() + static_cast<size_t>(idx + 1) * batch.obs_dim);
        const std::vector<double> act(
            batch.actions.begin() + static_cast<size_t>(idx) * batch.act_dim,
            batch.actions.begin() + static_cast<size_t>(idx + 1) * batch.act_dim);

        const GaussianPolicy::Forward f = net.forward(obs);
        const double base_lp = GaussianPolicy::log_prob(f.mean, f.logstd, act);
        const double lp = base_lp - squash_log_jacobian(batch, act.data());
        const double ratio = std::exp(lp - batch.old_logp[idx]);
        const double adv = batch.advantages[idx];

        const double unclipped = ratio * adv;
        const double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
        const double policy_loss = -std::min(unclipped, clipped);
        // subgradient of -min: zero once the clip band excludes the sample
        double dlp = 0.0;
        const bool clipped_out =
            (adv >= 0.0 && ratio >= 1.0 + cfg.clip) || (adv <= 0.0 && ratio <= 1.0 - cfg.clip);
        if (!clipped_out) dlp = -adv * ratio;

        const double verr = f.value - batch.returns[idx];
        const double value_loss = 0.5 * cfg.value_coef * verr * verr;
        const double dvalue = cfg.value_coef * verr;

        const double ent = GaussianPolicy::entropy(f.logstd);

        std::vector<double> dmean, dlogstd;
        GaussianPolicy::log_prob_grad(f.mean, f.logstd, act, dmean, dlogstd);
        for (int i = 0; i < batch.act_dim; ++i) {
            dmean[i] *= dlp;
            dlogstd[i] = dlogstd[i] * dlp - cfg.entropy_coef;
        }

        // accumulate gradient (first np slots) and loss (last slot)
        net.backward(f, dmean, dlogstd, dvalue, a);
        a[np] += policy_loss + value_loss - cfg.entropy_coef * ent;
    });

    grad.assign(acc.begin(), acc.begin() + np);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (double& g : grad) g *= inv_n;
    return acc[np] * inv_n;
}

namespace {

bool finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

double clip_grad_norm(std::vector<double>& grad, double max_norm) {
    const double n = norm2(grad);
    if (n > max_norm && n > 0.0) {
        const double s = max_norm / n;
        for (double& g : grad) g *= s;
    }
    return n;
}

std::vector<int> shuffled_indices(int n, Rng& rng) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i) + 1));
        std::swap(idx[i], idx[j]);
    }
    return idx;
}

}  // namespace

UpdateStats ppo_update(GaussianPolicy* design, Adam* design_opt, GaussianPolicy& control,
                       Adam& control_opt, const RolloutBuffer& buffer, const TrainConfig& cfg,
                       Rng& rng, bool parallel) {
    buffer.check_two_stage(mode_has_design(cfg.mode));

    FlatBatch design_batch, control_batch;
    build_batches(buffer, cfg, design_batch, control_batch);

    UpdateStats stats;
    stats.design_records = design_batch.n;
    stats.control_records = control_batch.n;
    if (control_batch.n == 0) return stats;

    // snapshots for the NaN guard
    const std::vector<double> control_params = control.params();
    const Adam control_opt_snap = control_opt;
    std::vector<double> design_params;
    Adam design_opt_snap(0, 1.0);
    if (design != nullptr && design_batch.n > 0) {
        design_params = design->params();
        design_opt_snap = *design_opt;
    }

    auto restore = [&]() {
        control.params() = control_params;
        control_opt = control_opt_snap;
        if (design != nullptr && design_batch.n > 0) {
            design->params() = design_params;
            *design_opt = design_opt_snap;
        }
        stats.aborted = true;
    };

    std::vector<double> grad;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::vector<int> perm = shuffled_indices(control_batch.n, rng);
        for (int start = 0; start < control_batch.n; start += cfg.minibatch) {
            const int stop = std::min(control_batch.n, start + cfg.minibatch);
            const std::vector<int> mb(perm.begin() + start, perm.begin() + stop);
            const double loss = ppo_loss_and_grad(control, control_batch, mb, cfg, grad, parallel);
            if (!std::isfinite(loss) || !finite(grad)) {
                restore();
                return stats;
            }
            clip_grad_norm(grad, cfg.max_grad_norm);
            control_opt.step(control.params(), grad);
            stats.control_loss = loss;
        }
        if (design != nullptr && design_batch.n > 0) {
            const std::vector<int> dperm = shuffled_indices(design_batch.n, rng);
            for (int start = 0; start < design_batch.n; start += cfg.minibatch) {
                const int stop = std::min(design_batch.n, start + cfg.minibatch);
                const std::vector<int> mb(dperm.begin() + start, dperm.begin() + stop);
                const double loss = ppo_loss_and_grad(*design, design_batch, mb, cfg, grad, parallel);
                if (!std::isfinite(loss) || !finite(grad)) {
                    restore();
                    return stats;
                }
                clip_grad_norm(grad, cfg.max_grad_norm);
                design_opt->step(design->params(), grad);
                stats.design_loss = loss;
            }
        }
    }
    {
        // report the post-update control entropy
        std::vector<double> ls(control.output_dim());
        for (int i = 0; i < control.output_dim(); ++i)
            ls[i] = std::clamp(control.params()[control.param_count() - control.output_dim() + i],
                               kLogStdMin, kLogStdMax);
        stats.entropy = GaussianPolicy::entropy(ls);
    }
    return stats;
}

}  // namespace sde
