// Benchmark of the OpenMP kernels against their serial reference paths:
// rollout collection across environment workers, minibatch gradient
// accumulation, and a muscle-curve grid sweep. Each kernel is checked for
// bit-identical results before timing.

#include <chrono>
#include <cstdio>
#include <vector>

#include "sde/parallel.hpp"
#include "sde/train.hpp"

using namespace sde;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(const char* name, double serial, double parallel, bool identical) {
    std::printf("%-28s serial %8.3f s   parallel %8.3f s   speedup %4.2fx   %s\n", name, serial,
                parallel, serial / parallel, identical ? "results identical" : "RESULTS DIFFER");
}

}  // namespace

int main() {
    std::printf("threads available: %d\n\n", hardware_threads());

    const WalkerModel model = WalkerModel::default_model();
    const TerrainProfile terrain = TerrainProfile::make(TerrainKind::walk, 7);
    const LengthHistory history = collect_excitation_data(model, terrain, 2000, 3);
    const SpectralBasis basis = build_basis(history, 5);

    TrainConfig cfg;
    cfg.mode = Mode::SDE;
    cfg.workers = hardware_threads();
    Trainer trainer(model, terrain, basis, cfg);
    GaussianPolicy design(trainer.observation_dim(), cfg.design_hidden, trainer.design_dim(), 1);
    GaussianPolicy control(trainer.observation_dim(), cfg.control_hidden, model.num_muscles(), 2);

    // rollout collection fan-out
    {
        const int steps = 20000;
        auto t0 = Clock::now();
        const RolloutBuffer serial = trainer.collect(&design, control, steps, 42, false);
        const double ts = seconds_since(t0);
        t0 = Clock::now();
        const RolloutBuffer parallel = trainer.collect(&design, control, steps, 42, true);
        const double tp = seconds_since(t0);
        bool same = serial.episodes.size() == parallel.episodes.size();
        for (size_t i = 0; same && i < serial.episodes.size(); ++i) {
            same &= serial.episodes[i].env_steps == parallel.episodes[i].env_steps;
            same &= serial.episodes[i].theta == parallel.episodes[i].theta;
            for (size_t j = 0; same && j < serial.episodes[i].steps.size(); ++j)
                same &= serial.episodes[i].steps[j].obs == parallel.episodes[i].steps[j].obs;
        }
        report("rollout collection", ts, tp, same);
    }

    // PPO minibatch gradient accumulation
    {
        const RolloutBuffer buffer = trainer.collect(&design, control, 8192, 4, true);
        FlatBatch db, cb;
        build_batches(buffer, cfg, db, cb);
        std::vector<int> idx(cb.n);
        for (int i = 0; i < cb.n; ++i) idx[i] = i;
        std::vector<double> gs, gp;
        const int reps = 20;
        auto t0 = Clock::now();
        for (int r = 0; r < reps; ++r) ppo_loss_and_grad(control, cb, idx, cfg, gs, false);
        const double ts = seconds_since(t0);
        t0 = Clock::now();
        for (int r = 0; r < reps; ++r) ppo_loss_and_grad(control, cb, idx, cfg, gp, true);
        const double tp = seconds_since(t0);
        report("minibatch gradient", ts, tp, gs == gp);
    }

    // muscle-curve grid sweep
    {
        const int n = 4'000'000;
        std::vector<double> out_serial(n), out_parallel(n);
        MuscleParams params;
        params.f0_ref = 1200.0;
        auto kernel = [&](std::vector<double>& out, bool parallel) {
            parallel_for(n, parallel, [&](int i) {
                MuscleState s;
                s.length = 0.5 + 1.1 * (i % 1000) / 1000.0;
                s.velocity = -3.0 + 16.0 * ((i / 1000) % 1000) / 1000.0;
                s.activation = (i % 17) / 16.0;
                out[i] = muscle_force(s, params);
            });
        };
        auto t0 = Clock::now();
        kernel(out_serial, false);
        const double ts = seconds_since(t0);
        t0 = Clock::now();
        kernel(out_parallel, true);
        const double tp = seconds_since(t0);
        report("muscle-curve grid", ts, tp, out_serial == out_parallel);
    }
    return 0;
}
