// Command-line front end for the spectral design-evolution pipeline:
// excitation-data collection, manifold construction, co-optimization training,
// evaluation, exports and run comparison.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sde/harness.hpp"

namespace fs = std::filesystem;
using namespace sde;

namespace {

// exit 2: bad flags or missing inputs; exit 1: runtime failure
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_file(const std::string& path, const char* what) {
    if (!fs::exists(path)) throw UsageError(std::string(what) + " not found: " + path);
}

ExperimentConfig config_or_default(const std::string& path) {
    if (path.empty()) return ExperimentConfig{};
    require_file(path, "config file");
    return ExperimentConfig::load(path);
}

WalkerModel load_model_arg(const std::string& model) {
    if (model != "default") require_file(model, "model file");
    return load_model_spec(model);
}

int cmd_collect(const std::string& config_path, std::string model, int steps, std::uint64_t seed,
                const std::string& out, bool asym, bool model_given, bool seed_given) {
    const ExperimentConfig cfg = config_or_default(config_path);
    if (!model_given && !config_path.empty()) model = cfg.model;
    if (!seed_given && !config_path.empty()) seed = cfg.seeds.front();
    const WalkerModel m = load_model_arg(model);
    const TerrainProfile terrain = TerrainProfile::make(TerrainKind::walk, derive_seed(seed, 0x7e66u));
    const LengthHistory h = collect_excitation_data(m, terrain, steps, seed, asym);
    save_history(h, out);
    std::cout << "collected " << h.t_rows << " x " << h.m_groups << " length history ("
              << (asym ? "per-muscle" : "symmetry-grouped") << ") -> " << out << "\n";
    return 0;
}

int cmd_manifold(const std::string& history_path, int k, const std::string& out) {
    require_file(history_path, "history file");
    const LengthHistory h = load_history(history_path);
    const SpectralBasis basis = build_basis(h, k);
    save_basis(basis, out);
    std::cout << "basis M=" << basis.m_groups << " k=" << basis.k
              << " explained_variance=" << basis.explained_variance << " -> " << out << "\n";
    return 0;
}

int cmd_train(const ExperimentConfig& cfg, bool quiet) {
    if (cfg.model != "default") require_file(cfg.model, "model file");
    if (mode_needs_basis_file(cfg.train.mode)) {
        if (cfg.basis.empty())
            throw UsageError("mode " + mode_to_string(cfg.train.mode) + " requires --basis");
        require_file(cfg.basis, "basis file");
    }
    for (std::uint64_t seed : cfg.seeds) {
        const std::string dir = run_training(cfg, seed, !quiet);
        std::cout << "run complete: " << dir << "\n";
    }
    return 0;
}

struct RunArtifacts {
    ExperimentConfig cfg;
    Checkpoint ckpt;
    std::optional<SpectralBasis> basis;
    WalkerModel model;
};

RunArtifacts load_run_dir(const std::string& checkpoint_path) {
    require_file(checkpoint_path, "checkpoint");
    const fs::path dir = fs::path(checkpoint_path).parent_path();
    RunArtifacts a{.cfg = {}, .ckpt = load_checkpoint(checkpoint_path), .basis = {}, .model = WalkerModel::default_model()};
    const fs::path cfg_path = dir / "config.json";
    if (fs::exists(cfg_path)) {
        a.cfg = ExperimentConfig::load(cfg_path.string());
        a.model = load_model_spec(a.cfg.model);
    }
    const fs::path basis_path = dir / "basis.txt";
    if (mode_has_design(a.ckpt.mode)) {
        if (!fs::exists(basis_path))
            throw UsageError("basis.txt not found next to checkpoint: " + basis_path.string());
        a.basis = load_basis(basis_path.string());
    }
    return a;
}

int cmd_eval(const std::string& checkpoint_path, int episodes, std::uint64_t seed,
             const std::string& terrain_override) {
    RunArtifacts a = load_run_dir(checkpoint_path);
    TerrainKind kind = a.ckpt.terrain;
    if (!terrain_override.empty()) kind = terrain_from_string(terrain_override);
    const TerrainProfile terrain = TerrainProfile::make(kind, derive_seed(seed, 0x7e66u));
    const EvalStats ev = evaluate_checkpoint(a.ckpt, a.model, terrain,
                                             a.basis ? &*a.basis : nullptr, episodes, seed);
    std::cout << "episodes," << ev.episodes << "\n";
    std::cout << "mean_return," << ev.mean_return << "\n";
    std::cout << "std_return," << ev.std_return << "\n";
    std::cout << "fall_rate," << ev.fall_rate << "\n";
    if (ev.has_morph) {
        std::cout << "mean_sigma," << ev.mean_sigma << "\n";
        std::cout << "mean_nu," << ev.mean_nu << "\n";
        std::cout << "mean_kappa," << ev.mean_kappa << "\n";
    }
    return 0;
}

int cmd_export(const std::string& what, const std::string& history_path, const std::string& run_dir,
               const std::string& out, int episodes, int window) {
    if (what == "scree") {
        if (history_path.empty()) throw UsageError("export scree requires --history");
        require_file(history_path, "history file");
        const LengthHistory h = load_history(history_path);
        export_scree(h, out);
    } else if (what == "radar") {
        if (run_dir.empty()) throw UsageError("export radar requires --run");
        RunArtifacts a = load_run_dir((fs::path(run_dir) / "checkpoint_final.txt").string());
        const TerrainProfile terrain =
            TerrainProfile::make(a.ckpt.terrain, derive_seed(a.cfg.seeds.front(), 0x7e66u));
        export_radar(a.ckpt, a.model, terrain, a.basis ? &*a.basis : nullptr, episodes, out);
    } else if (what == "curve") {
        if (run_dir.empty()) throw UsageError("export curve requires --run");
        require_file((fs::path(run_dir) / "curve.csv").string(), "curve file");
        export_curve(run_dir, out, window);
    } else {
        throw UsageError("unknown export kind: " + what + " (expected scree|radar|curve)");
    }
    std::cout << "exported " << what << " -> " << out << "\n";
    return 0;
}

int cmd_sweep_k(ExperimentConfig cfg, const std::vector<int>& k_list, bool quiet) {
    if (!mode_needs_basis_file(cfg.train.mode))
        throw UsageError("sweep-k applies to manifold modes, not " + mode_to_string(cfg.train.mode));
    if (cfg.history.empty()) throw UsageError("sweep-k requires a length history ('history' field)");
    require_file(cfg.history, "history file");
    const LengthHistory h = load_history(cfg.history);
    fs::create_directories(cfg.out_dir);
    std::vector<std::string> dirs;
    for (int k : k_list) {
        const SpectralBasis basis = build_basis(h, k);
        const std::string basis_path =
            (fs::path(cfg.out_dir) / ("basis_k" + std::to_string(k) + ".txt")).string();
        save_basis(basis, basis_path);
        ExperimentConfig run_cfg = cfg;
        run_cfg.train.k = k;
        run_cfg.basis = basis_path;
        for (std::uint64_t seed : cfg.seeds) {
            const std::string dir = run_training(run_cfg, seed, !quiet);
            std::cout << "run complete: " << dir << "\n";
            dirs.push_back(dir);
        }
    }
    const Comparison cmp = compare_runs(dirs);
    const std::string out = (fs::path(cfg.out_dir) / "sweep_k_comparison.csv").string();
    write_comparison_csv(cmp, out);
    for (const auto& w : cmp.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "comparison -> " << out << "\n";
    return 0;
}

int cmd_compare(const std::vector<std::string>& runs, const std::string& out) {
    for (const auto& d : runs) require_file((fs::path(d) / "curve.csv").string(), "curve file");
    const Comparison cmp = compare_runs(runs);
    for (const auto& w : cmp.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "mode,runs,final_eval_mean,final_eval_std,auc_mean,auc_std\n";
    for (const CompareRow& r : cmp.rows)
        std::cout << r.mode << "," << r.runs << "," << r.final_eval_mean << "," << r.final_eval_std
                  << "," << r.auc_mean << "," << r.auc_std << "\n";
    if (!out.empty()) write_comparison_csv(cmp, out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectral design evolution for a planar musculoskeletal walker"};
    app.require_subcommand(1);

    // collect
    auto* collect = app.add_subcommand("collect", "Collect random-excitation muscle-length history");
    std::string c_config, c_model = "default", c_out = "history.csv";
    int c_steps = 20000;
    std::uint64_t c_seed = 1;
    bool c_asym = false;
    collect->add_option("--config", c_config, "experiment config supplying defaults");
    collect->add_option("--model", c_model, "model JSON path or 'default'");
    collect->add_option("--steps", c_steps, "control steps to record");
    collect->add_option("--seed", c_seed, "collection seed");
    collect->add_option("--out", c_out, "output history CSV");
    collect->add_flag("--asym", c_asym, "per-muscle grouping (no bilateral averaging)");

    // manifold
    auto* manifold = app.add_subcommand("manifold", "Build the spectral basis from a length history");
    std::string m_history, m_out = "basis.txt";
    int m_k = 5;
    manifold->add_option("--history", m_history, "length-history CSV")->required();
    manifold->add_option("--k", m_k, "retained principal components");
    manifold->add_option("--out", m_out, "output basis file");

    // train
    auto* train = app.add_subcommand("train", "Run co-optimization training");
    std::string t_config, t_mode, t_terrain, t_model, t_basis, t_out_dir;
    long t_steps = -1;
    int t_k = -1, t_workers = -1;
    std::vector<std::uint64_t> t_seeds;
    bool t_quiet = false;
    train->add_option("--config", t_config, "experiment config JSON");
    train->add_option("--mode", t_mode, "SDE|Fixed|Direct|SDE-sigma|SDE-nu|SDE-kappa|SDE-Asym");
    train->add_option("--terrain", t_terrain, "walk|rough|hilly|stair");
    train->add_option("--model", t_model, "model JSON path or 'default'");
    train->add_option("--basis", t_basis, "spectral basis file");
    train->add_option("--out-dir", t_out_dir, "output directory");
    train->add_option("--steps", t_steps, "control-step budget");
    train->add_option("--k", t_k, "latent dimension");
    train->add_option("--workers", t_workers, "rollout workers");
    train->add_option("--seed", t_seeds, "training seed(s), overrides config");
    train->add_flag("--quiet", t_quiet, "suppress iteration progress");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint with deterministic actions");
    std::string e_checkpoint, e_terrain;
    int e_episodes = 20;
    std::uint64_t e_seed = 0;
    eval->add_option("--checkpoint", e_checkpoint, "checkpoint file")->required();
    eval->add_option("--episodes", e_episodes, "evaluation episodes");
    eval->add_option("--seed", e_seed, "evaluation seed");
    eval->add_option("--terrain", e_terrain, "terrain override");

    // export
    auto* exp = app.add_subcommand("export", "Export scree/radar/curve data");
    std::string x_what, x_history, x_run, x_out = "export.csv";
    int x_episodes = 20, x_window = 5;
    exp->add_option("--what", x_what, "scree|radar|curve")->required();
    exp->add_option("--history", x_history, "length history (scree)");
    exp->add_option("--run", x_run, "run directory (radar/curve)");
    exp->add_option("--out", x_out, "output CSV");
    exp->add_option("--episodes", x_episodes, "radar evaluation episodes (>= 20)");
    exp->add_option("--window", x_window, "curve smoothing window");

    // sweep-k
    auto* sweep = app.add_subcommand("sweep-k", "Train across a list of latent dimensions");
    std::string s_config;
    std::vector<int> s_klist;
    bool s_quiet = false;
    sweep->add_option("--config", s_config, "experiment config JSON")->required();
    sweep->add_option("--k-list", s_klist, "latent dimensions, e.g. --k-list 3 5 7 9")->required();
    sweep->add_flag("--quiet", s_quiet, "suppress iteration progress");

    // compare
    auto* comp = app.add_subcommand("compare", "Aggregate runs into a comparison table");
    std::vector<std::string> p_runs;
    std::string p_out;
    comp->add_option("--runs", p_runs, "run directories")->required()->expected(-1);
    comp->add_option("--out", p_out, "also write the table to this CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*collect)
            return cmd_collect(c_config, c_model, c_steps, c_seed, c_out, c_asym,
                               collect->count("--model") > 0, collect->count("--seed") > 0);
        if (*manifold) return cmd_manifold(m_history, m_k, m_out);
        if (*train) {
            ExperimentConfig cfg = config_or_default(t_config);
            if (!t_mode.empty()) cfg.train.mode = mode_from_string(t_mode);
            if (!t_terrain.empty()) cfg.train.terrain = terrain_from_string(t_terrain);
            if (!t_model.empty()) cfg.model = t_model;
            if (!t_basis.empty()) cfg.basis = t_basis;
            if (!t_out_dir.empty()) cfg.out_dir = t_out_dir;
            if (t_steps >= 0) cfg.train.step_budget = t_steps;
            if (t_k > 0) cfg.train.k = t_k;
            if (t_workers > 0) cfg.train.workers = t_workers;
            if (!t_seeds.empty()) cfg.seeds = t_seeds;
            cfg.validate();
            return cmd_train(cfg, t_quiet);
        }
        if (*eval) return cmd_eval(e_checkpoint, e_episodes, e_seed, e_terrain);
        if (*exp) return cmd_export(x_what, x_history, x_run, x_out, x_episodes, x_window);
        if (*sweep) {
            require_file(s_config, "config file");
            return cmd_sweep_k(ExperimentConfig::load(s_config), s_klist, s_quiet);
        }
        if (*comp) return cmd_compare(p_runs, p_out);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
