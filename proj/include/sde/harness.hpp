#pragma once

#include <string>
#include <vector>

#include "sde/spectral.hpp"
#include "sde/train.hpp"

namespace sde {

// Experiment-level configuration: one training run per seed, everything else
// shared. JSON round-trips exactly; unknown keys are rejected.
struct ExperimentConfig {
    TrainConfig train;
    std::vector<std::uint64_t> seeds = {1};
    std::string out_dir = "runs";
    std::string model = "default"; // "default" or a model JSON path
    std::string basis;             // basis file (modes with a learned manifold)
    std::string history;           // length-history CSV (used by sweep-k)

    void validate() const;
    std::string to_json_text() const;
    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig load(const std::string& path);
    void save(const std::string& path) const;
};

// Versioned flat-file persistence. All writers use 17 significant digits so
// doubles round-trip exactly; loaders fail with a structured message rather
// than returning partial objects.
void save_basis(const SpectralBasis& basis, const std::string& path);
SpectralBasis load_basis(const std::string& path);

void save_history(const LengthHistory& h, const std::string& path);
LengthHistory load_history(const std::string& path);

struct Checkpoint {
    Mode mode = Mode::SDE;
    TerrainKind terrain = TerrainKind::walk;
    int k = 0;
    int m_groups = 0;
    bool per_muscle = false;
    int obs_dim = 0;
    bool has_design = false;
    int design_input = 0, design_hidden = 0, design_output = 0;
    std::vector<double> design_params;
    int control_input = 0, control_hidden = 0, control_output = 0;
    std::vector<double> control_params;
};

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Rebuild policies from a checkpoint (throws on parameter-count mismatch).
GaussianPolicy materialize_control(const Checkpoint& c);
GaussianPolicy materialize_design(const Checkpoint& c);

// Append-only per-run metric log backing curve.csv; iterations must be
// strictly increasing.
class MetricLog {
public:
    explicit MetricLog(const std::string& path);
    void append(const CurvePoint& pt, bool has_morph_columns);

private:
    std::string path_;
    int last_iteration_ = -1;
};

std::vector<CurvePoint> read_curve_csv(const std::string& path);

// Deterministic-action evaluation of a persisted checkpoint.
EvalStats evaluate_checkpoint(const Checkpoint& c, const WalkerModel& model,
                              const TerrainProfile& terrain, const SpectralBasis* basis,
                              int episodes, std::uint64_t seed);

// One training run; returns the run directory. Layout:
// <out_dir>/<mode>_<terrain>_k<k>_s<seed>/{config.json, basis.txt,
// checkpoint_final.txt, curve.csv, eval.csv}.
std::string run_training(const ExperimentConfig& cfg, std::uint64_t seed,
                         bool echo_progress = false);

// Scree export: one row per k in [1, M] of cumulative explained variance.
struct ScreeRow {
    int k;
    double cumulative_explained_variance;
};
std::vector<ScreeRow> export_scree(const LengthHistory& history, const std::string& path);

// Radar export: per-group triad means over >= 20 deterministic evaluation
// episodes. Rejects Fixed-mode checkpoints.
struct RadarRow {
    int group;
    double mean_sigma, mean_nu, mean_kappa;
};
std::vector<RadarRow> export_radar(const Checkpoint& c, const WalkerModel& model,
                                   const TerrainProfile& terrain, const SpectralBasis* basis,
                                   int episodes, const std::string& path);

// Smoothed-curve export: raw plus centered moving average of mean_return.
void export_curve(const std::string& run_dir, const std::string& path, int window = 5);

struct CompareRow {
    std::string mode;
    int runs = 0;
    double final_eval_mean = 0.0;
    double final_eval_std = 0.0;
    double auc_mean = 0.0;
    double auc_std = 0.0;
};
struct Comparison {
    std::vector<CompareRow> rows; // sorted by mode name
    std::vector<std::string> warnings;
};
Comparison compare_runs(const std::vector<std::string>& run_dirs);
void write_comparison_csv(const Comparison& c, const std::string& path);

// Trapezoidal area under (env_steps, mean_return), extended flat from 0 to
// the first sample and cut at max_steps (<= 0 means the full curve).
double curve_auc(const std::vector<CurvePoint>& curve, long max_steps = 0);

WalkerModel load_model_spec(const std::string& name_or_path); // "default" or a file

}  // namespace sde
