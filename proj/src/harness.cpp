#include "sde/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace fs = std::filesystem;

namespace sde {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

// token-stream reader with positional diagnostics
class TokenReader {
public:
    TokenReader(std::string text, std::string path)
        : stream_(std::move(text)), path_(std::move(path)) {}

    std::string word(const char* what) {
        std::string w;
        if (!(stream_ >> w))
            throw std::runtime_error(path_ + ": truncated file, expected " + std::string(what));
        return w;
    }
    void expect(const std::string& literal) {
        const std::string w = word(literal.c_str());
        if (w != literal)
            throw std::runtime_error(path_ + ": expected '" + literal + "', found '" + w + "'");
    }
    long integer(const char* what) {
        const std::string w = word(what);
        try {
            size_t pos = 0;
            const long v = std::stol(w, &pos);
            if (pos != w.size()) throw std::invalid_argument(w);
            return v;
        } catch (const std::exception&) {
            throw std::runtime_error(path_ + ": expected integer for " + std::string(what) +
                                     ", found '" + w + "'");
        }
    }
    double real(const char* what) {
        const std::string w = word(what);
        try {
            size_t pos = 0;
            const double v = std::stod(w, &pos);
            if (pos != w.size()) throw std::invalid_argument(w);
            return v;
        } catch (const std::exception&) {
            throw std::runtime_error(path_ + ": expected number for " + std::string(what) +
                                     ", found '" + w + "'");
        }
    }

private:
    std::istringstream stream_;
    std::string path_;
};

}  // namespace

// --- experiment config ---------------------------------------------------------

void ExperimentConfig::validate() const {
    train.validate();
    if (seeds.empty()) throw std::invalid_argument("config: seeds must be non-empty");
    std::set<std::uint64_t> uniq(seeds.begin(), seeds.end());
    if (uniq.size() != seeds.size()) throw std::invalid_argument("config: seeds must be distinct");
    if (out_dir.empty()) throw std::invalid_argument("config: out_dir must be set");
    if (model.empty()) throw std::invalid_argument("config: model must be set");
}

std::string ExperimentConfig::to_json_text() const {
    nlohmann::json j;
    j["version"] = 1;
    j["mode"] = mode_to_string(train.mode);
    j["terrain"] = terrain_to_string(train.terrain);
    j["k"] = train.k;
    j["seeds"] = seeds;
    j["step_budget"] = train.step_budget;
    j["out_dir"] = out_dir;
    j["model"] = model;
    j["basis"] = basis;
    j["history"] = history;
    j["rollout_steps"] = train.rollout_steps;
    j["epochs"] = train.epochs;
    j["minibatch"] = train.minibatch;
    j["learning_rate"] = train.learning_rate;
    j["gamma"] = train.gamma;
    j["lambda"] = train.gae_lambda;
    j["clip"] = train.clip;
    j["entropy_coef"] = train.entropy_coef;
    j["value_coef"] = train.value_coef;
    j["max_grad_norm"] = train.max_grad_norm;
    j["workers"] = train.workers;
    j["parallel"] = train.parallel;
    j["eval_every"] = train.eval_every;
    j["eval_episodes"] = train.eval_episodes;
    j["design_hidden"] = train.design_hidden;
    j["control_hidden"] = train.control_hidden;
    j["design_logstd_init"] = train.design_logstd_init;
    j["control_logstd_init"] = train.control_logstd_init;
    return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("config: JSON parse error: ") + e.what());
    }
    static const std::set<std::string> known = {
        "version",       "mode",          "terrain",       "k",
        "seeds",         "step_budget",   "out_dir",       "model",
        "basis",         "history",       "rollout_steps", "epochs",
        "minibatch",     "learning_rate", "gamma",         "lambda",
        "clip",          "entropy_coef",  "value_coef",    "max_grad_norm",
        "workers",       "parallel",      "eval_every",    "eval_episodes",
        "design_hidden", "control_hidden","design_logstd_init", "control_logstd_init"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw std::invalid_argument("config: unknown key '" + it.key() + "'");

    ExperimentConfig c;
    try {
        if (j.contains("version") && j["version"].get<int>() != 1)
            throw std::invalid_argument("config: unsupported version");
        if (j.contains("mode")) c.train.mode = mode_from_string(j["mode"].get<std::string>());
        if (j.contains("terrain"))
            c.train.terrain = terrain_from_string(j["terrain"].get<std::string>());
        if (j.contains("k")) c.train.k = j["k"].get<int>();
        if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
        if (j.contains("step_budget")) c.train.step_budget = j["step_budget"].get<long>();
        if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
        if (j.contains("model")) c.model = j["model"].get<std::string>();
        if (j.contains("basis")) c.basis = j["basis"].get<std::string>();
        if (j.contains("history")) c.history = j["history"].get<std::string>();
        if (j.contains("rollout_steps")) c.train.rollout_steps = j["rollout_steps"].get<int>();
        if (j.contains("epochs")) c.train.epochs = j["epochs"].get<int>();
        if (j.contains("minibatch")) c.train.minibatch = j["minibatch"].get<int>();
        if (j.contains("learning_rate")) c.train.learning_rate = j["learning_rate"].get<double>();
        if (j.contains("gamma")) c.train.gamma = j["gamma"].get<double>();
        if (j.contains("lambda")) c.train.gae_lambda = j["lambda"].get<double>();
        if (j.contains("clip")) c.train.clip = j["clip"].get<double>();
        if (j.contains("entropy_coef")) c.train.entropy_coef = j["entropy_coef"].get<double>();
        if (j.contains("value_coef")) c.train.value_coef = j["value_coef"].get<double>();
        if (j.contains("max_grad_norm")) c.train.max_grad_norm = j["max_grad_norm"].get<double>();
        if (j.contains("workers")) c.train.workers = j["workers"].get<int>();
        if (j.contains("parallel")) c.train.parallel = j["parallel"].get<bool>();
        if (j.contains("eval_every")) c.train.eval_every = j["eval_every"].get<int>();
        if (j.contains("eval_episodes")) c.train.eval_episodes = j["eval_episodes"].get<int>();
        if (j.contains("design_hidden")) c.train.design_hidden = j["design_hidden"].get<int>();
        if (j.contains("control_hidden")) c.train.control_hidden = j["control_hidden"].get<int>();
        if (j.contains("design_logstd_init"))
            c.train.design_logstd_init = j["design_logstd_init"].get<double>();
        if (j.contains("control_logstd_init"))
            c.train.control_logstd_init = j["control_logstd_init"].get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("config: malformed field: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    return from_json_text(read_file(path));
}

void ExperimentConfig::save(const std::string& path) const { write_file(path, to_json_text()); }

// --- basis persistence -----------------------------------------------------------

void save_basis(const SpectralBasis& basis, const std::string& path) {
    basis.validate();
    std::ostringstream out;
    out << "sde-basis 1\n";
    out << "grouping " << (basis.per_muscle ? "per_muscle" : "symmetric") << "\n";
    out << "M " << basis.m_groups << "\n";
    out << "k " << basis.k << "\n";
    out << "explained_variance " << fmt(basis.explained_variance) << "\n";
    out << "theta_bar";
    for (double v : basis.mean_theta) out << " " << fmt(v);
    out << "\nfeature_means";
    for (double v : basis.feature_means) out << " " << fmt(v);
    out << "\nfeature_stds";
    for (double v : basis.feature_stds) out << " " << fmt(v);
    out << "\ninert_groups " << basis.inert_groups.size();
    for (int g : basis.inert_groups) out << " " << g;
    out << "\neigenvalues";
    for (double v : basis.eigenvalues) out << " " << fmt(v);
    out << "\nV_k\n";
    for (int i = 0; i < basis.m_groups; ++i) {
        for (int j = 0; j < basis.k; ++j) out << (j ? " " : "") << fmt(basis.v_k(i, j));
        out << "\n";
    }
    out << "end\n";
    write_file(path, out.str());
}

SpectralBasis load_basis(const std::string& path) {
    TokenReader r(read_file(path), path);
    r.expect("sde-basis");
    if (r.integer("version") != 1) throw std::runtime_error(path + ": unsupported basis version");
    SpectralBasis b;
    r.expect("grouping");
    const std::string grouping = r.word("grouping value");
    if (grouping == "per_muscle")
        b.per_muscle = true;
    else if (grouping != "symmetric")
        throw std::runtime_error(path + ": unknown grouping '" + grouping + "'");
    r.expect("M");
    b.m_groups = static_cast<int>(r.integer("M"));
    r.expect("k");
    b.k = static_cast<int>(r.integer("k"));
    if (b.m_groups < 1 || b.k < 1 || b.k > b.m_groups)
        throw std::runtime_error(path + ": invalid dimensions in header");
    r.expect("explained_variance");
    b.explained_variance = r.real("explained_variance");
    r.expect("theta_bar");
    b.mean_theta.resize(3 * b.m_groups);
    for (double& v : b.mean_theta) v = r.real("theta_bar entry");
    r.expect("feature_means");
    b.feature_means.resize(b.m_groups);
    for (double& v : b.feature_means) v = r.real("feature mean");
    r.expect("feature_stds");
    b.feature_stds.resize(b.m_groups);
    for (double& v : b.feature_stds) v = r.real("feature std");
    r.expect("inert_groups");
    const long n_inert = r.integer("inert count");
    for (long i = 0; i < n_inert; ++i)
        b.inert_groups.push_back(static_cast<int>(r.integer("inert group")));
    r.expect("eigenvalues");
    b.eigenvalues.resize(b.m_groups);
    for (double& v : b.eigenvalues) v = r.real("eigenvalue");
    r.expect("V_k");
    b.v_k = Mat(b.m_groups, b.k);
    for (int i = 0; i < b.m_groups; ++i)
        for (int j = 0; j < b.k; ++j) b.v_k(i, j) = r.real("V_k entry");
    r.expect("end");
    b.validate();
    return b;
}

// --- history persistence -----------------------------------------------------------

void save_history(const LengthHistory& h, const std::string& path) {
    std::ostringstream out;
    out << "# sde-history 1 M=" << h.m_groups << " rows=" << h.t_rows << " seed=" << h.seed
        << " grouping=" << (h.per_muscle ? "per_muscle" : "symmetric") << " source=" << h.source
        << "\n";
    for (int g = 0; g < h.m_groups; ++g) out << (g ? "," : "") << "g" << g;
    out << "\n";
    for (int t = 0; t < h.t_rows; ++t) {
        for (int g = 0; g < h.m_groups; ++g) out << (g ? "," : "") << fmt(h(t, g));
        out << "\n";
    }
    write_file(path, out.str());
}

LengthHistory load_history(const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty history file");
    LengthHistory h;
    {
        std::istringstream hs(line);
        std::string hash, magic, kv;
        hs >> hash >> magic;
        if (hash != "#" || magic != "sde-history")
            throw std::runtime_error(path + ": not a history file");
        int version = 0;
        hs >> version;
        if (version != 1) throw std::runtime_error(path + ": unsupported history version");
        while (hs >> kv) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
            if (key == "M") h.m_groups = std::stoi(val);
            else if (key == "rows") h.t_rows = std::stoi(val);
            else if (key == "seed") h.seed = std::stoull(val);
            else if (key == "grouping") h.per_muscle = (val == "per_muscle");
            else if (key == "source") h.source = val;
        }
    }
    if (h.m_groups < 1 || h.t_rows < 1)
        throw std::runtime_error(path + ": missing M/rows in history header");
    if (!std::getline(in, line)) throw std::runtime_error(path + ": missing column header");
    h.data.reserve(static_cast<size_t>(h.t_rows) * h.m_groups);
    int row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        int col = 0;
        while (std::getline(ls, cell, ',')) {
            try {
                h.data.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw std::runtime_error(path + ": bad cell at row " + std::to_string(row));
            }
            ++col;
        }
        if (col != h.m_groups)
            throw std::runtime_error(path + ": row " + std::to_string(row) + " has " +
                                     std::to_string(col) + " columns, expected " +
                                     std::to_string(h.m_groups));
        ++row;
    }
    if (row != h.t_rows)
        throw std::runtime_error(path + ": expected " + std::to_string(h.t_rows) + " rows, found " +
                                 std::to_string(row));
    return h;
}

// --- checkpoints --------------------------------------------------------------------

void save_checkpoint(const Checkpoint& c, const std::string& path) {
    std::ostringstream out;
    out << "sde-checkpoint 1\n";
    out << "mode " << mode_to_string(c.mode) << "\n";
    out << "terrain " << terrain_to_string(c.terrain) << "\n";
    out << "k " << c.k << "\n";
    out << "M " << c.m_groups << "\n";
    out << "grouping " << (c.per_muscle ? "per_muscle" : "symmetric") << "\n";
    out << "obs_dim " << c.obs_dim << "\n";
    out << "control " << c.control_input << " " << c.control_hidden << " " << c.control_output
        << " " << c.control_params.size() << "\n";
    for (double v : c.control_params) out << fmt(v) << "\n";
    if (c.has_design) {
        out << "design " << c.design_input << " " << c.design_hidden << " " << c.design_output
            << " " << c.design_params.size() << "\n";
        for (double v : c.design_params) out << fmt(v) << "\n";
    } else {
        out << "design none\n";
    }
    out << "end\n";
    write_file(path, out.str());
}

Checkpoint load_checkpoint(const std::string& path) {
    TokenReader r(read_file(path), path);
    r.expect("sde-checkpoint");
    if (r.integer("version") != 1)
        throw std::runtime_error(path + ": unsupported checkpoint version");
    Checkpoint c;
    r.expect("mode");
    c.mode = mode_from_string(r.word("mode"));
    r.expect("terrain");
    c.terrain = terrain_from_string(r.word("terrain"));
    r.expect("k");
    c.k = static_cast<int>(r.integer("k"));
    r.expect("M");
    c.m_groups = static_cast<int>(r.integer("M"));
    r.expect("grouping");
    c.per_muscle = (r.word("grouping") == "per_muscle");
    r.expect("obs_dim");
    c.obs_dim = static_cast<int>(r.integer("obs_dim"));
    r.expect("control");
    c.control_input = static_cast<int>(r.integer("control input"));
    c.control_hidden = static_cast<int>(r.integer("control hidden"));
    c.control_output = static_cast<int>(r.integer("control output"));
    const long nc = r.integer("control param count");
    c.control_params.resize(nc);
    for (double& v : c.control_params) v = r.real("control param");
    const std::string d = r.word("design section");
    if (d != "design") throw std::runtime_error(path + ": expected 'design', found '" + d + "'");
    const std::string dh = r.word("design header");
    if (dh == "none") {
        c.has_design = false;
    } else {
        c.has_design = true;
        try {
            c.design_input = std::stoi(dh);
        } catch (const std::exception&) {
            throw std::runtime_error(path + ": bad design header '" + dh + "'");
        }
        c.design_hidden = static_cast<int>(r.integer("design hidden"));
        c.design_output = static_cast<int>(r.integer("design output"));
        const long nd = r.integer("design param count");
        c.design_params.resize(nd);
        for (double& v : c.design_params) v = r.real("design param");
    }
    r.expect("end");
    return c;
}

namespace {
GaussianPolicy materialize(int in, int hidden, int out, const std::vector<double>& params,
                           const std::string& what) {
    GaussianPolicy p(in, hidden, out, 0);
    if (p.params().size() != params.size())
        throw std::runtime_error("checkpoint: " + what + " parameter count mismatch (" +
                                 std::to_string(params.size()) + " stored, " +
                                 std::to_string(p.params().size()) + " expected)");
    p.params() = params;
    return p;
}
}  // namespace

GaussianPolicy materialize_control(const Checkpoint& c) {
    return materialize(c.control_input, c.control_hidden, c.control_output, c.control_params,
                       "control");
}

GaussianPolicy materialize_design(const Checkpoint& c) {
    if (!c.has_design) throw std::runtime_error("checkpoint: no design network present");
    return materialize(c.design_input, c.design_hidden, c.design_output, c.design_params,
                       "design");
}

// --- metric log / curve CSV -----------------------------------------------------------

namespace {
const char* kCurveHeader =
    "iteration,env_steps,mean_return,std_return,eval_return,mean_sigma,mean_nu,mean_kappa,"
    "explained_variance_k,faulted_episodes";
}

MetricLog::MetricLog(const std::string& path) : path_(path) {
    std::ofstream out(path_, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write metric log: " + path_);
    out << kCurveHeader << "\n";
}

void MetricLog::append(const CurvePoint& pt, bool has_morph_columns) {
    if (pt.iteration <= last_iteration_)
        throw std::logic_error("metric log: iterations must be strictly increasing");
    last_iteration_ = pt.iteration;
    std::ofstream out(path_, std::ios::app);
    if (!out) throw std::runtime_error("cannot append metric log: " + path_);
    out << pt.iteration << "," << pt.env_steps << "," << fmt(pt.mean_return) << ","
        << fmt(pt.std_return) << "," << fmt(pt.eval_return) << ",";
    if (has_morph_columns)
        out << fmt(pt.mean_sigma) << "," << fmt(pt.mean_nu) << "," << fmt(pt.mean_kappa) << ","
            << fmt(pt.explained_variance);
    else
        out << ",,,";
    out << "," << pt.faulted_episodes << "\n";
}

std::vector<CurvePoint> read_curve_csv(const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty curve file");
    if (line != kCurveHeader) throw std::runtime_error(path + ": unexpected curve header");
    std::vector<CurvePoint> out;
    int row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        while (cells.size() < 10) cells.push_back("");
        CurvePoint pt;
        try {
            pt.iteration = std::stoi(cells[0]);
            pt.env_steps = std::stol(cells[1]);
            pt.mean_return = std::stod(cells[2]);
            pt.std_return = std::stod(cells[3]);
            pt.eval_return = std::stod(cells[4]);
            pt.has_morph = !cells[5].empty();
            if (pt.has_morph) {
                pt.mean_sigma = std::stod(cells[5]);
                pt.mean_nu = std::stod(cells[6]);
                pt.mean_kappa = std::stod(cells[7]);
                pt.explained_variance = std::stod(cells[8]);
            }
            pt.faulted_episodes = cells[9].empty() ? 0 : std::stoi(cells[9]);
        } catch (const std::exception&) {
            throw std::runtime_error(path + ": bad row " + std::to_string(row));
        }
        out.push_back(pt);
        ++row;
    }
    return out;
}

// --- evaluation over checkpoints ---------------------------------------------------------

EvalStats evaluate_checkpoint(const Checkpoint& c, const WalkerModel& model,
                              const TerrainProfile& terrain, const SpectralBasis* basis,
                              int episodes, std::uint64_t seed) {
    const int theta_dim = 3 * (basis ? basis->m_groups : model.num_groups());
    if (c.obs_dim != observation_size(model, theta_dim))
        throw std::runtime_error("checkpoint: observation size does not match the model");
    GaussianPolicy control = materialize_control(c);
    std::optional<GaussianPolicy> design;
    if (c.has_design) design.emplace(materialize_design(c));
    if (mode_has_design(c.mode) && basis == nullptr)
        throw std::runtime_error("checkpoint: mode requires a basis for evaluation");
    return evaluate_policies(model, terrain, design ? &*design : nullptr, control, basis, c.mode,
                             episodes, seed);
}

// --- training runs -------------------------------------------------------------------------

WalkerModel load_model_spec(const std::string& name_or_path) {
    if (name_or_path == "default") return WalkerModel::default_model();
    return WalkerModel::from_json(read_file(name_or_path));
}

std::string run_training(const ExperimentConfig& cfg, std::uint64_t seed, bool echo_progress) {
    cfg.validate();
    const WalkerModel model = load_model_spec(cfg.model);

    std::optional<SpectralBasis> basis;
    if (mode_needs_basis_file(cfg.train.mode)) {
        if (cfg.basis.empty())
            throw std::invalid_argument("config: mode " + mode_to_string(cfg.train.mode) +
                                        " requires a basis file");
        SpectralBasis b = load_basis(cfg.basis);
        if (b.k != cfg.train.k)
            throw std::invalid_argument("config: basis k=" + std::to_string(b.k) +
                                        " does not match configured k=" +
                                        std::to_string(cfg.train.k));
        basis = std::move(b);
    } else if (cfg.train.mode == Mode::Direct) {
        basis = identity_basis(model.num_groups());
    }

    TrainConfig tc = cfg.train;
    tc.seed = seed;
    if (tc.mode == Mode::Direct) tc.k = model.num_groups();

    const std::string run_id = mode_to_string(tc.mode) + "_" + terrain_to_string(tc.terrain) +
                               "_k" + std::to_string(tc.k) + "_s" + std::to_string(seed);
    const fs::path dir = fs::path(cfg.out_dir) / run_id;
    fs::create_directories(dir);

    {
        ExperimentConfig effective = cfg;
        effective.train.seed = seed;
        effective.seeds = {seed};
        effective.save((dir / "config.json").string());
    }
    if (basis) save_basis(*basis, (dir / "basis.txt").string());

    const TerrainProfile terrain = TerrainProfile::make(tc.terrain, derive_seed(seed, 0x7e66u));
    Trainer trainer(model, terrain, basis, tc);

    MetricLog log((dir / "curve.csv").string());
    const bool morph_cols = mode_has_design(tc.mode);
    TrainResult result = trainer.run([&](const CurvePoint& pt) {
        log.append(pt, morph_cols);
        if (echo_progress)
            std::fprintf(stderr, "iter %d steps %ld mean_return %.3f eval %.3f\n", pt.iteration,
                         pt.env_steps, pt.mean_return, pt.eval_return);
    });

    Checkpoint ck;
    ck.mode = tc.mode;
    ck.terrain = tc.terrain;
    ck.k = basis ? basis->k : 0;
    ck.m_groups = basis ? basis->m_groups : model.num_groups();
    ck.per_muscle = basis ? basis->per_muscle : false;
    ck.obs_dim = trainer.observation_dim();
    ck.control_input = result.control.input_dim();
    ck.control_hidden = result.control.hidden_dim();
    ck.control_output = result.control.output_dim();
    ck.control_params = result.control.params();
    if (result.design) {
        ck.has_design = true;
        ck.design_input = result.design->input_dim();
        ck.design_hidden = result.design->hidden_dim();
        ck.design_output = result.design->output_dim();
        ck.design_params = result.design->params();
    }
    save_checkpoint(ck, (dir / "checkpoint_final.txt").string());

    const EvalStats ev = evaluate_policies(model, terrain, result.design ? &*result.design : nullptr,
                                           result.control, basis ? &*basis : nullptr, tc.mode,
                                           tc.eval_episodes, derive_seed(seed, 0xf17a1u));
    {
        std::ostringstream out;
        out << "episodes,mean_return,std_return,fall_rate,mean_sigma,mean_nu,mean_kappa\n";
        out << ev.episodes << "," << fmt(ev.mean_return) << "," << fmt(ev.std_return) << ","
            << fmt(ev.fall_rate) << ",";
        if (ev.has_morph)
            out << fmt(ev.mean_sigma) << "," << fmt(ev.mean_nu) << "," << fmt(ev.mean_kappa);
        else
            out << ",,";
        out << "\n";
        write_file((dir / "eval.csv").string(), out.str());
    }
    return dir.string();
}

// --- exports ----------------------------------------------------------------------------------

std::vector<ScreeRow> export_scree(const LengthHistory& history, const std::string& path) {
    const SpectralBasis basis = build_basis(history, history.m_groups);
    const std::vector<double> cum = cumulative_explained_variance(basis);
    std::vector<ScreeRow> rows;
    std::ostringstream out;
    out << "k,cumulative_explained_variance\n";
    for (int k = 1; k <= history.m_groups; ++k) {
        rows.push_back({k, cum[k - 1]});
        out << k << "," << fmt(cum[k - 1]) << "\n";
    }
    if (!path.empty()) write_file(path, out.str());
    return rows;
}

std::vector<RadarRow> export_radar(const Checkpoint& c, const WalkerModel& model,
                                   const TerrainProfile& terrain, const SpectralBasis* basis,
                                   int episodes, const std::string& path) {
    if (!mode_has_design(c.mode))
        throw std::invalid_argument("export_radar: unsupported mode Fixed (no evolved morphology)");
    episodes = std::max(episodes, 20);
    const EvalStats ev = evaluate_checkpoint(c, model, terrain, basis, episodes, 0x9ada9u);
    if (!ev.has_morph) throw std::runtime_error("export_radar: evaluation yielded no morphology");
    const int m = static_cast<int>(ev.mean_theta.size()) / 3;
    std::vector<RadarRow> rows;
    std::ostringstream out;
    out << "group,mean_sigma,mean_nu,mean_kappa\n";
    for (int g = 0; g < m; ++g) {
        RadarRow r{g, ev.mean_theta[g], ev.mean_theta[m + g], ev.mean_theta[2 * m + g]};
        rows.push_back(r);
        out << g << "," << fmt(r.mean_sigma) << "," << fmt(r.mean_nu) << "," << fmt(r.mean_kappa)
            << "\n";
    }
    if (!path.empty()) write_file(path, out.str());
    return rows;
}

void export_curve(const std::string& run_dir, const std::string& path, int window) {
    const std::vector<CurvePoint> curve = read_curve_csv((fs::path(run_dir) / "curve.csv").string());
    std::ostringstream out;
    out << "iteration,env_steps,mean_return,smoothed_return,eval_return\n";
    const int n = static_cast<int>(curve.size());
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        int cnt = 0;
        for (int j = std::max(0, i - window / 2); j <= std::min(n - 1, i + window / 2); ++j) {
            acc += curve[j].mean_return;
            ++cnt;
        }
        out << curve[i].iteration << "," << curve[i].env_steps << "," << fmt(curve[i].mean_return)
            << "," << fmt(acc / cnt) << "," << fmt(curve[i].eval_return) << "\n";
    }
    write_file(path, out.str());
}

// --- comparison ---------------------------------------------------------------------------------

double curve_auc(const std::vector<CurvePoint>& curve, long max_steps) {
    if (curve.empty()) return 0.0;
    double auc = 0.0;
    long prev_x = 0;
    double prev_y = curve.front().mean_return; // flat extension back to step 0
    for (const CurvePoint& pt : curve) {
        long x = pt.env_steps;
        double y = pt.mean_return;
        if (max_steps > 0 && x > max_steps) {
            // linear interpolation at the cut
            const double t = static_cast<double>(max_steps - prev_x) / (x - prev_x);
            y = prev_y + t * (y - prev_y);
            x = max_steps;
        }
        auc += 0.5 * (prev_y + y) * static_cast<double>(x - prev_x);
        prev_x = x;
        prev_y = y;
        if (max_steps > 0 && x >= max_steps) break;
    }
    return auc;
}

Comparison compare_runs(const std::vector<std::string>& run_dirs) {
    if (run_dirs.empty()) throw std::invalid_argument("compare_runs: no run directories");
    struct Run {
        std::string dir, mode;
        std::vector<CurvePoint> curve;
        long steps = 0;
    };
    std::vector<Run> runs;
    for (const std::string& d : run_dirs) {
        Run r;
        r.dir = d;
        const ExperimentConfig cfg = ExperimentConfig::load((fs::path(d) / "config.json").string());
        r.mode = mode_to_string(cfg.train.mode);
        r.curve = read_curve_csv((fs::path(d) / "curve.csv").string());
        r.steps = r.curve.empty() ? 0 : r.curve.back().env_steps;
        runs.push_back(std::move(r));
    }
    // order-independent aggregation
    std::sort(runs.begin(), runs.end(), [](const Run& a, const Run& b) {
        return a.mode != b.mode ? a.mode < b.mode : a.dir < b.dir;
    });

    Comparison cmp;
    long min_steps = 0;
    for (const Run& r : runs) min_steps = (min_steps == 0) ? r.steps : std::min(min_steps, r.steps);
    for (const Run& r : runs)
        if (r.steps != min_steps) {
            cmp.warnings.push_back("run budgets differ; aligned to " + std::to_string(min_steps) +
                                   " steps");
            break;
        }

    std::map<std::string, std::vector<const Run*>> by_mode;
    for (const Run& r : runs) by_mode[r.mode].push_back(&r);
    for (const auto& [mode, group] : by_mode) {
        CompareRow row;
        row.mode = mode;
        row.runs = static_cast<int>(group.size());
        std::vector<double> finals, aucs;
        for (const Run* r : group) {
            aucs.push_back(curve_auc(r->curve, min_steps));
            // final window: mean eval over the last 10% of iterations
            const int n = static_cast<int>(r->curve.size());
            const int w = std::max(1, n / 10);
            double f = 0.0;
            for (int i = n - w; i < n; ++i) f += r->curve[i].eval_return;
            finals.push_back(n > 0 ? f / w : 0.0);
        }
        auto mean_std = [](const std::vector<double>& v, double& mean, double& sd) {
            mean = 0.0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            double var = 0.0;
            for (double x : v) var += (x - mean) * (x - mean);
            sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
        };
        mean_std(finals, row.final_eval_mean, row.final_eval_std);
        mean_std(aucs, row.auc_mean, row.auc_std);
        cmp.rows.push_back(row);
    }
    return cmp;
}

void write_comparison_csv(const Comparison& c, const std::string& path) {
    std::ostringstream out;
    out << "mode,runs,final_eval_mean,final_eval_std,auc_mean,auc_std\n";
    for (const CompareRow& r : c.rows)
        out << r.mode << "," << r.runs << "," << fmt(r.final_eval_mean) << ","
            << fmt(r.final_eval_std) << "," << fmt(r.auc_mean) << "," << fmt(r.auc_std) << "\n";
    write_file(path, out.str());
}

}  // namespace sde
