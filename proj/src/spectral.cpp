#include "sde/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sde/rng.hpp"

namespace sde {

namespace {

struct BlockBounds {
    double lo, hi, def;
};

BlockBounds block_bounds(int block) {
    switch (block) {
        case 0: return {kSigmaLo, kSigmaHi, kSigmaDefault};
        case 1: return {kNuLo, kNuHi, kNuDefault};
        default: return {kKappaLo, kKappaHi, kKappaDefault};
    }
}

}  // namespace

void SpectralBasis::validate() const {
    if (m_groups <= 0 || k <= 0 || k > m_groups)
        throw std::invalid_argument("basis: invalid dimensions");
    if (static_cast<int>(mean_theta.size()) != 3 * m_groups)
        throw std::invalid_argument("basis: mean_theta size mismatch");
    if (static_cast<int>(eigenvalues.size()) != m_groups)
        throw std::invalid_argument("basis: eigenvalue count mismatch");
    if (v_k.rows != m_groups || v_k.cols != k)
        throw std::invalid_argument("basis: V_k shape mismatch");
    if (static_cast<int>(feature_means.size()) != m_groups ||
        static_cast<int>(feature_stds.size()) != m_groups)
        throw std::invalid_argument("basis: standardization constants size mismatch");
    for (int i = 1; i < m_groups; ++i)
        if (eigenvalues[i] > eigenvalues[i - 1] + 1e-12)
            throw std::invalid_argument("basis: eigenvalues not descending");
    for (double v : eigenvalues)
        if (v < 0.0) throw std::invalid_argument("basis: negative eigenvalue");
    if (!(explained_variance > 0.0 && explained_variance <= 1.0 + 1e-12))
        throw std::invalid_argument("basis: explained variance outside (0, 1]");
}

MorphologyVector default_morphology(int m_groups, bool per_muscle) {
    MorphologyVector m;
    m.m_groups = m_groups;
    m.per_muscle = per_muscle;
    m.theta.resize(3 * m_groups);
    for (int g = 0; g < m_groups; ++g) {
        m.theta[g] = kSigmaDefault;
        m.theta[m_groups + g] = kNuDefault;
        m.theta[2 * m_groups + g] = kKappaDefault;
    }
    return m;
}

std::vector<double> symmetry_group_average(const std::vector<double>& per_muscle_lengths,
                                           const std::vector<std::pair<int, int>>& pairs) {
    const int n = static_cast<int>(per_muscle_lengths.size());
    if (pairs.empty()) {
        // degenerate grouping: each muscle its own group
        return per_muscle_lengths;
    }
    std::vector<int> seen(n, 0);
    std::vector<double> out(pairs.size());
    for (size_t g = 0; g < pairs.size(); ++g) {
        const auto [l, r] = pairs[g];
        if (l < 0 || r < 0 || l >= n || r >= n)
            throw std::invalid_argument("symmetry_group_average: pair index out of range");
        ++seen[l];
        ++seen[r];
        out[g] = 0.5 * (per_muscle_lengths[l] + per_muscle_lengths[r]);
    }
    for (int i = 0; i < n; ++i)
        if (seen[i] != 1)
            throw std::invalid_argument("symmetry_group_average: pairs are not a perfect matching");
    return out;
}

LengthHistory collect_excitation_data(const WalkerModel& model, const TerrainProfile& terrain,
                                      int steps, std::uint64_t seed, bool per_muscle) {
    const int n_muscles = model.num_muscles();
    const int m = per_muscle ? n_muscles : model.num_groups();
    if (steps < kMinSamplesPerGroup * m)
        throw std::invalid_argument("collect_excitation_data: need at least 10 samples per group");

    LengthHistory h;
    h.t_rows = steps;
    h.m_groups = m;
    h.seed = seed;
    h.per_muscle = per_muscle;
    h.data.resize(static_cast<size_t>(steps) * m);

    WalkerEnv env(model, terrain);
    Rng rng(derive_seed(seed, 0xc0111ec7u));
    std::vector<double> u(n_muscles);
    int episode = 0;
    env.reset_env(derive_seed(seed, 0xe9u, episode));
    for (int t = 0; t < steps; ++t) {
        if (env.state().done) {
            if (env.state().fault)
                throw std::runtime_error("collect_excitation_data: simulation fault after " +
                                         std::to_string(t) + " rows");
            ++episode;
            env.reset_env(derive_seed(seed, 0xe9u, episode));
        }
        for (double& ui : u) ui = rng.uniform();
        env.step(u);
        std::vector<double> lengths(n_muscles);
        for (int i = 0; i < n_muscles; ++i)
            lengths[i] = muscle_length(env.state().q, env.model().muscles[i]);
        const std::vector<double> row =
            per_muscle ? lengths : symmetry_group_average(lengths, model.symmetry_pairs);
        for (int g = 0; g < m; ++g) h(t, g) = row[g];
    }
    return h;
}

StandardizedHistory standardize(const LengthHistory& h) {
    if (h.t_rows < 2) throw std::invalid_argument("standardize: need at least 2 rows");
    StandardizedHistory out;
    out.h = Mat(h.t_rows, h.m_groups);
    out.means.resize(h.m_groups);
    out.stds.resize(h.m_groups);
    for (int g = 0; g < h.m_groups; ++g) {
        double mean = 0.0;
        for (int t = 0; t < h.t_rows; ++t) mean += h(t, g);
        mean /= h.t_rows;
        double var = 0.0;
        for (int t = 0; t < h.t_rows; ++t) {
            const double d = h(t, g) - mean;
            var += d * d;
        }
        var /= (h.t_rows - 1);
        double std_dev = std::sqrt(var);
        if (std_dev == 0.0) {
            // kinematically inert group: leave the column at zero
            std_dev = 1.0;
            out.inert_groups.push_back(g);
        }
        out.means[g] = mean;
        out.stds[g] = std_dev;
        for (int t = 0; t < h.t_rows; ++t) out.h(t, g) = (h(t, g) - mean) / std_dev;
    }
    return out;
}

Mat covariance(const Mat& h_std) {
    if (h_std.rows < 2) throw std::domain_error("covariance: need at least 2 rows");
    const int m = h_std.cols;
    Mat c(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j) {
            double s = 0.0;
            for (int t = 0; t < h_std.rows; ++t) s += h_std(t, i) * h_std(t, j);
            s /= (h_std.rows - 1);
            c(i, j) = s;
            c(j, i) = s;
        }
    return c;
}

EigenDecomposition eigendecompose_symmetric(const Mat& c) {
    const int n = c.rows;
    if (c.cols != n) throw std::invalid_argument("eigendecompose: matrix not square");
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::fabs(c(i, j) - c(j, i)) > 1e-8 * std::max(1.0, max_abs(c)))
                throw std::domain_error("eigendecompose: matrix not symmetric");

    Mat a = c;
    Mat v = Mat::identity(n);
    const double scale = std::max(1.0, frobenius(c));

    auto off_norm = [&a, n]() {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
        return std::sqrt(s);
    };

    // cyclic sweeps until the off-diagonal norm collapses
    for (int sweep = 0; sweep < 100 && off_norm() > 1e-12 * scale; ++sweep) {
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = 0.5 * (a(q, q) - a(p, p)) / apq;
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(1.0 + theta * theta));
                const double cos_r = 1.0 / std::sqrt(1.0 + t * t);
                const double sin_r = t * cos_r;
                for (int i = 0; i < n; ++i) {
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = cos_r * aip - sin_r * aiq;
                    a(i, q) = sin_r * aip + cos_r * aiq;
                }
                for (int i = 0; i < n; ++i) {
                    const double api = a(p, i), aqi = a(q, i);
                    a(p, i) = cos_r * api - sin_r * aqi;
                    a(q, i) = sin_r * api + cos_r * aqi;
                }
                for (int i = 0; i < n; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = cos_r * vip - sin_r * viq;
                    v(i, q) = sin_r * vip + cos_r * viq;
                }
            }
        }
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> diag(n);
    for (int i = 0; i < n; ++i) diag[i] = a(i, i);
    std::stable_sort(order.begin(), order.end(),
                     [&diag](int x, int y) { return diag[x] > diag[y]; });

    EigenDecomposition e;
    e.eigenvalues.resize(n);
    e.eigenvectors = Mat(n, n);
    for (int col = 0; col < n; ++col) {
        const int src = order[col];
        e.eigenvalues[col] = diag[src];
        // sign convention: make the largest-magnitude component positive
        int arg = 0;
        for (int i = 1; i < n; ++i)
            if (std::fabs(v(i, src)) > std::fabs(v(arg, src))) arg = i;
        const double sign = v(arg, src) < 0.0 ? -1.0 : 1.0;
        for (int i = 0; i < n; ++i) e.eigenvectors(i, col) = sign * v(i, src);
    }
    return e;
}

SpectralBasis build_basis(const LengthHistory& h, int k) {
    if (k < 1 || k > h.m_groups) throw std::invalid_argument("build_basis: k outside [1, M]");
    const StandardizedHistory std_h = standardize(h);
    const Mat c = covariance(std_h.h);
    EigenDecomposition e = eigendecompose_symmetric(c);

    SpectralBasis b;
    b.m_groups = h.m_groups;
    b.k = k;
    b.per_muscle = h.per_muscle;
    const MorphologyVector bar = default_morphology(h.m_groups, h.per_muscle);
    b.mean_theta = bar.theta;
    b.eigenvalues = std::move(e.eigenvalues);
    double total = 0.0;
    for (double& v : b.eigenvalues) {
        if (v < -1e-10) throw std::domain_error("build_basis: covariance not positive semidefinite");
        v = std::max(0.0, v);
        total += v;
    }
    if (!(total > 0.0)) throw std::domain_error("build_basis: degenerate (all-inert) history");
    double retained = 0.0;
    for (int i = 0; i < k; ++i) retained += b.eigenvalues[i];
    b.explained_variance = retained / total;
    b.v_k = Mat(h.m_groups, k);
    for (int i = 0; i < h.m_groups; ++i)
        for (int j = 0; j < k; ++j) b.v_k(i, j) = e.eigenvectors(i, j);
    b.feature_means = std_h.means;
    b.feature_stds = std_h.stds;
    b.inert_groups = std_h.inert_groups;
    b.validate();
    return b;
}

Mat expand_block_diagonal(const SpectralBasis& basis) {
    const int m = basis.m_groups, k = basis.k;
    Mat out(3 * m, 3 * k);
    for (int block = 0; block < 3; ++block)
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < k; ++j) out(block * m + i, block * k + j) = basis.v_k(i, j);
    return out;
}

MorphologyVector decode_morphology(const LatentCode& z, const SpectralBasis& basis) {
    if (static_cast<int>(z.z.size()) != 3 * basis.k)
        throw std::invalid_argument("decode_morphology: latent size mismatch");
    for (double v : z.z)
        if (!std::isfinite(v)) throw std::invalid_argument("decode_morphology: non-finite latent");

    const int m = basis.m_groups, k = basis.k;
    MorphologyVector out;
    out.m_groups = m;
    out.per_muscle = basis.per_muscle;
    out.theta.resize(3 * m);
    for (int block = 0; block < 3; ++block) {
        const BlockBounds bb = block_bounds(block);
        for (int i = 0; i < m; ++i) {
            double v = basis.mean_theta[block * m + i];
            for (int j = 0; j < k; ++j) v += basis.v_k(i, j) * z.z[block * k + j];
            out.theta[block * m + i] = std::clamp(v, bb.lo, bb.hi);
        }
    }
    return out;
}

std::vector<double> cumulative_explained_variance(const SpectralBasis& basis) {
    double total = 0.0;
    for (double v : basis.eigenvalues) total += v;
    std::vector<double> out(basis.m_groups);
    double run = 0.0;
    for (int i = 0; i < basis.m_groups; ++i) {
        run += basis.eigenvalues[i];
        out[i] = run / total;
    }
    return out;
}

WalkerModel apply_morphology(const MorphologyVector& theta, WalkerModel model) {
    const int m = theta.m_groups;
    if (static_cast<int>(theta.theta.size()) != 3 * m)
        throw std::invalid_argument("apply_morphology: theta size mismatch");
    for (int block = 0; block < 3; ++block) {
        const BlockBounds bb = block_bounds(block);
        for (int g = 0; g < m; ++g) {
            const double v = theta.theta[block * m + g];
            if (!(v >= bb.lo && v <= bb.hi))
                throw std::domain_error("apply_morphology: component outside evolutionary bounds");
        }
    }
    if (theta.per_muscle) {
        if (m != model.num_muscles())
            throw std::invalid_argument("apply_morphology: per-muscle theta does not match model");
        for (int i = 0; i < m; ++i) {
            model.muscles[i].params.sigma = theta.sigma(i);
            model.muscles[i].params.nu = theta.nu(i);
            model.muscles[i].params.kappa = theta.kappa(i);
        }
    } else {
        if (m != model.num_groups())
            throw std::invalid_argument("apply_morphology: group count does not match model");
        for (auto& muscle : model.muscles) {
            const int g = muscle.group_id;
            muscle.params.sigma = theta.sigma(g);
            muscle.params.nu = theta.nu(g);
            muscle.params.kappa = theta.kappa(g);
        }
    }
    return model;
}

SpectralBasis identity_basis(int m_groups, bool per_muscle) {
    SpectralBasis b;
    b.m_groups = m_groups;
    b.k = m_groups;
    b.per_muscle = per_muscle;
    b.mean_theta = default_morphology(m_groups, per_muscle).theta;
    b.eigenvalues.assign(m_groups, 1.0);
    b.v_k = Mat::identity(m_groups);
    b.feature_means.assign(m_groups, 0.0);
    b.feature_stds.assign(m_groups, 1.0);
    b.explained_variance = 1.0;
    return b;
}

std::vector<double> normalize_theta(const MorphologyVector& theta) {
    const int m = theta.m_groups;
    std::vector<double> out(3 * m);
    for (int block = 0; block < 3; ++block) {
        const BlockBounds bb = block_bounds(block);
        for (int g = 0; g < m; ++g) {
            const double v = theta.theta[block * m + g];
            out[block * m + g] =
                v <= bb.def ? (v - bb.def) / (bb.def - bb.lo) : (v - bb.def) / (bb.hi - bb.def);
        }
    }
    return out;
}

}  // namespace sde
