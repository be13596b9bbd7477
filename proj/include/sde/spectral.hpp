#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sde/mat.hpp"
#include "sde/walker.hpp"

namespace sde {

// Collection must provide at least this many samples per symmetry group for a
// stable covariance.
inline constexpr int kMinSamplesPerGroup = 10;

// Latent codes are tanh-squashed into this box before decoding.
inline constexpr double kLatentRange = 2.0;

// T x M matrix of group-averaged normalized muscle lengths under random
// excitation.
struct LengthHistory {
    int t_rows = 0;
    int m_groups = 0;
    std::vector<double> data; // row-major
    std::uint64_t seed = 0;
    std::string source = "random_excitation";
    bool per_muscle = false; // degenerate grouping (each muscle its own group)

    double operator()(int t, int g) const { return data[static_cast<size_t>(t) * m_groups + g]; }
    double& operator()(int t, int g) { return data[static_cast<size_t>(t) * m_groups + g]; }
};

// Full design vector laid out as [sigma_1..sigma_M, nu_1..nu_M, kappa_1..kappa_M].
struct MorphologyVector {
    int m_groups = 0;
    bool per_muscle = false;
    std::vector<double> theta;

    double sigma(int g) const { return theta[g]; }
    double nu(int g) const { return theta[m_groups + g]; }
    double kappa(int g) const { return theta[2 * m_groups + g]; }
};

// Latent coordinates [z_sigma, z_nu, z_kappa], each of length k.
struct LatentCode {
    int k = 0;
    std::vector<double> z; // length 3k
};

// Result of the offline manifold construction.
struct SpectralBasis {
    int m_groups = 0;
    int k = 0;
    bool per_muscle = false;
    std::vector<double> mean_theta;    // 3M, the default morphology
    std::vector<double> eigenvalues;   // length M, descending, clamped >= 0
    Mat v_k;                           // M x k, orthonormal columns
    std::vector<double> feature_means; // length M
    std::vector<double> feature_stds;  // length M (1.0 for inert groups)
    std::vector<int> inert_groups;     // zero-variance groups, std substituted
    double explained_variance = 0.0;   // sum of retained / sum of all

    void validate() const; // throws std::invalid_argument
};

struct StandardizedHistory {
    Mat h; // T x M, column mean 0 / sample std 1
    std::vector<double> means, stds;
    std::vector<int> inert_groups;
};

struct EigenDecomposition {
    std::vector<double> eigenvalues; // descending
    Mat eigenvectors;                // columns match eigenvalues
};

// Default morphology: sigma = nu = 1, kappa = 1 for every group.
MorphologyVector default_morphology(int m_groups, bool per_muscle = false);

// Drive the walker with i.i.d. uniform excitations and record group-averaged
// lengths each control step, resetting on fall, until t_rows samples exist.
LengthHistory collect_excitation_data(const WalkerModel& model, const TerrainProfile& terrain,
                                      int steps, std::uint64_t seed, bool per_muscle = false);

// Average bilateral pairs: entry g = (left_g + right_g) / 2.
std::vector<double> symmetry_group_average(const std::vector<double>& per_muscle_lengths,
                                           const std::vector<std::pair<int, int>>& pairs);

StandardizedHistory standardize(const LengthHistory& h);

// C = H^T H / (T - 1); symmetric by construction.
Mat covariance(const Mat& h_std);

// Cyclic Jacobi rotations; deterministic sign convention (largest-magnitude
// component of each eigenvector made positive).
EigenDecomposition eigendecompose_symmetric(const Mat& c);

SpectralBasis build_basis(const LengthHistory& h, int k);

// Three copies of V_k on the diagonal of a 3M x 3k matrix.
Mat expand_block_diagonal(const SpectralBasis& basis);

// Theta = clamp(theta_bar + V~_k z, bounds).
MorphologyVector decode_morphology(const LatentCode& z, const SpectralBasis& basis);

// Cumulative explained variance for every k in [1, M].
std::vector<double> cumulative_explained_variance(const SpectralBasis& basis);

// Write the triads onto the model's muscles (both sides of each group, or one
// muscle per group in per-muscle mode). Throws std::domain_error when theta is
// out of bounds.
WalkerModel apply_morphology(const MorphologyVector& theta, WalkerModel model);

// Identity basis for direct search: V = I_M, so z lives in R^{3M}.
SpectralBasis identity_basis(int m_groups, bool per_muscle = false);

// Map each component into [-1, 1] with the block default at exactly 0
// (piecewise-linear: lo -> -1, default -> 0, hi -> +1).
std::vector<double> normalize_theta(const MorphologyVector& theta);

}  // namespace sde
