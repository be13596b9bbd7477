#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sde {

enum class TerrainKind { walk, rough, hilly, stair };

TerrainKind terrain_from_string(const std::string& s); // throws std::invalid_argument
std::string terrain_to_string(TerrainKind k);

// Deterministic 1-D track profile. Heights are fully determined by
// (kind, seed); the rough heightfield is sampled once at construction.
struct TerrainProfile {
    TerrainKind kind = TerrainKind::walk;
    std::uint64_t seed = 0;

    // track extent; flat continuation beyond either end
    double track_begin = 0.0;
    double track_end = 30.0;

    // rough: per-cell uniform corner heights, linearly interpolated
    double rough_cell = 0.2;
    double rough_amp = 0.05;
    std::vector<double> rough_corners;

    // hilly: two seeded-phase sinusoids
    double hill_amp1 = 0.15, hill_wavelen1 = 6.0;
    double hill_amp2 = 0.08, hill_wavelen2 = 2.3;
    double hill_phase1 = 0.0, hill_phase2 = 0.0;

    // stair: non-decreasing steps
    double stair_rise = 0.1;
    double stair_run = 0.4;

    // rough/hilly blend in over [ramp_start, ramp_start + ramp_len] so the
    // walker always resets on flat ground
    double ramp_start = 1.0;
    double ramp_len = 1.0;

    static TerrainProfile make(TerrainKind kind, std::uint64_t seed);

    double height(double x) const;
};

double terrain_height(double x, const TerrainProfile& profile);

}  // namespace sde
