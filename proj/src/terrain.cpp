#include "sde/terrain.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sde/rng.hpp"

namespace sde {

TerrainKind terrain_from_string(const std::string& s) {
    if (s == "walk") return TerrainKind::walk;
    if (s == "rough") return TerrainKind::rough;
    if (s == "hilly") return TerrainKind::hilly;
    if (s == "stair") return TerrainKind::stair;
    throw std::invalid_argument("unknown terrain kind: " + s);
}

std::string terrain_to_string(TerrainKind k) {
    switch (k) {
        case TerrainKind::walk: return "walk";
        case TerrainKind::rough: return "rough";
        case TerrainKind::hilly: return "hilly";
        case TerrainKind::stair: return "stair";
    }
    return "walk";
}

TerrainProfile TerrainProfile::make(TerrainKind kind, std::uint64_t seed) {
    TerrainProfile p;
    p.kind = kind;
    p.seed = seed;
    if (kind == TerrainKind::rough) {
        const int corners =
            static_cast<int>(std::ceil((p.track_end - p.track_begin) / p.rough_cell)) + 1;
        p.rough_corners.resize(corners);
        for (int i = 0; i < corners; ++i) {
            const double u =
                static_cast<double>(splitmix64(derive_seed(seed, 0x7e44u, i)) >> 11) * 0x1.0p-53;
            p.rough_corners[i] = p.rough_amp * (2.0 * u - 1.0);
        }
    } else if (kind == TerrainKind::hilly) {
        Rng rng(derive_seed(seed, 0x4111u));
        p.hill_phase1 = rng.uniform(0.0, 2.0 * M_PI);
        p.hill_phase2 = rng.uniform(0.0, 2.0 * M_PI);
    }
    return p;
}

double TerrainProfile::height(double x) const {
    const double xc = std::clamp(x, track_begin, track_end);
    switch (kind) {
        case TerrainKind::walk:
            return 0.0;
        case TerrainKind::stair:
            return xc <= 0.0 ? 0.0 : stair_rise * std::floor(xc / stair_run);
        case TerrainKind::hilly: {
            const double h = hill_amp1 * std::sin(2.0 * M_PI * xc / hill_wavelen1 + hill_phase1) +
                             hill_amp2 * std::sin(2.0 * M_PI * xc / hill_wavelen2 + hill_phase2);
            const double ramp = std::clamp((xc - ramp_start) / ramp_len, 0.0, 1.0);
            return h * ramp;
        }
        case TerrainKind::rough: {
            if (rough_corners.empty()) return 0.0;
            const double s = (xc - track_begin) / rough_cell;
            const int i = std::clamp(static_cast<int>(std::floor(s)), 0,
                                     static_cast<int>(rough_corners.size()) - 2);
            const double frac = s - i;
            const double h = rough_corners[i] * (1.0 - frac) + rough_corners[i + 1] * frac;
            const double ramp = std::clamp((xc - ramp_start) / ramp_len, 0.0, 1.0);
            return h * ramp;
        }
    }
    return 0.0;
}

double terrain_height(double x, const TerrainProfile& profile) { return profile.height(x); }

}  // namespace sde
