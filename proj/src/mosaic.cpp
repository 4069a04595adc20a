#include "terrasurf/mosaic.hpp"

#include "terrasurf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace terrasurf {

namespace {

// Stateless per-lattice-point randomness so textures are world-anchored:
// the same (seed, i, j) always yields the same value, wherever sampled.
std::uint64_t mix2(std::uint64_t seed, std::int64_t i, std::int64_t j) {
    std::uint64_t z = seed ^ (static_cast<std::uint64_t>(i) * 0x9e3779b97f4a7c15ull) ^
                      (static_cast<std::uint64_t>(j) * 0xc2b2ae3d27d4eb4full);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double unit01(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Band-limited value noise in [-1,1]: random lattice values, smooth bilinear
// blend.
double value_noise(std::uint64_t seed, double x, double y, double cell) {
    const double gx = x / cell, gy = y / cell;
    const double fx = std::floor(gx), fy = std::floor(gy);
    const auto i = static_cast<std::int64_t>(fx), j = static_cast<std::int64_t>(fy);
    const double tx = smoothstep(gx - fx), ty = smoothstep(gy - fy);
    const double v00 = 2.0 * unit01(mix2(seed, i, j)) - 1.0;
    const double v10 = 2.0 * unit01(mix2(seed, i + 1, j)) - 1.0;
    const double v01 = 2.0 * unit01(mix2(seed, i, j + 1)) - 1.0;
    const double v11 = 2.0 * unit01(mix2(seed, i + 1, j + 1)) - 1.0;
    const double a = v00 + (v10 - v00) * tx;
    const double b = v01 + (v11 - v01) * tx;
    return a + (b - a) * ty;
}

struct TextureSeeds {
    std::uint64_t grass, trees, road;
};

TextureSeeds texture_seeds(std::uint64_t seed) {
    return {derive_seed(seed, "texture:grass"), derive_seed(seed, "texture:trees"),
            derive_seed(seed, "texture:road")};
}

double grass_value(const MosaicSpec& s, std::uint64_t seed, double x, double y) {
    return 0.45 + s.grass_amp * value_noise(seed, x, y, s.grass_cell);
}

double trees_value(const MosaicSpec& s, std::uint64_t seed, double x, double y) {
    const double th = s.trees_theta_deg * std::numbers::pi / 180.0;
    const double u = std::cos(th) * x + std::sin(th) * y;
    const double v = -std::sin(th) * x + std::cos(th) * y;
    const double pu = 2.0 * std::numbers::pi * unit01(mix2(seed, 1, 0));
    const double pv = 2.0 * std::numbers::pi * unit01(mix2(seed, 2, 0));
    return 0.42 + s.trees_amp * std::sin(2.0 * std::numbers::pi * u / s.trees_lambda_u + pu) *
                      std::sin(2.0 * std::numbers::pi * v / s.trees_lambda_v + pv);
}

double road_value(const MosaicSpec& s, std::uint64_t seed, double x, double y) {
    const double dir = 2.0 * std::numbers::pi * unit01(mix2(seed, 3, 0));
    double v = 0.62 + s.road_slope * (std::cos(dir) * x + std::sin(dir) * y);
    // One speckle per spacing x spacing cell, jittered, Gaussian profile.
    const double sp = s.road_speckle_spacing;
    const auto ci = static_cast<std::int64_t>(std::floor(x / sp));
    const auto cj = static_cast<std::int64_t>(std::floor(y / sp));
    for (std::int64_t j = cj - 1; j <= cj + 1; ++j)
        for (std::int64_t i = ci - 1; i <= ci + 1; ++i) {
            const std::uint64_t h = mix2(seed, i, j);
            const double jx = 0.2 + 0.6 * unit01(h);
            const double jy = 0.2 + 0.6 * unit01(mix2(h, 5, 7));
            const double sign = unit01(mix2(h, 11, 13)) < 0.5 ? -1.0 : 1.0;
            const double px = (static_cast<double>(i) + jx) * sp;
            const double py = (static_cast<double>(j) + jy) * sp;
            const double d2 = (x - px) * (x - px) + (y - py) * (y - py);
            v += sign * s.road_speckle_amp * std::exp(-d2 / (2.0 * 1.6 * 1.6));
        }
    return v;
}

double class_value(const MosaicSpec& s, const TextureSeeds& seeds, int cls, double x, double y) {
    switch (cls) {
    case 1:
        return grass_value(s, seeds.grass, x, y);
    case 2:
        return trees_value(s, seeds.trees, x, y);
    default:
        return road_value(s, seeds.road, x, y);
    }
}

constexpr int kPerms[6][3] = {{1, 2, 3}, {1, 3, 2}, {2, 1, 3}, {2, 3, 1}, {3, 1, 2}, {3, 2, 1}};

} // namespace

MosaicSpec random_mosaic_spec(std::uint64_t seed) {
    Rng rng(derive_seed(seed, "mosaic-spec"));
    MosaicSpec s;
    s.split_x = rng.uniform(0.35, 0.65);
    s.split_y = rng.uniform(0.35, 0.65);
    s.perm = static_cast<int>(rng.uniform_index(6));
    s.grass_cell = rng.uniform(6.0, 8.5);
    s.grass_amp = rng.uniform(0.22, 0.30);
    s.trees_lambda_u = rng.uniform(10.6, 11.9);
    s.trees_lambda_v = rng.uniform(11.2, 13.8);
    s.trees_theta_deg = rng.uniform(36.0, 54.0);
    s.trees_amp = rng.uniform(0.26, 0.34);
    s.road_slope = rng.uniform(0.0008, 0.0016);
    s.road_speckle_spacing = rng.uniform(8.0, 10.0);
    s.road_speckle_amp = rng.uniform(0.36, 0.48);
    s.noise_sigma = rng.uniform(0.006, 0.010);
    s.seed = derive_seed(seed, "mosaic-texture");
    return s;
}

Mosaic gen_mosaic(const MosaicSpec& spec) {
    if (spec.width < 8 || spec.height < 8)
        throw std::invalid_argument("gen_mosaic: frame too small");
    if (spec.split_x < 0.1 || spec.split_x > 0.9 || spec.split_y < 0.1 || spec.split_y > 0.9)
        throw std::invalid_argument("gen_mosaic: split fractions out of range");
    if (spec.perm < 0 || spec.perm > 5)
        throw std::invalid_argument("gen_mosaic: perm must be in 0..5");

    Mosaic m{GrayImage(spec.width, spec.height), LabelMap(spec.width, spec.height)};
    const TextureSeeds seeds = texture_seeds(spec.seed);
    const int sx = static_cast<int>(std::lround(spec.split_x * spec.width));
    const int sy = static_cast<int>(std::lround(spec.split_y * spec.height));

    Rng noise(derive_seed(spec.seed, "pixel-noise"));
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
            const int region = x < sx ? 0 : (y < sy ? 1 : 2);
            const int cls = kPerms[spec.perm][region];
            double v = class_value(spec, seeds, cls, x, y);
            v += spec.noise_sigma * noise.normal();
            m.image.at(x, y) = std::clamp(v, 0.0, 1.0);
            m.labels.at(x, y) = cls;
        }
    return m;
}

std::vector<Mosaic> gen_track_sequence(const TrackSequenceSpec& spec) {
    if (spec.frames < 2)
        throw std::invalid_argument("gen_track_sequence: need at least 2 frames");
    if (spec.strip_y0 < 0 || spec.strip_y1 <= spec.strip_y0 || spec.strip_y1 > spec.height)
        throw std::invalid_argument("gen_track_sequence: bad strip rows");

    MosaicSpec tex; // canonical texture parameters; world-anchored sampling
    const TextureSeeds seeds = texture_seeds(derive_seed(spec.seed, "track-world"));
    // Background split fixed in world coordinates, chosen to stay in view.
    const double split_world =
        0.5 * spec.width + 0.5 * static_cast<double>(spec.frames - 1) * spec.bg_dx;

    std::vector<Mosaic> out;
    out.reserve(static_cast<std::size_t>(spec.frames));
    for (int f = 0; f < spec.frames; ++f) {
        Mosaic m{GrayImage(spec.width, spec.height), LabelMap(spec.width, spec.height)};
        Rng noise(derive_seed(spec.seed, "track-noise:" + std::to_string(f)));
        for (int y = 0; y < spec.height; ++y) {
            const bool strip = y >= spec.strip_y0 && y < spec.strip_y1;
            for (int x = 0; x < spec.width; ++x) {
                double v;
                int cls;
                if (strip) {
                    const double wx = x + f * spec.fg_dx;
                    v = road_value(tex, seeds.road, wx, y);
                    cls = 3;
                } else {
                    const double wx = x + f * spec.bg_dx;
                    if (wx < split_world) {
                        v = grass_value(tex, seeds.grass, wx, y);
                        cls = 1;
                    } else {
                        v = trees_value(tex, seeds.trees, wx, y);
                        cls = 2;
                    }
                }
                v += spec.noise_sigma * noise.normal();
                m.image.at(x, y) = std::clamp(v, 0.0, 1.0);
                m.labels.at(x, y) = cls;
            }
        }
        out.push_back(std::move(m));
    }
    return out;
}

} // namespace terrasurf
