// Shared helpers for the unit suites: scratch directories, raw byte
// fixtures for the PGM/CSV round-trip tests, and brute-force pixel oracles.
#pragma once

#include "terrasurf/image.hpp"
#include "terrasurf/rng.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace testutil {

// Unique scratch directory, removed on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        static const std::uint64_t salt = std::random_device{}();
        const auto base = std::filesystem::temp_directory_path();
        for (std::uint64_t i = 0;; ++i) {
            auto candidate = base / (tag + "-" + std::to_string(salt) + "-" + std::to_string(i));
            std::error_code ec;
            if (std::filesystem::create_directory(candidate, ec)) {
                path = candidate;
                return;
            }
        }
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline terrasurf::GrayImage random_image(terrasurf::Rng& rng, int w, int h) {
    terrasurf::GrayImage img(w, h);
    for (double& v : img.data)
        v = rng.uniform();
    return img;
}

// Direct pixel-loop rectangle sum with the same clipping rule as box_sum.
inline double brute_box(const terrasurf::GrayImage& img, const terrasurf::Rect& r) {
    double s = 0.0;
    for (int y = std::max(r.y0, 0); y <= std::min(r.y1, img.height - 1); ++y)
        for (int x = std::max(r.x0, 0); x <= std::min(r.x1, img.width - 1); ++x)
            s += img.at(x, y);
    return s;
}

} // namespace testutil
