// Grayscale raster, PGM I/O, summed-area table and the box/Haar filter
// primitives everything else is built on.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace terrasurf {

/// Row-major single-channel image with intensities normalized to [0,1].
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    GrayImage() = default;
    GrayImage(int w, int h, double fill = 0.0)
        : width(w), height(h), data(checked_size(w, h), fill) {}

    double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    bool contains(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

private:
    // Validates before the vector allocates (a negative dimension would
    // otherwise wrap to a huge size_t).
    static std::size_t checked_size(int w, int h) {
        if (w < 1 || h < 1)
            throw std::invalid_argument("GrayImage: dimensions must be >= 1");
        return static_cast<std::size_t>(w) * h;
    }
};

/// Summed-area table: cumsum(x,y) = sum of data(u,v) for u<=x, v<=y.
struct IntegralImage {
    int width = 0;
    int height = 0;
    std::vector<double> cumsum;

    double at(int x, int y) const {
        if (x < 0 || y < 0)
            return 0.0;
        if (x >= width)
            x = width - 1;
        if (y >= height)
            y = height - 1;
        return cumsum[static_cast<std::size_t>(y) * width + x];
    }
};

/// Inclusive pixel bounds. May lie (partially) outside the image; the box
/// sum clips it.
struct Rect {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

enum class PgmErrorKind { MalformedHeader, TruncatedPayload, UnsupportedMaxval, Io };

/// PGM read/write failure; `kind` distinguishes the cases.
class PgmError : public std::runtime_error {
public:
    PgmError(PgmErrorKind k, const std::string& what) : std::runtime_error(what), kind(k) {}
    PgmErrorKind kind;
};

/// Reads a P2/P5 PGM with maxval 255 or 65535 (16-bit stored big-endian).
/// Intensities come back divided by maxval.
GrayImage load_pgm(const std::string& path);

/// Writes P5 maxval 255; values are clamped to [0,1] and rounded.
void save_pgm(const GrayImage& img, const std::string& path);

/// Reads a PGM without normalizing: raw integer sample values. Used for
/// label and segmentation maps where pixel values are class indices.
std::vector<int> load_pgm_raw(const std::string& path, int& width, int& height);

/// Writes raw integer samples as P5 with the given maxval (<=255).
void save_pgm_raw(const std::vector<int>& values, int width, int height, int maxval,
                  const std::string& path);

IntegralImage integral(const GrayImage& img);

/// Sum of original pixels inside `r` (clipped to the image; empty after
/// clipping gives 0).
double box_sum(const IntegralImage& ii, const Rect& r);

/// Haar wavelet responses of an even `size`x`size` window at (cx,cy):
/// right-half minus left-half sums for x, bottom minus top for y. The
/// window covers [c-size/2, c+size/2-1] in each axis and clips at borders.
double haar_x(const IntegralImage& ii, int cx, int cy, int size);
double haar_y(const IntegralImage& ii, int cx, int cy, int size);

} // namespace terrasurf
