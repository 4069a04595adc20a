#include "terrasurf/surf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace terrasurf {

namespace {

struct HessianResponse {
    double det;
    bool positive_laplacian;
};

// Box-filter approximations of the second order derivatives at (x,y) for an
// odd filter size L (lobe = L/3). Rectangles clip at the borders through the
// integral image lookups.
HessianResponse hessian_at(const IntegralImage& ii, int x, int y, int L) {
    const int lobe = L / 3;
    const int border = (L - 1) / 2;
    const double inv_area = 1.0 / (static_cast<double>(L) * L);

    // Dxx: full (2*lobe-1) x L box minus 3x the central lobe-wide strip.
    const double dxx =
        (box_sum(ii, {x - border, y - lobe + 1, x + border, y + lobe - 1}) -
         3.0 * box_sum(ii, {x - lobe / 2, y - lobe + 1, x + lobe / 2, y + lobe - 1})) *
        inv_area;
    const double dyy =
        (box_sum(ii, {x - lobe + 1, y - border, x + lobe - 1, y + border}) -
         3.0 * box_sum(ii, {x - lobe + 1, y - lobe / 2, x + lobe - 1, y + lobe / 2})) *
        inv_area;
    const double dxy = (box_sum(ii, {x + 1, y - lobe, x + lobe, y - 1}) +
                        box_sum(ii, {x - lobe, y + 1, x - 1, y + lobe}) -
                        box_sum(ii, {x - lobe, y - lobe, x - 1, y - 1}) -
                        box_sum(ii, {x + 1, y + 1, x + lobe, y + lobe})) *
                       inv_area;

    HessianResponse r;
    r.det = dxx * dyy - (0.9 * dxy) * (0.9 * dxy);
    r.positive_laplacian = dxx + dyy >= 0.0;
    return r;
}

} // namespace

std::vector<int> octave_filter_sizes(int octave, int layers) {
    // Base 9 with step 6*2^octave; octaves share every other size with the
    // next one (9,15,21,27 -> 15,27,39,51 -> 27,51,75,99).
    const int step = 6 << octave;
    const int base = octave == 0 ? 9 : 3 * (1 << (octave + 1)) + 3; // 9, 15, 27, 51...
    std::vector<int> sizes(layers);
    for (int i = 0; i < layers; ++i)
        sizes[i] = base + i * step;
    return sizes;
}

ResponseStack hessian_responses(const IntegralImage& ii, const DetectorParams& params) {
    if (params.octaves < 1 || params.layers_per_octave < 3)
        throw std::invalid_argument("hessian_responses: need >= 1 octave and >= 3 layers");
    if (ii.width < 9 || ii.height < 9)
        throw std::invalid_argument("hessian_responses: image smaller than the 9 px base filter");

    ResponseStack stack;
    stack.width = ii.width;
    stack.height = ii.height;
    stack.octaves.resize(params.octaves);
    const std::size_t n = static_cast<std::size_t>(ii.width) * ii.height;

    for (int o = 0; o < params.octaves; ++o) {
        const std::vector<int> sizes = octave_filter_sizes(o, params.layers_per_octave);
        if (sizes.front() > std::min(ii.width, ii.height))
            throw std::invalid_argument("hessian_responses: image too small for octave " +
                                        std::to_string(o));
        for (int L : sizes) {
            ResponseLayer layer;
            layer.filter_size = L;
            layer.scale = 1.2 * L / 9.0;
            layer.resp.resize(n);
            layer.sign.resize(n);
            for (int y = 0; y < ii.height; ++y)
                for (int x = 0; x < ii.width; ++x) {
                    const HessianResponse h = hessian_at(ii, x, y, L);
                    const std::size_t i = static_cast<std::size_t>(y) * ii.width + x;
                    layer.resp[i] = h.det;
                    layer.sign[i] = h.positive_laplacian ? 1 : 0;
                }
            stack.octaves[o].push_back(std::move(layer));
        }
    }
    return stack;
}

std::vector<InterestPoint> detect(const ResponseStack& stack, const DetectorParams& params) {
    std::vector<InterestPoint> points;
    const int w = stack.width, h = stack.height;

    for (const auto& octave : stack.octaves) {
        if (octave.size() < 3)
            throw std::invalid_argument("detect: octave needs >= 3 layers");
        // Every layer is NMS-eligible; a missing layer above/below imposes no
        // constraint. Keeps maxima at the smallest/largest filter visible.
        for (std::size_t m = 0; m < octave.size(); ++m) {
            const ResponseLayer* below = m > 0 ? &octave[m - 1] : nullptr;
            const ResponseLayer& mid = octave[m];
            const ResponseLayer* above = m + 1 < octave.size() ? &octave[m + 1] : nullptr;
            // Skip pixels where the largest compared filter does not fully
            // fit: clipped responses there are not comparable.
            const int margin = (above ? above->filter_size : mid.filter_size) / 2 + 1;
            for (int y = margin; y < h - margin; ++y) {
                for (int x = margin; x < w - margin; ++x) {
                    const std::size_t i = static_cast<std::size_t>(y) * w + x;
                    const double v = mid.resp[i];
                    if (v <= params.threshold)
                        continue;
                    bool is_max = true;
                    for (int dy = -1; dy <= 1 && is_max; ++dy)
                        for (int dx = -1; dx <= 1 && is_max; ++dx) {
                            const std::size_t j = static_cast<std::size_t>(y + dy) * w + (x + dx);
                            if (below && below->resp[j] >= v)
                                is_max = false;
                            if (above && above->resp[j] >= v)
                                is_max = false;
                            if ((dx != 0 || dy != 0) && mid.resp[j] >= v)
                                is_max = false;
                        }
                    if (!is_max)
                        continue;
                    InterestPoint p;
                    p.x = x;
                    p.y = y;
                    p.scale = mid.scale;
                    p.strength = v;
                    p.sign = mid.sign[i];
                    p.filter_size = mid.filter_size;
                    points.push_back(p);
                }
            }
        }
    }

    // Octaves share filter sizes (15 and 27 appear twice); identical filters
    // give identical responses, so duplicates collapse to one point.
    std::sort(points.begin(), points.end(), [](const InterestPoint& a, const InterestPoint& b) {
        return std::tuple(a.x, a.y, a.filter_size) < std::tuple(b.x, b.y, b.filter_size);
    });
    points.erase(std::unique(points.begin(), points.end(),
                             [](const InterestPoint& a, const InterestPoint& b) {
                                 return a.x == b.x && a.y == b.y &&
                                        a.filter_size == b.filter_size;
                             }),
                 points.end());

    std::sort(points.begin(), points.end(), [](const InterestPoint& a, const InterestPoint& b) {
        if (a.strength != b.strength)
            return a.strength > b.strength;
        if (a.filter_size != b.filter_size)
            return a.filter_size < b.filter_size;
        if (a.y != b.y)
            return a.y < b.y;
        return a.x < b.x;
    });
    return points;
}

std::vector<InterestPoint> grid_select(const std::vector<InterestPoint>& points, int cell,
                                       int width, int height) {
    if (cell <= 0)
        throw std::invalid_argument("grid_select: cell must be positive");
    const std::size_t cells = static_cast<std::size_t>((width + cell - 1) / cell) *
                              static_cast<std::size_t>((height + cell - 1) / cell);
    std::map<std::pair<int, int>, InterestPoint> best;
    for (const InterestPoint& p : points) {
        const std::pair<int, int> key{p.y / cell, p.x / cell};
        auto it = best.find(key);
        if (it == best.end()) {
            best.emplace(key, p);
            continue;
        }
        const InterestPoint& q = it->second;
        const bool wins = p.strength > q.strength ||
                          (p.strength == q.strength && std::pair{p.y, p.x} < std::pair{q.y, q.x});
        if (wins)
            it->second = p;
    }
    std::vector<InterestPoint> out;
    out.reserve(std::min(best.size(), cells));
    for (const auto& [key, p] : best)
        out.push_back(p);
    std::sort(out.begin(), out.end(), [](const InterestPoint& a, const InterestPoint& b) {
        if (a.strength != b.strength)
            return a.strength > b.strength;
        if (a.y != b.y)
            return a.y < b.y;
        return a.x < b.x;
    });
    return out;
}

Descriptor36 describe(const IntegralImage& ii, const InterestPoint& p) {
    const double s = p.scale;
    const int wavelet = 2 * std::max(1, static_cast<int>(std::lround(s)));
    const double sigma = 3.3 * s;
    const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);

    Descriptor36 v{};
    // Subregions are 4s wide, samples every 0.8s; offsets are relative to
    // the interest point, sampled on the nearest pixel.
    for (int sj = 0; sj < 3; ++sj) {
        for (int si = 0; si < 3; ++si) {
            double sum_dx = 0.0, sum_dy = 0.0, sum_adx = 0.0, sum_ady = 0.0;
            for (int b = 0; b < 5; ++b) {
                const double oy = -6.0 * s + 4.0 * s * sj + 0.8 * s * (b + 0.5);
                for (int a = 0; a < 5; ++a) {
                    const double ox = -6.0 * s + 4.0 * s * si + 0.8 * s * (a + 0.5);
                    const int sx = static_cast<int>(std::lround(p.x + ox));
                    const int sy = static_cast<int>(std::lround(p.y + oy));
                    const double g = std::exp(-(ox * ox + oy * oy) * inv_two_sigma2);
                    const double dx = g * haar_x(ii, sx, sy, wavelet);
                    const double dy = g * haar_y(ii, sx, sy, wavelet);
                    sum_dx += dx;
                    sum_dy += dy;
                    sum_adx += std::abs(dx);
                    sum_ady += std::abs(dy);
                }
            }
            const int base = (sj * 3 + si) * 4;
            v[base + 0] = sum_dx;
            v[base + 1] = sum_dy;
            v[base + 2] = sum_adx;
            v[base + 3] = sum_ady;
        }
    }

    double norm2 = 0.0;
    for (double c : v)
        norm2 += c * c;
    // Flat patch convention: zero descriptor. Box-sum cancellation noise is
    // proportional to the total image mass, so the floor must scale with it
    // or a constant image normalizes pure fp residue into garbage.
    const double mass = ii.at(ii.width - 1, ii.height - 1);
    const double floor_norm = 1e-11 * std::max(1.0, mass);
    if (norm2 <= floor_norm * floor_norm)
        return Descriptor36{};
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& c : v)
        c *= inv;
    return v;
}

std::vector<Feature> extract(const GrayImage& img, const DetectorParams& params) {
    const IntegralImage ii = integral(img);
    std::vector<InterestPoint> pts = detect(hessian_responses(ii, params), params);
    pts = grid_select(pts, params.grid_cell, img.width, img.height);
    if (static_cast<int>(pts.size()) > params.max_features)
        pts.resize(params.max_features); // grid_select output is strength-sorted
    std::vector<Feature> feats(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        feats[i].point = pts[i];
        feats[i].desc = describe(ii, pts[i]);
    }
    return feats;
}

void save_features_csv(const std::vector<Feature>& feats, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error(path + ": cannot open for writing");
    out << "x,y,scale,strength,sign,label";
    for (int d = 0; d < kDescriptorDim; ++d)
        out << ",d" << d;
    out << "\n";
    char buf[32];
    for (const Feature& f : feats) {
        out << f.point.x << "," << f.point.y;
        std::snprintf(buf, sizeof buf, ",%.17g", f.point.scale);
        out << buf;
        std::snprintf(buf, sizeof buf, ",%.17g", f.point.strength);
        out << buf;
        out << "," << f.point.sign << "," << f.label;
        for (double d : f.desc) {
            std::snprintf(buf, sizeof buf, ",%.17g", d);
            out << buf;
        }
        out << "\n";
    }
}

std::vector<Feature> load_features_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error(path + ": cannot open");
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error(path + ": empty feature CSV");
    std::vector<Feature> feats;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        if (cells.size() != 6 + kDescriptorDim)
            throw std::runtime_error(path + ": bad column count in feature CSV");
        Feature f;
        f.point.x = std::stoi(cells[0]);
        f.point.y = std::stoi(cells[1]);
        f.point.scale = std::strtod(cells[2].c_str(), nullptr);
        f.point.strength = std::strtod(cells[3].c_str(), nullptr);
        f.point.sign = std::stoi(cells[4]);
        f.label = std::stoi(cells[5]);
        for (int d = 0; d < kDescriptorDim; ++d)
            f.desc[d] = std::strtod(cells[6 + d].c_str(), nullptr);
        feats.push_back(f);
    }
    return feats;
}

} // namespace terrasurf
