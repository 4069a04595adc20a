#include "terrasurf/segment.hpp"

#include "terrasurf/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace terrasurf {

namespace {

std::int64_t bucket_key(std::int64_t cx, std::int64_t cy) {
    return (cx << 32) ^ (cy & 0xffffffffLL);
}

} // namespace

FeatureIndex::FeatureIndex(const std::vector<Feature>& features, double r) {
    if (!(r > 0.0))
        throw std::invalid_argument("FeatureIndex: radius must be positive");
    r_ = r;
    items_.reserve(features.size());
    for (const Feature& f : features) {
        if (!f.membership)
            throw std::invalid_argument("FeatureIndex: feature without membership");
        IndexedFeature it;
        it.x = static_cast<double>(f.point.x);
        it.y = static_cast<double>(f.point.y);
        it.membership = *f.membership;
        const auto cx = static_cast<std::int64_t>(std::floor(it.x / r_));
        const auto cy = static_cast<std::int64_t>(std::floor(it.y / r_));
        buckets_[bucket_key(cx, cy)].push_back(items_.size());
        items_.push_back(it);
    }
}

std::vector<std::size_t> FeatureIndex::query(double px, double py) const {
    std::vector<std::size_t> out;
    const auto cx = static_cast<std::int64_t>(std::floor(px / r_));
    const auto cy = static_cast<std::int64_t>(std::floor(py / r_));
    const double r2 = r_ * r_;
    for (std::int64_t by = cy - 1; by <= cy + 1; ++by)
        for (std::int64_t bx = cx - 1; bx <= cx + 1; ++bx) {
            const auto it = buckets_.find(bucket_key(bx, by));
            if (it == buckets_.end())
                continue;
            for (std::size_t idx : it->second) {
                const double dx = items_[idx].x - px;
                const double dy = items_[idx].y - py;
                if (dx * dx + dy * dy < r2)
                    out.push_back(idx);
            }
        }
    std::sort(out.begin(), out.end());
    return out;
}

FeatureIndex build_index(const std::vector<Feature>& features, double r) {
    return FeatureIndex(features, r);
}

SegmentationMap segment(int width, int height, const FeatureIndex& index,
                        const SegParams& params) {
    if (width < 1 || height < 1)
        throw std::invalid_argument("segment: empty output size");
    if (!(params.radius > 0.0) || !(params.sigma > 0.0) || params.threshold < 0.0 ||
        params.threshold > 1.0)
        throw std::invalid_argument("segment: invalid parameters");
    if (params.radius > index.radius() + 1e-12)
        throw std::invalid_argument("segment: index bucket size smaller than query radius");

    SegmentationMap seg;
    seg.width = width;
    seg.height = height;
    seg.classes.assign(static_cast<std::size_t>(width) * height, 0);
    seg.values.assign(static_cast<std::size_t>(width) * height, 0.0);

    const double norm = 1.0 / (params.sigma * std::sqrt(2.0 * std::numbers::pi));
    const double denom =
        params.sigma_squared ? 2.0 * params.sigma * params.sigma : 2.0 * params.sigma;
    const double r2 = params.radius * params.radius;
    const auto& items = index.items();

    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const std::vector<std::size_t> near = index.query(x, y);
            double v[kNumClasses] = {0.0, 0.0, 0.0};
            int count = 0;
            for (std::size_t idx : near) {
                const IndexedFeature& f = items[idx];
                const double dx = f.x - x;
                const double dy = f.y - y;
                const double d2 = dx * dx + dy * dy;
                if (!(d2 < r2))
                    continue;
                ++count;
                const double w = norm * std::exp(-d2 / denom);
                for (int m = 0; m < kNumClasses; ++m)
                    v[m] += f.membership[m] * w;
            }
            const std::size_t pix = static_cast<std::size_t>(y) * width + x;
            if (count == 0)
                continue; // class 0, value 0
            int best = 0;
            for (int m = 1; m < kNumClasses; ++m)
                if (v[m] > v[best])
                    best = m;
            const double vb = v[best] / count;
            seg.values[pix] = vb;
            seg.classes[pix] = vb > params.threshold ? best + 1 : 0;
        }
    }
    return seg;
}

void save_segmentation_pgm(const SegmentationMap& seg, const std::string& path) {
    save_pgm_raw(seg.classes, seg.width, seg.height, 255, path);
}

SegmentationMap load_segmentation_pgm(const std::string& path) {
    SegmentationMap seg;
    seg.classes = load_pgm_raw(path, seg.width, seg.height);
    for (int c : seg.classes)
        if (c < 0 || c > 3)
            throw std::runtime_error(path + ": segmentation class out of range");
    seg.values.assign(seg.classes.size(), 0.0);
    return seg;
}

void save_segmentation_ppm(const SegmentationMap& seg, const std::string& path) {
    static constexpr unsigned char palette[4][3] = {
        {0, 0, 0},       // 0: rejected
        {96, 192, 64},   // 1: grass
        {32, 112, 48},   // 2: trees
        {136, 136, 152}, // 3: road
    };
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error(path + ": cannot open for writing");
    out << "P6\n" << seg.width << " " << seg.height << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(seg.width) * 3);
    for (int y = 0; y < seg.height; ++y) {
        for (int x = 0; x < seg.width; ++x) {
            const int c = seg.at(x, y);
            row[3 * x + 0] = palette[c][0];
            row[3 * x + 1] = palette[c][1];
            row[3 * x + 2] = palette[c][2];
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out)
        throw std::runtime_error(path + ": write failed");
}

double segmentation_error(const SegmentationMap& seg, const LabelMap& truth) {
    if (seg.width != truth.width || seg.height != truth.height)
        throw std::invalid_argument("segmentation_error: size mismatch");
    std::size_t labeled = 0, wrong = 0;
    for (std::size_t i = 0; i < seg.classes.size(); ++i) {
        const int t = truth.labels[i];
        if (t == 0)
            continue;
        ++labeled;
        if (seg.classes[i] != t)
            ++wrong;
    }
    if (labeled == 0)
        throw std::invalid_argument("segmentation_error: truth map has no labeled pixels");
    return static_cast<double>(wrong) / static_cast<double>(labeled);
}

EvalStats eval_stats(const std::vector<double>& errors) {
    if (errors.empty())
        throw std::invalid_argument("eval_stats: no samples");
    EvalStats s;
    s.n = errors.size();
    s.min = errors.front();
    s.max = errors.front();
    double sum = 0.0;
    for (double e : errors) {
        sum += e;
        s.min = std::min(s.min, e);
        s.max = std::max(s.max, e);
    }
    s.mean = sum / static_cast<double>(s.n);
    if (s.n > 1) {
        double ss = 0.0;
        for (double e : errors)
            ss += (e - s.mean) * (e - s.mean);
        s.stdev = std::sqrt(ss / static_cast<double>(s.n - 1));
    }
    return s;
}

void save_eval_csv(const std::vector<double>& errors, const EvalStats& stats,
                   const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error(path + ": cannot open for writing");
    char buf[160];
    out << "image,error\n";
    for (std::size_t i = 0; i < errors.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, errors[i]);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "mean,%.17g\nstd,%.17g\nmin,%.17g\nmax,%.17g\n", stats.mean,
                  stats.stdev, stats.min, stats.max);
    out << buf;
}

} // namespace terrasurf
