#pragma once

#include "terrasurf/surf.hpp"
#include "terrasurf/texmodel.hpp"

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace terrasurf {

struct SegParams {
    double radius = 48.0;   // neighborhood radius r (pixels), strict <
    double sigma = 16.0;    // Gaussian bandwidth (pixels)
    double threshold = 0.005; // acceptance threshold t in [0,1]
    // Verbatim formula uses exp(-d^2/(2*sigma)); this switches to the
    // conventional exp(-d^2/(2*sigma^2)).
    bool sigma_squared = false;
};

// Per-pixel class in {0,1,2,3}; 0 = rejected (no feature within r, or max
// membership <= t). values holds the winning membership V at each pixel.
struct SegmentationMap {
    int width = 0;
    int height = 0;
    std::vector<int> classes;
    std::vector<double> values;

    int at(int x, int y) const { return classes[static_cast<std::size_t>(y) * width + x]; }
};

struct IndexedFeature {
    double x = 0.0;
    double y = 0.0;
    Membership3 membership{};
};

// Spatial bucket grid, bucket edge = r. query returns features with
// Euclidean distance strictly less than r from the probe point.
class FeatureIndex {
public:
    FeatureIndex() = default;
    FeatureIndex(const std::vector<Feature>& features, double r);

    std::vector<std::size_t> query(double px, double py) const;
    const std::vector<IndexedFeature>& items() const { return items_; }
    double radius() const { return r_; }
    std::size_t size() const { return items_.size(); }

private:
    double r_ = 1.0;
    std::vector<IndexedFeature> items_;
    std::unordered_map<std::int64_t, std::vector<std::size_t>> buckets_;
};

FeatureIndex build_index(const std::vector<Feature>& features, double r);

SegmentationMap segment(int width, int height, const FeatureIndex& index, const SegParams& params);

// PGM holding raw class ids {0..3}, and a color-mapped PPM for viewing.
void save_segmentation_pgm(const SegmentationMap& seg, const std::string& path);
SegmentationMap load_segmentation_pgm(const std::string& path);
void save_segmentation_ppm(const SegmentationMap& seg, const std::string& path);

// Fraction of labeled truth pixels where seg disagrees (seg=0 counts as
// wrong). Truth-0 pixels are excluded. Throws on size mismatch or a truth
// map with no labeled pixels.
double segmentation_error(const SegmentationMap& seg, const LabelMap& truth);

struct EvalStats {
    double mean = 0.0;
    double stdev = 0.0; // sample standard deviation (n-1); 0 when n < 2
    double min = 0.0;
    double max = 0.0;
    std::size_t n = 0;
};

EvalStats eval_stats(const std::vector<double>& errors);
void save_eval_csv(const std::vector<double>& errors, const EvalStats& stats,
                   const std::string& path);

} // namespace terrasurf
