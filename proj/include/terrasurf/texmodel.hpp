// Labeled training sets from hand-segmented maps, isolated-feature
// filtering, dense/non-dense splits, pairwise variability statistics and a
// 2-component PCA projection for inspecting class separability.
#pragma once

#include "terrasurf/surf.hpp"

#include <array>
#include <string>
#include <vector>

namespace terrasurf {

/// Per-pixel class map: 0 unknown, 1 grass, 2 trees, 3 road.
struct LabelMap {
    int width = 0;
    int height = 0;
    std::vector<int> labels;

    LabelMap() = default;
    LabelMap(int w, int h, int fill = 0)
        : width(w), height(h), labels(static_cast<std::size_t>(w) * h, fill) {}

    int at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
    int& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
};

LabelMap load_label_map(const std::string& path);
void save_label_map(const LabelMap& map, const std::string& path);

/// Features with labels in {1,2,3} only.
struct TrainingSet {
    std::vector<Feature> features;

    std::array<int, 4> class_counts() const; // index by label, [0] unused
    std::vector<const Feature*> of_class(int label) const;
};

/// Entry (a,b) is the mean pairwise descriptor distance between classes
/// a+1 and b+1 (self-pairs included on the diagonal).
using VariabilityMatrix = std::array<std::array<double, 3>, 3>;

/// Stamps each feature with the map label at its pixel; label-0 features
/// are dropped. Throws on frame/map size mismatch.
TrainingSet label_features(const std::vector<Feature>& features, const LabelMap& map,
                           int frame_width, int frame_height);

/// Drops features whose mean descriptor distance to their k nearest
/// same-class neighbors exceeds the class's q-quantile of that statistic.
/// Any non-empty class must have more than k members.
TrainingSet filter_isolated(const TrainingSet& ts, int k = 5, double q = 0.95);

/// Dense subset: features whose k nearest neighbors (descriptor space, self
/// excluded) all share the feature's class. Returns {dense, nondense}.
std::pair<TrainingSet, TrainingSet> split_dense(const TrainingSet& ts, int k);

/// Mean pairwise Euclidean descriptor distance over all |x|*|y| pairs.
double variability(const std::vector<Descriptor36>& x, const std::vector<Descriptor36>& y);

/// variability() applied to every class pair; all three classes must be
/// non-empty.
VariabilityMatrix variability_matrix(const TrainingSet& ts);
void save_variability_csv(const VariabilityMatrix& m, const std::string& path);

struct Pca2Result {
    std::vector<std::array<double, 2>> coords; // one per feature, input order
    std::array<double, 2> explained;           // top-2 variance fractions, descending
};

/// Mean-centered projection onto the top-2 eigenvectors of the descriptor
/// covariance. Throws for fewer than 3 features or an all-identical set.
Pca2Result pca2(const TrainingSet& ts);
void save_pca_csv(const TrainingSet& ts, const Pca2Result& pca, const std::string& path);

} // namespace terrasurf
