#include "terrasurf/texmodel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace terrasurf {

namespace {

double desc_dist2(const Descriptor36& a, const Descriptor36& b) {
    double s = 0.0;
    for (int i = 0; i < kDescriptorDim; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

// Mean distance from feature `idx` to its k nearest same-class neighbors.
double knn_mean_dist(const std::vector<const Feature*>& cls, std::size_t idx, int k) {
    std::vector<double> d2;
    d2.reserve(cls.size() - 1);
    for (std::size_t j = 0; j < cls.size(); ++j)
        if (j != idx)
            d2.push_back(desc_dist2(cls[idx]->desc, cls[j]->desc));
    std::partial_sort(d2.begin(), d2.begin() + k, d2.end());
    double sum = 0.0;
    for (int i = 0; i < k; ++i)
        sum += std::sqrt(d2[i]);
    return sum / k;
}

} // namespace

LabelMap load_label_map(const std::string& path) {
    LabelMap m;
    m.labels = load_pgm_raw(path, m.width, m.height);
    for (int v : m.labels)
        if (v < 0 || v > 3)
            throw std::runtime_error(path + ": label map value outside {0,1,2,3}");
    return m;
}

void save_label_map(const LabelMap& map, const std::string& path) {
    save_pgm_raw(map.labels, map.width, map.height, 255, path);
}

std::array<int, 4> TrainingSet::class_counts() const {
    std::array<int, 4> c{};
    for (const Feature& f : features)
        if (f.label >= 0 && f.label <= 3)
            c[f.label]++;
    return c;
}

std::vector<const Feature*> TrainingSet::of_class(int label) const {
    std::vector<const Feature*> out;
    for (const Feature& f : features)
        if (f.label == label)
            out.push_back(&f);
    return out;
}

TrainingSet label_features(const std::vector<Feature>& features, const LabelMap& map,
                           int frame_width, int frame_height) {
    if (map.width != frame_width || map.height != frame_height)
        throw std::invalid_argument("label_features: label map does not match frame size");
    TrainingSet ts;
    for (Feature f : features) {
        const int x = f.point.x, y = f.point.y;
        if (x < 0 || x >= map.width || y < 0 || y >= map.height)
            continue;
        const int label = map.at(x, y);
        if (label == 0)
            continue;
        f.label = label;
        ts.features.push_back(std::move(f));
    }
    return ts;
}

TrainingSet filter_isolated(const TrainingSet& ts, int k, double q) {
    if (k < 1 || q < 0.0 || q > 1.0)
        throw std::invalid_argument("filter_isolated: bad parameters");

    std::vector<bool> keep(ts.features.size(), true);
    for (int label = 1; label <= kNumClasses; ++label) {
        std::vector<const Feature*> cls;
        std::vector<std::size_t> orig;
        for (std::size_t i = 0; i < ts.features.size(); ++i)
            if (ts.features[i].label == label) {
                cls.push_back(&ts.features[i]);
                orig.push_back(i);
            }
        if (cls.empty())
            continue;
        if (static_cast<int>(cls.size()) <= k)
            throw std::invalid_argument("filter_isolated: class " + std::to_string(label) +
                                        " has <= k members");
        std::vector<double> stat(cls.size());
        for (std::size_t i = 0; i < cls.size(); ++i)
            stat[i] = knn_mean_dist(cls, i, k);
        // Quantile rank ceil(q*(n-1)): for high q and modest n the threshold
        // sits at or near the class maximum, which keeps the pass stable on
        // its own output (re-filtering the survivors drops nothing new).
        std::vector<double> sorted = stat;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t rank = std::min(
            sorted.size() - 1,
            static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size() - 1))));
        const double threshold = sorted[rank];
        for (std::size_t i = 0; i < cls.size(); ++i)
            if (stat[i] > threshold)
                keep[orig[i]] = false;
    }

    TrainingSet out;
    for (std::size_t i = 0; i < ts.features.size(); ++i)
        if (keep[i])
            out.features.push_back(ts.features[i]);
    return out;
}

std::pair<TrainingSet, TrainingSet> split_dense(const TrainingSet& ts, int k) {
    if (k < 1)
        throw std::invalid_argument("split_dense: k must be >= 1");
    if (static_cast<int>(ts.features.size()) <= k)
        throw std::invalid_argument("split_dense: need more than k features");

    const std::size_t n = ts.features.size();
    TrainingSet dense, nondense;
    std::vector<std::pair<double, std::size_t>> d2(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            d2[j] = {desc_dist2(ts.features[i].desc, ts.features[j].desc), j};
        d2[i].first = std::numeric_limits<double>::infinity(); // exclude self
        std::partial_sort(d2.begin(), d2.begin() + k, d2.end());
        bool all_same = true;
        for (int m = 0; m < k; ++m)
            if (ts.features[d2[m].second].label != ts.features[i].label) {
                all_same = false;
                break;
            }
        (all_same ? dense : nondense).features.push_back(ts.features[i]);
    }
    return {std::move(dense), std::move(nondense)};
}

namespace {

// Deterministic ordering of descriptor sets: by size, then lexicographic.
bool desc_set_less(const std::vector<Descriptor36>& a, const std::vector<Descriptor36>& b) {
    if (a.size() != b.size())
        return a.size() < b.size();
    for (std::size_t i = 0; i < a.size(); ++i)
        for (int c = 0; c < kDescriptorDim; ++c)
            if (a[i][c] != b[i][c])
                return a[i][c] < b[i][c];
    return false;
}

} // namespace

double variability(const std::vector<Descriptor36>& x, const std::vector<Descriptor36>& y) {
    if (x.empty() || y.empty())
        throw std::invalid_argument("variability: empty feature set");
    // Canonical iteration order makes the accumulated sum, and therefore the
    // result, exactly symmetric in the arguments.
    const std::vector<Descriptor36>* outer = &x;
    const std::vector<Descriptor36>* inner = &y;
    if (desc_set_less(*inner, *outer))
        std::swap(outer, inner);
    double sum = 0.0;
    for (const Descriptor36& a : *outer)
        for (const Descriptor36& b : *inner)
            sum += std::sqrt(desc_dist2(a, b));
    return sum / (static_cast<double>(x.size()) * static_cast<double>(y.size()));
}

VariabilityMatrix variability_matrix(const TrainingSet& ts) {
    std::array<std::vector<Descriptor36>, 3> cls;
    for (const Feature& f : ts.features)
        if (f.label >= 1 && f.label <= 3)
            cls[f.label - 1].push_back(f.desc);
    for (int c = 0; c < 3; ++c)
        if (cls[c].empty())
            throw std::invalid_argument("variability_matrix: class " + std::to_string(c + 1) +
                                        " is empty");
    VariabilityMatrix m{};
    for (int a = 0; a < 3; ++a)
        for (int b = a; b < 3; ++b) {
            const double v = variability(cls[a], cls[b]);
            m[a][b] = v;
            m[b][a] = v;
        }
    return m;
}

void save_variability_csv(const VariabilityMatrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error(path + ": cannot open for writing");
    out << "class,grass,trees,road\n";
    const char* names[3] = {"grass", "trees", "road"};
    char buf[64];
    for (int a = 0; a < 3; ++a) {
        out << names[a];
        for (int b = 0; b < 3; ++b) {
            std::snprintf(buf, sizeof buf, ",%.17g", m[a][b]);
            out << buf;
        }
        out << "\n";
    }
}

Pca2Result pca2(const TrainingSet& ts) {
    const std::size_t n = ts.features.size();
    if (n < 3)
        throw std::invalid_argument("pca2: need at least 3 features");

    Eigen::MatrixXd X(n, kDescriptorDim);
    for (std::size_t i = 0; i < n; ++i)
        for (int d = 0; d < kDescriptorDim; ++d)
            X(static_cast<Eigen::Index>(i), d) = ts.features[i].desc[d];
    const Eigen::RowVectorXd mean = X.colwise().mean();
    X.rowwise() -= mean;

    const Eigen::MatrixXd cov = X.transpose() * X / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("pca2: eigendecomposition failed");
    const Eigen::VectorXd evals = eig.eigenvalues(); // ascending
    const double total = evals.sum();
    if (total <= 0.0)
        throw std::invalid_argument("pca2: degenerate (all-identical) feature set");

    const Eigen::Index last = kDescriptorDim - 1;
    Eigen::MatrixXd basis(kDescriptorDim, 2);
    basis.col(0) = eig.eigenvectors().col(last);
    basis.col(1) = eig.eigenvectors().col(last - 1);
    const Eigen::MatrixXd proj = X * basis;

    Pca2Result r;
    r.coords.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        r.coords[i] = {proj(static_cast<Eigen::Index>(i), 0), proj(static_cast<Eigen::Index>(i), 1)};
    r.explained = {evals(last) / total, evals(last - 1) / total};
    return r;
}

void save_pca_csv(const TrainingSet& ts, const Pca2Result& pca, const std::string& path) {
    if (ts.features.size() != pca.coords.size())
        throw std::invalid_argument("save_pca_csv: size mismatch");
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error(path + ": cannot open for writing");
    out << "x,y,class\n";
    char buf[80];
    for (std::size_t i = 0; i < pca.coords.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d\n", pca.coords[i][0], pca.coords[i][1],
                      ts.features[i].label);
        out << buf;
    }
}

} // namespace terrasurf
