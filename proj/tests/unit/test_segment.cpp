#include <doctest.h>

#include "helpers.hpp"
#include "terrasurf/segment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <vector>

using namespace terrasurf;
using testutil::TempDir;

namespace {

Feature make_feat(int x, int y, const Membership3& m) {
    Feature f;
    f.point.x = x;
    f.point.y = y;
    f.membership = m;
    return f;
}

std::vector<Feature> random_features(Rng& rng, int n, int w, int h) {
    std::vector<Feature> fs;
    for (int i = 0; i < n; ++i)
        fs.push_back(make_feat(static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(w))),
                               static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(h))),
                               Membership3{rng.uniform(), rng.uniform(), rng.uniform()}));
    return fs;
}

// Direct per-pixel loop over every feature - no spatial index involved.
SegmentationMap brute_segment(int w, int h, const std::vector<Feature>& fs, const SegParams& p) {
    SegmentationMap seg;
    seg.width = w;
    seg.height = h;
    seg.classes.assign(static_cast<std::size_t>(w) * h, 0);
    seg.values.assign(static_cast<std::size_t>(w) * h, 0.0);
    const double norm = 1.0 / (p.sigma * std::sqrt(2.0 * std::numbers::pi));
    const double denom = p.sigma_squared ? 2.0 * p.sigma * p.sigma : 2.0 * p.sigma;
    const double r2 = p.radius * p.radius;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double v[kNumClasses] = {0.0, 0.0, 0.0};
            int count = 0;
            for (const Feature& f : fs) {
                const double dx = f.point.x - x;
                const double dy = f.point.y - y;
                const double d2 = dx * dx + dy * dy;
                if (!(d2 < r2))
                    continue;
                ++count;
                const double wgt = norm * std::exp(-d2 / denom);
                for (int m = 0; m < kNumClasses; ++m)
                    v[m] += (*f.membership)[m] * wgt;
            }
            if (count == 0)
                continue;
            int best = 0;
            for (int m = 1; m < kNumClasses; ++m)
                if (v[m] > v[best])
                    best = m;
            const double vb = v[best] / count;
            const std::size_t pix = static_cast<std::size_t>(y) * w + x;
            seg.values[pix] = vb;
            seg.classes[pix] = vb > p.threshold ? best + 1 : 0;
        }
    return seg;
}

std::set<std::size_t> nonzero_pixels(const SegmentationMap& seg) {
    std::set<std::size_t> out;
    for (std::size_t i = 0; i < seg.classes.size(); ++i)
        if (seg.classes[i] != 0)
            out.insert(i);
    return out;
}

} // namespace

TEST_CASE("FeatureIndex::query agrees with a linear scan, strictly inside r") {
    Rng rng(61);
    const double r = 17.0;
    const std::vector<Feature> fs = random_features(rng, 500, 200, 160);
    const FeatureIndex index(fs, r);
    REQUIRE(index.size() == fs.size());

    for (int t = 0; t < 100; ++t) {
        const double px = rng.uniform(-20.0, 220.0);
        const double py = rng.uniform(-20.0, 180.0);
        std::vector<std::size_t> expect;
        for (std::size_t i = 0; i < fs.size(); ++i) {
            const double dx = fs[i].point.x - px;
            const double dy = fs[i].point.y - py;
            if (dx * dx + dy * dy < r * r)
                expect.push_back(i);
        }
        CHECK(index.query(px, py) == expect);
    }
}

TEST_CASE("FeatureIndex boundary is exclusive and inputs are validated") {
    const std::vector<Feature> fs = {make_feat(10, 0, Membership3{1, 0, 0})};
    const FeatureIndex at10(fs, 10.0);
    CHECK(at10.query(0.0, 0.0).empty()); // distance exactly r
    const FeatureIndex wider(fs, 10.0 + 1e-9);
    CHECK(wider.query(0.0, 0.0).size() == 1);

    CHECK_THROWS_AS(FeatureIndex(fs, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(FeatureIndex(fs, -3.0), std::invalid_argument);
    Feature bare;
    CHECK_THROWS_AS(FeatureIndex({bare}, 5.0), std::invalid_argument);

    const FeatureIndex empty(std::vector<Feature>{}, 5.0);
    CHECK(empty.size() == 0);
    CHECK(empty.query(0.0, 0.0).empty());
}

TEST_CASE("segment matches the direct double loop on random 32x32 fixtures") {
    Rng rng(67);
    for (int rep = 0; rep < 6; ++rep) {
        SegParams p;
        p.radius = rng.uniform(6.0, 14.0);
        p.sigma = rng.uniform(2.0, 6.0);
        p.threshold = rng.uniform(0.0, 0.03);
        p.sigma_squared = rep % 2 == 1;
        const std::vector<Feature> fs = random_features(rng, 40, 32, 32);
        const FeatureIndex index(fs, p.radius);
        const SegmentationMap got = segment(32, 32, index, p);
        const SegmentationMap want = brute_segment(32, 32, fs, p);
        REQUIRE(got.classes.size() == want.classes.size());
        for (std::size_t i = 0; i < want.classes.size(); ++i) {
            CHECK(got.classes[i] == want.classes[i]);
            CHECK(std::abs(got.values[i] - want.values[i]) <= 1e-12);
        }
    }
}

TEST_CASE("a single unit feature produces the analytic Gaussian profile") {
    const std::vector<Feature> fs = {make_feat(4, 4, Membership3{1, 0, 0})};
    SegParams p;
    p.radius = 5.0;
    p.sigma = 2.0;
    p.threshold = 0.0;
    const FeatureIndex index(fs, p.radius);
    const SegmentationMap seg = segment(9, 9, index, p);

    const double norm = 1.0 / (2.0 * std::sqrt(2.0 * std::numbers::pi));
    CHECK(seg.at(4, 4) == 1);
    CHECK(seg.values[4 * 9 + 4] == doctest::Approx(norm).epsilon(1e-15));
    // d^2 = 4 two pixels away; the verbatim weight divides by 2*sigma.
    CHECK(seg.values[4 * 9 + 6] == doctest::Approx(norm * std::exp(-1.0)).epsilon(1e-15));
    CHECK(seg.at(6, 4) == 1);
    // (0,0) lies at distance sqrt(32) > r: no neighborhood, class 0.
    CHECK(seg.at(0, 0) == 0);
    CHECK(seg.values[0] == 0.0);

    // Raising t just past the peak value rejects every pixel.
    SegParams strict = p;
    strict.threshold = norm + 1e-12;
    const SegmentationMap rejected = segment(9, 9, index, strict);
    for (std::size_t i = 0; i < rejected.classes.size(); ++i) {
        CHECK(rejected.classes[i] == 0);
        CHECK(rejected.values[i] == seg.values[i]); // values are pre-threshold
    }
}

TEST_CASE("pixels with an empty neighborhood stay class 0") {
    Rng rng(71);
    std::vector<Feature> fs;
    for (int i = 0; i < 12; ++i)
        fs.push_back(make_feat(static_cast<int>(rng.uniform_index(6)),
                               static_cast<int>(rng.uniform_index(16)),
                               Membership3{rng.uniform(), rng.uniform(), rng.uniform()}));
    SegParams p;
    p.radius = 4.0;
    p.threshold = 0.0;
    const SegmentationMap seg = segment(16, 16, FeatureIndex(fs, p.radius), p);
    for (int y = 0; y < 16; ++y)
        for (int x = 10; x < 16; ++x) { // all features have x <= 5, so x-10 is out of reach
            CHECK(seg.at(x, y) == 0);
            CHECK(seg.values[static_cast<std::size_t>(y) * 16 + x] == 0.0);
        }
}

TEST_CASE("raising t only ever removes pixels and never changes a winner") {
    Rng rng(73);
    for (int rep = 0; rep < 4; ++rep) {
        const std::vector<Feature> fs = random_features(rng, 30, 32, 32);
        SegParams p;
        p.radius = 10.0;
        p.sigma = 4.0;
        const FeatureIndex index(fs, p.radius);
        SegmentationMap prev;
        bool first = true;
        for (double t : {0.0, 0.005, 0.01, 0.02, 0.05}) {
            p.threshold = t;
            const SegmentationMap seg = segment(32, 32, index, p);
            if (!first) {
                for (std::size_t i = 0; i < seg.classes.size(); ++i)
                    if (seg.classes[i] != 0)
                        CHECK(seg.classes[i] == prev.classes[i]); // survivor keeps its class
                CHECK(nonzero_pixels(seg).size() <= nonzero_pixels(prev).size());
            }
            first = false;
            prev = seg;
        }
    }
}

TEST_CASE("segment is invariant to feature order and linear in membership scale") {
    Rng rng(79);
    std::vector<Feature> fs = random_features(rng, 25, 24, 24);
    SegParams p;
    p.radius = 9.0;
    p.sigma = 3.0;
    p.threshold = 0.0;
    const SegmentationMap base = segment(24, 24, FeatureIndex(fs, p.radius), p);

    std::vector<Feature> shuffled = fs;
    std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937(5));
    const SegmentationMap perm = segment(24, 24, FeatureIndex(shuffled, p.radius), p);
    for (std::size_t i = 0; i < base.classes.size(); ++i) {
        CHECK(perm.classes[i] == base.classes[i]);
        CHECK(std::abs(perm.values[i] - base.values[i]) <= 1e-12);
    }

    std::vector<Feature> halved = fs;
    for (Feature& f : halved)
        for (double& m : *f.membership)
            m *= 0.5;
    const SegmentationMap half = segment(24, 24, FeatureIndex(halved, p.radius), p);
    for (std::size_t i = 0; i < base.classes.size(); ++i) {
        CHECK(half.classes[i] == base.classes[i]); // argmax unchanged at t=0
        CHECK(std::abs(half.values[i] - 0.5 * base.values[i]) <= 1e-12);
    }
}

TEST_CASE("segment validates sizes, parameters and index compatibility") {
    const std::vector<Feature> fs = {make_feat(2, 2, Membership3{1, 0, 0})};
    const FeatureIndex index(fs, 5.0);
    SegParams p;
    p.radius = 5.0;
    CHECK_THROWS_AS(segment(0, 8, index, p), std::invalid_argument);
    CHECK_THROWS_AS(segment(8, -1, index, p), std::invalid_argument);

    SegParams bad = p;
    bad.sigma = 0.0;
    CHECK_THROWS_AS(segment(8, 8, index, bad), std::invalid_argument);
    bad = p;
    bad.threshold = 1.5;
    CHECK_THROWS_AS(segment(8, 8, index, bad), std::invalid_argument);
    bad = p;
    bad.threshold = -0.1;
    CHECK_THROWS_AS(segment(8, 8, index, bad), std::invalid_argument);
    bad = p;
    bad.radius = 0.0;
    CHECK_THROWS_AS(segment(8, 8, index, bad), std::invalid_argument);

    // Querying farther than the index bucket size would silently miss features.
    SegParams wider = p;
    wider.radius = 6.0;
    CHECK_THROWS_AS(segment(8, 8, index, wider), std::invalid_argument);
}

TEST_CASE("segmentation_error counts disagreement over labeled truth only") {
    LabelMap truth;
    truth.width = 4;
    truth.height = 2;
    truth.labels = {1, 1, 2, 2, 3, 3, 0, 0};
    SegmentationMap seg;
    seg.width = 4;
    seg.height = 2;
    seg.classes = {1, 1, 2, 2, 3, 3, 0, 0};
    seg.values.assign(8, 0.0);
    CHECK(segmentation_error(seg, truth) == 0.0);

    seg.classes = {0, 0, 0, 0, 0, 0, 0, 0}; // rejection counts as wrong
    CHECK(segmentation_error(seg, truth) == 1.0);

    seg.classes = {1, 2, 2, 2, 3, 1, 0, 0}; // 2 of the 6 labeled pixels wrong
    CHECK(segmentation_error(seg, truth) == doctest::Approx(2.0 / 6.0).epsilon(1e-15));

    seg.classes = {1, 1, 2, 2, 3, 3, 1, 2}; // disagreement only on truth-0 pixels
    CHECK(segmentation_error(seg, truth) == 0.0);

    SegmentationMap small;
    small.width = 2;
    small.height = 2;
    small.classes = {1, 1, 1, 1};
    small.values.assign(4, 0.0);
    CHECK_THROWS_AS(segmentation_error(small, truth), std::invalid_argument);

    LabelMap blank;
    blank.width = 4;
    blank.height = 2;
    blank.labels.assign(8, 0);
    seg.classes.assign(8, 1);
    CHECK_THROWS_AS(segmentation_error(seg, blank), std::invalid_argument);
}

TEST_CASE("segmentation_error matches a counting oracle on random maps") {
    Rng rng(83);
    for (int rep = 0; rep < 5; ++rep) {
        LabelMap truth;
        truth.width = 16;
        truth.height = 12;
        SegmentationMap seg;
        seg.width = 16;
        seg.height = 12;
        std::size_t labeled = 0, wrong = 0;
        for (int i = 0; i < 16 * 12; ++i) {
            const int t = static_cast<int>(rng.uniform_index(4)); // 0..3
            const int s = static_cast<int>(rng.uniform_index(4));
            truth.labels.push_back(t);
            seg.classes.push_back(s);
            if (t != 0) {
                ++labeled;
                if (s != t)
                    ++wrong;
            }
        }
        seg.values.assign(seg.classes.size(), 0.0);
        REQUIRE(labeled > 0);
        CHECK(segmentation_error(seg, truth) ==
              doctest::Approx(static_cast<double>(wrong) / labeled).epsilon(1e-15));
    }
}

TEST_CASE("eval_stats reports mean, sample stdev and range") {
    const EvalStats one = eval_stats({0.25});
    CHECK(one.mean == 0.25);
    CHECK(one.stdev == 0.0);
    CHECK(one.min == 0.25);
    CHECK(one.max == 0.25);
    CHECK(one.n == 1);

    const EvalStats four = eval_stats({1.0, 2.0, 3.0, 4.0});
    CHECK(four.mean == 2.5);
    CHECK(four.stdev == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));
    CHECK(four.min == 1.0);
    CHECK(four.max == 4.0);
    CHECK(four.n == 4);

    CHECK_THROWS_AS(eval_stats({}), std::invalid_argument);
}

TEST_CASE("segmentation maps round-trip through PGM and reject stray classes") {
    TempDir dir("segment");
    Rng rng(89);
    SegmentationMap seg;
    seg.width = 11;
    seg.height = 7;
    for (int i = 0; i < 11 * 7; ++i)
        seg.classes.push_back(static_cast<int>(rng.uniform_index(4)));
    seg.values.assign(seg.classes.size(), 0.5);

    const std::string path = dir.file("seg.pgm");
    save_segmentation_pgm(seg, path);
    const SegmentationMap back = load_segmentation_pgm(path);
    CHECK(back.width == seg.width);
    CHECK(back.height == seg.height);
    CHECK(back.classes == seg.classes);
    CHECK(back.values == std::vector<double>(seg.classes.size(), 0.0));

    const std::string stray = dir.file("stray.pgm");
    save_pgm_raw({0, 7, 1, 2}, 2, 2, 255, stray);
    CHECK_THROWS_AS(load_segmentation_pgm(stray), std::runtime_error);
}

TEST_CASE("the viewing PPM uses the pinned palette") {
    TempDir dir("segment");
    SegmentationMap seg;
    seg.width = 2;
    seg.height = 2;
    seg.classes = {0, 1, 2, 3};
    seg.values.assign(4, 0.0);
    const std::string path = dir.file("seg.ppm");
    save_segmentation_ppm(seg, path);

    std::ifstream in(path, std::ios::binary);
    std::string header(11, '\0');
    in.read(header.data(), 11);
    CHECK(header == "P6\n2 2\n255\n");
    unsigned char px[12];
    in.read(reinterpret_cast<char*>(px), 12);
    REQUIRE(in.gcount() == 12);
    const unsigned char want[12] = {0, 0, 0, 96, 192, 64, 32, 112, 48, 136, 136, 152};
    for (int i = 0; i < 12; ++i)
        CHECK(px[i] == want[i]);
}

TEST_CASE("save_eval_csv emits per-image rows and the summary block") {
    TempDir dir("segment");
    const std::vector<double> errors = {0.125, 0.25, 0.5};
    const EvalStats stats = eval_stats(errors);
    const std::string path = dir.file("eval.csv");
    save_eval_csv(errors, stats, path);

    std::ifstream in(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
        lines.push_back(line);
    REQUIRE(lines.size() == 8);
    CHECK(lines[0] == "image,error");
    CHECK(lines[1] == "0,0.125");
    CHECK(lines[2] == "1,0.25");
    CHECK(lines[3] == "2,0.5");
    CHECK(lines[4].starts_with("mean,"));
    CHECK(lines[5].starts_with("std,"));
    CHECK(lines[6].starts_with("min,0.125"));
    CHECK(lines[7].starts_with("max,0.5"));
}
