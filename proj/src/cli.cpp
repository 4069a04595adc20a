#include "terrasurf/cli.hpp"

#include "terrasurf/classify.hpp"
#include "terrasurf/config.hpp"
#include "terrasurf/image.hpp"
#include "terrasurf/mosaic.hpp"
#include "terrasurf/rng.hpp"
#include "terrasurf/segment.hpp"
#include "terrasurf/surf.hpp"
#include "terrasurf/texmodel.hpp"
#include "terrasurf/track.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace terrasurf {

namespace {

namespace fs = std::filesystem;

// Usage-level problem detected after CLI11 parsing (bad combinations).
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string zero_pad(int v, int width) {
    std::string s = std::to_string(v);
    while (static_cast<int>(s.size()) < width)
        s.insert(s.begin(), '0');
    return s;
}

// Sticky per-subcommand flag overrides: config file first, flags win.
struct DetectorOverrides {
    std::optional<double> threshold;
    std::optional<int> octaves, layers, grid_cell, max_features;

    void attach(CLI::App* cmd) {
        cmd->add_option("--threshold", threshold, "detector response threshold");
        cmd->add_option("--octaves", octaves, "detector octaves");
        cmd->add_option("--layers", layers, "layers per octave");
        cmd->add_option("--grid-cell", grid_cell, "grid selection cell size (px)");
        cmd->add_option("--max-features", max_features, "feature count cap");
    }
    void apply(Config& cfg) const {
        if (threshold)
            cfg.detector.threshold = *threshold;
        if (octaves)
            cfg.detector.octaves = *octaves;
        if (layers)
            cfg.detector.layers_per_octave = *layers;
        if (grid_cell)
            cfg.detector.grid_cell = *grid_cell;
        if (max_features)
            cfg.detector.max_features = *max_features;
    }
};

struct SegOverrides {
    std::optional<double> radius, sigma, threshold;
    std::optional<bool> sigma_squared;

    void attach(CLI::App* cmd) {
        cmd->add_option("--seg-radius", radius, "membership vote radius (px)");
        cmd->add_option("--seg-sigma", sigma, "membership vote bandwidth (px)");
        cmd->add_option("--seg-threshold", threshold, "acceptance threshold");
        cmd->add_flag("--seg-sigma-squared", sigma_squared,
                      "use the conventional squared-sigma exponent");
    }
    void apply(Config& cfg) const {
        if (radius)
            cfg.seg.radius = *radius;
        if (sigma)
            cfg.seg.sigma = *sigma;
        if (threshold)
            cfg.seg.threshold = *threshold;
        if (sigma_squared)
            cfg.seg.sigma_squared = *sigma_squared;
    }
};

struct CommonOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file")
            ->check(CLI::ExistingFile);
        cmd->add_option("--seed", seed, "root seed override");
    }
    Config make() const {
        Config cfg = config_path.empty() ? Config{} : load_config(config_path);
        if (seed)
            cfg.seed = *seed;
        cfg.validate();
        return cfg;
    }
};

// -------------------------------------------------------------------------
// model handling

struct Classifier {
    std::optional<NnModel> nn;
    std::optional<MlpModel> mlp;

    Membership3 operator()(const Descriptor36& d) const {
        return nn ? nn_membership(d, *nn) : mlp_forward(*mlp, d);
    }
    const char* name() const { return nn ? "nn" : "mlp"; }
};

Classifier load_classifier(const std::string& path, const Config& cfg) {
    Classifier c;
    if (fs::path(path).extension() == ".json") {
        MlpModel m = load_mlp(path);
        if (m.n_in != kDescriptorDim)
            throw std::runtime_error(path + ": model input size incompatible with descriptors");
        c.mlp = std::move(m);
    } else {
        TrainingSet ts;
        ts.features = load_features_csv(path);
        if (ts.features.empty())
            throw std::runtime_error(path + ": empty training set");
        c.nn = make_nn_model(ts, cfg.nn_tau);
    }
    return c;
}

// extract -> classify every feature -> Algorithm-1 vote. The shared frame
// pipeline keeps cmd_segment and cmd_track frame 0 bit-identical.
struct FrameResult {
    std::vector<Feature> features;
    SegmentationMap seg;
};

FrameResult segment_frame(const GrayImage& img, const Classifier& cls, const Config& cfg,
                          std::vector<Feature> preseeded = {}) {
    FrameResult r;
    r.features = preseeded.empty() ? extract(img, cfg.detector) : std::move(preseeded);
    for (Feature& f : r.features)
        if (!f.membership)
            f.membership = cls(f.desc);
    const FeatureIndex index(r.features, cfg.seg.radius);
    r.seg = segment(img.width, img.height, index, cfg.seg);
    return r;
}

void write_segmentation(const SegmentationMap& seg, const fs::path& out_dir,
                        const std::string& stem) {
    save_segmentation_pgm(seg, (out_dir / (stem + "_seg.pgm")).string());
    save_segmentation_ppm(seg, (out_dir / (stem + "_seg.ppm")).string());
}

void print_stats_block(const char* classifier, const EvalStats& s) {
    std::printf("classifier,%s\n", classifier);
    std::printf("mean,%.6f\nstd,%.6f\nmin,%.6f\nmax,%.6f\n", s.mean, s.stdev, s.min, s.max);
}

// -------------------------------------------------------------------------
// subcommands

struct GenMosaicArgs {
    std::string out_prefix;
    int count = 1;
    int sequence = 0;
    int width = 256, height = 256;
    CommonOpts common;
};

void run_gen_mosaic(const GenMosaicArgs& a) {
    const Config cfg = a.common.make();
    const fs::path prefix(a.out_prefix);
    if (prefix.has_parent_path())
        fs::create_directories(prefix.parent_path());

    if (a.sequence > 0) {
        TrackSequenceSpec spec;
        spec.width = a.width;
        spec.height = a.height;
        spec.frames = a.sequence;
        spec.seed = derive_seed(cfg.seed, "track-sequence");
        const std::vector<Mosaic> frames = gen_track_sequence(spec);
        for (int i = 0; i < static_cast<int>(frames.size()); ++i) {
            const std::string stem = a.out_prefix + "_f" + zero_pad(i, 3);
            save_pgm(frames[static_cast<std::size_t>(i)].image, stem + ".pgm");
            save_label_map(frames[static_cast<std::size_t>(i)].labels, stem + "_labels.pgm");
        }
        std::printf("wrote %d sequence frames to %s_f*.pgm\n", a.sequence, a.out_prefix.c_str());
        return;
    }

    for (int i = 0; i < a.count; ++i) {
        MosaicSpec spec = random_mosaic_spec(derive_seed(cfg.seed, "mosaic:" + std::to_string(i)));
        spec.width = a.width;
        spec.height = a.height;
        const Mosaic m = gen_mosaic(spec);
        const std::string stem =
            a.count == 1 ? a.out_prefix : a.out_prefix + "_" + zero_pad(i, 3);
        save_pgm(m.image, stem + ".pgm");
        save_label_map(m.labels, stem + "_labels.pgm");
    }
    std::printf("wrote %d mosaic(s) to %s*.pgm\n", a.count, a.out_prefix.c_str());
}

struct ExtractArgs {
    std::vector<std::string> images;
    std::vector<std::string> labels;
    std::string out = "features.csv";
    CommonOpts common;
    DetectorOverrides det;
};

void run_extract(const ExtractArgs& a) {
    if (!a.labels.empty() && a.labels.size() != a.images.size())
        throw UsageError("--labels count must match the number of images");
    Config cfg = a.common.make();
    a.det.apply(cfg);
    cfg.validate();

    std::vector<Feature> all;
    for (std::size_t i = 0; i < a.images.size(); ++i) {
        const GrayImage img = load_pgm(a.images[i]);
        std::vector<Feature> feats = extract(img, cfg.detector);
        if (!a.labels.empty()) {
            const LabelMap map = load_label_map(a.labels[i]);
            TrainingSet ts = label_features(feats, map, img.width, img.height);
            feats = std::move(ts.features);
        }
        all.insert(all.end(), feats.begin(), feats.end());
    }
    if (fs::path(a.out).has_parent_path())
        fs::create_directories(fs::path(a.out).parent_path());
    save_features_csv(all, a.out);

    std::array<int, 4> counts{};
    for (const Feature& f : all)
        if (f.label >= 0 && f.label <= 3)
            ++counts[static_cast<std::size_t>(f.label)];
    std::printf("images,%zu\nfeatures,%zu\nunlabeled,%d\ngrass,%d\ntrees,%d\nroad,%d\n",
                a.images.size(), all.size(), counts[0], counts[1], counts[2], counts[3]);
}

struct TrainArgs {
    std::string features;
    std::string out_dir = ".";
    std::optional<std::string> classifier;
    std::optional<std::string> algorithm;
    std::optional<int> epochs, hidden1, hidden2;
    std::optional<double> tau;
    CommonOpts common;
};

void run_train(const TrainArgs& a) {
    Config cfg = a.common.make();
    if (a.classifier)
        cfg.classifier = *a.classifier;
    if (a.algorithm)
        cfg.train.algorithm = *a.algorithm == "lm" ? TrainAlgorithm::Lm : TrainAlgorithm::Rprop;
    if (a.epochs)
        cfg.train.max_epochs = *a.epochs;
    if (a.hidden1)
        cfg.train.hidden1 = *a.hidden1;
    if (a.hidden2)
        cfg.train.hidden2 = *a.hidden2;
    if (a.tau)
        cfg.nn_tau = *a.tau;
    cfg.validate();

    TrainingSet ts;
    for (Feature& f : load_features_csv(a.features))
        if (f.label >= 1 && f.label <= 3)
            ts.features.push_back(std::move(f));
    if (ts.features.empty())
        throw std::runtime_error(a.features + ": no labeled features to train on");

    const TrainingSet filtered = filter_isolated(ts, cfg.filter_k, cfg.filter_q);
    const fs::path out_dir(a.out_dir);
    fs::create_directories(out_dir);

    // Separability diagnostics: variability of the full set and of the
    // dense/non-dense split, plus a 2D PCA projection.
    save_variability_csv(variability_matrix(filtered), (out_dir / "variability.csv").string());
    const auto [dense, nondense] = split_dense(filtered, cfg.dense_k);
    auto all_classes_present = [](const TrainingSet& s) {
        const auto c = s.class_counts();
        return c[1] > 0 && c[2] > 0 && c[3] > 0;
    };
    if (all_classes_present(dense))
        save_variability_csv(variability_matrix(dense),
                             (out_dir / "variability_dense.csv").string());
    else
        std::fprintf(stderr, "warning: dense subset misses a class; variability skipped\n");
    if (all_classes_present(nondense))
        save_variability_csv(variability_matrix(nondense),
                             (out_dir / "variability_nondense.csv").string());
    else
        std::fprintf(stderr, "warning: non-dense subset misses a class; variability skipped\n");
    save_pca_csv(filtered, pca2(filtered), (out_dir / "pca.csv").string());

    std::printf("features,%zu\nfiltered,%zu\ndense,%zu\n", ts.features.size(),
                filtered.features.size(), dense.features.size());

    if (cfg.classifier == "nn") {
        const std::string model_path = (out_dir / "model_nn.csv").string();
        save_features_csv(filtered.features, model_path);
        const NnModel model = make_nn_model(filtered, cfg.nn_tau);
        std::printf("model,%s\ntau,%.17g\n", model_path.c_str(), model.tau);
    } else {
        TrainConfig tc = cfg.train;
        tc.seed = derive_seed(cfg.seed, "mlp-init");
        const TrainResult result = tc.algorithm == TrainAlgorithm::Lm ? train_lm(filtered, tc)
                                                                      : train_rprop(filtered, tc);
        const std::string model_path = (out_dir / "model_mlp.json").string();
        save_mlp(result.model, model_path);
        save_train_log(result.log, (out_dir / "train_log.csv").string());
        std::printf("model,%s\ninitial_loss,%.17g\nbest_loss,%.17g\nepochs,%zu\n",
                    model_path.c_str(), result.log.front().second, result.best_loss,
                    result.log.size() - 1);
    }
}

struct SegmentArgs {
    std::vector<std::string> images;
    std::string model;
    std::vector<std::string> truth;
    std::string out_dir = ".";
    CommonOpts common;
    DetectorOverrides det;
    SegOverrides seg;
};

void run_segment(const SegmentArgs& a) {
    if (!a.truth.empty() && a.truth.size() != a.images.size())
        throw UsageError("--truth count must match the number of images");
    Config cfg = a.common.make();
    a.det.apply(cfg);
    a.seg.apply(cfg);
    cfg.validate();

    const Classifier cls = load_classifier(a.model, cfg);
    const fs::path out_dir(a.out_dir);
    fs::create_directories(out_dir);

    std::vector<double> errors;
    for (std::size_t i = 0; i < a.images.size(); ++i) {
        const GrayImage img = load_pgm(a.images[i]);
        const FrameResult r = segment_frame(img, cls, cfg);
        if (r.features.empty())
            std::fprintf(stderr, "warning: %s: no features detected; map is all class 0\n",
                         a.images[i].c_str());
        write_segmentation(r.seg, out_dir, fs::path(a.images[i]).stem().string());
        if (!a.truth.empty())
            errors.push_back(segmentation_error(r.seg, load_label_map(a.truth[i])));
    }
    if (!errors.empty()) {
        const EvalStats stats = eval_stats(errors);
        save_eval_csv(errors, stats, (out_dir / "seg_stats.csv").string());
        print_stats_block(cls.name(), stats);
    }
}

struct TrackArgs {
    std::vector<std::string> frames;
    std::string model;
    std::string out_dir = ".";
    CommonOpts common;
    DetectorOverrides det;
    SegOverrides seg;
    std::optional<double> match_radius, match_theta;
};

void run_track(const TrackArgs& a) {
    if (a.frames.size() < 2)
        throw UsageError("track needs at least 2 frames");
    Config cfg = a.common.make();
    a.det.apply(cfg);
    a.seg.apply(cfg);
    if (a.match_radius)
        cfg.match_radius = *a.match_radius;
    if (a.match_theta)
        cfg.match_theta = *a.match_theta;
    cfg.validate();

    const Classifier cls = load_classifier(a.model, cfg);
    const fs::path out_dir(a.out_dir);
    fs::create_directories(out_dir);

    std::ofstream track_log(out_dir / "track_log.csv");
    std::ofstream pose_log(out_dir / "pose_log.csv");
    if (!track_log || !pose_log)
        throw std::runtime_error(a.out_dir + ": cannot open log files");
    track_log << "frame,detected,matched,inliers,ratio\n";
    pose_log << "t,x,y,z,qw,qx,qy,qz\n";
    char buf[256];

    PoseFilter filter(cfg.intrinsics(), cfg.pose);
    // Accumulated pose: camera k relative to frame 0 (unit-step translation
    // scale, as scale is unrecoverable from E).
    Eigen::Matrix3d r_abs = Eigen::Matrix3d::Identity();
    Eigen::Vector3d t_abs = Eigen::Vector3d::Zero();

    std::vector<Feature> prev;
    int prev_detected = 0;
    for (std::size_t k = 0; k < a.frames.size(); ++k) {
        const GrayImage img = load_pgm(a.frames[k]);
        std::vector<Feature> feats = extract(img, cfg.detector);
        const int detected = static_cast<int>(feats.size());

        std::size_t matched = 0, inliers = 0;
        double ratio = 0.0;
        if (k > 0) {
            const std::vector<Match> matches =
                match(prev, feats, cfg.match_radius, cfg.match_theta);
            matched = matches.size();
            transfer_memberships(matches, prev, feats);

            const double mean_detected = 0.5 * (prev_detected + detected);
            std::vector<Eigen::Vector2d> pp, pc;
            pp.reserve(matched);
            pc.reserve(matched);
            for (const Match& m : matches) {
                pp.emplace_back(prev[m.prev_index].point.x, prev[m.prev_index].point.y);
                pc.emplace_back(feats[m.curr_index].point.x, feats[m.curr_index].point.y);
            }
            try {
                const RansacResult rr =
                    ransac_f(pp, pc, cfg.ransac_iters, cfg.ransac_tol,
                             derive_seed(cfg.seed, "ransac:" + std::to_string(k)));
                inliers = rr.inliers.size();
                const Eigen::Matrix3d e = balance_essential(essential(rr.f, cfg.intrinsics()));
                std::vector<Eigen::Vector2d> ip, ic;
                for (std::size_t idx : rr.inliers) {
                    ip.push_back(pp[idx]);
                    ic.push_back(pc[idx]);
                }
                const RelativePose rel = decompose(e, ip, ic, cfg.intrinsics());
                r_abs = (rel.r * r_abs).eval();
                t_abs = (rel.r * t_abs + rel.t).eval();
                if (filter.initialized())
                    filter.predict(cfg.frame_dt);
                const Eigen::Vector3d p = filter.initialized() ? filter.position()
                                                               : t_abs;
                const Eigen::Vector4d q = filter.initialized() ? filter.quaternion()
                                                               : rotation_to_quat(r_abs);
                std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                              static_cast<double>(k) * cfg.frame_dt, p.x(), p.y(), p.z(), q(0),
                              q(1), q(2), q(3));
                pose_log << buf;
                filter.update(r_abs, t_abs);
            } catch (const std::exception& e) {
                std::fprintf(stderr, "frame %zu: tracking fell back to per-frame mode (%s)\n", k,
                             e.what());
            }
            if (mean_detected > 0.0)
                ratio = static_cast<double>(inliers) / mean_detected;
        }

        const FrameResult r = segment_frame(img, cls, cfg, std::move(feats));
        write_segmentation(r.seg, out_dir, "frame_" + zero_pad(static_cast<int>(k), 3));

        std::snprintf(buf, sizeof buf, "%zu,%d,%zu,%zu,%.6f\n", k, detected, matched, inliers,
                      ratio);
        track_log << buf;

        prev = std::move(r.features);
        prev_detected = detected;
    }
    std::printf("tracked %zu frames; logs in %s\n", a.frames.size(), a.out_dir.c_str());
}

struct BenchMatchArgs {
    std::vector<std::string> images;
    std::vector<std::string> variants;
    std::string out = "bench_match.csv";
    CommonOpts common;
};

// "name:threshold=...,octaves=...,layers=...,grid_cell=...,max_features=..."
DetectorParams parse_variant(const std::string& spec, const DetectorParams& base,
                             std::string& name) {
    const std::size_t colon = spec.find(':');
    name = spec.substr(0, colon);
    if (name.empty())
        throw UsageError("variant needs a name: \"" + spec + "\"");
    DetectorParams p = base;
    if (colon == std::string::npos)
        return p;
    std::string rest = spec.substr(colon + 1);
    std::size_t pos = 0;
    while (pos < rest.size()) {
        std::size_t comma = rest.find(',', pos);
        if (comma == std::string::npos)
            comma = rest.size();
        const std::string kv = rest.substr(pos, comma - pos);
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw UsageError("variant entry \"" + kv + "\" is not key=value");
        const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
        try {
            if (key == "threshold")
                p.threshold = std::stod(val);
            else if (key == "octaves")
                p.octaves = std::stoi(val);
            else if (key == "layers")
                p.layers_per_octave = std::stoi(val);
            else if (key == "grid_cell")
                p.grid_cell = std::stoi(val);
            else if (key == "max_features")
                p.max_features = std::stoi(val);
            else
                throw UsageError("unknown variant key \"" + key + "\"");
        } catch (const std::invalid_argument&) {
            throw UsageError("variant value \"" + val + "\" for " + key + " is not a number");
        }
        pos = comma + 1;
    }
    return p;
}

void run_bench_match(const BenchMatchArgs& a) {
    if (a.images.size() < 2 || a.images.size() % 2 != 0)
        throw UsageError("bench-match needs an even number of images (pairs)");
    const Config cfg = a.common.make();

    std::vector<std::pair<std::string, DetectorParams>> variants;
    if (a.variants.empty()) {
        variants.emplace_back("default", cfg.detector);
    } else {
        for (const std::string& v : a.variants) {
            std::string name;
            DetectorParams p = parse_variant(v, cfg.detector, name);
            variants.emplace_back(name, p);
        }
    }

    if (fs::path(a.out).has_parent_path())
        fs::create_directories(fs::path(a.out).parent_path());
    std::ofstream out(a.out);
    if (!out)
        throw std::runtime_error(a.out + ": cannot open for writing");
    out << "impl,detected1,detected2,matched,inliers,ratio\n";

    char buf[192];
    for (std::size_t pair = 0; pair + 1 < a.images.size(); pair += 2) {
        const GrayImage img1 = load_pgm(a.images[pair]);
        const GrayImage img2 = load_pgm(a.images[pair + 1]);
        for (const auto& [name, det] : variants) {
            const std::vector<Feature> f1 = extract(img1, det);
            const std::vector<Feature> f2 = extract(img2, det);
            const std::vector<Match> matches = match(f1, f2, cfg.match_radius, cfg.match_theta);
            std::size_t inliers = 0;
            if (matches.size() >= 8) {
                std::vector<Eigen::Vector2d> pp, pc;
                for (const Match& m : matches) {
                    pp.emplace_back(f1[m.prev_index].point.x, f1[m.prev_index].point.y);
                    pc.emplace_back(f2[m.curr_index].point.x, f2[m.curr_index].point.y);
                }
                try {
                    inliers = ransac_f(pp, pc, cfg.ransac_iters, cfg.ransac_tol,
                                       derive_seed(cfg.seed, "bench:" + std::to_string(pair) +
                                                                 ":" + name))
                                  .inliers.size();
                } catch (const std::exception&) {
                    inliers = 0; // no consensus: report the RANSAC floor
                }
            }
            const double mean_detected = 0.5 * static_cast<double>(f1.size() + f2.size());
            const double ratio =
                mean_detected > 0.0 ? static_cast<double>(inliers) / mean_detected : 0.0;
            std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%zu,%zu,%.6f\n", name.c_str(), f1.size(),
                          f2.size(), matches.size(), inliers, ratio);
            out << buf;
            std::fputs(buf, stdout);
        }
    }
}

struct EvalArgs {
    std::vector<std::string> segs;
    std::vector<std::string> truths;
    std::string out = "eval_stats.csv";
};

void run_eval(const EvalArgs& a) {
    if (a.segs.empty() || a.segs.size() != a.truths.size())
        throw UsageError("--seg and --truth need the same (non-zero) count");
    std::vector<double> errors;
    for (std::size_t i = 0; i < a.segs.size(); ++i) {
        const SegmentationMap seg = load_segmentation_pgm(a.segs[i]);
        const LabelMap truth = load_label_map(a.truths[i]);
        errors.push_back(segmentation_error(seg, truth));
    }
    const EvalStats stats = eval_stats(errors);
    if (fs::path(a.out).has_parent_path())
        fs::create_directories(fs::path(a.out).parent_path());
    save_eval_csv(errors, stats, a.out);
    print_stats_block("eval", stats);
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"terrain texture segmentation and tracking toolkit"};
    app.require_subcommand(1);

    GenMosaicArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-mosaic", "generate synthetic terrain mosaics");
    gen_cmd->add_option("--out", gen.out_prefix, "output path prefix")->required();
    gen_cmd->add_option("--count", gen.count, "number of mosaics")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--sequence", gen.sequence, "emit an N-frame tracking sequence instead");
    gen_cmd->add_option("--width", gen.width, "frame width")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--height", gen.height, "frame height")->check(CLI::PositiveNumber);
    gen.common.attach(gen_cmd);

    ExtractArgs ext;
    auto* ext_cmd = app.add_subcommand("extract", "detect features and write a CSV");
    ext_cmd->add_option("images", ext.images, "input PGM images")
        ->required()
        ->check(CLI::ExistingFile);
    ext_cmd->add_option("--labels", ext.labels, "label map PGM per image (same order)")
        ->check(CLI::ExistingFile);
    ext_cmd->add_option("--out", ext.out, "output feature CSV");
    ext.common.attach(ext_cmd);
    ext.det.attach(ext_cmd);

    TrainArgs trn;
    auto* trn_cmd = app.add_subcommand("train", "fit a classifier from labeled features");
    trn_cmd->add_option("--features", trn.features, "labeled feature CSV")
        ->required()
        ->check(CLI::ExistingFile);
    trn_cmd->add_option("--out-dir", trn.out_dir, "output directory");
    trn_cmd->add_option("--classifier", trn.classifier, "nn | mlp")
        ->check(CLI::IsMember({"nn", "mlp"}));
    trn_cmd->add_option("--algo", trn.algorithm, "rprop | lm")
        ->check(CLI::IsMember({"rprop", "lm"}));
    trn_cmd->add_option("--epochs", trn.epochs, "training epoch cap");
    trn_cmd->add_option("--hidden1", trn.hidden1, "first hidden layer width");
    trn_cmd->add_option("--hidden2", trn.hidden2, "second hidden layer width");
    trn_cmd->add_option("--tau", trn.tau, "NN membership bandwidth (0 = auto)");
    trn.common.attach(trn_cmd);

    SegmentArgs seg;
    auto* seg_cmd = app.add_subcommand("segment", "classify features and build class maps");
    seg_cmd->add_option("images", seg.images, "input PGM images")
        ->required()
        ->check(CLI::ExistingFile);
    seg_cmd->add_option("--model", seg.model, "model file (.csv = NN, .json = MLP)")
        ->required()
        ->check(CLI::ExistingFile);
    seg_cmd->add_option("--truth", seg.truth, "ground-truth label maps (same order)")
        ->check(CLI::ExistingFile);
    seg_cmd->add_option("--out-dir", seg.out_dir, "output directory");
    seg.common.attach(seg_cmd);
    seg.det.attach(seg_cmd);
    seg.seg.attach(seg_cmd);

    TrackArgs trk;
    auto* trk_cmd = app.add_subcommand("track", "track a frame sequence");
    trk_cmd->add_option("frames", trk.frames, "frame PGMs in order")
        ->required()
        ->check(CLI::ExistingFile);
    trk_cmd->add_option("--model", trk.model, "model file (.csv = NN, .json = MLP)")
        ->required()
        ->check(CLI::ExistingFile);
    trk_cmd->add_option("--out-dir", trk.out_dir, "output directory");
    trk_cmd->add_option("--match-radius", trk.match_radius, "match search radius (px)");
    trk_cmd->add_option("--match-theta", trk.match_theta, "match descriptor threshold");
    trk.common.attach(trk_cmd);
    trk.det.attach(trk_cmd);
    trk.seg.attach(trk_cmd);

    BenchMatchArgs bench;
    auto* bench_cmd = app.add_subcommand("bench-match", "pairwise matching benchmark table");
    bench_cmd->add_option("images", bench.images, "images, consecutive pairs")
        ->required()
        ->check(CLI::ExistingFile);
    bench_cmd->add_option("--variant", bench.variants,
                          "detector variant name:key=value,... (repeatable)");
    bench_cmd->add_option("--out", bench.out, "output CSV");
    bench.common.attach(bench_cmd);

    EvalArgs evl;
    auto* evl_cmd = app.add_subcommand("eval", "segmentation error against ground truth");
    evl_cmd->add_option("--seg", evl.segs, "segmentation PGMs")
        ->required()
        ->check(CLI::ExistingFile);
    evl_cmd->add_option("--truth", evl.truths, "label map PGMs (same order)")
        ->required()
        ->check(CLI::ExistingFile);
    evl_cmd->add_option("--out", evl.out, "output CSV");

    gen_cmd->callback([&] { run_gen_mosaic(gen); });
    ext_cmd->callback([&] { run_extract(ext); });
    trn_cmd->callback([&] { run_train(trn); });
    seg_cmd->callback([&] { run_segment(seg); });
    trk_cmd->callback([&] { run_track(trk); });
    bench_cmd->callback([&] { run_bench_match(bench); });
    evl_cmd->callback([&] { run_eval(evl); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}

} // namespace terrasurf
