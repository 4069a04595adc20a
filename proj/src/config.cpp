#include "terrasurf/config.hpp"

#include <json.hpp>

#include <fstream>
#include <initializer_list>
#include <stdexcept>

namespace terrasurf {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a)
                ok = true;
        if (!ok)
            throw std::invalid_argument("config: unknown key \"" + key + "\" in " + section);
    }
}

TrainAlgorithm algo_from_string(const std::string& s) {
    if (s == "rprop")
        return TrainAlgorithm::Rprop;
    if (s == "lm")
        return TrainAlgorithm::Lm;
    throw std::invalid_argument("config: train.algorithm must be \"rprop\" or \"lm\"");
}

std::string algo_to_string(TrainAlgorithm a) {
    return a == TrainAlgorithm::Rprop ? "rprop" : "lm";
}

} // namespace

void Config::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
    if (detector.octaves < 1 || detector.octaves > 5)
        fail("detector.octaves must be in 1..5");
    if (detector.layers_per_octave < 3)
        fail("detector.layers_per_octave must be >= 3");
    if (detector.threshold < 0.0)
        fail("detector.threshold must be >= 0");
    if (detector.grid_cell < 1)
        fail("detector.grid_cell must be >= 1");
    if (detector.max_features < 1)
        fail("detector.max_features must be >= 1");
    if (classifier != "nn" && classifier != "mlp")
        fail("classifier must be \"nn\" or \"mlp\"");
    if (nn_tau < 0.0)
        fail("nn_tau must be >= 0");
    if (train.max_epochs < 1)
        fail("train.max_epochs must be >= 1");
    if (train.target_error < 0.0)
        fail("train.target_error must be >= 0");
    if (train.eta_plus <= 1.0)
        fail("train.eta_plus must be > 1");
    if (train.eta_minus <= 0.0 || train.eta_minus >= 1.0)
        fail("train.eta_minus must be in (0,1)");
    if (train.delta0 <= 0.0 || train.delta_min <= 0.0 || train.delta_max < train.delta_min)
        fail("train.delta parameters inconsistent");
    if (train.lambda0 <= 0.0 || train.lambda_scale <= 1.0 || train.lambda_max < train.lambda0)
        fail("train.lambda parameters inconsistent");
    if (train.max_jacobian_mb <= 0.0)
        fail("train.max_jacobian_mb must be > 0");
    if (train.hidden1 < 1 || train.hidden2 < 1)
        fail("train.hidden sizes must be >= 1");
    if (!(seg.radius > 0.0) || !(seg.sigma > 0.0))
        fail("segment.radius and segment.sigma must be > 0");
    if (seg.threshold < 0.0 || seg.threshold > 1.0)
        fail("segment.threshold must be in [0,1]");
    if (!(match_radius > 0.0) || !(match_theta > 0.0))
        fail("track.match parameters must be > 0");
    if (ransac_iters < 1 || !(ransac_tol > 0.0))
        fail("track.ransac parameters invalid");
    if (!(frame_dt > 0.0))
        fail("track.frame_dt must be > 0");
    if (pose.pos_process_noise < 0.0 || pose.pos_meas_noise < 0.0 ||
        pose.ori_process_noise < 0.0 || pose.ori_meas_noise < 0.0 || pose.init_cov < 0.0)
        fail("track.pose noise parameters must be >= 0");
    if (!(fx > 0.0) || !(fy > 0.0))
        fail("intrinsics focal lengths must be > 0");
}

Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error(path + ": cannot open");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }

    Config c;
    check_keys(j, "top level",
               {"seed", "detector", "classifier", "nn_tau", "train", "filter", "segment", "track",
                "intrinsics"});
    c.seed = j.value("seed", c.seed);
    c.classifier = j.value("classifier", c.classifier);
    c.nn_tau = j.value("nn_tau", c.nn_tau);

    if (j.contains("detector")) {
        const json& d = j.at("detector");
        check_keys(d, "detector",
                   {"octaves", "layers_per_octave", "threshold", "grid_cell", "max_features"});
        c.detector.octaves = d.value("octaves", c.detector.octaves);
        c.detector.layers_per_octave = d.value("layers_per_octave", c.detector.layers_per_octave);
        c.detector.threshold = d.value("threshold", c.detector.threshold);
        c.detector.grid_cell = d.value("grid_cell", c.detector.grid_cell);
        c.detector.max_features = d.value("max_features", c.detector.max_features);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        check_keys(t, "train",
                   {"algorithm", "max_epochs", "target_error", "eta_plus", "eta_minus", "delta0",
                    "delta_min", "delta_max", "lambda0", "lambda_scale", "lambda_max",
                    "max_jacobian_mb", "hidden1", "hidden2"});
        c.train.algorithm = algo_from_string(t.value("algorithm", algo_to_string(c.train.algorithm)));
        c.train.max_epochs = t.value("max_epochs", c.train.max_epochs);
        c.train.target_error = t.value("target_error", c.train.target_error);
        c.train.eta_plus = t.value("eta_plus", c.train.eta_plus);
        c.train.eta_minus = t.value("eta_minus", c.train.eta_minus);
        c.train.delta0 = t.value("delta0", c.train.delta0);
        c.train.delta_min = t.value("delta_min", c.train.delta_min);
        c.train.delta_max = t.value("delta_max", c.train.delta_max);
        c.train.lambda0 = t.value("lambda0", c.train.lambda0);
        c.train.lambda_scale = t.value("lambda_scale", c.train.lambda_scale);
        c.train.lambda_max = t.value("lambda_max", c.train.lambda_max);
        c.train.max_jacobian_mb = t.value("max_jacobian_mb", c.train.max_jacobian_mb);
        c.train.hidden1 = t.value("hidden1", c.train.hidden1);
        c.train.hidden2 = t.value("hidden2", c.train.hidden2);
    }
    if (j.contains("filter")) {
        const json& f = j.at("filter");
        check_keys(f, "filter", {"k", "q", "dense_k"});
        c.filter_k = f.value("k", c.filter_k);
        c.filter_q = f.value("q", c.filter_q);
        c.dense_k = f.value("dense_k", c.dense_k);
    }
    if (j.contains("segment")) {
        const json& s = j.at("segment");
        check_keys(s, "segment", {"radius", "sigma", "threshold", "sigma_squared"});
        c.seg.radius = s.value("radius", c.seg.radius);
        c.seg.sigma = s.value("sigma", c.seg.sigma);
        c.seg.threshold = s.value("threshold", c.seg.threshold);
        c.seg.sigma_squared = s.value("sigma_squared", c.seg.sigma_squared);
    }
    if (j.contains("track")) {
        const json& t = j.at("track");
        check_keys(t, "track",
                   {"match_radius", "match_theta", "ransac_iters", "ransac_tol", "frame_dt",
                    "pos_process_noise", "pos_meas_noise", "ori_process_noise", "ori_meas_noise",
                    "init_cov"});
        c.match_radius = t.value("match_radius", c.match_radius);
        c.match_theta = t.value("match_theta", c.match_theta);
        c.ransac_iters = t.value("ransac_iters", c.ransac_iters);
        c.ransac_tol = t.value("ransac_tol", c.ransac_tol);
        c.frame_dt = t.value("frame_dt", c.frame_dt);
        c.pose.pos_process_noise = t.value("pos_process_noise", c.pose.pos_process_noise);
        c.pose.pos_meas_noise = t.value("pos_meas_noise", c.pose.pos_meas_noise);
        c.pose.ori_process_noise = t.value("ori_process_noise", c.pose.ori_process_noise);
        c.pose.ori_meas_noise = t.value("ori_meas_noise", c.pose.ori_meas_noise);
        c.pose.init_cov = t.value("init_cov", c.pose.init_cov);
    }
    if (j.contains("intrinsics")) {
        const json& w = j.at("intrinsics");
        check_keys(w, "intrinsics", {"fx", "fy", "cx", "cy", "skew"});
        c.fx = w.value("fx", c.fx);
        c.fy = w.value("fy", c.fy);
        c.cx = w.value("cx", c.cx);
        c.cy = w.value("cy", c.cy);
        c.skew = w.value("skew", c.skew);
    }

    c.validate();
    return c;
}

void save_config(const Config& cfg, const std::string& path) {
    json j;
    j["seed"] = cfg.seed;
    j["detector"] = {{"octaves", cfg.detector.octaves},
                     {"layers_per_octave", cfg.detector.layers_per_octave},
                     {"threshold", cfg.detector.threshold},
                     {"grid_cell", cfg.detector.grid_cell},
                     {"max_features", cfg.detector.max_features}};
    j["classifier"] = cfg.classifier;
    j["nn_tau"] = cfg.nn_tau;
    j["train"] = {{"algorithm", algo_to_string(cfg.train.algorithm)},
                  {"max_epochs", cfg.train.max_epochs},
                  {"target_error", cfg.train.target_error},
                  {"eta_plus", cfg.train.eta_plus},
                  {"eta_minus", cfg.train.eta_minus},
                  {"delta0", cfg.train.delta0},
                  {"delta_min", cfg.train.delta_min},
                  {"delta_max", cfg.train.delta_max},
                  {"lambda0", cfg.train.lambda0},
                  {"lambda_scale", cfg.train.lambda_scale},
                  {"lambda_max", cfg.train.lambda_max},
                  {"max_jacobian_mb", cfg.train.max_jacobian_mb},
                  {"hidden1", cfg.train.hidden1},
                  {"hidden2", cfg.train.hidden2}};
    j["filter"] = {{"k", cfg.filter_k}, {"q", cfg.filter_q}, {"dense_k", cfg.dense_k}};
    j["segment"] = {{"radius", cfg.seg.radius},
                    {"sigma", cfg.seg.sigma},
                    {"threshold", cfg.seg.threshold},
                    {"sigma_squared", cfg.seg.sigma_squared}};
    j["track"] = {{"match_radius", cfg.match_radius},
                  {"match_theta", cfg.match_theta},
                  {"ransac_iters", cfg.ransac_iters},
                  {"ransac_tol", cfg.ransac_tol},
                  {"frame_dt", cfg.frame_dt},
                  {"pos_process_noise", cfg.pose.pos_process_noise},
                  {"pos_meas_noise", cfg.pose.pos_meas_noise},
                  {"ori_process_noise", cfg.pose.ori_process_noise},
                  {"ori_meas_noise", cfg.pose.ori_meas_noise},
                  {"init_cov", cfg.pose.init_cov}};
    j["intrinsics"] = {
        {"fx", cfg.fx}, {"fy", cfg.fy}, {"cx", cfg.cx}, {"cy", cfg.cy}, {"skew", cfg.skew}};
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error(path + ": cannot open for writing");
    out << j.dump(2) << "\n";
}

} // namespace terrasurf
