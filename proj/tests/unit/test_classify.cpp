#include <doctest.h>

#include "helpers.hpp"
#include "terrasurf/classify.hpp"
#include "terrasurf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <vector>

using namespace terrasurf;
using testutil::TempDir;

namespace {

Feature make_feature(int label, const Descriptor36& d) {
    Feature f;
    f.label = label;
    f.desc = d;
    return f;
}

Descriptor36 random_desc(Rng& rng) {
    Descriptor36 d;
    for (double& v : d)
        v = rng.uniform(-1.0, 1.0);
    return d;
}

// Two informative coordinates carry an XOR pattern; the rest stay zero.
TrainingSet xor_fixture(int per_cluster, std::uint64_t seed) {
    Rng rng(seed);
    TrainingSet ts;
    const double corners[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    const int labels[4] = {1, 2, 2, 1};
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < per_cluster; ++i) {
            Descriptor36 d{};
            d[0] = corners[c][0] + 0.05 * rng.normal();
            d[1] = corners[c][1] + 0.05 * rng.normal();
            ts.features.push_back(make_feature(labels[c], d));
        }
    return ts;
}

// Two tight clusters separated along coordinate 0 - linearly separable.
TrainingSet linear_fixture(std::uint64_t seed) {
    Rng rng(seed);
    TrainingSet ts;
    for (int i = 0; i < 6; ++i) {
        Descriptor36 a{};
        a[0] = -1.0 + 0.1 * rng.uniform();
        a[1] = rng.uniform(-0.2, 0.2);
        ts.features.push_back(make_feature(1, a));
        Descriptor36 b{};
        b[0] = 1.0 - 0.1 * rng.uniform();
        b[1] = rng.uniform(-0.2, 0.2);
        ts.features.push_back(make_feature(2, b));
    }
    return ts;
}

TrainingSet random_training_set(Rng& rng, int n) {
    TrainingSet ts;
    for (int i = 0; i < n; ++i)
        ts.features.push_back(make_feature(1 + static_cast<int>(rng.uniform_index(3)),
                                           random_desc(rng)));
    return ts;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

} // namespace

TEST_CASE("one_hot encodes labels and rejects out-of-range ones") {
    CHECK(one_hot(1) == Membership3{1.0, 0.0, 0.0});
    CHECK(one_hot(2) == Membership3{0.0, 1.0, 0.0});
    CHECK(one_hot(3) == Membership3{0.0, 0.0, 1.0});
    CHECK_THROWS_AS(one_hot(0), std::invalid_argument);
    CHECK_THROWS_AS(one_hot(4), std::invalid_argument);
}

TEST_CASE("the canonical architecture has exactly 2363 weights") {
    CHECK(make_mlp(36, 40, 20).weight_count() == 2363);
    // Fewer weights than descriptor components once the set exceeds 66 features.
    CHECK(2363 < 36 * 67);
}

TEST_CASE("init_mlp is seed-deterministic with fan-in bounded weights") {
    const MlpModel a = init_mlp(36, 8, 4, 99);
    const MlpModel b = init_mlp(36, 8, 4, 99);
    CHECK(a.to_vector() == b.to_vector());
    const MlpModel c = init_mlp(36, 8, 4, 100);
    CHECK(a.to_vector() != c.to_vector());

    CHECK(a.w1.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(36.0));
    CHECK(a.w2.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(8.0));
    CHECK(a.w3.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(4.0));
}

TEST_CASE("mlp_forward with zero weights is constant across inputs") {
    const MlpModel zero = make_mlp(36, 5, 4);
    Rng rng(3);
    const Membership3 first = mlp_forward(zero, random_desc(rng));
    CHECK(first == Membership3{0.0, 0.0, 0.0});
    for (int i = 0; i < 10; ++i)
        CHECK(mlp_forward(zero, random_desc(rng)) == first);
}

TEST_CASE("mlp_forward matches the closed-form sigmoid composition") {
    MlpModel m = make_mlp(36, 1, 1);
    m.w1(0, 0) = 2.0;
    m.w1(0, 36) = 0.5; // bias
    m.w2(0, 0) = 1.5;
    m.w2(0, 1) = -0.25;
    m.w3(0, 0) = 1.0;
    m.w3(0, 1) = 0.1;
    m.w3(1, 0) = -1.0;
    m.w3(1, 1) = 0.9;
    m.w3(2, 0) = 0.3;
    m.w3(2, 1) = 0.2;

    Descriptor36 d{};
    d[0] = 0.4;
    const double h1 = sigmoid(2.0 * 0.4 + 0.5);
    const double h2 = sigmoid(1.5 * h1 - 0.25);
    const Membership3 raw = mlp_forward_raw(m, d);
    CHECK(raw[0] == doctest::Approx(h2 + 0.1).epsilon(1e-15));
    CHECK(raw[1] == doctest::Approx(-h2 + 0.9).epsilon(1e-15));
    CHECK(raw[2] == doctest::Approx(0.3 * h2 + 0.2).epsilon(1e-15));
}

TEST_CASE("mlp_forward clamps memberships to [0,1]") {
    Rng rng(5);
    for (std::uint64_t seed : {1, 2, 3}) {
        MlpModel m = init_mlp(36, 6, 5, seed);
        m.w3 *= 50.0; // force raw outputs outside the unit interval
        for (int i = 0; i < 20; ++i) {
            const Membership3 out = mlp_forward(m, random_desc(rng));
            for (double v : out) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        }
    }
}

TEST_CASE("mlp_loss analytic cases and sample-order invariance") {
    // Constant-output model that exactly matches a one-class training set.
    MlpModel perfect = make_mlp(36, 4, 3);
    perfect.w3(1, 3) = 1.0; // bias column: output is exactly (0,1,0)
    Rng rng(7);
    TrainingSet ones;
    for (int i = 0; i < 4; ++i)
        ones.features.push_back(make_feature(2, random_desc(rng)));
    CHECK(mlp_loss(perfect, ones) == 0.0);

    // Zero model outputs (0,0,0); one sample of class 1 gives |e1|^2 = 1.
    const MlpModel zero = make_mlp(36, 4, 3);
    TrainingSet one;
    one.features.push_back(make_feature(1, random_desc(rng)));
    CHECK(mlp_loss(zero, one) == 1.0);

    const MlpModel m = init_mlp(36, 6, 4, 13);
    TrainingSet ts = random_training_set(rng, 12);
    const double before = mlp_loss(m, ts);
    std::reverse(ts.features.begin(), ts.features.end());
    CHECK(mlp_loss(m, ts) == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("mlp_gradient matches central finite differences") {
    Rng rng(11);
    double max_rel = 0.0;
    for (int draw = 0; draw < 10; ++draw) {
        const MlpModel m = init_mlp(36, 6, 4, 1000 + draw);
        const TrainingSet ts = random_training_set(rng, 5);
        const Eigen::VectorXd g = mlp_gradient(m, ts).to_vector();
        const Eigen::VectorXd w = m.to_vector();
        const double h = 1e-6;
        for (int i = 0; i < w.size(); ++i) {
            MlpModel plus = m, minus = m;
            Eigen::VectorXd wp = w, wm = w;
            wp(i) += h;
            wm(i) -= h;
            plus.from_vector(wp);
            minus.from_vector(wm);
            const double fd = (mlp_loss(plus, ts) - mlp_loss(minus, ts)) / (2.0 * h);
            // Mixed relative/absolute: the FD probe itself carries ~1e-9 of
            // roundoff, so components below O(1) are compared absolutely.
            const double rel = std::abs(g(i) - fd) / std::max(1.0, std::abs(fd));
            max_rel = std::max(max_rel, rel);
        }
    }
    CHECK(max_rel <= 1e-5);
}

TEST_CASE("mlp_gradient is exactly zero at a perfect fit and linear in the data") {
    MlpModel perfect = make_mlp(36, 4, 3);
    perfect.w3(1, 3) = 1.0;
    Rng rng(17);
    TrainingSet ones;
    for (int i = 0; i < 4; ++i)
        ones.features.push_back(make_feature(2, random_desc(rng)));
    const Eigen::VectorXd g0 = mlp_gradient(perfect, ones).to_vector();
    CHECK(g0.cwiseAbs().maxCoeff() == 0.0);

    const MlpModel m = init_mlp(36, 5, 4, 19);
    const TrainingSet ts = random_training_set(rng, 8);
    TrainingSet doubled = ts;
    doubled.features.insert(doubled.features.end(), ts.features.begin(), ts.features.end());
    const Eigen::VectorXd g = mlp_gradient(m, ts).to_vector();
    const Eigen::VectorXd g2 = mlp_gradient(m, doubled).to_vector();
    CHECK((g2 - 2.0 * g).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, g.cwiseAbs().maxCoeff()));
}

TEST_CASE("train_rprop solves the embedded-XOR fixture deterministically") {
    const TrainingSet ts = xor_fixture(10, derive_seed(42, "xor"));
    TrainConfig cfg;
    cfg.hidden1 = 8;
    cfg.hidden2 = 4;
    cfg.max_epochs = 2000;
    cfg.seed = 7;
    const TrainResult r = train_rprop(ts, cfg);
    CHECK(r.best_loss <= 0.05 * static_cast<double>(ts.features.size()));
    CHECK(r.best_loss == mlp_loss(r.model, ts));

    double log_min = r.log.front().second;
    for (const auto& [epoch, loss] : r.log)
        log_min = std::min(log_min, loss);
    CHECK(r.best_loss == log_min); // best model is the best logged loss

    const TrainResult again = train_rprop(ts, cfg);
    CHECK(again.model.to_vector() == r.model.to_vector());
    CHECK(again.best_loss == r.best_loss);
    REQUIRE(again.log.size() == r.log.size());
}

TEST_CASE("train_rprop aborts when the loss diverges") {
    const TrainingSet ts = linear_fixture(derive_seed(42, "diverge"));
    TrainConfig cfg;
    cfg.hidden1 = 4;
    cfg.hidden2 = 3;
    cfg.max_epochs = 5;
    cfg.delta0 = 1e155; // first step catapults the weights; loss overflows
    cfg.delta_max = 1e300;
    CHECK_THROWS_AS(train_rprop(ts, cfg), std::runtime_error);
}

TEST_CASE("train_lm converges on the linear fixture within 20 iterations") {
    const TrainingSet ts = linear_fixture(derive_seed(42, "linear"));
    TrainConfig cfg;
    cfg.algorithm = TrainAlgorithm::Lm;
    cfg.hidden1 = 4;
    cfg.hidden2 = 3;
    cfg.max_epochs = 20;
    cfg.target_error = 1e-12;
    cfg.seed = 1;
    const TrainResult r = train_lm(ts, cfg);
    CHECK(r.best_loss < 1e-6);
    CHECK(r.log.size() <= 21); // initial entry + at most 20 accepted steps
    for (std::size_t i = 1; i < r.log.size(); ++i)
        CHECK(r.log[i].second < r.log[i - 1].second); // accepted steps strictly decrease

    const TrainResult again = train_lm(ts, cfg);
    CHECK(again.model.to_vector() == r.model.to_vector());
}

TEST_CASE("a heavily damped LM step follows the negative gradient") {
    const TrainingSet ts = linear_fixture(derive_seed(42, "lmdir"));
    TrainConfig cfg;
    cfg.algorithm = TrainAlgorithm::Lm;
    cfg.hidden1 = 4;
    cfg.hidden2 = 3;
    cfg.max_epochs = 1;
    cfg.seed = 11;
    cfg.lambda0 = 1e10;
    const MlpModel start = init_mlp(36, 4, 3, cfg.seed);
    const Eigen::VectorXd g = mlp_gradient(start, ts).to_vector();
    const TrainResult r = train_lm(ts, cfg);
    const Eigen::VectorXd step = r.model.to_vector() - start.to_vector();
    REQUIRE(step.norm() > 0.0);
    CHECK(-step.dot(g) / (step.norm() * g.norm()) > 0.999);
}

TEST_CASE("train_lm enforces the Jacobian memory budget") {
    const TrainingSet ts = linear_fixture(derive_seed(42, "budget"));
    TrainConfig cfg;
    cfg.algorithm = TrainAlgorithm::Lm;
    cfg.max_jacobian_mb = 1e-4;
    CHECK_THROWS_AS(train_lm(ts, cfg), std::invalid_argument);
}

TEST_CASE("MLP model files round-trip exactly") {
    TempDir dir("classify");
    const MlpModel m = init_mlp(36, 7, 5, 23);
    const std::string path = dir.file("model.json");
    save_mlp(m, path);
    const MlpModel back = load_mlp(path);
    CHECK(back.n_in == m.n_in);
    CHECK(back.n_h1 == m.n_h1);
    CHECK(back.n_h2 == m.n_h2);
    CHECK(back.to_vector() == m.to_vector());

    const std::vector<std::pair<int, double>> log = {{0, 3.5}, {1, 1.25}, {2, 0.125}};
    const std::string log_path = dir.file("log.csv");
    save_train_log(log, log_path);
    std::ifstream in(log_path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "epoch,loss");
    int rows = 0;
    while (std::getline(in, line))
        if (!line.empty())
            ++rows;
    CHECK(rows == 3);
}

TEST_CASE("nn model tau defaults to the median 1-NN distance") {
    TrainingSet ts;
    for (double pos : {0.0, 1.0, 3.0, 6.0}) {
        Descriptor36 d{};
        d[0] = pos;
        ts.features.push_back(make_feature(1, d));
    }
    // 1-NN distances are {1,1,2,3}; even count averages the middle pair.
    CHECK(median_nn_distance(ts.features) == 1.5);
    const NnModel m = make_nn_model(ts);
    CHECK(m.tau == 1.5);
    const NnModel overridden = make_nn_model(ts, 0.5);
    CHECK(overridden.tau == 0.5);
}

TEST_CASE("nn_membership is one-hot-strength at the nearest class") {
    TrainingSet ts;
    Descriptor36 a{};
    a[0] = 1.0;
    ts.features.push_back(make_feature(2, a));
    Descriptor36 b{};
    b[0] = -1.0;
    ts.features.push_back(make_feature(3, b));
    const NnModel m = make_nn_model(ts, 1.0);

    CHECK(nn_membership(a, m) == Membership3{0.0, 1.0, 0.0}); // exact hit, strength 1

    // Strength decays strictly with distance from the nearest feature.
    double last = 2.0;
    for (double dist : {0.1, 0.3, 0.6, 0.9}) {
        Descriptor36 q{};
        q[0] = 1.0 + dist;
        const Membership3 v = nn_membership(q, m);
        CHECK(v[1] > 0.0);
        CHECK(v[1] < last);
        CHECK(v[0] == 0.0);
        CHECK(v[2] == 0.0);
        last = v[1];
    }
}

TEST_CASE("nn_membership matches a linear-scan oracle and breaks ties low") {
    Rng rng(27);
    TrainingSet ts = random_training_set(rng, 30);
    const NnModel m = make_nn_model(ts, 0.8);
    for (int t = 0; t < 20; ++t) {
        const Descriptor36 q = random_desc(rng);
        std::size_t best = 0;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < ts.features.size(); ++i) {
            double d2 = 0.0;
            for (int k = 0; k < kDescriptorDim; ++k) {
                const double d = q[k] - ts.features[i].desc[k];
                d2 += d * d;
            }
            if (d2 < best_d2) {
                best_d2 = d2;
                best = i;
            }
        }
        const Membership3 v = nn_membership(q, m);
        const int cls = ts.features[best].label;
        CHECK(v[cls - 1] == doctest::Approx(std::exp(-best_d2 / (0.8 * 0.8))).epsilon(1e-12));
        for (int c = 0; c < 3; ++c)
            if (c != cls - 1)
                CHECK(v[c] == 0.0);
    }

    // Equal distances resolve to the lowest index.
    TrainingSet tied;
    Descriptor36 d{};
    d[5] = 0.25;
    tied.features.push_back(make_feature(1, d));
    tied.features.push_back(make_feature(3, d));
    const NnModel tiedm = make_nn_model(tied, 1.0);
    CHECK(nn_membership(d, tiedm) == Membership3{1.0, 0.0, 0.0});

    CHECK_THROWS_AS(nn_membership(d, NnModel{}), std::invalid_argument);
}
