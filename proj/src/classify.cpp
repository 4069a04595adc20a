#include "terrasurf/classify.hpp"

#include "terrasurf/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace terrasurf {

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
    return z.unaryExpr([](double v) { return sigmoid(v); });
}

// Appends a row of ones (bias input) below m.
Eigen::MatrixXd augment(const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out(m.rows() + 1, m.cols());
    out.topRows(m.rows()) = m;
    out.row(m.rows()).setOnes();
    return out;
}

struct ForwardCache {
    Eigen::MatrixXd x_aug;  // (n_in+1) x N
    Eigen::MatrixXd a1_aug; // (n_h1+1) x N
    Eigen::MatrixXd a2_aug; // (n_h2+1) x N
    Eigen::MatrixXd y;      // 3 x N, linear outputs
};

ForwardCache forward_batch(const MlpModel& m, const Eigen::MatrixXd& x) {
    ForwardCache c;
    c.x_aug = augment(x);
    c.a1_aug = augment(sigmoid(m.w1 * c.x_aug));
    c.a2_aug = augment(sigmoid(m.w2 * c.a1_aug));
    c.y = m.w3 * c.a2_aug;
    return c;
}

void design_matrices(const TrainingSet& ts, Eigen::MatrixXd& x, Eigen::MatrixXd& t) {
    const Eigen::Index n = static_cast<Eigen::Index>(ts.features.size());
    if (n == 0)
        throw std::invalid_argument("mlp: empty training set");
    x.resize(kDescriptorDim, n);
    t.resize(kNumClasses, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Feature& f = ts.features[static_cast<std::size_t>(i)];
        for (int d = 0; d < kDescriptorDim; ++d)
            x(d, i) = f.desc[d];
        const Membership3 target = one_hot(f.label);
        for (int c = 0; c < kNumClasses; ++c)
            t(c, i) = target[c];
    }
}

// Derivative of the sigmoid from its activation value a = sigma(z).
Eigen::MatrixXd dsigmoid(const Eigen::MatrixXd& a) {
    return (a.array() * (1.0 - a.array())).matrix();
}

void append_row_major(const Eigen::MatrixXd& m, Eigen::VectorXd& v, Eigen::Index& pos) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            v(pos++) = m(r, c);
}

void take_row_major(Eigen::MatrixXd& m, const Eigen::VectorXd& v, Eigen::Index& pos) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            m(r, c) = v(pos++);
}

} // namespace

Membership3 one_hot(int label) {
    if (label < 1 || label > kNumClasses)
        throw std::invalid_argument("one_hot: label must be in {1,2,3}, got " +
                                    std::to_string(label));
    Membership3 m{};
    m[label - 1] = 1.0;
    return m;
}

Eigen::VectorXd MlpModel::to_vector() const {
    Eigen::VectorXd v(weight_count());
    Eigen::Index pos = 0;
    append_row_major(w1, v, pos);
    append_row_major(w2, v, pos);
    append_row_major(w3, v, pos);
    return v;
}

void MlpModel::from_vector(const Eigen::VectorXd& v) {
    if (v.size() != weight_count())
        throw std::invalid_argument("MlpModel::from_vector: size mismatch");
    Eigen::Index pos = 0;
    take_row_major(w1, v, pos);
    take_row_major(w2, v, pos);
    take_row_major(w3, v, pos);
}

MlpModel make_mlp(int n_in, int n_h1, int n_h2) {
    if (n_in < 1 || n_h1 < 1 || n_h2 < 1)
        throw std::invalid_argument("make_mlp: layer sizes must be positive");
    MlpModel m;
    m.n_in = n_in;
    m.n_h1 = n_h1;
    m.n_h2 = n_h2;
    m.w1 = Eigen::MatrixXd::Zero(n_h1, n_in + 1);
    m.w2 = Eigen::MatrixXd::Zero(n_h2, n_h1 + 1);
    m.w3 = Eigen::MatrixXd::Zero(kNumClasses, n_h2 + 1);
    return m;
}

MlpModel init_mlp(int n_in, int n_h1, int n_h2, std::uint64_t seed) {
    MlpModel m = make_mlp(n_in, n_h1, n_h2);
    Rng rng(seed);
    auto fill = [&rng](Eigen::MatrixXd& w, int fan_in) {
        const double r = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j)
                w(i, j) = rng.uniform(-r, r);
    };
    fill(m.w1, n_in + 1);
    fill(m.w2, n_h1 + 1);
    fill(m.w3, n_h2 + 1);
    return m;
}

Membership3 mlp_forward_raw(const MlpModel& model, const Descriptor36& d) {
    if (model.n_in != kDescriptorDim)
        throw std::invalid_argument("mlp_forward: model input size != 36");
    Eigen::VectorXd x(kDescriptorDim);
    for (int i = 0; i < kDescriptorDim; ++i)
        x(i) = d[i];
    Eigen::VectorXd a1(model.n_h1 + 1), a2(model.n_h2 + 1);
    a1 << sigmoid((model.w1.leftCols(model.n_in) * x + model.w1.col(model.n_in)).eval()), 1.0;
    a2 << sigmoid((model.w2 * a1).eval()), 1.0;
    const Eigen::VectorXd y = model.w3 * a2;
    return {y(0), y(1), y(2)};
}

Membership3 mlp_forward(const MlpModel& model, const Descriptor36& d) {
    Membership3 y = mlp_forward_raw(model, d);
    for (double& v : y)
        v = std::clamp(v, 0.0, 1.0);
    return y;
}

double mlp_loss(const MlpModel& model, const TrainingSet& ts) {
    Eigen::MatrixXd x, t;
    design_matrices(ts, x, t);
    const ForwardCache c = forward_batch(model, x);
    return (c.y - t).squaredNorm();
}

Eigen::VectorXd MlpGradient::to_vector() const {
    Eigen::VectorXd v(g1.size() + g2.size() + g3.size());
    Eigen::Index pos = 0;
    append_row_major(g1, v, pos);
    append_row_major(g2, v, pos);
    append_row_major(g3, v, pos);
    return v;
}

MlpGradient mlp_gradient(const MlpModel& model, const TrainingSet& ts) {
    Eigen::MatrixXd x, t;
    design_matrices(ts, x, t);
    const ForwardCache c = forward_batch(model, x);

    const Eigen::MatrixXd a1 = c.a1_aug.topRows(model.n_h1);
    const Eigen::MatrixXd a2 = c.a2_aug.topRows(model.n_h2);

    const Eigen::MatrixXd delta3 = 2.0 * (c.y - t);
    const Eigen::MatrixXd delta2 =
        (model.w3.leftCols(model.n_h2).transpose() * delta3).cwiseProduct(dsigmoid(a2));
    const Eigen::MatrixXd delta1 =
        (model.w2.leftCols(model.n_h1).transpose() * delta2).cwiseProduct(dsigmoid(a1));

    MlpGradient g;
    g.g3 = delta3 * c.a2_aug.transpose();
    g.g2 = delta2 * c.a1_aug.transpose();
    g.g1 = delta1 * c.x_aug.transpose();
    return g;
}

TrainResult train_rprop(const TrainingSet& ts, const TrainConfig& cfg) {
    MlpModel model = init_mlp(kDescriptorDim, cfg.hidden1, cfg.hidden2, cfg.seed);
    const int nw = model.weight_count();

    Eigen::VectorXd w = model.to_vector();
    Eigen::VectorXd delta = Eigen::VectorXd::Constant(nw, cfg.delta0);
    Eigen::VectorXd prev_grad = Eigen::VectorXd::Zero(nw);

    TrainResult result;
    result.model = model;
    result.best_loss = mlp_loss(model, ts);
    result.log.emplace_back(0, result.best_loss);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const Eigen::VectorXd grad = mlp_gradient(model, ts).to_vector();
        for (int i = 0; i < nw; ++i) {
            const double s = grad(i) * prev_grad(i);
            if (s > 0.0) {
                delta(i) = std::min(delta(i) * cfg.eta_plus, cfg.delta_max);
                w(i) -= (grad(i) > 0 ? 1.0 : -1.0) * delta(i);
                prev_grad(i) = grad(i);
            } else if (s < 0.0) {
                delta(i) = std::max(delta(i) * cfg.eta_minus, cfg.delta_min);
                prev_grad(i) = 0.0; // iRPROP-: no step, forget the sign
            } else {
                if (grad(i) != 0.0)
                    w(i) -= (grad(i) > 0 ? 1.0 : -1.0) * delta(i);
                prev_grad(i) = grad(i);
            }
        }
        model.from_vector(w);
        const double loss = mlp_loss(model, ts);
        if (!std::isfinite(loss))
            throw std::runtime_error("train_rprop: loss diverged (non-finite)");
        result.log.emplace_back(epoch, loss);
        if (loss < result.best_loss) {
            result.best_loss = loss;
            result.model = model;
        }
        if (result.best_loss <= cfg.target_error)
            break;
    }
    return result;
}

TrainResult train_lm(const TrainingSet& ts, const TrainConfig& cfg) {
    MlpModel model = init_mlp(kDescriptorDim, cfg.hidden1, cfg.hidden2, cfg.seed);
    const int nw = model.weight_count();
    const Eigen::Index n = static_cast<Eigen::Index>(ts.features.size());
    const Eigen::Index nres = 3 * n;

    const double jac_mb =
        static_cast<double>(nres) * nw * sizeof(double) / (1024.0 * 1024.0);
    if (jac_mb > cfg.max_jacobian_mb)
        throw std::invalid_argument("train_lm: Jacobian needs " + std::to_string(jac_mb) +
                                    " MB, budget is " + std::to_string(cfg.max_jacobian_mb));

    Eigen::MatrixXd x, t;
    design_matrices(ts, x, t);

    // Residuals r (3N) and Jacobian J (3N x nw) at the current weights.
    auto residuals = [&](const MlpModel& m, Eigen::VectorXd& r) {
        const ForwardCache c = forward_batch(m, x);
        r.resize(nres);
        for (Eigen::Index i = 0; i < n; ++i)
            for (int k = 0; k < kNumClasses; ++k)
                r(3 * i + k) = c.y(k, i) - t(k, i);
    };
    auto jacobian = [&](const MlpModel& m, Eigen::MatrixXd& jac) {
        const ForwardCache c = forward_batch(m, x);
        jac.resize(nres, nw);
        const Eigen::MatrixXd a1 = c.a1_aug.topRows(m.n_h1);
        const Eigen::MatrixXd a2 = c.a2_aug.topRows(m.n_h2);
        const Eigen::MatrixXd w3h = m.w3.leftCols(m.n_h2);
        const Eigen::MatrixXd w2h = m.w2.leftCols(m.n_h1);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::VectorXd ds2 = dsigmoid(a2.col(i));
            const Eigen::VectorXd ds1 = dsigmoid(a1.col(i));
            for (int k = 0; k < kNumClasses; ++k) {
                const Eigen::Index row = 3 * i + k;
                // delta vectors for residual (i,k): d y_k / d z
                const Eigen::VectorXd d2 = w3h.row(k).transpose().cwiseProduct(ds2);
                const Eigen::VectorXd d1 = (w2h.transpose() * d2).cwiseProduct(ds1);
                Eigen::Index pos = 0;
                for (int rr = 0; rr < m.n_h1; ++rr)
                    for (int cc = 0; cc <= m.n_in; ++cc)
                        jac(row, pos++) = d1(rr) * c.x_aug(cc, i);
                for (int rr = 0; rr < m.n_h2; ++rr)
                    for (int cc = 0; cc <= m.n_h1; ++cc)
                        jac(row, pos++) = d2(rr) * c.a1_aug(cc, i);
                for (int rr = 0; rr < kNumClasses; ++rr)
                    for (int cc = 0; cc <= m.n_h2; ++cc)
                        jac(row, pos++) = (rr == k ? c.a2_aug(cc, i) : 0.0);
            }
        }
    };

    Eigen::VectorXd r;
    residuals(model, r);
    double loss = r.squaredNorm();

    TrainResult result;
    result.model = model;
    result.best_loss = loss;
    result.log.emplace_back(0, loss);

    double lambda = cfg.lambda0;
    Eigen::VectorXd w = model.to_vector();
    Eigen::MatrixXd jac;

    for (int iter = 1; iter <= cfg.max_epochs; ++iter) {
        if (result.best_loss <= cfg.target_error)
            break;
        jacobian(model, jac);
        const Eigen::MatrixXd h = jac.transpose() * jac;
        const Eigen::VectorXd g = jac.transpose() * r;

        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd damped = h;
            damped.diagonal().array() += lambda;
            const Eigen::VectorXd step = damped.ldlt().solve(-g);
            const bool solve_ok = step.allFinite();
            if (solve_ok) {
                MlpModel trial = model;
                trial.from_vector(w + step);
                Eigen::VectorXd r_trial;
                residuals(trial, r_trial);
                const double trial_loss = r_trial.squaredNorm();
                if (std::isfinite(trial_loss) && trial_loss < loss) {
                    model = trial;
                    w += step;
                    r = std::move(r_trial);
                    loss = trial_loss;
                    lambda = std::max(lambda / cfg.lambda_scale, 1e-15);
                    accepted = true;
                    break;
                }
            }
            if (lambda >= cfg.lambda_max) {
                if (!solve_ok)
                    throw std::runtime_error("train_lm: normal-equation solve failed at lambda_max");
                // Stalled: no descent direction left at maximum damping.
                return result;
            }
            lambda *= cfg.lambda_scale;
        }

        result.log.emplace_back(iter, loss);
        if (loss < result.best_loss) {
            result.best_loss = loss;
            result.model = model;
        }
    }
    return result;
}

void save_mlp(const MlpModel& model, const std::string& path) {
    nlohmann::json j;
    j["format"] = "terrasurf-mlp";
    j["version"] = 1;
    j["layers"] = {model.n_in, model.n_h1, model.n_h2, kNumClasses};
    auto dump = [](const Eigen::MatrixXd& m) {
        std::vector<double> v;
        v.reserve(static_cast<std::size_t>(m.size()));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                v.push_back(m(r, c));
        return v;
    };
    j["w1"] = dump(model.w1);
    j["w2"] = dump(model.w2);
    j["w3"] = dump(model.w3);
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error(path + ": cannot open for writing");
    out << j.dump(1) << "\n";
}

MlpModel load_mlp(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error(path + ": cannot open");
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != "terrasurf-mlp")
        throw std::runtime_error(path + ": not a terrasurf MLP model file");
    if (j.value("version", 0) != 1)
        throw std::runtime_error(path + ": unsupported model version");
    const std::vector<int> layers = j.at("layers").get<std::vector<int>>();
    if (layers.size() != 4 || layers[3] != kNumClasses)
        throw std::runtime_error(path + ": bad layer spec");
    MlpModel m = make_mlp(layers[0], layers[1], layers[2]);
    auto fill = [&path](Eigen::MatrixXd& w, const std::vector<double>& v) {
        if (static_cast<Eigen::Index>(v.size()) != w.size())
            throw std::runtime_error(path + ": weight block size mismatch");
        std::size_t i = 0;
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c)
                w(r, c) = v[i++];
    };
    fill(m.w1, j.at("w1").get<std::vector<double>>());
    fill(m.w2, j.at("w2").get<std::vector<double>>());
    fill(m.w3, j.at("w3").get<std::vector<double>>());
    return m;
}

void save_train_log(const std::vector<std::pair<int, double>>& log, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error(path + ": cannot open for writing");
    out << "epoch,loss\n";
    char buf[48];
    for (const auto& [epoch, loss] : log) {
        std::snprintf(buf, sizeof buf, "%d,%.17g\n", epoch, loss);
        out << buf;
    }
}

double median_nn_distance(const std::vector<Feature>& features) {
    const std::size_t n = features.size();
    if (n < 2)
        return 0.0;
    std::vector<double> nn(n, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j)
                continue;
            double d2 = 0.0;
            for (int k = 0; k < kDescriptorDim; ++k) {
                const double d = features[i].desc[k] - features[j].desc[k];
                d2 += d * d;
            }
            nn[i] = std::min(nn[i], d2);
        }
    for (double& v : nn)
        v = std::sqrt(v);
    std::sort(nn.begin(), nn.end());
    return n % 2 == 1 ? nn[n / 2] : 0.5 * (nn[n / 2 - 1] + nn[n / 2]);
}

NnModel make_nn_model(const TrainingSet& ts, double tau_override) {
    NnModel m;
    m.features = ts.features;
    m.tau = tau_override > 0.0 ? tau_override : median_nn_distance(m.features);
    if (m.tau <= 0.0)
        m.tau = 1.0; // degenerate set: distances collapse, keep strengths finite
    return m;
}

Membership3 nn_membership(const Descriptor36& d, const NnModel& model) {
    if (model.features.empty())
        throw std::invalid_argument("nn_membership: empty training set");
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < model.features.size(); ++i) {
        double d2 = 0.0;
        for (int k = 0; k < kDescriptorDim; ++k) {
            const double diff = d[k] - model.features[i].desc[k];
            d2 += diff * diff;
        }
        if (d2 < best_d2) {
            best_d2 = d2;
            best = i;
        }
    }
    Membership3 m{};
    const int label = model.features[best].label;
    if (label >= 1 && label <= kNumClasses)
        m[label - 1] = std::exp(-best_d2 / (model.tau * model.tau));
    return m;
}

} // namespace terrasurf
