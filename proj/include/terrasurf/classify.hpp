// Per-descriptor class membership: instance-based nearest neighbor and a
// two-hidden-layer MLP (canonical 36-40-20-3) trained with iRPROP- or
// Levenberg-Marquardt on the summed squared error against one-hot targets.
#pragma once

#include "terrasurf/texmodel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace terrasurf {

/// One-hot target for a class label in {1,2,3}.
Membership3 one_hot(int label);

/// Two hidden sigmoid layers, linear output. The output is clamped to
/// [0,1] only when producing memberships; training residuals use the
/// linear values.
struct MlpModel {
    int n_in = kDescriptorDim;
    int n_h1 = 40;
    int n_h2 = 20;
    Eigen::MatrixXd w1; // n_h1 x (n_in+1), bias in the last column
    Eigen::MatrixXd w2; // n_h2 x (n_h1+1)
    Eigen::MatrixXd w3; // 3 x (n_h2+1)

    int weight_count() const {
        return n_h1 * (n_in + 1) + n_h2 * (n_h1 + 1) + kNumClasses * (n_h2 + 1);
    }
    Eigen::VectorXd to_vector() const;
    void from_vector(const Eigen::VectorXd& v);
};

/// Zero-initialized model of the given architecture (output size fixed at 3).
MlpModel make_mlp(int n_in, int n_h1, int n_h2);

/// Seeded uniform init, each layer U(-1/sqrt(fan_in), +1/sqrt(fan_in)).
MlpModel init_mlp(int n_in, int n_h1, int n_h2, std::uint64_t seed);

enum class TrainAlgorithm { Rprop, Lm };

struct TrainConfig {
    TrainAlgorithm algorithm = TrainAlgorithm::Rprop;
    int max_epochs = 2000;
    double target_error = 0.0; // stop when loss <= target_error (0 = run out the epochs)
    // iRPROP- step control
    double eta_plus = 1.2;
    double eta_minus = 0.5;
    double delta0 = 0.01;
    double delta_min = 1e-6;
    double delta_max = 50.0;
    // Levenberg-Marquardt damping
    double lambda0 = 1e-3;
    double lambda_scale = 10.0;
    double lambda_max = 1e12;
    double max_jacobian_mb = 1024.0;
    std::uint64_t seed = 1;
    int hidden1 = 40;
    int hidden2 = 20;
};

/// Raw (unclamped) network output.
Membership3 mlp_forward_raw(const MlpModel& model, const Descriptor36& d);

/// Network output clamped per component to [0,1] — the membership vector.
Membership3 mlp_forward(const MlpModel& model, const Descriptor36& d);

/// Sum over samples and components of squared (output - one_hot(label)).
double mlp_loss(const MlpModel& model, const TrainingSet& ts);

struct MlpGradient {
    Eigen::MatrixXd g1, g2, g3; // same shapes as the weight matrices
    Eigen::VectorXd to_vector() const;
};

/// Exact backpropagation gradient of mlp_loss.
MlpGradient mlp_gradient(const MlpModel& model, const TrainingSet& ts);

struct TrainResult {
    MlpModel model;                           // best-loss model seen
    double best_loss = 0.0;
    std::vector<std::pair<int, double>> log;  // (epoch, loss after the step)
};

/// iRPROP- full-batch training; deterministic given cfg.seed. Throws if the
/// loss goes non-finite.
TrainResult train_rprop(const TrainingSet& ts, const TrainConfig& cfg);

/// Levenberg-Marquardt on the 3N residual vector with lambda*I damping;
/// lambda shrinks on accepted steps and grows on rejected ones.
TrainResult train_lm(const TrainingSet& ts, const TrainConfig& cfg);

void save_mlp(const MlpModel& model, const std::string& path);
MlpModel load_mlp(const std::string& path);
void save_train_log(const std::vector<std::pair<int, double>>& log, const std::string& path);

/// Instance-based classifier: the filtered training set plus a strength
/// bandwidth tau (default: median 1-NN distance of the set).
struct NnModel {
    std::vector<Feature> features;
    double tau = 0.0;
};

NnModel make_nn_model(const TrainingSet& ts, double tau_override = 0.0);
double median_nn_distance(const std::vector<Feature>& features);

/// Membership exp(-dist^2/tau^2) at the nearest feature's class (ties go to
/// the lowest index), 0 elsewhere.
Membership3 nn_membership(const Descriptor36& d, const NnModel& model);

} // namespace terrasurf
