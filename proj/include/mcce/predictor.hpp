#pragma once

#include "mcce/data.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mcce {

/// Black-box scorer over the normalized encoding. `batch` is optional; when
/// absent, row-wise calls to `score` are used instead.
struct Predictor {
    std::function<double(const Eigen::VectorXd&)> score;
    std::function<Eigen::VectorXd(const Eigen::MatrixXd&)> batch;
    double cutoff = 0.5;
};

struct MLPConfig {
    std::vector<int> hidden_sizes{18, 9, 3};
    double learning_rate = 0.05;
    int epochs = 200;
    std::uint64_t seed = 0;
};

/// Fully connected network with rectifier hidden units and a single sigmoid
/// output. weights[l] maps layer l activations to layer l+1 pre-activations.
struct MLPModel {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    Eigen::Index input_dim() const { return weights.empty() ? 0 : weights.front().cols(); }
    std::size_t parameter_count() const;
    double score(const Eigen::VectorXd& x) const;
    Eigen::VectorXd score_rows(const Eigen::MatrixXd& X) const;
};

MLPModel init_mlp(Eigen::Index input_dim, const std::vector<int>& hidden_sizes,
                  std::uint64_t seed);

/// Mean binary cross-entropy of the sigmoid output over (X, y), computed on
/// the logit scale. When `grads` is non-null it receives d(loss)/d(parameter)
/// with the same shapes as the model.
double bce_loss(const MLPModel& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                MLPModel* grads);

Predictor train_mlp(const Dataset& ds, const Eigen::VectorXd& labels, const MLPConfig& cfg,
                    MLPModel* fitted_model = nullptr);

Predictor make_predictor(MLPModel model, double cutoff = 0.5);

/// Linear scorer sigmoid(w . enc + b) on the normalized encoding; used by
/// tests and as a cheap stand-in model.
Predictor logistic_predictor(Eigen::VectorXd weights, double bias, double cutoff = 0.5);

double predict(const Predictor& p, const Dataset& ds, const Instance& x);
Eigen::VectorXd predict_rows(const Predictor& p, const Dataset& ds,
                             const Eigen::MatrixXd& raw_rows);
/// True iff the predicted probability strictly exceeds the cutoff.
bool is_valid(const Predictor& p, const Dataset& ds, const Instance& e);

void save_mlp(const MLPModel& model, const std::string& path);
MLPModel load_mlp(const std::string& path);

}  // namespace mcce
