#include "mcce/predictor.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>

namespace mcce {

namespace {

using nlohmann::json;

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

struct ForwardPass {
    std::vector<Eigen::MatrixXd> activations;  // activations[0] = input, ReLU applied
    Eigen::VectorXd logits;                    // final pre-activation, one per row
};

ForwardPass forward(const MLPModel& model, const Eigen::MatrixXd& X) {
    ForwardPass fp;
    fp.activations.reserve(model.weights.size());
    fp.activations.push_back(X);
    for (std::size_t l = 0; l + 1 < model.weights.size(); ++l) {
        Eigen::MatrixXd z = fp.activations.back() * model.weights[l].transpose();
        z.rowwise() += model.biases[l].transpose();
        fp.activations.push_back(z.cwiseMax(0.0));
    }
    const std::size_t last = model.weights.size() - 1;
    fp.logits = fp.activations.back() * model.weights[last].transpose().col(0);
    fp.logits.array() += model.biases[last](0);
    return fp;
}

}  // namespace

std::size_t MLPModel::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
        n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
    return n;
}

double MLPModel::score(const Eigen::VectorXd& x) const {
    return sigmoid(forward(*this, x.transpose()).logits(0));
}

Eigen::VectorXd MLPModel::score_rows(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd logits = forward(*this, X).logits;
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits(i) = sigmoid(logits(i));
    return logits;
}

MLPModel init_mlp(Eigen::Index input_dim, const std::vector<int>& hidden_sizes,
                  std::uint64_t seed) {
    if (hidden_sizes.empty()) throw std::runtime_error("hidden_sizes must be non-empty");
    std::vector<Eigen::Index> sizes{input_dim};
    for (int h : hidden_sizes) {
        if (h <= 0) throw std::runtime_error("hidden layer sizes must be positive");
        sizes.push_back(h);
    }
    sizes.push_back(1);

    std::mt19937_64 rng(seed);
    MLPModel model;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const Eigen::Index fan_in = sizes[l];
        const Eigen::Index fan_out = sizes[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> u(-limit, limit);
        Eigen::MatrixXd w(fan_out, fan_in);
        for (Eigen::Index r = 0; r < fan_out; ++r)
            for (Eigen::Index c = 0; c < fan_in; ++c) w(r, c) = u(rng);
        model.weights.push_back(std::move(w));
        model.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return model;
}

double bce_loss(const MLPModel& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                MLPModel* grads) {
    const auto n = static_cast<double>(X.rows());
    const ForwardPass fp = forward(model, X);

    double loss = 0.0;
    for (Eigen::Index i = 0; i < fp.logits.size(); ++i)
        loss += softplus(fp.logits(i)) - y(i) * fp.logits(i);
    loss /= n;

    if (grads) {
        grads->weights.assign(model.weights.size(), Eigen::MatrixXd());
        grads->biases.assign(model.biases.size(), Eigen::VectorXd());

        // d(loss)/d(logit) = (sigmoid(logit) - y) / n
        Eigen::MatrixXd delta(X.rows(), 1);
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            delta(i, 0) = (sigmoid(fp.logits(i)) - y(i)) / n;

        for (std::size_t l = model.weights.size(); l-- > 0;) {
            grads->weights[l] = delta.transpose() * fp.activations[l];
            grads->biases[l] = delta.colwise().sum().transpose();
            if (l > 0) {
                Eigen::MatrixXd back = delta * model.weights[l];
                delta = back.cwiseProduct(
                    (fp.activations[l].array() > 0.0).cast<double>().matrix());
            }
        }
    }
    return loss;
}

Predictor train_mlp(const Dataset& ds, const Eigen::VectorXd& labels, const MLPConfig& cfg,
                    MLPModel* fitted_model) {
    if (labels.size() != ds.n_rows())
        throw std::runtime_error("labels length " + std::to_string(labels.size()) +
                                 " does not match " + std::to_string(ds.n_rows()) + " rows");
    bool any0 = false, any1 = false;
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
        if (labels(i) == 0.0) any0 = true;
        else if (labels(i) == 1.0) any1 = true;
        else throw std::runtime_error("labels must be 0 or 1");
    }
    if (!any0 || !any1) throw std::runtime_error("degenerate labels: only one class present");
    if (cfg.learning_rate <= 0.0) throw std::runtime_error("learning_rate must be positive");
    if (cfg.epochs <= 0) throw std::runtime_error("epochs must be positive");

    const Eigen::MatrixXd X = normalize_all(ds);
    MLPModel model = init_mlp(X.cols(), cfg.hidden_sizes, cfg.seed);
    std::mt19937_64 rng(cfg.seed + 0x9e3779b97f4a7c15ull);

    std::vector<Eigen::Index> order(static_cast<std::size_t>(X.rows()));
    std::iota(order.begin(), order.end(), 0);
    MLPModel grads;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (const Eigen::Index i : order) {
            bce_loss(model, X.row(i), labels.segment(i, 1), &grads);
            for (std::size_t l = 0; l < model.weights.size(); ++l) {
                model.weights[l] -= cfg.learning_rate * grads.weights[l];
                model.biases[l] -= cfg.learning_rate * grads.biases[l];
            }
        }
    }
    if (fitted_model) *fitted_model = model;
    return make_predictor(std::move(model));
}

Predictor make_predictor(MLPModel model, double cutoff) {
    auto shared = std::make_shared<MLPModel>(std::move(model));
    Predictor p;
    p.score = [shared](const Eigen::VectorXd& x) { return shared->score(x); };
    p.batch = [shared](const Eigen::MatrixXd& X) { return shared->score_rows(X); };
    p.cutoff = cutoff;
    return p;
}

Predictor logistic_predictor(Eigen::VectorXd weights, double bias, double cutoff) {
    auto w = std::make_shared<Eigen::VectorXd>(std::move(weights));
    Predictor p;
    p.score = [w, bias](const Eigen::VectorXd& x) { return sigmoid(w->dot(x) + bias); };
    p.batch = [w, bias](const Eigen::MatrixXd& X) {
        Eigen::VectorXd z = X * *w;
        z.array() += bias;
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = sigmoid(z(i));
        return z;
    };
    p.cutoff = cutoff;
    return p;
}

double predict(const Predictor& p, const Dataset& ds, const Instance& x) {
    return p.score(normalize(ds, x));
}

Eigen::VectorXd predict_rows(const Predictor& p, const Dataset& ds,
                             const Eigen::MatrixXd& raw_rows) {
    const Eigen::MatrixXd enc = normalize_rows(ds, raw_rows);
    if (p.batch) return p.batch(enc);
    Eigen::VectorXd out(enc.rows());
    for (Eigen::Index i = 0; i < enc.rows(); ++i) out(i) = p.score(enc.row(i).transpose());
    return out;
}

bool is_valid(const Predictor& p, const Dataset& ds, const Instance& e) {
    return predict(p, ds, e) > p.cutoff;
}

void save_mlp(const MLPModel& model, const std::string& path) {
    json doc;
    std::vector<Eigen::Index> sizes{model.input_dim()};
    for (const auto& w : model.weights) sizes.push_back(w.rows());
    doc["layer_sizes"] = sizes;
    auto& weights = doc["weights"] = json::array();
    auto& biases = doc["biases"] = json::array();
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        std::vector<double> flat;
        flat.reserve(static_cast<std::size_t>(model.weights[l].size()));
        for (Eigen::Index r = 0; r < model.weights[l].rows(); ++r)
            for (Eigen::Index c = 0; c < model.weights[l].cols(); ++c)
                flat.push_back(model.weights[l](r, c));
        weights.push_back(flat);
        biases.push_back(std::vector<double>(model.biases[l].data(),
                                             model.biases[l].data() + model.biases[l].size()));
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model file '" + path + "'");
    out << doc.dump(2) << '\n';
}

MLPModel load_mlp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw std::runtime_error("model file '" + path + "': " + std::string(e.what()));
    }
    const auto sizes = doc.at("layer_sizes").get<std::vector<Eigen::Index>>();
    if (sizes.size() < 2) throw std::runtime_error("model file '" + path + "': bad layer_sizes");
    MLPModel model;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const auto flat = doc.at("weights").at(l).get<std::vector<double>>();
        const auto b = doc.at("biases").at(l).get<std::vector<double>>();
        const Eigen::Index rows = sizes[l + 1], cols = sizes[l];
        if (static_cast<Eigen::Index>(flat.size()) != rows * cols ||
            static_cast<Eigen::Index>(b.size()) != rows)
            throw std::runtime_error("model file '" + path + "': shape mismatch in layer " +
                                     std::to_string(l));
        Eigen::MatrixXd w(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c)
                w(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
        model.weights.push_back(std::move(w));
        model.biases.push_back(
            Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size())));
    }
    return model;
}

}  // namespace mcce
