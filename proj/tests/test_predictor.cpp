#include "helpers.hpp"

#include "mcce/data.hpp"
#include "mcce/predictor.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <string>
#include <vector>

using namespace mcce;

namespace {

Schema one_numeric() {
    return {{"x", FeatureKind::Continuous, {}, Mutability::Mutable}};
}

Dataset unit_interval_dataset() {
    Eigen::MatrixXd cells(2, 1);
    cells << 0.0, 1.0;
    return make_dataset(one_numeric(), cells);
}

double softplus_ref(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

}  // namespace

TEST_SUITE("predictor") {

TEST_CASE("logistic predictor reproduces the sigmoid") {
    const Dataset ds = unit_interval_dataset();
    Eigen::VectorXd w = Eigen::VectorXd::Zero(1);

    Predictor unit = logistic_predictor(w, 1.0);
    CHECK(predict(unit, ds, ds.row(0)) == doctest::Approx(0.7310585786300049).epsilon(1e-15));

    Predictor flat = logistic_predictor(w, 0.0);
    CHECK(predict(flat, ds, ds.row(1)) == 0.5);

    // weights act on the normalized encoding: row 1 encodes to 1.0
    Eigen::VectorXd w1 = Eigen::VectorXd::Constant(1, 2.0);
    Predictor lin = logistic_predictor(w1, -1.0);
    CHECK(predict(lin, ds, ds.row(1)) == doctest::Approx(0.7310585786300049).epsilon(1e-15));
    CHECK(predict(lin, ds, ds.row(0)) == doctest::Approx(1.0 / (1.0 + std::exp(1.0))).epsilon(1e-15));
}

TEST_CASE("is_valid requires the score to strictly exceed the cutoff") {
    const Dataset ds = unit_interval_dataset();
    Eigen::VectorXd w = Eigen::VectorXd::Zero(1);

    CHECK_FALSE(is_valid(logistic_predictor(w, 0.0), ds, ds.row(0)));     // exactly 0.5
    CHECK(is_valid(logistic_predictor(w, 0.1), ds, ds.row(0)));           // above
    CHECK_FALSE(is_valid(logistic_predictor(w, -0.1), ds, ds.row(0)));    // below
    CHECK(is_valid(logistic_predictor(w, 0.0, 0.49), ds, ds.row(0)));     // custom cutoff
}

TEST_CASE("init_mlp shapes, zero biases and uniform bounds") {
    const MLPModel m = init_mlp(4, {18, 9, 3}, 7);

    REQUIRE(m.weights.size() == 4);
    REQUIRE(m.biases.size() == 4);
    CHECK(m.weights[0].rows() == 18);
    CHECK(m.weights[0].cols() == 4);
    CHECK(m.weights[1].rows() == 9);
    CHECK(m.weights[1].cols() == 18);
    CHECK(m.weights[2].rows() == 3);
    CHECK(m.weights[2].cols() == 9);
    CHECK(m.weights[3].rows() == 1);
    CHECK(m.weights[3].cols() == 3);
    CHECK(m.input_dim() == 4);
    CHECK(m.parameter_count() == 18 * 4 + 18 + 9 * 18 + 9 + 3 * 9 + 3 + 3 + 1);

    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        CHECK((m.biases[l].array() == 0.0).all());
        const double limit =
            std::sqrt(6.0 / static_cast<double>(m.weights[l].rows() + m.weights[l].cols()));
        CHECK(m.weights[l].array().abs().maxCoeff() <= limit);
        CHECK(m.weights[l].array().abs().maxCoeff() > 0.0);
    }

    const MLPModel again = init_mlp(4, {18, 9, 3}, 7);
    for (std::size_t l = 0; l < m.weights.size(); ++l)
        CHECK(testutil::exact_equal(m.weights[l], again.weights[l]));

    const MLPModel other = init_mlp(4, {18, 9, 3}, 8);
    bool any_diff = false;
    for (std::size_t l = 0; l < m.weights.size(); ++l)
        if (!testutil::exact_equal(m.weights[l], other.weights[l])) any_diff = true;
    CHECK(any_diff);

    CHECK_THROWS(init_mlp(4, {}, 0));
    CHECK_THROWS(init_mlp(4, {3, 0}, 0));
}

TEST_CASE("bce_loss matches the softplus form on a hand-built net") {
    MLPModel m = init_mlp(1, {1}, 0);
    m.weights[0](0, 0) = 1.0;
    m.weights[1](0, 0) = 2.0;
    m.biases[0](0) = 0.0;
    m.biases[1](0) = 0.5;

    // rectifier passes 0.3 through and clips -0.4 to zero
    Eigen::MatrixXd X(2, 1);
    X << 0.3, -0.4;
    Eigen::VectorXd y(2);
    y << 1.0, 0.0;

    const double z0 = 2.0 * 0.3 + 0.5;
    const double z1 = 0.5;
    const double expected = ((softplus_ref(z0) - z0) + softplus_ref(z1)) / 2.0;
    CHECK(bce_loss(m, X, y, nullptr) == doctest::Approx(expected).epsilon(1e-14));

    CHECK(m.score(Eigen::VectorXd::Constant(1, 0.3)) ==
          doctest::Approx(1.0 / (1.0 + std::exp(-z0))).epsilon(1e-14));
}

TEST_CASE("analytic gradients agree with central differences") {
    // redraw until every hidden pre-activation is clear of the rectifier
    // kink, so the finite differences probe a smooth region
    MLPModel m;
    Eigen::MatrixXd X(6, 3);
    std::uint64_t seed = 41;
    while (true) {
        std::mt19937_64 rng(seed++);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        m = init_mlp(3, {4, 3}, seed);
        for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = unit(rng);

        double min_abs = std::numeric_limits<double>::infinity();
        Eigen::MatrixXd act = X;
        for (std::size_t l = 0; l + 1 < m.weights.size(); ++l) {
            Eigen::MatrixXd pre = act * m.weights[l].transpose();
            pre.rowwise() += m.biases[l].transpose();
            min_abs = std::min(min_abs, pre.array().abs().minCoeff());
            act = pre.cwiseMax(0.0);
        }
        if (min_abs > 1e-3) break;
    }
    Eigen::VectorXd y(6);
    y << 1, 0, 1, 1, 0, 0;

    MLPModel grads;
    bce_loss(m, X, y, &grads);

    const double h = 1e-6;
    auto check_entry = [&](double& slot, double analytic) {
        const double saved = slot;
        slot = saved + h;
        const double up = bce_loss(m, X, y, nullptr);
        slot = saved - h;
        const double down = bce_loss(m, X, y, nullptr);
        slot = saved;
        const double numeric = (up - down) / (2.0 * h);
        CHECK(analytic == doctest::Approx(numeric).epsilon(1e-4));
    };

    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        REQUIRE(grads.weights[l].rows() == m.weights[l].rows());
        REQUIRE(grads.weights[l].cols() == m.weights[l].cols());
        REQUIRE(grads.biases[l].size() == m.biases[l].size());
        for (Eigen::Index i = 0; i < m.weights[l].size(); ++i)
            check_entry(m.weights[l](i), grads.weights[l](i));
        for (Eigen::Index i = 0; i < m.biases[l].size(); ++i)
            check_entry(m.biases[l](i), grads.biases[l](i));
    }
}

TEST_CASE("training separates a separable dataset") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> low(-2.0, -1.0);
    std::uniform_real_distribution<double> high(1.0, 2.0);

    const Eigen::Index n = 200;
    Eigen::MatrixXd cells(n, 1);
    Eigen::VectorXd labels(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const bool positive = i % 2 == 0;
        cells(i, 0) = positive ? high(rng) : low(rng);
        labels(i) = positive ? 1.0 : 0.0;
    }
    const Dataset ds = make_dataset(one_numeric(), cells);

    MLPConfig cfg;
    cfg.epochs = 120;
    cfg.seed = 3;
    const Predictor pred = train_mlp(ds, labels, cfg);

    const Eigen::VectorXd scores = predict_rows(pred, ds, ds.cells);
    int correct = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double cls = scores(i) > 0.5 ? 1.0 : 0.0;
        if (cls == labels(i)) ++correct;
    }
    CHECK(correct >= 190);
}

TEST_CASE("training is deterministic in the seed") {
    std::mt19937_64 rng(21);
    const Dataset ds = testutil::random_dataset(testutil::mixed_schema(), 60, rng);
    Eigen::VectorXd labels(60);
    for (Eigen::Index i = 0; i < 60; ++i) labels(i) = static_cast<double>(i % 2);

    MLPConfig cfg;
    cfg.epochs = 15;
    cfg.seed = 9;
    MLPModel a, b;
    train_mlp(ds, labels, cfg, &a);
    train_mlp(ds, labels, cfg, &b);
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
        CHECK(testutil::exact_equal(a.weights[l], b.weights[l]));
        CHECK(testutil::exact_equal(a.biases[l], b.biases[l]));
    }
}

TEST_CASE("train_mlp rejects bad labels and config") {
    std::mt19937_64 rng(22);
    const Dataset ds = testutil::random_dataset(testutil::mixed_schema(), 10, rng);

    Eigen::VectorXd short_labels(4);
    short_labels << 0, 1, 0, 1;
    CHECK_THROWS(train_mlp(ds, short_labels, {}));

    Eigen::VectorXd bad(10);
    bad.setZero();
    bad(3) = 0.5;
    CHECK_THROWS(train_mlp(ds, bad, {}));

    Eigen::VectorXd ones = Eigen::VectorXd::Ones(10);
    try {
        train_mlp(ds, ones, {});
        CHECK(false);
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("degenerate labels") != std::string::npos);
    }

    Eigen::VectorXd ok(10);
    for (Eigen::Index i = 0; i < 10; ++i) ok(i) = static_cast<double>(i % 2);
    MLPConfig cfg;
    cfg.learning_rate = 0.0;
    CHECK_THROWS(train_mlp(ds, ok, cfg));
    cfg.learning_rate = 0.05;
    cfg.epochs = 0;
    CHECK_THROWS(train_mlp(ds, ok, cfg));
}

TEST_CASE("predict_rows equals per-row predict") {
    std::mt19937_64 rng(23);
    const Dataset ds = testutil::random_dataset(testutil::mixed_schema(), 40, rng);
    Eigen::VectorXd labels(40);
    for (Eigen::Index i = 0; i < 40; ++i) labels(i) = static_cast<double>(i % 2);

    MLPConfig cfg;
    cfg.epochs = 10;
    const Predictor pred = train_mlp(ds, labels, cfg);

    const Eigen::VectorXd batch = predict_rows(pred, ds, ds.cells);
    REQUIRE(batch.size() == 40);
    for (Eigen::Index i = 0; i < 40; ++i) CHECK(batch(i) == predict(pred, ds, ds.row(i)));
}

TEST_CASE("model files round-trip exactly") {
    std::mt19937_64 rng(24);
    const Dataset ds = testutil::random_dataset(testutil::mixed_schema(), 50, rng);
    Eigen::VectorXd labels(50);
    for (Eigen::Index i = 0; i < 50; ++i) labels(i) = static_cast<double>(i % 2);

    MLPConfig cfg;
    cfg.epochs = 12;
    cfg.seed = 4;
    MLPModel model;
    train_mlp(ds, labels, cfg, &model);

    const std::string path = "roundtrip_model.json";
    save_mlp(model, path);
    const MLPModel back = load_mlp(path);
    std::remove(path.c_str());

    REQUIRE(back.weights.size() == model.weights.size());
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        CHECK(testutil::exact_equal(back.weights[l], model.weights[l]));
        CHECK(testutil::exact_equal(back.biases[l], model.biases[l]));
    }

    const Predictor a = make_predictor(model);
    const Predictor b = make_predictor(back);
    CHECK(testutil::exact_equal(predict_rows(a, ds, ds.cells), predict_rows(b, ds, ds.cells)));

    CHECK_THROWS(load_mlp("no_such_model_file.json"));
}

}  // TEST_SUITE
