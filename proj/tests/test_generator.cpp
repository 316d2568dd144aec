#include "helpers.hpp"

#include "mcce/data.hpp"
#include "mcce/generator.hpp"
#include "mcce/predictor.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace mcce;

namespace {

Predictor half_predictor(const Dataset& ds) {
    return logistic_predictor(Eigen::VectorXd::Zero(encoded_dim(ds.schema)), 0.0);
}

// age fixed, income and loans mutable, income strongly tied to age
Schema credit_schema() {
    return {{"age", FeatureKind::Discrete, {}, Mutability::Fixed},
            {"income", FeatureKind::Continuous, {}, Mutability::Mutable},
            {"loans", FeatureKind::Discrete, {}, Mutability::Mutable}};
}

Dataset credit_data(Eigen::Index n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> noise(-2.0, 2.0);
    Eigen::MatrixXd cells(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double age = 30.0 + 10.0 * static_cast<double>(i % 3);
        cells(i, 0) = age;
        cells(i, 1) = age + noise(rng);
        cells(i, 2) = static_cast<double>(i % 4);
    }
    return make_dataset(credit_schema(), cells);
}

}  // namespace

TEST_SUITE("generator") {

TEST_CASE("fit_chain builds one tree per mutable feature in order") {
    std::mt19937_64 rng(31);
    const Dataset ds = credit_data(200, rng);

    const ChainModel chain = fit_chain(ds);
    CHECK(chain.feature_order == std::vector<int>{1, 2});
    REQUIRE(chain.trees.size() == 2);
    CHECK(chain.trees[0].response_column == 1);
    CHECK(chain.trees[0].conditioning_columns == std::vector<int>{0});
    CHECK(chain.trees[1].response_column == 2);
    CHECK(chain.trees[1].conditioning_columns == std::vector<int>{0, 1});

    const ChainModel flipped = fit_chain(ds, {}, {2, 1});
    CHECK(flipped.feature_order == std::vector<int>{2, 1});
    CHECK(flipped.trees[0].conditioning_columns == std::vector<int>{0});
    CHECK(flipped.trees[1].conditioning_columns == std::vector<int>{0, 2});

    CHECK_THROWS(fit_chain(ds, {}, {1}));
    CHECK_THROWS(fit_chain(ds, {}, {1, 1}));
    CHECK_THROWS(fit_chain(ds, {}, {0, 1}));
    CHECK_THROWS(fit_chain(ds, {}, {1, 2, 2}));
}

TEST_CASE("fit_chain refuses a dataset with nothing mutable") {
    Dataset ds;
    ds.schema = {{"age", FeatureKind::Discrete, {}, Mutability::Fixed}};
    ds.cells = Eigen::MatrixXd::Constant(3, 1, 40.0);
    ds.ranges = {{40.0, 40.0}};
    try {
        fit_chain(ds);
        CHECK(false);
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("nothing to explain") != std::string::npos);
    }
}

TEST_CASE("generated rows copy the fixed cells verbatim") {
    std::mt19937_64 rng(32);
    const Dataset ds = credit_data(200, rng);
    const Predictor pred = half_predictor(ds);
    const ChainModel chain = fit_chain(ds);

    Instance x(3);
    x << 40.0, 41.5, 2.0;
    const CandidateSet cand = generate(chain, ds, pred, x, 500, 5);

    REQUIRE(cand.size() == 500);
    REQUIRE(cand.predictions.size() == 500);
    CHECK(testutil::exact_equal(cand.individual, x));
    for (Eigen::Index r = 0; r < cand.size(); ++r) {
        CHECK(cand.rows(r, 0) == 40.0);
        CHECK(testutil::naive_violation(ds.schema, x, cand.rows.row(r).transpose()) == 0);
    }
    CHECK(testutil::exact_equal(cand.predictions, predict_rows(pred, ds, cand.rows)));

    CHECK_THROWS(generate(chain, ds, pred, x, 0, 5));
    Instance bad(2);
    bad << 40.0, 41.5;
    CHECK_THROWS(generate(chain, ds, pred, bad, 10, 5));
}

TEST_CASE("sampled values stay inside the observed support") {
    Schema schema{{"flag", FeatureKind::Discrete, {}, Mutability::Fixed},
                  {"v", FeatureKind::Discrete, {}, Mutability::Mutable}};
    Eigen::MatrixXd cells(3, 2);
    cells << 0, 1,
             0, 1,
             0, 3;
    const Dataset ds = make_dataset(schema, cells);
    const Predictor pred = half_predictor(ds);
    const ChainModel chain = fit_chain(ds);

    Instance x(2);
    x << 0.0, 1.0;
    const CandidateSet cand = generate(chain, ds, pred, x, 200, 1);
    std::set<double> seen;
    for (Eigen::Index r = 0; r < cand.size(); ++r) seen.insert(cand.rows(r, 1));
    CHECK(seen == std::set<double>{1.0, 3.0});
}

TEST_CASE("generation is deterministic and prefix-stable in k") {
    std::mt19937_64 rng(33);
    const Dataset ds = credit_data(200, rng);
    const Predictor pred = half_predictor(ds);
    const ChainModel chain = fit_chain(ds);
    const Instance x = ds.row(0);

    const CandidateSet a = generate(chain, ds, pred, x, 300, 77);
    const CandidateSet b = generate(chain, ds, pred, x, 300, 77);
    CHECK(testutil::exact_equal(a.rows, b.rows));
    CHECK(testutil::exact_equal(a.predictions, b.predictions));

    const CandidateSet other = generate(chain, ds, pred, x, 300, 78);
    CHECK_FALSE(testutil::exact_equal(a.rows, other.rows));

    const CandidateSet small = generate(chain, ds, pred, x, 100, 77);
    CHECK(testutil::exact_equal(small.rows, a.rows.topRows(100)));
}

TEST_CASE("an unconditioned chain reproduces the marginal distribution") {
    Schema schema{{"v", FeatureKind::Categorical, {"a", "b", "c"}, Mutability::Mutable}};
    Eigen::MatrixXd cells(10, 1);
    cells << 0, 0, 0, 0, 0, 1, 1, 1, 2, 2;  // 50% / 30% / 20%
    const Dataset ds = make_dataset(schema, cells);
    const Predictor pred = half_predictor(ds);
    const ChainModel chain = fit_chain(ds);
    REQUIRE(chain.trees[0].nodes.size() == 1);

    Instance x(1);
    x << 0.0;
    const Eigen::Index k = 10000;
    const CandidateSet cand = generate(chain, ds, pred, x, k, 3);
    std::vector<double> counts(3, 0.0);
    for (Eigen::Index r = 0; r < k; ++r) counts[static_cast<std::size_t>(cand.rows(r, 0))] += 1.0;
    const std::vector<double> expected{0.5 * k, 0.3 * k, 0.2 * k};
    CHECK(testutil::chi_square_stat(counts, expected) < testutil::kChi2Df2At99);
}

TEST_CASE("baseline candidates are the training rows matching on fixed cells") {
    Schema schema{{"age", FeatureKind::Discrete, {}, Mutability::Fixed},
                  {"income", FeatureKind::Continuous, {}, Mutability::Mutable}};
    Eigen::MatrixXd cells(3, 2);
    cells << 40, 10.5,
             40, 20.25,
             35, 30.125;
    const Dataset ds = make_dataset(schema, cells);
    const Predictor pred = half_predictor(ds);

    Instance x(2);
    x << 40.0, 99.0;
    const CandidateSet cand = generate_baseline(ds, pred, x);
    REQUIRE(cand.size() == 2);
    CHECK(testutil::exact_equal(cand.rows.row(0).transpose(), ds.row(0)));
    CHECK(testutil::exact_equal(cand.rows.row(1).transpose(), ds.row(1)));
    CHECK(testutil::exact_equal(cand.predictions, predict_rows(pred, ds, cand.rows)));

    x << 99.0, 99.0;
    const CandidateSet empty = generate_baseline(ds, pred, x);
    CHECK(empty.size() == 0);
    CHECK(empty.predictions.size() == 0);
}

TEST_CASE("baseline with no fixed features returns every training row") {
    Schema schema{{"income", FeatureKind::Continuous, {}, Mutability::Mutable}};
    Eigen::MatrixXd cells(4, 1);
    cells << 1, 2, 3, 4;
    const Dataset ds = make_dataset(schema, cells);
    const Predictor pred = half_predictor(ds);

    Instance x(1);
    x << 2.0;
    const CandidateSet cand = generate_baseline(ds, pred, x);
    REQUIRE(cand.size() == 4);
    CHECK(testutil::exact_equal(cand.rows, ds.cells));
}

TEST_CASE("chain files round-trip") {
    std::mt19937_64 rng(34);
    const Dataset ds = credit_data(200, rng);
    const Predictor pred = half_predictor(ds);
    const ChainModel chain = fit_chain(ds);

    const std::string path = "roundtrip_chain.json";
    save_chain(chain, path);
    const ChainModel back = load_chain(path);
    std::remove(path.c_str());

    CHECK(back.feature_order == chain.feature_order);
    CHECK(chain_to_json(back).dump() == chain_to_json(chain).dump());

    const Instance x = ds.row(5);
    const CandidateSet a = generate(chain, ds, pred, x, 50, 9);
    const CandidateSet b = generate(back, ds, pred, x, 50, 9);
    CHECK(testutil::exact_equal(a.rows, b.rows));

    CHECK_THROWS(load_chain("no_such_chain_file.json"));
}

TEST_CASE("candidate dumps include every feature plus the prediction") {
    std::mt19937_64 rng(35);
    const Dataset ds = credit_data(60, rng);
    const Predictor pred = half_predictor(ds);
    const ChainModel chain = fit_chain(ds);
    const CandidateSet cand = generate(chain, ds, pred, ds.row(0), 5, 2);

    const std::string path = "candidates_smoke.csv";
    save_candidates_csv(cand, ds.schema, path);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header == "age,income,loans,prediction");
    int lines = 0;
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) ++lines;
    in.close();
    std::remove(path.c_str());
    CHECK(lines == 5);
}

}  // TEST_SUITE
