#include "mcce/generator.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <random>
#include <stdexcept>

namespace mcce {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("generator: " + msg); }

}  // namespace

ChainModel fit_chain(const Dataset& ds, const CTreeConfig& cfg, const std::vector<int>& order) {
    if (ds.n_rows() == 0) fail("empty dataset");
    const std::vector<int> mutable_cols = mutable_columns(ds.schema);
    if (mutable_cols.empty()) fail("nothing to explain: no mutable features");

    std::vector<int> chain_order = order.empty() ? mutable_cols : order;
    {
        std::vector<int> a = chain_order;
        std::vector<int> b = mutable_cols;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        if (a != b) fail("order must be a permutation of the mutable columns");
    }

    ChainModel chain;
    chain.feature_order = chain_order;
    std::vector<int> conditioners = fixed_columns(ds.schema);
    for (int col : chain_order) {
        chain.trees.push_back(fit_ctree(ds, col, conditioners, cfg));
        conditioners.push_back(col);
    }
    return chain;
}

CandidateSet generate(const ChainModel& chain, const Dataset& ds, const Predictor& pred,
                      const Instance& x, Eigen::Index k_rows, std::uint64_t seed) {
    validate_instance(ds.schema, x);
    if (k_rows < 1) fail("candidate count must be positive");
    if (chain.trees.size() != chain.feature_order.size()) fail("malformed chain");

    CandidateSet cand;
    cand.individual = x;
    cand.rows.resize(k_rows, x.size());
    std::mt19937_64 rng(seed);
    Instance work = x;
    for (Eigen::Index r = 0; r < k_rows; ++r) {
        work = x;
        for (std::size_t t = 0; t < chain.trees.size(); ++t) {
            const int leaf = route(chain.trees[t], work);
            work(chain.feature_order[t]) = sample_leaf(chain.trees[t], leaf, ds, rng);
        }
        cand.rows.row(r) = work.transpose();
    }
    cand.predictions = predict_rows(pred, ds, cand.rows);
    return cand;
}

CandidateSet generate_baseline(const Dataset& ds, const Predictor& pred, const Instance& x) {
    validate_instance(ds.schema, x);
    const std::vector<int> fixed = fixed_columns(ds.schema);
    std::vector<Eigen::Index> matches;
    for (Eigen::Index i = 0; i < ds.n_rows(); ++i) {
        bool ok = true;
        for (int c : fixed) {
            if (ds.cells(i, c) != x(c)) {
                ok = false;
                break;
            }
        }
        if (ok) matches.push_back(i);
    }

    CandidateSet cand;
    cand.individual = x;
    cand.rows.resize(static_cast<Eigen::Index>(matches.size()), x.size());
    for (std::size_t r = 0; r < matches.size(); ++r) {
        cand.rows.row(static_cast<Eigen::Index>(r)) = ds.cells.row(matches[r]);
    }
    cand.predictions = matches.empty() ? Eigen::VectorXd(0) : predict_rows(pred, ds, cand.rows);
    return cand;
}

nlohmann::json chain_to_json(const ChainModel& chain) {
    nlohmann::json doc;
    doc["feature_order"] = chain.feature_order;
    nlohmann::json trees = nlohmann::json::array();
    for (const CTreeModel& tree : chain.trees) trees.push_back(tree_to_json(tree));
    doc["trees"] = std::move(trees);
    return doc;
}

ChainModel chain_from_json(const nlohmann::json& doc) {
    ChainModel chain;
    chain.feature_order = doc.at("feature_order").get<std::vector<int>>();
    for (const nlohmann::json& t : doc.at("trees")) chain.trees.push_back(tree_from_json(t));
    if (chain.trees.size() != chain.feature_order.size()) fail("malformed chain document");
    return chain;
}

void save_chain(const ChainModel& chain, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail("cannot write " + path);
    out << chain_to_json(chain).dump(2) << '\n';
}

ChainModel load_chain(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot read " + path);
    nlohmann::json doc;
    in >> doc;
    return chain_from_json(doc);
}

void save_candidates_csv(const CandidateSet& cand, const Schema& schema,
                         const std::string& path) {
    std::ofstream out(path);
    if (!out) fail("cannot write " + path);
    for (std::size_t j = 0; j < schema.size(); ++j) {
        out << schema[j].name << ',';
    }
    out << "prediction\n";
    for (Eigen::Index r = 0; r < cand.size(); ++r) {
        for (std::size_t j = 0; j < schema.size(); ++j) {
            out << cell_text(schema[j], cand.rows(r, static_cast<Eigen::Index>(j))) << ',';
        }
        out << format_double(cand.predictions(r)) << '\n';
    }
}

}  // namespace mcce
