#pragma once

#include "mcce/ctree.hpp"
#include "mcce/data.hpp"
#include "mcce/predictor.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace mcce {

/// Chain factorization of the mutable features: trees[t] models column
/// feature_order[t] conditioned on every fixed column plus the mutable
/// columns earlier in the order.
struct ChainModel {
    std::vector<int> feature_order;
    std::vector<CTreeModel> trees;
};

/// K candidate rows sharing the individual's fixed cells, with the
/// predictor's probability attached per row.
struct CandidateSet {
    Instance individual;
    Eigen::MatrixXd rows;         // K x p
    Eigen::VectorXd predictions;  // K

    Eigen::Index size() const { return rows.rows(); }
};

/// Fits one tree per mutable feature. An empty `order` means schema column
/// order restricted to the mutable columns; otherwise `order` must be a
/// permutation of them.
ChainModel fit_chain(const Dataset& ds, const CTreeConfig& cfg = {},
                     const std::vector<int>& order = {});

/// Monte Carlo sampling of k_rows candidates: fixed cells are copied from x,
/// mutable cells filled sequentially through the chain (rows outer, trees
/// inner; one engine draw per cell). Deterministic given seed.
CandidateSet generate(const ChainModel& chain, const Dataset& ds, const Predictor& pred,
                      const Instance& x, Eigen::Index k_rows, std::uint64_t seed);

/// Baseline candidates: the training rows whose fixed cells all equal x's
/// exactly. May be empty.
CandidateSet generate_baseline(const Dataset& ds, const Predictor& pred, const Instance& x);

nlohmann::json chain_to_json(const ChainModel& chain);
ChainModel chain_from_json(const nlohmann::json& doc);
void save_chain(const ChainModel& chain, const std::string& path);
ChainModel load_chain(const std::string& path);

/// Candidate dump: one line per sampled row, feature columns plus the
/// prediction.
void save_candidates_csv(const CandidateSet& cand, const Schema& schema,
                         const std::string& path);

}  // namespace mcce
