#pragma once

#include "mcce/data.hpp"

#include <nlohmann/json_fwd.hpp>

#include <random>
#include <vector>

namespace mcce {

struct CTreeConfig {
    double alpha = 0.05;     // significance level of the association tests
    int min_split = 20;      // minimum node size to attempt a split
    int min_bucket = 7;      // minimum child size
    int max_depth = 10;
};

void validate_config(const CTreeConfig& cfg);

/// Internal node: split_column >= 0 with either a numeric threshold rule
/// (value <= threshold goes left) or a level-membership rule. Level codes in
/// neither list were unseen at fit time and route to the majority child.
/// Leaf: split_column == -1; `rows` holds the training rows that reached it.
struct TreeNode {
    int split_column = -1;
    double threshold = 0.0;
    std::vector<int> left_levels;
    std::vector<int> right_levels;
    bool majority_left = true;
    int left = -1;
    int right = -1;
    std::vector<Eigen::Index> rows;

    bool is_leaf() const { return split_column < 0; }
};

struct CTreeModel {
    int response_column = 0;
    std::vector<int> conditioning_columns;
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    std::vector<int> leaf_ids() const;
};

/// Recursive partitioning of `response` against the conditioning columns.
/// Split variables are chosen by standardized permutation-moment association
/// tests with normal-approximation p-values, Bonferroni-adjusted over
/// components and candidate columns; a node stays a leaf when no adjusted
/// p-value reaches cfg.alpha.
CTreeModel fit_ctree(const Dataset& ds, int response, const std::vector<int>& conditioners,
                     const CTreeConfig& cfg = {});

/// Deterministic descent; returns the id of the unique leaf for x.
int route(const CTreeModel& model, const Instance& x);

/// One draw (with replacement) from the empirical response distribution of
/// the leaf; consumes exactly one engine value.
double sample_leaf(const CTreeModel& model, int leaf_id, const Dataset& ds,
                   std::mt19937_64& rng);

nlohmann::json tree_to_json(const CTreeModel& model);
CTreeModel tree_from_json(const nlohmann::json& doc);

}  // namespace mcce
