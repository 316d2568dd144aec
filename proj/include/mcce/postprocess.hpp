#pragma once

#include "mcce/data.hpp"
#include "mcce/generator.hpp"
#include "mcce/metrics.hpp"
#include "mcce/predictor.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mcce {

/// Weights of the optional single-score selection, in order
/// (gower, sparsity, feasibility, ynn, redundancy). Must be non-negative and
/// sum to one. ynn enters negated so that every term is lower-is-better.
struct FilterWeights {
    double gower = 0.2;
    double sparsity = 0.2;
    double feasibility = 0.2;
    double ynn = 0.2;
    double redundancy = 0.2;
};

void validate_weights(const FilterWeights& w);

struct CounterfactualResult {
    Instance individual;
    std::optional<Instance> counterfactual;
    Eigen::Index n_valid = 0;
    Eigen::Index chosen_row = -1;  // index into the candidate set, -1 if absent
    double elapsed_seconds = 0.0;
};

/// Three-pass filtration: keep rows with prediction > cutoff, then rows of
/// minimal change count, then the row of minimal Gower distance; ties fall to
/// the smallest candidate row index.
CounterfactualResult select_ideal(const CandidateSet& cand, const Dataset& ds,
                                  const Predictor& pred);

/// Single-score variant: among valid rows, minimize the weighted sum of the
/// five per-row criteria.
CounterfactualResult select_weighted(const CandidateSet& cand, const Dataset& ds,
                                     const Predictor& pred, const FilterWeights& w,
                                     const KnnIndex& idx, const Instance& x);

struct ValidRow {
    Eigen::Index row = 0;
    int sparsity = 0;
    double gower = 0.0;
    double feasibility = 0.0;
};

/// Every valid candidate with its (sparsity, gower, feasibility) triple, for
/// scatter-style inspection of the search space.
std::vector<ValidRow> valid_set(const CandidateSet& cand, const Dataset& ds,
                                const Predictor& pred, const KnnIndex& idx);

void save_valid_set_csv(const std::vector<ValidRow>& rows, const std::string& path);

}  // namespace mcce
