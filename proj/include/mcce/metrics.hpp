#pragma once

#include "mcce/data.hpp"
#include "mcce/predictor.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace mcce {

/// Exact nearest-neighbour scan over the normalized training matrix.
struct KnnIndex {
    Eigen::MatrixXd encoded;  // N x d
    int k = 5;
};

KnnIndex build_knn_index(const Dataset& ds, int k = 5);

/// Row indices of the k nearest training rows by Euclidean distance on the
/// encoding; ties at equal distance broken by row index.
std::vector<Eigen::Index> nearest_neighbors(const KnnIndex& idx,
                                            const Eigen::VectorXd& query_encoded, int k);

/// Number of cells that differ between the two instances.
int sparsity(const Instance& x, const Instance& e);

/// Mean per-feature distance: |e_j - x_j| / R_j for continuous features,
/// level/value inequality indicator otherwise. `discrete_as_numeric` moves
/// discrete columns to the range-scaled branch.
double gower(const Dataset& ds, const Instance& x, const Instance& e,
             bool discrete_as_numeric = false);

/// 1 - mean predicted-class disagreement between e and its k nearest
/// training rows.
double ynn(const KnnIndex& idx, const Predictor& pred, const Dataset& ds, const Instance& e);

/// Mean Euclidean distance (normalized encoding) from e to its k nearest
/// training rows. Lower means e lies in a denser region.
double feasibility(const KnnIndex& idx, const Dataset& ds, const Instance& e);

/// Number of changed features that can individually revert to x's value while
/// the prediction stays above the cutoff. Assumes e is valid.
int redundancy(const Predictor& pred, const Dataset& ds, const Instance& x, const Instance& e);

/// Number of fixed features where e differs from x.
int violation(const Schema& schema, const Instance& x, const Instance& e);

/// Sum of Gower distances over ordered pairs of distinct counterfactuals.
double diversity(const Dataset& ds, const std::vector<Instance>& es);

/// One explained individual's metric row. Metric fields are absent when no
/// counterfactual was produced; success and timing are always present.
struct IndividualRecord {
    int index = 0;
    bool success = false;
    std::optional<double> l0, l1, ynn, feasibility, redundancy, violation;
    double time_seconds = 0.0;
};

struct MetricsReport {
    std::vector<IndividualRecord> records;
};

/// Column means over individuals. Metric columns average the records where a
/// counterfactual was produced; success averages over all records.
struct AggregateRow {
    double l0 = 0, l1 = 0, ynn = 0, feasibility = 0, redundancy = 0, violation = 0;
    double success = 0;
    double mean_time_seconds = 0;
    int n_records = 0;
    int n_produced = 0;
};

AggregateRow aggregate(const MetricsReport& report);

void write_individual_csv(const MetricsReport& report, const std::string& path);

}  // namespace mcce
