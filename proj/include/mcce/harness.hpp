#pragma once

#include "mcce/ctree.hpp"
#include "mcce/data.hpp"
#include "mcce/generator.hpp"
#include "mcce/metrics.hpp"
#include "mcce/postprocess.hpp"
#include "mcce/predictor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mcce {

enum class Method { Mcce, Baseline };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct ExperimentConfig {
    Eigen::Index n_test = 100;
    Eigen::Index k_rows = 10000;  // candidate draws per individual
    int k_neighbors = 5;
    double cutoff = 0.5;
    Method method = Method::Mcce;
    std::uint64_t seed = 0;
    int threads = 1;
    bool include_timing = true;
    bool holdout_test = false;  // drop test rows from the generator's training data
    CTreeConfig tree;
    std::vector<Eigen::Index> subsample_sizes;
    int repetitions = 1;
};

void validate_experiment_config(const ExperimentConfig& cfg);

/// One aggregate line of a report: metric column means in the standard
/// order plus per-individual and total wall-clock cost.
struct ReportRow {
    std::string method;
    Eigen::Index n_train = 0;
    Eigen::Index n_test = 0;
    int repetitions = 1;
    double l0 = 0.0;
    double l1 = 0.0;
    double ynn = 0.0;
    double feasibility = 0.0;
    double redundancy = 0.0;
    double violation = 0.0;
    double success = 0.0;
    double t_one_seconds = 0.0;  // chain fit plus mean per-individual cost
    double t_all_minutes = 0.0;  // chain fit plus summed per-individual cost
};

struct ExperimentReport {
    std::vector<ReportRow> rows;
    bool include_timing = true;
};

std::string emit_report_csv(const ExperimentReport& report);
ExperimentReport parse_report_csv(const std::string& text);
std::string format_report_table(const ExperimentReport& report);

/// Row indices of the first n_test training rows the predictor scores at or
/// below the cutoff; errors with the available count when there are fewer.
std::vector<Eigen::Index> select_test_set(const Dataset& ds, const Predictor& pred,
                                          Eigen::Index n_test);

struct IndividualOutcome {
    Eigen::Index test_row = -1;
    CounterfactualResult result;
    IndividualRecord record;
    std::string error;
};

struct MethodRun {
    ReportRow row;
    std::vector<IndividualOutcome> outcomes;
    double fit_seconds = 0.0;
};

/// Runs one method over the given test rows: candidate generation against
/// `train`, selection and metrics against `metric_ds` (whose ranges and kNN
/// index stay constant across subsample sizes). Individuals are distributed
/// over cfg.threads workers; results do not depend on the worker count.
MethodRun run_method(const Dataset& train, const Dataset& metric_ds, const Predictor& pred,
                     const std::vector<Eigen::Index>& test_rows, const ExperimentConfig& cfg);

/// Full benchmark: select the test set, run each requested method, return
/// one report row per method. `runs` (optional) receives the per-method
/// detail in the same order.
ExperimentReport run_bench(const Dataset& ds, const Predictor& pred,
                           const std::vector<Method>& methods, const ExperimentConfig& cfg,
                           std::vector<MethodRun>* runs = nullptr);

ExperimentReport run_experiment(const Dataset& ds, const Predictor& pred,
                                const ExperimentConfig& cfg,
                                std::vector<MethodRun>* runs = nullptr);

/// Subsample stability study: the test set is selected once on the full data
/// and held out of the subsampling pool; the predictor stays fixed. For each
/// size, `repetitions` uniform training subsets are drawn and the per-size
/// report row averages the repetition aggregates.
ExperimentReport run_subsample_study(const Dataset& ds, const Predictor& pred,
                                     const ExperimentConfig& cfg);

enum class SyntheticKind { IndependentGaussian, DependentPair, MixedTypes };

std::string synthetic_kind_name(SyntheticKind kind);
SyntheticKind synthetic_kind_from_name(const std::string& name);

struct SyntheticData {
    Dataset ds;
    Eigen::VectorXd labels;
};

/// Documented generative processes for self-contained runs:
///  - independent-gaussian: five i.i.d. standard normal features, labels
///    drawn from a logistic model with weights (1, -1, 0.5, -0.5, 0.25).
///  - dependent-pair: a ~ U(0,1), b = 2a + 1 + N(0, 0.05^2) (so b tracks
///    2a + 1 within a +/-0.3 band), labels logistic in a.
///  - mixed-types: six features (fixed discrete age in {20..60} decades,
///    fixed categorical group {a,b,c}, income depending on both, loan count
///    depending on income, ordinal grade tracking income, continuous score
///    driven by income and loans); the label logit is
///    0.15 (score - 30) + 0.03 (income - 55) - 0.25 loans, so validity is
///    reachable by mutable changes in every fixed-feature stratum.
SyntheticData make_synthetic(SyntheticKind kind, Eigen::Index n, std::uint64_t seed);

/// Original row followed by the counterfactual row, per explained
/// individual; individuals without a counterfactual are skipped.
void save_ce_rows_csv(const Schema& schema, const std::vector<IndividualOutcome>& outcomes,
                      const std::string& path);

void save_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace mcce
