#include "mcce/postprocess.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace mcce {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("postprocess: " + msg); }

std::vector<Eigen::Index> valid_rows(const CandidateSet& cand, const Predictor& pred) {
    std::vector<Eigen::Index> out;
    for (Eigen::Index r = 0; r < cand.size(); ++r) {
        if (cand.predictions(r) > pred.cutoff) out.push_back(r);
    }
    return out;
}

}  // namespace

void validate_weights(const FilterWeights& w) {
    const double parts[] = {w.gower, w.sparsity, w.feasibility, w.ynn, w.redundancy};
    double sum = 0.0;
    for (double v : parts) {
        if (!(v >= 0.0)) fail("weights must be non-negative");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) fail("weights must sum to one");
}

CounterfactualResult select_ideal(const CandidateSet& cand, const Dataset& ds,
                                  const Predictor& pred) {
    CounterfactualResult res;
    res.individual = cand.individual;
    const std::vector<Eigen::Index> valid = valid_rows(cand, pred);
    res.n_valid = static_cast<Eigen::Index>(valid.size());
    if (valid.empty()) return res;

    int best_sparsity = std::numeric_limits<int>::max();
    for (Eigen::Index r : valid) {
        const Instance row = cand.rows.row(r).transpose();
        best_sparsity = std::min(best_sparsity, sparsity(cand.individual, row));
    }
    Eigen::Index best_row = -1;
    double best_gower = std::numeric_limits<double>::infinity();
    for (Eigen::Index r : valid) {
        const Instance row = cand.rows.row(r).transpose();
        if (sparsity(cand.individual, row) != best_sparsity) continue;
        const double g = gower(ds, cand.individual, row);
        if (g < best_gower) {
            best_gower = g;
            best_row = r;
        }
    }
    res.chosen_row = best_row;
    res.counterfactual = cand.rows.row(best_row).transpose();
    return res;
}

CounterfactualResult select_weighted(const CandidateSet& cand, const Dataset& ds,
                                     const Predictor& pred, const FilterWeights& w,
                                     const KnnIndex& idx, const Instance& x) {
    validate_weights(w);
    CounterfactualResult res;
    res.individual = x;
    const std::vector<Eigen::Index> valid = valid_rows(cand, pred);
    res.n_valid = static_cast<Eigen::Index>(valid.size());
    if (valid.empty()) return res;

    Eigen::Index best_row = -1;
    double best_score = std::numeric_limits<double>::infinity();
    for (Eigen::Index r : valid) {
        const Instance row = cand.rows.row(r).transpose();
        const double score = w.gower * gower(ds, x, row) + w.sparsity * sparsity(x, row) +
                             w.feasibility * feasibility(idx, ds, row) -
                             w.ynn * ynn(idx, pred, ds, row) +
                             w.redundancy * redundancy(pred, ds, x, row);
        if (score < best_score) {
            best_score = score;
            best_row = r;
        }
    }
    res.chosen_row = best_row;
    res.counterfactual = cand.rows.row(best_row).transpose();
    return res;
}

std::vector<ValidRow> valid_set(const CandidateSet& cand, const Dataset& ds,
                                const Predictor& pred, const KnnIndex& idx) {
    std::vector<ValidRow> out;
    for (Eigen::Index r = 0; r < cand.size(); ++r) {
        if (!(cand.predictions(r) > pred.cutoff)) continue;
        const Instance row = cand.rows.row(r).transpose();
        ValidRow v;
        v.row = r;
        v.sparsity = sparsity(cand.individual, row);
        v.gower = gower(ds, cand.individual, row);
        v.feasibility = feasibility(idx, ds, row);
        out.push_back(v);
    }
    return out;
}

void save_valid_set_csv(const std::vector<ValidRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail("cannot write " + path);
    out << "row_id,sparsity,gower,feasibility\n";
    for (const ValidRow& v : rows) {
        out << v.row << ',' << v.sparsity << ',' << format_double(v.gower) << ','
            << format_double(v.feasibility) << '\n';
    }
}

}  // namespace mcce
