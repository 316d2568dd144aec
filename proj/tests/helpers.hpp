#pragma once

#include "mcce/data.hpp"
#include "mcce/generator.hpp"
#include "mcce/metrics.hpp"
#include "mcce/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <utility>
#include <vector>

namespace testutil {

// 0.99 chi-square quantiles and the one-sided 5% t quantile used by the
// statistical checks.
inline constexpr double kChi2Df1At99 = 6.634897;
inline constexpr double kChi2Df2At99 = 9.210340;
inline constexpr double kTCritDf49At5 = 1.676551;

inline bool exact_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

inline mcce::Schema mixed_schema() {
    return {
        {"num", mcce::FeatureKind::Continuous, {}, mcce::Mutability::Mutable},
        {"count", mcce::FeatureKind::Discrete, {}, mcce::Mutability::Fixed},
        {"color", mcce::FeatureKind::Categorical, {"red", "green", "blue"}, mcce::Mutability::Mutable},
        {"size", mcce::FeatureKind::Ordinal, {"s", "l"}, mcce::Mutability::Mutable},
    };
}

// Random cells that satisfy an arbitrary schema: numerics in [-5, 5],
// discretes integer in [0, 9], level codes uniform over the level set.
inline Eigen::MatrixXd random_cells(const mcce::Schema& schema, Eigen::Index n,
                                    std::mt19937_64& rng) {
    std::uniform_real_distribution<double> real(-5.0, 5.0);
    std::uniform_int_distribution<int> digit(0, 9);
    Eigen::MatrixXd cells(n, static_cast<Eigen::Index>(schema.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < schema.size(); ++j) {
            const mcce::FeatureSchema& f = schema[j];
            double v = 0.0;
            if (f.kind == mcce::FeatureKind::Continuous) {
                v = real(rng);
            } else if (f.kind == mcce::FeatureKind::Discrete) {
                v = digit(rng);
            } else {
                std::uniform_int_distribution<int> level(0, static_cast<int>(f.levels.size()) - 1);
                v = level(rng);
            }
            cells(i, static_cast<Eigen::Index>(j)) = v;
        }
    }
    return cells;
}

inline mcce::Dataset random_dataset(const mcce::Schema& schema, Eigen::Index n,
                                    std::mt19937_64& rng) {
    return mcce::make_dataset(schema, random_cells(schema, n, rng));
}

// Draws an instance from the dataset's rows and perturbs some cells so the
// pair (x, e) exercises both changed and unchanged features.
inline mcce::Instance perturb(const mcce::Dataset& ds, const mcce::Instance& x,
                              std::mt19937_64& rng) {
    mcce::Instance e = x;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> real(-5.0, 5.0);
    std::uniform_int_distribution<int> digit(0, 9);
    for (std::size_t j = 0; j < ds.schema.size(); ++j) {
        if (unit(rng) < 0.5) continue;
        const mcce::FeatureSchema& f = ds.schema[j];
        if (f.kind == mcce::FeatureKind::Continuous) {
            e(static_cast<Eigen::Index>(j)) = real(rng);
        } else if (f.kind == mcce::FeatureKind::Discrete) {
            e(static_cast<Eigen::Index>(j)) = digit(rng);
        } else {
            std::uniform_int_distribution<int> level(0, static_cast<int>(f.levels.size()) - 1);
            e(static_cast<Eigen::Index>(j)) = level(rng);
        }
    }
    return e;
}

// Reference implementations, deliberately written in the most literal style.

inline int naive_sparsity(const mcce::Instance& x, const mcce::Instance& e) {
    int changed = 0;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        if (x(j) != e(j)) ++changed;
    }
    return changed;
}

inline double naive_gower(const mcce::Dataset& ds, const mcce::Instance& x,
                          const mcce::Instance& e, bool discrete_as_numeric = false) {
    double sum = 0.0;
    for (std::size_t j = 0; j < ds.schema.size(); ++j) {
        const auto col = static_cast<Eigen::Index>(j);
        const mcce::FeatureKind kind = ds.schema[j].kind;
        const bool ranged = kind == mcce::FeatureKind::Continuous ||
                            (discrete_as_numeric && kind == mcce::FeatureKind::Discrete);
        if (ranged) {
            const double range = ds.ranges[j].max - ds.ranges[j].min;
            if (range == 0.0) {
                sum += x(col) != e(col) ? 1.0 : 0.0;
            } else {
                sum += std::abs(x(col) - e(col)) / range;
            }
        } else {
            sum += x(col) != e(col) ? 1.0 : 0.0;
        }
    }
    return sum / static_cast<double>(ds.schema.size());
}

inline std::vector<Eigen::Index> naive_knn(const mcce::Dataset& ds, const mcce::Instance& e,
                                           int k) {
    const Eigen::VectorXd q = mcce::normalize(ds, e);
    std::vector<std::pair<double, Eigen::Index>> dist;
    for (Eigen::Index i = 0; i < ds.n_rows(); ++i) {
        dist.emplace_back((mcce::normalize(ds, ds.row(i)) - q).norm(), i);
    }
    std::sort(dist.begin(), dist.end());
    std::vector<Eigen::Index> out;
    for (int i = 0; i < k; ++i) out.push_back(dist[static_cast<std::size_t>(i)].second);
    return out;
}

inline double naive_ynn(const mcce::Dataset& ds, const mcce::Predictor& pred,
                        const mcce::Instance& e, int k) {
    const double fb_e = mcce::predict(pred, ds, e) > pred.cutoff ? 1.0 : 0.0;
    double sum = 0.0;
    for (Eigen::Index i : naive_knn(ds, e, k)) {
        const double fb_i = mcce::predict(pred, ds, ds.row(i)) > pred.cutoff ? 1.0 : 0.0;
        sum += std::abs(fb_e - fb_i);
    }
    return 1.0 - sum / k;
}

inline double naive_feasibility(const mcce::Dataset& ds, const mcce::Instance& e, int k) {
    const Eigen::VectorXd q = mcce::normalize(ds, e);
    double sum = 0.0;
    for (Eigen::Index i : naive_knn(ds, e, k)) {
        sum += (mcce::normalize(ds, ds.row(i)) - q).norm();
    }
    return sum / k;
}

inline int naive_redundancy(const mcce::Dataset& ds, const mcce::Predictor& pred,
                            const mcce::Instance& x, const mcce::Instance& e) {
    int count = 0;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        if (x(j) == e(j)) continue;
        mcce::Instance reverted = e;
        reverted(j) = x(j);
        if (mcce::predict(pred, ds, reverted) > pred.cutoff) ++count;
    }
    return count;
}

inline int naive_violation(const mcce::Schema& schema, const mcce::Instance& x,
                           const mcce::Instance& e) {
    int count = 0;
    for (std::size_t j = 0; j < schema.size(); ++j) {
        if (schema[j].fixed() && x(static_cast<Eigen::Index>(j)) != e(static_cast<Eigen::Index>(j))) {
            ++count;
        }
    }
    return count;
}

inline double naive_diversity(const mcce::Dataset& ds, const std::vector<mcce::Instance>& es) {
    double sum = 0.0;
    for (std::size_t i = 0; i < es.size(); ++i) {
        for (std::size_t j = 0; j < es.size(); ++j) {
            if (i != j) sum += naive_gower(ds, es[i], es[j]);
        }
    }
    return sum;
}

// Literal three-pass filtration: validity, then minimal change count, then
// minimal Gower distance, first row wins ties. Returns -1 when nothing valid.
inline Eigen::Index brute_force_ideal(const mcce::CandidateSet& cand, const mcce::Dataset& ds,
                                      double cutoff) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index r = 0; r < cand.size(); ++r) {
        if (cand.predictions(r) > cutoff) keep.push_back(r);
    }
    if (keep.empty()) return -1;
    std::vector<Eigen::Index> sparse;
    int best = std::numeric_limits<int>::max();
    for (Eigen::Index r : keep) {
        best = std::min(best, naive_sparsity(cand.individual, cand.rows.row(r).transpose()));
    }
    for (Eigen::Index r : keep) {
        if (naive_sparsity(cand.individual, cand.rows.row(r).transpose()) == best) {
            sparse.push_back(r);
        }
    }
    Eigen::Index winner = -1;
    double best_g = std::numeric_limits<double>::infinity();
    for (Eigen::Index r : sparse) {
        const double g = naive_gower(ds, cand.individual, cand.rows.row(r).transpose());
        if (g < best_g) {
            best_g = g;
            winner = r;
        }
    }
    return winner;
}

inline double chi_square_stat(const std::vector<double>& observed,
                              const std::vector<double>& expected) {
    double stat = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double d = observed[i] - expected[i];
        stat += d * d / expected[i];
    }
    return stat;
}

}  // namespace testutil
