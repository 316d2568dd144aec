#include "mcce/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mcce {

namespace {

void check_same_schema(const Instance& x, const Instance& e) {
    if (x.size() != e.size())
        throw std::runtime_error("instances have different lengths: " + std::to_string(x.size()) +
                                 " vs " + std::to_string(e.size()));
}

}  // namespace

KnnIndex build_knn_index(const Dataset& ds, int k) {
    if (k < 1 || k > ds.n_rows())
        throw std::runtime_error("k must be in [1, N], got " + std::to_string(k));
    return KnnIndex{normalize_all(ds), k};
}

std::vector<Eigen::Index> nearest_neighbors(const KnnIndex& idx,
                                            const Eigen::VectorXd& query_encoded, int k) {
    const Eigen::Index n = idx.encoded.rows();
    if (k < 1 || k > n) throw std::runtime_error("k out of range");
    const Eigen::VectorXd d2 =
        (idx.encoded.rowwise() - query_encoded.transpose()).rowwise().squaredNorm();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](Eigen::Index a, Eigen::Index b) {
                          if (d2(a) != d2(b)) return d2(a) < d2(b);
                          return a < b;
                      });
    order.resize(static_cast<std::size_t>(k));
    return order;
}

int sparsity(const Instance& x, const Instance& e) {
    check_same_schema(x, e);
    int changed = 0;
    for (Eigen::Index j = 0; j < x.size(); ++j) changed += e(j) != x(j) ? 1 : 0;
    return changed;
}

double gower(const Dataset& ds, const Instance& x, const Instance& e,
             bool discrete_as_numeric) {
    check_same_schema(x, e);
    const auto p = static_cast<Eigen::Index>(ds.schema.size());
    if (x.size() != p) throw std::runtime_error("instance does not match the dataset schema");
    double sum = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
        const auto& f = ds.schema[static_cast<std::size_t>(j)];
        const bool range_scaled =
            f.kind == FeatureKind::Continuous ||
            (discrete_as_numeric && f.kind == FeatureKind::Discrete);
        if (range_scaled) {
            const double r = ds.ranges[static_cast<std::size_t>(j)].width();
            if (r > 0.0)
                sum += std::abs(e(j) - x(j)) / r;
            else
                sum += e(j) != x(j) ? 1.0 : 0.0;
        } else {
            sum += e(j) != x(j) ? 1.0 : 0.0;
        }
    }
    return sum / static_cast<double>(p);
}

double ynn(const KnnIndex& idx, const Predictor& pred, const Dataset& ds, const Instance& e) {
    const Eigen::VectorXd enc = normalize(ds, e);
    const auto neighbors = nearest_neighbors(idx, enc, idx.k);
    const double fb_e = pred.score(enc) > pred.cutoff ? 1.0 : 0.0;
    double disagreement = 0.0;
    for (const Eigen::Index j : neighbors) {
        const double fb_j = pred.score(idx.encoded.row(j).transpose()) > pred.cutoff ? 1.0 : 0.0;
        disagreement += std::abs(fb_e - fb_j);
    }
    return 1.0 - disagreement / static_cast<double>(idx.k);
}

double feasibility(const KnnIndex& idx, const Dataset& ds, const Instance& e) {
    const Eigen::VectorXd enc = normalize(ds, e);
    const auto neighbors = nearest_neighbors(idx, enc, idx.k);
    double sum = 0.0;
    for (const Eigen::Index j : neighbors)
        sum += (idx.encoded.row(j).transpose() - enc).norm();
    return sum / static_cast<double>(idx.k);
}

int redundancy(const Predictor& pred, const Dataset& ds, const Instance& x, const Instance& e) {
    check_same_schema(x, e);
    int count = 0;
    Instance reverted = e;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        if (e(j) == x(j)) continue;
        reverted(j) = x(j);
        if (predict(pred, ds, reverted) > pred.cutoff) ++count;
        reverted(j) = e(j);
    }
    return count;
}

int violation(const Schema& schema, const Instance& x, const Instance& e) {
    check_same_schema(x, e);
    int count = 0;
    for (std::size_t j = 0; j < schema.size(); ++j)
        if (schema[j].fixed() && e(static_cast<Eigen::Index>(j)) != x(static_cast<Eigen::Index>(j)))
            ++count;
    return count;
}

double diversity(const Dataset& ds, const std::vector<Instance>& es) {
    double sum = 0.0;
    for (std::size_t j = 0; j < es.size(); ++j)
        for (std::size_t i = 0; i < es.size(); ++i)
            if (i != j) sum += gower(ds, es[i], es[j]);
    return sum;
}

AggregateRow aggregate(const MetricsReport& report) {
    AggregateRow agg;
    agg.n_records = static_cast<int>(report.records.size());
    double l0 = 0, l1 = 0, yn = 0, feas = 0, red = 0, viol = 0;
    for (const auto& rec : report.records) {
        agg.success += rec.success ? 1.0 : 0.0;
        agg.mean_time_seconds += rec.time_seconds;
        if (rec.l0) {
            ++agg.n_produced;
            l0 += *rec.l0;
            l1 += *rec.l1;
            yn += *rec.ynn;
            feas += *rec.feasibility;
            red += *rec.redundancy;
            viol += *rec.violation;
        }
    }
    if (agg.n_records > 0) {
        agg.success /= agg.n_records;
        agg.mean_time_seconds /= agg.n_records;
    }
    if (agg.n_produced > 0) {
        const auto m = static_cast<double>(agg.n_produced);
        agg.l0 = l0 / m;
        agg.l1 = l1 / m;
        agg.ynn = yn / m;
        agg.feasibility = feas / m;
        agg.redundancy = red / m;
        agg.violation = viol / m;
    } else {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        agg.l0 = agg.l1 = agg.ynn = agg.feasibility = agg.redundancy = agg.violation = nan;
    }
    return agg;
}

void write_individual_csv(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "index,success,L0,L1,yNN,feasibility,redundancy,violation,time_s\n";
    auto field = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string();
    };
    for (const auto& rec : report.records) {
        out << rec.index << ',' << (rec.success ? 1 : 0) << ',' << field(rec.l0) << ','
            << field(rec.l1) << ',' << field(rec.ynn) << ',' << field(rec.feasibility) << ','
            << field(rec.redundancy) << ',' << field(rec.violation) << ','
            << format_double(rec.time_seconds) << '\n';
    }
}

}  // namespace mcce
