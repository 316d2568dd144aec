#include "mcce/ctree.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mcce {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("ctree: " + msg); }

// Influence transform of the response: identity for numeric columns, one-hot
// over the level set otherwise.
Eigen::MatrixXd influence_matrix(const Dataset& ds, int response) {
    const FeatureSchema& f = ds.schema[static_cast<std::size_t>(response)];
    const Eigen::Index n = ds.n_rows();
    if (is_numeric_kind(f.kind)) {
        Eigen::MatrixXd h(n, 1);
        h.col(0) = ds.cells.col(response);
        return h;
    }
    const Eigen::Index q = static_cast<Eigen::Index>(f.levels.size());
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, q);
    for (Eigen::Index i = 0; i < n; ++i) {
        h(i, static_cast<Eigen::Index>(ds.cells(i, response))) = 1.0;
    }
    return h;
}

struct NodeStats {
    Eigen::VectorXd eh;       // mean influence
    Eigen::VectorXd vh;       // per-component variance (1/n; permutation form)
    Eigen::VectorXd active;   // 1.0 where vh is numerically nonzero
    int n_active = 0;
};

NodeStats node_stats(const Eigen::MatrixXd& h, const std::vector<Eigen::Index>& rows) {
    const auto n = static_cast<double>(rows.size());
    const Eigen::Index q = h.cols();
    NodeStats s;
    s.eh = Eigen::VectorXd::Zero(q);
    Eigen::VectorXd hmax = Eigen::VectorXd::Zero(q);
    for (Eigen::Index r : rows) {
        s.eh += h.row(r).transpose();
        hmax = hmax.cwiseMax(h.row(r).transpose().cwiseAbs());
    }
    s.eh /= n;
    s.vh = Eigen::VectorXd::Zero(q);
    for (Eigen::Index r : rows) {
        s.vh += (h.row(r).transpose() - s.eh).cwiseAbs2();
    }
    s.vh /= n;
    s.active = Eigen::VectorXd::Zero(q);
    for (Eigen::Index b = 0; b < q; ++b) {
        const double tol = 1e-10 * hmax(b);
        if (s.vh(b) > tol * tol) {
            s.active(b) = 1.0;
            ++s.n_active;
        }
    }
    return s;
}

// Standardized linear statistic of one candidate column against the response
// influence, maximized over non-degenerate components. Returns the component
// count actually tested; zero means the column carries no variation here.
struct ColumnTest {
    double z = 0.0;
    int n_components = 0;
};

ColumnTest test_numeric_column(const Dataset& ds, int col, const Eigen::MatrixXd& h,
                               const std::vector<Eigen::Index>& rows, const NodeStats& st) {
    const auto n = static_cast<double>(rows.size());
    double gsum = 0.0;
    double gmax = 0.0;
    for (Eigen::Index r : rows) {
        gsum += ds.cells(r, col);
        gmax = std::max(gmax, std::abs(ds.cells(r, col)));
    }
    const double gmean = gsum / n;
    double sgg = 0.0;  // centered sum of squares
    Eigen::VectorXd t = Eigen::VectorXd::Zero(h.cols());
    for (Eigen::Index r : rows) {
        const double gc = ds.cells(r, col) - gmean;
        sgg += gc * gc;
        t += gc * (h.row(r).transpose() - st.eh);
    }
    const double gtol = 1e-10 * gmax;
    if (sgg <= gtol * gtol * n) return {};
    ColumnTest out;
    for (Eigen::Index b = 0; b < h.cols(); ++b) {
        if (st.active(b) == 0.0) continue;
        const double var = (n / (n - 1.0)) * st.vh(b) * sgg;
        out.z = std::max(out.z, std::abs(t(b)) / std::sqrt(var));
        ++out.n_components;
    }
    return out;
}

ColumnTest test_level_column(const Dataset& ds, int col, const Eigen::MatrixXd& h,
                             const std::vector<Eigen::Index>& rows, const NodeStats& st) {
    const auto n = static_cast<double>(rows.size());
    const auto n_levels =
        static_cast<Eigen::Index>(ds.schema[static_cast<std::size_t>(col)].levels.size());
    Eigen::VectorXd count = Eigen::VectorXd::Zero(n_levels);
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n_levels, h.cols());
    for (Eigen::Index r : rows) {
        const auto a = static_cast<Eigen::Index>(ds.cells(r, col));
        count(a) += 1.0;
        t.row(a) += h.row(r) - st.eh.transpose();
    }
    ColumnTest out;
    for (Eigen::Index a = 0; a < n_levels; ++a) {
        const double sgg = count(a) * (n - count(a)) / n;
        if (sgg <= 0.0) continue;
        for (Eigen::Index b = 0; b < h.cols(); ++b) {
            if (st.active(b) == 0.0) continue;
            const double var = (n / (n - 1.0)) * st.vh(b) * sgg;
            out.z = std::max(out.z, std::abs(t(a, b)) / std::sqrt(var));
            ++out.n_components;
        }
    }
    return out;
}

double column_p_value(const ColumnTest& ct) {
    if (ct.n_components == 0) return 1.0;
    const double p_one = std::erfc(ct.z / std::sqrt(2.0));
    return std::min(1.0, static_cast<double>(ct.n_components) * p_one);
}

// Two-sample standardized statistic for a candidate left group of size m:
// |sum of centered influence over the group| scaled by the permutation
// variance vh * m (n - m) / (n - 1), maximized over active components.
double cut_statistic(const Eigen::VectorXd& group_sum, double m, double n, const NodeStats& st) {
    double z = 0.0;
    for (Eigen::Index b = 0; b < group_sum.size(); ++b) {
        if (st.active(b) == 0.0) continue;
        const double var = st.vh(b) * m * (n - m) / (n - 1.0);
        z = std::max(z, std::abs(group_sum(b)) / std::sqrt(var));
    }
    return z;
}

struct SplitChoice {
    bool found = false;
    double threshold = 0.0;
    std::vector<int> left_levels;
    std::vector<int> right_levels;
};

SplitChoice best_numeric_cut(const Dataset& ds, int col, const Eigen::MatrixXd& h,
                             const std::vector<Eigen::Index>& rows, const NodeStats& st,
                             const CTreeConfig& cfg) {
    const auto n = static_cast<double>(rows.size());
    std::vector<Eigen::Index> order = rows;
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return ds.cells(a, col) < ds.cells(b, col);
    });
    SplitChoice best;
    double best_z = -1.0;
    Eigen::VectorXd prefix = Eigen::VectorXd::Zero(h.cols());
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        prefix += h.row(order[i]).transpose() - st.eh;
        const double lo = ds.cells(order[i], col);
        const double hi = ds.cells(order[i + 1], col);
        if (lo == hi) continue;
        const auto m = static_cast<double>(i + 1);
        if (m < cfg.min_bucket || n - m < cfg.min_bucket) continue;
        const double z = cut_statistic(prefix, m, n, st);
        if (z > best_z) {
            best_z = z;
            best.found = true;
            best.threshold = lo + (hi - lo) / 2.0;
        }
    }
    return best;
}

SplitChoice best_level_cut(const Dataset& ds, int col, const Eigen::MatrixXd& h,
                           const std::vector<Eigen::Index>& rows, const NodeStats& st,
                           const CTreeConfig& cfg) {
    const auto n = static_cast<double>(rows.size());
    const auto n_levels =
        static_cast<Eigen::Index>(ds.schema[static_cast<std::size_t>(col)].levels.size());
    Eigen::VectorXd count = Eigen::VectorXd::Zero(n_levels);
    Eigen::MatrixXd group = Eigen::MatrixXd::Zero(n_levels, h.cols());
    Eigen::VectorXd score = Eigen::VectorXd::Zero(n_levels);
    for (Eigen::Index r : rows) {
        const auto a = static_cast<Eigen::Index>(ds.cells(r, col));
        count(a) += 1.0;
        group.row(a) += h.row(r) - st.eh.transpose();
        score(a) += h(r, 0);
    }
    // Present levels ordered by mean response influence (mean value for a
    // numeric response, first-level frequency otherwise); ties keep level
    // code order.
    std::vector<int> present;
    for (Eigen::Index a = 0; a < n_levels; ++a) {
        if (count(a) > 0.0) present.push_back(static_cast<int>(a));
    }
    std::sort(present.begin(), present.end(), [&](int a, int b) {
        const double sa = score(a) / count(a);
        const double sb = score(b) / count(b);
        if (sa != sb) return sa < sb;
        return a < b;
    });
    SplitChoice best;
    double best_z = -1.0;
    Eigen::VectorXd prefix = Eigen::VectorXd::Zero(h.cols());
    double m = 0.0;
    for (std::size_t k = 0; k + 1 < present.size(); ++k) {
        prefix += group.row(present[k]).transpose();
        m += count(present[k]);
        if (m < cfg.min_bucket || n - m < cfg.min_bucket) continue;
        const double z = cut_statistic(prefix, m, n, st);
        if (z > best_z) {
            best_z = z;
            best.found = true;
            best.left_levels.assign(present.begin(), present.begin() + static_cast<long>(k) + 1);
            best.right_levels.assign(present.begin() + static_cast<long>(k) + 1, present.end());
        }
    }
    std::sort(best.left_levels.begin(), best.left_levels.end());
    std::sort(best.right_levels.begin(), best.right_levels.end());
    return best;
}

struct Builder {
    const Dataset& ds;
    const CTreeConfig& cfg;
    Eigen::MatrixXd h;
    std::vector<int> conditioners;
    std::vector<TreeNode> nodes;

    int build(std::vector<Eigen::Index> rows, int depth) {
        const int id = static_cast<int>(nodes.size());
        nodes.emplace_back();
        const auto n = static_cast<Eigen::Index>(rows.size());
        if (n < cfg.min_split || depth >= cfg.max_depth || conditioners.empty()) {
            nodes[id].rows = std::move(rows);
            return id;
        }
        const NodeStats st = node_stats(h, rows);
        if (st.n_active == 0) {
            nodes[id].rows = std::move(rows);
            return id;
        }

        int best_col = -1;
        double best_p = std::numeric_limits<double>::infinity();
        double best_z = -1.0;
        std::vector<double> p_cols;
        int n_tested = 0;
        for (int col : conditioners) {
            const FeatureSchema& f = ds.schema[static_cast<std::size_t>(col)];
            const ColumnTest ct = is_numeric_kind(f.kind)
                                      ? test_numeric_column(ds, col, h, rows, st)
                                      : test_level_column(ds, col, h, rows, st);
            if (ct.n_components == 0) continue;
            ++n_tested;
            const double p = column_p_value(ct);
            if (p < best_p || (p == best_p && ct.z > best_z)) {
                best_p = p;
                best_z = ct.z;
                best_col = col;
            }
        }
        if (best_col < 0) {
            nodes[id].rows = std::move(rows);
            return id;
        }
        const double p_adj = std::min(1.0, n_tested * best_p);
        if (p_adj > cfg.alpha) {
            nodes[id].rows = std::move(rows);
            return id;
        }

        const FeatureSchema& f = ds.schema[static_cast<std::size_t>(best_col)];
        const SplitChoice cut = is_numeric_kind(f.kind)
                                    ? best_numeric_cut(ds, best_col, h, rows, st, cfg)
                                    : best_level_cut(ds, best_col, h, rows, st, cfg);
        if (!cut.found) {
            nodes[id].rows = std::move(rows);
            return id;
        }

        std::vector<Eigen::Index> left_rows;
        std::vector<Eigen::Index> right_rows;
        for (Eigen::Index r : rows) {
            const double v = ds.cells(r, best_col);
            bool go_left;
            if (is_numeric_kind(f.kind)) {
                go_left = v <= cut.threshold;
            } else {
                go_left = std::find(cut.left_levels.begin(), cut.left_levels.end(),
                                    static_cast<int>(v)) != cut.left_levels.end();
            }
            (go_left ? left_rows : right_rows).push_back(r);
        }
        nodes[id].split_column = best_col;
        nodes[id].threshold = cut.threshold;
        nodes[id].left_levels = cut.left_levels;
        nodes[id].right_levels = cut.right_levels;
        nodes[id].majority_left = left_rows.size() >= right_rows.size();
        const int left_id = build(std::move(left_rows), depth + 1);
        nodes[id].left = left_id;
        const int right_id = build(std::move(right_rows), depth + 1);
        nodes[id].right = right_id;
        return id;
    }
};

}  // namespace

void validate_config(const CTreeConfig& cfg) {
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) fail("alpha must lie in (0, 1)");
    if (cfg.min_bucket < 1) fail("min_bucket must be at least 1");
    if (2 * cfg.min_bucket > cfg.min_split) fail("min_split must be at least twice min_bucket");
    if (cfg.max_depth < 0) fail("max_depth must be non-negative");
}

std::vector<int> CTreeModel::leaf_ids() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].is_leaf()) out.push_back(static_cast<int>(i));
    }
    return out;
}

CTreeModel fit_ctree(const Dataset& ds, int response, const std::vector<int>& conditioners,
                     const CTreeConfig& cfg) {
    validate_config(cfg);
    if (ds.n_rows() == 0) fail("empty dataset");
    const auto p = static_cast<int>(ds.n_features());
    if (response < 0 || response >= p) fail("response column out of range");
    for (int c : conditioners) {
        if (c < 0 || c >= p) fail("conditioning column out of range");
        if (c == response) {
            fail("response column '" + ds.schema[static_cast<std::size_t>(response)].name +
                 "' cannot also condition the tree");
        }
    }

    CTreeModel model;
    model.response_column = response;
    model.conditioning_columns = conditioners;
    Builder builder{ds, cfg, influence_matrix(ds, response), conditioners, {}};
    std::vector<Eigen::Index> all(static_cast<std::size_t>(ds.n_rows()));
    for (Eigen::Index i = 0; i < ds.n_rows(); ++i) all[static_cast<std::size_t>(i)] = i;
    builder.build(std::move(all), 0);
    model.nodes = std::move(builder.nodes);
    return model;
}

int route(const CTreeModel& model, const Instance& x) {
    int id = 0;
    while (!model.nodes[static_cast<std::size_t>(id)].is_leaf()) {
        const TreeNode& node = model.nodes[static_cast<std::size_t>(id)];
        const double v = x(node.split_column);
        bool go_left;
        if (node.left_levels.empty() && node.right_levels.empty()) {
            go_left = v <= node.threshold;
        } else {
            const int code = static_cast<int>(v);
            if (std::find(node.left_levels.begin(), node.left_levels.end(), code) !=
                node.left_levels.end()) {
                go_left = true;
            } else if (std::find(node.right_levels.begin(), node.right_levels.end(), code) !=
                       node.right_levels.end()) {
                go_left = false;
            } else {
                go_left = node.majority_left;
            }
        }
        id = go_left ? node.left : node.right;
    }
    return id;
}

double sample_leaf(const CTreeModel& model, int leaf_id, const Dataset& ds,
                   std::mt19937_64& rng) {
    const TreeNode& node = model.nodes[static_cast<std::size_t>(leaf_id)];
    if (!node.is_leaf()) fail("sample_leaf called on an internal node");
    if (node.rows.empty()) fail("leaf holds no rows");
    const auto pick = static_cast<std::size_t>(rng() % node.rows.size());
    return ds.cells(node.rows[pick], model.response_column);
}

nlohmann::json tree_to_json(const CTreeModel& model) {
    nlohmann::json doc;
    doc["response_column"] = model.response_column;
    doc["conditioning_columns"] = model.conditioning_columns;
    nlohmann::json nodes = nlohmann::json::array();
    for (const TreeNode& node : model.nodes) {
        nlohmann::json j;
        if (node.is_leaf()) {
            j["rows"] = node.rows;
        } else {
            j["column"] = node.split_column;
            if (node.left_levels.empty() && node.right_levels.empty()) {
                j["threshold"] = node.threshold;
            } else {
                j["left_levels"] = node.left_levels;
                j["right_levels"] = node.right_levels;
            }
            j["majority"] = node.majority_left ? "left" : "right";
            j["left"] = node.left;
            j["right"] = node.right;
        }
        nodes.push_back(std::move(j));
    }
    doc["nodes"] = std::move(nodes);
    return doc;
}

CTreeModel tree_from_json(const nlohmann::json& doc) {
    CTreeModel model;
    model.response_column = doc.at("response_column").get<int>();
    model.conditioning_columns = doc.at("conditioning_columns").get<std::vector<int>>();
    for (const nlohmann::json& j : doc.at("nodes")) {
        TreeNode node;
        if (j.contains("column")) {
            node.split_column = j.at("column").get<int>();
            if (j.contains("threshold")) {
                node.threshold = j.at("threshold").get<double>();
            } else {
                node.left_levels = j.at("left_levels").get<std::vector<int>>();
                node.right_levels = j.at("right_levels").get<std::vector<int>>();
            }
            node.majority_left = j.at("majority").get<std::string>() == "left";
            node.left = j.at("left").get<int>();
            node.right = j.at("right").get<int>();
        } else {
            node.rows = j.at("rows").get<std::vector<Eigen::Index>>();
        }
        model.nodes.push_back(std::move(node));
    }
    if (model.nodes.empty()) fail("tree document holds no nodes");
    return model;
}

}  // namespace mcce
