#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

namespace mcce {

enum class FeatureKind { Continuous, Discrete, Categorical, Ordinal };
enum class Mutability { Mutable, Fixed };

inline bool is_numeric_kind(FeatureKind k) {
    return k == FeatureKind::Continuous || k == FeatureKind::Discrete;
}

std::string kind_name(FeatureKind k);
FeatureKind kind_from_name(const std::string& name);

/// Description of one column: its type, level set (categorical/ordinal) and
/// whether a counterfactual is allowed to change it.
struct FeatureSchema {
    std::string name;
    FeatureKind kind = FeatureKind::Continuous;
    std::vector<std::string> levels;
    Mutability mutability = Mutability::Mutable;

    bool fixed() const { return mutability == Mutability::Fixed; }
    /// Index of `label` in levels, -1 if unknown.
    int level_code(const std::string& label) const;
};

using Schema = std::vector<FeatureSchema>;

/// A raw p-vector of cell values aligned to a schema. Categorical and ordinal
/// cells hold the level code (index into FeatureSchema::levels) as a double.
using Instance = Eigen::VectorXd;

struct Range {
    double min = 0.0;
    double max = 0.0;
    double width() const { return max - min; }
};

/// Column-oriented table of raw cells plus the per-column ranges observed on
/// the data it was built from. Immutable after construction.
struct Dataset {
    Schema schema;
    Eigen::MatrixXd cells;       // N x p
    std::vector<Range> ranges;   // per column; used by numeric kinds only

    Eigen::Index n_rows() const { return cells.rows(); }
    Eigen::Index n_features() const { return cells.cols(); }
    Instance row(Eigen::Index i) const { return cells.row(i).transpose(); }
};

void validate_schema(const Schema& schema);
void validate_instance(const Schema& schema, const Instance& x);

Schema load_schema(const std::string& path);
void save_schema(const Schema& schema, const std::string& path);

/// Builds a Dataset from in-memory cells: validates them against the schema
/// and computes the observed per-column ranges.
Dataset make_dataset(Schema schema, Eigen::MatrixXd cells);

/// Reads a comma-separated file with one header row. Every schema column must
/// appear in the header; extra columns are ignored unless requested via
/// `extra_column` (read as numeric, e.g. a label).
Dataset load_csv(const std::string& path, const Schema& schema);
Dataset load_csv(const std::string& path, const Schema& schema,
                 const std::string& extra_column, Eigen::VectorXd* extra_values);

void save_csv(const Dataset& ds, const std::string& path);
void save_csv(const Dataset& ds, const std::string& path,
              const std::string& extra_column, const Eigen::VectorXd& extra_values);

/// Cell rendered back to its text form (level label or shortest decimal text
/// that parses back to the same double).
std::string cell_text(const FeatureSchema& feature, double cell);
std::string format_double(double v);

/// Width of the normalized encoding: 1 per numeric column, 1 per binary
/// categorical/ordinal column, L per column with L >= 3 levels.
Eigen::Index encoded_dim(const Schema& schema);

/// Min-max scales numeric cells with the training ranges (degenerate range
/// maps to 0) and expands categorical/ordinal cells to level indicators, in
/// schema order then level order. Binary level sets use a single indicator of
/// the second level.
Eigen::VectorXd normalize(const Dataset& ds, const Instance& x);
Eigen::MatrixXd normalize_rows(const Dataset& ds, const Eigen::MatrixXd& raw_rows);
Eigen::MatrixXd normalize_all(const Dataset& ds);

std::vector<int> fixed_columns(const Schema& schema);
std::vector<int> mutable_columns(const Schema& schema);

/// Partition of x into (fixed part, mutable part), schema order kept within
/// each part. merge_fixed_mutable is the inverse.
std::pair<Eigen::VectorXd, Eigen::VectorXd> split_fixed_mutable(const Schema& schema,
                                                                const Instance& x);
Instance merge_fixed_mutable(const Schema& schema, const Eigen::VectorXd& fixed_part,
                             const Eigen::VectorXd& mutable_part);

}  // namespace mcce
