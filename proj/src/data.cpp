#include "mcce/data.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace mcce {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

bool parse_double(const std::string& text, double* out) {
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, *out);
    return ec == std::errc() && ptr == end;
}

double parse_cell(const FeatureSchema& feature, const std::string& text,
                  std::size_t row, const std::string& what) {
    if (is_numeric_kind(feature.kind)) {
        double v = 0.0;
        if (!parse_double(text, &v))
            fail(what + ": row " + std::to_string(row) + ", column '" + feature.name +
                 "': cannot parse '" + text + "' as a number");
        return v;
    }
    const int code = feature.level_code(text);
    if (code < 0)
        fail(what + ": row " + std::to_string(row) + ", column '" + feature.name +
             "': unknown level '" + text + "'");
    return static_cast<double>(code);
}

std::vector<Range> compute_ranges(const Eigen::MatrixXd& cells) {
    std::vector<Range> ranges(static_cast<std::size_t>(cells.cols()));
    for (Eigen::Index j = 0; j < cells.cols(); ++j) {
        ranges[static_cast<std::size_t>(j)] = {cells.col(j).minCoeff(), cells.col(j).maxCoeff()};
    }
    return ranges;
}

}  // namespace

std::string kind_name(FeatureKind k) {
    switch (k) {
        case FeatureKind::Continuous: return "continuous";
        case FeatureKind::Discrete: return "discrete";
        case FeatureKind::Categorical: return "categorical";
        case FeatureKind::Ordinal: return "ordinal";
    }
    return "continuous";
}

FeatureKind kind_from_name(const std::string& name) {
    if (name == "continuous") return FeatureKind::Continuous;
    if (name == "discrete") return FeatureKind::Discrete;
    if (name == "categorical") return FeatureKind::Categorical;
    if (name == "ordinal") return FeatureKind::Ordinal;
    fail("unknown feature kind '" + name + "'");
}

int FeatureSchema::level_code(const std::string& label) const {
    auto it = std::find(levels.begin(), levels.end(), label);
    return it == levels.end() ? -1 : static_cast<int>(it - levels.begin());
}

void validate_schema(const Schema& schema) {
    if (schema.empty()) fail("schema has no features");
    bool any_mutable = false;
    for (const auto& f : schema) {
        if (f.name.empty()) fail("schema feature with empty name");
        if (is_numeric_kind(f.kind)) {
            if (!f.levels.empty())
                fail("feature '" + f.name + "': " + kind_name(f.kind) + " features take no levels");
        } else if (f.levels.empty()) {
            fail("feature '" + f.name + "': " + kind_name(f.kind) + " features need at least one level");
        }
        any_mutable = any_mutable || !f.fixed();
    }
    if (!any_mutable) fail("schema has no mutable feature");
    for (std::size_t i = 0; i < schema.size(); ++i)
        for (std::size_t j = i + 1; j < schema.size(); ++j)
            if (schema[i].name == schema[j].name) fail("duplicate feature name '" + schema[i].name + "'");
}

void validate_instance(const Schema& schema, const Instance& x) {
    if (static_cast<std::size_t>(x.size()) != schema.size())
        fail("instance has " + std::to_string(x.size()) + " cells, schema has " +
             std::to_string(schema.size()));
    for (std::size_t j = 0; j < schema.size(); ++j) {
        const auto& f = schema[j];
        const double v = x(static_cast<Eigen::Index>(j));
        if (!std::isfinite(v)) fail("column '" + f.name + "': non-finite cell");
        if (!is_numeric_kind(f.kind)) {
            const auto code = static_cast<long>(v);
            if (static_cast<double>(code) != v || code < 0 ||
                code >= static_cast<long>(f.levels.size()))
                fail("column '" + f.name + "': cell " + format_double(v) + " is not a valid level code");
        }
    }
}

Schema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open schema file '" + path + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        fail("schema file '" + path + "': " + e.what());
    }
    if (!doc.is_array()) fail("schema file '" + path + "': expected a JSON array");
    Schema schema;
    for (const auto& item : doc) {
        FeatureSchema f;
        f.name = item.at("name").get<std::string>();
        f.kind = kind_from_name(item.at("kind").get<std::string>());
        if (item.contains("levels")) f.levels = item["levels"].get<std::vector<std::string>>();
        f.mutability = item.value("fixed", false) ? Mutability::Fixed : Mutability::Mutable;
        schema.push_back(std::move(f));
    }
    validate_schema(schema);
    return schema;
}

void save_schema(const Schema& schema, const std::string& path) {
    json doc = json::array();
    for (const auto& f : schema) {
        json item{{"name", f.name}, {"kind", kind_name(f.kind)}, {"fixed", f.fixed()}};
        if (!f.levels.empty()) item["levels"] = f.levels;
        doc.push_back(std::move(item));
    }
    std::ofstream out(path);
    if (!out) fail("cannot write schema file '" + path + "'");
    out << doc.dump(2) << '\n';
}

Dataset make_dataset(Schema schema, Eigen::MatrixXd cells) {
    if (cells.rows() == 0) fail("dataset has no rows");
    if (static_cast<std::size_t>(cells.cols()) != schema.size())
        fail("cell matrix has " + std::to_string(cells.cols()) + " columns, schema has " +
             std::to_string(schema.size()));
    Dataset ds{std::move(schema), std::move(cells), {}};
    for (Eigen::Index i = 0; i < ds.n_rows(); ++i) validate_instance(ds.schema, ds.row(i));
    ds.ranges = compute_ranges(ds.cells);
    return ds;
}

Dataset load_csv(const std::string& path, const Schema& schema) {
    return load_csv(path, schema, "", nullptr);
}

Dataset load_csv(const std::string& path, const Schema& schema,
                 const std::string& extra_column, Eigen::VectorXd* extra_values) {
    std::ifstream in(path);
    if (!in) fail("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) fail("'" + path + "': empty file");
    const auto header = split_line(strip_cr(line));

    auto column_of = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) fail("'" + path + "': missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    std::vector<std::size_t> schema_col(schema.size());
    for (std::size_t j = 0; j < schema.size(); ++j) schema_col[j] = column_of(schema[j].name);
    std::size_t extra_col = 0;
    if (extra_values) extra_col = column_of(extra_column);

    std::vector<std::vector<double>> rows;
    std::vector<double> extras;
    std::size_t row_number = 0;
    while (std::getline(in, line)) {
        line = strip_cr(line);
        if (line.empty()) continue;
        ++row_number;
        const auto fields = split_line(line);
        if (fields.size() != header.size())
            fail("'" + path + "': row " + std::to_string(row_number) + " has " +
                 std::to_string(fields.size()) + " fields, header has " +
                 std::to_string(header.size()));
        std::vector<double> cells(schema.size());
        for (std::size_t j = 0; j < schema.size(); ++j)
            cells[j] = parse_cell(schema[j], fields[schema_col[j]], row_number, "'" + path + "'");
        rows.push_back(std::move(cells));
        if (extra_values) {
            double v = 0.0;
            if (!parse_double(fields[extra_col], &v))
                fail("'" + path + "': row " + std::to_string(row_number) + ", column '" +
                     extra_column + "': cannot parse '" + fields[extra_col] + "' as a number");
            extras.push_back(v);
        }
    }
    if (rows.empty()) fail("'" + path + "': no rows");

    Eigen::MatrixXd cells(static_cast<Eigen::Index>(rows.size()),
                          static_cast<Eigen::Index>(schema.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < schema.size(); ++j)
            cells(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    if (extra_values)
        *extra_values = Eigen::Map<Eigen::VectorXd>(extras.data(), static_cast<Eigen::Index>(extras.size()));
    return make_dataset(schema, std::move(cells));
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) return std::to_string(v);
    return std::string(buf, ptr);
}

std::string cell_text(const FeatureSchema& feature, double cell) {
    if (is_numeric_kind(feature.kind)) return format_double(cell);
    const auto code = static_cast<std::size_t>(cell);
    if (code >= feature.levels.size())
        fail("column '" + feature.name + "': level code " + format_double(cell) + " out of range");
    return feature.levels[code];
}

void save_csv(const Dataset& ds, const std::string& path) {
    save_csv(ds, path, "", Eigen::VectorXd());
}

void save_csv(const Dataset& ds, const std::string& path,
              const std::string& extra_column, const Eigen::VectorXd& extra_values) {
    const bool with_extra = !extra_column.empty();
    if (with_extra && extra_values.size() != ds.n_rows())
        fail("extra column '" + extra_column + "' has " + std::to_string(extra_values.size()) +
             " values for " + std::to_string(ds.n_rows()) + " rows");
    std::ofstream out(path);
    if (!out) fail("cannot write '" + path + "'");
    for (std::size_t j = 0; j < ds.schema.size(); ++j) {
        if (j) out << ',';
        out << ds.schema[j].name;
    }
    if (with_extra) out << ',' << extra_column;
    out << '\n';
    for (Eigen::Index i = 0; i < ds.n_rows(); ++i) {
        for (std::size_t j = 0; j < ds.schema.size(); ++j) {
            if (j) out << ',';
            out << cell_text(ds.schema[j], ds.cells(i, static_cast<Eigen::Index>(j)));
        }
        if (with_extra) out << ',' << format_double(extra_values(i));
        out << '\n';
    }
}

Eigen::Index encoded_dim(const Schema& schema) {
    Eigen::Index d = 0;
    for (const auto& f : schema) {
        if (is_numeric_kind(f.kind) || f.levels.size() <= 2)
            d += 1;
        else
            d += static_cast<Eigen::Index>(f.levels.size());
    }
    return d;
}

Eigen::VectorXd normalize(const Dataset& ds, const Instance& x) {
    validate_instance(ds.schema, x);
    Eigen::VectorXd enc = Eigen::VectorXd::Zero(encoded_dim(ds.schema));
    Eigen::Index pos = 0;
    for (std::size_t j = 0; j < ds.schema.size(); ++j) {
        const auto& f = ds.schema[j];
        const double v = x(static_cast<Eigen::Index>(j));
        if (is_numeric_kind(f.kind)) {
            const Range& r = ds.ranges[j];
            enc(pos++) = r.width() > 0.0 ? (v - r.min) / r.width() : 0.0;
        } else if (f.levels.size() <= 2) {
            enc(pos++) = v == 1.0 ? 1.0 : 0.0;
        } else {
            enc(pos + static_cast<Eigen::Index>(v)) = 1.0;
            pos += static_cast<Eigen::Index>(f.levels.size());
        }
    }
    return enc;
}

Eigen::MatrixXd normalize_rows(const Dataset& ds, const Eigen::MatrixXd& raw_rows) {
    Eigen::MatrixXd enc(raw_rows.rows(), encoded_dim(ds.schema));
    for (Eigen::Index i = 0; i < raw_rows.rows(); ++i)
        enc.row(i) = normalize(ds, raw_rows.row(i).transpose()).transpose();
    return enc;
}

Eigen::MatrixXd normalize_all(const Dataset& ds) { return normalize_rows(ds, ds.cells); }

std::vector<int> fixed_columns(const Schema& schema) {
    std::vector<int> idx;
    for (std::size_t j = 0; j < schema.size(); ++j)
        if (schema[j].fixed()) idx.push_back(static_cast<int>(j));
    return idx;
}

std::vector<int> mutable_columns(const Schema& schema) {
    std::vector<int> idx;
    for (std::size_t j = 0; j < schema.size(); ++j)
        if (!schema[j].fixed()) idx.push_back(static_cast<int>(j));
    return idx;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> split_fixed_mutable(const Schema& schema,
                                                                const Instance& x) {
    const auto fixed = fixed_columns(schema);
    const auto mut = mutable_columns(schema);
    Eigen::VectorXd fixed_part(static_cast<Eigen::Index>(fixed.size()));
    Eigen::VectorXd mutable_part(static_cast<Eigen::Index>(mut.size()));
    for (std::size_t i = 0; i < fixed.size(); ++i)
        fixed_part(static_cast<Eigen::Index>(i)) = x(fixed[i]);
    for (std::size_t i = 0; i < mut.size(); ++i)
        mutable_part(static_cast<Eigen::Index>(i)) = x(mut[i]);
    return {fixed_part, mutable_part};
}

Instance merge_fixed_mutable(const Schema& schema, const Eigen::VectorXd& fixed_part,
                             const Eigen::VectorXd& mutable_part) {
    const auto fixed = fixed_columns(schema);
    const auto mut = mutable_columns(schema);
    if (fixed_part.size() != static_cast<Eigen::Index>(fixed.size()) ||
        mutable_part.size() != static_cast<Eigen::Index>(mut.size()))
        fail("split parts do not match the schema partition");
    Instance x(static_cast<Eigen::Index>(schema.size()));
    for (std::size_t i = 0; i < fixed.size(); ++i) x(fixed[i]) = fixed_part(static_cast<Eigen::Index>(i));
    for (std::size_t i = 0; i < mut.size(); ++i) x(mut[i]) = mutable_part(static_cast<Eigen::Index>(i));
    return x;
}

}  // namespace mcce
