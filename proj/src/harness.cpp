#include "mcce/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace mcce {

namespace {

using Clock = std::chrono::steady_clock;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("harness: " + msg); }

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_field(const std::string& text) {
    if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) fail("bad number '" + text + "' in report");
        return v;
    } catch (const std::invalid_argument&) {
        fail("bad number '" + text + "' in report");
    } catch (const std::out_of_range&) {
        fail("number out of range '" + text + "' in report");
    }
}

std::string fixed2(double v) {
    if (std::isnan(v)) return "-";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

std::string method_name(Method m) { return m == Method::Mcce ? "mcce" : "baseline"; }

Method method_from_name(const std::string& name) {
    if (name == "mcce") return Method::Mcce;
    if (name == "baseline") return Method::Baseline;
    fail("unknown method '" + name + "' (expected mcce or baseline)");
}

void validate_experiment_config(const ExperimentConfig& cfg) {
    if (cfg.n_test < 1) fail("n_test must be at least 1");
    if (cfg.k_rows < 1) fail("candidate count must be at least 1");
    if (cfg.k_neighbors < 1) fail("neighbor count must be at least 1");
    if (!(cfg.cutoff > 0.0 && cfg.cutoff < 1.0)) fail("cutoff must lie in (0, 1)");
    if (cfg.threads < 1) fail("thread count must be at least 1");
    if (cfg.repetitions < 1) fail("repetitions must be at least 1");
    validate_config(cfg.tree);
}

std::string emit_report_csv(const ExperimentReport& report) {
    std::ostringstream out;
    out << "method,n_train,n_test,reps,L0,L1,yNN,feasibility,redundancy,violation,success";
    if (report.include_timing) out << ",t_one_s,t_all_m";
    out << '\n';
    for (const ReportRow& r : report.rows) {
        out << r.method << ',' << r.n_train << ',' << r.n_test << ',' << r.repetitions << ','
            << format_double(r.l0) << ',' << format_double(r.l1) << ',' << format_double(r.ynn)
            << ',' << format_double(r.feasibility) << ',' << format_double(r.redundancy) << ','
            << format_double(r.violation) << ',' << format_double(r.success);
        if (report.include_timing) {
            out << ',' << format_double(r.t_one_seconds) << ',' << format_double(r.t_all_minutes);
        }
        out << '\n';
    }
    return out.str();
}

ExperimentReport parse_report_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) fail("empty report");
    const std::vector<std::string> header = split_fields(line);
    const std::string base =
        "method,n_train,n_test,reps,L0,L1,yNN,feasibility,redundancy,violation,success";
    ExperimentReport report;
    if (header.size() == 13) {
        report.include_timing = true;
    } else if (header.size() == 11) {
        report.include_timing = false;
    } else {
        fail("unexpected report header");
    }
    std::string expect = base;
    if (report.include_timing) expect += ",t_one_s,t_all_m";
    {
        std::string joined;
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) joined += ',';
            joined += header[i];
        }
        if (joined != expect) fail("unexpected report header");
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> f = split_fields(line);
        if (f.size() != header.size()) fail("report row has wrong field count");
        ReportRow r;
        r.method = f[0];
        r.n_train = static_cast<Eigen::Index>(parse_field(f[1]));
        r.n_test = static_cast<Eigen::Index>(parse_field(f[2]));
        r.repetitions = static_cast<int>(parse_field(f[3]));
        r.l0 = parse_field(f[4]);
        r.l1 = parse_field(f[5]);
        r.ynn = parse_field(f[6]);
        r.feasibility = parse_field(f[7]);
        r.redundancy = parse_field(f[8]);
        r.violation = parse_field(f[9]);
        r.success = parse_field(f[10]);
        if (report.include_timing) {
            r.t_one_seconds = parse_field(f[11]);
            r.t_all_minutes = parse_field(f[12]);
        }
        report.rows.push_back(std::move(r));
    }
    return report;
}

std::string format_report_table(const ExperimentReport& report) {
    std::vector<std::string> headers = {"method", "n_train", "n_test", "reps",    "L0",
                                        "L1",     "yNN",     "feas.",  "redund.", "violation",
                                        "success"};
    if (report.include_timing) {
        headers.push_back("t(s) one");
        headers.push_back("t(m) all");
    }
    std::vector<std::vector<std::string>> cells;
    for (const ReportRow& r : report.rows) {
        std::vector<std::string> row = {r.method,
                                        std::to_string(r.n_train),
                                        std::to_string(r.n_test),
                                        std::to_string(r.repetitions),
                                        fixed2(r.l0),
                                        fixed2(r.l1),
                                        fixed2(r.ynn),
                                        fixed2(r.feasibility),
                                        fixed2(r.redundancy),
                                        fixed2(r.violation),
                                        fixed2(r.success)};
        if (report.include_timing) {
            row.push_back(fixed2(r.t_one_seconds));
            row.push_back(fixed2(r.t_all_minutes));
        }
        cells.push_back(std::move(row));
    }
    std::vector<std::size_t> width(headers.size());
    for (std::size_t j = 0; j < headers.size(); ++j) {
        width[j] = headers[j].size();
        for (const auto& row : cells) width[j] = std::max(width[j], row[j].size());
    }
    std::ostringstream out;
    auto emit_row = [&](const std::vector<std::string>& row) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out << "  ";
            if (j == 0) {
                out << row[j] << std::string(width[j] - row[j].size(), ' ');
            } else {
                out << std::string(width[j] - row[j].size(), ' ') << row[j];
            }
        }
        out << '\n';
    };
    emit_row(headers);
    for (const auto& row : cells) emit_row(row);
    return out.str();
}

std::vector<Eigen::Index> select_test_set(const Dataset& ds, const Predictor& pred,
                                          Eigen::Index n_test) {
    if (n_test < 1) fail("n_test must be at least 1");
    std::vector<Eigen::Index> out;
    const Eigen::VectorXd scores = predict_rows(pred, ds, ds.cells);
    for (Eigen::Index i = 0; i < ds.n_rows() && static_cast<Eigen::Index>(out.size()) < n_test;
         ++i) {
        if (scores(i) <= pred.cutoff) out.push_back(i);
    }
    if (static_cast<Eigen::Index>(out.size()) < n_test) {
        Eigen::Index total = 0;
        for (Eigen::Index i = 0; i < ds.n_rows(); ++i) {
            if (scores(i) <= pred.cutoff) ++total;
        }
        fail("requested " + std::to_string(n_test) + " test individuals but only " +
             std::to_string(total) + " rows score at or below the cutoff");
    }
    return out;
}

MethodRun run_method(const Dataset& train, const Dataset& metric_ds, const Predictor& pred_in,
                     const std::vector<Eigen::Index>& test_rows, const ExperimentConfig& cfg) {
    validate_experiment_config(cfg);
    Predictor pred = pred_in;
    pred.cutoff = cfg.cutoff;
    const KnnIndex idx = build_knn_index(metric_ds, cfg.k_neighbors);

    MethodRun run;
    ChainModel chain;
    if (cfg.method == Method::Mcce) {
        const auto t0 = Clock::now();
        chain = fit_chain(train, cfg.tree);
        run.fit_seconds = seconds_since(t0);
    }

    const std::size_t n = test_rows.size();
    run.outcomes.assign(n, {});
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            IndividualOutcome& out = run.outcomes[i];
            out.test_row = test_rows[i];
            out.record.index = static_cast<int>(i);
            const Instance x = metric_ds.row(test_rows[i]);
            try {
                const auto t0 = Clock::now();
                CandidateSet cand =
                    cfg.method == Method::Mcce
                        ? generate(chain, train, pred, x, cfg.k_rows,
                                   cfg.seed + static_cast<std::uint64_t>(i))
                        : generate_baseline(train, pred, x);
                CounterfactualResult sel = select_ideal(cand, metric_ds, pred);
                sel.elapsed_seconds = seconds_since(t0);
                out.record.success = sel.counterfactual.has_value();
                out.record.time_seconds = sel.elapsed_seconds;
                if (sel.counterfactual) {
                    const Instance& e = *sel.counterfactual;
                    out.record.l0 = sparsity(x, e);
                    out.record.l1 = gower(metric_ds, x, e);
                    out.record.ynn = ynn(idx, pred, metric_ds, e);
                    out.record.feasibility = feasibility(idx, metric_ds, e);
                    out.record.redundancy = redundancy(pred, metric_ds, x, e);
                    out.record.violation = violation(metric_ds.schema, x, e);
                }
                out.result = std::move(sel);
            } catch (const std::exception& ex) {
                out.error = ex.what();
                out.record.success = false;
            }
        }
    };
    if (cfg.threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(cfg.threads));
        for (int t = 0; t < cfg.threads; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    for (const IndividualOutcome& out : run.outcomes) {
        if (!out.error.empty()) {
            std::cerr << "warning: individual " << out.record.index << ": " << out.error << '\n';
        }
    }

    MetricsReport mrep;
    for (const IndividualOutcome& out : run.outcomes) mrep.records.push_back(out.record);
    const AggregateRow agg = aggregate(mrep);
    double total_seconds = run.fit_seconds;
    for (const IndividualOutcome& out : run.outcomes) total_seconds += out.record.time_seconds;

    ReportRow& row = run.row;
    row.method = method_name(cfg.method);
    row.n_train = train.n_rows();
    row.n_test = static_cast<Eigen::Index>(n);
    row.repetitions = 1;
    row.l0 = agg.l0;
    row.l1 = agg.l1;
    row.ynn = agg.ynn;
    row.feasibility = agg.feasibility;
    row.redundancy = agg.redundancy;
    row.violation = agg.violation;
    row.success = agg.success;
    row.t_one_seconds = run.fit_seconds + agg.mean_time_seconds;
    row.t_all_minutes = total_seconds / 60.0;
    return run;
}

ExperimentReport run_bench(const Dataset& ds, const Predictor& pred,
                           const std::vector<Method>& methods, const ExperimentConfig& cfg,
                           std::vector<MethodRun>* runs) {
    validate_experiment_config(cfg);
    Predictor scorer = pred;
    scorer.cutoff = cfg.cutoff;
    const std::vector<Eigen::Index> test_rows = select_test_set(ds, scorer, cfg.n_test);

    const Dataset* train = &ds;
    Dataset holdout;
    if (cfg.holdout_test) {
        std::vector<char> is_test(static_cast<std::size_t>(ds.n_rows()), 0);
        for (Eigen::Index r : test_rows) is_test[static_cast<std::size_t>(r)] = 1;
        Eigen::MatrixXd kept(ds.n_rows() - static_cast<Eigen::Index>(test_rows.size()),
                             ds.n_features());
        Eigen::Index at = 0;
        for (Eigen::Index i = 0; i < ds.n_rows(); ++i) {
            if (!is_test[static_cast<std::size_t>(i)]) kept.row(at++) = ds.cells.row(i);
        }
        holdout = make_dataset(ds.schema, std::move(kept));
        train = &holdout;
    }

    ExperimentReport report;
    report.include_timing = cfg.include_timing;
    for (Method m : methods) {
        ExperimentConfig mcfg = cfg;
        mcfg.method = m;
        MethodRun run = run_method(*train, ds, pred, test_rows, mcfg);
        if (!report.include_timing) {
            run.row.t_one_seconds = 0.0;
            run.row.t_all_minutes = 0.0;
        }
        report.rows.push_back(run.row);
        if (runs) runs->push_back(std::move(run));
    }
    return report;
}

ExperimentReport run_experiment(const Dataset& ds, const Predictor& pred,
                                const ExperimentConfig& cfg, std::vector<MethodRun>* runs) {
    return run_bench(ds, pred, {cfg.method}, cfg, runs);
}

namespace {

double nan_mean(const std::vector<double>& values) {
    double sum = 0.0;
    int n = 0;
    for (double v : values) {
        if (std::isnan(v)) continue;
        sum += v;
        ++n;
    }
    return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / n;
}

}  // namespace

ExperimentReport run_subsample_study(const Dataset& ds, const Predictor& pred,
                                     const ExperimentConfig& cfg) {
    validate_experiment_config(cfg);
    if (cfg.subsample_sizes.empty()) fail("no subsample sizes given");
    Predictor scorer = pred;
    scorer.cutoff = cfg.cutoff;
    const std::vector<Eigen::Index> test_rows = select_test_set(ds, scorer, cfg.n_test);

    std::vector<Eigen::Index> pool;
    {
        std::vector<char> is_test(static_cast<std::size_t>(ds.n_rows()), 0);
        for (Eigen::Index r : test_rows) is_test[static_cast<std::size_t>(r)] = 1;
        for (Eigen::Index i = 0; i < ds.n_rows(); ++i) {
            if (!is_test[static_cast<std::size_t>(i)]) pool.push_back(i);
        }
    }
    for (Eigen::Index size : cfg.subsample_sizes) {
        if (size < 1) fail("subsample size must be positive");
        if (size > static_cast<Eigen::Index>(pool.size())) {
            fail("subsample size " + std::to_string(size) + " exceeds the " +
                 std::to_string(pool.size()) + " training rows left after holding out the test set");
        }
        if (size < cfg.tree.min_split) {
            std::cerr << "warning: subsample size " << size
                      << " is below min_split; trees will not split\n";
        }
    }

    std::mt19937_64 rng(cfg.seed);
    ExperimentReport report;
    report.include_timing = cfg.include_timing;
    for (Eigen::Index size : cfg.subsample_sizes) {
        std::vector<ReportRow> rep_rows;
        for (int rep = 0; rep < cfg.repetitions; ++rep) {
            std::vector<Eigen::Index> chosen;
            chosen.reserve(static_cast<std::size_t>(size));
            std::sample(pool.begin(), pool.end(), std::back_inserter(chosen),
                        static_cast<std::size_t>(size), rng);
            Eigen::MatrixXd cells(size, ds.n_features());
            for (Eigen::Index i = 0; i < size; ++i) {
                cells.row(i) = ds.cells.row(chosen[static_cast<std::size_t>(i)]);
            }
            const Dataset sub = make_dataset(ds.schema, std::move(cells));
            rep_rows.push_back(run_method(sub, ds, pred, test_rows, cfg).row);
        }
        ReportRow mean = rep_rows.front();
        mean.n_train = size;
        mean.repetitions = cfg.repetitions;
        auto column = [&](double ReportRow::*field) {
            std::vector<double> values;
            values.reserve(rep_rows.size());
            for (const ReportRow& r : rep_rows) values.push_back(r.*field);
            return nan_mean(values);
        };
        mean.l0 = column(&ReportRow::l0);
        mean.l1 = column(&ReportRow::l1);
        mean.ynn = column(&ReportRow::ynn);
        mean.feasibility = column(&ReportRow::feasibility);
        mean.redundancy = column(&ReportRow::redundancy);
        mean.violation = column(&ReportRow::violation);
        mean.success = column(&ReportRow::success);
        mean.t_one_seconds = cfg.include_timing ? column(&ReportRow::t_one_seconds) : 0.0;
        mean.t_all_minutes = cfg.include_timing ? column(&ReportRow::t_all_minutes) : 0.0;
        report.rows.push_back(std::move(mean));
    }
    return report;
}

std::string synthetic_kind_name(SyntheticKind kind) {
    switch (kind) {
        case SyntheticKind::IndependentGaussian: return "independent-gaussian";
        case SyntheticKind::DependentPair: return "dependent-pair";
        case SyntheticKind::MixedTypes: return "mixed-types";
    }
    fail("unknown synthetic kind");
}

SyntheticKind synthetic_kind_from_name(const std::string& name) {
    if (name == "independent-gaussian") return SyntheticKind::IndependentGaussian;
    if (name == "dependent-pair") return SyntheticKind::DependentPair;
    if (name == "mixed-types") return SyntheticKind::MixedTypes;
    fail("unknown synthetic kind '" + name + "'");
}

namespace {

double sigmoid(double z) { return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

SyntheticData make_independent_gaussian(Eigen::Index n, std::uint64_t seed) {
    Schema schema;
    for (int j = 1; j <= 5; ++j) {
        schema.push_back({"x" + std::to_string(j), FeatureKind::Continuous, {}, Mutability::Mutable});
    }
    const Eigen::VectorXd w = (Eigen::VectorXd(5) << 1.0, -1.0, 0.5, -0.5, 0.25).finished();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::MatrixXd cells(n, 5);
    Eigen::VectorXd labels(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < 5; ++j) cells(i, j) = normal(rng);
        labels(i) = unit(rng) < sigmoid(w.dot(cells.row(i))) ? 1.0 : 0.0;
    }
    return {make_dataset(schema, std::move(cells)), std::move(labels)};
}

SyntheticData make_dependent_pair(Eigen::Index n, std::uint64_t seed) {
    Schema schema = {{"a", FeatureKind::Continuous, {}, Mutability::Mutable},
                     {"b", FeatureKind::Continuous, {}, Mutability::Mutable}};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.05);
    Eigen::MatrixXd cells(n, 2);
    Eigen::VectorXd labels(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double a = unit(rng);
        cells(i, 0) = a;
        cells(i, 1) = 2.0 * a + 1.0 + noise(rng);
        labels(i) = unit(rng) < sigmoid(6.0 * (a - 0.5)) ? 1.0 : 0.0;
    }
    return {make_dataset(schema, std::move(cells)), std::move(labels)};
}

SyntheticData make_mixed_types(Eigen::Index n, std::uint64_t seed) {
    Schema schema = {
        {"age", FeatureKind::Discrete, {}, Mutability::Fixed},
        {"group", FeatureKind::Categorical, {"a", "b", "c"}, Mutability::Fixed},
        {"income", FeatureKind::Continuous, {}, Mutability::Mutable},
        {"loans", FeatureKind::Discrete, {}, Mutability::Mutable},
        {"grade", FeatureKind::Ordinal, {"low", "mid", "high"}, Mutability::Mutable},
        {"score", FeatureKind::Continuous, {}, Mutability::Mutable},
    };
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> decade(0, 4);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double group_effect[3] = {0.0, 8.0, 15.0};
    Eigen::MatrixXd cells(n, 6);
    Eigen::VectorXd labels(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double age = 20.0 + 10.0 * decade(rng);
        const double u = unit(rng);
        const int group = u < 0.5 ? 0 : (u < 0.8 ? 1 : 2);
        const double income = 30.0 + 0.5 * (age - 20.0) + group_effect[group] + 8.0 * normal(rng);
        double loans = std::round(1.5 + 0.02 * (60.0 - income) + 0.8 * normal(rng));
        loans = std::min(5.0, std::max(0.0, loans));
        const double grade_driver = income + 10.0 * normal(rng);
        const int grade = grade_driver < 45.0 ? 0 : (grade_driver < 68.0 ? 1 : 2);
        const double score = 30.0 + 0.6 * (income - 50.0) - 5.0 * loans + 14.0 * normal(rng);
        cells(i, 0) = age;
        cells(i, 1) = group;
        cells(i, 2) = income;
        cells(i, 3) = loans;
        cells(i, 4) = grade;
        cells(i, 5) = score;
        const double z = 0.15 * (score - 30.0) + 0.03 * (income - 55.0) - 0.25 * loans;
        labels(i) = unit(rng) < sigmoid(z) ? 1.0 : 0.0;
    }
    return {make_dataset(schema, std::move(cells)), std::move(labels)};
}

}  // namespace

SyntheticData make_synthetic(SyntheticKind kind, Eigen::Index n, std::uint64_t seed) {
    if (n < 10) fail("synthetic datasets need at least 10 rows");
    switch (kind) {
        case SyntheticKind::IndependentGaussian: return make_independent_gaussian(n, seed);
        case SyntheticKind::DependentPair: return make_dependent_pair(n, seed);
        case SyntheticKind::MixedTypes: return make_mixed_types(n, seed);
    }
    fail("unknown synthetic kind");
}

void save_ce_rows_csv(const Schema& schema, const std::vector<IndividualOutcome>& outcomes,
                      const std::string& path) {
    std::ofstream out(path);
    if (!out) fail("cannot write " + path);
    out << "individual,role";
    for (const FeatureSchema& f : schema) out << ',' << f.name;
    out << '\n';
    for (const IndividualOutcome& o : outcomes) {
        if (!o.result.counterfactual) continue;
        auto emit = [&](const char* role, const Instance& v) {
            out << o.record.index << ',' << role;
            for (std::size_t j = 0; j < schema.size(); ++j) {
                out << ',' << cell_text(schema[j], v(static_cast<Eigen::Index>(j)));
            }
            out << '\n';
        };
        emit("original", o.result.individual);
        emit("counterfactual", *o.result.counterfactual);
    }
}

void save_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write " + path);
    out << content;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace mcce
