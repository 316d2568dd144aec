#include "mcce/harness.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct CommonArgs {
    std::string data;
    std::string schema;
    std::string model;
    std::string label = "label";
    int k_neighbors = 5;
    std::int64_t big_k = 10000;
    std::int64_t n_test = 100;
    double cutoff = 0.5;
    std::uint64_t seed = 0;
    std::string method = "mcce";
    int threads = 1;
    bool no_timing = false;
    bool holdout_test = false;
    double alpha = 0.05;
    int min_split = 20;
    int min_bucket = 7;
    int max_depth = 10;
    double learning_rate = 0.05;
    int epochs = 100;
};

void add_data_flags(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--data", a.data, "training data CSV")->required();
    cmd->add_option("--schema", a.schema, "feature schema JSON")->required();
}

void add_tree_flags(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--alpha", a.alpha, "split test significance level");
    cmd->add_option("--min-split", a.min_split, "smallest node a tree may split");
    cmd->add_option("--min-bucket", a.min_bucket, "smallest child a split may create");
    cmd->add_option("--max-depth", a.max_depth, "tree depth limit");
}

void add_experiment_flags(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--model", a.model, "predictor JSON (trained in-place when omitted)");
    cmd->add_option("--label", a.label, "label column used when training in-place");
    cmd->add_option("--k", a.k_neighbors, "neighbor count for yNN and feasibility");
    cmd->add_option("--big-k", a.big_k, "candidate rows sampled per individual");
    cmd->add_option("--n-test", a.n_test, "number of test individuals");
    cmd->add_option("--cutoff", a.cutoff, "decision cutoff c");
    cmd->add_option("--seed", a.seed, "random seed");
    cmd->add_option("--threads", a.threads, "worker threads over individuals");
    add_tree_flags(cmd, a);
}

mcce::CTreeConfig tree_config(const CommonArgs& a) {
    mcce::CTreeConfig cfg;
    cfg.alpha = a.alpha;
    cfg.min_split = a.min_split;
    cfg.min_bucket = a.min_bucket;
    cfg.max_depth = a.max_depth;
    return cfg;
}

mcce::ExperimentConfig experiment_config(const CommonArgs& a) {
    mcce::ExperimentConfig cfg;
    cfg.n_test = static_cast<Eigen::Index>(a.n_test);
    cfg.k_rows = static_cast<Eigen::Index>(a.big_k);
    cfg.k_neighbors = a.k_neighbors;
    cfg.cutoff = a.cutoff;
    cfg.seed = a.seed;
    cfg.threads = a.threads;
    cfg.include_timing = !a.no_timing;
    cfg.holdout_test = a.holdout_test;
    cfg.tree = tree_config(a);
    return cfg;
}

mcce::Predictor load_or_train(const CommonArgs& a, const mcce::Dataset& ds,
                              const Eigen::VectorXd& labels, bool have_labels) {
    if (!a.model.empty()) {
        mcce::Predictor pred = mcce::make_predictor(mcce::load_mlp(a.model), a.cutoff);
        return pred;
    }
    if (!have_labels) {
        throw std::runtime_error("no --model given and the data lacks a '" + a.label +
                                 "' column to train on");
    }
    mcce::MLPConfig mcfg;
    mcfg.learning_rate = a.learning_rate;
    mcfg.epochs = a.epochs;
    mcfg.seed = a.seed;
    mcce::Predictor pred = mcce::train_mlp(ds, labels, mcfg);
    pred.cutoff = a.cutoff;
    return pred;
}

mcce::Dataset load_data(const CommonArgs& a, Eigen::VectorXd* labels, bool* have_labels) {
    const mcce::Schema schema = mcce::load_schema(a.schema);
    if (!a.model.empty()) {
        *have_labels = false;
        return mcce::load_csv(a.data, schema);
    }
    *have_labels = true;
    return mcce::load_csv(a.data, schema, a.label, labels);
}

std::vector<mcce::Method> methods_from(const std::string& name) {
    if (name == "both") return {mcce::Method::Mcce, mcce::Method::Baseline};
    return {mcce::method_from_name(name)};
}

int run_synth(const std::string& kind, std::int64_t n, std::uint64_t seed,
              const std::string& out, const std::string& schema_out, const std::string& label) {
    const mcce::SyntheticData made =
        mcce::make_synthetic(mcce::synthetic_kind_from_name(kind), static_cast<Eigen::Index>(n),
                             seed);
    mcce::save_csv(made.ds, out, label, made.labels);
    mcce::save_schema(made.ds.schema, schema_out);
    std::cout << "wrote " << made.ds.n_rows() << " rows to " << out << " and the schema to "
              << schema_out << '\n';
    return 0;
}

int run_fit(const CommonArgs& a, const std::string& out, const std::string& chain_out) {
    const mcce::Schema schema = mcce::load_schema(a.schema);
    Eigen::VectorXd labels;
    const mcce::Dataset ds = mcce::load_csv(a.data, schema, a.label, &labels);
    mcce::MLPConfig mcfg;
    mcfg.learning_rate = a.learning_rate;
    mcfg.epochs = a.epochs;
    mcfg.seed = a.seed;
    mcce::MLPModel model;
    mcce::train_mlp(ds, labels, mcfg, &model);
    mcce::save_mlp(model, out);
    std::cout << "trained predictor on " << ds.n_rows() << " rows; saved to " << out << '\n';
    if (!chain_out.empty()) {
        const mcce::ChainModel chain = mcce::fit_chain(ds, tree_config(a));
        mcce::save_chain(chain, chain_out);
        std::cout << "fitted " << chain.trees.size() << " conditional trees; saved to "
                  << chain_out << '\n';
    }
    return 0;
}

int run_explain(const CommonArgs& a, const std::string& out, const std::string& valid_dump,
                const std::string& candidates_dump) {
    Eigen::VectorXd labels;
    bool have_labels = false;
    const mcce::Dataset ds = load_data(a, &labels, &have_labels);
    const mcce::Predictor pred = load_or_train(a, ds, labels, have_labels);
    mcce::ExperimentConfig cfg = experiment_config(a);
    cfg.method = mcce::method_from_name(a.method);

    std::vector<mcce::MethodRun> runs;
    mcce::run_bench(ds, pred, {cfg.method}, cfg, &runs);
    const mcce::MethodRun& run = runs.front();
    mcce::save_ce_rows_csv(ds.schema, run.outcomes, out);
    Eigen::Index produced = 0;
    for (const mcce::IndividualOutcome& o : run.outcomes) {
        if (o.result.counterfactual) ++produced;
    }
    std::cout << "explained " << produced << " of " << run.outcomes.size()
              << " individuals; rows written to " << out << '\n';

    if (!valid_dump.empty() || !candidates_dump.empty()) {
        mcce::Predictor scorer = pred;
        scorer.cutoff = cfg.cutoff;
        const mcce::KnnIndex idx = mcce::build_knn_index(ds, cfg.k_neighbors);
        mcce::ChainModel chain;
        if (cfg.method == mcce::Method::Mcce) chain = mcce::fit_chain(ds, cfg.tree);
        std::ofstream vout;
        if (!valid_dump.empty()) {
            vout.open(valid_dump);
            if (!vout) throw std::runtime_error("cannot write " + valid_dump);
            vout << "individual,row_id,sparsity,gower,feasibility\n";
        }
        for (std::size_t i = 0; i < run.outcomes.size(); ++i) {
            const mcce::IndividualOutcome& o = run.outcomes[i];
            const mcce::Instance x = ds.row(o.test_row);
            const mcce::CandidateSet cand =
                cfg.method == mcce::Method::Mcce
                    ? mcce::generate(chain, ds, scorer, x, cfg.k_rows,
                                     cfg.seed + static_cast<std::uint64_t>(i))
                    : mcce::generate_baseline(ds, scorer, x);
            if (!candidates_dump.empty() && i == 0) {
                mcce::save_candidates_csv(cand, ds.schema, candidates_dump);
            }
            if (!valid_dump.empty()) {
                for (const mcce::ValidRow& v : mcce::valid_set(cand, ds, scorer, idx)) {
                    vout << o.record.index << ',' << v.row << ',' << v.sparsity << ','
                         << mcce::format_double(v.gower) << ','
                         << mcce::format_double(v.feasibility) << '\n';
                }
            }
        }
        if (!valid_dump.empty()) std::cout << "valid-set dump written to " << valid_dump << '\n';
        if (!candidates_dump.empty()) {
            std::cout << "first individual's candidates written to " << candidates_dump << '\n';
        }
    }
    return 0;
}

int run_bench_cmd(const CommonArgs& a, const std::string& method, const std::string& out,
                  const std::string& table_out, const std::string& individuals_out,
                  const std::string& ce_out) {
    Eigen::VectorXd labels;
    bool have_labels = false;
    const mcce::Dataset ds = load_data(a, &labels, &have_labels);
    const mcce::Predictor pred = load_or_train(a, ds, labels, have_labels);
    const mcce::ExperimentConfig cfg = experiment_config(a);

    std::vector<mcce::MethodRun> runs;
    const mcce::ExperimentReport report = mcce::run_bench(ds, pred, methods_from(method), cfg, &runs);
    mcce::save_text_file(out, mcce::emit_report_csv(report));
    const std::string table = mcce::format_report_table(report);
    std::cout << table;
    if (!table_out.empty()) mcce::save_text_file(table_out, table);
    if (!individuals_out.empty()) {
        mcce::MetricsReport all;
        for (const mcce::MethodRun& run : runs) {
            for (const mcce::IndividualOutcome& o : run.outcomes) all.records.push_back(o.record);
        }
        mcce::write_individual_csv(all, individuals_out);
    }
    if (!ce_out.empty()) mcce::save_ce_rows_csv(ds.schema, runs.front().outcomes, ce_out);
    std::cout << "report written to " << out << '\n';
    return 0;
}

int run_subsample_cmd(const CommonArgs& a, const std::string& sizes_text, int reps,
                      const std::string& out, const std::string& table_out) {
    Eigen::VectorXd labels;
    bool have_labels = false;
    const mcce::Dataset ds = load_data(a, &labels, &have_labels);
    const mcce::Predictor pred = load_or_train(a, ds, labels, have_labels);
    mcce::ExperimentConfig cfg = experiment_config(a);
    cfg.method = mcce::method_from_name(a.method);
    cfg.repetitions = reps;
    std::stringstream ss(sizes_text);
    std::string piece;
    while (std::getline(ss, piece, ',')) {
        if (!piece.empty()) cfg.subsample_sizes.push_back(std::stoll(piece));
    }

    const mcce::ExperimentReport report = mcce::run_subsample_study(ds, pred, cfg);
    mcce::save_text_file(out, mcce::emit_report_csv(report));
    const std::string table = mcce::format_report_table(report);
    std::cout << table;
    if (!table_out.empty()) mcce::save_text_file(table_out, table);
    std::cout << "report written to " << out << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Counterfactual explanations via conditional Monte Carlo sampling"};
    app.require_subcommand(1);
    CommonArgs a;

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string synth_kind = "mixed-types";
    std::int64_t synth_n = 5000;
    std::string synth_out;
    std::string synth_schema;
    synth->add_option("--kind", synth_kind,
                      "independent-gaussian, dependent-pair, or mixed-types");
    synth->add_option("--n", synth_n, "rows to generate");
    synth->add_option("--seed", a.seed, "random seed");
    synth->add_option("--out", synth_out, "output data CSV")->required();
    synth->add_option("--schema", synth_schema, "output schema JSON")->required();
    synth->add_option("--label", a.label, "label column name");

    auto* fit = app.add_subcommand("fit", "train the predictor (and optionally the chain)");
    std::string fit_out;
    std::string fit_chain_out;
    add_data_flags(fit, a);
    fit->add_option("--label", a.label, "label column in the data CSV");
    fit->add_option("--seed", a.seed, "random seed");
    fit->add_option("--epochs", a.epochs, "training epochs");
    fit->add_option("--lr", a.learning_rate, "learning rate");
    fit->add_option("--out", fit_out, "output model JSON")->required();
    fit->add_option("--chain-out", fit_chain_out, "also fit and save the tree chain");
    add_tree_flags(fit, a);

    auto* explain = app.add_subcommand("explain", "produce counterfactual rows per individual");
    std::string explain_out;
    std::string explain_valid;
    std::string explain_cand;
    add_data_flags(explain, a);
    add_experiment_flags(explain, a);
    explain->add_option("--method", a.method, "mcce or baseline");
    explain->add_option("--out", explain_out, "output CE rows CSV")->required();
    explain->add_option("--valid-set-dump", explain_valid,
                        "write every valid candidate's metric triple");
    explain->add_option("--candidates-dump", explain_cand,
                        "write the first individual's full candidate set");

    auto* bench = app.add_subcommand("bench", "run the metric benchmark");
    std::string bench_out;
    std::string bench_table;
    std::string bench_individuals;
    std::string bench_ce;
    std::string bench_method = "both";
    add_data_flags(bench, a);
    add_experiment_flags(bench, a);
    bench->add_option("--method", bench_method, "mcce, baseline, or both");
    bench->add_option("--out", bench_out, "output report CSV")->required();
    bench->add_option("--table-out", bench_table, "also write the aligned table");
    bench->add_option("--individuals-out", bench_individuals, "per-individual metric CSV");
    bench->add_option("--ce-out", bench_ce, "CE rows CSV for the first method");
    bench->add_flag("--no-timing", a.no_timing, "omit wall-clock columns");
    bench->add_flag("--holdout-test", a.holdout_test,
                    "exclude test rows from the generator's training data");

    auto* subsample = app.add_subcommand("subsample", "training-size stability study");
    std::string sizes_text;
    int reps = 1;
    std::string sub_out;
    std::string sub_table;
    add_data_flags(subsample, a);
    add_experiment_flags(subsample, a);
    subsample->add_option("--method", a.method, "mcce or baseline");
    subsample->add_option("--sizes", sizes_text, "comma-separated training sizes")->required();
    subsample->add_option("--reps", reps, "repetitions per size");
    subsample->add_option("--out", sub_out, "output report CSV")->required();
    subsample->add_option("--table-out", sub_table, "also write the aligned table");
    subsample->add_flag("--no-timing", a.no_timing, "omit wall-clock columns");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            return run_synth(synth_kind, synth_n, a.seed, synth_out, synth_schema, a.label);
        }
        if (fit->parsed()) return run_fit(a, fit_out, fit_chain_out);
        if (explain->parsed()) return run_explain(a, explain_out, explain_valid, explain_cand);
        if (bench->parsed()) {
            return run_bench_cmd(a, bench_method, bench_out, bench_table, bench_individuals,
                                 bench_ce);
        }
        if (subsample->parsed()) {
            return run_subsample_cmd(a, sizes_text, reps, sub_out, sub_table);
        }
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 1;
    }
    return 0;
}
