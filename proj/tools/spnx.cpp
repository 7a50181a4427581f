// spnx: generate, train, score, explain, evaluate and benchmark.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "spnx/datagen.hpp"
#include "spnx/dataset.hpp"
#include "spnx/error.hpp"
#include "spnx/explain.hpp"
#include "spnx/format.hpp"
#include "spnx/harness.hpp"
#include "spnx/learn.hpp"
#include "spnx/model_io.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitModel = 4;

// "--beam-width,--beam_width"
std::string flag(const std::string &name)
{
    std::string dashed = name;
    for (char &c : dashed)
        if (c == '_')
            c = '-';
    return dashed == name ? "--" + name : "--" + dashed + ",--" + name;
}

void add_gen_flags(CLI::App &cmd, spnx::GenConfig &g)
{
    cmd.add_option(flag("n_features"), g.n_features, "Number of features")->capture_default_str();
    cmd.add_option(flag("n_samples"), g.n_samples, "Number of rows")->capture_default_str();
    cmd.add_option(flag("n_outliers"), g.n_outliers, "Number of planted outliers")->capture_default_str();
    cmd.add_option(flag("subspace_min"), g.subspace_min, "Smallest planted subspace")->capture_default_str();
    cmd.add_option(flag("subspace_max"), g.subspace_max, "Largest planted subspace")->capture_default_str();
    cmd.add_option(flag("clusters_per_subspace"), g.clusters_per_subspace)->capture_default_str();
    cmd.add_option(flag("noise_sigma"), g.noise_sigma, "Cluster standard deviation")->capture_default_str();
}

void add_learn_flags(CLI::App &cmd, spnx::LearnConfig &l)
{
    cmd.add_option(flag("alpha"), l.alpha, "RDC independence threshold")->capture_default_str();
    cmd.add_option(flag("min_slice_rows"), l.min_slice_rows, "Naive factorization below this many rows")
        ->capture_default_str();
    cmd.add_option(flag("rdc_features"), l.rdc_features)->capture_default_str();
    cmd.add_option(flag("rdc_scale"), l.rdc_scale)->capture_default_str();
    cmd.add_option(flag("gmm_components"), l.gmm_components)->capture_default_str();
    cmd.add_option(flag("gmm_max_iters"), l.gmm_max_iters)->capture_default_str();
    cmd.add_option(flag("gmm_tol"), l.gmm_tol)->capture_default_str();
}

struct ExplainFlags {
    spnx::ExplainConfig config;
    std::string strategy = "backward";
    std::string selection = "elbow";

    void add(CLI::App &cmd)
    {
        cmd.add_option(flag("beam_width"), config.beam_width, "Forward beam width B")->capture_default_str();
        cmd.add_option(flag("max_depth"), config.max_depth, "Forward depth S (0 = number of features)")
            ->capture_default_str();
        cmd.add_option(flag("kappa"), config.kappa, "Elbow threshold")->capture_default_str();
        cmd.add_option(flag("strategy"), strategy, "forward | backward")->capture_default_str();
        cmd.add_option(flag("selection"), selection, "elbow | zscore")->capture_default_str();
    }

    spnx::ExplainConfig resolve()
    {
        config.strategy = spnx::search_strategy_from_string(strategy);
        config.selection = spnx::selection_from_string(selection);
        config.check();
        return config;
    }
};

std::optional<spnx::Schema> maybe_schema(const std::string &path)
{
    if (path.empty())
        return std::nullopt;
    return spnx::read_schema_json(path);
}

std::string default_labels_path(const std::string &csv)
{
    const auto dot = csv.rfind('.');
    const auto slash = csv.find_last_of("/\\");
    const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
    return (has_ext ? csv.substr(0, dot) : csv) + ".labels.json";
}

// Writes to `path`, or stdout when empty or "-".
class Output {
  public:
    explicit Output(const std::string &path)
    {
        if (!path.empty() && path != "-") {
            file_.open(path, std::ios::binary);
            if (!file_)
                throw spnx::DataError("cannot write " + path);
        }
    }
    std::ostream &stream() { return file_.is_open() ? static_cast<std::ostream &>(file_) : std::cout; }

  private:
    std::ofstream file_;
};

std::vector<spnx::ExplainConfig> bench_configs(const std::vector<std::string> &strategies,
                                               const std::vector<std::string> &selections, spnx::ExplainConfig base)
{
    std::vector<spnx::ExplainConfig> out;
    for (const auto &st : strategies)
        for (const auto &se : selections) {
            spnx::ExplainConfig c = base;
            c.strategy = spnx::search_strategy_from_string(st);
            c.selection = spnx::selection_from_string(se);
            c.check();
            out.push_back(c);
        }
    return out;
}

int run(int argc, char **argv)
{
    CLI::App app{"Sum-product network outlier scoring and subspace explanations"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "spnx 0.1.0");

    // gen
    spnx::GenConfig gen;
    std::string gen_out, gen_labels;
    auto *gen_cmd = app.add_subcommand("gen", "Generate a planted-subspace benchmark dataset");
    add_gen_flags(*gen_cmd, gen);
    gen_cmd->add_option("--seed", gen.seed, "Random seed")->required();
    gen_cmd->add_option("-o,--out", gen_out, "Output CSV")->required();
    gen_cmd->add_option("--labels", gen_labels, "Ground-truth sidecar (default: <out>.labels.json)");

    // train
    spnx::LearnConfig learn;
    std::string train_data, train_schema, train_out;
    auto *train_cmd = app.add_subcommand("train", "Learn an SPN from a CSV dataset");
    add_learn_flags(*train_cmd, learn);
    train_cmd->add_option("--seed", learn.seed, "Random seed")->required();
    train_cmd->add_option("-d,--data", train_data, "Training CSV")->required();
    train_cmd->add_option("--schema", train_schema, "Schema sidecar JSON");
    train_cmd->add_option("-o,--out", train_out, "Model JSON")->required();

    // score
    std::string score_model, score_data, score_schema, score_out;
    double contamination = 0.0;
    auto *score_cmd = app.add_subcommand("score", "Score rows by -log p(x)");
    score_cmd->add_option("-m,--model", score_model, "Model JSON")->required();
    score_cmd->add_option("-d,--data", score_data, "CSV to score")->required();
    score_cmd->add_option("--schema", score_schema, "Schema sidecar JSON");
    score_cmd->add_option("--contamination", contamination, "Flag this fraction of rows as outliers");
    score_cmd->add_option("-o,--out", score_out, "Output CSV (default stdout)");

    // explain
    ExplainFlags explain_flags;
    std::string ex_model, ex_data, ex_schema, ex_train, ex_labels, ex_out;
    std::vector<std::size_t> ex_rows;
    double ex_contamination = 0.0;
    auto *explain_cmd = app.add_subcommand("explain", "Explain outliers with subspace search");
    explain_flags.add(*explain_cmd);
    explain_cmd->add_option("-m,--model", ex_model, "Model JSON")->required();
    explain_cmd->add_option("-d,--data", ex_data, "CSV holding the rows to explain")->required();
    explain_cmd->add_option("--schema", ex_schema, "Schema sidecar JSON");
    explain_cmd->add_option("--train-data,--train_data", ex_train,
                            "Training CSV for z-score statistics (default: --data)");
    auto *rows_opt = explain_cmd->add_option("--rows", ex_rows, "Row indices to explain")->delimiter(',');
    auto *labels_opt = explain_cmd->add_option("--labels", ex_labels, "Explain the rows listed in this sidecar");
    auto *cont_opt = explain_cmd->add_option("--contamination", ex_contamination, "Explain detected rows");
    rows_opt->excludes(labels_opt)->excludes(cont_opt);
    labels_opt->excludes(cont_opt);
    explain_cmd->add_option("-o,--out", ex_out, "JSON-lines output (default stdout)");

    // eval
    std::string ev_expl, ev_data, ev_labels, ev_out;
    auto *eval_cmd = app.add_subcommand("eval", "F1 of explanations against ground truth");
    eval_cmd->add_option("-e,--explanations", ev_expl, "JSON-lines explanations")->required();
    eval_cmd->add_option("-d,--data", ev_data, "Dataset CSV")->required();
    eval_cmd->add_option("--labels", ev_labels, "Ground-truth sidecar (default: <data>.labels.json)");
    eval_cmd->add_option("-o,--out", ev_out, "TSV summary (default stdout)");

    // bench
    spnx::GenConfig bgen;
    spnx::LearnConfig blearn;
    ExplainFlags bench_flags;
    std::string b_data, b_labels, b_expl, b_summary;
    std::vector<std::string> b_strategies{"forward", "backward"}, b_selections{"elbow"};
    std::uint64_t b_seed = 0;
    auto *bench_cmd = app.add_subcommand("bench", "Train once and explain every ground-truth outlier");
    add_gen_flags(*bench_cmd, bgen);
    add_learn_flags(*bench_cmd, blearn);
    bench_flags.add(*bench_cmd);
    bench_cmd->add_option("--seed", b_seed, "Seed for generation and training")->required();
    bench_cmd->add_option("-d,--data", b_data, "Use this CSV instead of generating");
    bench_cmd->add_option("--labels", b_labels, "Sidecar for --data (default: <data>.labels.json)");
    bench_cmd->add_option("--strategies", b_strategies, "Strategies to run")->delimiter(',')->capture_default_str();
    bench_cmd->add_option("--selections", b_selections, "Selections to run")->delimiter(',')->capture_default_str();
    bench_cmd->add_option("-e,--explanations", b_expl, "JSON-lines output");
    bench_cmd->add_option("-s,--summary", b_summary, "TSV summary (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    if (*gen_cmd) {
        spnx::LabeledDataset labeled = spnx::generate(gen);
        spnx::write_labeled(labeled, gen_out, gen_labels.empty() ? default_labels_path(gen_out) : gen_labels);
        return 0;
    }

    if (*train_cmd) {
        learn.check();
        const spnx::Dataset data = spnx::load_csv(train_data, maybe_schema(train_schema));
        const spnx::SpnModel model = spnx::learn_spn(data, learn);
        spnx::save_model(model, train_out);
        std::cerr << "trained " << model.node_count() << " nodes over " << model.num_features() << " features\n";
        return 0;
    }

    if (*score_cmd) {
        const spnx::SpnModel model = spnx::load_model(score_model);
        const spnx::Dataset data = spnx::load_csv(score_data, maybe_schema(score_schema));
        if (data.cols() != model.num_features())
            throw spnx::DataError(score_data + ": " + std::to_string(data.cols()) + " columns, model expects " +
                                  std::to_string(model.num_features()));
        Output out(score_out);
        if (score_cmd->count("--contamination")) {
            const spnx::Detection det = spnx::detect(model, data, contamination);
            std::vector<bool> flagged(data.rows(), false);
            for (std::size_t r : det.rows)
                flagged[r] = true;
            out.stream() << "row,score,outlier\n";
            for (std::size_t r = 0; r < data.rows(); ++r)
                out.stream() << r << ',' << spnx::text_number(det.scores[r]) << ',' << (flagged[r] ? 1 : 0) << '\n';
        } else {
            spnx::Evaluator eval(model);
            const auto all = spnx::Subspace::all(model.num_features());
            out.stream() << "row,score\n";
            for (std::size_t r = 0; r < data.rows(); ++r)
                out.stream() << r << ',' << spnx::text_number(-eval.log_marginal(data.row(r), all)) << '\n';
        }
        return 0;
    }

    if (*explain_cmd) {
        const spnx::ExplainConfig config = explain_flags.resolve();
        const spnx::SpnModel model = spnx::load_model(ex_model);
        const auto schema = maybe_schema(ex_schema);
        const spnx::Dataset data = spnx::load_csv(ex_data, schema);
        if (data.cols() != model.num_features())
            throw spnx::DataError(ex_data + ": " + std::to_string(data.cols()) + " columns, model expects " +
                                  std::to_string(model.num_features()));
        std::optional<spnx::Dataset> training;
        if (!ex_train.empty())
            training = spnx::load_csv(ex_train, schema);

        std::vector<std::size_t> rows;
        if (!ex_rows.empty()) {
            rows = ex_rows;
        } else if (!ex_labels.empty()) {
            for (const auto &[row, _] : spnx::read_labels(ex_labels, data.rows(), data.cols()))
                rows.push_back(row);
        } else if (explain_cmd->count("--contamination")) {
            rows = spnx::detect(model, data, ex_contamination).rows;
        } else {
            for (std::size_t r = 0; r < data.rows(); ++r)
                rows.push_back(r);
        }
        std::sort(rows.begin(), rows.end());
        rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
        for (std::size_t r : rows)
            if (r >= data.rows())
                throw spnx::DataError("row " + std::to_string(r) + " outside " + ex_data + " (" +
                                      std::to_string(data.rows()) + " rows)");

        spnx::Evaluator eval(model);
        Output out(ex_out);
        const spnx::Dataset &stats_data = training ? *training : data;
        for (std::size_t r : rows) {
            const auto trace = spnx::explain(eval, data.row(r), config, &stats_data);
            out.stream() << spnx::explanation_json_line(r, trace, config) << '\n';
        }
        return 0;
    }

    if (*eval_cmd) {
        const spnx::Dataset data = spnx::load_csv(ev_data);
        const auto truth =
            spnx::read_labels(ev_labels.empty() ? default_labels_path(ev_data) : ev_labels, data.rows(), data.cols());
        std::ifstream in(ev_expl, std::ios::binary);
        if (!in)
            throw spnx::DataError("explanations not found or unreadable: " + ev_expl);
        const auto records = spnx::parse_explanations(in, ev_expl);
        spnx::EvalReport report = spnx::score_records(records, truth, data.cols());
        if (!records.empty()) {
            if (!records.front().strategy.empty())
                report.config.strategy = spnx::search_strategy_from_string(records.front().strategy);
            if (!records.front().selection.empty())
                report.config.selection = spnx::selection_from_string(records.front().selection);
        }
        Output out(ev_out);
        out.stream() << spnx::kSummaryHeader << '\n' << spnx::summary_tsv_row(report) << '\n';
        return 0;
    }

    if (*bench_cmd) {
        const auto configs = bench_configs(b_strategies, b_selections, bench_flags.resolve());
        blearn.seed = b_seed;
        blearn.check();
        spnx::LabeledDataset labeled;
        if (b_data.empty()) {
            bgen.seed = b_seed;
            labeled = spnx::generate(bgen);
        } else {
            labeled = spnx::read_labeled(b_data, b_labels.empty() ? default_labels_path(b_data) : b_labels);
        }
        const auto result = spnx::run_benchmark(labeled, blearn, configs);
        if (!b_expl.empty()) {
            Output expl(b_expl);
            for (const auto &report : result.reports)
                spnx::write_explanations(expl.stream(), report);
        }
        Output out(b_summary);
        out.stream() << spnx::kSummaryHeader << '\n';
        for (const auto &report : result.reports)
            out.stream() << spnx::summary_tsv_row(report) << '\n';
        return 0;
    }
    return kExitUsage;
}

} // namespace

int main(int argc, char **argv)
{
    try {
        return run(argc, argv);
    } catch (const spnx::QueryError &e) {
        std::cerr << "spnx: " << e.what() << '\n';
        return kExitUsage;
    } catch (const spnx::DataError &e) {
        std::cerr << "spnx: data error: " << e.what() << '\n';
        return kExitData;
    } catch (const spnx::ModelError &e) {
        std::cerr << "spnx: model error: " << e.what() << '\n';
        return kExitModel;
    } catch (const std::exception &e) {
        std::cerr << "spnx: " << e.what() << '\n';
        return 1;
    }
}
