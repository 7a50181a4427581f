#include "spnx/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

#include "spnx/error.hpp"
#include "spnx/format.hpp"

namespace spnx {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string index_list(const Subspace &s)
{
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i)
        out += (i ? "," : "") + std::to_string(s.features()[i]);
    return out + "]";
}

void check_eval_bound(const ExplanationTrace &trace, std::size_t n, const ExplainConfig &config, std::size_t row)
{
    if (n < 2)
        return;
    if (config.strategy == SearchStrategy::Backward) {
        if (trace.eval_count != backward_eval_count(n))
            throw std::logic_error("row " + std::to_string(row) + ": backward elimination used " +
                                   std::to_string(trace.eval_count) + " evaluations, expected " +
                                   std::to_string(backward_eval_count(n)));
    } else {
        const std::size_t depth = config.max_depth == 0 ? n : std::min(config.max_depth, n);
        const auto bound = forward_eval_bound(n, config.beam_width, depth);
        if (trace.eval_count > bound)
            throw std::logic_error("row " + std::to_string(row) + ": forward search used " +
                                   std::to_string(trace.eval_count) + " evaluations, bound " + std::to_string(bound));
    }
}

void finish_means(EvalReport &report)
{
    if (report.outliers.empty())
        return;
    double f1 = 0.0;
    double evals = 0.0;
    for (const auto &o : report.outliers) {
        f1 += o.prf.f1;
        evals += static_cast<double>(o.trace.eval_count);
    }
    report.mean_f1 = f1 / static_cast<double>(report.outliers.size());
    report.mean_evals = evals / static_cast<double>(report.outliers.size());
}

} // namespace

Prf f1_dims(const Subspace &predicted, const Subspace &truth)
{
    if (predicted.empty() || truth.empty())
        throw QueryError("f1_dims: predicted and truth subspaces must be non-empty");
    std::size_t hits = 0;
    for (std::size_t f : predicted)
        hits += truth.contains(f) ? 1 : 0;
    Prf out;
    out.precision = static_cast<double>(hits) / static_cast<double>(predicted.size());
    out.recall = static_cast<double>(hits) / static_cast<double>(truth.size());
    if (hits > 0)
        out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
    return out;
}

Detection detect(const SpnModel &model, const Dataset &data, double contamination)
{
    if (!(contamination > 0.0 && contamination < 1.0))
        throw QueryError("contamination must lie in (0,1)");
    if (data.rows() == 0)
        throw QueryError("detect: empty dataset");
    Evaluator eval(model);
    Detection out;
    out.scores.resize(data.rows());
    const Subspace all = Subspace::all(model.num_features());
    for (std::size_t r = 0; r < data.rows(); ++r)
        out.scores[r] = -eval.log_marginal(data.row(r), all);
    std::vector<double> sorted = out.scores;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    auto flagged = static_cast<std::size_t>(std::ceil(contamination * static_cast<double>(n) - 1e-9));
    flagged = std::clamp<std::size_t>(flagged, 1, n);
    out.threshold = sorted[n - flagged];
    for (std::size_t r = 0; r < n; ++r)
        if (out.scores[r] >= out.threshold)
            out.rows.push_back(r);
    return out;
}

EvalReport evaluate_explanations(const SpnModel &model, const LabeledDataset &labeled, const ExplainConfig &config)
{
    EvalReport report;
    report.n_features = model.num_features();
    report.config = config;
    Evaluator eval(model);
    const auto start = Clock::now();
    for (const auto &[row, truth] : labeled.truth) {
        OutlierResult r;
        r.row = row;
        r.truth = truth;
        r.trace = explain(eval, labeled.dataset.row(row), config, &labeled.dataset);
        check_eval_bound(r.trace, report.n_features, config, row);
        r.prf = f1_dims(r.trace.selected, truth);
        report.outliers.push_back(std::move(r));
    }
    report.explain_s = seconds_since(start);
    finish_means(report);
    return report;
}

BenchmarkResult run_benchmark(const LabeledDataset &labeled, const LearnConfig &learn,
                              std::span<const ExplainConfig> configs)
{
    BenchmarkResult out;
    const auto start = Clock::now();
    const SpnModel model = learn_spn(labeled.dataset, learn);
    out.train_s = seconds_since(start);
    out.node_count = model.node_count();
    for (const auto &config : configs) {
        EvalReport report = evaluate_explanations(model, labeled, config);
        report.train_s = out.train_s;
        out.reports.push_back(std::move(report));
    }
    return out;
}

std::string explanation_json_line(std::size_t row, const ExplanationTrace &trace, const ExplainConfig &config)
{
    std::string s = "{\"row\":" + std::to_string(row) + ",\"selected\":" + index_list(trace.selected) +
                    ",\"size\":" + std::to_string(trace.selected_size) + ",\"per_size\":[";
    for (std::size_t i = 0; i < trace.per_size.size(); ++i) {
        const auto &e = trace.per_size[i];
        s += (i ? "," : "");
        s += "{\"k\":" + std::to_string(e.size) + ",\"features\":" + index_list(e.subspace) +
             ",\"log_density\":" + json_number(e.log_density) + "}";
    }
    s += "],\"strategy\":\"" + std::string(to_string(config.strategy)) + "\",\"selection\":\"" +
         std::string(to_string(config.selection)) + "\",\"evals\":" + std::to_string(trace.eval_count) + "}";
    return s;
}

void write_explanations(std::ostream &out, const EvalReport &report)
{
    for (const auto &o : report.outliers)
        out << explanation_json_line(o.row, o.trace, report.config) << '\n';
}

std::vector<ExplanationRecord> parse_explanations(std::istream &in, std::string_view source)
{
    std::vector<ExplanationRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const std::string where = std::string(source) + ":" + std::to_string(line_no) + ": ";
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error &e) {
            throw DataError(where + e.what());
        }
        if (!j.is_object() || !j.contains("row") || !j["row"].is_number_unsigned() || !j.contains("selected") ||
            !j["selected"].is_array())
            throw DataError(where + "explanation needs \"row\" and \"selected\"");
        ExplanationRecord r;
        r.row = j["row"].get<std::size_t>();
        std::vector<std::size_t> feats;
        for (const auto &f : j["selected"]) {
            if (!f.is_number_unsigned())
                throw DataError(where + "selected features must be non-negative integers");
            feats.push_back(f.get<std::size_t>());
        }
        r.selected = Subspace(std::move(feats));
        if (j.contains("evals") && j["evals"].is_number_unsigned())
            r.evals = j["evals"].get<std::uint64_t>();
        if (j.contains("strategy") && j["strategy"].is_string())
            r.strategy = j["strategy"].get<std::string>();
        if (j.contains("selection") && j["selection"].is_string())
            r.selection = j["selection"].get<std::string>();
        out.push_back(std::move(r));
    }
    return out;
}

EvalReport score_records(std::span<const ExplanationRecord> records, const std::map<std::size_t, Subspace> &truth,
                         std::size_t n_features)
{
    EvalReport report;
    report.n_features = n_features;
    std::map<std::size_t, const ExplanationRecord *> by_row;
    for (const auto &r : records)
        by_row[r.row] = &r;
    for (const auto &[row, t] : truth) {
        OutlierResult o;
        o.row = row;
        o.truth = t;
        auto it = by_row.find(row);
        if (it != by_row.end() && !it->second->selected.empty()) {
            o.trace.selected = it->second->selected;
            o.trace.selected_size = o.trace.selected.size();
            o.trace.eval_count = it->second->evals;
            o.prf = f1_dims(o.trace.selected, t);
        }
        report.outliers.push_back(std::move(o));
    }
    finish_means(report);
    return report;
}

std::string summary_tsv_row(const EvalReport &report)
{
    return std::to_string(report.n_features) + "\t" + std::string(to_string(report.config.strategy)) + "\t" +
           std::string(to_string(report.config.selection)) + "\t" + text_number(report.mean_f1) + "\t" +
           text_number(report.mean_evals) + "\t" + text_number(report.train_s) + "\t" + text_number(report.explain_s);
}

} // namespace spnx
