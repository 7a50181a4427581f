#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "spnx/datagen.hpp"
#include "spnx/dataset.hpp"
#include "spnx/explain.hpp"
#include "spnx/learn.hpp"
#include "spnx/spn.hpp"

namespace spnx {

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Set-overlap precision, recall and F1 of retrieved feature indices.
Prf f1_dims(const Subspace &predicted, const Subspace &truth);

struct Detection {
    std::vector<double> scores; ///< full-joint outlier score per row
    double threshold = 0.0;     ///< (1 - contamination) quantile of scores
    std::vector<std::size_t> rows; ///< rows with score >= threshold, ascending
};

/// Flags the top `contamination` fraction of rows by -log p(x); ties at the
/// threshold are all flagged.
Detection detect(const SpnModel &model, const Dataset &data, double contamination);

struct OutlierResult {
    std::size_t row = 0;
    ExplanationTrace trace;
    Subspace truth;
    Prf prf;
};

struct EvalReport {
    std::size_t n_features = 0;
    ExplainConfig config;
    std::vector<OutlierResult> outliers; ///< ascending row
    double mean_f1 = 0.0;
    double mean_evals = 0.0;
    double train_s = 0.0;
    double explain_s = 0.0;
};

struct BenchmarkResult {
    std::vector<EvalReport> reports; ///< one per explain config, same trained model
    std::size_t node_count = 0;
    double train_s = 0.0;
};

/// Trains once, explains every ground-truth outlier under each config and
/// scores the explanations. Throws std::logic_error if a search violates its
/// evaluation-count bound.
BenchmarkResult run_benchmark(const LabeledDataset &labeled, const LearnConfig &learn,
                              std::span<const ExplainConfig> configs);

/// Explains and scores with an already trained model.
EvalReport evaluate_explanations(const SpnModel &model, const LabeledDataset &labeled, const ExplainConfig &config);

/// One JSON object per line: row, selected, size, per_size, strategy, selection, evals.
std::string explanation_json_line(std::size_t row, const ExplanationTrace &trace, const ExplainConfig &config);
void write_explanations(std::ostream &out, const EvalReport &report);

/// Parsed subset of an explanation line, enough for scoring.
struct ExplanationRecord {
    std::size_t row = 0;
    Subspace selected;
    std::uint64_t evals = 0;
    std::string strategy;  ///< empty when absent
    std::string selection; ///< empty when absent
};
std::vector<ExplanationRecord> parse_explanations(std::istream &in, std::string_view source = "<explanations>");

/// Scores explanation records against ground truth (rows without truth are skipped).
EvalReport score_records(std::span<const ExplanationRecord> records, const std::map<std::size_t, Subspace> &truth,
                         std::size_t n_features);

inline constexpr const char *kSummaryHeader =
    "n_features\tstrategy\tselection\tmean_f1\tmean_evals\ttrain_s\texplain_s";
std::string summary_tsv_row(const EvalReport &report);

} // namespace spnx
