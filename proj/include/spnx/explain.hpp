#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "spnx/dataset.hpp"
#include "spnx/spn.hpp"
#include "spnx/subspace.hpp"

namespace spnx {

enum class SearchStrategy { Forward, Backward };
enum class Selection { Elbow, ZScore };

std::string_view to_string(SearchStrategy s);
std::string_view to_string(Selection s);
SearchStrategy search_strategy_from_string(std::string_view text); // throws QueryError
Selection selection_from_string(std::string_view text);            // throws QueryError

struct ExplainConfig {
    std::size_t beam_width = 10;
    std::size_t max_depth = 0; ///< forward search depth S; 0 means n
    double kappa = std::exp(1.0);
    SearchStrategy strategy = SearchStrategy::Backward;
    Selection selection = Selection::Elbow;

    void check() const;
};

/// Most outlying subspace found for one subspace size.
struct SizeBest {
    std::size_t size = 0;
    Subspace subspace;
    double log_density = 0.0;

    bool operator==(const SizeBest &) const = default;
};

struct ExplanationTrace {
    std::vector<SizeBest> per_size; ///< ascending size
    Subspace selected;
    std::size_t selected_size = 0;
    std::uint64_t eval_count = 0; ///< circuit evaluations spent by the search

    bool operator==(const ExplanationTrace &) const = default;
};

/// -log p(x_D): higher is more outlying.
double outlier_score(const SpnModel &model, std::span<const double> x, const Subspace &subspace);

/// Beam search growing subspaces one feature at a time, keeping the
/// `beam_width` lowest-density hypotheses per size. Returns sizes 1..max_depth.
std::vector<SizeBest> forward_beam_search(Evaluator &eval, std::span<const double> x, std::size_t max_depth,
                                          std::size_t beam_width);
std::vector<SizeBest> forward_beam_search(const SpnModel &model, std::span<const double> x,
                                          std::size_t max_depth, std::size_t beam_width);

/// Starts from all features and repeatedly drops the feature whose removal
/// leaves the least likely (most outlying) subspace. Returns sizes 1..n-1 and
/// spends exactly n(n+1)/2 - 1 circuit evaluations.
std::vector<SizeBest> backward_elimination(Evaluator &eval, std::span<const double> x);
std::vector<SizeBest> backward_elimination(const SpnModel &model, std::span<const double> x);

/// Selects size k+1 for the smallest k whose drop in minimal log density
/// exceeds `kappa`; size 1 when no drop does.
SizeBest elbow_select(std::span<const SizeBest> per_size, double kappa);

/// Mean and population standard deviation of training scores in one subspace.
struct ScoreStats {
    double mean = 0.0;
    double stddev = 0.0;
};

ScoreStats score_stats(Evaluator &eval, const Dataset &training, const Subspace &subspace);

/// (score - mean) / stddev, defined as 0 when stddev is 0.
double z_score(double score, const ScoreStats &stats);

/// Candidate with the largest z-score of -log p; ties go to the smaller size.
SizeBest zscore_select(Evaluator &eval, std::span<const double> x, std::span<const SizeBest> per_size,
                       const Dataset &training);
SizeBest zscore_select(const SpnModel &model, std::span<const double> x, std::span<const SizeBest> per_size,
                       const Dataset &training);

/// Search followed by dimensionality selection. `training` is required for
/// z-score selection.
ExplanationTrace explain(Evaluator &eval, std::span<const double> x, const ExplainConfig &config,
                         const Dataset *training = nullptr);
ExplanationTrace explain(const SpnModel &model, std::span<const double> x, const ExplainConfig &config,
                         const Dataset *training = nullptr);

/// Upper bound on forward-search evaluations: B*n*S + n.
std::uint64_t forward_eval_bound(std::size_t n, std::size_t beam_width, std::size_t max_depth);
/// Exact backward-elimination evaluations: n(n+1)/2 - 1.
std::uint64_t backward_eval_count(std::size_t n);

} // namespace spnx
