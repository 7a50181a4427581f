#include "spnx/explain.hpp"

#include <algorithm>
#include <set>

#include "spnx/error.hpp"

namespace spnx {

namespace {

struct Scored {
    Subspace subspace;
    double log_density;
};

// Lowest density first; equal densities fall back to lexicographic order.
bool more_outlying(const Scored &a, const Scored &b)
{
    if (a.log_density != b.log_density)
        return a.log_density < b.log_density;
    return a.subspace < b.subspace;
}

void check_sample(const Evaluator &eval, std::span<const double> x)
{
    if (x.size() != eval.model().num_features())
        throw QueryError("sample has " + std::to_string(x.size()) + " features, model expects " +
                         std::to_string(eval.model().num_features()));
}

} // namespace

std::string_view to_string(SearchStrategy s) { return s == SearchStrategy::Forward ? "forward" : "backward"; }

std::string_view to_string(Selection s) { return s == Selection::Elbow ? "elbow" : "zscore"; }

SearchStrategy search_strategy_from_string(std::string_view text)
{
    if (text == "forward")
        return SearchStrategy::Forward;
    if (text == "backward")
        return SearchStrategy::Backward;
    throw QueryError("unknown strategy '" + std::string(text) + "' (expected forward|backward)");
}

Selection selection_from_string(std::string_view text)
{
    if (text == "elbow")
        return Selection::Elbow;
    if (text == "zscore")
        return Selection::ZScore;
    throw QueryError("unknown selection '" + std::string(text) + "' (expected elbow|zscore)");
}

void ExplainConfig::check() const
{
    if (beam_width < 1)
        throw QueryError("beam_width must be >= 1");
    if (!(kappa > 0.0))
        throw QueryError("kappa must be > 0");
}

double outlier_score(const SpnModel &model, std::span<const double> x, const Subspace &subspace)
{
    return -log_marginal_subspace(model, x, subspace);
}

std::vector<SizeBest> forward_beam_search(Evaluator &eval, std::span<const double> x, std::size_t max_depth,
                                          std::size_t beam_width)
{
    check_sample(eval, x);
    const std::size_t n = x.size();
    if (max_depth < 1 || max_depth > n)
        throw QueryError("forward search depth must lie in [1," + std::to_string(n) + "]");
    if (beam_width < 1)
        throw QueryError("beam width must be >= 1");

    std::vector<SizeBest> out;
    std::vector<Scored> scored;
    for (std::size_t f = 0; f < n; ++f) {
        Subspace s{f};
        const double ld = eval.log_marginal(x, s);
        scored.push_back({std::move(s), ld});
    }
    std::vector<Scored> beam;
    for (std::size_t k = 1;; ++k) {
        std::sort(scored.begin(), scored.end(), more_outlying);
        out.push_back({k, scored.front().subspace, scored.front().log_density});
        if (scored.size() > beam_width)
            scored.resize(beam_width);
        beam = std::move(scored);
        if (k == max_depth)
            break;

        std::set<Subspace> candidates;
        for (const auto &h : beam)
            for (std::size_t f = 0; f < n; ++f)
                if (!h.subspace.contains(f))
                    candidates.insert(h.subspace.with(f));
        scored.clear();
        for (const auto &c : candidates)
            scored.push_back({c, eval.log_marginal(x, c)});
    }
    return out;
}

std::vector<SizeBest> forward_beam_search(const SpnModel &model, std::span<const double> x, std::size_t max_depth,
                                          std::size_t beam_width)
{
    Evaluator eval(model);
    return forward_beam_search(eval, x, max_depth, beam_width);
}

std::vector<SizeBest> backward_elimination(Evaluator &eval, std::span<const double> x)
{
    check_sample(eval, x);
    const std::size_t n = x.size();
    if (n < 2)
        throw QueryError("backward elimination needs at least 2 features");

    std::vector<SizeBest> out;
    Subspace current = Subspace::all(n);
    while (current.size() > 1) {
        Subspace best;
        double best_ld = 0.0;
        for (std::size_t f : current) {
            Subspace candidate = current.without(f);
            const double ld = eval.log_marginal(x, candidate);
            // Ties keep the lexicographically smallest remainder, matching forward search.
            if (best.empty() || ld < best_ld || (ld == best_ld && candidate < best)) {
                best = std::move(candidate);
                best_ld = ld;
            }
        }
        current = best;
        out.push_back({current.size(), std::move(best), best_ld});
    }
    std::reverse(out.begin(), out.end());
    return out;
}

std::vector<SizeBest> backward_elimination(const SpnModel &model, std::span<const double> x)
{
    Evaluator eval(model);
    return backward_elimination(eval, x);
}

SizeBest elbow_select(std::span<const SizeBest> per_size, double kappa)
{
    if (per_size.empty())
        throw QueryError("elbow_select: no candidates");
    for (std::size_t i = 0; i < per_size.size(); ++i)
        if (per_size[i].size != i + 1)
            throw QueryError("elbow_select: sizes must run contiguously from 1");
    for (std::size_t k = 0; k + 1 < per_size.size(); ++k)
        if (per_size[k].log_density - per_size[k + 1].log_density > kappa)
            return per_size[k + 1];
    return per_size.front();
}

ScoreStats score_stats(Evaluator &eval, const Dataset &training, const Subspace &subspace)
{
    if (training.rows() == 0)
        throw QueryError("score statistics need training rows");
    std::vector<double> scores(training.rows());
    double mean = 0.0;
    for (std::size_t r = 0; r < training.rows(); ++r) {
        scores[r] = -eval.log_marginal(training.row(r), subspace);
        mean += scores[r];
    }
    mean /= static_cast<double>(scores.size());
    double var = 0.0;
    for (double s : scores)
        var += (s - mean) * (s - mean);
    return {mean, std::sqrt(var / static_cast<double>(scores.size()))};
}

double z_score(double score, const ScoreStats &stats)
{
    if (stats.stddev == 0.0)
        return 0.0;
    return (score - stats.mean) / stats.stddev;
}

SizeBest zscore_select(Evaluator &eval, std::span<const double> x, std::span<const SizeBest> per_size,
                       const Dataset &training)
{
    if (per_size.empty())
        throw QueryError("zscore_select: no candidates");
    if (training.rows() == 0)
        throw QueryError("zscore_select: empty training data");
    check_sample(eval, x);
    std::size_t best = 0;
    double best_z = 0.0;
    for (std::size_t i = 0; i < per_size.size(); ++i) {
        const auto stats = score_stats(eval, training, per_size[i].subspace);
        const double z = z_score(-per_size[i].log_density, stats);
        if (i == 0 || z > best_z || (z == best_z && per_size[i].size < per_size[best].size)) {
            best = i;
            best_z = z;
        }
    }
    return per_size[best];
}

SizeBest zscore_select(const SpnModel &model, std::span<const double> x, std::span<const SizeBest> per_size,
                       const Dataset &training)
{
    Evaluator eval(model);
    return zscore_select(eval, x, per_size, training);
}

ExplanationTrace explain(Evaluator &eval, std::span<const double> x, const ExplainConfig &config,
                         const Dataset *training)
{
    config.check();
    check_sample(eval, x);
    if (config.selection == Selection::ZScore && (training == nullptr || training->rows() == 0))
        throw QueryError("z-score selection requires training data");
    const std::size_t n = x.size();

    ExplanationTrace trace;
    const std::uint64_t before = eval.evaluations();
    if (n == 1) {
        trace.per_size.push_back({1, Subspace{0}, eval.log_marginal(x, Subspace{0})});
    } else if (config.strategy == SearchStrategy::Forward) {
        const std::size_t depth = config.max_depth == 0 ? n : std::min(config.max_depth, n);
        trace.per_size = forward_beam_search(eval, x, depth, config.beam_width);
    } else {
        trace.per_size = backward_elimination(eval, x);
    }
    trace.eval_count = eval.evaluations() - before;

    const SizeBest chosen = config.selection == Selection::Elbow
                                ? elbow_select(trace.per_size, config.kappa)
                                : zscore_select(eval, x, trace.per_size, *training);
    trace.selected = chosen.subspace;
    trace.selected_size = chosen.size;
    return trace;
}

ExplanationTrace explain(const SpnModel &model, std::span<const double> x, const ExplainConfig &config,
                         const Dataset *training)
{
    Evaluator eval(model);
    return explain(eval, x, config, training);
}

std::uint64_t forward_eval_bound(std::size_t n, std::size_t beam_width, std::size_t max_depth)
{
    return static_cast<std::uint64_t>(beam_width) * n * max_depth + n;
}

std::uint64_t backward_eval_count(std::size_t n) { return static_cast<std::uint64_t>(n) * (n + 1) / 2 - 1; }

} // namespace spnx
