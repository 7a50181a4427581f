#include "doctest.h"

#include <algorithm>
#include <sstream>

#include "json.hpp"
#include "spnx/error.hpp"
#include "spnx/harness.hpp"
#include "spnx/model_io.hpp"

using namespace spnx;

namespace {

LabeledDataset small_suite(std::uint64_t seed, std::size_t n_features = 10)
{
    GenConfig c;
    c.n_features = n_features;
    c.n_samples = 1000;
    c.n_outliers = 30;
    c.seed = seed;
    return generate(c);
}

LearnConfig learn_cfg(std::uint64_t seed)
{
    LearnConfig l;
    l.seed = seed;
    return l;
}

} // namespace

TEST_CASE("f1 of retrieved dimensions")
{
    auto f = f1_dims(Subspace({1, 2}), Subspace({1, 2}));
    CHECK(f.f1 == 1.0);
    f = f1_dims(Subspace({1}), Subspace({1, 2}));
    CHECK(f.precision == 1.0);
    CHECK(f.recall == 0.5);
    CHECK(f.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    f = f1_dims(Subspace({3}), Subspace({1, 2}));
    CHECK(f.f1 == 0.0);
    CHECK(f.precision == 0.0);
    f = f1_dims(Subspace({0, 1, 2, 3}), Subspace({2, 3}));
    CHECK(f.precision == 0.5);
    CHECK(f.recall == 1.0);
    CHECK_THROWS_AS(f1_dims(Subspace(), Subspace({1})), QueryError);
    CHECK_THROWS_AS(f1_dims(Subspace({1}), Subspace()), QueryError);
}

TEST_CASE("detect flags at least the contamination fraction")
{
    // 100 distinct values of one gaussian feature.
    Schema s{{"x", FeatureKind::Real, {}}};
    std::vector<double> v(100);
    for (std::size_t i = 0; i < 100; ++i)
        v[i] = static_cast<double>(i) / 10.0 - 5.0;
    const Dataset d(s, v);
    const SpnModel model(SpnGraph{s, {GaussianLeaf{0, 0.0, 1.0}}, 0});
    const Detection det = detect(model, d, 0.1);
    CHECK(det.rows.size() >= 10);
    CHECK(det.scores.size() == 100);
    CHECK(std::is_sorted(det.rows.begin(), det.rows.end()));
    for (std::size_t r = 0; r < 100; ++r) {
        const bool flagged = std::binary_search(det.rows.begin(), det.rows.end(), r);
        CHECK(flagged == (det.scores[r] >= det.threshold));
    }
    // The most extreme values are the flagged ones.
    CHECK(std::binary_search(det.rows.begin(), det.rows.end(), std::size_t{0}));
    CHECK_FALSE(std::binary_search(det.rows.begin(), det.rows.end(), std::size_t{50}));

    CHECK_THROWS_AS(detect(model, d, 0.0), QueryError);
    CHECK_THROWS_AS(detect(model, d, 1.0), QueryError);
    CHECK_THROWS_AS(detect(model, d, -0.5), QueryError);
}

TEST_CASE("identical rows are all flagged")
{
    Schema s{{"x", FeatureKind::Real, {}}};
    const Dataset d(s, std::vector<double>(50, 1.5));
    const SpnModel model(SpnGraph{s, {GaussianLeaf{0, 0.0, 1.0}}, 0});
    CHECK(detect(model, d, 0.1).rows.size() == 50);
}

TEST_CASE("detect finds planted outliers")
{
    std::vector<double> recalls;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const LabeledDataset g = small_suite(seed);
        const SpnModel model = learn_spn(g.dataset, learn_cfg(seed));
        const double rate = static_cast<double>(g.truth.size()) / static_cast<double>(g.dataset.rows());
        const Detection det = detect(model, g.dataset, rate);
        std::size_t hits = 0;
        for (const auto &[row, _] : g.truth)
            hits += std::binary_search(det.rows.begin(), det.rows.end(), row);
        recalls.push_back(static_cast<double>(hits) / static_cast<double>(g.truth.size()));
    }
    std::sort(recalls.begin(), recalls.end());
    MESSAGE("median recall " << recalls[2]);
    CHECK(recalls[2] >= 0.8);
}

TEST_CASE("benchmark trains once and shares the training time")
{
    const LabeledDataset g = small_suite(2);
    ExplainConfig fw;
    fw.strategy = SearchStrategy::Forward;
    ExplainConfig bw;
    bw.strategy = SearchStrategy::Backward;
    ExplainConfig bz = bw;
    bz.selection = Selection::ZScore;
    const std::vector<ExplainConfig> configs{fw, bw, bz};

    const auto before = learn_spn_call_count();
    const BenchmarkResult res = run_benchmark(g, learn_cfg(2), configs);
    CHECK(learn_spn_call_count() == before + 1);

    REQUIRE(res.reports.size() == 3);
    const std::size_t n = g.dataset.cols();
    for (const auto &rep : res.reports) {
        CHECK(rep.train_s == res.train_s);
        CHECK(rep.n_features == n);
        CHECK(rep.outliers.size() == g.truth.size());
        CHECK(std::is_sorted(rep.outliers.begin(), rep.outliers.end(),
                             [](const auto &a, const auto &b) { return a.row < b.row; }));
        double sum = 0.0;
        for (const auto &o : rep.outliers) {
            CHECK(o.prf.f1 >= 0.0);
            CHECK(o.prf.f1 <= 1.0);
            CHECK(o.truth == g.truth.at(o.row));
            sum += o.prf.f1;
            if (rep.config.strategy == SearchStrategy::Backward)
                CHECK(o.trace.eval_count == backward_eval_count(n));
            else
                CHECK(o.trace.eval_count <= forward_eval_bound(n, rep.config.beam_width, n));
        }
        CHECK(std::abs(rep.mean_f1 - sum / static_cast<double>(rep.outliers.size())) <= 1e-12);
    }
    CHECK(res.reports[1].mean_evals == static_cast<double>(backward_eval_count(n)));
}

TEST_CASE("explaining many outliers reuses one model")
{
    const LabeledDataset g = small_suite(4);
    const auto before = learn_spn_call_count();
    const SpnModel model = learn_spn(g.dataset, learn_cfg(4));
    const EvalReport rep = evaluate_explanations(model, g, ExplainConfig{});
    CHECK(learn_spn_call_count() == before + 1);
    CHECK(rep.outliers.size() == 30);
}

TEST_CASE("explanation lines round trip")
{
    ExplanationTrace t;
    t.per_size = {{1, Subspace({4}), -1.25}, {2, Subspace({1, 4}), -7.5}, {3, Subspace({1, 2, 4}), -8.0}};
    t.selected = Subspace({1, 4});
    t.selected_size = 2;
    t.eval_count = 14;
    ExplainConfig cfg;
    const std::string line = explanation_json_line(17, t, cfg);
    CHECK(line.find('\n') == std::string::npos);
    const auto j = nlohmann::json::parse(line);
    CHECK(j["row"] == 17);
    CHECK(j["selected"] == nlohmann::json::array({1, 4}));
    CHECK(j["size"] == 2);
    CHECK(j["per_size"].size() == 3);
    CHECK(j["per_size"][1]["log_density"].get<double>() == -7.5);
    CHECK(j["strategy"] == "backward");
    CHECK(j["selection"] == "elbow");
    CHECK(j["evals"] == 14);

    std::istringstream in(line + "\n\n" + explanation_json_line(3, t, cfg) + "\n");
    const auto recs = parse_explanations(in);
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].row == 17);
    CHECK(recs[0].selected == Subspace({1, 4}));
    CHECK(recs[0].evals == 14);
    CHECK(recs[0].strategy == "backward");
    CHECK(recs[1].row == 3);

    std::istringstream bad("{\"row\":1,\"selected\":[0]}\nnot json\n");
    try {
        parse_explanations(bad, "e.jsonl");
        FAIL("expected DataError");
    } catch (const DataError &e) {
        CHECK(std::string(e.what()).find("e.jsonl:2:") != std::string::npos);
    }
}

TEST_CASE("non-finite log densities are written as null")
{
    ExplanationTrace t;
    t.per_size = {{1, Subspace({0}), -std::numeric_limits<double>::infinity()}};
    t.selected = Subspace({0});
    t.selected_size = 1;
    const auto j = nlohmann::json::parse(explanation_json_line(0, t, ExplainConfig{}));
    CHECK(j["per_size"][0]["log_density"].is_null());
}

TEST_CASE("scoring parsed records")
{
    std::map<std::size_t, Subspace> truth{{2, Subspace({0, 1})}, {5, Subspace({3})}, {9, Subspace({2, 4})}};
    std::vector<ExplanationRecord> recs;
    recs.push_back({2, Subspace({0, 1}), 5, "backward", "elbow"});
    recs.push_back({5, Subspace({3, 4}), 5, "backward", "elbow"});
    recs.push_back({7, Subspace({1}), 5, "backward", "elbow"}); // not an outlier: ignored
    const EvalReport rep = score_records(recs, truth, 6);
    REQUIRE(rep.outliers.size() == 3);
    CHECK(rep.outliers[0].prf.f1 == 1.0);
    CHECK(rep.outliers[1].prf.f1 == doctest::Approx(2.0 / 3.0));
    CHECK(rep.outliers[2].prf.f1 == 0.0); // row 9 missing
    CHECK(rep.mean_f1 == doctest::Approx((1.0 + 2.0 / 3.0) / 3.0));
    CHECK(rep.n_features == 6);
}

TEST_CASE("summary row")
{
    EvalReport rep;
    rep.n_features = 20;
    rep.mean_f1 = 0.5;
    rep.mean_evals = 209;
    rep.train_s = 1.25;
    rep.explain_s = 0.75;
    CHECK(std::string(kSummaryHeader) == "n_features\tstrategy\tselection\tmean_f1\tmean_evals\ttrain_s\texplain_s");
    CHECK(summary_tsv_row(rep) == "20\tbackward\telbow\t0.5\t209\t1.25\t0.75");
}
