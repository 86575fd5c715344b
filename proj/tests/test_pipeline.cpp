#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "talc/baselines.hpp"
#include "talc/error.hpp"
#include "talc/pipeline.hpp"

namespace talc::testing {
namespace {

SyntheticTask small_task(std::size_t n, std::uint64_t seed) {
    return generate(n, 3, {{"a", 0.8, 0.2}, {"b", 0.65, 0.3}, {"c", 0.7, 0.1}, {"d", 0.5, 0.4}}, {}, seed);
}

TEST(TalcAdapt, FullAlphaEqualsFitPlusMap) {
    const auto t = small_task(200, 1);
    const auto run = talc_adapt(t.matrix, {1.0, 0, false}, {}, "ts");
    const auto rep = fit_em(t.matrix);
    EXPECT_EQ(run.training_report.final_weights, rep.final_weights);
    const auto expected = map_exact(t.matrix, rep.final_weights);
    ASSERT_EQ(run.predictions.size(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        EXPECT_EQ(run.predictions[i].label, expected[i].label);
        EXPECT_EQ(run.predictions[i].posterior, expected[i].posterior);
    }
    EXPECT_EQ(run.provenance.n_adapt, 200u);
    EXPECT_EQ(run.provenance.timestamp, "ts");
}

TEST(TalcAdapt, FitsOnPrefixAndLabelsEveryRow) {
    const auto t = small_task(10, 2);
    const auto run = talc_adapt(t.matrix, {0.5, 0, false}, {}, "ts");
    EXPECT_EQ(run.predictions.size(), 10u);
    EXPECT_EQ(run.adaptation_ids, (std::vector<std::string>{"x1", "x2", "x3", "x4", "x5"}));
    const std::vector<std::size_t> prefix = {0, 1, 2, 3, 4};
    EXPECT_EQ(run.training_report.final_weights, fit_em(t.matrix.select_rows(prefix)).final_weights);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(run.predictions[i].example_id, t.matrix.example_ids()[i]);
}

TEST(TalcAdapt, HeldOutRowsNeverInfluenceWeights) {
    const auto t = small_task(300, 3);
    const auto base = talc_adapt(t.matrix, {0.4, 0, false}, {}, "ts");
    std::vector<int> cells(t.matrix.cells().begin(), t.matrix.cells().end());
    for (std::size_t i = 120; i < 300; ++i) {
        for (std::size_t j = 0; j < t.matrix.cols(); ++j) cells[i * t.matrix.cols() + j] = (i + j) % 2 ? kAbstain : 0;
    }
    const LabelingMatrix altered(t.matrix.example_ids(), t.matrix.explanation_ids(), cells, t.matrix.label_space());
    EXPECT_EQ(talc_adapt(altered, {0.4, 0, false}, {}, "ts").training_report.final_weights,
              base.training_report.final_weights);
}

TEST(TalcAdapt, IdenticalWeightsGiveIdenticalPredictions) {
    const auto t = small_task(100, 4);
    const auto a = talc_adapt(t.matrix, {1.0, 0, false}, {}, "ts");
    const auto b = talc_adapt(t.matrix, {1.0, 0, false}, {}, "other");
    for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(a.predictions[i].label, b.predictions[i].label);
}

TEST(TalcAdapt, EmptyAdaptationSetIsRejected) {
    const auto t = small_task(10, 5);
    EXPECT_THROW(talc_adapt(t.matrix, {0.05, 0, false}), ValidationError);
}

TEST(TalcAdapt, GibbsInferenceSelectable) {
    const auto t = small_task(150, 6);
    ModelHyper hyper;
    hyper.inference = InferenceMethod::gibbs;
    hyper.gibbs = {20, 100, 3};
    const auto run = talc_adapt(t.matrix, {1.0, 0, false}, hyper, "ts");
    EXPECT_EQ(run.predictions.size(), 150u);
}

TEST(TalcAdapt, RunJsonMentionsProvenance) {
    const auto t = small_task(50, 7);
    const auto run = talc_adapt(t.matrix, {1.0, 0, false}, {}, "2026-01-01T00:00:00Z");
    const auto text = serialize_adaptation_run_json(run, t.matrix, 0.5);
    EXPECT_NE(text.find("\"n_adapt\": 50"), std::string::npos);
    EXPECT_NE(text.find("2026-01-01T00:00:00Z"), std::string::npos);
    EXPECT_NE(text.find("\"accuracy\""), std::string::npos);
}

TEST(Warmup, WholeStreamWarmupEqualsMajorityVote) {
    const auto t = small_task(60, 8);
    const auto r = warmup_adapt(t.matrix, 60);
    const auto mv = majority_vote(t.matrix).predictions;
    ASSERT_EQ(r.stream.size(), 60u);
    EXPECT_FALSE(r.incomplete);
    for (std::size_t i = 0; i < 60; ++i) {
        EXPECT_EQ(r.stream[i].online.label, mv[i].label);
        EXPECT_EQ(r.stream[i].source, LabelSource::warmup_majority_vote);
        ASSERT_TRUE(r.stream[i].retroactive);
    }
}

TEST(Warmup, SingleRowWarmupAdaptsTheRest) {
    const auto t = small_task(100, 9);
    const auto r = warmup_adapt(t.matrix, 1);
    EXPECT_EQ(r.stream[0].source, LabelSource::warmup_majority_vote);
    ASSERT_TRUE(r.report);
    const std::vector<std::size_t> first = {0};
    const auto w = fit_em(t.matrix.select_rows(first)).final_weights;
    const auto expected = map_exact(t.matrix, w);
    for (std::size_t i = 1; i < 100; ++i) {
        EXPECT_EQ(r.stream[i].source, LabelSource::adapted);
        EXPECT_EQ(r.stream[i].online.label, expected[i].label);
    }
}

TEST(Warmup, ShortStreamFallsBackAndFlags) {
    const auto t = small_task(5, 10);
    const auto r = warmup_adapt(t.matrix, 10);
    EXPECT_TRUE(r.incomplete);
    for (const auto& s : r.stream) {
        EXPECT_EQ(s.source, LabelSource::fallback_incomplete);
        EXPECT_FALSE(s.retroactive);
    }
}

TEST(Warmup, DeterministicAndRejectsZero) {
    const auto t = small_task(80, 11);
    const auto a = warmup_adapt(t.matrix, 20), b = warmup_adapt(t.matrix, 20);
    for (std::size_t i = 0; i < 80; ++i) EXPECT_EQ(a.stream[i].online.posterior, b.stream[i].online.posterior);
    EXPECT_THROW(warmup_adapt(t.matrix, 0), ValidationError);
}

TEST(Warmup, AdapterKeepsPoolingWhileAllAbstain) {
    WarmupAdapter adapter({"a", "b"}, numbered_space(2), 1);
    const int empty[] = {kAbstain, kAbstain};
    const int labeled[] = {1, kAbstain};
    adapter.push("x1", empty);
    EXPECT_FALSE(adapter.adapted());
    adapter.push("x2", labeled);
    EXPECT_TRUE(adapter.adapted());
    EXPECT_EQ(adapter.retroactive().size(), 2u);
}

}  // namespace
}  // namespace talc::testing
