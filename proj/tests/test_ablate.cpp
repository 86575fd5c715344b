#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "talc/ablate.hpp"
#include "talc/error.hpp"
#include "talc/simulate.hpp"

namespace talc::testing {
namespace {

TaskDescriptor descriptor_with(const LabelingMatrix& m, std::vector<double> acc, std::vector<double> ppl) {
    TaskDescriptor d;
    d.task_name = "t";
    d.label_space = m.label_space();
    for (std::size_t j = 0; j < m.cols(); ++j) {
        ExplanationRecord r{m.explanation_ids()[j], "text", std::nullopt, std::nullopt};
        if (!acc.empty()) r.accuracy_metadata = acc[j];
        if (!ppl.empty()) r.perplexity_metadata = ppl[j];
        d.explanations.push_back(r);
    }
    return d;
}

std::vector<std::string> ids_of(const LabelingMatrix& m) { return m.explanation_ids(); }

TEST(RankColumns, AccuracyDescendingPerplexityAscendingTiesById) {
    Rng rng(1);
    const auto m = random_matrix(rng, 5, 4, 2, 0.1);
    const auto d = descriptor_with(m, {0.6, 0.9, 0.6, 0.7}, {10, 3, 20, 3});
    EXPECT_EQ(rank_columns(m, d, {RankingKeyKind::accuracy_metadata, RankDirection::best_first}),
              (std::vector<std::size_t>{1, 3, 0, 2}));
    EXPECT_EQ(rank_columns(m, d, {RankingKeyKind::perplexity_metadata, RankDirection::best_first}),
              (std::vector<std::size_t>{1, 3, 0, 2}));
    EXPECT_EQ(rank_columns(m, d, {RankingKeyKind::accuracy_metadata, RankDirection::worst_first}),
              (std::vector<std::size_t>{0, 2, 3, 1}));
}

TEST(RankColumns, MissingMetadataIsAnError) {
    Rng rng(2);
    const auto m = random_matrix(rng, 5, 3, 2, 0.1);
    const auto d = descriptor_with(m, {}, {});
    EXPECT_THROW(rank_columns(m, d, {RankingKeyKind::accuracy_metadata}), ValidationError);
    EXPECT_THROW(rank_columns(m, d, {RankingKeyKind::empirical_accuracy}), ValidationError);
}

TEST(RankColumns, GoldColumnRanksFirstEmpirically) {
    const auto t = generate(300, 3, {{"a", 0.6, 0.1}, {"b", 1.0, 0.0}, {"c", 0.8, 0.2}}, {}, 3);
    const auto d = descriptor_with(t.matrix, {}, {});
    EXPECT_EQ(rank_columns(t.matrix, d, {RankingKeyKind::empirical_accuracy}, &t.gold).front(), 1u);
}

TEST(SelectColumns, TopPercentUsesCeilAndKeepsOrder) {
    Rng rng(4);
    const auto m = random_matrix(rng, 5, 10, 2, 0.1);
    std::vector<double> acc;
    for (int j = 0; j < 10; ++j) acc.push_back(0.5 + 0.04 * ((j * 7) % 10));
    const auto d = descriptor_with(m, acc, {});
    AblationSpec spec;
    const auto top20 = select_columns(m, d, spec, 20.0);
    EXPECT_EQ(top20.cols(), 2u);
    const auto ranking = rank_columns(m, d, spec.ranking);
    std::vector<std::string> expect = {m.explanation_ids()[std::min(ranking[0], ranking[1])],
                                       m.explanation_ids()[std::max(ranking[0], ranking[1])]};
    EXPECT_EQ(ids_of(top20), expect);
    EXPECT_EQ(select_columns(m, d, spec, 25.0).cols(), 3u);
    EXPECT_EQ(select_columns(m, d, spec, 100.0), m);
}

TEST(SelectColumns, DropBestThenRestore) {
    Rng rng(5);
    const auto m = random_matrix(rng, 6, 3, 2, 0.2);
    const auto d = descriptor_with(m, {0.7, 0.6, 0.9}, {});
    AblationSpec spec;
    spec.mode = AblationMode::drop_best;
    const auto dropped = select_columns(m, d, spec);
    EXPECT_EQ(ids_of(dropped), (std::vector<std::string>{"e0", "e1"}));
    // Re-inserting the removed column at its original index restores the matrix.
    std::vector<int> cells;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        cells.push_back(dropped.at(i, 0));
        cells.push_back(dropped.at(i, 1));
        cells.push_back(m.at(i, 2));
    }
    EXPECT_EQ(LabelingMatrix(m.example_ids(), m.explanation_ids(), cells, m.label_space()), m);
}

TEST(SelectColumns, AddWorstNeedsFourColumns) {
    Rng rng(6);
    const auto m = random_matrix(rng, 6, 5, 2, 0.2);
    const auto d = descriptor_with(m, {0.7, 0.6, 0.9, 0.55, 0.8}, {});
    AblationSpec spec;
    spec.mode = AblationMode::add_worst_to_top3;
    EXPECT_EQ(ids_of(select_columns(m, d, spec)), (std::vector<std::string>{"e0", "e2", "e3", "e4"}));
    const std::vector<std::size_t> three = {0, 1, 2};
    const auto small = m.select_cols(three);
    EXPECT_THROW(select_columns(small, descriptor_with(small, {0.7, 0.6, 0.9}, {}), spec), ValidationError);
}

TEST(SelectColumns, MaliciousFlipsExactlyTopThree) {
    Rng rng(7);
    const auto m = random_matrix(rng, 30, 5, 2, 0.2);
    const auto d = descriptor_with(m, {0.7, 0.6, 0.9, 0.55, 0.8}, {});
    AblationSpec spec;
    spec.mode = AblationMode::replace_top3_malicious;
    const auto out = select_columns(m, d, spec);
    ASSERT_EQ(out.cols(), 5u);
    for (std::size_t j = 0; j < 5; ++j) {
        const bool flipped = (j == 0 || j == 2 || j == 4);
        for (std::size_t i = 0; i < 30; ++i) {
            const int c = m.at(i, j);
            EXPECT_EQ(out.at(i, j), (!flipped || c == kAbstain) ? c : 1 - c);
        }
    }
}

TEST(SelectColumns, ExplanationRatioSamplesSeeded) {
    Rng rng(8);
    const auto m = random_matrix(rng, 5, 10, 2, 0.2);
    const auto d = descriptor_with(m, {}, {});
    AblationSpec spec;
    spec.mode = AblationMode::explanation_ratio;
    spec.seed = 3;
    EXPECT_EQ(select_columns(m, d, spec, 1.0), m);
    const auto a = select_columns(m, d, spec, 0.3), b = select_columns(m, d, spec, 0.3);
    EXPECT_EQ(a.cols(), 3u);
    EXPECT_EQ(a, b);
    const auto ids = ids_of(a);
    EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end(), [&](const std::string& x, const std::string& y) {
        return *m.explanation_index(x) < *m.explanation_index(y);
    }));
    EXPECT_THROW(select_columns(m, d, spec, 0.0), ValidationError);
}

TEST(RunAblation, AdaptationSweepHasNineArms) {
    const auto t = generate(200, 2, recovery_profiles(0.2), {}, 9);
    const auto d = synthetic_descriptor(t, "sim");
    AblationSpec spec;
    spec.mode = AblationMode::adaptation_ratio_sweep;
    const auto rep = run_ablation(t.matrix, d, t.gold, spec, {});
    ASSERT_EQ(rep.arms.size(), 9u);
    EXPECT_DOUBLE_EQ(rep.arms.front().parameter, 0.2);
    EXPECT_DOUBLE_EQ(rep.arms.back().parameter, 1.0);
    const auto csv = serialize_ablation_csv(rep);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 10);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "arm_id,mode,key,accuracy,coverage,parameter,mv_accuracy");
}

TEST(RunAblation, FullTopPercentMatchesUnablatedBitwise) {
    const auto t = generate(300, 2, recovery_profiles(0.2), {}, 10);
    const auto d = synthetic_descriptor(t, "sim");
    AblationSpec spec;
    spec.values = {100.0};
    const auto rep = run_ablation(t.matrix, d, t.gold, spec, {});
    ASSERT_EQ(rep.arms.size(), 1u);
    EXPECT_EQ(rep.arms[0].accuracy, rep.unablated_accuracy);
    EXPECT_EQ(rep.arms[0].explanation_ids, t.matrix.explanation_ids());
    EXPECT_FALSE(std::isnan(rep.arms[0].spearman));
}

TEST(RunAblation, MaliciousArmReportsFlippedIds) {
    const auto t = generate(400, 2, recovery_profiles(0.2), {}, 11);
    const auto d = synthetic_descriptor(t, "sim");
    AblationSpec spec;
    spec.mode = AblationMode::replace_top3_malicious;
    const auto rep = run_ablation(t.matrix, d, t.gold, spec, {});
    EXPECT_EQ(rep.arms[0].flipped_ids, (std::vector<std::string>{"t8", "t7", "t6"}));
    EXPECT_NE(serialize_ablation_report_json(rep).find("\"flipped\""), std::string::npos);
}

}  // namespace
}  // namespace talc::testing
