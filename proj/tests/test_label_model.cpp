#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "brute_force.hpp"
#include "fixtures.hpp"
#include "talc/baselines.hpp"
#include "talc/error.hpp"
#include "talc/label_model.hpp"
#include "talc/simulate.hpp"

namespace talc::testing {
namespace {

using kernels::Backend;

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

TEST(Score, CountsAgreeingColumns) {
    auto w = ModelWeights::zeros(3, 2);
    w.accuracy = {1, 1, 1};
    const int row[] = {0, 0, 1};
    EXPECT_DOUBLE_EQ(score(row, 0, w), 2.0);
}

TEST(Score, AllAbstainRowIsPriorOnly) {
    auto w = ModelWeights::zeros(2, 2);
    w.accuracy = {1.5, -0.5};
    w.propensity = {0.7, 2.0};
    w.class_log_prior = {0.25, -0.25};
    const int row[] = {kAbstain, kAbstain};
    EXPECT_DOUBLE_EQ(score(row, 0, w), 0.25);
    EXPECT_DOUBLE_EQ(score(row, 1, w), -0.25);
}

TEST(Score, IncludesPropensityOfLabeledCells) {
    auto w = ModelWeights::zeros(2, 2);
    w.accuracy = {std::log(2.0), std::log(4.0)};
    w.propensity = {0.5, -1.25};
    const int row[] = {0, 1};
    EXPECT_NEAR(score(row, 0, w), std::log(2.0) + 0.5 - 1.25, 1e-15);
}

TEST(Posterior, HandComputedTwoColumnExample) {
    const auto m = make_matrix(1, 2, 2, {0, 1});
    auto w = ModelWeights::zeros(2, 2);
    w.accuracy = {std::log(2.0), std::log(4.0)};
    const auto q = posterior(m, w);
    EXPECT_NEAR(q.row(0)[0], 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(q.row(0)[1], 2.0 / 3.0, 1e-15);
}

TEST(Posterior, ZeroAccuracyWeightsGiveUniformRows) {
    Rng rng(5);
    const auto m = random_matrix(rng, 20, 4, 3, 0.3);
    auto w = ModelWeights::zeros(4, 3);
    w.propensity = {1, -2, 0.5, 3};
    const auto q = posterior(m, w);
    for (double p : q.probs) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
}

TEST(Posterior, RowsSumToOne) {
    Rng rng(6);
    for (int t = 0; t < 20; ++t) {
        const auto m = random_matrix(rng, 30, 5, 4, 0.3);
        const auto w = random_weights(rng, 5, 4, -3, 3, 1e-4);
        const auto q = posterior(m, w);
        for (std::size_t i = 0; i < q.rows(); ++i) {
            const auto r = q.row(i);
            EXPECT_NEAR(std::accumulate(r.begin(), r.end(), 0.0), 1.0, 1e-9);
        }
    }
}

TEST(Posterior, MatchesEnumerationOnSmallBinaryInstances) {
    Rng rng(7);
    for (int t = 0; t < 30; ++t) {
        const std::size_t n = 1 + rng.below(2), m = 1 + rng.below(3);
        const auto mat = random_matrix(rng, n, m, 2, 0.3);
        const auto w = random_weights(rng, m, 2, -2, 2, 0.0);
        const auto oracle = brute_force_oracle(mat, w);
        const auto q = posterior(mat, w);
        for (std::size_t x = 0; x < q.probs.size(); ++x) EXPECT_NEAR(q.probs[x], oracle.posterior[x], 1e-12);
    }
}

TEST(Posterior, InvariantToPropensityWeights) {
    Rng rng(8);
    for (int t = 0; t < 20; ++t) {
        const auto m = random_matrix(rng, 25, 4, 3, 0.4);
        auto w = random_weights(rng, 4, 3, -2, 2, 1e-4);
        const auto q = posterior(m, w);
        const auto labels = map_exact(m, w);
        w.propensity[rng.below(4)] += 5.0 * (rng.uniform01() - 0.5);
        EXPECT_EQ(posterior(m, w).probs, q.probs);
        const auto labels2 = map_exact(m, w);
        for (std::size_t i = 0; i < labels.size(); ++i) EXPECT_EQ(labels[i].label, labels2[i].label);
    }
}

TEST(Posterior, FactorizesOverStackedRows) {
    Rng rng(9);
    const auto top = random_matrix(rng, 7, 3, 3, 0.3);
    const auto raw = random_matrix(rng, 5, 3, 3, 0.3);
    const std::vector<int> bottom_cells(raw.cells().begin(), raw.cells().end());
    std::vector<std::string> ids;
    for (int i = 0; i < 5; ++i) ids.push_back("y" + std::to_string(i));
    const LabelingMatrix bottom(ids, top.explanation_ids(), bottom_cells, top.label_space());
    const auto w = random_weights(rng, 3, 3, -2, 2, 1e-4);
    const auto joint = posterior(top.stacked(bottom), w);
    auto expected = posterior(top, w).probs;
    const auto b = posterior(bottom, w).probs;
    expected.insert(expected.end(), b.begin(), b.end());
    EXPECT_EQ(joint.probs, expected);
}

TEST(Posterior, RejectsDimensionMismatch) {
    const auto m = make_matrix(1, 2, 2, {0, 1});
    EXPECT_THROW(posterior(m, ModelWeights::zeros(3, 2)), ValidationError);
    EXPECT_THROW(posterior(m, ModelWeights::zeros(2, 3)), ValidationError);
}

TEST(LogPartition, SingleCellZeroWeightsIsLogSix) {
    EXPECT_NEAR(log_partition(ModelWeights::zeros(1, 2), 1, 2), std::log(6.0), 1e-15);
}

TEST(LogPartition, AdditiveOverExamples) {
    Rng rng(10);
    const auto w = random_weights(rng, 3, 3, -2, 2, 1e-4);
    EXPECT_NEAR(log_partition(w, 2, 3), 2.0 * log_partition(w, 1, 3), 1e-12);
}

TEST(LogPartition, MatchesEnumerationOnTwoByThreeBinary) {
    Rng rng(11);
    for (int t = 0; t < 10; ++t) {
        const auto mat = random_matrix(rng, 2, 3, 2, 0.3);
        const auto w = random_weights(rng, 3, 2, -2, 2, 0.0);
        EXPECT_LE(rel_err(log_partition(w, 2, 2), brute_force_oracle(mat, w).log_partition), 1e-9);
    }
}

TEST(LogPartition, StaysFiniteForLargeWeights) {
    auto w = ModelWeights::zeros(2, 3);
    w.accuracy = {800, -800};
    w.propensity = {400, 700};
    EXPECT_TRUE(std::isfinite(log_partition(w, 10, 3)));
}

TEST(MarginalLikelihood, ZeroWeightsClosedForm) {
    Rng rng(12);
    for (std::size_t k : {2u, 3u, 5u}) {
        const auto m = random_matrix(rng, 6, 4, k, 0.0);
        const double expected = -6.0 * 4.0 * std::log(double(k + 1));
        EXPECT_NEAR(marginal_log_likelihood(m, ModelWeights::zeros(4, k, 0.0)), expected, 1e-12);
    }
}

TEST(MarginalLikelihood, NeverPositiveWithoutRegularization) {
    Rng rng(13);
    for (int t = 0; t < 50; ++t) {
        const auto m = random_matrix(rng, 10, 3, 2 + rng.below(3), 0.3);
        const auto w = random_weights(rng, 3, m.num_classes(), -4, 4, 0.0);
        EXPECT_LE(marginal_log_likelihood(m, w), 0.0);
    }
}

TEST(MarginalLikelihood, MatchesEnumerationOnTwoByThreeBinary) {
    Rng rng(14);
    for (int t = 0; t < 10; ++t) {
        const auto mat = random_matrix(rng, 2, 3, 2, 0.3);
        const auto w = random_weights(rng, 3, 2, -2, 2, 1e-3);
        EXPECT_LE(rel_err(marginal_log_likelihood(mat, w), brute_force_oracle(mat, w).marginal_ll), 1e-9);
    }
}

TEST(Gradient, ModelAgreeProbabilityAtZeroIsOneThird) {
    EXPECT_DOUBLE_EQ(model_agree_probability(0, 0, 2), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(model_label_probability(0, 0, 2), 2.0 / 3.0);
}

TEST(Gradient, MatchesCentralDifferencesIncludingPrior) {
    Rng rng(15);
    const double h = 1e-5;
    for (int t = 0; t < 20; ++t) {
        const std::size_t k = 2 + rng.below(3), m = 1 + rng.below(5);
        const auto mat = random_matrix(rng, 5 + rng.below(20), m, k, 0.3);
        const auto w = random_weights(rng, m, k, -2, 2, 1e-2);
        const auto g = gradient(mat, w);
        auto fd = [&](auto member, std::size_t idx) {
            auto plus = w, minus = w;
            (plus.*member)[idx] += h;
            (minus.*member)[idx] -= h;
            return (marginal_log_likelihood(mat, plus) - marginal_log_likelihood(mat, minus)) / (2 * h);
        };
        for (std::size_t j = 0; j < m; ++j) {
            EXPECT_LE(rel_err(g.accuracy[j], fd(&ModelWeights::accuracy, j)), 1e-5);
            EXPECT_LE(rel_err(g.propensity[j], fd(&ModelWeights::propensity, j)), 1e-5);
        }
        for (std::size_t y = 0; y < k; ++y) {
            EXPECT_LE(rel_err(g.class_log_prior[y], fd(&ModelWeights::class_log_prior, y)), 1e-5);
        }
    }
}

TEST(Gradient, SmallAtConvergedFit) {
    const auto task = generate(400, 3, {{"a", 0.8, 0.1}, {"b", 0.7, 0.2}, {"c", 0.6, 0.3}, {"d", 0.75, 0.0}}, {}, 3);
    FitOptions opts;
    opts.tol = 1e-12;
    opts.max_iters = 5000;
    const auto rep = fit_em(task.matrix, opts);
    ASSERT_TRUE(rep.converged);
    EXPECT_LT(gradient(task.matrix, rep.final_weights).norm() / 400.0, 1e-3);
}

TEST(FitEm, SingleGoldColumnLearnsPositiveFiniteAccuracy) {
    const auto task = generate(300, 2, {{"perfect", 1.0, 0.0}}, {}, 4);
    const auto rep = fit_em(task.matrix);
    const double a = rep.final_weights.accuracy[0];
    EXPECT_GT(a, 0.0);
    EXPECT_TRUE(std::isfinite(a));
    EXPECT_TRUE(std::isfinite(rep.final_weights.propensity[0]));
}

TEST(FitEm, TraceIsNonDecreasing) {
    Rng rng(16);
    for (auto init : {InitPolicy::majority_vote, InitPolicy::constant}) {
        for (int t = 0; t < 10; ++t) {
            const auto m = random_matrix(rng, 50, 4, 2 + rng.below(3), 0.3);
            FitOptions opts;
            opts.init = init;
            const auto rep = fit_em(m, opts);
            for (std::size_t s = 1; s < rep.log_likelihood_trace.size(); ++s) {
                EXPECT_GE(rep.log_likelihood_trace[s], rep.log_likelihood_trace[s - 1] - 1e-9);
            }
        }
    }
}

TEST(FitEm, TraceEndsAtFinalWeightsLikelihood) {
    const auto task = generate(200, 2, {{"a", 0.8, 0.2}, {"b", 0.6, 0.2}, {"c", 0.9, 0.5}}, {}, 5);
    const auto rep = fit_em(task.matrix);
    EXPECT_EQ(rep.log_likelihood_trace.size(), rep.iterations + 1);
    EXPECT_DOUBLE_EQ(rep.log_likelihood_trace.back(), marginal_log_likelihood(task.matrix, rep.final_weights));
}

TEST(FitEm, StopsAtMaxIters) {
    const auto task = generate(200, 2, {{"a", 0.8, 0.2}, {"b", 0.6, 0.2}}, {}, 6);
    FitOptions opts;
    opts.max_iters = 2;
    opts.tol = 0.0;
    const auto rep = fit_em(task.matrix, opts);
    EXPECT_EQ(rep.iterations, 2u);
    EXPECT_FALSE(rep.converged);
}

TEST(FitEm, DeterministicAndBackendIndependent) {
    const auto task = generate(600, 3, {{"a", 0.8, 0.2}, {"b", 0.6, 0.2}, {"c", 0.7, 0.4}}, {}, 7);
    FitOptions opts;
    const auto first = fit_em(task.matrix, opts);
    const auto second = fit_em(task.matrix, opts);
    opts.backend = Backend::serial;
    const auto serial = fit_em(task.matrix, opts);
    EXPECT_EQ(first.final_weights, second.final_weights);
    EXPECT_EQ(first.final_weights, serial.final_weights);
    EXPECT_EQ(first.log_likelihood_trace, serial.log_likelihood_trace);
}

TEST(FitEm, PermutingColumnsPermutesAccuracyWeights) {
    const auto task = generate(500, 2, {{"a", 0.85, 0.2}, {"b", 0.6, 0.1}, {"c", 0.7, 0.3}, {"d", 0.55, 0.0}}, {}, 8);
    const std::vector<std::size_t> perm = {2, 0, 3, 1};
    const auto base = fit_em(task.matrix);
    const auto permuted = fit_em(task.matrix.select_cols(perm));
    for (std::size_t j = 0; j < perm.size(); ++j) {
        EXPECT_NEAR(permuted.final_weights.accuracy[j], base.final_weights.accuracy[perm[j]], 1e-6);
    }
}

TEST(FitEm, AbstainOnlyColumnIsKeptAndFlagged) {
    const auto m = make_matrix(4, 2, 2, {0, kAbstain, 1, kAbstain, 1, kAbstain, 0, kAbstain});
    const auto rep = fit_em(m);
    EXPECT_EQ(rep.abstain_only_columns, std::vector<std::size_t>{1});
    EXPECT_EQ(rep.final_weights.accuracy.size(), 2u);
    EXPECT_TRUE(std::isfinite(rep.final_weights.propensity[1]));
}

TEST(FitEm, AllAbstainMatrixIsRejected) {
    const auto m = make_matrix(2, 2, 2, {kAbstain, kAbstain, kAbstain, kAbstain});
    EXPECT_THROW(fit_em(m), ValidationError);
}

TEST(FitEm, RejectsBadHyperparameters) {
    const auto m = make_matrix(1, 1, 2, {0});
    FitOptions opts;
    opts.step_size = 0.0;
    EXPECT_THROW(fit_em(m, opts), ValidationError);
    opts = {};
    opts.l2_lambda = -1.0;
    EXPECT_THROW(fit_em(m, opts), ValidationError);
}

TEST(MapExact, PluralityUnderEqualWeights) {
    const auto m = make_matrix(1, 3, 2, {0, 0, 1});
    auto w = ModelWeights::zeros(3, 2);
    w.accuracy = {0.7, 0.7, 0.7};
    const auto p = map_exact(m, w);
    EXPECT_EQ(p[0].label, 0);
    EXPECT_FALSE(p[0].tie);
}

TEST(MapExact, AllAbstainRowIsTiedClassZero) {
    const auto m = make_matrix(1, 2, 3, {kAbstain, kAbstain});
    auto w = ModelWeights::zeros(2, 3);
    w.accuracy = {2, 1};
    const auto p = map_exact(m, w);
    EXPECT_EQ(p[0].label, 0);
    EXPECT_TRUE(p[0].tie);
}

TEST(MapExact, ReducesToMajorityVoteWithEqualWeights) {
    Rng rng(17);
    for (int t = 0; t < 100; ++t) {
        const std::size_t k = 2 + rng.below(3), m = 1 + rng.below(6);
        const auto mat = random_matrix(rng, 20, m, k, 0.0);
        auto w = ModelWeights::zeros(m, k);
        const double a = 0.1 + 2.0 * rng.uniform01();
        std::fill(w.accuracy.begin(), w.accuracy.end(), a);
        const auto exact = map_exact(mat, w);
        const auto mv = majority_vote(mat).predictions;
        for (std::size_t i = 0; i < exact.size(); ++i) {
            EXPECT_EQ(exact[i].label, mv[i].label);
            EXPECT_EQ(exact[i].tie, mv[i].tie);
        }
    }
}

TEST(MapExact, AgreesWithJointEnumeration) {
    Rng rng(18);
    for (int t = 0; t < 30; ++t) {
        const std::size_t n = 1 + rng.below(3), m = 1 + rng.below(3), k = 2 + rng.below(2);
        const auto mat = random_matrix(rng, n, m, k, 0.3);
        const auto w = random_weights(rng, m, k, -2, 2, 0.0);
        const auto oracle = brute_force_oracle(mat, w);
        const auto p = map_exact(mat, w);
        for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(p[i].label, oracle.map[i]);
    }
}

TEST(Gibbs, AgreesWithExactWhereMarginIsClear) {
    const auto task = generate(500, 3, {{"a", 0.7, 0.3}, {"b", 0.6, 0.3}, {"c", 0.65, 0.5}}, {}, 19);
    const auto w = fit_em(task.matrix).final_weights;
    const auto exact = map_exact(task.matrix, w);
    const auto q = posterior(task.matrix, w);
    const auto sampled = gibbs_map(task.matrix, w);
    for (std::size_t i = 0; i < exact.size(); ++i) {
        std::vector<double> r(q.row(i).begin(), q.row(i).end());
        std::sort(r.rbegin(), r.rend());
        if (r[0] - r[1] > 0.1) {
            EXPECT_EQ(sampled[i].label, exact[i].label) << "row " << i;
        }
    }
}

TEST(Gibbs, UniformPosteriorStillYieldsValidClasses) {
    Rng rng(20);
    const auto m = random_matrix(rng, 50, 3, 4, 0.2);
    const auto p = gibbs_map(m, ModelWeights::zeros(3, 4), {10, 50, 3});
    for (const auto& pred : p) {
        EXPECT_GE(pred.label, 0);
        EXPECT_LT(pred.label, 4);
    }
}

TEST(Gibbs, SameSeedSameOutputAcrossBackends) {
    Rng rng(21);
    const auto m = random_matrix(rng, 300, 4, 3, 0.2);
    const auto w = random_weights(rng, 4, 3, -1, 1, 1e-4);
    const auto a = gibbs_map(m, w, {50, 200, 9});
    const auto b = gibbs_map(m, w, {50, 200, 9}, Backend::serial);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].label, b[i].label);
        EXPECT_EQ(a[i].posterior, b[i].posterior);
    }
}

TEST(WeightsJson, RoundTripsExactly) {
    Rng rng(22);
    const auto w = random_weights(rng, 3, 3, -5, 5, 0.25);
    const std::vector<std::string> ids = {"first", "second", "third"};
    const auto text = serialize_weights_json(w, ids, InitPolicy::constant, 11);
    EXPECT_EQ(parse_weights_json(text, ids), w);
    EXPECT_NE(text.find("\"init_policy\""), std::string::npos);
}

TEST(WeightsJson, MissingExplanationIsAnError) {
    const auto text = serialize_weights_json(ModelWeights::zeros(1, 2), std::vector<std::string>{"a"},
                                             InitPolicy::majority_vote, 0);
    EXPECT_THROW(parse_weights_json(text, std::vector<std::string>{"a", "b"}), ValidationError);
}

}  // namespace
}  // namespace talc::testing
