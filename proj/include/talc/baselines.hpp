#pragma once

// Aggregation baselines that do no adaptation.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "talc/core.hpp"
#include "talc/label_model.hpp"

namespace talc {

enum class BaselineMethod { majority_vote, mean_pool, single_explanation, random };

std::string to_string(BaselineMethod m);

struct BaselineResult {
    BaselineMethod method = BaselineMethod::majority_vote;
    /// Column index for single_explanation.
    std::size_t column = 0;
    std::vector<Prediction> predictions;
    /// Rows that had no vote and received the fallback label.
    std::vector<std::size_t> fallback_rows;
};

enum class MajorityFallback { fixed_class, global_mode };

/// Plurality of the non-abstain labels in each row; ties to the lowest class.
/// All-abstain rows get class 0 (fixed_class) or the most common non-abstain
/// label of the whole matrix (global_mode), and are flagged.
BaselineResult majority_vote(const LabelingMatrix& matrix, MajorityFallback fallback = MajorityFallback::fixed_class);

/// Mean of each row's probability vectors, then argmax (ties to lowest, flagged).
BaselineResult mean_pool(const SoftLabelingMatrix& soft);

/// Uniformly random class per example.
BaselineResult random_labels(const LabelingMatrix& matrix, std::uint64_t seed);

struct SingleExplanationResult {
    std::vector<Prediction> predictions;  // label kAbstain where the column abstains
    /// Accuracy over the column's non-abstain cells that have gold; NaN when undefined.
    double accuracy = 0.0;
    bool accuracy_defined = false;
    /// Fraction of the column's cells that are non-abstain.
    double coverage = 0.0;
    std::size_t scored = 0;
};

SingleExplanationResult single_explanation(const LabelingMatrix& matrix, std::size_t column, const GoldLabels& gold);

/// Fraction of predictions matching gold, over the gold ids. Throws
/// ValidationError when a gold id has no prediction or nothing overlaps.
double accuracy(const std::vector<Prediction>& predictions, const GoldLabels& gold);

}  // namespace talc
