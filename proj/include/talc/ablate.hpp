#pragma once

// Robustness harness: quality-ranked explanation filtering, removal,
// injection of the worst explanation, malicious replacement, and sweeps over
// the explanation ratio and the adaptation ratio.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "talc/core.hpp"
#include "talc/pipeline.hpp"

namespace talc {

enum class RankingKeyKind { accuracy_metadata, perplexity_metadata, empirical_accuracy };
enum class RankDirection { best_first, worst_first };

/// Accuracy-like keys rank descending, perplexity ascending. Equal values
/// break by explanation id in lexicographic order.
struct RankingKey {
    RankingKeyKind key = RankingKeyKind::accuracy_metadata;
    RankDirection direction = RankDirection::best_first;
};

enum class AblationMode {
    top_percent,
    drop_best,
    add_worst_to_top3,
    replace_top3_malicious,
    explanation_ratio,
    adaptation_ratio_sweep,
};

std::string to_string(AblationMode mode);
std::string to_string(RankingKeyKind key);
AblationMode ablation_mode_from_string(const std::string& s);
RankingKeyKind ranking_key_from_string(const std::string& s);

struct AblationSpec {
    AblationMode mode = AblationMode::top_percent;
    RankingKey ranking;
    /// One arm per value: X percentages for top_percent, ratios for
    /// explanation_ratio, alphas for adaptation_ratio_sweep. Empty selects the
    /// mode's default grid; ignored by the single-arm modes.
    std::vector<double> values;
    std::uint64_t seed = 0;

    /// Values actually used, after defaults.
    std::vector<double> arm_values() const;
};

/// Accuracy of each column over its non-abstain cells that have gold; NaN
/// for columns with no such cells.
std::vector<double> empirical_column_accuracy(const LabelingMatrix& matrix, const GoldLabels& gold);

/// Column indices in rank order according to the key.
std::vector<std::size_t> rank_columns(const LabelingMatrix& matrix, const TaskDescriptor& descriptor,
                                      const RankingKey& key, const GoldLabels* gold = nullptr);

/// Column subset (in original column order) or column transform for one arm.
/// `value` is the arm parameter; single-arm modes ignore it.
LabelingMatrix select_columns(const LabelingMatrix& matrix, const TaskDescriptor& descriptor, const AblationSpec& spec,
                              double value, const GoldLabels* gold = nullptr);
/// Same, using the first arm value.
LabelingMatrix select_columns(const LabelingMatrix& matrix, const TaskDescriptor& descriptor, const AblationSpec& spec,
                              const GoldLabels* gold = nullptr);

struct ArmResult {
    std::size_t arm_id = 0;
    AblationMode mode = AblationMode::top_percent;
    double parameter = 0.0;
    std::vector<std::string> explanation_ids;
    std::vector<std::string> flipped_ids;
    double accuracy = 0.0;
    double mv_accuracy = 0.0;
    /// Fraction of rows with at least one non-abstain label.
    double coverage = 0.0;
    std::vector<double> accuracy_weights;
    std::vector<double> propensity_weights;
    std::vector<double> column_accuracy;
    /// Correlation between learned accuracy weights and empirical column accuracy.
    double pearson = 0.0;
    double spearman = 0.0;
    bool converged = false;
};

struct AblationReport {
    AblationSpec spec;
    AdaptationConfig config;
    /// Explanation ids best first (empty for modes that do not rank).
    std::vector<std::string> ranking;
    double unablated_accuracy = 0.0;
    double unablated_mv_accuracy = 0.0;
    std::vector<ArmResult> arms;
};

/// Runs TALC and majority vote on each arm's matrix and scores both against gold.
AblationReport run_ablation(const LabelingMatrix& matrix, const TaskDescriptor& descriptor, const GoldLabels& gold,
                            const AblationSpec& spec, const AdaptationConfig& config, const ModelHyper& hyper = {});

std::string serialize_ablation_report_json(const AblationReport& report);
/// arm_id,mode,key,accuracy,coverage,parameter,mv_accuracy
std::string serialize_ablation_csv(const AblationReport& report);

}  // namespace talc
