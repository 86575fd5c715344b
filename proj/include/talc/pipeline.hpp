#pragma once

// End-to-end test-time adaptation: split the test rows, fit the aggregator
// on the adaptation part, then label every row with the fitted weights.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "talc/core.hpp"
#include "talc/label_model.hpp"

namespace talc {

enum class InferenceMethod { exact, gibbs };

struct ModelHyper {
    FitOptions fit;
    InferenceMethod inference = InferenceMethod::exact;
    GibbsOptions gibbs;
};

struct Provenance {
    std::size_t n = 0;
    std::size_t m = 0;
    std::size_t k = 0;
    std::size_t n_adapt = 0;
    std::string timestamp;
};

struct AdaptationRun {
    AdaptationConfig config;
    TrainingReport training_report;
    /// One prediction per example, in matrix row order.
    std::vector<Prediction> predictions;
    Provenance provenance;
    std::vector<std::string> adaptation_ids;
};

/// Fits on the adaptation split only and labels all n rows with the same
/// weights. `timestamp` defaults to the current UTC time.
AdaptationRun talc_adapt(const LabelingMatrix& matrix, const AdaptationConfig& config, const ModelHyper& hyper = {},
                         std::optional<std::string> timestamp = std::nullopt);

std::string utc_timestamp_now();

/// JSON document describing a run (config, training report, provenance,
/// predictions summary). Weights are keyed by explanation id.
std::string serialize_adaptation_run_json(const AdaptationRun& run, const LabelingMatrix& matrix,
                                          std::optional<double> accuracy = std::nullopt);

enum class LabelSource { warmup_majority_vote, adapted, fallback_incomplete };

std::string to_string(LabelSource s);

struct StreamPrediction {
    std::size_t arrival = 0;  // 0-based arrival index
    /// Label emitted when the row arrived.
    Prediction online;
    LabelSource source = LabelSource::warmup_majority_vote;
    /// For warm-up rows, the label after the aggregator was fitted.
    std::optional<Prediction> retroactive;
};

/// Online use: the first warmup_n rows are labeled by majority vote; when the
/// warmup_n-th row arrives the pooled rows are used to fit the aggregator
/// once, after which every row is labeled with the fitted weights.
class WarmupAdapter {
public:
    WarmupAdapter(std::vector<std::string> explanation_ids, LabelSpace label_space, std::size_t warmup_n,
                  ModelHyper hyper = {});

    /// Labels one arriving row. When this arrival completes the warm-up,
    /// retroactive labels for the pooled rows become available.
    StreamPrediction push(const std::string& example_id, std::span<const int> row);

    bool adapted() const { return weights_.has_value(); }
    const std::optional<ModelWeights>& weights() const { return weights_; }
    const std::optional<TrainingReport>& report() const { return report_; }
    /// Retroactive labels for the pooled warm-up rows (empty until adapted).
    const std::vector<Prediction>& retroactive() const { return retroactive_; }

private:
    std::vector<std::string> explanation_ids_;
    LabelSpace label_space_;
    std::size_t warmup_n_;
    ModelHyper hyper_;
    std::vector<std::string> pooled_ids_;
    std::vector<int> pooled_cells_;
    std::size_t arrivals_ = 0;
    std::optional<ModelWeights> weights_;
    std::optional<TrainingReport> report_;
    std::vector<Prediction> retroactive_;
};

struct WarmupResult {
    std::vector<StreamPrediction> stream;
    /// Set when the stream ended before warm-up finished; every row then
    /// keeps its majority-vote label.
    bool incomplete = false;
    std::optional<TrainingReport> report;
};

/// Feeds the matrix rows in order through a WarmupAdapter and attaches the
/// retroactive labels to the warm-up rows.
WarmupResult warmup_adapt(const LabelingMatrix& stream, std::size_t warmup_n, const ModelHyper& hyper = {});

}  // namespace talc
