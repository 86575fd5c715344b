#include "talc/pipeline.hpp"

#include <chrono>
#include <ctime>

#include <json.hpp>

#include "talc/baselines.hpp"
#include "talc/error.hpp"

namespace talc {

namespace {

using json = nlohmann::ordered_json;

std::vector<Prediction> infer(const LabelingMatrix& matrix, const ModelWeights& w, const ModelHyper& hyper) {
    if (hyper.inference == InferenceMethod::gibbs) return gibbs_map(matrix, w, hyper.gibbs, hyper.fit.backend);
    return map_exact(matrix, w, hyper.fit.backend);
}

}  // namespace

std::string utc_timestamp_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

AdaptationRun talc_adapt(const LabelingMatrix& matrix, const AdaptationConfig& config, const ModelHyper& hyper,
                         std::optional<std::string> timestamp) {
    auto split = split_by_alpha(matrix, config);

    AdaptationRun run;
    run.config = config;
    run.training_report = fit_em(split.adaptation, hyper.fit);
    run.predictions = infer(matrix, run.training_report.final_weights, hyper);
    run.adaptation_ids = split.adaptation.example_ids();
    run.provenance = {matrix.rows(), matrix.cols(), matrix.num_classes(), split.adaptation.rows(),
                      timestamp ? *timestamp : utc_timestamp_now()};
    return run;
}

std::string serialize_adaptation_run_json(const AdaptationRun& run, const LabelingMatrix& matrix,
                                          std::optional<double> accuracy) {
    const auto& rep = run.training_report;
    const auto& w = rep.final_weights;
    json doc;
    doc["config"] = {{"alpha", run.config.alpha},
                     {"seed", run.config.seed},
                     {"shuffle_before_split", run.config.shuffle_before_split}};
    doc["provenance"] = {{"n", run.provenance.n},
                         {"m", run.provenance.m},
                         {"k", run.provenance.k},
                         {"n_adapt", run.provenance.n_adapt},
                         {"timestamp", run.provenance.timestamp}};
    json weights = json::object();
    for (std::size_t j = 0; j < matrix.cols(); ++j) {
        weights[matrix.explanation_ids()[j]] = {{"acc", w.accuracy[j]}, {"prop", w.propensity[j]}};
    }
    json abstain_only = json::array();
    for (std::size_t j : rep.abstain_only_columns) abstain_only.push_back(matrix.explanation_ids()[j]);
    doc["training_report"] = {{"iterations", rep.iterations},
                              {"converged", rep.converged},
                              {"log_likelihood_trace", rep.log_likelihood_trace},
                              {"abstain_only_columns", abstain_only},
                              {"final_weights", weights},
                              {"class_log_prior", w.class_log_prior},
                              {"lambda", w.l2_lambda}};
    std::size_t ties = 0;
    for (const auto& p : run.predictions) ties += p.tie ? 1 : 0;
    doc["predictions"] = {{"count", run.predictions.size()}, {"ties", ties}};
    if (accuracy) doc["accuracy"] = *accuracy;
    return doc.dump(2) + "\n";
}

std::string to_string(LabelSource s) {
    switch (s) {
        case LabelSource::warmup_majority_vote: return "warmup_mv";
        case LabelSource::adapted: return "adapted";
        case LabelSource::fallback_incomplete: return "fallback_incomplete";
    }
    return "unknown";
}

WarmupAdapter::WarmupAdapter(std::vector<std::string> explanation_ids, LabelSpace label_space, std::size_t warmup_n,
                             ModelHyper hyper)
    : explanation_ids_(std::move(explanation_ids)),
      label_space_(std::move(label_space)),
      warmup_n_(warmup_n),
      hyper_(std::move(hyper)) {
    if (warmup_n_ == 0) throw ValidationError("warmup_n must be >= 1");
    if (explanation_ids_.empty()) throw ValidationError("warm-up stream needs at least one explanation");
}

StreamPrediction WarmupAdapter::push(const std::string& example_id, std::span<const int> row) {
    if (row.size() != explanation_ids_.size()) throw ValidationError("row length does not match explanations");
    const LabelingMatrix single({example_id}, explanation_ids_, std::vector<int>(row.begin(), row.end()), label_space_);

    StreamPrediction out;
    out.arrival = arrivals_++;
    if (weights_) {
        out.online = infer(single, *weights_, hyper_).front();
        out.source = LabelSource::adapted;
        return out;
    }

    out.online = majority_vote(single).predictions.front();
    out.source = LabelSource::warmup_majority_vote;
    pooled_ids_.push_back(example_id);
    pooled_cells_.insert(pooled_cells_.end(), row.begin(), row.end());

    // Fit once the warm-up budget is reached. A pool with no labels at all
    // cannot be fitted; keep pooling until one arrives.
    if (pooled_ids_.size() >= warmup_n_) {
        LabelingMatrix pool(pooled_ids_, explanation_ids_, pooled_cells_, label_space_);
        if (pool.has_label()) {
            report_ = fit_em(pool, hyper_.fit);
            weights_ = report_->final_weights;
            retroactive_ = infer(pool, *weights_, hyper_);
        }
    }
    return out;
}

WarmupResult warmup_adapt(const LabelingMatrix& stream, std::size_t warmup_n, const ModelHyper& hyper) {
    WarmupAdapter adapter(stream.explanation_ids(), stream.label_space(), warmup_n, hyper);
    WarmupResult result;
    std::vector<std::size_t> pooled;
    for (std::size_t i = 0; i < stream.rows(); ++i) {
        auto p = adapter.push(stream.example_ids()[i], stream.row(i));
        if (p.source == LabelSource::warmup_majority_vote) pooled.push_back(result.stream.size());
        result.stream.push_back(std::move(p));
    }
    if (!adapter.adapted()) {
        result.incomplete = true;
        for (auto& p : result.stream) p.source = LabelSource::fallback_incomplete;
        return result;
    }
    const auto& retro = adapter.retroactive();
    for (std::size_t r = 0; r < pooled.size() && r < retro.size(); ++r) {
        result.stream[pooled[r]].retroactive = retro[r];
    }
    result.report = adapter.report();
    return result;
}

}  // namespace talc
