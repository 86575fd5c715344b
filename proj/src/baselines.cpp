#include "talc/baselines.hpp"

#include <cmath>
#include <limits>
#include <unordered_map>

#include "talc/error.hpp"
#include "talc/rng.hpp"

namespace talc {

std::string to_string(BaselineMethod m) {
    switch (m) {
        case BaselineMethod::majority_vote: return "majority_vote";
        case BaselineMethod::mean_pool: return "mean_pool";
        case BaselineMethod::single_explanation: return "single_explanation";
        case BaselineMethod::random: return "random";
    }
    return "unknown";
}

BaselineResult majority_vote(const LabelingMatrix& matrix, MajorityFallback fallback) {
    const std::size_t k = matrix.num_classes();
    BaselineResult result;
    result.method = BaselineMethod::majority_vote;
    result.predictions.resize(matrix.rows());

    int fallback_label = 0;
    if (fallback == MajorityFallback::global_mode) {
        std::vector<double> totals(k, 0.0);
        for (int c : matrix.cells()) {
            if (c != kAbstain) totals[static_cast<std::size_t>(c)] += 1.0;
        }
        fallback_label = static_cast<int>(argmax_lowest(totals));
    }

    std::vector<double> votes(k);
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        std::fill(votes.begin(), votes.end(), 0.0);
        double cast = 0.0;
        for (int c : matrix.row(i)) {
            if (c == kAbstain) continue;
            votes[static_cast<std::size_t>(c)] += 1.0;
            cast += 1.0;
        }
        auto& p = result.predictions[i];
        p.example_id = matrix.example_ids()[i];
        if (cast == 0.0) {
            p.label = fallback_label;
            p.tie = true;
            p.posterior.assign(k, 1.0 / static_cast<double>(k));
            result.fallback_rows.push_back(i);
            continue;
        }
        p.label = static_cast<int>(argmax_lowest(votes, &p.tie));
        p.posterior.resize(k);
        for (std::size_t y = 0; y < k; ++y) p.posterior[y] = votes[y] / cast;
    }
    return result;
}

BaselineResult mean_pool(const SoftLabelingMatrix& soft) {
    const std::size_t k = soft.num_classes();
    const double m = static_cast<double>(soft.cols());
    BaselineResult result;
    result.method = BaselineMethod::mean_pool;
    result.predictions.resize(soft.rows());
    for (std::size_t i = 0; i < soft.rows(); ++i) {
        std::vector<double> mean(k, 0.0);
        for (std::size_t j = 0; j < soft.cols(); ++j) {
            auto p = soft.cell(i, j);
            for (std::size_t y = 0; y < k; ++y) mean[y] += p[y];
        }
        for (double& v : mean) v /= m;
        auto& pred = result.predictions[i];
        pred.example_id = soft.example_ids()[i];
        pred.label = static_cast<int>(argmax_lowest(mean, &pred.tie));
        pred.posterior = std::move(mean);
    }
    return result;
}

BaselineResult random_labels(const LabelingMatrix& matrix, std::uint64_t seed) {
    const std::size_t k = matrix.num_classes();
    BaselineResult result;
    result.method = BaselineMethod::random;
    Rng rng(seed);
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        Prediction p;
        p.example_id = matrix.example_ids()[i];
        p.label = static_cast<int>(rng.below(k));
        p.posterior.assign(k, 1.0 / static_cast<double>(k));
        result.predictions.push_back(std::move(p));
    }
    return result;
}

SingleExplanationResult single_explanation(const LabelingMatrix& matrix, std::size_t column, const GoldLabels& gold) {
    if (column >= matrix.cols()) throw ValidationError("column index out of range");
    std::unordered_map<std::string_view, int> gold_by_id;
    for (std::size_t g = 0; g < gold.size(); ++g) gold_by_id.emplace(gold.example_ids[g], gold.labels[g]);

    SingleExplanationResult r;
    std::size_t labeled = 0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        const int c = matrix.at(i, column);
        Prediction p;
        p.example_id = matrix.example_ids()[i];
        p.label = c;
        r.predictions.push_back(std::move(p));
        if (c == kAbstain) continue;
        ++labeled;
        auto it = gold_by_id.find(matrix.example_ids()[i]);
        if (it == gold_by_id.end()) continue;
        ++r.scored;
        if (it->second == c) ++correct;
    }
    r.coverage = static_cast<double>(labeled) / static_cast<double>(matrix.rows());
    r.accuracy_defined = r.scored > 0;
    r.accuracy = r.accuracy_defined ? static_cast<double>(correct) / static_cast<double>(r.scored)
                                    : std::numeric_limits<double>::quiet_NaN();
    return r;
}

double accuracy(const std::vector<Prediction>& predictions, const GoldLabels& gold) {
    std::unordered_map<std::string_view, int> by_id;
    for (const auto& p : predictions) by_id.emplace(p.example_id, p.label);
    if (gold.size() == 0) throw ValidationError("no gold labels to score against");
    std::size_t correct = 0;
    for (std::size_t g = 0; g < gold.size(); ++g) {
        auto it = by_id.find(gold.example_ids[g]);
        if (it == by_id.end()) throw ValidationError("no prediction for gold example '" + gold.example_ids[g] + "'");
        if (it->second == gold.labels[g]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(gold.size());
}

}  // namespace talc
