#include "talc/ablate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "talc/baselines.hpp"
#include "talc/error.hpp"
#include "talc/io.hpp"
#include "talc/rng.hpp"
#include "talc/simulate.hpp"
#include "talc/stats.hpp"

namespace talc {

namespace {

using json = nlohmann::ordered_json;

std::vector<double> grid(double from, double to, double step) {
    std::vector<double> out;
    const auto count = static_cast<int>(std::llround((to - from) / step));
    for (int i = 0; i <= count; ++i) out.push_back(std::round((from + step * i) * 1e9) / 1e9);
    return out;
}

std::size_t ceil_count(double fraction, std::size_t m) {
    const double raw = fraction * static_cast<double>(m);
    return static_cast<std::size_t>(std::ceil(raw - 1e-9));
}

std::vector<std::size_t> sorted(std::vector<std::size_t> v) {
    std::sort(v.begin(), v.end());
    return v;
}

double row_coverage(const LabelingMatrix& matrix) {
    std::size_t covered = 0;
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        auto row = matrix.row(i);
        if (std::any_of(row.begin(), row.end(), [](int c) { return c != kAbstain; })) ++covered;
    }
    return static_cast<double>(covered) / static_cast<double>(matrix.rows());
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string to_string(AblationMode mode) {
    switch (mode) {
        case AblationMode::top_percent: return "top_percent";
        case AblationMode::drop_best: return "drop_best";
        case AblationMode::add_worst_to_top3: return "add_worst_to_top3";
        case AblationMode::replace_top3_malicious: return "replace_top3_malicious";
        case AblationMode::explanation_ratio: return "explanation_ratio";
        case AblationMode::adaptation_ratio_sweep: return "adaptation_ratio_sweep";
    }
    return "unknown";
}

std::string to_string(RankingKeyKind key) {
    switch (key) {
        case RankingKeyKind::accuracy_metadata: return "accuracy";
        case RankingKeyKind::perplexity_metadata: return "perplexity";
        case RankingKeyKind::empirical_accuracy: return "empirical";
    }
    return "unknown";
}

AblationMode ablation_mode_from_string(const std::string& s) {
    if (s == "top-percent" || s == "top_percent") return AblationMode::top_percent;
    if (s == "drop-best" || s == "drop_best") return AblationMode::drop_best;
    if (s == "add-worst" || s == "add_worst_to_top3") return AblationMode::add_worst_to_top3;
    if (s == "malicious" || s == "replace_top3_malicious") return AblationMode::replace_top3_malicious;
    if (s == "explanation-ratio" || s == "explanation_ratio") return AblationMode::explanation_ratio;
    if (s == "adaptation-sweep" || s == "adaptation_ratio_sweep") return AblationMode::adaptation_ratio_sweep;
    throw ValidationError("unknown ablation mode '" + s + "'");
}

RankingKeyKind ranking_key_from_string(const std::string& s) {
    if (s == "accuracy") return RankingKeyKind::accuracy_metadata;
    if (s == "perplexity") return RankingKeyKind::perplexity_metadata;
    if (s == "empirical") return RankingKeyKind::empirical_accuracy;
    throw ValidationError("unknown ranking key '" + s + "'");
}

std::vector<double> AblationSpec::arm_values() const {
    switch (mode) {
        case AblationMode::top_percent:
            return values.empty() ? std::vector<double>{20, 40, 60, 80, 100} : values;
        case AblationMode::explanation_ratio:
            return values.empty() ? grid(0.2, 1.0, 0.2) : values;
        case AblationMode::adaptation_ratio_sweep:
            return values.empty() ? grid(0.2, 1.0, 0.1) : values;
        default:
            return {0.0};
    }
}

std::vector<double> empirical_column_accuracy(const LabelingMatrix& matrix, const GoldLabels& gold) {
    std::unordered_map<std::string_view, int> by_id;
    for (std::size_t g = 0; g < gold.size(); ++g) by_id.emplace(gold.example_ids[g], gold.labels[g]);
    std::vector<double> correct(matrix.cols(), 0.0);
    std::vector<double> scored(matrix.cols(), 0.0);
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        auto it = by_id.find(matrix.example_ids()[i]);
        if (it == by_id.end()) continue;
        for (std::size_t j = 0; j < matrix.cols(); ++j) {
            const int c = matrix.at(i, j);
            if (c == kAbstain) continue;
            scored[j] += 1.0;
            if (c == it->second) correct[j] += 1.0;
        }
    }
    std::vector<double> acc(matrix.cols());
    for (std::size_t j = 0; j < acc.size(); ++j) {
        acc[j] = scored[j] > 0.0 ? correct[j] / scored[j] : std::numeric_limits<double>::quiet_NaN();
    }
    return acc;
}

std::vector<std::size_t> rank_columns(const LabelingMatrix& matrix, const TaskDescriptor& descriptor,
                                      const RankingKey& key, const GoldLabels* gold) {
    const std::size_t m = matrix.cols();
    // Higher quality is always a larger number here; perplexity is negated.
    std::vector<double> quality(m);
    if (key.key == RankingKeyKind::empirical_accuracy) {
        if (gold == nullptr) throw ValidationError("empirical ranking requires gold labels");
        quality = empirical_column_accuracy(matrix, *gold);
    } else {
        for (std::size_t j = 0; j < m; ++j) {
            const auto& id = matrix.explanation_ids()[j];
            const auto* rec = descriptor.find_explanation(id);
            const auto& meta = key.key == RankingKeyKind::accuracy_metadata
                                   ? (rec ? rec->accuracy_metadata : std::optional<double>{})
                                   : (rec ? rec->perplexity_metadata : std::optional<double>{});
            if (!meta) throw ValidationError("missing " + to_string(key.key) + " metadata for explanation '" + id + "'");
            quality[j] = key.key == RankingKeyKind::accuracy_metadata ? *meta : -*meta;
        }
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto& ids = matrix.explanation_ids();
    const bool best_first = key.direction == RankDirection::best_first;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const bool na = std::isnan(quality[a]);
        const bool nb = std::isnan(quality[b]);
        if (na != nb) return nb;  // undefined quality ranks last either way
        if (!na && quality[a] != quality[b]) return best_first ? quality[a] > quality[b] : quality[a] < quality[b];
        return ids[a] < ids[b];
    });
    return order;
}

LabelingMatrix select_columns(const LabelingMatrix& matrix, const TaskDescriptor& descriptor, const AblationSpec& spec,
                              double value, const GoldLabels* gold) {
    const std::size_t m = matrix.cols();
    switch (spec.mode) {
        case AblationMode::adaptation_ratio_sweep:
            return matrix;
        case AblationMode::explanation_ratio: {
            if (!(value > 0.0 && value <= 1.0)) throw ValidationError("explanation ratio must lie in (0,1]");
            const std::size_t keep = std::max<std::size_t>(1, ceil_count(value, m));
            std::vector<std::size_t> idx(m);
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            Rng rng(spec.seed);
            for (std::size_t t = 0; t < keep; ++t) std::swap(idx[t], idx[t + rng.below(m - t)]);
            idx.resize(keep);
            return matrix.select_cols(sorted(std::move(idx)));
        }
        default:
            break;
    }

    const auto ranked = rank_columns(matrix, descriptor, spec.ranking, gold);
    switch (spec.mode) {
        case AblationMode::top_percent: {
            if (!(value > 0.0 && value <= 100.0)) throw ValidationError("top percent must lie in (0,100]");
            const std::size_t keep = std::max<std::size_t>(1, ceil_count(value / 100.0, m));
            return matrix.select_cols(sorted({ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep)}));
        }
        case AblationMode::drop_best: {
            if (m < 2) throw ValidationError("drop_best needs at least 2 explanations");
            return matrix.select_cols(sorted({ranked.begin() + 1, ranked.end()}));
        }
        case AblationMode::add_worst_to_top3: {
            if (m < 4) throw ValidationError("add_worst_to_top3 needs at least 4 explanations");
            return matrix.select_cols(sorted({ranked[0], ranked[1], ranked[2], ranked[m - 1]}));
        }
        case AblationMode::replace_top3_malicious: {
            if (m < 3) throw ValidationError("replace_top3_malicious needs at least 3 explanations");
            LabelingMatrix out = matrix;
            for (std::size_t r = 0; r < 3; ++r) out = flip_column(out, ranked[r]);
            return out;
        }
        default:
            return matrix;
    }
}

LabelingMatrix select_columns(const LabelingMatrix& matrix, const TaskDescriptor& descriptor, const AblationSpec& spec,
                              const GoldLabels* gold) {
    return select_columns(matrix, descriptor, spec, spec.arm_values().front(), gold);
}

AblationReport run_ablation(const LabelingMatrix& matrix, const TaskDescriptor& descriptor, const GoldLabels& gold,
                            const AblationSpec& spec, const AdaptationConfig& config, const ModelHyper& hyper) {
    AblationReport report;
    report.spec = spec;
    report.config = config;

    const bool ranks = spec.mode != AblationMode::explanation_ratio && spec.mode != AblationMode::adaptation_ratio_sweep;
    if (ranks) {
        for (std::size_t j : rank_columns(matrix, descriptor, spec.ranking, &gold)) {
            report.ranking.push_back(matrix.explanation_ids()[j]);
        }
    }

    const auto unablated = talc_adapt(matrix, config, hyper, std::string{});
    report.unablated_accuracy = accuracy(unablated.predictions, gold);
    report.unablated_mv_accuracy = accuracy(majority_vote(matrix).predictions, gold);

    std::size_t arm_id = 0;
    for (double value : spec.arm_values()) {
        ArmResult arm;
        arm.arm_id = arm_id++;
        arm.mode = spec.mode;
        arm.parameter = value;

        const auto selected = select_columns(matrix, descriptor, spec, value, &gold);
        AdaptationConfig arm_config = config;
        if (spec.mode == AblationMode::adaptation_ratio_sweep) arm_config.alpha = value;

        arm.explanation_ids = selected.explanation_ids();
        if (spec.mode == AblationMode::replace_top3_malicious) {
            arm.flipped_ids.assign(report.ranking.begin(), report.ranking.begin() + 3);
        }
        const auto run = talc_adapt(selected, arm_config, hyper, std::string{});
        arm.accuracy = accuracy(run.predictions, gold);
        arm.mv_accuracy = accuracy(majority_vote(selected).predictions, gold);
        arm.coverage = row_coverage(selected);
        arm.accuracy_weights = run.training_report.final_weights.accuracy;
        arm.propensity_weights = run.training_report.final_weights.propensity;
        arm.converged = run.training_report.converged;
        arm.column_accuracy = empirical_column_accuracy(selected, gold);

        std::vector<double> w;
        std::vector<double> a;
        for (std::size_t j = 0; j < arm.column_accuracy.size(); ++j) {
            if (std::isnan(arm.column_accuracy[j])) continue;
            w.push_back(arm.accuracy_weights[j]);
            a.push_back(arm.column_accuracy[j]);
        }
        arm.pearson = pearson(w, a);
        arm.spearman = spearman(w, a);
        report.arms.push_back(std::move(arm));
    }
    return report;
}

std::string serialize_ablation_report_json(const AblationReport& report) {
    json doc;
    doc["mode"] = to_string(report.spec.mode);
    doc["ranking_key"] = to_string(report.spec.ranking.key);
    doc["ranking_direction"] = report.spec.ranking.direction == RankDirection::best_first ? "best_first" : "worst_first";
    doc["seed"] = report.spec.seed;
    doc["alpha"] = report.config.alpha;
    doc["ranking"] = report.ranking;
    doc["unablated"] = {{"accuracy", report.unablated_accuracy}, {"mv_accuracy", report.unablated_mv_accuracy}};
    json arms = json::array();
    for (const auto& arm : report.arms) {
        json weights = json::object();
        for (std::size_t j = 0; j < arm.explanation_ids.size(); ++j) {
            weights[arm.explanation_ids[j]] = {{"acc", arm.accuracy_weights[j]},
                                               {"prop", arm.propensity_weights[j]},
                                               {"empirical_accuracy", number_or_null(arm.column_accuracy[j])}};
        }
        arms.push_back({{"arm_id", arm.arm_id},
                        {"mode", to_string(arm.mode)},
                        {"parameter", arm.parameter},
                        {"accuracy", arm.accuracy},
                        {"mv_accuracy", arm.mv_accuracy},
                        {"coverage", arm.coverage},
                        {"converged", arm.converged},
                        {"flipped", arm.flipped_ids},
                        {"weights", weights},
                        {"weight_accuracy_pearson", number_or_null(arm.pearson)},
                        {"weight_accuracy_spearman", number_or_null(arm.spearman)}});
    }
    doc["arms"] = std::move(arms);
    return doc.dump(2) + "\n";
}

std::string serialize_ablation_csv(const AblationReport& report) {
    std::string out = "arm_id,mode,key,accuracy,coverage,parameter,mv_accuracy\n";
    const std::string key = to_string(report.spec.ranking.key);
    for (const auto& arm : report.arms) {
        out += std::to_string(arm.arm_id) + "," + to_string(arm.mode) + "," + key + "," + format_double(arm.accuracy) +
               "," + format_double(arm.coverage) + "," + format_double(arm.parameter) + "," +
               format_double(arm.mv_accuracy) + "\n";
    }
    return out;
}

}  // namespace talc
