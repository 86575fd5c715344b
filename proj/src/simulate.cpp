#include "talc/simulate.hpp"

#include <cmath>

#include <json.hpp>

#include "talc/error.hpp"
#include "talc/rng.hpp"

namespace talc {

namespace {

using json = nlohmann::ordered_json;

bool is_probability(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

void check_profile(const TeacherProfile& p) {
    if (!is_probability(p.accuracy)) throw ValidationError("teacher '" + p.id + "': accuracy must lie in [0,1]");
    if (!is_probability(p.abstain_rate)) {
        throw ValidationError("teacher '" + p.id + "': abstain_rate must lie in [0,1]");
    }
}

int draw_class(Rng& rng, const std::vector<double>& cumulative) {
    const double u = rng.uniform01();
    for (std::size_t c = 0; c < cumulative.size(); ++c) {
        if (u < cumulative[c]) return static_cast<int>(c);
    }
    return static_cast<int>(cumulative.size() - 1);
}

int corrupt(int label, std::size_t k) {
    if (label == kAbstain) return label;
    return k == 2 ? 1 - label : static_cast<int>((static_cast<std::size_t>(label) + 1) % k);
}

}  // namespace

SyntheticTask generate(std::size_t n, std::size_t k, const std::vector<TeacherProfile>& profiles,
                       const std::vector<double>& class_weights, std::uint64_t seed) {
    if (n == 0) throw ValidationError("n must be >= 1");
    if (k < 2) throw ValidationError("k must be >= 2");
    if (profiles.empty()) throw ValidationError("at least one teacher profile is required");
    for (const auto& p : profiles) check_profile(p);

    std::vector<double> weights = class_weights;
    if (weights.empty()) weights.assign(k, 1.0 / static_cast<double>(k));
    if (weights.size() != k) throw ValidationError("class_weights must have k entries");
    double total = 0.0;
    for (double w : weights) {
        if (!is_probability(w)) throw ValidationError("class weights must lie in [0,1]");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ValidationError("class weights must sum to 1");
    std::vector<double> cumulative(k);
    double run = 0.0;
    for (std::size_t c = 0; c < k; ++c) cumulative[c] = (run += weights[c]);

    std::vector<std::string> class_names;
    for (std::size_t c = 0; c < k; ++c) class_names.push_back("class_" + std::to_string(c));

    SyntheticTask task;
    task.label_space = LabelSpace(class_names);
    task.profiles = profiles;
    task.seed = seed;

    const std::size_t m = profiles.size();
    std::vector<std::string> example_ids;
    std::vector<std::string> explanation_ids;
    for (std::size_t j = 0; j < m; ++j) {
        explanation_ids.push_back(profiles[j].id.empty() ? "t" + std::to_string(j + 1) : profiles[j].id);
    }

    Rng rng(seed);
    std::vector<int> cells(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        example_ids.push_back("x" + std::to_string(i + 1));
        const int y = draw_class(rng, cumulative);
        task.gold.example_ids.push_back(example_ids.back());
        task.gold.labels.push_back(y);
        for (std::size_t j = 0; j < m; ++j) {
            const auto& prof = profiles[j];
            int cell = kAbstain;
            if (rng.uniform01() >= prof.abstain_rate) {
                if (rng.uniform01() < prof.accuracy) {
                    cell = y;
                } else {
                    // Uniform over the k-1 wrong classes.
                    const auto offset = static_cast<int>(rng.below(k - 1)) + 1;
                    cell = (y + offset) % static_cast<int>(k);
                }
            }
            cells[i * m + j] = prof.malicious ? corrupt(cell, k) : cell;
        }
    }
    task.matrix = LabelingMatrix(std::move(example_ids), std::move(explanation_ids), std::move(cells), task.label_space);
    return task;
}

LabelingMatrix flip_column(const LabelingMatrix& matrix, std::size_t column) {
    if (column >= matrix.cols()) throw ValidationError("column index out of range");
    std::vector<int> values(matrix.rows());
    for (std::size_t i = 0; i < matrix.rows(); ++i) values[i] = corrupt(matrix.at(i, column), matrix.num_classes());
    return matrix.with_column(column, values);
}

ProfileSet parse_profiles_json(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid profile JSON: ") + e.what());
    }
    ProfileSet set;
    try {
        const json* list = &doc;
        if (doc.is_object()) {
            list = &doc.at("profiles");
            if (doc.contains("class_weights")) set.class_weights = doc["class_weights"].get<std::vector<double>>();
            if (doc.contains("class_names")) set.class_names = doc["class_names"].get<std::vector<std::string>>();
        }
        if (!list->is_array()) throw ValidationError("profiles must be a JSON array");
        std::size_t idx = 0;
        for (const auto& item : *list) {
            ++idx;
            TeacherProfile p;
            p.id = item.value("id", "t" + std::to_string(idx));
            p.accuracy = item.at("accuracy").get<double>();
            p.abstain_rate = item.value("abstain_rate", 0.0);
            p.malicious = item.value("malicious", false);
            check_profile(p);
            set.profiles.push_back(std::move(p));
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid profile JSON: ") + e.what());
    }
    if (set.profiles.empty()) throw ValidationError("profile JSON lists no teachers");
    return set;
}

std::string serialize_profiles_json(const ProfileSet& set) {
    json doc;
    json list = json::array();
    for (const auto& p : set.profiles) {
        list.push_back({{"id", p.id}, {"accuracy", p.accuracy}, {"abstain_rate", p.abstain_rate},
                        {"malicious", p.malicious}});
    }
    doc["profiles"] = std::move(list);
    if (!set.class_weights.empty()) doc["class_weights"] = set.class_weights;
    if (!set.class_names.empty()) doc["class_names"] = set.class_names;
    return doc.dump(2) + "\n";
}

TaskDescriptor synthetic_descriptor(const SyntheticTask& task, std::string task_name) {
    TaskDescriptor d;
    d.task_name = std::move(task_name);
    d.label_space = task.label_space;
    for (std::size_t j = 0; j < task.profiles.size(); ++j) {
        ExplanationRecord e;
        e.id = task.matrix.explanation_ids()[j];
        e.text = "synthetic teacher " + e.id;
        e.accuracy_metadata = task.profiles[j].accuracy;
        d.explanations.push_back(std::move(e));
    }
    return d;
}

}  // namespace talc
