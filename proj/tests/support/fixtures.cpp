#include "fixtures.hpp"

namespace talc::testing {

LabelSpace numbered_space(std::size_t k) {
    std::vector<std::string> names;
    for (std::size_t c = 0; c < k; ++c) names.push_back("c" + std::to_string(c));
    return LabelSpace(names);
}

LabelingMatrix make_matrix(std::size_t n, std::size_t m, std::size_t k, std::vector<int> cells) {
    std::vector<std::string> rows, cols;
    for (std::size_t i = 0; i < n; ++i) rows.push_back("x" + std::to_string(i));
    for (std::size_t j = 0; j < m; ++j) cols.push_back("e" + std::to_string(j));
    return LabelingMatrix(rows, cols, std::move(cells), numbered_space(k));
}

LabelingMatrix random_matrix(Rng& rng, std::size_t n, std::size_t m, std::size_t k, double abstain_prob) {
    std::vector<int> cells(n * m);
    bool any = false;
    for (auto& c : cells) {
        if (rng.uniform01() < abstain_prob) {
            c = kAbstain;
        } else {
            c = static_cast<int>(rng.below(k));
            any = true;
        }
    }
    if (!any) cells[rng.below(cells.size())] = static_cast<int>(rng.below(k));
    return make_matrix(n, m, k, std::move(cells));
}

ModelWeights random_weights(Rng& rng, std::size_t m, std::size_t k, double lo, double hi, double lambda) {
    auto draw = [&] { return lo + (hi - lo) * rng.uniform01(); };
    ModelWeights w = ModelWeights::zeros(m, k, lambda);
    for (std::size_t j = 0; j < m; ++j) {
        w.accuracy[j] = draw();
        w.propensity[j] = draw();
    }
    for (auto& p : w.class_log_prior) p = draw();
    return w;
}

std::vector<TeacherProfile> recovery_profiles(double abstain_rate) {
    std::vector<TeacherProfile> profiles;
    const double accuracies[] = {0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90};
    for (std::size_t j = 0; j < 8; ++j) {
        profiles.push_back({"t" + std::to_string(j + 1), accuracies[j], abstain_rate, false});
    }
    return profiles;
}

SyntheticTask recovery_task(double abstain_rate, std::uint64_t seed) {
    return generate(2000, 2, recovery_profiles(abstain_rate), {}, seed);
}

}  // namespace talc::testing
