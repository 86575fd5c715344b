#pragma once

// Synthetic multi-teacher tasks with known gold labels.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "talc/core.hpp"

namespace talc {

struct TeacherProfile {
    std::string id;
    /// P(emit gold | not abstaining).
    double accuracy = 1.0;
    double abstain_rate = 0.0;
    /// Labels are flipped (k = 2) or rotated by +1 (k > 2) after generation.
    bool malicious = false;
};

struct SyntheticTask {
    LabelSpace label_space;
    GoldLabels gold;
    LabelingMatrix matrix;
    std::vector<TeacherProfile> profiles;
    std::uint64_t seed = 0;
};

/// Gold labels drawn from class_weights (empty means uniform); each cell
/// abstains with the teacher's abstain rate, otherwise is gold with its
/// accuracy and uniform over the other k-1 classes otherwise.
SyntheticTask generate(std::size_t n, std::size_t k, const std::vector<TeacherProfile>& profiles,
                       const std::vector<double>& class_weights, std::uint64_t seed);

/// k = 2: 0 <-> 1; k > 2: y -> (y + 1) mod k. Abstains are untouched.
LabelingMatrix flip_column(const LabelingMatrix& matrix, std::size_t column);

/// Profiles from `[{...}]` or `{"profiles": [...], "class_weights": [...]}`.
struct ProfileSet {
    std::vector<TeacherProfile> profiles;
    std::vector<double> class_weights;
    std::vector<std::string> class_names;
};
ProfileSet parse_profiles_json(std::string_view json_text);
std::string serialize_profiles_json(const ProfileSet& set);

/// Descriptor whose accuracy metadata is each teacher's nominal accuracy.
TaskDescriptor synthetic_descriptor(const SyntheticTask& task, std::string task_name);

}  // namespace talc
