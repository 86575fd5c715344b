#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "talc/core.hpp"
#include "talc/label_model.hpp"
#include "talc/rng.hpp"
#include "talc/simulate.hpp"

namespace talc::testing {

LabelSpace numbered_space(std::size_t k);

LabelingMatrix make_matrix(std::size_t n, std::size_t m, std::size_t k, std::vector<int> cells);

/// Cells uniform over {abstain, 0..k-1}, or over classes only when
/// abstain_prob is zero. At least one cell is non-abstain.
LabelingMatrix random_matrix(Rng& rng, std::size_t n, std::size_t m, std::size_t k, double abstain_prob);

/// Accuracy, propensity and prior weights uniform in [lo, hi].
ModelWeights random_weights(Rng& rng, std::size_t m, std::size_t k, double lo, double hi, double lambda);

/// The 8-teacher binary recovery task: accuracies 0.55..0.90, n = 2000.
std::vector<TeacherProfile> recovery_profiles(double abstain_rate);
SyntheticTask recovery_task(double abstain_rate = 0.2, std::uint64_t seed = 42);

}  // namespace talc::testing
