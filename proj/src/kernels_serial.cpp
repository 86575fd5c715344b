#include "kernel_rows.hpp"

namespace talc::kernels::serial {

void class_scores(std::span<const int> cells, Shape shape, std::span<const double> acc,
                  std::span<const double> prior, std::span<double> out) {
    for (std::size_t i = 0; i < shape.n; ++i) detail::score_row(cells, shape, acc, prior, out, i);
}

void softmax_rows(std::span<double> scores, Shape shape, std::span<double> log_norm) {
    for (std::size_t i = 0; i < shape.n; ++i) detail::softmax_row(scores, shape, log_norm, i);
}

void agreement_mass(std::span<const int> cells, Shape shape, std::span<const double> q, std::span<double> out) {
    // Row-major sweep; each out[j] still accumulates in ascending i.
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < shape.n; ++i) {
        const int* row = cells.data() + i * shape.m;
        for (std::size_t j = 0; j < shape.m; ++j) {
            if (row[j] >= 0) out[j] += q[i * shape.k + static_cast<std::size_t>(row[j])];
        }
    }
}

void gibbs_counts(std::span<const double> q, Shape shape, std::size_t burn_in, std::size_t samples,
                  std::uint64_t seed, std::span<std::uint32_t> counts) {
    for (std::size_t i = 0; i < shape.n; ++i) detail::gibbs_row(q, shape, burn_in, samples, seed, counts, i);
}

}  // namespace talc::kernels::serial
