#include "kernel_rows.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace talc::kernels {

namespace omp {

namespace {
// Below this many examples the fork/join cost dominates.
constexpr std::size_t kMinParallelRows = 256;

std::ptrdiff_t as_index(std::size_t v) { return static_cast<std::ptrdiff_t>(v); }
}  // namespace

void class_scores(std::span<const int> cells, Shape shape, std::span<const double> acc,
                  std::span<const double> prior, std::span<double> out) {
    const std::ptrdiff_t n = as_index(shape.n);
#pragma omp parallel for schedule(static) if (shape.n >= kMinParallelRows)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        detail::score_row(cells, shape, acc, prior, out, static_cast<std::size_t>(i));
    }
}

void softmax_rows(std::span<double> scores, Shape shape, std::span<double> log_norm) {
    const std::ptrdiff_t n = as_index(shape.n);
#pragma omp parallel for schedule(static) if (shape.n >= kMinParallelRows)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        detail::softmax_row(scores, shape, log_norm, static_cast<std::size_t>(i));
    }
}

void agreement_mass(std::span<const int> cells, Shape shape, std::span<const double> q, std::span<double> out) {
    // Parallel over columns: no reduction across threads, fixed order within.
    const std::ptrdiff_t m = as_index(shape.m);
#pragma omp parallel for schedule(static) if (shape.n >= kMinParallelRows)
    for (std::ptrdiff_t j = 0; j < m; ++j) {
        out[static_cast<std::size_t>(j)] = detail::agreement_column(cells, shape, q, static_cast<std::size_t>(j));
    }
}

void gibbs_counts(std::span<const double> q, Shape shape, std::size_t burn_in, std::size_t samples,
                  std::uint64_t seed, std::span<std::uint32_t> counts) {
    const std::ptrdiff_t n = as_index(shape.n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        detail::gibbs_row(q, shape, burn_in, samples, seed, counts, static_cast<std::size_t>(i));
    }
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace omp

void class_scores(Backend b, std::span<const int> cells, Shape shape, std::span<const double> acc,
                  std::span<const double> prior, std::span<double> out) {
    if (b == Backend::openmp) {
        omp::class_scores(cells, shape, acc, prior, out);
    } else {
        serial::class_scores(cells, shape, acc, prior, out);
    }
}

void softmax_rows(Backend b, std::span<double> scores, Shape shape, std::span<double> log_norm) {
    if (b == Backend::openmp) {
        omp::softmax_rows(scores, shape, log_norm);
    } else {
        serial::softmax_rows(scores, shape, log_norm);
    }
}

void agreement_mass(Backend b, std::span<const int> cells, Shape shape, std::span<const double> q,
                    std::span<double> out) {
    if (b == Backend::openmp) {
        omp::agreement_mass(cells, shape, q, out);
    } else {
        serial::agreement_mass(cells, shape, q, out);
    }
}

void gibbs_counts(Backend b, std::span<const double> q, Shape shape, std::size_t burn_in, std::size_t samples,
                  std::uint64_t seed, std::span<std::uint32_t> counts) {
    if (b == Backend::openmp) {
        omp::gibbs_counts(q, shape, burn_in, samples, seed, counts);
    } else {
        serial::gibbs_counts(q, shape, burn_in, samples, seed, counts);
    }
}

}  // namespace talc::kernels
