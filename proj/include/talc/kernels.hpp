#pragma once

// Data-parallel inner loops of the label model.
//
// Every kernel exists twice: `serial::` is the reference implementation and
// `omp::` the OpenMP version. Both perform the same floating-point operations
// in the same order per output element, so their results are bitwise equal.
// Cells are row-major n x m with values in {-1, 0..k-1}.

#include <cstddef>
#include <cstdint>
#include <span>

namespace talc::kernels {

struct Shape {
    std::size_t n = 0;  // examples
    std::size_t m = 0;  // explanations
    std::size_t k = 0;  // classes
};

enum class Backend { serial, openmp };

namespace serial {

/// out[i*k + y] = prior[y] + sum_j acc[j] * 1{cells[i*m + j] == y}, j ascending.
void class_scores(std::span<const int> cells, Shape shape, std::span<const double> acc,
                  std::span<const double> prior, std::span<double> out);

/// In-place softmax of each row of k scores; log_norm[i] gets the row's log-sum-exp.
void softmax_rows(std::span<double> scores, Shape shape, std::span<double> log_norm);

/// out[j] = sum_i q[i*k + cells[i*m + j]] over non-abstain cells, i ascending.
void agreement_mass(std::span<const int> cells, Shape shape, std::span<const double> q, std::span<double> out);

/// Categorical sampling from each row of q, one independent stream per example.
/// counts (n*k) receives how often each class was drawn after burn-in.
void gibbs_counts(std::span<const double> q, Shape shape, std::size_t burn_in, std::size_t samples,
                  std::uint64_t seed, std::span<std::uint32_t> counts);

}  // namespace serial

namespace omp {

void class_scores(std::span<const int> cells, Shape shape, std::span<const double> acc,
                  std::span<const double> prior, std::span<double> out);
void softmax_rows(std::span<double> scores, Shape shape, std::span<double> log_norm);
void agreement_mass(std::span<const int> cells, Shape shape, std::span<const double> q, std::span<double> out);
void gibbs_counts(std::span<const double> q, Shape shape, std::size_t burn_in, std::size_t samples,
                  std::uint64_t seed, std::span<std::uint32_t> counts);

/// Threads OpenMP will use, or 1 when built without OpenMP.
int max_threads();

}  // namespace omp

void class_scores(Backend b, std::span<const int> cells, Shape shape, std::span<const double> acc,
                  std::span<const double> prior, std::span<double> out);
void softmax_rows(Backend b, std::span<double> scores, Shape shape, std::span<double> log_norm);
void agreement_mass(Backend b, std::span<const int> cells, Shape shape, std::span<const double> q,
                    std::span<double> out);
void gibbs_counts(Backend b, std::span<const double> q, Shape shape, std::size_t burn_in, std::size_t samples,
                  std::uint64_t seed, std::span<std::uint32_t> counts);

}  // namespace talc::kernels
