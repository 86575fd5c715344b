#pragma once

// Per-row and per-column bodies shared by both kernel backends, so the
// arithmetic is written once.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>

#include "talc/kernels.hpp"
#include "talc/rng.hpp"

namespace talc::kernels::detail {

inline void score_row(std::span<const int> cells, Shape s, std::span<const double> acc,
                      std::span<const double> prior, std::span<double> out, std::size_t i) {
    double* row_out = out.data() + i * s.k;
    std::copy(prior.begin(), prior.end(), row_out);
    const int* row = cells.data() + i * s.m;
    for (std::size_t j = 0; j < s.m; ++j) {
        const int c = row[j];
        if (c >= 0) row_out[c] += acc[j];
    }
}

inline void softmax_row(std::span<double> scores, Shape s, std::span<double> log_norm, std::size_t i) {
    double* row = scores.data() + i * s.k;
    const double mx = *std::max_element(row, row + s.k);
    double sum = 0.0;
    for (std::size_t y = 0; y < s.k; ++y) {
        row[y] = std::exp(row[y] - mx);
        sum += row[y];
    }
    for (std::size_t y = 0; y < s.k; ++y) row[y] /= sum;
    log_norm[i] = mx + std::log(sum);
}

inline double agreement_column(std::span<const int> cells, Shape s, std::span<const double> q, std::size_t j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < s.n; ++i) {
        const int c = cells[i * s.m + j];
        if (c >= 0) acc += q[i * s.k + static_cast<std::size_t>(c)];
    }
    return acc;
}

inline void gibbs_row(std::span<const double> q, Shape s, std::size_t burn_in, std::size_t samples,
                      std::uint64_t seed, std::span<std::uint32_t> counts, std::size_t i) {
    const double* p = q.data() + i * s.k;
    std::uint32_t* cnt = counts.data() + i * s.k;
    std::fill(cnt, cnt + s.k, 0U);
    // Fall back to the last class with positive mass when u lands past the
    // rounded cumulative total.
    std::size_t last_positive = 0;
    for (std::size_t y = 0; y < s.k; ++y) {
        if (p[y] > 0.0) last_positive = y;
    }
    Rng rng(mix_seed(seed, i));
    for (std::size_t t = 0; t < burn_in + samples; ++t) {
        const double u = rng.uniform01();
        double cum = 0.0;
        std::size_t draw = last_positive;
        for (std::size_t y = 0; y < s.k; ++y) {
            cum += p[y];
            if (u < cum) {
                draw = y;
                break;
            }
        }
        if (t >= burn_in) ++cnt[draw];
    }
}

}  // namespace talc::kernels::detail
