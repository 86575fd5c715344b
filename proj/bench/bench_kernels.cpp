// Serial vs OpenMP kernels. Arg 0 is n; m and k are fixed at a typical
// adaptation workload.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <random>
#include <vector>

#include "talc/kernels.hpp"

namespace {

using talc::kernels::Backend;
using talc::kernels::Shape;

constexpr std::size_t kCols = 16;
constexpr std::size_t kClasses = 4;

struct Workload {
    Shape shape;
    std::vector<int> cells;
    std::vector<double> acc, prior, scores, q, log_norm, mass;
    std::vector<std::uint32_t> counts;

    explicit Workload(std::size_t n) : shape{n, kCols, kClasses} {
        std::mt19937_64 gen(n);
        std::uniform_int_distribution<int> cell(-1, static_cast<int>(kClasses) - 1);
        std::uniform_real_distribution<double> weight(-1.0, 2.0);
        cells.resize(n * kCols);
        for (auto& c : cells) c = cell(gen);
        acc.resize(kCols);
        for (auto& a : acc) a = weight(gen);
        prior.assign(kClasses, 0.0);
        scores.resize(n * kClasses);
        log_norm.resize(n);
        mass.resize(kCols);
        counts.resize(n * kClasses);
        q.resize(n * kClasses);
        talc::kernels::class_scores(Backend::serial, cells, shape, acc, prior, q);
        talc::kernels::softmax_rows(Backend::serial, q, shape, log_norm);
    }
};

template <Backend B>
void BM_class_scores(benchmark::State& state) {
    Workload w(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        talc::kernels::class_scores(B, w.cells, w.shape, w.acc, w.prior, w.scores);
        benchmark::DoNotOptimize(w.scores.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <Backend B>
void BM_softmax_rows(benchmark::State& state) {
    Workload w(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        state.PauseTiming();
        talc::kernels::class_scores(Backend::serial, w.cells, w.shape, w.acc, w.prior, w.scores);
        state.ResumeTiming();
        talc::kernels::softmax_rows(B, w.scores, w.shape, w.log_norm);
        benchmark::DoNotOptimize(w.scores.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <Backend B>
void BM_agreement_mass(benchmark::State& state) {
    Workload w(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        talc::kernels::agreement_mass(B, w.cells, w.shape, w.q, w.mass);
        benchmark::DoNotOptimize(w.mass.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <Backend B>
void BM_gibbs_counts(benchmark::State& state) {
    Workload w(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        talc::kernels::gibbs_counts(B, w.q, w.shape, 50, 200, 42, w.counts);
        benchmark::DoNotOptimize(w.counts.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

#define TALC_BENCH_PAIR(fn)                                                              \
    BENCHMARK_TEMPLATE(fn, Backend::serial)->RangeMultiplier(8)->Range(1 << 10, 1 << 19); \
    BENCHMARK_TEMPLATE(fn, Backend::openmp)->RangeMultiplier(8)->Range(1 << 10, 1 << 19)->UseRealTime();

TALC_BENCH_PAIR(BM_class_scores)
TALC_BENCH_PAIR(BM_softmax_rows)
TALC_BENCH_PAIR(BM_agreement_mass)

BENCHMARK_TEMPLATE(BM_gibbs_counts, Backend::serial)->RangeMultiplier(8)->Range(1 << 10, 1 << 16);
BENCHMARK_TEMPLATE(BM_gibbs_counts, Backend::openmp)->RangeMultiplier(8)->Range(1 << 10, 1 << 16)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
