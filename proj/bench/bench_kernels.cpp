// Serial vs OpenMP batch kernels. Batch size is the benchmark argument.
#include <benchmark/benchmark.h>

#include "llmnas/kernels.hpp"
#include "support.hpp"

using namespace llmnas;

namespace {

std::vector<ArchitectureConfig> make_archs(std::int64_t n) {
    std::mt19937_64 rng(1);
    std::vector<ArchitectureConfig> out;
    for (std::int64_t i = 0; i < n; ++i) out.push_back(testing_support::random_arch(SearchSpace{}, rng));
    return out;
}

std::vector<CandidateRecord> make_records(std::int64_t n) {
    std::mt19937_64 rng(2);
    std::vector<CandidateRecord> out;
    for (std::int64_t i = 0; i < n; ++i) out.push_back(testing_support::random_record(rng, int(i)));
    return out;
}

template <auto Kernel>
void estimate_kernel(benchmark::State& state) {
    const auto archs = make_archs(state.range(0));
    const SearchSpace space;
    for (auto _ : state) benchmark::DoNotOptimize(Kernel(archs, space));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Kernel>
void hash_kernel(benchmark::State& state) {
    const auto archs = make_archs(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(Kernel(archs));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Kernel>
void front_kernel(benchmark::State& state) {
    const auto records = make_records(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(Kernel(records));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(estimate_kernel<kernels::estimate_batch_serial>)->Name("estimate/serial")->Arg(256)->Arg(4096);
BENCHMARK(estimate_kernel<kernels::estimate_batch>)->Name("estimate/omp")->Arg(256)->Arg(4096)->UseRealTime();
BENCHMARK(hash_kernel<kernels::hash_batch_serial>)->Name("hash/serial")->Arg(256)->Arg(4096);
BENCHMARK(hash_kernel<kernels::hash_batch>)->Name("hash/omp")->Arg(256)->Arg(4096)->UseRealTime();
BENCHMARK(front_kernel<kernels::nondominated_indices_serial>)->Name("front/serial")->Arg(1000)->Arg(8000);
BENCHMARK(front_kernel<kernels::nondominated_indices>)->Name("front/omp")->Arg(1000)->Arg(8000)->UseRealTime();

BENCHMARK_MAIN();
