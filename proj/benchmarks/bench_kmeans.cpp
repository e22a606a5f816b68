#include <benchmark/benchmark.h>

#include "avq/dataset.hpp"
#include "avq/kmeans.hpp"

namespace {

const avq::VectorDataset& data() {
    static avq::VectorDataset ds = avq::gen_synthetic(20000, 128, 64, 3);
    return ds;
}

}  // namespace

static void AssignPass(benchmark::State& state) {
    const std::size_t k = static_cast<std::size_t>(state.range(0));
    avq::KMeansConfig cfg;
    cfg.k = k;
    cfg.max_iters = 1;
    cfg.seed = 1;
    const avq::KMeansResult seeded = avq::kmeans_fit(data(), cfg);
    for (auto _ : state) {
        auto result = avq::assign(data(), seeded.centroids);
        benchmark::DoNotOptimize(result);
    }
    state.SetItemsProcessed(state.iterations() *
                            static_cast<std::int64_t>(data().n));
}
BENCHMARK(AssignPass)->Arg(16)->Arg(256);

static void KMeansFit(benchmark::State& state) {
    avq::KMeansConfig cfg;
    cfg.k = 64;
    cfg.max_iters = 10;
    cfg.seed = 1;
    for (auto _ : state) {
        auto result = avq::kmeans_fit(data(), cfg);
        benchmark::DoNotOptimize(result);
    }
}
BENCHMARK(KMeansFit)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
