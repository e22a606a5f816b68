#include <benchmark/benchmark.h>

#include "avq/encoder.hpp"
#include "avq/rng.hpp"

namespace {

using namespace avq;

struct EncoderFixture {
    Codebook cb;
    CrossTermTable cross;
    std::vector<float> x;

    EncoderFixture(std::size_t m, std::size_t k, std::size_t d) {
        Rng rng(1);
        cb = Codebook(m, k, d);
        for (std::size_t dict = 0; dict < m; ++dict) {
            const double scale = 1.0 / static_cast<double>(1 + dict);
            for (float& v : cb.dictionary(dict)) {
                v = static_cast<float>(scale * rng.normal());
            }
        }
        sort_by_norm(cb);
        cross = build_cross_terms(cb);
        x.resize(d);
        for (float& v : x) v = static_cast<float>(rng.normal());
    }
};

const EncoderFixture& fixture() {
    static EncoderFixture f(8, 256, 128);
    return f;
}

}  // namespace

static void BeamEncode(benchmark::State& state) {
    const auto& f = fixture();
    const std::size_t beam = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        auto codes = avq::beam_encode(f.x, f.cb, f.cross, beam);
        benchmark::DoNotOptimize(codes);
    }
}
BENCHMARK(BeamEncode)->Arg(1)->Arg(10)->Arg(100);

static void GreedyEncode(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) {
        auto codes = avq::greedy_encode(f.x, f.cb);
        benchmark::DoNotOptimize(codes);
    }
}
BENCHMARK(GreedyEncode);

static void IcmEncode(benchmark::State& state) {
    const auto& f = fixture();
    const std::size_t rounds = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        auto codes = avq::icm_encode(f.x, f.cb, f.cross, rounds);
        benchmark::DoNotOptimize(codes);
    }
}
BENCHMARK(IcmEncode)->Arg(1)->Arg(10);

static void BuildCrossTerms(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) {
        auto table = avq::build_cross_terms(f.cb);
        benchmark::DoNotOptimize(table);
    }
}
BENCHMARK(BuildCrossTerms);

BENCHMARK_MAIN();
