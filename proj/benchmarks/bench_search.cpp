#include <benchmark/benchmark.h>

#include "avq/encoder.hpp"
#include "avq/rng.hpp"
#include "avq/search.hpp"

namespace {

using namespace avq;

struct SearchFixture {
    Codebook cb;
    EncodedDatabase db;
    VectorDataset database;
    VectorDataset query;

    SearchFixture(std::size_t n, std::size_t m, std::size_t k, std::size_t d) {
        Rng rng(2);
        cb = Codebook(m, k, d);
        for (std::size_t dict = 0; dict < m; ++dict) {
            const double scale = 1.0 / static_cast<double>(1 + dict);
            for (float& v : cb.dictionary(dict)) {
                v = static_cast<float>(scale * rng.normal());
            }
        }
        sort_by_norm(cb);
        const CrossTermTable cross = build_cross_terms(cb);

        db.codes = CodeMatrix(n, m);
        db.k = k;
        for (auto& c : db.codes.codes) c = static_cast<code_t>(rng.index(k));
        db.cross_terms.resize(n);
        database = VectorDataset(n, d);
        for (std::size_t i = 0; i < n; ++i) {
            db.cross_terms[i] =
                static_cast<float>(cross_term_of(db.codes.row(i), cross));
            const auto recon = reconstruct(cb, db.codes.row(i));
            std::copy(recon.begin(), recon.end(), database.row(i).begin());
        }
        query = VectorDataset(1, d);
        for (float& v : query.data) v = static_cast<float>(rng.normal());
    }
};

const SearchFixture& fixture() {
    static SearchFixture f(100000, 8, 256, 128);
    return f;
}

}  // namespace

static void BuildAdcTables(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) {
        auto tables = avq::build_adc_tables(f.query.row(0), f.cb);
        benchmark::DoNotOptimize(tables);
    }
}
BENCHMARK(BuildAdcTables);

static void AdcScan(benchmark::State& state) {
    const auto& f = fixture();
    const std::size_t top_r = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        auto result = avq::adc_scan(f.query, f.db, f.cb, top_r);
        benchmark::DoNotOptimize(result);
    }
    state.SetItemsProcessed(state.iterations() *
                            static_cast<std::int64_t>(f.db.codes.n));
}
BENCHMARK(AdcScan)->Arg(1)->Arg(100);

static void ExactScan(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) {
        auto result = avq::exact_scan(f.query, f.database, 100);
        benchmark::DoNotOptimize(result);
    }
    state.SetItemsProcessed(state.iterations() *
                            static_cast<std::int64_t>(f.database.n));
}
BENCHMARK(ExactScan);

BENCHMARK_MAIN();
