#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "avq/encoder.hpp"
#include "avq/numerics.hpp"
#include "avq/search.hpp"
#include "test_util.hpp"

using namespace avq;
using testutil::random_codebook;

namespace {

EncodedDatabase random_encoded(const Codebook& cb, std::size_t n, std::uint64_t seed) {
    const CrossTermTable table = build_cross_terms(cb);
    EncodedDatabase db;
    db.codes = CodeMatrix(n, cb.m);
    db.k = cb.k;
    Rng rng(seed);
    for (auto& c : db.codes.codes) c = static_cast<code_t>(rng.index(cb.k));
    db.cross_terms.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        db.cross_terms[i] = static_cast<float>(cross_term_of(db.codes.row(i), table));
    }
    return db;
}

}  // namespace

TEST_CASE("adc tables hold exact element distances") {
    const Codebook cb = random_codebook(3, 5, 6, 110);
    SUBCASE("query equal to an element zeroes its entry") {
        const auto e = cb.element(1, 2);
        const AdcTables tables = build_adc_tables(e, cb);
        CHECK(tables.at(1, 2) == 0.0f);
    }
    SUBCASE("zero query gives element norms") {
        const std::vector<float> zero(6, 0.0f);
        const AdcTables tables = build_adc_tables(zero, cb);
        for (std::size_t dict = 0; dict < cb.m; ++dict) {
            for (std::size_t j = 0; j < cb.k; ++j) {
                CHECK(tables.at(dict, j) ==
                      doctest::Approx(sq_norm(cb.element(dict, j))).epsilon(1e-6));
            }
        }
    }
    SUBCASE("random entries match sq_l2") {
        Rng rng(111);
        std::vector<float> q(6);
        for (auto& v : q) v = static_cast<float>(rng.normal());
        const AdcTables tables = build_adc_tables(q, cb);
        for (std::size_t dict = 0; dict < cb.m; ++dict) {
            for (std::size_t j = 0; j < cb.k; ++j) {
                CHECK(tables.at(dict, j) ==
                      doctest::Approx(sq_l2(q, cb.element(dict, j))).epsilon(1e-6));
            }
        }
    }
    SUBCASE("dimension mismatch") {
        CHECK_THROWS_AS(build_adc_tables(std::vector<float>(5, 0.0f), cb),
                        std::invalid_argument);
    }
}

TEST_CASE("adc_score equals the exact squared distance to the reconstruction") {
    const Codebook cb = random_codebook(4, 6, 8, 112);
    const CrossTermTable table = build_cross_terms(cb);
    Rng rng(113);

    SUBCASE("single dictionary is a pure table lookup") {
        const Codebook single = random_codebook(1, 6, 8, 114);
        const CrossTermTable t1 = build_cross_terms(single);
        std::vector<float> q(8);
        for (auto& v : q) v = static_cast<float>(rng.normal());
        const AdcTables tables = build_adc_tables(q, single);
        const std::vector<code_t> codes{3};
        CHECK(adc_score(tables, codes, cross_term_of(codes, t1)) ==
              doctest::Approx(tables.at(0, 3)).epsilon(1e-12));
    }
    SUBCASE("identity over random query-code pairs") {
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<float> q(8);
            for (auto& v : q) v = static_cast<float>(rng.normal());
            std::vector<code_t> codes(4);
            for (auto& c : codes) c = static_cast<code_t>(rng.index(6));

            const AdcTables tables = build_adc_tables(q, cb);
            const double score = adc_score(tables, codes, cross_term_of(codes, table));
            const double exact = sq_l2(q, reconstruct(cb, codes));
            CHECK(std::abs(score - exact) <= 1e-3 * std::max(1.0, exact));
        }
    }
    SUBCASE("query equal to the reconstruction scores ~zero") {
        std::vector<code_t> codes{1, 4, 0, 2};
        const std::vector<float> q = reconstruct(cb, codes);
        const AdcTables tables = build_adc_tables(q, cb);
        const double score = adc_score(tables, codes, cross_term_of(codes, table));
        CHECK(std::abs(score) <= 1e-4 * (1.0 + sq_norm(q)));
    }
}

TEST_CASE("adc_scan equals exact_scan over the reconstructions") {
    const Codebook cb = random_codebook(3, 8, 6, 115);
    const EncodedDatabase db = random_encoded(cb, 300, 116);

    VectorDataset recon_db(300, 6);
    for (std::size_t i = 0; i < 300; ++i) {
        const auto r = reconstruct(cb, db.codes.row(i));
        std::copy(r.begin(), r.end(), recon_db.row(i).begin());
    }
    const VectorDataset queries = testutil::random_dataset(20, 6, 117);

    const SearchResult approx = adc_scan(queries, db, cb, 10);
    const SearchResult exact = exact_scan(queries, recon_db, 10);
    for (std::size_t qi = 0; qi < queries.n; ++qi) {
        REQUIRE(approx.per_query[qi].size() == 10);
        for (std::size_t r = 0; r < 10; ++r) {
            CHECK(approx.per_query[qi][r].index == exact.per_query[qi][r].index);
            CHECK(approx.per_query[qi][r].score ==
                  doctest::Approx(exact.per_query[qi][r].score).epsilon(1e-3));
        }
    }
}

TEST_CASE("dropping the query-norm constant does not change the ranking") {
    const Codebook cb = random_codebook(3, 6, 5, 118);
    const CrossTermTable table = build_cross_terms(cb);
    const EncodedDatabase db = random_encoded(cb, 200, 119);
    const VectorDataset queries = testutil::random_dataset(10, 5, 120);

    const SearchResult scan = adc_scan(queries, db, cb, 8);
    for (std::size_t qi = 0; qi < queries.n; ++qi) {
        // Rank directly with full adc_score values (constant included).
        const AdcTables tables = build_adc_tables(queries.row(qi), cb);
        std::vector<std::pair<double, std::uint32_t>> full(db.codes.n);
        for (std::size_t i = 0; i < db.codes.n; ++i) {
            full[i] = {adc_score(tables, db.codes.row(i), db.cross_terms[i]),
                       static_cast<std::uint32_t>(i)};
        }
        std::sort(full.begin(), full.end());
        for (std::size_t r = 0; r < 8; ++r) {
            CHECK(scan.per_query[qi][r].index == full[r].second);
            CHECK(scan.per_query[qi][r].score ==
                  doctest::Approx(full[r].first).epsilon(1e-9));
        }
    }
}

TEST_CASE("recall_at_r") {
    SearchResult results;
    results.per_query = {{{3, 0.1}, {1, 0.2}, {0, 0.3}},
                         {{5, 0.1}, {4, 0.2}, {2, 0.3}}};
    GroundTruth gt;
    gt.n = 2;
    gt.lists = {{3, 1, 0}, {4, 5, 2}};

    SUBCASE("results equal to ground truth give recall 1 at every R") {
        GroundTruth exact;
        exact.n = 2;
        exact.lists = {{3, 1, 0}, {5, 4, 2}};
        for (std::size_t r = 1; r <= 3; ++r) {
            CHECK(recall_at_r(results, exact, r) == 1.0);
        }
        // query 1's true NN (4) only shows up at rank 2 under the other truth
        CHECK(recall_at_r(results, gt, 1) == 0.5);
    }
    SUBCASE("monotone in R") {
        double prev = 0.0;
        for (std::size_t r = 1; r <= 3; ++r) {
            const double rec = recall_at_r(results, gt, r);
            CHECK(rec >= prev);
            prev = rec;
        }
        CHECK(recall_at_r(results, gt, 3) == 1.0);
    }
    SUBCASE("R equal to the database size finds everything") {
        const VectorDataset db = testutil::random_dataset(40, 4, 121);
        const VectorDataset queries = testutil::random_dataset(6, 4, 122);
        const SearchResult exact = exact_scan(queries, db, db.n);
        const GroundTruth truth = ground_truth_from(exact_scan(queries, db, 1));
        CHECK(recall_at_r(exact, truth, db.n) == 1.0);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(recall_at_r(results, gt, 0), std::invalid_argument);
        GroundTruth bad;
        bad.n = 1;
        CHECK_THROWS_AS(recall_at_r(results, bad, 1), std::invalid_argument);
        GroundTruth empty_list;
        empty_list.n = 2;
        empty_list.lists = {{1}, {}};
        CHECK_THROWS_AS(recall_at_r(results, empty_list, 1), std::invalid_argument);
    }
}

TEST_CASE("recall@1 counts only rank-one hits") {
    SearchResult results;
    results.per_query = {{{7, 0.1}, {3, 0.2}}, {{1, 0.1}, {9, 0.2}}};
    GroundTruth gt;
    gt.n = 2;
    gt.lists = {{3}, {1}};
    CHECK(recall_at_r(results, gt, 1) == 0.5);
    CHECK(recall_at_r(results, gt, 2) == 1.0);
}

TEST_CASE("scans are independent of the worker-thread count") {
    testutil::ThreadGuard guard;
    const Codebook cb = random_codebook(3, 6, 5, 123);
    const EncodedDatabase db = random_encoded(cb, 400, 124);
    const VectorDataset queries = testutil::random_dataset(15, 5, 125);

    set_max_threads(1);
    const SearchResult a = adc_scan(queries, db, cb, 6);
    set_max_threads(4);
    const SearchResult b = adc_scan(queries, db, cb, 6);
    for (std::size_t qi = 0; qi < queries.n; ++qi) {
        REQUIRE(a.per_query[qi].size() == b.per_query[qi].size());
        for (std::size_t r = 0; r < a.per_query[qi].size(); ++r) {
            CHECK(a.per_query[qi][r].index == b.per_query[qi][r].index);
            CHECK(a.per_query[qi][r].score == b.per_query[qi][r].score);
        }
    }
}

TEST_CASE("results export as CSV") {
    testutil::TempDir dir;
    SearchResult results;
    results.per_query = {{{3, 0.5}, {1, 0.75}}, {{0, 0.25}}};
    write_results_csv(results, dir / "r.csv");

    std::ifstream in(dir / "r.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "query_id,rank,db_index,score");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 3);
}
