#include <doctest.h>

#include <cmath>
#include <limits>

#include "avq/encoder.hpp"
#include "avq/numerics.hpp"
#include "test_util.hpp"

using namespace avq;
using testutil::random_codebook;
using testutil::residual_sq_norm;

namespace {

std::vector<float> random_vector(std::size_t d, Rng& rng, double scale = 1.0) {
    std::vector<float> x(d);
    for (auto& v : x) v = static_cast<float>(scale * rng.normal());
    return x;
}

}  // namespace

TEST_CASE("beam_encode with one dictionary is the element argmin") {
    const Codebook cb = random_codebook(1, 8, 4, 30);
    const CrossTermTable table = build_cross_terms(cb);
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const std::vector<float> x = random_vector(4, rng);
        double best = std::numeric_limits<double>::infinity();
        code_t arg = 0;
        for (std::size_t j = 0; j < cb.k; ++j) {
            const double dist = sq_l2(x, cb.element(0, j));
            if (dist < best) {
                best = dist;
                arg = static_cast<code_t>(j);
            }
        }
        for (std::size_t beam : {1, 3, 8}) {
            CHECK(beam_encode(x, cb, table, beam) == std::vector<code_t>{arg});
        }
    }
}

TEST_CASE("full-width beam matches the exhaustive oracle") {
    Rng rng(32);
    for (int trial = 0; trial < 20; ++trial) {
        const Codebook cb = random_codebook(3, 4, 8, 33 + trial);
        const CrossTermTable table = build_cross_terms(cb);
        const std::vector<float> x = random_vector(8, rng);

        const auto beam = beam_encode(x, cb, table, 16);  // 16 = K^(M-1)
        const auto oracle = exhaustive_encode(x, cb);
        const double rb = residual_sq_norm(x, cb, beam);
        const double ro = residual_sq_norm(x, cb, oracle);
        CHECK(std::abs(rb - ro) <= 1e-9 * std::max(1.0, ro));
    }
}

TEST_CASE("beam residual is monotone non-increasing in beam width") {
    // Widening the beam keeps better prefixes but can drop the narrow beam's
    // chain, so per-input monotonicity is an empirical property, not a
    // theorem. It holds throughout this instance family.
    Rng rng(34);
    for (int trial = 0; trial < 40; ++trial) {
        const Codebook cb = random_codebook(3, 4, 8, 3000 + trial);
        const CrossTermTable table = build_cross_terms(cb);
        const std::vector<float> x = random_vector(8, rng);
        double prev = std::numeric_limits<double>::infinity();
        for (std::size_t beam : {1, 2, 4, 8}) {
            const double res = residual_sq_norm(x, cb, beam_encode(x, cb, table, beam));
            CHECK(res <= prev + 1e-12 + 1e-9 * prev);
            prev = res;
        }
    }
}

TEST_CASE("beam score recurrence tracks the exact prefix error") {
    Rng rng(35);
    const Codebook cb = random_codebook(4, 5, 6, 36);
    const CrossTermTable table = build_cross_terms(cb);
    for (int trial = 0; trial < 5; ++trial) {
        const std::vector<float> x = random_vector(6, rng);
        BeamTrace trace;
        beam_encode(x, cb, table, 4, &trace);
        REQUIRE(trace.stages.size() == cb.m);
        for (std::size_t stage = 0; stage < trace.stages.size(); ++stage) {
            for (const auto& cand : trace.stages[stage]) {
                REQUIRE(cand.prefix.size() == stage + 1);
                // Direct computation of ||x - sum of prefix elements||^2.
                std::vector<double> partial(cb.d, 0.0);
                for (std::size_t j = 0; j <= stage; ++j) {
                    const auto e = cb.element(j, cand.prefix[j]);
                    for (std::size_t c = 0; c < cb.d; ++c) partial[c] += e[c];
                }
                double direct = 0.0;
                for (std::size_t c = 0; c < cb.d; ++c) {
                    const double diff = static_cast<double>(x[c]) - partial[c];
                    direct += diff * diff;
                }
                CHECK(std::abs(cand.approx_sq_err - direct) <=
                      1e-4 * std::max(1.0, direct));
            }
            // Candidates sorted by score.
            for (std::size_t i = 1; i < trace.stages[stage].size(); ++i) {
                CHECK(trace.stages[stage][i - 1].approx_sq_err <=
                      trace.stages[stage][i].approx_sq_err + 1e-12);
            }
        }
    }
}

TEST_CASE("beam_encode enforces its contract") {
    Codebook cb = random_codebook(3, 4, 5, 37, /*sorted=*/false);
    for (float& v : cb.dictionary(0)) v *= 0.001f;  // force ascending norms
    const CrossTermTable table = build_cross_terms(cb);
    const std::vector<float> x(5, 0.5f);

    CHECK_FALSE(cb.norm_sorted);
    CHECK_THROWS_AS(beam_encode(x, cb, table, 4), std::logic_error);

    sort_by_norm(cb);
    const CrossTermTable sorted_table = build_cross_terms(cb);
    CHECK_THROWS_AS(beam_encode(x, cb, sorted_table, 0), std::invalid_argument);
    CHECK_NOTHROW(beam_encode(x, cb, sorted_table, 4));

    const Codebook other = random_codebook(2, 4, 5, 38);
    const CrossTermTable wrong = build_cross_terms(other);
    CHECK_THROWS_AS(beam_encode(x, cb, wrong, 4), std::invalid_argument);
}

TEST_CASE("greedy encoding picks the stage-wise nearest element") {
    Rng rng(39);
    const Codebook cb = random_codebook(3, 6, 5, 40);
    const std::vector<float> x = random_vector(5, rng);
    const auto codes = greedy_encode(x, cb);

    std::vector<double> residual(x.begin(), x.end());
    for (std::size_t dict = 0; dict < cb.m; ++dict) {
        double best = std::numeric_limits<double>::infinity();
        code_t arg = 0;
        for (std::size_t j = 0; j < cb.k; ++j) {
            const auto e = cb.element(dict, j);
            double dist = 0.0;
            for (std::size_t c = 0; c < cb.d; ++c) {
                const double diff = residual[c] - e[c];
                dist += diff * diff;
            }
            if (dist < best) {
                best = dist;
                arg = static_cast<code_t>(j);
            }
        }
        CHECK(codes[dict] == arg);
        const auto e = cb.element(dict, arg);
        for (std::size_t c = 0; c < cb.d; ++c) residual[c] -= e[c];
    }
}

TEST_CASE("icm never worsens the greedy initialization") {
    Rng rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        const Codebook cb = random_codebook(4, 6, 6, 50 + trial);
        const CrossTermTable table = build_cross_terms(cb);
        const std::vector<float> x = random_vector(6, rng);
        const double greedy_res = residual_sq_norm(x, cb, greedy_encode(x, cb));
        const double icm_res = residual_sq_norm(x, cb, icm_encode(x, cb, table, 10));
        CHECK(icm_res <= greedy_res + 1e-9 * std::max(1.0, greedy_res));
    }
}

TEST_CASE("icm with one dictionary is the exact argmin in one round") {
    Rng rng(42);
    const Codebook cb = random_codebook(1, 8, 4, 43);
    const CrossTermTable table = build_cross_terms(cb);
    const std::vector<float> x = random_vector(4, rng);
    CHECK(icm_encode(x, cb, table, 1) == exhaustive_encode(x, cb));
}

TEST_CASE("icm from every initialization lands at or above the exhaustive optimum") {
    Rng rng(44);
    const Codebook cb = random_codebook(2, 4, 5, 45);
    const CrossTermTable table = build_cross_terms(cb);
    const std::vector<float> x = random_vector(5, rng);
    const double optimum = residual_sq_norm(x, cb, exhaustive_encode(x, cb));

    for (code_t a = 0; a < 4; ++a) {
        for (code_t b = 0; b < 4; ++b) {
            const std::vector<code_t> init{a, b};
            const double init_res = residual_sq_norm(x, cb, init);
            const auto refined = icm_refine(x, cb, table, init, 20);
            const double res = residual_sq_norm(x, cb, refined);
            CHECK(res >= optimum - 1e-9);
            CHECK(res <= init_res + 1e-9);
        }
    }
}

TEST_CASE("exhaustive encoding solves the hand-built instance") {
    Codebook cb(2, 2, 2);
    cb.element(0, 1)[0] = 4.0f;  // c1 = {[0,0],[4,0]}
    cb.element(1, 1)[1] = 4.0f;  // c2 = {[0,0],[0,4]}
    const std::vector<float> x{4.0f, 4.0f};
    const auto codes = exhaustive_encode(x, cb);
    CHECK(codes == std::vector<code_t>{1, 1});
    CHECK(residual_sq_norm(x, cb, codes) == 0.0);
}

TEST_CASE("exhaustive encoding refuses oversized search spaces") {
    const Codebook cb(3, 256, 2);  // 256^3 = 2^24 > 2^20
    const std::vector<float> x{0.0f, 0.0f};
    CHECK_THROWS_AS(exhaustive_encode(x, cb), std::invalid_argument);
}

TEST_CASE("exhaustive dominates beam at every width") {
    Rng rng(46);
    for (int trial = 0; trial < 20; ++trial) {
        const Codebook cb = random_codebook(3, 4, 6, 60 + trial);
        const CrossTermTable table = build_cross_terms(cb);
        const std::vector<float> x = random_vector(6, rng);
        const double optimum = residual_sq_norm(x, cb, exhaustive_encode(x, cb));
        for (std::size_t beam : {1, 4, 16}) {
            const double res = residual_sq_norm(x, cb, beam_encode(x, cb, table, beam));
            CHECK(optimum <= res + 1e-9 * std::max(1.0, res));
        }
    }
}

TEST_CASE("pq_encode equals exhaustive on PQ-structured codebooks") {
    // Dictionary m supported on slice m only; subspaces decouple.
    Rng rng(47);
    Codebook cb(2, 3, 4);
    for (std::size_t dict = 0; dict < 2; ++dict) {
        for (std::size_t j = 0; j < 3; ++j) {
            for (std::size_t c = 0; c < 2; ++c) {
                cb.element(dict, j)[dict * 2 + c] = static_cast<float>(rng.normal());
            }
        }
    }
    for (int trial = 0; trial < 10; ++trial) {
        const std::vector<float> x = random_vector(4, rng);
        CHECK(pq_encode(x, cb) == exhaustive_encode(x, cb));
    }
    const Codebook bad(3, 2, 4);  // 4 % 3 != 0
    CHECK_THROWS_AS(pq_encode(std::vector<float>(4, 0.0f), bad), std::invalid_argument);
}

TEST_CASE("encode_dataset stores consistent cross terms and ignores thread count") {
    testutil::ThreadGuard guard;
    const Codebook cb = random_codebook(3, 5, 6, 48);
    const CrossTermTable table = build_cross_terms(cb);
    const VectorDataset ds = testutil::random_dataset(200, 6, 49);

    EncodeOptions opt;
    opt.method = EncodeMethod::beam;
    opt.beam_width = 4;

    set_max_threads(1);
    const EncodedDatabase a = encode_dataset(ds, cb, opt);
    set_max_threads(4);
    const EncodedDatabase b = encode_dataset(ds, cb, opt);
    CHECK(a.codes.codes == b.codes.codes);
    CHECK(a.cross_terms == b.cross_terms);
    CHECK(a.k == cb.k);
    CHECK(a.codebook_id == codebook_fingerprint(cb));

    for (std::size_t i = 0; i < ds.n; ++i) {
        const double expect = cross_term_of(a.codes.row(i), table);
        CHECK(std::abs(a.cross_terms[i] - expect) <= 1e-4 * (1.0 + std::abs(expect)));
    }
}

TEST_CASE("encode_dataset validates method preconditions") {
    Codebook cb = random_codebook(3, 4, 6, 51, /*sorted=*/false);
    for (float& v : cb.dictionary(0)) v *= 0.001f;
    const VectorDataset ds = testutil::random_dataset(10, 6, 52);

    EncodeOptions opt;
    opt.method = EncodeMethod::beam;
    CHECK_THROWS_AS(encode_dataset(ds, cb, opt), std::logic_error);

    opt.method = EncodeMethod::icm;
    opt.icm_rounds = 0;
    CHECK_THROWS_AS(encode_dataset(ds, cb, opt), std::invalid_argument);

    opt.method = EncodeMethod::greedy;
    const VectorDataset wrong = testutil::random_dataset(10, 5, 52);
    CHECK_THROWS_AS(encode_dataset(wrong, cb, opt), std::invalid_argument);
}
