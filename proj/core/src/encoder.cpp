#include "avq/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "avq/numerics.hpp"
#include "avq/parallel.hpp"

namespace avq {

namespace {

void check_input(std::span<const float> x, const Codebook& cb) {
    if (cb.m == 0 || cb.k == 0 || cb.d == 0) {
        throw std::invalid_argument("encode: empty codebook");
    }
    if (x.size() != cb.d) throw std::invalid_argument("encode: input dimension mismatch");
}

// dist[dict*k + j] = ||x - c_dict(j)||^2, the O(dMK) per-vector precompute
// shared by beam and ICM.
void element_distances(std::span<const float> x, const Codebook& cb,
                       std::vector<double>& dist) {
    dist.resize(cb.m * cb.k);
    for (std::size_t dict = 0; dict < cb.m; ++dict) {
        for (std::size_t j = 0; j < cb.k; ++j) {
            dist[dict * cb.k + j] =
                detail::sq_l2_unchecked(x.data(), cb.element(dict, j).data(), cb.d);
        }
    }
}

struct Expansion {
    double err;
    std::uint32_t parent;
    code_t code;
};

}  // namespace

std::vector<code_t> beam_encode(std::span<const float> x, const Codebook& cb,
                                const CrossTermTable& cross, std::size_t beam_width,
                                BeamTrace* trace) {
    check_input(x, cb);
    if (beam_width < 1) throw std::invalid_argument("beam_encode: beam width must be >= 1");
    if (!cb.norm_sorted) {
        throw std::logic_error("beam_encode: codebook is not tagged norm-sorted");
    }
    if (cross.m != cb.m || cross.k != cb.k) {
        throw std::invalid_argument("beam_encode: cross-term table shape mismatch");
    }

    const std::size_t m = cb.m;
    const std::size_t k = cb.k;
    const double x_sq = sq_norm(x);

    thread_local std::vector<double> dist;
    element_distances(x, cb, dist);

    // Stage state: live prefixes (rows of `prefixes`, width = stage) and their
    // exact squared errors.
    std::vector<code_t> prefixes;
    std::vector<double> errs;

    // Stage 0: one candidate per element of the first dictionary.
    {
        std::vector<std::uint32_t> order(k);
        for (std::size_t j = 0; j < k; ++j) order[j] = static_cast<std::uint32_t>(j);
        std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
            return dist[a] < dist[b];
        });
        const std::size_t keep = std::min(beam_width, k);
        prefixes.resize(keep);
        errs.resize(keep);
        for (std::size_t i = 0; i < keep; ++i) {
            prefixes[i] = static_cast<code_t>(order[i]);
            errs[i] = dist[order[i]];
        }
    }

    auto record_stage = [&](std::size_t stage) {
        if (!trace) return;
        std::vector<BeamTrace::Candidate> cands(errs.size());
        for (std::size_t i = 0; i < errs.size(); ++i) {
            cands[i].prefix.assign(prefixes.begin() + i * (stage + 1),
                                   prefixes.begin() + (i + 1) * (stage + 1));
            cands[i].approx_sq_err = errs[i];
        }
        trace->stages.push_back(std::move(cands));
    };
    record_stage(0);

    std::vector<double> dots(k);
    std::vector<Expansion> expansions;
    for (std::size_t stage = 1; stage < m; ++stage) {
        const std::size_t live = errs.size();
        const double* stage_dist = dist.data() + stage * k;

        expansions.resize(live * k);
        for (std::size_t l = 0; l < live; ++l) {
            const code_t* prefix = prefixes.data() + l * stage;
            std::fill(dots.begin(), dots.end(), 0.0);
            for (std::size_t j = 0; j < stage; ++j) {
                const float* row = cross.block_row(j, stage, prefix[j]);
                for (std::size_t c = 0; c < k; ++c) dots[c] += row[c];
            }
            const double base = errs[l] - x_sq;
            Expansion* out = expansions.data() + l * k;
            for (std::size_t c = 0; c < k; ++c) {
                out[c].err = base + stage_dist[c] + 2.0 * dots[c];
                out[c].parent = static_cast<std::uint32_t>(l);
                out[c].code = static_cast<code_t>(c);
            }
        }

        // Ties resolve by lexicographic prefix; parents are materialized rows
        // of the previous stage so the comparison walks two code arrays.
        auto less = [&](const Expansion& a, const Expansion& b) {
            if (a.err != b.err) return a.err < b.err;
            const code_t* pa = prefixes.data() + a.parent * stage;
            const code_t* pb = prefixes.data() + b.parent * stage;
            for (std::size_t j = 0; j < stage; ++j) {
                if (pa[j] != pb[j]) return pa[j] < pb[j];
            }
            return a.code < b.code;
        };
        const std::size_t keep = std::min(beam_width, expansions.size());
        std::partial_sort(expansions.begin(), expansions.begin() + keep, expansions.end(),
                          less);

        std::vector<code_t> next(keep * (stage + 1));
        std::vector<double> next_errs(keep);
        for (std::size_t i = 0; i < keep; ++i) {
            const Expansion& e = expansions[i];
            code_t* row = next.data() + i * (stage + 1);
            std::memcpy(row, prefixes.data() + e.parent * stage, stage * sizeof(code_t));
            row[stage] = e.code;
            next_errs[i] = e.err;
        }
        prefixes = std::move(next);
        errs = std::move(next_errs);
        record_stage(stage);
    }

    return {prefixes.begin(), prefixes.begin() + m};
}

std::vector<code_t> greedy_encode(std::span<const float> x, const Codebook& cb) {
    check_input(x, cb);
    std::vector<double> residual(x.begin(), x.end());
    std::vector<code_t> codes(cb.m);
    for (std::size_t dict = 0; dict < cb.m; ++dict) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t j = 0; j < cb.k; ++j) {
            const float* e = cb.element(dict, j).data();
            double dist = 0.0;
            for (std::size_t c = 0; c < cb.d; ++c) {
                const double diff = residual[c] - e[c];
                dist += diff * diff;
            }
            if (dist < best) {
                best = dist;
                arg = j;
            }
        }
        codes[dict] = static_cast<code_t>(arg);
        const float* e = cb.element(dict, arg).data();
        for (std::size_t c = 0; c < cb.d; ++c) residual[c] -= e[c];
    }
    return codes;
}

std::vector<code_t> icm_refine(std::span<const float> x, const Codebook& cb,
                               const CrossTermTable& cross, std::vector<code_t> codes,
                               std::size_t rounds) {
    check_input(x, cb);
    if (rounds < 1) throw std::invalid_argument("icm_refine: rounds must be >= 1");
    if (codes.size() != cb.m) throw std::invalid_argument("icm_refine: codes length mismatch");
    if (cross.m != cb.m || cross.k != cb.k) {
        throw std::invalid_argument("icm_refine: cross-term table shape mismatch");
    }

    thread_local std::vector<double> dist;
    element_distances(x, cb, dist);

    // Candidate score for code j of dictionary `dict`, holding other codes
    // fixed, up to terms constant in j:
    //   ||x - c_dict(j)||^2 + 2 sum_{b != dict} <c_dict(j), c_b(codes[b])>
    std::vector<double> score(cb.k);
    for (std::size_t round = 0; round < rounds; ++round) {
        bool changed = false;
        for (std::size_t dict = 0; dict < cb.m; ++dict) {
            const double* base = dist.data() + dict * cb.k;
            std::copy(base, base + cb.k, score.begin());
            for (std::size_t b = 0; b < cb.m; ++b) {
                if (b == dict) continue;
                // <c_dict(j), c_b(codes[b])> as a contiguous row of block (b, dict).
                const float* row = cross.block_row(b, dict, codes[b]);
                for (std::size_t j = 0; j < cb.k; ++j) score[j] += 2.0 * row[j];
            }
            std::size_t arg = 0;
            double best = score[0];
            for (std::size_t j = 1; j < cb.k; ++j) {
                if (score[j] < best) {
                    best = score[j];
                    arg = j;
                }
            }
            if (static_cast<code_t>(arg) != codes[dict] && best <= score[codes[dict]]) {
                codes[dict] = static_cast<code_t>(arg);
                changed = true;
            }
        }
        if (!changed) break;
    }
    return codes;
}

std::vector<code_t> icm_encode(std::span<const float> x, const Codebook& cb,
                               const CrossTermTable& cross, std::size_t rounds) {
    return icm_refine(x, cb, cross, greedy_encode(x, cb), rounds);
}

std::vector<code_t> exhaustive_encode(std::span<const float> x, const Codebook& cb) {
    check_input(x, cb);
    double combos = 1.0;
    for (std::size_t dict = 0; dict < cb.m; ++dict) {
        combos *= static_cast<double>(cb.k);
        if (combos > static_cast<double>(1u << 20)) {
            throw std::invalid_argument(
                "exhaustive_encode: refusing k^m > 2^20 combinations");
        }
    }

    const std::size_t d = cb.d;
    std::vector<code_t> current(cb.m, 0);
    std::vector<code_t> best_codes;
    double best = std::numeric_limits<double>::infinity();

    // Depth-first enumeration in lexicographic order with running partial
    // sums; strict improvement keeps the lexicographically smallest argmin.
    std::vector<std::vector<double>> partial(cb.m + 1, std::vector<double>(d, 0.0));
    auto walk = [&](auto&& self, std::size_t dict) -> void {
        if (dict == cb.m) {
            double err = 0.0;
            const double* sum = partial[cb.m].data();
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = static_cast<double>(x[c]) - sum[c];
                err += diff * diff;
            }
            if (err < best) {
                best = err;
                best_codes = current;
            }
            return;
        }
        for (std::size_t j = 0; j < cb.k; ++j) {
            const float* e = cb.element(dict, j).data();
            const double* prev = partial[dict].data();
            double* next = partial[dict + 1].data();
            for (std::size_t c = 0; c < d; ++c) next[c] = prev[c] + e[c];
            current[dict] = static_cast<code_t>(j);
            self(self, dict + 1);
        }
    };
    walk(walk, 0);
    return best_codes;
}

std::vector<code_t> pq_encode(std::span<const float> x, const Codebook& cb) {
    check_input(x, cb);
    if (cb.d % cb.m != 0) {
        throw std::invalid_argument("pq_encode: d must be divisible by the dictionary count");
    }
    const std::size_t dsub = cb.d / cb.m;
    std::vector<code_t> codes(cb.m);
    for (std::size_t dict = 0; dict < cb.m; ++dict) {
        const std::size_t at = dict * dsub;
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t j = 0; j < cb.k; ++j) {
            const float* e = cb.element(dict, j).data() + at;
            const double dist = detail::sq_l2_unchecked(x.data() + at, e, dsub);
            if (dist < best) {
                best = dist;
                arg = j;
            }
        }
        codes[dict] = static_cast<code_t>(arg);
    }
    return codes;
}

EncodedDatabase encode_dataset(const VectorDataset& ds, const Codebook& cb,
                               const EncodeOptions& opt) {
    if (ds.d != cb.d) throw std::invalid_argument("encode_dataset: dimension mismatch");

    const CrossTermTable cross = build_cross_terms(cb);

    // Fail fast on contract errors before spawning workers.
    if (opt.method == EncodeMethod::beam) {
        if (opt.beam_width < 1) throw std::invalid_argument("encode_dataset: beam width");
        if (!cb.norm_sorted) {
            throw std::logic_error("encode_dataset: beam method needs a norm-sorted codebook");
        }
    }
    if (opt.method == EncodeMethod::icm && opt.icm_rounds < 1) {
        throw std::invalid_argument("encode_dataset: icm rounds");
    }

    EncodedDatabase db;
    db.codes = CodeMatrix(ds.n, cb.m);
    db.k = cb.k;
    db.cross_terms.assign(ds.n, 0.0f);
    db.codebook_id = codebook_fingerprint(cb);

    parallel_for(ds.n, [&](std::size_t i) {
        const auto x = ds.row(i);
        std::vector<code_t> codes;
        switch (opt.method) {
            case EncodeMethod::greedy:
                codes = greedy_encode(x, cb);
                break;
            case EncodeMethod::beam:
                codes = beam_encode(x, cb, cross, opt.beam_width);
                break;
            case EncodeMethod::icm:
                codes = icm_encode(x, cb, cross, opt.icm_rounds);
                break;
            case EncodeMethod::exhaustive:
                codes = exhaustive_encode(x, cb);
                break;
            case EncodeMethod::pq:
                codes = pq_encode(x, cb);
                break;
        }
        std::copy(codes.begin(), codes.end(), db.codes.row(i).begin());
        db.cross_terms[i] = static_cast<float>(cross_term_of(codes, cross));
    });
    return db;
}

}  // namespace avq
