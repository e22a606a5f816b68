#include "avq/trainers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "avq/errors.hpp"
#include "avq/numerics.hpp"
#include "avq/parallel.hpp"

namespace avq {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::uint64_t stage_seed(std::uint64_t seed, std::size_t stage) {
    // Stage 0 keeps the caller's seed so single-stage trainers reduce to a
    // plain k-means run; later stages get SplitMix-style derived streams.
    if (stage == 0) return seed;
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * stage;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

void check_train_input(const VectorDataset& train, std::size_t m, std::size_t k) {
    if (train.n == 0) throw std::invalid_argument("training set is empty");
    if (m < 1 || k < 1) throw std::invalid_argument("m and k must be >= 1");
    if (k > train.n) throw std::invalid_argument("k exceeds training set size");
    check_finite(train);
}

std::vector<double> column_mean(const VectorDataset& ds) {
    std::vector<double> mean(ds.d, 0.0);
    for (std::size_t i = 0; i < ds.n; ++i) {
        const float* x = ds.row(i).data();
        for (std::size_t j = 0; j < ds.d; ++j) mean[j] += x[j];
    }
    for (double& v : mean) v /= static_cast<double>(ds.n);
    return mean;
}

VectorDataset subtract_mean(const VectorDataset& ds, const std::vector<double>& mean) {
    VectorDataset out(ds.n, ds.d);
    for (std::size_t i = 0; i < ds.n; ++i) {
        const float* x = ds.row(i).data();
        float* y = out.row(i).data();
        for (std::size_t j = 0; j < ds.d; ++j) {
            y[j] = static_cast<float>(static_cast<double>(x[j]) - mean[j]);
        }
    }
    return out;
}

VectorDataset first_columns(const VectorDataset& ds, std::size_t cols) {
    VectorDataset out(ds.n, cols);
    for (std::size_t i = 0; i < ds.n; ++i) {
        const float* src = ds.row(i).data();
        std::copy(src, src + cols, out.row(i).begin());
    }
    return out;
}

VectorDataset pad_columns(const VectorDataset& ds, std::size_t cols) {
    VectorDataset out(ds.n, cols);
    for (std::size_t i = 0; i < ds.n; ++i) {
        const float* src = ds.row(i).data();
        std::copy(src, src + ds.d, out.row(i).begin());
    }
    return out;
}

IterationStats measure(const VectorDataset& ds, const Codebook& cb, const CodeMatrix& cm) {
    IterationStats stats;
    stats.error = quantization_error(ds, cb, cm);
    stats.entropy.resize(cb.m);
    for (std::size_t dict = 0; dict < cb.m; ++dict) stats.entropy[dict] = entropy(cm, dict);
    return stats;
}

// Sort, beam-encode and measure; leaves cb norm-sorted and consistent with
// the returned codes.
struct EncodePhase {
    CodeMatrix codes;
    IterationStats stats;
};

EncodePhase da_encode_phase(const VectorDataset& ds, Codebook& cb, const DAConfig& cfg) {
    sort_by_norm(cb);
    const auto t0 = Clock::now();
    EncodeOptions opt;
    opt.method = EncodeMethod::beam;
    opt.beam_width = cfg.beam_width;
    EncodedDatabase db = encode_dataset(ds, cb, opt);
    EncodePhase phase;
    phase.codes = std::move(db.codes);
    phase.stats = measure(ds, cb, phase.codes);
    phase.stats.encode_seconds = seconds_since(t0);
    return phase;
}

void da_anneal_phase(const VectorDataset& ds, Codebook& cb, const CodeMatrix& cm,
                     std::size_t pick, const DAConfig& cfg) {
    const VectorDataset intermediate = build_intermediate(ds, cb, cm, pick);
    const double bits = entropy(cm, pick);
    const std::vector<float> elems =
        anneal_dictionary(intermediate, cb.dictionary(pick), cb.k, bits, cfg);
    std::copy(elems.begin(), elems.end(), cb.dictionary(pick).begin());
    cb.norm_sorted = false;
}

}  // namespace

void write_report(const TrainReport& report, std::ostream& out) {
    const std::size_t m = report.initial.entropy.size();
    out << "iteration,error,encode_seconds,anneal_seconds";
    for (std::size_t dict = 0; dict < m; ++dict) out << ",entropy_" << dict;
    out << '\n';
    char buf[64];
    auto row = [&](std::size_t iter, const IterationStats& s) {
        std::snprintf(buf, sizeof(buf), "%.9g", s.error);
        out << iter << ',' << buf;
        std::snprintf(buf, sizeof(buf), "%.6g", s.encode_seconds);
        out << ',' << buf;
        std::snprintf(buf, sizeof(buf), "%.6g", s.anneal_seconds);
        out << ',' << buf;
        for (double e : s.entropy) {
            std::snprintf(buf, sizeof(buf), "%.9g", e);
            out << ',' << buf;
        }
        out << '\n';
    };
    row(0, report.initial);
    for (std::size_t i = 0; i < report.iterations.size(); ++i) {
        row(i + 1, report.iterations[i]);
    }
}

void write_report(const TrainReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    write_report(report, out);
    if (!out) throw io_error("short write to " + path.string());
}

Codebook train_pq(const VectorDataset& train, std::size_t m, std::size_t k,
                  const KMeansConfig& cfg) {
    check_train_input(train, m, k);
    if (train.d % m != 0) {
        throw std::invalid_argument("train_pq: d must be divisible by m");
    }
    const std::size_t dsub = train.d / m;

    Codebook cb(m, k, train.d);
    for (std::size_t dict = 0; dict < m; ++dict) {
        VectorDataset slice(train.n, dsub);
        for (std::size_t i = 0; i < train.n; ++i) {
            const float* src = train.row(i).data() + dict * dsub;
            std::copy(src, src + dsub, slice.row(i).begin());
        }
        KMeansConfig sub = cfg;
        sub.k = k;
        sub.seed = stage_seed(cfg.seed, dict);
        const KMeansResult km = kmeans_fit(slice, sub);
        for (std::size_t j = 0; j < k; ++j) {
            const float* c = km.centroids.row(j).data();
            std::copy(c, c + dsub, cb.element(dict, j).begin() + dict * dsub);
        }
    }
    return cb;
}

std::pair<Codebook, CodeMatrix> train_rvq(const VectorDataset& train, std::size_t m,
                                          std::size_t k, const KMeansConfig& cfg) {
    check_train_input(train, m, k);

    Codebook cb(m, k, train.d);
    CodeMatrix cm(train.n, m);
    VectorDataset residual = train;
    for (std::size_t stage = 0; stage < m; ++stage) {
        KMeansConfig sub = cfg;
        sub.k = k;
        sub.seed = stage_seed(cfg.seed, stage);
        const KMeansResult km = kmeans_fit(residual, sub);
        std::copy(km.centroids.data.begin(), km.centroids.data.end(),
                  cb.dictionary(stage).begin());
        for (std::size_t i = 0; i < train.n; ++i) {
            const std::uint32_t code = km.assignments[i];
            cm.row(i)[stage] = static_cast<code_t>(code);
            const float* c = km.centroids.row(code).data();
            float* r = residual.row(i).data();
            for (std::size_t j = 0; j < train.d; ++j) {
                r[j] = static_cast<float>(static_cast<double>(r[j]) - c[j]);
            }
        }
    }
    return {std::move(cb), std::move(cm)};
}

VectorDataset build_intermediate(const VectorDataset& ds, const Codebook& cb,
                                 const CodeMatrix& cm, std::size_t m) {
    if (ds.n != cm.n || ds.d != cb.d || cm.m != cb.m) {
        throw std::invalid_argument("build_intermediate: shape mismatch");
    }
    if (m >= cb.m) throw std::invalid_argument("build_intermediate: dictionary index");

    VectorDataset out(ds.n, ds.d);
    parallel_for(ds.n, [&](std::size_t i) {
        const code_t* codes = cm.row(i).data();
        std::vector<double> acc(cb.d, 0.0);
        for (std::size_t dict = 0; dict < cb.m; ++dict) {
            if (dict == m) continue;
            const float* e = cb.element(dict, codes[dict]).data();
            for (std::size_t j = 0; j < cb.d; ++j) acc[j] += e[j];
        }
        const float* x = ds.row(i).data();
        float* y = out.row(i).data();
        for (std::size_t j = 0; j < cb.d; ++j) {
            y[j] = static_cast<float>(static_cast<double>(x[j]) - acc[j]);
        }
    });
    return out;
}

std::vector<std::size_t> subspace_schedule(std::size_t d, std::size_t k,
                                           double entropy_bits, std::size_t steps) {
    if (d < 1 || k < 1) throw std::invalid_argument("subspace_schedule: d, k must be >= 1");
    if (steps < 1) throw std::invalid_argument("subspace_schedule: steps must be >= 1");
    const double max_bits = std::log2(static_cast<double>(k));
    if (entropy_bits < -1e-9 || entropy_bits > max_bits + 1e-9) {
        throw std::invalid_argument("subspace_schedule: entropy out of [0, log2 k]");
    }
    const double bits = std::clamp(entropy_bits, 0.0, max_bits);

    const double head = static_cast<double>(d) * std::exp2(bits) / static_cast<double>(k);
    const auto d1 = static_cast<std::size_t>(std::clamp<long long>(
        std::llround(head), 1, static_cast<long long>(d)));

    std::vector<std::size_t> dims{d1};
    const double ratio = static_cast<double>(d) / static_cast<double>(d1);
    for (std::size_t n = 1; n <= steps; ++n) {
        const double rung = static_cast<double>(d1) *
                            std::pow(ratio, static_cast<double>(n) / static_cast<double>(steps));
        const auto v = static_cast<std::size_t>(std::clamp<long long>(
            std::llround(rung), 1, static_cast<long long>(d)));
        if (v > dims.back()) dims.push_back(v);
    }
    if (dims.back() != d) dims.push_back(d);
    return dims;
}

std::vector<float> anneal_dictionary(const VectorDataset& intermediate,
                                     std::span<const float> elements, std::size_t k,
                                     double entropy_bits, const DAConfig& cfg) {
    if (intermediate.n == 0) throw std::invalid_argument("anneal_dictionary: empty dataset");
    if (k < 1 || elements.size() != k * intermediate.d) {
        throw std::invalid_argument("anneal_dictionary: element shape mismatch");
    }

    const std::size_t d = intermediate.d;
    const Rotation rot = pca(intermediate);
    const std::vector<double> mean = column_mean(intermediate);

    const VectorDataset full_coords = project(rot, d, subtract_mean(intermediate, mean));

    VectorDataset incoming(k, d);
    std::copy(elements.begin(), elements.end(), incoming.data.begin());
    const VectorDataset rotated_elems = project(rot, d, subtract_mean(incoming, mean));

    const std::vector<std::size_t> dims =
        subspace_schedule(d, k, entropy_bits, cfg.subspace_steps);

    VectorDataset centroids = first_columns(rotated_elems, dims.front());
    for (std::size_t dn : dims) {
        const VectorDataset data_n = first_columns(full_coords, dn);
        const VectorDataset init = pad_columns(centroids, dn);
        KMeansConfig sub = cfg.kmeans;
        sub.k = k;
        const KMeansResult km = kmeans_fit(data_n, sub, &init);
        centroids = km.centroids;
    }

    VectorDataset annealed = back_project(rot, centroids);
    for (std::size_t j = 0; j < k; ++j) {
        float* e = annealed.row(j).data();
        for (std::size_t c = 0; c < d; ++c) {
            e[c] = static_cast<float>(static_cast<double>(e[c]) + mean[c]);
        }
    }

    // Never regress: keep the incoming dictionary when it fits the
    // intermediate dataset better than the annealed one.
    const double sse_new = assign(intermediate, annealed).sse;
    const double sse_old = assign(intermediate, incoming).sse;
    if (sse_new > sse_old) {
        return {elements.begin(), elements.end()};
    }
    return std::move(annealed.data);
}

DAStepResult da_iterate(const VectorDataset& ds, Codebook& cb, const DAConfig& cfg,
                        Rng& rng, std::size_t forced_pick) {
    EncodePhase phase = da_encode_phase(ds, cb, cfg);
    const std::size_t pick = forced_pick != SIZE_MAX ? forced_pick : rng.index(cb.m);
    if (pick >= cb.m) throw std::invalid_argument("da_iterate: pick out of range");

    const auto t0 = Clock::now();
    da_anneal_phase(ds, cb, phase.codes, pick, cfg);
    phase.stats.anneal_seconds = seconds_since(t0);

    return {std::move(phase.codes), std::move(phase.stats), pick};
}

DAResult train_da(const VectorDataset& ds, Codebook initial, const DAConfig& cfg) {
    if (initial.m == 0 || initial.k == 0) {
        throw std::invalid_argument("train_da: untrained codebook");
    }
    if (ds.d != initial.d) throw std::invalid_argument("train_da: dimension mismatch");
    check_train_input(ds, initial.m, initial.k);

    const std::size_t iters = cfg.iters == 0 ? initial.m : cfg.iters;
    Rng rng(cfg.seed);

    Codebook cb = std::move(initial);
    EncodePhase phase = da_encode_phase(ds, cb, cfg);

    DAResult result;
    result.report.initial = phase.stats;

    Codebook best_cb = cb;
    CodeMatrix best_cm = phase.codes;
    double best_err = phase.stats.error;

    for (std::size_t it = 0; it < iters; ++it) {
        const std::size_t pick =
            cfg.pick == DictionaryPick::round_robin ? it % cb.m : rng.index(cb.m);

        const auto t0 = Clock::now();
        da_anneal_phase(ds, cb, phase.codes, pick, cfg);
        const double anneal_seconds = seconds_since(t0);

        phase = da_encode_phase(ds, cb, cfg);
        IterationStats entry = phase.stats;
        entry.anneal_seconds = anneal_seconds;
        result.report.iterations.push_back(entry);

        if (entry.error < best_err) {
            best_err = entry.error;
            best_cb = cb;
            best_cm = phase.codes;
        }

        // Quit condition: relative improvement over one full sweep of picks.
        const std::size_t done = it + 1;
        if (done % cb.m == 0) {
            const double prev = done == cb.m
                                    ? result.report.initial.error
                                    : result.report.iterations[done - cb.m - 1].error;
            if (prev <= 0.0 || prev - entry.error < cfg.quit_tol * prev) break;
        }
    }

    if (phase.stats.error <= best_err) {
        result.codebook = std::move(cb);
        result.codes = std::move(phase.codes);
        result.report.final_error = phase.stats.error;
    } else {
        result.codebook = std::move(best_cb);
        result.codes = std::move(best_cm);
        result.report.final_error = best_err;
    }
    return result;
}

std::pair<Codebook, CodeMatrix> train_darvq(const VectorDataset& train, std::size_t m,
                                            std::size_t k, const DAConfig& cfg) {
    check_train_input(train, m, k);

    Codebook cb;
    CodeMatrix cm;
    for (std::size_t stage = 0; stage < m; ++stage) {
        VectorDataset residual;
        if (stage == 0) {
            residual = train;
        } else {
            DAConfig sub = cfg;
            sub.iters = stage;  // one pick per existing dictionary
            sub.seed = stage_seed(cfg.seed, 1000000 + stage);
            DAResult da = train_da(train, std::move(cb), sub);
            cb = std::move(da.codebook);
            cm = std::move(da.codes);
            residual = residuals(train, cb, cm);
        }

        KMeansConfig sub = cfg.kmeans;
        sub.k = k;
        sub.seed = stage_seed(cfg.seed, stage);
        const KMeansResult km = kmeans_fit(residual, sub);

        Codebook grown(stage + 1, k, train.d);
        std::copy(cb.elements.begin(), cb.elements.end(), grown.elements.begin());
        std::copy(km.centroids.data.begin(), km.centroids.data.end(),
                  grown.dictionary(stage).begin());
        CodeMatrix codes(train.n, stage + 1);
        for (std::size_t i = 0; i < train.n; ++i) {
            auto dst = codes.row(i);
            if (stage > 0) {
                auto src = cm.row(i);
                std::copy(src.begin(), src.end(), dst.begin());
            }
            dst[stage] = static_cast<code_t>(km.assignments[i]);
        }
        cb = std::move(grown);
        cm = std::move(codes);
    }
    return {std::move(cb), std::move(cm)};
}

std::pair<Codebook, TrainReport> online_update(const Codebook& cb, const VectorDataset& batch,
                                               const DAConfig& cfg) {
    if (batch.n == 0) throw std::invalid_argument("online_update: empty batch");
    if (batch.d != cb.d) throw std::invalid_argument("online_update: dimension mismatch");
    DAResult result = train_da(batch, cb, cfg);
    return {std::move(result.codebook), std::move(result.report)};
}

}  // namespace avq
