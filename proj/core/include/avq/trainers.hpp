#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "avq/codebook.hpp"
#include "avq/encoder.hpp"
#include "avq/kmeans.hpp"
#include "avq/rng.hpp"

namespace avq {

enum class DictionaryPick { random, round_robin };

struct DAConfig {
    std::size_t iters = 0;  // 0 = one pick per dictionary
    std::size_t beam_width = 10;
    std::size_t subspace_steps = 5;
    std::uint64_t seed = 0;
    double quit_tol = 1e-5;  // relative improvement floor over one full sweep
    DictionaryPick pick = DictionaryPick::random;
    KMeansConfig kmeans;  // inner k-means settings; k is set internally
};

struct IterationStats {
    double error = 0.0;             // mean squared residual at encode time
    std::vector<double> entropy;    // per dictionary, bits
    double encode_seconds = 0.0;
    double anneal_seconds = 0.0;
};

// `initial` holds the opening encode of the incoming codebook; `iterations`
// has exactly one entry per completed optimizer iteration, measured by the
// encode that closes it.
struct TrainReport {
    IterationStats initial;
    std::vector<IterationStats> iterations;
    double final_error = 0.0;
};

// Line-delimited records: iteration, error, phase seconds, per-dictionary
// entropies. Row 0 is the initial encode.
void write_report(const TrainReport& report, std::ostream& out);
void write_report(const TrainReport& report, const std::filesystem::path& path);

// Product quantization: k-means per contiguous d/m-dimensional slice;
// dictionary m is zero outside its slice. Requires d divisible by m.
Codebook train_pq(const VectorDataset& train, std::size_t m, std::size_t k,
                  const KMeansConfig& cfg);

// Residual vector quantization: stage-wise k-means on the running residuals,
// greedy nearest-element assignment per stage.
std::pair<Codebook, CodeMatrix> train_rvq(const VectorDataset& train, std::size_t m,
                                          std::size_t k, const KMeansConfig& cfg);

// Row-wise x' = e_x + c_m(i_m(x)), the target a single dictionary must fit.
VectorDataset build_intermediate(const VectorDataset& ds, const Codebook& cb,
                                 const CodeMatrix& cm, std::size_t m);

// Subspace growth schedule: starts at clamp(round(d * 2^entropy / k), 1, d)
// and grows geometrically to d in `steps` steps, duplicates collapsed.
std::vector<std::size_t> subspace_schedule(std::size_t d, std::size_t k,
                                           double entropy_bits, std::size_t steps);

// Refits one dictionary against its intermediate dataset: PCA, then k-means
// over the growth schedule, each step warm-started by the previous step's
// centroids padded with zeros (the first by the rotated incoming elements
// truncated to the schedule head). Keeps the incoming elements when they fit
// the intermediate dataset better.
std::vector<float> anneal_dictionary(const VectorDataset& intermediate,
                                     std::span<const float> elements, std::size_t k,
                                     double entropy_bits, const DAConfig& cfg);

struct DAStepResult {
    CodeMatrix codes;
    IterationStats stats;
    std::size_t picked = 0;
};

// One optimizer iteration: sort by norm, beam encode, pick a dictionary,
// rebuild it against its intermediate dataset. `forced_pick` overrides the
// random pick (round-robin callers pass their own counter).
DAStepResult da_iterate(const VectorDataset& ds, Codebook& cb, const DAConfig& cfg,
                        Rng& rng, std::size_t forced_pick = SIZE_MAX);

struct DAResult {
    Codebook codebook;
    CodeMatrix codes;
    TrainReport report;
};

// Runs da_iterate until the iteration cap or until one full sweep of picks
// improves the error by less than quit_tol. Returns the best encoded state
// seen, so the final error never exceeds the initial one.
DAResult train_da(const VectorDataset& ds, Codebook initial, const DAConfig& cfg);

// RVQ interleaved with DA: before each new stage, optimizes the existing
// dictionaries and re-encodes, then fits k-means on the fresh residuals.
std::pair<Codebook, CodeMatrix> train_darvq(const VectorDataset& train, std::size_t m,
                                            std::size_t k, const DAConfig& cfg);

// Online learning: one train_da pass over the batch, warm-started from the
// incoming codebook. Dictionaries are never reinitialized from scratch.
std::pair<Codebook, TrainReport> online_update(const Codebook& cb, const VectorDataset& batch,
                                               const DAConfig& cfg);

}  // namespace avq
