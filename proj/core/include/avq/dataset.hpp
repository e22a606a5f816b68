#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace avq {

// Row-major (n x d) float matrix; the payload for training, database and
// query sets alike. Components are stored as 32-bit floats, reductions over
// them are carried out in 64-bit.
struct VectorDataset {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<float> data;

    VectorDataset() = default;
    VectorDataset(std::size_t n_, std::size_t d_)
        : n(n_), d(d_), data(n_ * d_, 0.0f) {}

    std::span<const float> row(std::size_t i) const { return {data.data() + i * d, d}; }
    std::span<float> row(std::size_t i) { return {data.data() + i * d, d}; }
    bool empty() const { return n == 0; }
};

// Exact nearest neighbors per query, best first.
struct GroundTruth {
    std::size_t n = 0;
    std::vector<std::vector<std::int32_t>> lists;
};

// Binary vector files: repeated records, each a little-endian int32 dimension
// followed by the payload (f32 for fvecs, u8 for bvecs, i32 for ivecs).
// No header, no padding.
VectorDataset read_fvecs(const std::filesystem::path& path);
VectorDataset read_bvecs(const std::filesystem::path& path);
GroundTruth read_ivecs(const std::filesystem::path& path);
void write_fvecs(const VectorDataset& ds, const std::filesystem::path& path);
void write_ivecs(const GroundTruth& gt, const std::filesystem::path& path);

// The Gaussian-mixture model behind gen_synthetic, exposed so callers can
// reason about expected sample moments.
struct GmmModel {
    std::size_t n_components = 0;
    double component_std = 1.0;
    double mean_spread = 4.0;
    VectorDataset means;  // n_components x d
};

GmmModel synthetic_model(std::size_t d, std::size_t n_components, std::uint64_t seed);

// Deterministic mixture sample; a pure function of its arguments.
VectorDataset gen_synthetic(std::size_t n, std::size_t d, std::size_t n_components,
                            std::uint64_t seed);

struct SplitResult {
    VectorDataset train;
    VectorDataset database;
    VectorDataset queries;
};

// Seeded disjoint partition: n_train rows to train, n_query rows to queries,
// the remainder to database.
SplitResult split_train_query(const VectorDataset& ds, std::size_t n_train,
                              std::size_t n_query, std::uint64_t seed);

// Throws std::invalid_argument when any component is NaN or infinite.
void check_finite(const VectorDataset& ds);

}  // namespace avq
