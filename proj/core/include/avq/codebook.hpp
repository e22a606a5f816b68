#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "avq/dataset.hpp"

namespace avq {

using code_t = std::uint16_t;

// M dictionaries of K elements each, all living in the full d-dimensional
// space. Element (m, j) is the j-th vector of dictionary m.
struct Codebook {
    std::size_t m = 0;
    std::size_t k = 0;
    std::size_t d = 0;
    std::vector<float> elements;  // ((dict * k) + element) * d
    // True when dictionaries are ordered by non-increasing total squared
    // norm. Set by sort_by_norm, cleared by mutations.
    bool norm_sorted = false;

    Codebook() = default;
    Codebook(std::size_t m_, std::size_t k_, std::size_t d_)
        : m(m_), k(k_), d(d_), elements(m_ * k_ * d_, 0.0f) {}

    std::span<const float> element(std::size_t dict, std::size_t j) const {
        return {elements.data() + (dict * k + j) * d, d};
    }
    std::span<float> element(std::size_t dict, std::size_t j) {
        return {elements.data() + (dict * k + j) * d, d};
    }
    std::span<const float> dictionary(std::size_t dict) const {
        return {elements.data() + dict * k * d, k * d};
    }
    std::span<float> dictionary(std::size_t dict) {
        return {elements.data() + dict * k * d, k * d};
    }

    double dictionary_sq_norm(std::size_t dict) const;
};

// n x m table of per-vector element indices.
struct CodeMatrix {
    std::size_t n = 0;
    std::size_t m = 0;
    std::vector<code_t> codes;

    CodeMatrix() = default;
    CodeMatrix(std::size_t n_, std::size_t m_) : n(n_), m(m_), codes(n_ * m_, 0) {}

    std::span<const code_t> row(std::size_t i) const { return {codes.data() + i * m, m}; }
    std::span<code_t> row(std::size_t i) { return {codes.data() + i * m, m}; }
};

// Inner products between all element pairs from distinct dictionaries.
// Block (a, b) is K x K with entry (i, j) = <c_a(i), c_b(j)>; diagonal blocks
// are zero and unused.
struct CrossTermTable {
    std::size_t m = 0;
    std::size_t k = 0;
    std::vector<float> values;

    float at(std::size_t a, std::size_t b, std::size_t i, std::size_t j) const {
        return values[((a * m + b) * k + i) * k + j];
    }
    // Contiguous row <c_a(i), c_b(.)>, K entries.
    const float* block_row(std::size_t a, std::size_t b, std::size_t i) const {
        return values.data() + ((a * m + b) * k + i) * k;
    }
};

// Codes plus the stored pairwise cross term required by ADC.
struct EncodedDatabase {
    CodeMatrix codes;
    std::size_t k = 0;               // elements per dictionary
    std::vector<float> cross_terms;  // one per vector
    std::string codebook_id;         // provenance fingerprint, not serialized
};

std::vector<float> reconstruct(const Codebook& cb, std::span<const code_t> codes_row);

// Mean squared residual per vector.
double quantization_error(const VectorDataset& ds, const Codebook& cb, const CodeMatrix& cm);

// Row-wise e_x = x - reconstruct(codes).
VectorDataset residuals(const VectorDataset& ds, const Codebook& cb, const CodeMatrix& cm);

// Shannon entropy (bits) of the empirical code distribution in column dict.
double entropy(const CodeMatrix& cm, std::size_t dict);

// Plug-in mutual information (bits) between two code columns; i == j is an
// error (self-MI is entropy).
double mutual_information(const CodeMatrix& cm, std::size_t i, std::size_t j);

// Reorders dictionaries by non-increasing total squared norm, permuting code
// columns identically; reconstructions are unchanged.
void sort_by_norm(Codebook& cb, CodeMatrix& cm);
void sort_by_norm(Codebook& cb);

CrossTermTable build_cross_terms(const Codebook& cb);

// Sum over ordered pairs (i, j), i != j, of <c_i(codes[i]), c_j(codes[j])>.
double cross_term_of(std::span<const code_t> codes_row, const CrossTermTable& table);

// FNV-1a content fingerprint, hex.
std::string codebook_fingerprint(const Codebook& cb);

// Codebook file: magic "AVQ1", little-endian u32 m, k, d, then m*k*d
// little-endian f32 elements.
void save_codebook(const Codebook& cb, const std::filesystem::path& path);
Codebook load_codebook(const std::filesystem::path& path);

// Encoded-database file: magic "AVQE", u32 n, m, k, then n*m one-byte codes
// (requires k <= 256), then n little-endian f32 cross terms.
void save_encoded(const EncodedDatabase& db, const std::filesystem::path& path);
EncodedDatabase load_encoded(const std::filesystem::path& path);

}  // namespace avq
