#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "avq/codebook.hpp"

namespace avq {

// Per-query lookup tables: entry (m, j) = ||q - c_m(j)||^2.
struct AdcTables {
    std::size_t m = 0;
    std::size_t k = 0;
    std::vector<float> dist;
    double query_sq_norm = 0.0;

    float at(std::size_t dict, std::size_t j) const { return dist[dict * k + j]; }
};

AdcTables build_adc_tables(std::span<const float> q, const Codebook& cb);

// sum_m table(m, i_m) - (M-1)||q||^2 + cross_term; a true squared distance to
// the reconstruction up to float rounding.
double adc_score(const AdcTables& tables, std::span<const code_t> codes_row,
                 double cross_term);

struct SearchHit {
    std::uint32_t index;
    double score;
};

// Per query: top-R hits ordered by ascending score, ties by lower index.
struct SearchResult {
    std::vector<std::vector<SearchHit>> per_query;
};

// Exact top-R under adc_score via a bounded heap; parallel over queries.
SearchResult adc_scan(const VectorDataset& queries, const EncodedDatabase& db,
                      const Codebook& cb, std::size_t top_r);

// Exact Euclidean top-R; the ground-truth oracle.
SearchResult exact_scan(const VectorDataset& queries, const VectorDataset& database,
                        std::size_t top_r);

GroundTruth ground_truth_from(const SearchResult& exact);

// Fraction of queries whose top-R contains the true nearest neighbor
// (the first ground-truth entry).
double recall_at_r(const SearchResult& results, const GroundTruth& gt, std::size_t r);

// CSV rows: query_id,rank,db_index,score.
void write_results_csv(const SearchResult& results, const std::filesystem::path& path);

}  // namespace avq
