#include "avq/search.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <queue>
#include <stdexcept>

#include "avq/errors.hpp"
#include "avq/numerics.hpp"
#include "avq/parallel.hpp"

namespace avq {

namespace {

// Bounded selection of the R smallest (score, index) pairs; the pair ordering
// makes ties resolve to the lower database index.
class TopR {
  public:
    explicit TopR(std::size_t r) : r_(r) {}

    void offer(double score, std::uint32_t index) {
        if (heap_.size() < r_) {
            heap_.emplace(score, index);
        } else if (std::pair<double, std::uint32_t>(score, index) < heap_.top()) {
            heap_.pop();
            heap_.emplace(score, index);
        }
    }

    std::vector<SearchHit> take() {
        std::vector<SearchHit> hits(heap_.size());
        for (std::size_t i = heap_.size(); i-- > 0;) {
            hits[i] = {heap_.top().second, heap_.top().first};
            heap_.pop();
        }
        return hits;
    }

  private:
    std::size_t r_;
    std::priority_queue<std::pair<double, std::uint32_t>> heap_;
};

}  // namespace

AdcTables build_adc_tables(std::span<const float> q, const Codebook& cb) {
    if (q.size() != cb.d) throw std::invalid_argument("build_adc_tables: dimension mismatch");
    AdcTables tables;
    tables.m = cb.m;
    tables.k = cb.k;
    tables.dist.resize(cb.m * cb.k);
    tables.query_sq_norm = sq_norm(q);
    for (std::size_t dict = 0; dict < cb.m; ++dict) {
        for (std::size_t j = 0; j < cb.k; ++j) {
            tables.dist[dict * cb.k + j] = static_cast<float>(
                detail::sq_l2_unchecked(q.data(), cb.element(dict, j).data(), cb.d));
        }
    }
    return tables;
}

double adc_score(const AdcTables& tables, std::span<const code_t> codes_row,
                 double cross_term) {
    if (codes_row.size() != tables.m) {
        throw std::invalid_argument("adc_score: codes row length mismatch");
    }
    double sum = 0.0;
    for (std::size_t dict = 0; dict < tables.m; ++dict) {
        sum += tables.at(dict, codes_row[dict]);
    }
    return sum - static_cast<double>(tables.m - 1) * tables.query_sq_norm + cross_term;
}

SearchResult adc_scan(const VectorDataset& queries, const EncodedDatabase& db,
                      const Codebook& cb, std::size_t top_r) {
    if (queries.d != cb.d) throw std::invalid_argument("adc_scan: dimension mismatch");
    if (db.codes.m != cb.m) throw std::invalid_argument("adc_scan: code width mismatch");
    if (top_r < 1) throw std::invalid_argument("adc_scan: top_r must be >= 1");

    SearchResult result;
    result.per_query.resize(queries.n);
    parallel_for(queries.n, [&](std::size_t qi) {
        const AdcTables tables = build_adc_tables(queries.row(qi), cb);
        // The -(M-1)||q||^2 constant shifts every score equally, so ranking
        // runs without it and it is added back when hits are emitted.
        TopR top(top_r);
        for (std::size_t i = 0; i < db.codes.n; ++i) {
            const code_t* codes = db.codes.row(i).data();
            double sum = 0.0;
            for (std::size_t dict = 0; dict < tables.m; ++dict) {
                sum += tables.at(dict, codes[dict]);
            }
            top.offer(sum + db.cross_terms[i], static_cast<std::uint32_t>(i));
        }
        auto hits = top.take();
        const double shift =
            static_cast<double>(tables.m - 1) * tables.query_sq_norm;
        for (auto& hit : hits) hit.score -= shift;
        result.per_query[qi] = std::move(hits);
    });
    return result;
}

SearchResult exact_scan(const VectorDataset& queries, const VectorDataset& database,
                        std::size_t top_r) {
    if (queries.d != database.d) throw std::invalid_argument("exact_scan: dimension mismatch");
    if (top_r < 1) throw std::invalid_argument("exact_scan: top_r must be >= 1");

    SearchResult result;
    result.per_query.resize(queries.n);
    parallel_for(queries.n, [&](std::size_t qi) {
        const float* q = queries.row(qi).data();
        TopR top(top_r);
        for (std::size_t i = 0; i < database.n; ++i) {
            top.offer(detail::sq_l2_unchecked(q, database.row(i).data(), database.d),
                      static_cast<std::uint32_t>(i));
        }
        result.per_query[qi] = top.take();
    });
    return result;
}

GroundTruth ground_truth_from(const SearchResult& exact) {
    GroundTruth gt;
    gt.n = exact.per_query.size();
    gt.lists.resize(gt.n);
    for (std::size_t qi = 0; qi < gt.n; ++qi) {
        gt.lists[qi].reserve(exact.per_query[qi].size());
        for (const SearchHit& hit : exact.per_query[qi]) {
            gt.lists[qi].push_back(static_cast<std::int32_t>(hit.index));
        }
    }
    return gt;
}

double recall_at_r(const SearchResult& results, const GroundTruth& gt, std::size_t r) {
    if (r < 1) throw std::invalid_argument("recall_at_r: r must be >= 1");
    if (results.per_query.size() != gt.n) {
        throw std::invalid_argument("recall_at_r: query count mismatch");
    }
    if (gt.n == 0) return 0.0;

    std::size_t found = 0;
    for (std::size_t qi = 0; qi < gt.n; ++qi) {
        if (gt.lists[qi].empty()) {
            throw std::invalid_argument("recall_at_r: empty ground-truth list");
        }
        const auto nn = static_cast<std::uint32_t>(gt.lists[qi][0]);
        const auto& hits = results.per_query[qi];
        const std::size_t limit = std::min(r, hits.size());
        for (std::size_t i = 0; i < limit; ++i) {
            if (hits[i].index == nn) {
                ++found;
                break;
            }
        }
    }
    return static_cast<double>(found) / static_cast<double>(gt.n);
}

void write_results_csv(const SearchResult& results, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    out << "query_id,rank,db_index,score\n";
    char buf[64];
    for (std::size_t qi = 0; qi < results.per_query.size(); ++qi) {
        const auto& hits = results.per_query[qi];
        for (std::size_t rank = 0; rank < hits.size(); ++rank) {
            std::snprintf(buf, sizeof(buf), "%.9g", hits[rank].score);
            out << qi << ',' << rank + 1 << ',' << hits[rank].index << ',' << buf << '\n';
        }
    }
    if (!out) throw io_error("short write to " + path.string());
}

}  // namespace avq
