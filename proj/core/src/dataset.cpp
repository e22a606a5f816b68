#include "avq/dataset.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <unordered_set>

#include "avq/errors.hpp"
#include "avq/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "vector file readers assume a little-endian host");
static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559,
              "vector file readers assume IEEE-754 binary32");

namespace avq {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    return out;
}

// Reads one record header. Returns false on clean EOF, throws on a short read.
bool read_dim(std::ifstream& in, std::uint64_t offset, std::int32_t& dim) {
    in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
    if (in.gcount() == 0 && in.eof()) return false;
    if (in.gcount() != sizeof(dim)) {
        throw format_error("truncated record header", offset);
    }
    return true;
}

template <typename Record>
void read_vecs(const std::filesystem::path& path, std::size_t value_size,
               const Record& on_record) {
    std::ifstream in = open_input(path);
    std::uint64_t offset = 0;
    std::int32_t dim = 0;
    std::vector<char> payload;
    while (read_dim(in, offset, dim)) {
        if (dim <= 0) throw format_error("non-positive record dimension", offset);
        const std::size_t bytes = static_cast<std::size_t>(dim) * value_size;
        payload.resize(bytes);
        in.read(payload.data(), static_cast<std::streamsize>(bytes));
        if (static_cast<std::size_t>(in.gcount()) != bytes) {
            throw format_error("truncated record payload", offset);
        }
        on_record(static_cast<std::size_t>(dim), payload.data(), offset);
        offset += sizeof(dim) + bytes;
    }
}

}  // namespace

VectorDataset read_fvecs(const std::filesystem::path& path) {
    VectorDataset ds;
    read_vecs(path, sizeof(float), [&](std::size_t dim, const char* bytes, std::uint64_t offset) {
        if (ds.n == 0) {
            ds.d = dim;
        } else if (dim != ds.d) {
            throw format_error("record dimension mismatch", offset);
        }
        const std::size_t at = ds.data.size();
        ds.data.resize(at + dim);
        std::memcpy(ds.data.data() + at, bytes, dim * sizeof(float));
        ++ds.n;
    });
    return ds;
}

VectorDataset read_bvecs(const std::filesystem::path& path) {
    VectorDataset ds;
    read_vecs(path, 1, [&](std::size_t dim, const char* bytes, std::uint64_t offset) {
        if (ds.n == 0) {
            ds.d = dim;
        } else if (dim != ds.d) {
            throw format_error("record dimension mismatch", offset);
        }
        const auto* u = reinterpret_cast<const unsigned char*>(bytes);
        for (std::size_t j = 0; j < dim; ++j) {
            ds.data.push_back(static_cast<float>(u[j]));  // exact widening
        }
        ++ds.n;
    });
    return ds;
}

GroundTruth read_ivecs(const std::filesystem::path& path) {
    GroundTruth gt;
    read_vecs(path, sizeof(std::int32_t), [&](std::size_t dim, const char* bytes,
                                              std::uint64_t offset) {
        std::vector<std::int32_t> list(dim);
        std::memcpy(list.data(), bytes, dim * sizeof(std::int32_t));
        std::unordered_set<std::int32_t> seen;
        for (std::int32_t v : list) {
            if (v < 0) throw format_error("negative index in ground-truth record", offset);
            if (!seen.insert(v).second) {
                throw format_error("duplicate index in ground-truth record", offset);
            }
        }
        gt.lists.push_back(std::move(list));
        ++gt.n;
    });
    return gt;
}

void write_fvecs(const VectorDataset& ds, const std::filesystem::path& path) {
    if (ds.n > 0 && (ds.d == 0 || ds.d > static_cast<std::size_t>(
                                      std::numeric_limits<std::int32_t>::max()))) {
        throw std::invalid_argument("write_fvecs: dimension out of range");
    }
    std::ofstream out = open_output(path);
    const auto dim = static_cast<std::int32_t>(ds.d);
    for (std::size_t i = 0; i < ds.n; ++i) {
        out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
        out.write(reinterpret_cast<const char*>(ds.row(i).data()),
                  static_cast<std::streamsize>(ds.d * sizeof(float)));
    }
    if (!out) throw io_error("short write to " + path.string());
}

void write_ivecs(const GroundTruth& gt, const std::filesystem::path& path) {
    std::ofstream out = open_output(path);
    for (const auto& list : gt.lists) {
        const auto dim = static_cast<std::int32_t>(list.size());
        out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
        out.write(reinterpret_cast<const char*>(list.data()),
                  static_cast<std::streamsize>(list.size() * sizeof(std::int32_t)));
    }
    if (!out) throw io_error("short write to " + path.string());
}

namespace {

VectorDataset draw_means(std::size_t d, std::size_t n_components, double spread, Rng& rng) {
    VectorDataset means(n_components, d);
    for (std::size_t c = 0; c < n_components; ++c) {
        for (std::size_t j = 0; j < d; ++j) {
            means.row(c)[j] = static_cast<float>(spread * rng.normal());
        }
    }
    return means;
}

}  // namespace

GmmModel synthetic_model(std::size_t d, std::size_t n_components, std::uint64_t seed) {
    if (d < 1 || n_components < 1) {
        throw std::invalid_argument("synthetic_model: d and n_components must be >= 1");
    }
    GmmModel model;
    model.n_components = n_components;
    Rng rng(seed);
    model.means = draw_means(d, n_components, model.mean_spread, rng);
    return model;
}

VectorDataset gen_synthetic(std::size_t n, std::size_t d, std::size_t n_components,
                            std::uint64_t seed) {
    if (n < 1 || d < 1 || n_components < 1) {
        throw std::invalid_argument("gen_synthetic: n, d and n_components must be >= 1");
    }
    GmmModel model;
    model.n_components = n_components;
    Rng rng(seed);
    model.means = draw_means(d, n_components, model.mean_spread, rng);

    VectorDataset ds(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = rng.index(n_components);
        const float* mu = model.means.row(c).data();
        float* x = ds.row(i).data();
        for (std::size_t j = 0; j < d; ++j) {
            x[j] = static_cast<float>(mu[j] + model.component_std * rng.normal());
        }
    }
    return ds;
}

SplitResult split_train_query(const VectorDataset& ds, std::size_t n_train,
                              std::size_t n_query, std::uint64_t seed) {
    if (n_train > ds.n || n_query > ds.n - n_train) {
        throw std::invalid_argument("split_train_query: n_train + n_query exceeds n");
    }
    std::vector<std::uint32_t> idx(ds.n);
    for (std::size_t i = 0; i < ds.n; ++i) idx[i] = static_cast<std::uint32_t>(i);
    Rng rng(seed);
    for (std::size_t i = ds.n; i > 1; --i) {
        std::swap(idx[i - 1], idx[rng.index(i)]);
    }

    auto take = [&](std::size_t begin, std::size_t count) {
        VectorDataset out(count, ds.d);
        for (std::size_t i = 0; i < count; ++i) {
            auto src = ds.row(idx[begin + i]);
            std::copy(src.begin(), src.end(), out.row(i).begin());
        }
        return out;
    };

    SplitResult result;
    result.train = take(0, n_train);
    result.queries = take(n_train, n_query);
    result.database = take(n_train + n_query, ds.n - n_train - n_query);
    return result;
}

void check_finite(const VectorDataset& ds) {
    for (float v : ds.data) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("dataset contains non-finite components");
        }
    }
}

}  // namespace avq
