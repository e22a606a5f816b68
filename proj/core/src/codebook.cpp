#include "avq/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "avq/errors.hpp"
#include "avq/numerics.hpp"
#include "avq/parallel.hpp"

namespace avq {

double Codebook::dictionary_sq_norm(std::size_t dict) const {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += sq_norm(element(dict, j));
    return s;
}

namespace {

void check_codes_row(const Codebook& cb, std::span<const code_t> codes_row) {
    if (codes_row.size() != cb.m) {
        throw std::invalid_argument("codes row length does not match dictionary count");
    }
    for (code_t c : codes_row) {
        if (c >= cb.k) throw std::invalid_argument("code index out of range");
    }
}

void check_shapes(const VectorDataset& ds, const Codebook& cb, const CodeMatrix& cm) {
    if (ds.n != cm.n || ds.d != cb.d || cm.m != cb.m) {
        throw std::invalid_argument("dataset, codebook and code matrix shapes disagree");
    }
}

// Reconstruction into a caller-provided double accumulator; no validation.
void reconstruct_into(const Codebook& cb, const code_t* codes, double* acc) {
    std::fill(acc, acc + cb.d, 0.0);
    for (std::size_t dict = 0; dict < cb.m; ++dict) {
        const float* e = cb.element(dict, codes[dict]).data();
        for (std::size_t j = 0; j < cb.d; ++j) acc[j] += e[j];
    }
}

bool is_norm_descending(const Codebook& cb) {
    for (std::size_t dict = 0; dict + 1 < cb.m; ++dict) {
        if (cb.dictionary_sq_norm(dict) < cb.dictionary_sq_norm(dict + 1)) return false;
    }
    return true;
}

std::vector<std::size_t> norm_order(const Codebook& cb) {
    std::vector<double> norms(cb.m);
    for (std::size_t dict = 0; dict < cb.m; ++dict) norms[dict] = cb.dictionary_sq_norm(dict);
    std::vector<std::size_t> order(cb.m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });
    return order;
}

void apply_order(Codebook& cb, const std::vector<std::size_t>& order) {
    std::vector<float> elements(cb.elements.size());
    for (std::size_t dst = 0; dst < cb.m; ++dst) {
        auto src = cb.dictionary(order[dst]);
        std::copy(src.begin(), src.end(), elements.begin() + dst * cb.k * cb.d);
    }
    cb.elements = std::move(elements);
    cb.norm_sorted = true;
}

}  // namespace

std::vector<float> reconstruct(const Codebook& cb, std::span<const code_t> codes_row) {
    check_codes_row(cb, codes_row);
    std::vector<double> acc(cb.d);
    reconstruct_into(cb, codes_row.data(), acc.data());
    std::vector<float> out(cb.d);
    for (std::size_t j = 0; j < cb.d; ++j) out[j] = static_cast<float>(acc[j]);
    return out;
}

double quantization_error(const VectorDataset& ds, const Codebook& cb, const CodeMatrix& cm) {
    check_shapes(ds, cb, cm);
    if (ds.n == 0) return 0.0;

    std::vector<double> partial(chunk_count(ds.n), 0.0);
    parallel_chunks(ds.n, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        std::vector<double> acc(cb.d);
        double sum = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
            reconstruct_into(cb, cm.row(i).data(), acc.data());
            const float* x = ds.row(i).data();
            double err = 0.0;
            for (std::size_t j = 0; j < cb.d; ++j) {
                const double diff = x[j] - acc[j];
                err += diff * diff;
            }
            sum += err;
        }
        partial[chunk] = sum;
    });

    double total = 0.0;
    for (double p : partial) total += p;
    return total / static_cast<double>(ds.n);
}

VectorDataset residuals(const VectorDataset& ds, const Codebook& cb, const CodeMatrix& cm) {
    check_shapes(ds, cb, cm);
    VectorDataset out(ds.n, ds.d);
    parallel_for(ds.n, [&](std::size_t i) {
        std::vector<double> acc(cb.d);
        reconstruct_into(cb, cm.row(i).data(), acc.data());
        const float* x = ds.row(i).data();
        float* r = out.row(i).data();
        for (std::size_t j = 0; j < cb.d; ++j) {
            r[j] = static_cast<float>(static_cast<double>(x[j]) - acc[j]);
        }
    });
    return out;
}

double entropy(const CodeMatrix& cm, std::size_t dict) {
    if (cm.n == 0) throw std::invalid_argument("entropy: empty code matrix");
    if (dict >= cm.m) throw std::invalid_argument("entropy: dictionary index out of range");

    code_t max_code = 0;
    for (std::size_t i = 0; i < cm.n; ++i) max_code = std::max(max_code, cm.row(i)[dict]);
    std::vector<std::size_t> counts(static_cast<std::size_t>(max_code) + 1, 0);
    for (std::size_t i = 0; i < cm.n; ++i) ++counts[cm.row(i)[dict]];

    double bits = 0.0;
    const double n = static_cast<double>(cm.n);
    for (std::size_t count : counts) {
        if (count == 0) continue;
        const double p = static_cast<double>(count) / n;
        bits -= p * std::log2(p);
    }
    return bits;
}

double mutual_information(const CodeMatrix& cm, std::size_t i, std::size_t j) {
    if (i == j) {
        throw std::invalid_argument("mutual_information: i == j (self-MI is entropy)");
    }
    if (cm.n == 0) throw std::invalid_argument("mutual_information: empty code matrix");
    if (i >= cm.m || j >= cm.m) {
        throw std::invalid_argument("mutual_information: dictionary index out of range");
    }

    code_t max_i = 0;
    code_t max_j = 0;
    for (std::size_t r = 0; r < cm.n; ++r) {
        max_i = std::max(max_i, cm.row(r)[i]);
        max_j = std::max(max_j, cm.row(r)[j]);
    }
    const std::size_t ki = static_cast<std::size_t>(max_i) + 1;
    const std::size_t kj = static_cast<std::size_t>(max_j) + 1;

    std::vector<std::size_t> joint(ki * kj, 0);
    std::vector<std::size_t> pi(ki, 0);
    std::vector<std::size_t> pj(kj, 0);
    for (std::size_t r = 0; r < cm.n; ++r) {
        const code_t ci = cm.row(r)[i];
        const code_t cj = cm.row(r)[j];
        ++joint[static_cast<std::size_t>(ci) * kj + cj];
        ++pi[ci];
        ++pj[cj];
    }

    const double n = static_cast<double>(cm.n);
    double bits = 0.0;
    for (std::size_t a = 0; a < ki; ++a) {
        for (std::size_t b = 0; b < kj; ++b) {
            const std::size_t c = joint[a * kj + b];
            if (c == 0) continue;
            const double p_ab = static_cast<double>(c) / n;
            const double p_a = static_cast<double>(pi[a]) / n;
            const double p_b = static_cast<double>(pj[b]) / n;
            bits += p_ab * std::log2(p_ab / (p_a * p_b));
        }
    }
    return std::max(bits, 0.0);
}

void sort_by_norm(Codebook& cb) {
    apply_order(cb, norm_order(cb));
}

void sort_by_norm(Codebook& cb, CodeMatrix& cm) {
    if (cm.m != cb.m) throw std::invalid_argument("sort_by_norm: code matrix width mismatch");
    const std::vector<std::size_t> order = norm_order(cb);
    apply_order(cb, order);

    std::vector<code_t> scratch(cb.m);
    for (std::size_t i = 0; i < cm.n; ++i) {
        auto row = cm.row(i);
        for (std::size_t dst = 0; dst < cb.m; ++dst) scratch[dst] = row[order[dst]];
        std::copy(scratch.begin(), scratch.end(), row.begin());
    }
}

CrossTermTable build_cross_terms(const Codebook& cb) {
    CrossTermTable table;
    table.m = cb.m;
    table.k = cb.k;
    table.values.assign(cb.m * cb.m * cb.k * cb.k, 0.0f);

    // Fill block (a, b) for a < b and mirror the transpose into (b, a) so the
    // table is exactly symmetric.
    for (std::size_t a = 0; a < cb.m; ++a) {
        for (std::size_t b = a + 1; b < cb.m; ++b) {
            float* ab = table.values.data() + (a * cb.m + b) * cb.k * cb.k;
            float* ba = table.values.data() + (b * cb.m + a) * cb.k * cb.k;
            parallel_for(cb.k, [&](std::size_t i) {
                const auto ei = cb.element(a, i);
                for (std::size_t j = 0; j < cb.k; ++j) {
                    const float v = static_cast<float>(dot(ei, cb.element(b, j)));
                    ab[i * cb.k + j] = v;
                    ba[j * cb.k + i] = v;
                }
            });
        }
    }
    return table;
}

double cross_term_of(std::span<const code_t> codes_row, const CrossTermTable& table) {
    if (codes_row.size() != table.m) {
        throw std::invalid_argument("cross_term_of: codes row length mismatch");
    }
    double sum = 0.0;
    for (std::size_t a = 0; a < table.m; ++a) {
        for (std::size_t b = a + 1; b < table.m; ++b) {
            sum += 2.0 * static_cast<double>(table.at(a, b, codes_row[a], codes_row[b]));
        }
    }
    return sum;
}

std::string codebook_fingerprint(const Codebook& cb) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](const void* data, std::size_t bytes) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < bytes; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    const std::uint32_t dims[3] = {static_cast<std::uint32_t>(cb.m),
                                   static_cast<std::uint32_t>(cb.k),
                                   static_cast<std::uint32_t>(cb.d)};
    mix(dims, sizeof(dims));
    mix(cb.elements.data(), cb.elements.size() * sizeof(float));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

constexpr char kCodebookMagic[4] = {'A', 'V', 'Q', '1'};
constexpr char kEncodedMagic[4] = {'A', 'V', 'Q', 'E'};

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::ifstream& in, const std::filesystem::path& path,
                       std::uint64_t offset) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (in.gcount() != sizeof(v)) {
        throw format_error("truncated header in " + path.string(), offset);
    }
    return v;
}

void read_magic(std::ifstream& in, const char (&expect)[4],
                const std::filesystem::path& path) {
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, expect, 4) != 0) {
        throw format_error("bad magic in " + path.string(), 0);
    }
}

}  // namespace

void save_codebook(const Codebook& cb, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    out.write(kCodebookMagic, 4);
    write_u32(out, static_cast<std::uint32_t>(cb.m));
    write_u32(out, static_cast<std::uint32_t>(cb.k));
    write_u32(out, static_cast<std::uint32_t>(cb.d));
    out.write(reinterpret_cast<const char*>(cb.elements.data()),
              static_cast<std::streamsize>(cb.elements.size() * sizeof(float)));
    if (!out) throw io_error("short write to " + path.string());
}

Codebook load_codebook(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    read_magic(in, kCodebookMagic, path);
    const std::uint32_t m = read_u32(in, path, 4);
    const std::uint32_t k = read_u32(in, path, 8);
    const std::uint32_t d = read_u32(in, path, 12);
    if (m == 0 || k == 0 || d == 0) {
        throw format_error("zero dimension in codebook header of " + path.string(), 4);
    }
    Codebook cb(m, k, d);
    const std::size_t bytes = cb.elements.size() * sizeof(float);
    in.read(reinterpret_cast<char*>(cb.elements.data()),
            static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in.gcount()) != bytes) {
        throw format_error("truncated codebook payload in " + path.string(), 16);
    }
    in.peek();
    if (!in.eof()) {
        throw format_error("trailing bytes after codebook payload in " + path.string(),
                           16 + bytes);
    }
    cb.norm_sorted = is_norm_descending(cb);
    return cb;
}

void save_encoded(const EncodedDatabase& db, const std::filesystem::path& path) {
    const CodeMatrix& cm = db.codes;
    if (db.cross_terms.size() != cm.n) {
        throw std::invalid_argument("save_encoded: cross-term count mismatch");
    }
    if (db.k == 0 || db.k > 256) {
        throw std::invalid_argument("save_encoded: one-byte codes require 1 <= k <= 256");
    }
    for (code_t c : cm.codes) {
        if (c >= db.k) throw std::invalid_argument("save_encoded: code exceeds k");
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    out.write(kEncodedMagic, 4);
    write_u32(out, static_cast<std::uint32_t>(cm.n));
    write_u32(out, static_cast<std::uint32_t>(cm.m));
    write_u32(out, static_cast<std::uint32_t>(db.k));
    std::vector<unsigned char> bytes(cm.codes.size());
    for (std::size_t i = 0; i < cm.codes.size(); ++i) {
        bytes[i] = static_cast<unsigned char>(cm.codes[i]);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.write(reinterpret_cast<const char*>(db.cross_terms.data()),
              static_cast<std::streamsize>(db.cross_terms.size() * sizeof(float)));
    if (!out) throw io_error("short write to " + path.string());
}

EncodedDatabase load_encoded(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    read_magic(in, kEncodedMagic, path);
    const std::uint32_t n = read_u32(in, path, 4);
    const std::uint32_t m = read_u32(in, path, 8);
    const std::uint32_t k = read_u32(in, path, 12);
    if (m == 0 || k == 0 || k > 256) {
        throw format_error("bad encoded-database header in " + path.string(), 8);
    }

    EncodedDatabase db;
    db.codes = CodeMatrix(n, m);
    db.k = k;
    std::vector<unsigned char> bytes(static_cast<std::size_t>(n) * m);
    in.read(reinterpret_cast<char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
        throw format_error("truncated code payload in " + path.string(), 16);
    }
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        if (bytes[i] >= k) {
            throw format_error("code out of range in " + path.string(), 16 + i);
        }
        db.codes.codes[i] = bytes[i];
    }
    db.cross_terms.resize(n);
    const std::size_t ct_bytes = db.cross_terms.size() * sizeof(float);
    in.read(reinterpret_cast<char*>(db.cross_terms.data()),
            static_cast<std::streamsize>(ct_bytes));
    if (static_cast<std::size_t>(in.gcount()) != ct_bytes) {
        throw format_error("truncated cross-term payload in " + path.string(),
                           16 + bytes.size());
    }
    return db;
}

}  // namespace avq
