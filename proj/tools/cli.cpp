#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

#include "avq/codebook.hpp"
#include "avq/dataset.hpp"
#include "avq/encoder.hpp"
#include "avq/errors.hpp"
#include "avq/parallel.hpp"
#include "avq/search.hpp"
#include "avq/trainers.hpp"

namespace fs = std::filesystem;

namespace avq::cli {

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Relative inputs that do not exist are retried under $ANN_DATA_DIR.
fs::path resolve_input(const std::string& path) {
    fs::path p(path);
    if (fs::exists(p)) return p;
    if (p.is_relative()) {
        if (const char* root = std::getenv("ANN_DATA_DIR")) {
            fs::path alt = fs::path(root) / p;
            if (fs::exists(alt)) return alt;
        }
    }
    return p;
}

// Outputs go through a temp sibling and a rename so failed runs leave no
// partial artifacts.
void write_atomic(const fs::path& path, const std::function<void(const fs::path&)>& writer) {
    fs::path tmp = path;
    tmp += ".tmp";
    writer(tmp);
    fs::rename(tmp, path);
}

VectorDataset load_vectors(const std::string& path) {
    const fs::path p = resolve_input(path);
    if (p.extension() == ".bvecs") return read_bvecs(p);
    return read_fvecs(p);
}

std::uint64_t mix_seed(std::uint64_t seed, std::size_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

struct TrainFlags {
    std::string method = "da";
    std::string train_path;
    std::string init_path;
    std::string out_path;
    std::string report_path;
    std::string pick = "random";
    std::size_t m = 8;
    std::size_t k = 256;
    std::size_t beam = 10;
    std::size_t iters = 0;
    std::size_t subspace_steps = 5;
    std::size_t kmeans_iters = 100;
    double kmeans_tol = 1e-4;
    double quit_tol = 1e-5;
    std::uint64_t seed = 0;
};

void validate_mk(std::size_t m, std::size_t k) {
    if (m < 1) throw UsageError("m must be >= 1");
    if (k < 1 || k > 256) throw UsageError("k must be in [1, 256] (one-byte codes)");
}

DAConfig da_config(const TrainFlags& f) {
    DAConfig cfg;
    cfg.iters = f.iters;
    cfg.beam_width = f.beam;
    cfg.subspace_steps = f.subspace_steps;
    cfg.seed = f.seed;
    cfg.quit_tol = f.quit_tol;
    cfg.pick = f.pick == "round-robin" ? DictionaryPick::round_robin : DictionaryPick::random;
    cfg.kmeans.max_iters = f.kmeans_iters;
    cfg.kmeans.tol = f.kmeans_tol;
    cfg.kmeans.seed = f.seed;
    return cfg;
}

int cmd_gen(const std::string& out, std::size_t n, std::size_t d, std::size_t components,
            std::uint64_t seed, std::size_t n_train, std::size_t n_query,
            bool queries_from_base) {
    if (out.empty()) throw UsageError("gen: --out is required");
    const VectorDataset data = gen_synthetic(n, d, components, seed);

    if (n_train == 0 && n_query == 0) {
        write_atomic(out, [&](const fs::path& p) { write_fvecs(data, p); });
        std::cout << "[gen] wrote " << out << " (" << n << " x " << d << ")\n";
        return 0;
    }

    const std::size_t held_out = queries_from_base ? 0 : n_query;
    SplitResult split = split_train_query(data, n_train, held_out, seed);
    VectorDataset queries = std::move(split.queries);
    if (queries_from_base) {
        // Query mode 2: queries are copies of database rows.
        if (n_query > split.database.n) throw UsageError("gen: --n-query exceeds base size");
        queries = VectorDataset(n_query, d);
        for (std::size_t i = 0; i < n_query; ++i) {
            auto src = split.database.row(i);
            std::copy(src.begin(), src.end(), queries.row(i).begin());
        }
    }

    const std::string train_path = out + "_train.fvecs";
    const std::string base_path = out + "_base.fvecs";
    const std::string query_path = out + "_query.fvecs";
    write_atomic(train_path, [&](const fs::path& p) { write_fvecs(split.train, p); });
    write_atomic(base_path, [&](const fs::path& p) { write_fvecs(split.database, p); });
    write_atomic(query_path, [&](const fs::path& p) { write_fvecs(queries, p); });
    std::cout << "[gen] wrote " << train_path << " (" << split.train.n << "), " << base_path
              << " (" << split.database.n << "), " << query_path << " (" << queries.n
              << ")\n";
    return 0;
}

int cmd_train(const TrainFlags& f) {
    validate_mk(f.m, f.k);
    if (f.train_path.empty() || f.out_path.empty()) {
        throw UsageError("train: --train and --out are required");
    }
    if (f.method != "pq" && f.method != "rvq" && f.method != "da" && f.method != "darvq") {
        throw UsageError("train: unknown method " + f.method);
    }
    const VectorDataset train = load_vectors(f.train_path);

    KMeansConfig km;
    km.max_iters = f.kmeans_iters;
    km.tol = f.kmeans_tol;
    km.seed = f.seed;

    Codebook cb;
    TrainReport report;
    std::string init_tag;

    if (f.method == "pq") {
        cb = train_pq(train, f.m, f.k, km);
        EncodeOptions opt;
        opt.method = EncodeMethod::pq;
        const EncodedDatabase db = encode_dataset(train, cb, opt);
        report.initial.error = quantization_error(train, cb, db.codes);
        for (std::size_t dict = 0; dict < cb.m; ++dict) {
            report.initial.entropy.push_back(entropy(db.codes, dict));
        }
        report.final_error = report.initial.error;
    } else if (f.method == "rvq" || f.method == "darvq") {
        auto [trained, cm] = f.method == "rvq" ? train_rvq(train, f.m, f.k, km)
                                               : train_darvq(train, f.m, f.k, da_config(f));
        cb = std::move(trained);
        report.initial.error = quantization_error(train, cb, cm);
        for (std::size_t dict = 0; dict < cb.m; ++dict) {
            report.initial.entropy.push_back(entropy(cm, dict));
        }
        report.final_error = report.initial.error;
        sort_by_norm(cb);
    } else if (f.method == "da") {
        Codebook init;
        if (!f.init_path.empty()) {
            init = load_codebook(resolve_input(f.init_path));
            init_tag = "file";
        } else {
            init = train_darvq(train, f.m, f.k, da_config(f)).first;
            init_tag = "darvq";
        }
        DAResult result = train_da(train, std::move(init), da_config(f));
        cb = std::move(result.codebook);
        report = std::move(result.report);
    } else {
        throw UsageError("train: unknown method " + f.method);
    }

    write_atomic(f.out_path, [&](const fs::path& p) { save_codebook(cb, p); });
    if (!f.report_path.empty()) {
        write_atomic(f.report_path, [&](const fs::path& p) {
            std::ofstream out(p, std::ios::trunc);
            if (!out) throw io_error("cannot open " + p.string() + " for writing");
            out << "# method=" << f.method;
            if (!init_tag.empty()) out << " init=" << init_tag;
            out << " m=" << f.m << " k=" << f.k << " seed=" << f.seed << '\n';
            write_report(report, out);
        });
    }
    std::printf("[train] method=%s m=%zu k=%zu error=%.6g -> %s\n", f.method.c_str(), f.m,
                f.k, report.final_error, f.out_path.c_str());
    return 0;
}

int cmd_encode(const std::string& codebook_path, const std::string& base_path,
               const std::string& method, std::size_t beam, std::size_t icm_rounds,
               const std::string& out) {
    if (codebook_path.empty() || base_path.empty() || out.empty()) {
        throw UsageError("encode: --codebook, --base and --out are required");
    }
    EncodeOptions opt;
    opt.beam_width = beam;
    opt.icm_rounds = icm_rounds;
    if (method == "beam") {
        opt.method = EncodeMethod::beam;
    } else if (method == "greedy") {
        opt.method = EncodeMethod::greedy;
    } else if (method == "icm") {
        opt.method = EncodeMethod::icm;
    } else if (method == "pq") {
        opt.method = EncodeMethod::pq;
    } else if (method == "exhaustive") {
        opt.method = EncodeMethod::exhaustive;
    } else {
        throw UsageError("encode: unknown method " + method);
    }

    const Codebook cb = load_codebook(resolve_input(codebook_path));
    const VectorDataset base = load_vectors(base_path);
    const EncodedDatabase db = encode_dataset(base, cb, opt);
    write_atomic(out, [&](const fs::path& p) { save_encoded(db, p); });
    std::printf("[encode] method=%s n=%zu error=%.6g -> %s\n", method.c_str(), base.n,
                quantization_error(base, cb, db.codes), out.c_str());
    return 0;
}

int cmd_eval(const std::string& codebook_path, const std::string& encoded_path,
             const std::string& base_path, const std::string& query_path,
             const std::string& gt_path, const std::string& out,
             const std::string& results_path, std::size_t r_max) {
    if (codebook_path.empty() || encoded_path.empty() || base_path.empty() ||
        query_path.empty() || out.empty()) {
        throw UsageError("eval: --codebook, --encoded, --base, --query, --out are required");
    }
    const Codebook cb = load_codebook(resolve_input(codebook_path));
    const EncodedDatabase db = load_encoded(resolve_input(encoded_path));
    const VectorDataset base = load_vectors(base_path);
    const VectorDataset queries = load_vectors(query_path);
    if (db.codes.n != base.n) {
        throw std::invalid_argument("eval: encoded database and base size mismatch");
    }

    GroundTruth gt;
    if (!gt_path.empty()) {
        gt = read_ivecs(resolve_input(gt_path));
    } else {
        fs::path cache = resolve_input(query_path);
        cache += ".gt.ivecs";
        if (fs::exists(cache)) {
            gt = read_ivecs(cache);
        } else {
            const std::size_t depth = std::min<std::size_t>(100, base.n);
            gt = ground_truth_from(exact_scan(queries, base, depth));
            try {
                write_atomic(cache, [&](const fs::path& p) { write_ivecs(gt, p); });
            } catch (const std::exception& e) {
                std::cerr << "[eval] warning: could not cache ground truth: " << e.what()
                          << '\n';
            }
        }
    }
    if (gt.n != queries.n) throw std::invalid_argument("eval: ground truth count mismatch");
    for (const auto& list : gt.lists) {
        for (std::int32_t idx : list) {
            if (idx < 0 || static_cast<std::size_t>(idx) >= base.n) {
                throw std::invalid_argument("eval: ground-truth index out of range");
            }
        }
    }

    std::vector<std::size_t> grid;
    for (std::size_t r = 1; r <= r_max && r <= base.n; r *= 2) grid.push_back(r);
    const SearchResult scan = adc_scan(queries, db, cb, grid.back());
    const double error = quantization_error(base, cb, db.codes);

    write_atomic(out, [&](const fs::path& p) {
        std::ofstream os(p, std::ios::trunc);
        if (!os) throw io_error("cannot open " + p.string() + " for writing");
        char buf[64];
        os << "metric,param,value\n";
        for (std::size_t r : grid) {
            std::snprintf(buf, sizeof(buf), "%.9g", recall_at_r(scan, gt, r));
            os << "recall," << r << ',' << buf << '\n';
        }
        std::snprintf(buf, sizeof(buf), "%.9g", error);
        os << "quantization_error,," << buf << '\n';
        if (!os) throw io_error("short write to " + p.string());
    });
    if (!results_path.empty()) {
        write_atomic(results_path,
                     [&](const fs::path& p) { write_results_csv(scan, p); });
    }
    std::printf("[eval] queries=%zu recall@1=%.4f error=%.6g -> %s\n", queries.n,
                recall_at_r(scan, gt, 1), error, out.c_str());
    return 0;
}

int cmd_stats(const std::string& encoded_path, const std::string& out) {
    if (encoded_path.empty() || out.empty()) {
        throw UsageError("stats: --encoded and --out are required");
    }
    const EncodedDatabase db = load_encoded(resolve_input(encoded_path));
    const std::size_t m = db.codes.m;

    write_atomic(out, [&](const fs::path& p) {
        std::ofstream os(p, std::ios::trunc);
        if (!os) throw io_error("cannot open " + p.string() + " for writing");
        char buf[64];
        os << "kind,i,j,bits\n";
        for (std::size_t dict = 0; dict < m; ++dict) {
            std::snprintf(buf, sizeof(buf), "%.9g", entropy(db.codes, dict));
            os << "entropy," << dict << ",," << buf << '\n';
        }
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = i + 1; j < m; ++j) {
                std::snprintf(buf, sizeof(buf), "%.9g", mutual_information(db.codes, i, j));
                os << "mi," << i << ',' << j << ',' << buf << '\n';
            }
        }
        if (!os) throw io_error("short write to " + p.string());
    });
    std::cout << "[stats] wrote " << out << '\n';
    return 0;
}

int cmd_update(const TrainFlags& f, const std::string& codebook_path,
               const std::string& data_path, std::size_t batch_size) {
    if (codebook_path.empty() || data_path.empty() || f.out_path.empty()) {
        throw UsageError("update: --codebook, --data and --out are required");
    }
    if (batch_size < 1) throw UsageError("update: --batch-size must be >= 1");
    Codebook cb = load_codebook(resolve_input(codebook_path));
    const VectorDataset data = load_vectors(data_path);
    if (data.n == 0) throw std::invalid_argument("update: empty dataset");

    std::ofstream report_out;
    if (!f.report_path.empty()) {
        report_out.open(f.report_path, std::ios::trunc);
        if (!report_out) {
            throw io_error("cannot open " + f.report_path + " for writing");
        }
    }

    const std::size_t n_batches = (data.n + batch_size - 1) / batch_size;
    for (std::size_t b = 0; b < n_batches; ++b) {
        const std::size_t begin = b * batch_size;
        const std::size_t count = std::min(batch_size, data.n - begin);
        VectorDataset batch(count, data.d);
        std::copy(data.data.begin() + begin * data.d,
                  data.data.begin() + (begin + count) * data.d, batch.data.begin());

        DAConfig cfg = da_config(f);
        cfg.seed = mix_seed(f.seed, b);
        auto [updated, report] = online_update(cb, batch, cfg);
        cb = std::move(updated);

        if (report_out.is_open()) {
            report_out << "# batch " << b << " size " << count << '\n';
            write_report(report, report_out);
        }
        std::printf("[update] batch=%zu size=%zu batch_error=%.6g\n", b, count,
                    report.final_error);
    }

    write_atomic(f.out_path, [&](const fs::path& p) { save_codebook(cb, p); });
    std::cout << "[update] wrote " << f.out_path << '\n';
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"avq: additive vector quantization for approximate nearest neighbor search"};
    app.require_subcommand(1);

    unsigned threads = 0;
    app.add_option("--threads", threads, "worker threads (0 = all cores)")
        ->capture_default_str();

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic Gaussian-mixture dataset");
    std::string gen_out;
    std::size_t gen_n = 10000, gen_d = 32, gen_components = 16;
    std::size_t gen_train = 0, gen_query = 0;
    std::uint64_t gen_seed = 0;
    bool gen_from_base = false;
    gen->add_option("--out", gen_out, "output fvecs path, or prefix when splitting")
        ->required();
    gen->add_option("--n", gen_n, "vector count")->capture_default_str();
    gen->add_option("--d", gen_d, "dimension")->capture_default_str();
    gen->add_option("--components", gen_components, "mixture components")
        ->capture_default_str();
    gen->add_option("--seed", gen_seed, "rng seed")->capture_default_str();
    gen->add_option("--n-train", gen_train, "rows split into <out>_train.fvecs");
    gen->add_option("--n-query", gen_query, "rows split into <out>_query.fvecs");
    gen->add_flag("--queries-from-base", gen_from_base,
                  "draw queries from the base set instead of holding them out");

    // shared train-style flags
    TrainFlags tf;
    auto add_da_flags = [&](CLI::App* cmd) {
        cmd->add_option("--beam", tf.beam, "beam width L")->capture_default_str();
        cmd->add_option("--iters", tf.iters, "optimizer iterations (0 = one per dictionary)")
            ->capture_default_str();
        cmd->add_option("--subspace-steps", tf.subspace_steps, "dimension growth steps")
            ->capture_default_str();
        cmd->add_option("--seed", tf.seed, "rng seed")->capture_default_str();
        cmd->add_option("--quit-tol", tf.quit_tol, "relative improvement floor per sweep")
            ->capture_default_str();
        cmd->add_option("--pick", tf.pick, "dictionary pick: random | round-robin")
            ->capture_default_str();
        cmd->add_option("--kmeans-iters", tf.kmeans_iters, "inner k-means iteration cap")
            ->capture_default_str();
        cmd->add_option("--kmeans-tol", tf.kmeans_tol, "inner k-means stop tolerance")
            ->capture_default_str();
    };

    auto* train = app.add_subcommand("train", "learn a codebook");
    train->add_option("--method", tf.method, "pq | rvq | da | darvq")->capture_default_str();
    train->add_option("--train", tf.train_path, "training fvecs/bvecs")->required();
    train->add_option("--m", tf.m, "dictionary count")->capture_default_str();
    train->add_option("--k", tf.k, "elements per dictionary")->capture_default_str();
    train->add_option("--init", tf.init_path, "initial codebook for method=da");
    train->add_option("--out", tf.out_path, "output codebook")->required();
    train->add_option("--report", tf.report_path, "training report CSV");
    add_da_flags(train);

    // encode
    auto* encode = app.add_subcommand("encode", "encode a database with a codebook");
    std::string enc_codebook, enc_base, enc_out, enc_method = "beam";
    std::size_t enc_beam = 10, enc_icm_rounds = 10;
    encode->add_option("--codebook", enc_codebook, "codebook path")->required();
    encode->add_option("--base", enc_base, "database fvecs/bvecs")->required();
    encode->add_option("--method", enc_method, "beam | greedy | icm | pq | exhaustive")
        ->capture_default_str();
    encode->add_option("--beam", enc_beam, "beam width L")->capture_default_str();
    encode->add_option("--icm-rounds", enc_icm_rounds, "icm rounds")->capture_default_str();
    encode->add_option("--out", enc_out, "output encoded database")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "recall@R and quantization error");
    std::string ev_codebook, ev_encoded, ev_base, ev_query, ev_gt, ev_out, ev_results;
    std::size_t ev_rmax = 512;
    eval->add_option("--codebook", ev_codebook, "codebook path")->required();
    eval->add_option("--encoded", ev_encoded, "encoded database path")->required();
    eval->add_option("--base", ev_base, "database fvecs/bvecs")->required();
    eval->add_option("--query", ev_query, "query fvecs/bvecs")->required();
    eval->add_option("--gt", ev_gt, "ground-truth ivecs (computed and cached if absent)");
    eval->add_option("--out", ev_out, "metrics CSV")->required();
    eval->add_option("--results", ev_results, "per-query results CSV");
    eval->add_option("--r-max", ev_rmax, "largest R in the power-of-two grid")
        ->capture_default_str();

    // stats
    auto* stats = app.add_subcommand("stats", "per-dictionary entropy and pairwise MI");
    std::string st_encoded, st_out;
    stats->add_option("--encoded", st_encoded, "encoded database path")->required();
    stats->add_option("--out", st_out, "stats CSV")->required();

    // update
    auto* update = app.add_subcommand("update", "online codebook update in batches");
    std::string up_codebook, up_data;
    std::size_t up_batch = 100000;
    update->add_option("--codebook", up_codebook, "codebook to update")->required();
    update->add_option("--data", up_data, "new data fvecs/bvecs")->required();
    update->add_option("--batch-size", up_batch, "vectors per batch")->capture_default_str();
    update->add_option("--out", tf.out_path, "output codebook")->required();
    update->add_option("--report", tf.report_path, "training report CSV");
    add_da_flags(update);

    try {
        app.parse(argc, argv);
        set_max_threads(threads);
        if (gen->parsed()) {
            return cmd_gen(gen_out, gen_n, gen_d, gen_components, gen_seed, gen_train,
                           gen_query, gen_from_base);
        }
        if (train->parsed()) return cmd_train(tf);
        if (encode->parsed()) {
            return cmd_encode(enc_codebook, enc_base, enc_method, enc_beam, enc_icm_rounds,
                              enc_out);
        }
        if (eval->parsed()) {
            return cmd_eval(ev_codebook, ev_encoded, ev_base, ev_query, ev_gt, ev_out,
                            ev_results, ev_rmax);
        }
        if (stats->parsed()) return cmd_stats(st_encoded, st_out);
        if (update->parsed()) return cmd_update(tf, up_codebook, up_data, up_batch);
        throw UsageError("no subcommand given");
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const io_error& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("avq");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace avq::cli
