// tpc: command-line driver for truncated polynomial classifiers.
//
// Every command writes its outputs plus a manifest.json into a run directory
// <base>/<UTC timestamp>_<command>_seed<seed>, where <base> is --out-dir,
// else $TPC_OUT_DIR, else ./runs. --run-dir names the directory exactly.

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "tpc/tpc.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUnexpected = 1;
constexpr int kExitUsage = 2;
constexpr int kExitReplayMismatch = 8;

int exit_code(tpc::Errc e) {
    switch (e) {
    case tpc::Errc::invalid_argument: return 3;
    case tpc::Errc::dimension_mismatch: return 4;
    case tpc::Errc::format: return 5;
    case tpc::Errc::io: return 6;
    case tpc::Errc::overflow: return 7;
    }
    return kExitUnexpected;
}

const char* kExitCodeHelp = R"(Exit codes:
  0  success
  1  unexpected internal error
  2  usage error (bad or missing flags)
  3  invalid argument value
  4  dimension mismatch
  5  malformed input file
  6  file I/O failure
  7  arithmetic overflow in a size or cost computation
  8  replay produced outputs that differ from the manifest
Output directory: --run-dir, else --out-dir/<run>, else $TPC_OUT_DIR/<run>, else ./runs/<run>.)";

std::string sha256_file(const fs::path& path) {
    const std::string bytes = tpc::detail::read_file(path);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return os.str();
}

std::string utc_now(const char* fmt) {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::strftime(buf, sizeof buf, fmt, &tm);
    return buf;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename T>
std::string join(const std::vector<T>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

void require_file(const std::string& path, const char* what) {
    tpc::detail::require(!path.empty(), tpc::Errc::invalid_argument, std::string(what) + " path is required");
    tpc::detail::require(fs::is_regular_file(path), tpc::Errc::io, std::string(what) + " not found: " + path);
}

/// Collects the manifest for one command and owns the run directory.
class Run {
public:
    Run(std::string command, std::vector<std::string> argv) : command_(std::move(command)), argv_(std::move(argv)) {}

    json config = json::object();
    std::uint64_t seed = 0;
    std::string run_dir_flag;
    std::string out_dir_flag;

    void input(const std::string& path) { inputs_.push_back({path, sha256_file(path)}); }

    /// Creates the run directory on first use.
    fs::path path(const std::string& name) {
        if (dir_.empty()) {
            if (!run_dir_flag.empty()) {
                dir_ = run_dir_flag;
            } else {
                fs::path base = out_dir_flag;
                if (base.empty()) {
                    const char* env = std::getenv("TPC_OUT_DIR");
                    base = env && *env ? fs::path(env) : fs::path("runs");
                }
                const std::string stem = utc_now("%Y%m%dT%H%M%SZ") + "_" + command_ + "_seed" + std::to_string(seed);
                dir_ = base / stem;
                for (int i = 2; fs::exists(dir_); ++i) dir_ = base / (stem + "_" + std::to_string(i));
            }
            std::error_code ec;
            fs::create_directories(dir_, ec);
            tpc::detail::require(!ec, tpc::Errc::io, "cannot create run directory " + dir_.string() + ": " + ec.message());
        }
        return dir_ / name;
    }

    void output(const fs::path& p, bool deterministic) {
        outputs_.push_back({p.string(), sha256_file(p), deterministic});
        std::cout << "wrote " << p.string() << "\n";
    }

    void write_text(const std::string& name, const std::string& text, bool deterministic) {
        const auto p = path(name);
        tpc::detail::write_file(p, text);
        output(p, deterministic);
    }

    void finish() {
        json m;
        m["tool"] = "tpc";
        m["manifest_version"] = 1;
        m["command"] = command_;
        m["argv"] = argv_;
        m["config"] = config;
        m["seed"] = seed;
        m["run_dir"] = fs::absolute(path("")).lexically_normal().string();
        m["inputs"] = json::array();
        for (const auto& [p, h] : inputs_) m["inputs"].push_back({{"path", p}, {"sha256", h}});
        m["outputs"] = json::array();
        for (const auto& o : outputs_)
            m["outputs"].push_back({{"path", o.path}, {"name", fs::path(o.path).filename().string()},
                                    {"sha256", o.hash}, {"deterministic", o.deterministic}});
        m["timestamp"] = utc_now("%Y-%m-%dT%H:%M:%SZ");
        tpc::detail::write_file(path("manifest.json"), m.dump(2) + "\n");
        std::cout << "run directory " << dir_.string() << "\n";
    }

private:
    struct Output {
        std::string path, hash;
        bool deterministic;
    };
    std::string command_;
    std::vector<std::string> argv_;
    std::vector<std::pair<std::string, std::string>> inputs_;
    std::vector<Output> outputs_;
    fs::path dir_;
};

std::vector<double> default_taus() { return {0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5}; }

// ---------------------------------------------------------------------------

struct GenArgs {
    std::string kind;
    std::size_t rows = 5000;
    std::size_t dim = 8;
    double noise = 0.0;
    std::uint64_t seed = 0;
    std::string format = "binary";
};

void cmd_gen(const GenArgs& a, Run& run) {
    const auto kind = tpc::parse_synthetic_kind(a.kind);
    if (a.dim < tpc::required_dim(kind))
        tpc::detail::fail(tpc::Errc::dimension_mismatch,
                          a.kind + " needs --dim >= " + std::to_string(tpc::required_dim(kind)) + " (got " +
                              std::to_string(a.dim) + "); see `tpc gen --help`");
    run.seed = a.seed;
    run.config = {{"kind", a.kind}, {"n", a.rows}, {"dim", a.dim}, {"noise", a.noise}, {"format", a.format}};
    const auto data = tpc::gen_synthetic(kind, a.rows, a.dim, a.noise, a.seed);
    const bool csv = a.format == "csv";
    const auto p = run.path(csv ? "dataset.csv" : "dataset.tpcd");
    if (csv)
        tpc::save_csv(data, p);
    else
        tpc::save_binary(data, p);
    run.output(p, true);
}

struct TrainArgs {
    std::string data, val;
    std::size_t degree = 5, rank = 64;
    std::vector<double> lr, wd, dropout;
    std::uint64_t seed = 0;
    std::size_t epochs = 50, batch = 1024, patience = 5, threads = 0;
    double clip = 1.0, val_fraction = 0.2;
};

void cmd_train(const TrainArgs& a, Run& run) {
    require_file(a.data, "--data");
    if (!a.val.empty()) require_file(a.val, "--val");
    tpc::detail::require(a.val_fraction > 0.0 && a.val_fraction < 1.0, tpc::Errc::invalid_argument,
                         "--val-fraction must lie in (0, 1)");

    tpc::GridSpec grid;
    if (!a.lr.empty()) grid.learning_rates = a.lr;
    if (!a.wd.empty()) grid.weight_decays = a.wd;
    if (!a.dropout.empty()) grid.dropout_rates = a.dropout;
    tpc::TrainConfig cfg;
    cfg.seed = a.seed;
    cfg.epochs_per_degree = a.epochs;
    cfg.batch_size = a.batch;
    cfg.lr_plateau_patience = a.patience;
    cfg.grad_clip_norm = a.clip;
    cfg.threads = a.threads;
    cfg.validate();
    grid.validate();

    run.seed = a.seed;
    run.config = {{"data", a.data},
                  {"val", a.val},
                  {"val_fraction", a.val_fraction},
                  {"degree", a.degree},
                  {"rank", a.rank},
                  {"learning_rates", grid.learning_rates},
                  {"weight_decays", grid.weight_decays},
                  {"dropout_rates", grid.dropout_rates},
                  {"epochs_per_degree", cfg.epochs_per_degree},
                  {"batch_size", cfg.batch_size},
                  {"grad_clip_norm", cfg.grad_clip_norm},
                  {"lr_plateau_factor", cfg.lr_plateau_factor},
                  {"lr_plateau_patience", cfg.lr_plateau_patience},
                  {"l2_inverse_strengths", cfg.l2_inverse_strengths}};
    run.input(a.data);
    if (!a.val.empty()) run.input(a.val);

    auto data = tpc::load_dataset(a.data);
    tpc::LabeledDataset train, val;
    if (a.val.empty()) {
        std::tie(train, val) = tpc::split(data, 1.0 - a.val_fraction, a.seed);
    } else {
        train = std::move(data);
        val = tpc::load_dataset(a.val);
    }
    const auto fit = tpc::fit_progressive(train, val, a.degree, a.rank, grid, cfg);

    const auto model_path = run.path("model.tpcm");
    tpc::save_model(fit.model, model_path);
    run.output(model_path, true);
    std::ostringstream report, curves;
    tpc::write_report_text(fit.report, report);
    tpc::write_loss_csv(fit.report, curves);
    run.write_text("train_report.txt", report.str(), false);
    run.write_text("loss_curves.csv", curves.str(), true);
    for (const auto& t : fit.report.truncations)
        std::cout << "truncation " << t.truncation << " val_f1 " << fmt(t.val_f1) << "\n";
}

struct EvalArgs {
    std::string model, data, model_id;
    std::vector<std::size_t> trunc;
};

void cmd_eval(const EvalArgs& a, Run& run) {
    require_file(a.model, "--model");
    require_file(a.data, "--data");
    run.input(a.model);
    run.input(a.data);
    const auto model = tpc::load_model(a.model);
    const auto data = tpc::load_dataset(a.data);
    auto truncs = a.trunc;
    if (truncs.empty())
        for (std::size_t n = 1; n <= model.trained_through(); ++n) truncs.push_back(n);
    const std::string id = a.model_id.empty() ? fs::path(a.model).stem().string() : a.model_id;
    run.config = {{"model", a.model}, {"data", a.data}, {"model_id", id}, {"trunc", truncs}};

    std::ostringstream csv;
    csv << "model_id,n,f1,accuracy,precision,recall,ece,params,flops\n";
    for (std::size_t n : truncs) {
        const auto logits = tpc::forward_batch(model, data.features, n);
        const auto preds = tpc::classify<double>(logits);
        const auto c = tpc::confusion(preds, data.labels);
        std::vector<double> probs(logits.size());
        for (std::size_t i = 0; i < logits.size(); ++i) probs[i] = tpc::sigmoid(logits[i]);
        csv << id << "," << n << "," << fmt(c.f1()) << "," << fmt(c.accuracy()) << "," << fmt(c.precision()) << ","
            << fmt(c.recall()) << "," << fmt(tpc::ece(probs, data.labels)) << "," << tpc::truncation_params(model, n)
            << "," << tpc::flop_count(tpc::model_cost_query(model, n)) << "\n";
    }
    std::cout << csv.str();
    run.write_text("eval.csv", csv.str(), true);
}

struct CascadeArgs {
    std::string model, data;
    std::vector<double> tau;
    std::size_t max_degree = 0;
};

void cmd_cascade(const CascadeArgs& a, Run& run) {
    require_file(a.model, "--model");
    require_file(a.data, "--data");
    run.input(a.model);
    run.input(a.data);
    const auto model = tpc::load_model(a.model);
    const auto data = tpc::load_dataset(a.data);
    const auto taus = a.tau.empty() ? default_taus() : a.tau;
    const std::size_t depth = a.max_degree == 0 ? model.trained_through() : a.max_degree;
    run.config = {{"model", a.model}, {"data", a.data}, {"tau", taus}, {"max_degree", depth}};

    std::ostringstream csv;
    csv << "tau,f1,accuracy,net_params,net_flops";
    for (std::size_t n = 1; n <= depth; ++n) csv << ",exit_hist_" << n;
    csv << "\n";
    for (double tau : taus) {
        const auto s = tpc::cascade_evaluate(model, data, {tau, depth});
        csv << fmt(tau) << "," << fmt(s.confusion.f1()) << "," << fmt(s.confusion.accuracy()) << "," << s.net_params
            << "," << s.net_flops;
        for (auto h : s.exit_histogram) csv << "," << h;
        csv << "\n";
    }
    std::cout << csv.str();
    run.write_text("cascade.csv", csv.str(), true);
}

std::vector<double> read_input_vector(const std::string& path) {
    std::string text = tpc::detail::read_file(path);
    for (char& ch : text)
        if (ch == ',' || ch == '\n' || ch == '\r' || ch == '\t') ch = ' ';
    std::istringstream is(text);
    std::vector<double> v;
    std::string tok;
    while (is >> tok) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            tpc::detail::fail(tpc::Errc::format, path + ": bad number '" + tok + "' at position " + std::to_string(v.size()));
        }
    }
    return v;
}

struct AttributeArgs {
    std::string model, input, data;
    long long row = -1;
    std::size_t top_k = 10;
};

void cmd_attribute(const AttributeArgs& a, Run& run) {
    require_file(a.model, "--model");
    tpc::detail::require(a.input.empty() != a.data.empty(), tpc::Errc::invalid_argument,
                         "give exactly one of --input or --data");
    run.input(a.model);
    const auto model = tpc::load_model(a.model);
    std::vector<double> z;
    if (!a.input.empty()) {
        require_file(a.input, "--input");
        run.input(a.input);
        z = read_input_vector(a.input);
    } else {
        require_file(a.data, "--data");
        tpc::detail::require(a.row >= 0, tpc::Errc::invalid_argument, "--row is required with --data");
        run.input(a.data);
        const auto data = tpc::load_dataset(a.data);
        tpc::detail::require(static_cast<std::size_t>(a.row) < data.size(), tpc::Errc::invalid_argument,
                             "--row " + std::to_string(a.row) + " outside dataset of " + std::to_string(data.size()));
        const auto r = data.features.row(static_cast<std::size_t>(a.row));
        z.assign(r.begin(), r.end());
    }
    run.config = {{"model", a.model}, {"input", a.input}, {"data", a.data}, {"row", a.row}, {"top_k", a.top_k}};

    const auto top = tpc::top_attributions<double>(model, z, a.top_k);
    std::ostringstream csv;
    csv << "rank,i,j,value\n";
    for (std::size_t r = 0; r < top.size(); ++r)
        csv << r + 1 << "," << top[r].i << "," << top[r].j << "," << fmt(top[r].value) << "\n";
    std::cout << csv.str();
    run.write_text("attributions.csv", csv.str(), true);
}

struct CountArgs {
    std::int64_t dim = 0, rank = 64, degree = 5;
    std::vector<std::string> param;
    std::string format = "text";
    bool inclusive_bias = false;
};

void cmd_count(const CountArgs& a, Run& run) {
    std::vector<tpc::Parameterization> params;
    for (const auto& p : a.param.empty() ? std::vector<std::string>{"raw", "cp", "symmetric_cp"} : a.param)
        params.push_back(tpc::parse_parameterization(p));
    run.config = {{"dim", a.dim},       {"rank", a.rank},      {"degree", a.degree},
                  {"param", a.param},   {"format", a.format}, {"inclusive_bias", a.inclusive_bias}};

    struct Row {
        std::int64_t n;
        std::string param, params, flops;
    };
    std::vector<Row> rows;
    for (std::int64_t n = 1; n <= a.degree; ++n) {
        for (auto p : params) {
            const tpc::CostQuery q{a.dim, a.rank, a.degree, n, p, a.inclusive_bias};
            auto cell = [&](auto f) {
                try {
                    return std::to_string(f(q));
                } catch (const tpc::Error& e) {
                    if (e.code() != tpc::Errc::overflow) throw;
                    return std::string("overflow");
                }
            };
            rows.push_back({n, std::string(tpc::to_string(p)), cell(tpc::param_count), cell(tpc::flop_count)});
        }
    }
    std::ostringstream os;
    if (a.format == "csv") {
        os << "n,parameterization,params,flops\n";
        for (const auto& r : rows) os << r.n << "," << r.param << "," << r.params << "," << r.flops << "\n";
    } else {
        std::size_t w = 6;
        for (const auto& r : rows) w = std::max({w, r.params.size(), r.flops.size()});
        os << std::left << std::setw(4) << "n" << std::setw(14) << "param" << std::right << std::setw(w) << "params"
           << "  " << std::setw(w) << "flops" << "\n";
        for (const auto& r : rows)
            os << std::left << std::setw(4) << r.n << std::setw(14) << r.param << std::right << std::setw(w)
               << r.params << "  " << std::setw(w) << r.flops << "\n";
    }
    std::cout << os.str();
    run.write_text(a.format == "csv" ? "count.csv" : "count.txt", os.str(), true);
}

struct BenchArgs {
    std::string model;
    std::size_t dim = 0, rank = 64, degree = 5;
    std::vector<std::size_t> batch_sizes{1, 64, 1024};
    std::size_t warmup = 50, iters = 500, threads = 0;
    std::vector<std::string> precision{"double"};
    std::vector<std::size_t> trunc;
    std::vector<double> tau;
    bool parallel = false;
    std::uint64_t seed = 0;
};

void cmd_bench(const BenchArgs& a, Run& run) {
    tpc::TpcModel model(1, 1, 1);
    if (!a.model.empty()) {
        require_file(a.model, "--model");
        run.input(a.model);
        model = tpc::load_model(a.model);
    } else {
        tpc::detail::require(a.dim > 0, tpc::Errc::invalid_argument, "give --model or --dim for a random model");
        tpc::detail::require(a.rank > 0 && a.degree > 0, tpc::Errc::invalid_argument, "--rank and --degree must be positive");
        model = tpc::TpcModel(a.dim, a.degree, a.rank);
        std::mt19937_64 rng(a.seed);
        std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(a.dim)));
        model.bias() = normal(rng);
        for (auto& w : model.linear()) w = normal(rng);
        for (std::size_t k = 2; k <= a.degree; ++k) {
            for (auto& l : model.term(k).lambda) l = normal(rng);
            for (auto& u : model.term(k).factors.data()) u = normal(rng);
        }
        model.set_trained_through(a.degree);
    }
    tpc::BenchConfig cfg;
    cfg.batch_sizes = a.batch_sizes;
    cfg.warmup_iters = a.warmup;
    cfg.measured_iters = a.iters;
    cfg.parallel = a.parallel;
    cfg.threads = a.threads;
    cfg.seed = a.seed;
    cfg.precisions.clear();
    for (const auto& p : a.precision) {
        if (p == "single" || p == "float")
            cfg.precisions.push_back(tpc::Precision::single);
        else if (p == "double")
            cfg.precisions.push_back(tpc::Precision::double_);
        else
            tpc::detail::fail(tpc::Errc::invalid_argument, "unknown precision '" + p + "'");
    }
    auto truncs = a.trunc;
    if (truncs.empty() && a.tau.empty())
        for (std::size_t n = 1; n <= model.trained_through(); ++n) truncs.push_back(n);
    for (auto n : truncs) cfg.scenarios.push_back(tpc::BenchScenario::fixed(n));
    for (auto t : a.tau) cfg.scenarios.push_back(tpc::BenchScenario::cascade(t));
    run.seed = a.seed;
    run.config = {{"model", a.model}, {"dim", model.input_dim()}, {"rank", model.rank()},
                  {"degree", model.trained_through()}, {"batch_sizes", a.batch_sizes}, {"warmup", a.warmup},
                  {"iters", a.iters}, {"precision", a.precision}, {"trunc", truncs}, {"tau", a.tau},
                  {"parallel", a.parallel}, {"threads", a.threads}};

    const auto rows = tpc::run_bench(model, cfg);
    std::ostringstream csv;
    csv << "batch_size,scenario,precision,parallel,p50_ms,p95_ms,mean_ms,throughput,flops_per_sample\n";
    for (const auto& r : rows)
        csv << r.batch_size << "," << r.scenario << "," << tpc::to_string(r.precision) << "," << (r.parallel ? 1 : 0)
            << "," << fmt(r.p50_ms) << "," << fmt(r.p95_ms) << "," << fmt(r.mean_ms) << "," << fmt(r.throughput) << ","
            << fmt(r.flops_per_sample) << "\n";
    std::cout << csv.str();
    run.write_text("bench.csv", csv.str(), false);
}

int run_cli(std::vector<std::string> args);

/// Re-executes the manifest's command into a fresh run directory and checks
/// that every deterministic output hashes the same.
int cmd_replay(const std::string& manifest_path, const std::string& run_dir) {
    require_file(manifest_path, "manifest");
    json m;
    try {
        m = json::parse(tpc::detail::read_file(manifest_path));
    } catch (const json::exception& e) {
        tpc::detail::fail(tpc::Errc::format, manifest_path + ": " + e.what());
    }
    tpc::detail::require(m.contains("argv") && m["argv"].is_array() && m.contains("outputs"), tpc::Errc::format,
                         manifest_path + ": not a tpc manifest");
    for (const auto& in : m.value("inputs", json::array())) {
        const std::string p = in.at("path");
        require_file(p, "manifest input");
        if (sha256_file(p) != in.at("sha256").get<std::string>())
            tpc::detail::fail(tpc::Errc::format, "input changed since the manifest was written: " + p);
    }
    auto argv = m["argv"].get<std::vector<std::string>>();
    fs::path dir = run_dir.empty() ? fs::path(m.at("run_dir").get<std::string>()).concat("_replay") : fs::path(run_dir);
    argv.push_back("--run-dir");
    argv.push_back(dir.string());
    const int rc = run_cli(argv);
    if (rc != kExitOk) return rc;

    bool ok = true;
    for (const auto& o : m["outputs"]) {
        if (!o.at("deterministic").get<bool>()) continue;
        const auto p = dir / o.at("name").get<std::string>();
        const bool same = fs::exists(p) && sha256_file(p) == o.at("sha256").get<std::string>();
        std::cout << (same ? "match " : "MISMATCH ") << o.at("name").get<std::string>() << "\n";
        ok = ok && same;
    }
    return ok ? kExitOk : kExitReplayMismatch;
}

// ---------------------------------------------------------------------------

int run_cli(std::vector<std::string> args) {
    CLI::App app{"Truncated polynomial classifiers: generate, train, evaluate, attribute, count and benchmark."};
    app.footer(kExitCodeHelp);
    app.require_subcommand(1);
    app.set_version_flag("--version", "tpc 1.0");

    std::string run_dir, out_dir;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--run-dir", run_dir, "Write outputs to exactly this directory");
        sub->add_option("--out-dir", out_dir, "Base directory for the run directory (overrides $TPC_OUT_DIR)");
        sub->footer(kExitCodeHelp);
    };

    GenArgs gen;
    auto* g = app.add_subcommand("gen", "Generate a seeded synthetic dataset");
    g->add_option("--kind", gen.kind, "linear | xor_quadratic | cubic_parity")->required();
    g->add_option("--n", gen.rows, "Number of examples")->capture_default_str();
    g->add_option("--dim", gen.dim, "Feature dimension")->capture_default_str();
    g->add_option("--noise", gen.noise, "Std of the Gaussian added to the label score")->capture_default_str();
    g->add_option("--seed", gen.seed)->capture_default_str();
    g->add_option("--format", gen.format)->check(CLI::IsMember({"csv", "binary"}))->capture_default_str();
    common(g);

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Train a truncated polynomial classifier degree by degree");
    t->add_option("--data", train.data, "Training dataset (.csv or binary)")->required();
    t->add_option("--val", train.val, "Validation dataset; default holds out --val-fraction of --data");
    t->add_option("--val-fraction", train.val_fraction)->capture_default_str();
    t->add_option("--degree", train.degree, "Maximum degree N")->capture_default_str();
    t->add_option("--rank", train.rank, "CP rank R")->capture_default_str();
    t->add_option("--lr", train.lr, "Learning-rate grid (default 1e-3,5e-4,1e-4)")->delimiter(',');
    t->add_option("--wd", train.wd, "Weight-decay grid (default 0.01,0.1,1)")->delimiter(',');
    t->add_option("--dropout", train.dropout, "Dropout grid (default 0,0.2,0.5)")->delimiter(',');
    t->add_option("--seed", train.seed)->capture_default_str();
    t->add_option("--epochs", train.epochs, "Epochs per degree")->capture_default_str();
    t->add_option("--batch-size", train.batch)->capture_default_str();
    t->add_option("--patience", train.patience, "Plateau patience in epochs")->capture_default_str();
    t->add_option("--clip", train.clip, "Gradient-norm clip")->capture_default_str();
    t->add_option("--threads", train.threads, "Grid worker threads (0 = all cores)")->capture_default_str();
    common(t);

    EvalArgs eval;
    auto* e = app.add_subcommand("eval", "Metrics and cost at fixed truncations");
    e->add_option("--model", eval.model)->required();
    e->add_option("--data", eval.data)->required();
    e->add_option("--trunc", eval.trunc, "Truncations (default 1..trained degree)")->delimiter(',');
    e->add_option("--model-id", eval.model_id, "Label for the model_id column (default model file stem)");
    common(e);

    CascadeArgs cascade;
    auto* c = app.add_subcommand("cascade", "Early-exit cascade over a tau sweep");
    c->add_option("--model", cascade.model)->required();
    c->add_option("--data", cascade.data)->required();
    c->add_option("--tau", cascade.tau, "Thresholds in [0, 0.5] (default 0,0.05,0.1,0.2,0.3,0.4,0.5)")->delimiter(',');
    c->add_option("--max-degree", cascade.max_degree, "Cascade depth (default trained degree)");
    common(c);

    AttributeArgs attr;
    auto* at = app.add_subcommand("attribute", "Top pairwise attributions of the degree-2 term for one input");
    at->add_option("--model", attr.model)->required();
    at->add_option("--input", attr.input, "File holding one raw input vector (comma or whitespace separated)");
    at->add_option("--data", attr.data, "Dataset to take --row from");
    at->add_option("--row", attr.row, "0-based row of --data");
    at->add_option("--top-k", attr.top_k)->capture_default_str();
    common(at);

    CountArgs count;
    auto* co = app.add_subcommand("count", "Parameter and FLOP counts per truncation");
    co->add_option("--dim", count.dim, "Input dimension D")->required();
    co->add_option("--rank", count.rank)->capture_default_str();
    co->add_option("--degree", count.degree)->capture_default_str();
    co->add_option("--param", count.param, "raw,cp,symmetric_cp (default all)")->delimiter(',');
    co->add_option("--format", count.format)->check(CLI::IsMember({"text", "csv"}))->capture_default_str();
    co->add_flag("--inclusive-bias", count.inclusive_bias, "Count the bias parameter");
    common(co);

    BenchArgs bench;
    auto* b = app.add_subcommand("bench", "Latency and throughput of CPU inference");
    b->add_option("--model", bench.model, "Model file; otherwise a random model from --dim/--rank/--degree");
    b->add_option("--dim", bench.dim);
    b->add_option("--rank", bench.rank)->capture_default_str();
    b->add_option("--degree", bench.degree)->capture_default_str();
    b->add_option("--batch-sizes", bench.batch_sizes)->delimiter(',')->capture_default_str();
    b->add_option("--warmup", bench.warmup)->capture_default_str();
    b->add_option("--iters", bench.iters)->capture_default_str();
    b->add_option("--precision", bench.precision, "single,double")->delimiter(',')->capture_default_str();
    b->add_option("--trunc", bench.trunc, "Fixed truncations")->delimiter(',');
    b->add_option("--tau", bench.tau, "Cascade thresholds")->delimiter(',');
    b->add_flag("--parallel", bench.parallel, "Also time a multi-threaded variant");
    b->add_option("--threads", bench.threads)->capture_default_str();
    b->add_option("--seed", bench.seed)->capture_default_str();
    common(b);

    std::string manifest;
    auto* r = app.add_subcommand("replay", "Re-run a manifest and compare deterministic outputs");
    r->add_option("manifest", manifest, "Path to manifest.json")->required();
    r->add_option("--run-dir", run_dir, "Directory for the replayed outputs (default <run_dir>_replay)");
    r->footer(kExitCodeHelp);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& err) {
        const int rc = app.exit(err);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (r->parsed()) return cmd_replay(manifest, run_dir);

        // The manifest keeps the argv minus output-location flags so that a
        // replay can redirect it.
        std::vector<std::string> kept;
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (args[i] == "--run-dir" || args[i] == "--out-dir") {
                ++i;
                continue;
            }
            if (args[i].rfind("--run-dir=", 0) == 0 || args[i].rfind("--out-dir=", 0) == 0) continue;
            kept.push_back(args[i]);
        }
        CLI::App* sub = app.get_subcommands().front();
        Run run(sub->get_name(), kept);
        run.run_dir_flag = run_dir;
        run.out_dir_flag = out_dir;
        if (g->parsed()) cmd_gen(gen, run);
        if (t->parsed()) cmd_train(train, run);
        if (e->parsed()) cmd_eval(eval, run);
        if (c->parsed()) cmd_cascade(cascade, run);
        if (at->parsed()) cmd_attribute(attr, run);
        if (co->parsed()) cmd_count(count, run);
        if (b->parsed()) cmd_bench(bench, run);
        run.finish();
        return kExitOk;
    } catch (const tpc::Error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return exit_code(err.code());
    } catch (const std::exception& err) {
        std::cerr << "internal error: " << err.what() << "\n";
        return kExitUnexpected;
    }
}

} // namespace

int main(int argc, char** argv) { return run_cli(std::vector<std::string>(argv + 1, argv + argc)); }
