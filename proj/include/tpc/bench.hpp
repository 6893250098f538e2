#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "tpc/cascade.hpp"
#include "tpc/costmodel.hpp"
#include "tpc/error.hpp"
#include "tpc/model.hpp"
#include "tpc/poly.hpp"

namespace tpc {

enum class Precision { single, double_ };

inline std::string_view to_string(Precision p) { return p == Precision::single ? "single" : "double"; }

struct BenchScenario {
    enum class Kind { fixed_truncation, cascade } kind = Kind::fixed_truncation;
    std::size_t truncation = 1;
    double tau = 0.0;

    static BenchScenario fixed(std::size_t n) { return {Kind::fixed_truncation, n, 0.0}; }
    static BenchScenario cascade(double tau) { return {Kind::cascade, 0, tau}; }

    std::string label() const {
        if (kind == Kind::fixed_truncation) return "trunc" + std::to_string(truncation);
        char buf[32];
        std::snprintf(buf, sizeof buf, "cascade%g", tau);
        return buf;
    }
};

struct BenchConfig {
    std::vector<std::size_t> batch_sizes{1, 64, 1024};
    std::size_t warmup_iters = 50;
    std::size_t measured_iters = 500;
    std::vector<Precision> precisions{Precision::double_};
    std::vector<BenchScenario> scenarios;
    std::uint64_t seed = 0;
    /// Also time a multi-threaded variant of every row.
    bool parallel = false;
    std::size_t threads = 0;

    void validate() const {
        detail::require(measured_iters >= 1, Errc::invalid_argument, "measured_iters must be >= 1");
        detail::require(!batch_sizes.empty(), Errc::invalid_argument, "no batch sizes given");
        for (auto b : batch_sizes) detail::require(b > 0, Errc::invalid_argument, "batch sizes must be positive");
        detail::require(!scenarios.empty(), Errc::invalid_argument, "no benchmark scenarios given");
    }
};

struct BenchRow {
    std::size_t batch_size = 0;
    std::string scenario;
    Precision precision = Precision::double_;
    bool parallel = false;
    double p50_ms = 0.0;
    double p95_ms = 0.0;
    double mean_ms = 0.0;
    double throughput = 0.0;
    /// Multiply-adds per sample from the cost model (cascade: mean over the batch).
    double flops_per_sample = 0.0;
    /// Sum of the batch logits from the last measured iteration.
    double checksum = 0.0;
};

namespace detail {

template <typename T>
void evaluate_batch(const BasicTpcModel<T>& model, const Matrix<T>& inputs, const BenchScenario& scenario,
                    const CascadeCosts& costs, std::span<T> out, std::size_t begin, std::size_t end) {
    std::vector<T> zs(model.input_dim());
    const CascadePolicy policy{scenario.tau, model.trained_through()};
    for (std::size_t i = begin; i < end; ++i) {
        model.scaler().apply(inputs.row(i), zs);
        if (scenario.kind == BenchScenario::Kind::fixed_truncation)
            out[i] = forward_scaled<T>(model, zs, scenario.truncation);
        else
            out[i] = static_cast<T>(cascade_scaled<T>(model, zs, policy, costs).logit);
    }
}

template <typename T>
BenchRow bench_one(const BasicTpcModel<T>& model, const Matrix<double>& inputs_d, const BenchScenario& scenario,
                   const BenchConfig& config, bool parallel, double flops_per_sample) {
    const Matrix<T> inputs = inputs_d.template cast<T>();
    const auto costs = CascadeCosts::for_model(model, model.trained_through());
    std::vector<T> out(inputs.rows());
    std::size_t threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
    threads = std::min(threads, inputs.rows());

    auto run = [&] {
        if (!parallel || threads <= 1) {
            evaluate_batch<T>(model, inputs, scenario, costs, out, 0, inputs.rows());
            return;
        }
        std::vector<std::thread> pool;
        const std::size_t chunk = (inputs.rows() + threads - 1) / threads;
        for (std::size_t t = 0; t < threads; ++t) {
            const std::size_t b = t * chunk, e = std::min(inputs.rows(), b + chunk);
            if (b >= e) break;
            pool.emplace_back([&, b, e] { evaluate_batch<T>(model, inputs, scenario, costs, out, b, e); });
        }
        for (auto& th : pool) th.join();
    };

    for (std::size_t i = 0; i < config.warmup_iters; ++i) run();
    std::vector<double> ms(config.measured_iters);
    for (auto& m : ms) {
        const auto t0 = std::chrono::steady_clock::now();
        run();
        m = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
    double mean = 0.0;
    for (double m : ms) mean += m;
    mean /= static_cast<double>(ms.size());
    std::sort(ms.begin(), ms.end());
    auto pct = [&](double q) { return ms[static_cast<std::size_t>(q * static_cast<double>(ms.size() - 1) + 0.5)]; };

    BenchRow row;
    row.batch_size = inputs.rows();
    row.scenario = scenario.label();
    row.precision = std::is_same_v<T, float> ? Precision::single : Precision::double_;
    row.parallel = parallel;
    row.p50_ms = pct(0.50);
    row.p95_ms = pct(0.95);
    row.mean_ms = mean;
    row.throughput = mean > 0.0 ? static_cast<double>(inputs.rows()) / (mean / 1000.0) : 0.0;
    row.flops_per_sample = flops_per_sample;
    for (T v : out) row.checksum += static_cast<double>(v);
    return row;
}

} // namespace detail

/// Standard-normal raw inputs for a benchmark batch.
inline Matrix<double> bench_inputs(std::size_t rows, std::size_t dim, std::uint64_t seed) {
    Matrix<double> m(rows, dim);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    for (auto& v : m.data()) v = normal(rng);
    return m;
}

/// Times each (batch size, scenario, precision) combination. Costs come from
/// the double-precision model so they are identical across precisions.
inline std::vector<BenchRow> run_bench(const TpcModel& model, const BenchConfig& config) {
    config.validate();
    for (const auto& s : config.scenarios) {
        if (s.kind == BenchScenario::Kind::fixed_truncation) {
            detail::check_truncation(model, s.truncation);
        } else {
            CascadePolicy{s.tau, model.trained_through()}.validate();
        }
    }
    const auto single = model.cast<float>();
    std::vector<BenchRow> rows;
    for (std::size_t b : config.batch_sizes) {
        const auto inputs = bench_inputs(b, model.input_dim(), config.seed);
        for (const auto& s : config.scenarios) {
            double flops;
            if (s.kind == BenchScenario::Kind::fixed_truncation) {
                flops = static_cast<double>(flop_count(model_cost_query(model, s.truncation)));
            } else {
                const auto summary = cascade_evaluate(model, inputs, std::vector<std::uint8_t>(b, 0),
                                                      CascadePolicy{s.tau, model.trained_through()});
                flops = static_cast<double>(summary.net_flops) / static_cast<double>(b);
            }
            for (auto p : config.precisions) {
                for (bool par : config.parallel ? std::vector<bool>{false, true} : std::vector<bool>{false}) {
                    rows.push_back(p == Precision::single ? detail::bench_one<float>(single, inputs, s, config, par, flops)
                                                          : detail::bench_one<double>(model, inputs, s, config, par, flops));
                }
            }
        }
    }
    return rows;
}

} // namespace tpc
