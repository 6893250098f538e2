#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "tpc/error.hpp"
#include "tpc/model.hpp"
#include "tpc/poly.hpp"

namespace tpc {

enum class Parameterization { raw, cp, symmetric_cp };

inline std::string_view to_string(Parameterization p) {
    switch (p) {
    case Parameterization::raw: return "raw";
    case Parameterization::cp: return "cp";
    case Parameterization::symmetric_cp: return "symmetric_cp";
    }
    return "?";
}

inline Parameterization parse_parameterization(std::string_view s) {
    if (s == "raw") return Parameterization::raw;
    if (s == "cp") return Parameterization::cp;
    if (s == "symmetric_cp" || s == "sym") return Parameterization::symmetric_cp;
    detail::fail(Errc::invalid_argument, "unknown parameterization '" + std::string(s) + "'");
}

/// Dimensions of a cost question: input width D, rank R, max degree N, and
/// the truncation n being evaluated.
struct CostQuery {
    std::int64_t dim = 1;
    std::int64_t rank = 1;
    std::int64_t max_degree = 1;
    std::int64_t truncation = 1;
    Parameterization parameterization = Parameterization::symmetric_cp;
    bool include_bias = false;
};

namespace detail {

inline std::int64_t checked_add(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_add_overflow(a, b, &r)) fail(Errc::overflow, "cost count overflows 64-bit integers");
    return r;
}

inline std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_mul_overflow(a, b, &r)) fail(Errc::overflow, "cost count overflows 64-bit integers");
    return r;
}

inline std::int64_t checked_pow(std::int64_t base, std::int64_t exp) {
    std::int64_t r = 1;
    for (std::int64_t i = 0; i < exp; ++i) r = checked_mul(r, base);
    return r;
}

inline void validate(const CostQuery& q) {
    require(q.dim >= 1, Errc::invalid_argument, "D must be positive");
    require(q.rank >= 1, Errc::invalid_argument, "R must be positive");
    require(q.max_degree >= 1, Errc::invalid_argument, "N must be >= 1");
    require(q.truncation >= 1 && q.truncation <= q.max_degree, Errc::invalid_argument, "n must lie in [1, N]");
}

} // namespace detail

/// Learned parameters of the whole degree-N model (independent of n):
///   raw           D + sum_{k=2..N} D^k
///   cp            D + sum_{k=2..N} (kRD + R)
///   symmetric_cp  D + sum_{k=2..N} (RD + R)
/// plus one when include_bias is set.
inline std::int64_t param_count(const CostQuery& q) {
    using namespace detail;
    validate(q);
    const std::int64_t rd = checked_mul(q.rank, q.dim);
    std::int64_t total = q.dim;
    for (std::int64_t k = 2; k <= q.max_degree; ++k) {
        switch (q.parameterization) {
        case Parameterization::raw: total = checked_add(total, checked_pow(q.dim, k)); break;
        case Parameterization::cp: total = checked_add(total, checked_add(checked_mul(k, rd), q.rank)); break;
        case Parameterization::symmetric_cp: total = checked_add(total, checked_add(rd, q.rank)); break;
        }
    }
    return q.include_bias ? checked_add(total, 1) : total;
}

/// Multiply-adds to evaluate truncation n:
///   raw           D + sum_{k=2..n} sum_{p=1..k} D^p
///   cp            D + sum_{k=2..n} (kRD + kR)
///   symmetric_cp  D + sum_{k=2..n} (RD + kR)
inline std::int64_t flop_count(const CostQuery& q) {
    using namespace detail;
    validate(q);
    const std::int64_t rd = checked_mul(q.rank, q.dim);
    std::int64_t total = q.dim;
    for (std::int64_t k = 2; k <= q.truncation; ++k) {
        switch (q.parameterization) {
        case Parameterization::raw:
            for (std::int64_t p = 1; p <= k; ++p) total = checked_add(total, checked_pow(q.dim, p));
            break;
        case Parameterization::cp:
            total = checked_add(total, checked_add(checked_mul(k, rd), checked_mul(k, q.rank)));
            break;
        case Parameterization::symmetric_cp:
            total = checked_add(total, checked_add(rd, checked_mul(k, q.rank)));
            break;
        }
    }
    return total;
}

/// Cumulative cost of evaluating a given model at truncation n under the
/// symmetric CP formulas.
template <typename T>
CostQuery model_cost_query(const BasicTpcModel<T>& model, std::size_t n, bool include_bias = false) {
    return CostQuery{static_cast<std::int64_t>(model.input_dim()), static_cast<std::int64_t>(model.rank()),
                     static_cast<std::int64_t>(model.max_degree()), static_cast<std::int64_t>(n),
                     Parameterization::symmetric_cp, include_bias};
}

/// Parameters consumed by truncation n: the linear probe plus the degree 2..n
/// terms. Equals param_count when n = N.
template <typename T>
std::int64_t truncation_params(const BasicTpcModel<T>& model, std::size_t n, bool include_bias = false) {
    auto q = model_cost_query(model, n, include_bias);
    q.max_degree = q.truncation;
    return param_count(q);
}

/// Multiply-adds executed by an instrumented run of the factorized forward pass.
template <std::floating_point T>
std::int64_t audit_flops(const BasicTpcModel<T>& model, std::span<const T> z, std::size_t n) {
    detail::check_input(model, z);
    detail::check_truncation(model, n);
    const auto zs = detail::scaled(model, z);
    detail::MacCounter counter;
    (void)detail::forward_scaled<T>(model, zs, n, counter);
    return counter.count;
}

} // namespace tpc
