#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tpc/error.hpp"
#include "tpc/matrix.hpp"
#include "tpc/model.hpp"

namespace tpc {

/// Logistic function, evaluated on the branch that cannot overflow.
template <std::floating_point T>
T sigmoid(T x) {
    if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
    const T e = std::exp(x);
    return e / (T{1} + e);
}

namespace detail {

/// Counter policies for the forward kernels. `mac()` is called once per
/// multiply-add actually executed.
struct NoMacs {
    void mac(std::int64_t = 1) noexcept {}
};

struct MacCounter {
    std::int64_t count = 0;
    void mac(std::int64_t n = 1) noexcept { count += n; }
};

template <typename T, typename Counter>
T linear_part(std::span<const T> w, std::span<const T> z, Counter& c) {
    T s{0};
    for (std::size_t d = 0; d < z.size(); ++d) {
        s += z[d] * w[d];
        c.mac();
    }
    return s;
}

/// sum_r lambda_r (u_r . z)^k with the power taken by k-1 repeated products.
template <typename T, typename Counter>
T degree_term(const DegreeTerm<T>& term, std::size_t k, std::span<const T> z, Counter& c) {
    const std::size_t rank = term.lambda.size();
    T total{0};
    for (std::size_t r = 0; r < rank; ++r) {
        const auto u = term.factors.row(r);
        T s{0};
        for (std::size_t d = 0; d < z.size(); ++d) {
            s += u[d] * z[d];
            c.mac();
        }
        T p = s;
        for (std::size_t i = 1; i < k; ++i) {
            p *= s;
            c.mac();
        }
        total += term.lambda[r] * p;
        c.mac();
    }
    return total;
}

template <typename T>
void check_input(const BasicTpcModel<T>& model, std::span<const T> z) {
    require(z.size() == model.input_dim(), Errc::dimension_mismatch,
            "input has length " + std::to_string(z.size()) + ", model expects " +
                std::to_string(model.input_dim()));
}

template <typename T>
void check_truncation(const BasicTpcModel<T>& model, std::size_t n) {
    require(n >= 1, Errc::invalid_argument, "truncation must be >= 1");
    require(n <= model.trained_through(), Errc::invalid_argument,
            "truncation " + std::to_string(n) + " exceeds trained degree " +
                std::to_string(model.trained_through()));
}

template <typename T>
std::vector<T> scaled(const BasicTpcModel<T>& model, std::span<const T> z) {
    std::vector<T> out(z.size());
    model.scaler().apply(z, out);
    return out;
}

/// Truncated forward pass on an already-scaled input; no validation.
template <typename T, typename Counter = NoMacs>
T forward_scaled(const BasicTpcModel<T>& model, std::span<const T> zs, std::size_t n, Counter&& c = {}) {
    T y = model.bias() + linear_part(model.linear(), zs, c);
    for (std::size_t k = 2; k <= n; ++k) y += degree_term(model.term(k), k, zs, c);
    return y;
}

} // namespace detail

/// Evaluates the first n terms, w0 + z.w1 + sum_{k=2..n} sum_r lambda_r (z.u_r)^k,
/// on a raw input (the model's scaler is applied first). n = 1 is exactly the
/// linear probe.
template <std::floating_point T>
T forward_truncated(const BasicTpcModel<T>& model, std::span<const T> z, std::size_t n) {
    detail::check_input(model, z);
    detail::check_truncation(model, n);
    const auto zs = detail::scaled(model, z);
    return detail::forward_scaled<T>(model, zs, n);
}

/// The linear probe alone: w0 + z.w1.
template <std::floating_point T>
T forward_linear(const BasicTpcModel<T>& model, std::span<const T> z) {
    detail::check_input(model, z);
    const auto zs = detail::scaled(model, z);
    detail::NoMacs c;
    return model.bias() + detail::linear_part<T>(model.linear(), zs, c);
}

/// Contribution of degree k alone.
template <std::floating_point T>
T forward_term(const BasicTpcModel<T>& model, std::span<const T> z, std::size_t k) {
    detail::check_input(model, z);
    detail::require(k >= 2 && k <= model.trained_through(), Errc::invalid_argument,
                    "term degree " + std::to_string(k) + " outside [2, " +
                        std::to_string(model.trained_through()) + "]");
    const auto zs = detail::scaled(model, z);
    detail::NoMacs c;
    return detail::degree_term(model.term(k), k, std::span<const T>(zs), c);
}

/// Fully materialized order-k tensor of side `dim`, row-major with the last
/// index fastest.
template <std::floating_point T>
struct DenseTensor {
    std::size_t dim = 0;
    std::size_t order = 0;
    std::vector<T> values;

    T at(std::span<const std::size_t> index) const {
        std::size_t flat = 0;
        for (std::size_t i : index) flat = flat * dim + i;
        return values[flat];
    }
};

inline constexpr std::size_t kDenseEntryLimit = 10'000'000;

/// W[d1..dk] = sum_r lambda_r prod_m u_{r,d_m}. The product runs over the
/// sorted multi-index, so every permutation of an index yields the same bits.
template <std::floating_point T>
DenseTensor<T> reconstruct_dense_weights(const BasicTpcModel<T>& model, std::size_t k) {
    detail::require(k >= 2 && k <= model.trained_through(), Errc::invalid_argument,
                    "dense reconstruction degree " + std::to_string(k) + " outside [2, " +
                        std::to_string(model.trained_through()) + "]");
    const std::size_t dim = model.input_dim();
    std::size_t entries = 1;
    for (std::size_t m = 0; m < k; ++m) {
        detail::require(entries <= kDenseEntryLimit / dim, Errc::overflow,
                        "dense tensor would exceed " + std::to_string(kDenseEntryLimit) + " entries");
        entries *= dim;
    }

    const auto& term = model.term(k);
    DenseTensor<T> out{dim, k, std::vector<T>(entries)};
    std::vector<std::size_t> index(k, 0), sorted(k);
    for (std::size_t flat = 0; flat < entries; ++flat) {
        std::copy(index.begin(), index.end(), sorted.begin());
        std::sort(sorted.begin(), sorted.end());
        T w{0};
        for (std::size_t r = 0; r < model.rank(); ++r) {
            T p = term.lambda[r];
            for (std::size_t m = 0; m < k; ++m) p *= term.factors(r, sorted[m]);
            w += p;
        }
        out.values[flat] = w;
        for (std::size_t m = k; m-- > 0;) {
            if (++index[m] < dim) break;
            index[m] = 0;
        }
    }
    return out;
}

/// Explicit polynomial by successive mode contractions of each dense tensor
/// with z (no scaling). `tensors[i]` holds the degree i+2 weights. Meant as a
/// test oracle for small dimensions.
template <std::floating_point T>
T forward_dense_oracle(T bias, std::span<const T> linear, std::span<const DenseTensor<T>> tensors,
                       std::span<const T> z, std::size_t n) {
    detail::require(linear.size() == z.size(), Errc::dimension_mismatch, "linear weights and input differ in length");
    detail::require(n >= 1 && n <= tensors.size() + 1, Errc::invalid_argument, "truncation outside available tensors");
    T y = bias;
    for (std::size_t d = 0; d < z.size(); ++d) y += linear[d] * z[d];
    for (std::size_t k = 2; k <= n; ++k) {
        const auto& t = tensors[k - 2];
        detail::require(t.dim == z.size() && t.order == k, Errc::dimension_mismatch,
                        "dense tensor shape does not match degree " + std::to_string(k));
        std::vector<T> cur = t.values;
        for (std::size_t mode = k; mode > 0; --mode) {
            std::vector<T> next(cur.size() / t.dim, T{0});
            for (std::size_t outer = 0; outer < next.size(); ++outer)
                for (std::size_t d = 0; d < t.dim; ++d) next[outer] += cur[outer * t.dim + d] * z[d];
            cur = std::move(next);
        }
        y += cur[0];
    }
    return y;
}

/// Ordinary (untied) CP term of degree k: k separate R x D factor matrices.
template <std::floating_point T>
struct NonSymCpTerm {
    std::size_t degree = 2;
    std::vector<T> lambda;
    std::vector<Matrix<T>> factors;
};

/// w0 + z.w1 + sum_k sum_r lambda_r prod_j (V_j z)_r over terms of degree <= n.
/// Terms must be ordered by ascending degree starting at 2.
template <std::floating_point T>
T forward_nonsym_cp(T bias, std::span<const T> linear, std::span<const NonSymCpTerm<T>> terms,
                    std::span<const T> z, std::size_t n) {
    detail::require(linear.size() == z.size(), Errc::dimension_mismatch, "linear weights and input differ in length");
    detail::require(n >= 1, Errc::invalid_argument, "truncation must be >= 1");
    detail::NoMacs c;
    T y = bias + detail::linear_part(linear, z, c);
    for (const auto& term : terms) {
        if (term.degree > n) break;
        detail::require(term.factors.size() == term.degree, Errc::dimension_mismatch,
                        "CP term of degree " + std::to_string(term.degree) + " needs that many factor matrices");
        T total{0};
        for (std::size_t r = 0; r < term.lambda.size(); ++r) {
            T p{0};
            for (std::size_t j = 0; j < term.degree; ++j) {
                const auto& v = term.factors[j];
                detail::require(v.rows() == term.lambda.size() && v.cols() == z.size(), Errc::dimension_mismatch,
                                "CP factor matrix must be R x D");
                T s{0};
                for (std::size_t d = 0; d < z.size(); ++d) s += v(r, d) * z[d];
                p = (j == 0) ? s : p * s;
            }
            total += term.lambda[r] * p;
        }
        y += total;
    }
    return y;
}

/// Batched truncated forward pass over the rows of `inputs`.
template <std::floating_point T>
std::vector<T> forward_batch(const BasicTpcModel<T>& model, const Matrix<T>& inputs, std::size_t n) {
    detail::require(inputs.cols() == model.input_dim(), Errc::dimension_mismatch, "batch width differs from input_dim");
    detail::check_truncation(model, n);
    std::vector<T> out(inputs.rows());
    std::vector<T> zs(model.input_dim());
    for (std::size_t i = 0; i < inputs.rows(); ++i) {
        model.scaler().apply(inputs.row(i), zs);
        out[i] = detail::forward_scaled<T>(model, zs, n);
    }
    return out;
}

} // namespace tpc
