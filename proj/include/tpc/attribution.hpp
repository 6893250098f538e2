#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tpc/error.hpp"
#include "tpc/model.hpp"
#include "tpc/poly.hpp"

namespace tpc {

/// Contribution of the unordered feature pair (i, j) to the quadratic term.
struct PairAttribution {
    std::size_t i = 0;
    std::size_t j = 0;
    double value = 0.0;

    friend bool operator==(const PairAttribution&, const PairAttribution&) = default;
};

namespace detail {

template <typename T>
void check_quadratic(const BasicTpcModel<T>& model) {
    require(model.trained_through() >= 2, Errc::invalid_argument,
            "attribution needs a model trained through degree 2");
}

template <typename T>
T tied_weight(const DegreeTerm<T>& term, std::size_t i, std::size_t j) {
    T w{0};
    for (std::size_t r = 0; r < term.lambda.size(); ++r) w += term.lambda[r] * term.factors(r, i) * term.factors(r, j);
    return w;
}

/// Ranking order: larger |value| first, then (i, j) ascending.
inline bool ranks_before(const PairAttribution& a, const PairAttribution& b) {
    const double ma = std::abs(a.value), mb = std::abs(b.value);
    if (ma != mb) return ma > mb;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
}

} // namespace detail

/// c_ij = 2 * (sum_r lambda_r u_ri u_rj) * z_i * z_j on the scaled input.
/// Both orderings of the pair share one tied weight, hence the factor two.
template <std::floating_point T>
T pairwise_attribution(const BasicTpcModel<T>& model, std::span<const T> z, std::size_t i, std::size_t j) {
    detail::check_input(model, z);
    detail::check_quadratic(model);
    detail::require(i < model.input_dim() && j < model.input_dim(), Errc::invalid_argument, "feature index out of range");
    detail::require(i != j, Errc::invalid_argument, "pairwise attribution needs distinct features; use diagonal_attribution");
    const auto zs = detail::scaled(model, z);
    const std::size_t a = std::min(i, j), b = std::max(i, j);
    const T w = detail::tied_weight(model.term(2), a, b);
    return (T{2} * w) * zs[a] * zs[b];
}

/// Self-interaction w_ii * z_i^2, the part of the quadratic term pairs leave out.
template <std::floating_point T>
T diagonal_attribution(const BasicTpcModel<T>& model, std::span<const T> z, std::size_t i) {
    detail::check_input(model, z);
    detail::check_quadratic(model);
    detail::require(i < model.input_dim(), Errc::invalid_argument, "feature index out of range");
    const auto zs = detail::scaled(model, z);
    return detail::tied_weight(model.term(2), i, i) * zs[i] * zs[i];
}

/// The top_k distinct pairs by |c_ij|, signs kept, ties broken by (i, j).
/// Asking for more pairs than exist returns all of them.
template <std::floating_point T>
std::vector<PairAttribution> top_attributions(const BasicTpcModel<T>& model, std::span<const T> z, std::size_t top_k) {
    detail::check_input(model, z);
    detail::check_quadratic(model);
    const std::size_t dim = model.input_dim();
    const auto zs = detail::scaled(model, z);
    const auto& term = model.term(2);

    // Bounded heap whose front is the weakest kept pair.
    std::vector<PairAttribution> heap;
    if (top_k == 0) return heap;
    heap.reserve(std::min(top_k, dim * (dim - 1) / 2));
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = i + 1; j < dim; ++j) {
            const PairAttribution p{i, j, static_cast<double>((T{2} * detail::tied_weight(term, i, j)) * zs[i] * zs[j])};
            if (heap.size() < top_k) {
                heap.push_back(p);
                std::push_heap(heap.begin(), heap.end(), detail::ranks_before);
            } else if (detail::ranks_before(p, heap.front())) {
                std::pop_heap(heap.begin(), heap.end(), detail::ranks_before);
                heap.back() = p;
                std::push_heap(heap.begin(), heap.end(), detail::ranks_before);
            }
        }
    }
    std::sort(heap.begin(), heap.end(), detail::ranks_before);
    return heap;
}

} // namespace tpc
