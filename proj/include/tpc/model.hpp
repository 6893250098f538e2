#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tpc/error.hpp"
#include "tpc/matrix.hpp"

namespace tpc {

/// Per-feature standardization, (z - mean) / scale. A default-constructed
/// scaler of a given width is the identity.
template <std::floating_point T>
class BasicFeatureScaler {
public:
    BasicFeatureScaler() = default;
    explicit BasicFeatureScaler(std::size_t dim) : mean_(dim, T{0}), scale_(dim, T{1}) {}

    BasicFeatureScaler(std::vector<T> mean, std::vector<T> scale)
        : mean_(std::move(mean)), scale_(std::move(scale)) {
        detail::require(mean_.size() == scale_.size(), Errc::dimension_mismatch,
                        "scaler mean and scale lengths differ");
        for (T s : scale_)
            detail::require(s > T{0} && std::isfinite(s), Errc::invalid_argument,
                            "scaler entries must be finite and strictly positive");
    }

    /// Population statistics over the rows of `features`. Constant columns get
    /// scale 1 so they pass through centered.
    static BasicFeatureScaler fit(const Matrix<T>& features) {
        detail::require(features.rows() > 0, Errc::invalid_argument, "cannot fit scaler on empty data");
        const std::size_t n = features.rows(), d = features.cols();
        std::vector<T> mean(d, T{0}), scale(d, T{0});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) mean[j] += features(i, j);
        for (auto& m : mean) m /= static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                const T c = features(i, j) - mean[j];
                scale[j] += c * c;
            }
        for (auto& s : scale) {
            s = std::sqrt(s / static_cast<T>(n));
            if (!(s > T{0})) s = T{1};
        }
        return BasicFeatureScaler(std::move(mean), std::move(scale));
    }

    std::size_t dim() const noexcept { return mean_.size(); }
    const std::vector<T>& mean() const noexcept { return mean_; }
    const std::vector<T>& scale() const noexcept { return scale_; }

    void apply(std::span<const T> in, std::span<T> out) const {
        for (std::size_t j = 0; j < mean_.size(); ++j) out[j] = (in[j] - mean_[j]) / scale_[j];
    }

    void invert(std::span<const T> in, std::span<T> out) const {
        for (std::size_t j = 0; j < mean_.size(); ++j) out[j] = in[j] * scale_[j] + mean_[j];
    }

    /// Identifies the exact parameter bytes; used to tag datasets already scaled.
    std::uint64_t fingerprint() const {
        std::string bytes(reinterpret_cast<const char*>(mean_.data()), mean_.size() * sizeof(T));
        bytes.append(reinterpret_cast<const char*>(scale_.data()), scale_.size() * sizeof(T));
        const auto h = static_cast<std::uint64_t>(std::hash<std::string_view>{}(bytes));
        return h == 0 ? 1 : h;
    }

    template <std::floating_point U>
    BasicFeatureScaler<U> cast() const {
        return BasicFeatureScaler<U>(std::vector<U>(mean_.begin(), mean_.end()),
                                     std::vector<U>(scale_.begin(), scale_.end()));
    }

    friend bool operator==(const BasicFeatureScaler&, const BasicFeatureScaler&) = default;

private:
    std::vector<T> mean_;
    std::vector<T> scale_;
};

/// Parameters of one degree k >= 2: coefficients lambda (R) and factors U (R x D).
template <std::floating_point T>
struct DegreeTerm {
    std::vector<T> lambda;
    Matrix<T> factors;

    friend bool operator==(const DegreeTerm&, const DegreeTerm&) = default;
};

/// A degree-N truncated polynomial classifier with symmetric CP factorized
/// higher-order terms. Degree k's weight tensor is
/// sum_r lambda_r * (u_r o u_r o ... o u_r), k times.
template <std::floating_point T>
class BasicTpcModel {
public:
    using value_type = T;

    BasicTpcModel(std::size_t input_dim, std::size_t max_degree, std::size_t rank)
        : input_dim_(input_dim), max_degree_(max_degree), rank_(rank),
          linear_(input_dim, T{0}), scaler_(input_dim) {
        detail::require(input_dim > 0, Errc::invalid_argument, "input_dim must be positive");
        detail::require(max_degree > 0, Errc::invalid_argument, "max_degree must be positive");
        detail::require(rank > 0, Errc::invalid_argument, "rank must be positive");
        terms_.resize(max_degree - 1);
        for (auto& t : terms_) {
            t.lambda.assign(rank, T{0});
            t.factors = Matrix<T>(rank, input_dim);
        }
    }

    std::size_t input_dim() const noexcept { return input_dim_; }
    std::size_t max_degree() const noexcept { return max_degree_; }
    std::size_t rank() const noexcept { return rank_; }
    std::size_t trained_through() const noexcept { return trained_through_; }

    void set_trained_through(std::size_t k) {
        detail::require(k >= 1 && k <= max_degree_, Errc::invalid_argument,
                        "trained_through must lie in [1, max_degree]");
        trained_through_ = k;
    }

    T bias() const noexcept { return bias_; }
    T& bias() noexcept { return bias_; }

    std::span<const T> linear() const noexcept { return linear_; }
    std::span<T> linear() noexcept { return linear_; }

    /// Parameters of degree k, 2 <= k <= max_degree.
    const DegreeTerm<T>& term(std::size_t k) const { return terms_.at(term_index(k)); }
    DegreeTerm<T>& term(std::size_t k) { return terms_.at(term_index(k)); }

    const BasicFeatureScaler<T>& scaler() const noexcept { return scaler_; }
    void set_scaler(BasicFeatureScaler<T> s) {
        detail::require(s.dim() == input_dim_, Errc::dimension_mismatch, "scaler width differs from input_dim");
        scaler_ = std::move(s);
    }

    template <std::floating_point U>
    BasicTpcModel<U> cast() const {
        BasicTpcModel<U> out(input_dim_, max_degree_, rank_);
        out.bias() = static_cast<U>(bias_);
        for (std::size_t d = 0; d < input_dim_; ++d) out.linear()[d] = static_cast<U>(linear_[d]);
        for (std::size_t k = 2; k <= max_degree_; ++k) {
            const auto& src = term(k);
            auto& dst = out.term(k);
            dst.lambda.assign(src.lambda.begin(), src.lambda.end());
            dst.factors = src.factors.template cast<U>();
        }
        out.set_scaler(scaler_.template cast<U>());
        out.set_trained_through(trained_through_);
        return out;
    }

    friend bool operator==(const BasicTpcModel&, const BasicTpcModel&) = default;

private:
    std::size_t term_index(std::size_t k) const {
        detail::require(k >= 2 && k <= max_degree_, Errc::invalid_argument,
                        "degree " + std::to_string(k) + " outside [2, " + std::to_string(max_degree_) + "]");
        return k - 2;
    }

    std::size_t input_dim_;
    std::size_t max_degree_;
    std::size_t rank_;
    T bias_ = T{0};
    std::vector<T> linear_;
    std::vector<DegreeTerm<T>> terms_;
    BasicFeatureScaler<T> scaler_;
    std::size_t trained_through_ = 1;
};

using FeatureScaler = BasicFeatureScaler<double>;
using TpcModel = BasicTpcModel<double>;

} // namespace tpc
