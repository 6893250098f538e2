#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tpc/error.hpp"
#include "tpc/matrix.hpp"
#include "tpc/model.hpp"

namespace tpc {

struct DatasetMetadata {
    std::string source;
    std::optional<int> layer;
    std::optional<std::string> pooling;
    /// Fingerprint of the scaler already applied to the features; 0 when raw.
    std::uint64_t scaled_with = 0;

    friend bool operator==(const DatasetMetadata&, const DatasetMetadata&) = default;
};

/// I x D feature rows with binary labels.
struct LabeledDataset {
    Matrix<double> features;
    std::vector<std::uint8_t> labels;
    DatasetMetadata metadata;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dim() const noexcept { return features.cols(); }

    std::size_t positives() const noexcept {
        return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
    }
    bool has_both_classes() const noexcept {
        const auto p = positives();
        return p > 0 && p < size();
    }

    void validate() const {
        detail::require(features.rows() == labels.size(), Errc::dimension_mismatch, "row count differs from label count");
        for (std::size_t i = 0; i < labels.size(); ++i) {
            detail::require(labels[i] <= 1, Errc::format, "label outside {0,1} at row " + std::to_string(i));
            for (double v : features.row(i))
                detail::require(std::isfinite(v), Errc::format, "non-finite feature at row " + std::to_string(i));
        }
    }

    LabeledDataset subset(std::span<const std::size_t> rows) const {
        LabeledDataset out;
        out.features = Matrix<double>(rows.size(), dim());
        out.labels.resize(rows.size());
        out.metadata = metadata;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            std::copy_n(features.row(rows[i]).begin(), dim(), out.features.row(i).begin());
            out.labels[i] = labels[rows[i]];
        }
        return out;
    }

    friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

/// Rows transformed by `scaler`, tagged so training can verify the pairing.
inline LabeledDataset scale_dataset(const LabeledDataset& raw, const FeatureScaler& scaler) {
    detail::require(raw.metadata.scaled_with == 0, Errc::invalid_argument, "dataset is already scaled");
    detail::require(raw.dim() == scaler.dim(), Errc::dimension_mismatch, "scaler width differs from dataset width");
    LabeledDataset out = raw;
    for (std::size_t i = 0; i < out.size(); ++i) scaler.apply(raw.features.row(i), out.features.row(i));
    out.metadata.scaled_with = scaler.fingerprint();
    return out;
}

/// Mean over the token axis of a T x D activation matrix.
inline std::vector<double> mean_pool(const Matrix<double>& tokens) {
    detail::require(tokens.rows() >= 1, Errc::invalid_argument, "cannot pool an empty token sequence");
    // Running mean: repeated identical tokens leave the mean bit-exact.
    std::vector<double> out(tokens.row(0).begin(), tokens.row(0).end());
    for (std::size_t t = 1; t < tokens.rows(); ++t)
        for (std::size_t d = 0; d < tokens.cols(); ++d)
            out[d] += (tokens(t, d) - out[d]) / static_cast<double>(t + 1);
    return out;
}

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};

/// Seeded permutation of row indices cut at floor(fraction * I).
inline SplitIndices split_indices(std::size_t rows, double train_fraction, std::uint64_t seed) {
    detail::require(train_fraction > 0.0 && train_fraction < 1.0, Errc::invalid_argument,
                    "train fraction must lie in (0, 1)");
    const auto cut = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(rows)));
    detail::require(cut > 0 && cut < rows, Errc::invalid_argument,
                    "split of " + std::to_string(rows) + " rows leaves one side empty");
    std::vector<std::size_t> order(rows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    SplitIndices out;
    out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut));
    out.val.assign(order.begin() + static_cast<std::ptrdiff_t>(cut), order.end());
    return out;
}

inline std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& data, double train_fraction,
                                                       std::uint64_t seed) {
    const auto idx = split_indices(data.size(), train_fraction, seed);
    return {data.subset(idx.train), data.subset(idx.val)};
}

} // namespace tpc
