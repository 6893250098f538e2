#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tpc/error.hpp"

namespace tpc {

struct Confusion {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t tn = 0;
    std::int64_t fn = 0;

    std::int64_t total() const noexcept { return tp + fp + tn + fn; }

    double precision() const noexcept { return tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp); }
    double recall() const noexcept { return tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn); }
    double accuracy() const noexcept { return total() == 0 ? 0.0 : double(tp + tn) / double(total()); }

    /// F1 on the positive class; 0 when precision + recall is 0.
    double f1() const noexcept {
        const double p = precision(), r = recall();
        return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    }
};

inline Confusion confusion(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> labels) {
    detail::require(predictions.size() == labels.size(), Errc::dimension_mismatch,
                    "predictions and labels differ in length");
    detail::require(!labels.empty(), Errc::invalid_argument, "metrics need at least one example");
    Confusion c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool p = predictions[i] != 0, y = labels[i] != 0;
        if (p && y) ++c.tp;
        else if (p) ++c.fp;
        else if (y) ++c.fn;
        else ++c.tn;
    }
    return c;
}

inline double f1_score(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> labels) {
    return confusion(predictions, labels).f1();
}

inline double accuracy(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> labels) {
    return confusion(predictions, labels).accuracy();
}

/// 1 iff logit >= threshold. The default threshold 0 puts p = 0.5 on the positive side.
template <typename T>
std::vector<std::uint8_t> classify(std::span<const T> logits, T threshold = T{0}) {
    std::vector<std::uint8_t> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] >= threshold ? 1 : 0;
    return out;
}

struct EceConfig {
    std::size_t num_bins = 10;
};

/// Expected calibration error over equal-width confidence bins on [0, 1].
/// Confidence is that of the predicted class, max(p, 1 - p), with p >= 0.5
/// predicting positive. The top bin is closed.
inline double ece(std::span<const double> probabilities, std::span<const std::uint8_t> labels, EceConfig config = {}) {
    detail::require(!probabilities.empty(), Errc::invalid_argument, "ECE of an empty set");
    detail::require(probabilities.size() == labels.size(), Errc::dimension_mismatch,
                    "probabilities and labels differ in length");
    detail::require(config.num_bins >= 1, Errc::invalid_argument, "ECE needs at least one bin");
    const std::size_t bins = config.num_bins;
    std::vector<double> conf_sum(bins, 0.0), correct(bins, 0.0);
    std::vector<std::size_t> count(bins, 0);
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        const double p = probabilities[i];
        detail::require(p >= 0.0 && p <= 1.0, Errc::invalid_argument, "probability outside [0, 1]");
        const bool predicted = p >= 0.5;
        const double conf = predicted ? p : 1.0 - p;
        auto b = static_cast<std::size_t>(std::floor(conf * static_cast<double>(bins)));
        if (b >= bins) b = bins - 1;
        conf_sum[b] += conf;
        correct[b] += (predicted == (labels[i] != 0)) ? 1.0 : 0.0;
        ++count[b];
    }
    const double total = static_cast<double>(probabilities.size());
    double e = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
        if (count[b] == 0) continue;
        const double n = static_cast<double>(count[b]);
        e += (n / total) * std::abs(correct[b] / n - conf_sum[b] / n);
    }
    return e;
}

} // namespace tpc
