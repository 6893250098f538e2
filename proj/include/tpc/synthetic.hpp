#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include "tpc/dataset.hpp"
#include "tpc/error.hpp"

namespace tpc {

/// Synthetic problems whose decision boundary has a known polynomial degree.
///
///  - linear:        y = 1[w . z > 0] for a seeded standard-normal w.
///  - xor_quadratic: y = 1[z0 * z1 > 0]. Degree 2 with rank >= 2 represents
///                   this boundary exactly, since
///                   z0 z1 = 1/4 [(z0 + z1)^2 - (z0 - z1)^2].
///                   No linear function does better than chance.
///  - cubic_parity:  y = 1[z0 * z1 * z2 > 0], a degree-3 boundary.
///
/// Features are i.i.d. standard normal. Label noise: each label is flipped
/// independently with probability P(e > 1) for e ~ N(0, noise_std^2), i.e.
/// 0.5 * erfc(1 / (noise_std * sqrt(2))); noise_std = 0 gives clean labels and
/// the flip rate tends to 0.5 as noise_std grows.
enum class SyntheticKind { linear, xor_quadratic, cubic_parity };

inline SyntheticKind parse_synthetic_kind(std::string_view s) {
    if (s == "linear") return SyntheticKind::linear;
    if (s == "xor_quadratic") return SyntheticKind::xor_quadratic;
    if (s == "cubic_parity") return SyntheticKind::cubic_parity;
    detail::fail(Errc::invalid_argument, "unknown dataset kind '" + std::string(s) +
                                              "' (expected linear, xor_quadratic or cubic_parity)");
}

inline std::string_view to_string(SyntheticKind k) {
    switch (k) {
    case SyntheticKind::linear: return "linear";
    case SyntheticKind::xor_quadratic: return "xor_quadratic";
    case SyntheticKind::cubic_parity: return "cubic_parity";
    }
    return "?";
}

inline std::size_t required_dim(SyntheticKind k) {
    switch (k) {
    case SyntheticKind::linear: return 1;
    case SyntheticKind::xor_quadratic: return 2;
    case SyntheticKind::cubic_parity: return 3;
    }
    return 1;
}

inline double label_flip_probability(double noise_std) {
    if (noise_std <= 0.0) return 0.0;
    return 0.5 * std::erfc(1.0 / (noise_std * std::sqrt(2.0)));
}

inline LabeledDataset gen_synthetic(SyntheticKind kind, std::size_t rows, std::size_t dim, double noise_std,
                                    std::uint64_t seed) {
    detail::require(dim >= required_dim(kind), Errc::invalid_argument,
                    std::string(to_string(kind)) + " needs dim >= " + std::to_string(required_dim(kind)) + ", got " +
                        std::to_string(dim));
    detail::require(rows > 0, Errc::invalid_argument, "row count must be positive");
    detail::require(noise_std >= 0.0 && std::isfinite(noise_std), Errc::invalid_argument, "noise_std must be >= 0");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> direction;
    if (kind == SyntheticKind::linear) {
        direction.resize(dim);
        for (auto& v : direction) v = normal(rng);
    }

    LabeledDataset out;
    out.features = Matrix<double>(rows, dim);
    out.labels.resize(rows);
    out.metadata.source = "synthetic:" + std::string(to_string(kind));
    for (std::size_t i = 0; i < rows; ++i) {
        auto z = out.features.row(i);
        for (auto& v : z) v = normal(rng);
        double score = 0.0;
        switch (kind) {
        case SyntheticKind::linear:
            for (std::size_t d = 0; d < dim; ++d) score += direction[d] * z[d];
            break;
        case SyntheticKind::xor_quadratic: score = z[0] * z[1]; break;
        case SyntheticKind::cubic_parity: score = z[0] * z[1] * z[2]; break;
        }
        out.labels[i] = score > 0.0 ? 1 : 0;
    }

    const double flip = label_flip_probability(noise_std);
    if (flip > 0.0) {
        std::bernoulli_distribution coin(flip);
        for (auto& l : out.labels)
            if (coin(rng)) l ^= 1;
    }
    return out;
}

} // namespace tpc
