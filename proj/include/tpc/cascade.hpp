#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tpc/costmodel.hpp"
#include "tpc/dataset.hpp"
#include "tpc/error.hpp"
#include "tpc/metrics.hpp"
#include "tpc/model.hpp"
#include "tpc/poly.hpp"

namespace tpc {

/// Early-exit rule: stop after degree n once sigmoid(y) leaves (tau, 1 - tau).
struct CascadePolicy {
    double tau = 0.0;
    std::size_t max_degree = 1;

    void validate() const {
        detail::require(tau >= 0.0 && tau <= 0.5, Errc::invalid_argument, "tau must lie in [0, 0.5]");
        detail::require(max_degree >= 1, Errc::invalid_argument, "cascade max_degree must be >= 1");
    }
};

struct CascadeOutcome {
    double logit = 0.0;
    std::size_t exit_degree = 1;
    std::int64_t params_used = 0;
    std::int64_t flops_used = 0;
};

/// Per-truncation cumulative costs, indexed by n - 1.
struct CascadeCosts {
    std::vector<std::int64_t> params;
    std::vector<std::int64_t> flops;

    template <typename T>
    static CascadeCosts for_model(const BasicTpcModel<T>& model, std::size_t max_degree) {
        CascadeCosts c;
        for (std::size_t n = 1; n <= max_degree; ++n) {
            c.params.push_back(truncation_params(model, n));
            c.flops.push_back(flop_count(model_cost_query(model, n)));
        }
        return c;
    }
};

namespace detail {

inline bool confident(double y, double tau) {
    const double p = sigmoid(y);
    return !(p > tau && p < 1.0 - tau);
}

template <typename T>
CascadeOutcome cascade_scaled(const BasicTpcModel<T>& model, std::span<const T> zs, const CascadePolicy& policy,
                              const CascadeCosts& costs) {
    NoMacs c;
    T y = model.bias();
    std::size_t n = 1;
    for (;; ++n) {
        y += n == 1 ? linear_part(model.linear(), zs, c) : degree_term(model.term(n), n, zs, c);
        if (n == policy.max_degree || confident(static_cast<double>(y), policy.tau)) break;
    }
    return {static_cast<double>(y), n, costs.params[n - 1], costs.flops[n - 1]};
}

template <typename T>
void check_policy(const BasicTpcModel<T>& model, const CascadePolicy& policy) {
    policy.validate();
    require(policy.max_degree <= model.trained_through(), Errc::invalid_argument,
            "cascade depth " + std::to_string(policy.max_degree) + " exceeds trained degree " +
                std::to_string(model.trained_through()));
}

} // namespace detail

/// Runs the cascade on one raw input. The running logit after n steps is
/// bit-identical to forward_truncated(z, n).
template <std::floating_point T>
CascadeOutcome cascade_predict(const BasicTpcModel<T>& model, std::span<const T> z, const CascadePolicy& policy) {
    detail::check_input(model, z);
    detail::check_policy(model, policy);
    const auto zs = detail::scaled(model, z);
    return detail::cascade_scaled<T>(model, zs, policy, CascadeCosts::for_model(model, policy.max_degree));
}

struct CascadeSummary {
    std::vector<CascadeOutcome> outcomes;
    std::vector<std::uint8_t> predictions;
    Confusion confusion;
    std::int64_t net_params = 0;
    std::int64_t net_flops = 0;
    /// exit_histogram[n - 1] counts inputs that exited at degree n.
    std::vector<std::size_t> exit_histogram;
};

template <std::floating_point T>
CascadeSummary cascade_evaluate(const BasicTpcModel<T>& model, const Matrix<T>& inputs,
                                std::span<const std::uint8_t> labels, const CascadePolicy& policy) {
    detail::require(inputs.rows() > 0, Errc::invalid_argument, "cascade over an empty dataset");
    detail::require(inputs.rows() == labels.size(), Errc::dimension_mismatch, "inputs and labels differ in length");
    detail::require(inputs.cols() == model.input_dim(), Errc::dimension_mismatch, "input width differs from model");
    detail::check_policy(model, policy);
    const auto costs = CascadeCosts::for_model(model, policy.max_degree);

    CascadeSummary out;
    out.exit_histogram.assign(policy.max_degree, 0);
    std::vector<T> zs(model.input_dim());
    for (std::size_t i = 0; i < inputs.rows(); ++i) {
        model.scaler().apply(inputs.row(i), zs);
        const auto o = detail::cascade_scaled<T>(model, zs, policy, costs);
        out.outcomes.push_back(o);
        out.predictions.push_back(o.logit >= 0.0 ? 1 : 0);
        out.net_params += o.params_used;
        out.net_flops += o.flops_used;
        ++out.exit_histogram[o.exit_degree - 1];
    }
    out.confusion = confusion(out.predictions, labels);
    return out;
}

inline CascadeSummary cascade_evaluate(const TpcModel& model, const LabeledDataset& data, const CascadePolicy& policy) {
    return cascade_evaluate(model, data.features, data.labels, policy);
}

} // namespace tpc
