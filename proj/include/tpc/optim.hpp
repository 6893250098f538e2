#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "tpc/error.hpp"

namespace tpc {

/// Adam with decoupled weight decay over one flat parameter vector.
class AdamW {
public:
    struct Params {
        double learning_rate = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double epsilon = 1e-8;
        double weight_decay = 0.01;
    };

    AdamW(std::size_t parameter_count, Params params)
        : params_(params), m_(parameter_count, 0.0), v_(parameter_count, 0.0) {}

    void set_learning_rate(double lr) noexcept { params_.learning_rate = lr; }
    double learning_rate() const noexcept { return params_.learning_rate; }
    std::size_t steps() const noexcept { return step_; }

    void step(std::span<double> parameters, std::span<const double> gradients) {
        detail::require(parameters.size() == m_.size() && gradients.size() == m_.size(), Errc::dimension_mismatch,
                        "optimizer state size differs from parameter count");
        ++step_;
        const double lr = params_.learning_rate;
        const double bc1 = 1.0 - std::pow(params_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(params_.beta2, static_cast<double>(step_));
        const double decay = 1.0 - lr * params_.weight_decay;
        for (std::size_t i = 0; i < m_.size(); ++i) {
            const double g = gradients[i];
            parameters[i] *= decay;
            m_[i] = params_.beta1 * m_[i] + (1.0 - params_.beta1) * g;
            v_[i] = params_.beta2 * v_[i] + (1.0 - params_.beta2) * g * g;
            const double m_hat = m_[i] / bc1;
            const double v_hat = v_[i] / bc2;
            parameters[i] -= lr * m_hat / (std::sqrt(v_hat) + params_.epsilon);
        }
    }

private:
    Params params_;
    std::vector<double> m_;
    std::vector<double> v_;
    std::size_t step_ = 0;
};

/// Rescales `grads` in place so its L2 norm is at most max_norm. Returns the
/// norm before clipping.
inline double clip_grad_norm(std::span<double> grads, double max_norm) {
    double sq = 0.0;
    for (double g : grads) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double scale = max_norm / (norm + 1e-6);
        for (double& g : grads) g *= scale;
    }
    return norm;
}

/// Multiplies the learning rate by `factor` once the monitored loss has gone
/// more than `patience` epochs without a relative improvement of `threshold`.
class PlateauScheduler {
public:
    PlateauScheduler(double factor, std::size_t patience, double threshold = 1e-4)
        : factor_(factor), patience_(patience), threshold_(threshold) {}

    /// Feeds one epoch's metric; returns true when the rate was just reduced.
    bool step(double metric, double& learning_rate) {
        if (metric < best_ * (1.0 - threshold_)) {
            best_ = metric;
            bad_epochs_ = 0;
            return false;
        }
        if (++bad_epochs_ > patience_) {
            learning_rate *= factor_;
            bad_epochs_ = 0;
            return true;
        }
        return false;
    }

    double best() const noexcept { return best_; }

private:
    double factor_;
    std::size_t patience_;
    double threshold_;
    double best_ = std::numeric_limits<double>::infinity();
    std::size_t bad_epochs_ = 0;
};

} // namespace tpc
