#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "tpc/dataset.hpp"
#include "tpc/error.hpp"
#include "tpc/metrics.hpp"
#include "tpc/model.hpp"
#include "tpc/optim.hpp"
#include "tpc/poly.hpp"

namespace tpc {

struct TrainConfig {
    double learning_rate = 1e-3;
    double weight_decay = 0.01;
    double dropout_rate = 0.0;
    std::size_t epochs_per_degree = 50;
    std::size_t batch_size = 1024;
    double grad_clip_norm = 1.0;
    double lr_plateau_factor = 0.5;
    std::size_t lr_plateau_patience = 5;
    std::uint64_t seed = 0;
    std::vector<double> l2_inverse_strengths{100.0, 10.0, 1.0, 0.1, 0.01, 0.001};
    std::size_t linear_max_epochs = 500;
    double linear_grad_tolerance = 1e-6;
    /// Worker threads for grid cells; 0 uses the hardware concurrency.
    std::size_t threads = 0;

    void validate() const {
        using detail::require;
        require(learning_rate > 0.0, Errc::invalid_argument, "learning_rate must be positive");
        require(weight_decay >= 0.0, Errc::invalid_argument, "weight_decay must be non-negative");
        require(dropout_rate >= 0.0 && dropout_rate < 1.0, Errc::invalid_argument, "dropout_rate must lie in [0, 1)");
        require(epochs_per_degree > 0, Errc::invalid_argument, "epochs_per_degree must be positive");
        require(batch_size > 0, Errc::invalid_argument, "batch_size must be positive");
        require(grad_clip_norm > 0.0, Errc::invalid_argument, "grad_clip_norm must be positive");
        require(lr_plateau_factor > 0.0 && lr_plateau_factor < 1.0, Errc::invalid_argument,
                "lr_plateau_factor must lie in (0, 1)");
        require(lr_plateau_patience > 0, Errc::invalid_argument, "lr_plateau_patience must be positive");
        require(!l2_inverse_strengths.empty(), Errc::invalid_argument, "l2_inverse_strengths must not be empty");
        for (double c : l2_inverse_strengths)
            require(c > 0.0, Errc::invalid_argument, "inverse regularization strengths must be positive");
    }
};

struct GridCell {
    double learning_rate = 1e-3;
    double weight_decay = 0.01;
    double dropout_rate = 0.0;
};

struct GridSpec {
    std::vector<double> learning_rates{1e-3, 5e-4, 1e-4};
    std::vector<double> weight_decays{0.01, 0.1, 1.0};
    std::vector<double> dropout_rates{0.0, 0.2, 0.5};

    void validate() const {
        detail::require(!learning_rates.empty() && !weight_decays.empty() && !dropout_rates.empty(),
                        Errc::invalid_argument, "grid axes must be non-empty");
    }

    /// Cells in grid order: learning rate outermost, dropout innermost.
    std::vector<GridCell> cells() const {
        std::vector<GridCell> out;
        for (double lr : learning_rates)
            for (double wd : weight_decays)
                for (double p : dropout_rates) out.push_back({lr, wd, p});
        return out;
    }
};

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double learning_rate = 0.0;
};

struct CellOutcome {
    GridCell cell;
    double val_f1 = 0.0;
    double val_loss = 0.0;
};

/// Outcome of the per-degree grid: the chosen cell with its loss curve.
struct DegreeSelection {
    std::size_t degree = 2;
    GridCell chosen;
    double val_f1 = 0.0;
    double val_loss = 0.0;
    double seconds = 0.0;
    std::vector<EpochStats> curve;
    std::vector<CellOutcome> cells;
};

struct LinearSweepEntry {
    double inverse_strength = 1.0;
    double val_f1 = 0.0;
    double val_loss = 0.0;
    std::size_t epochs = 0;
    double grad_norm = 0.0;
};

struct LinearSelection {
    double inverse_strength = 1.0;
    double val_f1 = 0.0;
    double val_loss = 0.0;
    double seconds = 0.0;
    std::vector<LinearSweepEntry> sweep;
};

struct TruncationMetrics {
    std::size_t truncation = 1;
    double val_f1 = 0.0;
    double val_accuracy = 0.0;
    double val_loss = 0.0;
};

struct TrainReport {
    LinearSelection linear;
    std::vector<DegreeSelection> degrees;
    std::vector<TruncationMetrics> truncations;
};

// ---------------------------------------------------------------------------

inline constexpr double kProbabilityClamp = 1e-12;

/// Mean binary cross-entropy of sigmoid(logits) against labels, with
/// probabilities clamped to [1e-12, 1 - 1e-12].
inline double bce_loss(std::span<const double> logits, std::span<const std::uint8_t> labels) {
    detail::require(!logits.empty(), Errc::invalid_argument, "loss of an empty batch");
    detail::require(logits.size() == labels.size(), Errc::dimension_mismatch, "logits and labels differ in length");
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double p = std::clamp(sigmoid(logits[i]), kProbabilityClamp, 1.0 - kProbabilityClamp);
        total -= labels[i] ? std::log(p) : std::log(1.0 - p);
    }
    return total / static_cast<double>(logits.size());
}

/// d(per-example bce_loss)/d(logit): sigmoid(logit) - label, and exactly 0
/// where the probability clamp is active, since the clamped loss is flat there.
inline double bce_residual(double logit, std::uint8_t label) {
    const double p = sigmoid(logit);
    if (p < kProbabilityClamp || p > 1.0 - kProbabilityClamp) return 0.0;
    return p - static_cast<double>(label);
}

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (std::uint64_t{words[0]} << 32) | words[1];
}

template <typename F>
void parallel_for(std::size_t count, std::size_t threads, F&& body) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < count;) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

inline void require_scaled_for(const LabeledDataset& data, const TpcModel& model, const char* which) {
    require(data.dim() == model.input_dim(), Errc::dimension_mismatch,
            std::string(which) + " width differs from model input_dim");
    require(data.metadata.scaled_with != 0 && data.metadata.scaled_with == model.scaler().fingerprint(),
            Errc::invalid_argument, std::string(which) + " is not scaled with the model's scaler");
}

inline std::vector<double> truncated_logits(const TpcModel& model, const LabeledDataset& scaled, std::size_t n) {
    std::vector<double> out(scaled.size());
    for (std::size_t i = 0; i < scaled.size(); ++i) out[i] = forward_scaled<double>(model, scaled.features.row(i), n);
    return out;
}

/// Degree-k parameters as one flat vector: lambda (R) followed by U (R x D).
struct DegreeParams {
    std::size_t dim;
    std::size_t rank;
    std::size_t degree;
    std::vector<double> values;

    std::span<double> lambda() { return {values.data(), rank}; }
    std::span<const double> lambda() const { return {values.data(), rank}; }
    std::span<const double> factor_row(std::size_t r) const { return {values.data() + rank + r * dim, dim}; }

    static DegreeParams from(const TpcModel& model, std::size_t k) {
        DegreeParams p{model.input_dim(), model.rank(), k, {}};
        const auto& t = model.term(k);
        p.values = t.lambda;
        p.values.insert(p.values.end(), t.factors.data().begin(), t.factors.data().end());
        return p;
    }

    void store(TpcModel& model) const {
        auto& t = model.term(degree);
        std::copy_n(values.begin(), rank, t.lambda.begin());
        std::copy(values.begin() + static_cast<std::ptrdiff_t>(rank), values.end(), t.factors.data().begin());
    }
};

/// sum_r lambda_r s_r^k, filling s with the projections u_r . z.
inline double degree_value(const DegreeParams& p, std::span<const double> z, std::span<double> s) {
    double total = 0.0;
    for (std::size_t r = 0; r < p.rank; ++r) {
        const auto u = p.factor_row(r);
        double dot = 0.0;
        for (std::size_t d = 0; d < p.dim; ++d) dot += u[d] * z[d];
        s[r] = dot;
        double pw = dot;
        for (std::size_t i = 1; i < p.degree; ++i) pw *= dot;
        total += p.values[r] * pw;
    }
    return total;
}

/// Adds weight * d(term)/d(params) into grad, given projections s.
inline void accumulate_degree_gradient(const DegreeParams& p, std::span<const double> z, std::span<const double> s,
                                       double weight, std::span<double> grad) {
    const std::size_t k = p.degree;
    for (std::size_t r = 0; r < p.rank; ++r) {
        double pw_km1 = 1.0;
        for (std::size_t i = 1; i < k; ++i) pw_km1 *= s[r];
        grad[r] += weight * pw_km1 * s[r];
        const double coef = weight * p.values[r] * static_cast<double>(k) * pw_km1;
        double* g = grad.data() + p.rank + r * p.dim;
        for (std::size_t d = 0; d < p.dim; ++d) g[d] += coef * z[d];
    }
}

inline double loss_with(const DegreeParams& p, const LabeledDataset& scaled, std::span<const double> frozen) {
    std::vector<double> logits(scaled.size()), s(p.rank);
    for (std::size_t i = 0; i < scaled.size(); ++i) logits[i] = frozen[i] + degree_value(p, scaled.features.row(i), s);
    return bce_loss(logits, scaled.labels);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Linear probe

struct LogisticFit {
    double bias = 0.0;
    std::vector<double> weights;
    std::size_t epochs = 0;
    double grad_norm = 0.0;
};

/// L2-regularized logistic regression on already-scaled rows, minimizing
///   mean BCE + ||w||^2 / (2 C I)
/// (the usual C-weighted objective divided by C I; the bias is not penalized)
/// by accelerated full-batch gradient descent with step 1/L.
inline LogisticFit fit_logistic(const LabeledDataset& scaled, double inverse_strength, std::size_t max_epochs = 500,
                                double grad_tolerance = 1e-6) {
    detail::require(scaled.size() > 0, Errc::invalid_argument, "empty dataset");
    detail::require(inverse_strength > 0.0, Errc::invalid_argument, "inverse regularization strength must be positive");
    const std::size_t n = scaled.size(), dim = scaled.dim();
    const double inv_n = 1.0 / static_cast<double>(n);
    const double reg = inv_n / inverse_strength;

    // Largest eigenvalue of the augmented second-moment matrix by power iteration.
    std::vector<double> v(dim + 1, 1.0 / std::sqrt(static_cast<double>(dim + 1))), mv(dim + 1);
    double eig = 1.0;
    for (int it = 0; it < 100; ++it) {
        std::fill(mv.begin(), mv.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto x = scaled.features.row(i);
            double dot = v[dim];
            for (std::size_t d = 0; d < dim; ++d) dot += x[d] * v[d];
            for (std::size_t d = 0; d < dim; ++d) mv[d] += dot * x[d];
            mv[dim] += dot;
        }
        double norm = 0.0;
        for (double& m : mv) {
            m *= inv_n;
            norm += m * m;
        }
        norm = std::sqrt(norm);
        if (norm == 0.0) break;
        const double change = std::abs(norm - eig) / norm;
        eig = norm;
        for (std::size_t d = 0; d <= dim; ++d) v[d] = mv[d] / norm;
        if (change < 1e-10) break;
    }
    const double lipschitz = 0.25 * eig * 1.05 + reg;
    const double step = 1.0 / lipschitz;

    // theta = (w, b); y is the extrapolated point.
    std::vector<double> theta(dim + 1, 0.0), prev(dim + 1, 0.0), y(dim + 1, 0.0), grad(dim + 1);
    auto gradient_at = [&](const std::vector<double>& at) {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto x = scaled.features.row(i);
            double logit = at[dim];
            for (std::size_t d = 0; d < dim; ++d) logit += x[d] * at[d];
            const double r = bce_residual(logit, scaled.labels[i]);
            for (std::size_t d = 0; d < dim; ++d) grad[d] += r * x[d];
            grad[dim] += r;
        }
        double sq = 0.0;
        for (std::size_t d = 0; d <= dim; ++d) {
            grad[d] *= inv_n;
            if (d < dim) grad[d] += reg * at[d];
            sq += grad[d] * grad[d];
        }
        return std::sqrt(sq);
    };

    LogisticFit fit;
    double momentum_t = 1.0;
    for (std::size_t epoch = 1; epoch <= max_epochs; ++epoch) {
        fit.epochs = epoch;
        fit.grad_norm = gradient_at(y);
        if (fit.grad_norm < grad_tolerance) {
            theta = y;
            break;
        }
        prev = theta;
        double restart = 0.0;
        for (std::size_t d = 0; d <= dim; ++d) {
            theta[d] = y[d] - step * grad[d];
            restart += grad[d] * (theta[d] - prev[d]);
        }
        if (restart > 0.0) momentum_t = 1.0;
        const double next_t = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum_t * momentum_t));
        const double beta = (momentum_t - 1.0) / next_t;
        momentum_t = next_t;
        for (std::size_t d = 0; d <= dim; ++d) y[d] = theta[d] + beta * (theta[d] - prev[d]);
    }
    if (fit.grad_norm >= grad_tolerance) fit.grad_norm = gradient_at(theta);

    fit.bias = theta[dim];
    fit.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(dim));
    return fit;
}

struct LinearFit {
    double bias = 0.0;
    std::vector<double> weights;
    FeatureScaler scaler;
    LinearSelection selection;
};

namespace detail {

/// Grid-selection rule: higher validation F1, then lower validation loss,
/// then earlier position.
inline bool better_candidate(double f1, double loss, double best_f1, double best_loss) {
    if (f1 != best_f1) return f1 > best_f1;
    return loss < best_loss;
}

} // namespace detail

/// Fits the scaler on `train`, then sweeps the inverse regularization
/// strengths and keeps the probe with the best validation F1.
inline LinearFit fit_linear(const LabeledDataset& train, const LabeledDataset& val, const TrainConfig& config) {
    config.validate();
    detail::require(train.size() > 0 && val.size() > 0, Errc::invalid_argument, "empty dataset");
    detail::require(train.has_both_classes(), Errc::invalid_argument, "training data must contain both classes");
    detail::require(train.dim() == val.dim(), Errc::dimension_mismatch, "train and validation widths differ");
    const auto start = std::chrono::steady_clock::now();

    LinearFit out;
    out.scaler = FeatureScaler::fit(train.features);
    const auto train_s = scale_dataset(train, out.scaler);
    const auto val_s = scale_dataset(val, out.scaler);

    TpcModel probe(train.dim(), 1, 1);
    probe.set_scaler(out.scaler);
    bool have = false;
    for (double c : config.l2_inverse_strengths) {
        const auto fit = fit_logistic(train_s, c, config.linear_max_epochs, config.linear_grad_tolerance);
        probe.bias() = fit.bias;
        std::copy(fit.weights.begin(), fit.weights.end(), probe.linear().begin());
        const auto logits = detail::truncated_logits(probe, val_s, 1);
        const double f1 = f1_score(classify<double>(logits), val_s.labels);
        const double loss = bce_loss(logits, val_s.labels);
        out.selection.sweep.push_back({c, f1, loss, fit.epochs, fit.grad_norm});
        if (!have || detail::better_candidate(f1, loss, out.selection.val_f1, out.selection.val_loss)) {
            have = true;
            out.bias = fit.bias;
            out.weights = fit.weights;
            out.selection.inverse_strength = c;
            out.selection.val_f1 = f1;
            out.selection.val_loss = loss;
        }
    }
    out.selection.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

// ---------------------------------------------------------------------------
// Progressive degree fitting

struct DegreeFit {
    TpcModel model;
    std::vector<EpochStats> curve;
    double val_f1 = 0.0;
    double val_loss = 0.0;
};

/// Trains degree k = trained_through + 1 with every lower degree frozen.
/// Both datasets must be scaled with the model's scaler (see scale_dataset).
/// lambda starts at zero, so the new term begins as an exact no-op; U starts
/// uniform in [-1/sqrt(D), 1/sqrt(D)]. Dropout, when enabled, zeroes the
/// frozen partial logit per example (rescaled by 1/(1-p)) during training
/// only. The learning rate follows a plateau schedule on validation loss.
inline DegreeFit fit_degree(const TpcModel& model, std::size_t k, const LabeledDataset& train,
                            const LabeledDataset& val, const TrainConfig& config) {
    config.validate();
    detail::require(k >= 2 && k <= model.max_degree(), Errc::invalid_argument,
                    "degree " + std::to_string(k) + " outside [2, " + std::to_string(model.max_degree()) + "]");
    detail::require(k == model.trained_through() + 1, Errc::invalid_argument,
                    "progressive order violated: model is trained through degree " +
                        std::to_string(model.trained_through()) + ", cannot fit degree " + std::to_string(k));
    detail::require(train.size() > 0 && val.size() > 0, Errc::invalid_argument, "empty dataset");
    detail::require_scaled_for(train, model, "training data");
    detail::require_scaled_for(val, model, "validation data");

    const std::size_t dim = model.input_dim(), rank = model.rank();
    const auto frozen_train = detail::truncated_logits(model, train, k - 1);
    const auto frozen_val = detail::truncated_logits(model, val, k - 1);

    std::mt19937_64 rng(detail::mix_seed(config.seed, k));
    detail::DegreeParams params{dim, rank, k, std::vector<double>(rank + rank * dim, 0.0)};
    {
        const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
        std::uniform_real_distribution<double> init(-bound, bound);
        for (std::size_t i = rank; i < params.values.size(); ++i) params.values[i] = init(rng);
    }

    AdamW optimizer(params.values.size(), {config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
    PlateauScheduler scheduler(config.lr_plateau_factor, config.lr_plateau_patience);
    std::bernoulli_distribution drop(config.dropout_rate);
    const double keep_scale = 1.0 / (1.0 - config.dropout_rate);

    DegreeFit out{model, {}, 0.0, 0.0};
    double lr = config.learning_rate;
    out.curve.push_back({0, detail::loss_with(params, train, frozen_train), detail::loss_with(params, val, frozen_val), lr});

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> grad(params.values.size()), s(rank);
    for (std::size_t epoch = 1; epoch <= config.epochs_per_degree; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(stop - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t i = order[b];
                double frozen = frozen_train[i];
                if (config.dropout_rate > 0.0) frozen = drop(rng) ? 0.0 : frozen * keep_scale;
                const auto z = train.features.row(i);
                const double logit = frozen + detail::degree_value(params, z, s);
                const double residual = bce_residual(logit, train.labels[i]);
                detail::accumulate_degree_gradient(params, z, s, residual * inv_batch, grad);
            }
            clip_grad_norm(grad, config.grad_clip_norm);
            optimizer.set_learning_rate(lr);
            optimizer.step(params.values, grad);
        }
        const double train_loss = detail::loss_with(params, train, frozen_train);
        const double val_loss = detail::loss_with(params, val, frozen_val);
        out.curve.push_back({epoch, train_loss, val_loss, lr});
        scheduler.step(val_loss, lr);
    }

    params.store(out.model);
    out.model.set_trained_through(k);
    const auto logits = detail::truncated_logits(out.model, val, k);
    out.val_f1 = f1_score(classify<double>(logits), val.labels);
    out.val_loss = bce_loss(logits, val.labels);
    return out;
}

struct ProgressiveFit {
    TpcModel model;
    TrainReport report;
};

/// Linear probe first, then degrees 2..N one at a time, each chosen by a full
/// grid over (learning rate, weight decay, dropout). Selection per degree is
/// by validation F1 at that truncation, then validation loss, then grid order.
inline ProgressiveFit fit_progressive(const LabeledDataset& train, const LabeledDataset& val, std::size_t max_degree,
                                      std::size_t rank, const GridSpec& grid, const TrainConfig& config) {
    config.validate();
    grid.validate();
    detail::require(max_degree >= 1, Errc::invalid_argument, "max_degree must be >= 1");
    detail::require(rank >= 1, Errc::invalid_argument, "rank must be >= 1");

    auto linear = fit_linear(train, val, config);
    ProgressiveFit out{TpcModel(train.dim(), max_degree, rank), {}};
    out.model.set_scaler(linear.scaler);
    out.model.bias() = linear.bias;
    std::copy(linear.weights.begin(), linear.weights.end(), out.model.linear().begin());
    out.report.linear = std::move(linear.selection);

    const auto train_s = scale_dataset(train, out.model.scaler());
    const auto val_s = scale_dataset(val, out.model.scaler());
    const auto cells = grid.cells();

    for (std::size_t k = 2; k <= max_degree; ++k) {
        const auto start = std::chrono::steady_clock::now();
        std::vector<std::optional<DegreeFit>> fits(cells.size());
        detail::parallel_for(cells.size(), config.threads, [&](std::size_t c) {
            TrainConfig cell_config = config;
            cell_config.learning_rate = cells[c].learning_rate;
            cell_config.weight_decay = cells[c].weight_decay;
            cell_config.dropout_rate = cells[c].dropout_rate;
            fits[c] = fit_degree(out.model, k, train_s, val_s, cell_config);
        });

        std::size_t best = 0;
        DegreeSelection sel;
        sel.degree = k;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            sel.cells.push_back({cells[c], fits[c]->val_f1, fits[c]->val_loss});
            if (c > 0 && detail::better_candidate(fits[c]->val_f1, fits[c]->val_loss, fits[best]->val_f1, fits[best]->val_loss))
                best = c;
        }
        sel.chosen = cells[best];
        sel.val_f1 = fits[best]->val_f1;
        sel.val_loss = fits[best]->val_loss;
        sel.curve = fits[best]->curve;
        sel.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out.model = std::move(fits[best]->model);
        out.report.degrees.push_back(std::move(sel));
    }

    for (std::size_t n = 1; n <= out.model.trained_through(); ++n) {
        const auto logits = detail::truncated_logits(out.model, val_s, n);
        const auto preds = classify<double>(logits);
        const auto c = confusion(preds, val_s.labels);
        out.report.truncations.push_back({n, c.f1(), c.accuracy(), bce_loss(logits, val_s.labels)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gradient verification

/// Analytic gradient of the truncation-k loss with respect to degree k's
/// (lambda, U), flattened as lambda then U row-major. Degrees below k are
/// treated as constants; `scaled` holds already-scaled rows.
inline std::vector<double> degree_gradient(const TpcModel& model, std::size_t k, const LabeledDataset& scaled) {
    detail::require(scaled.size() > 0, Errc::invalid_argument, "empty batch");
    const auto params = detail::DegreeParams::from(model, k);
    const auto frozen = detail::truncated_logits(model, scaled, k - 1);
    std::vector<double> grad(params.values.size(), 0.0), s(params.rank);
    const double inv = 1.0 / static_cast<double>(scaled.size());
    for (std::size_t i = 0; i < scaled.size(); ++i) {
        const auto z = scaled.features.row(i);
        const double logit = frozen[i] + detail::degree_value(params, z, s);
        const double residual = bce_residual(logit, scaled.labels[i]);
        detail::accumulate_degree_gradient(params, z, s, residual * inv, grad);
    }
    return grad;
}

struct GradCheckResult {
    double max_relative_error = 0.0;
    double max_absolute_error = 0.0;
    std::size_t parameters = 0;
};

/// Compares degree_gradient against central differences of bce_loss at step
/// epsilon. The relative error of each entry is |a - f| / max(|a|, |f|, 1e-6).
inline GradCheckResult finite_diff_gradcheck(const TpcModel& model, std::size_t k, const LabeledDataset& scaled,
                                             double epsilon) {
    const auto analytic = degree_gradient(model, k, scaled);
    auto params = detail::DegreeParams::from(model, k);
    const auto frozen = detail::truncated_logits(model, scaled, k - 1);
    GradCheckResult out;
    out.parameters = analytic.size();
    for (std::size_t i = 0; i < params.values.size(); ++i) {
        const double saved = params.values[i];
        params.values[i] = saved + epsilon;
        const double up = detail::loss_with(params, scaled, frozen);
        params.values[i] = saved - epsilon;
        const double down = detail::loss_with(params, scaled, frozen);
        params.values[i] = saved;
        const double numeric = (up - down) / (2.0 * epsilon);
        const double abs_err = std::abs(analytic[i] - numeric);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
        out.max_absolute_error = std::max(out.max_absolute_error, abs_err);
        out.max_relative_error = std::max(out.max_relative_error, abs_err / denom);
    }
    return out;
}

} // namespace tpc
