#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "smoothf1/data.hpp"
#include "smoothf1/losses.hpp"
#include "smoothf1/math.hpp"
#include "smoothf1/matrix.hpp"
#include "smoothf1/rng.hpp"

namespace smoothf1 {

/// Raised when training produces a non-finite loss or gradient; the partial
/// loss trace travels with the exception so sweeps can record it.
struct TrainingDiverged : std::runtime_error {
    explicit TrainingDiverged(const std::string& message, std::vector<double> trace = {})
        : std::runtime_error(message), trace_prefix(std::move(trace)) {}
    std::vector<double> trace_prefix;
};

/// Two-layer classification head: rectified hidden layer, linear output
/// layer. The backbone is assumed frozen; its embeddings are the input.
struct HeadModel {
    std::size_t d_in = 0;
    std::size_t d_hidden = 0;
    std::size_t n_classes = 0;
    Seed init_seed = 0;
    Matrix w1;  // d_in x d_hidden
    Vector b1;  // d_hidden
    Matrix w2;  // d_hidden x C
    Vector b2;  // C

    bool all_finite() const {
        if (!w1.all_finite() || !w2.all_finite())
            return false;
        for (double v : b1)
            if (!std::isfinite(v))
                return false;
        for (double v : b2)
            if (!std::isfinite(v))
                return false;
        return true;
    }
};

/// Weights drawn from a normal scaled by 1/sqrt(fan_in), biases zero.
/// Draw order (w1 then w2) is fixed, so a seed fully determines the model.
inline HeadModel init_head(std::size_t d_in, std::size_t d_hidden, std::size_t n_classes,
                           Seed seed) {
    require(d_in >= 1 && d_hidden >= 1 && n_classes >= 1, "init_head: dims must be >= 1");
    HeadModel m;
    m.d_in = d_in;
    m.d_hidden = d_hidden;
    m.n_classes = n_classes;
    m.init_seed = seed;
    RngStream rng(seed);
    m.w1 = rng.normal_matrix(d_in, d_hidden);
    const double scale1 = 1.0 / std::sqrt(static_cast<double>(d_in));
    for (double& v : m.w1)
        v *= scale1;
    m.b1.assign(d_hidden, 0.0);
    m.w2 = rng.normal_matrix(d_hidden, n_classes);
    const double scale2 = 1.0 / std::sqrt(static_cast<double>(d_hidden));
    for (double& v : m.w2)
        v *= scale2;
    m.b2.assign(n_classes, 0.0);
    return m;
}

struct ForwardCache {
    Matrix x;              // input batch
    Matrix pre_hidden;     // x*w1 + b1 before the rectifier
    Matrix hidden;         // rectified
    Matrix logits;         // hidden*w2 + b2
    Matrix probabilities;  // element-wise logistic of logits
};

inline ForwardCache forward(const HeadModel& m, const Matrix& x) {
    require(x.cols() == m.d_in, "forward: input feature dimension mismatch");
    ForwardCache cache;
    cache.x = x;
    cache.pre_hidden = matmul(x, m.w1);
    for (std::size_t i = 0; i < cache.pre_hidden.rows(); ++i)
        for (std::size_t h = 0; h < m.d_hidden; ++h)
            cache.pre_hidden(i, h) += m.b1[h];
    cache.hidden = cache.pre_hidden;
    for (double& v : cache.hidden)
        v = std::max(v, 0.0);  // NaN passes through rather than being masked
    cache.logits = matmul(cache.hidden, m.w2);
    for (std::size_t i = 0; i < cache.logits.rows(); ++i)
        for (std::size_t j = 0; j < m.n_classes; ++j)
            cache.logits(i, j) += m.b2[j];
    cache.probabilities = Matrix(cache.logits.rows(), cache.logits.cols());
    for (std::size_t i = 0; i < cache.logits.size(); ++i)
        cache.probabilities.data()[i] = logistic(cache.logits.data()[i]);
    return cache;
}

struct HeadGradients {
    Matrix w1;
    Vector b1;
    Matrix w2;
    Vector b2;

    bool all_finite() const {
        if (!w1.all_finite() || !w2.all_finite())
            return false;
        for (double v : b1)
            if (!std::isfinite(v))
                return false;
        for (double v : b2)
            if (!std::isfinite(v))
                return false;
        return true;
    }
};

/// Chain rule from an upstream gradient back to all parameters. `scale` says
/// whether the upstream gradient is with respect to the probabilities
/// (default pipeline) or directly to the logits (logit-input losses).
inline HeadGradients backward(const HeadModel& m, const ForwardCache& cache,
                              const Matrix& upstream, ScoreScale scale) {
    require_same_shape(upstream, cache.logits, "backward");
    Matrix d_logits(upstream.rows(), upstream.cols());
    if (scale == ScoreScale::probability) {
        for (std::size_t i = 0; i < upstream.size(); ++i) {
            const double p = cache.probabilities.data()[i];
            d_logits.data()[i] = upstream.data()[i] * p * (1.0 - p);
        }
    } else {
        d_logits = upstream;
    }
    HeadGradients g;
    g.w2 = matmul_transpose_a(cache.hidden, d_logits);
    g.b2.assign(m.n_classes, 0.0);
    for (std::size_t i = 0; i < d_logits.rows(); ++i)
        for (std::size_t j = 0; j < m.n_classes; ++j)
            g.b2[j] += d_logits(i, j);
    Matrix d_hidden = matmul_transpose_b(d_logits, m.w2);
    for (std::size_t i = 0; i < d_hidden.rows(); ++i)
        for (std::size_t h = 0; h < m.d_hidden; ++h)
            if (cache.pre_hidden(i, h) <= 0.0)
                d_hidden(i, h) = 0.0;
    g.w1 = matmul_transpose_a(cache.x, d_hidden);
    g.b1.assign(m.d_hidden, 0.0);
    for (std::size_t i = 0; i < d_hidden.rows(); ++i)
        for (std::size_t h = 0; h < m.d_hidden; ++h)
            g.b1[h] += d_hidden(i, h);
    return g;
}

// ---------------------------------------------------------------------------
// Optimizers.
// ---------------------------------------------------------------------------

enum class OptimizerKind { sgd, adam };

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-3;
    AdamParams adam;
    std::int64_t step_count = 0;
    HeadGradients m;  // first moments, shapes mirror the parameters
    HeadGradients v;  // second moments
};

inline OptimizerState make_optimizer(OptimizerKind kind, double learning_rate,
                                     const HeadModel& model, AdamParams adam = {}) {
    require(learning_rate >= 0.0, "make_optimizer: learning rate must be non-negative");
    OptimizerState opt;
    opt.kind = kind;
    opt.learning_rate = learning_rate;
    opt.adam = adam;
    if (kind == OptimizerKind::adam) {
        opt.m.w1 = Matrix(model.w1.rows(), model.w1.cols());
        opt.m.w2 = Matrix(model.w2.rows(), model.w2.cols());
        opt.m.b1.assign(model.b1.size(), 0.0);
        opt.m.b2.assign(model.b2.size(), 0.0);
        opt.v = opt.m;
    }
    return opt;
}

namespace detail {

inline void sgd_update(double lr, double* param, const double* grad, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i)
        param[i] -= lr * grad[i];
}

inline void adam_update(OptimizerState& opt, double* param, const double* grad, double* m,
                        double* v, std::size_t count) {
    const double b1 = opt.adam.beta1, b2 = opt.adam.beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(opt.step_count));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(opt.step_count));
    for (std::size_t i = 0; i < count; ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
        v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
        const double m_hat = m[i] / correction1;
        const double v_hat = v[i] / correction2;
        param[i] -= opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.adam.epsilon);
    }
}

}  // namespace detail

/// One parameter update. Aborts on non-finite gradients rather than letting
/// NaN propagate silently into the parameters.
inline void step(OptimizerState& opt, HeadModel& model, const HeadGradients& grads) {
    if (!grads.all_finite())
        throw TrainingDiverged("step: non-finite gradient");
    ++opt.step_count;
    if (opt.kind == OptimizerKind::sgd) {
        detail::sgd_update(opt.learning_rate, model.w1.data(), grads.w1.data(), model.w1.size());
        detail::sgd_update(opt.learning_rate, model.b1.data(), grads.b1.data(), model.b1.size());
        detail::sgd_update(opt.learning_rate, model.w2.data(), grads.w2.data(), model.w2.size());
        detail::sgd_update(opt.learning_rate, model.b2.data(), grads.b2.data(), model.b2.size());
    } else {
        detail::adam_update(opt, model.w1.data(), grads.w1.data(), opt.m.w1.data(),
                            opt.v.w1.data(), model.w1.size());
        detail::adam_update(opt, model.b1.data(), grads.b1.data(), opt.m.b1.data(),
                            opt.v.b1.data(), model.b1.size());
        detail::adam_update(opt, model.w2.data(), grads.w2.data(), opt.m.w2.data(),
                            opt.v.w2.data(), model.w2.size());
        detail::adam_update(opt, model.b2.data(), grads.b2.data(), opt.m.b2.data(),
                            opt.v.b2.data(), model.b2.size());
    }
}

// ---------------------------------------------------------------------------
// Training loop.
// ---------------------------------------------------------------------------

struct TrainConfig {
    LossSpec loss;
    std::size_t epochs = 50;
    std::size_t batch_size = 256;
    OptimizerKind optimizer = OptimizerKind::adam;
    double learning_rate = 1e-3;
    AdamParams adam;
};

struct TrainResult {
    HeadModel model;
    std::vector<double> loss_trace;  // one entry per update step
};

inline Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& indices) {
    Matrix out(indices.size(), src.cols());
    for (std::size_t r = 0; r < indices.size(); ++r)
        for (std::size_t c = 0; c < src.cols(); ++c)
            out(r, c) = src(indices[r], c);
    return out;
}

/// Minibatch gradient descent of the head against the configured loss.
/// Batches are reshuffled every epoch from seeds derived from `run_seed`;
/// (seed, config) fully determines the trained parameters.
inline TrainResult train(HeadModel model, const Dataset& ds, const TrainConfig& cfg,
                         Seed run_seed) {
    require(ds.n() >= 1, "train: dataset is empty");
    require(ds.feature_dim() == model.d_in && ds.n_classes() == model.n_classes,
            "train: dataset shape does not match the model");
    require(cfg.batch_size >= 1, "train: batch_size must be >= 1");
    OptimizerState opt = make_optimizer(cfg.optimizer, cfg.learning_rate, model, cfg.adam);
    TrainResult result;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const Seed epoch_seed = derive_seed(run_seed, epoch);
        for (const auto& batch : batches(ds.n(), cfg.batch_size, epoch_seed)) {
            const Matrix bx = gather_rows(ds.x, batch);
            const LabelMatrix by(gather_rows(ds.y.values(), batch));
            const ForwardCache cache = forward(model, bx);
            const Matrix& loss_input = cfg.loss.kind == LossKind::sigmoid_f1 &&
                                               cfg.loss.input == LossInput::logit
                                           ? cache.logits
                                           : cache.probabilities;
            const LossValue value = compute_loss(cfg.loss, by, loss_input);
            if (!std::isfinite(value.loss))
                throw TrainingDiverged("train: non-finite loss at step " +
                                           std::to_string(result.loss_trace.size()),
                                       result.loss_trace);
            result.loss_trace.push_back(value.loss);
            const ScoreScale scale = cfg.loss.kind == LossKind::sigmoid_f1 &&
                                             cfg.loss.input == LossInput::logit
                                         ? ScoreScale::logit
                                         : ScoreScale::probability;
            HeadGradients grads;
            try {
                grads = backward(model, cache, value.grad, scale);
                step(opt, model, grads);
            } catch (TrainingDiverged& e) {
                throw TrainingDiverged(e.what(), result.loss_trace);
            }
        }
    }
    result.model = std::move(model);
    return result;
}

// ---------------------------------------------------------------------------
// Inference.
// ---------------------------------------------------------------------------

/// How raw head outputs are bounded into scores at inference time. logistic
/// treats classes independently (the multilabel default); softmax normalizes
/// across classes, which forces scores to compete -- with a single class it
/// degenerates to the constant 1.
enum class Bounding { logistic, softmax };

inline ScoreMatrix predict_scores(const HeadModel& m, const Matrix& x,
                                  Bounding bounding = Bounding::logistic) {
    const ForwardCache cache = forward(m, x);
    if (bounding == Bounding::logistic)
        return {cache.probabilities, ScoreScale::probability};
    Matrix scores(cache.logits.rows(), cache.logits.cols());
    Vector row(cache.logits.cols());
    for (std::size_t i = 0; i < cache.logits.rows(); ++i) {
        for (std::size_t j = 0; j < cache.logits.cols(); ++j)
            row[j] = cache.logits(i, j);
        const Vector soft = softmax(row);
        for (std::size_t j = 0; j < cache.logits.cols(); ++j)
            scores(i, j) = soft[j];
    }
    return {std::move(scores), ScoreScale::probability};
}

inline LabelMatrix predict(const HeadModel& m, const Matrix& x, double threshold,
                           Bounding bounding = Bounding::logistic) {
    const ScoreMatrix scores = predict_scores(m, x, bounding);
    Matrix labels(scores.values.rows(), scores.values.cols());
    for (std::size_t i = 0; i < labels.size(); ++i)
        labels.data()[i] = scores.values.data()[i] >= threshold ? 1.0 : 0.0;
    return LabelMatrix(std::move(labels));
}

}  // namespace smoothf1
