#pragma once

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "smoothf1/math.hpp"
#include "smoothf1/matrix.hpp"
#include "smoothf1/metrics.hpp"

namespace smoothf1 {

/// Real-valued confusion entries for one class. "hard" holds step-thresholded
/// counts, "unbounded" raw-probability sums, "smooth" sigmoid-transformed
/// sums. Every variant satisfies tp + fp + fn + tn = n per class.
enum class ConfusionVariant { hard, unbounded, smooth };

struct SmoothConfusion {
    double tp = 0.0;
    double fp = 0.0;
    double fn = 0.0;
    double tn = 0.0;
    ConfusionVariant variant = ConfusionVariant::unbounded;

    double total() const { return tp + fp + fn + tn; }
};

/// Confusion entries with the dichotomized prediction replaced by the raw
/// prediction value itself. Sums run over examples in ascending order, per
/// class in ascending order.
inline std::vector<SmoothConfusion> unbounded_confusion(const LabelMatrix& y, const Matrix& p) {
    require_same_shape(y.values(), p, "unbounded_confusion");
    std::vector<SmoothConfusion> out(y.cols());
    for (std::size_t j = 0; j < y.cols(); ++j) {
        SmoothConfusion& c = out[j];
        c.variant = ConfusionVariant::unbounded;
        for (std::size_t i = 0; i < y.rows(); ++i) {
            const double yij = y(i, j);
            const double pij = p(i, j);
            c.tp += pij * yij;
            c.fp += pij * (1.0 - yij);
            c.fn += (1.0 - pij) * yij;
            c.tn += (1.0 - pij) * (1.0 - yij);
        }
    }
    return out;
}

/// Confusion entries with S(.; beta, eta) applied element-wise to the
/// predictions before the same products as the unbounded variant.
inline std::vector<SmoothConfusion> smooth_confusion(const LabelMatrix& y, const Matrix& p,
                                                     SigmoidParams params) {
    require_same_shape(y.values(), p, "smooth_confusion");
    std::vector<SmoothConfusion> out(y.cols());
    for (std::size_t j = 0; j < y.cols(); ++j) {
        SmoothConfusion& c = out[j];
        c.variant = ConfusionVariant::smooth;
        for (std::size_t i = 0; i < y.rows(); ++i) {
            const double yij = y(i, j);
            const double sij = sigmoid_param(p(i, j), params);
            c.tp += sij * yij;
            c.fp += sij * (1.0 - yij);
            c.fn += (1.0 - sij) * yij;
            c.tn += (1.0 - sij) * (1.0 - yij);
        }
    }
    return out;
}

inline std::vector<SmoothConfusion> hard_confusion_real(const LabelMatrix& y, const Matrix& p,
                                                        double threshold) {
    const auto counts = hard_confusion(y, p, threshold);
    std::vector<SmoothConfusion> out(counts.size());
    for (std::size_t j = 0; j < counts.size(); ++j) {
        out[j].tp = static_cast<double>(counts[j].tp);
        out[j].fp = static_cast<double>(counts[j].fp);
        out[j].fn = static_cast<double>(counts[j].fn);
        out[j].tn = static_cast<double>(counts[j].tn);
        out[j].variant = ConfusionVariant::hard;
    }
    return out;
}

/// Loss value plus the exact analytic gradient with respect to the
/// predictions. per_class_f1 is a diagnostic, filled by the F1-based losses.
struct LossValue {
    double loss = 0.0;
    Matrix grad;
    Vector per_class_f1;
};

/// How per-class batch F1 scores are pooled into one loss. macro averages the
/// per-class quotients; micro pools entries across classes first.
enum class F1Aggregate { macro, micro };

namespace detail {

/// Shared core of the two F1 surrogates, operating on the (possibly
/// transformed) prediction matrix `s` and its element-wise derivative
/// `s_prime` with respect to the raw prediction. The per-class quotient is
/// F_j = 2 tp_j / (2 tp_j + fn_j + fp_j + eps), whose denominator reduces to
/// n_pos_j + sum_i s_ij, so its derivative in p_ij is s'_ij regardless of the
/// label.
inline LossValue f1_surrogate_loss(const LabelMatrix& y, const Matrix& s, const Matrix& s_prime,
                                   ConfusionVariant variant, F1Aggregate aggregate) {
    const std::size_t n = y.rows(), classes = y.cols();
    require(n >= 1, "f1_surrogate_loss: empty batch");
    LossValue out;
    out.grad = Matrix(n, classes);
    out.per_class_f1.resize(classes);

    std::vector<SmoothConfusion> conf = unbounded_confusion(y, s);
    for (auto& c : conf)
        c.variant = variant;

    Vector numer(classes), denom(classes);
    for (std::size_t j = 0; j < classes; ++j) {
        numer[j] = 2.0 * conf[j].tp;
        denom[j] = 2.0 * conf[j].tp + conf[j].fn + conf[j].fp + kMetricEpsilon;
        out.per_class_f1[j] = numer[j] / denom[j];
    }

    if (aggregate == F1Aggregate::macro) {
        double mean_f1 = 0.0;
        for (std::size_t j = 0; j < classes; ++j)
            mean_f1 += out.per_class_f1[j];
        mean_f1 /= static_cast<double>(classes);
        out.loss = 1.0 - mean_f1;
        const double scale = -1.0 / static_cast<double>(classes);
        for (std::size_t j = 0; j < classes; ++j) {
            const double a = numer[j], d = denom[j];
            for (std::size_t i = 0; i < n; ++i)
                out.grad(i, j) = scale * s_prime(i, j) * (2.0 * y(i, j) * d - a) / (d * d);
        }
    } else {
        double tp = 0.0, fp = 0.0, fn = 0.0;
        for (std::size_t j = 0; j < classes; ++j) {
            tp += conf[j].tp;
            fp += conf[j].fp;
            fn += conf[j].fn;
        }
        const double a = 2.0 * tp;
        const double d = 2.0 * tp + fn + fp + kMetricEpsilon;
        out.loss = 1.0 - a / d;
        for (std::size_t j = 0; j < classes; ++j)
            for (std::size_t i = 0; i < n; ++i)
                out.grad(i, j) = -s_prime(i, j) * (2.0 * y(i, j) * d - a) / (d * d);
    }
    return out;
}

}  // namespace detail

/// Sigmoid-smoothed F1 surrogate. Orientation: minimizes 1 - mean_j F1_j, so
/// all losses in the library share "lower is better".
inline LossValue sigmoid_f1_loss(const LabelMatrix& y, const Matrix& p, SigmoidParams params,
                                 F1Aggregate aggregate = F1Aggregate::macro) {
    require_same_shape(y.values(), p, "sigmoid_f1_loss");
    Matrix s(y.rows(), y.cols()), s_prime(y.rows(), y.cols());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double sij = sigmoid_param(p.data()[i], params);
        s.data()[i] = sij;
        s_prime.data()[i] = params.beta * sij * (1.0 - sij);
    }
    return detail::f1_surrogate_loss(y, s, s_prime, ConfusionVariant::smooth, aggregate);
}

/// Linear (identity-transformed) F1 surrogate; no thresholding at all.
inline LossValue unbounded_f1_loss(const LabelMatrix& y, const Matrix& p,
                                   F1Aggregate aggregate = F1Aggregate::macro) {
    require_same_shape(y.values(), p, "unbounded_f1_loss");
    Matrix s_prime(y.rows(), y.cols(), 1.0);
    return detail::f1_surrogate_loss(y, p, s_prime, ConfusionVariant::unbounded, aggregate);
}

inline constexpr double kProbabilityClamp = 1e-12;

/// Element-wise binary cross-entropy, mean over batch and classes.
/// Probabilities are clamped to [1e-12, 1 - 1e-12] before the logs.
inline LossValue cross_entropy_loss(const LabelMatrix& y, const Matrix& p) {
    require_same_shape(y.values(), p, "cross_entropy_loss");
    const std::size_t n = y.rows(), classes = y.cols();
    require(n >= 1, "cross_entropy_loss: empty batch");
    LossValue out;
    out.grad = Matrix(n, classes);
    const double scale = 1.0 / static_cast<double>(n * classes);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < classes; ++j) {
            const double yij = y(i, j);
            double pij = p(i, j);
            pij = std::min(std::max(pij, kProbabilityClamp), 1.0 - kProbabilityClamp);
            sum += -(yij * std::log(pij) + (1.0 - yij) * std::log(1.0 - pij));
            out.grad(i, j) = scale * (pij - yij) / (pij * (1.0 - pij));
        }
    out.loss = sum * scale;
    return out;
}

/// Focal loss with the standard (1 - p_t)^gamma modulation and no alpha
/// weighting. gamma = 0 reduces exactly to cross-entropy.
inline LossValue focal_loss(const LabelMatrix& y, const Matrix& p, double gamma) {
    require_same_shape(y.values(), p, "focal_loss");
    require(gamma >= 0.0, "focal_loss: gamma must be non-negative");
    const std::size_t n = y.rows(), classes = y.cols();
    require(n >= 1, "focal_loss: empty batch");
    LossValue out;
    out.grad = Matrix(n, classes);
    const double scale = 1.0 / static_cast<double>(n * classes);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < classes; ++j) {
            const double yij = y(i, j);
            double pij = p(i, j);
            pij = std::min(std::max(pij, kProbabilityClamp), 1.0 - kProbabilityClamp);
            const double pt = yij * pij + (1.0 - yij) * (1.0 - pij);
            const double mod = std::pow(1.0 - pt, gamma);
            sum += -mod * std::log(pt);
            // d/dpt of -(1-pt)^g ln(pt), then dpt/dp = 2y - 1.
            const double dpt = gamma * std::pow(1.0 - pt, gamma - 1.0) * std::log(pt) - mod / pt;
            out.grad(i, j) = scale * dpt * (2.0 * yij - 1.0);
        }
    out.loss = sum * scale;
    return out;
}

// ---------------------------------------------------------------------------
// Loss selection used by training and experiment configs.
// ---------------------------------------------------------------------------

enum class LossKind { cross_entropy, focal, unbounded_f1, sigmoid_f1 };

/// Which values the sigmoid F1 surrogate consumes: the head's raw logits
/// (default; S(.; beta, eta) is then the bounding squash itself, and the eta
/// offset acts on the unbounded scale) or the logistic-bounded probabilities.
/// The other losses always consume probabilities.
enum class LossInput { probability, logit };

struct LossSpec {
    LossKind kind = LossKind::sigmoid_f1;
    SigmoidParams params;           // sigmoid_f1 only
    double focal_gamma = 2.0;       // focal only
    LossInput input = LossInput::logit;
    F1Aggregate aggregate = F1Aggregate::macro;
};

inline std::string loss_kind_name(LossKind kind) {
    switch (kind) {
        case LossKind::cross_entropy: return "cross_entropy";
        case LossKind::focal: return "focal";
        case LossKind::unbounded_f1: return "unbounded_f1";
        case LossKind::sigmoid_f1: return "sigmoid_f1";
    }
    return "unknown";
}

inline LossKind parse_loss_kind(const std::string& name) {
    if (name == "cross_entropy") return LossKind::cross_entropy;
    if (name == "focal") return LossKind::focal;
    if (name == "unbounded_f1") return LossKind::unbounded_f1;
    if (name == "sigmoid_f1") return LossKind::sigmoid_f1;
    if (name == "asl")
        throw std::invalid_argument(
            "loss 'asl' is a recognized name but is not implemented in this library");
    throw std::invalid_argument("unknown loss name: " + name);
}

/// Canonical one-line form of a loss spec, used in checkpoints and reports.
inline std::string loss_spec_to_string(const LossSpec& spec) {
    char buffer[160];
    switch (spec.kind) {
        case LossKind::sigmoid_f1:
            std::snprintf(buffer, sizeof(buffer), "sigmoid_f1 beta=%.17g eta=%.17g input=%s aggregate=%s",
                          spec.params.beta, spec.params.eta,
                          spec.input == LossInput::logit ? "logit" : "probability",
                          spec.aggregate == F1Aggregate::micro ? "micro" : "macro");
            break;
        case LossKind::unbounded_f1:
            std::snprintf(buffer, sizeof(buffer), "unbounded_f1 aggregate=%s",
                          spec.aggregate == F1Aggregate::micro ? "micro" : "macro");
            break;
        case LossKind::focal:
            std::snprintf(buffer, sizeof(buffer), "focal gamma=%.17g", spec.focal_gamma);
            break;
        case LossKind::cross_entropy:
            std::snprintf(buffer, sizeof(buffer), "cross_entropy");
            break;
    }
    return buffer;
}

inline LossSpec loss_spec_from_string(const std::string& text) {
    std::istringstream in(text);
    std::string name;
    in >> name;
    LossSpec spec;
    spec.kind = parse_loss_kind(name);
    std::string item;
    while (in >> item) {
        const std::size_t eq = item.find('=');
        require(eq != std::string::npos, "loss spec: malformed item '" + item + "'");
        const std::string key = item.substr(0, eq);
        const std::string value = item.substr(eq + 1);
        if (key == "beta")
            spec.params.beta = std::stod(value);
        else if (key == "eta")
            spec.params.eta = std::stod(value);
        else if (key == "gamma")
            spec.focal_gamma = std::stod(value);
        else if (key == "input")
            spec.input = value == "logit" ? LossInput::logit : LossInput::probability;
        else if (key == "aggregate")
            spec.aggregate = value == "micro" ? F1Aggregate::micro : F1Aggregate::macro;
        else
            throw std::invalid_argument("loss spec: unknown key '" + key + "'");
    }
    return spec;
}

/// Evaluates the configured loss. `scores` must be on the scale the spec's
/// `input` field selects (only sigmoid_f1 accepts logits).
inline LossValue compute_loss(const LossSpec& spec, const LabelMatrix& y, const Matrix& scores) {
    switch (spec.kind) {
        case LossKind::cross_entropy: return cross_entropy_loss(y, scores);
        case LossKind::focal: return focal_loss(y, scores, spec.focal_gamma);
        case LossKind::unbounded_f1: return unbounded_f1_loss(y, scores, spec.aggregate);
        case LossKind::sigmoid_f1: return sigmoid_f1_loss(y, scores, spec.params, spec.aggregate);
    }
    throw std::invalid_argument("compute_loss: unknown loss kind");
}

}  // namespace smoothf1
