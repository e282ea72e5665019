#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "smoothf1/matrix.hpp"

namespace smoothf1 {

/// Guards every metric denominator; an absent class scores 0, never NaN.
inline constexpr double kMetricEpsilon = 1e-16;

/// Hard (step-thresholded) confusion counts for one class.
struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;

    std::int64_t total() const { return tp + fp + fn + tn; }
};

/// Per-class counts at threshold t. A prediction equal to t counts as
/// positive.
inline std::vector<ConfusionCounts> hard_confusion(const LabelMatrix& y, const Matrix& scores,
                                                   double threshold) {
    require_same_shape(y.values(), scores, "hard_confusion");
    require(std::isfinite(threshold), "hard_confusion: threshold must be finite");
    const std::size_t n = y.rows(), classes = y.cols();
    std::vector<ConfusionCounts> counts(classes);
    for (std::size_t j = 0; j < classes; ++j) {
        ConfusionCounts& c = counts[j];
        for (std::size_t i = 0; i < n; ++i) {
            const bool predicted = scores(i, j) >= threshold;
            const bool actual = y(i, j) != 0.0;
            if (predicted && actual)
                ++c.tp;
            else if (predicted && !actual)
                ++c.fp;
            else if (!predicted && actual)
                ++c.fn;
            else
                ++c.tn;
        }
    }
    return counts;
}

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

inline Prf prf_from_counts(const ConfusionCounts& c) {
    require(c.tp >= 0 && c.fp >= 0 && c.fn >= 0 && c.tn >= 0,
            "prf_from_counts: counts must be non-negative");
    const double tp = static_cast<double>(c.tp);
    const double fp = static_cast<double>(c.fp);
    const double fn = static_cast<double>(c.fn);
    Prf out;
    out.precision = tp / (tp + fp + kMetricEpsilon);
    out.recall = tp / (tp + fn + kMetricEpsilon);
    out.f1 = 2.0 * tp / (2.0 * tp + fn + fp + kMetricEpsilon);
    return out;
}

enum class Average { micro, macro, weighted };

struct AggregateResult {
    double value = 0.0;
    bool zero_support = false;  // diagnostic: no positive label in any class
};

/// F1 aggregation across classes. macro: unweighted mean of per-class F1.
/// micro: F1 of counts pooled across classes. weighted: support-weighted mean
/// of per-class F1.
inline AggregateResult aggregate_f1(const std::vector<ConfusionCounts>& per_class,
                                    const std::vector<std::int64_t>& supports, Average mode) {
    require(per_class.size() == supports.size(), "aggregate_f1: class count mismatch");
    require(!per_class.empty(), "aggregate_f1: no classes");
    AggregateResult out;
    const double total_support =
        static_cast<double>(std::accumulate(supports.begin(), supports.end(), std::int64_t{0}));
    out.zero_support = total_support == 0.0;
    switch (mode) {
        case Average::macro: {
            double sum = 0.0;
            for (const auto& c : per_class)
                sum += prf_from_counts(c).f1;
            out.value = sum / static_cast<double>(per_class.size());
            break;
        }
        case Average::micro: {
            ConfusionCounts pooled;
            for (const auto& c : per_class) {
                pooled.tp += c.tp;
                pooled.fp += c.fp;
                pooled.fn += c.fn;
                pooled.tn += c.tn;
            }
            out.value = prf_from_counts(pooled).f1;
            break;
        }
        case Average::weighted: {
            if (out.zero_support) {
                out.value = 0.0;
                break;
            }
            double sum = 0.0;
            for (std::size_t j = 0; j < per_class.size(); ++j)
                sum += static_cast<double>(supports[j]) * prf_from_counts(per_class[j]).f1;
            out.value = sum / total_support;
            break;
        }
    }
    return out;
}

/// Support-weighted mean of arbitrary per-class values (used for aggregated
/// precision/recall in reports).
inline AggregateResult support_weighted_mean(const std::vector<double>& values,
                                             const std::vector<std::int64_t>& supports) {
    require(values.size() == supports.size(), "support_weighted_mean: size mismatch");
    AggregateResult out;
    double total = 0.0, sum = 0.0;
    for (std::size_t j = 0; j < values.size(); ++j) {
        total += static_cast<double>(supports[j]);
        sum += static_cast<double>(supports[j]) * values[j];
    }
    out.zero_support = total == 0.0;
    out.value = out.zero_support ? 0.0 : sum / total;
    return out;
}

struct ApResult {
    double value = 0.0;
    bool defined = false;  // false when the class has no positive example
};

/// Non-interpolated average precision: rank scores descending (ties broken by
/// ascending example index), then mean of precision-at-rank over the positive
/// examples.
inline ApResult average_precision(const std::vector<double>& y_col,
                                  const std::vector<double>& score_col) {
    require(y_col.size() == score_col.size(), "average_precision: size mismatch");
    std::vector<std::size_t> order(y_col.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return score_col[a] > score_col[b]; });
    std::int64_t positives_seen = 0;
    double sum = 0.0;
    std::int64_t total_positives = 0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        if (y_col[order[rank]] != 0.0) {
            ++positives_seen;
            ++total_positives;
            sum += static_cast<double>(positives_seen) / static_cast<double>(rank + 1);
        }
    }
    ApResult out;
    if (total_positives > 0) {
        out.defined = true;
        out.value = sum / static_cast<double>(total_positives);
    }
    return out;
}

struct MeanApResult {
    double value = 0.0;
    std::size_t excluded_classes = 0;  // classes with no positives, skipped
};

inline MeanApResult mean_average_precision(const LabelMatrix& y, const Matrix& scores) {
    require_same_shape(y.values(), scores, "mean_average_precision");
    const std::size_t n = y.rows(), classes = y.cols();
    MeanApResult out;
    double sum = 0.0;
    std::size_t defined = 0;
    std::vector<double> y_col(n), s_col(n);
    for (std::size_t j = 0; j < classes; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            y_col[i] = y(i, j);
            s_col[i] = scores(i, j);
        }
        const ApResult ap = average_precision(y_col, s_col);
        if (ap.defined) {
            sum += ap.value;
            ++defined;
        } else {
            ++out.excluded_classes;
        }
    }
    out.value = defined == 0 ? 0.0 : sum / static_cast<double>(defined);
    return out;
}

inline std::vector<std::int64_t> class_supports(const LabelMatrix& y) {
    std::vector<std::int64_t> supports(y.cols(), 0);
    for (std::size_t j = 0; j < y.cols(); ++j)
        for (std::size_t i = 0; i < y.rows(); ++i)
            if (y(i, j) != 0.0)
                ++supports[j];
    return supports;
}

/// Full inference-time evaluation at one decision threshold. Aggregated
/// precision/recall are support-weighted, matching weightedF1.
struct MetricReport {
    double threshold = 0.5;
    std::vector<double> precision_per_class;
    std::vector<double> recall_per_class;
    std::vector<double> f1_per_class;
    std::vector<std::int64_t> support;
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    double weighted_f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double map = 0.0;
    std::size_t map_excluded_classes = 0;
    bool zero_support = false;
};

inline MetricReport evaluate(const LabelMatrix& y, const Matrix& scores, double threshold) {
    MetricReport report;
    report.threshold = threshold;
    const auto counts = hard_confusion(y, scores, threshold);
    report.support = class_supports(y);
    for (const auto& c : counts) {
        const Prf prf = prf_from_counts(c);
        report.precision_per_class.push_back(prf.precision);
        report.recall_per_class.push_back(prf.recall);
        report.f1_per_class.push_back(prf.f1);
    }
    report.micro_f1 = aggregate_f1(counts, report.support, Average::micro).value;
    report.macro_f1 = aggregate_f1(counts, report.support, Average::macro).value;
    const AggregateResult weighted = aggregate_f1(counts, report.support, Average::weighted);
    report.weighted_f1 = weighted.value;
    report.zero_support = weighted.zero_support;
    report.precision = support_weighted_mean(report.precision_per_class, report.support).value;
    report.recall = support_weighted_mean(report.recall_per_class, report.support).value;
    const MeanApResult map = mean_average_precision(y, scores);
    report.map = map.value;
    report.map_excluded_classes = map.excluded_classes;
    return report;
}

/// Metric lookup by report field name; throws on unknown names so config
/// typos surface early.
inline double metric_by_name(const MetricReport& r, const std::string& name) {
    if (name == "weighted_f1") return r.weighted_f1;
    if (name == "micro_f1") return r.micro_f1;
    if (name == "macro_f1") return r.macro_f1;
    if (name == "precision") return r.precision;
    if (name == "recall") return r.recall;
    if (name == "map") return r.map;
    throw std::invalid_argument("unknown metric name: " + name);
}

/// Flat scalar view of a report, the shape it takes in serialized records.
inline std::vector<std::pair<std::string, double>> metric_report_fields(const MetricReport& r) {
    return {
        {"threshold", r.threshold},
        {"weighted_f1", r.weighted_f1},
        {"micro_f1", r.micro_f1},
        {"macro_f1", r.macro_f1},
        {"precision", r.precision},
        {"recall", r.recall},
        {"map", r.map},
        {"map_excluded_classes", static_cast<double>(r.map_excluded_classes)},
    };
}

}  // namespace smoothf1
