#pragma once

#include <algorithm>
#include <cmath>

#include "smoothf1/losses.hpp"
#include "smoothf1/matrix.hpp"
#include "smoothf1/rng.hpp"

namespace testutil {

/// Relative error with an absolute floor, so near-zero reference values are
/// compared absolutely instead of dividing by noise.
inline double rel_error(double a, double b, double floor = 1e-4) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double max_rel_error(const smoothf1::Matrix& a, const smoothf1::Matrix& b,
                            double floor = 1e-4) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, rel_error(a.data()[i], b.data()[i], floor));
    return worst;
}

struct RandomBatch {
    smoothf1::LabelMatrix y;
    smoothf1::Matrix p;
};

/// Seeded batch: Bernoulli(1/2) labels, probabilities uniform in [lo, hi].
inline RandomBatch random_batch(smoothf1::Seed seed, std::size_t n, std::size_t classes,
                                double lo = 0.02, double hi = 0.98) {
    smoothf1::RngStream rng(seed);
    smoothf1::Matrix y(n, classes), p(n, classes);
    for (std::size_t i = 0; i < y.size(); ++i) {
        y.data()[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
        p.data()[i] = rng.uniform(lo, hi);
    }
    return {smoothf1::LabelMatrix(std::move(y)), std::move(p)};
}

}  // namespace testutil
