#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "smoothf1/math.hpp"
#include "smoothf1/matrix.hpp"
#include "smoothf1/rng.hpp"

namespace smoothf1 {

struct Dataset {
    Matrix x;       // n x d features
    LabelMatrix y;  // n x C binary labels
    std::vector<std::string> class_names;
    std::string provenance;

    std::size_t n() const { return x.rows(); }
    std::size_t feature_dim() const { return x.cols(); }
    std::size_t n_classes() const { return y.cols(); }
};

/// Configuration of the correlated-multilabel generator.
struct SynthConfig {
    std::size_t n = 5000;
    std::size_t feature_dim = 24;  // must be >= latent_dim + n_classes
    std::size_t n_classes = 10;
    std::size_t latent_dim = 8;
    double target_mean_label_count = 2.0;  // must lie in (0, n_classes)
    double label_correlation = 0.8;        // in [0, 1]; weight of the shared latent
    double noise_scale = 0.01;             // feature observation noise
    Seed seed = 1;
};

namespace detail {

/// Score gain: class scores are scaled by this constant so label flips from
/// the Bernoulli sampling stay rare and the dataset is close to separable.
inline constexpr double kScoreGain = 32.0;
/// Spread of per-class base offsets, as a fraction of the gain.
inline constexpr double kClassOffsetSpread = 0.2;

}  // namespace detail

/// Generates a dataset whose labels are Bernoulli draws of
/// logistic(gain * (sqrt(rho) * w_j . z_i + sqrt(1-rho) * zeta_ij) + b_j + delta),
/// where z_i is a shared latent vector, zeta_ij a per-class own factor, and
/// rho = label_correlation. Features observe the full latent [z, zeta] through
/// a random linear map plus noise, so labels are predictable from them. The
/// shared offset delta is calibrated by bisection until the empirical mean
/// label count matches the target.
inline Dataset generate_synthetic(const SynthConfig& cfg) {
    require(cfg.n >= 1 && cfg.n_classes >= 1 && cfg.feature_dim >= 1 && cfg.latent_dim >= 1,
            "generate_synthetic: dimensions must be positive");
    require(cfg.target_mean_label_count > 0.0 &&
                cfg.target_mean_label_count < static_cast<double>(cfg.n_classes),
            "generate_synthetic: target_mean_label_count must lie in (0, n_classes)");
    require(cfg.label_correlation >= 0.0 && cfg.label_correlation <= 1.0,
            "generate_synthetic: label_correlation must lie in [0, 1]");
    require(cfg.noise_scale >= 0.0, "generate_synthetic: noise_scale must be non-negative");

    RngStream rng(cfg.seed);
    const std::size_t n = cfg.n, classes = cfg.n_classes;
    const std::size_t latent_total = cfg.latent_dim + classes;

    // Class directions over the shared latent, unit norm.
    Matrix w = rng.normal_matrix(classes, cfg.latent_dim);
    for (std::size_t j = 0; j < classes; ++j) {
        double norm = 0.0;
        for (std::size_t k = 0; k < cfg.latent_dim; ++k)
            norm += w(j, k) * w(j, k);
        norm = std::sqrt(norm);
        for (std::size_t k = 0; k < cfg.latent_dim; ++k)
            w(j, k) /= norm;
    }
    Vector base_offset(classes);
    for (std::size_t j = 0; j < classes; ++j)
        base_offset[j] = detail::kClassOffsetSpread * detail::kScoreGain * rng.normal();

    const Matrix shared = rng.normal_matrix(n, cfg.latent_dim);
    const Matrix own = rng.normal_matrix(n, classes);
    const Matrix label_uniforms = rng.uniform_matrix(n, classes);

    const double shared_w = std::sqrt(cfg.label_correlation);
    const double own_w = std::sqrt(1.0 - cfg.label_correlation);
    Matrix score(n, classes);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < classes; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < cfg.latent_dim; ++k)
                dot += w(j, k) * shared(i, k);
            score(i, j) =
                detail::kScoreGain * (shared_w * dot + own_w * own(i, j)) + base_offset[j];
        }

    // Bisection on a shared offset; mean label count is monotone in it
    // because the per-entry uniforms are fixed.
    const auto mean_count = [&](double delta) {
        std::int64_t positives = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < classes; ++j)
                if (label_uniforms(i, j) < logistic(score(i, j) + delta))
                    ++positives;
        return static_cast<double>(positives) / static_cast<double>(n);
    };
    double lo = -1.0, hi = 1.0;
    while (mean_count(lo) > cfg.target_mean_label_count)
        lo *= 2.0;
    while (mean_count(hi) < cfg.target_mean_label_count)
        hi *= 2.0;
    double delta = 0.0;
    for (int iter = 0; iter < 20; ++iter) {
        delta = 0.5 * (lo + hi);
        const double count = mean_count(delta);
        if (std::abs(count - cfg.target_mean_label_count) <= 1e-3)
            break;
        if (count < cfg.target_mean_label_count)
            lo = delta;
        else
            hi = delta;
    }

    Matrix labels(n, classes);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < classes; ++j)
            labels(i, j) = label_uniforms(i, j) < logistic(score(i, j) + delta) ? 1.0 : 0.0;

    // Features observe the full latent through a random orthonormal map plus
    // noise (Gram-Schmidt over random rows keeps every latent direction at
    // equal strength in feature space).
    require(cfg.feature_dim >= latent_total,
            "generate_synthetic: feature_dim must be >= latent_dim + n_classes");
    Matrix mix = rng.normal_matrix(latent_total, cfg.feature_dim);
    for (std::size_t r = 0; r < latent_total; ++r) {
        for (std::size_t prev = 0; prev < r; ++prev) {
            double dot = 0.0;
            for (std::size_t c = 0; c < cfg.feature_dim; ++c)
                dot += mix(r, c) * mix(prev, c);
            for (std::size_t c = 0; c < cfg.feature_dim; ++c)
                mix(r, c) -= dot * mix(prev, c);
        }
        double norm = 0.0;
        for (std::size_t c = 0; c < cfg.feature_dim; ++c)
            norm += mix(r, c) * mix(r, c);
        norm = std::sqrt(norm);
        for (std::size_t c = 0; c < cfg.feature_dim; ++c)
            mix(r, c) /= norm;
    }
    Matrix latent(n, latent_total);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < cfg.latent_dim; ++k)
            latent(i, k) = shared(i, k);
        for (std::size_t j = 0; j < classes; ++j)
            latent(i, cfg.latent_dim + j) = own(i, j);
    }
    Matrix x = matmul(latent, mix);
    if (cfg.noise_scale > 0.0) {
        const Matrix noise = rng.normal_matrix(n, cfg.feature_dim);
        for (std::size_t i = 0; i < x.size(); ++i)
            x.data()[i] += cfg.noise_scale * noise.data()[i];
    }

    Dataset ds;
    ds.x = std::move(x);
    ds.y = LabelMatrix(std::move(labels));
    for (std::size_t j = 0; j < classes; ++j)
        ds.class_names.push_back("class_" + std::to_string(j));
    std::ostringstream prov;
    prov << "synthetic(seed=" << cfg.seed << ",n=" << n << ",C=" << classes
         << ",d=" << cfg.feature_dim << ",latent=" << cfg.latent_dim
         << ",target=" << cfg.target_mean_label_count << ",rho=" << cfg.label_correlation
         << ",noise=" << cfg.noise_scale << ")";
    ds.provenance = prov.str();
    return ds;
}

inline double mean_label_count(const Dataset& ds) {
    double positives = 0.0;
    for (std::size_t i = 0; i < ds.n(); ++i)
        for (std::size_t j = 0; j < ds.n_classes(); ++j)
            positives += ds.y(i, j);
    return positives / static_cast<double>(ds.n());
}

// ---------------------------------------------------------------------------
// Multilabel file format. One example per line:
//   label_idx[,label_idx...] <TAB> feat_idx:value [feat_idx:value ...]
// with a leading header line `#dims n C d`. Label and feature indices are
// zero-based; the label field may be blank (no positive labels). UTF-8 text.
// ---------------------------------------------------------------------------

struct LoadResult {
    Dataset dataset;
    std::size_t empty_label_rows = 0;  // accepted, counted as a warning
};

namespace detail {

inline std::size_t parse_index(const std::string& token, std::size_t limit, std::size_t line_no,
                               const char* what) {
    std::size_t pos = 0;
    unsigned long long value = 0;
    try {
        value = std::stoull(token, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": unknown " +
                                 std::string(what) + " token '" + token + "'");
    }
    if (pos != token.size())
        throw std::runtime_error("line " + std::to_string(line_no) + ": unknown " +
                                 std::string(what) + " token '" + token + "'");
    if (value >= limit)
        throw std::runtime_error("line " + std::to_string(line_no) + ": " + what + " index " +
                                 token + " out of declared range [0, " + std::to_string(limit) +
                                 ")");
    return static_cast<std::size_t>(value);
}

}  // namespace detail

inline LoadResult load_multilabel_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open dataset file: " + path);
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line))
        throw std::runtime_error("empty dataset file: " + path);
    std::size_t n = 0, classes = 0, dim = 0;
    {
        std::istringstream header(line);
        std::string tag;
        header >> tag >> n >> classes >> dim;
        if (tag != "#dims" || header.fail() || n == 0 || classes == 0 || dim == 0)
            throw std::runtime_error("line 1: malformed header, expected '#dims n C d'");
    }
    Matrix x(n, dim);
    Matrix y(n, classes);
    LoadResult result;
    for (std::size_t i = 0; i < n; ++i) {
        ++line_no;
        if (!std::getline(in, line))
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": unexpected end of file, header declared " +
                                     std::to_string(n) + " examples");
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": malformed example, missing tab separator");
        const std::string label_field = line.substr(0, tab);
        const std::string feature_field = line.substr(tab + 1);
        if (label_field.empty()) {
            ++result.empty_label_rows;
        } else {
            std::istringstream labels(label_field);
            std::string token;
            while (std::getline(labels, token, ','))
                y(i, detail::parse_index(token, classes, line_no, "class")) = 1.0;
        }
        std::istringstream feats(feature_field);
        std::string pair;
        while (feats >> pair) {
            const std::size_t colon = pair.find(':');
            if (colon == std::string::npos)
                throw std::runtime_error("line " + std::to_string(line_no) +
                                         ": malformed feature entry '" + pair + "'");
            const std::size_t idx =
                detail::parse_index(pair.substr(0, colon), dim, line_no, "feature");
            char* end = nullptr;
            const std::string value_str = pair.substr(colon + 1);
            const double value = std::strtod(value_str.c_str(), &end);
            if (end == value_str.c_str() || *end != '\0')
                throw std::runtime_error("line " + std::to_string(line_no) +
                                         ": malformed feature value '" + value_str + "'");
            x(i, idx) = value;
        }
    }
    result.dataset.x = std::move(x);
    result.dataset.y = LabelMatrix(std::move(y));
    for (std::size_t j = 0; j < classes; ++j)
        result.dataset.class_names.push_back("class_" + std::to_string(j));
    result.dataset.provenance = "file(" + path + ")";
    return result;
}

/// Writes the dataset in the format load_multilabel_file reads. Feature
/// values use %.17g, so a round trip reproduces every double exactly; zero
/// features are omitted (the format is sparse).
inline void save_multilabel_file(const std::string& path, const Dataset& ds) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write dataset file: " + path);
    out << "#dims " << ds.n() << " " << ds.n_classes() << " " << ds.feature_dim() << "\n";
    char buffer[64];
    for (std::size_t i = 0; i < ds.n(); ++i) {
        bool first = true;
        for (std::size_t j = 0; j < ds.n_classes(); ++j)
            if (ds.y(i, j) != 0.0) {
                if (!first)
                    out << ",";
                out << j;
                first = false;
            }
        out << "\t";
        first = true;
        for (std::size_t k = 0; k < ds.feature_dim(); ++k) {
            const double v = ds.x(i, k);
            if (v == 0.0)
                continue;
            std::snprintf(buffer, sizeof(buffer), "%.17g", v);
            if (!first)
                out << " ";
            out << k << ":" << buffer;
            first = false;
        }
        out << "\n";
    }
    if (!out)
        throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Splits and batching.
// ---------------------------------------------------------------------------

struct SplitFractions {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

/// Seed-deterministic disjoint exhaustive partition. Boundaries are
/// floor(cumulative_fraction * n) over a seeded permutation.
inline SplitIndices split_indices(std::size_t n, SplitFractions fractions, Seed seed) {
    require(fractions.train > 0.0 && fractions.val > 0.0 && fractions.test > 0.0,
            "split_indices: fractions must be positive");
    require(std::abs(fractions.train + fractions.val + fractions.test - 1.0) <= 1e-9,
            "split_indices: fractions must sum to 1");
    RngStream rng(seed);
    const auto perm = rng.permutation(n);
    const auto train_end = static_cast<std::size_t>(std::floor(fractions.train * n));
    const auto val_end =
        static_cast<std::size_t>(std::floor((fractions.train + fractions.val) * n));
    require(train_end >= 1 && val_end > train_end && n > val_end,
            "split_indices: dataset too small for non-empty splits");
    SplitIndices out;
    out.train.assign(perm.begin(), perm.begin() + train_end);
    out.val.assign(perm.begin() + train_end, perm.begin() + val_end);
    out.test.assign(perm.begin() + val_end, perm.end());
    return out;
}

inline Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices) {
    Matrix x(indices.size(), ds.feature_dim());
    Matrix y(indices.size(), ds.n_classes());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        require(indices[r] < ds.n(), "subset: index out of range");
        for (std::size_t k = 0; k < ds.feature_dim(); ++k)
            x(r, k) = ds.x(indices[r], k);
        for (std::size_t j = 0; j < ds.n_classes(); ++j)
            y(r, j) = ds.y(indices[r], j);
    }
    Dataset out;
    out.x = std::move(x);
    out.y = LabelMatrix(std::move(y));
    out.class_names = ds.class_names;
    out.provenance = ds.provenance + "[subset n=" + std::to_string(indices.size()) + "]";
    return out;
}

struct SplitDatasets {
    Dataset train;
    Dataset val;
    Dataset test;
    SplitIndices indices;
};

inline SplitDatasets split(const Dataset& ds, SplitFractions fractions, Seed seed) {
    SplitDatasets out;
    out.indices = split_indices(ds.n(), fractions, seed);
    out.train = subset(ds, out.indices.train);
    out.val = subset(ds, out.indices.val);
    out.test = subset(ds, out.indices.test);
    return out;
}

/// One epoch of minibatch index sets: a fresh seeded permutation chunked into
/// batches; the last batch may be smaller. Every example appears exactly once.
inline std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size,
                                                     Seed epoch_seed) {
    require(batch_size >= 1, "batches: batch_size must be >= 1");
    RngStream rng(epoch_seed);
    const auto perm = rng.permutation(n);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        out.emplace_back(perm.begin() + start, perm.begin() + end);
    }
    return out;
}

}  // namespace smoothf1
