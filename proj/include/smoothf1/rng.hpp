#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "smoothf1/matrix.hpp"

namespace smoothf1 {

/// Run seed. Identical seeds must reproduce identical value streams across
/// runs and platforms, so the generator is pinned to xoshiro256++ (reference
/// constants) seeded through splitmix64, rather than std::mt19937 whose
/// distributions are implementation-defined.
using Seed = std::uint64_t;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace detail

/// Derives an independent child seed for a named substream (epoch shuffles,
/// per-run model seeds). Fixed mixing rule so ports reproduce it.
inline Seed derive_seed(Seed base, std::uint64_t stream) {
    std::uint64_t s = base;
    std::uint64_t a = detail::splitmix64(s);
    s = stream ^ 0xA3EC647659359ACDULL;
    std::uint64_t b = detail::splitmix64(s);
    s = a + b;
    return detail::splitmix64(s);
}

/// xoshiro256++ pseudo-random stream. Single-owner: not for sharing across
/// threads.
class RngStream {
public:
    explicit RngStream(Seed seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_)
            word = detail::splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = detail::rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1), 53 mantissa bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    Matrix uniform_matrix(std::size_t rows, std::size_t cols) {
        Matrix m(rows, cols);
        for (double& v : m)
            v = uniform();
        return m;
    }

    /// Standard normal draws via Box-Muller on consecutive uniforms. Pairs are
    /// generated per call; an unused second value at the end of a call is
    /// discarded, so the stream position depends only on the element count.
    Matrix normal_matrix(std::size_t rows, std::size_t cols) {
        Matrix m(rows, cols);
        fill_normal(m.data(), m.size());
        return m;
    }

    double normal() {
        double z;
        fill_normal(&z, 1);
        return z;
    }

    /// Fisher-Yates permutation of {0, ..., n-1}.
    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i)
            idx[i] = i;
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_u64() % i);
            std::swap(idx[i - 1], idx[j]);
        }
        return idx;
    }

private:
    void fill_normal(double* out, std::size_t count) {
        for (std::size_t i = 0; i < count; i += 2) {
            const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
            const double u2 = uniform();
            const double radius = std::sqrt(-2.0 * std::log(u1));
            const double angle = 2.0 * std::numbers::pi * u2;
            out[i] = radius * std::cos(angle);
            if (i + 1 < count)
                out[i + 1] = radius * std::sin(angle);
        }
    }

    std::uint64_t state_[4];
};

}  // namespace smoothf1
