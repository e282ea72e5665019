#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace smoothf1 {

inline void require(bool condition, const std::string& message) {
    if (!condition)
        throw std::invalid_argument(message);
}

/// Dense row-major matrix of doubles. The shape is fixed at construction;
/// there is no resize API. All numeric code in this library is 64-bit.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r == 0 ? 0 : rows.begin()->size();
        Matrix m(r, c);
        std::size_t i = 0;
        for (const auto& row : rows) {
            require(row.size() == c, "Matrix::from_rows: ragged rows");
            std::size_t j = 0;
            for (double v : row)
                m(i, j++) = v;
            ++i;
        }
        return m;
    }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    auto begin() { return data_.begin(); }
    auto end() { return data_.end(); }
    auto begin() const { return data_.begin(); }
    auto end() const { return data_.end(); }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v))
                return false;
        return true;
    }

    bool operator==(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

using Vector = std::vector<double>;

inline void require_same_shape(const Matrix& a, const Matrix& b, const std::string& context) {
    require(a.same_shape(b), context + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                                 std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                 "x" + std::to_string(b.cols()) + ")");
}

/// a (m x k) * b (k x n). Fixed i,k,j loop order; summation order is part of
/// the determinism contract.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.rows(), "matmul: inner dimensions differ");
    Matrix out(a.rows(), b.cols());
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    for (std::size_t i = 0; i < m; ++i) {
        double* out_row = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a(i, p);
            const double* b_row = b.data() + p * n;
            for (std::size_t j = 0; j < n; ++j)
                out_row[j] += aip * b_row[j];
        }
    }
    return out;
}

/// a^T (k x m becomes m x k) * b. Avoids materializing the transpose.
inline Matrix matmul_transpose_a(const Matrix& a, const Matrix& b) {
    require(a.rows() == b.rows(), "matmul_transpose_a: inner dimensions differ");
    Matrix out(a.cols(), b.cols());
    const std::size_t m = a.cols(), k = a.rows(), n = b.cols();
    for (std::size_t p = 0; p < k; ++p) {
        const double* a_row = a.data() + p * m;
        const double* b_row = b.data() + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double api = a_row[i];
            double* out_row = out.data() + i * n;
            for (std::size_t j = 0; j < n; ++j)
                out_row[j] += api * b_row[j];
        }
    }
    return out;
}

/// a * b^T.
inline Matrix matmul_transpose_b(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.cols(), "matmul_transpose_b: inner dimensions differ");
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < a.cols(); ++p)
                acc += a(i, p) * b(j, p);
            out(i, j) = acc;
        }
    return out;
}

/// Ground-truth label matrix, n examples by C classes, strictly binary.
class LabelMatrix {
public:
    LabelMatrix() = default;

    explicit LabelMatrix(Matrix values) : values_(std::move(values)) {
        for (double v : values_)
            require(v == 0.0 || v == 1.0, "LabelMatrix: entries must be exactly 0 or 1");
    }

    static LabelMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        return LabelMatrix(Matrix::from_rows(rows));
    }

    double operator()(std::size_t i, std::size_t j) const { return values_(i, j); }
    std::size_t rows() const { return values_.rows(); }
    std::size_t cols() const { return values_.cols(); }
    const Matrix& values() const { return values_; }

    bool operator==(const LabelMatrix& other) const { return values_ == other.values_; }

private:
    Matrix values_;
};

/// Real-valued predictions tagged by scale, so downstream code knows whether
/// the entries are probabilities in [0,1] or raw (unbounded) head outputs.
enum class ScoreScale { probability, logit };

struct ScoreMatrix {
    Matrix values;
    ScoreScale scale = ScoreScale::probability;
};

}  // namespace smoothf1
