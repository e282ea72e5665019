#pragma once

#include <cmath>
#include <limits>
#include <utility>

#include "smoothf1/matrix.hpp"

namespace smoothf1 {

/// Slope and offset of the surrogate thresholding sigmoid
/// S(u; beta, eta) = 1 / (1 + exp(-beta * (u + eta))).
/// beta >= 0 in training use; negative beta reflects the curve across 0.5.
struct SigmoidParams {
    double beta = 1.0;
    double eta = 0.0;
};

namespace detail {

/// Logistic of z computed through exp of a negative magnitude, so it cannot
/// overflow for |z| up to and beyond 1e4. Saturated results are nudged to the
/// nearest representable value inside (0, 1).
inline double stable_logistic(double z) {
    double s;
    if (z >= 0.0) {
        const double e = std::exp(-z);
        s = 1.0 / (1.0 + e);
    } else {
        const double e = std::exp(z);
        s = e / (1.0 + e);
    }
    constexpr double lo = std::numeric_limits<double>::min();
    constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    if (s < lo)
        s = lo;
    if (s > hi)
        s = hi;
    return s;
}

}  // namespace detail

inline double sigmoid_param(double u, SigmoidParams params) {
    return detail::stable_logistic(params.beta * (u + params.eta));
}

/// dS/du = beta * S * (1 - S).
inline double sigmoid_param_derivative(double u, SigmoidParams params) {
    const double s = sigmoid_param(u, params);
    return params.beta * s * (1.0 - s);
}

/// Plain logistic squash (beta=1, eta=0), used to bound head outputs.
inline double logistic(double u) { return detail::stable_logistic(u); }

inline Vector sigmoid_param(const Vector& u, SigmoidParams params) {
    Vector out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i)
        out[i] = sigmoid_param(u[i], params);
    return out;
}

inline Matrix sigmoid_param(const Matrix& u, SigmoidParams params) {
    Matrix out(u.rows(), u.cols());
    for (std::size_t i = 0; i < u.size(); ++i)
        out.data()[i] = sigmoid_param(u.data()[i], params);
    return out;
}

/// Shift-invariant softmax; outputs sum to 1.
inline Vector softmax(const Vector& v) {
    require(!v.empty(), "softmax: empty input");
    double max_v = v[0];
    for (double x : v)
        max_v = std::max(max_v, x);
    Vector out(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - max_v);
        sum += out[i];
    }
    for (double& x : out)
        x /= sum;
    return out;
}

/// Central-difference gradient of a scalar function of a vector:
/// (f(x + h e_i) - f(x - h e_i)) / (2h) per coordinate. This is the oracle
/// every analytic gradient in the library is checked against.
template <typename F>
Vector finite_diff_grad(F&& f, Vector x, double h) {
    require(h > 0.0, "finite_diff_grad: step size must be positive");
    Vector grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double original = x[i];
        x[i] = original + h;
        const double plus = f(static_cast<const Vector&>(x));
        x[i] = original - h;
        const double minus = f(static_cast<const Vector&>(x));
        x[i] = original;
        grad[i] = (plus - minus) / (2.0 * h);
    }
    return grad;
}

/// Matrix overload; perturbs one entry at a time.
template <typename F>
Matrix finite_diff_grad(F&& f, Matrix x, double h) {
    require(h > 0.0, "finite_diff_grad: step size must be positive");
    Matrix grad(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double original = x.data()[i];
        x.data()[i] = original + h;
        const double plus = f(static_cast<const Matrix&>(x));
        x.data()[i] = original - h;
        const double minus = f(static_cast<const Matrix&>(x));
        x.data()[i] = original;
        grad.data()[i] = (plus - minus) / (2.0 * h);
    }
    return grad;
}

}  // namespace smoothf1
