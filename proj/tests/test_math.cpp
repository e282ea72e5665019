#include <catch_amalgamated.hpp>

#include <cmath>

#include "smoothf1/math.hpp"
#include "smoothf1/rng.hpp"
#include "test_util.hpp"

using namespace smoothf1;
using Catch::Approx;

TEST_CASE("parameterized sigmoid hits its anchor points", "[math]") {
    CHECK(sigmoid_param(0.0, {1.0, 0.0}) == Approx(0.5).margin(1e-15));
    // offset shifts the center to -eta
    CHECK(sigmoid_param(0.5, {10.0, -0.5}) == Approx(0.5).margin(1e-15));
    // scalar oracle: 1/(1+exp(-u))
    CHECK(sigmoid_param(0.9, {1.0, 0.0}) == Approx(0.71094950262500389).epsilon(1e-14));
    CHECK(sigmoid_param(0.1, {1.0, 0.0}) == Approx(0.52497918747894001).epsilon(1e-14));
    const Vector v = sigmoid_param(Vector{0.9, 0.1}, {1.0, 0.0});
    CHECK(v[0] == Approx(0.71094950262500389).epsilon(1e-14));
    CHECK(v[1] == Approx(0.52497918747894001).epsilon(1e-14));
}

TEST_CASE("sigmoid stays inside (0,1) and is monotone for beta > 0", "[math]") {
    RngStream rng(7);
    for (int trial = 0; trial < 1000; ++trial) {
        const double u = rng.uniform(-3.0, 3.0);
        const double beta = rng.uniform(0.01, 30.0);
        const double eta = rng.uniform(-2.0, 2.0);
        const double s = sigmoid_param(u, {beta, eta});
        REQUIRE(s > 0.0);
        REQUIRE(s < 1.0);
        const double s_right = sigmoid_param(u + 1e-3, {beta, eta});
        REQUIRE(s_right >= s);
        // strictly increasing wherever the increment is representable
        if (std::abs(beta * (u + eta)) < 30.0)
            REQUIRE(s_right > s);
    }
}

TEST_CASE("sigmoid is numerically stable for |beta(u+eta)| up to 1e4", "[math]") {
    const double high = sigmoid_param(1.0, {1e4, 0.0});
    const double low = sigmoid_param(-1.0, {1e4, 0.0});
    REQUIRE(std::isfinite(high));
    REQUIRE(std::isfinite(low));
    CHECK(high > 1.0 - 1e-12);
    CHECK(high < 1.0);
    CHECK(low < 1e-12);
    CHECK(low > 0.0);
    // even further out nothing overflows
    CHECK(std::isfinite(sigmoid_param(1e4, {1e4, 1e4})));
}

TEST_CASE("saturation at beta=30: within 1e-6 of the step beyond |u|=1", "[math]") {
    const SigmoidParams params{30.0, 0.0};
    for (double u : {1.0, 1.5, 2.0, 5.0})
        CHECK(sigmoid_param(u, params) > 1.0 - 1e-6);
    for (double u : {-1.0, -1.5, -2.0, -5.0})
        CHECK(sigmoid_param(u, params) < 1e-6);
}

TEST_CASE("dynamic gradient: slope at the center is beta/4", "[math]") {
    RngStream rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const double beta = rng.uniform(1.0, 30.0);
        const double eta = rng.uniform(-2.0, 2.0);
        CHECK(sigmoid_param_derivative(-eta, {beta, eta}) == Approx(beta / 4.0).epsilon(1e-12));
    }
}

TEST_CASE("analytic sigmoid derivative matches central differences", "[math]") {
    RngStream rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        const double u = rng.uniform(-2.0, 2.0);
        const double beta = rng.uniform(1.0, 30.0);
        const double eta = rng.uniform(-2.0, 2.0);
        const SigmoidParams params{beta, eta};
        const Vector fd = finite_diff_grad(
            [&](const Vector& x) { return sigmoid_param(x[0], params); }, Vector{u}, 1e-5);
        const double analytic = sigmoid_param_derivative(u, params);
        // floor 1e-3: deep in saturation both sides vanish and the finite
        // difference is dominated by rounding, so tiny slopes compare
        // absolutely at 1e-9
        REQUIRE(testutil::rel_error(analytic, fd[0], 1e-3) < 1e-6);
    }
}

TEST_CASE("sign-flip symmetry: S(u;-beta,eta) + S(u;beta,eta) == 1", "[math]") {
    RngStream rng(17);
    for (int trial = 0; trial < 10000; ++trial) {
        const double u = rng.uniform(-3.0, 3.0);
        const double beta = rng.uniform(0.0, 30.0);
        const double eta = rng.uniform(-2.0, 2.0);
        const double sum =
            sigmoid_param(u, {beta, eta}) + sigmoid_param(u, {-beta, eta});
        REQUIRE(std::abs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("softmax basics", "[math]") {
    const Vector even = softmax({0.0, 0.0});
    CHECK(even[0] == Approx(0.5).margin(1e-15));
    CHECK(even[1] == Approx(0.5).margin(1e-15));
    for (double c : {-100.0, 0.0, 3.5, 700.0}) {
        const Vector quarter = softmax({c, c, c, c});
        for (double q : quarter)
            CHECK(q == Approx(0.25).margin(1e-14));
    }
    const Vector ref = softmax({1.0, 2.0, 3.0});
    CHECK(ref[0] == Approx(0.090030573170380462).epsilon(1e-13));
    CHECK(ref[1] == Approx(0.24472847105479767).epsilon(1e-13));
    CHECK(ref[2] == Approx(0.6652409557748219).epsilon(1e-13));
}

TEST_CASE("softmax outputs form a probability simplex point", "[math]") {
    RngStream rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        Vector v(1 + trial % 8);
        for (double& x : v)
            x = rng.uniform(-50.0, 50.0);
        const Vector s = softmax(v);
        double sum = 0.0;
        for (double x : s) {
            REQUIRE(x >= 0.0);
            sum += x;
        }
        REQUIRE(std::abs(sum - 1.0) <= 1e-12);
        // shift invariance
        Vector shifted = v;
        for (double& x : shifted)
            x += 17.25;
        const Vector s2 = softmax(shifted);
        for (std::size_t i = 0; i < s.size(); ++i)
            REQUIRE(s[i] == Approx(s2[i]).margin(1e-12));
    }
}

TEST_CASE("finite differences recover simple analytic gradients", "[math]") {
    const Vector quad = finite_diff_grad(
        [](const Vector& x) { return x[0] * x[0]; }, Vector{0.5}, 1e-5);
    CHECK(quad[0] == Approx(1.0).margin(1e-8));

    const Vector linear = finite_diff_grad(
        [](const Vector& x) {
            double s = 0.0;
            for (double v : x)
                s += v;
            return s;
        },
        Vector{0.3, -1.0, 2.5}, 1e-5);
    for (double g : linear)
        CHECK(g == Approx(1.0).margin(1e-9));
}

TEST_CASE("finite_diff_grad propagates evaluation failures", "[math]") {
    CHECK_THROWS_AS(finite_diff_grad(
                        [](const Vector&) -> double { throw std::runtime_error("boom"); },
                        Vector{1.0}, 1e-5),
                    std::runtime_error);
    CHECK_THROWS_AS(finite_diff_grad([](const Vector&) { return 0.0; }, Vector{1.0}, 0.0),
                    std::invalid_argument);
}
