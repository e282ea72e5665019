#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "smoothf1/data.hpp"
#include "smoothf1/metrics.hpp"
#include "smoothf1/model.hpp"
#include "test_util.hpp"

using namespace smoothf1;
using Catch::Approx;

namespace {

/// Flattened view of all head parameters, for whole-model gradient checks.
Vector flatten(const HeadModel& m) {
    Vector out;
    out.insert(out.end(), m.w1.begin(), m.w1.end());
    out.insert(out.end(), m.b1.begin(), m.b1.end());
    out.insert(out.end(), m.w2.begin(), m.w2.end());
    out.insert(out.end(), m.b2.begin(), m.b2.end());
    return out;
}

void unflatten(const Vector& flat, HeadModel& m) {
    std::size_t k = 0;
    for (double& v : m.w1)
        v = flat[k++];
    for (double& v : m.b1)
        v = flat[k++];
    for (double& v : m.w2)
        v = flat[k++];
    for (double& v : m.b2)
        v = flat[k++];
}

Vector flatten(const HeadGradients& g) {
    Vector out;
    out.insert(out.end(), g.w1.begin(), g.w1.end());
    out.insert(out.end(), g.b1.begin(), g.b1.end());
    out.insert(out.end(), g.w2.begin(), g.w2.end());
    out.insert(out.end(), g.b2.begin(), g.b2.end());
    return out;
}

}  // namespace

TEST_CASE("init_head is deterministic and shaped by its arguments", "[model]") {
    const HeadModel a = init_head(6, 4, 2, 99);
    const HeadModel b = init_head(6, 4, 2, 99);
    CHECK(a.w1 == b.w1);
    CHECK(a.w2 == b.w2);
    CHECK(a.b1 == b.b1);
    CHECK(a.b2 == b.b2);

    const HeadModel tiny = init_head(3, 1, 1, 0);
    CHECK(tiny.w1.rows() == 3);
    CHECK(tiny.w1.cols() == 1);
    CHECK(tiny.b1.size() == 1);
    CHECK(tiny.w2.rows() == 1);
    CHECK(tiny.w2.cols() == 1);
    CHECK(tiny.b2.size() == 1);
    for (double v : tiny.b1)
        CHECK(v == 0.0);
}

TEST_CASE("init_head weight scale follows 1/sqrt(fan_in)", "[model]") {
    const HeadModel m = init_head(16, 64, 8, 7);
    double mean = 0.0;
    for (double v : m.w1)
        mean += v;
    mean /= static_cast<double>(m.w1.size());
    double var = 0.0;
    for (double v : m.w1)
        var += (v - mean) * (v - mean);
    var /= static_cast<double>(m.w1.size());
    const double std_dev = std::sqrt(var);
    CHECK(std_dev > 0.25 * 0.8);
    CHECK(std_dev < 0.25 * 1.2);
}

TEST_CASE("forward with zero parameters yields probability one half", "[model]") {
    HeadModel m = init_head(3, 2, 2, 1);
    for (double& v : m.w1)
        v = 0.0;
    for (double& v : m.w2)
        v = 0.0;
    RngStream rng(5);
    const ForwardCache cache = forward(m, rng.normal_matrix(4, 3));
    for (double p : cache.probabilities)
        CHECK(p == Approx(0.5).margin(1e-15));
}

TEST_CASE("forward matches a hand matrix product", "[model]") {
    HeadModel m = init_head(2, 2, 1, 1);
    m.w1 = Matrix::from_rows({{1.0, -1.0}, {2.0, 0.5}});
    m.b1 = {0.1, -0.2};
    m.w2 = Matrix::from_rows({{3.0}, {-2.0}});
    m.b2 = {0.25};
    const Matrix x = Matrix::from_rows({{1.0, 2.0}});
    const ForwardCache cache = forward(m, x);
    // pre-hidden: [1*1+2*2+0.1, 1*(-1)+2*0.5-0.2] = [5.1, -0.2]
    CHECK(cache.pre_hidden(0, 0) == Approx(5.1).epsilon(1e-14));
    CHECK(cache.pre_hidden(0, 1) == Approx(-0.2).epsilon(1e-14));
    // rectifier truncates the negative unit
    CHECK(cache.hidden(0, 1) == 0.0);
    // logits: 5.1*3 + 0*(-2) + 0.25 = 15.55
    CHECK(cache.logits(0, 0) == Approx(15.55).epsilon(1e-14));
    CHECK(cache.probabilities(0, 0) == Approx(logistic(15.55)).epsilon(1e-14));
}

TEST_CASE("zero upstream gradient yields zero parameter gradients", "[model]") {
    const HeadModel m = init_head(4, 3, 2, 11);
    RngStream rng(12);
    const ForwardCache cache = forward(m, rng.normal_matrix(5, 4));
    const HeadGradients g =
        backward(m, cache, Matrix(5, 2, 0.0), ScoreScale::probability);
    for (double v : flatten(g))
        CHECK(v == 0.0);
}

TEST_CASE("a dead rectifier unit receives no incoming-weight gradient", "[model]") {
    HeadModel m = init_head(3, 2, 1, 2);
    m.b1[0] = -1e6;  // unit 0 can never activate on bounded inputs
    RngStream rng(3);
    const Matrix x = rng.normal_matrix(6, 3);
    const ForwardCache cache = forward(m, x);
    const HeadGradients g = backward(m, cache, Matrix(6, 1, 1.0), ScoreScale::probability);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(g.w1(i, 0) == 0.0);
    CHECK(g.b1[0] == 0.0);
}

TEST_CASE("end-to-end parameter gradients match finite differences", "[model]") {
    const auto batch = testutil::random_batch(21, 6, 2);
    RngStream rng(22);
    const Matrix x = rng.normal_matrix(6, 3);

    std::vector<LossSpec> specs(4);
    specs[0].kind = LossKind::sigmoid_f1;
    specs[0].params = {5.0, 0.0};
    specs[1].kind = LossKind::unbounded_f1;
    specs[2].kind = LossKind::cross_entropy;
    specs[3].kind = LossKind::focal;
    specs[3].focal_gamma = 2.0;

    for (const LossSpec& spec : specs) {
        HeadModel m = init_head(3, 4, 2, 23);
        const ForwardCache cache = forward(m, x);
        const LossValue v = compute_loss(spec, batch.y, cache.probabilities);
        const HeadGradients analytic = backward(m, cache, v.grad, ScoreScale::probability);

        HeadModel probe = m;
        const Vector fd = finite_diff_grad(
            [&](const Vector& params) {
                unflatten(params, probe);
                const ForwardCache c = forward(probe, x);
                return compute_loss(spec, batch.y, c.probabilities).loss;
            },
            flatten(m), 1e-6);
        const Vector a = flatten(analytic);
        double worst = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            worst = std::max(worst, testutil::rel_error(a[i], fd[i]));
        REQUIRE(worst < 1e-4);
    }
}

TEST_CASE("logit-input sigmoid F1 gradients bypass the logistic chain", "[model]") {
    const auto batch = testutil::random_batch(31, 6, 2);
    RngStream rng(32);
    const Matrix x = rng.normal_matrix(6, 3);
    LossSpec spec;
    spec.kind = LossKind::sigmoid_f1;
    spec.params = {2.0, 0.5};
    spec.input = LossInput::logit;

    HeadModel m = init_head(3, 4, 2, 33);
    const ForwardCache cache = forward(m, x);
    const LossValue v = compute_loss(spec, batch.y, cache.logits);
    const HeadGradients analytic = backward(m, cache, v.grad, ScoreScale::logit);

    HeadModel probe = m;
    const Vector fd = finite_diff_grad(
        [&](const Vector& params) {
            unflatten(params, probe);
            const ForwardCache c = forward(probe, x);
            return compute_loss(spec, batch.y, c.logits).loss;
        },
        flatten(m), 1e-6);
    const Vector a = flatten(analytic);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, testutil::rel_error(a[i], fd[i]));
    REQUIRE(worst < 1e-4);
}

TEST_CASE("optimizer steps", "[model]") {
    SECTION("zero learning rate freezes the parameters") {
        HeadModel m = init_head(2, 2, 1, 5);
        const HeadModel before = m;
        OptimizerState opt = make_optimizer(OptimizerKind::sgd, 0.0, m);
        ForwardCache cache = forward(m, Matrix(1, 2, 1.0));
        HeadGradients g = backward(m, cache, Matrix(1, 1, 1.0), ScoreScale::probability);
        step(opt, m, g);
        CHECK(m.w1 == before.w1);
        CHECK(m.w2 == before.w2);
    }
    SECTION("sgd with lr=1 and gradient equal to the parameters zeroes them") {
        HeadModel m = init_head(2, 3, 2, 6);
        OptimizerState opt = make_optimizer(OptimizerKind::sgd, 1.0, m);
        HeadGradients g{m.w1, m.b1, m.w2, m.b2};
        step(opt, m, g);
        for (double v : flatten(m))
            CHECK(v == 0.0);
    }
    SECTION("first adam step moves each parameter by about the learning rate") {
        for (double scale : {1e-6, 1.0, 1e6}) {
            HeadModel m = init_head(2, 2, 2, 7);
            OptimizerState opt = make_optimizer(OptimizerKind::adam, 1e-3, m);
            const HeadModel before = m;
            HeadGradients g{Matrix(2, 2, scale), Vector(2, scale), Matrix(2, 2, scale),
                            Vector(2, scale)};
            step(opt, m, g);
            // closed form for step 1: lr * g / (|g| + eps)
            const double expected = 1e-3 * scale / (scale + 1e-8);
            for (std::size_t i = 0; i < m.w1.size(); ++i) {
                const double moved = std::abs(m.w1.data()[i] - before.w1.data()[i]);
                CHECK(moved == Approx(expected).epsilon(1e-9));
                CHECK(moved > 0.98e-3);
            }
        }
    }
    SECTION("non-finite gradients abort the run") {
        HeadModel m = init_head(2, 2, 1, 8);
        OptimizerState opt = make_optimizer(OptimizerKind::adam, 1e-3, m);
        HeadGradients g{Matrix(2, 2, 0.0), Vector(2, 0.0), Matrix(2, 1, 0.0), Vector(1, 0.0)};
        g.w1(0, 0) = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(step(opt, m, g), TrainingDiverged);
    }
}

namespace {

Dataset separable_two_class(std::size_t n, Seed seed) {
    SynthConfig cfg;
    cfg.n = n;
    cfg.feature_dim = 8;
    cfg.n_classes = 2;
    cfg.latent_dim = 4;
    cfg.target_mean_label_count = 1.0;
    cfg.label_correlation = 0.0;
    cfg.noise_scale = 0.05;
    cfg.seed = seed;
    return generate_synthetic(cfg);
}

}  // namespace

TEST_CASE("training on a separable synthetic set reaches high macro F1", "[model][slow]") {
    const Dataset ds = separable_two_class(600, 3);
    TrainConfig cfg;
    cfg.loss.kind = LossKind::sigmoid_f1;
    cfg.loss.params = {1.0, 0.0};
    cfg.epochs = 50;
    cfg.batch_size = 64;
    cfg.learning_rate = 1e-2;
    const TrainResult result = train(init_head(8, 16, 2, 1), ds, cfg, 1);

    const ScoreMatrix scores = predict_scores(result.model, ds.x);
    const MetricReport report = evaluate(ds.y, scores.values, 0.5);
    CHECK(report.macro_f1 > 0.95);

    // smoothed monotonicity: medians over five-epoch windows never bounce up
    // beyond minibatch jitter, and the overall trend is firmly down
    const std::size_t steps_per_epoch = result.loss_trace.size() / cfg.epochs;
    std::vector<double> medians;
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        std::vector<double> epoch(result.loss_trace.begin() + e * steps_per_epoch,
                                  result.loss_trace.begin() + (e + 1) * steps_per_epoch);
        std::sort(epoch.begin(), epoch.end());
        medians.push_back(epoch[epoch.size() / 2]);
    }
    std::vector<double> window_medians;
    for (std::size_t w = 0; w + 10 <= medians.size(); w += 10) {
        std::vector<double> window(medians.begin() + w, medians.begin() + w + 10);
        std::sort(window.begin(), window.end());
        window_medians.push_back(window[5]);
    }
    for (std::size_t w = 1; w < window_medians.size(); ++w)
        REQUIRE(window_medians[w] <= window_medians[w - 1] + 0.005);
    REQUIRE(window_medians.back() < window_medians.front() - 0.03);
}

TEST_CASE("zero epochs returns the initial model", "[model]") {
    const Dataset ds = separable_two_class(50, 4);
    const HeadModel init = init_head(8, 4, 2, 9);
    TrainConfig cfg;
    cfg.epochs = 0;
    const TrainResult result = train(init, ds, cfg, 9);
    CHECK(result.model.w1 == init.w1);
    CHECK(result.model.w2 == init.w2);
    CHECK(result.loss_trace.empty());
}

TEST_CASE("a fixed seed reproduces the loss trace bit for bit", "[model]") {
    const Dataset ds = separable_two_class(120, 5);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 32;
    const TrainResult a = train(init_head(8, 4, 2, 2), ds, cfg, 77);
    const TrainResult b = train(init_head(8, 4, 2, 2), ds, cfg, 77);
    REQUIRE(a.loss_trace.size() == b.loss_trace.size());
    for (std::size_t i = 0; i < a.loss_trace.size(); ++i)
        REQUIRE(a.loss_trace[i] == b.loss_trace[i]);
    CHECK(a.model.w1 == b.model.w1);
    CHECK(a.model.w2 == b.model.w2);
}

TEST_CASE("training aborts on non-finite inputs instead of propagating NaN", "[model]") {
    Dataset ds = separable_two_class(40, 6);
    ds.x(3, 2) = std::numeric_limits<double>::quiet_NaN();
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    CHECK_THROWS_AS(train(init_head(8, 4, 2, 3), ds, cfg, 1), TrainingDiverged);
}

TEST_CASE("prediction thresholds", "[model]") {
    const Dataset ds = separable_two_class(30, 7);
    const HeadModel m = init_head(8, 4, 2, 10);
    const LabelMatrix all_positive = predict(m, ds.x, 0.0);
    for (double v : all_positive.values())
        REQUIRE(v == 1.0);

    const ScoreMatrix scores = predict_scores(m, ds.x);
    double max_score = 0.0;
    for (double v : scores.values)
        max_score = std::max(max_score, v);
    const LabelMatrix none = predict(m, ds.x, std::nextafter(max_score, 2.0));
    for (double v : none.values())
        REQUIRE(v == 0.0);
}

TEST_CASE("softmax bounding on a single class degenerates to one", "[model]") {
    const HeadModel m = init_head(4, 3, 1, 12);
    RngStream rng(13);
    const ScoreMatrix scores = predict_scores(m, rng.normal_matrix(5, 4), Bounding::softmax);
    for (double v : scores.values)
        CHECK(v == Approx(1.0).margin(1e-12));
}

TEST_CASE("forward rejects mismatched feature width", "[model]") {
    const HeadModel m = init_head(4, 3, 2, 14);
    CHECK_THROWS_AS(forward(m, Matrix(2, 5)), std::invalid_argument);
}
