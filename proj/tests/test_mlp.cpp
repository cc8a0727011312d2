#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "coopsim/mlp.hpp"
#include "coopsim/rng.hpp"

using namespace coopsim;

TEST_CASE("zero weights produce zero output for any input") {
    MlpModel m = make_mlp(3, 1);
    for (auto& layer : m.weights) std::fill(layer.begin(), layer.end(), 0.0);
    for (auto& layer : m.biases) std::fill(layer.begin(), layer.end(), 0.0);
    CHECK(mlp_forward(m, {0.5, -2.0, 7.0}) == 0.0);
    CHECK(mlp_forward(m, {0.0, 0.0, 0.0}) == 0.0);
}

TEST_CASE("hand-set single-feature net matches the closed form") {
    // y = 2 * tanh(tanh(x)); value at x=1 computed independently to 30 digits
    MlpModel m = make_mlp(1, 1, {1, 1});
    m.weights[0] = {1.0};
    m.weights[1] = {1.0};
    m.weights[2] = {2.0};
    for (auto& layer : m.biases) std::fill(layer.begin(), layer.end(), 0.0);
    CHECK(mlp_forward(m, {1.0}) == doctest::Approx(1.28402998402399963).epsilon(1e-15));
}

TEST_CASE("input equal to the normalization mean behaves like zero input") {
    MlpModel m = make_mlp(2, 9);
    m.feat_mean = {3.0, -4.0};
    m.feat_std = {2.0, 5.0};
    MlpModel zero = m;
    zero.feat_mean = {0.0, 0.0};
    zero.feat_std = {1.0, 1.0};
    CHECK(mlp_forward(m, {3.0, -4.0}) == doctest::Approx(mlp_forward(zero, {0.0, 0.0})).epsilon(1e-15));
    CHECK_THROWS((void)mlp_forward(m, {1.0}));
}

TEST_CASE("gradient check against central differences") {
    Rng rng(77);
    for (int trial = 0; trial < 5; ++trial) {
        MlpModel m = make_mlp(4, 100 + static_cast<std::uint64_t>(trial));
        std::vector<double> x(4);
        for (double& v : x) v = rng.uniform(-2.0, 2.0);
        CHECK(grad_check(m, x, 1e-5) < 1e-4);
    }
}

TEST_CASE("gradient check on the zero model reports zero error") {
    MlpModel m = make_mlp(2, 1);
    for (auto& layer : m.weights) std::fill(layer.begin(), layer.end(), 0.0);
    for (auto& layer : m.biases) std::fill(layer.begin(), layer.end(), 0.0);
    CHECK(grad_check(m, {0.3, -0.7}, 1e-5) == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("gradient check still passes after a training step") {
    MlpModel m = make_mlp(2, 4);
    std::vector<PairSample> data{{{1.0, 0.5}, {0.2, -0.3}, 0.7}};
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.seed = 4;
    train_pairwise(m, data, cfg);
    CHECK(grad_check(m, {0.4, 0.1}, 1e-5) < 1e-4);
}

TEST_CASE("identical pair with zero target has zero loss immediately") {
    MlpModel m = make_mlp(2, 5);
    std::vector<PairSample> data{{{1.0, 2.0}, {1.0, 2.0}, 0.0}};
    TrainConfig cfg;
    cfg.epochs = 3;
    TrainReport r = train_pairwise(m, data, cfg);
    for (double loss : r.epoch_loss) CHECK(loss == doctest::Approx(0.0).epsilon(1e-18));
}

TEST_CASE("linearly realizable pairwise targets train to small error") {
    Rng rng(42);
    std::vector<PairSample> data;
    double target_var = 0.0;
    for (int i = 0; i < 512; ++i) {
        PairSample s;
        s.x_i = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        s.x_j = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        s.target = 0.8 * (s.x_i[0] - s.x_j[0]);
        target_var += s.target * s.target;
        data.push_back(std::move(s));
    }
    double target_std = std::sqrt(target_var / 512.0);
    MlpModel m = make_mlp(2, 6);
    TrainConfig cfg;
    cfg.epochs = 300;
    cfg.seed = 6;
    TrainReport r = train_pairwise(m, data, cfg);
    CHECK(r.final_rmse < 0.05 * target_std);
    // loss is non-increasing over epoch averages, within noise
    for (std::size_t e = 10; e < r.epoch_loss.size(); e += 10)
        CHECK(r.epoch_loss[e] <= r.epoch_loss[e - 10] * 1.5 + 1e-9);
}

TEST_CASE("training is deterministic under a fixed seed") {
    Rng rng(9);
    std::vector<PairSample> data;
    for (int i = 0; i < 64; ++i)
        data.push_back({{rng.uniform(-1, 1), rng.uniform(-1, 1)},
                        {rng.uniform(-1, 1), rng.uniform(-1, 1)},
                        rng.uniform(-2, 2)});
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.seed = 13;
    MlpModel a = make_mlp(2, 3);
    MlpModel b = make_mlp(2, 3);
    train_pairwise(a, data, cfg);
    train_pairwise(b, data, cfg);
    CHECK(a.weights == b.weights);
    CHECK(a.biases == b.biases);
}

TEST_CASE("pairwise objective is antisymmetric") {
    MlpModel m = make_mlp(2, 8);
    std::vector<double> xi{0.7, -0.2}, xj{-0.4, 0.9};
    double t = 0.35;
    double e1 = mlp_forward(m, xi) - mlp_forward(m, xj) - t;
    double e2 = mlp_forward(m, xj) - mlp_forward(m, xi) - (-t);
    CHECK(e1 * e1 == doctest::Approx(e2 * e2).epsilon(1e-15));
}

TEST_CASE("diverging training aborts with diagnostics") {
    Rng rng(3);
    std::vector<PairSample> data;
    for (int i = 0; i < 64; ++i)
        data.push_back({{rng.uniform(-1e6, 1e6)}, {rng.uniform(-1e6, 1e6)}, rng.uniform(-1, 1)});
    MlpModel m = make_mlp(1, 2);
    TrainConfig cfg;
    cfg.epochs = 80;
    cfg.learning_rate = 1e18;
    cfg.normalize_from_data = false;  // raw million-scale features saturate everything
    CHECK_THROWS_WITH_AS(train_pairwise(m, data, cfg), doctest::Contains("diverged"),
                         std::runtime_error);
}

TEST_CASE("model files round trip") {
    Rng rng(17);
    MlpModel m = make_mlp(4, 55);
    std::vector<PairSample> data;
    for (int i = 0; i < 32; ++i)
        data.push_back({{rng.uniform(0, 100), rng.uniform(0, 14), rng.next_double(), rng.next_double()},
                        {rng.uniform(0, 100), rng.uniform(0, 14), rng.next_double(), rng.next_double()},
                        rng.uniform(-3, 3)});
    TrainConfig cfg;
    cfg.epochs = 5;
    train_pairwise(m, data, cfg);
    MlpModel back = model_from_json(model_to_json(m));
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x{rng.uniform(0, 100), rng.uniform(0, 14), rng.next_double(),
                              rng.next_double()};
        CHECK(mlp_forward(m, x) == mlp_forward(back, x));
    }
    CHECK_THROWS((void)model_from_json("{\"mlp_version\": 2}"));
}

TEST_CASE("saturated output stays within the final layer bound") {
    MlpModel m = make_mlp(2, 21);
    double bound = 0.0;
    for (double w : m.weights.back()) bound += std::fabs(w);
    bound += std::fabs(m.biases.back()[0]);
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x{rng.uniform(-1e3, 1e3), rng.uniform(-1e3, 1e3)};
        CHECK(std::fabs(mlp_forward(m, x)) <= bound + 1e-9);
    }
}
