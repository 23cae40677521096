#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "vfl/fl.hpp"

using namespace vfl;

namespace {

ModelArch desk_arch() { return ModelArch{5, 2, 16, 1}; }

FeatureScaler identity_scaler() {
    FeatureScaler s;
    s.mean = {0, 0, 0, 0, 0};
    s.stddev = {1, 1, 1, 1, 1};
    s.label_max = 1.0;
    return s;
}

// central finite differences of the batch MSE, the independent gradient oracle
std::vector<double> fd_gradient(const ModelWeights& w,
                                const std::vector<std::array<double, kFeatureDim>>& x,
                                const std::vector<double>& y, double step) {
    std::vector<double> grad(w.params.size());
    ModelWeights probe = w;
    for (std::size_t i = 0; i < w.params.size(); ++i) {
        probe.params[i] = w.params[i] + step;
        const double up = mse_loss(probe, x, y);
        probe.params[i] = w.params[i] - step;
        const double down = mse_loss(probe, x, y);
        probe.params[i] = w.params[i];
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

}  // namespace

TEST_CASE("param_count matches the layer layout") {
    const ModelArch a = desk_arch();
    // 5*16+16 + 16*16+16 + 16*1+1 = 96 + 272 + 17
    CHECK(a.param_count() == 385);
    Rng rng(1);
    const ModelWeights w = init_weights(a, rng);
    CHECK(w.params.size() == a.param_count());
    for (double p : w.params) CHECK(std::isfinite(p));
}

TEST_CASE("all-zero weights give sigmoid(0) = 0.5 for any input") {
    ModelWeights w;
    w.arch = desk_arch();
    w.params.assign(w.arch.param_count(), 0.0);
    CHECK(forward(w, std::array<double, 5>{1, 2, 3, 4, 5}) == doctest::Approx(0.5));
    CHECK(forward(w, std::array<double, 5>{-9, 0, 4, 1, 2}) == doctest::Approx(0.5));
    CHECK(predict_score(w, {0, 0, 0, 0, 0}) == doctest::Approx(0.5));
}

TEST_CASE("predict_score clamps into [1e-3, 1] and is deterministic") {
    ModelWeights w;
    w.arch = ModelArch{5, 1, 2, 1};
    w.params.assign(w.arch.param_count(), 0.0);
    // drive the output bias strongly negative: sigmoid(-40) ~ 4e-18 -> clamped
    w.params.back() = -40.0;
    CHECK(predict_score(w, {0, 0, 0, 0, 0}) == doctest::Approx(kScoreFloor));
    w.params.back() = 40.0;
    CHECK(predict_score(w, {0, 0, 0, 0, 0}) == doctest::Approx(1.0));

    Rng rng(3);
    const ModelWeights r = init_weights(desk_arch(), rng);
    const std::array<double, 5> f{0.3, -1.0, 0.5, 2.0, -0.2};
    CHECK(predict_score(r, f) == predict_score(r, f));
    for (int i = 0; i < 50; ++i) {
        std::array<double, 5> probe;
        for (auto& p : probe) p = rng.uniform(-3, 3);
        const double s = predict_score(r, probe);
        CHECK(s >= kScoreFloor);
        CHECK(s <= 1.0);
    }
}

TEST_CASE("analytic gradient matches central finite differences") {
    Rng rng(2025);
    const ModelArch arch = desk_arch();
    int checked = 0;
    for (int draw = 0; draw < 20; ++draw) {
        Rng wr = rng.derive(draw);
        const ModelWeights w = init_weights(arch, wr);
        std::vector<std::array<double, kFeatureDim>> x(8);
        std::vector<double> y(8);
        for (auto& row : x) {
            for (auto& v : row) v = wr.uniform(-2, 2);
        }
        for (auto& v : y) v = wr.uniform(0, 1);

        const auto analytic = mse_gradient(w, x, y);
        const auto numeric = fd_gradient(w, x, y, 1e-5);
        for (std::size_t i = 0; i < analytic.size(); ++i) {
            const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-6});
            CHECK(std::abs(analytic[i] - numeric[i]) / denom < 1e-4);
            ++checked;
        }
    }
    CHECK(checked > 0);
}

TEST_CASE("train_local: zero epochs returns the input weights and current MSE") {
    Rng rng(4);
    const ModelArch arch = desk_arch();
    const ModelWeights w = init_weights(arch, rng);
    std::vector<DatasetRow> data{{100, 1, 10, 1, 1e-5, 3}, {50, -1, 12, 2, 2e-5, 1}};
    FeatureScaler scaler = FeatureScaler::fit(data);

    TrainConfig cfg;
    cfg.epochs = 0;
    const TrainResult res = train_local(w, data, scaler, cfg);
    CHECK(res.weights.params == w.params);

    std::vector<std::array<double, kFeatureDim>> x;
    std::vector<double> y;
    for (const auto& r : data) {
        x.push_back(scaler.features(r));
        y.push_back(scaler.target(r));
    }
    CHECK(res.loss == doctest::Approx(mse_loss(w, x, y)));
}

TEST_CASE("train_local: loss trends down when fitting a single point") {
    Rng rng(5);
    const ModelWeights w = init_weights(desk_arch(), rng);
    std::vector<DatasetRow> data{{100, 1, 10, 1, 1e-5, 3}};
    FeatureScaler scaler = FeatureScaler::fit(data);

    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.batch_size = 1;
    double prev = 1e9;
    for (std::size_t epochs : {1u, 4u, 16u, 64u, 256u}) {
        cfg.epochs = epochs;
        const TrainResult res = train_local(w, data, scaler, cfg);
        CHECK(res.loss <= prev + 1e-12);
        prev = res.loss;
    }
    CHECK(prev < 0.02);
}

TEST_CASE("train_local rejects empty data and is bit-deterministic") {
    Rng rng(6);
    const ModelWeights w = init_weights(desk_arch(), rng);
    FeatureScaler scaler = identity_scaler();
    CHECK_THROWS_AS(train_local(w, {}, scaler, TrainConfig{}), std::invalid_argument);

    std::vector<DatasetRow> data;
    for (int i = 0; i < 40; ++i) {
        data.push_back({rng.uniform(0, 250), rng.bernoulli(0.5) ? 1.0 : -1.0, rng.uniform(5, 20),
                        1 + static_cast<int>(rng.uniform_int(6)), rng.uniform(0, 1e-4),
                        static_cast<int>(rng.uniform_int(8))});
    }
    const FeatureScaler fitted = FeatureScaler::fit(data);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.rng_seed = 99;
    const TrainResult a = train_local(w, data, fitted, cfg);
    const TrainResult b = train_local(w, data, fitted, cfg);
    CHECK(a.loss == b.loss);
    CHECK(a.weights.params == b.weights.params);
}

TEST_CASE("fedavg: mean, symmetry, permutation invariance, arch mismatch") {
    const ModelArch arch{2, 1, 2, 1};
    ModelWeights a, b, c;
    a.arch = b.arch = c.arch = arch;
    const std::size_t n = arch.param_count();
    a.params.assign(n, 1.0);
    b.params.assign(n, 2.0);
    c.params.assign(n, 6.0);

    std::vector<ModelWeights> models{a, b, c};
    const ModelWeights avg = fedavg(models);
    for (double p : avg.params) CHECK(p == doctest::Approx(3.0));

    // permutation invariance
    std::vector<ModelWeights> perm{c, a, b};
    CHECK(fedavg(perm).params == avg.params);

    // identical models average to themselves
    std::vector<ModelWeights> same{a, a, a};
    CHECK(fedavg(same).params == a.params);

    // p and -p cancel
    ModelWeights neg = a;
    for (auto& p : neg.params) p = -p;
    std::vector<ModelWeights> cancel{a, neg};
    for (double p : fedavg(cancel).params) CHECK(p == doctest::Approx(0.0));

    ModelWeights other;
    other.arch = ModelArch{2, 1, 3, 1};
    other.params.assign(other.arch.param_count(), 0.0);
    std::vector<ModelWeights> bad{a, other};
    CHECK_THROWS_WITH_AS(fedavg(bad), "fedavg: arch mismatch at index 1", std::invalid_argument);
}

TEST_CASE("global_loss is the arithmetic mean") {
    std::vector<double> one{0.2};
    CHECK(global_loss(one) == doctest::Approx(0.2));
    std::vector<double> two{0.1, 0.3};
    CHECK(global_loss(two) == doctest::Approx(0.2));
    std::vector<double> same(17, 0.42);
    CHECK(global_loss(same) == doctest::Approx(0.42));
    // exact rational check: mean of {1/4, 1/2, 1/4} = 1/3
    std::vector<double> exact{0.25, 0.5, 0.25};
    CHECK(global_loss(exact) == (0.25 + 0.5 + 0.25) / 3.0);
    CHECK_THROWS_AS(global_loss({}), std::invalid_argument);
}

TEST_CASE("weights serialization round trip and digest stability") {
    Rng rng(8);
    const ModelWeights w = init_weights(desk_arch(), rng);
    const auto bytes = serialize_weights(w);
    const ModelWeights back = deserialize_weights(bytes);
    CHECK(back.arch == w.arch);
    CHECK(back.params == w.params);
    CHECK(model_digest(w) == model_digest(back));

    ModelWeights tweaked = w;
    tweaked.params[0] += 1e-12;
    CHECK(model_digest(tweaked) != model_digest(w));
}

TEST_CASE("scaler freezes standardization and label scale") {
    std::vector<DatasetRow> rows;
    for (int i = 0; i < 100; ++i) {
        rows.push_back({double(i), i % 2 ? 1.0 : -1.0, 10.0 + i % 5, 1 + i % 6, 1e-5 * i,
                        i % 7});
    }
    const FeatureScaler s = FeatureScaler::fit(rows);
    CHECK(s.label_max == doctest::Approx(6.0));
    // standardized features have mean ~0, sd ~1 over the fit set
    std::array<double, kFeatureDim> mean{};
    for (const auto& r : rows) {
        const auto f = s.features(r);
        for (std::size_t j = 0; j < kFeatureDim; ++j) mean[j] += f[j];
    }
    for (double m : mean) CHECK(std::abs(m / rows.size()) < 1e-9);
    CHECK(s.target(rows[6]) == doctest::Approx(1.0));
}
