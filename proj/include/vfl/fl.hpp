#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "vfl/rng.hpp"
#include "vfl/sha256.hpp"
#include "vfl/sim.hpp"

namespace vfl {

inline constexpr double kScoreFloor = 1e-3;
inline constexpr std::size_t kFeatureDim = 5;

struct ModelArch {
    std::size_t input_dim = kFeatureDim;
    std::size_t hidden_layers = 2;
    std::size_t hidden_width = 16;
    std::size_t output_dim = 1;

    std::size_t num_layers() const { return hidden_layers + 1; }
    std::size_t layer_fan_in(std::size_t layer) const {
        return layer == 0 ? input_dim : hidden_width;
    }
    std::size_t layer_fan_out(std::size_t layer) const {
        return layer == hidden_layers ? output_dim : hidden_width;
    }
    std::size_t param_count() const;

    bool operator==(const ModelArch&) const = default;
};

// Flat parameter vector: per layer, row-major weights then biases.
struct ModelWeights {
    ModelArch arch;
    std::vector<double> params;
};

struct TrainConfig {
    std::size_t epochs = 5;
    double learning_rate = 0.05;
    std::size_t batch_size = 16;
    std::uint64_t rng_seed = 1;
};

// Feature standardization and label normalization, fit once on trusted
// collection output and frozen. Targets are n_a scaled by the network-wide
// maximum so that scores stay in (0, 1].
struct FeatureScaler {
    std::array<double, kFeatureDim> mean{};
    std::array<double, kFeatureDim> stddev{};
    double label_max = 1.0;

    static FeatureScaler fit(std::span<const DatasetRow> rows);

    std::array<double, kFeatureDim> features(const DatasetRow& row) const;
    double target(const DatasetRow& row) const;
};

ModelWeights init_weights(const ModelArch& arch, Rng& rng);

// Forward pass: tanh hidden activations, sigmoid output.
double forward(const ModelWeights& w, std::span<const double> features);

// Mean squared error over a prepared (standardized) batch.
double mse_loss(const ModelWeights& w, const std::vector<std::array<double, kFeatureDim>>& x,
                const std::vector<double>& y);

// Analytic gradient of the batch MSE w.r.t. every parameter.
std::vector<double> mse_gradient(const ModelWeights& w,
                                 const std::vector<std::array<double, kFeatureDim>>& x,
                                 const std::vector<double>& y);

struct TrainResult {
    ModelWeights weights;
    double loss = 0.0;  // full-dataset MSE after the final update
};

// Mini-batch SGD for cfg.epochs, deterministic given cfg.rng_seed.
TrainResult train_local(const ModelWeights& start, const std::vector<DatasetRow>& data,
                        const FeatureScaler& scaler, const TrainConfig& cfg);

// Element-wise mean of parameter vectors; all models must share one arch.
ModelWeights fedavg(std::span<const ModelWeights> models);

// Arithmetic mean of local losses.
double global_loss(std::span<const double> local_losses);

// Sigmoid output clamped to [kScoreFloor, 1].
double predict_score(const ModelWeights& w, const std::array<double, kFeatureDim>& features);

// Canonical binary form: arch header then little-endian doubles. Its SHA-256
// is the payload hash committed in microblocks.
std::vector<std::uint8_t> serialize_weights(const ModelWeights& w);
ModelWeights deserialize_weights(std::span<const std::uint8_t> bytes);
Digest model_digest(const ModelWeights& w);

}  // namespace vfl
