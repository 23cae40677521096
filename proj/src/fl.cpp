#include "vfl/fl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "vfl/bytes.hpp"

namespace vfl {

std::size_t ModelArch::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < num_layers(); ++l) {
        n += layer_fan_in(l) * layer_fan_out(l) + layer_fan_out(l);
    }
    return n;
}

FeatureScaler FeatureScaler::fit(std::span<const DatasetRow> rows) {
    if (rows.empty()) throw std::invalid_argument("FeatureScaler: no rows");
    FeatureScaler s;
    const double n = static_cast<double>(rows.size());
    auto raw = [](const DatasetRow& r) {
        return std::array<double, kFeatureDim>{r.d_is, r.dir_is, r.v_i, static_cast<double>(r.h),
                                               r.gamma_i};
    };
    for (const auto& r : rows) {
        const auto f = raw(r);
        for (std::size_t i = 0; i < kFeatureDim; ++i) s.mean[i] += f[i];
        s.label_max = std::max(s.label_max, static_cast<double>(r.n_a));
    }
    for (auto& m : s.mean) m /= n;
    for (const auto& r : rows) {
        const auto f = raw(r);
        for (std::size_t i = 0; i < kFeatureDim; ++i) {
            const double d = f[i] - s.mean[i];
            s.stddev[i] += d * d;
        }
    }
    for (auto& v : s.stddev) v = std::max(std::sqrt(v / n), 1e-9);
    return s;
}

std::array<double, kFeatureDim> FeatureScaler::features(const DatasetRow& row) const {
    const std::array<double, kFeatureDim> raw{row.d_is, row.dir_is, row.v_i,
                                              static_cast<double>(row.h), row.gamma_i};
    std::array<double, kFeatureDim> out;
    for (std::size_t i = 0; i < kFeatureDim; ++i) out[i] = (raw[i] - mean[i]) / stddev[i];
    return out;
}

double FeatureScaler::target(const DatasetRow& row) const {
    return static_cast<double>(row.n_a) / label_max;
}

ModelWeights init_weights(const ModelArch& arch, Rng& rng) {
    ModelWeights w;
    w.arch = arch;
    w.params.reserve(arch.param_count());
    for (std::size_t l = 0; l < arch.num_layers(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(arch.layer_fan_in(l)));
        const std::size_t count =
            arch.layer_fan_in(l) * arch.layer_fan_out(l) + arch.layer_fan_out(l);
        for (std::size_t i = 0; i < count; ++i) w.params.push_back(rng.uniform(-bound, bound));
    }
    return w;
}

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Per-sample activations kept for backprop.
struct ForwardPass {
    std::vector<std::vector<double>> activations;  // activations[0] = input
    double output = 0.0;
};

ForwardPass run_forward(const ModelWeights& w, std::span<const double> input) {
    const ModelArch& a = w.arch;
    ForwardPass fp;
    fp.activations.resize(a.num_layers() + 1);
    fp.activations[0].assign(input.begin(), input.end());

    std::size_t offset = 0;
    for (std::size_t l = 0; l < a.num_layers(); ++l) {
        const std::size_t fin = a.layer_fan_in(l);
        const std::size_t fout = a.layer_fan_out(l);
        const double* weights = w.params.data() + offset;
        const double* biases = weights + fin * fout;
        const auto& prev = fp.activations[l];
        auto& cur = fp.activations[l + 1];
        cur.resize(fout);
        for (std::size_t j = 0; j < fout; ++j) {
            double z = biases[j];
            const double* row = weights + j * fin;
            for (std::size_t i = 0; i < fin; ++i) z += row[i] * prev[i];
            cur[j] = (l + 1 == a.num_layers()) ? sigmoid(z) : std::tanh(z);
        }
        offset += fin * fout + fout;
    }
    fp.output = fp.activations.back()[0];
    return fp;
}

}  // namespace

double forward(const ModelWeights& w, std::span<const double> features) {
    if (features.size() != w.arch.input_dim) {
        throw std::invalid_argument("forward: feature dimension mismatch");
    }
    return run_forward(w, features).output;
}

double mse_loss(const ModelWeights& w, const std::vector<std::array<double, kFeatureDim>>& x,
                const std::vector<double>& y) {
    if (x.empty() || x.size() != y.size()) throw std::invalid_argument("mse_loss: bad batch");
    double sum = 0.0;
    for (std::size_t s = 0; s < x.size(); ++s) {
        const double err = run_forward(w, x[s]).output - y[s];
        sum += err * err;
    }
    return sum / static_cast<double>(x.size());
}

std::vector<double> mse_gradient(const ModelWeights& w,
                                 const std::vector<std::array<double, kFeatureDim>>& x,
                                 const std::vector<double>& y) {
    if (x.empty() || x.size() != y.size()) throw std::invalid_argument("mse_gradient: bad batch");
    const ModelArch& a = w.arch;
    std::vector<double> grad(w.params.size(), 0.0);

    std::vector<std::size_t> offsets(a.num_layers());
    std::size_t off = 0;
    for (std::size_t l = 0; l < a.num_layers(); ++l) {
        offsets[l] = off;
        off += a.layer_fan_in(l) * a.layer_fan_out(l) + a.layer_fan_out(l);
    }

    const double inv_batch = 1.0 / static_cast<double>(x.size());
    for (std::size_t s = 0; s < x.size(); ++s) {
        const ForwardPass fp = run_forward(w, x[s]);
        // dL/da for the output layer; sigmoid derivative folded in below
        std::vector<double> delta{2.0 * (fp.output - y[s]) * inv_batch};

        for (std::size_t l = a.num_layers(); l-- > 0;) {
            const std::size_t fin = a.layer_fan_in(l);
            const std::size_t fout = a.layer_fan_out(l);
            const double* weights = w.params.data() + offsets[l];
            const auto& act_in = fp.activations[l];
            const auto& act_out = fp.activations[l + 1];

            // delta currently holds dL/da(out); convert to dL/dz via activation derivative
            std::vector<double> dz(fout);
            for (std::size_t j = 0; j < fout; ++j) {
                const double aj = act_out[j];
                const double da = (l + 1 == a.num_layers()) ? aj * (1.0 - aj) : 1.0 - aj * aj;
                dz[j] = delta[j] * da;
            }

            double* gw = grad.data() + offsets[l];
            double* gb = gw + fin * fout;
            for (std::size_t j = 0; j < fout; ++j) {
                const double d = dz[j];
                double* grow = gw + j * fin;
                for (std::size_t i = 0; i < fin; ++i) grow[i] += d * act_in[i];
                gb[j] += d;
            }

            if (l > 0) {
                std::vector<double> prev(fin, 0.0);
                for (std::size_t j = 0; j < fout; ++j) {
                    const double d = dz[j];
                    const double* row = weights + j * fin;
                    for (std::size_t i = 0; i < fin; ++i) prev[i] += row[i] * d;
                }
                delta = std::move(prev);
            }
        }
    }
    return grad;
}

TrainResult train_local(const ModelWeights& start, const std::vector<DatasetRow>& data,
                        const FeatureScaler& scaler, const TrainConfig& cfg) {
    if (data.empty()) throw std::invalid_argument("train_local: empty dataset");
    if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("train_local: learning_rate");
    if (cfg.batch_size == 0) throw std::invalid_argument("train_local: batch_size");

    std::vector<std::array<double, kFeatureDim>> x(data.size());
    std::vector<double> y(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        x[i] = scaler.features(data[i]);
        y[i] = scaler.target(data[i]);
    }

    TrainResult result{start, 0.0};
    Rng rng(cfg.rng_seed);
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<std::array<double, kFeatureDim>> bx;
    std::vector<double> by;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size() - 1; i > 0; --i) {
            std::swap(order[i], order[rng.uniform_int(i + 1)]);
        }
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(begin + cfg.batch_size, order.size());
            bx.clear();
            by.clear();
            for (std::size_t i = begin; i < end; ++i) {
                bx.push_back(x[order[i]]);
                by.push_back(y[order[i]]);
            }
            const auto grad = mse_gradient(result.weights, bx, by);
            for (std::size_t i = 0; i < grad.size(); ++i) {
                result.weights.params[i] -= cfg.learning_rate * grad[i];
            }
        }
        const double epoch_loss = mse_loss(result.weights, x, y);
        if (!std::isfinite(epoch_loss)) {
            throw std::runtime_error("train_local: loss diverged at epoch " +
                                     std::to_string(epoch + 1));
        }
    }
    result.loss = mse_loss(result.weights, x, y);
    return result;
}

ModelWeights fedavg(std::span<const ModelWeights> models) {
    if (models.empty()) throw std::invalid_argument("fedavg: empty model list");
    const ModelArch& arch = models.front().arch;
    for (std::size_t i = 1; i < models.size(); ++i) {
        if (!(models[i].arch == arch)) {
            throw std::invalid_argument("fedavg: arch mismatch at index " + std::to_string(i));
        }
    }
    ModelWeights out;
    out.arch = arch;
    out.params.assign(models.front().params.size(), 0.0);
    for (const auto& m : models) {
        for (std::size_t i = 0; i < out.params.size(); ++i) out.params[i] += m.params[i];
    }
    const double inv = 1.0 / static_cast<double>(models.size());
    for (auto& p : out.params) p *= inv;
    return out;
}

double global_loss(std::span<const double> local_losses) {
    if (local_losses.empty()) throw std::invalid_argument("global_loss: empty list");
    double sum = 0.0;
    for (double l : local_losses) {
        if (!(l >= 0.0) || !std::isfinite(l)) {
            throw std::invalid_argument("global_loss: losses must be finite and nonnegative");
        }
        sum += l;
    }
    return sum / static_cast<double>(local_losses.size());
}

double predict_score(const ModelWeights& w, const std::array<double, kFeatureDim>& features) {
    const double out = forward(w, features);
    if (!std::isfinite(out)) throw std::runtime_error("predict_score: non-finite activation");
    return std::clamp(out, kScoreFloor, 1.0);
}

std::vector<std::uint8_t> serialize_weights(const ModelWeights& w) {
    ByteWriter bw;
    bw.str("VFLW1");
    bw.u64(w.arch.input_dim);
    bw.u64(w.arch.hidden_layers);
    bw.u64(w.arch.hidden_width);
    bw.u64(w.arch.output_dim);
    bw.u64(w.params.size());
    for (double p : w.params) bw.f64(p);
    return bw.data();
}

ModelWeights deserialize_weights(std::span<const std::uint8_t> bytes) {
    ByteReader br(bytes);
    const auto magic = br.bytes();
    if (std::string(magic.begin(), magic.end()) != "VFLW1") {
        throw std::invalid_argument("deserialize_weights: bad magic");
    }
    ModelWeights w;
    w.arch.input_dim = br.u64();
    w.arch.hidden_layers = br.u64();
    w.arch.hidden_width = br.u64();
    w.arch.output_dim = br.u64();
    const std::uint64_t count = br.u64();
    if (count != w.arch.param_count()) {
        throw std::invalid_argument("deserialize_weights: parameter count mismatch");
    }
    w.params.resize(count);
    for (auto& p : w.params) p = br.f64();
    if (!br.done()) throw std::invalid_argument("deserialize_weights: trailing bytes");
    return w;
}

Digest model_digest(const ModelWeights& w) {
    const auto bytes = serialize_weights(w);
    return sha256(std::span<const std::uint8_t>(bytes.data(), bytes.size()));
}

}  // namespace vfl
