#include "vfl/guard.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vfl {

const char* guard_mode_name(GuardMode m) {
    switch (m) {
        case GuardMode::None: return "none";
        case GuardMode::DatasetOnly: return "dataset";
        case GuardMode::WeightsOnly: return "weights";
        case GuardMode::Both: return "both";
    }
    return "unknown";
}

double average_path_length(std::size_t n) {
    if (n <= 1) return 0.0;
    if (n == 2) return 1.0;
    const double nn = static_cast<double>(n);
    constexpr double kEulerGamma = 0.5772156649015328606;
    return 2.0 * (std::log(nn - 1.0) + kEulerGamma) - 2.0 * (nn - 1.0) / nn;
}

namespace {

struct TreeBuilder {
    const std::vector<std::vector<double>>& samples;
    std::size_t dim;
    int depth_cap;
    Rng& rng;
    IsolationTree tree;

    int build(std::vector<std::size_t>& idx, std::size_t begin, std::size_t end, int depth) {
        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes[node_id].size = static_cast<int>(end - begin);
        if (end - begin <= 1 || depth >= depth_cap) return node_id;

        // candidate features are those with spread in this node
        std::vector<std::size_t> spread;
        std::vector<double> lo(dim, 0.0), hi(dim, 0.0);
        for (std::size_t f = 0; f < dim; ++f) {
            double mn = samples[idx[begin]][f], mx = mn;
            for (std::size_t i = begin + 1; i < end; ++i) {
                mn = std::min(mn, samples[idx[i]][f]);
                mx = std::max(mx, samples[idx[i]][f]);
            }
            lo[f] = mn;
            hi[f] = mx;
            if (mx > mn) spread.push_back(f);
        }
        if (spread.empty()) return node_id;

        const std::size_t f = spread[rng.uniform_int(spread.size())];
        const double split = rng.uniform(lo[f], hi[f]);

        auto mid_it = std::partition(idx.begin() + begin, idx.begin() + end,
                                     [&](std::size_t i) { return samples[i][f] < split; });
        const std::size_t mid = static_cast<std::size_t>(mid_it - idx.begin());
        if (mid == begin || mid == end) return node_id;  // degenerate split

        tree.nodes[node_id].feature = static_cast<int>(f);
        tree.nodes[node_id].split = split;
        const int left = build(idx, begin, mid, depth + 1);
        tree.nodes[node_id].left = left;
        const int right = build(idx, mid, end, depth + 1);
        tree.nodes[node_id].right = right;
        return node_id;
    }
};

double path_length(const IsolationTree& tree, std::span<const double> point) {
    int node = 0;
    double depth = 0.0;
    for (;;) {
        const IsolationNode& n = tree.nodes[node];
        if (n.feature < 0) return depth + average_path_length(n.size);
        node = point[n.feature] < n.split ? n.left : n.right;
        depth += 1.0;
    }
}

}  // namespace

IsolationForestModel fit_isolation_forest(const std::vector<std::vector<double>>& samples,
                                          std::size_t num_trees, std::size_t subsample_size,
                                          Rng& rng) {
    if (samples.empty()) throw std::invalid_argument("fit_isolation_forest: no samples");
    if (num_trees == 0) throw std::invalid_argument("fit_isolation_forest: num_trees");
    const std::size_t dim = samples.front().size();
    if (dim == 0) throw std::invalid_argument("fit_isolation_forest: zero-dimensional samples");
    for (const auto& s : samples) {
        if (s.size() != dim) {
            throw std::invalid_argument("fit_isolation_forest: sample dimension mismatch");
        }
    }

    IsolationForestModel model;
    model.num_trees = num_trees;
    model.subsample_size = std::min(subsample_size, samples.size());
    if (model.subsample_size == 0) model.subsample_size = samples.size();
    model.dim = dim;
    const int depth_cap = static_cast<int>(
        std::ceil(std::log2(std::max<std::size_t>(2, model.subsample_size))));

    std::vector<std::size_t> pool(samples.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;

    model.trees.reserve(num_trees);
    for (std::size_t t = 0; t < num_trees; ++t) {
        // partial Fisher-Yates draw of the subsample
        for (std::size_t i = 0; i < model.subsample_size; ++i) {
            const std::size_t j = i + rng.uniform_int(pool.size() - i);
            std::swap(pool[i], pool[j]);
        }
        std::vector<std::size_t> idx(pool.begin(), pool.begin() + model.subsample_size);
        TreeBuilder builder{samples, dim, depth_cap, rng, {}};
        builder.build(idx, 0, idx.size(), 0);
        model.trees.push_back(std::move(builder.tree));
    }
    return model;
}

double anomaly_score(const IsolationForestModel& model, std::span<const double> point) {
    if (point.size() != model.dim) {
        throw std::invalid_argument("anomaly_score: point dimension mismatch");
    }
    double total = 0.0;
    for (const auto& tree : model.trees) total += path_length(tree, point);
    const double mean_path = total / static_cast<double>(model.trees.size());
    return std::exp2(-mean_path / average_path_length(model.subsample_size));
}

double calibrate_threshold(IsolationForestModel& model,
                           const std::vector<std::vector<double>>& trusted, double percentile) {
    if (trusted.empty()) throw std::invalid_argument("calibrate_threshold: no trusted samples");
    if (!(percentile > 0.0 && percentile <= 1.0)) {
        throw std::invalid_argument("calibrate_threshold: percentile out of range");
    }
    std::vector<double> scores;
    scores.reserve(trusted.size());
    for (const auto& s : trusted) scores.push_back(anomaly_score(model, s));
    std::sort(scores.begin(), scores.end());
    const std::size_t idx = std::min(
        scores.size() - 1,
        static_cast<std::size_t>(std::ceil(percentile * static_cast<double>(scores.size()))) - 1);
    model.threshold = scores[idx];
    return model.threshold;
}

std::vector<DatasetRow> poison_dataset(const std::vector<DatasetRow>& data, double strength,
                                       int relabel_max, Rng& rng) {
    if (!(strength > 0.0)) throw std::invalid_argument("poison_dataset: strength must be positive");
    std::vector<DatasetRow> out;
    out.reserve(data.size());
    for (const auto& r : data) {
        DatasetRow p = r;
        auto factor = [&]() { return rng.uniform(1.0 - strength, 1.0 + strength); };
        p.d_is = r.d_is * factor();
        p.dir_is = r.dir_is * factor();
        p.v_i = r.v_i * factor();
        p.h = static_cast<int>(std::lround(r.h * factor()));
        p.gamma_i = r.gamma_i * factor();
        if (relabel_max > 0) {
            p.n_a = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(relabel_max) + 1));
        } else {
            p.n_a = std::max(0, static_cast<int>(std::lround(r.n_a * factor())));
        }
        out.push_back(p);
    }
    return out;
}

std::vector<double> dataset_summary(const std::vector<DatasetRow>& data) {
    std::vector<double> out(2 * kFeatureDim + 1, 0.0);
    if (data.empty()) return out;
    const double n = static_cast<double>(data.size());
    auto raw = [](const DatasetRow& r) {
        return std::array<double, kFeatureDim>{r.d_is, r.dir_is, r.v_i, static_cast<double>(r.h),
                                               r.gamma_i};
    };
    for (const auto& r : data) {
        const auto f = raw(r);
        for (std::size_t i = 0; i < kFeatureDim; ++i) out[i] += f[i];
        out[2 * kFeatureDim] += static_cast<double>(r.n_a);
    }
    for (std::size_t i = 0; i < kFeatureDim; ++i) out[i] /= n;
    out[2 * kFeatureDim] /= n;
    for (const auto& r : data) {
        const auto f = raw(r);
        for (std::size_t i = 0; i < kFeatureDim; ++i) {
            const double d = f[i] - out[i];
            out[kFeatureDim + i] += d * d;
        }
    }
    for (std::size_t i = 0; i < kFeatureDim; ++i) {
        out[kFeatureDim + i] = std::sqrt(out[kFeatureDim + i] / n);
    }
    return out;
}

std::vector<double> weight_summary(const ModelWeights& w) {
    std::vector<double> out;
    out.reserve(3 * w.arch.num_layers());
    std::size_t offset = 0;
    for (std::size_t l = 0; l < w.arch.num_layers(); ++l) {
        const std::size_t count =
            w.arch.layer_fan_in(l) * w.arch.layer_fan_out(l) + w.arch.layer_fan_out(l);
        double sum = 0.0, sq = 0.0;
        for (std::size_t i = offset; i < offset + count; ++i) {
            sum += w.params[i];
            sq += w.params[i] * w.params[i];
        }
        const double mean = sum / static_cast<double>(count);
        const double var = std::max(0.0, sq / static_cast<double>(count) - mean * mean);
        out.push_back(mean);
        out.push_back(std::sqrt(var));
        out.push_back(std::sqrt(sq));
        offset += count;
    }
    return out;
}

GuardVerdict check_model(const std::vector<double>& ds_summary,
                         const std::vector<double>& w_summary, GuardMode mode,
                         const GuardDetectors& detectors) {
    GuardVerdict verdict;
    const bool need_dataset = mode == GuardMode::DatasetOnly || mode == GuardMode::Both;
    const bool need_weights = mode == GuardMode::WeightsOnly || mode == GuardMode::Both;
    if (need_dataset && !detectors.dataset_forest) {
        throw std::logic_error("check_model: dataset detector not fitted");
    }
    if (need_weights && !detectors.weights_forest) {
        throw std::logic_error("check_model: weights detector not fitted");
    }
    if (need_dataset) {
        verdict.dataset_score = anomaly_score(*detectors.dataset_forest, ds_summary);
        if (verdict.dataset_score > detectors.dataset_forest->threshold) verdict.pass = false;
    }
    if (need_weights) {
        verdict.weight_score = anomaly_score(*detectors.weights_forest, w_summary);
        if (verdict.weight_score > detectors.weights_forest->threshold) verdict.pass = false;
    }
    return verdict;
}

}  // namespace vfl
