#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vfl/fl.hpp"
#include "vfl/rng.hpp"
#include "vfl/sim.hpp"

namespace vfl {

struct AdversaryConfig {
    double malicious_fraction = 0.0;
    double selfish_fraction = 0.0;
    double poison_strength = 0.5;
    // when true, poisoned labels are re-drawn uniformly in [0, relabel_max]
    bool relabel = true;
};

enum class GuardMode { None, DatasetOnly, WeightsOnly, Both };

const char* guard_mode_name(GuardMode m);

// Isolation tree stored as an index-linked node pool.
struct IsolationNode {
    int feature = -1;   // -1 marks a leaf
    double split = 0.0;
    int left = -1;
    int right = -1;
    int size = 0;       // samples that reached this node (leaf adjustment)
};

struct IsolationTree {
    std::vector<IsolationNode> nodes;  // node 0 is the root
};

struct IsolationForestModel {
    std::vector<IsolationTree> trees;
    std::size_t subsample_size = 0;  // effective subsample actually used
    std::size_t num_trees = 0;
    std::size_t dim = 0;
    double threshold = 0.5;  // anomaly-score cutoff; pass means score <= threshold
};

// Average unsuccessful-search path length of a BST with n nodes; the standard
// Isolation Forest normalizer.
double average_path_length(std::size_t n);

IsolationForestModel fit_isolation_forest(const std::vector<std::vector<double>>& samples,
                                          std::size_t num_trees, std::size_t subsample_size,
                                          Rng& rng);

// Anomaly score in (0,1): 2^(-E[path length]/c(subsample)).
double anomaly_score(const IsolationForestModel& model, std::span<const double> point);

// Sets model.threshold to the given percentile of the scores of a trusted
// sample; returns the threshold.
double calibrate_threshold(IsolationForestModel& model,
                           const std::vector<std::vector<double>>& trusted, double percentile);

// Multiplicative perturbation of every feature; labels are either scaled the
// same way or re-drawn uniformly in [0, relabel_max] when relabel_max > 0.
std::vector<DatasetRow> poison_dataset(const std::vector<DatasetRow>& data, double strength,
                                       int relabel_max, Rng& rng);

// Fixed-dimension summaries fed to the detectors.
std::vector<double> dataset_summary(const std::vector<DatasetRow>& data);   // 11-dim
std::vector<double> weight_summary(const ModelWeights& w);                  // 3 per layer

struct GuardDetectors {
    std::optional<IsolationForestModel> dataset_forest;
    std::optional<IsolationForestModel> weights_forest;
};

struct GuardVerdict {
    bool pass = true;
    double dataset_score = 0.0;
    double weight_score = 0.0;
};

GuardVerdict check_model(const std::vector<double>& ds_summary,
                         const std::vector<double>& w_summary, GuardMode mode,
                         const GuardDetectors& detectors);

}  // namespace vfl
