#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vfl/fl.hpp"
#include "vfl/guard.hpp"
#include "vfl/ledger.hpp"
#include "vfl/pofl.hpp"
#include "vfl/sim.hpp"

namespace vfl {

struct GuardSettings {
    std::size_t num_trees = 100;
    std::size_t subsample_size = 64;
    double threshold_percentile = 0.95;
    // refit the weights detector every iteration on freshly trained trusted
    // reference models; when false the iteration-1 forest is reused
    bool refit_weights_each_iteration = true;
};

struct ScenarioParams {
    SimConfig sim;
    ModelArch arch;
    TrainConfig train;
    AdversaryConfig adversary;
    GuardMode guard_mode = GuardMode::None;
    GuardSettings guard;
    ConsensusContext consensus;  // model/scaler pointers are filled by the run
    std::size_t k_max = 20;
    std::size_t min_rows = 8;  // participation threshold (stands in for s_i)
};

struct IterationRecord {
    std::size_t k = 0;
    double global_loss = 0.0;  // mean of passed local losses
    double eval_mse = 0.0;     // global model MSE on the trusted clean sample
    std::size_t passed = 0;
    std::size_t rejected = 0;
};

struct GuardLogRow {
    std::size_t k = 0;
    Digest vehicle_pseudonym{};
    GuardMode mode = GuardMode::None;
    double dataset_score = 0.0;
    double weight_score = 0.0;
    bool pass = true;
};

struct ScenarioResult {
    std::vector<IterationRecord> history;
    ModelWeights global_model;
    FeatureScaler scaler;
    LedgerCopy rsu_ledger;
    std::vector<GuardLogRow> guard_log;
    std::vector<VehicleState> vehicles;
    std::vector<std::size_t> participants;  // indices with enough rows
    double final_eval_mse = 0.0;
};

// Stages 1-3 for k = 1..k_max on freshly collected data:
//  1. every participant trains a local model (malicious ones on their
//     poisoned copy, while submitting a clean dataset summary),
//  2. the smart-contract guard screens each submission before its
//     microblock is accepted,
//  3. the RSU seals the passing set into a keyblock and redistributes the
//     FedAvg global model.
ScenarioResult run_scenario(const ScenarioParams& params, std::uint64_t seed);

// Relay election on the scenario's final state. Uses the sealed global model
// for PoFL; PoS reputations are drawn uniformly per vehicle.
DisseminationResult run_dissemination(const ScenarioParams& params, const ScenarioResult& scenario,
                                      ConsensusKind kind, std::uint64_t seed);

// Originator used by dissemination experiments: the vehicle closest to the
// area center, a stand-in for "incident in the middle of the map".
std::size_t central_vehicle(const std::vector<VehicleState>& vehicles, const SimConfig& cfg);

std::string guard_log_to_csv(const std::vector<GuardLogRow>& rows);

}  // namespace vfl
