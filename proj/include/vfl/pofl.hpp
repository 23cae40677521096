#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vfl/fl.hpp"
#include "vfl/ledger.hpp"
#include "vfl/rng.hpp"
#include "vfl/sim.hpp"

namespace vfl {

struct IncidentMessage {
    double origin_time = 0.0;
    Vec2 origin_position{};
    Digest org_pseudonym{};
    int hop = 0;
};

enum class ConsensusKind { PoFL, PoS };

const char* consensus_kind_name(ConsensusKind k);

// Everything a candidate needs to compute its relay score plus the cost model
// of the election itself. PoFL scores come from the candidate's own live
// features through the sealed global model; PoS uses reputation / 100 and is
// charged a ledger-lookup cost that grows with the registered population.
struct ConsensusContext {
    ConsensusKind kind = ConsensusKind::PoFL;
    const ModelWeights* global_model = nullptr;   // PoFL
    const FeatureScaler* scaler = nullptr;        // PoFL
    const std::vector<double>* reputations = nullptr;  // PoS, values in [0,100]
    double timer_unit_s = 0.01;
    double pofl_compute_charge_s = 0.05;
    double pos_lookup_cost_s = 0.001;  // per registered vehicle, per election
};

struct DisseminationMetrics {
    double delivery_ratio = 0.0;
    std::vector<double> per_hop_delay;   // election delay of each completed hop
    std::vector<Digest> relays;          // winning pseudonym per hop
    bool truncated = false;              // ran out of receivers before h_max
    std::size_t vehicles_reached = 0;
};

struct DisseminationResult {
    DisseminationMetrics metrics;
    std::vector<MessageBlock> blocks;  // message chain grown by this incident
};

// timer_unit / score; score must be >= the clamp floor.
double relay_timer(double score, double timer_unit_s);

// Timer-race relay election hop by hop (scores through the consensus kind,
// first expiry announces and rebroadcasts, announcements cancel rivals).
DisseminationResult disseminate(const SimConfig& cfg, const std::vector<VehicleState>& vehicles,
                                std::size_t org_idx, double start_time,
                                const ConsensusContext& ctx, Rng& rng,
                                std::vector<Event>* trace = nullptr);

double delivery_ratio(std::size_t vehicles_reached, std::size_t num_vehicles);

}  // namespace vfl
