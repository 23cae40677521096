#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vfl/ledger.hpp"
#include "vfl/rng.hpp"
#include "vfl/sha256.hpp"

namespace vfl {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(const Vec2& a, const Vec2& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

struct SimConfig {
    double area_width_m = 2500.0;
    double area_height_m = 2500.0;
    std::size_t num_vehicles = 100;
    double tx_range_m = 250.0;
    double mean_speed_mps = 50.0 / 3.6;  // 50 km/h
    double sim_duration_s = 300.0;
    int h_max = 6;
    double wait_max_s = 0.1;
    double msg_loss_prob = 0.0;
    std::uint64_t rng_seed = 1;

    // radio/roster knobs
    double prop_delay_s = 0.001;
    double designated_fraction = 0.05;
    double fl_participant_fraction = 1.0;
    std::size_t hello_rounds = 60;
};

// One relay observation: what a forwarder records about its own forwarding
// act, labeled with the acknowledgment count it collected.
struct DatasetRow {
    double d_is = 0.0;     // distance to sender at forwarding time (m)
    double dir_is = 1.0;   // +1 moving toward sender, -1 away
    double v_i = 0.0;      // own speed (m/s)
    int h = 1;             // hop index
    double gamma_i = 0.0;  // traffic density within tx range (vehicles/m^2)
    int n_a = 0;           // acknowledgments received (label)
};

struct VehicleState {
    std::uint32_t id = 0;
    Digest pseudonym{};
    Vec2 position{};
    Vec2 velocity{};
    bool is_designated = false;
    bool is_fl_participant = false;
    bool is_malicious = false;
    bool is_selfish = false;
    std::vector<DatasetRow> dataset;
    LedgerCopy ledger;

    double speed() const { return std::sqrt(velocity.x * velocity.x + velocity.y * velocity.y); }
};

enum class EventKind : int {
    HelloOriginate = 0,
    HelloForward = 1,
    AckDeliver = 2,
    TimerExpire = 3,
    BlockAnnounce = 4,
    RsuSync = 5,
    IncidentOriginate = 6,
};

const char* event_kind_name(EventKind k);

// Processed-event record; the trace of a run is the determinism witness.
struct Event {
    double time = 0.0;
    EventKind kind = EventKind::HelloOriginate;
    std::uint32_t vehicle = 0;
    int hop = 0;
    double aux = 0.0;
};

// Canonical byte serialization of a trace, for bit-identical comparisons.
std::string serialize_trace(const std::vector<Event>& trace);

// Salted pseudonym: stands in for the paper's encrypted identity.
Digest pseudonym_for(std::uint32_t id, std::uint64_t salt);

// Straight-line motion with boundary reflection; speed magnitude is
// preserved, the contacted velocity component flips sign.
VehicleState step_mobility(VehicleState state, double dt, const SimConfig& cfg);

// Indices of vehicles within Euclidean distance <= r of `center`, excluding
// `exclude_id` when given. Boundary is inclusive. Ascending index order.
std::vector<std::size_t> neighbors_within(const std::vector<VehicleState>& vehicles, Vec2 center,
                                          double r, std::optional<std::uint32_t> exclude_id);

std::vector<std::size_t> neighbors_of(const std::vector<VehicleState>& vehicles,
                                      std::size_t center_idx, double r);

// |neighbors| / (pi r^2)
double estimate_density(const std::vector<VehicleState>& vehicles, std::size_t center_idx,
                        double r);

// Role assignment and uniform placement. Designated vehicles are never
// adversarial; a vehicle is at most one of malicious/selfish.
std::vector<VehicleState> init_vehicles(const SimConfig& cfg, double malicious_fraction,
                                        double selfish_fraction, Rng& rng);

struct HelloRoundStats {
    std::size_t rows_recorded = 0;
    std::size_t forwards = 0;
    int hops_reached = 0;
};

// One *Hello* propagation from a designated origin: per hop, FL-participant
// receivers draw uniform waiting times, the earliest unsuppressed one
// forwards, counts acknowledgments from first-time receivers (selfish
// receivers stay silent) and records a DatasetRow.
HelloRoundStats run_hello_round(const SimConfig& cfg, std::vector<VehicleState>& vehicles,
                                std::size_t origin_idx, double start_time, Rng& rng,
                                std::vector<Event>* trace = nullptr);

// Repeated rounds with mobility advanced between them; origins rotate over
// the designated set. How many rounds make up a collection phase is left to
// configuration.
void collect_datasets(const SimConfig& cfg, std::vector<VehicleState>& vehicles,
                      std::size_t rounds, Rng& rng, std::vector<Event>* trace = nullptr);

// CSV export with header d_is,dir_is,v_i,h,gamma_i,n_a
std::string dataset_to_csv(const std::vector<DatasetRow>& rows);

}  // namespace vfl
