#include "vfl/sim.hpp"

#include <algorithm>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "vfl/bytes.hpp"
#include "vfl/event_queue.hpp"

namespace vfl {

const char* event_kind_name(EventKind k) {
    switch (k) {
        case EventKind::HelloOriginate: return "hello_originate";
        case EventKind::HelloForward: return "hello_forward";
        case EventKind::AckDeliver: return "ack_deliver";
        case EventKind::TimerExpire: return "timer_expire";
        case EventKind::BlockAnnounce: return "block_announce";
        case EventKind::RsuSync: return "rsu_sync";
        case EventKind::IncidentOriginate: return "incident_originate";
    }
    return "unknown";
}

std::string serialize_trace(const std::vector<Event>& trace) {
    std::ostringstream os;
    char buf[96];
    for (const auto& ev : trace) {
        std::snprintf(buf, sizeof(buf), "%.17g %d %u %d %.17g\n", ev.time,
                      static_cast<int>(ev.kind), ev.vehicle, ev.hop, ev.aux);
        os << buf;
    }
    return os.str();
}

Digest pseudonym_for(std::uint32_t id, std::uint64_t salt) {
    ByteWriter w;
    w.str("vfl-pseudonym");
    w.u64(salt);
    w.u32(id);
    return w.hash();
}

VehicleState step_mobility(VehicleState state, double dt, const SimConfig& cfg) {
    if (!(dt > 0.0)) throw std::invalid_argument("step_mobility: dt must be positive");
    double x = state.position.x + state.velocity.x * dt;
    double y = state.position.y + state.velocity.y * dt;
    while (x < 0.0 || x > cfg.area_width_m) {
        if (x < 0.0) {
            x = -x;
        } else {
            x = 2.0 * cfg.area_width_m - x;
        }
        state.velocity.x = -state.velocity.x;
    }
    while (y < 0.0 || y > cfg.area_height_m) {
        if (y < 0.0) {
            y = -y;
        } else {
            y = 2.0 * cfg.area_height_m - y;
        }
        state.velocity.y = -state.velocity.y;
    }
    state.position = {x, y};
    return state;
}

std::vector<std::size_t> neighbors_within(const std::vector<VehicleState>& vehicles, Vec2 center,
                                          double r, std::optional<std::uint32_t> exclude_id) {
    if (!(r > 0.0)) throw std::invalid_argument("neighbors: range must be positive");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < vehicles.size(); ++i) {
        if (exclude_id && vehicles[i].id == *exclude_id) continue;
        if (distance(vehicles[i].position, center) <= r) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> neighbors_of(const std::vector<VehicleState>& vehicles,
                                      std::size_t center_idx, double r) {
    return neighbors_within(vehicles, vehicles[center_idx].position, r,
                            vehicles[center_idx].id);
}

double estimate_density(const std::vector<VehicleState>& vehicles, std::size_t center_idx,
                        double r) {
    const auto nbrs = neighbors_of(vehicles, center_idx, r);
    return static_cast<double>(nbrs.size()) / (std::numbers::pi * r * r);
}

std::vector<VehicleState> init_vehicles(const SimConfig& cfg, double malicious_fraction,
                                        double selfish_fraction, Rng& rng) {
    const std::size_t n = cfg.num_vehicles;
    if (n == 0) throw std::invalid_argument("init_vehicles: num_vehicles must be positive");

    std::vector<VehicleState> vehicles(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& v = vehicles[i];
        v.id = static_cast<std::uint32_t>(i);
        v.pseudonym = pseudonym_for(v.id, cfg.rng_seed);
        v.position = {rng.uniform(0.0, cfg.area_width_m), rng.uniform(0.0, cfg.area_height_m)};
        const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double speed = rng.uniform(0.5, 1.5) * cfg.mean_speed_mps;
        v.velocity = {speed * std::cos(heading), speed * std::sin(heading)};
        v.ledger = LedgerCopy::with_genesis();
    }

    auto shuffled = [&rng, n]() {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        for (std::size_t i = n - 1; i > 0; --i) {
            std::swap(order[i], order[rng.uniform_int(i + 1)]);
        }
        return order;
    };

    // roles: designated first (trusted, never adversarial), adversaries from the rest
    const auto role_order = shuffled();
    const std::size_t n_designated =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.designated_fraction * n)));
    std::size_t n_malicious = static_cast<std::size_t>(std::llround(malicious_fraction * n));
    std::size_t n_selfish = static_cast<std::size_t>(std::llround(selfish_fraction * n));
    const std::size_t pool = n - std::min(n_designated, n);
    n_malicious = std::min(n_malicious, pool);
    n_selfish = std::min(n_selfish, pool - n_malicious);

    std::size_t at = 0;
    for (std::size_t i = 0; i < n_designated && at < n; ++i) vehicles[role_order[at++]].is_designated = true;
    for (std::size_t i = 0; i < n_malicious && at < n; ++i) vehicles[role_order[at++]].is_malicious = true;
    for (std::size_t i = 0; i < n_selfish && at < n; ++i) vehicles[role_order[at++]].is_selfish = true;

    const auto participant_order = shuffled();
    const std::size_t n_participants =
        std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(cfg.fl_participant_fraction * n)));
    for (std::size_t i = 0; i < n_participants; ++i) {
        vehicles[participant_order[i]].is_fl_participant = true;
    }
    return vehicles;
}

namespace {

double direction_flag(const VehicleState& v, const Vec2& sender_pos) {
    const double dx = sender_pos.x - v.position.x;
    const double dy = sender_pos.y - v.position.y;
    return (v.velocity.x * dx + v.velocity.y * dy) >= 0.0 ? 1.0 : -1.0;
}

}  // namespace

HelloRoundStats run_hello_round(const SimConfig& cfg, std::vector<VehicleState>& vehicles,
                                std::size_t origin_idx, double start_time, Rng& rng,
                                std::vector<Event>* trace) {
    if (origin_idx >= vehicles.size() || !vehicles[origin_idx].is_designated) {
        throw std::invalid_argument("run_hello_round: origin must be a designated vehicle");
    }

    const std::size_t n = vehicles.size();
    const double loss = cfg.msg_loss_prob;
    std::vector<char> received(n, 0), forwarded(n, 0), cancelled(n, 0);
    std::vector<int> armed_hop(n, -1);
    std::vector<std::size_t> heard_from(n, origin_idx);
    received[origin_idx] = 1;

    HelloRoundStats stats;
    EventQueue queue;

    auto record = [trace](double t, EventKind k, std::uint32_t vehicle, int hop, double aux) {
        if (trace) trace->push_back({t, k, vehicle, hop, aux});
    };

    // deliver a broadcast, returning first-time receivers in index order
    auto deliver = [&](std::size_t sender, std::vector<std::size_t>& fresh) {
        for (std::size_t nb : neighbors_of(vehicles, sender, cfg.tx_range_m)) {
            if (rng.bernoulli(loss)) continue;
            if (!received[nb]) {
                received[nb] = 1;
                heard_from[nb] = sender;
                fresh.push_back(nb);
            }
        }
    };

    auto arm_candidates = [&](const std::vector<std::size_t>& fresh, int hop, double now) {
        for (std::size_t u : fresh) {
            if (!vehicles[u].is_fl_participant || forwarded[u]) continue;
            armed_hop[u] = hop;
            cancelled[u] = 0;
            const double wait = rng.uniform(0.0, cfg.wait_max_s);
            queue.push({now + cfg.prop_delay_s + wait, EventKind::TimerExpire,
                        id_tie_key(vehicles[u].id), vehicles[u].id, hop, 0.0});
        }
    };

    queue.push({start_time, EventKind::HelloOriginate, id_tie_key(vehicles[origin_idx].id),
                vehicles[origin_idx].id, 0, 0.0});

    while (!queue.empty()) {
        const QueuedEvent ev = queue.pop();
        switch (ev.kind) {
            case EventKind::HelloOriginate: {
                record(ev.time, ev.kind, ev.vehicle, 0, 0.0);
                std::vector<std::size_t> fresh;
                deliver(origin_idx, fresh);
                arm_candidates(fresh, 1, ev.time);
                break;
            }
            case EventKind::TimerExpire: {
                const std::size_t v = ev.vehicle;
                if (cancelled[v] || forwarded[v] || armed_hop[v] != ev.hop) break;
                record(ev.time, ev.kind, ev.vehicle, ev.hop, 0.0);

                // forward: collect fresh receivers and their acknowledgments
                const std::size_t sender = heard_from[v];
                DatasetRow row;
                row.d_is = distance(vehicles[v].position, vehicles[sender].position);
                row.dir_is = direction_flag(vehicles[v], vehicles[sender].position);
                row.v_i = vehicles[v].speed();
                row.h = ev.hop;
                row.gamma_i = estimate_density(vehicles, v, cfg.tx_range_m);

                std::vector<std::size_t> fresh;
                deliver(v, fresh);
                int n_a = 0;
                for (std::size_t u : fresh) {
                    // draw first so the stream is identical with and without
                    // selfish receivers; suppression must only touch n_a
                    const bool ack_delivered = !rng.bernoulli(loss);
                    if (vehicles[u].is_selfish || !ack_delivered) continue;
                    ++n_a;
                    record(ev.time + 2.0 * cfg.prop_delay_s, EventKind::AckDeliver,
                           vehicles[u].id, ev.hop, 0.0);
                }
                row.n_a = n_a;
                vehicles[v].dataset.push_back(row);
                forwarded[v] = 1;
                record(ev.time, EventKind::HelloForward, vehicles[v].id, ev.hop,
                       static_cast<double>(n_a));
                ++stats.rows_recorded;
                ++stats.forwards;
                stats.hops_reached = std::max(stats.hops_reached, ev.hop);

                // suppress same-hop rivals (each may miss the announcement)
                for (std::size_t u = 0; u < n; ++u) {
                    if (u == v || armed_hop[u] != ev.hop || cancelled[u] || forwarded[u]) continue;
                    if (!rng.bernoulli(loss)) cancelled[u] = 1;
                }
                if (ev.hop < cfg.h_max) arm_candidates(fresh, ev.hop + 1, ev.time);
                break;
            }
            default:
                break;
        }
    }
    return stats;
}

void collect_datasets(const SimConfig& cfg, std::vector<VehicleState>& vehicles,
                      std::size_t rounds, Rng& rng, std::vector<Event>* trace) {
    std::vector<std::size_t> designated;
    for (std::size_t i = 0; i < vehicles.size(); ++i) {
        if (vehicles[i].is_designated) designated.push_back(i);
    }
    if (designated.empty()) {
        throw std::invalid_argument("collect_datasets: no designated vehicle");
    }
    if (rounds == 0) return;

    const double interval = cfg.sim_duration_s / static_cast<double>(rounds);
    for (std::size_t r = 0; r < rounds; ++r) {
        for (auto& v : vehicles) v = step_mobility(std::move(v), interval, cfg);
        const double t = static_cast<double>(r + 1) * interval;
        run_hello_round(cfg, vehicles, designated[r % designated.size()], t, rng, trace);
    }
}

std::string dataset_to_csv(const std::vector<DatasetRow>& rows) {
    std::ostringstream os;
    os << "d_is,dir_is,v_i,h,gamma_i,n_a\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%d,%.17g,%d\n", r.d_is, r.dir_is,
                      r.v_i, r.h, r.gamma_i, r.n_a);
        os << buf;
    }
    return os.str();
}

}  // namespace vfl
