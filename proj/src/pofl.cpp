#include "vfl/pofl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vfl/event_queue.hpp"

namespace vfl {

const char* consensus_kind_name(ConsensusKind k) {
    return k == ConsensusKind::PoFL ? "pofl" : "pos";
}

double relay_timer(double score, double timer_unit_s) {
    if (!(score >= kScoreFloor)) {
        throw std::invalid_argument("relay_timer: score below clamp floor");
    }
    return timer_unit_s / score;
}

double delivery_ratio(std::size_t vehicles_reached, std::size_t num_vehicles) {
    if (num_vehicles == 0) return 0.0;
    return static_cast<double>(vehicles_reached) / static_cast<double>(num_vehicles);
}

namespace {

double candidate_score(const ConsensusContext& ctx, const std::vector<VehicleState>& vehicles,
                       std::size_t v, std::size_t sender, int hop, double tx_range) {
    if (ctx.kind == ConsensusKind::PoS) {
        const double rep = (*ctx.reputations)[v];
        return std::clamp(rep / 100.0, kScoreFloor, 1.0);
    }
    // PoFL: the candidate's own live features through the sealed global model
    DatasetRow row;
    row.d_is = distance(vehicles[v].position, vehicles[sender].position);
    const double dx = vehicles[sender].position.x - vehicles[v].position.x;
    const double dy = vehicles[sender].position.y - vehicles[v].position.y;
    row.dir_is =
        (vehicles[v].velocity.x * dx + vehicles[v].velocity.y * dy) >= 0.0 ? 1.0 : -1.0;
    row.v_i = vehicles[v].speed();
    row.h = hop;
    row.gamma_i = estimate_density(vehicles, v, tx_range);
    return predict_score(*ctx.global_model, ctx.scaler->features(row));
}

double election_charge(const ConsensusContext& ctx, std::size_t num_vehicles) {
    if (ctx.kind == ConsensusKind::PoS) {
        return ctx.pos_lookup_cost_s * static_cast<double>(num_vehicles);
    }
    return ctx.pofl_compute_charge_s;
}

}  // namespace

DisseminationResult disseminate(const SimConfig& cfg, const std::vector<VehicleState>& vehicles,
                                std::size_t org_idx, double start_time,
                                const ConsensusContext& ctx, Rng& rng,
                                std::vector<Event>* trace) {
    if (org_idx >= vehicles.size()) throw std::invalid_argument("disseminate: bad originator");
    if (ctx.kind == ConsensusKind::PoFL && (!ctx.global_model || !ctx.scaler)) {
        throw std::invalid_argument("disseminate: PoFL requires a sealed global model and scaler");
    }
    if (ctx.kind == ConsensusKind::PoS &&
        (!ctx.reputations || ctx.reputations->size() != vehicles.size())) {
        throw std::invalid_argument("disseminate: PoS requires one reputation per vehicle");
    }

    const std::size_t n = vehicles.size();
    const double loss = cfg.msg_loss_prob;
    const double charge = election_charge(ctx, n);

    IncidentMessage msg;
    msg.origin_time = start_time;
    msg.origin_position = vehicles[org_idx].position;
    msg.org_pseudonym = vehicles[org_idx].pseudonym;

    std::vector<char> received(n, 0), relayed(n, 0), cancelled(n, 0);
    std::vector<int> armed_hop(n, -1);
    std::vector<std::size_t> heard_from(n, org_idx);
    received[org_idx] = 1;
    std::size_t reached = 1;

    std::vector<double> hop_arm_time(static_cast<std::size_t>(cfg.h_max) + 1, -1.0);
    std::vector<char> hop_announced(static_cast<std::size_t>(cfg.h_max) + 1, 0);

    DisseminationResult result;
    Digest chain_tail = kZeroDigest;

    EventQueue queue;
    auto record = [trace](double t, EventKind k, std::uint32_t vehicle, int hop, double aux) {
        if (trace) trace->push_back({t, k, vehicle, hop, aux});
    };

    auto deliver = [&](std::size_t sender, std::vector<std::size_t>& fresh) {
        for (std::size_t nb : neighbors_of(vehicles, sender, cfg.tx_range_m)) {
            if (rng.bernoulli(loss)) continue;
            if (!received[nb]) {
                received[nb] = 1;
                heard_from[nb] = sender;
                ++reached;
                fresh.push_back(nb);
            }
        }
    };

    auto arm_candidates = [&](const std::vector<std::size_t>& fresh, int hop, double now) {
        const double recv_time = now + cfg.prop_delay_s;
        bool armed_any = false;
        for (std::size_t u : fresh) {
            if (relayed[u]) continue;
            const double score =
                candidate_score(ctx, vehicles, u, heard_from[u], hop, cfg.tx_range_m);
            armed_hop[u] = hop;
            cancelled[u] = 0;
            queue.push({recv_time + charge + relay_timer(score, ctx.timer_unit_s),
                        EventKind::TimerExpire, vehicles[u].pseudonym, vehicles[u].id, hop,
                        score});
            armed_any = true;
        }
        if (armed_any && hop_arm_time[hop] < 0.0) hop_arm_time[hop] = recv_time;
    };

    queue.push({start_time, EventKind::IncidentOriginate, id_tie_key(vehicles[org_idx].id),
                vehicles[org_idx].id, 0, 0.0});

    while (!queue.empty()) {
        const QueuedEvent ev = queue.pop();
        switch (ev.kind) {
            case EventKind::IncidentOriginate: {
                record(ev.time, ev.kind, ev.vehicle, 0, 0.0);
                std::vector<std::size_t> fresh;
                deliver(org_idx, fresh);
                if (cfg.h_max >= 1) arm_candidates(fresh, 1, ev.time);
                break;
            }
            case EventKind::TimerExpire: {
                const std::size_t v = ev.vehicle;
                if (cancelled[v] || relayed[v] || armed_hop[v] != ev.hop) break;
                record(ev.time, ev.kind, ev.vehicle, ev.hop, ev.aux);
                relayed[v] = 1;

                // first announcement at a hop extends the message chain
                if (!hop_announced[ev.hop]) {
                    hop_announced[ev.hop] = 1;
                    result.metrics.per_hop_delay.push_back(ev.time - hop_arm_time[ev.hop]);
                    result.metrics.relays.push_back(vehicles[v].pseudonym);
                    MessageBlock blk;
                    blk.prev_hash = chain_tail;
                    blk.incident_time = msg.origin_time;
                    blk.incident_x = msg.origin_position.x;
                    blk.incident_y = msg.origin_position.y;
                    blk.relay_pseudonym = vehicles[v].pseudonym;
                    blk.hop = static_cast<std::uint64_t>(ev.hop);
                    blk.block_hash = blk.compute_hash();
                    chain_tail = blk.block_hash;
                    result.blocks.push_back(blk);
                }
                record(ev.time, EventKind::BlockAnnounce, ev.vehicle, ev.hop, 0.0);

                std::vector<std::size_t> fresh;
                deliver(v, fresh);
                for (std::size_t u = 0; u < n; ++u) {
                    if (u == v || armed_hop[u] != ev.hop || cancelled[u] || relayed[u]) continue;
                    if (!rng.bernoulli(loss)) cancelled[u] = 1;
                }
                if (ev.hop < cfg.h_max) arm_candidates(fresh, ev.hop + 1, ev.time);
                break;
            }
            default:
                break;
        }
    }

    result.metrics.vehicles_reached = reached;
    result.metrics.delivery_ratio = delivery_ratio(reached, n);
    result.metrics.truncated =
        static_cast<int>(result.metrics.per_hop_delay.size()) < cfg.h_max;
    return result;
}

}  // namespace vfl
