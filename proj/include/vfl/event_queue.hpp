#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <queue>
#include <vector>

#include "vfl/sha256.hpp"
#include "vfl/sim.hpp"

namespace vfl {

// Pending event with a deterministic total order: (time, kind rank, tie key).
// The tie key is the vehicle id for protocol events and the pseudonym for
// dissemination timers, where simultaneous expiry resolves by pseudonym.
struct QueuedEvent {
    double time = 0.0;
    EventKind kind = EventKind::HelloOriginate;
    std::array<std::uint8_t, 32> tie_key{};
    std::uint32_t vehicle = 0;
    int hop = 0;
    double aux = 0.0;
};

inline std::array<std::uint8_t, 32> id_tie_key(std::uint32_t id) {
    std::array<std::uint8_t, 32> k{};
    k[0] = static_cast<std::uint8_t>(id >> 24);
    k[1] = static_cast<std::uint8_t>(id >> 16);
    k[2] = static_cast<std::uint8_t>(id >> 8);
    k[3] = static_cast<std::uint8_t>(id);
    return k;
}

struct QueuedEventAfter {
    bool operator()(const QueuedEvent& a, const QueuedEvent& b) const {
        if (a.time != b.time) return a.time > b.time;
        if (a.kind != b.kind) return static_cast<int>(a.kind) > static_cast<int>(b.kind);
        return a.tie_key > b.tie_key;
    }
};

class EventQueue {
public:
    void push(QueuedEvent ev) { q_.push(std::move(ev)); }

    bool empty() const { return q_.empty(); }

    QueuedEvent pop() {
        QueuedEvent ev = q_.top();
        q_.pop();
        return ev;
    }

private:
    std::priority_queue<QueuedEvent, std::vector<QueuedEvent>, QueuedEventAfter> q_;
};

}  // namespace vfl
