#pragma once

#include <cstdint>
#include <optional>
#include <queue>
#include <stdexcept>
#include <vector>

namespace ccrl {

using TimeUs = std::int64_t;

// Virtual clock. All timestamps in the simulation derive from it; there are
// no wall-clock reads anywhere on the simulation path.
struct SimClock {
    TimeUs now_us = 0;

    void advance_to(TimeUs t) {
        if (t < now_us)
            throw std::logic_error("SimClock: time went backwards");
        now_us = t;
    }
};

enum class EventKind {
    PacketArrival,
    AckArrival,
    WindowTick,
    ActionApply,
    PtoExpiry,
    EpisodeEnd,
};

inline const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::PacketArrival: return "PacketArrival";
        case EventKind::AckArrival: return "AckArrival";
        case EventKind::WindowTick: return "WindowTick";
        case EventKind::ActionApply: return "ActionApply";
        case EventKind::PtoExpiry: return "PtoExpiry";
        case EventKind::EpisodeEnd: return "EpisodeEnd";
    }
    return "?";
}

struct Event {
    TimeUs fire_at_us = 0;
    EventKind kind = EventKind::EpisodeEnd;
    // Generic payload slots; meaning depends on kind (packet seq, bytes, ...).
    std::int64_t a = 0;
    std::int64_t b = 0;
};

// Min-queue ordered by (fire_at_us, insertion sequence). Equal-time events
// pop in insertion order, so replay is bit-identical.
class EventQueue {
public:
    void schedule(const Event& ev, TimeUs now) {
        if (ev.fire_at_us < now)
            throw std::logic_error("EventQueue: scheduling in the past");
        heap_.push(Entry{ev, next_seq_++});
    }

    std::optional<Event> pop() {
        if (heap_.empty()) return std::nullopt;
        Event ev = heap_.top().ev;
        heap_.pop();
        return ev;
    }

    bool empty() const { return heap_.empty(); }
    std::size_t size() const { return heap_.size(); }

private:
    struct Entry {
        Event ev;
        std::uint64_t seq;
    };
    struct Later {
        bool operator()(const Entry& x, const Entry& y) const {
            if (x.ev.fire_at_us != y.ev.fire_at_us)
                return x.ev.fire_at_us > y.ev.fire_at_us;
            return x.seq > y.seq;
        }
    };
    std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
    std::uint64_t next_seq_ = 0;
};

}  // namespace ccrl
