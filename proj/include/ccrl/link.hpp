#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <variant>

#include "ccrl/event_queue.hpp"
#include "ccrl/rng.hpp"
#include "ccrl/scenario.hpp"

namespace ccrl {

enum class DropReason { BufferOverflow, RandomLoss, Policed };

struct Enqueued {
    TimeUs depart_at_us;  // when the last bit leaves the bottleneck
};

using EnqueueResult = std::variant<Enqueued, DropReason>;

// Single bottleneck link: drop-tail FIFO in bytes, fixed serialization rate,
// i.i.d. random loss, optional token-bucket policer. Queue occupancy is
// drained lazily from the recorded departure times.
class Link {
public:
    explicit Link(const ScenarioConfig& cfg) : cfg_(cfg) {
        if (cfg_.policer) policer_tokens_ = static_cast<double>(cfg_.policer->burst_bytes);
    }

    EnqueueResult enqueue(std::int64_t pkt_bytes, TimeUs now, Rng& rng) {
        drain(now);
        if (queued_bytes_ + pkt_bytes > cfg_.buffer_bytes)
            return DropReason::BufferOverflow;
        if (cfg_.loss_rate > 0 && rng.uniform() < cfg_.loss_rate)
            return DropReason::RandomLoss;
        if (cfg_.policer) {
            refill_policer(now);
            if (policer_tokens_ < static_cast<double>(pkt_bytes))
                return DropReason::Policed;
            policer_tokens_ -= static_cast<double>(pkt_bytes);
        }
        // busy_until is kept in double microseconds so per-packet rounding
        // does not drift the effective rate over long runs.
        const double start = std::max(static_cast<double>(now), busy_until_f_);
        busy_until_f_ = start + static_cast<double>(pkt_bytes) * 8.0 * 1e6 / cfg_.bandwidth_bps;
        const TimeUs depart = static_cast<TimeUs>(std::llround(busy_until_f_));
        queued_bytes_ += pkt_bytes;
        departures_.push_back({depart, pkt_bytes});
        return Enqueued{depart};
    }

    void refill_policer(TimeUs now) {
        if (!cfg_.policer) return;
        const double elapsed_s = static_cast<double>(now - last_refill_us_) * 1e-6;
        policer_tokens_ = std::min(static_cast<double>(cfg_.policer->burst_bytes),
                                   policer_tokens_ + cfg_.policer->rate_bps / 8.0 * elapsed_s);
        last_refill_us_ = now;
    }

    std::int64_t queued_bytes(TimeUs now) {
        drain(now);
        return queued_bytes_;
    }

    double policer_tokens() const { return policer_tokens_; }

private:
    void drain(TimeUs now) {
        while (!departures_.empty() && departures_.front().depart_at_us <= now) {
            queued_bytes_ -= departures_.front().bytes;
            departures_.pop_front();
        }
    }

    struct Departure {
        TimeUs depart_at_us;
        std::int64_t bytes;
    };

    const ScenarioConfig cfg_;
    std::int64_t queued_bytes_ = 0;
    double busy_until_f_ = 0.0;
    double policer_tokens_ = 0;
    TimeUs last_refill_us_ = 0;
    std::deque<Departure> departures_;
};

}  // namespace ccrl
