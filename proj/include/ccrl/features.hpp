#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ccrl/event_queue.hpp"

namespace ccrl {

// One snapshot of the 20 per-ACK network statistics, in raw units
// (times in ms, sizes in bytes, throughput in MB/s).
struct ObservationRecord {
    double lrtt = 0;            // 1
    double rtt_min = 0;         // 2
    double srtt = 0;            // 3
    double rtt_standing = 0;    // 4
    double rtt_var = 0;         // 5
    double delay = 0;           // 6
    double cwnd_bytes = 0;      // 7
    double inflight_bytes = 0;  // 8
    double writable_bytes = 0;  // 9
    double sent_bytes = 0;      // 10
    double received_bytes = 0;  // 11
    double rtx_bytes = 0;       // 12
    double acked_bytes = 0;     // 13
    double lost_bytes = 0;      // 14
    double throughput = 0;      // 15
    double rtx_count = 0;       // 16
    double timeout_based_rtx_count = 0;  // 17
    double pto_count = 0;       // 18
    double total_pto_count = 0; // 19
    double persistent_congestion = 0;  // 20

    std::array<double, 20> as_array() const {
        return {lrtt, rtt_min, srtt, rtt_standing, rtt_var, delay,
                cwnd_bytes, inflight_bytes, writable_bytes, sent_bytes,
                received_bytes, rtx_bytes, acked_bytes, lost_bytes,
                throughput, rtx_count, timeout_based_rtx_count, pto_count,
                total_pto_count, persistent_congestion};
    }
};

constexpr int kObservationFeatures = 20;
constexpr int kAggregatesPerFeature = 5;   // sum, mean, std, min, max
constexpr int kAggregateStateLen = 100;

// Time features (1-6) scaled by 1e-3, byte features (7-14) by 1e-4.
// Throughput and counters are left as-is.
inline std::array<double, 20> normalize_observation(const ObservationRecord& rec) {
    auto f = rec.as_array();
    for (int i = 0; i < 6; ++i) f[i] *= 1e-3;
    for (int i = 6; i < 14; ++i) f[i] *= 1e-4;
    return f;
}

// Per-feature [sum, mean, std, min, max] over a window of normalized
// records, flattened in table order. Sums of features 1-9 are zeroed.
// An empty window yields the all-zero vector.
inline std::array<double, kAggregateStateLen> aggregate_window(
    const std::vector<std::array<double, 20>>& records) {
    std::array<double, kAggregateStateLen> out{};
    if (records.empty()) return out;
    const double n = static_cast<double>(records.size());
    for (int f = 0; f < kObservationFeatures; ++f) {
        double sum = 0, mn = std::numeric_limits<double>::infinity(), mx = -mn;
        for (const auto& r : records) {
            sum += r[f];
            mn = std::min(mn, r[f]);
            mx = std::max(mx, r[f]);
        }
        const double mean = sum / n;
        double var = 0;
        for (const auto& r : records) var += (r[f] - mean) * (r[f] - mean);
        var /= n;  // population std
        double* slot = &out[f * kAggregatesPerFeature];
        slot[0] = f < 9 ? 0.0 : sum;
        slot[1] = mean;
        slot[2] = std::sqrt(var);
        slot[3] = mn;
        slot[4] = mx;
    }
    return out;
}

struct ActionHistoryEntry {
    int action_index = 0;
    int cwnd_after = 0;  // MSS units, in [2, 2000]
};

// k history blocks, newest first; each block is one-hot(action) followed by
// cwnd_after scaled by 1e-3. Missing entries at episode start are zeros.
inline std::vector<double> encode_history(const std::deque<ActionHistoryEntry>& history,
                                          int k, int action_count) {
    std::vector<double> out(static_cast<std::size_t>(k) * (action_count + 1), 0.0);
    for (int i = 0; i < k && i < static_cast<int>(history.size()); ++i) {
        const auto& e = history[i];
        if (e.action_index < 0 || e.action_index >= action_count)
            throw std::out_of_range("encode_history: action index out of range");
        double* block = &out[static_cast<std::size_t>(i) * (action_count + 1)];
        block[e.action_index] = 1.0;
        block[action_count] = static_cast<double>(e.cwnd_after) * 1e-3;
    }
    return out;
}

// Full state: 100 aggregates followed by the k-step action history.
inline std::vector<double> build_state(const std::vector<ObservationRecord>& window,
                                       const std::deque<ActionHistoryEntry>& history,
                                       int k, int action_count) {
    std::vector<std::array<double, 20>> norm;
    norm.reserve(window.size());
    for (const auto& r : window) norm.push_back(normalize_observation(r));
    auto agg = aggregate_window(norm);
    std::vector<double> state(agg.begin(), agg.end());
    auto hist = encode_history(history, k, action_count);
    state.insert(state.end(), hist.begin(), hist.end());
    return state;
}

// Min RTT over the trailing srtt/2 window; falls back to the latest sample
// when the window is empty.
class StandingRttWindow {
public:
    void add(TimeUs now, double rtt_ms) {
        samples_.push_back({now, rtt_ms});
        // anything older than the largest plausible window is dead weight
        while (samples_.size() > 4096) samples_.pop_front();
    }

    bool empty() const { return samples_.empty(); }

    double standing(double srtt_ms, TimeUs now) const {
        if (samples_.empty())
            throw std::logic_error("rtt_standing requested before first sample");
        const TimeUs cutoff = now - static_cast<TimeUs>(srtt_ms * 1e3 / 2.0);
        double mn = std::numeric_limits<double>::infinity();
        for (auto it = samples_.rbegin(); it != samples_.rend(); ++it) {
            if (it->at_us <= cutoff) break;
            mn = std::min(mn, it->rtt_ms);
        }
        if (!std::isfinite(mn)) return samples_.back().rtt_ms;
        return mn;
    }

private:
    struct Sample {
        TimeUs at_us;
        double rtt_ms;
    };
    std::deque<Sample> samples_;
};

// Rolling throughput over the last M=10 ACKs: acked bytes divided by the
// ring's time span (floored at 100 ms), linearly decaying to zero after 2T
// of ACK silence. Result in MB/s.
class ThroughputEstimator {
public:
    static constexpr int kRingSize = 10;
    static constexpr double kMinWindowUs = 100e3;

    void on_ack(TimeUs now, double acked_bytes) {
        ring_.push_back({now, acked_bytes});
        if (static_cast<int>(ring_.size()) > kRingSize) ring_.pop_front();
    }

    double estimate(TimeUs now) const {
        if (ring_.empty()) return 0.0;
        double bytes = 0;
        for (const auto& e : ring_) bytes += e.acked_bytes;
        const double span_us =
            std::max(static_cast<double>(ring_.back().at_us - ring_.front().at_us), kMinWindowUs);
        double rate = bytes / (span_us * 1e-6) / 1e6;  // MB/s
        const double silent_us = static_cast<double>(now - ring_.back().at_us);
        if (silent_us > span_us)
            rate *= std::max(0.0, (2.0 * span_us - silent_us) / span_us);
        return rate;
    }

private:
    struct Entry {
        TimeUs at_us;
        double acked_bytes;
    };
    std::deque<Entry> ring_;
};

enum class RttMinPolicy { SinceEpisode, Windowed };

// Running minimum RTT, either since episode start or over a trailing window.
class RttMinTracker {
public:
    explicit RttMinTracker(RttMinPolicy policy = RttMinPolicy::SinceEpisode,
                           double window_s = 10.0)
        : policy_(policy), window_us_(static_cast<TimeUs>(window_s * 1e6)) {}

    void add(TimeUs now, double rtt_ms) {
        if (policy_ == RttMinPolicy::SinceEpisode) {
            running_min_ = std::min(running_min_, rtt_ms);
            has_sample_ = true;
            return;
        }
        // monotonic deque: drop samples that can never be the window min
        while (!window_.empty() && window_.back().rtt_ms >= rtt_ms) window_.pop_back();
        window_.push_back({now, rtt_ms});
        has_sample_ = true;
    }

    double current(TimeUs now) const {
        if (!has_sample_)
            throw std::logic_error("rtt_min requested before first sample");
        if (policy_ == RttMinPolicy::SinceEpisode) return running_min_;
        double latest = window_.back().rtt_ms;
        for (const auto& s : window_)
            if (s.at_us > now - window_us_) return s.rtt_ms;
        return latest;  // everything expired; latest sample is the best guess
    }

private:
    struct Sample {
        TimeUs at_us;
        double rtt_ms;
    };
    RttMinPolicy policy_;
    TimeUs window_us_;
    double running_min_ = std::numeric_limits<double>::infinity();
    bool has_sample_ = false;
    std::deque<Sample> window_;
};

}  // namespace ccrl
