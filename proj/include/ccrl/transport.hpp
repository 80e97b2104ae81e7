#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "ccrl/control.hpp"
#include "ccrl/event_queue.hpp"
#include "ccrl/features.hpp"

namespace ccrl {

struct TransportConfig {
    int mss_bytes = 1460;
    int reorder_threshold = 3;   // packets; fast-retransmit analogue
    double pc_mult = 3.0;        // persistent congestion: loss span > pc_mult * PTO
    double pto_granularity_ms = 1.0;
    double initial_pto_ms = 1000.0;  // before the first RTT sample
    RttMinPolicy rtt_min_policy = RttMinPolicy::SinceEpisode;
    double rtt_min_window_s = 10.0;
    bool instantaneous_throughput = false;  // cwnd_bytes / rtt_standing variant
};

struct Packet {
    std::uint64_t seq = 0;
    int bytes = 0;
    TimeUs sent_at_us = 0;
    bool is_rtx = false;
};

// Window-based bulk-transfer sender with QUIC-flavored loss recovery:
// reordering-threshold loss detection, probe timeout with exponential
// backoff, EWMA RTT estimators. Emits one ObservationRecord per ACK or
// loss notification.
class Sender {
public:
    explicit Sender(const TransportConfig& cfg)
        : cfg_(cfg),
          rtt_min_(cfg.rtt_min_policy, cfg.rtt_min_window_s) {}

    int cwnd_mss() const { return cwnd_mss_; }
    void set_cwnd_mss(int cwnd) { cwnd_mss_ = std::clamp(cwnd, kCwndFloorMss, kCwndCeilMss); }

    std::int64_t cwnd_bytes() const {
        return static_cast<std::int64_t>(cwnd_mss_) * cfg_.mss_bytes;
    }
    std::int64_t inflight_bytes() const { return inflight_bytes_; }
    bool has_inflight() const { return !inflight_.empty(); }
    bool paused() const { return paused_; }
    void set_paused(bool p) { paused_ = p; }

    // Emits packets while the window has room, retransmission backlog first.
    // Bulk transfer: fresh data never runs out.
    std::vector<Packet> fill_window(TimeUs now) {
        std::vector<Packet> out;
        if (paused_) return out;
        while (inflight_bytes_ + cfg_.mss_bytes <= cwnd_bytes()) {
            Packet pkt;
            pkt.seq = next_seq_++;
            pkt.bytes = cfg_.mss_bytes;
            pkt.sent_at_us = now;
            if (!rtx_backlog_.empty()) {
                pkt.is_rtx = true;
                rtx_backlog_.pop_front();
            }
            inflight_.emplace(pkt.seq, pkt);
            inflight_bytes_ += pkt.bytes;
            sent_bytes_ += pkt.bytes;
            cumulative_sent_bytes_ += pkt.bytes;
            out.push_back(pkt);
        }
        return out;
    }

    // ACK for a single packet. Unknown or duplicate seqs are ignored.
    std::optional<ObservationRecord> on_ack(std::uint64_t seq, TimeUs now) {
        auto it = inflight_.find(seq);
        if (it == inflight_.end()) {
            ++ignored_acks_;
            return std::nullopt;
        }
        const Packet pkt = it->second;
        inflight_.erase(it);
        inflight_bytes_ -= pkt.bytes;
        cumulative_acked_bytes_ += pkt.bytes;
        largest_acked_ = std::max(largest_acked_, pkt.seq);

        // Karn: no RTT sample from retransmitted packets.
        if (!pkt.is_rtx) {
            const double sample_ms = static_cast<double>(now - pkt.sent_at_us) * 1e-3;
            lrtt_ms_ = sample_ms;
            if (!has_rtt_) {
                srtt_ms_ = sample_ms;
                rttvar_ms_ = sample_ms / 2.0;
                has_rtt_ = true;
            } else {
                rttvar_ms_ = 0.75 * rttvar_ms_ + 0.25 * std::abs(srtt_ms_ - sample_ms);
                srtt_ms_ = 0.875 * srtt_ms_ + 0.125 * sample_ms;
            }
            rtt_min_.add(now, sample_ms);
            standing_.add(now, sample_ms);
        }
        throughput_.on_ack(now, pkt.bytes);
        acked_bytes_ = pkt.bytes;
        received_bytes_ += pkt.bytes;
        pto_backoff_ = 0;
        pto_count_ = 0;

        ObservationRecord rec = snapshot(now);
        reset_window_counters();
        return rec;
    }

    // Reordering-threshold loss detection; call after each ACK.
    std::optional<ObservationRecord> detect_losses(TimeUs now) {
        std::vector<Packet> newly_lost;
        for (auto it = inflight_.begin(); it != inflight_.end();) {
            if (largest_acked_ >= it->second.seq + cfg_.reorder_threshold) {
                newly_lost.push_back(it->second);
                it = inflight_.erase(it);
            } else {
                ++it;
            }
        }
        if (newly_lost.empty()) return std::nullopt;
        double lost = 0;
        TimeUs oldest = newly_lost.front().sent_at_us, newest = newly_lost.front().sent_at_us;
        for (const auto& pkt : newly_lost) {
            lost += pkt.bytes;
            inflight_bytes_ -= pkt.bytes;
            cumulative_lost_bytes_ += pkt.bytes;
            rtx_backlog_.push_back(pkt.bytes);
            rtx_count_ += 1;
            rtx_bytes_ += pkt.bytes;
            oldest = std::min(oldest, pkt.sent_at_us);
            newest = std::max(newest, pkt.sent_at_us);
        }
        const double span_ms = static_cast<double>(newest - oldest) * 1e-3;
        if (span_ms > cfg_.pc_mult * pto_interval_ms())
            persistent_congestion_ = true;
        lost_bytes_ = lost;
        ObservationRecord rec = snapshot(now);
        reset_window_counters();
        persistent_congestion_ = false;
        return rec;
    }

    // Probe timeout: oldest unacked packet is presumed lost and re-queued,
    // backoff doubles until the next ACK.
    ObservationRecord on_pto_expiry(TimeUs now) {
        if (!inflight_.empty()) {
            auto it = inflight_.begin();
            const Packet pkt = it->second;
            inflight_.erase(it);
            inflight_bytes_ -= pkt.bytes;
            cumulative_lost_bytes_ += pkt.bytes;
            rtx_backlog_.push_front(pkt.bytes);
            rtx_count_ += 1;
            rtx_bytes_ += pkt.bytes;
            timeout_based_rtx_count_ += 1;
        }
        pto_count_ += 1;
        total_pto_count_ += 1;
        pto_backoff_ += 1;
        ObservationRecord rec = snapshot(now);
        reset_window_counters();
        return rec;
    }

    double pto_interval_ms() const {
        double base = has_rtt_
                          ? srtt_ms_ + std::max(4.0 * rttvar_ms_, cfg_.pto_granularity_ms)
                          : cfg_.initial_pto_ms;
        return base * static_cast<double>(1 << std::min(pto_backoff_, 16));
    }

    const TransportConfig& config() const { return cfg_; }
    bool has_rtt() const { return has_rtt_; }
    double srtt_ms() const { return srtt_ms_; }
    double rttvar_ms() const { return rttvar_ms_; }

    std::uint64_t ignored_acks() const { return ignored_acks_; }
    std::uint64_t negative_delay_events() const { return negative_delay_events_; }
    std::int64_t cumulative_sent_bytes() const { return cumulative_sent_bytes_; }
    std::int64_t cumulative_acked_bytes() const { return cumulative_acked_bytes_; }
    std::int64_t cumulative_lost_bytes() const { return cumulative_lost_bytes_; }

private:
    ObservationRecord snapshot(TimeUs now) {
        ObservationRecord rec;
        if (has_rtt_) {
            rec.lrtt = lrtt_ms_;
            rec.srtt = srtt_ms_;
            rec.rtt_var = rttvar_ms_;
            rec.rtt_min = rtt_min_.current(now);
            rec.rtt_standing = standing_.standing(srtt_ms_, now);
            double delay = rec.rtt_standing - rec.rtt_min;
            if (delay < 0) {
                ++negative_delay_events_;
                delay = 0;
            }
            rec.delay = delay;
        }
        rec.cwnd_bytes = static_cast<double>(cwnd_bytes());
        rec.inflight_bytes = static_cast<double>(inflight_bytes_);
        rec.writable_bytes = std::max(0.0, rec.cwnd_bytes - rec.inflight_bytes);
        rec.sent_bytes = sent_bytes_;
        rec.received_bytes = received_bytes_;
        rec.rtx_bytes = rtx_bytes_;
        rec.acked_bytes = acked_bytes_;
        rec.lost_bytes = lost_bytes_;
        if (cfg_.instantaneous_throughput) {
            rec.throughput = has_rtt_ && rec.rtt_standing > 0
                                 ? rec.cwnd_bytes / (rec.rtt_standing * 1e-3) / 1e6
                                 : 0.0;
        } else {
            rec.throughput = throughput_.estimate(now);
        }
        rec.rtx_count = rtx_count_;
        rec.timeout_based_rtx_count = timeout_based_rtx_count_;
        rec.pto_count = pto_count_;
        rec.total_pto_count = total_pto_count_;
        rec.persistent_congestion = persistent_congestion_ ? 1.0 : 0.0;
        return rec;
    }

    void reset_window_counters() {
        sent_bytes_ = 0;
        received_bytes_ = 0;
        rtx_bytes_ = 0;
        acked_bytes_ = 0;
        lost_bytes_ = 0;
        rtx_count_ = 0;
        timeout_based_rtx_count_ = 0;
    }

    TransportConfig cfg_;
    int cwnd_mss_ = kInitialCwndMss;
    bool paused_ = false;

    std::uint64_t next_seq_ = 0;
    std::uint64_t largest_acked_ = 0;
    std::map<std::uint64_t, Packet> inflight_;
    std::int64_t inflight_bytes_ = 0;
    std::deque<int> rtx_backlog_;  // byte counts awaiting retransmission

    bool has_rtt_ = false;
    double lrtt_ms_ = 0, srtt_ms_ = 0, rttvar_ms_ = 0;
    RttMinTracker rtt_min_;
    StandingRttWindow standing_;
    ThroughputEstimator throughput_;

    // since-last-record counters
    double sent_bytes_ = 0, received_bytes_ = 0, rtx_bytes_ = 0;
    double acked_bytes_ = 0, lost_bytes_ = 0;
    double rtx_count_ = 0, timeout_based_rtx_count_ = 0;
    // pto_count resets on ACK; total_pto_count is the episode total
    double pto_count_ = 0, total_pto_count_ = 0;
    int pto_backoff_ = 0;
    bool persistent_congestion_ = false;

    std::uint64_t ignored_acks_ = 0;
    std::uint64_t negative_delay_events_ = 0;
    std::int64_t cumulative_sent_bytes_ = 0;
    std::int64_t cumulative_acked_bytes_ = 0;
    std::int64_t cumulative_lost_bytes_ = 0;
};

}  // namespace ccrl
