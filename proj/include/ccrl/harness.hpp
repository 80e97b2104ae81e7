#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ccrl/control.hpp"
#include "ccrl/event_queue.hpp"
#include "ccrl/features.hpp"
#include "ccrl/link.hpp"
#include "ccrl/model.hpp"
#include "ccrl/rng.hpp"
#include "ccrl/scenario.hpp"
#include "ccrl/transport.hpp"

namespace ccrl {

struct AgentMode {
    enum class Kind { NonBlocking, Blocking } kind = Kind::NonBlocking;
    double delta_ms = 30.0;          // policy lookup time
    double step_interval_ms = 100.0;

    void validate() const {
        if (delta_ms < 0 || delta_ms >= step_interval_ms)
            throw std::invalid_argument("AgentMode: require 0 <= delta_ms < step_interval_ms");
    }
};

struct StepDecision {
    bool has_action = false;
    int action_index = 0;
    std::vector<double> logits;
};

// A congestion-control policy. Step policies (random, learned) answer
// on_step once per window tick; classical controllers (fixed, AIMD) adjust
// cwnd per ACK / loss notification instead.
class PolicyDriver {
public:
    virtual ~PolicyDriver() = default;
    virtual void episode_start(std::uint64_t /*seed*/) {}
    virtual StepDecision on_step(const std::vector<double>& /*state*/, double /*reward*/) {
        return {};
    }
    virtual int on_ack(const ObservationRecord& /*rec*/, int cwnd_mss) { return cwnd_mss; }
    virtual int on_loss(const ObservationRecord& /*rec*/, int cwnd_mss) { return cwnd_mss; }
    virtual HiddenState initial_hidden() const { return {}; }
};

class FixedCwndPolicy : public PolicyDriver {
public:
    explicit FixedCwndPolicy(int cwnd_mss) : cwnd_(std::clamp(cwnd_mss, kCwndFloorMss, kCwndCeilMss)) {}
    int on_ack(const ObservationRecord&, int) override { return cwnd_; }
    int on_loss(const ObservationRecord&, int) override { return cwnd_; }

private:
    int cwnd_;
};

// Simple AIMD stand-in for a classical controller: slow start to ssthresh,
// then +1 MSS per RTT, halve on loss.
class AimdPolicy : public PolicyDriver {
public:
    void episode_start(std::uint64_t) override {
        ssthresh_ = kCwndCeilMss;
        increase_credit_ = 0;
    }

    int on_ack(const ObservationRecord&, int cwnd_mss) override {
        if (cwnd_mss < ssthresh_) return std::min(cwnd_mss + 1, kCwndCeilMss);
        increase_credit_ += 1.0 / std::max(1, cwnd_mss);
        if (increase_credit_ >= 1.0) {
            increase_credit_ -= 1.0;
            return std::min(cwnd_mss + 1, kCwndCeilMss);
        }
        return cwnd_mss;
    }

    int on_loss(const ObservationRecord&, int cwnd_mss) override {
        ssthresh_ = std::max(kCwndFloorMss, cwnd_mss / 2);
        return ssthresh_;
    }

private:
    int ssthresh_ = kCwndCeilMss;
    double increase_credit_ = 0;
};

// rl-random: uniform action over the configured action space each step.
class RandomPolicy : public PolicyDriver {
public:
    explicit RandomPolicy(int action_count) : action_count_(action_count), rng_(0) {}

    void episode_start(std::uint64_t seed) override { rng_ = Rng(seed); }

    StepDecision on_step(const std::vector<double>&, double) override {
        StepDecision d;
        d.has_action = true;
        d.action_index = static_cast<int>(rng_.below(action_count_));
        d.logits.assign(action_count_, 0.0);  // uniform behavior distribution
        return d;
    }

private:
    int action_count_;
    Rng rng_;
};

// Policy backed by the neural model; samples during training, argmax in
// greedy evaluation mode.
class NeuralPolicy : public PolicyDriver {
public:
    NeuralPolicy(std::shared_ptr<const ModelParams> params, bool greedy)
        : params_(std::move(params)), greedy_(greedy), rng_(0), hidden_(HiddenState::zero(params_->cfg)) {}

    void episode_start(std::uint64_t seed) override {
        rng_ = Rng(seed);
        hidden_ = HiddenState::zero(params_->cfg);
    }

    StepDecision on_step(const std::vector<double>& state, double reward) override {
        Vec x = Eigen::Map<const Vec>(state.data(), static_cast<Eigen::Index>(state.size()));
        auto out = Model::forward(*params_, x, reward, hidden_);
        hidden_ = out.hidden;
        const SampledAction a = greedy_ ? greedy_action(out.logits) : sample_action(out.logits, rng_);
        StepDecision d;
        d.has_action = true;
        d.action_index = a.index;
        d.logits.assign(out.logits.data(), out.logits.data() + out.logits.size());
        return d;
    }

    HiddenState initial_hidden() const override { return HiddenState::zero(params_->cfg); }

private:
    std::shared_ptr<const ModelParams> params_;
    bool greedy_;
    Rng rng_;
    HiddenState hidden_;
};

struct StepRecord {
    std::vector<double> state;
    int action_index = -1;  // -1 for ack-driven policies
    std::vector<double> behavior_logits;
    double reward = 0;
    int cwnd_after = 0;
    TimeUs window_start_us = 0;
    TimeUs action_applied_us = 0;
};

struct EpisodeTrajectory {
    std::vector<StepRecord> steps;
    std::vector<double> initial_h, initial_c;
    std::string scenario_id;
    std::int64_t total_bytes_delivered = 0;
    double episodic_return = 0;
};

// Compact trace entry, used for determinism checks and the optional CSV dump.
struct TraceEntry {
    TimeUs t = 0;
    char type = '?';  // s=send, d=drop, r=receive, a=ack, k=tick, y=apply, p=pto
    std::int64_t seq = 0;
    std::int64_t bytes = 0;
    std::int64_t cwnd_mss = 0;
    std::int64_t inflight_bytes = 0;
};

struct EpisodeStats {
    struct Row {
        double time_ms;
        std::int64_t cum_bytes;
        int cwnd_mss;
        double reward;
    };
    std::vector<Row> rows;
    double mean_throughput_mbps = 0;
    double p95_delay_ms = 0;
    std::vector<TraceEntry> trace;
    std::int64_t link_drops = 0;
    std::uint64_t negative_delay_events = 0;
    std::int64_t cumulative_sent_bytes = 0;
    std::int64_t cumulative_acked_bytes = 0;
    std::int64_t cumulative_lost_bytes = 0;
    std::int64_t final_inflight_bytes = 0;
};

struct EpisodeConfig {
    int k = 20;
    ActionSpace actions = parse_action_space(kDefaultActionConfig);
    AgentMode mode;
    RewardParams reward;
    TransportConfig transport;
    std::uint64_t seed = 1;
    bool keep_trace = false;
};

struct EpisodeResult {
    EpisodeTrajectory trajectory;
    EpisodeStats stats;
};

inline std::string serialize_trace(const std::vector<TraceEntry>& trace) {
    std::ostringstream out;
    for (const auto& e : trace)
        out << e.t << ' ' << e.type << ' ' << e.seq << ' ' << e.bytes << ' ' << e.cwnd_mss << ' '
            << e.inflight_bytes << '\n';
    return out.str();
}

// One 30-second episode in virtual time. WindowTick events fire every
// step_interval; the action computed from the window ending at t is applied
// at t + delta. In Blocking mode all sends are suppressed during [t, t+delta].
inline EpisodeResult run_episode(const ScenarioConfig& scenario, PolicyDriver& policy,
                                 const EpisodeConfig& cfg) {
    scenario.validate();
    cfg.mode.validate();
    const int action_count = cfg.actions.size();

    SimClock clock;
    EventQueue queue;
    Link link(scenario);
    Sender sender(cfg.transport);
    Rng env_rng(scenario.seed * 0x9e3779b97f4a7c15ull ^ cfg.seed);
    policy.episode_start(cfg.seed * 0x2545f4914f6cdd1dull + 1);

    const TimeUs owd_us = static_cast<TimeUs>(scenario.one_way_delay_ms * 1e3);
    const TimeUs interval_us = static_cast<TimeUs>(cfg.mode.step_interval_ms * 1e3);
    const TimeUs delta_us = static_cast<TimeUs>(cfg.mode.delta_ms * 1e3);
    const TimeUs end_us = static_cast<TimeUs>(scenario.duration_s * 1e6);
    const bool blocking = cfg.mode.kind == AgentMode::Kind::Blocking && delta_us > 0;
    const int total_steps = static_cast<int>(scenario.duration_s * 1000.0 / cfg.mode.step_interval_ms);

    EpisodeResult result;
    auto& traj = result.trajectory;
    auto& stats = result.stats;
    traj.scenario_id = scenario.name;
    {
        HiddenState h0 = policy.initial_hidden();
        traj.initial_h.assign(h0.h.data(), h0.h.data() + h0.h.size());
        traj.initial_c.assign(h0.c.data(), h0.c.data() + h0.c.size());
    }

    std::vector<ObservationRecord> window_records;
    std::vector<double> window_throughputs, window_delays;
    std::vector<double> episode_delays;
    std::deque<ActionHistoryEntry> history;
    double last_reward = 0;
    std::int64_t delivered = 0;
    std::int64_t pto_generation = 0;
    std::optional<int> pending_action;  // action awaiting its ActionApply
    int pending_step = -1;

    auto trace = [&](char type, std::int64_t seq, std::int64_t bytes) {
        if (!cfg.keep_trace) return;
        stats.trace.push_back({clock.now_us, type, seq, bytes, sender.cwnd_mss(), sender.inflight_bytes()});
    };

    auto arm_pto = [&]() {
        if (!sender.has_inflight()) return;
        ++pto_generation;
        Event ev;
        ev.kind = EventKind::PtoExpiry;
        ev.fire_at_us = clock.now_us + static_cast<TimeUs>(sender.pto_interval_ms() * 1e3);
        ev.a = pto_generation;
        queue.schedule(ev, clock.now_us);
    };

    auto send_packets = [&]() {
        auto pkts = sender.fill_window(clock.now_us);
        for (const auto& pkt : pkts) {
            auto res = link.enqueue(pkt.bytes, clock.now_us, env_rng);
            if (std::holds_alternative<Enqueued>(res)) {
                Event ev;
                ev.kind = EventKind::PacketArrival;
                ev.fire_at_us = std::get<Enqueued>(res).depart_at_us + owd_us;
                ev.a = static_cast<std::int64_t>(pkt.seq);
                ev.b = pkt.bytes;
                queue.schedule(ev, clock.now_us);
                trace('s', static_cast<std::int64_t>(pkt.seq), pkt.bytes);
            } else {
                ++stats.link_drops;
                trace('d', static_cast<std::int64_t>(pkt.seq), pkt.bytes);
            }
        }
        if (!pkts.empty()) arm_pto();
    };

    auto handle_record = [&](const ObservationRecord& rec, bool is_loss) {
        window_records.push_back(rec);
        window_throughputs.push_back(rec.throughput);
        window_delays.push_back(rec.delay);
        episode_delays.push_back(rec.delay);
        const int cur = sender.cwnd_mss();
        const int updated = is_loss ? policy.on_loss(rec, cur) : policy.on_ack(rec, cur);
        if (updated != cur) sender.set_cwnd_mss(updated);
    };

    // episode end is offset by 1us so the final WindowTick fires first
    {
        Event ev;
        ev.kind = EventKind::EpisodeEnd;
        ev.fire_at_us = end_us + 1;
        queue.schedule(ev, 0);
        Event tick;
        tick.kind = EventKind::WindowTick;
        tick.fire_at_us = interval_us;
        tick.a = 0;  // step index
        queue.schedule(tick, 0);
    }
    send_packets();

    bool running = true;
    while (running) {
        auto ev_opt = queue.pop();
        if (!ev_opt) break;
        const Event ev = *ev_opt;
        clock.advance_to(ev.fire_at_us);
        switch (ev.kind) {
            case EventKind::PacketArrival: {
                delivered += ev.b;
                trace('r', ev.a, ev.b);
                Event ack;
                ack.kind = EventKind::AckArrival;
                ack.fire_at_us = clock.now_us + owd_us;
                ack.a = ev.a;
                ack.b = ev.b;
                queue.schedule(ack, clock.now_us);
                break;
            }
            case EventKind::AckArrival: {
                auto rec = sender.on_ack(static_cast<std::uint64_t>(ev.a), clock.now_us);
                if (rec) {
                    trace('a', ev.a, ev.b);
                    handle_record(*rec, false);
                    auto loss_rec = sender.detect_losses(clock.now_us);
                    if (loss_rec) handle_record(*loss_rec, true);
                    arm_pto();
                    send_packets();
                }
                break;
            }
            case EventKind::WindowTick: {
                const int step = static_cast<int>(ev.a);
                if (step >= total_steps) break;
                const double reward = compute_reward(window_throughputs, window_delays, cfg.reward);
                StepRecord sr;
                sr.state = build_state(window_records, history, cfg.k, action_count);
                sr.reward = reward;
                sr.window_start_us = clock.now_us - interval_us;
                const StepDecision decision = policy.on_step(sr.state, reward);
                if (decision.has_action) {
                    sr.action_index = decision.action_index;
                    sr.behavior_logits = decision.logits;
                    pending_action = decision.action_index;
                } else {
                    pending_action.reset();
                }
                pending_step = step;
                traj.steps.push_back(std::move(sr));
                trace('k', step, 0);
                window_records.clear();
                window_throughputs.clear();
                window_delays.clear();
                last_reward = reward;

                if (blocking) sender.set_paused(true);
                Event apply;
                apply.kind = EventKind::ActionApply;
                apply.fire_at_us = clock.now_us + delta_us;
                apply.a = step;
                queue.schedule(apply, clock.now_us);
                if (step + 1 < total_steps) {
                    Event next;
                    next.kind = EventKind::WindowTick;
                    next.fire_at_us = clock.now_us + interval_us;
                    next.a = step + 1;
                    queue.schedule(next, clock.now_us);
                }
                break;
            }
            case EventKind::ActionApply: {
                const int step = static_cast<int>(ev.a);
                if (blocking) sender.set_paused(false);
                if (pending_action && step == pending_step) {
                    const int idx = *pending_action;
                    const int new_cwnd = apply_action(sender.cwnd_mss(), cfg.actions.ops[idx]);
                    sender.set_cwnd_mss(new_cwnd);
                    history.push_front({idx, new_cwnd});
                    while (static_cast<int>(history.size()) > std::max(cfg.k, 1)) history.pop_back();
                    pending_action.reset();
                }
                if (step < static_cast<int>(traj.steps.size())) {
                    traj.steps[step].action_applied_us = clock.now_us;
                    traj.steps[step].cwnd_after = sender.cwnd_mss();
                }
                trace('y', step, sender.cwnd_mss());
                send_packets();
                break;
            }
            case EventKind::PtoExpiry: {
                if (ev.a != pto_generation || !sender.has_inflight()) break;
                auto rec = sender.on_pto_expiry(clock.now_us);
                trace('p', 0, 0);
                handle_record(rec, false);
                arm_pto();
                send_packets();
                break;
            }
            case EventKind::EpisodeEnd:
                running = false;
                break;
        }
    }

    // per-step stats rows (time_ms, cum_bytes at window close, cwnd, reward)
    // cum_bytes per row is reconstructed from the trace when kept; otherwise
    // only the totals are reported.
    double ret = 0;
    for (const auto& s : traj.steps) ret += s.reward;
    traj.episodic_return = ret;
    traj.total_bytes_delivered = delivered;

    stats.rows.reserve(traj.steps.size());
    {
        std::size_t ti = 0;
        std::int64_t cum = 0;
        for (std::size_t i = 0; i < traj.steps.size(); ++i) {
            const TimeUs t_close = traj.steps[i].window_start_us + interval_us;
            if (cfg.keep_trace) {
                while (ti < stats.trace.size() && stats.trace[ti].t <= t_close) {
                    if (stats.trace[ti].type == 'r') cum += stats.trace[ti].bytes;
                    ++ti;
                }
            }
            stats.rows.push_back({static_cast<double>(t_close) * 1e-3,
                                  cfg.keep_trace ? cum : delivered,
                                  traj.steps[i].cwnd_after > 0 ? traj.steps[i].cwnd_after
                                                               : sender.cwnd_mss(),
                                  traj.steps[i].reward});
        }
    }
    stats.mean_throughput_mbps =
        static_cast<double>(delivered) * 8.0 / scenario.duration_s / 1e6;
    if (!episode_delays.empty()) {
        std::vector<double> d = episode_delays;
        std::sort(d.begin(), d.end());
        const std::size_t idx = static_cast<std::size_t>(
            std::min<double>(static_cast<double>(d.size()) - 1, std::ceil(0.95 * d.size()) - 1));
        stats.p95_delay_ms = d[idx];
    }
    stats.negative_delay_events = sender.negative_delay_events();
    stats.cumulative_sent_bytes = sender.cumulative_sent_bytes();
    stats.cumulative_acked_bytes = sender.cumulative_acked_bytes();
    stats.cumulative_lost_bytes = sender.cumulative_lost_bytes();
    stats.final_inflight_bytes = sender.inflight_bytes();
    return result;
}

struct EvalRow {
    std::string scenario;
    int run = -1;  // -1 marks the per-scenario mean row
    double throughput_mbps = 0;
    double p95_delay_ms = 0;
    double episodic_return = 0;
};

// Deterministic evaluation table: per-run rows plus a mean row per scenario.
inline std::vector<EvalRow> evaluate(const std::vector<ScenarioConfig>& scenarios,
                                     PolicyDriver& policy, const EpisodeConfig& base_cfg,
                                     int episodes_per_scenario) {
    if (scenarios.empty()) throw std::invalid_argument("evaluate: need at least one scenario");
    std::vector<EvalRow> rows;
    for (const auto& scenario : scenarios) {
        EvalRow mean{scenario.name, -1, 0, 0, 0};
        for (int run = 0; run < episodes_per_scenario; ++run) {
            EpisodeConfig cfg = base_cfg;
            cfg.seed = base_cfg.seed + static_cast<std::uint64_t>(run) * 7919;
            auto res = run_episode(scenario, policy, cfg);
            EvalRow row{scenario.name, run, res.stats.mean_throughput_mbps, res.stats.p95_delay_ms,
                        res.trajectory.episodic_return};
            mean.throughput_mbps += row.throughput_mbps;
            mean.p95_delay_ms += row.p95_delay_ms;
            mean.episodic_return += row.episodic_return;
            rows.push_back(row);
        }
        mean.throughput_mbps /= episodes_per_scenario;
        mean.p95_delay_ms /= episodes_per_scenario;
        mean.episodic_return /= episodes_per_scenario;
        rows.push_back(mean);
    }
    return rows;
}

}  // namespace ccrl
