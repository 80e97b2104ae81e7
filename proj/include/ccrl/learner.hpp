#pragma once

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ccrl/harness.hpp"
#include "ccrl/model.hpp"
#include "ccrl/vtrace.hpp"

namespace ccrl {

struct TrainConfig {
    int num_actors = 4;
    std::int64_t total_steps = 100000;
    double gamma = 0.99;
    double rho_bar = 1.0;
    double c_bar = 1.0;
    double entropy_coef = 0.01;
    double value_coef = 0.5;
    double learning_rate = 1e-5;
    int k = 20;
    double beta = 0.2;
    std::string actions = kDefaultActionConfig;
    std::vector<ScenarioConfig> scenarios;
    std::uint64_t seed = 1;
    AgentMode mode;
    TransportConfig transport;
    ModelConfig model;  // state_len/action_count filled in by train()
    int max_batch = 8;
    int checkpoint_every = 50;  // learner updates

    void validate() const {
        if (num_actors < 1) throw std::invalid_argument("num_actors must be >= 1");
        if (gamma <= 0 || gamma > 1) throw std::invalid_argument("gamma must be in (0,1]");
        if (!(rho_bar >= c_bar && c_bar > 0))
            throw std::invalid_argument("require rho_bar >= c_bar > 0");
        if (scenarios.empty()) throw std::invalid_argument("need at least one scenario");
    }
};

struct ParamSnapshot {
    std::uint64_t version = 0;
    std::shared_ptr<const ModelParams> params;
};

struct TrainMetrics {
    double mean_return = 0;
    double policy_loss = 0;
    double value_loss = 0;
    double entropy = 0;
    double mean_ratio = 0;
    std::uint64_t snapshot_version = 0;
};

struct TaggedTrajectory {
    EpisodeTrajectory trajectory;
    std::uint64_t snapshot_version = 0;
    int actor_id = 0;
    int episode_index = 0;
};

namespace detail {

// Re-runs the model over a stored trajectory and accumulates the V-trace
// actor-critic loss gradients.
struct TrajectoryGrads {
    std::vector<StepCache> caches;
    std::vector<Vec> dlogits;
    std::vector<double> dvalue;
    double policy_loss = 0, value_loss = 0, entropy = 0, ratio_sum = 0;
    double episodic_return = 0;
    std::size_t steps = 0;
};

inline TrajectoryGrads trajectory_loss(const ModelParams& params, const EpisodeTrajectory& traj,
                                       const TrainConfig& cfg) {
    const std::size_t T = traj.steps.size();
    TrajectoryGrads out;
    out.caches.resize(T);
    out.dlogits.resize(T);
    out.dvalue.assign(T, 0.0);
    out.episodic_return = traj.episodic_return;
    out.steps = T;
    if (T == 0) return out;

    HiddenState hidden;
    hidden.h = Eigen::Map<const Vec>(traj.initial_h.data(),
                                     static_cast<Eigen::Index>(traj.initial_h.size()));
    hidden.c = Eigen::Map<const Vec>(traj.initial_c.data(),
                                     static_cast<Eigen::Index>(traj.initial_c.size()));

    std::vector<double> values(T), target_logp(T), behavior_logp(T), rewards(T);
    std::vector<Vec> probs(T), logp_all(T);
    for (std::size_t t = 0; t < T; ++t) {
        const auto& s = traj.steps[t];
        if (s.action_index < 0)
            throw std::invalid_argument("trajectory step without action cannot be trained on");
        Vec x = Eigen::Map<const Vec>(s.state.data(), static_cast<Eigen::Index>(s.state.size()));
        auto fwd = Model::forward(params, x, s.reward, hidden, &out.caches[t]);
        hidden = fwd.hidden;
        values[t] = fwd.value;
        logp_all[t] = log_softmax(fwd.logits);
        probs[t] = logp_all[t].array().exp().matrix();
        target_logp[t] = logp_all[t](s.action_index);
        Vec blog = Eigen::Map<const Vec>(s.behavior_logits.data(),
                                         static_cast<Eigen::Index>(s.behavior_logits.size()));
        behavior_logp[t] = log_softmax(blog)(s.action_index);
        // reward for (s_t, a_t) is the one observed in the next window
        rewards[t] = t + 1 < T ? traj.steps[t + 1].reward : 0.0;
    }

    auto vt = vtrace_targets(rewards, values, /*bootstrap=*/0.0, behavior_logp, target_logp,
                             cfg.gamma, cfg.rho_bar, cfg.c_bar);
    out.ratio_sum = vt.mean_ratio * static_cast<double>(T);

    for (std::size_t t = 0; t < T; ++t) {
        const int a = traj.steps[t].action_index;
        const double adv = vt.pg_advantages[t];
        out.policy_loss += -target_logp[t] * adv;
        const double verr = vt.vs[t] - values[t];
        out.value_loss += verr * verr;
        const double H = -(probs[t].array() * logp_all[t].array()).sum();
        out.entropy += H;

        // d/dlogits of -logpi(a)*adv  ->  adv * (softmax - onehot)
        Vec dl = adv * probs[t];
        dl(a) -= adv;
        // d/dlogits of -entropy_coef * H
        dl += cfg.entropy_coef * (probs[t].array() * (logp_all[t].array() + H)).matrix();
        out.dlogits[t] = dl;
        // d/dV of value_coef * (vs - V)^2
        out.dvalue[t] = -2.0 * cfg.value_coef * verr;
    }
    return out;
}

}  // namespace detail

// One gradient update from a batch of trajectories. Loss is summed over the
// batch: -logpi*advantage + value_coef*(vs-V)^2 - entropy_coef*entropy.
inline TrainMetrics learner_step(const std::vector<EpisodeTrajectory>& batch, ModelParams& params,
                                 OptimizerState& opt, const TrainConfig& cfg) {
    if (batch.empty()) throw std::invalid_argument("learner_step: empty batch");
    Gradients total = Gradients::zero(params);
    TrainMetrics m;
    double ratio_sum = 0;
    std::size_t step_total = 0;
    for (const auto& traj : batch) {
        auto tl = detail::trajectory_loss(params, traj, cfg);
        auto grads = Model::backward(params, tl.caches, tl.dlogits, tl.dvalue);
        std::vector<double*> dst;
        total.g.for_each_tensor([&](const char*, auto& t) { dst.push_back(t.data()); });
        std::size_t i = 0;
        grads.g.for_each_tensor([&](const char*, auto& t) {
            Eigen::Map<Eigen::ArrayXd>(dst[i], t.size()) +=
                Eigen::Map<const Eigen::ArrayXd>(t.data(), t.size());
            ++i;
        });
        m.mean_return += tl.episodic_return;
        m.policy_loss += tl.policy_loss;
        m.value_loss += tl.value_loss * cfg.value_coef;
        m.entropy += tl.entropy;
        ratio_sum += tl.ratio_sum;
        step_total += tl.steps;
    }
    const double loss = m.policy_loss + m.value_loss - cfg.entropy_coef * m.entropy;
    if (!std::isfinite(loss)) throw std::runtime_error("learner_step: non-finite loss");
    m.mean_return /= static_cast<double>(batch.size());
    m.mean_ratio = step_total ? ratio_sum / static_cast<double>(step_total) : 0.0;
    opt.learning_rate = cfg.learning_rate;
    opt.step(params, total);
    return m;
}

struct TrainProgressRow {
    std::int64_t step = 0;
    int episode = 0;
    int actor_id = 0;
    std::string scenario;
    double episodic_return = 0;
    double policy_loss = 0;
    double value_loss = 0;
    double entropy = 0;
    double mean_ratio = 0;
    std::uint64_t snapshot_version = 0;
};

struct TrainResult {
    ModelParams params;
    std::vector<TrainProgressRow> curve;
    std::int64_t env_steps = 0;
    std::uint64_t updates = 0;
};

// Bounded FIFO hand-off between actors and the learner. Producers block only
// on back-pressure (full queue), never on gradient computation.
class TrajectoryQueue {
public:
    explicit TrajectoryQueue(std::size_t capacity) : capacity_(capacity) {}

    void push(TaggedTrajectory&& t) {
        std::unique_lock lk(mu_);
        not_full_.wait(lk, [&] { return items_.size() < capacity_ || closed_; });
        if (closed_) return;
        items_.push_back(std::move(t));
        not_empty_.notify_one();
    }

    // Pops everything currently available (at least one, up to max_batch),
    // waiting if the queue is empty.
    std::vector<TaggedTrajectory> pop_batch(int max_batch) {
        std::unique_lock lk(mu_);
        not_empty_.wait(lk, [&] { return !items_.empty() || closed_; });
        std::vector<TaggedTrajectory> out;
        while (!items_.empty() && static_cast<int>(out.size()) < max_batch) {
            out.push_back(std::move(items_.front()));
            items_.pop_front();
        }
        not_full_.notify_all();
        return out;
    }

    void close() {
        std::lock_guard lk(mu_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

private:
    std::mutex mu_;
    std::condition_variable not_full_, not_empty_;
    std::deque<TaggedTrajectory> items_;
    std::size_t capacity_;
    bool closed_ = false;
};

// Asynchronous actor-learner training. Actors run full episodes on the
// latest published snapshot; the learner consumes trajectories in arrival
// order. num_actors == 1 runs actor and learner in lockstep so the run is
// exactly reproducible.
inline TrainResult train(const TrainConfig& cfg_in,
                         const std::function<void(const TrainProgressRow&)>& on_progress = {},
                         const std::function<void(const ModelParams&, std::uint64_t)>& on_checkpoint = {}) {
    TrainConfig cfg = cfg_in;
    cfg.validate();
    const ActionSpace actions = parse_action_space(cfg.actions);
    cfg.model.action_count = actions.size();
    cfg.model.state_len = kAggregateStateLen + cfg.k * (actions.size() + 1);

    Rng init_rng(cfg.seed);
    auto params = std::make_shared<ModelParams>(ModelParams::init(cfg.model, init_rng));
    OptimizerState opt;
    opt.learning_rate = cfg.learning_rate;

    std::mutex snap_mu;
    ParamSnapshot snapshot{0, params};
    auto read_snapshot = [&] {
        std::lock_guard lk(snap_mu);
        return snapshot;
    };
    auto publish = [&](std::shared_ptr<const ModelParams> p, std::uint64_t version) {
        std::lock_guard lk(snap_mu);
        snapshot = {version, std::move(p)};
    };

    TrainResult result;
    result.params = *params;
    std::atomic<std::int64_t> steps_done{0};
    std::atomic<bool> stop{false};

    auto make_episode_cfg = [&](std::uint64_t seed) {
        EpisodeConfig ec;
        ec.k = cfg.k;
        ec.actions = actions;
        ec.mode = cfg.mode;
        ec.reward.beta = cfg.beta;
        ec.transport = cfg.transport;
        ec.seed = seed;
        return ec;
    };

    auto run_actor_episode = [&](int actor_id, int episode_index, Rng& actor_rng) {
        const ParamSnapshot snap = read_snapshot();
        const auto& scenario = cfg.scenarios[actor_rng.below(cfg.scenarios.size())];
        NeuralPolicy policy(snap.params, /*greedy=*/false);
        auto ec = make_episode_cfg(actor_rng.raw());
        auto res = run_episode(scenario, policy, ec);
        TaggedTrajectory tagged;
        tagged.trajectory = std::move(res.trajectory);
        tagged.snapshot_version = snap.version;
        tagged.actor_id = actor_id;
        tagged.episode_index = episode_index;
        return tagged;
    };

    auto consume = [&](std::vector<TaggedTrajectory>&& batch) {
        std::vector<EpisodeTrajectory> trajs;
        trajs.reserve(batch.size());
        for (auto& t : batch) {
            steps_done += static_cast<std::int64_t>(t.trajectory.steps.size());
            trajs.push_back(std::move(t.trajectory));
        }
        ModelParams updated = *read_snapshot().params;
        auto metrics = learner_step(trajs, updated, opt, cfg);
        ++result.updates;
        auto next = std::make_shared<ModelParams>(std::move(updated));
        publish(next, result.updates);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            TrainProgressRow row;
            row.step = steps_done.load();
            row.episode = batch[i].episode_index;
            row.actor_id = batch[i].actor_id;
            row.scenario = trajs[i].scenario_id;
            row.episodic_return = trajs[i].episodic_return;
            row.policy_loss = metrics.policy_loss;
            row.value_loss = metrics.value_loss;
            row.entropy = metrics.entropy;
            row.mean_ratio = metrics.mean_ratio;
            row.snapshot_version = batch[i].snapshot_version;
            result.curve.push_back(row);
            if (on_progress) on_progress(row);
        }
        if (on_checkpoint && cfg.checkpoint_every > 0 &&
            result.updates % static_cast<std::uint64_t>(cfg.checkpoint_every) == 0)
            on_checkpoint(*next, result.updates);
        if (steps_done.load() >= cfg.total_steps) stop = true;
    };

    if (cfg.num_actors == 1) {
        Rng actor_rng(cfg.seed ^ 0xa5a5a5a5ull);
        int episode = 0;
        while (!stop) {
            std::vector<TaggedTrajectory> batch;
            batch.push_back(run_actor_episode(0, episode++, actor_rng));
            consume(std::move(batch));
        }
    } else {
        TrajectoryQueue queue(2 * static_cast<std::size_t>(cfg.num_actors));
        std::vector<std::thread> actors;
        for (int a = 0; a < cfg.num_actors; ++a) {
            actors.emplace_back([&, a] {
                Rng actor_rng(cfg.seed ^ (0xa5a5a5a5ull + static_cast<std::uint64_t>(a) * 0x517cc1b7ull));
                int episode = 0;
                while (!stop) {
                    try {
                        queue.push(run_actor_episode(a, episode++, actor_rng));
                    } catch (const std::exception&) {
                        // actor failure: restart with a fresh episode
                        continue;
                    }
                }
            });
        }
        while (!stop) consume(queue.pop_batch(cfg.max_batch));
        queue.close();
        for (auto& t : actors) t.join();
    }

    result.params = *read_snapshot().params;
    result.env_steps = steps_done.load();
    return result;
}

}  // namespace ccrl
