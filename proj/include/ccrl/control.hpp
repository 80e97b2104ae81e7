#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccrl {

constexpr int kCwndFloorMss = 2;
constexpr int kCwndCeilMss = 2000;
constexpr int kInitialCwndMss = 10;

// One entry of the discrete cwnd update set.
struct ActionOp {
    enum class Kind { Keep, Div, Sub, Add, Mul } kind = Kind::Keep;
    int n = 1;

    std::string render() const {
        switch (kind) {
            case Kind::Keep: return "0";
            case Kind::Div: return "/" + std::to_string(n);
            case Kind::Sub: return "-" + std::to_string(n);
            case Kind::Add: return "+" + std::to_string(n);
            case Kind::Mul: return "*" + std::to_string(n);
        }
        return "?";
    }
};

struct ActionSpace {
    std::vector<ActionOp> ops;
    std::string source_string;

    int size() const { return static_cast<int>(ops.size()); }

    std::string render() const {
        std::string out;
        for (std::size_t i = 0; i < ops.size(); ++i) {
            if (i) out += ",";
            out += ops[i].render();
        }
        return out;
    }
};

constexpr const char* kDefaultActionConfig = "0,/2,-10,+10,*2";

// Grammar: comma-separated tokens, "0" keep, "/N" halve-style divide,
// "-N" / "+N" additive, "*N" multiplicative, N a positive integer.
inline ActionSpace parse_action_space(const std::string& cfg) {
    if (cfg.empty()) throw std::invalid_argument("action space config is empty");
    ActionSpace space;
    space.source_string = cfg;
    std::size_t pos = 0;
    int index = 0;
    while (pos <= cfg.size()) {
        auto comma = cfg.find(',', pos);
        std::string tok = cfg.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        auto fail = [&](const std::string& why) {
            throw std::invalid_argument("action space token " + std::to_string(index) + " ('" + tok +
                                        "'): " + why);
        };
        if (tok.empty()) fail("empty token");
        ActionOp op;
        if (tok == "0") {
            op.kind = ActionOp::Kind::Keep;
        } else {
            switch (tok[0]) {
                case '/': op.kind = ActionOp::Kind::Div; break;
                case '-': op.kind = ActionOp::Kind::Sub; break;
                case '+': op.kind = ActionOp::Kind::Add; break;
                case '*': op.kind = ActionOp::Kind::Mul; break;
                default: fail("unknown operator");
            }
            const std::string num = tok.substr(1);
            if (num.empty() || num.find_first_not_of("0123456789") != std::string::npos)
                fail("expected positive integer operand");
            long v = 0;
            try {
                v = std::stol(num);
            } catch (const std::exception&) {
                fail("operand out of range");
            }
            if (v < 1) fail("operand must be >= 1");
            op.n = static_cast<int>(v);
        }
        space.ops.push_back(op);
        ++index;
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return space;
}

// cwnd' = clip(update(cwnd, op), 2, 2000), integer MSS counts, Div floors.
inline int apply_action(int cwnd_mss, const ActionOp& op) {
    long updated = cwnd_mss;
    switch (op.kind) {
        case ActionOp::Kind::Keep: break;
        case ActionOp::Kind::Div: updated = cwnd_mss / op.n; break;
        case ActionOp::Kind::Sub: updated = static_cast<long>(cwnd_mss) - op.n; break;
        case ActionOp::Kind::Add: updated = static_cast<long>(cwnd_mss) + op.n; break;
        case ActionOp::Kind::Mul: updated = static_cast<long>(cwnd_mss) * op.n; break;
    }
    return static_cast<int>(std::clamp(updated, static_cast<long>(kCwndFloorMss),
                                       static_cast<long>(kCwndCeilMss)));
}

struct RewardParams {
    double beta = 0.2;       // delay trade-off, reward = t - beta * d
    bool log_scale = false;  // evaluation-only alternative: log t - beta log d
};

// t: mean of the window's per-ACK throughput estimates (MB/s).
// d: max of the window's per-ACK queuing delays (ms).
inline double compute_reward(const std::vector<double>& window_throughputs,
                             const std::vector<double>& window_delays,
                             const RewardParams& params) {
    if (window_throughputs.empty() && window_delays.empty()) return 0.0;
    double t = 0.0;
    if (!window_throughputs.empty())
        t = std::accumulate(window_throughputs.begin(), window_throughputs.end(), 0.0) /
            static_cast<double>(window_throughputs.size());
    double d = 0.0;
    for (double x : window_delays) d = std::max(d, x);
    if (params.log_scale) {
        constexpr double eps = 1e-6;
        return std::log(t + eps) - params.beta * std::log(d + eps);
    }
    return t - params.beta * d;
}

}  // namespace ccrl
