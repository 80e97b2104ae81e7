#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace ccrl {

struct VtraceResult {
    std::vector<double> vs;             // value targets, length T
    std::vector<double> pg_advantages;  // length T
    double mean_ratio = 0;              // unclipped importance ratio average
};

// Importance-weighted off-policy value targets via the standard backward
// recursion:
//   delta_t = rho_t (r_t + gamma V_{t+1} - V_t)
//   vs_t    = V_t + delta_t + gamma c_t (vs_{t+1} - V_{t+1})
// with rho_t = min(rho_bar, ratio_t), c_t = min(c_bar, ratio_t) and
// V_T = vs_T = bootstrap_value.
inline VtraceResult vtrace_targets(const std::vector<double>& rewards,
                                   const std::vector<double>& values, double bootstrap_value,
                                   const std::vector<double>& behavior_log_probs,
                                   const std::vector<double>& target_log_probs, double gamma,
                                   double rho_bar, double c_bar) {
    const std::size_t T = rewards.size();
    if (values.size() != T || behavior_log_probs.size() != T || target_log_probs.size() != T)
        throw std::invalid_argument("vtrace_targets: sequence length mismatch");

    std::vector<double> rho(T), c(T);
    double ratio_sum = 0;
    for (std::size_t t = 0; t < T; ++t) {
        const double ratio = std::exp(target_log_probs[t] - behavior_log_probs[t]);
        ratio_sum += ratio;
        rho[t] = std::min(rho_bar, ratio);
        c[t] = std::min(c_bar, ratio);
    }

    VtraceResult out;
    out.vs.assign(T, 0.0);
    out.pg_advantages.assign(T, 0.0);
    out.mean_ratio = T ? ratio_sum / static_cast<double>(T) : 0.0;

    double vs_next = bootstrap_value;
    double v_next = bootstrap_value;
    for (std::size_t i = T; i-- > 0;) {
        const double delta = rho[i] * (rewards[i] + gamma * v_next - values[i]);
        out.vs[i] = values[i] + delta + gamma * c[i] * (vs_next - v_next);
        out.pg_advantages[i] = rho[i] * (rewards[i] + gamma * vs_next - values[i]);
        vs_next = out.vs[i];
        v_next = values[i];
    }
    return out;
}

}  // namespace ccrl
