#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccrl/rng.hpp"

namespace ccrl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct ModelConfig {
    int state_len = 220;
    int action_count = 5;
    int fc1 = 512;
    int fc2 = 512;
    int hidden = 256;  // LSTM hidden size
    bool use_lstm = true;

    // Dimension feeding the policy/value heads. Without the LSTM the
    // (trunk, reward) concatenation passes straight through.
    int head_dim() const { return use_lstm ? hidden : fc2 + 1; }
    int lstm_input() const { return fc2 + 1; }

    bool operator==(const ModelConfig&) const = default;
};

struct HiddenState {
    Vec h;
    Vec c;

    static HiddenState zero(const ModelConfig& cfg) {
        HiddenState s;
        const int n = cfg.use_lstm ? cfg.hidden : 0;
        s.h = Vec::Zero(n);
        s.c = Vec::Zero(n);
        return s;
    }
};

// Policy/value model: two ReLU fully-connected layers, a single-layer LSTM
// over (trunk output, previous reward), a |A|-way policy head and a scalar
// value head. Gate order in the stacked LSTM tensors is i, f, g, o.
struct ModelParams {
    ModelConfig cfg;
    Mat w1, w2;
    Vec b1, b2;
    Mat lstm_w, lstm_u;  // 4H x (fc2+1), 4H x H
    Vec lstm_b;
    Mat w_pol;
    Vec b_pol;
    Mat w_val;  // 1 x head_dim
    Vec b_val;  // length 1

    static ModelParams init(const ModelConfig& cfg, Rng& rng) {
        ModelParams p;
        p.cfg = cfg;
        auto uniform_mat = [&](int rows, int cols, int fan_in) {
            Mat m(rows, cols);
            const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (int c = 0; c < cols; ++c)
                for (int r = 0; r < rows; ++r) m(r, c) = rng.range(-bound, bound);
            return m;
        };
        p.w1 = uniform_mat(cfg.fc1, cfg.state_len, cfg.state_len);
        p.b1 = Vec::Zero(cfg.fc1);
        p.w2 = uniform_mat(cfg.fc2, cfg.fc1, cfg.fc1);
        p.b2 = Vec::Zero(cfg.fc2);
        if (cfg.use_lstm) {
            const int in = cfg.lstm_input();
            p.lstm_w = uniform_mat(4 * cfg.hidden, in, in);
            p.lstm_u = uniform_mat(4 * cfg.hidden, cfg.hidden, cfg.hidden);
            p.lstm_b = Vec::Zero(4 * cfg.hidden);
            // forget gate bias +1
            p.lstm_b.segment(cfg.hidden, cfg.hidden).setOnes();
        } else {
            p.lstm_w.resize(0, 0);
            p.lstm_u.resize(0, 0);
            p.lstm_b.resize(0);
        }
        const int d = cfg.head_dim();
        p.w_pol = uniform_mat(cfg.action_count, d, d);
        p.b_pol = Vec::Zero(cfg.action_count);
        p.w_val = uniform_mat(1, d, d);
        p.b_val = Vec::Zero(1);
        return p;
    }

    // Flat view over every tensor, fixed order; used by the optimizer and
    // the finite-difference tests.
    template <typename F>
    void for_each_tensor(F&& f) {
        f("w1", w1);
        f("b1", b1);
        f("w2", w2);
        f("b2", b2);
        if (cfg.use_lstm) {
            f("lstm_w", lstm_w);
            f("lstm_u", lstm_u);
            f("lstm_b", lstm_b);
        }
        f("w_pol", w_pol);
        f("b_pol", b_pol);
        f("w_val", w_val);
        f("b_val", b_val);
    }

    template <typename F>
    void for_each_tensor(F&& f) const {
        f("w1", w1);
        f("b1", b1);
        f("w2", w2);
        f("b2", b2);
        if (cfg.use_lstm) {
            f("lstm_w", lstm_w);
            f("lstm_u", lstm_u);
            f("lstm_b", lstm_b);
        }
        f("w_pol", w_pol);
        f("b_pol", b_pol);
        f("w_val", w_val);
        f("b_val", b_val);
    }
};

struct Gradients {
    ModelParams g;  // same shapes, gradient values

    static Gradients zero(const ModelParams& like) {
        Gradients out;
        out.g = like;
        out.g.for_each_tensor([](const char*, auto& t) { t.setZero(); });
        return out;
    }
};

struct ForwardOutput {
    Vec logits;
    double value = 0;
    HiddenState hidden;
};

// Per-step activations cached for backprop.
struct StepCache {
    Vec x;       // state
    double prev_reward = 0;
    Vec z1, a1, z2, a2;
    Vec u;       // lstm input [a2; reward]
    Vec gi, gf, gg, go;  // gate activations
    Vec c_prev, h_prev, c, tanh_c;
    Vec head_in;
    Vec logits;
    double value = 0;
};

inline void softmax_inplace(Vec& v) {
    const double mx = v.maxCoeff();
    v = (v.array() - mx).exp().matrix();
    v /= v.sum();
}

inline Vec log_softmax(const Vec& logits) {
    const double mx = logits.maxCoeff();
    Vec shifted = (logits.array() - mx).matrix();
    const double lse = std::log(shifted.array().exp().sum());
    return (shifted.array() - lse).matrix();
}

class Model {
public:
    static ForwardOutput forward(const ModelParams& p, const Vec& state, double prev_reward,
                                 const HiddenState& hidden, StepCache* cache = nullptr) {
        const auto& cfg = p.cfg;
        if (state.size() != cfg.state_len)
            throw std::invalid_argument("forward: state length " + std::to_string(state.size()) +
                                        " != model state_len " + std::to_string(cfg.state_len));
        Vec z1 = p.w1 * state + p.b1;
        Vec a1 = z1.cwiseMax(0.0);
        Vec z2 = p.w2 * a1 + p.b2;
        Vec a2 = z2.cwiseMax(0.0);
        Vec u(cfg.lstm_input());
        u << a2, prev_reward;

        Vec head_in;
        HiddenState next;
        StepCache local;
        StepCache& sc = cache ? *cache : local;
        if (cfg.use_lstm) {
            if (hidden.h.size() != cfg.hidden)
                throw std::invalid_argument("forward: hidden size mismatch");
            const int H = cfg.hidden;
            Vec z = p.lstm_w * u + p.lstm_u * hidden.h + p.lstm_b;
            Vec gi = z.segment(0, H).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
            Vec gf = z.segment(H, H).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
            Vec gg = z.segment(2 * H, H).array().tanh();
            Vec go = z.segment(3 * H, H).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
            Vec c = gf.cwiseProduct(hidden.c) + gi.cwiseProduct(gg);
            Vec tanh_c = c.array().tanh();
            next.h = go.cwiseProduct(tanh_c);
            next.c = c;
            head_in = next.h;
            if (cache) {
                sc.gi = gi; sc.gf = gf; sc.gg = gg; sc.go = go;
                sc.c_prev = hidden.c; sc.h_prev = hidden.h;
                sc.c = c; sc.tanh_c = tanh_c;
            }
        } else {
            next.h.resize(0);
            next.c.resize(0);
            head_in = u;
        }

        ForwardOutput out;
        out.logits = p.w_pol * head_in + p.b_pol;
        out.value = (p.w_val * head_in)(0) + p.b_val(0);
        out.hidden = next;
        if (cache) {
            sc.x = state; sc.prev_reward = prev_reward;
            sc.z1 = z1; sc.a1 = a1; sc.z2 = z2; sc.a2 = a2; sc.u = u;
            sc.head_in = head_in;
            sc.logits = out.logits;
            sc.value = out.value;
        }
        return out;
    }

    // BPTT over a full trajectory. dlogits[t] and dvalue[t] are the loss
    // gradients at each step's outputs; caches come from forward() calls
    // threaded through the episode starting at initial_hidden.
    static Gradients backward(const ModelParams& p, const std::vector<StepCache>& caches,
                              const std::vector<Vec>& dlogits, const std::vector<double>& dvalue) {
        const auto& cfg = p.cfg;
        if (caches.size() != dlogits.size() || caches.size() != dvalue.size())
            throw std::invalid_argument("backward: length mismatch");
        Gradients grads = Gradients::zero(p);
        auto& g = grads.g;
        const int H = cfg.hidden;
        Vec dh_next = Vec::Zero(cfg.use_lstm ? H : 0);
        Vec dc_next = Vec::Zero(cfg.use_lstm ? H : 0);

        for (int t = static_cast<int>(caches.size()) - 1; t >= 0; --t) {
            const StepCache& sc = caches[t];
            // heads
            Vec dhead = p.w_pol.transpose() * dlogits[t] + p.w_val.transpose() * Vec::Constant(1, dvalue[t]);
            g.w_pol.noalias() += dlogits[t] * sc.head_in.transpose();
            g.b_pol += dlogits[t];
            g.w_val.noalias() += dvalue[t] * sc.head_in.transpose();
            g.b_val(0) += dvalue[t];

            Vec du;
            if (cfg.use_lstm) {
                Vec dh = dhead + dh_next;
                Vec do_ = dh.cwiseProduct(sc.tanh_c);
                Vec dc = dc_next + dh.cwiseProduct(sc.go).cwiseProduct(
                                       (1.0 - sc.tanh_c.array().square()).matrix());
                Vec di = dc.cwiseProduct(sc.gg);
                Vec df = dc.cwiseProduct(sc.c_prev);
                Vec dg = dc.cwiseProduct(sc.gi);
                Vec dz(4 * H);
                dz.segment(0, H) = di.cwiseProduct(sc.gi).cwiseProduct((1.0 - sc.gi.array()).matrix());
                dz.segment(H, H) = df.cwiseProduct(sc.gf).cwiseProduct((1.0 - sc.gf.array()).matrix());
                dz.segment(2 * H, H) = dg.cwiseProduct((1.0 - sc.gg.array().square()).matrix());
                dz.segment(3 * H, H) = do_.cwiseProduct(sc.go).cwiseProduct((1.0 - sc.go.array()).matrix());
                g.lstm_w.noalias() += dz * sc.u.transpose();
                g.lstm_u.noalias() += dz * sc.h_prev.transpose();
                g.lstm_b += dz;
                du = p.lstm_w.transpose() * dz;
                dh_next = p.lstm_u.transpose() * dz;
                dc_next = dc.cwiseProduct(sc.gf);
            } else {
                du = dhead;
            }

            Vec da2 = du.head(cfg.fc2);
            Vec dz2 = da2.cwiseProduct((sc.z2.array() > 0.0).cast<double>().matrix());
            g.w2.noalias() += dz2 * sc.a1.transpose();
            g.b2 += dz2;
            Vec da1 = p.w2.transpose() * dz2;
            Vec dz1 = da1.cwiseProduct((sc.z1.array() > 0.0).cast<double>().matrix());
            g.w1.noalias() += dz1 * sc.x.transpose();
            g.b1 += dz1;
        }

        bool bad = false;
        std::string bad_name;
        grads.g.for_each_tensor([&](const char* name, auto& t) {
            if (!bad && !t.allFinite()) {
                bad = true;
                bad_name = name;
            }
        });
        if (bad) throw std::runtime_error("backward: non-finite gradient in " + bad_name);
        return grads;
    }
};

struct SampledAction {
    int index = 0;
    double log_prob = 0;
};

inline SampledAction sample_action(const Vec& logits, Rng& rng) {
    Vec probs = logits;
    softmax_inplace(probs);
    const double r = rng.uniform();
    double cum = 0;
    int idx = static_cast<int>(logits.size()) - 1;
    for (int i = 0; i < logits.size(); ++i) {
        cum += probs(i);
        if (r < cum) {
            idx = i;
            break;
        }
    }
    return {idx, log_softmax(logits)(idx)};
}

inline SampledAction greedy_action(const Vec& logits) {
    Eigen::Index idx = 0;
    logits.maxCoeff(&idx);
    return {static_cast<int>(idx), log_softmax(logits)(idx)};
}

// RMSProp: acc <- decay*acc + (1-decay)*g^2 ; p <- p - lr*g/sqrt(acc+eps)
struct OptimizerState {
    double learning_rate = 1e-5;
    double decay = 0.99;
    double epsilon = 1e-5;
    ModelParams acc;  // same shapes, accumulator values
    bool initialized = false;

    void step(ModelParams& params, Gradients& grads) {
        if (!initialized) {
            acc = params;
            acc.for_each_tensor([](const char*, auto& t) { t.setZero(); });
            initialized = true;
        }
        // walk the three parameter sets in lockstep
        std::vector<double*> pp, aa, gg;
        std::vector<std::ptrdiff_t> sizes;
        params.for_each_tensor([&](const char*, auto& t) {
            pp.push_back(t.data());
            sizes.push_back(t.size());
        });
        acc.for_each_tensor([&](const char*, auto& t) { aa.push_back(t.data()); });
        grads.g.for_each_tensor([&](const char*, auto& t) { gg.push_back(t.data()); });
        for (std::size_t i = 0; i < pp.size(); ++i) {
            Eigen::Map<Eigen::ArrayXd> p(pp[i], sizes[i]);
            Eigen::Map<Eigen::ArrayXd> a(aa[i], sizes[i]);
            Eigen::Map<Eigen::ArrayXd> g(gg[i], sizes[i]);
            a = decay * a + (1.0 - decay) * g.square();
            p -= learning_rate * g / (a + epsilon).sqrt();
        }
    }
};

// Versioned binary checkpoint; save/load round-trips bit-exactly.
namespace checkpoint {

constexpr std::uint32_t kMagic = 0x4343524cu;  // "CCRL"
constexpr std::uint32_t kVersion = 1;

inline void save(const std::string& path, ModelParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    auto put_u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    auto put_i32 = [&](std::int32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    put_u32(kMagic);
    put_u32(kVersion);
    const auto& cfg = params.cfg;
    put_i32(cfg.state_len);
    put_i32(cfg.action_count);
    put_i32(cfg.fc1);
    put_i32(cfg.fc2);
    put_i32(cfg.hidden);
    put_i32(cfg.use_lstm ? 1 : 0);
    params.for_each_tensor([&](const char*, auto& t) {
        put_i32(static_cast<std::int32_t>(t.rows()));
        put_i32(static_cast<std::int32_t>(t.cols()));
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.size() * sizeof(double)));
    });
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

inline ModelParams load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    auto get_u32 = [&] {
        std::uint32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    auto get_i32 = [&] {
        std::int32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    if (get_u32() != kMagic) throw std::runtime_error("not a checkpoint file: " + path);
    if (get_u32() != kVersion) throw std::runtime_error("unsupported checkpoint version: " + path);
    ModelConfig cfg;
    cfg.state_len = get_i32();
    cfg.action_count = get_i32();
    cfg.fc1 = get_i32();
    cfg.fc2 = get_i32();
    cfg.hidden = get_i32();
    cfg.use_lstm = get_i32() != 0;
    Rng dummy(0);
    ModelParams params = ModelParams::init(cfg, dummy);
    params.for_each_tensor([&](const char* name, auto& t) {
        const int rows = get_i32();
        const int cols = get_i32();
        if (rows != t.rows() || cols != t.cols())
            throw std::runtime_error(std::string("checkpoint shape mismatch for ") + name);
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
    });
    if (!in) throw std::runtime_error("checkpoint truncated: " + path);
    return params;
}

}  // namespace checkpoint

}  // namespace ccrl
