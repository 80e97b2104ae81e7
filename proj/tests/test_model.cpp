#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "ccrl/model.hpp"

using namespace ccrl;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.state_len = 3;
    cfg.action_count = 2;
    cfg.fc1 = 4;
    cfg.fc2 = 4;
    cfg.hidden = 2;
    return cfg;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar-loop reference forward pass, independent of the Eigen path.
ForwardOutput reference_forward(const ModelParams& p, const Vec& state, double reward,
                                const HiddenState& hidden) {
    const auto& cfg = p.cfg;
    std::vector<double> a1(cfg.fc1), a2(cfg.fc2);
    for (int i = 0; i < cfg.fc1; ++i) {
        double z = p.b1(i);
        for (int j = 0; j < cfg.state_len; ++j) z += p.w1(i, j) * state(j);
        a1[i] = std::max(0.0, z);
    }
    for (int i = 0; i < cfg.fc2; ++i) {
        double z = p.b2(i);
        for (int j = 0; j < cfg.fc1; ++j) z += p.w2(i, j) * a1[j];
        a2[i] = std::max(0.0, z);
    }
    std::vector<double> u(a2);
    u.push_back(reward);

    std::vector<double> head;
    ForwardOutput out;
    const int H = cfg.hidden;
    if (cfg.use_lstm) {
        std::vector<double> z(4 * H);
        for (int i = 0; i < 4 * H; ++i) {
            double v = p.lstm_b(i);
            for (int j = 0; j < cfg.lstm_input(); ++j) v += p.lstm_w(i, j) * u[j];
            for (int j = 0; j < H; ++j) v += p.lstm_u(i, j) * hidden.h(j);
            z[i] = v;
        }
        out.hidden.h.resize(H);
        out.hidden.c.resize(H);
        for (int i = 0; i < H; ++i) {
            const double gi = sigmoid(z[i]);
            const double gf = sigmoid(z[H + i]);
            const double gg = std::tanh(z[2 * H + i]);
            const double go = sigmoid(z[3 * H + i]);
            const double c = gf * hidden.c(i) + gi * gg;
            out.hidden.c(i) = c;
            out.hidden.h(i) = go * std::tanh(c);
            head.push_back(out.hidden.h(i));
        }
    } else {
        head = u;
    }
    out.logits.resize(cfg.action_count);
    for (int i = 0; i < cfg.action_count; ++i) {
        double v = p.b_pol(i);
        for (std::size_t j = 0; j < head.size(); ++j) v += p.w_pol(i, j) * head[j];
        out.logits(i) = v;
    }
    out.value = p.b_val(0);
    for (std::size_t j = 0; j < head.size(); ++j) out.value += p.w_val(0, j) * head[j];
    return out;
}

}  // namespace

TEST_CASE("zero weights give a uniform policy") {
    auto cfg = tiny_config();
    Rng rng(1);
    auto p = ModelParams::init(cfg, rng);
    p.for_each_tensor([](const char*, auto& t) { t.setZero(); });
    auto out = Model::forward(p, Vec::Zero(3), 0.0, HiddenState::zero(cfg));
    CHECK(out.logits(0) == out.logits(1));
    Vec probs = out.logits;
    softmax_inplace(probs);
    CHECK_THAT(probs(0), Catch::Matchers::WithinAbs(0.5, 1e-12));
}

TEST_CASE("forward is deterministic and pure") {
    auto cfg = tiny_config();
    Rng rng(7);
    auto p = ModelParams::init(cfg, rng);
    Vec x(3);
    x << 0.5, -1.0, 2.0;
    auto h = HiddenState::zero(cfg);
    auto o1 = Model::forward(p, x, 0.3, h);
    auto o2 = Model::forward(p, x, 0.3, h);
    CHECK(o1.logits == o2.logits);
    CHECK(o1.value == o2.value);
    CHECK(o1.hidden.h == o2.hidden.h);
    CHECK(o1.hidden.c == o2.hidden.c);
}

TEST_CASE("forward matches a scalar-loop reference") {
    for (bool use_lstm : {true, false}) {
        auto cfg = tiny_config();
        cfg.use_lstm = use_lstm;
        Rng rng(11);
        auto p = ModelParams::init(cfg, rng);
        Vec x(3);
        x << 0.2, -0.7, 1.3;
        HiddenState h = HiddenState::zero(cfg);
        double reward = -0.5;
        for (int step = 0; step < 3; ++step) {
            auto fast = Model::forward(p, x, reward, h);
            auto ref = reference_forward(p, x, reward, h);
            for (int i = 0; i < cfg.action_count; ++i)
                CHECK_THAT(fast.logits(i), Catch::Matchers::WithinAbs(ref.logits(i), 1e-10));
            CHECK_THAT(fast.value, Catch::Matchers::WithinAbs(ref.value, 1e-10));
            if (use_lstm)
                for (int i = 0; i < cfg.hidden; ++i)
                    CHECK_THAT(fast.hidden.h(i), Catch::Matchers::WithinAbs(ref.hidden.h(i), 1e-10));
            h = fast.hidden;
            reward = fast.value;
            x = -x;
        }
    }
}

TEST_CASE("shape mismatch is a hard error") {
    auto cfg = tiny_config();
    Rng rng(1);
    auto p = ModelParams::init(cfg, rng);
    CHECK_THROWS_AS(Model::forward(p, Vec::Zero(5), 0.0, HiddenState::zero(cfg)),
                    std::invalid_argument);
}

TEST_CASE("softmax sums to one, log probs non-positive") {
    Vec logits(4);
    logits << 3.0, -2.0, 0.5, 10.0;
    Vec probs = logits;
    softmax_inplace(probs);
    CHECK_THAT(probs.sum(), Catch::Matchers::WithinAbs(1.0, 1e-12));
    Vec lp = log_softmax(logits);
    for (int i = 0; i < 4; ++i) CHECK(lp(i) <= 0.0);
}

TEST_CASE("sampling") {
    SECTION("saturated logits pick the dominant action") {
        Vec logits(2);
        logits << 50.0, -50.0;
        Rng rng(3);
        for (int i = 0; i < 100; ++i) CHECK(sample_action(logits, rng).index == 0);
    }
    SECTION("uniform logits give uniform frequencies within 3 sigma") {
        const int n = 100000, k = 5;
        Vec logits = Vec::Zero(k);
        Rng rng(17);
        std::vector<int> counts(k, 0);
        for (int i = 0; i < n; ++i) ++counts[sample_action(logits, rng).index];
        const double expect = static_cast<double>(n) / k;
        const double sigma = std::sqrt(n * (1.0 / k) * (1.0 - 1.0 / k));
        for (int c : counts) CHECK(std::abs(c - expect) < 3 * sigma);
    }
    SECTION("greedy picks the argmax") {
        Vec logits(3);
        logits << 1.0, 3.0, 2.0;
        CHECK(greedy_action(logits).index == 1);
    }
}

TEST_CASE("backward: zero output gradients give zero parameter gradients") {
    auto cfg = tiny_config();
    Rng rng(5);
    auto p = ModelParams::init(cfg, rng);
    std::vector<StepCache> caches(2);
    HiddenState h = HiddenState::zero(cfg);
    Vec x(3);
    x << 1.0, 2.0, 3.0;
    for (auto& c : caches) h = Model::forward(p, x, 0.1, h, &c).hidden;
    std::vector<Vec> dlogits(2, Vec::Zero(2));
    std::vector<double> dvalue(2, 0.0);
    auto grads = Model::backward(p, caches, dlogits, dvalue);
    grads.g.for_each_tensor([](const char*, auto& t) {
        CHECK(t.cwiseAbs().maxCoeff() == 0.0);
    });
}

TEST_CASE("gradient check against central finite differences") {
    // downsized model, arbitrary smooth loss over a short trajectory
    for (bool use_lstm : {true, false}) {
        ModelConfig cfg;
        cfg.state_len = 12;
        cfg.action_count = 5;
        cfg.fc1 = 6;
        cfg.fc2 = 6;
        cfg.hidden = 8;
        cfg.use_lstm = use_lstm;
        const int T = 7;
        Rng rng(123);
        auto params = ModelParams::init(cfg, rng);

        std::vector<Vec> states;
        std::vector<double> rewards;
        Rng data_rng(55);
        for (int t = 0; t < T; ++t) {
            Vec x(cfg.state_len);
            for (int i = 0; i < cfg.state_len; ++i) x(i) = data_rng.range(-1.0, 1.0);
            states.push_back(x);
            rewards.push_back(data_rng.range(-1.0, 1.0));
        }
        // fixed loss weights so loss(params) is a deterministic scalar
        std::vector<Vec> wl;
        std::vector<double> wv;
        for (int t = 0; t < T; ++t) {
            Vec w(cfg.action_count);
            for (int i = 0; i < cfg.action_count; ++i) w(i) = data_rng.range(-1.0, 1.0);
            wl.push_back(w);
            wv.push_back(data_rng.range(-1.0, 1.0));
        }

        auto loss_of = [&](const ModelParams& p) {
            HiddenState h = HiddenState::zero(cfg);
            double loss = 0;
            for (int t = 0; t < T; ++t) {
                auto out = Model::forward(p, states[t], rewards[t], h);
                h = out.hidden;
                loss += wl[t].dot(out.logits) + wv[t] * out.value * out.value;
            }
            return loss;
        };

        // analytic gradients
        std::vector<StepCache> caches(T);
        std::vector<Vec> dlogits(T);
        std::vector<double> dvalue(T);
        {
            HiddenState h = HiddenState::zero(cfg);
            for (int t = 0; t < T; ++t) {
                auto out = Model::forward(params, states[t], rewards[t], h, &caches[t]);
                h = out.hidden;
                dlogits[t] = wl[t];
                dvalue[t] = 2.0 * wv[t] * out.value;
            }
        }
        auto grads = Model::backward(params, caches, dlogits, dvalue);

        const double eps = 1e-4;
        double max_rel_err = 0;
        std::vector<double*> gptr;
        grads.g.for_each_tensor([&](const char*, auto& t) { gptr.push_back(t.data()); });
        std::size_t tensor_idx = 0;
        params.for_each_tensor([&](const char* name, auto& t) {
            double* g = gptr[tensor_idx++];
            for (Eigen::Index i = 0; i < t.size(); ++i) {
                const double orig = t.data()[i];
                t.data()[i] = orig + eps;
                const double up = loss_of(params);
                t.data()[i] = orig - eps;
                const double down = loss_of(params);
                t.data()[i] = orig;
                const double fd = (up - down) / (2 * eps);
                const double scale = std::max({1e-6, std::abs(fd), std::abs(g[i])});
                const double rel = std::abs(fd - g[i]) / scale;
                if (rel > max_rel_err) max_rel_err = rel;
                if (rel > 1e-4) INFO("tensor " << name << " index " << i);
                REQUIRE(rel < 1e-4);
            }
        });
        CHECK(max_rel_err < 1e-4);
    }
}

TEST_CASE("rmsprop update rule") {
    ModelConfig cfg = tiny_config();
    Rng rng(9);
    auto p = ModelParams::init(cfg, rng);
    OptimizerState opt;
    opt.learning_rate = 1e-5;
    opt.decay = 0.99;
    opt.epsilon = 1e-5;

    SECTION("zero gradient leaves parameters unchanged") {
        auto before = p;
        auto grads = Gradients::zero(p);
        opt.step(p, grads);
        CHECK(p.w1 == before.w1);
        CHECK(p.lstm_w == before.lstm_w);
    }

    SECTION("first step matches the closed form") {
        auto grads = Gradients::zero(p);
        grads.g.w1(0, 0) = 1.0;
        const double before = p.w1(0, 0);
        opt.step(p, grads);
        const double expect_delta = -1e-5 / std::sqrt(0.01 + 1e-5);
        CHECK_THAT(p.w1(0, 0) - before, Catch::Matchers::WithinRel(expect_delta, 1e-12));
    }

    SECTION("repeated identical steps shrink in magnitude") {
        auto grads = Gradients::zero(p);
        grads.g.w1(0, 0) = 1.0;
        const double x0 = p.w1(0, 0);
        opt.step(p, grads);
        const double d1 = p.w1(0, 0) - x0;
        grads = Gradients::zero(p);
        grads.g.w1(0, 0) = 1.0;
        const double x1 = p.w1(0, 0);
        opt.step(p, grads);
        const double d2 = p.w1(0, 0) - x1;
        CHECK(std::abs(d2) < std::abs(d1));
    }
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    ModelConfig cfg;
    cfg.state_len = 20;
    cfg.action_count = 5;
    cfg.fc1 = 8;
    cfg.fc2 = 8;
    cfg.hidden = 4;
    Rng rng(31);
    auto p = ModelParams::init(cfg, rng);
    const std::string path = "test_checkpoint.bin";
    checkpoint::save(path, p);
    auto q = checkpoint::load(path);
    REQUIRE(q.cfg == p.cfg);
    bool identical = true;
    std::vector<const double*> other;
    std::vector<Eigen::Index> sizes;
    q.for_each_tensor([&](const char*, auto& t) {
        other.push_back(t.data());
        sizes.push_back(t.size());
    });
    std::size_t i = 0;
    p.for_each_tensor([&](const char*, auto& t) {
        if (std::memcmp(t.data(), other[i], sizeof(double) * sizes[i]) != 0) identical = false;
        ++i;
    });
    CHECK(identical);
    std::remove(path.c_str());
}
