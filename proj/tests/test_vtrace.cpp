#include <catch2/catch_amalgamated.hpp>

#include "ccrl/rng.hpp"
#include "ccrl/vtrace.hpp"

using namespace ccrl;

namespace {

// Forward-sum oracle:
//   vs_t = V_t + sum_s gamma^(s-t) (prod_{i<s} c_i) rho_s (r_s + gamma V_{s+1} - V_s)
std::vector<double> forward_oracle(const std::vector<double>& r, const std::vector<double>& v,
                                   double bootstrap, const std::vector<double>& mu,
                                   const std::vector<double>& pi, double gamma, double rho_bar,
                                   double c_bar) {
    const std::size_t T = r.size();
    std::vector<double> vs(T);
    auto value_at = [&](std::size_t i) { return i < T ? v[i] : bootstrap; };
    for (std::size_t t = 0; t < T; ++t) {
        double acc = value_at(t);
        double discount = 1.0;
        double cprod = 1.0;
        for (std::size_t s = t; s < T; ++s) {
            const double ratio = std::exp(pi[s] - mu[s]);
            const double rho = std::min(rho_bar, ratio);
            acc += discount * cprod * rho * (r[s] + gamma * value_at(s + 1) - value_at(s));
            discount *= gamma;
            cprod *= std::min(c_bar, ratio);
        }
        vs[t] = acc;
    }
    return vs;
}

double nstep_return(const std::vector<double>& r, std::size_t t, double gamma, double bootstrap) {
    double acc = 0, d = 1.0;
    for (std::size_t s = t; s < r.size(); ++s) {
        acc += d * r[s];
        d *= gamma;
    }
    return acc + d * bootstrap;
}

}  // namespace

TEST_CASE("on-policy v-trace degenerates to n-step returns") {
    Rng rng(2024);
    for (int iter = 0; iter < 100; ++iter) {
        const std::size_t T = 1 + rng.below(12);
        std::vector<double> r(T), v(T), lp(T);
        for (std::size_t t = 0; t < T; ++t) {
            r[t] = rng.range(-2.0, 2.0);
            v[t] = rng.range(-2.0, 2.0);
            lp[t] = rng.range(-3.0, 0.0);
        }
        const double gamma = rng.uniform();
        const double bootstrap = rng.range(-1.0, 1.0);
        auto out = vtrace_targets(r, v, bootstrap, lp, lp, gamma, 1.0, 1.0);
        REQUIRE(out.vs.size() == T);
        CHECK_THAT(out.mean_ratio, Catch::Matchers::WithinAbs(1.0, 1e-12));
        for (std::size_t t = 0; t < T; ++t) {
            const double expect = nstep_return(r, t, gamma, bootstrap);
            CHECK(std::abs(out.vs[t] - expect) < 1e-10);
            // advantage likewise collapses to the n-step advantage
            const double next = t + 1 < T ? nstep_return(r, t + 1, gamma, bootstrap) : bootstrap;
            CHECK(std::abs(out.pg_advantages[t] - (r[t] + gamma * next - v[t])) < 1e-10);
        }
    }
}

TEST_CASE("single step with gamma 0") {
    auto out = vtrace_targets({2.0}, {0.5}, 99.0, {-1.0}, {-1.0}, 0.0, 1.0, 1.0);
    CHECK_THAT(out.vs[0], Catch::Matchers::WithinAbs(2.0, 1e-12));
    CHECK_THAT(out.pg_advantages[0], Catch::Matchers::WithinAbs(1.5, 1e-12));
}

TEST_CASE("off-policy targets match the forward-sum oracle") {
    Rng rng(555);
    for (int iter = 0; iter < 200; ++iter) {
        const std::size_t T = 1 + rng.below(8);
        std::vector<double> r(T), v(T), mu(T), pi(T);
        for (std::size_t t = 0; t < T; ++t) {
            r[t] = rng.range(-2.0, 2.0);
            v[t] = rng.range(-2.0, 2.0);
            mu[t] = rng.range(-3.0, 0.0);
            pi[t] = rng.range(-3.0, 0.0);
        }
        const double gamma = 0.99;
        const double bootstrap = rng.range(-1.0, 1.0);
        for (auto [rho_bar, c_bar] : {std::pair{1.0, 1.0}, {2.0, 1.5}, {0.5, 0.5}}) {
            auto out = vtrace_targets(r, v, bootstrap, mu, pi, gamma, rho_bar, c_bar);
            auto ref = forward_oracle(r, v, bootstrap, mu, pi, gamma, rho_bar, c_bar);
            for (std::size_t t = 0; t < T; ++t)
                CHECK(std::abs(out.vs[t] - ref[t]) < 1e-10);
        }
    }
}

TEST_CASE("clipping caps the importance weights") {
    // target much more confident than behavior: ratio e^2 ~ 7.39, clipped at 1
    auto clipped = vtrace_targets({1.0}, {0.0}, 0.0, {-2.5}, {-0.5}, 0.9, 1.0, 1.0);
    auto unclipped = vtrace_targets({1.0}, {0.0}, 0.0, {-2.5}, {-0.5}, 0.9, 10.0, 10.0);
    CHECK(clipped.vs[0] == 1.0);  // rho clipped to 1
    CHECK(unclipped.vs[0] > 7.0);
    CHECK_THAT(clipped.mean_ratio, Catch::Matchers::WithinRel(std::exp(2.0), 1e-12));
}

TEST_CASE("length mismatch throws") {
    CHECK_THROWS_AS(vtrace_targets({1.0, 2.0}, {0.0}, 0.0, {0.0, 0.0}, {0.0, 0.0}, 0.9, 1.0, 1.0),
                    std::invalid_argument);
}
