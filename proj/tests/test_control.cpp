#include <catch2/catch_amalgamated.hpp>

#include "ccrl/control.hpp"

using namespace ccrl;

namespace {

// Independent clip/update reference for the exhaustive check.
int reference_apply(int cwnd, const ActionOp& op) {
    double v = cwnd;
    switch (op.kind) {
        case ActionOp::Kind::Keep: break;
        case ActionOp::Kind::Div: v = std::floor(static_cast<double>(cwnd) / op.n); break;
        case ActionOp::Kind::Sub: v = cwnd - op.n; break;
        case ActionOp::Kind::Add: v = cwnd + op.n; break;
        case ActionOp::Kind::Mul: v = static_cast<double>(cwnd) * op.n; break;
    }
    return static_cast<int>(std::min(2000.0, std::max(2.0, v)));
}

}  // namespace

TEST_CASE("default action space parses") {
    auto space = parse_action_space("0,/2,-10,+10,*2");
    REQUIRE(space.size() == 5);
    CHECK(space.ops[0].kind == ActionOp::Kind::Keep);
    CHECK(space.ops[1].kind == ActionOp::Kind::Div);
    CHECK(space.ops[1].n == 2);
    CHECK(space.ops[2].kind == ActionOp::Kind::Sub);
    CHECK(space.ops[2].n == 10);
    CHECK(space.ops[3].kind == ActionOp::Kind::Add);
    CHECK(space.ops[4].kind == ActionOp::Kind::Mul);
}

TEST_CASE("minimal action space") {
    auto space = parse_action_space("0");
    CHECK(space.size() == 1);
}

TEST_CASE("action space parse errors name the token") {
    CHECK_THROWS_WITH(parse_action_space("0,/0"), Catch::Matchers::ContainsSubstring("token 1"));
    CHECK_THROWS(parse_action_space(""));
    CHECK_THROWS(parse_action_space("0,,+1"));
    CHECK_THROWS(parse_action_space("x5"));
    CHECK_THROWS(parse_action_space("+"));
    CHECK_THROWS(parse_action_space("*2.5"));
}

TEST_CASE("action space round-trips through render") {
    for (const char* cfg : {"0,/2,-10,+10,*2", "0", "+1,-1,*3,/4"}) {
        auto space = parse_action_space(cfg);
        CHECK(space.render() == cfg);
        auto again = parse_action_space(space.render());
        CHECK(again.render() == space.render());
    }
}

TEST_CASE("apply_action examples") {
    CHECK(apply_action(10, {ActionOp::Kind::Div, 2}) == 5);
    CHECK(apply_action(10, {ActionOp::Kind::Sub, 10}) == 2);    // clip floor
    CHECK(apply_action(1500, {ActionOp::Kind::Mul, 2}) == 2000);  // clip ceiling
    CHECK(apply_action(10, {ActionOp::Kind::Keep, 1}) == 10);
}

TEST_CASE("apply_action matches brute-force reference exhaustively") {
    auto space = parse_action_space(kDefaultActionConfig);
    for (int cwnd = kCwndFloorMss; cwnd <= kCwndCeilMss; ++cwnd)
        for (const auto& op : space.ops)
            REQUIRE(apply_action(cwnd, op) == reference_apply(cwnd, op));
}

TEST_CASE("reward formula") {
    RewardParams p;
    CHECK_THAT(compute_reward({2.0}, {40.0}, p), Catch::Matchers::WithinAbs(-6.0, 1e-12));
    CHECK(compute_reward({}, {}, p) == 0.0);
    CHECK_THAT(compute_reward({0.5}, {0.0}, p), Catch::Matchers::WithinAbs(0.5, 1e-12));
}

TEST_CASE("reward monotonicity") {
    RewardParams p;
    CHECK(compute_reward({2.0}, {10.0}, p) > compute_reward({1.0}, {10.0}, p));
    CHECK(compute_reward({2.0}, {10.0}, p) > compute_reward({2.0}, {20.0}, p));
}
