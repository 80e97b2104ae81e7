// ccrl-bench: congestion-control RL workbench CLI.
//
// Subcommands: train, eval, compare-blocking, scenarios.
// Exit codes: 0 success, 2 config error, 3 runtime error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "ccrl/io.hpp"
#include "ccrl/learner.hpp"

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(tok);
    return out;
}

std::vector<ccrl::ScenarioConfig> resolve_scenarios(const std::string& spec) {
    std::vector<ccrl::ScenarioConfig> out;
    if (spec == "all" || spec.empty()) return ccrl::builtin_scenarios();
    for (const auto& name : split_csv(spec)) out.push_back(ccrl::find_scenario(name));
    return out;
}

// policy spec: fixed[:N] | aimd | random | path to checkpoint
std::unique_ptr<ccrl::PolicyDriver> make_policy(const std::string& spec,
                                                const ccrl::ActionSpace& actions, int k,
                                                bool greedy) {
    if (spec == "aimd") return std::make_unique<ccrl::AimdPolicy>();
    if (spec == "random") return std::make_unique<ccrl::RandomPolicy>(actions.size());
    if (spec.rfind("fixed", 0) == 0) {
        int cwnd = 40;
        auto colon = spec.find(':');
        if (colon != std::string::npos) cwnd = std::stoi(spec.substr(colon + 1));
        return std::make_unique<ccrl::FixedCwndPolicy>(cwnd);
    }
    auto params = std::make_shared<ccrl::ModelParams>(ccrl::checkpoint::load(spec));
    const int expected_state = ccrl::kAggregateStateLen + k * (actions.size() + 1);
    if (params->cfg.action_count != actions.size())
        throw ConfigError("checkpoint action count " + std::to_string(params->cfg.action_count) +
                          " does not match --actions (|A|=" + std::to_string(actions.size()) + ")");
    if (params->cfg.state_len != expected_state)
        throw ConfigError("checkpoint state length " + std::to_string(params->cfg.state_len) +
                          " does not match --k " + std::to_string(k) + " (expected " +
                          std::to_string(expected_state) + ")");
    return std::make_unique<ccrl::NeuralPolicy>(params, greedy);
}

struct GlobalOpts {
    std::uint64_t seed = 1;
    std::string actions = ccrl::kDefaultActionConfig;
    int k = 20;
    double beta = 0.2;
    double delta_ms = 30.0;
    std::string mode = "nonblocking";
    std::string out_dir = "out";
};

ccrl::AgentMode make_mode(const GlobalOpts& g) {
    ccrl::AgentMode m;
    if (g.mode == "blocking")
        m.kind = ccrl::AgentMode::Kind::Blocking;
    else if (g.mode == "nonblocking")
        m.kind = ccrl::AgentMode::Kind::NonBlocking;
    else
        throw ConfigError("--mode must be blocking or nonblocking");
    m.delta_ms = g.delta_ms;
    m.validate();
    return m;
}

int cmd_scenarios_list() {
    std::cout << "name,bandwidth_bps,one_way_delay_ms,buffer_bytes,loss_rate,policer,duration_s\n";
    for (const auto& s : ccrl::builtin_scenarios()) {
        std::cout << s.name << ',' << s.bandwidth_bps << ',' << s.one_way_delay_ms << ','
                  << s.buffer_bytes << ',' << s.loss_rate << ',';
        if (s.policer)
            std::cout << s.policer->rate_bps << '/' << s.policer->burst_bytes;
        else
            std::cout << "none";
        std::cout << ',' << s.duration_s << '\n';
    }
    return 0;
}

int cmd_compare_blocking(const GlobalOpts& g, const std::string& scenario_name,
                         const std::string& policy_spec, const std::string& deltas_csv,
                         double duration_s) {
    auto scenario = ccrl::find_scenario(scenario_name);
    scenario.duration_s = duration_s;
    const auto actions = ccrl::parse_action_space(g.actions);

    std::vector<double> deltas;
    for (const auto& d : split_csv(deltas_csv)) deltas.push_back(std::stod(d));

    ccrl::Manifest manifest("compare-blocking", g.out_dir);
    manifest.set_seed(g.seed);
    manifest.config() = {{"scenario", scenario_name}, {"policy", policy_spec},
                         {"deltas_ms", deltas},       {"duration_s", duration_s},
                         {"actions", g.actions},      {"k", g.k},
                         {"beta", g.beta},            {"seed", g.seed}};

    struct Curve {
        std::string label;
        std::int64_t total_bytes;
    };
    std::vector<Curve> curves;

    auto run_one = [&](ccrl::AgentMode::Kind kind, double delta) {
        ccrl::EpisodeConfig ec;
        ec.k = g.k;
        ec.actions = actions;
        ec.mode.kind = kind;
        ec.mode.delta_ms = delta;
        ec.mode.validate();
        ec.reward.beta = g.beta;
        ec.seed = g.seed;
        ec.keep_trace = true;
        auto policy = make_policy(policy_spec, actions, g.k, /*greedy=*/true);
        auto res = ccrl::run_episode(scenario, *policy, ec);
        std::string label = (kind == ccrl::AgentMode::Kind::Blocking ? "blocking" : "nonblocking");
        label += "_d" + std::to_string(static_cast<int>(delta));
        const std::string path = g.out_dir + "/curve_" + label + ".csv";
        ccrl::write_stats_csv(path, res.stats);
        manifest.add_output(path);
        curves.push_back({label, res.trajectory.total_bytes_delivered});
        return res.trajectory.total_bytes_delivered;
    };

    const std::int64_t nb_bytes = run_one(ccrl::AgentMode::Kind::NonBlocking, g.delta_ms);
    for (double d : deltas) run_one(ccrl::AgentMode::Kind::Blocking, d);

    const std::string summary_path = g.out_dir + "/summary.csv";
    std::ofstream summary(summary_path);
    summary << "mode,total_bytes,gap_vs_nonblocking_pct\n";
    for (const auto& c : curves) {
        const double gap = 100.0 * (1.0 - static_cast<double>(c.total_bytes) /
                                              static_cast<double>(nb_bytes));
        summary << c.label << ',' << c.total_bytes << ',' << gap << '\n';
        std::cout << c.label << ": " << c.total_bytes << " bytes (gap "
                  << gap << "%)\n";
    }
    manifest.add_output(summary_path);
    manifest.finish();
    return 0;
}

int cmd_eval(const GlobalOpts& g, const std::string& policy_spec, const std::string& scenarios_spec,
             int runs, double duration_s) {
    const auto actions = ccrl::parse_action_space(g.actions);
    auto scenarios = resolve_scenarios(scenarios_spec);
    for (auto& s : scenarios) s.duration_s = duration_s;

    ccrl::Manifest manifest("eval", g.out_dir);
    manifest.set_seed(g.seed);
    manifest.config() = {{"policy", policy_spec}, {"scenarios", scenarios_spec}, {"runs", runs},
                         {"actions", g.actions},  {"k", g.k},
                         {"beta", g.beta},        {"delta_ms", g.delta_ms},
                         {"mode", g.mode},        {"seed", g.seed}};

    ccrl::EpisodeConfig ec;
    ec.k = g.k;
    ec.actions = actions;
    ec.mode = make_mode(g);
    ec.reward.beta = g.beta;
    ec.seed = g.seed;
    auto policy = make_policy(policy_spec, actions, g.k, /*greedy=*/true);
    auto rows = ccrl::evaluate(scenarios, *policy, ec, runs);
    const std::string path = g.out_dir + "/eval.csv";
    ccrl::write_eval_csv(path, rows);
    manifest.add_output(path);
    manifest.finish();
    for (const auto& r : rows)
        if (r.run < 0)
            std::cout << r.scenario << ": " << r.throughput_mbps << " Mbps, p95 delay "
                      << r.p95_delay_ms << " ms, return " << r.episodic_return << '\n';
    return 0;
}

int cmd_train(const GlobalOpts& g, const std::string& config_path, std::int64_t total_steps,
              int num_actors, double lr, bool no_lstm, const std::string& scenarios_spec) {
    ccrl::TrainConfig cfg;
    cfg.seed = g.seed;
    cfg.k = g.k;
    cfg.beta = g.beta;
    cfg.actions = g.actions;
    cfg.mode = make_mode(g);
    std::string scen_spec = scenarios_spec;

    if (!config_path.empty()) {
        for (const auto& [key, val] : ccrl::parse_flat_config(config_path)) {
            if (key == "num_actors") cfg.num_actors = std::stoi(val);
            else if (key == "total_steps") cfg.total_steps = std::stoll(val);
            else if (key == "gamma") cfg.gamma = std::stod(val);
            else if (key == "rho_bar") cfg.rho_bar = std::stod(val);
            else if (key == "c_bar") cfg.c_bar = std::stod(val);
            else if (key == "entropy_coef") cfg.entropy_coef = std::stod(val);
            else if (key == "value_coef") cfg.value_coef = std::stod(val);
            else if (key == "learning_rate") cfg.learning_rate = std::stod(val);
            else if (key == "k") cfg.k = std::stoi(val);
            else if (key == "beta") cfg.beta = std::stod(val);
            else if (key == "actions") cfg.actions = val;
            else if (key == "scenarios") scen_spec = val;
            else if (key == "seed") cfg.seed = std::stoull(val);
            else if (key == "delta_ms") cfg.mode.delta_ms = std::stod(val);
            else if (key == "mode") cfg.mode.kind = val == "blocking"
                                                       ? ccrl::AgentMode::Kind::Blocking
                                                       : ccrl::AgentMode::Kind::NonBlocking;
            else if (key == "fc1") cfg.model.fc1 = std::stoi(val);
            else if (key == "fc2") cfg.model.fc2 = std::stoi(val);
            else if (key == "hidden") cfg.model.hidden = std::stoi(val);
            else if (key == "use_lstm") cfg.model.use_lstm = val == "1" || val == "true";
            else if (key == "max_batch") cfg.max_batch = std::stoi(val);
            else if (key == "checkpoint_every") cfg.checkpoint_every = std::stoi(val);
            else throw ConfigError("unknown config key '" + key + "' in " + config_path);
        }
    }
    if (total_steps > 0) cfg.total_steps = total_steps;
    if (num_actors > 0) cfg.num_actors = num_actors;
    if (lr > 0) cfg.learning_rate = lr;
    if (no_lstm) cfg.model.use_lstm = false;
    cfg.scenarios = resolve_scenarios(scen_spec);
    for (auto& s : cfg.scenarios) s.validate();

    ccrl::Manifest manifest("train", g.out_dir);
    manifest.set_seed(cfg.seed);
    std::vector<std::string> scen_names;
    for (const auto& s : cfg.scenarios) scen_names.push_back(s.name);
    manifest.config() = {{"num_actors", cfg.num_actors},
                         {"total_steps", cfg.total_steps},
                         {"gamma", cfg.gamma},
                         {"rho_bar", cfg.rho_bar},
                         {"c_bar", cfg.c_bar},
                         {"entropy_coef", cfg.entropy_coef},
                         {"value_coef", cfg.value_coef},
                         {"learning_rate", cfg.learning_rate},
                         {"k", cfg.k},
                         {"beta", cfg.beta},
                         {"actions", cfg.actions},
                         {"scenarios", scen_names},
                         {"seed", cfg.seed},
                         {"delta_ms", cfg.mode.delta_ms},
                         {"mode", cfg.mode.kind == ccrl::AgentMode::Kind::Blocking ? "blocking"
                                                                                   : "nonblocking"},
                         {"fc1", cfg.model.fc1},
                         {"fc2", cfg.model.fc2},
                         {"hidden", cfg.model.hidden},
                         {"use_lstm", cfg.model.use_lstm}};

    const std::string curve_path = g.out_dir + "/curve.csv";
    std::ofstream curve(curve_path);
    curve << ccrl::kCurveHeader << '\n';
    auto result = ccrl::train(
        cfg, [&](const ccrl::TrainProgressRow& row) { ccrl::append_curve_row(curve, row); },
        [&](const ccrl::ModelParams& params, std::uint64_t update) {
            ccrl::ModelParams copy = params;
            ccrl::checkpoint::save(g.out_dir + "/checkpoint_" + std::to_string(update) + ".bin",
                                   copy);
        });
    const std::string ckpt_path = g.out_dir + "/checkpoint_final.bin";
    ccrl::checkpoint::save(ckpt_path, result.params);
    manifest.add_output(curve_path);
    manifest.add_output(ckpt_path);
    manifest.finish();
    std::cout << "trained " << result.env_steps << " env steps, " << result.updates
              << " updates; final checkpoint: " << ckpt_path << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"congestion-control RL workbench"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--seed", g.seed, "base RNG seed");
    app.add_option("--actions", g.actions, "action space config, e.g. \"0,/2,-10,+10,*2\"");
    app.add_option("--k", g.k, "action history length");
    app.add_option("--beta", g.beta, "reward delay trade-off");
    app.add_option("--delta-ms", g.delta_ms, "policy lookup delay in ms");
    app.add_option("--mode", g.mode, "blocking or nonblocking");
    app.add_option("--out", g.out_dir, "output directory");

    auto* sc_train = app.add_subcommand("train", "train a policy");
    std::string train_config;
    std::int64_t train_steps = 0;
    int train_actors = 0;
    double train_lr = 0;
    bool no_lstm = false;
    std::string train_scenarios = "all";
    sc_train->add_option("--config", train_config, "flat key=value config file");
    sc_train->add_option("--total-steps", train_steps, "environment step budget");
    sc_train->add_option("--num-actors", train_actors, "parallel actors");
    sc_train->add_option("--lr", train_lr, "learning rate");
    sc_train->add_flag("--no-lstm", no_lstm, "replace the LSTM with a pass-through");
    sc_train->add_option("--scenarios", train_scenarios, "comma list of scenario names or files");

    auto* sc_eval = app.add_subcommand("eval", "evaluate a policy or baseline");
    std::string eval_policy = "aimd";
    std::string eval_scenarios = "all";
    int eval_runs = 3;
    double eval_duration = 30.0;
    sc_eval->add_option("--policy", eval_policy, "aimd | random | fixed[:N] | checkpoint path");
    sc_eval->add_option("--scenarios", eval_scenarios, "comma list of scenario names or files");
    sc_eval->add_option("--runs", eval_runs, "episodes per scenario");
    sc_eval->add_option("--duration", eval_duration, "episode length in seconds");

    auto* sc_cmp = app.add_subcommand("compare-blocking", "blocking vs non-blocking comparison");
    std::string cmp_scenario = "cable_12mbps";
    std::string cmp_policy = "aimd";
    std::string cmp_deltas = "25,50";
    double cmp_duration = 60.0;
    sc_cmp->add_option("--scenario", cmp_scenario, "scenario name or file");
    sc_cmp->add_option("--policy", cmp_policy, "aimd | random | fixed[:N] | checkpoint path");
    sc_cmp->add_option("--deltas", cmp_deltas, "comma list of blocking deltas in ms");
    sc_cmp->add_option("--duration", cmp_duration, "episode length in seconds");

    auto* sc_scen = app.add_subcommand("scenarios", "scenario utilities");
    auto* sc_scen_list = sc_scen->add_subcommand("list", "list bundled scenarios");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*sc_train)
            return cmd_train(g, train_config, train_steps, train_actors, train_lr, no_lstm,
                             train_scenarios);
        if (*sc_eval) return cmd_eval(g, eval_policy, eval_scenarios, eval_runs, eval_duration);
        if (*sc_cmp) return cmd_compare_blocking(g, cmp_scenario, cmp_policy, cmp_deltas, cmp_duration);
        if (*sc_scen) {
            if (*sc_scen_list) return cmd_scenarios_list();
            std::cerr << "scenarios: expected a subcommand (list)\n";
            return 2;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 2;
}
