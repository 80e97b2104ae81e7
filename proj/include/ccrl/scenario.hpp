#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccrl {

struct PolicerConfig {
    double rate_bps = 0;
    std::int64_t burst_bytes = 0;
};

// Emulated link parameters for one episode.
struct ScenarioConfig {
    std::string name = "custom";
    double bandwidth_bps = 12e6;
    double one_way_delay_ms = 30.0;
    std::int64_t buffer_bytes = 90000;
    double loss_rate = 0.0;
    std::optional<PolicerConfig> policer;
    double duration_s = 30.0;
    std::uint64_t seed = 1;

    void validate() const {
        if (bandwidth_bps <= 0) throw std::invalid_argument("bandwidth_bps must be > 0");
        if (one_way_delay_ms < 0) throw std::invalid_argument("one_way_delay_ms must be >= 0");
        if (buffer_bytes < 1460) throw std::invalid_argument("buffer_bytes must hold at least one MSS");
        if (loss_rate < 0 || loss_rate >= 1) throw std::invalid_argument("loss_rate must be in [0,1)");
        if (duration_s <= 0) throw std::invalid_argument("duration_s must be > 0");
        if (policer && (policer->rate_bps <= 0 || policer->burst_bytes <= 0))
            throw std::invalid_argument("policer rate and burst must be > 0");
    }
};

// Flat key=value scenario file, one key per line, keys exactly the field
// names. '#' starts a comment. Unknown keys are rejected.
inline ScenarioConfig parse_scenario_text(const std::string& text, const std::string& name = "custom") {
    ScenarioConfig cfg;
    cfg.name = name;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("scenario line " + std::to_string(lineno) + ": expected key=value");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
        while (!val.empty() && (val.front() == ' ' || val.front() == '\t')) val.erase(val.begin());
        try {
            if (key == "bandwidth_bps") cfg.bandwidth_bps = std::stod(val);
            else if (key == "one_way_delay_ms") cfg.one_way_delay_ms = std::stod(val);
            else if (key == "buffer_bytes") cfg.buffer_bytes = std::stoll(val);
            else if (key == "loss_rate") cfg.loss_rate = std::stod(val);
            else if (key == "duration_s") cfg.duration_s = std::stod(val);
            else if (key == "seed") cfg.seed = std::stoull(val);
            else if (key == "policer") {
                auto comma = val.find(',');
                if (comma == std::string::npos)
                    throw std::invalid_argument("policer expects rate_bps,burst_bytes");
                PolicerConfig p;
                p.rate_bps = std::stod(val.substr(0, comma));
                p.burst_bytes = std::stoll(val.substr(comma + 1));
                cfg.policer = p;
            } else {
                throw std::invalid_argument("unknown scenario key '" + key + "'");
            }
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception&) {
            throw std::invalid_argument("scenario line " + std::to_string(lineno) + ": bad value for " + key);
        }
    }
    cfg.validate();
    return cfg;
}

inline ScenarioConfig load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    auto slash = path.find_last_of('/');
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    auto dot = base.find_last_of('.');
    if (dot != std::string::npos) base.erase(dot);
    return parse_scenario_text(ss.str(), base);
}

// Bundled scenarios. Representative single-bottleneck links spanning slow
// cellular to fast long-haul paths, plus one token-bucket policer.
inline const std::vector<ScenarioConfig>& builtin_scenarios() {
    static const std::vector<ScenarioConfig> all = [] {
        std::vector<ScenarioConfig> v;
        auto add = [&](const std::string& name, double bw, double owd, std::int64_t buf,
                       double loss = 0.0, std::optional<PolicerConfig> pol = std::nullopt) {
            ScenarioConfig c;
            c.name = name;
            c.bandwidth_bps = bw;
            c.one_way_delay_ms = owd;
            c.buffer_bytes = buf;
            c.loss_rate = loss;
            c.policer = pol;
            v.push_back(c);
        };
        add("cellular_0p5mbps", 0.5e6, 75.0, 30000);
        add("dsl_2mbps", 2e6, 50.0, 50000);
        add("wifi_6mbps", 6e6, 15.0, 45000);
        add("cable_12mbps", 12e6, 30.0, 90000);
        add("metro_50mbps", 50e6, 5.0, 125000);
        add("longhaul_100mbps", 100e6, 150.0, 3750000);
        add("lossy_12mbps", 12e6, 30.0, 90000, 0.01);
        add("policed_10mbps", 20e6, 20.0, 100000, 0.0, PolicerConfig{10e6, 60000});
        for (auto& c : v) c.validate();
        return v;
    }();
    return all;
}

inline ScenarioConfig find_scenario(const std::string& name_or_path) {
    for (const auto& c : builtin_scenarios())
        if (c.name == name_or_path) return c;
    return load_scenario_file(name_or_path);
}

}  // namespace ccrl
