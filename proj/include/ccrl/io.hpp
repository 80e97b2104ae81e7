#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccrl/harness.hpp"
#include "ccrl/learner.hpp"

namespace ccrl {

// Flat key=value config file (same grammar as scenario files).
inline std::map<std::string, std::string> parse_flat_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::map<std::string, std::string> out;
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
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
        while (!val.empty() && (val.front() == ' ' || val.front() == '\t')) val.erase(val.begin());
        out[key] = val;
    }
    return out;
}

inline void write_eval_csv(const std::string& path, const std::vector<EvalRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "scenario,run,throughput_mbps,p95_delay_ms,return\n";
    for (const auto& r : rows)
        out << r.scenario << ',' << (r.run < 0 ? std::string("mean") : std::to_string(r.run)) << ','
            << r.throughput_mbps << ',' << r.p95_delay_ms << ',' << r.episodic_return << '\n';
}

inline void write_stats_csv(const std::string& path, const EpisodeStats& stats) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "time_ms,cum_bytes,cwnd_mss,reward\n";
    for (const auto& r : stats.rows)
        out << r.time_ms << ',' << r.cum_bytes << ',' << r.cwnd_mss << ',' << r.reward << '\n';
}

inline void write_trace_csv(const std::string& path, const std::vector<TraceEntry>& trace) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "time_us,event,seq,bytes,cwnd_mss,inflight_bytes\n";
    for (const auto& e : trace)
        out << e.t << ',' << e.type << ',' << e.seq << ',' << e.bytes << ',' << e.cwnd_mss << ','
            << e.inflight_bytes << '\n';
}

inline void append_curve_row(std::ofstream& out, const TrainProgressRow& r) {
    out << r.step << ',' << r.episode << ',' << r.actor_id << ',' << r.scenario << ','
        << r.episodic_return << ',' << r.policy_loss << ',' << r.value_loss << ',' << r.entropy
        << ',' << r.mean_ratio << ',' << r.snapshot_version << '\n';
}

constexpr const char* kCurveHeader =
    "step,episode,actor_id,scenario,return,policy_loss,value_loss,entropy,mean_ratio,snapshot_version";

// Every command writes exactly one manifest into its output directory; the
// echoed config is enough to reproduce single-actor runs.
class Manifest {
public:
    Manifest(std::string command, std::string out_dir)
        : out_dir_(std::move(out_dir)), start_(std::chrono::system_clock::now()) {
        doc_["command"] = std::move(command);
        std::filesystem::create_directories(out_dir_);
    }

    nlohmann::json& config() { return doc_["config"]; }
    void add_output(const std::string& path) { doc_["outputs"].push_back(path); }
    void set_seed(std::uint64_t seed) { doc_["seed"] = seed; }
    void set_virtual_time_us(std::int64_t t) { doc_["virtual_time_us"] = t; }

    void finish() {
        const auto end = std::chrono::system_clock::now();
        doc_["wall_time_s"] =
            std::chrono::duration_cast<std::chrono::milliseconds>(end - start_).count() / 1000.0;
        doc_["code_version"] = checkpoint::kVersion;
        std::ofstream out(out_dir_ + "/manifest.json");
        if (!out) throw std::runtime_error("cannot write manifest in " + out_dir_);
        out << doc_.dump(2) << '\n';
    }

private:
    std::string out_dir_;
    nlohmann::json doc_;
    std::chrono::system_clock::time_point start_;
};

}  // namespace ccrl
