#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lbft/lbft.hpp"

namespace fs = std::filesystem;

namespace {

std::string default_out_dir() {
    const char* env = std::getenv("LBFT_OUT_DIR");
    return env && *env ? env : ".";
}

lbft::Json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    lbft::Json j;
    in >> j;
    return j;
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            std::optional<double> horizon, std::optional<std::string> pattern,
            const std::string& out_dir, bool no_trace) {
    lbft::ScenarioConfig cfg = lbft::scenario_from_json(load_json(config_path));
    if (seed) cfg.seed = *seed;
    if (horizon) cfg.horizon = *horizon;
    if (pattern) cfg.network.pattern = lbft::pattern_from_string(*pattern, "network.pattern");
    cfg.validate();

    lbft::SimulationTrace trace = lbft::run_scenario(cfg);
    lbft::Json metrics = lbft::metrics_json(trace);

    fs::create_directories(out_dir);
    if (!no_trace) {
        std::ofstream tf(fs::path(out_dir) / (cfg.name + ".trace.jsonl"), std::ios::binary);
        lbft::write_trace(trace, tf);
    }
    std::ofstream mf(fs::path(out_dir) / (cfg.name + ".metrics.json"), std::ios::binary);
    mf << metrics.dump(2) << "\n";

    bool violation = metrics["safety"] == "violation";
    std::cout << "scenario=" << cfg.name << " seed=" << cfg.seed
              << " committed_height=" << metrics["committed_height"]
              << " blocks=" << metrics["blocks"]["honest"].get<std::uint64_t>() +
                                 metrics["blocks"]["adversarial"].get<std::uint64_t>()
              << " safety=" << metrics["safety"].get<std::string>() << "\n";
    if (violation && !cfg.negative_control) {
        std::cerr << "safety violation in a non-negative-control scenario\n";
        return 2;
    }
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_path, unsigned jobs) {
    lbft::SweepSpec spec = lbft::sweep_from_json(load_json(config_path));
    auto cells = lbft::run_sweep(spec, jobs);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + out_path);
    for (const auto& cell : cells) out << cell.to_json().dump() << "\n";
    std::cout << "cells=" << cells.size() << " seeds_per_cell=" << spec.seeds << " -> " << out_path
              << "\n";
    return 0;
}

int cmd_check(double beta, double lambda, double delta, double slack) {
    lbft::LivenessInputs in{beta, lambda, delta, slack, 1.0};
    auto v = lbft::liveness_condition(in);
    std::cout << "eta = " << v.eta_value << "\n";
    std::cout << "eta^2(1-beta) = " << v.lhs << "\n";
    std::cout << "(1+slack)beta = " << v.rhs << "\n";
    std::cout << "margin = " << v.margin << "\n";
    std::cout << "liveness condition " << (v.holds ? "holds" : "fails") << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"leaderless BFT protocol simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = default_out_dir();
    std::string out_file;
    std::optional<std::uint64_t> seed;
    std::optional<double> horizon;
    std::optional<std::string> pattern;
    bool no_trace = false;
    unsigned jobs = 0;
    double beta = 0.0, lambda = 1.0, delta = 0.1, slack = 0.1;

    auto* run = app.add_subcommand("run", "execute one scenario");
    run->add_option("--config", config_path, "scenario config (JSON)")->required();
    run->add_option("--seed", seed, "seed override");
    run->add_option("--horizon", horizon, "horizon override");
    run->add_option("--pattern", pattern, "transmission pattern override");
    run->add_option("--out", out_dir, "output directory (default $LBFT_OUT_DIR or .)");
    run->add_flag("--no-trace", no_trace, "skip the trace file, write metrics only");

    auto* sweep = app.add_subcommand("sweep", "run a parameter grid");
    sweep->add_option("--config", config_path, "sweep spec (JSON)")->required();
    sweep->add_option("--out", out_file, "output JSONL file")->required();
    sweep->add_option("--jobs", jobs, "worker threads (default: hardware)");

    auto* check = app.add_subcommand("check", "evaluate the closed-form liveness condition");
    check->add_option("--beta", beta, "adversarial proposer fraction")->required();
    check->add_option("--lambda", lambda, "total proof rate")->required();
    check->add_option("--delta", delta, "post-GST delay bound")->required();
    check->add_option("--slack", slack, "condition slack in (0,1)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, seed, horizon, pattern, out_dir, no_trace);
        if (sweep->parsed()) return cmd_sweep(config_path, out_file, jobs);
        if (check->parsed()) return cmd_check(beta, lambda, delta, slack);
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    return 0;
}
