#pragma once

#include <cmath>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "lbft/analysis.hpp"
#include "lbft/detail/parallel.hpp"
#include "lbft/scenario.hpp"
#include "lbft/simnet.hpp"

namespace lbft {

// Parameter sweep (schema "lbft-sweep/1"): a base scenario, dotted-path
// override axes, and a seed range. Every cell re-validates through the
// fail-closed scenario parser.
struct SweepSpec {
    Json base;
    std::vector<std::pair<std::string, std::vector<Json>>> axes;
    std::uint32_t seeds = 1;
    std::uint64_t seed0 = 1;
};

inline SweepSpec sweep_from_json(const Json& j) {
    using detail::config_error;
    if (!j.is_object()) config_error("", "sweep spec must be a JSON object");
    detail::require_known_keys(j, "", {"schema", "base", "grid", "seeds", "seed0"});
    if (!j.contains("schema") || j["schema"] != "lbft-sweep/1")
        config_error("schema", "must be \"lbft-sweep/1\"");
    if (!j.contains("base")) config_error("base", "missing required field");
    if (!j.contains("grid") || !j["grid"].is_object()) config_error("grid", "must be an object");
    SweepSpec spec;
    spec.base = j["base"];
    for (auto it = j["grid"].begin(); it != j["grid"].end(); ++it) {
        if (!it.value().is_array() || it.value().empty())
            config_error("grid." + it.key(), "must be a non-empty array");
        spec.axes.emplace_back(it.key(), std::vector<Json>(it.value().begin(), it.value().end()));
    }
    spec.seeds = static_cast<std::uint32_t>(detail::get_uint(j, "", "seeds", false, 1));
    if (spec.seeds == 0) config_error("seeds", "must be >= 1");
    spec.seed0 = detail::get_uint(j, "", "seed0", false, 1);
    return spec;
}

inline void apply_override(Json& scenario, const std::string& dotted, const Json& value) {
    Json* cur = &scenario;
    std::size_t pos = 0;
    while (true) {
        std::size_t dot = dotted.find('.', pos);
        std::string key = dotted.substr(pos, dot == std::string::npos ? dot : dot - pos);
        if (dot == std::string::npos) {
            (*cur)[key] = value;
            return;
        }
        cur = &(*cur)[key];
        pos = dot + 1;
    }
}

struct CellStats {
    Json cell;  // axis -> value
    std::uint32_t runs = 0;
    double certified_rate_mean = 0.0, certified_rate_std = 0.0;
    double committed_rate_mean = 0.0, committed_rate_std = 0.0;
    double unique_fraction = 0.0;  // pooled over all runs in the cell
    double commit_latency_mean = 0.0;
    double msgs_per_certified_block = 0.0;
    double msgs_per_certified_vote = 0.0;
    double msgs_per_certified_qc = 0.0;
    std::uint32_t violations = 0;
    double eta_value = 0.0;
    double eta_sq = 0.0;

    Json to_json() const {
        Json j;
        j["cell"] = cell;
        j["runs"] = runs;
        j["certified_rate"] = {{"mean", certified_rate_mean}, {"std", certified_rate_std}};
        j["committed_rate"] = {{"mean", committed_rate_mean}, {"std", committed_rate_std}};
        j["unique_fraction"] = unique_fraction;
        j["commit_latency_mean"] = commit_latency_mean;
        j["messages_per_certified"] = {{"block", msgs_per_certified_block},
                                       {"vote", msgs_per_certified_vote},
                                       {"qc", msgs_per_certified_qc}};
        j["violations"] = violations;
        j["eta"] = eta_value;
        j["eta_sq"] = eta_sq;
        return j;
    }
};

inline std::vector<CellStats> run_sweep(const SweepSpec& spec, unsigned jobs = 0) {
    // expand cells in axis-major order
    std::size_t cell_count = 1;
    for (const auto& [path, values] : spec.axes) cell_count *= values.size();

    std::vector<Json> cell_cfgs(cell_count);
    std::vector<Json> cell_tags(cell_count);
    for (std::size_t c = 0; c < cell_count; ++c) {
        Json scenario = spec.base;
        Json tag;
        std::size_t rem = c;
        for (auto it = spec.axes.rbegin(); it != spec.axes.rend(); ++it) {
            const auto& [path, values] = *it;
            std::size_t idx = rem % values.size();
            rem /= values.size();
            apply_override(scenario, path, values[idx]);
            tag[path] = values[idx];
        }
        cell_cfgs[c] = std::move(scenario);
        cell_tags[c] = std::move(tag);
    }

    struct RunOut {
        double certified_rate = 0.0;
        double committed_rate = 0.0;
        std::uint64_t honest = 0;
        std::uint64_t unique = 0;
        double latency_mean = 0.0;
        std::uint64_t certified_blocks = 0;
        PerBlockMsgCount certified_msgs;
        bool violation = false;
    };
    std::vector<RunOut> outs(cell_count * spec.seeds);

    detail::parallel_for(cell_count * spec.seeds, jobs, [&](std::size_t i) {
        std::size_t c = i / spec.seeds;
        std::uint32_t s = static_cast<std::uint32_t>(i % spec.seeds);
        ScenarioConfig cfg = scenario_from_json(cell_cfgs[c]);
        cfg.seed = spec.seed0 + s;
        SimulationTrace trace = run_scenario(cfg);
        ChainStats stats = chain_stats(trace);
        RunOut& out = outs[i];
        out.certified_rate = stats.certified_rate;
        out.committed_rate = stats.committed_rate;
        out.honest = stats.honest_productions;
        out.unique = stats.unique_honest_blocks;
        out.latency_mean = stats.commit_latency_mean();
        for (const auto& [id, counts] : per_certified_block_counts(trace)) {
            ++out.certified_blocks;
            out.certified_msgs.block_sends += counts.block_sends;
            out.certified_msgs.vote_sends += counts.vote_sends;
            out.certified_msgs.qc_sends += counts.qc_sends;
        }
        out.violation = !safety_check(trace).ok;
    });

    std::vector<CellStats> cells(cell_count);
    for (std::size_t c = 0; c < cell_count; ++c) {
        CellStats& cell = cells[c];
        cell.cell = cell_tags[c];
        cell.runs = spec.seeds;
        ScenarioConfig cfg = scenario_from_json(cell_cfgs[c]);
        LivenessInputs inputs{cfg.beta, cfg.lambda, cfg.network.delta, 0.1, cfg.horizon};
        cell.eta_value = eta(inputs);
        cell.eta_sq = cell.eta_value * cell.eta_value;

        double cert_sum = 0.0, cert_sq = 0.0, com_sum = 0.0, com_sq = 0.0, lat_sum = 0.0;
        std::uint64_t honest = 0, unique = 0, cert_blocks = 0;
        PerBlockMsgCount msgs;
        for (std::uint32_t s = 0; s < spec.seeds; ++s) {
            const RunOut& out = outs[c * spec.seeds + s];
            cert_sum += out.certified_rate;
            cert_sq += out.certified_rate * out.certified_rate;
            com_sum += out.committed_rate;
            com_sq += out.committed_rate * out.committed_rate;
            lat_sum += out.latency_mean;
            honest += out.honest;
            unique += out.unique;
            cert_blocks += out.certified_blocks;
            msgs.block_sends += out.certified_msgs.block_sends;
            msgs.vote_sends += out.certified_msgs.vote_sends;
            msgs.qc_sends += out.certified_msgs.qc_sends;
            if (out.violation) ++cell.violations;
        }
        double n = spec.seeds;
        cell.certified_rate_mean = cert_sum / n;
        cell.certified_rate_std = std::sqrt(std::max(0.0, cert_sq / n - cell.certified_rate_mean * cell.certified_rate_mean));
        cell.committed_rate_mean = com_sum / n;
        cell.committed_rate_std = std::sqrt(std::max(0.0, com_sq / n - cell.committed_rate_mean * cell.committed_rate_mean));
        cell.commit_latency_mean = lat_sum / n;
        cell.unique_fraction = honest > 0 ? static_cast<double>(unique) / static_cast<double>(honest) : 0.0;
        if (cert_blocks > 0) {
            cell.msgs_per_certified_block = static_cast<double>(msgs.block_sends) / cert_blocks;
            cell.msgs_per_certified_vote = static_cast<double>(msgs.vote_sends) / cert_blocks;
            cell.msgs_per_certified_qc = static_cast<double>(msgs.qc_sends) / cert_blocks;
        }
    }
    return cells;
}

}  // namespace lbft
