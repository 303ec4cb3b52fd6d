#pragma once

#include <algorithm>
#include <ostream>
#include <set>
#include <string>

#include <json.hpp>

#include "lbft/analysis.hpp"
#include "lbft/scenario.hpp"
#include "lbft/simnet.hpp"
#include "lbft/trace.hpp"

namespace lbft {

// Line-delimited trace format (schema "lbft-trace/1"): a header line echoing
// the scenario, then one JSON object per record. Fully determined by
// (config, seed).

inline Json record_to_json(const TraceRecord& r) {
    Json j;
    j["t"] = r.t;
    j["seq"] = r.seq;
    j["ev"] = to_string(r.kind);
    j["node"] = r.node;
    if (r.block != BlockId{}) j["block"] = r.block.hex();
    j["a"] = r.a;
    return j;
}

inline void write_trace(const SimulationTrace& trace, std::ostream& out) {
    Json header;
    header["schema"] = "lbft-trace/1";
    header["scenario"] = scenario_to_json(trace.scenario);
    out << header.dump() << "\n";
    for (const auto& r : trace.records) out << record_to_json(r).dump() << "\n";
}

// Transactions committed on every fully honest node's main chain.
inline std::set<std::uint64_t> txs_committed_everywhere(const SimulationTrace& trace) {
    std::set<std::uint64_t> acc;
    bool first = true;
    for (NodeId u = 0; u < static_cast<NodeId>(trace.node_logs.size()); ++u) {
        if (!trace.fully_honest[u]) continue;
        std::set<std::uint64_t> mine;
        for (const auto& ev : trace.node_logs[u].commits) {
            auto it = trace.blocks.find(ev.block);
            if (it == trace.blocks.end()) continue;
            mine.insert(it->second.tx_ids.begin(), it->second.tx_ids.end());
        }
        if (first) {
            acc = std::move(mine);
            first = false;
        } else {
            std::set<std::uint64_t> inter;
            std::set_intersection(acc.begin(), acc.end(), mine.begin(), mine.end(),
                                  std::inserter(inter, inter.begin()));
            acc = std::move(inter);
        }
    }
    return acc;
}

inline Json metrics_json(const SimulationTrace& trace) {
    ChainStats stats = chain_stats(trace);
    SafetyCheckResult safety = safety_check(trace);

    std::uint64_t honest_blocks = 0;
    std::uint64_t adversarial_blocks = 0;
    for (const auto& [id, info] : trace.blocks) {
        if (info.proposer == kGenesisProposer) continue;
        (info.adversarial ? adversarial_blocks : honest_blocks)++;
    }

    std::uint64_t committed_height = 0;
    bool first = true;
    for (NodeId u = 0; u < static_cast<NodeId>(trace.node_logs.size()); ++u) {
        if (!trace.fully_honest[u]) continue;
        std::uint64_t h = 0;
        for (const auto& ev : trace.node_logs[u].commits) h = std::max(h, ev.height);
        committed_height = first ? h : std::min(committed_height, h);
        first = false;
    }

    PerBlockMsgCount totals;
    for (const auto& [id, c] : trace.msg_counts) {
        totals.block_sends += c.block_sends;
        totals.vote_sends += c.vote_sends;
        totals.qc_sends += c.qc_sends;
    }

    auto committed_txs = txs_committed_everywhere(trace);
    std::uint64_t injected = trace.tx_injections.size();
    std::uint64_t injected_committed = 0;
    for (const auto& [t, tx] : trace.tx_injections)
        if (committed_txs.count(tx)) ++injected_committed;

    Json j;
    j["schema"] = "lbft-metrics/1";
    j["scenario"] = scenario_to_json(trace.scenario);
    j["end_time"] = trace.end_time;
    j["aborted"] = trace.aborted;
    j["blocks"] = {{"honest", honest_blocks},
                   {"adversarial", adversarial_blocks},
                   {"unique_honest", stats.unique_honest_blocks},
                   {"unique_certified", stats.unique_certified_count}};
    j["rates"] = {{"certified", stats.certified_rate}, {"committed", stats.committed_rate}};
    j["committed_height"] = committed_height;
    Json lat;
    lat["count"] = stats.commit_latencies.size();
    lat["mean"] = stats.commit_latency_mean();
    if (!stats.commit_latencies.empty()) {
        lat["p50"] = stats.commit_latencies[stats.commit_latencies.size() / 2];
        lat["max"] = stats.commit_latencies.back();
    }
    j["commit_latency"] = lat;
    j["messages"] = {{"block", totals.block_sends},
                     {"vote", totals.vote_sends},
                     {"qc", totals.qc_sends},
                     {"total", totals.total()},
                     {"deliveries", trace.total_deliveries}};
    j["tx"] = {{"injected", injected}, {"committed_everywhere", injected_committed}};
    j["safety"] = safety.ok ? "ok" : "violation";
    if (!safety.ok) {
        Json v;
        v["height"] = safety.height;
        Json w = Json::array();
        for (const auto& [node, blk] : safety.witnesses)
            w.push_back({{"node", node}, {"block", blk.hex()}});
        v["witnesses"] = w;
        j["violation"] = v;
    }
    if (trace.violation) {
        j["node_violation"] = {{"t", trace.violation->t},
                               {"node", trace.violation->node},
                               {"height", trace.violation->details.height}};
    }
    return j;
}

}  // namespace lbft
