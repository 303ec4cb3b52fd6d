#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

#include "lbft/core.hpp"
#include "lbft/trace.hpp"

namespace lbft {

// --------------------------------------------------------------------------
// Closed-form liveness quantities

struct LivenessInputs {
    double beta = 0.0;       // adversarial proposer fraction
    double lambda = 1.0;     // total proof rate
    double delta_net = 0.1;  // post-GST delay bound
    double slack = 0.1;      // the condition's delta in (0,1)
    double horizon = 1.0;

    void validate() const {
        if (beta < 0.0 || beta >= 0.5) throw std::invalid_argument("beta must lie in [0, 0.5)");
        if (slack <= 0.0 || slack >= 1.0) throw std::invalid_argument("slack must lie in (0, 1)");
        if (lambda <= 0.0 || delta_net <= 0.0 || horizon <= 0.0)
            throw std::invalid_argument("lambda, delta_net, horizon must be > 0");
    }
};

// Probability that no honest production lands within 2*delta of a given one,
// on one side: eta = exp(-2 (1-beta) lambda delta). eta^2 is the probability
// a given honest block is unique.
inline double eta(const LivenessInputs& in) {
    in.validate();
    return std::exp(-2.0 * (1.0 - in.beta) * in.lambda * in.delta_net);
}

struct LivenessVerdict {
    bool holds = false;
    double margin = 0.0;  // lhs - rhs, positive iff the condition holds
    double eta_value = 0.0;
    double lhs = 0.0;  // eta^2 (1 - beta)
    double rhs = 0.0;  // (1 + slack) beta
};

// Unique honest blocks outpace the adversary: eta^2 (1-beta) > (1+slack) beta.
inline LivenessVerdict liveness_condition(const LivenessInputs& in) {
    LivenessVerdict v;
    v.eta_value = eta(in);
    v.lhs = v.eta_value * v.eta_value * (1.0 - in.beta);
    v.rhs = (1.0 + in.slack) * in.beta;
    v.margin = v.lhs - v.rhs;
    v.holds = v.margin > 0.0;
    return v;
}

// --------------------------------------------------------------------------
// Unique blocks. Two independent routes: a window-scan oracle over
// timestamps, and the inter-arrival gap rule. Tests require them to agree on
// every trace.

// Window-containment reference: production at t is unique iff no other
// honest production lies in the open window (t - 2d, t + 2d). Checked by
// counting occupants of the window directly, independent of the gap rule.
inline std::vector<double> unique_blocks(const std::vector<double>& honest_times, double delta_net) {
    std::vector<double> sorted = honest_times;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> out;
    const double w = 2.0 * delta_net;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        auto lo = std::upper_bound(sorted.begin(), sorted.end(), sorted[i] - w);
        auto hi = std::lower_bound(sorted.begin(), sorted.end(), sorted[i] + w);
        if (hi - lo == 1) out.push_back(sorted[i]);  // the window holds only itself
    }
    return out;
}

// Gap rule: block i is unique iff the gap to its predecessor and to its
// successor are both >= 2d (boundary blocks need only the inner gap).
inline std::vector<bool> unique_flags_from_gaps(const std::vector<double>& honest_times,
                                                double delta_net) {
    std::vector<double> sorted = honest_times;
    std::sort(sorted.begin(), sorted.end());
    const double w = 2.0 * delta_net;
    std::vector<bool> flags(sorted.size(), false);
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        bool pre = i == 0 || sorted[i] - sorted[i - 1] >= w;
        bool post = i + 1 == sorted.size() || sorted[i + 1] - sorted[i] >= w;
        flags[i] = pre && post;
    }
    return flags;
}

// --------------------------------------------------------------------------
// Concentration bound evaluators

enum class ChernoffTail : std::uint8_t { Upper, Lower };

// Poisson tail bounds: P(X >= (1+d)mu) <= exp(-d^2 mu / 3) and
// P(X <= (1-d)mu) <= exp(-d^2 mu / 2).
inline double chernoff_poisson(double mu, double delta, ChernoffTail tail) {
    if (mu <= 0.0) throw std::invalid_argument("mu must be > 0");
    if (delta <= 0.0 || delta >= 1.0) throw std::invalid_argument("delta must lie in (0, 1)");
    double e = tail == ChernoffTail::Upper ? delta * delta * mu / 3.0 : delta * delta * mu / 2.0;
    return std::exp(-e);
}

// Dependent-sum form: X split into T interleaved classes of independent
// indicators with per-class means mu_j; with mu = min_j mu_j,
// P(X <= (1-d) mu T) <= exp(-d^2 mu / 2).
inline double chernoff_dependent(const std::vector<double>& per_class_mu, double delta) {
    if (per_class_mu.empty()) throw std::invalid_argument("need at least one class mean");
    if (delta <= 0.0 || delta >= 1.0) throw std::invalid_argument("delta must lie in (0, 1)");
    double mu = per_class_mu.front();
    for (double m : per_class_mu) {
        if (m <= 0.0) throw std::invalid_argument("class means must be > 0");
        mu = std::min(mu, m);
    }
    return std::exp(-delta * delta * mu / 2.0);
}

// --------------------------------------------------------------------------
// Cross-node safety checker

struct SafetyCheckResult {
    bool ok = true;
    std::uint64_t height = 0;
    std::vector<std::pair<NodeId, BlockId>> witnesses;  // node -> block it committed
};

// No two fully honest nodes may ever commit different blocks at the same
// height, comparing across nodes and across the whole run.
inline SafetyCheckResult safety_check(const SimulationTrace& trace) {
    std::map<std::uint64_t, std::map<BlockId, std::set<NodeId>>> by_height;
    for (NodeId id = 0; id < static_cast<NodeId>(trace.node_logs.size()); ++id) {
        if (!trace.fully_honest[id]) continue;
        for (const auto& ev : trace.node_logs[id].commits) by_height[ev.height][ev.block].insert(id);
    }
    for (const auto& [height, blocks] : by_height) {
        if (blocks.size() <= 1) continue;
        SafetyCheckResult r;
        r.ok = false;
        r.height = height;
        for (const auto& [blk, nodes] : blocks) r.witnesses.emplace_back(*nodes.begin(), blk);
        return r;
    }
    return {};
}

// --------------------------------------------------------------------------
// Propagation checks (post-GST trace properties)

struct PropagationReport {
    std::uint64_t checked = 0;
    std::uint64_t failures = 0;
    double first_failure_time = 0.0;
    BlockId first_failure_block;
    NodeId first_failure_node = 0;

    bool ok() const { return failures == 0; }
};

// Whenever a fully honest node first sees a block certified at t0 >= gst,
// every other fully honest node must hold that block (with its whole
// ancestor chain) by t0 + delta.
inline PropagationReport check_certified_propagation(const SimulationTrace& trace) {
    PropagationReport rep;
    const double gst = trace.scenario.network.gst;
    const double delta = trace.scenario.network.delta;
    if (!std::isfinite(gst)) return rep;
    const auto n = static_cast<NodeId>(trace.node_logs.size());
    for (NodeId u = 0; u < n; ++u) {
        if (!trace.fully_honest[u]) continue;
        for (const auto& [blk, t0] : trace.node_logs[u].certified) {
            if (t0 < gst) continue;
            if (t0 + delta > trace.end_time) continue;  // window runs past the trace
            for (NodeId v = 0; v < n; ++v) {
                if (v == u || !trace.fully_honest[v]) continue;
                ++rep.checked;
                auto it = trace.node_logs[v].inserted.find(blk);
                bool present = it != trace.node_logs[v].inserted.end() && it->second <= t0 + delta;
                if (!present) {
                    if (rep.failures == 0) {
                        rep.first_failure_time = t0;
                        rep.first_failure_block = blk;
                        rep.first_failure_node = v;
                    }
                    ++rep.failures;
                }
            }
        }
    }
    return rep;
}

// Every honest block of height h produced at t0 >= gst forces every fully
// honest node's highest certified height to reach at least h by t0 + 2*delta.
inline PropagationReport check_height_propagation(const SimulationTrace& trace) {
    PropagationReport rep;
    const double gst = trace.scenario.network.gst;
    const double delta = trace.scenario.network.delta;
    if (!std::isfinite(gst)) return rep;
    const auto n = static_cast<NodeId>(trace.node_logs.size());
    for (const auto& [blk, info] : trace.blocks) {
        if (info.adversarial || info.proposer == kGenesisProposer) continue;
        if (info.produced_at < gst) continue;
        if (info.produced_at + 2.0 * delta > trace.end_time) continue;
        for (NodeId v = 0; v < n; ++v) {
            if (!trace.fully_honest[v]) continue;
            ++rep.checked;
            std::uint64_t h = trace.node_logs[v].certified_height_at(info.produced_at + 2.0 * delta);
            if (h < info.height) {
                if (rep.failures == 0) {
                    rep.first_failure_time = info.produced_at;
                    rep.first_failure_block = blk;
                    rep.first_failure_node = v;
                }
                ++rep.failures;
            }
        }
    }
    return rep;
}

// --------------------------------------------------------------------------
// Per-run chain statistics

struct ChainStats {
    double certified_rate = 0.0;   // distinct blocks first certified per unit time after gst
    double committed_rate = 0.0;   // main-chain growth per unit time after gst (min over nodes)
    std::uint64_t unique_certified_count = 0;
    std::uint64_t honest_productions = 0;
    std::uint64_t unique_honest_blocks = 0;
    std::vector<double> commit_latencies;  // production -> first honest commit

    double commit_latency_mean() const {
        if (commit_latencies.empty()) return 0.0;
        double s = 0.0;
        for (double v : commit_latencies) s += v;
        return s / static_cast<double>(commit_latencies.size());
    }
};

inline ChainStats chain_stats(const SimulationTrace& trace) {
    ChainStats stats;
    const double gst = trace.scenario.network.gst;
    const double window = std::isfinite(gst) ? trace.end_time - gst : trace.end_time;
    const auto n = static_cast<NodeId>(trace.node_logs.size());

    std::map<BlockId, double> first_cert;
    for (NodeId u = 0; u < n; ++u) {
        if (!trace.fully_honest[u]) continue;
        for (const auto& [blk, t] : trace.node_logs[u].certified) {
            auto [it, fresh] = first_cert.try_emplace(blk, t);
            if (!fresh) it->second = std::min(it->second, t);
        }
    }

    std::uint64_t certified_after_gst = 0;
    for (const auto& [blk, t] : first_cert)
        if (!std::isfinite(gst) || t >= gst) ++certified_after_gst;
    if (window > 0.0) stats.certified_rate = static_cast<double>(certified_after_gst) / window;

    std::uint64_t min_growth = 0;
    bool first_node = true;
    for (NodeId u = 0; u < n; ++u) {
        if (!trace.fully_honest[u]) continue;
        std::uint64_t at_gst = 0;
        std::uint64_t at_end = 0;
        for (const auto& ev : trace.node_logs[u].commits) {
            if (std::isfinite(gst) && ev.t < gst) at_gst = std::max(at_gst, ev.height);
            at_end = std::max(at_end, ev.height);
        }
        std::uint64_t growth = at_end - at_gst;
        min_growth = first_node ? growth : std::min(min_growth, growth);
        first_node = false;
    }
    if (window > 0.0) stats.committed_rate = static_cast<double>(min_growth) / window;

    // honest production times, uniqueness, and commit latency
    std::vector<double> honest_times;
    std::map<BlockId, double> first_commit;
    for (NodeId u = 0; u < n; ++u) {
        if (!trace.fully_honest[u]) continue;
        for (const auto& ev : trace.node_logs[u].commits) {
            auto [it, fresh] = first_commit.try_emplace(ev.block, ev.t);
            if (!fresh) it->second = std::min(it->second, ev.t);
        }
    }
    std::set<BlockId> unique_set;
    {
        std::vector<std::pair<double, BlockId>> prods;
        for (const auto& [blk, info] : trace.blocks) {
            if (info.adversarial || info.proposer == kGenesisProposer) continue;
            honest_times.push_back(info.produced_at);
            prods.emplace_back(info.produced_at, blk);
        }
        std::sort(prods.begin(), prods.end());
        std::sort(honest_times.begin(), honest_times.end());
        auto flags = unique_flags_from_gaps(honest_times, trace.scenario.network.delta);
        for (std::size_t i = 0; i < prods.size(); ++i)
            if (flags[i]) unique_set.insert(prods[i].second);
    }
    stats.honest_productions = honest_times.size();
    stats.unique_honest_blocks = unique_set.size();
    for (const auto& blk : unique_set)
        if (first_cert.count(blk)) ++stats.unique_certified_count;
    for (const auto& [blk, t] : first_commit) {
        auto info = trace.blocks.find(blk);
        if (info == trace.blocks.end() || info->second.proposer == kGenesisProposer) continue;
        stats.commit_latencies.push_back(t - info->second.produced_at);
    }
    std::sort(stats.commit_latencies.begin(), stats.commit_latencies.end());
    return stats;
}

}  // namespace lbft
