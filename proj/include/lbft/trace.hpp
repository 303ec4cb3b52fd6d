#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "lbft/block_tree.hpp"
#include "lbft/core.hpp"
#include "lbft/scenario.hpp"

namespace lbft {

enum class RecordKind : std::uint8_t {
    Win,         // lottery win (node = winner, a = adversarial flag)
    Produce,     // block created (node = producer, block, a = height)
    Send,        // message emitted (node = sender, a = packed kind/recipients)
    Deliver,     // message handed to a node (node = recipient)
    Accept,      // block attached to a node's tree
    VoteCast,    // honest vote cast (a = vote type)
    Certified,   // node first saw this block certified (a = height)
    Commit,      // node appended block to its main chain (a = height)
    TimerFire,   // leader-collect fallback expired, vote re-broadcast
    TxInject,    // client transaction arrival (a = tx id)
    LeadSample,  // hidden-lead sample (a = lead, signed)
    Violation,   // per-node commit conflict (a = height)
};

inline const char* to_string(RecordKind k) {
    switch (k) {
        case RecordKind::Win: return "win";
        case RecordKind::Produce: return "produce";
        case RecordKind::Send: return "send";
        case RecordKind::Deliver: return "deliver";
        case RecordKind::Accept: return "accept";
        case RecordKind::VoteCast: return "vote";
        case RecordKind::Certified: return "certified";
        case RecordKind::Commit: return "commit";
        case RecordKind::TimerFire: return "timer";
        case RecordKind::TxInject: return "tx";
        case RecordKind::LeadSample: return "lead";
        case RecordKind::Violation: return "violation";
    }
    return "?";
}

struct TraceRecord {
    double t = 0.0;
    std::uint64_t seq = 0;
    RecordKind kind = RecordKind::Win;
    NodeId node = 0;
    BlockId block;
    std::int64_t a = 0;
};

struct BlockInfo {
    std::uint64_t height = 0;
    NodeId proposer = 0;
    double produced_at = 0.0;
    bool adversarial = false;
    std::vector<std::uint64_t> tx_ids;
};

struct CommitEv {
    double t = 0.0;
    std::uint64_t height = 0;
    BlockId block;
};

// Per-honest-node observation log, the substrate for the propagation and
// safety checkers.
struct NodeLog {
    std::map<BlockId, double> inserted;   // first attach time
    std::map<BlockId, double> certified;  // first certification time
    std::vector<CommitEv> commits;
    // (time, height) steps of the running max certified height
    std::vector<std::pair<double, std::uint64_t>> cert_height_steps;

    std::uint64_t certified_height_at(double t) const {
        std::uint64_t h = 0;
        for (const auto& [when, height] : cert_height_steps) {
            if (when > t) break;
            h = height;
        }
        return h;
    }
};

struct ViolationEv {
    double t = 0.0;
    NodeId node = 0;
    SafetyViolation details;
};

struct PerBlockMsgCount {
    std::uint64_t block_sends = 0;
    std::uint64_t vote_sends = 0;
    std::uint64_t qc_sends = 0;

    std::uint64_t total() const { return block_sends + vote_sends + qc_sends; }
};

struct SimulationTrace {
    ScenarioConfig scenario;
    std::vector<TraceRecord> records;
    std::map<BlockId, BlockInfo> blocks;
    std::vector<NodeLog> node_logs;  // indexed by node id; meaningful for honest roles
    std::vector<bool> fully_honest;  // no corrupted role at all
    std::vector<bool> honest_voter;
    std::vector<bool> honest_proposer;
    std::map<BlockId, PerBlockMsgCount> msg_counts;
    std::vector<std::pair<double, std::int64_t>> lead_samples;
    std::vector<std::pair<double, std::uint64_t>> tx_injections;
    std::optional<ViolationEv> violation;
    bool aborted = false;
    double end_time = 0.0;
    std::uint64_t total_deliveries = 0;
};

}  // namespace lbft
