#pragma once

#include <algorithm>
#include <deque>
#include <optional>
#include <set>
#include <vector>

#include "lbft/block_tree.hpp"
#include "lbft/core.hpp"
#include "lbft/detail/rng.hpp"
#include "lbft/lottery.hpp"
#include "lbft/protocol.hpp"
#include "lbft/scenario.hpp"
#include "lbft/trace.hpp"

namespace lbft {

// A message emitted by the adversary. `targets` empty means every other
// node. Adversarial sends are delivered with zero delay (the strongest
// schedule the delay model permits).
struct AdvEmission {
    Message msg;
    NodeId from = 0;
    std::vector<NodeId> targets;  // empty = broadcast
};

// The single adversary of the model: it controls all corrupted voter and
// proposer roles, observes every delivery made to any corrupted node
// instantly, and coordinates internally with zero latency. It maintains its
// own block tree fed from those observations. Strategies may only emit
// messages signed by corrupted identities; nothing here can mint an honest
// node's vote.
class Adversary {
  public:
    Adversary(const ScenarioConfig& cfg, ProofRegistry* registry, std::uint64_t seed)
        : cfg_(cfg),
          params_(cfg.protocol),
          registry_(registry),
          view_(cfg.protocol),
          rng_(seed) {
        for (NodeId v = 0; v < params_.num_voters(); ++v)
            if (cfg.is_corrupted_voter(v)) voters_.push_back(v);
        for (NodeId p = 0; p < params_.num_proposers(); ++p)
            if (cfg.is_corrupted_proposer(p)) proposers_.push_back(p);
    }

    const std::vector<NodeId>& corrupted_voters() const { return voters_; }
    const std::vector<NodeId>& corrupted_proposers() const { return proposers_; }

    std::vector<AdvEmission> on_win(double t, NodeId proposer) {
        std::vector<AdvEmission> out;
        switch (cfg_.strategy) {
            case StrategyKind::EquivocateProposer:
                equivocate(t, proposer, out);
                break;
            case StrategyKind::WithholdProposer:
            case StrategyKind::Combined:
                banked_wins_.push_back(t);
                break;
            case StrategyKind::DoubleQc:
                double_qc_step(t, proposer, out);
                break;
            default:
                break;  // wins are simply discarded
        }
        return out;
    }

    std::vector<AdvEmission> on_observe(double /*t*/, const Message& msg) {
        std::vector<AdvEmission> out;
        if (const auto* bm = std::get_if<BlockMsg>(&msg)) {
            auto res = view_.insert(bm->block, registry_->checker());
            for (const auto& accepted : res.accepted) react_to_block(accepted, out);
        } else if (const auto* vm = std::get_if<VoteMsg>(&msg)) {
            if (verify_vote(vm->vote)) view_.add_vote(vm->vote);
        } else if (const auto* qm = std::get_if<QcMsg>(&msg)) {
            if (qc_well_formed(qm->qc, params_))
                for (const auto& v : qm->qc.votes) view_.add_vote(v);
        }
        return out;
    }

    // Idealized reach of the private chain: the highest parent the adversary
    // could certify right now plus every banked win it could stack on top.
    std::uint64_t private_height() const {
        return view_.highest_certified_height() + banked_wins_.size();
    }

    const BlockTree& view() const { return view_; }

  private:
    void react_to_block(const BlockPtr& blk, std::vector<AdvEmission>& out) {
        switch (cfg_.strategy) {
            case StrategyKind::DoubleVoter:
                vote_all(blk, out);
                break;
            case StrategyKind::WithholdProposer:
                if (!blk->is_genesis() && !is_own(blk->proposer)) match_release(blk, false, out);
                break;
            case StrategyKind::Combined:
                vote_all(blk, out);
                if (!blk->is_genesis() && !is_own(blk->proposer)) match_release(blk, true, out);
                break;
            default:
                break;
        }
    }

    bool is_own(NodeId proposer) const {
        return std::find(proposers_.begin(), proposers_.end(), proposer) != proposers_.end();
    }

    // Corrupted voters endorse everything they see, always with com votes,
    // regardless of the voting rule.
    void vote_all(const BlockPtr& blk, std::vector<AdvEmission>& out) {
        for (NodeId v : voters_) {
            Vote vote = make_vote(v, blk->id, blk->height, VoteType::Com);
            view_.add_vote(vote);
            out.push_back({VoteMsg{vote}, v, {}});
        }
    }

    // One block per certified tip from a single win: the lottery abstraction
    // grants the equivocator one proof per block rather than reusing one.
    void equivocate(double t, NodeId proposer, std::vector<AdvEmission>& out) {
        auto tips = view_.highest_certified();
        for (const auto& tip : tips) {
            auto qc = view_.qc_for(tip);
            if (!qc) continue;
            auto parent = view_.block(tip);
            BlockProof proof = registry_->issue(proposer, t);
            auto blk = Block::make(std::move(*qc), {}, proof, parent->height + 1, proposer);
            registry_->bind(proof, blk->id);
            view_.insert(blk, registry_->checker());
            out.push_back({BlockMsg{blk}, proposer, {}});
        }
    }

    // Withholding: bank lottery wins and materialize a competing block the
    // moment an honest block shows up at a height we can still contest. The
    // competitor extends the honest block's own parent, so every voter that
    // can vote for the honest block can vote for ours too; corrupted voters
    // endorse it on the spot to shorten the race.
    void match_release(const BlockPtr& honest_blk, bool per_tip, std::vector<AdvEmission>& out) {
        std::uint64_t h = honest_blk->height;
        if (banked_wins_.empty() || released_height_ >= h) return;
        std::vector<BlockId> parents;
        if (per_tip) {
            for (const auto& tip : view_.highest_certified()) {
                auto b = view_.block(tip);
                if (b && b->height == h - 1) parents.push_back(tip);
            }
        }
        if (parents.empty()) parents.push_back(honest_blk->parent_id());
        for (const auto& parent_id : parents) {
            if (banked_wins_.empty()) break;
            auto qc = view_.qc_for(parent_id);
            if (!qc) continue;
            double win_time = banked_wins_.front();
            banked_wins_.pop_front();
            NodeId proposer = proposers_.empty() ? 0 : proposers_.front();
            BlockProof proof = registry_->issue(proposer, win_time);
            auto blk = Block::make(std::move(*qc), {}, proof, h, proposer);
            registry_->bind(proof, blk->id);
            view_.insert(blk, registry_->checker());
            released_height_ = h;
            out.push_back({BlockMsg{blk}, proposer, {}});
            // instant endorsements from the corrupted voters
            for (NodeId v : voters_) {
                Vote vote = make_vote(v, blk->id, blk->height, VoteType::Com);
                view_.add_vote(vote);
                out.push_back({VoteMsg{vote}, v, {}});
            }
        }
    }

    // Negative control requiring f+1 corrupted voters: two disjoint honest
    // halves are each fed a private fork plus enough corrupted com votes to
    // assemble a com-quorum certificate, so both halves commit conflicting
    // height-1 blocks. Validates that the cross-node safety checker fires
    // when the voter threshold is genuinely exceeded.
    void double_qc_step(double t, NodeId proposer, std::vector<AdvEmission>& out) {
        // split matches the network's pre-GST partition exactly
        std::vector<NodeId> g1, g2;
        for (NodeId v = 0; v < params_.num_voters(); ++v) {
            int g = partition_group(cfg_, v);
            if (g == 0) g1.push_back(v);
            if (g == 1) g2.push_back(v);
        }
        if (g1.empty() || g2.empty()) return;

        auto build_on = [&](const BlockId& parent_id) -> BlockPtr {
            auto qc = view_.qc_for(parent_id);
            if (!qc) return nullptr;
            auto parent = view_.block(parent_id);
            BlockProof proof = registry_->issue(proposer, t);
            auto blk = Block::make(std::move(*qc), {}, proof, parent->height + 1, proposer);
            registry_->bind(proof, blk->id);
            view_.insert(blk, registry_->checker());
            return blk;
        };
        auto send_fork = [&](const BlockPtr& blk, const std::vector<NodeId>& group) {
            out.push_back({BlockMsg{blk}, proposer, group});
            for (NodeId v : voters_) {
                Vote vote = make_vote(v, blk->id, blk->height, VoteType::Com);
                view_.add_vote(vote);
                out.push_back({VoteMsg{vote}, v, group});
            }
        };

        if (stage_ == 0) {
            fork_a_ = build_on(Block::genesis()->id);
            fork_b_ = build_on(Block::genesis()->id);
            if (!fork_a_ || !fork_b_) return;
            send_fork(fork_a_, g1);
            send_fork(fork_b_, g2);
            stage_ = 1;
        } else if (stage_ == 1) {
            if (!view_.is_certified(fork_a_->id) || !view_.is_certified(fork_b_->id))
                return;  // honest votes not collected yet; retry on the next win
            auto child_a = build_on(fork_a_->id);
            auto child_b = build_on(fork_b_->id);
            if (!child_a || !child_b) return;
            send_fork(child_a, g1);
            send_fork(child_b, g2);
            stage_ = 2;
        }
    }

    ScenarioConfig cfg_;
    ProtocolParams params_;
    ProofRegistry* registry_;
    BlockTree view_;
    detail::Rng rng_;
    std::vector<NodeId> voters_;
    std::vector<NodeId> proposers_;
    std::deque<double> banked_wins_;
    std::uint64_t released_height_ = 0;
    int stage_ = 0;
    BlockPtr fork_a_;
    BlockPtr fork_b_;
};

// Hidden lead at time t: the recorded sample with the greatest sample time
// not exceeding t. Samples are taken by the simulator at the configured
// interval, starting at gst + 2*delta.
inline std::int64_t hidden_lead(const SimulationTrace& trace, double t) {
    std::int64_t lead = 0;
    for (const auto& [when, value] : trace.lead_samples) {
        if (when > t) break;
        lead = value;
    }
    return lead;
}

}  // namespace lbft
