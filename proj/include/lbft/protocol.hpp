#pragma once

#include <cassert>
#include <map>
#include <optional>
#include <variant>
#include <vector>

#include "lbft/block_tree.hpp"
#include "lbft/core.hpp"
#include "lbft/detail/rng.hpp"
#include "lbft/lottery.hpp"

namespace lbft {

struct BlockMsg {
    BlockPtr block;
};
struct VoteMsg {
    Vote vote;
};
struct QcMsg {
    QuorumCertificate qc;
};
using Message = std::variant<BlockMsg, VoteMsg, QcMsg>;

enum class NoVoteReason : std::uint8_t { None, NotHighest, AlreadyVoted, NotAVoter };

struct VoteDecision {
    bool voted = false;
    VoteType type = VoteType::Com;
    std::optional<BlockId> conflict;  // set for wit votes
    NoVoteReason reason = NoVoteReason::None;
};

// Everything one event handler wants the outside world to do or know.
// Messages are routed by the network layer according to the configured
// transmission pattern; the state machine itself is pattern-agnostic.
struct Outbox {
    std::vector<Message> out;
    std::vector<Vote> cast;                     // own votes included in `out`
    std::vector<BlockPtr> accepted;             // blocks newly attached to the tree
    std::vector<BlockId> newly_certified;
    std::vector<BlockId> com_quorum_reached;    // com tally first hit the quorum
    std::vector<BlockPtr> committed;            // ascending height
    std::optional<SafetyViolation> violation;
    std::vector<BlockPtr> produced;             // blocks created by this handler
};

// One node's LBFT reactor: applies the proposing, voting, and committing
// rules to delivered events, in delivery order, with no timing assumptions.
class Node {
  public:
    Node(NodeId id, ProtocolParams params, bool proposer_role, bool voter_role,
         std::uint64_t seed, const ProofRegistry* registry)
        : id_(id),
          params_(params),
          proposer_(proposer_role),
          voter_(voter_role),
          tree_(params),
          rng_(seed),
          registry_(registry) {}

    NodeId id() const { return id_; }
    bool is_proposer() const { return proposer_; }
    bool is_voter() const { return voter_; }
    const BlockTree& tree() const { return tree_; }
    BlockTree& tree_mut() { return tree_; }

    // Proposing rule: extend the highest certified block seen so far, picking
    // uniformly at random when several certified tips share that height.
    // Pending transactions already on the chosen ancestor path are left out.
    Outbox on_proof_won(const BlockProof& proof, ProofRegistry& registry) {
        Outbox ob;
        if (!proposer_) return ob;
        auto tips = tree_.highest_certified();
        assert(!tips.empty());
        BlockId parent_id = tips.size() == 1
                                ? tips.front()
                                : tips[static_cast<std::size_t>(rng_.bounded(tips.size()))];
        auto qc = tree_.qc_for(parent_id);
        if (!qc) return ob;  // cannot happen for certified parents; defensive
        auto parent = tree_.block(parent_id);

        std::vector<Tx> txs;
        for (const auto& [tx_id, tx] : mempool_)
            if (!tree_.tx_on_path(parent_id, tx_id)) txs.push_back(tx);

        auto blk = Block::make(std::move(*qc), std::move(txs), proof, parent->height + 1, id_);
        registry.bind(proof, blk->id);
        ob.produced.push_back(blk);
        ob.out.push_back(BlockMsg{blk});
        ingest_block(blk, ob);
        return ob;
    }

    Outbox on_block_received(const BlockPtr& blk, bool structurally_ok = true) {
        Outbox ob;
        if (!structurally_ok) return ob;
        ingest_block(blk, ob);
        return ob;
    }

    Outbox on_vote_received(const Vote& vote) {
        Outbox ob;
        if (!verify_vote(vote) || !params_.is_voter(vote.voter)) return ob;
        apply_vote(vote, ob);
        return ob;
    }

    // A full certificate observed directly (leader-collect pattern). Its
    // votes are pooled into the tally like individually received ones.
    Outbox on_qc_received(const QuorumCertificate& qc) {
        Outbox ob;
        if (!qc_well_formed(qc, params_)) return ob;
        for (const auto& v : qc.votes) apply_vote(v, ob);
        return ob;
    }

    void on_tx(const Tx& tx) { mempool_.try_emplace(tx.id, tx); }

    // Voting rule. A block qualifies only if its parent is among the highest
    // certified blocks seen. The vote is a wit vote when some block this
    // voter endorsed earlier conflicts with the parent at a height no lower
    // than the parent's; the disclosed conflict is the lowest such block
    // (smallest id on ties) so replays are stable.
    VoteDecision decide_vote(const Block& blk) const {
        VoteDecision d;
        if (!voter_) {
            d.reason = NoVoteReason::NotAVoter;
            return d;
        }
        if (blk.is_genesis()) {
            d.reason = NoVoteReason::NotHighest;
            return d;
        }
        auto tips = tree_.highest_certified();
        if (std::find(tips.begin(), tips.end(), blk.parent_id()) == tips.end()) {
            d.reason = NoVoteReason::NotHighest;
            return d;
        }
        if (voted_.count(blk.id)) {
            d.reason = NoVoteReason::AlreadyVoted;
            return d;
        }
        auto parent = tree_.block(blk.parent_id());
        assert(parent);
        std::optional<std::pair<std::uint64_t, BlockId>> best;
        for (const auto& [voted_id, type] : voted_) {
            auto voted_blk = tree_.block(voted_id);
            if (!voted_blk || voted_blk->height < parent->height) continue;
            if (tree_.relation(voted_id, parent->id) != Relation::Conflicting) continue;
            std::pair<std::uint64_t, BlockId> key{voted_blk->height, voted_id};
            if (!best || key < *best) best = key;
        }
        d.voted = true;
        if (best) {
            d.type = VoteType::Wit;
            d.conflict = best->second;
        }
        return d;
    }

    std::optional<Vote> vote_sent_for(const BlockId& id) const {
        auto it = sent_votes_.find(id);
        return it == sent_votes_.end() ? std::nullopt : std::optional<Vote>(it->second);
    }

  private:
    // Attach the block, vote on it, then re-process any buffered children the
    // same way, one at a time. Voting between attachments keeps the decision
    // sequential in arrival order: a parent delivered after its child is
    // still voted on with the tree state it found on arrival.
    void ingest_block(const BlockPtr& blk, Outbox& ob) {
        std::vector<BlockPtr> pending{blk};
        std::size_t cursor = 0;
        while (cursor < pending.size()) {
            BlockPtr cur = pending[cursor++];
            auto res = tree_.insert(cur, registry_->checker(), /*process_orphans=*/false);
            if (res.status != InsertStatus::Inserted) continue;  // abandoned or buffered
            ob.accepted.insert(ob.accepted.end(), res.accepted.begin(), res.accepted.end());
            ob.newly_certified.insert(ob.newly_certified.end(), res.newly_certified.begin(),
                                      res.newly_certified.end());
            ob.com_quorum_reached.insert(ob.com_quorum_reached.end(),
                                         res.com_quorum_reached.begin(),
                                         res.com_quorum_reached.end());
            for (const auto& id : res.newly_certified) try_commit(id, ob);
            for (const auto& id : res.com_quorum_reached) try_commit(id, ob);
            if (ob.violation) return;
            consider_vote(cur, ob);
            for (const auto& w : tree_.take_orphans_of(cur->id)) pending.push_back(w);
        }
    }

    void consider_vote(const BlockPtr& blk, Outbox& ob) {
        if (!voter_) return;
        auto d = decide_vote(*blk);
        if (!d.voted) return;
        Vote v = make_vote(id_, blk->id, blk->height, d.type, d.conflict);
        voted_[blk->id] = d.type;
        sent_votes_.emplace(blk->id, v);
        ob.cast.push_back(v);
        ob.out.push_back(VoteMsg{v});
        // own vote counts immediately; the network never echoes it back to us
        apply_vote(v, ob);
    }

    void apply_vote(const Vote& vote, Outbox& ob) {
        auto out = tree_.add_vote(vote);
        if (out.newly_certified) {
            ob.newly_certified.push_back(*out.newly_certified);
            try_commit(*out.newly_certified, ob);
        }
        if (out.com_quorum_reached) {
            ob.com_quorum_reached.push_back(*out.com_quorum_reached);
            if (!ob.violation) try_commit(*out.com_quorum_reached, ob);
        }
    }

    void try_commit(const BlockId& certified, Outbox& ob) {
        if (ob.violation) return;
        auto res = tree_.commit_ancestors(certified);
        ob.committed.insert(ob.committed.end(), res.committed.begin(), res.committed.end());
        if (res.violation) ob.violation = res.violation;
    }

    NodeId id_;
    ProtocolParams params_;
    bool proposer_;
    bool voter_;
    BlockTree tree_;
    std::map<BlockId, VoteType> voted_;  // every block this voter endorsed
    std::map<BlockId, Vote> sent_votes_;
    std::map<std::uint64_t, Tx> mempool_;
    detail::Rng rng_;
    const ProofRegistry* registry_;
};

}  // namespace lbft
