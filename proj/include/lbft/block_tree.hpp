#pragma once

#include <cassert>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lbft/core.hpp"

namespace lbft {

enum class InsertStatus : std::uint8_t { Inserted, Buffered, Duplicate, Rejected };

struct InsertResult {
    InsertStatus status = InsertStatus::Rejected;
    BlockCheck reason = BlockCheck::Ok;  // set when Rejected
    // Accepted blocks in processing order (the block itself first, then any
    // orphans that became attachable), plus every block whose certification
    // became known as a side effect of merged embedded certificates.
    std::vector<BlockPtr> accepted;
    std::vector<BlockId> newly_certified;
    std::vector<BlockId> com_quorum_reached;
};

struct VoteOutcome {
    std::optional<BlockId> newly_certified;
    std::optional<BlockId> com_quorum_reached;
};

enum class Relation : std::uint8_t { Ancestor, Descendant, Equal, Conflicting, Unknown };

struct SafetyViolation {
    std::uint64_t height = 0;
    BlockId committed;  // block already on the main chain at that height
    BlockId candidate;  // conflicting block a commit just tried to place there
};

struct CommitResult {
    std::vector<BlockPtr> committed;  // ascending height
    std::optional<SafetyViolation> violation;
};

// Per-node store of received blocks. Tracks vote tallies (individual votes
// and votes merged out of embedded certificates are pooled per block),
// certified/committed markings, and buffers blocks whose parent has not
// arrived yet. Single-owner, no sharing between nodes.
class BlockTree {
  public:
    explicit BlockTree(ProtocolParams params) : params_(params) {
        auto g = Block::genesis();
        blocks_[g->id] = g;
        committed_.push_back(g->id);
        committed_set_.insert(g->id);
        // genesis certification is axiomatic; its well-known QC seeds the tally
        for (const auto& v : genesis_qc(params_).votes) tally_[g->id].emplace(v.voter, v);
        mark_certified(g->id);
    }

    const ProtocolParams& params() const { return params_; }

    bool contains(const BlockId& id) const { return blocks_.count(id) != 0; }
    BlockPtr block(const BlockId& id) const {
        auto it = blocks_.find(id);
        return it == blocks_.end() ? nullptr : it->second;
    }
    bool is_certified(const BlockId& id) const { return certified_.count(id) != 0; }
    bool is_committed(const BlockId& id) const { return committed_set_.count(id) != 0; }
    std::size_t block_count() const { return blocks_.size(); }
    std::size_t orphan_count() const {
        std::size_t n = 0;
        for (const auto& [parent, list] : orphans_) n += list.size();
        return n;
    }

    // `process_orphans = false` attaches just this block and leaves waiting
    // children buffered; callers that interleave work per attachment (the
    // protocol reactor votes between attachments) drain them explicitly via
    // take_orphans_of().
    InsertResult insert(const BlockPtr& blk, const ProofCheck& proof_ok,
                        bool process_orphans = true) {
        InsertResult result;
        if (contains(blk->id)) {
            result.status = InsertStatus::Duplicate;
            return result;
        }
        if (!contains(blk->parent_id())) {
            orphans_[blk->parent_id()].push_back(blk);
            result.status = InsertStatus::Buffered;
            return result;
        }
        BlockCheck check = attach(blk, proof_ok, result);
        if (check != BlockCheck::Ok) {
            result.status = InsertStatus::Rejected;
            result.reason = check;
            return result;
        }
        result.status = InsertStatus::Inserted;
        if (!process_orphans) return result;
        // Orphans waiting on anything that just attached are re-processed;
        // invalid ones are dropped silently.
        std::size_t cursor = 0;
        while (cursor < result.accepted.size()) {
            BlockId parent = result.accepted[cursor]->id;
            ++cursor;
            for (const auto& w : take_orphans_of(parent)) {
                if (contains(w->id)) continue;
                attach(w, proof_ok, result);
            }
        }
        return result;
    }

    // Blocks buffered on `parent`, in arrival order; removes them.
    std::vector<BlockPtr> take_orphans_of(const BlockId& parent) {
        auto it = orphans_.find(parent);
        if (it == orphans_.end()) return {};
        std::vector<BlockPtr> waiting = std::move(it->second);
        orphans_.erase(it);
        return waiting;
    }

    // Tally a vote (deduped by voter). Votes for blocks not yet received are
    // tallied too; certification of those fires when the block attaches.
    VoteOutcome add_vote(const Vote& vote) {
        VoteOutcome out;
        if (auto blk = block(vote.block); blk && blk->height != vote.block_height)
            return out;  // height lie; would poison assembled QCs
        auto& tally = tally_[vote.block];
        auto [it, fresh] = tally.emplace(vote.voter, vote);
        (void)it;
        if (!fresh) return out;
        if (contains(vote.block)) {
            if (!is_certified(vote.block) && tally.size() >= params_.quorum()) {
                mark_certified(vote.block);
                out.newly_certified = vote.block;
            }
            if (is_certified(vote.block) && vote.type == VoteType::Com &&
                com_count(vote.block) == params_.quorum()) {
                out.com_quorum_reached = vote.block;
            }
        }
        return out;
    }

    std::size_t vote_count(const BlockId& id) const {
        auto it = tally_.find(id);
        return it == tally_.end() ? 0 : it->second.size();
    }

    std::size_t com_count(const BlockId& id) const {
        auto it = tally_.find(id);
        if (it == tally_.end()) return 0;
        std::size_t n = 0;
        for (const auto& [voter, v] : it->second)
            if (v.type == VoteType::Com) ++n;
        return n;
    }

    // QC assembled from the local tally (all known votes, sorted by voter).
    std::optional<QuorumCertificate> qc_for(const BlockId& id) const {
        auto blk = block(id);
        auto it = tally_.find(id);
        if (!blk || it == tally_.end() || it->second.size() < params_.quorum()) return std::nullopt;
        QuorumCertificate qc;
        qc.block = id;
        qc.block_height = blk->height;
        for (const auto& [voter, v] : it->second) qc.votes.push_back(v);
        return qc;
    }

    // All certified blocks of maximal height; several entries mean certified
    // same-height forks. Ascending id order.
    std::vector<BlockId> highest_certified() const {
        auto it = certified_by_height_.rbegin();
        assert(it != certified_by_height_.rend());
        return {it->second.begin(), it->second.end()};
    }

    std::uint64_t highest_certified_height() const {
        return certified_by_height_.rbegin()->first;
    }

    Relation relation(const BlockId& a, const BlockId& b) const {
        auto ba = block(a);
        auto bb = block(b);
        if (!ba || !bb) return Relation::Unknown;
        if (a == b) return Relation::Equal;
        if (ba->height < bb->height) {
            return ancestor_at(bb, ba->height) == a ? Relation::Ancestor : Relation::Conflicting;
        }
        if (bb->height < ba->height) {
            return ancestor_at(ba, bb->height) == b ? Relation::Descendant : Relation::Conflicting;
        }
        return Relation::Conflicting;  // distinct blocks at equal height
    }

    // Committing rule: a block certified with a com-vote quorum commits all
    // its uncommitted strict ancestors, lowest first. The certified block
    // itself stays uncommitted until one of its descendants certifies the
    // same way. A candidate landing on a height already occupied by a
    // different committed block is the safety alarm.
    CommitResult commit_ancestors(const BlockId& certified) {
        CommitResult result;
        auto blk = block(certified);
        if (!blk || !is_certified(certified)) return result;
        if (com_count(certified) < params_.quorum()) return result;

        std::vector<BlockPtr> path;  // uncommitted strict ancestors, top down
        auto cur = block(blk->parent_id());
        while (cur && !is_committed(cur->id)) {
            path.push_back(cur);
            cur = block(cur->parent_id());
        }
        for (auto it = path.rbegin(); it != path.rend(); ++it) {
            const auto& b = *it;
            if (b->height < committed_.size()) {
                result.violation = SafetyViolation{b->height, committed_[b->height], b->id};
                return result;
            }
            assert(b->height == committed_.size());
            committed_.push_back(b->id);
            committed_set_.insert(b->id);
            result.committed.push_back(b);
        }
        return result;
    }

    std::vector<BlockPtr> main_chain() const {
        std::vector<BlockPtr> chain;
        chain.reserve(committed_.size());
        for (const auto& id : committed_) chain.push_back(block(id));
        return chain;
    }

    const std::vector<BlockId>& committed_ids() const { return committed_; }

    std::uint64_t committed_height() const {
        return static_cast<std::uint64_t>(committed_.size()) - 1;
    }

    // true if tx_id appears anywhere on the chain ending at `tip` (inclusive)
    bool tx_on_path(const BlockId& tip, std::uint64_t tx_id) const {
        for (auto cur = block(tip); cur; cur = block(cur->parent_id())) {
            for (const auto& tx : cur->txs)
                if (tx.id == tx_id) return true;
            if (cur->is_genesis()) break;
        }
        return false;
    }

    const std::set<BlockId>& children_of(const BlockId& id) const {
        static const std::set<BlockId> empty;
        auto it = children_.find(id);
        return it == children_.end() ? empty : it->second;
    }

    // Snapshot in a stable line format (sorted by height then id), used by
    // golden tests and for trace replay debugging.
    std::string snapshot() const {
        std::ostringstream out;
        out << "lbft-tree v1\n";
        std::map<std::pair<std::uint64_t, BlockId>, BlockPtr> ordered;
        for (const auto& [id, blk] : blocks_) ordered[{blk->height, id}] = blk;
        std::map<BlockId, std::size_t> commit_index;
        for (std::size_t i = 0; i < committed_.size(); ++i) commit_index[committed_[i]] = i;
        for (const auto& [key, blk] : ordered) {
            out << "block " << blk->id.short_hex();
            out << " parent=" << (blk->is_genesis() ? std::string("-") : blk->parent_id().short_hex());
            out << " h=" << blk->height;
            out << " certified=" << (is_certified(blk->id) ? 1 : 0);
            auto ci = commit_index.find(blk->id);
            if (ci != commit_index.end())
                out << " committed=" << ci->second;
            else
                out << " committed=-";
            out << " votes=" << vote_count(blk->id) << " com=" << com_count(blk->id) << "\n";
        }
        for (const auto& [parent, list] : orphans_)
            for (const auto& blk : list)
                out << "orphan " << parent.short_hex() << " " << blk->id.short_hex() << "\n";
        return out.str();
    }

  private:
    BlockId ancestor_at(BlockPtr from, std::uint64_t height) const {
        while (from && from->height > height) from = block(from->parent_id());
        return from ? from->id : BlockId{};
    }

    void mark_certified(const BlockId& id) {
        auto blk = block(id);
        assert(blk);
        certified_.insert(id);
        certified_by_height_[blk->height].insert(id);
    }

    BlockCheck attach(const BlockPtr& blk, const ProofCheck& proof_ok, InsertResult& result) {
        auto parent = block(blk->parent_id());
        assert(parent);
        auto on_path = [&](std::uint64_t tx_id) { return tx_on_path(parent->id, tx_id); };
        BlockCheck check = validate_block(*blk, params_, *parent, proof_ok, on_path);
        if (check != BlockCheck::Ok) return check;

        blocks_[blk->id] = blk;
        children_[parent->id].insert(blk->id);
        result.accepted.push_back(blk);

        // A child's embedded QC certifies its parent; pool those votes with
        // individually received ones.
        for (const auto& v : blk->parent_qc->votes) {
            auto out = add_vote(v);
            if (out.newly_certified) result.newly_certified.push_back(*out.newly_certified);
            if (out.com_quorum_reached) result.com_quorum_reached.push_back(*out.com_quorum_reached);
        }
        // Pending votes may already certify the newly attached block itself.
        auto it = tally_.find(blk->id);
        if (it != tally_.end()) {
            std::erase_if(it->second, [&](const auto& kv) {
                return kv.second.block_height != blk->height;
            });
        }
        if (it != tally_.end() && it->second.size() >= params_.quorum()) {
            mark_certified(blk->id);
            result.newly_certified.push_back(blk->id);
            if (com_count(blk->id) >= params_.quorum())
                result.com_quorum_reached.push_back(blk->id);
        }
        return BlockCheck::Ok;
    }

    ProtocolParams params_;
    std::map<BlockId, BlockPtr> blocks_;
    std::map<BlockId, std::set<BlockId>> children_;
    std::set<BlockId> certified_;
    std::map<std::uint64_t, std::set<BlockId>> certified_by_height_;
    std::vector<BlockId> committed_;  // index == height
    std::set<BlockId> committed_set_;
    std::map<BlockId, std::map<NodeId, Vote>> tally_;
    std::map<BlockId, std::vector<BlockPtr>> orphans_;  // missing parent -> waiting blocks
};

}  // namespace lbft
