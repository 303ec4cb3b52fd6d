#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "lbft/detail/rng.hpp"
#include "lbft/detail/sha256.hpp"

namespace lbft {

using NodeId = std::uint32_t;

inline constexpr NodeId kGenesisProposer = 0xffffffffu;

// Population layout: 2m+1 proposers occupy node ids [0, 2m+1), 3f+1 voters
// occupy [0, 3f+1). A node may hold both roles; the node count is the larger
// of the two populations.
struct ProtocolParams {
    std::uint32_t m = 0;  // Byzantine proposer budget
    std::uint32_t f = 0;  // Byzantine voter budget

    std::uint32_t num_proposers() const { return 2 * m + 1; }
    std::uint32_t num_voters() const { return 3 * f + 1; }
    std::uint32_t quorum() const { return 2 * f + 1; }
    std::uint32_t num_nodes() const { return std::max(num_proposers(), num_voters()); }

    bool is_proposer(NodeId id) const { return id < num_proposers(); }
    bool is_voter(NodeId id) const { return id < num_voters(); }

    friend bool operator==(const ProtocolParams&, const ProtocolParams&) = default;
};

struct BlockId {
    std::array<std::uint8_t, 32> digest{};

    auto operator<=>(const BlockId&) const = default;

    std::string hex() const {
        static constexpr char alphabet[] = "0123456789abcdef";
        std::string out;
        out.reserve(64);
        for (auto b : digest) {
            out.push_back(alphabet[b >> 4]);
            out.push_back(alphabet[b & 0x0f]);
        }
        return out;
    }

    // enough to eyeball in logs
    std::string short_hex() const { return hex().substr(0, 12); }
};

struct Tx {
    std::uint64_t id = 0;
    std::vector<std::uint8_t> payload;

    friend bool operator==(const Tx&, const Tx&) = default;
};

enum class VoteType : std::uint8_t { Com = 0, Wit = 1 };

// A vote endorses one block. Wit votes additionally disclose one conflicting
// block, of height no lower than the voted block's parent, that the voter
// endorsed earlier.
struct Vote {
    BlockId block;
    std::uint64_t block_height = 0;
    NodeId voter = 0;
    VoteType type = VoteType::Com;
    std::optional<BlockId> conflict;
    std::uint64_t tag = 0;  // simulated authentication tag

    friend bool operator==(const Vote&, const Vote&) = default;
};

struct QuorumCertificate {
    BlockId block;
    std::uint64_t block_height = 0;
    std::vector<Vote> votes;  // deduplicated by voter, sorted by voter id

    std::size_t com_count() const {
        return static_cast<std::size_t>(
            std::count_if(votes.begin(), votes.end(),
                          [](const Vote& v) { return v.type == VoteType::Com; }));
    }
};

inline std::size_t qc_com_count(const QuorumCertificate& qc) { return qc.com_count(); }

// Lottery credential granting the right to produce one block. Verification
// is an issued-by-the-lottery check; see lottery.hpp.
struct BlockProof {
    NodeId winner = kGenesisProposer;
    double win_time = 0.0;
    std::uint64_t nonce = 0;

    friend bool operator==(const BlockProof&, const BlockProof&) = default;
};

struct Block;
using BlockPtr = std::shared_ptr<const Block>;

struct Block {
    BlockId id;
    std::uint64_t height = 0;
    NodeId proposer = kGenesisProposer;
    BlockProof proof;
    std::optional<QuorumCertificate> parent_qc;  // absent only for genesis
    std::vector<Tx> txs;

    bool is_genesis() const { return !parent_qc.has_value(); }
    BlockId parent_id() const { return parent_qc ? parent_qc->block : BlockId{}; }

    static BlockPtr make(QuorumCertificate parent_qc, std::vector<Tx> txs, BlockProof proof,
                         std::uint64_t height, NodeId proposer);
    static BlockPtr genesis();
};

// ---------------------------------------------------------------------------
// Canonical byte encoding (schema v1, documented in docs/formats.md).
// Integers little-endian fixed width; every variable-length field is length
// prefixed, so the encoding is injective and ids are stable across runs.

namespace detail {

inline void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    put_u64(out, bits);
}

inline void put_id(std::vector<std::uint8_t>& out, const BlockId& id) {
    out.insert(out.end(), id.digest.begin(), id.digest.end());
}

// Byte image a vote tag authenticates: everything except the tag itself.
inline std::vector<std::uint8_t> vote_preimage(const Vote& v) {
    std::vector<std::uint8_t> out;
    out.reserve(64);
    const char* domain = "LBFT/vote/1";
    out.insert(out.end(), domain, domain + 11);
    put_u32(out, v.voter);
    put_id(out, v.block);
    put_u64(out, v.block_height);
    put_u8(out, static_cast<std::uint8_t>(v.type));
    put_u8(out, v.conflict ? 1 : 0);
    if (v.conflict) put_id(out, *v.conflict);
    return out;
}

inline std::uint64_t voter_secret(NodeId voter) {
    return splitmix64(0x5ec7e7a915ull + voter);
}

}  // namespace detail

// The simulator's stand-in for a signature: a keyed digest the adversary can
// only produce for identities it controls (enforced structurally -- honest
// code and strategies sign exclusively with their own ids).
inline std::uint64_t vote_tag(const Vote& v) {
    auto pre = detail::vote_preimage(v);
    std::uint64_t secret = detail::voter_secret(v.voter);
    detail::Sha256 h;
    h.update(&secret, sizeof(secret));
    h.update(pre.data(), pre.size());
    auto d = h.finish();
    std::uint64_t tag = 0;
    for (int i = 0; i < 8; ++i) tag |= static_cast<std::uint64_t>(d[i]) << (8 * i);
    return tag;
}

inline Vote make_vote(NodeId voter, const BlockId& block, std::uint64_t height, VoteType type,
                      std::optional<BlockId> conflict = std::nullopt) {
    Vote v{block, height, voter, type, std::move(conflict), 0};
    v.tag = vote_tag(v);
    return v;
}

inline bool verify_vote(const Vote& v) {
    if (v.type == VoteType::Wit && !v.conflict.has_value()) return false;
    if (v.type == VoteType::Com && v.conflict.has_value()) return false;
    return v.tag == vote_tag(v);
}

inline std::vector<std::uint8_t> canonical_encode(const Block& b) {
    std::vector<std::uint8_t> out;
    out.reserve(160 + 64 * (b.parent_qc ? b.parent_qc->votes.size() : 0));
    detail::put_u8(out, 0x01);  // schema version
    detail::put_u8(out, b.is_genesis() ? 1 : 0);
    detail::put_u64(out, b.height);
    detail::put_u32(out, b.proposer);
    detail::put_u32(out, b.proof.winner);
    detail::put_f64(out, b.proof.win_time);
    detail::put_u64(out, b.proof.nonce);
    if (!b.is_genesis()) {
        const auto& qc = *b.parent_qc;
        detail::put_id(out, qc.block);
        detail::put_u64(out, qc.block_height);
        detail::put_u32(out, static_cast<std::uint32_t>(qc.votes.size()));
        for (const auto& v : qc.votes) {
            detail::put_u32(out, v.voter);
            detail::put_u8(out, static_cast<std::uint8_t>(v.type));
            detail::put_u8(out, v.conflict ? 1 : 0);
            if (v.conflict) detail::put_id(out, *v.conflict);
            detail::put_u64(out, v.tag);
        }
    }
    detail::put_u32(out, static_cast<std::uint32_t>(b.txs.size()));
    for (const auto& tx : b.txs) {
        detail::put_u64(out, tx.id);
        detail::put_u32(out, static_cast<std::uint32_t>(tx.payload.size()));
        out.insert(out.end(), tx.payload.begin(), tx.payload.end());
    }
    return out;
}

inline BlockId compute_block_id(const Block& b) {
    auto bytes = canonical_encode(b);
    return BlockId{detail::Sha256::digest(bytes.data(), bytes.size())};
}

inline BlockPtr Block::make(QuorumCertificate parent_qc, std::vector<Tx> txs, BlockProof proof,
                            std::uint64_t height, NodeId proposer) {
    auto b = std::make_shared<Block>();
    b->height = height;
    b->proposer = proposer;
    b->proof = proof;
    b->parent_qc = std::move(parent_qc);
    b->txs = std::move(txs);
    b->id = compute_block_id(*b);
    return b;
}

inline BlockPtr Block::genesis() {
    static const BlockPtr g = [] {
        auto b = std::make_shared<Block>();
        b->height = 0;
        b->proposer = kGenesisProposer;
        b->proof = BlockProof{};
        b->id = compute_block_id(*b);
        return b;
    }();
    return g;
}

// Well-known certificate for genesis: com votes by voters 0..2f, derivable by
// every node without any exchange. Height-1 blocks embed it.
inline QuorumCertificate genesis_qc(const ProtocolParams& params) {
    QuorumCertificate qc;
    qc.block = Block::genesis()->id;
    qc.block_height = 0;
    for (NodeId v = 0; v < params.quorum(); ++v)
        qc.votes.push_back(make_vote(v, qc.block, 0, VoteType::Com));
    return qc;
}

// ---------------------------------------------------------------------------
// Validation

enum class BlockCheck : std::uint8_t { Ok, BadQc, BadHeight, BadProof, DuplicateTx };

inline const char* to_string(BlockCheck c) {
    switch (c) {
        case BlockCheck::Ok: return "ok";
        case BlockCheck::BadQc: return "bad_qc";
        case BlockCheck::BadHeight: return "bad_height";
        case BlockCheck::BadProof: return "bad_proof";
        case BlockCheck::DuplicateTx: return "duplicate_tx";
    }
    return "?";
}

// Checks that need no parent block: vote signatures, voter validity,
// dedup, quorum size, and internal consistency of the referenced block/height.
inline bool qc_well_formed(const QuorumCertificate& qc, const ProtocolParams& params) {
    if (qc.votes.size() < params.quorum()) return false;
    NodeId prev_voter = 0;
    bool first = true;
    for (const auto& v : qc.votes) {
        if (!params.is_voter(v.voter)) return false;
        if (!first && v.voter <= prev_voter) return false;  // sorted implies deduped
        prev_voter = v.voter;
        first = false;
        if (v.block != qc.block || v.block_height != qc.block_height) return false;
        if (!verify_vote(v)) return false;
    }
    return true;
}

inline bool validate_qc(const QuorumCertificate& qc, const BlockId& parent, std::uint64_t parent_height,
                        const ProtocolParams& params) {
    return qc.block == parent && qc.block_height == parent_height && qc_well_formed(qc, params);
}

using ProofCheck = std::function<bool(const BlockProof&, const Block&)>;
using TxOnPath = std::function<bool(std::uint64_t tx_id)>;

inline BlockCheck validate_block(const Block& block, const ProtocolParams& params,
                                 const Block& parent, const ProofCheck& proof_ok,
                                 const TxOnPath& tx_on_ancestor_path) {
    if (block.is_genesis()) return BlockCheck::BadQc;  // genesis is never re-validated
    if (!validate_qc(*block.parent_qc, parent.id, parent.height, params)) return BlockCheck::BadQc;
    if (block.height != parent.height + 1) return BlockCheck::BadHeight;
    if (!proof_ok(block.proof, block)) return BlockCheck::BadProof;
    std::set<std::uint64_t> seen;
    for (const auto& tx : block.txs) {
        if (!seen.insert(tx.id).second) return BlockCheck::DuplicateTx;
        if (tx_on_ancestor_path(tx.id)) return BlockCheck::DuplicateTx;
    }
    return BlockCheck::Ok;
}

// ---------------------------------------------------------------------------
// QC assembly

enum class QcBuildStatus : std::uint8_t { Ok, Insufficient, MixedBlocks };

struct QcBuildResult {
    QcBuildStatus status = QcBuildStatus::Insufficient;
    std::optional<QuorumCertificate> qc;
};

// Deduplicates by voter (first vote per voter wins) and certifies when the
// distinct-voter count reaches the quorum. Vote types are preserved;
// certification is type-blind.
inline QcBuildResult qc_from_votes(std::span<const Vote> votes, const ProtocolParams& params) {
    if (votes.empty()) return {QcBuildStatus::Insufficient, std::nullopt};
    std::map<NodeId, Vote> by_voter;
    for (const auto& v : votes) {
        if (v.block != votes.front().block) return {QcBuildStatus::MixedBlocks, std::nullopt};
        by_voter.try_emplace(v.voter, v);
    }
    if (by_voter.size() < params.quorum()) return {QcBuildStatus::Insufficient, std::nullopt};
    QuorumCertificate qc;
    qc.block = votes.front().block;
    qc.block_height = votes.front().block_height;
    for (auto& [voter, v] : by_voter) qc.votes.push_back(std::move(v));
    return {QcBuildStatus::Ok, std::move(qc)};
}

}  // namespace lbft
