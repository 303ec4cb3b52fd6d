#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <vector>

#include "lbft/core.hpp"
#include "lbft/detail/sha256.hpp"

using namespace lbft;

namespace {

std::string hex_of(const std::array<std::uint8_t, 32>& d) {
    return BlockId{d}.hex();
}

// Test-only stand-ins: no proof registry, no ancestor chain.
const ProofCheck accept_proof = [](const BlockProof&, const Block&) { return true; };
const TxOnPath no_ancestor_tx = [](std::uint64_t) { return false; };

QuorumCertificate qc_of(const BlockPtr& blk, std::initializer_list<NodeId> voters,
                        std::initializer_list<VoteType> types) {
    QuorumCertificate qc;
    qc.block = blk->id;
    qc.block_height = blk->height;
    auto tit = types.begin();
    for (NodeId v : voters) {
        VoteType t = tit != types.end() ? *tit++ : VoteType::Com;
        std::optional<BlockId> conflict;
        if (t == VoteType::Wit) conflict = Block::genesis()->id;
        qc.votes.push_back(make_vote(v, blk->id, blk->height, t, conflict));
    }
    return qc;
}

}  // namespace

TEST_CASE("sha256 matches the reference vectors", "[core]") {
    CHECK(hex_of(detail::Sha256::digest("", 0)) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(hex_of(detail::Sha256::digest("abc", 3)) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    // multi-block message
    std::string long_msg = "abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq";
    CHECK(hex_of(detail::Sha256::digest(long_msg.data(), long_msg.size())) ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("protocol params derive the population sizes", "[core]") {
    ProtocolParams p{1, 1};
    CHECK(p.num_proposers() == 3);
    CHECK(p.num_voters() == 4);
    CHECK(p.quorum() == 3);
    CHECK(p.quorum() * 2 > p.num_voters());
    ProtocolParams big{3, 2};
    CHECK(big.num_proposers() == 7);
    CHECK(big.num_voters() == 7);
    CHECK(big.quorum() == 5);
    CHECK(big.quorum() * 2 > big.num_voters());
}

TEST_CASE("canonical encoding is deterministic and genesis is pinned", "[core]") {
    auto g = Block::genesis();
    CHECK(g->height == 0);
    CHECK(g->is_genesis());
    CHECK(canonical_encode(*g) == canonical_encode(*g));
    // frozen golden: any change to the byte schema must be deliberate
    CHECK(canonical_encode(*g).size() == 38);
    CHECK(g->id.hex() == "fe9a252500cfe9b56dbc70bd2d6636cf59a12c8f12f31e9cbda3faebba92510e");
    CHECK(g->id == Block::genesis()->id);
}

TEST_CASE("blocks differing in one tx get different ids", "[core]") {
    ProtocolParams p{1, 1};
    auto qc = genesis_qc(p);
    auto a = Block::make(qc, {Tx{1, {0x01}}, Tx{2, {0x02}}}, BlockProof{0, 1.0, 7}, 1, 0);
    auto b = Block::make(qc, {Tx{1, {0x01}}, Tx{3, {0x02}}}, BlockProof{0, 1.0, 7}, 1, 0);
    auto a2 = Block::make(qc, {Tx{1, {0x01}}, Tx{2, {0x02}}}, BlockProof{0, 1.0, 7}, 1, 0);
    CHECK(a->id != b->id);
    CHECK(a->id == a2->id);
}

TEST_CASE("vote tags authenticate the vote content", "[core]") {
    auto g = Block::genesis();
    Vote v = make_vote(2, g->id, 0, VoteType::Com);
    CHECK(verify_vote(v));
    Vote forged = v;
    forged.voter = 3;  // someone else's identity, same tag
    CHECK_FALSE(verify_vote(forged));
    Vote flipped = v;
    flipped.type = VoteType::Wit;
    flipped.conflict = g->id;
    CHECK_FALSE(verify_vote(flipped));
    // wit votes must carry a conflict reference
    Vote wit{g->id, 0, 2, VoteType::Wit, std::nullopt, 0};
    wit.tag = vote_tag(wit);
    CHECK_FALSE(verify_vote(wit));
}

TEST_CASE("validate_block accepts the base case and names failures", "[core]") {
    ProtocolParams p{1, 1};
    auto g = Block::genesis();

    SECTION("height-1 block with a full genesis QC and fresh txs is valid") {
        auto blk = Block::make(genesis_qc(p), {Tx{1, {0xaa}}}, BlockProof{0, 1.0, 1}, 1, 0);
        CHECK(validate_block(*blk, p, *g, accept_proof, no_ancestor_tx) == BlockCheck::Ok);
    }
    SECTION("a 2f-vote certificate is rejected as bad_qc") {
        auto qc = qc_of(g, {0, 1}, {});  // 2 votes, quorum is 3
        auto blk = Block::make(qc, {}, BlockProof{0, 1.0, 1}, 1, 0);
        CHECK(validate_block(*blk, p, *g, accept_proof, no_ancestor_tx) == BlockCheck::BadQc);
    }
    SECTION("wrong height is rejected") {
        auto blk = Block::make(genesis_qc(p), {}, BlockProof{0, 1.0, 1}, 2, 0);
        CHECK(validate_block(*blk, p, *g, accept_proof, no_ancestor_tx) == BlockCheck::BadHeight);
    }
    SECTION("failing proof is rejected") {
        auto blk = Block::make(genesis_qc(p), {}, BlockProof{0, 1.0, 1}, 1, 0);
        ProofCheck reject = [](const BlockProof&, const Block&) { return false; };
        CHECK(validate_block(*blk, p, *g, reject, no_ancestor_tx) == BlockCheck::BadProof);
    }
    SECTION("a tx id repeated from an ancestor is rejected") {
        auto blk = Block::make(genesis_qc(p), {Tx{42, {}}}, BlockProof{0, 1.0, 1}, 1, 0);
        TxOnPath grandparent_has_42 = [](std::uint64_t id) { return id == 42; };
        CHECK(validate_block(*blk, p, *g, accept_proof, grandparent_has_42) ==
              BlockCheck::DuplicateTx);
    }
    SECTION("a tx id repeated inside the block is rejected") {
        auto blk = Block::make(genesis_qc(p), {Tx{7, {}}, Tx{7, {}}}, BlockProof{0, 1.0, 1}, 1, 0);
        CHECK(validate_block(*blk, p, *g, accept_proof, no_ancestor_tx) == BlockCheck::DuplicateTx);
    }
    SECTION("tampered vote inside the QC is rejected") {
        auto qc = genesis_qc(p);
        qc.votes[1].voter = 99;
        auto blk = Block::make(qc, {}, BlockProof{0, 1.0, 1}, 1, 0);
        CHECK(validate_block(*blk, p, *g, accept_proof, no_ancestor_tx) == BlockCheck::BadQc);
    }
}

TEST_CASE("qc_from_votes deduplicates and preserves vote types", "[core]") {
    ProtocolParams p{1, 1};
    auto g = Block::genesis();

    SECTION("mixed com and wit votes certify; com count reflects the mix") {
        std::vector<Vote> votes{make_vote(1, g->id, 0, VoteType::Com),
                                make_vote(2, g->id, 0, VoteType::Com),
                                make_vote(3, g->id, 0, VoteType::Wit, g->id)};
        auto r = qc_from_votes(votes, p);
        REQUIRE(r.status == QcBuildStatus::Ok);
        CHECK(r.qc->votes.size() == 3);
        CHECK(qc_com_count(*r.qc) == 2);
    }
    SECTION("duplicate voters collapse below the quorum") {
        std::vector<Vote> votes{make_vote(1, g->id, 0, VoteType::Com),
                                make_vote(1, g->id, 0, VoteType::Com),
                                make_vote(2, g->id, 0, VoteType::Com)};
        auto r = qc_from_votes(votes, p);
        CHECK(r.status == QcBuildStatus::Insufficient);
    }
    SECTION("f=2: five distinct com votes build a five-com QC") {
        ProtocolParams p2{3, 2};
        std::vector<Vote> votes;
        for (NodeId v = 0; v < 5; ++v) votes.push_back(make_vote(v, g->id, 0, VoteType::Com));
        auto r = qc_from_votes(votes, p2);
        REQUIRE(r.status == QcBuildStatus::Ok);
        CHECK(qc_com_count(*r.qc) == 5);
    }
    SECTION("votes for different blocks are refused") {
        ProtocolParams p1{1, 1};
        auto blk = Block::make(genesis_qc(p1), {}, BlockProof{0, 1.0, 1}, 1, 0);
        std::vector<Vote> votes{make_vote(1, g->id, 0, VoteType::Com),
                                make_vote(2, blk->id, 1, VoteType::Com)};
        CHECK(qc_from_votes(votes, p1).status == QcBuildStatus::MixedBlocks);
    }
}

TEST_CASE("qc com counting", "[core]") {
    auto g = Block::genesis();
    CHECK(qc_com_count(qc_of(g, {0, 1, 2}, {VoteType::Com, VoteType::Com, VoteType::Com})) == 3);
    CHECK(qc_com_count(qc_of(g, {0, 1, 2}, {VoteType::Com, VoteType::Com, VoteType::Wit})) == 2);
    CHECK(qc_com_count(qc_of(g, {0, 1, 2}, {VoteType::Wit, VoteType::Wit, VoteType::Wit})) == 0);
}

// Any two quorums over the same voter population intersect in at least f+1
// voters, so with at most f corrupted there is always a shared honest voter.
// Exhaustive over all quorum pairs and corruption sets for f up to 3.
TEST_CASE("quorum intersection always contains an honest voter", "[core][property]") {
    for (std::uint32_t f = 1; f <= 3; ++f) {
        std::uint32_t voters = 3 * f + 1;
        std::uint32_t quorum = 2 * f + 1;
        std::vector<std::uint32_t> quorums;
        for (std::uint32_t mask = 0; mask < (1u << voters); ++mask)
            if (static_cast<std::uint32_t>(__builtin_popcount(mask)) == quorum)
                quorums.push_back(mask);
        std::uint32_t min_intersection = voters;
        for (std::uint32_t a : quorums)
            for (std::uint32_t b : quorums)
                min_intersection = std::min(
                    min_intersection, static_cast<std::uint32_t>(__builtin_popcount(a & b)));
        CHECK(min_intersection == f + 1);
        // with any f-subset corrupted, at least one common honest voter remains
        CHECK(min_intersection > f);
    }
}

TEST_CASE("validate_block is pure", "[core][property]") {
    ProtocolParams p{1, 1};
    auto g = Block::genesis();
    auto blk = Block::make(genesis_qc(p), {Tx{5, {0x05}}}, BlockProof{1, 2.5, 3}, 1, 1);
    auto first = validate_block(*blk, p, *g, accept_proof, no_ancestor_tx);
    for (int i = 0; i < 10; ++i)
        CHECK(validate_block(*blk, p, *g, accept_proof, no_ancestor_tx) == first);
}
