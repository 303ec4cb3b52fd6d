#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <vector>

#include "lbft/core.hpp"
#include "lbft/lottery.hpp"
#include "lbft/protocol.hpp"

using namespace lbft;

namespace {

// Minimal harness around one reactor: a registry plus helpers that fabricate
// valid peer blocks and peer votes.
struct Bench {
    ProtocolParams params{1, 1};
    ProofRegistry registry;
    Node node;

    explicit Bench(NodeId id = 3, std::uint64_t seed = 7, ProtocolParams p = {1, 1})
        : params(p), node(id, p, true, true, seed, &registry) {}

    BlockPtr peer_block(const BlockPtr& parent, NodeId proposer,
                        const std::vector<Vote>& parent_votes, std::vector<Tx> txs = {}) {
        QuorumCertificate qc;
        if (parent->is_genesis()) {
            qc = genesis_qc(params);
        } else {
            auto r = qc_from_votes(parent_votes, params);
            REQUIRE(r.status == QcBuildStatus::Ok);
            qc = std::move(*r.qc);
        }
        BlockProof proof = registry.issue(proposer, 0.0);
        auto blk = Block::make(std::move(qc), std::move(txs), proof, parent->height + 1, proposer);
        registry.bind(proof, blk->id);
        return blk;
    }

    std::vector<Vote> com_votes(const BlockPtr& blk, std::initializer_list<NodeId> voters) {
        std::vector<Vote> votes;
        for (NodeId v : voters) votes.push_back(make_vote(v, blk->id, blk->height, VoteType::Com));
        return votes;
    }
};

std::optional<Vote> vote_in(const Outbox& ob) {
    for (const auto& msg : ob.out)
        if (const auto* vm = std::get_if<VoteMsg>(&msg)) return vm->vote;
    return std::nullopt;
}

}  // namespace

TEST_CASE("proposing extends the highest certified block", "[protocol]") {
    Bench b;
    BlockProof proof = b.registry.issue(3, 1.0);
    auto ob = b.node.on_proof_won(proof, b.registry);
    REQUIRE(ob.produced.size() == 1);
    auto blk = ob.produced[0];
    CHECK(blk->height == 1);
    CHECK(blk->parent_id() == Block::genesis()->id);
    CHECK(blk->proposer == 3);
    // the proposer voted for its own block
    REQUIRE(ob.cast.size() == 1);
    CHECK(ob.cast[0].type == VoteType::Com);
    CHECK(b.node.tree().contains(blk->id));
}

TEST_CASE("tip selection with a fixed seed is reproducible", "[protocol]") {
    auto run_once = [](std::uint64_t seed) {
        Bench b(3, seed);
        auto b1 = b.peer_block(Block::genesis(), 0, {});
        auto b1p = b.peer_block(Block::genesis(), 1, {});
        b.node.on_block_received(b1);
        b.node.on_block_received(b1p);
        for (const auto& v : b.com_votes(b1, {0, 1, 2})) b.node.on_vote_received(v);
        for (const auto& v : b.com_votes(b1p, {0, 1, 2})) b.node.on_vote_received(v);
        REQUIRE(b.node.tree().highest_certified().size() == 2);
        BlockProof proof = b.registry.issue(3, 2.0);
        auto ob = b.node.on_proof_won(proof, b.registry);
        REQUIRE(ob.produced.size() == 1);
        return ob.produced[0]->parent_id();
    };
    for (std::uint64_t seed : {1ull, 42ull, 999ull}) CHECK(run_once(seed) == run_once(seed));
}

TEST_CASE("pending txs already on the ancestor path are excluded", "[protocol]") {
    Bench b;
    auto b1 = b.peer_block(Block::genesis(), 0, {}, {Tx{10, {0x10}}});
    b.node.on_block_received(b1);
    for (const auto& v : b.com_votes(b1, {0, 1, 2})) b.node.on_vote_received(v);

    b.node.on_tx(Tx{10, {0x10}});  // already in b1
    b.node.on_tx(Tx{11, {0x11}});
    BlockProof proof = b.registry.issue(3, 2.0);
    auto ob = b.node.on_proof_won(proof, b.registry);
    REQUIRE(ob.produced.size() == 1);
    REQUIRE(ob.produced[0]->txs.size() == 1);
    CHECK(ob.produced[0]->txs[0].id == 11);
}

TEST_CASE("voting rule picks the vote type from conflicting history", "[protocol]") {
    SECTION("sibling of the parent voted earlier forces a wit vote") {
        // voter endorsed a conflicting block at the parent's height, then a
        // child of the other branch arrives
        Bench b;
        auto bk = b.peer_block(Block::genesis(), 0, {});
        auto bkp = b.peer_block(Block::genesis(), 1, {});
        b.node.on_block_received(bk);
        auto ob_bkp = b.node.on_block_received(bkp);
        CHECK(vote_in(ob_bkp));  // voted for the sibling too (same height)
        for (const auto& v : b.com_votes(bk, {0, 1, 2})) b.node.on_vote_received(v);

        auto bk1 = b.peer_block(bk, 0, b.com_votes(bk, {0, 1, 2}));
        auto d = [&] {
            auto ob = b.node.on_block_received(bk1);
            auto v = vote_in(ob);
            REQUIRE(v);
            return *v;
        }();
        CHECK(d.type == VoteType::Wit);
        REQUIRE(d.conflict);
        CHECK(*d.conflict == bkp->id);
    }
    SECTION("no conflicting history yields a com vote") {
        Bench b;
        auto bk = b.peer_block(Block::genesis(), 0, {});
        b.node.on_block_received(bk);
        for (const auto& v : b.com_votes(bk, {0, 1, 2})) b.node.on_vote_received(v);
        auto bk1 = b.peer_block(bk, 0, b.com_votes(bk, {0, 1, 2}));
        auto ob = b.node.on_block_received(bk1);
        auto v = vote_in(ob);
        REQUIRE(v);
        CHECK(v->type == VoteType::Com);
    }
    SECTION("blocks not extending the highest certified tip get no vote") {
        Bench b;
        auto b1 = b.peer_block(Block::genesis(), 0, {});
        b.node.on_block_received(b1);
        for (const auto& v : b.com_votes(b1, {0, 1, 2})) b.node.on_vote_received(v);
        // stale proposal: extends genesis while height 1 is certified
        auto stale = b.peer_block(Block::genesis(), 1, {});
        auto d = b.node.decide_vote(*[&] {
            b.node.on_block_received(stale);
            return stale;
        }());
        CHECK_FALSE(d.voted);
        CHECK(d.reason == NoVoteReason::NotHighest);
    }
}

TEST_CASE("a voter endorses each block at most once", "[protocol][property]") {
    Bench b;
    auto b1 = b.peer_block(Block::genesis(), 0, {});
    auto first = b.node.on_block_received(b1);
    CHECK(vote_in(first));
    auto second = b.node.on_block_received(b1);
    CHECK_FALSE(vote_in(second));
    CHECK(second.accepted.empty());

    // same across an arbitrary redelivery storm
    int votes_seen = 0;
    for (int i = 0; i < 5; ++i) {
        auto ob = b.node.on_block_received(b1);
        if (vote_in(ob)) ++votes_seen;
    }
    CHECK(votes_seen == 0);
}

TEST_CASE("sibling blocks at one height each get a vote", "[protocol]") {
    Bench b;
    auto b1 = b.peer_block(Block::genesis(), 0, {});
    auto b1p = b.peer_block(Block::genesis(), 1, {});
    auto ob1 = b.node.on_block_received(b1);
    auto ob2 = b.node.on_block_received(b1p);
    REQUIRE(vote_in(ob1));
    REQUIRE(vote_in(ob2));
    CHECK(vote_in(ob1)->type == VoteType::Com);
    // the sibling extends genesis too: no conflict with *its parent*
    CHECK(vote_in(ob2)->type == VoteType::Com);
}

TEST_CASE("votes received drive certification and commits", "[protocol]") {
    // a proposer-only observer, so every counted vote is external
    Bench b(3, 7, {1, 1});
    Node observer(3, b.params, true, false, 7, &b.registry);
    auto b1 = b.peer_block(Block::genesis(), 0, {});
    auto b2 = b.peer_block(b1, 0, b.com_votes(b1, {0, 1, 2}));
    observer.on_block_received(b1);
    observer.on_block_received(b2);

    SECTION("the third com vote certifies and commits the parent") {
        observer.on_vote_received(make_vote(0, b2->id, 2, VoteType::Com));
        observer.on_vote_received(make_vote(1, b2->id, 2, VoteType::Com));
        auto ob = observer.on_vote_received(make_vote(2, b2->id, 2, VoteType::Com));
        REQUIRE(ob.committed.size() == 1);
        CHECK(ob.committed[0]->id == b1->id);
    }
    SECTION("a mixed certificate certifies but commits nothing") {
        observer.on_vote_received(make_vote(0, b2->id, 2, VoteType::Com));
        observer.on_vote_received(make_vote(1, b2->id, 2, VoteType::Wit, b1->id));
        auto ob = observer.on_vote_received(make_vote(2, b2->id, 2, VoteType::Com));
        CHECK(!ob.newly_certified.empty());
        CHECK(ob.committed.empty());
        // a later com vote completes the com quorum and the commit fires
        auto ob2 = observer.on_vote_received(make_vote(3, b2->id, 2, VoteType::Com));
        REQUIRE(ob2.committed.size() == 1);
        CHECK(ob2.committed[0]->id == b1->id);
    }
    SECTION("votes for unknown blocks are tallied quietly") {
        auto b3 = b.peer_block(b2, 0, b.com_votes(b2, {0, 1, 2}));
        for (NodeId v = 0; v < 3; ++v) {
            auto ob = observer.on_vote_received(make_vote(v, b3->id, 3, VoteType::Com));
            CHECK(ob.committed.empty());
        }
        // block arrives later: its embedded QC com-certifies b2, and the
        // pending tally certifies b3 itself, so the cascade commits b1, b2
        auto ob = observer.on_block_received(b3);
        CHECK(!ob.newly_certified.empty());
        REQUIRE(ob.committed.size() == 2);
        CHECK(ob.committed[0]->id == b1->id);
        CHECK(ob.committed[1]->id == b2->id);
    }
}

TEST_CASE("orphaned blocks are voted on once their parent arrives", "[protocol]") {
    Bench b;
    auto b1 = b.peer_block(Block::genesis(), 0, {});
    auto b2 = b.peer_block(b1, 0, b.com_votes(b1, {0, 1, 2}));
    auto ob_orphan = b.node.on_block_received(b2);
    CHECK(ob_orphan.accepted.empty());
    CHECK_FALSE(vote_in(ob_orphan));

    auto ob = b.node.on_block_received(b1);
    CHECK(ob.accepted.size() == 2);
    // votes for both: b1 at its arrival, b2 right after re-processing
    CHECK(ob.cast.size() == 2);
}

TEST_CASE("non-voters never vote", "[protocol]") {
    ProofRegistry registry;
    Node proposer_only(0, ProtocolParams{1, 1}, true, false, 1, &registry);
    QuorumCertificate qc = genesis_qc(ProtocolParams{1, 1});
    BlockProof proof = registry.issue(1, 0.0);
    auto blk = Block::make(qc, {}, proof, 1, 1);
    registry.bind(proof, blk->id);
    auto ob = proposer_only.on_block_received(blk);
    CHECK_FALSE(vote_in(ob));
    CHECK(proposer_only.decide_vote(*blk).reason == NoVoteReason::NotAVoter);
}

TEST_CASE("identical event sequences produce identical outboxes", "[protocol][property]") {
    auto run = [](std::uint64_t seed) {
        Bench b(3, seed);
        std::vector<std::string> log;
        auto b1 = b.peer_block(Block::genesis(), 0, {});
        auto b1p = b.peer_block(Block::genesis(), 1, {});
        for (const auto& blk : {b1, b1p}) {
            auto ob = b.node.on_block_received(blk);
            for (const auto& v : ob.cast) log.push_back(v.block.hex() + ":" + std::to_string(int(v.type)));
        }
        for (const auto& v : b.com_votes(b1, {0, 1, 2})) b.node.on_vote_received(v);
        for (const auto& v : b.com_votes(b1p, {0, 1})) b.node.on_vote_received(v);
        BlockProof proof = b.registry.issue(3, 2.0);
        auto ob = b.node.on_proof_won(proof, b.registry);
        for (const auto& blk : ob.produced) log.push_back(blk->id.hex());
        return log;
    };
    CHECK(run(5) == run(5));
    CHECK(run(17) == run(17));
}
