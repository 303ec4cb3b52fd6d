#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "lbft/core.hpp"
#include "lbft/lottery.hpp"

using namespace lbft;

TEST_CASE("lottery rates split between honest and adversarial streams", "[lottery]") {
    LotteryParams p{1.0, 0.2, 7};
    CHECK(p.lambda_honest() == Catch::Approx(0.8));
    CHECK(p.lambda_adversary() == Catch::Approx(0.2));
    CHECK(p.lambda_adversary() < p.lambda_honest());
    CHECK(p.corrupted_proposer_count() == 2);  // ceil(0.2 * 7)
    CHECK(LotteryParams{1.0, 0.0, 3}.corrupted_proposer_count() == 0);
}

TEST_CASE("beta outside [0, m/(2m+1)] is rejected", "[lottery]") {
    CHECK_THROWS(LotteryParams{1.0, 0.5, 3}.validate());   // m=1: max 1/3
    CHECK_THROWS(LotteryParams{1.0, -0.1, 3}.validate());
    CHECK_THROWS(LotteryParams{0.0, 0.0, 3}.validate());
    CHECK_NOTHROW(LotteryParams{1.0, 1.0 / 3.0, 3}.validate());
}

TEST_CASE("same seed, same win sequence", "[lottery]") {
    LotteryParams p{2.0, 0.25, 7};
    auto a = sample_win_times(p, 500.0, 42);
    auto b = sample_win_times(p, 500.0, 42);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].time == b[i].time);
        CHECK(a[i].proposer == b[i].proposer);
        CHECK(a[i].adversarial == b[i].adversarial);
    }
    auto c = sample_win_times(p, 500.0, 43);
    CHECK(a.size() != c.size());  // astronomically unlikely to tie exactly
}

TEST_CASE("beta zero makes every win honest", "[lottery]") {
    LotteryParams p{1.0, 0.0, 3};
    for (const auto& win : sample_win_times(p, 2000.0, 7)) {
        CHECK_FALSE(win.adversarial);
        CHECK(win.proposer < 3);
    }
}

// Law-of-large-numbers checks on the Poisson model: total arrivals within
// 3 sigma of lambda * horizon, empirical group rates within 1%, and the
// inter-arrival moments matching the exponential distribution within 2%.
TEST_CASE("arrival statistics match the Poisson model", "[lottery][statistical]") {
    const double lambda = 1.0;
    const double horizon = 1e6;
    LotteryParams p{lambda, 0.25, 7};
    auto wins = sample_win_times(p, horizon, 20260810);

    const double expect = lambda * horizon;
    const double sigma = std::sqrt(expect);
    CHECK(std::fabs(static_cast<double>(wins.size()) - expect) < 3.0 * sigma);

    std::size_t adversarial = 0;
    for (const auto& w : wins) adversarial += w.adversarial ? 1 : 0;
    double adv_rate = static_cast<double>(adversarial) / horizon;
    double honest_rate = static_cast<double>(wins.size() - adversarial) / horizon;
    CHECK(std::fabs(adv_rate - p.lambda_adversary()) < 0.01 * lambda);
    CHECK(std::fabs(honest_rate - p.lambda_honest()) < 0.01 * lambda);

    double sum = 0.0, sum_sq = 0.0;
    double prev = 0.0;
    for (const auto& w : wins) {
        double gap = w.time - prev;
        prev = w.time;
        sum += gap;
        sum_sq += gap * gap;
    }
    double n = static_cast<double>(wins.size());
    double mean = sum / n;
    double var = sum_sq / n - mean * mean;
    CHECK(std::fabs(mean - 1.0 / lambda) < 0.02 / lambda);
    CHECK(std::fabs(var - 1.0 / (lambda * lambda)) < 0.02 / (lambda * lambda));
}

TEST_CASE("adversarial wins land on corrupted proposers only", "[lottery]") {
    LotteryParams p{1.0, 0.25, 7};  // corrupted: indices 0, 1
    for (const auto& w : sample_win_times(p, 5000.0, 5)) {
        if (w.adversarial)
            CHECK(w.proposer < 2);
        else {
            CHECK(w.proposer >= 2);
            CHECK(w.proposer < 7);
        }
    }
}

TEST_CASE("proofs bind to one block and one proposer", "[lottery]") {
    ProtocolParams params{1, 1};
    ProofRegistry reg;
    BlockProof proof = reg.issue(1, 3.0);
    auto qc = genesis_qc(params);
    auto blk = Block::make(qc, {}, proof, 1, 1);
    reg.bind(proof, blk->id);
    CHECK(reg.verify(proof, *blk));
    CHECK(verify_proof(reg, proof, *blk));

    SECTION("reuse for a second block fails") {
        auto other = Block::make(qc, {Tx{1, {}}}, proof, 1, 1);
        reg.bind(proof, other->id);  // second bind is a no-op
        CHECK_FALSE(reg.verify(proof, *other));
        CHECK(reg.verify(proof, *blk));
    }
    SECTION("mismatched proposer fails") {
        BlockProof forged = proof;
        forged.winner = 2;
        CHECK_FALSE(reg.verify(forged, *blk));
        auto stolen = Block::make(qc, {}, proof, 1, 2);
        CHECK_FALSE(reg.verify(proof, *stolen));
    }
    SECTION("unissued proofs fail") {
        BlockProof fake{1, 3.0, 999};
        CHECK_FALSE(reg.verify(fake, *blk));
    }
}
