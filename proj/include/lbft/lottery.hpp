#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "lbft/core.hpp"
#include "lbft/detail/rng.hpp"

namespace lbft {

// Block-proof lottery modeled as a Poisson process at total rate lambda,
// thinned into an honest stream at (1-beta)*lambda and an adversarial stream
// at beta*lambda. Thinning (rather than attributing a whole-proposer subset)
// keeps both group rates exact for any beta; arrivals are attributed
// uniformly within their group.
struct LotteryParams {
    double lambda = 1.0;  // total proof rate
    double beta = 0.0;    // adversarial fraction of proposer power
    std::uint32_t num_proposers = 1;

    double lambda_honest() const { return (1.0 - beta) * lambda; }
    double lambda_adversary() const { return beta * lambda; }

    // Static corruption: the adversary's proposers are the lowest indices.
    std::uint32_t corrupted_proposer_count() const {
        if (beta <= 0.0) return 0;
        return static_cast<std::uint32_t>(std::ceil(beta * num_proposers - 1e-12));
    }

    void validate() const {
        if (lambda <= 0.0) throw std::invalid_argument("lottery.lambda: must be > 0");
        std::uint32_t m = (num_proposers - 1) / 2;
        if (beta < 0.0 || beta * num_proposers > static_cast<double>(m) + 1e-12)
            throw std::invalid_argument("lottery.beta: must lie in [0, m/(2m+1)]");
    }
};

struct LotteryWin {
    double time = 0.0;
    NodeId proposer = 0;
    bool adversarial = false;
};

// Merged arrivals over [0, horizon), ordered by time, deterministic in seed.
inline std::vector<LotteryWin> sample_win_times(const LotteryParams& params, double horizon,
                                                std::uint64_t seed) {
    if (horizon <= 0.0) throw std::invalid_argument("horizon: must be > 0");
    params.validate();
    detail::Rng rng(seed);
    std::vector<LotteryWin> wins;
    const std::uint32_t adv = params.corrupted_proposer_count();
    const std::uint32_t honest = params.num_proposers - adv;
    double t = 0.0;
    while (true) {
        t += rng.exponential(params.lambda);
        if (t >= horizon) break;
        bool adversarial = params.beta > 0.0 && rng.uniform01() < params.beta;
        NodeId proposer = adversarial
                              ? static_cast<NodeId>(rng.bounded(adv))
                              : static_cast<NodeId>(adv + rng.bounded(honest));
        wins.push_back({t, proposer, adversarial});
    }
    return wins;
}

// Issues proofs and pins each one to the single block built from it. Every
// node validates against the same registry -- the stand-in for "the proof
// checks out cryptographically". Equivocation is modeled by issuing the
// adversary several proofs per win, never by proof reuse.
class ProofRegistry {
  public:
    BlockProof issue(NodeId winner, double win_time) {
        BlockProof proof{winner, win_time, next_nonce_++};
        issued_[proof.nonce] = winner;
        return proof;
    }

    // Called once by the producer at block construction time.
    void bind(const BlockProof& proof, const BlockId& block) {
        auto [it, fresh] = bound_.try_emplace(proof.nonce, block);
        (void)it;
        (void)fresh;  // re-binding leaves the first binding in place
    }

    bool verify(const BlockProof& proof, const Block& block) const {
        auto it = issued_.find(proof.nonce);
        if (it == issued_.end() || it->second != proof.winner) return false;
        if (proof.winner != block.proposer) return false;
        auto bd = bound_.find(proof.nonce);
        return bd != bound_.end() && bd->second == block.id;
    }

    ProofCheck checker() const {
        return [this](const BlockProof& proof, const Block& block) { return verify(proof, block); };
    }

  private:
    std::uint64_t next_nonce_ = 1;
    std::map<std::uint64_t, NodeId> issued_;
    std::map<std::uint64_t, BlockId> bound_;
};

inline bool verify_proof(const ProofRegistry& registry, const BlockProof& proof,
                         const Block& block) {
    return registry.verify(proof, block);
}

}  // namespace lbft
