#pragma once

#include <cassert>
#include <cmath>
#include <memory>
#include <queue>
#include <set>
#include <tuple>
#include <vector>

#include "lbft/adversary.hpp"
#include "lbft/core.hpp"
#include "lbft/detail/rng.hpp"
#include "lbft/lottery.hpp"
#include "lbft/protocol.hpp"
#include "lbft/scenario.hpp"
#include "lbft/trace.hpp"

namespace lbft {

// Leader-collect fallback: a voter re-broadcasts its vote if no certificate
// for the block showed up this long after voting. With an honest collector
// the certificate is always in by 3*delta (block out <= delta, votes back
// <= delta, announce <= delta), so the timer only ever fires under a
// withholding collector.
inline constexpr double kQcFallbackDelayFactor = 3.0;

struct DeliveryContext {
    bool to_corrupted = false;   // recipient has a corrupted role (adversary ear)
    bool adversary_send = false; // sender is a corrupted identity
    int from_group = -1;         // pre-GST partition groups (-1 = unpartitioned)
    int to_group = -1;
    bool self = false;           // local hand-off, no network involved
};

// Absolute delivery time for a message sent at `send_time`; +inf = never.
// Honest-to-honest traffic obeys the partial synchrony contract: delivery by
// max(send_time, gst) + delta, with the pre-GST delay chosen by the
// configured schedule. The adversary hears and speaks instantly.
inline double deliver_schedule(const NetworkConfig& net, double send_time,
                               const DeliveryContext& ctx, detail::Rng& rng) {
    if (ctx.self || ctx.adversary_send || ctx.to_corrupted) return send_time;
    if (send_time >= net.gst) return send_time + rng.uniform_in(0.0, net.delta);
    switch (net.pre_gst) {
        case PreGstKind::Uniform: {
            double raw = rng.uniform_in(0.0, net.pre_gst_max_delay());
            return std::min(send_time + raw, net.gst + net.delta);
        }
        case PreGstKind::Starve:
            return net.gst + net.delta;
        case PreGstKind::Partition: {
            bool near = ctx.from_group == -1 || ctx.to_group == -1 ||
                        ctx.from_group == ctx.to_group;
            if (near) return send_time + rng.uniform_in(0.0, net.delta);
            return net.gst + net.delta;
        }
    }
    return net.gst + net.delta;
}

inline std::uint64_t broadcast_messages_per_block(std::uint32_t n, std::uint32_t f) {
    return (n - 1) + static_cast<std::uint64_t>(3 * f + 1) * (n - 1);
}

inline std::uint64_t leader_collect_messages_per_block(std::uint32_t n, std::uint32_t f) {
    return (n - 1) + (3 * f + 1) + (n - 1);
}

// Deterministic discrete-event run of one scenario: seeded lottery, per-node
// protocol reactors, the configured adversary, and partial-synchrony message
// scheduling. Identical (config, seed) pairs produce identical traces.
class Simulation {
  public:
    explicit Simulation(const ScenarioConfig& cfg)
        : cfg_(cfg),
          params_(cfg.protocol),
          n_(cfg.num_nodes()),
          net_rng_(detail::derive_seed(cfg.seed, 2)),
          gossip_rng_(detail::derive_seed(cfg.seed, 3)) {
        cfg_.validate();
        fanout_ = cfg_.network.effective_fanout(n_);

        trace_.scenario = cfg_;
        trace_.blocks[Block::genesis()->id] = BlockInfo{0, kGenesisProposer, 0.0, false, {}};
        trace_.node_logs.resize(n_);
        trace_.fully_honest.resize(n_);
        trace_.honest_voter.resize(n_);
        trace_.honest_proposer.resize(n_);
        group_.resize(n_);

        nodes_.resize(n_);
        for (NodeId id = 0; id < n_; ++id) {
            bool hv = params_.is_voter(id) && !cfg_.is_corrupted_voter(id);
            bool hp = params_.is_proposer(id) && !cfg_.is_corrupted_proposer(id);
            trace_.honest_voter[id] = hv;
            trace_.honest_proposer[id] = hp;
            trace_.fully_honest[id] = cfg_.is_fully_honest(id);
            group_[id] = partition_group(cfg_, id);
            if (hv || hp)
                nodes_[id] = std::make_unique<Node>(id, params_, hp, hv,
                                                    detail::derive_seed(cfg_.seed, 100 + id),
                                                    &registry_);
        }
        if (cfg_.strategy != StrategyKind::None || cfg_.corrupted_voter_count() > 0 ||
            cfg_.corrupted_proposer_count() > 0) {
            adversary_.emplace(cfg_, &registry_, detail::derive_seed(cfg_.seed, 4));
        }
        gossip_seen_.resize(n_);

        for (const auto& win : sample_win_times(cfg_.lottery(), cfg_.horizon,
                                                detail::derive_seed(cfg_.seed, 1))) {
            Ev ev;
            ev.t = win.time;
            ev.kind = EvKind::Win;
            ev.proposer = win.proposer;
            ev.adversarial = win.adversarial;
            push(std::move(ev));
        }

        if (cfg_.tx_load.rate > 0.0) {
            std::uint64_t tx_id = 1;
            double step = 1.0 / cfg_.tx_load.rate;
            for (double t = cfg_.tx_load.start; t < cfg_.tx_load.stop && t <= cfg_.horizon;
                 t += step) {
                Ev ev;
                ev.t = t;
                ev.kind = EvKind::TxInject;
                ev.tx = Tx{tx_id, {static_cast<std::uint8_t>(tx_id & 0xff)}};
                ++tx_id;
                push(std::move(ev));
            }
        }

        if (cfg_.lead_sample_interval > 0.0 && std::isfinite(cfg_.network.gst)) {
            for (double t = cfg_.network.gst + 2.0 * cfg_.network.delta; t <= cfg_.horizon;
                 t += cfg_.lead_sample_interval) {
                Ev ev;
                ev.t = t;
                ev.kind = EvKind::LeadSample;
                push(std::move(ev));
            }
        }
    }

    SimulationTrace run() {
        while (!queue_.empty() && !trace_.aborted) {
            Ev ev = queue_.top();
            queue_.pop();
            if (ev.t > cfg_.horizon) break;
            dispatch(ev);
        }
        if (!trace_.aborted) trace_.end_time = cfg_.horizon;
        return std::move(trace_);
    }

  private:
    enum class EvKind : std::uint8_t { Deliver, Win, TxInject, Timer, LeadSample };

    struct Ev {
        double t = 0.0;
        std::uint64_t seq = 0;
        EvKind kind = EvKind::Win;
        Message msg;                 // Deliver
        NodeId to = 0;               // Deliver
        NodeId proposer = 0;         // Win
        bool adversarial = false;    // Win
        Tx tx;                       // TxInject
        Vote timer_vote;             // Timer
        NodeId timer_node = 0;       // Timer
    };

    struct EvOrder {
        bool operator()(const Ev& a, const Ev& b) const {
            return std::tie(a.t, a.seq) > std::tie(b.t, b.seq);
        }
    };

    void push(Ev ev) {
        ev.seq = ++seq_;
        queue_.push(std::move(ev));
    }

    void record(double t, RecordKind kind, NodeId node, const BlockId& block = {},
                std::int64_t a = 0) {
        trace_.records.push_back(TraceRecord{t, ++seq_, kind, node, block, a});
    }

    static const BlockId& block_of(const Message& msg) {
        if (const auto* bm = std::get_if<BlockMsg>(&msg)) return bm->block->id;
        if (const auto* vm = std::get_if<VoteMsg>(&msg)) return vm->vote.block;
        return std::get<QcMsg>(msg).qc.block;
    }

    std::uint64_t msg_key(const Message& msg) const {
        if (const auto* bm = std::get_if<BlockMsg>(&msg)) {
            std::uint64_t k = 0;
            for (int i = 0; i < 8; ++i) k |= std::uint64_t(bm->block->id.digest[i]) << (8 * i);
            return k ^ 0xb10cb10cb10cb10cull;
        }
        if (const auto* vm = std::get_if<VoteMsg>(&msg)) return vm->vote.tag;
        const auto& qc = std::get<QcMsg>(msg).qc;
        detail::Sha256 h;
        h.update(qc.block.digest.data(), qc.block.digest.size());
        for (const auto& v : qc.votes) h.update(&v.tag, sizeof(v.tag));
        auto d = h.finish();
        std::uint64_t k = 0;
        for (int i = 0; i < 8; ++i) k |= std::uint64_t(d[i]) << (8 * i);
        return k;
    }

    bool has_corrupted_role(NodeId id) const { return !trace_.fully_honest[id]; }

    void register_block(const BlockPtr& blk, double t, bool adversarial, NodeId producer) {
        auto [it, fresh] = trace_.blocks.try_emplace(blk->id);
        if (!fresh) return;
        it->second.height = blk->height;
        it->second.proposer = blk->proposer;
        it->second.produced_at = t;
        it->second.adversarial = adversarial;
        for (const auto& tx : blk->txs) it->second.tx_ids.push_back(tx.id);
        record(t, RecordKind::Produce, producer, blk->id, static_cast<std::int64_t>(blk->height));
    }

    void dispatch(const Ev& ev) {
        switch (ev.kind) {
            case EvKind::Win: {
                record(ev.t, RecordKind::Win, ev.proposer, {}, ev.adversarial ? 1 : 0);
                if (ev.adversarial) {
                    if (adversary_) route_emissions(adversary_->on_win(ev.t, ev.proposer), ev.t);
                } else if (nodes_[ev.proposer]) {
                    BlockProof proof = registry_.issue(ev.proposer, ev.t);
                    Outbox ob = nodes_[ev.proposer]->on_proof_won(proof, registry_);
                    process_outbox(ev.proposer, ob, ev.t);
                }
                break;
            }
            case EvKind::Deliver: {
                trace_.total_deliveries++;
                record(ev.t, RecordKind::Deliver, ev.to, block_of(ev.msg),
                       static_cast<std::int64_t>(ev.msg.index()));
                if (has_corrupted_role(ev.to) && adversary_)
                    route_emissions(adversary_->on_observe(ev.t, ev.msg), ev.t);
                if (!nodes_[ev.to]) break;
                if (cfg_.network.pattern == Pattern::Gossip) {
                    if (gossip_seen_[ev.to].insert(msg_key(ev.msg)).second)
                        route(ev.msg, ev.to, ev.t);
                }
                Outbox ob;
                if (const auto* bm = std::get_if<BlockMsg>(&ev.msg))
                    ob = nodes_[ev.to]->on_block_received(bm->block);
                else if (const auto* vm = std::get_if<VoteMsg>(&ev.msg))
                    ob = nodes_[ev.to]->on_vote_received(vm->vote);
                else
                    ob = nodes_[ev.to]->on_qc_received(std::get<QcMsg>(ev.msg).qc);
                process_outbox(ev.to, ob, ev.t);
                break;
            }
            case EvKind::TxInject: {
                record(ev.t, RecordKind::TxInject, 0, {}, static_cast<std::int64_t>(ev.tx.id));
                trace_.tx_injections.emplace_back(ev.t, ev.tx.id);
                for (NodeId id = 0; id < n_; ++id)
                    if (nodes_[id] && trace_.honest_proposer[id]) nodes_[id]->on_tx(ev.tx);
                break;
            }
            case EvKind::Timer: {
                const auto& vote = ev.timer_vote;
                if (!nodes_[ev.timer_node]) break;
                if (nodes_[ev.timer_node]->tree().is_certified(vote.block)) break;
                record(ev.t, RecordKind::TimerFire, ev.timer_node, vote.block);
                route(VoteMsg{vote}, ev.timer_node, ev.t, nullptr, false, /*force_broadcast=*/true);
                break;
            }
            case EvKind::LeadSample: {
                std::int64_t priv = adversary_
                                        ? static_cast<std::int64_t>(adversary_->private_height())
                                        : 0;
                std::int64_t best_honest = 0;
                for (NodeId id = 0; id < n_; ++id)
                    if (nodes_[id] && trace_.fully_honest[id])
                        best_honest = std::max(
                            best_honest,
                            static_cast<std::int64_t>(nodes_[id]->tree().highest_certified_height()));
                std::int64_t lead = std::max<std::int64_t>(0, priv - best_honest);
                record(ev.t, RecordKind::LeadSample, 0, {}, lead);
                trace_.lead_samples.emplace_back(ev.t, lead);
                break;
            }
        }
    }

    void process_outbox(NodeId u, const Outbox& ob, double t) {
        auto& log = trace_.node_logs[u];
        for (const auto& blk : ob.produced) register_block(blk, t, false, u);
        for (const auto& blk : ob.accepted) {
            if (log.inserted.try_emplace(blk->id, t).second)
                record(t, RecordKind::Accept, u, blk->id, static_cast<std::int64_t>(blk->height));
        }
        for (const auto& v : ob.cast) {
            record(t, RecordKind::VoteCast, u, v.block, static_cast<std::int64_t>(v.type));
            if (cfg_.network.pattern == Pattern::LeaderCollect) {
                Ev timer;
                timer.t = t + kQcFallbackDelayFactor * cfg_.network.delta;
                timer.kind = EvKind::Timer;
                timer.timer_vote = v;
                timer.timer_node = u;
                if (timer.t <= cfg_.horizon) push(std::move(timer));
            }
        }
        std::vector<BlockId> announce_candidates;
        for (const auto& id : ob.newly_certified) {
            if (log.certified.try_emplace(id, t).second) {
                auto blk = nodes_[u]->tree().block(id);
                std::uint64_t h = blk ? blk->height : 0;
                record(t, RecordKind::Certified, u, id, static_cast<std::int64_t>(h));
                std::uint64_t cur = log.cert_height_steps.empty()
                                        ? 0
                                        : log.cert_height_steps.back().second;
                if (h > cur || log.cert_height_steps.empty())
                    log.cert_height_steps.emplace_back(t, std::max(h, cur));
            }
            announce_candidates.push_back(id);
        }
        for (const auto& id : ob.com_quorum_reached) announce_candidates.push_back(id);
        if (cfg_.network.pattern == Pattern::LeaderCollect) {
            std::set<BlockId> seen;
            for (const auto& id : announce_candidates) {
                if (!seen.insert(id).second) continue;
                auto info = trace_.blocks.find(id);
                if (info == trace_.blocks.end() || info->second.proposer != u) continue;
                if (!trace_.honest_proposer[u]) continue;
                const auto& tree = nodes_[u]->tree();
                if (!tree.is_certified(id)) continue;
                int level = tree.com_count(id) >= params_.quorum() ? 2 : 1;
                int& cur = announce_level_[id];
                if (level <= cur) continue;
                cur = level;
                auto qc = tree.qc_for(id);
                if (qc) route(QcMsg{std::move(*qc)}, u, t);
            }
        }
        for (const auto& blk : ob.committed) {
            log.commits.push_back({t, blk->height, blk->id});
            record(t, RecordKind::Commit, u, blk->id, static_cast<std::int64_t>(blk->height));
        }
        if (ob.violation) {
            record(t, RecordKind::Violation, u, ob.violation->candidate,
                   static_cast<std::int64_t>(ob.violation->height));
            trace_.violation = ViolationEv{t, u, *ob.violation};
            trace_.aborted = true;
            trace_.end_time = t;
            return;
        }
        for (const auto& msg : ob.out) route(msg, u, t);
    }

    void route(const Message& msg, NodeId from, double t,
               const std::vector<NodeId>* targets = nullptr, bool adversary_send = false,
               bool force_broadcast = false) {
        std::vector<NodeId> recipients;
        if (targets && !targets->empty()) {
            recipients = *targets;
            std::sort(recipients.begin(), recipients.end());
            recipients.erase(std::unique(recipients.begin(), recipients.end()), recipients.end());
        } else {
            Pattern pat = cfg_.network.pattern;
            if (force_broadcast || adversary_send) pat = Pattern::Broadcast;
            bool vote = std::holds_alternative<VoteMsg>(msg);
            if (pat == Pattern::Gossip) {
                gossip_seen_[from].insert(msg_key(msg));
                for (auto r : gossip_rng_.sample_distinct(n_, fanout_, from))
                    recipients.push_back(r);
            } else if (pat == Pattern::LeaderCollect && vote) {
                const auto& v = std::get<VoteMsg>(msg).vote;
                auto info = trace_.blocks.find(v.block);
                if (info == trace_.blocks.end()) return;
                recipients.push_back(info->second.proposer);
            } else {
                for (NodeId r = 0; r < n_; ++r)
                    if (r != from) recipients.push_back(r);
            }
        }
        if (recipients.empty()) return;

        auto& counts = trace_.msg_counts[block_of(msg)];
        if (std::holds_alternative<BlockMsg>(msg))
            counts.block_sends += recipients.size();
        else if (std::holds_alternative<VoteMsg>(msg))
            counts.vote_sends += recipients.size();
        else
            counts.qc_sends += recipients.size();
        record(t, RecordKind::Send, from, block_of(msg),
               static_cast<std::int64_t>(recipients.size()));

        for (NodeId r : recipients) {
            DeliveryContext ctx;
            ctx.self = (r == from);
            ctx.to_corrupted = has_corrupted_role(r);
            ctx.adversary_send = adversary_send;
            ctx.from_group = group_[from];
            ctx.to_group = group_[r];
            double when = deliver_schedule(cfg_.network, t, ctx, net_rng_);
            if (!std::isfinite(when) || when > cfg_.horizon) continue;
            Ev ev;
            ev.t = when;
            ev.kind = EvKind::Deliver;
            ev.msg = msg;
            ev.to = r;
            push(std::move(ev));
        }
    }

    void route_emissions(const std::vector<AdvEmission>& emissions, double t) {
        for (const auto& em : emissions) {
            if (const auto* bm = std::get_if<BlockMsg>(&em.msg))
                register_block(bm->block, t, true, em.from);
            if (em.targets.empty())
                route(em.msg, em.from, t, nullptr, /*adversary_send=*/true);
            else
                route(em.msg, em.from, t, &em.targets, /*adversary_send=*/true);
        }
    }

    ScenarioConfig cfg_;
    ProtocolParams params_;
    std::uint32_t n_;
    std::uint32_t fanout_ = 0;
    ProofRegistry registry_;
    std::vector<std::unique_ptr<Node>> nodes_;
    std::optional<Adversary> adversary_;
    std::priority_queue<Ev, std::vector<Ev>, EvOrder> queue_;
    std::uint64_t seq_ = 0;
    detail::Rng net_rng_;
    detail::Rng gossip_rng_;
    std::vector<std::set<std::uint64_t>> gossip_seen_;
    std::map<BlockId, int> announce_level_;
    std::vector<int> group_;
    SimulationTrace trace_;
};

inline SimulationTrace run_scenario(const ScenarioConfig& cfg) {
    Simulation sim(cfg);
    return sim.run();
}

// Message transmissions attributable to each block that some fully honest
// node ended up seeing certified.
inline std::map<BlockId, PerBlockMsgCount> per_certified_block_counts(const SimulationTrace& trace) {
    std::set<BlockId> certified;
    for (NodeId id = 0; id < static_cast<NodeId>(trace.node_logs.size()); ++id) {
        if (!trace.fully_honest[id]) continue;
        for (const auto& [blk, t] : trace.node_logs[id].certified) certified.insert(blk);
    }
    std::map<BlockId, PerBlockMsgCount> out;
    for (const auto& id : certified) {
        auto it = trace.msg_counts.find(id);
        if (it != trace.msg_counts.end()) out[id] = it->second;
    }
    return out;
}

}  // namespace lbft
