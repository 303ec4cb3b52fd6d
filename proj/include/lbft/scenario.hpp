#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "lbft/core.hpp"
#include "lbft/lottery.hpp"

namespace lbft {

using Json = nlohmann::json;

enum class Pattern : std::uint8_t { Broadcast, Gossip, LeaderCollect };
enum class PreGstKind : std::uint8_t { Uniform, Starve, Partition };

enum class StrategyKind : std::uint8_t {
    None,
    DoubleVoter,
    EquivocateProposer,
    WithholdProposer,
    SelectiveDelayer,
    Combined,
    DoubleQc,  // over-threshold negative control
};

inline constexpr double kInfiniteGst = std::numeric_limits<double>::infinity();

struct NetworkConfig {
    double delta = 0.1;
    double gst = 0.0;  // kInfiniteGst = never stabilizes
    Pattern pattern = Pattern::Broadcast;
    std::uint32_t fanout = 0;  // gossip only; 0 = ceil(log2 n)
    PreGstKind pre_gst = PreGstKind::Uniform;
    double pre_gst_max = 0.0;  // 0 = 4 * delta

    double pre_gst_max_delay() const { return pre_gst_max > 0.0 ? pre_gst_max : 4.0 * delta; }
    std::uint32_t effective_fanout(std::uint32_t n) const {
        if (fanout > 0) return fanout;
        std::uint32_t k = 1;
        while ((1u << k) < n) ++k;
        return k;
    }
};

struct TxLoad {
    double rate = 0.0;
    double start = 0.0;
    double stop = 0.0;
};

struct ScenarioConfig {
    std::string name = "scenario";
    ProtocolParams protocol;
    NetworkConfig network;
    double lambda = 1.0;
    double beta = 0.0;
    StrategyKind strategy = StrategyKind::None;
    std::uint32_t corrupted_voters = kDeriveCorrupted;
    double lead_sample_interval = 0.0;  // 0 = no hidden-lead sampling
    double horizon = 100.0;
    std::uint64_t seed = 1;
    TxLoad tx_load;
    bool negative_control = false;

    static constexpr std::uint32_t kDeriveCorrupted = 0xffffffffu;

    LotteryParams lottery() const { return LotteryParams{lambda, beta, protocol.num_proposers()}; }

    std::uint32_t corrupted_proposer_count() const { return lottery().corrupted_proposer_count(); }

    std::uint32_t corrupted_voter_count() const {
        if (corrupted_voters != kDeriveCorrupted) return corrupted_voters;
        if (strategy == StrategyKind::None || strategy == StrategyKind::SelectiveDelayer) return 0;
        return std::min(corrupted_proposer_count(), protocol.f);
    }

    std::uint32_t num_nodes() const { return protocol.num_nodes(); }

    bool is_corrupted_voter(NodeId id) const {
        return protocol.is_voter(id) && id < corrupted_voter_count();
    }
    bool is_corrupted_proposer(NodeId id) const {
        return protocol.is_proposer(id) && id < corrupted_proposer_count();
    }
    bool is_fully_honest(NodeId id) const {
        return !is_corrupted_voter(id) && !is_corrupted_proposer(id);
    }

    void validate() const {
        if (network.delta <= 0.0) throw std::runtime_error("config error: network.delta: must be > 0");
        if (network.gst < 0.0) throw std::runtime_error("config error: network.gst: must be >= 0");
        if (horizon <= 0.0) throw std::runtime_error("config error: horizon: must be > 0");
        try {
            lottery().validate();
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error(std::string("config error: ") + e.what());
        }
        std::uint32_t cv = corrupted_voter_count();
        if (cv > protocol.num_voters())
            throw std::runtime_error("config error: adversary.corrupted_voters: exceeds voter count");
        if (!negative_control && cv > protocol.f)
            throw std::runtime_error(
                "config error: adversary.corrupted_voters: exceeds f (set negative_control to allow)");
        if (strategy == StrategyKind::DoubleQc && !negative_control)
            throw std::runtime_error(
                "config error: adversary.strategy: double-qc requires negative_control");
        if (tx_load.rate < 0.0) throw std::runtime_error("config error: tx_load.rate: must be >= 0");
        if (tx_load.stop < tx_load.start)
            throw std::runtime_error("config error: tx_load.stop: must be >= tx_load.start");
        if (lead_sample_interval < 0.0)
            throw std::runtime_error("config error: adversary.lead_sample_interval: must be >= 0");
    }
};

// Pre-GST partition used by the delaying strategies: fully honest nodes in
// ascending id order, first half in group 0. Nodes with a corrupted role sit
// outside the partition (-1); they hear everything instantly anyway.
inline int partition_group(const ScenarioConfig& cfg, NodeId id) {
    if (!cfg.is_fully_honest(id)) return -1;
    std::uint32_t before = 0;
    std::uint32_t total = 0;
    for (NodeId v = 0; v < cfg.num_nodes(); ++v) {
        if (!cfg.is_fully_honest(v)) continue;
        if (v < id) ++before;
        ++total;
    }
    return before < total / 2 ? 0 : 1;
}

// --------------------------------------------------------------------------
// JSON (schema "lbft-scenario/1"). Unknown fields are rejected so that a
// stored config always means what it meant when it was written.

namespace detail {

[[noreturn]] inline void config_error(const std::string& path, const std::string& msg) {
    throw std::runtime_error("config error: " + path + ": " + msg);
}

inline void require_known_keys(const Json& obj, const std::string& path,
                               std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) known = true;
        if (!known) config_error(path.empty() ? it.key() : path + "." + it.key(), "unknown field");
    }
}

inline double get_number(const Json& obj, const std::string& path, const char* key,
                         bool required, double fallback = 0.0) {
    if (!obj.contains(key)) {
        if (required) config_error(path + "." + key, "missing required field");
        return fallback;
    }
    if (!obj[key].is_number()) config_error(path + "." + key, "must be a number");
    return obj[key].get<double>();
}

inline std::uint64_t get_uint(const Json& obj, const std::string& path, const char* key,
                              bool required, std::uint64_t fallback = 0) {
    if (!obj.contains(key)) {
        if (required) config_error(path + "." + key, "missing required field");
        return fallback;
    }
    const auto& v = obj[key];
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    config_error(path + "." + key, "must be a non-negative integer");
}

}  // namespace detail

inline const char* to_string(Pattern p) {
    switch (p) {
        case Pattern::Broadcast: return "broadcast";
        case Pattern::Gossip: return "gossip";
        case Pattern::LeaderCollect: return "leader-collect";
    }
    return "?";
}

inline Pattern pattern_from_string(const std::string& s, const std::string& path) {
    if (s == "broadcast") return Pattern::Broadcast;
    if (s == "gossip") return Pattern::Gossip;
    if (s == "leader-collect") return Pattern::LeaderCollect;
    detail::config_error(path, "must be one of broadcast|gossip|leader-collect");
}

inline const char* to_string(StrategyKind s) {
    switch (s) {
        case StrategyKind::None: return "none";
        case StrategyKind::DoubleVoter: return "double-voter";
        case StrategyKind::EquivocateProposer: return "equivocate-proposer";
        case StrategyKind::WithholdProposer: return "withhold-proposer";
        case StrategyKind::SelectiveDelayer: return "selective-delayer";
        case StrategyKind::Combined: return "combined";
        case StrategyKind::DoubleQc: return "double-qc";
    }
    return "?";
}

inline StrategyKind strategy_from_string(const std::string& s, const std::string& path) {
    if (s == "none") return StrategyKind::None;
    if (s == "double-voter") return StrategyKind::DoubleVoter;
    if (s == "equivocate-proposer") return StrategyKind::EquivocateProposer;
    if (s == "withhold-proposer") return StrategyKind::WithholdProposer;
    if (s == "selective-delayer") return StrategyKind::SelectiveDelayer;
    if (s == "combined") return StrategyKind::Combined;
    if (s == "double-qc") return StrategyKind::DoubleQc;
    detail::config_error(path, "unknown strategy");
}

inline const char* to_string(PreGstKind k) {
    switch (k) {
        case PreGstKind::Uniform: return "uniform";
        case PreGstKind::Starve: return "starve";
        case PreGstKind::Partition: return "partition";
    }
    return "?";
}

inline PreGstKind pre_gst_from_string(const std::string& s, const std::string& path) {
    if (s == "uniform") return PreGstKind::Uniform;
    if (s == "starve") return PreGstKind::Starve;
    if (s == "partition") return PreGstKind::Partition;
    detail::config_error(path, "must be one of uniform|starve|partition");
}

inline ScenarioConfig scenario_from_json(const Json& j) {
    using detail::config_error;
    using detail::get_number;
    using detail::get_uint;
    using detail::require_known_keys;

    if (!j.is_object()) config_error("", "scenario must be a JSON object");
    require_known_keys(j, "", {"schema", "name", "protocol", "network", "lottery", "adversary",
                               "horizon", "seed", "tx_load", "negative_control"});
    if (!j.contains("schema") || j["schema"] != "lbft-scenario/1")
        config_error("schema", "must be \"lbft-scenario/1\"");

    ScenarioConfig cfg;
    if (j.contains("name")) {
        if (!j["name"].is_string()) config_error("name", "must be a string");
        cfg.name = j["name"].get<std::string>();
    }

    if (!j.contains("protocol")) config_error("protocol", "missing required field");
    const auto& proto = j["protocol"];
    require_known_keys(proto, "protocol", {"f", "m"});
    cfg.protocol.f = static_cast<std::uint32_t>(get_uint(proto, "protocol", "f", true));
    cfg.protocol.m = static_cast<std::uint32_t>(get_uint(proto, "protocol", "m", true));

    if (!j.contains("network")) config_error("network", "missing required field");
    const auto& net = j["network"];
    require_known_keys(net, "network", {"delta", "gst", "pattern", "fanout", "pre_gst"});
    cfg.network.delta = get_number(net, "network", "delta", true);
    if (!net.contains("gst")) config_error("network.gst", "missing required field");
    if (net["gst"].is_string()) {
        if (net["gst"] != "inf") config_error("network.gst", "must be a number or \"inf\"");
        cfg.network.gst = kInfiniteGst;
    } else if (net["gst"].is_number()) {
        cfg.network.gst = net["gst"].get<double>();
    } else {
        config_error("network.gst", "must be a number or \"inf\"");
    }
    if (net.contains("pattern"))
        cfg.network.pattern = pattern_from_string(net["pattern"].get<std::string>(), "network.pattern");
    cfg.network.fanout = static_cast<std::uint32_t>(get_uint(net, "network", "fanout", false, 0));
    if (net.contains("pre_gst")) {
        const auto& pg = net["pre_gst"];
        require_known_keys(pg, "network.pre_gst", {"kind", "max_delay"});
        if (!pg.contains("kind")) config_error("network.pre_gst.kind", "missing required field");
        cfg.network.pre_gst = pre_gst_from_string(pg["kind"].get<std::string>(), "network.pre_gst.kind");
        cfg.network.pre_gst_max = get_number(pg, "network.pre_gst", "max_delay", false, 0.0);
    }

    if (!j.contains("lottery")) config_error("lottery", "missing required field");
    const auto& lot = j["lottery"];
    require_known_keys(lot, "lottery", {"lambda", "beta"});
    cfg.lambda = get_number(lot, "lottery", "lambda", true);
    cfg.beta = get_number(lot, "lottery", "beta", false, 0.0);

    if (j.contains("adversary")) {
        const auto& adv = j["adversary"];
        require_known_keys(adv, "adversary", {"strategy", "corrupted_voters", "lead_sample_interval"});
        if (adv.contains("strategy"))
            cfg.strategy = strategy_from_string(adv["strategy"].get<std::string>(), "adversary.strategy");
        if (adv.contains("corrupted_voters"))
            cfg.corrupted_voters =
                static_cast<std::uint32_t>(get_uint(adv, "adversary", "corrupted_voters", false));
        cfg.lead_sample_interval = get_number(adv, "adversary", "lead_sample_interval", false, 0.0);
    }

    cfg.horizon = get_number(j, "", "horizon", true);
    cfg.seed = get_uint(j, "", "seed", false, 1);

    if (j.contains("tx_load")) {
        const auto& tl = j["tx_load"];
        require_known_keys(tl, "tx_load", {"rate", "start", "stop"});
        cfg.tx_load.rate = get_number(tl, "tx_load", "rate", false, 0.0);
        cfg.tx_load.start = get_number(tl, "tx_load", "start", false, 0.0);
        cfg.tx_load.stop = get_number(tl, "tx_load", "stop", false, 0.0);
    }

    if (j.contains("negative_control")) {
        if (!j["negative_control"].is_boolean()) config_error("negative_control", "must be a boolean");
        cfg.negative_control = j["negative_control"].get<bool>();
    }

    cfg.validate();
    return cfg;
}

inline Json scenario_to_json(const ScenarioConfig& cfg) {
    Json j;
    j["schema"] = "lbft-scenario/1";
    j["name"] = cfg.name;
    j["protocol"] = {{"f", cfg.protocol.f}, {"m", cfg.protocol.m}};
    Json net;
    net["delta"] = cfg.network.delta;
    if (std::isinf(cfg.network.gst))
        net["gst"] = "inf";
    else
        net["gst"] = cfg.network.gst;
    net["pattern"] = to_string(cfg.network.pattern);
    if (cfg.network.fanout > 0) net["fanout"] = cfg.network.fanout;
    net["pre_gst"] = {{"kind", to_string(cfg.network.pre_gst)}};
    if (cfg.network.pre_gst_max > 0.0) net["pre_gst"]["max_delay"] = cfg.network.pre_gst_max;
    j["network"] = net;
    j["lottery"] = {{"lambda", cfg.lambda}, {"beta", cfg.beta}};
    Json adv;
    adv["strategy"] = to_string(cfg.strategy);
    if (cfg.corrupted_voters != ScenarioConfig::kDeriveCorrupted)
        adv["corrupted_voters"] = cfg.corrupted_voters;
    if (cfg.lead_sample_interval > 0.0) adv["lead_sample_interval"] = cfg.lead_sample_interval;
    j["adversary"] = adv;
    j["horizon"] = cfg.horizon;
    j["seed"] = cfg.seed;
    if (cfg.tx_load.rate > 0.0)
        j["tx_load"] = {{"rate", cfg.tx_load.rate}, {"start", cfg.tx_load.start}, {"stop", cfg.tx_load.stop}};
    if (cfg.negative_control) j["negative_control"] = true;
    return j;
}

}  // namespace lbft
