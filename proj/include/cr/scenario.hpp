// Scenario files: line-oriented sectioned text. Each non-comment line is a
// record, "[section] key=value key=value ...". Sections:
//
//   [param]    global knobs (mobility lead, thresholds, timers, ...)
//   [subnet]   name, network/mask, router, DHCP pool
//   [ap]       bssid, channel, subnet, auth mechanism requirement, bridging
//   [node]     wireless nodes: placement, role flags, group, adversary profile
//   [cn]       wired correspondent endpoints
//   [cache]    seeded cache entries (by AP name or raw triple)
//   [delays]   delay-model overrides, e.g. open_auth_assoc=normal:4.2
//   [mobility] scripted moves: t=<ms> node=<name> ap=<name>
//   [signal]   explicit signal samples: t=<ms> node=<name> ap=<name> dbm=<v>
//   [stream]   constant-interval media streams
//
// Example lines live under scenarios/ in this repository.

#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cr/delay_model.hpp"
#include "cr/node.hpp"
#include "cr/types.hpp"

namespace cr {

class ConfigError : public std::runtime_error {
  public:
    ConfigError(int line, const std::string& what)
        : std::runtime_error("config line " + std::to_string(line) + ": " + what), line_(line) {}
    explicit ConfigError(const std::string& what) : std::runtime_error(what), line_(0) {}
    int line() const { return line_; }

  private:
    int line_;
};

struct SubnetSpec {
    std::string name;
    SubnetId id{};
    std::uint32_t mask = 0xffffff00;
    Ipv4Address router{};
    Ipv4Address pool_begin{};
    Ipv4Address pool_end{};
    double lease_duration_ms = 300000.0;
};

struct ApSpec {
    std::string name;
    MacAddress bssid{};
    std::uint32_t channel = 1;
    std::string subnet;
    bool requires_8021x = false;
    std::optional<double> bridging_ms;  // per-AP override of the model value
};

struct WirelessNodeSpec {
    NodeConfig cfg;
    std::string initial_ap;
    Ipv4Address ip{};
};

struct CnSpec {
    std::string name;
    Ipv4Address ip{};
    bool cooperative = true;
};

struct StreamSpec {
    std::string name;
    std::string src;  // node or CN name
    std::string dst;
    double interval_ms = 20.0;
    std::size_t payload_bytes = 160;
    double start_ms = 0.0;
    double stop_ms = 0.0;  // 0: run until the end of the scenario
};

struct MobilityEvent {
    SimTime t = 0;
    std::string node;
    std::string ap;
};

struct SignalEvent {
    SimTime t = 0;
    std::string node;
    std::string ap;
    double dbm = -50.0;
};

struct CacheSeed {
    std::string node;
    std::optional<std::string> ap;  // seed from topology
    std::optional<CacheEntry> raw;  // or an explicit triple
    double signal_dbm = kHearsaySignalDbm;
};

struct ScenarioParams {
    double duration_ms = 0.0;  // 0: run until the queue drains
    double mobility_lead_ms = 2000.0;
    double suppression_window_ms = 50.0;
    double inforeq_retry_ms = 200.0;
    int max_ttl = 3;
    double amn_failover_ms = 2000.0;
    double relay_timeout_ms = 10000.0;
    double relay_cooldown_ms = 60000.0;
    double relay_idle_ms = 100.0;
    double lease_duration_ms = 300000.0;
    int alert_threshold = 5;
    int alert_ttl = 3;
    double signal_threshold_dbm = -75.0;
    double session_redirect_latency_ms = 0.0;
    bool allow_spoofing = false;
    std::string spoof_victim;
};

struct Scenario {
    std::string name = "scenario";
    ScenarioParams params;
    DelayModel delays;
    std::vector<SubnetSpec> subnets;
    std::vector<ApSpec> aps;
    std::vector<WirelessNodeSpec> nodes;
    std::vector<CnSpec> cns;
    std::vector<StreamSpec> streams;
    std::vector<MobilityEvent> mobility;
    std::vector<SignalEvent> signals;
    std::vector<CacheSeed> cache_seeds;

    const SubnetSpec* find_subnet(const std::string& n) const {
        for (const auto& s : subnets)
            if (s.name == n) return &s;
        return nullptr;
    }
    const SubnetSpec* find_subnet(const SubnetId& id) const {
        for (const auto& s : subnets)
            if (s.id == id) return &s;
        return nullptr;
    }
    const ApSpec* find_ap(const std::string& n) const {
        for (const auto& a : aps)
            if (a.name == n) return &a;
        return nullptr;
    }
    const WirelessNodeSpec* find_node(const std::string& n) const {
        for (const auto& w : nodes)
            if (w.cfg.name == n) return &w;
        return nullptr;
    }
    const CnSpec* find_cn(const std::string& n) const {
        for (const auto& c : cns)
            if (c.name == n) return &c;
        return nullptr;
    }

    // Stable fingerprint of the topology (not the script), used to refuse
    // comparing reports across different networks.
    std::string topology_id() const {
        std::string canon;
        for (const auto& s : subnets)
            canon += s.name + '/' + s.id.to_string() + '/' + std::to_string(s.mask) + ';';
        for (const auto& a : aps)
            canon += a.name + '/' + a.bssid.to_string() + '/' + std::to_string(a.channel) + '/' +
                     a.subnet + '/' + (a.requires_8021x ? "x" : "o") + ';';
        std::uint64_t h = 1469598103934665603ull;
        for (char c : canon) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        char buf[20];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }

    void validate() const;
};

namespace detail {

struct KvLine {
    std::string section;
    std::map<std::string, std::string> kv;
    int line_no = 0;

    const std::string* get(const std::string& key) const {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    }

    std::string require(const std::string& key) const {
        const auto* v = get(key);
        if (!v) throw ConfigError(line_no, "[" + section + "] missing key '" + key + "'");
        return *v;
    }

    double number(const std::string& key, double fallback) const {
        const auto* v = get(key);
        if (!v) return fallback;
        try {
            return std::stod(*v);
        } catch (...) {
            throw ConfigError(line_no, "bad number for '" + key + "': " + *v);
        }
    }

    double require_number(const std::string& key) const {
        const std::string v = require(key);
        try {
            return std::stod(v);
        } catch (...) {
            throw ConfigError(line_no, "bad number for '" + key + "': " + v);
        }
    }

    bool flag(const std::string& key, bool fallback) const {
        const auto* v = get(key);
        if (!v) return fallback;
        if (*v == "1" || *v == "true" || *v == "yes") return true;
        if (*v == "0" || *v == "false" || *v == "no") return false;
        throw ConfigError(line_no, "bad flag for '" + key + "': " + *v);
    }
};

inline std::optional<KvLine> parse_line(const std::string& raw, int line_no) {
    std::string line = raw;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string first;
    if (!(ss >> first)) return std::nullopt;  // blank
    if (first.size() < 3 || first.front() != '[' || first.back() != ']')
        throw ConfigError(line_no, "expected '[section]' at start of line");
    KvLine out;
    out.section = first.substr(1, first.size() - 2);
    out.line_no = line_no;
    std::string tok;
    while (ss >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError(line_no, "expected key=value, got '" + tok + "'");
        out.kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return out;
}

inline MacAddress parse_mac_or_throw(const KvLine& l, const std::string& key) {
    const std::string v = l.require(key);
    auto m = MacAddress::parse(v);
    if (!m) throw ConfigError(l.line_no, "bad MAC for '" + key + "': " + v);
    return *m;
}

inline Ipv4Address parse_ip_or_throw(const KvLine& l, const std::string& key) {
    const std::string v = l.require(key);
    auto ip = Ipv4Address::parse(v);
    if (!ip) throw ConfigError(l.line_no, "bad IPv4 for '" + key + "': " + v);
    return *ip;
}

}  // namespace detail

inline Scenario parse_scenario(std::istream& is, const std::string& name = "scenario") {
    using detail::KvLine;
    Scenario sc;
    sc.name = name;

    std::vector<KvLine> lines;
    std::string raw;
    int line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        auto parsed = detail::parse_line(raw, line_no);
        if (parsed) lines.push_back(std::move(*parsed));
    }

    // Parameters first: node defaults depend on them.
    for (const auto& l : lines) {
        if (l.section != "param") continue;
        auto& p = sc.params;
        p.duration_ms = l.number("duration_ms", p.duration_ms);
        p.mobility_lead_ms = l.number("mobility_lead_ms", p.mobility_lead_ms);
        p.suppression_window_ms = l.number("suppression_window_ms", p.suppression_window_ms);
        p.inforeq_retry_ms = l.number("inforeq_retry_ms", p.inforeq_retry_ms);
        p.max_ttl = static_cast<int>(l.number("max_ttl", p.max_ttl));
        p.amn_failover_ms = l.number("amn_failover_ms", p.amn_failover_ms);
        p.relay_timeout_ms = l.number("relay_timeout_ms", p.relay_timeout_ms);
        p.relay_cooldown_ms = l.number("relay_cooldown_ms", p.relay_cooldown_ms);
        p.relay_idle_ms = l.number("relay_idle_ms", p.relay_idle_ms);
        p.lease_duration_ms = l.number("lease_duration_ms", p.lease_duration_ms);
        p.alert_threshold = static_cast<int>(l.number("alert_threshold", p.alert_threshold));
        p.alert_ttl = static_cast<int>(l.number("alert_ttl", p.alert_ttl));
        p.signal_threshold_dbm = l.number("signal_threshold_dbm", p.signal_threshold_dbm);
        p.session_redirect_latency_ms =
            l.number("session_redirect_latency_ms", p.session_redirect_latency_ms);
        p.allow_spoofing = l.flag("allow_spoofing", p.allow_spoofing);
        if (const auto* v = l.get("spoof_victim")) p.spoof_victim = *v;
    }

    for (const auto& l : lines) {
        if (l.section == "param") continue;
        if (l.section == "subnet") {
            SubnetSpec s;
            s.name = l.require("name");
            auto net = SubnetId::parse(l.require("net"));
            if (!net) throw ConfigError(l.line_no, "bad subnet address");
            s.id = *net;
            s.mask = prefix_to_mask(static_cast<int>(l.number("mask", 24)));
            s.router = detail::parse_ip_or_throw(l, "router");
            const std::string pool = l.require("pool");
            auto dash = pool.find('-');
            if (dash == std::string::npos)
                throw ConfigError(l.line_no, "pool must be 'first-last'");
            auto b = Ipv4Address::parse(pool.substr(0, dash));
            auto e = Ipv4Address::parse(pool.substr(dash + 1));
            if (!b || !e) throw ConfigError(l.line_no, "bad pool addresses");
            s.pool_begin = *b;
            s.pool_end = *e;
            s.lease_duration_ms = l.number("lease_ms", sc.params.lease_duration_ms);
            sc.subnets.push_back(std::move(s));
        } else if (l.section == "ap") {
            ApSpec a;
            a.name = l.require("name");
            a.bssid = detail::parse_mac_or_throw(l, "bssid");
            a.channel = static_cast<std::uint32_t>(l.require_number("channel"));
            a.subnet = l.require("subnet");
            const std::string auth = l.get("auth") ? *l.get("auth") : "open";
            a.requires_8021x = auth != "open";
            if (const auto* v = l.get("bridging")) a.bridging_ms = std::stod(*v);
            sc.aps.push_back(std::move(a));
        } else if (l.section == "node") {
            WirelessNodeSpec w;
            w.cfg.name = l.require("name");
            w.cfg.mac = detail::parse_mac_or_throw(l, "mac");
            w.initial_ap = l.require("ap");
            w.ip = detail::parse_ip_or_throw(l, "ip");
            w.cfg.cr_enabled = l.flag("cr", true);
            w.cfg.can_assist = l.flag("assist", w.cfg.cr_enabled);
            w.cfg.can_relay = l.flag("relay", false);
            w.cfg.use_relay = l.flag("use_relay", true);
            w.cfg.harvest_inforeq = l.flag("harvest_inforeq", false);
            w.cfg.group = l.get("group") ? *l.get("group") : std::string("helper");
            if (const auto* v = l.get("mech")) w.cfg.mechanism = parse_auth_mechanism(*v);
            if (const auto* v = l.get("malicious")) w.cfg.malicious = parse_malicious_kind(*v);
            w.cfg.malicious_rate = l.number("rate", 1.0);
            const auto& p = sc.params;
            w.cfg.suppression_window_ms = p.suppression_window_ms;
            w.cfg.inforeq_retry_ms = p.inforeq_retry_ms;
            w.cfg.max_ttl = p.max_ttl;
            w.cfg.amn_failover_ms = p.amn_failover_ms;
            w.cfg.relay_timeout_ms = p.relay_timeout_ms;
            w.cfg.relay_cooldown_ms = p.relay_cooldown_ms;
            w.cfg.lease_duration_ms = p.lease_duration_ms;
            w.cfg.alert_threshold = p.alert_threshold;
            w.cfg.alert_ttl = p.alert_ttl;
            w.cfg.signal_threshold_dbm = p.signal_threshold_dbm;
            w.cfg.spoofing_enabled = p.allow_spoofing;
            sc.nodes.push_back(std::move(w));
        } else if (l.section == "cn") {
            CnSpec c;
            c.name = l.require("name");
            c.ip = detail::parse_ip_or_throw(l, "ip");
            c.cooperative = l.flag("cooperative", true);
            sc.cns.push_back(std::move(c));
        } else if (l.section == "cache") {
            CacheSeed seed;
            seed.node = l.require("node");
            if (const auto* ap = l.get("ap")) {
                seed.ap = *ap;
            } else {
                CacheEntry e;
                e.bssid = detail::parse_mac_or_throw(l, "bssid");
                e.channel = static_cast<std::uint32_t>(l.require_number("channel"));
                auto sn = SubnetId::parse(l.require("subnet"));
                if (!sn) throw ConfigError(l.line_no, "bad subnet in cache seed");
                e.subnet = *sn;
                seed.raw = e;
            }
            seed.signal_dbm = l.number("signal", -60.0);
            sc.cache_seeds.push_back(std::move(seed));
        } else if (l.section == "delays") {
            for (const auto& [key, val] : l.kv) {
                if (key == "bridging")
                    sc.delays.bridging_ms = std::stod(val);
                else if (key == "first_packet")
                    sc.delays.first_packet_ms = std::stod(val);
                else if (key == "assoc_fail")
                    sc.delays.assoc_fail_ms = std::stod(val);
                else if (key == "auth_cert_fraction")
                    sc.delays.auth_cert_fraction = std::stod(val);
                else
                    sc.delays.set_component(key, DelayDist::parse(val));
            }
        } else if (l.section == "mobility") {
            MobilityEvent m;
            m.t = ms_to_us(l.require_number("t"));
            m.node = l.require("node");
            m.ap = l.require("ap");
            sc.mobility.push_back(std::move(m));
        } else if (l.section == "signal") {
            SignalEvent s;
            s.t = ms_to_us(l.require_number("t"));
            s.node = l.require("node");
            s.ap = l.require("ap");
            s.dbm = l.require_number("dbm");
            sc.signals.push_back(std::move(s));
        } else if (l.section == "stream") {
            StreamSpec s;
            s.name = l.require("name");
            s.src = l.require("src");
            s.dst = l.require("dst");
            s.interval_ms = l.number("interval", 20.0);
            s.payload_bytes = static_cast<std::size_t>(l.number("payload", 160));
            s.start_ms = l.number("start", 0.0);
            s.stop_ms = l.number("stop", 0.0);
            sc.streams.push_back(std::move(s));
        } else {
            throw ConfigError(l.line_no, "unknown section '[" + l.section + "]'");
        }
    }

    std::sort(sc.mobility.begin(), sc.mobility.end(),
              [](const MobilityEvent& a, const MobilityEvent& b) { return a.t < b.t; });
    sc.validate();
    return sc;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open scenario file: " + path);
    auto slash = path.find_last_of('/');
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    auto dot = base.find_last_of('.');
    if (dot != std::string::npos) base.erase(dot);
    return parse_scenario(f, base);
}

inline void Scenario::validate() const {
    std::map<std::string, int> seen;
    for (const auto& s : subnets) {
        if ((s.id.network.value & ~s.mask) != 0)
            throw ConfigError("subnet " + s.name + ": host bits set under mask");
        if (!in_subnet(s.router, s.id, s.mask))
            throw ConfigError("subnet " + s.name + ": router outside subnet");
        if (!in_subnet(s.pool_begin, s.id, s.mask) || !in_subnet(s.pool_end, s.id, s.mask))
            throw ConfigError("subnet " + s.name + ": pool outside subnet");
        if (s.pool_begin.value > s.pool_end.value)
            throw ConfigError("subnet " + s.name + ": empty pool");
        if (++seen["subnet:" + s.name] > 1)
            throw ConfigError("duplicate subnet name " + s.name);
    }
    std::map<std::string, int> macs;
    for (const auto& a : aps) {
        if (!find_subnet(a.subnet))
            throw ConfigError("ap " + a.name + ": unknown subnet " + a.subnet);
        if (a.channel < kMinChannel || a.channel > kMaxChannel)
            throw ConfigError("ap " + a.name + ": channel outside band plan");
        if (++seen["ap:" + a.name] > 1) throw ConfigError("duplicate ap name " + a.name);
        if (++macs[a.bssid.to_string()] > 1)
            throw ConfigError("duplicate BSSID " + a.bssid.to_string());
    }
    for (const auto& w : nodes) {
        const auto* ap = find_ap(w.initial_ap);
        if (!ap) throw ConfigError("node " + w.cfg.name + ": unknown ap " + w.initial_ap);
        const auto* sn = find_subnet(ap->subnet);
        if (!in_subnet(w.ip, sn->id, sn->mask))
            throw ConfigError("node " + w.cfg.name + ": ip " + w.ip.to_string() +
                              " outside subnet of " + ap->name);
        if (++seen["node:" + w.cfg.name] > 1)
            throw ConfigError("duplicate node name " + w.cfg.name);
        if (++macs[w.cfg.mac.to_string()] > 1)
            throw ConfigError("duplicate MAC " + w.cfg.mac.to_string());
    }
    for (const auto& c : cns) {
        if (++seen["cn:" + c.name] > 1) throw ConfigError("duplicate cn name " + c.name);
        if (find_node(c.name)) throw ConfigError("cn " + c.name + " clashes with a node name");
    }
    for (const auto& s : streams) {
        const bool src_ok = find_node(s.src) || find_cn(s.src);
        const bool dst_ok = find_node(s.dst) || find_cn(s.dst);
        if (!src_ok) throw ConfigError("stream " + s.name + ": unknown src " + s.src);
        if (!dst_ok) throw ConfigError("stream " + s.name + ": unknown dst " + s.dst);
        if (s.interval_ms <= 0) throw ConfigError("stream " + s.name + ": bad interval");
    }
    for (const auto& m : mobility) {
        if (!find_node(m.node)) throw ConfigError("mobility: unknown node " + m.node);
        if (!find_ap(m.ap)) throw ConfigError("mobility: unknown ap " + m.ap);
    }
    for (const auto& s : signals) {
        if (!find_node(s.node)) throw ConfigError("signal: unknown node " + s.node);
        if (!find_ap(s.ap)) throw ConfigError("signal: unknown ap " + s.ap);
    }
    for (const auto& seed : cache_seeds) {
        if (!find_node(seed.node)) throw ConfigError("cache seed: unknown node " + seed.node);
        if (seed.ap && !find_ap(*seed.ap)) throw ConfigError("cache seed: unknown ap " + *seed.ap);
    }
    if (!params.spoof_victim.empty() && !find_node(params.spoof_victim))
        throw ConfigError("spoof_victim: unknown node " + params.spoof_victim);
}

}  // namespace cr
