// Deterministic discrete-event simulator of an 802.11-style campus network:
// APs on channels attached to subnets, a shared medium, a DHCP server per
// run, scripted mobility with signal trajectories, constant-interval media
// streams, the session controller that redirects correspondent traffic, and
// the handoff engine that turns delay-model samples into HandoffRecords.

#pragma once

#include <cassert>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cr/delay_model.hpp"
#include "cr/dhcp.hpp"
#include "cr/node.hpp"
#include "cr/relay.hpp"
#include "cr/report.hpp"
#include "cr/rng.hpp"
#include "cr/scenario.hpp"
#include "cr/scheduler.hpp"
#include "cr/types.hpp"
#include "cr/wire.hpp"

namespace cr {

struct StreamStats {
    std::string name;
    std::uint64_t sent = 0;
    std::uint64_t received = 0;
    std::uint64_t lost = 0;
    std::uint64_t duplicates = 0;  // extra copies delivered during fan-out
    std::uint64_t relayed = 0;     // packets that traveled via an RN
    std::uint64_t in_flight = 0;   // scheduled but undelivered at run end
};

struct RunReport {
    std::string scenario;
    std::string topology_id;
    std::uint64_t seed = 0;
    std::vector<HandoffRecord> records;
    std::vector<StreamStats> streams;
    std::vector<std::string> trace;
    std::vector<std::string> security_log;
    std::vector<std::string> relay_audit;
    std::map<std::string, std::uint64_t> counters;
    std::string lease_table;  // server dump at run end

    SummaryReport summary() const { return SummaryReport::from_records(records); }
};

enum class RunMode { Cr, Legacy, Both };

inline const char* run_mode_name(RunMode m) {
    switch (m) {
        case RunMode::Cr: return "cr";
        case RunMode::Legacy: return "legacy";
        case RunMode::Both: return "both";
    }
    return "?";
}

inline RunMode parse_run_mode(const std::string& s) {
    if (s == "cr") return RunMode::Cr;
    if (s == "legacy") return RunMode::Legacy;
    if (s == "both") return RunMode::Both;
    throw std::runtime_error("unknown mode '" + s + "' (expected cr|legacy|both)");
}

class Simulator {
  public:
    Simulator(Scenario scenario, std::uint64_t seed, RunMode mode = RunMode::Both)
        : scenario_(std::move(scenario)), rng_(seed), seed_(seed), mode_(mode) {
        delays_ = scenario_.delays;
        build();
    }

    Scheduler& scheduler() { return sched_; }
    DhcpServer& dhcp_server() { return dhcp_; }
    const Scenario& scenario() const { return scenario_; }

    CrNode* node(const std::string& name) {
        auto it = node_index_.find(name);
        return it == node_index_.end() ? nullptr : nodes_[it->second].proto.get();
    }

    // --- run --------------------------------------------------------------

    RunReport run() {
        schedule_script();
        const SimTime end = effective_end_us();
        sched_.run_until(end);
        return finalize(end);
    }

    // --- medium visibility (queryable; the send paths use these) ----------

    // Ad-hoc frames reach every other node on the sender's channel.
    std::vector<std::string> adhoc_receivers(const std::string& sender_name) {
        std::vector<std::string> out;
        const auto* s = runtime(sender_name);
        if (!s || !s->associated_ap) return out;
        const auto ch = channel_of(*s->associated_ap);
        for (const auto& nr : nodes_) {
            if (nr.cfg().name == sender_name) continue;
            if (nr.associated_ap && channel_of(*nr.associated_ap) == ch)
                out.push_back(nr.cfg().name);
        }
        return out;
    }

    // Multicast reaches subscribers within (ttl - 1) subnet hops; every
    // distinct subnet sits one hop from every other across the backbone.
    std::vector<std::string> multicast_receivers(const std::string& sender_name, int ttl) {
        std::vector<std::string> out;
        const auto* s = runtime(sender_name);
        if (!s || !s->associated_ap) return out;
        const SubnetId from = subnet_of(*s->associated_ap);
        for (const auto& nr : nodes_) {
            if (nr.cfg().name == sender_name) continue;
            if (!nr.cfg().cr_enabled) continue;  // not subscribed to the group
            if (!nr.associated_ap || !nr.authenticated) continue;
            const SubnetId to = subnet_of(*nr.associated_ap);
            if (subnet_hops(from, to) < ttl) out.push_back(nr.cfg().name);
        }
        return out;
    }

    // --- session controller (abstract re-INVITE machinery) ----------------

    // Redirect a correspondent's downlink for the stream toward `mn`:
    // duplicate to each relay leg, optionally keeping the direct leg.
    void session_redirect(Ipv4Address cn_ip, const std::string& mn,
                          std::vector<MacAddress> relay_legs, bool keep_direct) {
        bool found = false;
        for (auto& st : streams_) {
            if (st.cn_ip != cn_ip || st.dst_node != mn) continue;
            st.relay_legs = relay_legs;
            st.direct_leg = keep_direct;
            found = true;
            trace_sim("session redirect stream=" + st.spec.name + " legs=" +
                      std::to_string(relay_legs.size()) + (keep_direct ? "+direct" : ""));
        }
        if (!found) throw std::runtime_error("UnknownStream: no stream from " +
                                             cn_ip.to_string() + " to " + mn);
    }

    // --- relay data plane (also used directly by property tests) ----------

    // MN -> RN ad-hoc frame, re-emitted by the RN toward the AP under its
    // own security association. Returns the forwarded payload.
    std::optional<std::vector<std::uint8_t>> relay_uplink(const std::string& rn_name,
                                                          const MacAddress& mn_mac,
                                                          const std::vector<std::uint8_t>& payload,
                                                          SimTime t) {
        auto* rn = runtime(rn_name);
        if (!rn || !rn->associated_ap) return std::nullopt;
        FrameHeader hdr = FrameHeader::adhoc(rn->cfg().mac, mn_mac, MacAddress{});
        const auto verdict = rn->proto->relay_table().check_uplink(hdr, mn_mac, t);
        if (verdict != RelayDrop::Forwarded) {
            trace_sim("relay drop up rn=" + rn_name + " mn=" + mn_mac.to_string() + " reason=" +
                      drop_name(verdict));
            return std::nullopt;
        }
        ++counters_["relayed_up"];
        counters_["medium_occupied_twice"] += 1;  // MN->RN then RN->AP
        // Re-encapsulated toward the distribution system; payload untouched.
        FrameHeader out = FrameHeader::to_ap(*rn->associated_ap, rn->cfg().mac, mn_mac);
        (void)out;
        return payload;
    }

    std::optional<std::vector<std::uint8_t>> relay_downlink(const std::string& rn_name,
                                                            Ipv4Address cn_ip,
                                                            const MacAddress& mn_mac,
                                                            const std::vector<std::uint8_t>& payload,
                                                            SimTime t) {
        auto* rn = runtime(rn_name);
        if (!rn || !rn->associated_ap) return std::nullopt;
        const auto verdict = rn->proto->relay_table().check_downlink(cn_ip, mn_mac, t);
        if (verdict != RelayDrop::Forwarded) {
            trace_sim("relay drop down rn=" + rn_name + " mn=" + mn_mac.to_string() + " reason=" +
                      drop_name(verdict));
            return std::nullopt;
        }
        ++counters_["relayed_down"];
        FrameHeader out = FrameHeader::adhoc(mn_mac, rn->cfg().mac, MacAddress{});
        (void)out;
        return payload;
    }

    // Authenticator check for a data frame from `node` through its AP.
    bool ap_accepts_data(const std::string& name) {
        auto* nr = runtime(name);
        if (!nr || !nr->associated_ap) return false;
        if (nr->auth.phase == AuthSession::Phase::EapolInProgress) {
            ++counters_["dropped_by_authenticator"];
            return false;  // only EAPOL passes during 802.1x
        }
        return nr->authenticated;
    }

  private:
    struct NodeRuntime {
        std::unique_ptr<CrNode> proto;
        // Radio / L3 state owned by the simulator.
        std::optional<MacAddress> associated_ap;
        bool authenticated = false;
        SubnetId subnet{};
        Ipv4Address ip{};
        Ipv4Address router{};
        AuthSession auth;
        // Service windows (microseconds, absolute).
        SimTime uplink_from = 0;
        SimTime downlink_from = 0;
        SimTime bridging_until = 0;
        // Relay usage during the current handoff.
        std::optional<MacAddress> relay_rn;
        SimTime relay_from = std::numeric_limits<SimTime>::max();
        SimTime relay_until = 0;
        bool in_handoff = false;
        // Loss attribution.
        int open_record = -1;
        int pending_losses = 0;
        SimTime attribution_until = 0;

        const NodeConfig& cfg() const { return proto->config(); }
    };

    struct StreamRuntime {
        StreamSpec spec;
        bool downlink = false;  // dst is a wireless node
        std::string dst_node;   // wireless endpoint (dst for downlink, src for uplink)
        Ipv4Address cn_ip{};    // correspondent address (wired or wireless peer)
        bool cn_cooperative = true;
        bool direct_leg = true;
        std::vector<MacAddress> relay_legs;
        StreamStats stats;
        std::uint64_t seq = 0;
    };

    // --- construction -------------------------------------------------------

    void build() {
        for (const auto& sn : scenario_.subnets) {
            DhcpPool pool;
            pool.subnet = sn.id;
            pool.mask = sn.mask;
            pool.router = sn.router;
            pool.range_begin = sn.pool_begin;
            pool.range_end = sn.pool_end;
            pool.lease_duration = ms_to_us(sn.lease_duration_ms);
            dhcp_.add_pool(pool);
        }

        nodes_.reserve(scenario_.nodes.size());
        for (const auto& spec : scenario_.nodes) {
            const ApSpec* ap = scenario_.find_ap(spec.initial_ap);
            const SubnetSpec* sn = scenario_.find_subnet(ap->subnet);
            NodeRuntime nr;
            nr.proto = std::make_unique<CrNode>(spec.cfg, make_bus(spec.cfg.name));
            if (!scenario_.params.spoof_victim.empty() &&
                spec.cfg.malicious == MaliciousKind::Spoofer) {
                const auto* victim = scenario_.find_node(scenario_.params.spoof_victim);
                NodeConfig patched = spec.cfg;
                patched.spoof_victim = victim->cfg.mac;
                nr.proto = std::make_unique<CrNode>(patched, make_bus(spec.cfg.name));
            }
            nr.associated_ap = ap->bssid;
            nr.authenticated = true;  // pre-run association is settled
            nr.subnet = sn->id;
            nr.ip = spec.ip;
            nr.router = sn->router;
            node_index_[spec.cfg.name] = nodes_.size();
            mac_index_[spec.cfg.mac] = nodes_.size();
            nodes_.push_back(std::move(nr));
        }
        for (auto& nr : nodes_) {
            const ApSpec* ap = ap_of(*nr.associated_ap);
            nr.proto->set_l3(ap->bssid, ap->channel, nr.subnet, nr.ip, nr.router);
        }
        for (const auto& seed : scenario_.cache_seeds) {
            auto* nr = runtime(seed.node);
            CacheEntry e;
            if (seed.ap) {
                const ApSpec* ap = scenario_.find_ap(*seed.ap);
                const SubnetSpec* sn = scenario_.find_subnet(ap->subnet);
                e = CacheEntry{ap->bssid, ap->channel, sn->id};
            } else {
                e = *seed.raw;
            }
            nr->proto->cache().observe(e, seed.signal_dbm, 0);
        }

        for (const auto& spec : scenario_.streams) {
            StreamRuntime st;
            st.spec = spec;
            st.stats.name = spec.name;
            const bool dst_is_node = scenario_.find_node(spec.dst) != nullptr;
            st.downlink = dst_is_node;
            if (dst_is_node) {
                st.dst_node = spec.dst;
                if (const auto* cn = scenario_.find_cn(spec.src)) {
                    st.cn_ip = cn->ip;
                    st.cn_cooperative = cn->cooperative;
                } else {
                    st.cn_ip = runtime(spec.src)->ip;
                }
            } else {
                st.dst_node = spec.src;  // uplink: the wireless end is the source
                st.cn_ip = scenario_.find_cn(spec.dst)->ip;
                st.cn_cooperative = scenario_.find_cn(spec.dst)->cooperative;
            }
            streams_.push_back(std::move(st));
        }
        for (auto& st : streams_) {
            auto* nr = runtime(st.dst_node);
            nr->proto->set_correspondent(st.cn_ip, st.cn_cooperative);
        }
    }

    NodeBus make_bus(const std::string& name) {
        NodeBus bus;
        bus.now = [this]() { return sched_.now(); };
        bus.schedule = [this](SimTime delay, std::function<void()> fn) {
            return sched_.schedule_in(delay, std::move(fn));
        };
        bus.cancel = [this](EventId id) { sched_.cancel(id); };
        bus.multicast = [this, name](const Message& msg, int ttl) {
            send_multicast(name, msg, ttl);
        };
        bus.unicast = [this, name](const Message& msg, const MacAddress& to) {
            send_unicast(name, msg, to);
        };
        bus.uniform = [this](double lo, double hi) { return rng_.uniform(lo, hi); };
        bus.trace = [this, name](const std::string& line) { trace_node(name, line); };
        bus.security_log = [this, name](const std::string& line) {
            security_.push_back("t=" + format_us(sched_.now()) + " node=" + name + " " + line);
        };
        bus.dhcp_acquire = [this, name](SubnetId subnet, MacAddress chaddr, bool broadcast,
                                        std::function<void(DhcpResult<DhcpGrant>)> cb) {
            dhcp_exchange_timed(name, subnet, chaddr, broadcast, std::move(cb));
        };
        bus.dhcp_renew = [this, name](Ipv4Address ip, MacAddress chaddr,
                                      std::function<void(DhcpResult<DhcpGrant>)> cb) {
            sched_.schedule_in(ms_to_us(50.0), [this, name, ip, chaddr, cb]() {
                auto res = dhcp_.renew(ip, chaddr, sched_.now());
                trace_node(name, res.ok() ? "DHCP RENEW ok ip=" + ip.to_string()
                                          : std::string("DHCP RENEW failed: ") +
                                                dhcp_error_name(res.error));
                cb(res);
            });
        };
        bus.ap_requires_auth = [this](const MacAddress& bssid) -> std::optional<bool> {
            const ApSpec* ap = ap_of(bssid);
            if (!ap) return std::nullopt;
            return ap->requires_8021x;
        };
        bus.subnet_mask = [this](SubnetId subnet) -> std::uint32_t {
            const SubnetSpec* sn = scenario_.find_subnet(subnet);
            return sn ? sn->mask : prefix_to_mask(24);
        };
        bus.session_redirect = [this, name](Ipv4Address cn_ip, std::vector<MacAddress> legs,
                                            bool keep_direct) {
            const SimTime latency = ms_to_us(scenario_.params.session_redirect_latency_ms);
            sched_.schedule_in(latency, [this, name, cn_ip, legs, keep_direct]() {
                try {
                    session_redirect(cn_ip, name, legs, keep_direct);
                } catch (const std::exception& e) {
                    trace_sim(std::string("session redirect ignored: ") + e.what());
                }
            });
        };
        bus.adhoc_data = [this, name](const MacAddress& rn_mac, std::size_t bytes) {
            auto it = mac_index_.find(rn_mac);
            if (it == mac_index_.end()) return;
            auto& rn = nodes_[it->second];
            std::vector<std::uint8_t> payload(bytes, 0xab);
            auto* src = runtime(name);
            if (!src) return;
            relay_uplink(rn.cfg().name, src->cfg().mac, payload, sched_.now());
        };
        return bus;
    }

    // --- script ---------------------------------------------------------------

    bool group_enabled(const std::string& group) const {
        if (mode_ == RunMode::Both) return true;
        if (group == "helper") return true;
        return (mode_ == RunMode::Cr) ? group == "cr" : group == "legacy";
    }

    void schedule_script() {
        // Nodes introduce themselves shortly after start; stagger keeps the
        // initial multicast exchanges readable in the trace.
        SimTime t0 = ms_to_us(1.0);
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            sched_.schedule(t0 + static_cast<SimTime>(i) * 1000, [this, i]() {
                nodes_[i].proto->bootstrap();
            });
        }

        const SimTime lead = ms_to_us(scenario_.params.mobility_lead_ms);
        for (const auto& m : scenario_.mobility) {
            const auto* spec = scenario_.find_node(m.node);
            if (!group_enabled(spec->cfg.group)) continue;
            const ApSpec* target = scenario_.find_ap(m.ap);
            const SimTime warn_at = m.t > lead ? m.t - lead : 0;
            sched_.schedule(warn_at, [this, m, target]() {
                auto* nr = runtime(m.node);
                if (!nr->associated_ap || nr->in_handoff) return;
                // The radio sees the target strengthen and the serving AP
                // fade below the preparation threshold.
                nr->proto->on_beacon(target->bssid, target->channel, -55.0);
                const ApSpec* cur = ap_of(*nr->associated_ap);
                nr->proto->on_beacon(cur->bssid, cur->channel, -80.0);
            });
            sched_.schedule(m.t, [this, m]() { begin_handoff(m.node, m.ap); });
        }
        for (const auto& s : scenario_.signals) {
            const auto* spec = scenario_.find_node(s.node);
            if (!group_enabled(spec->cfg.group)) continue;
            const ApSpec* ap = scenario_.find_ap(s.ap);
            sched_.schedule(s.t, [this, s, ap]() {
                runtime(s.node)->proto->on_beacon(ap->bssid, ap->channel, s.dbm);
            });
        }

        for (std::size_t i = 0; i < streams_.size(); ++i) {
            const auto* spec = scenario_.find_node(streams_[i].dst_node);
            if (spec && !group_enabled(spec->cfg.group)) continue;
            schedule_stream_packet(i, ms_to_us(streams_[i].spec.start_ms));
        }

        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const auto& cfg = nodes_[i].cfg();
            if (cfg.malicious == MaliciousKind::None || cfg.malicious_rate <= 0) continue;
            const SimTime period = ms_to_us(1000.0 / cfg.malicious_rate);
            schedule_malicious(i, ms_to_us(500.0), period);
        }
    }

    void schedule_malicious(std::size_t idx, SimTime at, SimTime period) {
        if (at > effective_end_us()) return;
        sched_.schedule(at, [this, idx, at, period]() {
            nodes_[idx].proto->act_malicious();
            schedule_malicious(idx, at + period, period);
        });
    }

    SimTime effective_end_us() const {
        if (scenario_.params.duration_ms > 0) return ms_to_us(scenario_.params.duration_ms);
        SimTime last = 0;
        for (const auto& m : scenario_.mobility) last = std::max(last, m.t);
        for (const auto& s : scenario_.signals) last = std::max(last, s.t);
        for (const auto& st : scenario_.streams)
            last = std::max(last, ms_to_us(std::max(st.start_ms, st.stop_ms)));
        return last + ms_to_us(5000.0);
    }

    // --- message transport -----------------------------------------------------

    void send_multicast(const std::string& sender, const Message& msg, int ttl) {
        auto* s = runtime(sender);
        if (!s || !s->associated_ap) return;
        if (!ap_accepts_data(sender)) {
            trace_node(sender, std::string("multicast blocked kind=") + message_kind_name(msg));
            return;
        }
        const auto bytes = encode(msg);
        counters_["multicast_sent"]++;
        counters_[std::string("tx_") + message_kind_name(msg)]++;
        counters_["multicast_bytes"] += bytes.size();

        DeliveryMeta meta;
        meta.sender_associated_bssid = s->associated_ap;
        const SubnetId from = subnet_of(*s->associated_ap);
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            auto& nr = nodes_[i];
            if (nr.cfg().name == sender) continue;
            if (!nr.cfg().cr_enabled) continue;
            if (!nr.associated_ap || !nr.authenticated) continue;
            if (subnet_hops(from, subnet_of(*nr.associated_ap)) >= ttl) continue;
            sched_.schedule_in(0, [this, i, msg, meta]() { nodes_[i].proto->on_message(msg, meta); });
        }
        // Cooperative correspondents subscribe to the group too; a RELAY_REQ
        // makes them duplicate the downlink toward the relay.
        if (const auto* rr = std::get_if<RelayReq>(&msg)) {
            if (ttl >= 2) {
                const RelayReq req = *rr;
                sched_.schedule_in(0, [this, req]() { correspondent_hears_relay_req(req); });
            }
        }
    }

    void send_unicast(const std::string& sender, const Message& msg, const MacAddress& to) {
        auto* s = runtime(sender);
        if (!s || !s->associated_ap) return;
        if (!ap_accepts_data(sender)) {
            trace_node(sender, std::string("unicast blocked kind=") + message_kind_name(msg));
            return;
        }
        counters_[std::string("tx_") + message_kind_name(msg)]++;
        auto it = mac_index_.find(to);
        if (it == mac_index_.end()) return;
        auto& dst = nodes_[it->second];
        if (!dst.associated_ap || !dst.authenticated) return;
        DeliveryMeta meta;
        meta.sender_associated_bssid = s->associated_ap;
        const std::size_t i = it->second;
        sched_.schedule_in(0, [this, i, msg, meta]() { nodes_[i].proto->on_message(msg, meta); });
    }

    void correspondent_hears_relay_req(const RelayReq& req) {
        for (auto& st : streams_) {
            if (!st.cn_cooperative) continue;
            if (st.cn_ip != req.cn_ip) continue;
            auto it = mac_index_.find(req.sender);
            if (it == mac_index_.end()) continue;
            if (nodes_[it->second].cfg().name != st.dst_node) continue;
            // Duplicate toward the RN while keeping the direct leg; the
            // direct copy simply stops reaching the MN once it leaves.
            st.relay_legs = {req.rn_mac};
            st.direct_leg = true;
            trace_sim("cn " + st.cn_ip.to_string() + " duplicates stream=" + st.spec.name +
                      " to rn=" + req.rn_mac.to_string());
        }
    }

    // --- DHCP ------------------------------------------------------------------

    // Four-message exchange spread over a sampled duration; the lease is
    // committed at the ACK.
    void dhcp_exchange_timed(const std::string& client, SubnetId subnet, MacAddress chaddr,
                             bool broadcast, std::function<void(DhcpResult<DhcpGrant>)> cb) {
        const double total_ms = delays_.sample_dhcp(rng_);
        const SimTime total = ms_to_us(total_ms);
        const std::string flags = broadcast ? " broadcast=1 chaddr=" : " broadcast=0 chaddr=";
        trace_node(client, "DHCP DISCOVER subnet=" + subnet.to_string() + flags +
                               chaddr.to_string());
        sched_.schedule_in(static_cast<SimTime>(total * 0.45), [this, client]() {
            trace_node(client, "DHCP OFFER");
        });
        sched_.schedule_in(static_cast<SimTime>(total * 0.55), [this, client]() {
            trace_node(client, "DHCP REQUEST");
        });
        sched_.schedule_in(total, [this, client, subnet, chaddr, broadcast, cb]() {
            auto res = dhcp_.acquire(subnet, chaddr, broadcast, sched_.now());
            trace_node(client, res.ok() ? "DHCP ACK ip=" + (*res).ip.to_string()
                                        : std::string("DHCP NAK: ") + dhcp_error_name(res.error));
            cb(res);
        });
    }

    // --- handoff engine ----------------------------------------------------------

    void begin_handoff(const std::string& name, const std::string& target_ap_name) {
        auto* nr = runtime(name);
        const ApSpec* target = scenario_.find_ap(target_ap_name);
        const SubnetSpec* target_subnet = scenario_.find_subnet(target->subnet);
        if (nr->in_handoff) {
            trace_sim("mobility event dropped, " + name + " still in handoff");
            return;
        }
        if (nr->associated_ap && *nr->associated_ap == target->bssid) return;

        const SimTime t0 = sched_.now();
        CrNode& node = *nr->proto;
        const HandoffPlan plan = node.plan_handoff(target->bssid);
        const std::string from_name = nr->associated_ap ? ap_of(*nr->associated_ap)->name : "-";
        node.on_handoff_start(target->bssid);

        nr->in_handoff = true;
        nr->associated_ap.reset();
        nr->authenticated = false;
        nr->auth = AuthSession{};
        nr->uplink_from = std::numeric_limits<SimTime>::max();
        nr->downlink_from = std::numeric_limits<SimTime>::max();
        nr->relay_rn.reset();
        nr->relay_from = std::numeric_limits<SimTime>::max();
        nr->relay_until = 0;
        nr->open_record = -1;
        nr->pending_losses = 0;

        HandoffRecord rec;
        rec.node = name;
        rec.from_ap = from_name;
        rec.to_ap = target->name;
        rec.group = node.config().group;

        // --- L2 ----------------------------------------------------------
        double l2_ms = 0;
        bool used_cache = false;
        const bool poisoned_channel =
            plan.cache_hit && plan.cached_channel && *plan.cached_channel != target->channel;
        if (!plan.cache_hit) {
            // No cached knowledge: a CR client falls back to its selective
            // scan, a legacy client runs the original full scan.
            l2_ms = node.config().cr_enabled ? delays_.sample_selective_scan(rng_)
                                             : delays_.sample_full_scan(rng_);
        } else if (poisoned_channel) {
            // Cached channel is wrong: the association attempt dies, then
            // legacy scanning recovers.
            node.on_assoc_failed(target->bssid);
            l2_ms = delays_.assoc_fail_ms + delays_.sample_full_scan(rng_);
        } else {
            l2_ms = delays_.sample_open_auth_assoc(rng_);
            used_cache = true;
        }
        rec.used_cache = used_cache;

        const bool subnet_change = nr->subnet != target_subnet->id;
        const bool needs_auth = target->requires_8021x && subnet_change;

        // --- relay availability -------------------------------------------
        bool relay_ok = false;
        MacAddress rn_mac{};
        if (needs_auth && used_cache && plan.relay && node.config().use_relay) {
            auto it = mac_index_.find(plan.relay->rn_mac);
            if (it != mac_index_.end()) {
                auto& rn = nodes_[it->second];
                const auto* reg = rn.proto->relay_table().find(node.mac());
                if (reg && reg->active && rn.associated_ap &&
                    *rn.associated_ap == target->bssid) {
                    relay_ok = true;
                    rn_mac = plan.relay->rn_mac;
                }
            }
        }

        const SimTime assoc_done = t0 + ms_to_us(l2_ms);
        sched_.schedule(assoc_done, [this, name, target, target_subnet, rec, t0, l2_ms,
                                     needs_auth, relay_ok, rn_mac]() {
            complete_association(name, target, target_subnet, rec, t0, l2_ms, needs_auth,
                                 relay_ok, rn_mac);
        });
    }

    void complete_association(const std::string& name, const ApSpec* target,
                              const SubnetSpec* target_subnet, HandoffRecord rec, SimTime t0,
                              double l2_ms, bool needs_auth, bool relay_ok, MacAddress rn_mac) {
        auto* nr = runtime(name);
        CrNode& node = *nr->proto;
        nr->associated_ap = target->bssid;

        double auth_ms = 0;
        if (needs_auth) {
            auth_ms = delays_.sample_auth(rng_, node.config().mechanism);
            nr->auth.mn_mac = node.mac();
            nr->auth.phase = AuthSession::Phase::EapolInProgress;
            nr->auth.mechanism = node.config().mechanism;
            nr->auth.started_at = sched_.now();
            nr->auth.duration = ms_to_us(auth_ms);
            const double cert_ms = auth_ms * delays_.auth_cert_fraction;
            trace_node(name, "802.1x start mech=" +
                                 std::string(auth_mechanism_name(node.config().mechanism)) +
                                 " cert_ms=" + format_fixed(cert_ms) + " key_ms=" +
                                 format_fixed(auth_ms - cert_ms));
        } else {
            nr->authenticated = true;
        }

        // --- L3 ------------------------------------------------------------
        const bool subnet_change = nr->subnet != target_subnet->id;
        bool used_lease = false;
        double l3_ms = 0;
        bool lease_bad_on_arrival = false;
        SubnetLease lease{};
        if (subnet_change) {
            L3Resolution res = node.resolve_l3(target_subnet->id, target->bssid);
            if (res.use_lease) {
                lease = res.lease;
                // Duplicate-address / unknown-binding check as the address
                // comes up: the server must hold this address for our MAC.
                const auto bound = dhcp_.bound_chaddr(lease.leased_ip, sched_.now());
                if (bound && *bound == node.mac()) {
                    used_lease = true;
                    l3_ms = delays_.sample_l3_signaling(rng_) + delays_.sample_l3_polling(rng_);
                } else {
                    lease_bad_on_arrival = true;
                    node.on_bad_lease_on_arrival(lease);
                }
            }
        }

        const bool relay_in_use = relay_ok && needs_auth && !lease_bad_on_arrival &&
                                  (used_lease || !subnet_change);
        rec.used_relay = relay_in_use;
        rec.overlapped = relay_in_use;
        rec.auth_us = ms_to_us(auth_ms);

        double first_packet_ms = relay_in_use ? delays_.first_packet_ms : 0.0;
        rec.l2_us = ms_to_us(l2_ms) + ms_to_us(first_packet_ms);

        SimTime interruption_end;
        if (!subnet_change) {
            rec.l3_us = 0;
            interruption_end = t0 + rec.l2_us + (needs_auth && !relay_in_use ? rec.auth_us : 0);
            finish_handoff(name, target, target_subnet, rec, t0, interruption_end, relay_in_use,
                           rn_mac, false, lease);
        } else if (used_lease) {
            rec.l3_us = ms_to_us(l3_ms);
            interruption_end = t0 + rec.l2_us + rec.l3_us +
                               (needs_auth && !relay_in_use ? rec.auth_us : 0);
            finish_handoff(name, target, target_subnet, rec, t0, interruption_end, relay_in_use,
                           rn_mac, true, lease);
        } else {
            // Legacy acquisition: wait for 802.1x (DHCP cannot run before
            // the port opens), then a full serial exchange.
            const SimTime dhcp_start = sched_.now() + (needs_auth ? ms_to_us(auth_ms) : 0);
            sched_.schedule(dhcp_start, [this, name, target, target_subnet, rec, t0,
                                         needs_auth]() mutable {
                auto* nr2 = runtime(name);
                dhcp_exchange_timed(name, target_subnet->id, nr2->proto->mac(), false,
                                    [this, name, target, target_subnet, rec, t0,
                                     needs_auth](DhcpResult<DhcpGrant> res) mutable {
                                        auto* nr3 = runtime(name);
                                        SimTime end = sched_.now();
                                        rec.l3_us = end - t0 - rec.l2_us -
                                                    (needs_auth ? rec.auth_us : 0);
                                        if (res.ok()) {
                                            nr3->ip = (*res).ip;
                                            nr3->router = (*res).router;
                                        } else {
                                            trace_node(name, "legacy DHCP failed, keeping old ip");
                                        }
                                        finish_handoff(name, target, target_subnet, rec, t0, end,
                                                       false, MacAddress{}, false, SubnetLease{});
                                    });
            });
        }

        if (needs_auth) {
            const SimTime auth_done = sched_.now() + ms_to_us(auth_ms);
            sched_.schedule(auth_done, [this, name, relay_in_use, rn_mac]() {
                complete_auth(name, relay_in_use, rn_mac);
            });
        }
    }

    void finish_handoff(const std::string& name, const ApSpec* target,
                        const SubnetSpec* target_subnet, HandoffRecord rec, SimTime t0,
                        SimTime interruption_end, bool relay_in_use, MacAddress rn_mac,
                        bool used_lease, const SubnetLease& lease) {
        sched_.schedule(interruption_end, [this, name, target, target_subnet, rec, t0,
                                           interruption_end, relay_in_use, rn_mac, used_lease,
                                           lease]() mutable {
            auto* nr = runtime(name);
            CrNode& node = *nr->proto;

            Ipv4Address new_ip = nr->ip;
            Ipv4Address new_router = nr->router;
            if (used_lease) {
                new_ip = lease.leased_ip;
                new_router = lease.router_ip;
            }
            nr->subnet = target_subnet->id;
            nr->ip = new_ip;
            nr->router = new_router;
            nr->in_handoff = false;

            const double bridging =
                relay_in_use ? 0.0
                             : (target->bridging_ms ? *target->bridging_ms : delays_.bridging_ms);
            nr->uplink_from = interruption_end;
            nr->downlink_from = interruption_end;
            nr->bridging_until = interruption_end + ms_to_us(bridging);
            if (relay_in_use) {
                nr->relay_rn = rn_mac;
                nr->relay_from = interruption_end;
                nr->relay_until = nr->auth.started_at + nr->auth.duration;
                // Downlink rides the relay until authentication completes.
                nr->downlink_from = nr->relay_until;
                nr->uplink_from = nr->relay_until;
            }

            node.on_handoff_complete(target->bssid, target->channel, target_subnet->id, new_ip,
                                     new_router, used_lease);

            rec.lost_pkts = nr->pending_losses;
            nr->pending_losses = 0;
            records_.push_back(rec);
            nr->open_record = static_cast<int>(records_.size()) - 1;
            nr->attribution_until = std::max(nr->bridging_until, nr->relay_until);
            trace_sim("handoff done node=" + name + " to=" + target->name + " l2=" +
                      format_ms(rec.l2_us) + "ms l3=" + format_ms(rec.l3_us) + "ms auth=" +
                      format_ms(rec.auth_us) + "ms overlapped=" + (rec.overlapped ? "1" : "0"));
            (void)t0;
        });
    }

    void complete_auth(const std::string& name, bool relay_in_use, MacAddress rn_mac) {
        auto* nr = runtime(name);
        if (nr->auth.phase != AuthSession::Phase::EapolInProgress) return;
        nr->auth.phase = AuthSession::Phase::Authenticated;
        nr->authenticated = true;
        nr->proto->on_auth_complete();
        trace_node(name, "802.1x complete");
        if (relay_in_use) {
            auto it = mac_index_.find(rn_mac);
            if (it != mac_index_.end()) {
                auto& rn = nodes_[it->second];
                rn.proto->relay_table().note_authenticated(nr->proto->mac());
                const MacAddress mn = nr->proto->mac();
                const std::string rn_name = rn.cfg().name;
                sched_.schedule_in(ms_to_us(scenario_.params.relay_idle_ms),
                                   [this, rn_name, mn]() {
                                       auto* rnp = runtime(rn_name);
                                       rnp->proto->relay_table().deactivate(mn);
                                       trace_node(rn_name,
                                                  "relay idle, deactivated mn=" + mn.to_string());
                                   });
            }
        }
        // The CN sees direct traffic again and stops duplicating.
        for (auto& st : streams_) {
            if (st.dst_node != name) continue;
            if (!st.relay_legs.empty()) {
                st.relay_legs.clear();
                st.direct_leg = true;
                trace_sim("cn resumes direct stream=" + st.spec.name);
            }
        }
    }

    // --- streams -------------------------------------------------------------

    void schedule_stream_packet(std::size_t idx, SimTime at) {
        if (at > effective_end_us()) return;
        sched_.schedule(at, [this, idx, at]() {
            deliver_stream_packet(idx);
            auto& st = streams_[idx];
            const SimTime next = at + ms_to_us(st.spec.interval_ms);
            const SimTime stop =
                st.spec.stop_ms > 0 ? ms_to_us(st.spec.stop_ms) : effective_end_us();
            if (next <= stop) schedule_stream_packet(idx, next);
        });
    }

    void deliver_stream_packet(std::size_t idx) {
        auto& st = streams_[idx];
        const SimTime t = sched_.now();
        ++st.stats.sent;
        std::vector<std::uint8_t> payload(st.spec.payload_bytes);
        for (std::size_t i = 0; i < payload.size(); ++i)
            payload[i] = static_cast<std::uint8_t>((st.seq * 31 + i) & 0xff);
        ++st.seq;

        auto* nr = runtime(st.dst_node);
        bool delivered = false;
        bool via_relay = false;

        if (st.downlink) {
            if (st.direct_leg && nr->associated_ap && nr->authenticated &&
                t >= nr->downlink_from && t >= nr->bridging_until)
                delivered = true;
            if (!delivered) {
                for (const auto& rn_mac : active_relay_legs(*nr, st)) {
                    auto it = mac_index_.find(rn_mac);
                    if (it == mac_index_.end()) continue;
                    auto& rn = nodes_[it->second];
                    if (!rn.associated_ap || !nr->associated_ap) continue;
                    if (*rn.associated_ap != *nr->associated_ap) continue;  // different channel
                    if (t < nr->relay_from || t >= nr->relay_until) continue;
                    auto fwd = relay_downlink(rn.cfg().name, st.cn_ip, nr->proto->mac(), payload, t);
                    if (fwd && *fwd == payload) {
                        delivered = true;
                        via_relay = true;
                        break;
                    }
                }
            } else if (!st.relay_legs.empty()) {
                ++st.stats.duplicates;  // fan-out copy also reached the RN
            }
        } else {
            // Uplink: wireless source toward its correspondent.
            if (nr->associated_ap && nr->authenticated && t >= nr->uplink_from) {
                delivered = true;
            } else if (nr->relay_rn && t >= nr->relay_from && t < nr->relay_until) {
                auto it = mac_index_.find(*nr->relay_rn);
                if (it != mac_index_.end()) {
                    auto fwd = relay_uplink(nodes_[it->second].cfg().name, nr->proto->mac(),
                                            payload, t);
                    if (fwd && *fwd == payload) {
                        delivered = true;
                        via_relay = true;
                    }
                }
            }
        }

        if (delivered) {
            ++st.stats.received;
            if (via_relay) ++st.stats.relayed;
        } else {
            ++st.stats.lost;
            // Attribute downlink losses to the handoff in progress (its
            // record appears when the interruption ends) or to the trailing
            // bridging/relay window of the last completed one.
            if (st.downlink) {
                if (nr->in_handoff)
                    ++nr->pending_losses;
                else if (nr->open_record >= 0 && t <= nr->attribution_until)
                    ++records_[static_cast<std::size_t>(nr->open_record)].lost_pkts;
            }
        }
    }

    std::vector<MacAddress> active_relay_legs(const NodeRuntime& nr, const StreamRuntime& st) {
        std::vector<MacAddress> legs = st.relay_legs;
        if (legs.empty() && nr.relay_rn) legs.push_back(*nr.relay_rn);
        return legs;
    }

    // --- finalization -----------------------------------------------------------

    RunReport finalize(SimTime end) {
        RunReport report;
        report.scenario = scenario_.name;
        report.topology_id = scenario_.topology_id();
        report.seed = seed_;
        report.records = records_;
        for (auto& st : streams_) report.streams.push_back(st.stats);
        report.trace = trace_;
        report.security_log = security_;
        for (const auto& nr : nodes_) {
            for (const auto* reg : nr.proto->relay_table().all()) {
                std::ostringstream os;
                os << "rn=" << nr.cfg().name << " mn=" << reg->mn_mac.to_string()
                   << " registered=" << reg->registered_at << " expires=" << reg->expires_at
                   << " active=" << (reg->active ? 1 : 0)
                   << " authenticated=" << (reg->mn_authenticated ? 1 : 0)
                   << " up=" << reg->frames_up << " down=" << reg->frames_down;
                report.relay_audit.push_back(os.str());
            }
        }
        report.counters = counters_;
        std::uint64_t suppressed = 0, responded = 0, alerts = 0, marked = 0;
        for (const auto& nr : nodes_) {
            suppressed += nr.proto->inforesp_suppressed();
            responded += nr.proto->inforesp_sent();
            alerts += nr.proto->alerts_sent();
            marked = std::max<std::uint64_t>(marked, nr.proto->ledger().marked_count());
        }
        report.counters["inforesp_suppressed"] = suppressed;
        report.counters["inforesp_sent"] = responded;
        report.counters["alerts_sent"] = alerts;
        report.counters["nodes_marked_malicious"] = marked;
        report.counters["dhcp_exchanges"] = dhcp_.exchange_count();
        report.counters["dhcp_broadcast_exchanges"] = dhcp_.broadcast_exchange_count();
        report.counters["leases_active_at_end"] = dhcp_.active_leases(end);
        std::uint64_t reserve = 0;
        for (const auto& nr : nodes_) reserve += nr.proto->leases().size();
        report.counters["leases_held_in_reserve"] = reserve;
        report.lease_table = dhcp_.dump_string(end);
        return report;
    }

    // --- helpers -----------------------------------------------------------------

    NodeRuntime* runtime(const std::string& name) {
        auto it = node_index_.find(name);
        return it == node_index_.end() ? nullptr : &nodes_[it->second];
    }

    const NodeRuntime* runtime(const std::string& name) const {
        auto it = node_index_.find(name);
        return it == node_index_.end() ? nullptr : &nodes_[it->second];
    }

    const ApSpec* ap_of(const MacAddress& bssid) const {
        for (const auto& ap : scenario_.aps)
            if (ap.bssid == bssid) return &ap;
        return nullptr;
    }

    std::uint32_t channel_of(const MacAddress& bssid) const {
        const ApSpec* ap = ap_of(bssid);
        return ap ? ap->channel : 0;
    }

    SubnetId subnet_of(const MacAddress& bssid) const {
        const ApSpec* ap = ap_of(bssid);
        if (!ap) return SubnetId::unknown();
        const SubnetSpec* sn = scenario_.find_subnet(ap->subnet);
        return sn ? sn->id : SubnetId::unknown();
    }

    // Every distinct subnet pair sits one router hop apart (single backbone).
    static int subnet_hops(const SubnetId& a, const SubnetId& b) { return a == b ? 0 : 1; }

    static const char* drop_name(RelayDrop d) {
        switch (d) {
            case RelayDrop::Forwarded: return "forwarded";
            case RelayDrop::Expired: return "expired";
            case RelayDrop::Unregistered: return "unregistered";
            case RelayDrop::WrongClass: return "wrong_class";
        }
        return "?";
    }

    void trace_node(const std::string& name, const std::string& line) {
        trace_.push_back("t=" + format_us(sched_.now()) + " node=" + name + " " + line);
    }

    void trace_sim(const std::string& line) {
        trace_.push_back("t=" + format_us(sched_.now()) + " sim " + line);
    }

    Scenario scenario_;
    Rng rng_;
    std::uint64_t seed_;
    RunMode mode_;
    DelayModel delays_;
    Scheduler sched_;
    DhcpServer dhcp_;

    std::vector<NodeRuntime> nodes_;
    std::map<std::string, std::size_t> node_index_;
    std::map<MacAddress, std::size_t> mac_index_;
    std::vector<StreamRuntime> streams_;

    std::vector<HandoffRecord> records_;
    std::vector<std::string> trace_;
    std::vector<std::string> security_;
    std::map<std::string, std::uint64_t> counters_;
};

// Write the canonical output files for one or more repetitions of a run:
// report.csv, summary.txt, trace.log, security.log, relay.log, leases.txt.
inline void write_run_files(const std::vector<RunReport>& reps, const std::string& dir) {
    namespace fs = std::filesystem;
    if (reps.empty()) throw std::runtime_error("no runs to write");
    fs::create_directories(dir);

    std::vector<HandoffRecord> all_records;
    for (const auto& r : reps)
        all_records.insert(all_records.end(), r.records.begin(), r.records.end());

    {
        std::ofstream csv(dir + "/report.csv");
        write_csv(csv, all_records, reps.front().topology_id);
    }
    {
        std::ofstream summary(dir + "/summary.txt");
        summary << "scenario=" << reps.front().scenario << " reps=" << reps.size()
                << " seed=" << reps.front().seed << '\n';
        write_summary(summary, SummaryReport::from_records(all_records));
        std::map<std::string, std::uint64_t> counters;
        for (const auto& r : reps)
            for (const auto& [k, v] : r.counters) counters[k] += v;
        for (const auto& [k, v] : counters) summary << "metric " << k << '=' << v << '\n';
        for (const auto& r : reps)
            for (const auto& st : r.streams)
                summary << "stream name=" << st.name << " sent=" << st.sent
                        << " received=" << st.received << " lost=" << st.lost
                        << " duplicates=" << st.duplicates << " relayed=" << st.relayed
                        << " in_flight=" << st.in_flight << '\n';
    }
    auto write_lines = [&](const std::string& file, auto getter) {
        std::ofstream os(dir + "/" + file);
        for (std::size_t i = 0; i < reps.size(); ++i) {
            if (reps.size() > 1) os << "# rep " << i << '\n';
            for (const auto& line : getter(reps[i])) os << line << '\n';
        }
    };
    write_lines("trace.log", [](const RunReport& r) { return r.trace; });
    write_lines("security.log", [](const RunReport& r) { return r.security_log; });
    write_lines("relay.log", [](const RunReport& r) { return r.relay_audit; });
    {
        std::ofstream os(dir + "/leases.txt");
        for (std::size_t i = 0; i < reps.size(); ++i) {
            if (reps.size() > 1) os << "# rep " << i << '\n';
            os << reps[i].lease_table;
        }
    }
}

}  // namespace cr
