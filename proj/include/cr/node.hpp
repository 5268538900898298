// Per-node cooperation state machine: INFOREQ/INFORESP with random-wait
// suppression and TTL escalation, A-MN discovery, proxy address acquisition,
// relay registration, misbehavior verification and the handoff plan the
// simulator executes. The node talks to its environment only through
// NodeBus, so protocol logic is testable without the full simulator.

#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cr/adversary.hpp"
#include "cr/cache.hpp"
#include "cr/delay_model.hpp"
#include "cr/dhcp.hpp"
#include "cr/relay.hpp"
#include "cr/scheduler.hpp"
#include "cr/security.hpp"
#include "cr/types.hpp"
#include "cr/wire.hpp"

namespace cr {

struct NodeConfig {
    std::string name;
    MacAddress mac{};
    bool cr_enabled = true;
    bool can_assist = true;
    bool can_relay = false;
    bool use_relay = true;  // false: authenticate serially even with CR info
    bool harvest_inforeq = false;
    std::string group = "helper";  // cr | legacy | helper; used by report filters
    AuthMechanism mechanism = AuthMechanism::None;

    double suppression_window_ms = 50.0;
    double inforeq_retry_ms = 200.0;
    int max_ttl = 3;
    double amn_failover_ms = 2000.0;
    double relay_timeout_ms = 10000.0;
    double relay_cooldown_ms = 60000.0;
    double lease_duration_ms = 300000.0;
    int alert_threshold = SuspicionLedger::kDefaultThreshold;
    int alert_ttl = 3;
    double signal_threshold_dbm = -75.0;

    MaliciousKind malicious = MaliciousKind::None;
    double malicious_rate = 1.0;  // actions per simulated second
    bool spoofing_enabled = false;
    MacAddress spoof_victim{};
};

// Delivery metadata the shared medium attaches to received messages.
struct DeliveryMeta {
    // AP the sender was associated with when it transmitted, if any.
    std::optional<MacAddress> sender_associated_bssid;
};

struct RelayArrangement {
    MacAddress rn_mac{};
    Ipv4Address rn_ip{};
    MacAddress target_bssid{};
    SimTime arranged_at = 0;
};

// What the simulator needs to execute a handoff.
struct HandoffPlan {
    bool cache_hit = false;
    std::optional<std::uint32_t> cached_channel;
    std::optional<SubnetId> cached_subnet;
    bool expects_subnet_change = false;
    std::optional<SubnetLease> lease;
    std::optional<RelayArrangement> relay;
};

struct AmnCandidate {
    MacAddress mac{};
    Ipv4Address ip{};
    Ipv4Address router{};
    bool can_relay = false;
    MacAddress bssid{};
};

// Outcome of lease lookup when the node lands in a subnet.
struct L3Resolution {
    bool use_lease = false;
    SubnetLease lease{};
};

// Environment services, wired up by the simulator (or by a test harness).
struct NodeBus {
    std::function<SimTime()> now;
    std::function<EventId(SimTime delay_us, std::function<void()>)> schedule;
    std::function<void(EventId)> cancel;
    std::function<void(const Message&, int ttl)> multicast;
    std::function<void(const Message&, const MacAddress&)> unicast;
    std::function<double(double lo, double hi)> uniform;
    std::function<void(const std::string&)> trace;
    std::function<void(const std::string&)> security_log;
    // Timed DHCP exchange against the simulated server; cb fires when done.
    std::function<void(SubnetId, MacAddress chaddr, bool broadcast,
                       std::function<void(DhcpResult<DhcpGrant>)>)>
        dhcp_acquire;
    std::function<void(Ipv4Address, MacAddress chaddr,
                       std::function<void(DhcpResult<DhcpGrant>)>)>
        dhcp_renew;
    std::function<std::optional<bool>(const MacAddress& bssid)> ap_requires_auth;
    std::function<std::uint32_t(SubnetId)> subnet_mask;
    // Abstract media-session update toward a correspondent node.
    std::function<void(Ipv4Address cn_ip, std::vector<MacAddress> relay_legs, bool keep_direct)>
        session_redirect;
    // Ad-hoc-addressed data frame toward a relay node (abuse scenarios).
    std::function<void(const MacAddress& rn, std::size_t payload_bytes)> adhoc_data;
};

class CrNode {
  public:
    CrNode(NodeConfig cfg, NodeBus bus)
        : cfg_(std::move(cfg)),
          bus_(std::move(bus)),
          ledger_(cfg_.alert_threshold),
          relay_table_(ms_to_us(cfg_.relay_timeout_ms), ms_to_us(cfg_.relay_cooldown_ms)) {}

    const NodeConfig& config() const { return cfg_; }
    const MacAddress& mac() const { return cfg_.mac; }
    const std::string& name() const { return cfg_.name; }

    ApCache& cache() { return cache_; }
    const ApCache& cache() const { return cache_; }
    LeaseStore& leases() { return leases_; }
    const LeaseStore& leases() const { return leases_; }
    SuspicionLedger& ledger() { return ledger_; }
    const SuspicionLedger& ledger() const { return ledger_; }
    RelayTable& relay_table() { return relay_table_; }
    const RelayTable& relay_table() const { return relay_table_; }

    std::optional<MacAddress> current_ap() const { return current_ap_; }
    Ipv4Address ip() const { return ip_; }
    Ipv4Address router() const { return router_; }
    SubnetId subnet() const { return subnet_; }
    const std::optional<RelayArrangement>& arranged_relay() const { return arranged_relay_; }

    bool prep_exhausted_assistants(const SubnetId& subnet) const {
        auto it = preps_.find(subnet);
        return it != preps_.end() && it->second.stage == PrepStage::FailedNoAssistant;
    }

    const std::vector<AmnCandidate>& amn_candidates(const SubnetId& subnet) const {
        static const std::vector<AmnCandidate> kEmpty;
        auto it = amn_lists_.find(subnet);
        return it == amn_lists_.end() ? kEmpty : it->second;
    }

    std::uint64_t inforesp_sent() const { return inforesp_sent_; }
    std::uint64_t inforesp_suppressed() const { return inforesp_suppressed_; }
    std::uint64_t alerts_sent() const { return alerts_sent_; }
    bool has_suppression_timer(const MacAddress& rmn) const { return suppression_.count(rmn); }
    std::vector<CacheEntry> planned_response(const MacAddress& rmn) const {
        auto it = suppression_.find(rmn);
        return it == suppression_.end() ? std::vector<CacheEntry>{} : it->second.planned;
    }
    int pending_info_ttl() const { return pending_info_.active ? pending_info_.ttl : 0; }

    // --- initial placement (sim setup) ------------------------------------

    void set_l3(const MacAddress& ap, std::uint32_t channel, SubnetId subnet, Ipv4Address ip,
                Ipv4Address router, double signal_dbm = -50.0) {
        current_ap_ = ap;
        subnet_ = subnet;
        ip_ = ip;
        router_ = router;
        cache_.observe(CacheEntry{ap, channel, subnet}, signal_dbm, bus_.now ? bus_.now() : 0);
    }

    void set_correspondent(Ipv4Address cn_ip, bool cooperative) {
        cn_ip_ = cn_ip;
        cn_cooperative_ = cooperative;
    }

    // Issue the initial INFOREQ when the cache cannot support a handoff yet.
    void bootstrap() {
        if (!cfg_.cr_enabled || cfg_.malicious != MaliciousKind::None) return;
        if (info_needed()) request_info();
    }

    // --- radio observations -----------------------------------------------

    void on_beacon(const MacAddress& bssid, std::uint32_t channel, double dbm) {
        const SimTime now = bus_.now();
        if (cache_.find(bssid)) {
            cache_.update_signal(bssid, dbm, now);
        } else if (cfg_.cr_enabled) {
            // Beacons carry BSSID and channel; the subnet stays unknown
            // until another node tells us.
            cache_.observe(CacheEntry{bssid, channel, SubnetId::unknown()}, dbm, now);
        }
        maybe_prepare();
    }

    // --- message handling ---------------------------------------------------

    void on_message(const Message& msg, const DeliveryMeta& meta) {
        const MacAddress sender = message_sender(msg);
        if (sender == cfg_.mac) return;
        if (ledger_.is_malicious(sender)) {
            trace(std::string("drop kind=") + message_kind_name(msg) + " from=" +
                  sender.to_string() + " reason=marked_malicious");
            return;
        }
        std::visit([&](const auto& m) { handle(m, meta); }, msg);
    }

    // --- handoff support (driven by the simulator) -------------------------

    HandoffPlan plan_handoff(const MacAddress& target) const {
        HandoffPlan plan;
        const auto* rec = cache_.find(target);
        if (!rec) return plan;
        plan.cache_hit = true;
        plan.cached_channel = rec->entry.channel;
        if (!rec->entry.subnet.is_unknown()) plan.cached_subnet = rec->entry.subnet;

        const CacheRecord* cur = current_ap_ ? cache_.find(*current_ap_) : nullptr;
        if (!plan.cached_subnet || !cur)
            plan.expects_subnet_change = true;  // cannot rule it out
        else
            plan.expects_subnet_change = subnet_changed(cur->entry, rec->entry);

        if (plan.cached_subnet) {
            if (const auto* lease = leases_.find_valid(*plan.cached_subnet, bus_.now()))
                plan.lease = *lease;
        }
        if (arranged_relay_ && arranged_relay_->target_bssid == target) plan.relay = arranged_relay_;
        return plan;
    }

    void on_handoff_start(const MacAddress& target) {
        in_handoff_ = true;
        reset_prep();
        trace("handoff start target=" + target.to_string());
    }

    // Association to the cached AP failed (bogus channel or nonexistent AP).
    void on_assoc_failed(const MacAddress& target) {
        const auto* rec = cache_.find(target);
        if (rec && rec->learned_from) emit_alert(*rec->learned_from, "assoc_failed");
        cache_.erase(target);
        trace("assoc failed target=" + target.to_string());
    }

    // Pick the lease for the subnet we actually landed in. A lease prepared
    // for a different subnet means the cache entry that predicted the subnet
    // was wrong; alert whoever taught it to us.
    L3Resolution resolve_l3(const SubnetId& actual_subnet, const MacAddress& new_bssid) {
        L3Resolution res;
        const SimTime now = bus_.now();
        if (const auto* lease = leases_.find_valid(actual_subnet, now)) {
            res.use_lease = true;
            res.lease = *lease;
            return res;
        }
        const auto* rec = cache_.find(new_bssid);
        if (rec && !rec->entry.subnet.is_unknown() && rec->entry.subnet != actual_subnet) {
            if (rec->learned_from) emit_alert(*rec->learned_from, "wrong_subnet");
            // The lease acquired for the mis-predicted subnet stays in the
            // store until it expires; pool usage shows up in the metrics.
        }
        return res;
    }

    // Pre-acquired address turned out unusable on arrival (duplicate or not
    // bound at the server): alert the A-MN and fall back to legacy DHCP.
    void on_bad_lease_on_arrival(const SubnetLease& lease) {
        emit_alert(lease.acquired_via, "bad_lease_on_arrival");
        amn_blacklist_.insert(lease.acquired_via);
        leases_.erase(lease.subnet);
    }

    void on_handoff_complete(const MacAddress& bssid, std::uint32_t channel,
                             const SubnetId& actual_subnet, Ipv4Address ip, Ipv4Address router,
                             bool used_lease) {
        current_ap_ = bssid;
        subnet_ = actual_subnet;
        ip_ = ip;
        router_ = router;
        cache_.observe(CacheEntry{bssid, channel, actual_subnet}, -50.0, bus_.now());
        in_handoff_ = false;
        if (used_lease) {
            leases_.erase(actual_subnet);  // address now in use, not in reserve
            const MacAddress self = cfg_.mac;
            bus_.schedule(ms_to_us(100.0), [this, ip, self]() {
                bus_.dhcp_renew(ip, self, [this](DhcpResult<DhcpGrant> r) {
                    trace(r.ok() ? "lease renewed" : std::string("lease renew failed: ") +
                                                         dhcp_error_name(r.error));
                });
            });
        }
        if (arranged_relay_ && arranged_relay_->target_bssid != bssid) arranged_relay_.reset();
    }

    void on_auth_complete() {
        arranged_relay_.reset();
        trace("authentication complete");
    }

    // --- adversary ----------------------------------------------------------

    void act_malicious() {
        switch (cfg_.malicious) {
            case MaliciousKind::None: return;
            case MaliciousKind::FakeApLiar: lie(/*flip_subnet=*/true); return;
            case MaliciousKind::DosRedirector: lie(/*flip_subnet=*/false); return;
            case MaliciousKind::BadAmn: return;  // acts when asked, via IP_REQ
            case MaliciousKind::RelayAbuser: abuse_relay(); return;
            case MaliciousKind::Spoofer: spoof_relay(); return;
        }
    }

  private:
    enum class PrepStage { Discovering, AwaitingIp, Ready, FailedNoAssistant };

    // Pre-handoff L3 acquisition runs independently per candidate subnet:
    // A-MN discovery, then one IP_REQ at a time with failover.
    struct SubnetPrep {
        PrepStage stage = PrepStage::Discovering;
        std::size_t amn_index = 0;
        std::optional<EventId> failover_timer;
        std::optional<EventId> discover_timer;
        int discover_ttl = 2;
        int generation = 0;
    };

    struct SuppressionState {
        EventId timer = 0;
        std::vector<CacheEntry> planned;
    };

    struct InfoRequestState {
        bool active = false;
        int ttl = 1;
        std::optional<EventId> timer;
        int generation = 0;
    };

    // --- handlers ------------------------------------------------------------

    void handle(const InfoReq& req, const DeliveryMeta&) {
        if (!cfg_.cr_enabled) return;
        trace("rx INFOREQ from=" + req.sender.to_string() + " n=" +
              std::to_string(req.entries.size()));
        if (cfg_.harvest_inforeq) merge_verified(req.entries, req.sender, false);
        if (lying()) return;  // liars contribute nothing useful
        if (!cache_.should_respond(req.entries)) return;

        arm_suppression(req.sender, cache_.response_entries(req.entries));
    }

    void handle(const InfoResp& resp, const DeliveryMeta&) {
        if (!cfg_.cr_enabled) return;
        trace("rx INFORESP from=" + resp.sender.to_string() + " target=" +
              resp.target.to_string() + " n=" + std::to_string(resp.entries.size()));

        // Suppression: drop from our planned answer whatever this response
        // already delivered to the same R-MN.
        auto sup = suppression_.find(resp.target);
        if (sup != suppression_.end()) {
            auto& planned = sup->second.planned;
            planned.erase(std::remove_if(planned.begin(), planned.end(),
                                         [&](const CacheEntry& e) {
                                             return std::find(resp.entries.begin(),
                                                              resp.entries.end(),
                                                              e) != resp.entries.end();
                                         }),
                          planned.end());
            if (planned.empty()) {
                bus_.cancel(sup->second.timer);
                suppression_.erase(sup);
                ++inforesp_suppressed_;
                trace("suppressed response to " + resp.target.to_string());
            }
        }

        merge_verified(resp.entries, resp.sender, true);

        if (resp.target == cfg_.mac && pending_info_.active) {
            if (pending_info_.timer) bus_.cancel(*pending_info_.timer);
            pending_info_ = InfoRequestState{};
        }
        maybe_prepare();
    }

    void handle(const AmnDiscover& disc, const DeliveryMeta&) {
        if (!cfg_.cr_enabled || !cfg_.can_assist || lying()) return;
        if (!current_ap_ || disc.subnet != subnet_) return;
        AmnResp resp;
        resp.sender = cfg_.mac;
        resp.amn_ip = ip_;
        resp.router_ip = router_;
        resp.can_relay = cfg_.can_relay;
        resp.bssid = *current_ap_;
        bus_.unicast(Message{resp}, disc.sender);
        trace("tx AMN_RESP to=" + disc.sender.to_string());
    }

    void handle(const AmnResp& resp, const DeliveryMeta&) {
        if (!cfg_.cr_enabled) return;
        // Which subnet does this assistant serve? Match against whatever we
        // are currently looking for.
        std::optional<SubnetId> list_subnet;
        for (const auto& [subnet, prep] : preps_) {
            (void)prep;
            if (in_subnet(resp.amn_ip, subnet, bus_.subnet_mask(subnet))) {
                list_subnet = subnet;
                break;
            }
        }
        if (!list_subnet && abuse_subnet_ &&
            in_subnet(resp.amn_ip, *abuse_subnet_, bus_.subnet_mask(*abuse_subnet_)))
            list_subnet = *abuse_subnet_;
        if (!list_subnet) return;

        auto& list = amn_lists_[*list_subnet];
        const bool known = std::any_of(list.begin(), list.end(), [&](const AmnCandidate& c) {
            return c.mac == resp.sender;
        });
        if (!known)
            list.push_back({resp.sender, resp.amn_ip, resp.router_ip, resp.can_relay, resp.bssid});
        trace("rx AMN_RESP from=" + resp.sender.to_string() + " subnet=" +
              list_subnet->to_string());

        auto it = preps_.find(*list_subnet);
        if (it != preps_.end() && it->second.stage == PrepStage::Discovering) {
            if (it->second.discover_timer) {
                bus_.cancel(*it->second.discover_timer);
                it->second.discover_timer.reset();
            }
            it->second.amn_index = 0;
            send_ip_req(*list_subnet);
        }
    }

    void handle(const IpReq& req, const DeliveryMeta&) {
        if (!cfg_.cr_enabled || !cfg_.can_assist) return;
        trace("rx IP_REQ from=" + req.sender.to_string());
        if (cfg_.malicious == MaliciousKind::BadAmn) {
            fabricate_ip_resp(req.sender);
            return;
        }
        if (!current_ap_) return;
        const MacAddress rmn = req.sender;
        // Proxy acquisition: the R-MN's MAC goes into CHaddr and the
        // broadcast bit must be set, since the ack will not carry our MAC.
        bus_.dhcp_acquire(subnet_, rmn, /*broadcast=*/true,
                          [this, rmn](DhcpResult<DhcpGrant> r) {
                              if (!r.ok()) {
                                  trace(std::string("proxy DHCP failed: ") +
                                        dhcp_error_name(r.error));
                                  return;
                              }
                              IpResp resp;
                              resp.sender = cfg_.mac;
                              resp.rmn_mac = rmn;
                              resp.new_ip = (*r).ip;
                              resp.router_ip = (*r).router;
                              bus_.multicast(Message{resp}, 2);
                              trace("tx IP_RESP rmn=" + rmn.to_string() + " ip=" +
                                    (*r).ip.to_string());
                          });
    }

    void handle(const IpResp& resp, const DeliveryMeta&) {
        if (resp.rmn_mac != cfg_.mac) return;  // someone else's proxy result
        // Find the subnet we were asking this assistant for.
        for (auto& [subnet, prep] : preps_) {
            if (prep.stage != PrepStage::AwaitingIp) continue;
            const auto& list = amn_lists_[subnet];
            if (prep.amn_index >= list.size() || list[prep.amn_index].mac != resp.sender)
                continue;
            if (prep.failover_timer) {
                bus_.cancel(*prep.failover_timer);
                prep.failover_timer.reset();
            }
            const std::uint32_t mask = bus_.subnet_mask(subnet);
            const bool ip_ok = in_subnet(resp.new_ip, subnet, mask);
            const bool router_ok = in_subnet(resp.router_ip, subnet, mask);
            if (!ip_ok || !router_ok) {
                // Wrong IP for the claimed subnet: alert, stop choosing this
                // assistant, let the handoff fall back to legacy DHCP.
                emit_alert(resp.sender, "invalid_ip");
                amn_blacklist_.insert(resp.sender);
                prep.stage = PrepStage::Ready;
                trace("IP_RESP invalid, legacy DHCP fallback for " + subnet.to_string());
                return;
            }
            SubnetLease lease;
            lease.subnet = subnet;
            lease.router_ip = resp.router_ip;
            lease.leased_ip = resp.new_ip;
            lease.expiry = bus_.now() + ms_to_us(cfg_.lease_duration_ms);
            lease.acquired_via = resp.sender;
            leases_.put(lease);
            prep.stage = PrepStage::Ready;
            trace("lease stored subnet=" + lease.subnet.to_string() + " ip=" +
                  lease.leased_ip.to_string());
            if (top_target_ && cache_.find(*top_target_) &&
                cache_.find(*top_target_)->entry.subnet == subnet)
                arrange_relay_if_needed(*top_target_, subnet);
            return;
        }
    }

    void handle(const RelayReq& req, const DeliveryMeta& meta) {
        if (req.rn_mac != cfg_.mac) return;  // relaying is the named RN's job
        const auto admission = relay_table_.admit(req, bus_.now(), meta.sender_associated_bssid,
                                                  ledger_.is_malicious(req.sender));
        trace(std::string("RELAY_REQ from=") + req.sender.to_string() + " -> " +
              relay_admission_name(admission));
        if (admission == RelayAdmission::RefusedCooldown) {
            // Countermeasure: repeated RELAY_REQ without ever authenticating.
            bus_.security_log("relay_cooldown suspect=" + req.sender.to_string());
            emit_alert(req.sender, "relay_repeat");
        }
    }

    void handle(const InfoAlert& alert, const DeliveryMeta&) {
        const auto result = ledger_.record_alert(alert.suspect, alert.sender);
        if (result == SuspicionLedger::RecordResult::NewlyMarked)
            bus_.security_log("marked suspect=" + alert.suspect.to_string() + " reporters=" +
                              std::to_string(ledger_.distinct_reporters(alert.suspect)));
    }

    // --- INFOREQ / suppression ------------------------------------------------

    bool info_needed() const {
        if (!current_ap_) return false;
        auto cands = cache_.next_candidates(*current_ap_);
        if (cands.empty()) return true;
        for (const auto& c : cands)
            if (c.entry.subnet.is_unknown()) return true;
        return false;
    }

    void request_info() {
        if (pending_info_.active) return;
        pending_info_.active = true;
        pending_info_.ttl = 1;
        pending_info_.generation = ++info_generation_;
        send_info_req();
    }

    void send_info_req() {
        InfoReq req;
        req.sender = cfg_.mac;
        req.entries = strongest_entries();
        bus_.multicast(Message{req}, pending_info_.ttl);
        trace("tx INFOREQ ttl=" + std::to_string(pending_info_.ttl) + " n=" +
              std::to_string(req.entries.size()));
        const int gen = pending_info_.generation;
        pending_info_.timer =
            bus_.schedule(ms_to_us(cfg_.inforeq_retry_ms), [this, gen]() {
                if (!pending_info_.active || pending_info_.generation != gen) return;
                if (pending_info_.ttl >= cfg_.max_ttl) {
                    // Give up; the next handoff falls back to scanning.
                    pending_info_ = InfoRequestState{};
                    trace("INFOREQ gave up at ttl=" + std::to_string(cfg_.max_ttl));
                    return;
                }
                ++pending_info_.ttl;  // widen the multicast scope one hop
                send_info_req();
            });
    }

    std::vector<CacheEntry> strongest_entries() const {
        auto records = cache_.records();
        std::sort(records.begin(), records.end(), [](const CacheRecord& a, const CacheRecord& b) {
            if (a.signal_dbm != b.signal_dbm) return a.signal_dbm > b.signal_dbm;
            return a.entry.bssid < b.entry.bssid;
        });
        std::vector<CacheEntry> out;
        out.reserve(std::min(records.size(), kMaxEntries));
        for (const auto& r : records) {
            if (out.size() == kMaxEntries) break;
            out.push_back(r.entry);
        }
        return out;
    }

    void arm_suppression(const MacAddress& rmn, std::vector<CacheEntry> planned) {
        if (planned.empty()) return;
        auto existing = suppression_.find(rmn);
        if (existing != suppression_.end()) {
            bus_.cancel(existing->second.timer);
            suppression_.erase(existing);
        }
        const SimTime wait = ms_to_us(bus_.uniform(0.0, cfg_.suppression_window_ms));
        SuppressionState st;
        st.planned = std::move(planned);
        st.timer = bus_.schedule(wait, [this, rmn]() {
            auto it = suppression_.find(rmn);
            if (it == suppression_.end()) return;
            InfoResp resp;
            resp.sender = cfg_.mac;
            resp.target = rmn;
            resp.entries = it->second.planned;
            suppression_.erase(it);
            if (resp.entries.empty()) return;
            bus_.multicast(Message{resp}, 2);
            ++inforesp_sent_;
            trace("tx INFORESP target=" + rmn.to_string() + " n=" +
                  std::to_string(resp.entries.size()));
        });
        suppression_.emplace(rmn, std::move(st));
    }

    // Merge entries learned from `from`, keeping our own radio observations
    // when they contradict the claim (and alerting), and adopting the newer
    // value when we only held hearsay.
    void merge_verified(const std::vector<CacheEntry>& entries, const MacAddress& from,
                        bool alert_on_contradiction) {
        std::vector<CacheEntry> accepted;
        bool contradiction = false;
        for (const auto& e : entries) {
            if (verify_claim(cache_, e) == ClaimCheck::Contradicts) {
                const auto* mine = cache_.find(e.bssid);
                if (mine && !mine->learned_from) {
                    // We observed this AP ourselves; the claim is wrong.
                    contradiction = true;
                    continue;
                }
                // Hearsay vs hearsay: newest wins, nobody to accuse.
            }
            accepted.push_back(e);
        }
        cache_.merge(accepted, bus_.now(), from);
        if (contradiction && alert_on_contradiction) emit_alert(from, "wrong_info");
    }

    // --- pre-handoff preparation ----------------------------------------------

    void maybe_prepare() {
        if (!cfg_.cr_enabled || in_handoff_ || !current_ap_ || lying()) return;
        const auto* cur = cache_.find(*current_ap_);
        if (!cur || cur->signal_dbm > cfg_.signal_threshold_dbm) return;

        auto cands = cache_.next_candidates(*current_ap_);
        if (cands.empty() || cands.front().entry.subnet.is_unknown()) {
            if (!pending_info_.active) request_info();
            return;
        }
        top_target_ = cands.front().entry.bssid;

        // One lease per distinct candidate subnet other than our own.
        std::set<SubnetId> wanted;
        for (const auto& c : cands) {
            if (c.entry.subnet.is_unknown()) continue;
            if (c.entry.subnet == cur->entry.subnet) continue;
            wanted.insert(c.entry.subnet);
        }
        for (const auto& subnet : wanted) ensure_lease(subnet);

        // Relay is arranged toward the strongest candidate's AP only.
        const auto& top = cands.front().entry;
        if (!subnet_changed(cur->entry, top) ||
            leases_.find_valid(top.subnet, bus_.now()) != nullptr)
            arrange_relay_if_needed(top.bssid, top.subnet);
    }

    void ensure_lease(const SubnetId& subnet) {
        if (leases_.find_valid(subnet, bus_.now())) return;
        if (preps_.count(subnet)) return;  // already in progress (or settled)
        auto it = amn_lists_.find(subnet);
        if (it != amn_lists_.end() && !it->second.empty()) {
            auto& prep = preps_[subnet];
            prep.amn_index = 0;
            send_ip_req(subnet);
        } else {
            auto& prep = preps_[subnet];
            prep.stage = PrepStage::Discovering;
            prep.discover_ttl = 2;  // the candidate subnet is one hop out
            send_discover(subnet);
        }
    }

    void send_discover(const SubnetId& subnet) {
        auto& prep = preps_[subnet];
        AmnDiscover disc;
        disc.sender = cfg_.mac;
        disc.subnet = subnet;
        bus_.multicast(Message{disc}, prep.discover_ttl);
        trace("tx AMN_DISCOVER subnet=" + subnet.to_string() + " ttl=" +
              std::to_string(prep.discover_ttl));
        const int gen = prep.generation;
        prep.discover_timer = bus_.schedule(ms_to_us(cfg_.inforeq_retry_ms), [this, subnet, gen]() {
            auto it = preps_.find(subnet);
            if (it == preps_.end() || it->second.generation != gen ||
                it->second.stage != PrepStage::Discovering)
                return;
            if (it->second.discover_ttl >= cfg_.max_ttl) {
                it->second.stage = PrepStage::FailedNoAssistant;
                trace("AMN_DISCOVER exhausted for " + subnet.to_string());
                return;
            }
            ++it->second.discover_ttl;
            send_discover(subnet);
        });
    }

    void send_ip_req(const SubnetId& subnet) {
        auto& prep = preps_[subnet];
        const auto& list = amn_lists_[subnet];
        while (prep.amn_index < list.size() &&
               (amn_blacklist_.count(list[prep.amn_index].mac) ||
                ledger_.is_malicious(list[prep.amn_index].mac)))
            ++prep.amn_index;
        if (prep.amn_index >= list.size()) {
            prep.stage = PrepStage::FailedNoAssistant;
            trace("assistants exhausted for " + subnet.to_string());
            return;
        }
        prep.stage = PrepStage::AwaitingIp;
        IpReq req;
        req.sender = cfg_.mac;
        bus_.unicast(Message{req}, list[prep.amn_index].mac);
        trace("tx IP_REQ to=" + list[prep.amn_index].mac.to_string());
        const int gen = prep.generation;
        prep.failover_timer = bus_.schedule(ms_to_us(cfg_.amn_failover_ms), [this, subnet, gen]() {
            auto it = preps_.find(subnet);
            if (it == preps_.end() || it->second.generation != gen ||
                it->second.stage != PrepStage::AwaitingIp)
                return;
            // Unresponsive assistant: fail over to the next one.
            trace("IP_REQ timeout, trying next assistant");
            ++it->second.amn_index;
            send_ip_req(subnet);
        });
    }

    void arrange_relay_if_needed(const MacAddress& target_bssid, const SubnetId& target_subnet) {
        if (arranged_relay_ && arranged_relay_->target_bssid == target_bssid) return;
        const auto requires_auth = bus_.ap_requires_auth(target_bssid);
        if (!requires_auth || !*requires_auth || !cfg_.use_relay) return;
        if (target_subnet == subnet_) return;  // same AD, no re-authentication
        const auto& list = amn_lists_[target_subnet];
        const AmnCandidate* rn = nullptr;
        for (const auto& c : list) {
            if (!c.can_relay || c.bssid != target_bssid) continue;
            if (amn_blacklist_.count(c.mac) || ledger_.is_malicious(c.mac)) continue;
            rn = &c;
            break;
        }
        if (!rn) {
            trace("no relay candidate at " + target_bssid.to_string());
            return;
        }
        const auto* lease = leases_.find_valid(target_subnet, bus_.now());
        RelayReq req;
        req.sender = cfg_.mac;
        req.mn_ip = lease ? lease->leased_ip : ip_;
        req.cn_ip = cn_ip_;
        req.rn_mac = rn->mac;
        req.rn_ip = rn->ip;
        bus_.multicast(Message{req}, 2);
        arranged_relay_ = RelayArrangement{rn->mac, rn->ip, target_bssid, bus_.now()};
        trace("tx RELAY_REQ rn=" + rn->mac.to_string());
        if (!cn_cooperative_ && bus_.session_redirect) {
            // Media-server CN: fan the stream out to us and the RN until the
            // handoff settles.
            bus_.session_redirect(cn_ip_, {rn->mac}, /*keep_direct=*/true);
        }
    }

    void reset_prep() {
        for (auto& [subnet, prep] : preps_) {
            (void)subnet;
            if (prep.failover_timer) bus_.cancel(*prep.failover_timer);
            if (prep.discover_timer) bus_.cancel(*prep.discover_timer);
        }
        preps_.clear();
        if (pending_info_.timer) bus_.cancel(*pending_info_.timer);
        pending_info_ = InfoRequestState{};
        top_target_.reset();
    }

    // --- misbehavior ------------------------------------------------------------

    bool lying() const {
        return cfg_.malicious == MaliciousKind::FakeApLiar ||
               cfg_.malicious == MaliciousKind::DosRedirector;
    }

    void emit_alert(const MacAddress& suspect, const char* why) {
        if (suspect == cfg_.mac || suspect.is_zero()) return;
        InfoAlert alert;
        alert.sender = cfg_.mac;
        alert.suspect = suspect;
        bus_.multicast(Message{alert}, cfg_.alert_ttl);
        ++alerts_sent_;
        ledger_.record_alert(suspect, cfg_.mac);  // our own observation counts once
        bus_.security_log(std::string("alert suspect=") + suspect.to_string() + " why=" + why);
    }

    // Multicast an unsolicited INFORESP carrying a corrupted copy of a real
    // entry: a wrong subnet misdirects L3 preparation, a wrong channel
    // breaks the association itself.
    void lie(bool flip_subnet) {
        std::vector<CacheEntry> lies;
        for (const auto& rec : cache_.records()) {
            if (rec.entry.subnet.is_unknown()) continue;
            CacheEntry e = rec.entry;
            if (flip_subnet)
                e.subnet = SubnetId{Ipv4Address{e.subnet.network.value ^ 0x0000ff00u}};
            else
                e.channel = e.channel % kMaxChannel + 1;
            lies.push_back(e);
        }
        if (lies.empty()) return;
        InfoResp resp;
        resp.sender = cfg_.mac;
        resp.target = MacAddress{};  // nobody in particular; all MNs harvest it
        resp.entries = lies;
        bus_.multicast(Message{resp}, 2);
        trace("tx forged INFORESP n=" + std::to_string(lies.size()));
    }

    void abuse_relay() {
        if (!pick_abuse_subnet(false)) return;
        const AmnCandidate* rn = find_relay_candidate(*abuse_subnet_);
        if (!rn) {
            AmnDiscover disc;
            disc.sender = cfg_.mac;
            disc.subnet = *abuse_subnet_;
            bus_.multicast(Message{disc}, 2);
            return;
        }
        RelayReq req;
        req.sender = cfg_.mac;
        req.mn_ip = ip_;
        req.cn_ip = cn_ip_;
        req.rn_mac = rn->mac;
        req.rn_ip = rn->ip;
        bus_.multicast(Message{req}, 2);
        trace("tx RELAY_REQ (abuse) rn=" + rn->mac.to_string());
        if (bus_.adhoc_data) bus_.adhoc_data(rn->mac, 160);
    }

    void spoof_relay() {
        if (!cfg_.spoofing_enabled || cfg_.spoof_victim.is_zero()) return;
        if (!pick_abuse_subnet(true)) return;
        const AmnCandidate* rn = find_relay_candidate(*abuse_subnet_);
        if (!rn) {
            AmnDiscover disc;
            disc.sender = cfg_.mac;  // discovery itself needs no forged source
            disc.subnet = *abuse_subnet_;
            bus_.multicast(Message{disc}, 2);
            return;
        }
        RelayReq req;
        req.sender = cfg_.spoof_victim;  // forged source address
        req.mn_ip = ip_;
        req.cn_ip = cn_ip_;
        req.rn_mac = rn->mac;
        req.rn_ip = rn->ip;
        bus_.multicast(Message{req}, 2);
        trace("tx RELAY_REQ (spoofed as " + cfg_.spoof_victim.to_string() + ")");
    }

    bool pick_abuse_subnet(bool require_foreign) {
        if (abuse_subnet_) return true;
        for (const auto& rec : cache_.records()) {
            if (rec.entry.subnet.is_unknown() || rec.entry.subnet == subnet_) continue;
            abuse_subnet_ = rec.entry.subnet;
            return true;
        }
        if (require_foreign) return false;
        abuse_subnet_ = subnet_;
        return true;
    }

    const AmnCandidate* find_relay_candidate(const SubnetId& subnet) const {
        auto it = amn_lists_.find(subnet);
        if (it == amn_lists_.end()) return nullptr;
        for (const auto& c : it->second)
            if (c.can_relay) return &c;
        return nullptr;
    }

    void fabricate_ip_resp(const MacAddress& rmn) {
        IpResp resp;
        resp.sender = cfg_.mac;
        resp.rmn_mac = rmn;
        bad_amn_flip_ = !bad_amn_flip_;
        if (bad_amn_flip_) {
            // Address in a completely different network.
            resp.new_ip = Ipv4Address{0x01020304u + bad_amn_counter_};
            resp.router_ip = Ipv4Address{0x01020301u};
        } else {
            // Plausible-looking address inside our subnet that no server
            // ever leased; the victim only notices on arrival.
            resp.new_ip = Ipv4Address{subnet_.network.value | (200u + bad_amn_counter_)};
            resp.router_ip = router_;
        }
        ++bad_amn_counter_;
        bus_.multicast(Message{resp}, 2);
        trace("tx forged IP_RESP rmn=" + rmn.to_string() + " ip=" + resp.new_ip.to_string());
    }

    void trace(const std::string& line) {
        if (bus_.trace) bus_.trace(line);
    }

    NodeConfig cfg_;
    NodeBus bus_;

    ApCache cache_;
    LeaseStore leases_;
    SuspicionLedger ledger_;
    RelayTable relay_table_;

    std::optional<MacAddress> current_ap_;
    Ipv4Address ip_{};
    Ipv4Address router_{};
    SubnetId subnet_{};
    Ipv4Address cn_ip_{};
    bool cn_cooperative_ = true;
    bool in_handoff_ = false;

    std::map<SubnetId, std::vector<AmnCandidate>> amn_lists_;
    std::set<MacAddress> amn_blacklist_;
    std::optional<RelayArrangement> arranged_relay_;
    std::optional<MacAddress> top_target_;

    std::map<SubnetId, SubnetPrep> preps_;
    InfoRequestState pending_info_;
    int info_generation_ = 0;
    std::map<MacAddress, SuppressionState> suppression_;

    std::optional<SubnetId> abuse_subnet_;
    bool bad_amn_flip_ = false;
    std::uint32_t bad_amn_counter_ = 0;

    std::uint64_t inforesp_sent_ = 0;
    std::uint64_t inforesp_suppressed_ = 0;
    std::uint64_t alerts_sent_ = 0;
};

}  // namespace cr
