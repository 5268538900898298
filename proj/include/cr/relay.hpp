// Relay-during-authentication state kept by a relay node: registrations
// created from RELAY_REQ, forwarding checks, timeout and cooldown
// enforcement, and the per-registration audit counters.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cr/delay_model.hpp"
#include "cr/types.hpp"
#include "cr/wire.hpp"

namespace cr {

struct RelayRegistration {
    MacAddress mn_mac{};
    Ipv4Address mn_ip{};
    Ipv4Address cn_ip{};
    MacAddress rn_mac{};
    Ipv4Address rn_ip{};
    SimTime registered_at = 0;
    SimTime expires_at = 0;
    bool active = false;
    bool mn_authenticated = false;  // set when the MN finished 802.1x
    MacAddress registered_while_mn_at{};
    std::uint64_t frames_up = 0;
    std::uint64_t frames_down = 0;
};

enum class RelayAdmission { Accepted, RefusedUnassociated, RefusedMalicious, RefusedCooldown };

inline const char* relay_admission_name(RelayAdmission a) {
    switch (a) {
        case RelayAdmission::Accepted: return "accepted";
        case RelayAdmission::RefusedUnassociated: return "refused_unassociated";
        case RelayAdmission::RefusedMalicious: return "refused_malicious";
        case RelayAdmission::RefusedCooldown: return "refused_cooldown";
    }
    return "?";
}

enum class RelayDrop { Forwarded, Expired, Unregistered, WrongClass };

class RelayTable {
  public:
    explicit RelayTable(SimTime relay_timeout = 10'000'000, SimTime cooldown = 60'000'000)
        : relay_timeout_(relay_timeout), cooldown_(cooldown) {}

    SimTime relay_timeout() const { return relay_timeout_; }

    // Admission checks, in order: the request must name us, the MN must be
    // associated somewhere (countermeasure 2), it must not be marked
    // malicious, and a recent registration that never led to a completed
    // authentication blocks a new one (countermeasure 3).
    RelayAdmission admit(const RelayReq& req, SimTime now,
                         std::optional<MacAddress> mn_current_bssid, bool mn_marked_malicious) {
        if (!mn_current_bssid) return RelayAdmission::RefusedUnassociated;
        if (mn_marked_malicious) return RelayAdmission::RefusedMalicious;
        auto it = registrations_.find(req.sender);
        if (it != registrations_.end()) {
            const RelayRegistration& prev = it->second;
            const bool abusive_history = !prev.mn_authenticated;
            if (abusive_history && now < prev.registered_at + cooldown_)
                return RelayAdmission::RefusedCooldown;
        }
        RelayRegistration reg;
        reg.mn_mac = req.sender;
        reg.mn_ip = req.mn_ip;
        reg.cn_ip = req.cn_ip;
        reg.rn_mac = req.rn_mac;
        reg.rn_ip = req.rn_ip;
        reg.registered_at = now;
        reg.expires_at = now + relay_timeout_;
        reg.active = true;
        reg.registered_while_mn_at = *mn_current_bssid;
        registrations_[req.sender] = reg;
        return RelayAdmission::Accepted;
    }

    // May this MN's ad-hoc traffic be forwarded right now?
    RelayDrop check_uplink(const FrameHeader& hdr, const MacAddress& src, SimTime now) {
        if (classify_frame(hdr) != FrameClass::DirectAdHoc) return RelayDrop::WrongClass;
        return check(src, now, true);
    }

    RelayDrop check_downlink(Ipv4Address cn_ip, const MacAddress& mn_mac, SimTime now) {
        auto it = registrations_.find(mn_mac);
        if (it == registrations_.end() || it->second.cn_ip != cn_ip)
            return RelayDrop::Unregistered;
        return check(mn_mac, now, false);
    }

    RelayRegistration* find(const MacAddress& mn_mac) {
        auto it = registrations_.find(mn_mac);
        return it == registrations_.end() ? nullptr : &it->second;
    }

    const RelayRegistration* find(const MacAddress& mn_mac) const {
        auto it = registrations_.find(mn_mac);
        return it == registrations_.end() ? nullptr : &it->second;
    }

    void note_authenticated(const MacAddress& mn_mac) {
        if (auto* reg = find(mn_mac)) reg->mn_authenticated = true;
    }

    void deactivate(const MacAddress& mn_mac) {
        if (auto* reg = find(mn_mac)) reg->active = false;
    }

    std::vector<const RelayRegistration*> all() const {
        std::vector<const RelayRegistration*> out;
        out.reserve(registrations_.size());
        for (const auto& [mac, reg] : registrations_) {
            (void)mac;
            out.push_back(&reg);
        }
        return out;
    }

  private:
    RelayDrop check(const MacAddress& mn_mac, SimTime now, bool up) {
        auto it = registrations_.find(mn_mac);
        if (it == registrations_.end()) return RelayDrop::Unregistered;
        RelayRegistration& reg = it->second;
        if (!reg.active) return RelayDrop::Unregistered;
        if (now >= reg.expires_at) {
            reg.active = false;
            return RelayDrop::Expired;
        }
        if (up)
            ++reg.frames_up;
        else
            ++reg.frames_down;
        return RelayDrop::Forwarded;
    }

    SimTime relay_timeout_;
    SimTime cooldown_;
    std::map<MacAddress, RelayRegistration> registrations_;
};

// 802.1x session as seen by the AP/authenticator: while EAPOL is in
// progress only EAPOL-class traffic passes for that MN.
struct AuthSession {
    enum class Phase { Idle, EapolInProgress, Authenticated, Failed };

    MacAddress mn_mac{};
    Phase phase = Phase::Idle;
    AuthMechanism mechanism = AuthMechanism::None;
    SimTime started_at = 0;
    SimTime duration = 0;  // sampled when the session starts

    bool eapol_only(SimTime) const { return phase == Phase::EapolInProgress; }
};

}  // namespace cr
