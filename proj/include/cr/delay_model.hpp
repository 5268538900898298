// Named latency components of the simulation. Each component is a
// distribution over milliseconds; defaults come from published handoff
// measurements (full scan 343 ms, selective scan 128.9 ms, cache-based
// handoff 3.0 ms, DHCP exchange 867 ms) and every one of them can be
// overridden from the scenario file.

#pragma once

#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cr/rng.hpp"
#include "cr/types.hpp"

namespace cr {

enum class AuthMechanism { None, EapTls1024, EapTls2048, PeapMschapv2 };

inline const char* auth_mechanism_name(AuthMechanism m) {
    switch (m) {
        case AuthMechanism::None: return "open";
        case AuthMechanism::EapTls1024: return "eap_tls_1024";
        case AuthMechanism::EapTls2048: return "eap_tls_2048";
        case AuthMechanism::PeapMschapv2: return "peap_mschapv2";
    }
    return "?";
}

inline AuthMechanism parse_auth_mechanism(const std::string& s) {
    if (s == "open" || s == "none") return AuthMechanism::None;
    if (s == "eap_tls_1024") return AuthMechanism::EapTls1024;
    if (s == "eap_tls_2048") return AuthMechanism::EapTls2048;
    if (s == "peap_mschapv2" || s == "peap") return AuthMechanism::PeapMschapv2;
    throw std::runtime_error("unknown auth mechanism '" + s + "'");
}

// A delay distribution. "samples" mode replays a fixed list cyclically,
// which lets a scenario reuse measured per-run values verbatim instead of
// assuming a distribution family.
struct DelayDist {
    enum class Kind { Constant, TruncNormal, LogNormal, Samples };

    Kind kind = Kind::TruncNormal;
    double mean_ms = 0.0;
    double cv = 0.25;
    std::vector<double> samples_ms;

    static DelayDist constant(double ms) { return {Kind::Constant, ms, 0.0, {}}; }
    static DelayDist trunc_normal(double mean, double cv = 0.25) {
        return {Kind::TruncNormal, mean, cv, {}};
    }
    static DelayDist log_normal(double mean, double cv = 0.25) {
        return {Kind::LogNormal, mean, cv, {}};
    }
    static DelayDist replay(std::vector<double> samples) {
        DelayDist d{Kind::Samples, 0.0, 0.0, std::move(samples)};
        return d;
    }

    double sample_ms(Rng& rng, std::size_t& cursor) const {
        switch (kind) {
            case Kind::Constant: return mean_ms;
            case Kind::TruncNormal: return rng.truncated_normal(mean_ms, mean_ms * cv);
            case Kind::LogNormal: return rng.lognormal_mean_cv(mean_ms, cv);
            case Kind::Samples: {
                if (samples_ms.empty()) return 0.0;
                double v = samples_ms[cursor % samples_ms.size()];
                ++cursor;
                return v;
            }
        }
        return mean_ms;
    }

    // Accepted spec strings:
    //   "343"                   constant
    //   "normal:343"            truncated normal, default cv
    //   "normal:343:0.25"       truncated normal, explicit cv
    //   "lognormal:867:0.25"
    //   "samples:457.8,236.8,..." cyclic replay
    static DelayDist parse(const std::string& spec) {
        auto fail = [&]() -> DelayDist {
            throw std::runtime_error("bad delay spec '" + spec + "'");
        };
        auto colon = spec.find(':');
        if (colon == std::string::npos) {
            try {
                return constant(std::stod(spec));
            } catch (...) {
                return fail();
            }
        }
        const std::string head = spec.substr(0, colon);
        const std::string rest = spec.substr(colon + 1);
        try {
            if (head == "normal" || head == "lognormal") {
                auto c2 = rest.find(':');
                double mean = std::stod(c2 == std::string::npos ? rest : rest.substr(0, c2));
                double cv = c2 == std::string::npos ? 0.25 : std::stod(rest.substr(c2 + 1));
                return head == "normal" ? trunc_normal(mean, cv) : log_normal(mean, cv);
            }
            if (head == "const") return constant(std::stod(rest));
            if (head == "samples") {
                std::vector<double> vals;
                std::istringstream ss(rest);
                std::string tok;
                while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
                if (vals.empty()) return fail();
                return replay(std::move(vals));
            }
        } catch (...) {
            return fail();
        }
        return fail();
    }
};

struct DelayModel {
    // L2 components (Table-style means: original scan / selective scan /
    // cache-based handoff).
    DelayDist full_scan = DelayDist::trunc_normal(343.0);
    DelayDist selective_scan = DelayDist::trunc_normal(128.9);
    DelayDist open_auth_assoc = DelayDist::trunc_normal(3.0);

    // Serial 802.1x authentication per mechanism.
    std::map<AuthMechanism, DelayDist> auth_mechanism = {
        {AuthMechanism::EapTls1024, DelayDist::trunc_normal(1559.0)},
        {AuthMechanism::EapTls2048, DelayDist::trunc_normal(1648.0)},
        {AuthMechanism::PeapMschapv2, DelayDist::trunc_normal(1510.0)},
    };

    // L3 components.
    DelayDist dhcp_exchange = DelayDist::log_normal(867.0);
    DelayDist l3_signaling = DelayDist::trunc_normal(6.84);
    DelayDist l3_polling = DelayDist::trunc_normal(4.56);

    // Fixed components (milliseconds).
    double bridging_ms = 10.0;       // switch port-learning delay, no relay
    double first_packet_ms = 2.0;    // first relayed uplink queued behind auth frames
    double assoc_fail_ms = 250.0;    // timeout when associating to a bogus AP
    double auth_cert_fraction = 0.8; // certificate exchange share of auth time

    double sample_full_scan(Rng& rng) { return full_scan.sample_ms(rng, cur_full_); }
    double sample_selective_scan(Rng& rng) { return selective_scan.sample_ms(rng, cur_sel_); }
    double sample_open_auth_assoc(Rng& rng) { return open_auth_assoc.sample_ms(rng, cur_auth_); }
    double sample_dhcp(Rng& rng) { return dhcp_exchange.sample_ms(rng, cur_dhcp_); }
    double sample_l3_signaling(Rng& rng) { return l3_signaling.sample_ms(rng, cur_sig_); }
    double sample_l3_polling(Rng& rng) { return l3_polling.sample_ms(rng, cur_poll_); }

    double sample_auth(Rng& rng, AuthMechanism mech) {
        auto it = auth_mechanism.find(mech);
        if (it == auth_mechanism.end()) return 0.0;
        return it->second.sample_ms(rng, cur_mech_[mech]);
    }

    void set_component(const std::string& name, const DelayDist& dist) {
        if (name == "full_scan")
            full_scan = dist;
        else if (name == "selective_scan")
            selective_scan = dist;
        else if (name == "open_auth_assoc")
            open_auth_assoc = dist;
        else if (name == "dhcp_exchange")
            dhcp_exchange = dist;
        else if (name == "l3_signaling")
            l3_signaling = dist;
        else if (name == "l3_polling")
            l3_polling = dist;
        else if (name == "auth_eap_tls_1024")
            auth_mechanism[AuthMechanism::EapTls1024] = dist;
        else if (name == "auth_eap_tls_2048")
            auth_mechanism[AuthMechanism::EapTls2048] = dist;
        else if (name == "auth_peap_mschapv2")
            auth_mechanism[AuthMechanism::PeapMschapv2] = dist;
        else
            throw std::runtime_error("unknown delay component '" + name + "'");
    }

  private:
    std::size_t cur_full_ = 0, cur_sel_ = 0, cur_auth_ = 0, cur_dhcp_ = 0, cur_sig_ = 0,
                cur_poll_ = 0;
    std::map<AuthMechanism, std::size_t> cur_mech_;
};

}  // namespace cr
