// Scripted malicious-node profiles. Each profile is an ordinary node in the
// event loop whose periodic action injects forged traffic; what each kind
// forges is implemented in the node's act_malicious().

#pragma once

#include <stdexcept>
#include <string>

namespace cr {

enum class MaliciousKind {
    None,
    FakeApLiar,     // advertises wrong subnet IDs for real APs
    DosRedirector,  // advertises wrong channels so associations fail
    BadAmn,         // answers IP_REQ with invalid addresses
    RelayAbuser,    // repeats RELAY_REQ and never authenticates
    Spoofer,        // forges another MN's MAC; inert unless the scenario
                    // enables open-network spoofing
};

inline const char* malicious_kind_name(MaliciousKind k) {
    switch (k) {
        case MaliciousKind::None: return "none";
        case MaliciousKind::FakeApLiar: return "fake_ap";
        case MaliciousKind::DosRedirector: return "dos_redirect";
        case MaliciousKind::BadAmn: return "bad_amn";
        case MaliciousKind::RelayAbuser: return "relay_abuse";
        case MaliciousKind::Spoofer: return "spoofer";
    }
    return "?";
}

inline MaliciousKind parse_malicious_kind(const std::string& s) {
    if (s.empty() || s == "none") return MaliciousKind::None;
    if (s == "fake_ap") return MaliciousKind::FakeApLiar;
    if (s == "dos_redirect") return MaliciousKind::DosRedirector;
    if (s == "bad_amn") return MaliciousKind::BadAmn;
    if (s == "relay_abuse") return MaliciousKind::RelayAbuser;
    if (s == "spoofer") return MaliciousKind::Spoofer;
    throw std::runtime_error("unknown malicious profile '" + s + "'");
}

}  // namespace cr
