// Basic identifiers shared by every layer: MAC addresses, IPv4 addresses,
// subnet identifiers and simulation time (integer microseconds).

#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cr {

// Simulation clock. Integer microseconds so that logs and CSV output are
// exactly reproducible across runs and platforms.
using SimTime = std::int64_t;

constexpr SimTime kMicrosPerMilli = 1000;

inline SimTime ms_to_us(double ms) {
    return static_cast<SimTime>(ms * 1000.0 + 0.5);
}

inline double us_to_ms(SimTime us) {
    return static_cast<double>(us) / 1000.0;
}

// Fixed-width time stamp for trace lines, e.g. "000001234567".
inline std::string format_us(SimTime us) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%012lld", static_cast<long long>(us));
    return buf;
}

// Milliseconds with microsecond resolution, e.g. "4.237".
inline std::string format_ms(SimTime us) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%lld.%03lld", static_cast<long long>(us / 1000),
                  static_cast<long long>(us % 1000 < 0 ? -(us % 1000) : us % 1000));
    return buf;
}

struct MacAddress {
    std::array<std::uint8_t, 6> octets{};

    constexpr bool operator==(const MacAddress&) const = default;
    constexpr auto operator<=>(const MacAddress&) const = default;

    bool is_zero() const {
        for (auto b : octets)
            if (b != 0) return false;
        return true;
    }

    // Group bit of the first octet; legal only in destination context.
    bool is_multicast() const { return (octets[0] & 0x01) != 0; }

    std::string to_string() const {
        char buf[18];
        std::snprintf(buf, sizeof(buf), "%02x:%02x:%02x:%02x:%02x:%02x", octets[0], octets[1],
                      octets[2], octets[3], octets[4], octets[5]);
        return buf;
    }

    static std::optional<MacAddress> parse(std::string_view s) {
        MacAddress m;
        unsigned v[6];
        if (s.size() != 17) return std::nullopt;
        if (std::sscanf(std::string(s).c_str(), "%x:%x:%x:%x:%x:%x", &v[0], &v[1], &v[2], &v[3],
                        &v[4], &v[5]) != 6)
            return std::nullopt;
        for (int i = 0; i < 6; ++i) {
            if (v[i] > 0xff) return std::nullopt;
            m.octets[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v[i]);
        }
        return m;
    }
};

struct Ipv4Address {
    std::uint32_t value = 0;  // host byte order

    constexpr bool operator==(const Ipv4Address&) const = default;
    constexpr auto operator<=>(const Ipv4Address&) const = default;

    bool is_zero() const { return value == 0; }

    std::string to_string() const {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%u.%u.%u.%u", (value >> 24) & 0xff, (value >> 16) & 0xff,
                      (value >> 8) & 0xff, value & 0xff);
        return buf;
    }

    static std::optional<Ipv4Address> parse(std::string_view s) {
        unsigned a, b, c, d;
        char tail;
        if (std::sscanf(std::string(s).c_str(), "%u.%u.%u.%u%c", &a, &b, &c, &d, &tail) != 4)
            return std::nullopt;
        if (a > 255 || b > 255 || c > 255 || d > 255) return std::nullopt;
        return Ipv4Address{(a << 24) | (b << 16) | (c << 8) | d};
    }
};

// A subnet is identified by its network address (paper-style subnet ID).
// The mask lives in the topology, not in the identifier.
struct SubnetId {
    Ipv4Address network{};

    constexpr bool operator==(const SubnetId&) const = default;
    constexpr auto operator<=>(const SubnetId&) const = default;

    bool is_unknown() const { return network.is_zero(); }
    std::string to_string() const { return network.to_string(); }

    static SubnetId unknown() { return SubnetId{}; }

    static std::optional<SubnetId> parse(std::string_view s) {
        auto ip = Ipv4Address::parse(s);
        if (!ip) return std::nullopt;
        return SubnetId{*ip};
    }
};

inline bool in_subnet(Ipv4Address ip, SubnetId subnet, std::uint32_t mask) {
    return (ip.value & mask) == subnet.network.value;
}

inline std::uint32_t prefix_to_mask(int prefix_len) {
    if (prefix_len <= 0) return 0;
    if (prefix_len >= 32) return 0xffffffffu;
    return ~((1u << (32 - prefix_len)) - 1u);
}

}  // namespace cr
