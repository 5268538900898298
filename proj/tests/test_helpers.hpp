// Shared generators and small utilities for the test suites.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cr/rng.hpp"
#include "cr/types.hpp"
#include "cr/wire.hpp"

namespace crtest {

inline cr::MacAddress mac(std::uint64_t v) {
    cr::MacAddress m;
    for (int i = 5; i >= 0; --i) {
        m.octets[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v & 0xff);
        v >>= 8;
    }
    return m;
}

inline cr::Ipv4Address ip(const char* s) { return *cr::Ipv4Address::parse(s); }
inline cr::SubnetId subnet(const char* s) { return *cr::SubnetId::parse(s); }

inline cr::MacAddress random_mac(cr::Rng& rng) { return mac(rng.next_u64() & 0xffffffffffffull); }

inline cr::Ipv4Address random_ip(cr::Rng& rng) {
    return cr::Ipv4Address{static_cast<std::uint32_t>(rng.next_u64())};
}

inline cr::CacheEntry random_entry(cr::Rng& rng) {
    cr::CacheEntry e;
    e.bssid = random_mac(rng);
    e.channel = static_cast<std::uint32_t>(rng.uniform_int(cr::kMinChannel, cr::kMaxChannel));
    e.subnet = cr::SubnetId{cr::Ipv4Address{static_cast<std::uint32_t>(rng.next_u64()) & 0xffffff00u}};
    return e;
}

inline std::vector<cr::CacheEntry> random_entries(cr::Rng& rng, std::size_t max_n) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(max_n)));
    std::vector<cr::CacheEntry> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(random_entry(rng));
    return out;
}

inline cr::Message random_message(cr::Rng& rng) {
    switch (rng.uniform_int(0, 7)) {
        case 0: {
            cr::InfoReq m;
            m.sender = random_mac(rng);
            m.entries = random_entries(rng, 8);
            return m;
        }
        case 1: {
            cr::InfoResp m;
            m.sender = random_mac(rng);
            m.target = random_mac(rng);
            m.entries = random_entries(rng, 8);
            return m;
        }
        case 2: {
            cr::AmnDiscover m;
            m.sender = random_mac(rng);
            m.subnet = cr::SubnetId{random_ip(rng)};
            return m;
        }
        case 3: {
            cr::AmnResp m;
            m.sender = random_mac(rng);
            m.amn_ip = random_ip(rng);
            m.router_ip = random_ip(rng);
            m.can_relay = rng.uniform01() < 0.5;
            m.bssid = random_mac(rng);
            return m;
        }
        case 4: {
            cr::IpReq m;
            m.sender = random_mac(rng);
            return m;
        }
        case 5: {
            cr::IpResp m;
            m.sender = random_mac(rng);
            m.rmn_mac = random_mac(rng);
            m.new_ip = random_ip(rng);
            m.router_ip = random_ip(rng);
            return m;
        }
        case 6: {
            cr::RelayReq m;
            m.sender = random_mac(rng);
            m.mn_ip = random_ip(rng);
            m.cn_ip = random_ip(rng);
            m.rn_mac = random_mac(rng);
            m.rn_ip = random_ip(rng);
            return m;
        }
        default: {
            cr::InfoAlert m;
            m.sender = random_mac(rng);
            m.suspect = random_mac(rng);
            return m;
        }
    }
}

inline std::string to_hex(const std::vector<std::uint8_t>& bytes) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xf]);
    }
    return out;
}

inline std::vector<std::uint8_t> from_hex(const std::string& hex) {
    std::vector<std::uint8_t> out;
    out.reserve(hex.size() / 2);
    auto nibble = [](char c) -> std::uint8_t {
        if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
        return static_cast<std::uint8_t>(c - 'a' + 10);
    };
    for (std::size_t i = 0; i + 1 < hex.size(); i += 2)
        out.push_back(static_cast<std::uint8_t>((nibble(hex[i]) << 4) | nibble(hex[i + 1])));
    return out;
}

}  // namespace crtest
