// Wire codec for the eight cooperation messages plus 802.11 frame-header
// classification. Byte layout is fixed and documented in docs/wire-format.md;
// integers are big-endian, MAC addresses raw 6 bytes.
//
// Capacity rule: a cache entry serializes to exactly 14 bytes (6 BSSID +
// 4 channel + 4 subnet) and an entry-bearing message carries at most 105
// entries, the number of 14-byte triples that fit a 1500-byte MTU after the
// 28 bytes of IP/UDP overhead (1472 bytes of entry budget). The fixed
// framing fields (tag, sender, target, count; at most 15 bytes) ride above
// that budget.

#pragma once

#include <cstdint>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "cr/types.hpp"

namespace cr {

constexpr std::size_t kEntryBytes = 14;
constexpr std::size_t kMaxEntries = 105;        // floor((1500 - 28) / 14)
constexpr std::size_t kMaxEntryPayload = 1472;  // 1500-byte MTU minus IP+UDP
constexpr std::uint32_t kMinChannel = 1;
constexpr std::uint32_t kMaxChannel = 14;

class WireError : public std::runtime_error {
  public:
    enum class Kind { CapacityExceeded, InvalidField, Truncated, UnknownTag };

    WireError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

  private:
    Kind kind_;
};

// The {BSSID, channel, subnet ID} triple exchanged in INFOREQ/INFORESP.
struct CacheEntry {
    MacAddress bssid{};
    std::uint32_t channel = kMinChannel;
    SubnetId subnet{};

    constexpr bool operator==(const CacheEntry&) const = default;
};

struct InfoReq {
    MacAddress sender{};
    std::vector<CacheEntry> entries;
    bool operator==(const InfoReq&) const = default;
};

struct InfoResp {
    MacAddress sender{};
    MacAddress target{};  // the R-MN this response answers
    std::vector<CacheEntry> entries;
    bool operator==(const InfoResp&) const = default;
};

struct AmnDiscover {
    MacAddress sender{};
    SubnetId subnet{};
    bool operator==(const AmnDiscover&) const = default;
};

struct AmnResp {
    MacAddress sender{};  // the A-MN's MAC
    Ipv4Address amn_ip{};
    Ipv4Address router_ip{};
    bool can_relay = false;
    MacAddress bssid{};  // AP the A-MN is currently associated with
    bool operator==(const AmnResp&) const = default;
};

struct IpReq {
    MacAddress sender{};  // the requesting MN; also the CHaddr to proxy
    bool operator==(const IpReq&) const = default;
};

struct IpResp {
    MacAddress sender{};  // the A-MN that ran the exchange
    MacAddress rmn_mac{};
    Ipv4Address new_ip{};
    Ipv4Address router_ip{};
    bool operator==(const IpResp&) const = default;
};

struct RelayReq {
    MacAddress sender{};  // the MN about to authenticate
    Ipv4Address mn_ip{};  // address the MN will use after the handoff
    Ipv4Address cn_ip{};
    MacAddress rn_mac{};
    Ipv4Address rn_ip{};
    bool operator==(const RelayReq&) const = default;
};

struct InfoAlert {
    MacAddress sender{};  // reporter
    MacAddress suspect{};
    bool operator==(const InfoAlert&) const = default;
};

using Message = std::variant<InfoReq, InfoResp, AmnDiscover, AmnResp, IpReq, IpResp, RelayReq,
                             InfoAlert>;

enum class MessageTag : std::uint8_t {
    InfoReq = 0x01,
    InfoResp = 0x02,
    AmnDiscover = 0x03,
    AmnResp = 0x04,
    IpReq = 0x05,
    IpResp = 0x06,
    RelayReq = 0x07,
    InfoAlert = 0x08,
};

inline MacAddress message_sender(const Message& m) {
    return std::visit([](const auto& v) { return v.sender; }, m);
}

inline MessageTag message_tag(const Message& m) {
    struct V {
        MessageTag operator()(const InfoReq&) { return MessageTag::InfoReq; }
        MessageTag operator()(const InfoResp&) { return MessageTag::InfoResp; }
        MessageTag operator()(const AmnDiscover&) { return MessageTag::AmnDiscover; }
        MessageTag operator()(const AmnResp&) { return MessageTag::AmnResp; }
        MessageTag operator()(const IpReq&) { return MessageTag::IpReq; }
        MessageTag operator()(const IpResp&) { return MessageTag::IpResp; }
        MessageTag operator()(const RelayReq&) { return MessageTag::RelayReq; }
        MessageTag operator()(const InfoAlert&) { return MessageTag::InfoAlert; }
    };
    return std::visit(V{}, m);
}

inline const char* message_kind_name(const Message& m) {
    switch (message_tag(m)) {
        case MessageTag::InfoReq: return "INFOREQ";
        case MessageTag::InfoResp: return "INFORESP";
        case MessageTag::AmnDiscover: return "AMN_DISCOVER";
        case MessageTag::AmnResp: return "AMN_RESP";
        case MessageTag::IpReq: return "IP_REQ";
        case MessageTag::IpResp: return "IP_RESP";
        case MessageTag::RelayReq: return "RELAY_REQ";
        case MessageTag::InfoAlert: return "INFOALERT";
    }
    return "?";
}

namespace detail {

inline void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

inline void put_mac(std::vector<std::uint8_t>& out, const MacAddress& m) {
    out.insert(out.end(), m.octets.begin(), m.octets.end());
}

class Reader {
  public:
    Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }

    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>((data_[pos_] << 8) | data_[pos_ + 1]);
        pos_ += 2;
        return v;
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = (static_cast<std::uint32_t>(data_[pos_]) << 24) |
                          (static_cast<std::uint32_t>(data_[pos_ + 1]) << 16) |
                          (static_cast<std::uint32_t>(data_[pos_ + 2]) << 8) |
                          static_cast<std::uint32_t>(data_[pos_ + 3]);
        pos_ += 4;
        return v;
    }

    MacAddress mac() {
        need(6);
        MacAddress m;
        std::memcpy(m.octets.data(), data_ + pos_, 6);
        pos_ += 6;
        return m;
    }

    std::size_t remaining() const { return size_ - pos_; }

  private:
    void need(std::size_t n) const {
        if (size_ - pos_ < n) throw WireError(WireError::Kind::Truncated, "message truncated");
    }

    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

inline void check_channel(std::uint32_t channel) {
    if (channel < kMinChannel || channel > kMaxChannel)
        throw WireError(WireError::Kind::InvalidField,
                        "channel " + std::to_string(channel) + " outside band plan");
}

inline void put_entries(std::vector<std::uint8_t>& out, const std::vector<CacheEntry>& entries) {
    if (entries.size() > kMaxEntries)
        throw WireError(WireError::Kind::CapacityExceeded,
                        "entry count " + std::to_string(entries.size()) + " exceeds " +
                            std::to_string(kMaxEntries));
    put_u16(out, static_cast<std::uint16_t>(entries.size()));
    for (const auto& e : entries) {
        check_channel(e.channel);
        put_mac(out, e.bssid);
        put_u32(out, e.channel);
        put_u32(out, e.subnet.network.value);
    }
}

inline std::vector<CacheEntry> read_entries(Reader& r) {
    const std::uint16_t count = r.u16();
    if (count > kMaxEntries)
        throw WireError(WireError::Kind::CapacityExceeded,
                        "entry count " + std::to_string(count) + " exceeds " +
                            std::to_string(kMaxEntries));
    std::vector<CacheEntry> entries;
    entries.reserve(count);
    for (std::uint16_t i = 0; i < count; ++i) {
        CacheEntry e;
        e.bssid = r.mac();
        e.channel = r.u32();
        e.subnet = SubnetId{Ipv4Address{r.u32()}};
        check_channel(e.channel);
        entries.push_back(e);
    }
    return entries;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode(const Message& msg) {
    using namespace detail;
    std::vector<std::uint8_t> out;
    put_u8(out, static_cast<std::uint8_t>(message_tag(msg)));
    put_mac(out, message_sender(msg));

    struct V {
        std::vector<std::uint8_t>& out;
        void operator()(const InfoReq& m) { put_entries(out, m.entries); }
        void operator()(const InfoResp& m) {
            put_mac(out, m.target);
            put_entries(out, m.entries);
        }
        void operator()(const AmnDiscover& m) { put_u32(out, m.subnet.network.value); }
        void operator()(const AmnResp& m) {
            put_u32(out, m.amn_ip.value);
            put_u32(out, m.router_ip.value);
            put_u8(out, m.can_relay ? 1 : 0);
            put_mac(out, m.bssid);
        }
        void operator()(const IpReq&) {}
        void operator()(const IpResp& m) {
            put_mac(out, m.rmn_mac);
            put_u32(out, m.new_ip.value);
            put_u32(out, m.router_ip.value);
        }
        void operator()(const RelayReq& m) {
            put_u32(out, m.mn_ip.value);
            put_u32(out, m.cn_ip.value);
            put_mac(out, m.rn_mac);
            put_u32(out, m.rn_ip.value);
        }
        void operator()(const InfoAlert& m) { put_mac(out, m.suspect); }
    };
    std::visit(V{out}, msg);
    return out;
}

inline Message decode(const std::uint8_t* data, std::size_t size) {
    using namespace detail;
    Reader r(data, size);
    const std::uint8_t tag = r.u8();
    const MacAddress sender = r.mac();

    Message msg;
    switch (static_cast<MessageTag>(tag)) {
        case MessageTag::InfoReq: {
            InfoReq m;
            m.sender = sender;
            m.entries = read_entries(r);
            msg = m;
            break;
        }
        case MessageTag::InfoResp: {
            InfoResp m;
            m.sender = sender;
            m.target = r.mac();
            m.entries = read_entries(r);
            msg = m;
            break;
        }
        case MessageTag::AmnDiscover: {
            AmnDiscover m;
            m.sender = sender;
            m.subnet = SubnetId{Ipv4Address{r.u32()}};
            msg = m;
            break;
        }
        case MessageTag::AmnResp: {
            AmnResp m;
            m.sender = sender;
            m.amn_ip = Ipv4Address{r.u32()};
            m.router_ip = Ipv4Address{r.u32()};
            m.can_relay = r.u8() != 0;
            m.bssid = r.mac();
            msg = m;
            break;
        }
        case MessageTag::IpReq: {
            IpReq m;
            m.sender = sender;
            msg = m;
            break;
        }
        case MessageTag::IpResp: {
            IpResp m;
            m.sender = sender;
            m.rmn_mac = r.mac();
            m.new_ip = Ipv4Address{r.u32()};
            m.router_ip = Ipv4Address{r.u32()};
            msg = m;
            break;
        }
        case MessageTag::RelayReq: {
            RelayReq m;
            m.sender = sender;
            m.mn_ip = Ipv4Address{r.u32()};
            m.cn_ip = Ipv4Address{r.u32()};
            m.rn_mac = r.mac();
            m.rn_ip = Ipv4Address{r.u32()};
            msg = m;
            break;
        }
        case MessageTag::InfoAlert: {
            InfoAlert m;
            m.sender = sender;
            m.suspect = r.mac();
            msg = m;
            break;
        }
        default:
            throw WireError(WireError::Kind::UnknownTag,
                            "unknown message tag " + std::to_string(tag));
    }
    if (r.remaining() != 0)
        throw WireError(WireError::Kind::InvalidField, "trailing bytes after message body");
    return msg;
}

inline Message decode(const std::vector<std::uint8_t>& bytes) {
    return decode(bytes.data(), bytes.size());
}

// --- 802.11 frame header (ToDS/FromDS and the four address fields) -------

enum class FrameClass { DirectAdHoc, FromAp, ToAp, ApToAp };

inline const char* frame_class_name(FrameClass c) {
    switch (c) {
        case FrameClass::DirectAdHoc: return "DirectAdHoc";
        case FrameClass::FromAp: return "FromAp";
        case FrameClass::ToAp: return "ToAp";
        case FrameClass::ApToAp: return "ApToAp";
    }
    return "?";
}

struct FrameHeader {
    bool to_ds = false;
    bool from_ds = false;
    MacAddress addr1{};
    MacAddress addr2{};
    MacAddress addr3{};
    std::optional<MacAddress> addr4;

    bool valid() const { return addr4.has_value() == (to_ds && from_ds); }

    // Address-field roles per ToDS/FromDS combination:
    //   0 0  ->  addr1=DA, addr2=SA,    addr3=BSSID
    //   0 1  ->  addr1=DA, addr2=BSSID, addr3=SA
    //   1 0  ->  addr1=BSSID, addr2=SA, addr3=DA
    //   1 1  ->  addr1=RA, addr2=TA, addr3=DA, addr4=SA
    MacAddress destination() const {
        if (!to_ds) return addr1;
        return addr3;
    }

    MacAddress source() const {
        if (to_ds && from_ds) return *addr4;
        if (!to_ds && from_ds) return addr3;
        return addr2;
    }

    MacAddress bssid() const {
        if (!to_ds && !from_ds) return addr3;
        if (!to_ds && from_ds) return addr2;
        return addr1;  // ToAp; meaningless for ApToAp
    }

    static FrameHeader adhoc(MacAddress dest, MacAddress src, MacAddress ibss) {
        return FrameHeader{false, false, dest, src, ibss, std::nullopt};
    }

    static FrameHeader to_ap(MacAddress bssid, MacAddress src, MacAddress dest) {
        return FrameHeader{true, false, bssid, src, dest, std::nullopt};
    }

    static FrameHeader from_ap(MacAddress dest, MacAddress bssid, MacAddress src) {
        return FrameHeader{false, true, dest, bssid, src, std::nullopt};
    }

    static FrameHeader ap_to_ap(MacAddress ra, MacAddress ta, MacAddress dest, MacAddress src) {
        return FrameHeader{true, true, ra, ta, dest, src};
    }
};

inline FrameClass classify_frame(const FrameHeader& hdr) {
    if (hdr.to_ds && hdr.from_ds) return FrameClass::ApToAp;
    if (hdr.to_ds) return FrameClass::ToAp;
    if (hdr.from_ds) return FrameClass::FromAp;
    return FrameClass::DirectAdHoc;
}

}  // namespace cr
