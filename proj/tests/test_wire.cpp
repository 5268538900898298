#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <map>

#include "cr/wire.hpp"
#include "test_helpers.hpp"

using namespace cr;
using crtest::from_hex;
using crtest::ip;
using crtest::mac;
using crtest::subnet;
using crtest::to_hex;

namespace {

std::map<std::string, std::string> load_golden() {
    std::ifstream f(std::string(TEST_DATA_DIR) + "/wire_golden.txt");
    REQUIRE(f.good());
    std::map<std::string, std::string> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto sp = line.find(' ');
        out[line.substr(0, sp)] = line.substr(sp + 1);
    }
    return out;
}

// The fixed instances the golden file encodes.
Message golden_message(const std::string& name) {
    const MacAddress sender1 = mac(0x020000000001);
    const MacAddress sender2 = mac(0x020000000002);
    const MacAddress sender3 = mac(0x020000000003);
    if (name == "inforeq") {
        InfoReq m;
        m.sender = sender1;
        m.entries = {CacheEntry{mac(0x0a1b2c3d4e5f), 6, subnet("160.39.5.0")}};
        return m;
    }
    if (name == "inforesp") {
        InfoResp m;
        m.sender = sender2;
        m.target = sender1;
        m.entries = {CacheEntry{mac(0x0b1b2c3d4e60), 11, subnet("160.39.10.0")}};
        return m;
    }
    if (name == "amn_discover") {
        AmnDiscover m;
        m.sender = sender3;
        m.subnet = subnet("160.39.10.0");
        return m;
    }
    if (name == "amn_resp") {
        AmnResp m;
        m.sender = sender3;
        m.amn_ip = ip("160.39.10.23");
        m.router_ip = ip("160.39.10.1");
        m.can_relay = true;
        m.bssid = mac(0x0b1b2c3d4e60);
        return m;
    }
    if (name == "ip_req") {
        IpReq m;
        m.sender = sender1;
        return m;
    }
    if (name == "ip_resp") {
        IpResp m;
        m.sender = sender3;
        m.rmn_mac = sender1;
        m.new_ip = ip("10.0.2.17");
        m.router_ip = ip("10.0.2.1");
        return m;
    }
    if (name == "relay_req") {
        RelayReq m;
        m.sender = sender1;
        m.mn_ip = ip("160.39.10.23");
        m.cn_ip = ip("128.59.16.5");
        m.rn_mac = mac(0x020000000004);
        m.rn_ip = ip("160.39.10.24");
        return m;
    }
    REQUIRE(name == "info_alert");
    InfoAlert m;
    m.sender = sender2;
    m.suspect = mac(0x020000000005);
    return m;
}

}  // namespace

TEST_CASE("golden vectors: encoding is bit-exact and decodes back") {
    auto golden = load_golden();
    REQUIRE(golden.size() == 8);
    for (const auto& [name, hex] : golden) {
        CAPTURE(name);
        const Message msg = golden_message(name);
        CHECK(to_hex(encode(msg)) == hex);
        CHECK(decode(from_hex(hex)) == msg);
    }
}

TEST_CASE("cache entry serializes to exactly 14 bytes") {
    // 6-byte BSSID + 4-byte channel + 4-byte subnet ID.
    for (std::size_t n : {0u, 1u, 2u, 50u, 105u}) {
        InfoReq m;
        m.sender = mac(1);
        for (std::size_t i = 0; i < n; ++i)
            m.entries.push_back(CacheEntry{mac(0x100 + i), 6, subnet("10.0.1.0")});
        const auto bytes = encode(m);
        CHECK(bytes.size() == 9 + kEntryBytes * n);  // tag + sender + count, then entries
        CHECK(kEntryBytes * n <= kMaxEntryPayload);
    }
}

TEST_CASE("empty INFOREQ is header-only and round-trips") {
    InfoReq m;
    m.sender = mac(7);
    const auto bytes = encode(m);
    CHECK(bytes.size() == 9);
    const Message back = decode(bytes);
    CHECK(std::get<InfoReq>(back).entries.empty());
}

TEST_CASE("capacity bound is exactly 105 entries") {
    // Independent oracle: entries that fit an MTU-sized datagram after
    // IP/UDP overhead.
    const std::size_t oracle = (1500 - 28) / 14;
    CHECK(oracle == kMaxEntries);
    CHECK(oracle == 105);

    auto entries_of = [](std::size_t n) {
        std::vector<CacheEntry> v;
        for (std::size_t i = 0; i < n; ++i)
            v.push_back(CacheEntry{mac(0x1000 + i), 6, subnet("10.0.1.0")});
        return v;
    };

    InfoReq at_cap;
    at_cap.sender = mac(1);
    at_cap.entries = entries_of(105);
    const auto bytes = encode(at_cap);  // must not throw
    const auto back = std::get<InfoReq>(decode(bytes));
    REQUIRE(back.entries.size() == 105);
    for (std::size_t i = 0; i < 105; ++i) CHECK(back.entries[i] == at_cap.entries[i]);

    InfoReq over;
    over.sender = mac(1);
    over.entries = entries_of(106);
    CHECK_THROWS_AS(encode(Message{over}), WireError);
    try {
        encode(Message{over});
    } catch (const WireError& e) {
        CHECK(e.kind() == WireError::Kind::CapacityExceeded);
    }

    // A forged count beyond the capacity is rejected on decode too.
    auto forged = bytes;
    forged[7] = 0x00;
    forged[8] = 0x6a;  // count = 106
    CHECK_THROWS_AS(decode(forged), WireError);
}

TEST_CASE("105-entry INFORESP decodes entry-by-entry") {
    InfoResp m;
    m.sender = mac(2);
    m.target = mac(3);
    for (std::size_t i = 0; i < 105; ++i)
        m.entries.push_back(
            CacheEntry{mac(0x2000 + i), static_cast<std::uint32_t>(1 + i % 14),
                       SubnetId{Ipv4Address{0x0a000000u + (static_cast<std::uint32_t>(i) << 8)}}});
    const auto back = std::get<InfoResp>(decode(encode(Message{m})));
    REQUIRE(back.entries.size() == 105);
    for (std::size_t i = 0; i < 105; ++i) CHECK(back.entries[i] == m.entries[i]);
}

TEST_CASE("decode errors: truncation, unknown tag, trailing bytes") {
    InfoReq m;
    m.sender = mac(9);
    m.entries = {CacheEntry{mac(0xa), 6, subnet("10.0.1.0")},
                 CacheEntry{mac(0xb), 11, subnet("10.0.2.0")}};
    auto bytes = encode(Message{m});

    SUBCASE("cut mid-entry") {
        for (std::size_t cut : {std::size_t{1}, std::size_t{5}, std::size_t{8}, std::size_t{10},
                                bytes.size() - 1}) {
            std::vector<std::uint8_t> prefix(bytes.begin(),
                                             bytes.begin() + static_cast<long>(cut));
            CHECK_THROWS_AS(decode(prefix), WireError);
            try {
                decode(prefix);
            } catch (const WireError& e) {
                CHECK(e.kind() == WireError::Kind::Truncated);
            }
        }
    }
    SUBCASE("unknown tag") {
        bytes[0] = 0x7f;
        try {
            decode(bytes);
            FAIL("expected WireError");
        } catch (const WireError& e) {
            CHECK(e.kind() == WireError::Kind::UnknownTag);
        }
    }
    SUBCASE("trailing garbage") {
        bytes.push_back(0x00);
        try {
            decode(bytes);
            FAIL("expected WireError");
        } catch (const WireError& e) {
            CHECK(e.kind() == WireError::Kind::InvalidField);
        }
    }
}

TEST_CASE("channel outside the band plan is rejected") {
    for (std::uint32_t ch : {0u, 15u, 100u}) {
        InfoReq m;
        m.sender = mac(1);
        m.entries = {CacheEntry{mac(2), ch, subnet("10.0.1.0")}};
        CHECK_THROWS_AS(encode(Message{m}), WireError);
    }
    // And on decode: patch a valid encoding's channel field.
    InfoReq m;
    m.sender = mac(1);
    m.entries = {CacheEntry{mac(2), 6, subnet("10.0.1.0")}};
    auto bytes = encode(Message{m});
    bytes[9 + 6 + 3] = 0;  // channel -> 0
    CHECK_THROWS_AS(decode(bytes), WireError);
}

TEST_CASE("round-trip identity over generated messages") {
    Rng rng(0xC0FFEE);
    for (int i = 0; i < 12000; ++i) {
        const Message m = crtest::random_message(rng);
        const auto bytes = encode(m);
        CHECK(decode(bytes) == m);
        // Every encoded message starts with its tag and sender.
        CHECK(bytes[0] == static_cast<std::uint8_t>(message_tag(m)));
        MacAddress s;
        std::copy(bytes.begin() + 1, bytes.begin() + 7, s.octets.begin());
        CHECK(s == message_sender(m));
    }
}

TEST_CASE("classify_frame covers Table-style address semantics exhaustively") {
    const MacAddress da = mac(0xd), sa = mac(0x5), bss = mac(0xb), ra = mac(0xa), ta = mac(0x7);

    SUBCASE("0,0 direct ad-hoc: addr1=DA addr2=SA addr3=BSSID") {
        FrameHeader h = FrameHeader::adhoc(da, sa, bss);
        CHECK(h.valid());
        CHECK(classify_frame(h) == FrameClass::DirectAdHoc);
        CHECK(h.destination() == da);
        CHECK(h.source() == sa);
        CHECK(h.bssid() == bss);
    }
    SUBCASE("0,1 from AP: addr1=DA addr2=BSSID addr3=SA") {
        FrameHeader h = FrameHeader::from_ap(da, bss, sa);
        CHECK(h.valid());
        CHECK(classify_frame(h) == FrameClass::FromAp);
        CHECK(h.destination() == da);
        CHECK(h.source() == sa);
        CHECK(h.bssid() == bss);
    }
    SUBCASE("1,0 to AP: addr1=BSSID addr2=SA addr3=DA") {
        FrameHeader h = FrameHeader::to_ap(bss, sa, da);
        CHECK(h.valid());
        CHECK(classify_frame(h) == FrameClass::ToAp);
        CHECK(h.destination() == da);
        CHECK(h.source() == sa);
        CHECK(h.bssid() == bss);
    }
    SUBCASE("1,1 AP to AP: addr1=RA addr2=TA addr3=DA addr4=SA") {
        FrameHeader h = FrameHeader::ap_to_ap(ra, ta, da, sa);
        CHECK(h.valid());
        CHECK(classify_frame(h) == FrameClass::ApToAp);
        CHECK(h.destination() == da);
        CHECK(h.source() == sa);
        CHECK(h.addr4.has_value());
    }
    SUBCASE("addr4 present exactly when to_ds and from_ds") {
        FrameHeader h = FrameHeader::adhoc(da, sa, bss);
        h.addr4 = ra;
        CHECK(!h.valid());
        FrameHeader j = FrameHeader::ap_to_ap(ra, ta, da, sa);
        j.addr4.reset();
        CHECK(!j.valid());
    }
    SUBCASE("total over all four bit combinations") {
        int seen[4] = {0, 0, 0, 0};
        for (bool to : {false, true})
            for (bool from : {false, true}) {
                FrameHeader h;
                h.to_ds = to;
                h.from_ds = from;
                if (to && from) h.addr4 = sa;
                ++seen[static_cast<int>(classify_frame(h))];
            }
        for (int c : seen) CHECK(c == 1);
    }
}
