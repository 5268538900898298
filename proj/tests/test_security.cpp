#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <vector>

#include "cr/security.hpp"
#include "test_helpers.hpp"

using namespace cr;
using crtest::mac;
using crtest::subnet;

TEST_CASE("verify_claim against the local cache") {
    ApCache mine;
    const CacheEntry a{mac(0xA), 6, subnet("10.0.1.0")};
    mine.observe(a, -50, 0);

    CHECK(verify_claim(mine, a) == ClaimCheck::Consistent);

    CacheEntry wrong_subnet = a;
    wrong_subnet.subnet = subnet("10.0.9.0");
    CHECK(verify_claim(mine, wrong_subnet) == ClaimCheck::Contradicts);

    CacheEntry wrong_channel = a;
    wrong_channel.channel = 11;
    CHECK(verify_claim(mine, wrong_channel) == ClaimCheck::Contradicts);

    CacheEntry unknown{mac(0xB), 6, subnet("10.0.1.0")};
    CHECK(verify_claim(mine, unknown) == ClaimCheck::Unknown);
}

TEST_CASE("worked example: five alerts from five distinct reporters mark the suspect") {
    SuspicionLedger ledger(5);
    const MacAddress suspect = mac(0xBAD);
    for (int i = 1; i <= 4; ++i) {
        auto r = ledger.record_alert(suspect, mac(0x100 + static_cast<std::uint64_t>(i)));
        CHECK(r != SuspicionLedger::RecordResult::NewlyMarked);
        CHECK_FALSE(ledger.is_malicious(suspect));
    }
    CHECK(ledger.record_alert(suspect, mac(0x105)) == SuspicionLedger::RecordResult::NewlyMarked);
    CHECK(ledger.is_malicious(suspect));
}

TEST_CASE("five alerts from one reporter never mark") {
    SuspicionLedger ledger(5);
    const MacAddress suspect = mac(0xBAD);
    for (int i = 0; i < 5; ++i) ledger.record_alert(suspect, mac(0x42));
    CHECK_FALSE(ledger.is_malicious(suspect));
    CHECK(ledger.distinct_reporters(suspect) == 1);
}

TEST_CASE("self-reports are rejected") {
    SuspicionLedger ledger(2);
    const MacAddress m = mac(0x9);
    CHECK(ledger.record_alert(m, m) == SuspicionLedger::RecordResult::SelfReport);
    CHECK(ledger.distinct_reporters(m) == 0);
}

TEST_CASE("threshold is clamped to at least two") {
    SuspicionLedger ledger(1);
    CHECK(ledger.threshold() == 2);
    const MacAddress suspect = mac(0xBAD);
    ledger.record_alert(suspect, mac(1));
    CHECK_FALSE(ledger.is_malicious(suspect));  // one accuser is never enough
    ledger.record_alert(suspect, mac(2));
    CHECK(ledger.is_malicious(suspect));
}

TEST_CASE("marking is permanent within a run") {
    SuspicionLedger ledger(2);
    const MacAddress suspect = mac(0xBAD);
    ledger.record_alert(suspect, mac(1));
    ledger.record_alert(suspect, mac(2));
    REQUIRE(ledger.is_malicious(suspect));
    ledger.record_alert(suspect, mac(3));
    CHECK(ledger.is_malicious(suspect));
}

// Exhaustive small-instance check against a brute-force oracle: every
// multiset of alerts over up to 7 reporters (multiplicity 0..2 each), every
// threshold in 2..6. The oracle counts distinct reporters directly.
TEST_CASE("quorum equals the distinct-reporter oracle on all small instances") {
    const MacAddress suspect = mac(0xBAD);
    std::vector<MacAddress> reporters;
    for (int i = 1; i <= 7; ++i) reporters.push_back(mac(0x200 + static_cast<std::uint64_t>(i)));

    for (int threshold = 2; threshold <= 6; ++threshold) {
        // counts[i] in {0,1,2}: how many times reporter i alerts.
        for (int code = 0; code < 2187; ++code) {  // 3^7 multisets
            int c = code;
            std::vector<int> counts(7);
            int distinct = 0;
            for (int i = 0; i < 7; ++i) {
                counts[static_cast<std::size_t>(i)] = c % 3;
                c /= 3;
                if (counts[static_cast<std::size_t>(i)] > 0) ++distinct;
            }
            SuspicionLedger ledger(threshold);
            for (int i = 0; i < 7; ++i)
                for (int k = 0; k < counts[static_cast<std::size_t>(i)]; ++k)
                    ledger.record_alert(suspect, reporters[static_cast<std::size_t>(i)]);

            const bool oracle_marked = distinct >= threshold;
            CHECK(ledger.is_malicious(suspect) == oracle_marked);
            CHECK(ledger.distinct_reporters(suspect) == distinct);
        }
    }
}

TEST_CASE("alert order does not matter, only distinctness does") {
    Rng rng(99);
    const MacAddress suspect = mac(0xBAD);
    for (int trial = 0; trial < 200; ++trial) {
        const int threshold = static_cast<int>(rng.uniform_int(2, 6));
        std::vector<MacAddress> alerts;
        const int n = static_cast<int>(rng.uniform_int(0, 12));
        std::set<MacAddress> distinct;
        for (int i = 0; i < n; ++i) {
            MacAddress r = mac(0x300 + static_cast<std::uint64_t>(rng.uniform_int(0, 5)));
            alerts.push_back(r);
            distinct.insert(r);
        }
        // Shuffle deterministically.
        for (std::size_t i = alerts.size(); i > 1; --i)
            std::swap(alerts[i - 1],
                      alerts[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
        SuspicionLedger ledger(threshold);
        for (const auto& r : alerts) ledger.record_alert(suspect, r);
        CHECK(ledger.is_malicious(suspect) ==
              (static_cast<int>(distinct.size()) >= threshold));
    }
}
