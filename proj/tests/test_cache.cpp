#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "cr/cache.hpp"
#include "test_helpers.hpp"

using namespace cr;
using crtest::ip;
using crtest::mac;
using crtest::random_entry;
using crtest::subnet;

namespace {

ApCache cache_of(std::initializer_list<std::pair<CacheEntry, double>> entries) {
    ApCache c;
    SimTime t = 0;
    for (const auto& [e, sig] : entries) c.observe(e, sig, ++t);
    return c;
}

const CacheEntry A{mac(0xA), 6, subnet("160.39.5.0")};
const CacheEntry B{mac(0xB), 11, subnet("160.39.10.0")};
const CacheEntry C{mac(0xC), 1, subnet("160.39.10.0")};

}  // namespace

TEST_CASE("should_respond needs a common AP and something to add") {
    ApCache mine = cache_of({{A, -50}, {B, -60}, {C, -70}});
    CHECK(mine.should_respond({A}));                   // common A, missing B and C
    CHECK_FALSE(cache_of({{A, -50}}).should_respond({A}));  // nothing to add
    CHECK_FALSE(cache_of({{B, -50}}).should_respond({A}));  // no common AP
    CHECK_FALSE(mine.should_respond({}));              // empty request shares nothing
}

TEST_CASE("should_respond is false whenever mine is a subset of theirs") {
    Rng rng(42);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<CacheEntry> universe;
        for (int i = 0; i < 8; ++i) universe.push_back(random_entry(rng));
        ApCache mine;
        std::vector<CacheEntry> theirs;
        for (const auto& e : universe) {
            const bool in_mine = rng.uniform01() < 0.5;
            if (in_mine) mine.observe(e, rng.uniform(-90, -40), 0);
            // theirs always includes everything mine has, plus extras
            if (in_mine || rng.uniform01() < 0.5) theirs.push_back(e);
        }
        CHECK_FALSE(mine.should_respond(theirs));
    }
}

TEST_CASE("response_entries is exactly mine minus theirs") {
    ApCache mine = cache_of({{A, -50}, {B, -40}, {C, -60}});
    auto out = mine.response_entries({A});
    REQUIRE(out.size() == 2);
    CHECK(out[0] == B);  // strongest first
    CHECK(out[1] == C);
}

TEST_CASE("response_entries never intersects theirs and truncates to the strongest 105") {
    Rng rng(7);
    ApCache mine;
    std::vector<std::pair<CacheEntry, double>> all;
    for (int i = 0; i < 220; ++i) {
        CacheEntry e = random_entry(rng);
        e.bssid = mac(0x5000 + static_cast<std::uint64_t>(i));
        const double sig = rng.uniform(-95.0, -30.0);
        mine.observe(e, sig, i);
        all.emplace_back(e, sig);
    }
    std::vector<CacheEntry> theirs;
    for (int i = 0; i < 20; ++i) theirs.push_back(all[static_cast<std::size_t>(i) * 11].first);

    const auto out = mine.response_entries(theirs);
    CHECK(out.size() == kMaxEntries);

    // No overlap with theirs on BSSID.
    for (const auto& e : out)
        for (const auto& t : theirs) CHECK(e.bssid != t.bssid);

    // Independent sort oracle over the generated records.
    std::vector<std::pair<CacheEntry, double>> missing;
    for (const auto& [e, sig] : all) {
        bool held = false;
        for (const auto& t : theirs) held |= t.bssid == e.bssid;
        if (!held) missing.emplace_back(e, sig);
    }
    std::sort(missing.begin(), missing.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first.bssid < b.first.bssid;
    });
    REQUIRE(missing.size() >= kMaxEntries);
    for (std::size_t i = 0; i < kMaxEntries; ++i) CHECK(out[i] == missing[i].first);
}

TEST_CASE("merge: disjoint union, incoming wins on conflict, conflict reported") {
    ApCache c = cache_of({{A, -50}});

    auto r1 = c.merge({B}, 10);
    CHECK(r1.added == 1);
    CHECK(r1.conflicts.empty());
    CHECK(c.size() == 2);

    // Same BSSID, different channel: incoming wins, conflict surfaces.
    CacheEntry a11 = A;
    a11.channel = 11;
    auto r2 = c.merge({a11}, 20);
    CHECK(r2.replaced == 1);
    REQUIRE(r2.conflicts.size() == 1);
    // Field-wise oracle on the reported conflict.
    CHECK(r2.conflicts[0].mine == A);
    CHECK(r2.conflicts[0].theirs == a11);
    CHECK(r2.conflicts[0].mine.bssid == r2.conflicts[0].theirs.bssid);
    CHECK(r2.conflicts[0].mine.channel != r2.conflicts[0].theirs.channel);
    CHECK(c.find(A.bssid)->entry == a11);

    auto r3 = ApCache{}.merge({}, 0);
    CHECK(r3.added == 0);
    CHECK(r3.conflicts.empty());
}

TEST_CASE("merge is idempotent") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        ApCache c;
        for (int i = 0; i < 5; ++i) c.observe(random_entry(rng), rng.uniform(-90, -40), 0);
        std::vector<CacheEntry> incoming;
        for (int i = 0; i < 5; ++i) incoming.push_back(random_entry(rng));

        c.merge(incoming, 1);
        auto snapshot = c.entries();
        c.merge(incoming, 2);
        CHECK(c.entries() == snapshot);
    }
}

TEST_CASE("subnet_changed compares subnet identifiers") {
    CHECK(subnet_changed(A, B));         // 160.39.5.0 vs 160.39.10.0
    CHECK_FALSE(subnet_changed(B, C));   // both 160.39.10.0
    ApCache c = cache_of({{A, -50}, {B, -60}});
    CHECK(c.subnet_changed_between(A.bssid, B.bssid));
    CHECK_THROWS_AS(c.subnet_changed_between(A.bssid, mac(0xdead)), MissingEntryError);
}

TEST_CASE("subnet_changed is symmetric in its truth value") {
    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
        const CacheEntry x = random_entry(rng);
        CacheEntry y = random_entry(rng);
        if (rng.uniform01() < 0.5) y.subnet = x.subnet;
        CHECK(subnet_changed(x, y) == subnet_changed(y, x));
    }
}

TEST_CASE("next_candidates orders by signal, tie-break by BSSID") {
    ApCache c = cache_of({{A, -50}, {B, -40}, {C, -60}});
    auto cands = c.next_candidates(A.bssid);
    REQUIRE(cands.size() == 2);
    CHECK(cands[0].entry == B);
    CHECK(cands[1].entry == C);

    // Single-entry cache: nothing to hand off to.
    CHECK(cache_of({{A, -50}}).next_candidates(A.bssid).empty());

    // Equal signals: ascending BSSID (independent comparator oracle).
    Rng rng(5);
    ApCache tie;
    std::vector<CacheEntry> entries;
    for (int i = 0; i < 10; ++i) {
        CacheEntry e = random_entry(rng);
        e.bssid = mac(0x9000 + static_cast<std::uint64_t>((i * 37) % 100));
        tie.observe(e, -55.0, i);
        entries.push_back(e);
    }
    auto out = tie.next_candidates(mac(0xFFFF));
    std::sort(entries.begin(), entries.end(),
              [](const CacheEntry& a, const CacheEntry& b) { return a.bssid < b.bssid; });
    REQUIRE(out.size() == entries.size());
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i].entry.bssid == entries[i].bssid);
}

TEST_CASE("cache snapshot export/import round-trips") {
    ApCache c = cache_of({{A, -50.5}, {B, -61}});
    std::ostringstream os;
    c.export_text(os);
    std::istringstream is(os.str());
    ApCache back = ApCache::import_text(is);
    CHECK(back.size() == 2);
    CHECK(back.find(A.bssid)->entry == A);
    CHECK(back.find(B.bssid)->entry == B);
    CHECK(back.find(A.bssid)->signal_dbm == doctest::Approx(-50.5));

    std::istringstream bad("zz:zz 6 10.0.1.0 -50\n");
    CHECK_THROWS(ApCache::import_text(bad));
}

TEST_CASE("expire honors max-age and the no-expiry default") {
    ApCache c = cache_of({{A, -50}});
    c.expire(1'000'000'000, 0);  // default: no expiry
    CHECK(c.size() == 1);
    c.expire(1'000'000'000, 1000);
    CHECK(c.size() == 0);
}

TEST_CASE("lease store holds one lease per subnet; renewal replaces in place") {
    LeaseStore store;
    SubnetLease l1{subnet("10.0.2.0"), ip("10.0.2.1"), ip("10.0.2.17"), 1000, mac(0x3)};
    store.put(l1);
    CHECK(store.size() == 1);

    // Renewal for the same subnet replaces rather than accumulating.
    SubnetLease l2 = l1;
    l2.leased_ip = ip("10.0.2.18");
    l2.expiry = 2000;
    store.put(l2);
    CHECK(store.size() == 1);
    CHECK(store.find(l1.subnet)->leased_ip == ip("10.0.2.18"));

    SubnetLease other{subnet("10.0.3.0"), ip("10.0.3.1"), ip("10.0.3.20"), 1500, mac(0x4)};
    store.put(other);
    CHECK(store.size() == 2);

    CHECK(store.find_valid(l1.subnet, 1999) != nullptr);
    CHECK(store.find_valid(l1.subnet, 2000) == nullptr);  // expired
    store.expire(2000);
    CHECK(store.size() == 0);
}
