// Per-node AP/subnet cache and the pre-acquired lease store. The cache holds
// one record per BSSID, annotated with the last observed signal strength;
// candidate order is strongest signal first. The merge/diff operations here
// drive the INFOREQ/INFORESP exchange.

#pragma once

#include <algorithm>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "cr/types.hpp"
#include "cr/wire.hpp"

namespace cr {

// Signal assigned to entries learned from other nodes rather than observed
// on the air; keeps hearsay below anything the radio actually measured.
constexpr double kHearsaySignalDbm = -100.0;

struct CacheRecord {
    CacheEntry entry{};
    double signal_dbm = kHearsaySignalDbm;
    SimTime last_updated = 0;
    std::optional<MacAddress> learned_from;  // set when the entry arrived via CR
};

struct CacheConflict {
    CacheEntry mine{};
    CacheEntry theirs{};
};

struct MergeResult {
    int added = 0;
    int replaced = 0;
    std::vector<CacheConflict> conflicts;
};

class MissingEntryError : public std::runtime_error {
  public:
    explicit MissingEntryError(const MacAddress& bssid)
        : std::runtime_error("no cache entry for " + bssid.to_string()) {}
};

inline bool subnet_changed(const CacheEntry& old_ap, const CacheEntry& new_ap) {
    return old_ap.subnet != new_ap.subnet;
}

class ApCache {
  public:
    bool contains(const MacAddress& bssid) const { return records_.count(bssid) != 0; }

    const CacheRecord* find(const MacAddress& bssid) const {
        auto it = records_.find(bssid);
        return it == records_.end() ? nullptr : &it->second;
    }

    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    // Insert or refresh a directly observed AP (own scan / own association).
    void observe(const CacheEntry& entry, double signal_dbm, SimTime now) {
        auto& rec = records_[entry.bssid];
        rec.entry = entry;
        rec.signal_dbm = signal_dbm;
        rec.last_updated = now;
        rec.learned_from.reset();
    }

    void update_signal(const MacAddress& bssid, double signal_dbm, SimTime now) {
        auto it = records_.find(bssid);
        if (it == records_.end()) return;
        it->second.signal_dbm = signal_dbm;
        it->second.last_updated = now;
    }

    void erase(const MacAddress& bssid) { records_.erase(bssid); }

    // True iff our cache can add something AND shares at least one AP with
    // the requester (same-location heuristic).
    bool should_respond(const std::vector<CacheEntry>& theirs) const {
        bool common = false;
        for (const auto& e : theirs)
            if (contains(e.bssid)) {
                common = true;
                break;
            }
        if (!common) return false;
        for (const auto& [bssid, rec] : records_) {
            (void)rec;
            bool present = false;
            for (const auto& e : theirs)
                if (e.bssid == bssid) {
                    present = true;
                    break;
                }
            if (!present) return true;
        }
        return false;
    }

    // Entries we hold and the requester lacks, strongest signal first,
    // truncated to the wire capacity.
    std::vector<CacheEntry> response_entries(const std::vector<CacheEntry>& theirs) const {
        std::vector<const CacheRecord*> missing;
        for (const auto& [bssid, rec] : records_) {
            bool present = false;
            for (const auto& e : theirs)
                if (e.bssid == bssid) {
                    present = true;
                    break;
                }
            if (!present) missing.push_back(&rec);
        }
        sort_by_signal(missing);
        if (missing.size() > kMaxEntries) missing.resize(kMaxEntries);
        std::vector<CacheEntry> out;
        out.reserve(missing.size());
        for (const auto* rec : missing) out.push_back(rec->entry);
        return out;
    }

    // Union keyed by BSSID; incoming wins on conflicting fields and every
    // conflict is reported so the caller can feed the security layer.
    MergeResult merge(const std::vector<CacheEntry>& incoming, SimTime now,
                      std::optional<MacAddress> from = std::nullopt) {
        MergeResult result;
        for (const auto& e : incoming) {
            auto it = records_.find(e.bssid);
            if (it == records_.end()) {
                CacheRecord rec;
                rec.entry = e;
                rec.signal_dbm = kHearsaySignalDbm;
                rec.last_updated = now;
                rec.learned_from = from;
                records_.emplace(e.bssid, rec);
                ++result.added;
            } else if (it->second.entry != e) {
                result.conflicts.push_back({it->second.entry, e});
                it->second.entry = e;  // newest wins
                it->second.last_updated = now;
                it->second.learned_from = from;
                ++result.replaced;
            } else {
                it->second.last_updated = now;
            }
        }
        return result;
    }

    // True iff moving old -> new crosses subnets; both APs must be known.
    bool subnet_changed_between(const MacAddress& old_bssid, const MacAddress& new_bssid) const {
        const auto* a = find(old_bssid);
        if (!a) throw MissingEntryError(old_bssid);
        const auto* b = find(new_bssid);
        if (!b) throw MissingEntryError(new_bssid);
        return subnet_changed(a->entry, b->entry);
    }

    // Every entry except the current AP, descending signal, BSSID tie-break.
    std::vector<CacheRecord> next_candidates(const MacAddress& current_bssid) const {
        std::vector<const CacheRecord*> out;
        for (const auto& [bssid, rec] : records_)
            if (bssid != current_bssid) out.push_back(&rec);
        sort_by_signal(out);
        std::vector<CacheRecord> result;
        result.reserve(out.size());
        for (const auto* rec : out) result.push_back(*rec);
        return result;
    }

    std::vector<CacheEntry> entries() const {
        std::vector<CacheEntry> out;
        out.reserve(records_.size());
        for (const auto& [bssid, rec] : records_) {
            (void)bssid;
            out.push_back(rec.entry);
        }
        return out;
    }

    std::vector<CacheRecord> records() const {
        std::vector<CacheRecord> out;
        out.reserve(records_.size());
        for (const auto& [bssid, rec] : records_) {
            (void)bssid;
            out.push_back(rec);
        }
        return out;
    }

    // Drop entries not refreshed within max_age (no-op when max_age <= 0,
    // the default policy).
    void expire(SimTime now, SimTime max_age) {
        if (max_age <= 0) return;
        for (auto it = records_.begin(); it != records_.end();) {
            if (now - it->second.last_updated > max_age)
                it = records_.erase(it);
            else
                ++it;
        }
    }

    // Snapshot format: one entry per line, "bssid channel subnet signal".
    void export_text(std::ostream& os) const {
        for (const auto& [bssid, rec] : records_) {
            (void)bssid;
            os << rec.entry.bssid.to_string() << ' ' << rec.entry.channel << ' '
               << rec.entry.subnet.to_string() << ' ' << rec.signal_dbm << '\n';
        }
    }

    static ApCache import_text(std::istream& is, SimTime now = 0) {
        ApCache cache;
        std::string line;
        int line_no = 0;
        while (std::getline(is, line)) {
            ++line_no;
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ls(line);
            std::string mac_s, subnet_s;
            std::uint32_t channel = 0;
            double signal = kHearsaySignalDbm;
            if (!(ls >> mac_s >> channel >> subnet_s >> signal))
                throw std::runtime_error("cache snapshot line " + std::to_string(line_no) +
                                         ": expected 'bssid channel subnet signal'");
            auto mac = MacAddress::parse(mac_s);
            auto subnet = SubnetId::parse(subnet_s);
            if (!mac || !subnet)
                throw std::runtime_error("cache snapshot line " + std::to_string(line_no) +
                                         ": bad address");
            cache.observe(CacheEntry{*mac, channel, *subnet}, signal, now);
        }
        return cache;
    }

  private:
    static void sort_by_signal(std::vector<const CacheRecord*>& v) {
        std::sort(v.begin(), v.end(), [](const CacheRecord* a, const CacheRecord* b) {
            if (a->signal_dbm != b->signal_dbm) return a->signal_dbm > b->signal_dbm;
            return a->entry.bssid < b->entry.bssid;
        });
    }

    std::map<MacAddress, CacheRecord> records_;
};

// --- L3 lease store -------------------------------------------------------

struct SubnetLease {
    SubnetId subnet{};
    Ipv4Address router_ip{};
    Ipv4Address leased_ip{};
    SimTime expiry = 0;
    MacAddress acquired_via{};  // the A-MN that ran the proxy exchange
};

// At most one lease per subnet; renewal replaces in place.
class LeaseStore {
  public:
    void put(const SubnetLease& lease) { leases_[lease.subnet] = lease; }

    const SubnetLease* find(const SubnetId& subnet) const {
        auto it = leases_.find(subnet);
        return it == leases_.end() ? nullptr : &it->second;
    }

    const SubnetLease* find_valid(const SubnetId& subnet, SimTime now) const {
        const auto* lease = find(subnet);
        if (!lease || lease->expiry <= now) return nullptr;
        return lease;
    }

    void erase(const SubnetId& subnet) { leases_.erase(subnet); }

    void expire(SimTime now) {
        for (auto it = leases_.begin(); it != leases_.end();) {
            if (it->second.expiry <= now)
                it = leases_.erase(it);
            else
                ++it;
        }
    }

    std::size_t size() const { return leases_.size(); }

    std::vector<SubnetLease> all() const {
        std::vector<SubnetLease> out;
        out.reserve(leases_.size());
        for (const auto& [subnet, lease] : leases_) {
            (void)subnet;
            out.push_back(lease);
        }
        return out;
    }

  private:
    std::map<SubnetId, SubnetLease> leases_;
};

}  // namespace cr
