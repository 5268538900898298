// Misbehavior detection: claim verification against the local cache and the
// distinct-reporter quorum that marks nodes malicious. Ledgers are local to
// each node; nothing here is shared state.

#pragma once

#include <map>
#include <set>

#include "cr/cache.hpp"
#include "cr/types.hpp"
#include "cr/wire.hpp"

namespace cr {

enum class ClaimCheck { Consistent, Contradicts, Unknown };

// Contradicts iff we hold the same BSSID with a different channel or subnet;
// Unknown when we cannot verify at all.
inline ClaimCheck verify_claim(const ApCache& mine, const CacheEntry& claimed) {
    const auto* rec = mine.find(claimed.bssid);
    if (!rec) return ClaimCheck::Unknown;
    return rec->entry == claimed ? ClaimCheck::Consistent : ClaimCheck::Contradicts;
}

class SuspicionLedger {
  public:
    enum class RecordResult { Recorded, AlreadyRecorded, NewlyMarked, AlreadyMarked, SelfReport };

    static constexpr int kDefaultThreshold = 5;
    static constexpr int kMinThreshold = 2;  // one accuser is never enough

    explicit SuspicionLedger(int threshold = kDefaultThreshold)
        : threshold_(threshold < kMinThreshold ? kMinThreshold : threshold) {}

    int threshold() const { return threshold_; }

    // Count the reporter once per suspect; mark when distinct reporters
    // reach the threshold. Marks are permanent for the run.
    RecordResult record_alert(const MacAddress& suspect, const MacAddress& reporter) {
        if (suspect == reporter) return RecordResult::SelfReport;
        if (marked_.count(suspect)) {
            reporters_[suspect].insert(reporter);
            return RecordResult::AlreadyMarked;
        }
        auto [it, inserted] = reporters_[suspect].insert(reporter);
        (void)it;
        if (!inserted) return RecordResult::AlreadyRecorded;
        if (static_cast<int>(reporters_[suspect].size()) >= threshold_) {
            marked_.insert(suspect);
            return RecordResult::NewlyMarked;
        }
        return RecordResult::Recorded;
    }

    bool is_malicious(const MacAddress& mac) const { return marked_.count(mac) != 0; }

    int distinct_reporters(const MacAddress& suspect) const {
        auto it = reporters_.find(suspect);
        return it == reporters_.end() ? 0 : static_cast<int>(it->second.size());
    }

    std::size_t marked_count() const { return marked_.size(); }

  private:
    int threshold_;
    std::map<MacAddress, std::set<MacAddress>> reporters_;
    std::set<MacAddress> marked_;
};

}  // namespace cr
