// Discrete-event scheduler. Events fire in (time, insertion sequence) order,
// which makes runs with one seed byte-identical.

#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "cr/types.hpp"

namespace cr {

using EventId = std::uint64_t;

class Scheduler {
  public:
    EventId schedule(SimTime at, std::function<void()> fn) {
        if (at < now_) throw std::logic_error("event scheduled in the past");
        EventId id = next_id_++;
        queue_.push(Entry{at, id, std::move(fn)});
        return id;
    }

    EventId schedule_in(SimTime delay, std::function<void()> fn) {
        return schedule(now_ + delay, std::move(fn));
    }

    void cancel(EventId id) { cancelled_.insert(id); }

    SimTime now() const { return now_; }

    bool empty() const { return queue_.empty(); }
    std::size_t pending() const { return queue_.size() - cancelled_.size(); }

    // Runs a single event; returns false when the queue is drained.
    bool step() {
        while (!queue_.empty()) {
            Entry e = queue_.top();
            queue_.pop();
            if (cancelled_.erase(e.id)) continue;
            now_ = e.at;
            e.fn();
            return true;
        }
        return false;
    }

    void run_until(SimTime end) {
        while (!queue_.empty()) {
            const Entry& top = queue_.top();
            if (top.at > end) break;
            step();
        }
        if (now_ < end) now_ = end;
    }

    void run_all() {
        while (step()) {
        }
    }

  private:
    struct Entry {
        SimTime at;
        EventId id;
        std::function<void()> fn;
    };

    struct Later {
        bool operator()(const Entry& a, const Entry& b) const {
            if (a.at != b.at) return a.at > b.at;
            return a.id > b.id;
        }
    };

    SimTime now_ = 0;
    EventId next_id_ = 1;
    std::priority_queue<Entry, std::vector<Entry>, Later> queue_;
    std::unordered_set<EventId> cancelled_;
};

}  // namespace cr
