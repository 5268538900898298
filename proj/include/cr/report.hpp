// Run reports: per-handoff CSV rows, the summary block with per-group means,
// and the side-by-side comparison of two reports. The CSV schema is stable:
//
//   node,from_ap,to_ap,l2_ms,l3_ms,auth_ms,overlapped,lost_pkts,used_relay,used_cache
//
// Times are milliseconds with microsecond resolution, so every row parses
// back into the exact HandoffRecord it came from. The first line is a
// comment naming the scenario topology, used to refuse comparisons across
// different topologies.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cr/types.hpp"

namespace cr {

struct HandoffRecord {
    std::string node;
    std::string from_ap;
    std::string to_ap;
    SimTime l2_us = 0;
    SimTime l3_us = 0;
    SimTime auth_us = 0;
    bool overlapped = false;  // auth ran under the relay, off the critical path
    int lost_pkts = 0;
    bool used_relay = false;
    bool used_cache = false;
    std::string group = "cr";  // not serialized; set by the run

    // Total service interruption. Overlapped authentication does not count.
    SimTime total_us() const { return l2_us + l3_us + (overlapped ? 0 : auth_us); }

    bool operator==(const HandoffRecord& o) const {
        return node == o.node && from_ap == o.from_ap && to_ap == o.to_ap && l2_us == o.l2_us &&
               l3_us == o.l3_us && auth_us == o.auth_us && overlapped == o.overlapped &&
               lost_pkts == o.lost_pkts && used_relay == o.used_relay &&
               used_cache == o.used_cache;
    }
};

inline const char* kCsvHeader =
    "node,from_ap,to_ap,l2_ms,l3_ms,auth_ms,overlapped,lost_pkts,used_relay,used_cache";

inline void write_csv(std::ostream& os, const std::vector<HandoffRecord>& records,
                      const std::string& topology_id) {
    os << "# topology=" << topology_id << '\n';
    os << kCsvHeader << '\n';
    for (const auto& r : records) {
        os << r.node << ',' << r.from_ap << ',' << r.to_ap << ',' << format_ms(r.l2_us) << ','
           << format_ms(r.l3_us) << ',' << format_ms(r.auth_us) << ',' << (r.overlapped ? 1 : 0)
           << ',' << r.lost_pkts << ',' << (r.used_relay ? 1 : 0) << ','
           << (r.used_cache ? 1 : 0) << '\n';
    }
}

struct CsvReport {
    std::string topology_id;
    std::vector<HandoffRecord> records;
};

inline SimTime parse_ms_to_us(const std::string& s) {
    // "12.345" -> 12345 us; the writer always emits three decimals.
    auto dot = s.find('.');
    const long long whole = std::stoll(dot == std::string::npos ? s : s.substr(0, dot));
    long long frac = 0;
    if (dot != std::string::npos) {
        std::string f = s.substr(dot + 1);
        while (f.size() < 3) f.push_back('0');
        frac = std::stoll(f.substr(0, 3));
    }
    return whole * 1000 + (whole < 0 ? -frac : frac);
}

inline CsvReport read_csv(std::istream& is) {
    CsvReport report;
    std::string line;
    bool header_seen = false;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            auto pos = line.find("topology=");
            if (pos != std::string::npos) report.topology_id = line.substr(pos + 9);
            continue;
        }
        if (!header_seen) {
            if (line != kCsvHeader)
                throw std::runtime_error("line " + std::to_string(line_no) +
                                         ": unexpected CSV header");
            header_seen = true;
            continue;
        }
        std::vector<std::string> cols;
        std::istringstream ls(line);
        std::string col;
        while (std::getline(ls, col, ',')) cols.push_back(col);
        if (cols.size() != 10)
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected 10 columns");
        HandoffRecord r;
        r.node = cols[0];
        r.from_ap = cols[1];
        r.to_ap = cols[2];
        r.l2_us = parse_ms_to_us(cols[3]);
        r.l3_us = parse_ms_to_us(cols[4]);
        r.auth_us = parse_ms_to_us(cols[5]);
        r.overlapped = cols[6] == "1";
        r.lost_pkts = std::stoi(cols[7]);
        r.used_relay = cols[8] == "1";
        r.used_cache = cols[9] == "1";
        report.records.push_back(std::move(r));
    }
    return report;
}

// --- summaries -------------------------------------------------------------

struct GroupStats {
    std::size_t count = 0;
    double l2_mean = 0, l2_median = 0;
    double l3_mean = 0, l3_median = 0;
    double auth_mean = 0, auth_median = 0;
    double total_mean = 0, total_median = 0;
    double loss_mean = 0, loss_median = 0;
};

namespace detail {

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace detail

inline GroupStats compute_stats(const std::vector<const HandoffRecord*>& records) {
    GroupStats g;
    g.count = records.size();
    std::vector<double> l2, l3, auth, total, loss;
    for (const auto* r : records) {
        l2.push_back(us_to_ms(r->l2_us));
        l3.push_back(us_to_ms(r->l3_us));
        auth.push_back(us_to_ms(r->auth_us));
        total.push_back(us_to_ms(r->total_us()));
        loss.push_back(static_cast<double>(r->lost_pkts));
    }
    g.l2_mean = detail::mean(l2);
    g.l2_median = detail::median(l2);
    g.l3_mean = detail::mean(l3);
    g.l3_median = detail::median(l3);
    g.auth_mean = detail::mean(auth);
    g.auth_median = detail::median(auth);
    g.total_mean = detail::mean(total);
    g.total_median = detail::median(total);
    g.loss_mean = detail::mean(loss);
    g.loss_median = detail::median(loss);
    return g;
}

struct SummaryReport {
    std::map<std::string, GroupStats> groups;          // keyed by group name
    std::optional<double> cr_over_legacy_total_ratio;  // in (0,1] when CR wins

    static SummaryReport from_records(const std::vector<HandoffRecord>& records) {
        SummaryReport s;
        std::map<std::string, std::vector<const HandoffRecord*>> by_group;
        for (const auto& r : records) by_group[r.group.empty() ? "all" : r.group].push_back(&r);
        for (const auto& [group, recs] : by_group) s.groups[group] = compute_stats(recs);
        auto cr = s.groups.find("cr");
        auto legacy = s.groups.find("legacy");
        if (cr != s.groups.end() && legacy != s.groups.end() && legacy->second.total_mean > 0)
            s.cr_over_legacy_total_ratio = cr->second.total_mean / legacy->second.total_mean;
        return s;
    }
};

inline std::string format_fixed(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

inline void write_summary(std::ostream& os, const SummaryReport& s) {
    for (const auto& [group, g] : s.groups) {
        os << "group=" << group << " n=" << g.count << " l2_mean=" << format_fixed(g.l2_mean)
           << " l2_median=" << format_fixed(g.l2_median) << " l3_mean=" << format_fixed(g.l3_mean)
           << " l3_median=" << format_fixed(g.l3_median)
           << " auth_mean=" << format_fixed(g.auth_mean)
           << " auth_median=" << format_fixed(g.auth_median)
           << " total_mean=" << format_fixed(g.total_mean)
           << " total_median=" << format_fixed(g.total_median)
           << " loss_mean=" << format_fixed(g.loss_mean)
           << " loss_median=" << format_fixed(g.loss_median) << '\n';
    }
    if (s.cr_over_legacy_total_ratio)
        os << "ratio_total cr/legacy=" << format_fixed(*s.cr_over_legacy_total_ratio, 4) << '\n';
}

// --- comparison --------------------------------------------------------------

class TopologyMismatchError : public std::runtime_error {
  public:
    TopologyMismatchError(const std::string& a, const std::string& b)
        : std::runtime_error("reports come from different topologies: '" + a + "' vs '" + b +
                             "'") {}
};

// Side-by-side means of two single-scenario reports (e.g. a CR run and a
// legacy run), with per-column ratios.
inline std::string compare_reports(const CsvReport& a, const CsvReport& b,
                                   const std::string& label_a = "A",
                                   const std::string& label_b = "B") {
    if (!a.topology_id.empty() && !b.topology_id.empty() && a.topology_id != b.topology_id)
        throw TopologyMismatchError(a.topology_id, b.topology_id);

    std::vector<const HandoffRecord*> ra, rb;
    for (const auto& r : a.records) ra.push_back(&r);
    for (const auto& r : b.records) rb.push_back(&r);
    const GroupStats ga = compute_stats(ra);
    const GroupStats gb = compute_stats(rb);

    std::ostringstream os;
    os << "metric," << label_a << ',' << label_b << ",ratio\n";
    auto row = [&](const char* name, double va, double vb) {
        os << name << ',' << format_fixed(va) << ',' << format_fixed(vb) << ','
           << (vb != 0.0 ? format_fixed(va / vb, 4) : "inf") << '\n';
    };
    row("l2_mean_ms", ga.l2_mean, gb.l2_mean);
    row("l3_mean_ms", ga.l3_mean, gb.l3_mean);
    row("auth_mean_ms", ga.auth_mean, gb.auth_mean);
    row("total_mean_ms", ga.total_mean, gb.total_mean);
    row("loss_mean_pkts", ga.loss_mean, gb.loss_mean);
    return os.str();
}

}  // namespace cr
