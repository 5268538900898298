// Simulated DHCP server: per-subnet pools, lease table, renewal. Message
// contents are modeled at field level (chaddr, broadcast bit, offered
// address, router option); the proxy procedure is what matters, and the
// server cannot tell a proxied exchange from a direct one.

#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cr/types.hpp"

namespace cr {

enum class DhcpError { PoolExhausted, ServerTimeout, LeaseUnknown, NoSuchPool };

inline const char* dhcp_error_name(DhcpError e) {
    switch (e) {
        case DhcpError::PoolExhausted: return "PoolExhausted";
        case DhcpError::ServerTimeout: return "ServerTimeout";
        case DhcpError::LeaseUnknown: return "LeaseUnknown";
        case DhcpError::NoSuchPool: return "NoSuchPool";
    }
    return "?";
}

struct DhcpPool {
    SubnetId subnet{};
    std::uint32_t mask = 0xffffff00;
    Ipv4Address router{};
    Ipv4Address range_begin{};
    Ipv4Address range_end{};
    SimTime lease_duration = 300'000'000;  // 300 s
};

struct DhcpBinding {
    MacAddress chaddr{};
    SimTime expiry = 0;
};

struct DhcpGrant {
    Ipv4Address ip{};
    Ipv4Address router{};
    SimTime expiry = 0;
};

template <typename T>
struct DhcpResult {
    std::optional<T> value;
    DhcpError error = DhcpError::ServerTimeout;

    bool ok() const { return value.has_value(); }
    const T& operator*() const { return *value; }

    static DhcpResult success(T v) { return {std::move(v), DhcpError::ServerTimeout}; }
    static DhcpResult failure(DhcpError e) { return {std::nullopt, e}; }
};

class DhcpServer {
  public:
    void add_pool(const DhcpPool& pool) { pools_[pool.subnet] = pool; }

    const DhcpPool* pool(const SubnetId& subnet) const {
        auto it = pools_.find(subnet);
        return it == pools_.end() ? nullptr : &it->second;
    }

    // Full discover/offer/request/ack outcome. The caller decides how long
    // the exchange takes; the server only owns the lease table. `broadcast`
    // is recorded for audit: a proxying client must set it, since the ack
    // carries a chaddr different from the sender's own MAC.
    DhcpResult<DhcpGrant> acquire(const SubnetId& subnet, const MacAddress& chaddr,
                                  bool broadcast, SimTime now) {
        auto pit = pools_.find(subnet);
        if (pit == pools_.end()) return DhcpResult<DhcpGrant>::failure(DhcpError::NoSuchPool);
        const DhcpPool& pool = pit->second;
        reap(now);
        ++exchanges_;
        if (broadcast) ++broadcast_exchanges_;

        // Prefer an address this client already holds.
        for (auto& [ip, binding] : leases_) {
            if (binding.chaddr == chaddr && in_subnet(ip, pool.subnet, pool.mask)) {
                binding.expiry = now + pool.lease_duration;
                return DhcpResult<DhcpGrant>::success(
                    DhcpGrant{ip, pool.router, binding.expiry});
            }
        }
        for (std::uint32_t v = pool.range_begin.value; v <= pool.range_end.value; ++v) {
            Ipv4Address ip{v};
            if (leases_.count(ip)) continue;
            DhcpBinding binding{chaddr, now + pool.lease_duration};
            leases_[ip] = binding;
            return DhcpResult<DhcpGrant>::success(DhcpGrant{ip, pool.router, binding.expiry});
        }
        return DhcpResult<DhcpGrant>::failure(DhcpError::PoolExhausted);
    }

    // Renewal keeps the address when the binding is still ours or the
    // address is free again; a reallocated address is gone for good.
    DhcpResult<DhcpGrant> renew(Ipv4Address ip, const MacAddress& chaddr, SimTime now) {
        reap(now);
        const DhcpPool* p = pool_of(ip);
        if (!p) return DhcpResult<DhcpGrant>::failure(DhcpError::NoSuchPool);
        auto it = leases_.find(ip);
        if (it != leases_.end()) {
            if (it->second.chaddr != chaddr)
                return DhcpResult<DhcpGrant>::failure(DhcpError::LeaseUnknown);
            it->second.expiry = now + p->lease_duration;
            return DhcpResult<DhcpGrant>::success(DhcpGrant{ip, p->router, it->second.expiry});
        }
        // Expired but unallocated: reissue the same address.
        DhcpBinding binding{chaddr, now + p->lease_duration};
        leases_[ip] = binding;
        return DhcpResult<DhcpGrant>::success(DhcpGrant{ip, p->router, binding.expiry});
    }

    bool is_active(Ipv4Address ip, SimTime now) const {
        auto it = leases_.find(ip);
        return it != leases_.end() && it->second.expiry > now;
    }

    std::optional<MacAddress> bound_chaddr(Ipv4Address ip, SimTime now) const {
        auto it = leases_.find(ip);
        if (it == leases_.end() || it->second.expiry <= now) return std::nullopt;
        return it->second.chaddr;
    }

    std::size_t active_leases(SimTime now) const {
        std::size_t n = 0;
        for (const auto& [ip, b] : leases_) {
            (void)ip;
            if (b.expiry > now) ++n;
        }
        return n;
    }

    std::size_t exchange_count() const { return exchanges_; }
    std::size_t broadcast_exchange_count() const { return broadcast_exchanges_; }

    // Lease-table dump, one line per active lease: "ip chaddr expiry".
    void dump(std::ostream& os, SimTime now) const {
        for (const auto& [ip, b] : leases_) {
            if (b.expiry <= now) continue;
            os << ip.to_string() << ' ' << b.chaddr.to_string() << ' ' << b.expiry << '\n';
        }
    }

    std::string dump_string(SimTime now) const {
        std::ostringstream os;
        dump(os, now);
        return os.str();
    }

  private:
    const DhcpPool* pool_of(Ipv4Address ip) const {
        for (const auto& [subnet, pool] : pools_) {
            (void)subnet;
            if (in_subnet(ip, pool.subnet, pool.mask)) return &pool;
        }
        return nullptr;
    }

    void reap(SimTime now) {
        for (auto it = leases_.begin(); it != leases_.end();) {
            if (it->second.expiry <= now)
                it = leases_.erase(it);
            else
                ++it;
        }
    }

    std::map<SubnetId, DhcpPool> pools_;
    std::map<Ipv4Address, DhcpBinding> leases_;
    std::size_t exchanges_ = 0;
    std::size_t broadcast_exchanges_ = 0;
};

}  // namespace cr
