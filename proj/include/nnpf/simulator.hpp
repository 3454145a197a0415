#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nnpf/prefetcher_api.hpp"
#include "nnpf/trace.hpp"

namespace nnpf {

struct CacheConfig {
    uint64_t size = 64 * 1024;
    int ways = 8;
    uint64_t line = 64;
    double miss_latency = 300;     // stall units charged to an unprefetched miss
    double hit_latency = 2;        // stall units charged to any cache hit
    double prefetch_latency = 30;  // accesses until an issued prefetch completes

    std::string validate() const;
};

enum class DemandBucket : int {
    NeverPrefetchedMiss = 0,
    TriggeredNotSent = 1,
    SentNotCompleted = 2,
    UsefulPrefetchFirstHit = 3,
    SubsequentHits = 4,
};

// Set-associative LRU cache with per-line prefetch bookkeeping.
class CacheModel {
public:
    explicit CacheModel(const CacheConfig& cfg);

    struct AccessResult {
        bool hit = false;
        bool prefetched_first_hit = false;  // first demand touch of a prefetched line
    };

    AccessResult access(uint64_t line_addr);          // demand probe (no fill)
    bool install(uint64_t line_addr, bool prefetched);  // returns true if the
                                                        // eviction wasted a prefetch
    bool contains(uint64_t line_addr) const;
    uint64_t wasted_resident_prefetches() const;  // prefetched, never demand-hit

private:
    struct Line {
        uint64_t tag = 0;
        bool valid = false;
        bool prefetched = false;
        uint64_t lru = 0;
    };
    uint64_t sets_;
    int ways_;
    uint64_t tick_ = 0;
    std::vector<Line> lines_;

    Line* find(uint64_t line_addr);
    const Line* find(uint64_t line_addr) const;
};

struct MetricsReport {
    uint64_t total_demands = 0;  // counted demands (after warmup)
    uint64_t buckets[5] = {0, 0, 0, 0, 0};
    uint64_t useless_prefetches = 0;
    uint64_t issued_prefetches = 0;  // real requests sent to memory, whole run
    double coverage = 0;
    double accuracy = 0;
    double mpki = 0;  // misses per 1000 demand accesses
    double stall_units_baseline = 0;
    double stall_units_actual = 0;
    double speedup_proxy = 1.0;
    std::vector<std::pair<uint64_t, double>> nn_error_curve;  // (access index, bit error)
    std::map<std::string, int64_t> prefetcher_stats;
    std::string prefetcher_name;
    uint64_t config_hash = 0;

    uint64_t bucket(DemandBucket b) const { return buckets[int(b)]; }
    uint64_t miss_count() const {
        return buckets[0] + buckets[1] + buckets[2];
    }
    std::string to_json() const;   // stable field order, lossless floats
    std::string to_text() const;   // human-readable table
};

struct SimConfig {
    CacheConfig cache;
    double warmup_fraction = 0.0;  // demands before this point are not counted
};

// Drives one prefetcher over one trace. Deterministic; the baseline stall sum
// comes from an embedded prefetcher-free pass over the same trace.
MetricsReport run(const std::vector<AccessRecord>& trace, Prefetcher& prefetcher,
                  const SimConfig& config);

}  // namespace nnpf
