#pragma once

#include <cstdint>
#include <list>
#include <memory>
#include <optional>
#include <unordered_map>

#include "nnpf/prefetcher_api.hpp"

namespace nnpf {

// Capacity-bounded LRU map shared by the baseline tables.
template <typename K, typename V>
class LruMap {
public:
    explicit LruMap(size_t capacity) : capacity_(capacity) {}

    V* find(const K& key) {
        auto it = index_.find(key);
        if (it == index_.end()) return nullptr;
        order_.splice(order_.begin(), order_, it->second);
        return &it->second->second;
    }

    V& insert(const K& key, V value) {
        insert_evict(key, std::move(value));
        return order_.front().second;
    }

    // Insert that hands back the entry displaced by capacity, if any.
    std::optional<std::pair<K, V>> insert_evict(const K& key, V value) {
        if (auto* v = find(key)) {
            *v = std::move(value);
            return std::nullopt;
        }
        std::optional<std::pair<K, V>> evicted;
        if (order_.size() >= capacity_) {
            evicted = std::move(order_.back());
            index_.erase(evicted->first);
            order_.pop_back();
        }
        order_.emplace_front(key, std::move(value));
        index_[key] = order_.begin();
        return evicted;
    }

    size_t size() const { return order_.size(); }
    size_t capacity() const { return capacity_; }

private:
    size_t capacity_;
    std::list<std::pair<K, V>> order_;
    std::unordered_map<K, typename std::list<std::pair<K, V>>::iterator> index_;
};

struct BaselineParams {
    uint64_t line = 64;
    int degree = 2;
    // Run-ahead bound: the frontier never leads the demand stream by more
    // than this many lines, which keeps prefetches timely without flushing
    // the cache ahead of the demand.
    int64_t max_lead_lines = 256;

    size_t stride_table = 256;

    size_t markov_table = 4096;
    int markov_successors = 4;

    size_t ghb_size = 256;
    size_t ghb_index = 256;
    int ghb_history = 3;

    size_t sms_pht = 2048;
    size_t sms_agt = 32;
    size_t sms_filter = 32;
    uint64_t sms_region = 2048;

    size_t vldp_dhb = 16;
    size_t vldp_opt = 64;
    size_t vldp_dpt = 64;
    uint64_t vldp_page = 4096;
};

std::unique_ptr<Prefetcher> make_baseline(const std::string& name, const BaselineParams& params);

// --- individual baselines (exposed for unit tests) ---------------------------

class NonePrefetcher final : public Prefetcher {
public:
    std::vector<PrefetchRequest> on_access(const AccessRecord&, bool, bool) override { return {}; }
    std::string name() const override { return "none"; }
};

class StridePrefetcher final : public Prefetcher {
public:
    explicit StridePrefetcher(const BaselineParams& p);
    std::vector<PrefetchRequest> on_access(const AccessRecord& r, bool l1_hit,
                                           bool hit_prefetched_line) override;
    std::map<std::string, int64_t> stats() const override;
    std::string name() const override { return "stride"; }

private:
    struct Entry {
        int64_t last_line = 0;
        int64_t stride = 0;
        int confirms = 0;
        int64_t frontier = 0;
    };
    BaselineParams p_;
    LruMap<uint64_t, Entry> table_;
    int64_t issued_ = 0;
};

class MarkovPrefetcher final : public Prefetcher {
public:
    explicit MarkovPrefetcher(const BaselineParams& p);
    std::vector<PrefetchRequest> on_access(const AccessRecord& r, bool l1_hit,
                                           bool hit_prefetched_line) override;
    std::map<std::string, int64_t> stats() const override;
    std::string name() const override { return "markov"; }

private:
    struct Successor {
        uint64_t line = 0;
        int count = 0;
    };
    struct Entry {
        std::vector<Successor> succ;
    };
    BaselineParams p_;
    LruMap<uint64_t, Entry> table_;
    std::optional<uint64_t> prev_line_;
    int64_t issued_ = 0;
};

class GhbPcdcPrefetcher final : public Prefetcher {
public:
    explicit GhbPcdcPrefetcher(const BaselineParams& p);
    std::vector<PrefetchRequest> on_access(const AccessRecord& r, bool l1_hit,
                                           bool hit_prefetched_line) override;
    std::map<std::string, int64_t> stats() const override;
    std::string name() const override { return "ghb_pcdc"; }

private:
    struct GhbEntry {
        int64_t line = 0;
        uint64_t serial = 0;      // insertion number, for stale-link detection
        uint64_t prev_serial = 0; // previous entry of the same PC; 0 = none
    };
    struct IndexEntry {
        uint64_t serial = 0;
        int64_t frontier = 0;
    };
    BaselineParams p_;
    std::vector<GhbEntry> buffer_;
    LruMap<uint64_t, IndexEntry> index_;
    uint64_t next_serial_ = 1;
    int64_t issued_ = 0;

    const GhbEntry* entry_for_serial(uint64_t serial) const;
};

class SmsPrefetcher final : public Prefetcher {
public:
    explicit SmsPrefetcher(const BaselineParams& p);
    std::vector<PrefetchRequest> on_access(const AccessRecord& r, bool l1_hit,
                                           bool hit_prefetched_line) override;
    std::map<std::string, int64_t> stats() const override;
    std::string name() const override { return "sms"; }

private:
    struct Accumulation {
        uint64_t trigger_pc = 0;
        uint64_t trigger_offset = 0;
        uint64_t bits = 0;  // offsets relative to the trigger, rotated mod region
    };
    struct FilterEntry {
        uint64_t pc = 0;
        uint64_t offset = 0;
    };
    BaselineParams p_;
    uint64_t region_lines_;
    LruMap<uint64_t, Accumulation> agt_;
    LruMap<uint64_t, FilterEntry> filter_;
    LruMap<uint64_t, uint64_t> pht_;  // (pc, trigger offset) -> rotated pattern
    int64_t issued_ = 0;

    void train(uint64_t region, const Accumulation& acc);
    uint64_t pht_key(uint64_t pc, uint64_t offset) const;
};

class VldpPrefetcher final : public Prefetcher {
public:
    explicit VldpPrefetcher(const BaselineParams& p);
    std::vector<PrefetchRequest> on_access(const AccessRecord& r, bool l1_hit,
                                           bool hit_prefetched_line) override;
    std::map<std::string, int64_t> stats() const override;
    std::string name() const override { return "vldp"; }

private:
    struct DhbEntry {
        int64_t last_offset = 0;
        std::vector<int64_t> deltas;  // most recent last, up to 3
        int last_predictor = 0;
        uint64_t times_used = 0;
    };
    struct OptEntry {
        int64_t pred = 0;
        bool accurate = false;
        bool valid = false;
    };
    struct DptEntry {
        int64_t pred = 0;
        int accuracy = 0;  // 2-bit saturating
    };
    BaselineParams p_;
    uint64_t page_lines_;
    LruMap<uint64_t, DhbEntry> dhb_;
    std::vector<OptEntry> opt_;
    std::vector<LruMap<uint64_t, DptEntry>> dpt_;  // keyed by packed delta history
    int64_t frontier_ = 0;                 // stream run-ahead, in absolute lines
    std::vector<int64_t> frontier_hist_;   // delta phase at the frontier
    int64_t issued_ = 0;

    static uint64_t pack_deltas(const std::vector<int64_t>& d, size_t n);
    std::optional<std::pair<int64_t, int>> predict(const std::vector<int64_t>& history);
    void update_tables(DhbEntry& e);
};

}  // namespace nnpf
