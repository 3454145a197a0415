#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nnpf/baselines.hpp"
#include "nnpf/simulator.hpp"
#include "nnpf/trace.hpp"

using namespace nnpf;

namespace {

std::vector<AccessRecord> repeated_line(uint64_t addr, uint64_t n) {
    std::vector<AccessRecord> t;
    for (uint64_t i = 0; i < n; ++i) t.push_back({i, 0x400100, addr, AccessKind::Load});
    return t;
}

// Test-only prefetcher that emits a fixed script of requests keyed by access
// index; optionally knows the whole trace (an upper-bound oracle).
class ScriptedPrefetcher final : public Prefetcher {
public:
    std::map<uint64_t, std::vector<PrefetchRequest>> script;
    uint64_t now = 0;
    std::vector<PrefetchRequest> on_access(const AccessRecord&, bool, bool) override {
        auto it = script.find(now++);
        return it == script.end() ? std::vector<PrefetchRequest>{} : it->second;
    }
    std::string name() const override { return "scripted"; }
};

class OraclePrefetcher final : public Prefetcher {
public:
    OraclePrefetcher(const std::vector<AccessRecord>& trace, uint64_t line, uint64_t lead)
        : trace_(trace), line_(line), lead_(lead) {}
    std::vector<PrefetchRequest> on_access(const AccessRecord&, bool, bool) override {
        std::vector<PrefetchRequest> out;
        for (uint64_t k = now_ + lead_; k < std::min<uint64_t>(trace_.size(), now_ + lead_ + 2); ++k)
            out.push_back({(trace_[k].addr / line_) * line_, false});
        ++now_;
        return out;
    }
    std::string name() const override { return "oracle"; }

private:
    const std::vector<AccessRecord>& trace_;
    uint64_t line_;
    uint64_t lead_;
    uint64_t now_ = 0;
};

class PendingOnlyPrefetcher final : public Prefetcher {
public:
    uint64_t pending_line = 0;
    std::vector<PrefetchRequest> on_access(const AccessRecord&, bool, bool) override { return {}; }
    bool has_pending_prediction(uint64_t line) const override { return line == pending_line; }
    std::string name() const override { return "pending"; }
};

}  // namespace

TEST_CASE("repeated single line: one miss then subsequent hits") {
    auto trace = repeated_line(0x1000, 100);
    NonePrefetcher none;
    SimConfig cfg;
    auto rep = run(trace, none, cfg);
    CHECK(rep.bucket(DemandBucket::NeverPrefetchedMiss) == 1);
    CHECK(rep.bucket(DemandBucket::SubsequentHits) == 99);
    CHECK(rep.bucket(DemandBucket::UsefulPrefetchFirstHit) == 0);
    CHECK(rep.speedup_proxy == 1.0);  // identical stall sums with no prefetcher
}

TEST_CASE("oracle prefetcher reaches full coverage with no waste") {
    PatternSpec spec;
    spec.kind = PatternKind::Streamer;
    spec.base = 0x100000;
    auto trace = gen_pattern(spec, 5000, 0);
    SimConfig cfg;
    cfg.cache.prefetch_latency = 1;
    cfg.warmup_fraction = 0.1;
    OraclePrefetcher oracle(trace, cfg.cache.line, 2);
    auto rep = run(trace, oracle, cfg);
    CHECK(rep.coverage == 1.0);
    CHECK(rep.useless_prefetches == 0);
    CHECK(rep.accuracy == 1.0);
}

TEST_CASE("late prefetch charges the residual wait") {
    // access 0 misses A and issues a prefetch of X; access 3 demands X.
    std::vector<AccessRecord> trace{
        {0, 1, 0x1000, AccessKind::Load},
        {1, 1, 0x1000, AccessKind::Load},
        {2, 1, 0x1000, AccessKind::Load},
        {3, 1, 0x8000, AccessKind::Load},
    };
    ScriptedPrefetcher pf;
    pf.script[0] = {{0x8000, false}};
    SimConfig cfg;
    cfg.cache.prefetch_latency = 10;
    auto rep = run(trace, pf, cfg);
    CHECK(rep.bucket(DemandBucket::SentNotCompleted) == 1);
    // 300 (miss) + 2 + 2 (hits) + 7 (residual of the 10-unit prefetch)
    CHECK(rep.stall_units_actual == doctest::Approx(311.0));
    CHECK(rep.stall_units_baseline == doctest::Approx(604.0));
}

TEST_CASE("shadow requests never reach memory") {
    std::vector<AccessRecord> trace = repeated_line(0x1000, 10);
    ScriptedPrefetcher pf;
    pf.script[0] = {{0x8000, true}};  // shadow
    SimConfig cfg;
    auto rep = run(trace, pf, cfg);
    CHECK(rep.issued_prefetches == 0);
    CHECK(rep.useless_prefetches == 0);
}

TEST_CASE("queued-but-unsent predictions classify as triggered_not_sent") {
    std::vector<AccessRecord> trace{
        {0, 1, 0x1000, AccessKind::Load},
        {1, 1, 0x8000, AccessKind::Load},
    };
    PendingOnlyPrefetcher pf;
    pf.pending_line = 0x8000 / 64;
    SimConfig cfg;
    auto rep = run(trace, pf, cfg);
    CHECK(rep.bucket(DemandBucket::TriggeredNotSent) == 1);
    CHECK(rep.bucket(DemandBucket::NeverPrefetchedMiss) == 1);
    // an unsent prediction saves nothing
    CHECK(rep.stall_units_actual == doctest::Approx(600.0));
}

TEST_CASE("demand on a never-predicted line charges the full miss latency") {
    auto trace = repeated_line(0x9000, 1);
    NonePrefetcher none;
    SimConfig cfg;
    auto rep = run(trace, none, cfg);
    CHECK(rep.bucket(DemandBucket::NeverPrefetchedMiss) == 1);
    CHECK(rep.stall_units_actual == doctest::Approx(300.0));
}

TEST_CASE("prefetched line evicted unhit counts as useless") {
    SimConfig cfg;
    cfg.cache.size = 128;  // one set, two ways
    cfg.cache.ways = 2;
    cfg.cache.prefetch_latency = 1;
    std::vector<AccessRecord> trace{
        {0, 1, 0x0000, AccessKind::Load},
        {1, 1, 0x0040, AccessKind::Load},
        {2, 1, 0x0080, AccessKind::Load},  // prefetch of 0x9000 completes here
        {3, 1, 0x00C0, AccessKind::Load},  // evictions crowd it out
        {4, 1, 0x0100, AccessKind::Load},
        {5, 1, 0x0140, AccessKind::Load},
    };
    ScriptedPrefetcher pf;
    pf.script[1] = {{0x9000, false}};
    auto rep = run(trace, pf, cfg);
    CHECK(rep.useless_prefetches == 1);
    CHECK(rep.accuracy == 0.0);
}

TEST_CASE("bucket partition holds on arbitrary runs") {
    PatternSpec spec;
    spec.kind = PatternKind::Markov;
    spec.states = {0x1000, 0x2000, 0x3000, 0x4000};
    spec.transitions = {{0.1, 0.3, 0.3, 0.3},
                        {0.7, 0.1, 0.1, 0.1},
                        {0.25, 0.25, 0.25, 0.25},
                        {0.4, 0.4, 0.1, 0.1}};
    auto trace = gen_pattern(spec, 20000, 3);
    for (const char* name : {"none", "stride", "markov", "ghb_pcdc", "sms", "vldp"}) {
        auto pf = make_baseline(name, BaselineParams{});
        SimConfig cfg;
        cfg.warmup_fraction = 0.25;
        auto rep = run(trace, *pf, cfg);
        uint64_t sum = 0;
        for (int b = 0; b < 5; ++b) sum += rep.buckets[b];
        CHECK(sum == rep.total_demands);
        CHECK(rep.coverage >= 0.0);
        CHECK(rep.coverage <= 1.0);
        CHECK(rep.accuracy >= 0.0);
        CHECK(rep.accuracy <= 1.0);
    }
}

TEST_CASE("stride, ghb and vldp converge on a pure stride trace") {
    PatternSpec spec;
    spec.kind = PatternKind::Strider;
    spec.base = 0x4000000;
    spec.stride = 2;
    auto trace = gen_pattern(spec, 100000, 0);
    SimConfig cfg;
    cfg.warmup_fraction = 0.1;
    for (const char* name : {"stride", "ghb_pcdc", "vldp"}) {
        auto pf = make_baseline(name, BaselineParams{});
        auto rep = run(trace, *pf, cfg);
        INFO(std::string(name) << " coverage " << rep.coverage);
        CHECK(rep.coverage >= 0.95);
    }
}

TEST_CASE("speedup proxy is capped by the miss/hit latency ratio") {
    PatternSpec spec;
    spec.kind = PatternKind::Streamer;
    spec.base = 0x100000;
    auto trace = gen_pattern(spec, 5000, 0);
    SimConfig cfg;
    cfg.cache.prefetch_latency = 1;
    cfg.warmup_fraction = 0.1;
    OraclePrefetcher oracle(trace, cfg.cache.line, 2);
    auto rep = run(trace, oracle, cfg);
    CHECK(rep.speedup_proxy > 1.0);
    CHECK(rep.speedup_proxy <= cfg.cache.miss_latency / cfg.cache.hit_latency);
}

TEST_CASE("reports serialize deterministically") {
    PatternSpec spec;
    spec.kind = PatternKind::Strider;
    spec.stride = 3;
    auto trace = gen_pattern(spec, 5000, 0);
    auto once = [&] {
        auto pf = make_baseline("stride", BaselineParams{});
        SimConfig cfg;
        return run(trace, *pf, cfg).to_json();
    };
    CHECK(once() == once());
}

TEST_CASE("empty traces are rejected") {
    NonePrefetcher none;
    SimConfig cfg;
    std::vector<AccessRecord> empty;
    CHECK_THROWS_AS(run(empty, none, cfg), std::invalid_argument);
}
