#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nnpf/prefetcher.hpp"
#include "nnpf/simulator.hpp"

using namespace nnpf;

namespace {

NnPrefetcherConfig small_cfg() {
    NnPrefetcherConfig cfg;
    cfg.net.rng_seed = 7;
    cfg.assoc_queue_capacity = 16;
    cfg.prefetch_queue_capacity = 32;
    cfg.usefulness_window = 64;
    cfg.curve_window = 64;
    return cfg;
}

AccessRecord rec(uint64_t seq, uint64_t addr, uint64_t pc = 0x400100) {
    return {seq, pc, addr, AccessKind::Load};
}

}  // namespace

TEST_CASE("mse policy picks the closest-matching candidate") {
    // candidates +0x40 (one line) and +0x1C0 (seven lines)
    std::vector<TrainingCandidate> c{{1, 0x1040}, {7, 0x11C0}};
    uint16_t bits_plus_one = delta_to_bits(1);
    CHECK(select_mse_candidate(bits_plus_one, c) == 0);
    uint16_t bits_plus_seven = delta_to_bits(7);
    CHECK(select_mse_candidate(bits_plus_seven, c) == 1);
}

TEST_CASE("hash policy prefers the remembered delta and falls back to most recent") {
    std::vector<TrainingCandidate> c{{1, 0x1040}, {2, 0x1080}, {7, 0x11C0}};
    CHECK(select_hash_candidate(int64_t(2), c) == 1);   // +0x80 present
    CHECK(select_hash_candidate(int64_t(9), c) == 0);   // no match: most recent
    CHECK(select_hash_candidate(std::nullopt, c) == 0); // no hash hit
}

TEST_CASE("max-delta controller raises the limit under low usefulness") {
    MaxDeltaController c(0x2000, 0x2000, 0x10000, 0.2, 2);
    for (int i = 0; i < 10; ++i) c.note_resolved(i == 0);  // 10% useful
    c.adapt();
    CHECK(c.limit() == 0x4000);
}

TEST_CASE("max-delta controller holds the limit when usefulness is healthy") {
    MaxDeltaController c(0x2000, 0x2000, 0x10000, 0.2, 2);
    for (int i = 0; i < 10; ++i) c.note_resolved(i < 5);  // 50% useful
    c.adapt();
    CHECK(c.limit() == 0x2000);
}

TEST_CASE("max-delta controller settles on the best-performing limit") {
    MaxDeltaController c(0x2000, 0x2000, 0x8000, 0.2, 2);
    // Always useless except one window at 0x6000, over two full sweeps.
    int windows = 0;
    while (!c.settled() && windows < 64) {
        const bool good_window = c.limit() == 0x6000;
        for (int i = 0; i < 10; ++i) c.note_resolved(good_window && i < 1);  // 10% max
        c.adapt();
        ++windows;
    }
    CHECK(c.settled());
    CHECK(c.limit() == 0x6000);
    uint64_t frozen = c.limit();
    for (int i = 0; i < 10; ++i) c.note_resolved(false);
    c.adapt();
    CHECK(c.limit() == frozen);  // stops moving after settling
}

TEST_CASE("limit changes only at window boundaries") {
    MaxDeltaController c(0x2000, 0x2000, 0x10000, 0.2, 2);
    for (int i = 0; i < 100; ++i) {
        c.note_resolved(false);
        CHECK(c.limit() == 0x2000);  // no adapt() yet
    }
    c.adapt();
    CHECK(c.limit() == 0x4000);
}

TEST_CASE("no training happens while the association queue fills") {
    auto cfg = small_cfg();
    NnPrefetcher pf(cfg);
    for (uint64_t i = 0; i < cfg.assoc_queue_capacity; ++i) {
        pf.feedback(rec(i, 0x10000 + i * 64));
        pf.on_access(rec(i, 0x10000 + i * 64), false, false);
    }
    CHECK(pf.stats()["trainings"] == 0);
    pf.feedback(rec(99, 0x20000));
    pf.on_access(rec(99, 0x20000), false, false);
    CHECK(pf.stats()["trainings"] + pf.stats()["starved_trainings"] == 1);
}

TEST_CASE("an all-hit trace emits nothing and trains nothing") {
    auto cfg = small_cfg();
    NnPrefetcher pf(cfg);
    for (uint64_t i = 0; i < 200; ++i) {
        pf.feedback(rec(i, 0x10000 + (i % 4) * 64));
        auto out = pf.on_access(rec(i, 0x10000 + (i % 4) * 64), true, false);
        CHECK(out.empty());
    }
    CHECK(pf.stats()["trainings"] == 0);
    CHECK(pf.stats()["predictions_real"] == 0);
    CHECK(pf.stats()["predictions_shadow"] == 0);
}

TEST_CASE("hit-marked entries are never selectable as candidates") {
    auto cfg = small_cfg();
    cfg.assoc_queue_capacity = 8;
    NnPrefetcher pf(cfg);
    // misses land far outside the 0x2000 limit; hits land within it
    uint64_t seq = 0;
    for (int round = 0; round < 6; ++round) {
        pf.on_access(rec(seq++, 0x10000 + uint64_t(round) * 0x100), true, false);  // near hit
        pf.on_access(rec(seq++, 0x900000 * (1 + uint64_t(round))), false, false);  // far miss
    }
    auto st = pf.stats();
    // every pop with cached activations found only out-of-range or hit-marked
    // neighbours, so no training target was ever selected
    CHECK(st["trainings"] == 0);
    CHECK(st["starved_trainings"] > 0);
}

TEST_CASE("forced shadow mode issues zero memory traffic but keeps statistics") {
    PatternSpec spec;
    spec.kind = PatternKind::Strider;
    spec.base = 0x1000000;
    spec.stride = 1;
    auto trace = gen_pattern(spec, 30000, 0);
    auto cfg = NnPrefetcherConfig{};
    cfg.net.rng_seed = 3;
    cfg.force_shadow = true;
    NnPrefetcher pf(cfg);
    SimConfig sim;
    auto rep = run(trace, pf, sim);
    CHECK(rep.issued_prefetches == 0);
    CHECK(rep.bucket(DemandBucket::UsefulPrefetchFirstHit) == 0);
    auto st = pf.stats();
    CHECK(st["predictions_shadow"] > 0);
    CHECK(st["predictions_real"] == 0);
    CHECK(st["feedback_positive"] + st["feedback_negative"] > 0);
}

TEST_CASE("steady stride misses converge to the association-depth delta") {
    PatternSpec spec;
    spec.kind = PatternKind::Strider;
    spec.base = 0x1000000;
    spec.stride = 1;
    auto trace = gen_pattern(spec, 40000, 0);
    NnPrefetcherConfig cfg;
    cfg.net.rng_seed = 1;
    NnPrefetcher pf(cfg);
    SimConfig sim;
    auto rep = run(trace, pf, sim);

    // the hash policy associates the most recent address, a fixed N accesses
    // ahead, so trained deltas converge to N lines (N=128, one line per step)
    CHECK(rep.bucket(DemandBucket::UsefulPrefetchFirstHit) > 0);
    auto st = pf.stats();
    CHECK(st["trainings"] > 1000);
    CHECK(st["feedback_positive"] > 0);

    // drive one more access and inspect the emitted delta directly
    uint64_t next_addr = trace.back().addr + 64;
    pf.feedback(rec(trace.size(), next_addr));
    auto out = pf.on_access(rec(trace.size(), next_addr), false, false);
    bool found_depth_delta = false;
    for (const auto& r : out)
        if (r.addr == next_addr + 128 * 64) found_depth_delta = true;
    CHECK(found_depth_delta);
}

TEST_CASE("prefetch queue entries are unique per address") {
    auto cfg = small_cfg();
    NnPrefetcher pf(cfg);
    PatternSpec spec;
    spec.kind = PatternKind::Strider;
    spec.base = 0x1000000;
    spec.stride = 1;
    auto trace = gen_pattern(spec, 5000, 0);
    SimConfig sim;
    run(trace, pf, sim);
    auto dump = pf.dump_state();
    CHECK(dump.prefetch_queue_size <= cfg.prefetch_queue_capacity);
    CHECK(dump.assoc_queue_size <= cfg.assoc_queue_capacity);
}

TEST_CASE("prefetcher evolution is deterministic") {
    PatternSpec spec;
    spec.kind = PatternKind::ListChase;
    spec.elem_count = 64;
    spec.repeats = 40;
    auto trace = gen_kernel(spec, 5);
    auto once = [&] {
        NnPrefetcherConfig cfg;
        cfg.net.rng_seed = 9;
        NnPrefetcher pf(cfg);
        SimConfig sim;
        auto rep = run(trace, pf, sim);
        return rep.to_json();
    };
    CHECK(once() == once());
}

TEST_CASE("dump_state reports queue occupancy and hash fill") {
    auto cfg = small_cfg();
    NnPrefetcher pf(cfg);
    for (uint64_t i = 0; i < 100; ++i) {
        pf.feedback(rec(i, 0x10000 + i * 64));
        pf.on_access(rec(i, 0x10000 + i * 64), false, false);
    }
    auto d = pf.dump_state();
    CHECK(d.assoc_queue_size == cfg.assoc_queue_capacity);
    CHECK(d.hash_capacity == size_t(1) << cfg.hash_table_bits);
    CHECK(d.hash_valid_entries > 0);
    CHECK(d.step_count > 0);
}

TEST_CASE("invalid configurations are rejected") {
    NnPrefetcherConfig cfg;
    cfg.net.output_width = 24;  // subsets of 12, not 16
    CHECK_THROWS_AS(NnPrefetcher{cfg}, std::invalid_argument);
    cfg = NnPrefetcherConfig{};
    cfg.threshold_hi = 0.2;
    CHECK_THROWS_AS(NnPrefetcher{cfg}, std::invalid_argument);
}
