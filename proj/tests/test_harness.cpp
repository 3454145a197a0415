#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "nnpf/config.hpp"
#include "nnpf/costmodel.hpp"

using namespace nnpf;
namespace fs = std::filesystem;

namespace {

nlohmann::json base_config() {
    return nlohmann::json::parse(R"({
        "seed": 7,
        "trace": {"kind": "strider", "length": 5000, "base": "0x100000", "stride": 2},
        "cache": {"size": 65536, "ways": 8, "line": 64},
        "sim": {"warmup_fraction": 0.1},
        "prefetcher": {"name": "stride", "nn": {"hidden": [32], "learning_rate": 0.05}},
        "output": {"dir": "out"}
    })");
}

}  // namespace

TEST_CASE("configs parse with hex addresses and nested sections") {
    auto cfg = config_from_json(base_config());
    CHECK(cfg.seed == 7);
    REQUIRE(cfg.trace_spec.has_value());
    CHECK(cfg.trace_spec->base == 0x100000);
    CHECK(cfg.trace_spec->stride == 2);
    CHECK(cfg.trace_length == 5000);
    CHECK(cfg.prefetcher_name == "stride");
    CHECK(cfg.warmup_fraction == 0.1);
    CHECK(cfg.nn.net.rng_seed == 7);  // seed flows into the network
}

TEST_CASE("unknown keys are rejected with the offending name") {
    auto j = base_config();
    j["trace"]["strid"] = 3;
    try {
        config_from_json(j);
        FAIL("expected rejection");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("strid") != std::string::npos);
    }
    j = base_config();
    j["prefetcher"]["nn"]["lern_rate"] = 0.1;
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
}

TEST_CASE("missing required fields are named") {
    auto j = base_config();
    j["trace"].erase("kind");
    try {
        config_from_json(j);
        FAIL("expected rejection");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("kind") != std::string::npos);
    }
}

TEST_CASE("invalid values are rejected") {
    auto j = base_config();
    j["trace"]["kind"] = "bogus";
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
    j = base_config();
    j["sim"]["warmup_fraction"] = 1.5;
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
    j = base_config();
    j["prefetcher"]["nn"]["hidden"] = nlohmann::json::array();
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
}

TEST_CASE("overrides apply dotted paths with json literals") {
    auto j = base_config();
    apply_override(j, "prefetcher.nn.learning_rate=0.125");
    apply_override(j, "prefetcher.name=nn");
    apply_override(j, "trace.stride=5");
    auto cfg = config_from_json(j);
    CHECK(cfg.nn.net.learning_rate == 0.125);
    CHECK(cfg.prefetcher_name == "nn");
    CHECK(cfg.trace_spec->stride == 5);
    CHECK_THROWS_AS(apply_override(j, "no_equals_sign"), ConfigError);
}

TEST_CASE("config hash is stable and key-order independent") {
    auto a = config_from_json(base_config());
    auto j = base_config();
    // rebuild with a different key insertion order
    nlohmann::json reordered;
    reordered["output"] = j["output"];
    reordered["seed"] = j["seed"];
    reordered["prefetcher"] = j["prefetcher"];
    reordered["trace"] = j["trace"];
    reordered["cache"] = j["cache"];
    reordered["sim"] = j["sim"];
    auto b = config_from_json(reordered);
    CHECK(a.config_hash == b.config_hash);
    auto j2 = base_config();
    j2["seed"] = 8;
    CHECK(config_from_json(j2).config_hash != a.config_hash);
}

TEST_CASE("generated traces round-trip through obtain_trace") {
    auto cfg = config_from_json(base_config());
    auto t1 = obtain_trace(cfg);
    REQUIRE(t1.size() == 5000);
    auto path = fs::temp_directory_path() / "nnpf_harness.trc";
    write_trace(path.string(), t1);
    auto j = base_config();
    j["trace"] = {{"path", path.string()}};
    auto cfg2 = config_from_json(j);
    CHECK(obtain_trace(cfg2) == t1);
    fs::remove(path);
}

TEST_CASE("same seed produces identical traces, different seeds differ") {
    auto j = base_config();
    j["trace"] = {{"kind", "list_chase"}, {"elem_count", 128}, {"repeats", 2}};
    auto a = obtain_trace(config_from_json(j));
    auto b = obtain_trace(config_from_json(j));
    CHECK(a == b);
    j["seed"] = 8;
    CHECK(obtain_trace(config_from_json(j)) != a);
}

TEST_CASE("prefetcher factory covers every configured name") {
    auto cfg = config_from_json(base_config());
    for (const char* name : {"nn", "none", "stride", "markov", "ghb_pcdc", "sms", "vldp"})
        CHECK(make_prefetcher(cfg, name)->name() == name);
    CHECK_THROWS_AS(make_prefetcher(cfg, "bogus"), ConfigError);
}

TEST_CASE("run with prefetcher none has an empty useful bucket") {
    auto cfg = config_from_json(base_config());
    auto trace = obtain_trace(cfg);
    auto pf = make_prefetcher(cfg, "none");
    SimConfig sim;
    sim.cache = cfg.cache;
    sim.warmup_fraction = cfg.warmup_fraction;
    auto rep = run(trace, *pf, sim);
    CHECK(rep.bucket(DemandBucket::UsefulPrefetchFirstHit) == 0);
    CHECK(rep.issued_prefetches == 0);
}

TEST_CASE("identical configs reproduce identical reports") {
    auto once = [] {
        auto cfg = config_from_json(base_config());
        auto trace = obtain_trace(cfg);
        auto pf = make_prefetcher(cfg, cfg.prefetcher_name);
        SimConfig sim;
        sim.cache = cfg.cache;
        sim.warmup_fraction = cfg.warmup_fraction;
        auto rep = run(trace, *pf, sim);
        rep.config_hash = cfg.config_hash;
        return rep.to_json();
    };
    CHECK(once() == once());
}

TEST_CASE("study results serialize losslessly") {
    StudyConfig sc;
    sc.sequences = {"linear"};
    sc.modes = {StudyMode::DeltaPrediction};
    sc.phases = 40;
    sc.early_stop_window = 0;
    sc.workers = 1;
    auto results = run_study(sc);
    REQUIRE(results.size() == 1);
    auto text = study_to_json(results);
    auto back = study_from_json(text);
    REQUIRE(back.size() == 1);
    CHECK(back[0].curve.error_per_phase == results[0].curve.error_per_phase);
    CHECK(back[0].curve.final_error == results[0].curve.final_error);
    CHECK(study_to_json(back) == text);
}

TEST_CASE("study csv is plot-ready long format") {
    StudyConfig sc;
    sc.sequences = {"linear"};
    sc.modes = {StudyMode::NextElement};
    sc.phases = 5;
    sc.early_stop_window = 0;
    sc.workers = 1;
    auto results = run_study(sc);
    auto csv = study_to_csv(results);
    CHECK(csv.find("sequence,mode,shape,phase,error\n") == 0);
    CHECK(csv.find("linear,next,32,0,") != std::string::npos);
}

TEST_CASE("cost estimate is reachable from the experiment config") {
    auto cfg = config_from_json(base_config());
    auto rep = estimate(cfg.nn.net, cfg.nn.assoc_queue_capacity);
    CHECK(rep.fma_per_inference == 5120);
}
