#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <json.hpp>

#include "nnpf/config.hpp"
#include "nnpf/costmodel.hpp"

namespace fs = std::filesystem;
using nnpf::ConfigError;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::string prefetcher;
    std::vector<std::string> overrides;
    uint64_t seed = 0;
    bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool config_required = true) {
    auto* copt = cmd->add_option("-c,--config", o.config_path, "experiment config (json)");
    if (config_required) copt->required();
    cmd->add_option("-o,--out", o.out_dir, "output directory override");
    cmd->add_option("-p,--prefetcher", o.prefetcher, "prefetcher name override");
    cmd->add_option("--set", o.overrides, "dotted config override, e.g. sim.warmup_fraction=0.1");
    cmd->add_option("--seed", o.seed, "seed override")->each([&o](const std::string&) {
        o.seed_set = true;
    });
}

nnpf::ExperimentConfig load(const CommonOpts& o) {
    nlohmann::json j;
    if (!o.config_path.empty()) {
        std::ifstream f(o.config_path);
        if (!f) throw ConfigError("cannot open config file: " + o.config_path);
        try {
            f >> j;
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(std::string("config parse error: ") + e.what());
        }
    } else {
        j = nlohmann::json::object();
    }
    for (const auto& ov : o.overrides) nnpf::apply_override(j, ov);
    if (o.seed_set) j["seed"] = o.seed;
    if (!o.prefetcher.empty()) j["prefetcher"]["name"] = o.prefetcher;
    if (!o.out_dir.empty()) j["output"]["dir"] = o.out_dir;
    return nnpf::config_from_json(j);
}

fs::path ensure_outdir(const nnpf::ExperimentConfig& cfg) {
    fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream f(p, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << content;
}

int cmd_gen(const CommonOpts& o) {
    auto cfg = load(o);
    if (!cfg.trace_spec) throw ConfigError("gen needs a trace generator spec, not a path");
    auto trace = nnpf::obtain_trace(cfg);
    auto dir = ensure_outdir(cfg);
    auto path = dir / "trace.bin";
    nnpf::write_trace(path.string(), trace);

    std::set<uint64_t> lines;
    for (const auto& r : trace) lines.insert(r.addr / cfg.cache.line);
    std::cout << "wrote " << path.string() << "\n"
              << "records:        " << trace.size() << "\n"
              << "distinct lines: " << lines.size() << "\n"
              << "first addr:     0x" << std::hex << trace.front().addr << "\n"
              << "last addr:      0x" << trace.back().addr << std::dec << "\n";
    return 0;
}

nnpf::MetricsReport run_once(const nnpf::ExperimentConfig& cfg, const std::string& name,
                             const std::vector<nnpf::AccessRecord>& trace) {
    auto pf = nnpf::make_prefetcher(cfg, name);
    nnpf::SimConfig sim;
    sim.cache = cfg.cache;
    sim.warmup_fraction = cfg.warmup_fraction;
    auto rep = nnpf::run(trace, *pf, sim);
    rep.config_hash = cfg.config_hash;
    return rep;
}

int cmd_run(const CommonOpts& o) {
    auto cfg = load(o);
    auto trace = nnpf::obtain_trace(cfg);
    auto rep = run_once(cfg, cfg.prefetcher_name, trace);
    auto dir = ensure_outdir(cfg);
    write_file(dir / "report.json", rep.to_json());
    write_file(dir / "report.txt", rep.to_text());
    std::cout << rep.to_text();
    std::cout << "wrote " << (dir / "report.json").string() << "\n";
    return 0;
}

int cmd_study(const CommonOpts& o) {
    auto cfg = load(o);
    auto results = nnpf::run_study(cfg.study);
    auto dir = ensure_outdir(cfg);
    write_file(dir / "study.json", nnpf::study_to_json(results));
    write_file(dir / "study.csv", nnpf::study_to_csv(results));
    for (const auto& r : results)
        std::cout << r.sequence << " / " << nnpf::study_mode_name(r.mode) << " / " << r.shape
                  << ": phases=" << r.curve.error_per_phase.size()
                  << " final_error=" << r.curve.final_error
                  << " bit_accuracy=" << r.curve.final_bit_accuracy << "\n";
    std::cout << "wrote " << (dir / "study.json").string() << "\n";
    return 0;
}

int cmd_compare(const CommonOpts& o) {
    auto cfg = load(o);
    auto trace = nnpf::obtain_trace(cfg);
    std::vector<std::future<nnpf::MetricsReport>> jobs;
    for (const auto& name : cfg.compare_prefetchers)
        jobs.push_back(std::async(std::launch::async,
                                  [&cfg, name, &trace] { return run_once(cfg, name, trace); }));

    nlohmann::ordered_json table = nlohmann::ordered_json::array();
    std::ostringstream text;
    text << "prefetcher        coverage   accuracy   speedup    useful     useless\n";
    for (size_t i = 0; i < jobs.size(); ++i) {
        auto rep = jobs[i].get();
        nlohmann::ordered_json row;
        row["prefetcher"] = cfg.compare_prefetchers[i];
        row["coverage"] = rep.coverage;
        row["accuracy"] = rep.accuracy;
        row["speedup_proxy"] = rep.speedup_proxy;
        row["useful"] = rep.bucket(nnpf::DemandBucket::UsefulPrefetchFirstHit);
        row["useless"] = rep.useless_prefetches;
        table.push_back(row);
        char line[160];
        std::snprintf(line, sizeof line, "%-16s %9.4f %9.4f %9.4f %9llu %9llu\n",
                      cfg.compare_prefetchers[i].c_str(), rep.coverage, rep.accuracy,
                      rep.speedup_proxy,
                      static_cast<unsigned long long>(
                          rep.bucket(nnpf::DemandBucket::UsefulPrefetchFirstHit)),
                      static_cast<unsigned long long>(rep.useless_prefetches));
        text << line;
    }
    auto dir = ensure_outdir(cfg);
    write_file(dir / "compare.json", table.dump(2));
    write_file(dir / "compare.txt", text.str());
    std::cout << text.str();
    std::cout << "wrote " << (dir / "compare.json").string() << "\n";
    return 0;
}

int cmd_cost(const CommonOpts& o) {
    auto cfg = load(o);
    auto report = nnpf::estimate(cfg.nn.net, cfg.nn.assoc_queue_capacity);
    std::cout << report.to_text();
    return 0;
}

int cmd_dump_state(const CommonOpts& o) {
    auto cfg = load(o);
    auto trace = nnpf::obtain_trace(cfg);
    nnpf::NnPrefetcher pf(cfg.nn);
    nnpf::SimConfig sim;
    sim.cache = cfg.cache;
    sim.warmup_fraction = cfg.warmup_fraction;
    nnpf::run(trace, pf, sim);
    auto d = pf.dump_state();
    nlohmann::ordered_json j;
    j["assoc_queue_size"] = d.assoc_queue_size;
    j["prefetch_queue_size"] = d.prefetch_queue_size;
    j["max_delta_limit"] = d.max_delta_limit;
    j["max_delta_settled"] = d.max_delta_settled;
    j["sweeps_done"] = d.sweeps_done;
    j["hash_valid_entries"] = d.hash_valid_entries;
    j["hash_capacity"] = d.hash_capacity;
    j["network_steps"] = d.step_count;
    std::cout << j.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"nnpf: trace-driven neural-network prefetcher laboratory"};
    app.require_subcommand(1);

    CommonOpts gen_o, run_o, study_o, compare_o, cost_o, dump_o;
    auto* gen = app.add_subcommand("gen", "generate a trace file from the config spec");
    add_common(gen, gen_o);
    auto* runc = app.add_subcommand("run", "simulate one prefetcher over the trace");
    add_common(runc, run_o);
    auto* study = app.add_subcommand("study", "sequence-learning study over value series");
    add_common(study, study_o);
    auto* compare = app.add_subcommand("compare", "run several prefetchers over one trace");
    add_common(compare, compare_o);
    auto* cost = app.add_subcommand("cost", "hardware cost estimate for the configured network");
    add_common(cost, cost_o, false);
    auto* dump = app.add_subcommand("dump-state", "run the nn prefetcher and dump its state");
    add_common(dump, dump_o);

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return cmd_gen(gen_o);
        if (runc->parsed()) return cmd_run(run_o);
        if (study->parsed()) return cmd_study(study_o);
        if (compare->parsed()) return cmd_compare(compare_o);
        if (cost->parsed()) return cmd_cost(cost_o);
        if (dump->parsed()) return cmd_dump_state(dump_o);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
