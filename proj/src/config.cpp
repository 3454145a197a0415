#include "nnpf/config.hpp"

#include <fstream>
#include <set>

#include "nnpf/bits.hpp"

namespace nnpf {

namespace {

using json = nlohmann::json;

void require_keys(const json& j, const std::string& section,
                  const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError("section '" + section + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown key '" + it.key() + "' in section '" + section + "'");
}

uint64_t parse_u64(const json& v, const std::string& field) {
    if (v.is_number_unsigned()) return v.get<uint64_t>();
    if (v.is_number_integer()) {
        auto s = v.get<int64_t>();
        if (s < 0) throw ConfigError("field '" + field + "' must be non-negative");
        return uint64_t(s);
    }
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        try {
            return std::stoull(s, nullptr, 0);  // accepts 0x-prefixed hex
        } catch (const std::exception&) {
            throw ConfigError("field '" + field + "' is not a valid integer: " + s);
        }
    }
    throw ConfigError("field '" + field + "' must be an integer or hex string");
}

int64_t parse_i64(const json& v, const std::string& field) {
    if (v.is_number_integer()) return v.get<int64_t>();
    if (v.is_string()) {
        try {
            return std::stoll(v.get<std::string>(), nullptr, 0);
        } catch (const std::exception&) {
            throw ConfigError("field '" + field + "' is not a valid integer");
        }
    }
    throw ConfigError("field '" + field + "' must be an integer or hex string");
}

template <typename T>
void get_to(const json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

void get_u64(const json& j, const char* key, uint64_t& out) {
    if (auto it = j.find(key); it != j.end()) out = parse_u64(*it, key);
}

void get_i64(const json& j, const char* key, int64_t& out) {
    if (auto it = j.find(key); it != j.end()) out = parse_i64(*it, key);
}

PatternSpec pattern_from_json(const json& j) {
    require_keys(j, "trace",
                 {"kind", "length", "path", "base", "line", "stride", "deltas", "offsets",
                  "region_bytes", "region_hop", "states", "cycle", "transitions", "base2",
                  "stride2", "width_bits", "linear_a", "linear_b", "poly_coeffs", "sine_period",
                  "lfsr_seed", "lfsr_taps", "elem_count", "elem_size", "node_size", "repeats",
                  "shuffle_layout"});
    if (!j.contains("kind")) throw ConfigError("trace spec is missing the 'kind' field");
    PatternSpec s;
    auto kind = pattern_kind_from_name(j.at("kind").get<std::string>());
    if (!kind) throw ConfigError("unknown trace kind: " + j.at("kind").get<std::string>());
    s.kind = *kind;
    get_u64(j, "base", s.base);
    get_u64(j, "line", s.line);
    get_i64(j, "stride", s.stride);
    if (j.contains("deltas")) {
        s.deltas.clear();
        for (const auto& d : j.at("deltas")) s.deltas.push_back(parse_i64(d, "deltas"));
    }
    if (j.contains("offsets")) {
        s.offsets.clear();
        for (const auto& o : j.at("offsets")) s.offsets.push_back(parse_u64(o, "offsets"));
    }
    get_u64(j, "region_bytes", s.region_bytes);
    get_u64(j, "region_hop", s.region_hop);
    if (j.contains("states")) {
        s.states.clear();
        for (const auto& v : j.at("states")) s.states.push_back(parse_u64(v, "states"));
    }
    if (j.contains("cycle")) {
        s.cycle.clear();
        for (const auto& v : j.at("cycle")) s.cycle.push_back(size_t(parse_u64(v, "cycle")));
    }
    if (j.contains("transitions"))
        s.transitions = j.at("transitions").get<std::vector<std::vector<double>>>();
    get_u64(j, "base2", s.base2);
    get_i64(j, "stride2", s.stride2);
    if (j.contains("width_bits")) s.width_bits = unsigned(parse_u64(j.at("width_bits"), "width_bits"));
    get_to(j, "linear_a", s.linear_a);
    get_to(j, "linear_b", s.linear_b);
    get_to(j, "poly_coeffs", s.poly_coeffs);
    get_u64(j, "sine_period", s.sine_period);
    get_u64(j, "lfsr_seed", s.lfsr_seed);
    get_to(j, "lfsr_taps", s.lfsr_taps);
    get_u64(j, "elem_count", s.elem_count);
    get_u64(j, "elem_size", s.elem_size);
    get_u64(j, "node_size", s.node_size);
    get_u64(j, "repeats", s.repeats);
    get_to(j, "shuffle_layout", s.shuffle_layout);
    std::string err = s.validate();
    if (!err.empty()) throw ConfigError("invalid trace spec: " + err);
    return s;
}

CacheConfig cache_from_json(const json& j) {
    require_keys(j, "cache",
                 {"size", "ways", "line", "miss_latency", "hit_latency", "prefetch_latency"});
    CacheConfig c;
    get_u64(j, "size", c.size);
    get_to(j, "ways", c.ways);
    get_u64(j, "line", c.line);
    get_to(j, "miss_latency", c.miss_latency);
    get_to(j, "hit_latency", c.hit_latency);
    get_to(j, "prefetch_latency", c.prefetch_latency);
    std::string err = c.validate();
    if (!err.empty()) throw ConfigError("invalid cache config: " + err);
    return c;
}

void nn_from_json(const json& j, NnPrefetcherConfig& nn) {
    require_keys(j, "prefetcher.nn",
                 {"hidden", "precision", "activation", "lstm_cells", "learning_rate", "seed",
                  "assoc_queue", "candidate_window", "prefetch_queue", "hash_enabled",
                  "hash_bits", "threshold_hi", "threshold_lo", "confidence_gate", "force_shadow",
                  "max_delta_min", "max_delta_step", "max_delta_ceiling", "usefulness_window",
                  "usefulness_threshold", "sweeps", "curve_window", "context_depth"});
    get_to(j, "hidden", nn.net.hidden_widths);
    if (j.contains("precision")) {
        auto p = precision_from_name(j.at("precision").get<std::string>());
        if (!p) throw ConfigError("unknown precision: " + j.at("precision").get<std::string>());
        nn.net.precision = *p;
        if (*p == Precision::Q3) nn.net.activation = Activation::Relu;
    }
    if (j.contains("activation")) {
        const std::string a = j.at("activation").get<std::string>();
        if (a == "relu")
            nn.net.activation = Activation::Relu;
        else if (a == "sigmoid")
            nn.net.activation = Activation::Sigmoid;
        else
            throw ConfigError("unknown activation: " + a);
    }
    get_to(j, "lstm_cells", nn.net.lstm_cells);
    get_to(j, "learning_rate", nn.net.learning_rate);
    get_u64(j, "seed", nn.net.rng_seed);
    if (j.contains("assoc_queue"))
        nn.assoc_queue_capacity = size_t(parse_u64(j.at("assoc_queue"), "assoc_queue"));
    get_to(j, "candidate_window", nn.candidate_window);
    if (j.contains("prefetch_queue"))
        nn.prefetch_queue_capacity = size_t(parse_u64(j.at("prefetch_queue"), "prefetch_queue"));
    get_to(j, "hash_enabled", nn.hash_enabled);
    get_to(j, "hash_bits", nn.hash_table_bits);
    get_to(j, "threshold_hi", nn.threshold_hi);
    get_to(j, "threshold_lo", nn.threshold_lo);
    get_to(j, "confidence_gate", nn.confidence_gate);
    get_to(j, "force_shadow", nn.force_shadow);
    get_u64(j, "max_delta_min", nn.max_delta_min);
    get_u64(j, "max_delta_step", nn.max_delta_step);
    get_u64(j, "max_delta_ceiling", nn.max_delta_ceiling);
    get_u64(j, "usefulness_window", nn.usefulness_window);
    get_to(j, "usefulness_threshold", nn.usefulness_threshold);
    get_to(j, "sweeps", nn.max_delta_sweeps);
    get_u64(j, "curve_window", nn.curve_window);
    get_to(j, "context_depth", nn.context_depth);
}

void prefetcher_from_json(const json& j, ExperimentConfig& cfg) {
    require_keys(j, "prefetcher",
                 {"name", "degree", "max_lead_lines", "stride_table", "markov_table",
                  "markov_successors", "ghb_size", "ghb_index", "ghb_history", "sms_pht",
                  "sms_agt", "sms_filter", "sms_region", "vldp_dhb", "vldp_opt", "vldp_dpt",
                  "vldp_page", "nn"});
    get_to(j, "name", cfg.prefetcher_name);
    get_to(j, "degree", cfg.baseline.degree);
    get_i64(j, "max_lead_lines", cfg.baseline.max_lead_lines);
    if (j.contains("stride_table"))
        cfg.baseline.stride_table = size_t(parse_u64(j.at("stride_table"), "stride_table"));
    if (j.contains("markov_table"))
        cfg.baseline.markov_table = size_t(parse_u64(j.at("markov_table"), "markov_table"));
    get_to(j, "markov_successors", cfg.baseline.markov_successors);
    if (j.contains("ghb_size"))
        cfg.baseline.ghb_size = size_t(parse_u64(j.at("ghb_size"), "ghb_size"));
    if (j.contains("ghb_index"))
        cfg.baseline.ghb_index = size_t(parse_u64(j.at("ghb_index"), "ghb_index"));
    get_to(j, "ghb_history", cfg.baseline.ghb_history);
    if (j.contains("sms_pht")) cfg.baseline.sms_pht = size_t(parse_u64(j.at("sms_pht"), "sms_pht"));
    if (j.contains("sms_agt")) cfg.baseline.sms_agt = size_t(parse_u64(j.at("sms_agt"), "sms_agt"));
    if (j.contains("sms_filter"))
        cfg.baseline.sms_filter = size_t(parse_u64(j.at("sms_filter"), "sms_filter"));
    get_u64(j, "sms_region", cfg.baseline.sms_region);
    if (j.contains("vldp_dhb")) cfg.baseline.vldp_dhb = size_t(parse_u64(j.at("vldp_dhb"), "vldp_dhb"));
    if (j.contains("vldp_opt")) cfg.baseline.vldp_opt = size_t(parse_u64(j.at("vldp_opt"), "vldp_opt"));
    if (j.contains("vldp_dpt")) cfg.baseline.vldp_dpt = size_t(parse_u64(j.at("vldp_dpt"), "vldp_dpt"));
    get_u64(j, "vldp_page", cfg.baseline.vldp_page);
    if (j.contains("nn")) nn_from_json(j.at("nn"), cfg.nn);
}

StudyConfig study_from_json_section(const json& j, uint64_t seed) {
    require_keys(j, "study",
                 {"sequences", "modes", "shapes", "lstm_cells", "precision", "learning_rate",
                  "phases", "early_stop", "length", "workers"});
    StudyConfig s;
    s.seed = seed;
    s.sequences = study_sequence_names();
    get_to(j, "sequences", s.sequences);
    if (j.contains("modes")) {
        s.modes.clear();
        for (const auto& m : j.at("modes")) {
            auto mode = study_mode_from_name(m.get<std::string>());
            if (!mode) throw ConfigError("unknown study mode: " + m.get<std::string>());
            s.modes.push_back(*mode);
        }
    } else {
        s.modes = {StudyMode::FunctionEstimation, StudyMode::NextElement,
                   StudyMode::NextWithHistory, StudyMode::DeltaPrediction};
    }
    get_to(j, "shapes", s.shapes);
    get_to(j, "lstm_cells", s.lstm_cells);
    if (j.contains("precision")) {
        auto p = precision_from_name(j.at("precision").get<std::string>());
        if (!p) throw ConfigError("unknown study precision");
        s.precision = *p;
    }
    get_to(j, "learning_rate", s.learning_rate);
    get_u64(j, "phases", s.phases);
    get_u64(j, "early_stop", s.early_stop_window);
    get_u64(j, "length", s.length);
    get_to(j, "workers", s.workers);
    return s;
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
    require_keys(j, "<root>",
                 {"seed", "trace", "cache", "sim", "prefetcher", "study", "compare", "output"});
    ExperimentConfig cfg;
    get_u64(j, "seed", cfg.seed);
    cfg.nn.net.rng_seed = cfg.seed;

    if (j.contains("trace")) {
        const json& t = j.at("trace");
        if (t.contains("path")) {
            require_keys(t, "trace", {"path"});
            cfg.trace_path = t.at("path").get<std::string>();
        } else {
            cfg.trace_spec = pattern_from_json(t);
            get_u64(t, "length", cfg.trace_length);
        }
    }
    if (j.contains("cache")) cfg.cache = cache_from_json(j.at("cache"));
    if (j.contains("sim")) {
        require_keys(j.at("sim"), "sim", {"warmup_fraction"});
        get_to(j.at("sim"), "warmup_fraction", cfg.warmup_fraction);
        if (cfg.warmup_fraction < 0 || cfg.warmup_fraction >= 1)
            throw ConfigError("sim.warmup_fraction must be in [0,1)");
    }
    if (j.contains("prefetcher")) prefetcher_from_json(j.at("prefetcher"), cfg);
    if (j.contains("study")) cfg.study = study_from_json_section(j.at("study"), cfg.seed);
    else cfg.study.seed = cfg.seed;
    if (j.contains("compare")) {
        require_keys(j.at("compare"), "compare", {"prefetchers"});
        get_to(j.at("compare"), "prefetchers", cfg.compare_prefetchers);
    }
    if (j.contains("output")) {
        require_keys(j.at("output"), "output", {"dir"});
        get_to(j.at("output"), "dir", cfg.output_dir);
    }

    // keep line sizes coherent across the cache, baselines and the nn queue
    cfg.baseline.line = cfg.cache.line;
    cfg.nn.line = cfg.cache.line;

    std::string err = cfg.nn.validate();
    if (!err.empty()) throw ConfigError("invalid prefetcher.nn config: " + err);

    cfg.config_hash = fnv1a64(json(j).dump());  // canonical: nlohmann sorts keys
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return config_from_json(j);
}

void apply_override(nlohmann::json& j, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override must look like section.key=value: " + assignment);
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    json* cur = &j;
    size_t start = 0;
    while (true) {
        size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (key.empty()) throw ConfigError("override has an empty path segment: " + assignment);
        if (dot == std::string::npos) {
            json parsed = json::parse(value, nullptr, false);
            (*cur)[key] = parsed.is_discarded() ? json(value) : parsed;
            return;
        }
        cur = &(*cur)[key];
        start = dot + 1;
    }
}

std::vector<AccessRecord> obtain_trace(const ExperimentConfig& cfg) {
    if (cfg.trace_path) return read_trace(*cfg.trace_path);
    if (!cfg.trace_spec) throw ConfigError("config has neither trace spec nor trace path");
    if (is_kernel(cfg.trace_spec->kind)) return gen_kernel(*cfg.trace_spec, cfg.seed);
    if (is_value_series(cfg.trace_spec->kind))
        throw ConfigError("value-series kinds drive the study, not the simulator");
    return gen_pattern(*cfg.trace_spec, cfg.trace_length, cfg.seed);
}

std::unique_ptr<Prefetcher> make_prefetcher(const ExperimentConfig& cfg,
                                            const std::string& name) {
    if (name == "nn") return std::make_unique<NnPrefetcher>(cfg.nn);
    try {
        return make_baseline(name, cfg.baseline);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

}  // namespace nnpf
